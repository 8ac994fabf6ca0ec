import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovgrasp.actuation import (ActuationError, CommandMailbox, Controller,
                               ControllerConfig, MotorState, NonpositiveDt,
                               NonpositiveStroke, PidGains, PidState,
                               PlantParams, Telemetry, closure_of, pid_step,
                               plant_step, velocity_step_response)
from ovgrasp.intent import Command, Token


class TestPidStep:
    def test_trapezoid_worked_example(self):
        # constant error 0.4 from the start, pure integral ki=1:
        # 200 steps of dt=0.01 accumulate exactly 0.4 * 2.0 = 0.8
        gains = PidGains(kp=0.0, ki=1.0, kd=0.0)
        state = PidState(prev_error=0.4)
        u = 0.0
        for _ in range(200):
            state, u = pid_step(gains, state, 0.4, 0.01)
        assert abs(u - 0.8) <= 1e-6

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=60),
           st.floats(0, 5), st.floats(0, 5), st.floats(0, 1))
    @settings(max_examples=100)
    def test_output_always_in_range(self, errors, kp, ki, kd):
        gains = PidGains(kp=kp, ki=ki, kd=kd)
        state = PidState()
        for e in errors:
            state, u = pid_step(gains, state, e, 0.01)
            assert -1.0 <= u <= 1.0
            assert state.output == u

    def test_integral_clamped_to_antiwindup_bound(self):
        gains = PidGains(kp=0.0, ki=2.0, kd=0.0)
        state = PidState()
        for _ in range(5000):
            state, _ = pid_step(gains, state, 100.0, 0.01)
        assert state.integral <= 1.0 / gains.ki + 1e-12

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(NonpositiveDt):
            pid_step(PidGains(1, 0, 0), PidState(), 0.1, 0.0)

    def test_antiwindup_reduces_overshoot(self):
        # same loop with a naive accumulator for comparison; a heavy rotor
        # keeps the loop saturated long enough for windup to show
        gains = PidGains(kp=0.001, ki=0.12, kd=0.0)
        params = PlantParams(J=2e-3)
        setpoint = 120.0

        def run(naive: bool) -> float:
            motor = MotorState()
            integral = 0.0
            prev = 0.0
            state = PidState()
            peak = 0.0
            for _ in range(3000):
                e = setpoint - motor.omega
                if naive:
                    integral += 0.5 * (e + prev) * 0.01
                    prev = e
                    u = min(max(gains.kp * e + gains.ki * integral, -1.0), 1.0)
                else:
                    state, u = pid_step(gains, state, e, 0.01)
                motor = plant_step(params, motor, u, 0.01)
                peak = max(peak, motor.omega)
            return peak

        assert run(naive=False) < run(naive=True)


class TestPlant:
    def test_no_load_speed_first_order_response(self):
        # with negligible friction the speed approaches V_max/Ke along
        # a first-order curve; check against the closed form
        params = PlantParams(b=1e-12)
        decay = (params.Kt * params.Ke / params.Rm + params.b) / params.J
        a = params.Kt * params.V_max / (params.Rm * params.J)
        no_load = params.V_max / params.Ke
        tau = 1.0 / decay
        state = MotorState()
        dt = 0.001
        steps = int(round(5 * tau / dt))
        t = 0.0
        for _ in range(steps):
            state = plant_step(params, state, 1.0, dt)
            t += dt
            expected = (a / decay) * (1.0 - math.exp(-decay * t))
            assert state.omega == pytest.approx(expected, rel=5e-4)
        assert abs(state.omega - no_load) / no_load <= 0.01

    @given(st.floats(1e-6, 1e-3), st.floats(1e-5, 1e-2), st.floats(0.1, 300.0))
    @settings(max_examples=60)
    def test_coastdown_speed_nonincreasing(self, J, b, omega0):
        params = PlantParams(J=J, b=b)
        # keep decay * dt small so the integrator stays in its stable region
        decay = (params.Kt * params.Ke / params.Rm + params.b) / params.J
        dt = min(0.005, 0.5 / decay)
        state = MotorState(omega=omega0)
        prev = abs(state.omega)
        for _ in range(50):
            state = plant_step(params, state, 0.0, dt)
            assert abs(state.omega) <= prev + 1e-12
            prev = abs(state.omega)

    def test_voltage_clamp(self):
        params = PlantParams()
        assert params.voltage(1.0) == 8.0
        assert params.voltage(-1.0) == -8.0
        assert params.voltage(0.5) == pytest.approx(5.55)

    def test_param_validation(self):
        with pytest.raises(ActuationError):
            PlantParams(J=0.0)
        with pytest.raises(ActuationError):
            PlantParams(V_max=12.0, V_supply=11.1)

    def test_torque_bound_formula(self):
        params = PlantParams()
        assert params.torque_bound(100.0) == pytest.approx(
            0.05 * (8.0 + 0.05 * 100.0) / 2.0)


class TestClosure:
    def test_worked_example(self):
        assert closure_of(2.0, 0.015, 0.06) == 0.5

    def test_clamped(self):
        assert closure_of(-1.0, 0.015, 0.06) == 0.0
        assert closure_of(100.0, 0.015, 0.06) == 1.0

    def test_rejects_nonpositive_stroke(self):
        with pytest.raises(NonpositiveStroke):
            closure_of(1.0, 0.015, 0.0)

    def test_theta_closed_default_geometry(self):
        assert ControllerConfig().theta_closed == pytest.approx(4.0)


class TestVelocityLoop:
    def test_step_settles_within_band_by_one_second(self):
        cfg = ControllerConfig()
        samples = velocity_step_response(cfg.gains, PlantParams(), 4.0, 2.0)
        band = 0.02 * 4.0
        settled_from = None
        for t, omega, _ in samples:
            if abs(omega - 4.0) <= band:
                if settled_from is None:
                    settled_from = t
            else:
                settled_from = None
        assert settled_from is not None and settled_from <= 1.0

    def test_bit_identical_repeats(self):
        cfg = ControllerConfig()
        a = velocity_step_response(cfg.gains, PlantParams(), 4.0, 1.0)
        b = velocity_step_response(cfg.gains, PlantParams(), 4.0, 1.0)
        assert a == b


class TestMailbox:
    def test_newest_wins(self):
        box = CommandMailbox()
        box.post(Command(Token.GRIP, 0, "vision"))
        box.post(Command(Token.STOP, 1, "speech"))
        got = box.take()
        assert got is not None and got.token is Token.STOP
        assert box.take() is None


class TestController:
    def test_grip_closes_and_holds(self):
        ctl = Controller()
        ctl.mailbox.post(Command(Token.GRIP, 0, "vision"))
        closed_at = None
        for i in range(300):
            sample = ctl.tick()
            if closed_at is None and sample.closure >= 0.95:
                closed_at = sample.t
        assert closed_at is not None and closed_at <= 2.0
        assert ctl.closure >= 0.95

    def test_release_reopens(self):
        ctl = Controller()
        ctl.mailbox.post(Command(Token.GRIP, 0, "vision"))
        for _ in range(200):
            ctl.tick()
        ctl.mailbox.post(Command(Token.RELEASE, 0, "speech"))
        for _ in range(200):
            ctl.tick()
        assert ctl.closure <= 0.02

    def test_stop_freezes_velocity(self):
        ctl = Controller()
        ctl.mailbox.post(Command(Token.GRIP, 0, "vision"))
        for _ in range(50):
            ctl.tick()
        ctl.mailbox.post(Command(Token.STOP, 0, "speech"))
        theta_at_stop = ctl.motor.theta
        for _ in range(200):
            sample = ctl.tick()
            assert sample.setpoint == 0.0
        assert abs(ctl.motor.omega) < 0.05
        assert abs(ctl.motor.theta - theta_at_stop) < 0.25

    def test_torque_bound_never_violated(self):
        import numpy as np
        rng = np.random.default_rng(17)
        ctl = Controller()
        tokens = [Token.GRIP, Token.RELEASE, Token.STOP]
        omega_max = 0.0
        for i in range(2000):
            if rng.random() < 0.02:
                tok = tokens[int(rng.integers(0, 3))]
                cause = "vision" if tok is Token.GRIP else "speech"
                ctl.mailbox.post(Command(tok, i, cause))
            sample = ctl.tick()
            omega_max = max(omega_max, abs(sample.omega))
            torque = abs(ctl.params.Kt * ctl.params.current(sample.u, sample.omega))
            assert torque <= ctl.params.torque_bound(omega_max) + 1e-12

    def test_telemetry_json_keys(self):
        sample = Controller().tick()
        doc = sample.to_json()
        assert set(doc) == {"t", "setpoint", "omega", "u", "closure", "phase"}
        assert isinstance(doc["phase"], str)
