"""Cable actuation: discrete PID, DC motor plant, command execution.

The motor winds a cable on a spool; spool angle maps linearly to hand
closure. An inner PID velocity loop runs at the control rate; an outer
proportional position loop turns grip/release goals into velocity
setpoints. All numerics are plain floats stepped at a fixed dt, so a
run is reproducible bit for bit.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .intent import Command, Token


class ActuationError(ValueError):
    pass


class NonpositiveDt(ActuationError):
    pass


class NonpositiveStroke(ActuationError):
    pass


class UnknownCommand(ActuationError):
    pass


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float = 0.0


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    output: float = 0.0


def pid_step(gains: PidGains, state: PidState, error: float, dt: float) -> tuple[PidState, float]:
    """One PID update. Output is clamped to [-1, 1].

    Integral uses the trapezoid rule; derivative is a backward
    difference. Anti-windup: while the output is saturated the integral
    keeps its previous value, and the stored integral is additionally
    clamped so the integral term alone cannot exceed the output range.
    """
    if dt <= 0.0:
        raise NonpositiveDt(f"dt={dt}")
    candidate = state.integral + 0.5 * (error + state.prev_error) * dt
    if gains.ki > 0.0:
        bound = 1.0 / gains.ki
        candidate = min(max(candidate, -bound), bound)
    derivative = (error - state.prev_error) / dt
    raw = gains.kp * error + gains.ki * candidate + gains.kd * derivative
    if raw > 1.0:
        u, integral = 1.0, state.integral
    elif raw < -1.0:
        u, integral = -1.0, state.integral
    else:
        u, integral = raw, candidate
    return PidState(integral=integral, prev_error=error, output=u), u


@dataclass(frozen=True)
class PlantParams:
    """Brushed DC motor with inertia and viscous friction.

    Electrical time constant is neglected (current is algebraic in
    voltage and speed). Voltage is the commanded fraction of the supply,
    hard-clamped at the driver limit, which implicitly bounds torque.
    """

    J: float = 2.0e-5       # rotor+spool inertia, kg m^2
    b: float = 1.0e-4       # viscous friction, N m s/rad
    Kt: float = 0.05        # torque constant, N m/A
    Ke: float = 0.05        # back-EMF constant, V s/rad
    Rm: float = 2.0         # winding resistance, ohm
    V_supply: float = 11.1  # battery voltage, V
    V_max: float = 8.0      # driver clamp, V

    def __post_init__(self) -> None:
        if min(self.J, self.b, self.Kt, self.Ke, self.Rm, self.V_supply, self.V_max) <= 0.0:
            raise ActuationError("plant parameters must be positive")
        if self.V_max > self.V_supply:
            raise ActuationError("driver clamp cannot exceed the supply voltage")

    def voltage(self, u: float) -> float:
        return min(max(u * self.V_supply, -self.V_max), self.V_max)

    def current(self, u: float, omega: float) -> float:
        return (self.voltage(u) - self.Ke * omega) / self.Rm

    def torque_bound(self, omega_max: float) -> float:
        """Largest torque magnitude reachable at speeds up to omega_max."""
        return self.Kt * (self.V_max + self.Ke * abs(omega_max)) / self.Rm


@dataclass(frozen=True)
class MotorState:
    theta: float = 0.0  # spool angle, rad
    omega: float = 0.0  # spool speed, rad/s


def plant_step(params: PlantParams, state: MotorState, u: float, dt: float) -> MotorState:
    """Integrate the motor one step with RK4; voltage held over the step."""
    if dt <= 0.0:
        raise NonpositiveDt(f"dt={dt}")
    v = params.voltage(u)
    a = params.Kt * v / (params.Rm * params.J)
    decay = (params.Kt * params.Ke / params.Rm + params.b) / params.J

    def f(omega: float) -> tuple[float, float]:
        return omega, a - decay * omega

    th, om = state.theta, state.omega
    k1t, k1o = f(om)
    k2t, k2o = f(om + 0.5 * dt * k1o)
    k3t, k3o = f(om + 0.5 * dt * k2o)
    k4t, k4o = f(om + dt * k3o)
    theta = th + dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    omega = om + dt / 6.0 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o)
    return MotorState(theta=theta, omega=omega)


def closure_of(theta: float, spool_radius_m: float, full_stroke_m: float) -> float:
    """Hand closure in [0, 1] from spool angle.

    Cable pulled is theta * spool_radius; closure saturates at the
    stroke ends.
    """
    if full_stroke_m <= 0.0:
        raise NonpositiveStroke(f"full stroke {full_stroke_m}")
    return min(max(theta * spool_radius_m / full_stroke_m, 0.0), 1.0)


@dataclass(frozen=True)
class ControllerConfig:
    gains: PidGains = PidGains(kp=0.001, ki=0.12, kd=0.0)
    outer_kp: float = 6.0           # position loop, 1/s
    delta_v: float = 4.0            # velocity setpoint clamp, rad/s
    spool_radius_m: float = 0.015   # 30 mm pulley
    full_stroke_m: float = 0.06     # cable travel for fully closed
    dt: float = 0.01                # control period, s

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise NonpositiveDt(f"dt={self.dt}")
        if self.spool_radius_m <= 0.0 or self.full_stroke_m <= 0.0:
            raise ActuationError("geometry must be positive")
        if self.delta_v <= 0.0 or self.outer_kp <= 0.0:
            raise ActuationError("outer loop gains must be positive")

    @property
    def theta_closed(self) -> float:
        return self.full_stroke_m / self.spool_radius_m


@dataclass(frozen=True)
class Telemetry:
    t: float
    setpoint: float
    omega: float
    u: float
    closure: float
    phase: str

    def to_json(self) -> dict:
        return {"t": round(self.t, 6), "setpoint": round(self.setpoint, 9),
                "omega": round(self.omega, 9), "u": round(self.u, 9),
                "closure": round(self.closure, 9), "phase": self.phase}


class CommandMailbox:
    """Single-slot thread-safe mailbox; a newer command replaces the old."""

    def __init__(self):
        self._slot: Command | None = None
        self._lock = threading.Lock()

    def post(self, cmd: Command) -> None:
        with self._lock:
            self._slot = cmd

    def take(self) -> Command | None:
        with self._lock:
            cmd, self._slot = self._slot, None
            return cmd


class Controller:
    """Actuation-side consumer of G/R/S commands.

    G closes toward full stroke, R opens toward zero, S freezes the
    velocity setpoint at zero. tick() consumes at most one command,
    computes the velocity setpoint from the outer position loop, runs
    the PID, and steps the plant.
    """

    def __init__(self, cfg: ControllerConfig = ControllerConfig(),
                 plant: PlantParams = PlantParams()):
        self.cfg = cfg
        self.params = plant
        self.mailbox = CommandMailbox()
        self.mode = "idle"
        self.motor = MotorState()
        self.pid = PidState()
        self.t = 0.0
        self.last_u = 0.0

    def execute(self, cmd: Command) -> None:
        if cmd.token is Token.GRIP:
            self.mode = "closing"
        elif cmd.token is Token.RELEASE:
            self.mode = "opening"
        elif cmd.token is Token.STOP:
            self.mode = "stopped"
        else:
            raise UnknownCommand(str(cmd.token))

    def velocity_setpoint(self) -> float:
        if self.mode == "closing":
            goal = self.cfg.theta_closed
        elif self.mode == "opening":
            goal = 0.0
        else:
            return 0.0
        raw = self.cfg.outer_kp * (goal - self.motor.theta)
        return min(max(raw, -self.cfg.delta_v), self.cfg.delta_v)

    @property
    def closure(self) -> float:
        return closure_of(self.motor.theta, self.cfg.spool_radius_m, self.cfg.full_stroke_m)

    def tick(self) -> Telemetry:
        cmd = self.mailbox.take()
        if cmd is not None:
            self.execute(cmd)
        sp = self.velocity_setpoint()
        self.pid, u = pid_step(self.cfg.gains, self.pid, sp - self.motor.omega, self.cfg.dt)
        self.motor = plant_step(self.params, self.motor, u, self.cfg.dt)
        self.t += self.cfg.dt
        self.last_u = u
        return Telemetry(t=self.t, setpoint=sp, omega=self.motor.omega,
                         u=u, closure=self.closure, phase=self.mode)


def velocity_step_response(gains: PidGains, params: PlantParams, setpoint: float,
                           duration_s: float, dt: float = 0.01) -> list[tuple[float, float, float]]:
    """Drive the inner velocity loop at a constant setpoint.

    Returns (t, omega, u) samples, one per control step. Used to
    characterize the loop without the outer position logic.
    """
    motor = MotorState()
    pid = PidState()
    out = []
    t = 0.0
    steps = int(round(duration_s / dt))
    for _ in range(steps):
        pid, u = pid_step(gains, pid, setpoint - motor.omega, dt)
        motor = plant_step(params, motor, u, dt)
        t += dt
        out.append((t, motor.omega, u))
    return out
