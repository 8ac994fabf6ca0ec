"""Deterministic grasp-assistance stack.

Perception (mock open-vocabulary detection over rendered depth scenes),
multimodal intent (stability-gated vision plus speech overrides), cable
actuation (PID velocity loop around a DC motor model), wire protocols,
and the evaluation tooling that scores all of it.
"""

__version__ = "0.1.0"
