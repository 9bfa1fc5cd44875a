"""Idealized longitudinal vehicle dynamics (double integrator)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

ZOH = "zoh"
EULER = "euler"
INTEGRATORS = (ZOH, EULER)


class SimulationError(RuntimeError):
    """Raised when the simulated state becomes non-finite."""


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one vehicle plus its two feedforward filter states."""

    position: float
    velocity: float
    accel_cmd: float = 0.0
    ff_state_1: float = 0.0
    ff_state_2: float = 0.0


def step_plant(
    state: VehicleState,
    u: float,
    T: float,
    integrator: str = ZOH,
    *,
    vehicle: int | None = None,
    step: int | None = None,
) -> VehicleState:
    """Advance ``state`` by one sample period under constant acceleration ``u``.

    The default ``zoh`` update is the exact solution of x'' = u for a
    piecewise-constant command. ``euler`` drops the 0.5*u*T**2 term.
    """
    if not T > 0:
        raise ValueError(f"sample period must be positive, got {T}")
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown plant integrator {integrator!r}")
    values = (state.position, state.velocity, u)
    if not all(math.isfinite(x) for x in values):
        raise SimulationError(
            f"non-finite plant input at vehicle {vehicle}, step {step}: "
            f"position={state.position}, velocity={state.velocity}, u={u}"
        )
    position = state.position + state.velocity * T
    if integrator == ZOH:
        position += 0.5 * u * T * T
    return replace(state, position=position, velocity=state.velocity + u * T, accel_cmd=u)
