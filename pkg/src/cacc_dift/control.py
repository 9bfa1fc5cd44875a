"""Adaptive PD control law with gated acceleration feedforward.

Each follower combines a PD term on the constant-time-headway spacing error
with up to two first-order-lag feedforward terms built from the broadcast
commands of its two predecessors. Which feedforward terms are active, and
which gain row is used, depends on the current V2V link state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping

from .dynamics import VehicleState


class Mode(IntEnum):
    CACC1 = 0
    CACC2 = 1
    CACC3 = 2
    ACC = 3


MODE_FLAGS = {
    Mode.CACC1: (1, 1),
    Mode.CACC2: (1, 0),
    Mode.CACC3: (0, 1),
    Mode.ACC: (0, 0),
}
FLAGS_MODE = {flags: mode for mode, flags in MODE_FLAGS.items()}

DIFT = "DIFT"
FIFT = "FIFT"
SCHEMES = (DIFT, FIFT)

# Derivative of the spacing error: "previous" uses the last applied command
# for the own-acceleration term, "implicit" solves the resulting algebraic
# loop u = w^2 e + w (dv - h u) + ff exactly for the current command.
RATE_PREVIOUS = "previous"
RATE_IMPLICIT = "implicit"
RATE_MODES = (RATE_PREVIOUS, RATE_IMPLICIT)


class ConfigError(ValueError):
    """Invalid controller or platoon configuration."""


@dataclass(frozen=True)
class ControllerGains:
    omega_k: float
    h_d: float
    alpha: int
    beta: int

    def __post_init__(self):
        if not (self.omega_k > 0 and self.h_d > 0):
            raise ConfigError(
                f"omega_k and h_d must be positive, got omega_k={self.omega_k}, h_d={self.h_d}"
            )
        if self.alpha not in (0, 1) or self.beta not in (0, 1):
            raise ConfigError(f"alpha/beta must be 0 or 1, got {self.alpha}/{self.beta}")

    @property
    def mode(self) -> Mode:
        return FLAGS_MODE[(self.alpha, self.beta)]

    @property
    def kp(self) -> float:
        return self.omega_k * self.omega_k

    @property
    def kd(self) -> float:
        return self.omega_k


def make_gains(mode: Mode | str, omega_k: float, h_d: float) -> ControllerGains:
    mode = Mode[mode] if isinstance(mode, str) else Mode(mode)
    alpha, beta = MODE_FLAGS[mode]
    return ControllerGains(omega_k, h_d, alpha, beta)


DEFAULT_GAINS: dict[Mode, ControllerGains] = {
    Mode.CACC1: make_gains(Mode.CACC1, 0.8, 1.0),
    Mode.CACC2: make_gains(Mode.CACC2, 0.8, 1.0),
    Mode.CACC3: make_gains(Mode.CACC3, 0.9, 1.0),
    Mode.ACC: make_gains(Mode.ACC, 1.45, 1.0),
}


@dataclass(frozen=True)
class ControlInputs:
    """Previous-step quantities seen by follower ``i``.

    ``u_pred1_prev``/``u_pred2_prev`` are ``None`` when the corresponding
    link is down (or, for ``u_pred2_prev``, when there is no second
    predecessor).
    """

    x_pred: float
    v_pred: float
    x_self: float
    v_self: float
    u_self_prev: float
    u_pred1_prev: float | None
    u_pred2_prev: float | None
    L: float


def gate_inputs(inputs: ControlInputs, alpha: int, beta: int) -> ControlInputs:
    """Strip the predecessor commands whose links failed."""
    return ControlInputs(
        inputs.x_pred,
        inputs.v_pred,
        inputs.x_self,
        inputs.v_self,
        inputs.u_self_prev,
        inputs.u_pred1_prev if alpha else None,
        inputs.u_pred2_prev if beta else None,
        inputs.L,
    )


def spacing_error(inputs: ControlInputs, gains: ControllerGains) -> float:
    return inputs.x_pred - inputs.x_self - gains.h_d * inputs.v_self - inputs.L


def spacing_error_rate(inputs: ControlInputs, gains: ControllerGains) -> float:
    return inputs.v_pred - inputs.v_self - gains.h_d * inputs.u_self_prev


def feedforward_step(ff_state: float, gate: int, u_pred_prev: float, T: float, h_d: float) -> float:
    """One forward-Euler step of the lag y' = (gate*u - y)/h_d."""
    if not (T > 0 and h_d > 0):
        raise ConfigError(f"T and h_d must be positive, got T={T}, h_d={h_d}")
    if T >= h_d:
        raise ConfigError(f"explicit filter update unstable: T={T} >= h_d={h_d}")
    drive = u_pred_prev if gate else 0.0
    return ff_state + (T / h_d) * (drive - ff_state)


def control_command(
    inputs: ControlInputs,
    gains: ControllerGains,
    state: VehicleState,
    T: float,
    *,
    rate: str = RATE_PREVIOUS,
    u_min: float | None = None,
    u_max: float | None = None,
) -> tuple[float, float, float]:
    """Return ``(u, new_ff_1, new_ff_2)`` for one follower at one step.

    Feedforward inputs are gated by both the gain row's flags and by the
    availability of the predecessor command in ``inputs``.
    """
    u1 = inputs.u_pred1_prev
    u2 = inputs.u_pred2_prev
    ff1 = feedforward_step(state.ff_state_1, gains.alpha if u1 is not None else 0, u1 or 0.0, T, gains.h_d)
    ff2 = feedforward_step(state.ff_state_2, gains.beta if u2 is not None else 0, u2 or 0.0, T, gains.h_d)
    e = spacing_error(inputs, gains)
    if rate == RATE_PREVIOUS:
        u = gains.kp * e + gains.kd * spacing_error_rate(inputs, gains) + ff1 + ff2
    elif rate == RATE_IMPLICIT:
        dv = inputs.v_pred - inputs.v_self
        u = (gains.kp * e + gains.kd * dv + ff1 + ff2) / (1.0 + gains.kd * gains.h_d)
    else:
        raise ConfigError(f"unknown rate mode {rate!r}")
    if u_min is not None and u < u_min:
        u = u_min
    if u_max is not None and u > u_max:
        u = u_max
    if not math.isfinite(u):
        raise ArithmeticError(f"non-finite control command {u}")
    return u, ff1, ff2


def select_mode(
    alpha: int,
    beta: int,
    vehicle_index: int,
    scheme: str,
    gains_table: Mapping[Mode, ControllerGains] = DEFAULT_GAINS,
) -> ControllerGains:
    """Map link indicators to the gain row a follower should use.

    Vehicle 1 has only one predecessor, so its second link is ignored and its
    full-information row is CACC2. Under FIFT any failed link drops the
    follower to ACC.
    """
    if vehicle_index < 1:
        raise ValueError("mode selection applies to followers only (index >= 1)")
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    if vehicle_index == 1:
        beta = 0
    if scheme == FIFT and not (alpha == 1 and (beta == 1 or vehicle_index == 1)):
        return gains_table[Mode.ACC]
    return gains_table[FLAGS_MODE[(int(alpha), int(beta))]]
