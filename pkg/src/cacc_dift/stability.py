"""Frequency-domain string-stability analysis.

Transfer functions are rational functions of ``s`` stored as ascending
coefficient arrays. The per-hop worst-case transfer functions assume the
upstream head-to-tail responses are exactly 1 (marginal string stability),
which makes each mode's condition a property of a single hop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import optimize

from .control import DEFAULT_GAINS, ConfigError, ControllerGains, Mode

GOLDEN_BOUNDARY = (math.sqrt(5.0) - 1.0) / 2.0
ACC_BOUNDARY = math.sqrt(2.0)
STABLE_TOL = 1e-9


def _trim(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1].copy()


@dataclass(frozen=True, eq=False)
class TransferFunction:
    num: np.ndarray
    den: np.ndarray

    def __init__(self, num, den):
        num, den = _trim(num), _trim(den)
        if not np.any(den):
            raise ZeroDivisionError("denominator is identically zero")
        # cancel common powers of s so DC evaluation is well defined
        k = 0
        while k < min(num.size, den.size) - 1 and num[k] == 0 and den[k] == 0:
            k += 1
        if k and np.any(num):
            num, den = num[k:], den[k:]
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def coerce(cls, other) -> TransferFunction:
        if isinstance(other, TransferFunction):
            return other
        return cls([float(other)], [1.0])

    def __add__(self, other):
        o = TransferFunction.coerce(other)
        return TransferFunction(
            P.polyadd(P.polymul(self.num, o.den), P.polymul(o.num, self.den)),
            P.polymul(self.den, o.den),
        )

    __radd__ = __add__

    def __neg__(self):
        return TransferFunction(-self.num, self.den)

    def __sub__(self, other):
        return self + (-TransferFunction.coerce(other))

    def __rsub__(self, other):
        return TransferFunction.coerce(other) - self

    def __mul__(self, other):
        o = TransferFunction.coerce(other)
        return TransferFunction(P.polymul(self.num, o.num), P.polymul(self.den, o.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = TransferFunction.coerce(other)
        return TransferFunction(P.polymul(self.num, o.den), P.polymul(self.den, o.num))

    def __rtruediv__(self, other):
        return TransferFunction.coerce(other) / self

    def __call__(self, s):
        return P.polyval(s, self.num) / P.polyval(s, self.den)

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()})"

    @property
    def dc_gain(self) -> float:
        return self.num[0] / self.den[0] if self.den[0] != 0 else math.inf

    @property
    def is_proper(self) -> bool:
        return self.num.size <= self.den.size


S = TransferFunction([0.0, 1.0], [1.0])


def plant() -> TransferFunction:
    return TransferFunction([1.0], [0.0, 0.0, 1.0])


def spacing_policy(h_d: float) -> TransferFunction:
    return TransferFunction([1.0, h_d], [1.0])


def pd_controller(omega_k: float) -> TransferFunction:
    return TransferFunction([omega_k * omega_k, omega_k], [1.0])


def feedforward_filter(h_d: float) -> TransferFunction:
    return 1.0 / spacing_policy(h_d)


def _check_params(omega_k: float, h_d: float) -> None:
    if not (omega_k > 0 and h_d > 0):
        raise ConfigError(f"omega_k and h_d must be positive, got omega_k={omega_k}, h_d={h_d}")


def hop_transfer_functions(omega_k: float, h_d: float) -> dict[str, TransferFunction]:
    """Position-to-position transfer functions of one follower.

    ``ff2``: from X_{i-2} through the second feedforward path, ``ff1``: from
    X_{i-1} through the first feedforward path, ``fb``: from X_{i-1} through
    the PD feedback.
    """
    _check_params(omega_k, h_d)
    G, K, H, F = plant(), pd_controller(omega_k), spacing_policy(h_d), feedforward_filter(h_d)
    loop = 1 + G * K * H
    ff = G * F * S * S / loop
    return {"ff2": ff, "ff1": ff, "fb": G * K / loop}


def build_ss(mode: Mode | str, omega_k: float, h_d: float) -> TransferFunction:
    """Worst-case per-hop string-stability transfer function for ``mode``."""
    mode = Mode[mode] if isinstance(mode, str) else Mode(mode)
    _check_params(omega_k, h_d)
    G, K, H = plant(), pd_controller(omega_k), spacing_policy(h_d)
    GKH = G * K * H
    if mode == Mode.CACC1:
        return (2 + GKH) / (H * (1 + GKH))
    if mode in (Mode.CACC2, Mode.CACC3):
        return 1 / H
    p = omega_k * h_d
    # explicit reduced form of G K / (1 + G K H)
    return TransferFunction(
        [omega_k * omega_k, omega_k],
        [omega_k * omega_k, omega_k * (1 + p), 1 + p],
    )


def magnitude(tf: TransferFunction, omega):
    """|tf(j omega)|; +inf where the denominator vanishes."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be non-negative")
    s = 1j * w
    num = np.abs(P.polyval(s, tf.num))
    den = np.abs(P.polyval(s, tf.den))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den == 0, np.inf, num / np.where(den == 0, 1.0, den))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FrequencyGrid:
    w_min: float = 1e-3
    w_max: float = 1e3
    n_points: int = 4000

    def __post_init__(self):
        if not (0 < self.w_min <= 1e-3 and self.w_max >= 1e3 and self.n_points >= 2000):
            raise ValueError(
                "frequency grid must span at least [1e-3, 1e3] rad/s with >= 2000 points, "
                f"got [{self.w_min}, {self.w_max}] x {self.n_points}"
            )

    def points(self) -> np.ndarray:
        return np.logspace(math.log10(self.w_min), math.log10(self.w_max), self.n_points)


@dataclass(frozen=True)
class HInfResult:
    norm: float
    argmax_omega: float
    string_stable: bool


def _imaginary_axis_pole(tf: TransferFunction, grid: FrequencyGrid) -> float | None:
    if tf.den.size < 2:
        return None
    roots = np.roots(tf.den[::-1])
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    for r in roots:
        if abs(r.real) <= 1e-12 * scale and abs(r.imag) <= grid.w_max:
            return abs(r.imag)
    return None


def hinf_norm(tf: TransferFunction, grid: FrequencyGrid | None = None, rel_tol: float = 1e-8) -> HInfResult:
    """Sup of |tf(j omega)| over the grid range by sweep plus golden-section refinement."""
    grid = grid or FrequencyGrid()
    pole = _imaginary_axis_pole(tf, grid)
    if pole is not None:
        return HInfResult(math.inf, pole, False)
    w = grid.points()
    mag = magnitude(tf, w)
    if not np.all(np.isfinite(mag)):
        j = int(np.argmax(~np.isfinite(mag)))
        return HInfResult(math.inf, float(w[j]), False)
    j = int(np.argmax(mag))
    best_w, best = float(w[j]), float(mag[j])
    if 0 < j < w.size - 1:
        x, m = _golden_max(lambda lx: magnitude(tf, math.exp(lx)), math.log(w[j - 1]), math.log(w[j + 1]), rel_tol)
        if m > best:
            best_w, best = math.exp(x), m
    return HInfResult(best, best_w, best <= 1.0 + STABLE_TOL)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a: float, b: float, tol: float) -> tuple[float, float]:
    # absolute tolerance in log-frequency == relative tolerance in frequency
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def region_check(mode: Mode | str, omega_k: float, h_d: float) -> bool:
    """Closed-form string-stability region of ``mode``."""
    mode = Mode[mode] if isinstance(mode, str) else Mode(mode)
    _check_params(omega_k, h_d)
    p = omega_k * h_d
    if mode == Mode.CACC1:
        return p >= GOLDEN_BOUNDARY
    if mode in (Mode.CACC2, Mode.CACC3):
        return h_d > 0
    return p >= ACC_BOUNDARY


def cacc1_worst_case_margin(p: float) -> float:
    """Discriminant-style margin of the CACC1 worst-case inequality at p = omega_k*h_d.

    With y = omega**2, |SS|**2 <= 1 reduces (after dividing by omega**2) to
    a quadratic f(y) = a y**2 + b y + c >= 0 whose coefficients only depend on
    p up to a positive scale. Returns ``b`` if ``b >= 0`` (trivially
    satisfied), otherwise ``4 a c - b**2`` normalised; non-negative iff
    |SS(j omega)| <= 1 for every omega.
    """
    a = (1.0 + p) ** 2
    b = p**4 - p**2 - 2.0 * p - 3.0
    c = 2.0 + p * p
    if b >= 0:
        return b
    return 4.0 * a * c * p * p - b * b


def cacc1_worst_case_boundary() -> float:
    """Smallest omega_k*h_d for which the CACC1 worst-case SS has H-inf norm <= 1."""
    return optimize.brentq(cacc1_worst_case_margin, 0.5, 1.5, xtol=1e-14)


def sweep_boundary(mode: Mode | str, h_d: float = 1.0, lo: float = 0.05, hi: float = 5.0,
                   grid: FrequencyGrid | None = None, tol: float = 1e-6) -> float:
    """Bisection on omega_k*h_d for the sweep-based stability boundary.

    Assumes the swept stability flag is monotone in omega_k*h_d over
    ``[lo, hi]``; returns ``lo`` if already stable there.
    """
    def stable(p):
        return hinf_norm(build_ss(mode, p / h_d, h_d), grid).string_stable

    if stable(lo):
        return lo
    if not stable(hi):
        raise ValueError(f"no stable point found up to omega_k*h_d = {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if stable(mid) else (mid, hi)
    return hi


def chain_response(
    modes: Sequence[Mode | str],
    omega,
    gains_table=DEFAULT_GAINS,
) -> np.ndarray:
    """Exact head-to-tail responses |X_i / X_0| along a fixed topology.

    ``modes[i-1]`` is the gain row used by follower ``i``. The recursion is
    X_i = beta*ff2*X_{i-2} + (alpha*ff1 + fb)*X_{i-1}, with beta forced to 0
    for vehicle 1. Returns an array of shape ``(len(modes), len(omega))``.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    s = 1j * w
    resp = [np.ones_like(s)]
    for i, m in enumerate(modes, start=1):
        row: ControllerGains = gains_table[Mode[m] if isinstance(m, str) else Mode(m)]
        hop = hop_transfer_functions(row.omega_k, row.h_d)
        beta = row.beta if i >= 2 else 0
        x = (row.alpha * hop["ff1"](s) + hop["fb"](s)) * resp[i - 1]
        if beta:
            x = x + hop["ff2"](s) * resp[i - 2]
        resp.append(x)
    return np.abs(np.array(resp[1:]))
