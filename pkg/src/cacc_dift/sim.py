"""Platoon simulation driver, run metrics and DIFT/FIFT comparison."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .comm import BERNOULLI_FIXED, LinkModel, link_uniform_block
from .control import (
    DEFAULT_GAINS,
    DIFT,
    FIFT,
    MODE_FLAGS,
    RATE_IMPLICIT,
    RATE_MODES,
    SCHEMES,
    ConfigError,
    ControllerGains,
    Mode,
)
from .dynamics import INTEGRATORS, ZOH, SimulationError
from .stability import region_check

log = logging.getLogger(__name__)


class TrajectoryError(ValueError):
    """Malformed leader trajectory file."""


@dataclass(frozen=True)
class LeaderTrajectory:
    """Uniformly sampled leader motion.

    ``accel[k]`` is the leader's acceleration over ``[t[k], t[k] + T)``;
    ``v[k]`` is its speed at ``t[k]``.
    """

    T: float
    t: np.ndarray
    v: np.ndarray
    accel: np.ndarray

    def __len__(self):
        return len(self.accel)

    @property
    def duration(self) -> float:
        return len(self.accel) * self.T

    def truncated(self, duration: float) -> LeaderTrajectory:
        n = int(math.floor(duration / self.T + 1e-9))
        if n > len(self):
            raise TrajectoryError(
                f"requested duration {duration} s exceeds trajectory length {self.duration} s"
            )
        return LeaderTrajectory(self.T, self.t[:n], self.v[:n], self.accel[:n])


def load_leader_trajectory(path, T: float, v0: float = 25.0) -> LeaderTrajectory:
    """Read a ``t,v`` or ``t,a`` CSV and resample it to period ``T``.

    Sample ``k`` covers ``[t0 + kT, t0 + (k+1)T)``, so a file spanning
    ``D`` seconds yields ``floor(D / T)`` samples. For speed files the
    acceleration is the forward difference of the linearly interpolated
    speed; acceleration files are interpolated and integrated from ``v0``.
    """
    path = Path(path)
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise TrajectoryError(f"{path}: cannot open trajectory file ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TrajectoryError(f"{path}:1: empty file")
        cols = [c.strip().lower() for c in header]
        if len(cols) < 2 or cols[0] != "t" or cols[1] not in ("v", "a"):
            raise TrajectoryError(f"{path}:1: expected header 't,v' or 't,a', got {header!r}")
        kind = cols[1]
        times, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t, y = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise TrajectoryError(f"{path}:{lineno}: cannot parse row {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(y)):
                raise TrajectoryError(f"{path}:{lineno}: non-finite value")
            if times and t <= times[-1]:
                raise TrajectoryError(f"{path}:{lineno}: time not strictly increasing ({t} after {times[-1]})")
            times.append(t)
            values.append(y)
    if len(times) < 2:
        raise TrajectoryError(f"{path}: need at least two samples, got {len(times)}")
    t_src, y_src = np.array(times), np.array(values)
    n = int(math.floor((t_src[-1] - t_src[0]) / T + 1e-9))
    if n < 1:
        raise TrajectoryError(f"{path}: trajectory shorter than one sample period")
    t = t_src[0] + T * np.arange(n)
    if kind == "v":
        v = np.interp(t, t_src, y_src)
        v_next = np.interp(np.minimum(t + T, t_src[-1]), t_src, y_src)
        accel = (v_next - v) / T
    else:
        accel = np.interp(t, t_src, y_src)
        v = v0 + T * np.concatenate(([0.0], np.cumsum(accel[:-1])))
    return LeaderTrajectory(T, t, v, accel)


def synthetic_leader(kind: str = "oscillating", T: float = 0.1, duration: float = 240.0,
                     v0: float = 25.0, **kw) -> LeaderTrajectory:
    """Built-in leader profiles.

    ``constant``: cruise at ``v0``. ``oscillating``: ``v0 + amp*sin(2 pi f t)``
    (amp 2 m/s, f 0.05 Hz) with a speed drop of ``drop`` (2 m/s) at
    ``t_drop`` (120 s). ``step``: speed steps from ``v0`` to ``v_after``
    (``v0 - 1``) at ``t_step`` (10 s). ``ramp``: constant acceleration
    ``a`` (0.5 m/s^2).
    """
    n = int(math.floor(duration / T + 1e-9))
    t = T * np.arange(n + 1)
    if kind == "constant":
        v = np.full(n + 1, float(v0))
    elif kind == "oscillating":
        amp, freq = kw.get("amp", 2.0), kw.get("freq", 0.05)
        drop, t_drop = kw.get("drop", 2.0), kw.get("t_drop", 120.0)
        v = v0 + amp * np.sin(2 * np.pi * freq * t) - np.where(t >= t_drop - 1e-9, drop, 0.0)
    elif kind == "step":
        v_after, t_step = kw.get("v_after", v0 - 1.0), kw.get("t_step", 10.0)
        v = np.where(t >= t_step - 1e-9, v_after, float(v0))
    elif kind == "ramp":
        a = kw.get("a", 0.5)
        return LeaderTrajectory(T, t[:-1], v0 + a * t[:-1], np.full(n, float(a)))
    else:
        raise ValueError(f"unknown synthetic leader kind {kind!r}")
    accel = np.diff(v) / T
    if kind == "constant":
        accel = np.zeros(n)
    return LeaderTrajectory(T, t[:-1], v[:-1], accel)


@dataclass
class PlatoonConfig:
    n_followers: int = 9
    T: float = 0.1
    L: float = 5.0
    v0: float = 25.0
    gains_table: Mapping[Mode, ControllerGains] = field(default_factory=lambda: dict(DEFAULT_GAINS))
    scheme: str = DIFT
    link_model: LinkModel = field(default_factory=LinkModel)
    seed: int = 0
    duration: float | None = None
    plant_integrator: str = ZOH
    rate: str = RATE_IMPLICIT
    u_min: float | None = None
    u_max: float | None = None
    noise_sigma: float = 0.0
    # optional caps on omega_k*h_d (noise mitigation / actuator saturation)
    max_omega_h: float | None = None
    allow_unstable: bool = False

    def gains_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        gains = np.array([[self.gains_table[m].omega_k, self.gains_table[m].h_d] for m in Mode])
        flags = np.array([MODE_FLAGS[m] for m in Mode], dtype=np.int64)
        return gains, flags

    @property
    def nominal_headway(self) -> float:
        return self.gains_table[Mode.CACC1].h_d


def validate_config(cfg: PlatoonConfig) -> list[str]:
    """Check startup invariants; raises ConfigError, returns warnings."""
    warnings = []
    if cfg.n_followers < 1:
        raise ConfigError(f"n_followers must be >= 1, got {cfg.n_followers}")
    if not cfg.T > 0:
        raise ConfigError(f"T must be positive, got {cfg.T}")
    if cfg.L < 0 or cfg.v0 < 0:
        raise ConfigError("L and v0 must be non-negative")
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    if cfg.plant_integrator not in INTEGRATORS:
        raise ConfigError(f"unknown plant integrator {cfg.plant_integrator!r}")
    if cfg.rate not in RATE_MODES:
        raise ConfigError(f"unknown rate mode {cfg.rate!r}")
    if cfg.noise_sigma < 0:
        raise ConfigError("noise_sigma must be non-negative")
    if cfg.u_min is not None and cfg.u_max is not None and cfg.u_min >= cfg.u_max:
        raise ConfigError("u_min must be below u_max")
    for mode in Mode:
        if mode not in cfg.gains_table:
            raise ConfigError(f"gains table lacks row {mode.name}")
        g = cfg.gains_table[mode]
        if (g.alpha, g.beta) != MODE_FLAGS[mode]:
            raise ConfigError(f"gains row {mode.name} has flags ({g.alpha}, {g.beta})")
        if cfg.T >= g.h_d:
            raise ConfigError(f"explicit filter update unstable for {mode.name}: T={cfg.T} >= h_d={g.h_d}")
        if not region_check(mode, g.omega_k, g.h_d):
            msg = f"gains violate string-stability region for {mode.name}"
            if not cfg.allow_unstable:
                raise ConfigError(msg)
            warnings.append(msg)
        if cfg.max_omega_h is not None and g.omega_k * g.h_d > cfg.max_omega_h:
            raise ConfigError(
                f"{mode.name}: omega_k*h_d={g.omega_k * g.h_d:g} exceeds cap {cfg.max_omega_h:g}"
            )
    headways = {g.h_d for g in cfg.gains_table.values()}
    if len(headways) > 1:
        warnings.append("gain rows use different h_d; spacing errors will jump on mode switches")
    for w in warnings:
        log.warning(w)
    return warnings


@dataclass
class RunTrace:
    """Per-step, per-vehicle time series (vehicle 0 is the leader)."""

    T: float
    position: np.ndarray
    velocity: np.ndarray
    u: np.ndarray
    spacing_error: np.ndarray
    speed_error: np.ndarray
    mode: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.position.shape[0]

    @property
    def n_vehicles(self) -> int:
        return self.position.shape[1]

    def rows(self):
        for k in range(self.n_steps):
            for i in range(self.n_vehicles):
                yield (
                    k, i, self.position[k, i], self.velocity[k, i], self.u[k, i],
                    self.spacing_error[k, i], Mode(self.mode[k, i]).name if i else "LEADER",
                    int(self.alpha[k, i]), int(self.beta[k, i]),
                )

    def equals(self, other: RunTrace) -> bool:
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("position", "velocity", "u", "spacing_error", "speed_error", "mode", "alpha", "beta")
        )


@dataclass
class RunMetrics:
    """Per-follower statistics; index 0 of every array is follower 1."""

    max_abs_e: np.ndarray
    std_e: np.ndarray
    std_speed_err: np.ndarray
    std_speed: np.ndarray
    collision: bool = False
    collision_step: int | None = None

    @property
    def n_followers(self) -> int:
        return len(self.std_e)


def compute_metrics(trace: RunTrace, collision: bool = False, collision_step: int | None = None) -> RunMetrics:
    e = trace.spacing_error[1:, 1:]
    dv = trace.speed_error[1:, 1:]
    v = trace.velocity[1:, 1:]
    if e.shape[0] == 0:
        z = np.zeros(trace.n_vehicles - 1)
        return RunMetrics(z, z.copy(), z.copy(), z.copy(), collision, collision_step)
    return RunMetrics(
        np.abs(e).max(axis=0), e.std(axis=0), dv.std(axis=0), v.std(axis=0), collision, collision_step
    )


def run(cfg: PlatoonConfig, leader: LeaderTrajectory, *, use_numba: bool | None = None,
        validate: bool = True) -> tuple[RunTrace, RunMetrics]:
    """Simulate one platoon run. A collision truncates the trace."""
    if validate:
        validate_config(cfg)
    if not math.isclose(leader.T, cfg.T, rel_tol=1e-12):
        raise ConfigError(f"trajectory sampled at T={leader.T}, config uses T={cfg.T}")
    if cfg.duration is not None:
        leader = leader.truncated(cfg.duration)
    n = cfg.n_followers + 1
    K = len(leader)
    h0 = cfg.nominal_headway
    v_start = float(leader.v[0]) if len(leader) else cfg.v0
    x_init = -(h0 * v_start + cfg.L) * np.arange(n)
    v_init = np.full(n, v_start)
    gains, flags = cfg.gains_arrays()
    lm = cfg.link_model
    uniforms = link_uniform_block(cfg.seed, K + 1, n)
    if cfg.noise_sigma > 0:
        noise = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, 1]).normal(0.0, cfg.noise_sigma, (K + 1, n, 2))
        noise[:, 0, :] = 0.0
    else:
        noise = np.zeros((K + 1, n, 2))
    status, last, arr = kernels.run_platoon(
        leader.accel, x_init, v_init, gains, flags, cfg.L, cfg.T,
        kernels.SCHEME_FIFT if cfg.scheme == FIFT else kernels.SCHEME_DIFT,
        kernels.LINK_FIXED if lm.mode == BERNOULLI_FIXED else kernels.LINK_LOGISTIC,
        lm.p_max, lm.d_half, lm.steepness, uniforms, noise,
        -np.inf if cfg.u_min is None else cfg.u_min,
        np.inf if cfg.u_max is None else cfg.u_max,
        cfg.rate == RATE_IMPLICIT, cfg.plant_integrator == ZOH, use_numba=use_numba,
    )
    if status == kernels.NONFINITE:
        raise SimulationError(f"non-finite vehicle state at step {last}")
    end = last + 1
    trace = RunTrace(
        cfg.T, *(arr[name][:end] for name in ("pos", "vel", "u", "e", "dv", "mode", "alpha", "beta"))
    )
    collided = status == kernels.COLLISION
    if collided:
        log.warning("collision at step %d; run truncated", last)
    return trace, compute_metrics(trace, collided, last if collided else None)


@dataclass
class Comparison:
    """Mean-over-seeds metrics per scheme plus DIFT/FIFT ratios."""

    seeds: list[int]
    means: dict[str, dict[str, np.ndarray]]
    collisions: dict[str, int]

    METRICS = ("max_abs_e", "std_e", "std_speed_err", "std_speed")

    def ratio(self, metric: str) -> np.ndarray:
        d, f = self.means[DIFT][metric], self.means[FIFT][metric]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = d / f
        return np.where((d == f), 1.0, r)


def compare(cfg: PlatoonConfig, leader: LeaderTrajectory, n_seeds: int, *,
            seeds: Sequence[int] | None = None, workers: int = 1,
            use_numba: bool | None = None) -> Comparison:
    """Run DIFT and FIFT over the same seeds and average the per-vehicle metrics."""
    if n_seeds < 1:
        raise ConfigError(f"n_seeds must be >= 1, got {n_seeds}")
    seeds = list(seeds) if seeds is not None else [cfg.seed + j for j in range(n_seeds)]
    if len(seeds) != n_seeds:
        raise ConfigError("explicit seed list length differs from n_seeds")
    jobs = [(scheme, s) for scheme in (DIFT, FIFT) for s in seeds]
    for scheme in (DIFT, FIFT):
        validate_config(replace(cfg, scheme=scheme))

    def one(job):
        scheme, s = job
        return run(replace(cfg, scheme=scheme, seed=s), leader, use_numba=use_numba, validate=False)[1]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    means: dict[str, dict[str, np.ndarray]] = {}
    collisions = {}
    for scheme in (DIFT, FIFT):
        ms = [m for (sch, _), m in zip(jobs, results) if sch == scheme]
        means[scheme] = {name: np.mean([getattr(m, name) for m in ms], axis=0) for name in Comparison.METRICS}
        collisions[scheme] = sum(m.collision for m in ms)
    return Comparison(seeds, means, collisions)
