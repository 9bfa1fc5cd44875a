"""Stochastic V2V link model and per-step communication topology sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DISTANCE_LOGISTIC = "distance_logistic"
BERNOULLI_FIXED = "bernoulli_fixed"
LINK_MODES = (DISTANCE_LOGISTIC, BERNOULLI_FIXED)


class TopologyError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinkModel:
    """Packet delivery probability as a function of inter-vehicle distance.

    ``distance_logistic`` is a logistic decay centred on ``d_half``,
    renormalised so that p(0) == p_max exactly. ``bernoulli_fixed`` ignores
    distance.
    """

    p_max: float = 0.95
    d_half: float = 150.0
    steepness: float = 0.05
    mode: str = DISTANCE_LOGISTIC

    def __post_init__(self):
        if not 0.0 <= self.p_max <= 1.0:
            raise ValueError(f"p_max must be in [0, 1], got {self.p_max}")
        if self.mode not in LINK_MODES:
            raise ValueError(f"unknown link mode {self.mode!r}")
        if self.mode == DISTANCE_LOGISTIC and not (self.steepness > 0 and self.d_half >= 0):
            raise ValueError("distance_logistic needs steepness > 0 and d_half >= 0")

    @classmethod
    def fixed(cls, p: float) -> LinkModel:
        return cls(p_max=p, mode=BERNOULLI_FIXED)


def _logistic_prob(p_max: float, d_half: float, steepness: float, distance: float) -> float:
    # p_max * sigmoid(-k (d - d_half)) / sigmoid(k d_half)
    a = steepness * (distance - d_half)
    if a > 700.0:
        return 0.0
    return p_max * (1.0 + math.exp(-steepness * d_half)) / (1.0 + math.exp(a))


def link_success_prob(model: LinkModel, distance: float) -> float:
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    if model.mode == BERNOULLI_FIXED:
        return model.p_max
    return _logistic_prob(model.p_max, model.d_half, model.steepness, distance)


def link_uniforms(seed: int, step: int, n_vehicles: int) -> np.ndarray:
    """Uniform draws for every link at one step, shape ``(n_vehicles, 2)``.

    Column 0 drives the link from the immediate predecessor, column 1 the
    link from the second predecessor. The Philox counter is keyed by
    ``(seed, step)`` and the draw position by ``(vehicle, slot)``, so a draw
    never depends on how many other links were sampled before it.
    """
    bitgen = np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF, counter=[0, int(step), 0, 0])
    return np.random.Generator(bitgen).random(2 * n_vehicles).reshape(n_vehicles, 2)


def link_uniform_block(seed: int, n_steps: int, n_vehicles: int) -> np.ndarray:
    """Stack of :func:`link_uniforms` for steps ``0..n_steps-1``."""
    out = np.empty((n_steps, n_vehicles, 2))
    for k in range(n_steps):
        out[k] = link_uniforms(seed, k, n_vehicles)
    return out


@dataclass(frozen=True)
class CommTopology:
    """Link indicators for one step; index 0 (the leader) is always 0."""

    step: int
    alpha: np.ndarray
    beta: np.ndarray


def sample_topology(model: LinkModel, positions, seed: int, step: int) -> CommTopology:
    """Draw alpha/beta for every follower from the positions of the platoon.

    ``positions`` runs from the leader (index 0) to the tail and must be
    strictly decreasing.
    """
    x = np.asarray(positions, dtype=float)
    n = x.size
    if n >= 2 and np.any(np.diff(x) >= 0):
        raise TopologyError("collision: topology undefined")
    u = link_uniforms(seed, step, n)
    alpha = np.zeros(n, dtype=np.int8)
    beta = np.zeros(n, dtype=np.int8)
    for i in range(1, n):
        alpha[i] = u[i, 0] < link_success_prob(model, x[i - 1] - x[i])
        if i >= 2:
            beta[i] = u[i, 1] < link_success_prob(model, x[i - 2] - x[i])
    return CommTopology(step, alpha, beta)
