"""Trade between firms on a circular city.

A firm pays ``gamma * distance`` per outgoing link and earns ``v`` per
reciprocated link. Because the cost depends only on distance, the kernel
problem splits into an independent one-dimensional problem per ring of
equal distance; :func:`trade_kernel_direct` solves it without that shortcut.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .meanfield import (
    JUMP_THRESHOLD,
    EAPProblem,
    Kernel,
    PhaseSweep,
    TypedModel,
    TypedUtility,
    solve_eap,
    solve_kernel,
    sweep_phase,
)
from .motifs import Motif, MotifModel, link_reciprocity_model

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 0.25


@dataclass(frozen=True, eq=False)
class TradeModel:
    L: int
    gamma: float
    v: float
    sigma: float = DEFAULT_SIGMA
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("L must be a positive integer")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.v > 0:
            raise ValueError("v must be positive")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie strictly inside (0, 1)")
        w = np.full(self.L, 1.0 / self.L) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != (self.L,) or np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be a positive probability vector of length L")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def types(self) -> np.ndarray:
        return np.arange(self.L) / self.L

    @property
    def beta(self) -> float:
        return (1.0 - self.sigma) / self.sigma

    def with_v(self, v: float) -> "TradeModel":
        return TradeModel(self.L, self.gamma, v, self.sigma, self.weights)

    def distance_matrix(self) -> np.ndarray:
        k = np.arange(self.L)
        steps = np.abs(k[:, None] - k[None, :])
        return np.minimum(steps, self.L - steps) / self.L

    def typed_model(self) -> TypedModel:
        motif = MotifModel((Motif.reciprocal_pair(),), (self.v,), self.sigma)
        return TypedModel(self.weights, motif, c=-self.gamma * self.distance_matrix())

    def utility(self, types: Sequence[int]) -> TypedUtility:
        """Finite-population utilities for firms at the given location indices."""
        return TypedUtility(self.typed_model(), types)


def circular_distance(theta: float, theta_prime: float, L: Optional[int] = None) -> float:
    """``min(|t - t'|, 1 - |t - t'|)`` on the unit circle; checks grid membership if ``L`` is given."""
    for t in (theta, theta_prime):
        if not 0 <= t < 1:
            raise ValueError(f"type {t} outside [0, 1)")
        if L is not None and abs(t * L - round(t * L)) > 1e-9:
            raise ValueError(f"type {t} is not on the grid of {L} locations")
    d = abs(theta - theta_prime)
    return min(d, 1.0 - d)


def trade_utility(i: int, g, types: Sequence[int], model: TradeModel) -> float:
    """``v * reciprocated links of i - gamma * total distance of i's outgoing links``."""
    D = model.distance_matrix()
    out = recip = 0.0
    for a, b in g.edges:
        if a == i:
            out += D[types[a], types[b]]
            if (b, a) in g:
                recip += 1
    return model.v * recip - model.gamma * out


def ring_counts(L: int) -> np.ndarray:
    """Number of locations at each distance ``k/L``, ``k = 0..L//2``, from a fixed location."""
    counts = np.full(L // 2 + 1, 2)
    counts[0] = 1
    if L % 2 == 0:
        counts[-1] = 1
    if L == 1:
        counts = np.array([1])
    return counts


def _ring_problem(model: TradeModel, k: int, v: Optional[float] = None) -> EAPProblem:
    v = model.v if v is None else v
    return EAPProblem(link_reciprocity_model(v, model.gamma * k / model.L, model.sigma))


@dataclass
class ReducedKernel:
    kernel: Kernel
    distances: np.ndarray  # k/L for k = 0..L//2
    profile: np.ndarray  # density per distance
    ambiguous: np.ndarray  # L x L, entry's 1-D problem has tied maxima
    branches: dict = field(default_factory=dict)  # ring k -> (low, high) when tied

    @property
    def any_ambiguous(self) -> bool:
        return bool(self.ambiguous.any())


def trade_kernel_reduced(model: TradeModel) -> ReducedKernel:
    """Kernel from one link-plus-reciprocity density problem per ring of equal distance."""
    ks = np.arange(model.L // 2 + 1)
    profile = np.empty(len(ks))
    tied = np.zeros(len(ks), dtype=bool)
    branches = {}
    for k in ks:
        sol = solve_eap(_ring_problem(model, int(k)))
        profile[k] = sol.rho_star
        if not sol.unique:
            tied[k] = True
            branches[int(k)] = (sol.low_branch, sol.high_branch)
    steps = np.rint(model.distance_matrix() * model.L).astype(int)
    if tied.any():
        warnings.warn(f"rings {sorted(branches)} have tied density maxima; larger branch used", RuntimeWarning)
    return ReducedKernel(Kernel(profile[steps]), ks / model.L, profile, tied[steps], branches)


def trade_kernel_direct(model: TradeModel, **kwargs):
    """Full coordinate ascent on the ``L x L`` kernel; an independent check of the ring reduction."""
    return solve_kernel(model.typed_model(), **kwargs)


def total_density(psi, w) -> float:
    P = psi.psi if isinstance(psi, Kernel) else np.asarray(psi, dtype=float)
    w = np.asarray(w, dtype=float)
    if P.shape != (len(w), len(w)):
        raise ValueError("kernel and weights disagree on the number of types")
    return float(w @ P @ w)


@dataclass
class TradeSweep:
    v: list[float]
    distances: np.ndarray
    ring_sweeps: list[PhaseSweep]
    ring_mass: np.ndarray  # share of ordered type pairs on each ring

    def profile(self, idx: int) -> np.ndarray:
        return np.array([sw.solutions[idx].rho_star for sw in self.ring_sweeps])

    def total_density(self) -> np.ndarray:
        rho = np.array([[s.rho_star for s in sw.solutions] for sw in self.ring_sweeps])
        return self.ring_mass @ rho

    def n_transitions(self) -> int:
        return sum(len(sw.transitions) for sw in self.ring_sweeps)

    def ambiguous(self) -> np.ndarray:
        """``(ring, v-point)`` flags for tied maxima."""
        return np.array([[not s.unique for s in sw.solutions] for sw in self.ring_sweeps])

    def density_rows(self) -> list[tuple]:
        return list(zip(self.v, self.total_density().tolist()))

    def profile_rows(self) -> list[tuple]:
        rows = []
        for idx, v in enumerate(self.v):
            for k, d in enumerate(self.distances):
                s = self.ring_sweeps[k].solutions[idx]
                rows.append((float(d), s.rho_star, v, not s.unique))
        return rows


def trade_sweep(model: TradeModel, v_path: Sequence[float], workers: int = 1,
                jump_threshold: float = JUMP_THRESHOLD) -> TradeSweep:
    """Per-ring density sweeps along a path of trade values, plus the total density."""
    v_path = [float(v) for v in v_path]
    if any(b < a for a, b in zip(v_path, v_path[1:])) and any(b > a for a, b in zip(v_path, v_path[1:])):
        raise ValueError("the v path must be monotone")
    ks = list(range(model.L // 2 + 1))
    tasks = [(model.gamma * k / model.L, model.sigma, v_path, jump_threshold) for k in ks]
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            sweeps = list(pool.map(_ring_sweep, tasks))
    else:
        sweeps = [_ring_sweep(t) for t in tasks]
    counts = ring_counts(model.L).astype(float)
    mass = counts / model.L if model.weights is None or np.allclose(model.weights, 1 / model.L) else _ring_mass(model)
    return TradeSweep(v_path, np.array(ks) / model.L, sweeps, mass)


def _ring_mass(model: TradeModel) -> np.ndarray:
    steps = np.rint(model.distance_matrix() * model.L).astype(int)
    w = model.weights
    return np.array([float(w @ (steps == k) @ w) for k in range(model.L // 2 + 1)])


def _ring_sweep(task) -> PhaseSweep:
    cost, sigma, v_path, thr = task
    base = link_reciprocity_model(1.0, cost, sigma)
    if not v_path:
        return PhaseSweep([], [], [])
    return sweep_phase(base, [(-cost, v) for v in v_path], parameters=v_path, jump_threshold=thr)
