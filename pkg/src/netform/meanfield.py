"""Large-population limits: entropy-adjusted potentials and their maximizers.

The homogeneous problem is one-dimensional in the link density; the typed
problem is over an ``L x L`` kernel of type-pair link probabilities. Both
objectives have the form ``beta * incentives + entropy``; the entropy's
infinite slope at 0 and 1 keeps every maximizer interior, so all work is
done on first-order conditions in logit coordinates.
"""
from __future__ import annotations

import itertools
import logging
import math
import string
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import entr, expit, logit

from .errors import InfeasibleSizeError, NumericalError, SignConditionError
from .game import PotentialTable, UtilityTable
from .motifs import Adjacency, Motif, MotifModel, motif_utility
from .network import DirectedNetwork, check_enumerable, n_networks

logger = logging.getLogger(__name__)

GRID_POINTS = 2001
GRID_EDGE = 1e-6
TIE_GAP = 1e-8
JUMP_THRESHOLD = 0.05
STEP_MAX = 1e-3
REFINE_TOL = 1e-6
SIGMA_MIN = 1e-3
KERNEL_BUDGET = 10**8

_RHO_GRID = np.linspace(GRID_EDGE, 1.0 - GRID_EDGE, GRID_POINTS)
_X_GRID = logit(_RHO_GRID)


def entropy(p):
    """Bernoulli entropy in nats; 0 at both endpoints."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("entropy is defined on [0, 1] only")
    h = entr(arr) + entr(1.0 - arr)
    return float(h) if np.ndim(h) == 0 else h


# -- one-dimensional first-order machinery ----------------------------------------

def _interior_maxima(F, bound: float) -> list[float]:
    """Local maxima (in logit coordinates) of a function whose derivative is ``F``.

    ``F`` is positive at ``-bound`` and negative at ``+bound``. Sign changes are
    bracketed on a fixed grid and polished with Brent's method.
    """
    inner = _X_GRID[(_X_GRID > -bound) & (_X_GRID < bound)]
    xs = np.concatenate([[-bound], inner, [bound]])
    fs = F(xs)
    if not np.all(np.isfinite(fs)):
        raise NumericalError("non-finite first-order condition on the bracketing grid")
    out = []
    for k in np.flatnonzero((fs[:-1] > 0) & (fs[1:] <= 0)):
        if fs[k + 1] == 0:
            out.append(float(xs[k + 1]))
        else:
            out.append(brentq(lambda x: float(F(np.array([x]))[0]), xs[k], xs[k + 1],
                              xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))
    return out


def _pick(cands: list[tuple[float, float]]):
    """Best ``(rho, value)``; near-ties within ``TIE_GAP`` go to the larger density."""
    best_val = max(v for _, v in cands)
    close = [c for c in cands if c[1] >= best_val - TIE_GAP]
    star = max(close, key=lambda c: c[0])
    return star, len(close) == 1


# -- homogeneous problem -------------------------------------------------------------

@dataclass(frozen=True)
class EAPProblem:
    """Density problem for a motif model; one-edge motifs may carry any sign."""

    model: MotifModel

    def __post_init__(self):
        check_sign_condition(self.model.motifs, self.model.values)

    @classmethod
    def from_beta(cls, motifs, values, beta: float) -> "EAPProblem":
        if not beta > 0:
            raise ValueError("beta must be positive")
        return cls(MotifModel(tuple(motifs), tuple(values), 1.0 / (1.0 + beta)))

    @property
    def beta(self) -> float:
        return self.model.beta

    def terms(self) -> list[tuple[float, int]]:
        """``(a_m / h_m, e_m)`` per motif."""
        return [(a / m.degeneracy, m.n_edges) for m, a in zip(self.model.motifs, self.model.values)]


def check_sign_condition(motifs, values) -> None:
    for m, a in zip(motifs, values):
        if m.n_edges > 1 and a < 0:
            raise SignConditionError(
                f"motif {m} has {m.n_edges} edges and negative value {a}; "
                "multi-edge motifs must have nonnegative values"
            )


def eap(rho, problem: EAPProblem):
    rho_arr = np.asarray(rho, dtype=float)
    inc = sum(c * rho_arr ** e for c, e in problem.terms())
    out = problem.beta * inc + entropy(rho_arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class EAPSolution:
    rho_star: float
    zeta: float
    local_maxima: tuple[tuple[float, float], ...]
    unique: bool

    @property
    def low_branch(self) -> float:
        return min(r for r, _ in self.local_maxima)

    @property
    def high_branch(self) -> float:
        return max(r for r, _ in self.local_maxima)


def solve_eap(problem: EAPProblem) -> EAPSolution:
    """Global maximizer of the entropy-adjusted potential on (0, 1)."""
    beta = problem.beta
    slope = [(beta * c * e, e) for c, e in problem.terms()]
    bound = sum(abs(s) for s, _ in slope) + 1.0

    def F(x):
        r = expit(x)
        return sum(s * r ** (e - 1) for s, e in slope) - x

    roots = _interior_maxima(F, bound)
    cands = [(float(expit(x)), eap(float(expit(x)), problem)) for x in roots]
    (rho, val), unique = _pick(cands)
    return EAPSolution(rho, val, tuple(sorted(cands)), unique)


# -- sweeps and transitions -----------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    index: int  # between path points index and index+1
    t: float  # position inside that segment, in [0, 1]
    parameter: float
    rho_before: float
    rho_after: float
    width: float  # final bracket length in parameter units

    @property
    def gap(self) -> float:
        return abs(self.rho_after - self.rho_before)


@dataclass
class PhaseSweep:
    parameters: list[float]
    solutions: list[EAPSolution]
    transitions: list[Transition]

    def rows(self) -> list[tuple]:
        """``(parameter, rho_star, zeta, n_local_maxima, unique, low branch, high branch)``."""
        return [
            (p, s.rho_star, s.zeta, len(s.local_maxima), s.unique, s.low_branch, s.high_branch)
            for p, s in zip(self.parameters, self.solutions)
        ]

    def max_step(self) -> float:
        r = [s.rho_star for s in self.solutions]
        return max((abs(b - a) for a, b in zip(r, r[1:])), default=0.0)


def _path_point(model: MotifModel, point, kind: str) -> EAPProblem:
    if kind == "sigma":
        return EAPProblem(model.with_sigma(float(point)))
    return EAPProblem(model.with_values(np.atleast_1d(np.asarray(point, dtype=float))))


def _labels(path, kind):
    if kind == "sigma":
        return [float(p) for p in path]
    arr = np.array([np.atleast_1d(p) for p in path], dtype=float)
    if len(arr) < 2:
        return [float(arr[0][0])] * len(arr) if len(arr) else []
    moving = np.flatnonzero(np.ptp(arr, axis=0) > 0)
    col = int(moving[0]) if len(moving) else 0
    return arr[:, col].tolist()


def sweep_phase(model: MotifModel, path: Sequence, kind: str = "values", parameters: Optional[Sequence[float]] = None,
                jump_threshold: float = JUMP_THRESHOLD, step_max: float = STEP_MAX,
                refine_tol: float = REFINE_TOL, solutions: Optional[Sequence[EAPSolution]] = None) -> PhaseSweep:
    """Typical density along a one-parameter path, with jumps located by bisection.

    ``path`` holds motif-value vectors (``kind="values"``) or noise levels
    (``kind="sigma"``). ``parameters`` labels each point; by default the first
    coordinate that moves along the path. Precomputed per-point
    ``solutions`` (e.g. from parallel workers) skip the grid solves.
    """
    if kind not in ("values", "sigma"):
        raise ValueError("kind must be 'values' or 'sigma'")
    path = list(path)
    labels = list(parameters) if parameters is not None else _labels(path, kind)
    if len(labels) != len(path):
        raise ValueError("one parameter label per path point is required")
    if solutions is None:
        sols = [solve_eap(_path_point(model, p, kind)) for p in path]
    else:
        sols = list(solutions)
        if len(sols) != len(path):
            raise ValueError("one precomputed solution per path point is required")
    for s in sols:
        if not math.isfinite(s.zeta):
            raise NumericalError("non-finite objective along the path")

    transitions = []
    for k in range(len(path) - 1):
        if abs(sols[k + 1].rho_star - sols[k].rho_star) <= jump_threshold:
            continue
        tr = _refine(model, path[k], path[k + 1], labels[k], labels[k + 1], kind,
                     sols[k].rho_star, sols[k + 1].rho_star, refine_tol)
        if tr.gap > jump_threshold and tr.width < step_max:
            transitions.append(Transition(k, tr.t, tr.parameter, tr.rho_before, tr.rho_after, tr.width))
    return PhaseSweep(labels, sols, transitions)


def _refine(model, p0, p1, l0, l1, kind, r0, r1, tol) -> Transition:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    span = float(np.linalg.norm(np.atleast_1d(p1 - p0)))
    lspan = abs(l1 - l0)
    lo, hi = 0.0, 1.0
    while (hi - lo) * max(span, lspan) > tol:
        mid = 0.5 * (lo + hi)
        r = solve_eap(_path_point(model, p0 + mid * (p1 - p0), kind)).rho_star
        if abs(r - r0) >= abs(r1 - r):
            hi, r1 = mid, r
        else:
            lo, r0 = mid, r
    t = 0.5 * (lo + hi)
    return Transition(-1, t, l0 + t * (l1 - l0), r0, r1, (hi - lo) * max(span, lspan))


@dataclass(frozen=True)
class Classification:
    kind: str  # "incentive-driven" or "entropy-driven"
    sigmas: tuple[float, ...]
    critical: tuple[Optional[float], ...]
    gaps: tuple[float, ...]

    @property
    def limit(self) -> Optional[float]:
        return self.critical[-1]


def classify_transition(model: MotifModel, path: Sequence, sigma: Optional[float] = None,
                        sigma_min: float = SIGMA_MIN, parameters: Optional[Sequence[float]] = None,
                        jump_threshold: float = JUMP_THRESHOLD, rel_tol: float = 0.02) -> Classification:
    """Track a transition along the same value path while the noise is halved.

    The jump counts as incentive-driven when it is still present at
    ``sigma_min`` and its critical parameter has settled (relative change
    below ``rel_tol`` over the last halving). A transition whose location
    keeps sliding with the noise is attributed to entropy.
    """
    sigma = model.sigma if sigma is None else sigma
    sigmas = []
    s = sigma
    while s > sigma_min * (1 + 1e-12):
        sigmas.append(s)
        s /= 2
    sigmas.append(sigma_min)

    crit, gaps = [], []
    for k, s in enumerate(sigmas):
        sw = sweep_phase(model.with_sigma(s), path, parameters=parameters, jump_threshold=jump_threshold)
        if not sw.transitions:
            if k == 0:
                raise ValueError(f"no transition along the path at sigma={s}")
            crit.append(None)
            gaps.append(0.0)
            break
        tr = max(sw.transitions, key=lambda t: t.gap)
        crit.append(tr.parameter)
        gaps.append(tr.gap)

    persists = len(crit) == len(sigmas) and crit[-1] is not None and gaps[-1] > jump_threshold
    settled = False
    if persists and len(crit) >= 2:
        a, b = crit[-2], crit[-1]
        settled = abs(b - a) <= rel_tol * max(abs(b), 1e-12)
    kind = "incentive-driven" if persists and settled else "entropy-driven"
    return Classification(kind, tuple(sigmas[: len(crit)]), tuple(crit), tuple(gaps))


# -- kernels and typed models -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Kernel:
    psi: np.ndarray

    def __post_init__(self):
        p = np.array(self.psi, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("a kernel is a square matrix")
        if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise ValueError("kernel entries must lie in [0, 1]")
        p.flags.writeable = False
        object.__setattr__(self, "psi", p)

    @classmethod
    def constant(cls, L: int, rho: float) -> "Kernel":
        return cls(np.full((L, L), rho))

    @property
    def n_types(self) -> int:
        return self.psi.shape[0]

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.psi - self.psi.T)))


def _einsum_subscripts(m: Motif) -> str:
    letters = string.ascii_letters
    nodes = ",".join(letters[v] for v in range(m.n_nodes))
    edges = ",".join(letters[i] + letters[j] for i, j in m.edges)
    return f"{nodes},{edges}->"


def kernel_motif_density(m: Motif, psi, w) -> float:
    """Expected motif density under a block model with type weights ``w``."""
    P = psi.psi if isinstance(psi, Kernel) else np.asarray(psi, dtype=float)
    w = np.asarray(w, dtype=float)
    L = len(w)
    if P.shape != (L, L):
        raise ValueError(f"kernel shape {P.shape} does not match {L} types")
    if float(L) ** m.n_nodes > KERNEL_BUDGET:
        raise InfeasibleSizeError(f"L^n_m = {L}^{m.n_nodes} exceeds the budget of {KERNEL_BUDGET}")
    ops = [w] * m.n_nodes + [P] * m.n_edges
    return float(np.einsum(_einsum_subscripts(m), *ops, optimize=_contraction_path(m, L)))


@lru_cache(maxsize=256)
def _contraction_path(m: Motif, L: int):
    ops = [np.ones(L)] * m.n_nodes + [np.ones((L, L))] * m.n_edges
    return np.einsum_path(_einsum_subscripts(m), *ops, optimize="greedy")[0]


@lru_cache(maxsize=32)
def _interpolation(deg: int):
    """Chebyshev nodes on [0, 1] and the matrix mapping values there to power coefficients."""
    nodes = 0.5 - 0.5 * np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    return nodes, np.linalg.inv(np.vander(nodes, deg + 1, increasing=True))


@dataclass(frozen=True, eq=False)
class TypedModel:
    """Types with weights, motif incentives, and a neighborhood utility.

    The neighborhood utility of a type-``t`` agent with neighbor-type counts
    ``z`` is ``sum_s c[t, s] z[s] + (sum_s alpha[t, s] z[s]**r)**(1/r)``.
    """

    weights: np.ndarray
    motif_model: Optional[MotifModel] = None
    c: Optional[np.ndarray] = None
    sigma: Optional[float] = None
    alpha: Optional[np.ndarray] = None
    r: float = 1.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or len(w) < 1 or np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("type weights must be positive and sum to 1")
        L = len(w)
        c = np.zeros((L, L)) if self.c is None else np.array(self.c, dtype=float)
        if c.shape != (L, L):
            raise ValueError("linear neighborhood coefficients must be L x L")
        alpha = None if self.alpha is None else np.array(self.alpha, dtype=float)
        if alpha is not None and (alpha.shape != (L, L) or np.any(alpha < 0)):
            raise ValueError("CES weights must be a nonnegative L x L matrix")
        if not 0 < self.r <= 1:
            raise ValueError("CES exponent must lie in (0, 1]")
        sigma = self.sigma
        if self.motif_model is not None:
            check_sign_condition(self.motif_model.motifs, self.motif_model.values)
            if sigma is not None and abs(sigma - self.motif_model.sigma) > 0:
                raise ValueError("sigma disagrees with the motif model")
            sigma = self.motif_model.sigma
        if sigma is None or not 0 < sigma < 1:
            raise ValueError("sigma in (0, 1) is required")
        for name, val in (("weights", w), ("c", c), ("alpha", alpha), ("sigma", sigma)):
            if isinstance(val, np.ndarray):
                val.flags.writeable = False
            object.__setattr__(self, name, val)

    @property
    def n_types(self) -> int:
        return len(self.weights)

    @property
    def beta(self) -> float:
        return (1.0 - self.sigma) / self.sigma

    def terms(self) -> list[tuple[Motif, float]]:
        if self.motif_model is None:
            return []
        return [(m, a / m.degeneracy) for m, a in zip(self.motif_model.motifs, self.motif_model.values)]

    def neighborhood_utility(self, theta: int, z) -> float:
        z = np.asarray(z, dtype=float)
        out = float(self.c[theta] @ z)
        if self.alpha is not None:
            out += _ces(self.alpha[theta], z, self.r)
        return out

    def check_assumptions(self, n_rays: int = 200, seed: int = 0, tol: float = 1e-9) -> bool:
        """Numerical audit of homogeneity, concavity and monotonicity on random rays."""
        if self.alpha is None:
            return True
        rng = np.random.default_rng(seed)
        L = self.n_types
        for _ in range(n_rays):
            t = int(rng.integers(L))
            z1, z2 = rng.random(L) * 5, rng.random(L) * 5
            lam, s = rng.random() * 3 + 0.1, rng.random()
            f = lambda z: _ces(self.alpha[t], z, self.r)
            if abs(f(lam * z1) - lam * f(z1)) > tol * (1 + abs(f(z1))):
                return False
            if f(s * z1 + (1 - s) * z2) < s * f(z1) + (1 - s) * f(z2) - tol:
                return False
            if f(z1 + z2) < f(z1) - tol:
                return False
        return True


def _ces(alpha, z, r) -> float:
    if r == 1.0:
        return float(alpha @ z)
    s = float(alpha @ np.power(np.maximum(z, 0.0), r))
    return s ** (1.0 / r) if s > 0 else 0.0


def typed_eap(psi, model: TypedModel) -> float:
    P = psi.psi if isinstance(psi, Kernel) else np.asarray(psi, dtype=float)
    w = model.weights
    if P.shape != (model.n_types, model.n_types):
        raise ValueError(f"kernel shape {P.shape} does not match {model.n_types} types")
    beta = model.beta
    motif = sum(coef * kernel_motif_density(m, P, w) for m, coef in model.terms())
    ent = float(w @ entropy(P) @ w)
    nbhd = sum(w[t] * model.neighborhood_utility(t, w * P[t]) for t in range(model.n_types))
    return beta * motif + ent + beta * nbhd


@dataclass
class KernelSolution:
    kernel: Kernel
    zeta: float
    local_optima: list[tuple[Kernel, float]]
    converged: bool
    sweeps: int


def _entry_problem(P: np.ndarray, a: int, b: int, model: TypedModel):
    """Derivative (in logit coordinates) and value of the objective in entry ``(a, b)``."""
    w = model.weights
    beta = model.beta
    ww = w[a] * w[b]
    # motif term is a polynomial in the entry of degree <= max edge count
    deg = max((m.n_edges for m, _ in model.terms()), default=0)
    if deg:
        nodes, inv = _interpolation(deg)
        vals = np.empty(deg + 1)
        Q = P.copy()
        for k, x in enumerate(nodes):
            Q[a, b] = x
            vals[k] = sum(coef * kernel_motif_density(m, Q, w) for m, coef in model.terms())
        coeffs = inv @ vals
    else:
        coeffs = np.zeros(1)
    dcoeffs = coeffs[1:] * np.arange(1, len(coeffs)) if len(coeffs) > 1 else np.zeros(1)
    poly = lambda x: np.polynomial.polynomial.polyval(x, coeffs)
    dpoly = lambda x: np.polynomial.polynomial.polyval(x, dcoeffs)
    lin = beta * w[a] * model.c[a, b] * w[b]

    alpha_row = model.alpha[a] if model.alpha is not None else None
    z = w * P[a]

    def ces_value(x):
        if alpha_row is None:
            return np.zeros_like(x)
        others = float(alpha_row @ np.power(z, model.r)) - alpha_row[b] * z[b] ** model.r
        s = others + alpha_row[b] * (w[b] * x) ** model.r
        return np.where(s > 0, np.power(np.maximum(s, 1e-300), 1.0 / model.r), 0.0)

    def ces_slope(x):
        if alpha_row is None or alpha_row[b] == 0:
            return np.zeros_like(x)
        r = model.r
        others = float(alpha_row @ np.power(z, r)) - alpha_row[b] * z[b] ** r
        zb = np.maximum(w[b] * x, 1e-300)
        s = others + alpha_row[b] * zb ** r
        return alpha_row[b] * w[b] * zb ** (r - 1) * s ** (1.0 / r - 1)

    def F(y):
        x = expit(y)
        return (beta * dpoly(x) + lin + beta * w[a] * ces_slope(x)) / ww - y

    def value(x):
        return beta * poly(x) + lin * x + ww * entropy(x) + beta * w[a] * ces_value(np.asarray(x))

    upper = float(ces_slope(np.array([1.0]))[0]) if alpha_row is not None else 0.0
    bound = (beta * np.abs(dcoeffs).sum() + abs(lin) + beta * w[a] * upper) / ww + 1.0
    return F, value, bound


def _coordinate_ascent(P: np.ndarray, model: TypedModel, tol: float, max_sweeps: int):
    L = model.n_types
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for a, b in itertools.product(range(L), range(L)):
            F, value, bound = _entry_problem(P, a, b, model)
            roots = _interior_maxima(F, bound)
            cands = [(float(expit(y)), float(value(float(expit(y))))) for y in roots]
            (x, _), _ = _pick(cands)
            change = max(change, abs(x - P[a, b]))
            P[a, b] = x
        if change < tol:
            return P, True, sweep
    return P, False, max_sweeps


def solve_kernel(model: TypedModel, starts: Optional[Sequence[float]] = None, tol: float = 1e-9,
                 max_sweeps: int = 500, distinct: float = 1e-4) -> KernelSolution:
    """Multi-start coordinate ascent over kernels."""
    L = model.n_types
    if L > 64:
        raise InfeasibleSizeError(f"{L} types exceeds the kernel solver limit of 64")
    starts = [round(0.05 * k, 2) for k in range(1, 20)] if starts is None else list(starts)
    finals = []
    all_converged = True
    total_sweeps = 0
    for rho0 in starts:
        P, ok, n = _coordinate_ascent(np.full((L, L), float(rho0)), model, tol, max_sweeps)
        all_converged &= ok
        total_sweeps += n
        finals.append((P, typed_eap(P, model)))
    optima: list[tuple[np.ndarray, float]] = []
    for P, val in finals:
        if all(np.max(np.abs(P - Q)) > distinct for Q, _ in optima):
            optima.append((P, val))
    optima.sort(key=lambda o: -o[1])
    best_val = optima[0][1]
    close = [o for o in optima if o[1] >= best_val - TIE_GAP]
    P, val = max(close, key=lambda o: float(o[0].mean()))
    if not all_converged:
        logger.warning("kernel coordinate ascent hit max_sweeps=%d; best iterate returned", max_sweeps)
    return KernelSolution(Kernel(P), float(val), [(Kernel(Q), float(v)) for Q, v in optima],
                          all_converged, total_sweeps)


# -- finite populations ------------------------------------------------------------------

class TypedUtility:
    """Finite-population utilities of a typed model for a fixed type assignment."""

    def __init__(self, model: TypedModel, types: Sequence[int]):
        self.model = model
        self.types = np.asarray(types, dtype=int)
        if np.any(self.types < 0) or np.any(self.types >= model.n_types):
            raise ValueError("type labels must lie in 0..L-1")
        self.n_types = model.n_types
        self.n_nodes = len(self.types)
        self.motif_model = model.motif_model
        self.sigma = model.sigma

    def neighbor_counts(self, adj: Adjacency, i: int) -> np.ndarray:
        return np.bincount(self.types[list(adj.out[i])], minlength=self.n_types).astype(float)

    def __call__(self, i: int, g) -> float:
        adj = Adjacency.of(g)
        motif = motif_utility(i, adj, self.motif_model) if self.motif_model is not None else 0.0
        return motif + self.model.neighborhood_utility(int(self.types[i]), self.neighbor_counts(adj, i))

    def increment(self, adj: Adjacency, i: int, j: int) -> tuple[np.ndarray, float]:
        """Motif embeddings and utility gained by ``i`` when ``ij`` is added (``ij`` absent)."""
        if self.motif_model is not None:
            inc, du = self.motif_model.increment(adj, i, j)
        else:
            inc, du = np.zeros(0), 0.0
        t, s = int(self.types[i]), int(self.types[j])
        du += self.model.c[t, s]
        if self.model.alpha is not None:
            z = self.neighbor_counts(adj, i)
            z2 = z.copy()
            z2[s] += 1
            du += _ces(self.model.alpha[t], z2, self.model.r) - _ces(self.model.alpha[t], z, self.model.r)
        return inc, du

    def marginal(self, adj: Adjacency, i: int, j: int) -> float:
        present = adj.has(i, j)
        if present:
            adj.remove(i, j)
        try:
            _, du = self.increment(adj, i, j)
        finally:
            if present:
                adj.add(i, j)
        return -du if present else du

    def utility_table(self, n: Optional[int] = None) -> UtilityTable:
        n = self.n_nodes if n is None else n
        if n != self.n_nodes:
            raise ValueError("type assignment has a different length")
        check_enumerable(n)
        vals = np.zeros((n, n_networks(n)))
        for s in range(n_networks(n)):
            g = DirectedNetwork(n, s)
            adj = Adjacency.of(g)
            for i in range(n):
                vals[i, s] = self(i, adj)
        return UtilityTable(n, vals)


def finite_n_typed_utility(i: int, g, types: Sequence[int], model: TypedModel) -> float:
    """Motif utility plus the value of ``i``'s neighbor-type counts."""
    if len(types) != g.n_nodes:
        raise ValueError("type assignment length must equal the number of nodes")
    return TypedUtility(model, types)(i, g)


def scaled_log_partition(phi: PotentialTable, sigma: float) -> float:
    """``log(sum_g exp(beta * phi(g))) / N^2`` over all networks."""
    from scipy.special import logsumexp

    beta = (1.0 - sigma) / sigma
    return float(logsumexp(beta * phi.values)) / phi.n_nodes ** 2
