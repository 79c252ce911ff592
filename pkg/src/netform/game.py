"""Static network formation games on the full network space.

Every table is dense and indexed by the network bit vector, so a utility
table for ``N`` agents is an ``(N, 2**(N(N-1)))`` float array. Structure
values are the Moebius inverse of utilities over the subnetwork lattice.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InternalConsistencyError, NonConservativeError, ShapeMismatchError
from .network import (
    DirectedNetwork,
    Dyad,
    check_enumerable,
    dyad_from_index,
    dyad_sources,
    n_dyads,
    n_networks,
    reverse_dyad_indices,
    source_mask_table,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _n_from_states(n_states: int) -> int:
    for n in range(2, 6):
        if n_networks(n) == n_states:
            return n
    raise ShapeMismatchError(f"{n_states} is not 2^(N(N-1)) for any N <= 5")


@dataclass(frozen=True, eq=False)
class AgentTable:
    """Per-agent map network -> real, shape ``(N, 2**(N(N-1)))``."""

    n_nodes: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_enumerable(self.n_nodes)
        vals = _frozen(self.values)
        if vals.shape != (self.n_nodes, n_networks(self.n_nodes)):
            raise ShapeMismatchError(
                f"expected shape {(self.n_nodes, n_networks(self.n_nodes))}, got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("table entries must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values.shape[0], values)

    def __call__(self, i: int, g: DirectedNetwork) -> float:
        return float(self.values[i, g.bits])


class UtilityTable(AgentTable):
    """Payoffs ``U_i(g)``."""

    def marginals(self) -> np.ndarray:
        """``M[d, g] = U_i(toggle(g, d)) - U_i(g)`` with ``i`` the source of ``d``."""
        return marginal_table(self)


class ValueTable(AgentTable):
    """Structure values ``V_i(g)``."""


@dataclass(frozen=True, eq=False)
class PotentialTable:
    n_nodes: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_enumerable(self.n_nodes)
        vals = _frozen(self.values)
        if vals.shape != (n_networks(self.n_nodes),):
            raise ShapeMismatchError(f"potential table has shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __call__(self, g: DirectedNetwork) -> float:
        return float(self.values[g.bits])

    def shifted(self) -> "PotentialTable":
        """Same potential normalized to zero on the empty network."""
        return PotentialTable(self.n_nodes, self.values - self.values[0])


@dataclass(frozen=True)
class ConservativenessReport:
    is_conservative: bool
    worst_residual: float
    tolerance: float
    # (network, first dyad, second dyad) at the lexicographically first worst violation
    witness: Optional[tuple[DirectedNetwork, Dyad, Dyad]] = None

    def to_dict(self) -> dict:
        out = {
            "is_conservative": self.is_conservative,
            "worst_residual": self.worst_residual,
            "tolerance": self.tolerance,
            "witness": None,
        }
        if self.witness is not None:
            g, d1, d2 = self.witness
            out["witness"] = {
                "network": g.to_text(),
                "network_hex": g.to_hex(),
                "dyad1": [d1[0] + 1, d1[1] + 1],
                "dyad2": [d2[0] + 1, d2[1] + 1],
            }
        return out


# -- subset-lattice transforms ----------------------------------------------

def subset_sum(a: np.ndarray, n_bits: int) -> np.ndarray:
    """``out[g] = sum_{g' subset g} a[g']`` along the last axis."""
    out = np.array(a, dtype=float, copy=True)
    lead = out.shape[:-1]
    for k in range(n_bits):
        v = out.reshape(lead + (-1, 2, 1 << k))
        v[..., 1, :] += v[..., 0, :]
    return out


def moebius(a: np.ndarray, n_bits: int) -> np.ndarray:
    """``out[g] = sum_{g' subset g} (-1)^{|g minus g'|} a[g']`` along the last axis."""
    out = np.array(a, dtype=float, copy=True)
    lead = out.shape[:-1]
    for k in range(n_bits):
        v = out.reshape(lead + (-1, 2, 1 << k))
        v[..., 1, :] -= v[..., 0, :]
    return out


def values_from_utilities(U: UtilityTable) -> ValueTable:
    return ValueTable(U.n_nodes, moebius(U.values, n_dyads(U.n_nodes)))


def utilities_from_values(V: ValueTable) -> UtilityTable:
    return UtilityTable(V.n_nodes, subset_sum(V.values, n_dyads(V.n_nodes)))


# -- marginal utilities and conservativeness ---------------------------------

def marginal_table(U: UtilityTable) -> np.ndarray:
    n = U.n_nodes
    states = np.arange(n_networks(n))
    src = dyad_sources(n)
    flips = states[None, :] ^ (1 << np.arange(n_dyads(n)))[:, None]
    return U.values[src[:, None], flips] - U.values[src[:, None], states[None, :]]


def _cycle_residuals(M: np.ndarray, d1: int) -> np.ndarray:
    """Order-dependence of two-link changes for dyad ``d1`` against every dyad.

    Entry ``[d2, g]`` is ``M[d1,g] + M[d2,t1 g] - M[d2,g] - M[d1,t2 g]``.
    """
    D, S = M.shape
    states = np.arange(S)
    flipped_by = states[None, :] ^ (1 << np.arange(D))[:, None]
    return (M[d1][None, :] + M[:, states ^ (1 << d1)] - M - M[d1][flipped_by])


def worst_cycle(M: np.ndarray, n_nodes: int, tol: float):
    """Largest absolute two-link order residual and its lexicographic witness."""
    D, S = M.shape
    worst = 0.0
    per_d1 = []
    for d1 in range(D):
        r = np.abs(_cycle_residuals(M, d1))
        per_d1.append(float(r.max()))
        worst = max(worst, per_d1[-1])
    if worst <= tol:
        return worst, None
    # lexicographically first (g, d1, d2) among entries attaining the maximum
    best = None
    for d1 in range(D):
        if per_d1[d1] < worst:
            continue
        r = np.abs(_cycle_residuals(M, d1))
        d2s, gs = np.nonzero(r >= worst)
        for g, d2 in sorted(zip(gs.tolist(), d2s.tolist()))[:1]:
            key = (g, d1, d2)
            if best is None or key < best:
                best = key
    g, d1, d2 = best
    witness = (DirectedNetwork(n_nodes, g), dyad_from_index(n_nodes, d1), dyad_from_index(n_nodes, d2))
    return worst, witness


def check_conservative(U: UtilityTable, tol: float = DEFAULT_TOL) -> ConservativenessReport:
    """Check that two-link marginal utility sums are order independent."""
    worst, witness = worst_cycle(marginal_table(U), U.n_nodes, tol)
    return ConservativenessReport(worst <= tol, worst, tol, witness)


def check_source_symmetry(V: ValueTable, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Do all source nodes of every structure assign it the same value?"""
    mask = source_mask_table(V.n_nodes)  # (S, N)
    vals = V.values.T  # (S, N)
    hi = np.where(mask, vals, -np.inf).max(axis=1)
    lo = np.where(mask, vals, np.inf).min(axis=1)
    spread = np.where(mask.any(axis=1), hi - lo, 0.0)
    worst = float(spread.max())
    return worst <= tol, worst


def shared_values(V: ValueTable) -> np.ndarray:
    """Common structure value ``V_0`` (mean over sources; 0 on sourceless structures)."""
    mask = source_mask_table(V.n_nodes)
    counts = mask.sum(axis=1)
    total = np.where(mask, V.values.T, 0.0).sum(axis=1)
    v0 = np.divide(total, counts, out=np.zeros_like(total), where=counts > 0)
    v0[0] = 0.0
    return v0


def build_potential(V0, n_nodes: int) -> PotentialTable:
    """``Phi(g) = sum_{g' subset g} V0(g')`` with ``V0(empty)`` pinned to 0."""
    check_enumerable(n_nodes)
    V0 = np.array(V0, dtype=float, copy=True)
    if V0.shape != (n_networks(n_nodes),):
        raise ShapeMismatchError(f"V0 has shape {V0.shape}")
    V0[0] = 0.0
    return PotentialTable(n_nodes, subset_sum(V0, n_dyads(n_nodes)))


def potential_from_utilities(U: UtilityTable, tol: float = DEFAULT_TOL, seed: int = 0) -> PotentialTable:
    """Potential by summing single-link marginals along an edge ordering.

    Each network is reached from the empty one by adding its links in
    increasing dyad order. Path independence is then audited by removing a
    randomly chosen link from every network.
    """
    report = check_conservative(U, tol)
    if not report.is_conservative:
        raise NonConservativeError(report)
    n = U.n_nodes
    D, S = n_dyads(n), n_networks(n)
    src = dyad_sources(n)
    phi = np.zeros(S)
    for k in range(D):
        lo, hi = 1 << k, 1 << (k + 1)
        g = np.arange(lo, hi)
        phi[lo:hi] = phi[g ^ lo] + U.values[src[k], g] - U.values[src[k], g ^ lo]

    rng = np.random.default_rng(seed)
    states = np.arange(1, S)
    present = ((states[:, None] >> np.arange(D)[None, :]) & 1).astype(bool)
    keys = np.where(present, rng.random(present.shape), -1.0)
    pick = keys.argmax(axis=1)
    prev = states ^ (1 << pick)
    alt = phi[prev] + U.values[src[pick], states] - U.values[src[pick], prev]
    gap = float(np.max(np.abs(alt - phi[states]))) if len(states) else 0.0
    if gap > max(tol, 1e-6) * max(1.0, float(np.abs(phi).max())):
        raise InternalConsistencyError(f"path-dependent potential (gap {gap:.3g})")
    return PotentialTable(n, phi)


def check_choice_equivalence(U: UtilityTable, U2: UtilityTable, tol: float = DEFAULT_TOL) -> bool:
    if U.n_nodes != U2.n_nodes:
        raise ShapeMismatchError("utility tables have different N")
    return bool(np.max(np.abs(marginal_table(U) - marginal_table(U2))) <= tol)


# -- equilibria ---------------------------------------------------------------

def nash_mask(U: UtilityTable, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Boolean mask over networks: no agent gains by rewiring her out-links."""
    n = U.n_nodes
    k = n - 1
    S = n_networks(n)
    ok = np.ones(S, dtype=bool)
    for i in range(n):
        u = U.values[i].reshape(S >> ((i + 1) * k), 1 << k, 1 << (i * k))
        best = u.max(axis=1, keepdims=True)
        ok &= (u >= best - tol).reshape(S)
    return ok


def nash_equilibria(U: UtilityTable, tol: float = DEFAULT_TOL) -> list[DirectedNetwork]:
    """All pure-strategy Nash equilibria, in increasing bit-vector order."""
    return [DirectedNetwork(U.n_nodes, int(b)) for b in np.flatnonzero(nash_mask(U, tol))]


def pmne(phi: PotentialTable, U: UtilityTable, tol: float = DEFAULT_TOL) -> list[DirectedNetwork]:
    """Potential-maximizing Nash equilibria."""
    if phi.n_nodes != U.n_nodes:
        raise ShapeMismatchError("potential and utilities have different N")
    top = phi.values >= phi.values.max() - tol
    both = top & nash_mask(U, tol)
    if not both.any():
        raise InternalConsistencyError(
            "no global maximizer of the potential is a Nash equilibrium; "
            "the potential does not match these utilities"
        )
    return [DirectedNetwork(U.n_nodes, int(b)) for b in np.flatnonzero(both)]


# -- standard instances -------------------------------------------------------

def reciprocity_utilities(n_nodes: int, v, c) -> UtilityTable:
    """``U_i(g) = v_i * #reciprocated links of i - c * #outgoing links of i``.

    ``v`` may be a scalar or a per-agent array (the latter breaks conservativeness).
    """
    check_enumerable(n_nodes)
    v = np.broadcast_to(np.asarray(v, dtype=float), (n_nodes,))
    D, S = n_dyads(n_nodes), n_networks(n_nodes)
    states = np.arange(S)
    present = (states[None, :] >> np.arange(D)[:, None]) & 1  # (D, S)
    recip = present & present[reverse_dyad_indices(n_nodes)]
    src = dyad_sources(n_nodes)
    out = np.zeros((n_nodes, S))
    for i in range(n_nodes):
        rows = src == i
        out[i] = v[i] * recip[rows].sum(axis=0) - c * present[rows].sum(axis=0)
    return UtilityTable(n_nodes, out)


def reciprocity_potential(n_nodes: int, v: float, c: float) -> PotentialTable:
    """``v * #reciprocated pairs - c * #links``."""
    check_enumerable(n_nodes)
    D, S = n_dyads(n_nodes), n_networks(n_nodes)
    present = (np.arange(S)[None, :] >> np.arange(D)[:, None]) & 1
    recip = present & present[reverse_dyad_indices(n_nodes)]
    return PotentialTable(n_nodes, v * recip.sum(axis=0) / 2 - c * present.sum(axis=0))
