"""Motifs, their densities in a network, and motif-based utilities.

Counts are exact integers; densities are returned as floats, or as
``fractions.Fraction`` when ``exact=True``.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleSizeError
from .game import PotentialTable, UtilityTable
from .network import DirectedNetwork, check_enumerable, n_networks, parse_edge_list

MAX_MOTIF_NODES = 8  # factorial permutation scans
MAX_BACKTRACK_NODES = 16
MAX_MAPS = 10**7


@dataclass(frozen=True)
class Motif:
    """A small directed pattern on nodes ``0..n_nodes-1`` with no isolated node."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        edges = tuple(sorted({(int(i), int(j)) for i, j in self.edges}))
        if not edges:
            raise ValueError("a motif needs at least one edge")
        for i, j in edges:
            if i == j:
                raise ValueError(f"motif edge {(i, j)} is a self-loop")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"motif edge {(i, j)} outside nodes 0..{self.n_nodes - 1}")
        touched = {v for e in edges for v in e}
        if len(touched) != self.n_nodes:
            missing = sorted(set(range(self.n_nodes)) - touched)
            raise ValueError(f"motif has isolated nodes {[m + 1 for m in missing]}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], name: str = "") -> "Motif":
        edges = list(edges)
        n = 1 + max(max(e) for e in edges)
        return cls(n, tuple(edges), name)

    @classmethod
    def parse(cls, text: str, name: str = "") -> "Motif":
        """Parse ``nodes=3; edges=1->2,2->3,3->1`` (1-based; ``nodes=`` optional)."""
        m = re.fullmatch(r"\s*(?:nodes\s*=\s*(\d+)\s*;)?\s*(?:edges\s*=)?\s*(.*?)\s*", text)
        if not m:
            raise ValueError(f"cannot parse motif {text!r}")
        edges = [(i - 1, j - 1) for i, j in parse_edge_list(m.group(2))]
        if not edges:
            raise ValueError(f"motif {text!r} has no edges")
        n = int(m.group(1)) if m.group(1) else 1 + max(max(e) for e in edges)
        return cls(n, tuple(edges), name)

    def to_text(self) -> str:
        body = ",".join(f"{i + 1}->{j + 1}" for i, j in self.edges)
        return f"nodes={self.n_nodes}; edges={body}"

    @classmethod
    def link(cls) -> "Motif":
        return cls(2, ((0, 1),), "link")

    @classmethod
    def reciprocal_pair(cls) -> "Motif":
        return cls(2, ((0, 1), (1, 0)), "reciprocal")

    @classmethod
    def cycle(cls, k: int) -> "Motif":
        return cls(k, tuple((i, (i + 1) % k) for i in range(k)), f"cycle{k}")

    @classmethod
    def chain(cls, length: int) -> "Motif":
        """Directed path ``1->2->...->length`` on ``length`` nodes."""
        if length < 2:
            raise ValueError("a chain needs at least 2 nodes")
        return cls(length, tuple((i, i + 1) for i in range(length - 1)), f"chain{length}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def sources(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.edges)

    @cached_property
    def degeneracy(self) -> int:
        """Number of relabelings mapping the edge set onto itself.

        An injective edge-preserving self-map of a finite graph is a bijection
        on edges too, so counting self-embeddings by backtracking counts
        automorphisms without scanning all ``n!`` permutations.
        """
        if self.n_nodes > MAX_BACKTRACK_NODES:
            raise InfeasibleSizeError(
                f"motif has {self.n_nodes} nodes; automorphism counting is capped at {MAX_BACKTRACK_NODES}"
            )
        return sum(1 for _ in _enumerate(self, Adjacency(self.n_nodes, self.edges), injective=True))

    def is_isomorphic(self, other: "Motif") -> bool:
        if (self.n_nodes, self.n_edges) != (other.n_nodes, other.n_edges):
            return False
        if sorted(_degrees(self)) != sorted(_degrees(other)):
            return False
        return next(_enumerate(self, Adjacency(other.n_nodes, other.edges), injective=True), None) is not None

    @property
    def canonical_form(self) -> tuple:
        """Lexicographically smallest relabeled edge list (permutation scan, ``n_m <= 8``)."""
        return (self.n_nodes, permutation_scan(self)[1])

    def __str__(self) -> str:
        return self.name or self.to_text()


def degeneracy(m: Motif) -> int:
    """Number of node permutations mapping the motif's edge set onto itself."""
    return m.degeneracy


def permutation_scan(m: Motif) -> tuple[int, tuple]:
    """Automorphism count and canonical edge list by trying every relabeling."""
    if m.n_nodes > MAX_MOTIF_NODES:
        raise InfeasibleSizeError(
            f"motif has {m.n_nodes} nodes; permutation scans are capped at {MAX_MOTIF_NODES}"
        )
    edge_set = set(m.edges)
    count, canon = 0, None
    for p in itertools.permutations(range(m.n_nodes)):
        image = tuple(sorted((p[i], p[j]) for i, j in m.edges))
        if set(image) == edge_set:
            count += 1
        if canon is None or image < canon:
            canon = image
    return count, canon


def _degrees(m: Motif) -> list[tuple[int, int]]:
    out = [0] * m.n_nodes
    inn = [0] * m.n_nodes
    for i, j in m.edges:
        out[i] += 1
        inn[j] += 1
    return list(zip(out, inn))


# -- embedding enumeration ----------------------------------------------------

class Adjacency:
    """Out/in neighbor sets of a network, the input of every counting routine."""

    def __init__(self, n_nodes: int, edges: Iterable[tuple[int, int]] = ()):
        self.n_nodes = n_nodes
        self.out = [set() for _ in range(n_nodes)]
        self.inn = [set() for _ in range(n_nodes)]
        for i, j in edges:
            self.add(i, j)

    @classmethod
    def of(cls, g) -> "Adjacency":
        if isinstance(g, Adjacency):
            return g
        return cls(g.n_nodes, g.edges)

    def add(self, i: int, j: int) -> None:
        self.out[i].add(j)
        self.inn[j].add(i)

    def remove(self, i: int, j: int) -> None:
        self.out[i].discard(j)
        self.inn[j].discard(i)

    def has(self, i: int, j: int) -> bool:
        return j in self.out[i]

    def n_edges(self) -> int:
        return sum(len(s) for s in self.out)


def _search_order(m: Motif, first: Sequence[int] = ()) -> list[int]:
    """Motif nodes ordered so each node after a component root touches an earlier one."""
    nbrs = {v: set() for v in range(m.n_nodes)}
    for i, j in m.edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    order = list(first)
    seen = set(order)
    while len(order) < m.n_nodes:
        cand = [v for v in range(m.n_nodes) if v not in seen and nbrs[v] & seen]
        if not cand:
            cand = [max((v for v in range(m.n_nodes) if v not in seen), key=lambda v: len(nbrs[v]))]
        v = cand[0]
        order.append(v)
        seen.add(v)
    return order


def _constraints(m: Motif, order: list[int]):
    """For each position: (out-constraints, in-constraints) as earlier positions."""
    pos = {v: k for k, v in enumerate(order)}
    cons = []
    for k, v in enumerate(order):
        outs = [pos[i] for i, j in m.edges if j == v and pos[i] < k]  # image must be in out[phi(i)]
        ins = [pos[j] for i, j in m.edges if i == v and pos[j] < k]  # image must be in inn[phi(j)]
        cons.append((outs, ins))
    return cons


def _enumerate(m: Motif, adj: Adjacency, injective: bool, pinned: Sequence[int] = (), first: Sequence[int] = ()):
    """Yield every edge-preserving map as a tuple indexed by search position.

    ``pinned`` fixes the images of the motif nodes listed in ``first``.
    """
    order = _search_order(m, first)
    cons = _constraints(m, order)
    n = adj.n_nodes
    everything = range(n)
    phi = list(pinned) + [0] * (m.n_nodes - len(pinned))
    # pinned prefix must itself be consistent
    for k in range(len(pinned)):
        outs, ins = cons[k]
        if injective and phi[k] in phi[:k]:
            return
        if any(phi[k] not in adj.out[phi[p]] for p in outs) or any(phi[k] not in adj.inn[phi[p]] for p in ins):
            return

    def rec(k):
        if k == m.n_nodes:
            yield tuple(phi)
            return
        outs, ins = cons[k]
        if outs or ins:
            sets = [adj.out[phi[p]] for p in outs] + [adj.inn[phi[p]] for p in ins]
            sets.sort(key=len)
            cand = sets[0] if len(sets) == 1 else set.intersection(*sets)
        else:
            cand = everything
        used = set(phi[:k]) if injective else ()
        for x in cand:
            if injective and x in used:
                continue
            phi[k] = x
            yield from rec(k + 1)

    yield from ((order, p) for p in rec(len(pinned)))


def _check_feasible(m: Motif, n: int) -> None:
    if n ** m.n_nodes > MAX_MAPS:
        raise InfeasibleSizeError(
            f"N^n_m = {n}^{m.n_nodes} exceeds the enumeration budget of {MAX_MAPS} maps"
        )


def embedding_counts(m: Motif, g) -> tuple[int, np.ndarray]:
    """Injective embeddings of ``m`` in ``g``: total and per-node source participation."""
    adj = Adjacency.of(g)
    _check_feasible(m, adj.n_nodes)
    total = 0
    part = np.zeros(adj.n_nodes, dtype=np.int64)
    src_positions = None
    for order, phi in _enumerate(m, adj, injective=True):
        if src_positions is None:
            src_positions = [k for k, v in enumerate(order) if v in m.sources]
        total += 1
        for k in src_positions:
            part[phi[k]] += 1
    return total, part


def injective_count(m: Motif, g) -> int:
    adj = Adjacency.of(g)
    _check_feasible(m, adj.n_nodes)
    return sum(1 for _ in _enumerate(m, adj, injective=True))


def homomorphism_count(m: Motif, g) -> int:
    adj = Adjacency.of(g)
    _check_feasible(m, adj.n_nodes)
    return sum(1 for _ in _enumerate(m, adj, injective=False))


def rooted_count(m: Motif, adj: Adjacency, i: int, j: int) -> int:
    """Injective embeddings of ``m`` in ``adj + {ij}`` that use the link ``ij``.

    ``adj`` must not contain ``ij``. Distinct motif edges map to distinct
    links, so the count splits over which motif edge lands on ``ij``.
    """
    # with ij present, an injective map sending (u, v) to (i, j) is the only
    # way a motif edge lands on ij
    adj.add(i, j)
    try:
        return sum(
            sum(1 for _ in _enumerate(m, adj, injective=True, pinned=(i, j), first=(u, v)))
            for u, v in m.edges
        )
    finally:
        adj.remove(i, j)


def _ratio(num: int, den: int, exact: bool):
    return Fraction(num, den) if exact else num / den


def participation_density(i: int, m: Motif, g, exact: bool = False):
    """``(N/|src(m)|) N^{-n_m}`` times the embeddings in which ``i`` is a source."""
    adj = Adjacency.of(g)
    _, part = embedding_counts(m, adj)
    n = adj.n_nodes
    return _ratio(int(part[i]) * n, len(m.sources) * n ** m.n_nodes, exact)


def participation_densities(m: Motif, g, exact: bool = False) -> list:
    adj = Adjacency.of(g)
    _, part = embedding_counts(m, adj)
    n = adj.n_nodes
    return [_ratio(int(c) * n, len(m.sources) * n ** m.n_nodes, exact) for c in part]


def subgraph_density(m: Motif, g, exact: bool = False):
    adj = Adjacency.of(g)
    return _ratio(injective_count(m, adj), adj.n_nodes ** m.n_nodes, exact)


def homomorphism_density(m: Motif, g, exact: bool = False):
    adj = Adjacency.of(g)
    return _ratio(homomorphism_count(m, adj), adj.n_nodes ** m.n_nodes, exact)


def complete_density(m: Motif, n: int) -> float:
    """Subgraph (and participation) density of ``m`` in the complete network on ``n`` nodes."""
    return math.perm(n, m.n_nodes) / n ** m.n_nodes


# -- motif models -------------------------------------------------------------

@dataclass(frozen=True)
class MotifModel:
    """Motifs with values ``a_m`` and choice noise ``sigma``.

    Each realization an agent sources is worth ``a_m / N^(n_m - 2)``.
    """

    motifs: tuple[Motif, ...]
    values: tuple[float, ...]
    sigma: float

    def __post_init__(self):
        motifs = tuple(self.motifs)
        values = tuple(float(a) for a in self.values)
        if not motifs:
            raise ValueError("a motif model needs at least one motif")
        if len(values) != len(motifs):
            raise ValueError("one value per motif is required")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie strictly inside (0, 1), got {self.sigma}")
        if not all(math.isfinite(a) for a in values):
            raise ValueError("motif values must be finite")
        for a, b in itertools.combinations(range(len(motifs)), 2):
            if motifs[a].is_isomorphic(motifs[b]):
                raise ValueError(f"motifs {motifs[a]} and {motifs[b]} are isomorphic")
        object.__setattr__(self, "motifs", motifs)
        object.__setattr__(self, "values", values)

    @property
    def beta(self) -> float:
        return (1.0 - self.sigma) / self.sigma

    def with_values(self, values) -> "MotifModel":
        return MotifModel(self.motifs, tuple(values), self.sigma)

    def with_sigma(self, sigma: float) -> "MotifModel":
        return MotifModel(self.motifs, self.values, sigma)

    def marginal(self, adj: Adjacency, i: int, j: int) -> float:
        """``U_i(toggle(g, ij)) - U_i(g)``, computed from links that ``ij`` creates or destroys."""
        present = adj.has(i, j)
        if present:
            adj.remove(i, j)
        try:
            gain = self.embedding_increment(adj, i, j) @ self.weights(adj.n_nodes)
        finally:
            if present:
                adj.add(i, j)
        return -gain if present else gain

    def embedding_increment(self, adj: Adjacency, i: int, j: int) -> np.ndarray:
        """Per-motif embeddings created by adding ``ij`` to ``adj`` (``ij`` absent)."""
        out = np.empty(len(self.motifs))
        for k, m in enumerate(self.motifs):
            if m.n_nodes == 2:
                # a link, or a reciprocal pair completed only if ji is present
                out[k] = 1.0 if m.n_edges == 1 else 2.0 * adj.has(j, i)
            else:
                out[k] = rooted_count(m, adj, i, j)
        return out

    def increment(self, adj: Adjacency, i: int, j: int) -> tuple[np.ndarray, float]:
        """Embeddings gained and utility gained by the source when ``ij`` is added."""
        inc = self.embedding_increment(adj, i, j)
        return inc, float(inc @ self.weights(adj.n_nodes))

    def weights(self, n: int) -> np.ndarray:
        """Utility per embedding: ``a_m / (h_m N^(n_m - 2))``."""
        return _weights(self, n)


@lru_cache(maxsize=64)
def _weights(model: MotifModel, n: int) -> np.ndarray:
    w = np.array(
        [a / (m.degeneracy * float(n) ** (m.n_nodes - 2)) for m, a in zip(model.motifs, model.values)]
    )
    w.flags.writeable = False
    return w


def link_reciprocity_model(v: float, c: float, sigma: float) -> MotifModel:
    """Outgoing-link cost ``c`` plus reciprocated-pair value ``v``."""
    return MotifModel((Motif.link(), Motif.reciprocal_pair()), (-c, v), sigma)


def motif_utility(i: int, g, model: MotifModel, exact: bool = False):
    """``N * sum_m |src(m)| (a_m/h_m) b_{i,N}(m, g)``."""
    adj = Adjacency.of(g)
    n = adj.n_nodes
    total = Fraction(0) if exact else 0.0
    for m, a in zip(model.motifs, model.values):
        b = participation_density(i, m, adj, exact=exact)
        coef = Fraction(a).limit_denominator(10**12) if exact else a
        total += n * len(m.sources) * coef / m.degeneracy * b
    return total


def motif_potential(g, model: MotifModel, exact: bool = False):
    """``N^2 * sum_m (a_m/h_m) b_N(m, g)``."""
    adj = Adjacency.of(g)
    n = adj.n_nodes
    total = Fraction(0) if exact else 0.0
    for m, a in zip(model.motifs, model.values):
        b = subgraph_density(m, adj, exact=exact)
        coef = Fraction(a).limit_denominator(10**12) if exact else a
        total += n * n * coef / m.degeneracy * b
    return total


def _count_tables(model: MotifModel, n: int):
    """Total and per-node embeddings of every motif in every network on ``n`` nodes."""
    check_enumerable(n)
    S = n_networks(n)
    totals = np.zeros((len(model.motifs), S))
    parts = np.zeros((len(model.motifs), n, S))
    for s in range(S):
        adj = Adjacency.of(DirectedNetwork(n, s))
        for k, m in enumerate(model.motifs):
            t, p = embedding_counts(m, adj)
            totals[k, s] = t
            parts[k, :, s] = p
    return totals, parts


def motif_utility_table(model: MotifModel, n: int) -> UtilityTable:
    _, parts = _count_tables(model, n)
    w = model.weights(n)
    return UtilityTable(n, np.einsum("k,kis->is", w, parts))


def motif_potential_table(model: MotifModel, n: int) -> PotentialTable:
    totals, _ = _count_tables(model, n)
    return PotentialTable(n, model.weights(n) @ totals)
