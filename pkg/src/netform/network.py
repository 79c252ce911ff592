"""Directed networks on labeled nodes, encoded as bit vectors over dyads.

Nodes are 0-based internally and 1-based in every text format. Dyad ``(i, j)``
with ``i != j`` maps to bit ``i*(N-1) + (j if j < i else j-1)``, so the
``N-1`` outgoing dyads of node ``i`` occupy a contiguous block of bits.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import InfeasibleSizeError, InvalidDyadError

# full-space enumeration cap (2**20 states at N=5)
N_MAX = 5
# transient / explicit-generator cap (4096 states)
N_MAX_TRANSIENT = 4
SUBNETWORK_EDGE_LIMIT = 24


class Dyad(NamedTuple):
    source: int
    target: int


def n_dyads(n_nodes: int) -> int:
    return n_nodes * (n_nodes - 1)


def n_networks(n_nodes: int) -> int:
    return 1 << n_dyads(n_nodes)


def _check_dyad(n_nodes: int, i: int, j: int) -> None:
    if i == j:
        raise InvalidDyadError(f"self-loop ({i}, {j}) is not a dyad")
    if not (0 <= i < n_nodes and 0 <= j < n_nodes):
        raise InvalidDyadError(f"dyad ({i}, {j}) out of range for N={n_nodes}")


def dyad_index(n_nodes: int, i: int, j: int) -> int:
    i, j = int(i), int(j)
    _check_dyad(n_nodes, i, j)
    return i * (n_nodes - 1) + (j if j < i else j - 1)


def dyad_from_index(n_nodes: int, k: int) -> Dyad:
    if not 0 <= k < n_dyads(n_nodes):
        raise InvalidDyadError(f"dyad index {k} out of range for N={n_nodes}")
    i, r = divmod(k, n_nodes - 1)
    return Dyad(i, r if r < i else r + 1)


def dyad_sources(n_nodes: int) -> np.ndarray:
    """Source node of every dyad index."""
    return np.arange(n_dyads(n_nodes)) // (n_nodes - 1)


def dyad_targets(n_nodes: int) -> np.ndarray:
    k = np.arange(n_dyads(n_nodes))
    i, r = np.divmod(k, n_nodes - 1)
    return np.where(r < i, r, r + 1)


def reverse_dyad_indices(n_nodes: int) -> np.ndarray:
    """Index of dyad ``(j, i)`` for every dyad index ``(i, j)``."""
    src, tgt = dyad_sources(n_nodes), dyad_targets(n_nodes)
    return tgt * (n_nodes - 1) + np.where(src < tgt, src, src - 1)


@dataclass(frozen=True)
class DirectedNetwork:
    """Immutable directed network; ``bits`` is the dyad bit vector."""

    n_nodes: int
    bits: int = 0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        if self.bits < 0 or self.bits >> n_dyads(self.n_nodes):
            raise ValueError("bit vector wider than the dyad set")

    @classmethod
    def empty(cls, n_nodes: int) -> "DirectedNetwork":
        return cls(n_nodes, 0)

    @classmethod
    def complete(cls, n_nodes: int) -> "DirectedNetwork":
        return cls(n_nodes, n_networks(n_nodes) - 1)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int]]) -> "DirectedNetwork":
        bits = 0
        for i, j in edges:
            bits |= 1 << dyad_index(n_nodes, i, j)
        return cls(n_nodes, bits)

    @classmethod
    def from_adjacency(cls, adj) -> "DirectedNetwork":
        adj = np.asarray(adj, dtype=bool)
        n = adj.shape[0]
        return cls.from_edges(n, zip(*np.nonzero(adj & ~np.eye(n, dtype=bool))))

    @property
    def edges(self) -> list[Dyad]:
        out, b, k = [], self.bits, 0
        while b:
            if b & 1:
                out.append(dyad_from_index(self.n_nodes, k))
            b >>= 1
            k += 1
        return out

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __contains__(self, d) -> bool:
        i, j = d
        return bool(self.bits >> dyad_index(self.n_nodes, i, j) & 1)

    def __iter__(self) -> Iterator[Dyad]:
        return iter(self.edges)

    def issubset(self, other: "DirectedNetwork") -> bool:
        return self.n_nodes == other.n_nodes and self.bits & ~other.bits == 0

    def toggle(self, d) -> "DirectedNetwork":
        return toggle_link(self, d)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = True
        return adj

    def to_text(self) -> str:
        body = ",".join(f"{i + 1}->{j + 1}" for i, j in self.edges)
        return f"N={self.n_nodes}; edges={body}"

    @classmethod
    def from_text(cls, text: str) -> "DirectedNetwork":
        m = re.fullmatch(r"\s*N\s*=\s*(\d+)\s*;\s*edges\s*=\s*(.*?)\s*", text)
        if not m:
            raise ValueError(f"cannot parse network {text!r}")
        n = int(m.group(1))
        return cls.from_edges(n, [(i - 1, j - 1) for i, j in parse_edge_list(m.group(2))])

    def to_hex(self) -> str:
        width = max(1, -(-n_dyads(self.n_nodes) // 4))
        return format(self.bits, f"0{width}x")

    @classmethod
    def from_hex(cls, n_nodes: int, text: str) -> "DirectedNetwork":
        return cls(n_nodes, int(text, 16))

    def __str__(self) -> str:
        return self.to_text()


def parse_edge_list(text: str) -> list[tuple[int, int]]:
    """Parse ``"1->2, 2->3"`` into a list of integer pairs (no index shift)."""
    text = text.strip()
    if not text:
        return []
    out = []
    for tok in text.split(","):
        m = re.fullmatch(r"\s*(\d+)\s*->\s*(\d+)\s*", tok)
        if not m:
            raise ValueError(f"bad edge token {tok!r}")
        out.append((int(m.group(1)), int(m.group(2))))
    return out


def toggle_link(g: DirectedNetwork, d) -> DirectedNetwork:
    """Create the link ``d`` if absent, remove it if present."""
    i, j = d
    return DirectedNetwork(g.n_nodes, g.bits ^ (1 << dyad_index(g.n_nodes, i, j)))


def source_nodes(g: DirectedNetwork) -> frozenset[int]:
    return frozenset(i for i, _ in g.edges)


def source_mask_table(n_nodes: int) -> np.ndarray:
    """Boolean ``(S, N)`` array: node ``i`` has an outgoing link in network ``s``."""
    k = n_nodes - 1
    states = np.arange(n_networks(n_nodes), dtype=np.int64)
    return np.stack([(states >> (i * k)) & ((1 << k) - 1) != 0 for i in range(n_nodes)], axis=1)


def check_enumerable(n_nodes: int, limit: int = N_MAX) -> None:
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    if n_nodes > limit:
        raise InfeasibleSizeError(
            f"N={n_nodes} gives 2^{n_dyads(n_nodes)} = {n_networks(n_nodes)} networks; "
            f"full enumeration is capped at N={limit} ({n_networks(limit)} states)"
        )


def enumerate_networks(n_nodes: int) -> Iterator[DirectedNetwork]:
    """All networks on ``n_nodes`` nodes in increasing bit-vector order."""
    check_enumerable(n_nodes)
    for bits in range(n_networks(n_nodes)):
        yield DirectedNetwork(n_nodes, bits)


def enumerate_subnetworks(g: DirectedNetwork) -> Iterator[DirectedNetwork]:
    """Every edge subset of ``g``, in increasing bit-vector order."""
    if len(g) > SUBNETWORK_EDGE_LIMIT:
        raise InfeasibleSizeError(
            f"|g|={len(g)} edges gives 2^{len(g)} subnetworks (limit {SUBNETWORK_EDGE_LIMIT})"
        )
    positions = [k for k in range(n_dyads(g.n_nodes)) if g.bits >> k & 1]
    for r in range(1 << len(positions)):
        bits = 0
        for t, k in enumerate(positions):
            if r >> t & 1:
                bits |= 1 << k
        yield DirectedNetwork(g.n_nodes, bits)
