"""Continuous-time link-switching dynamics with logit acceptance.

Meetings arrive as a Poisson process whose total rate does not depend on
the state: constant and per-dyad rates are used as is, and state-dependent
rates are thinned against a declared upper bound. Holding times are
therefore i.i.d. and visit frequencies are plain event counts.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.special import expit, log_expit, logsumexp
from scipy.stats import poisson

from .errors import ConfigError, InfeasibleSizeError
from .game import PotentialTable, UtilityTable, marginal_table, worst_cycle
from .motifs import Adjacency, MotifModel, embedding_counts, motif_utility_table
from .network import (
    N_MAX_TRANSIENT,
    DirectedNetwork,
    Dyad,
    check_enumerable,
    dyad_from_index,
    dyad_index,
    dyad_sources,
    dyad_targets,
    n_dyads,
    n_networks,
)

logger = logging.getLogger(__name__)

_BATCH = 1 << 16
# above this many table entries acceptance probabilities stay in numpy
_LIST_TABLE_LIMIT = 1 << 17


def beta_of(sigma: float) -> float:
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie strictly inside (0, 1), got {sigma}")
    return (1.0 - sigma) / sigma


def make_rng(seed) -> np.random.Generator:
    """Counter-based Philox stream for a seed (int or ``SeedSequence``)."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def replica_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Independent child streams, one per replica."""
    return np.random.SeedSequence(seed).spawn(n)


# -- meeting rates --------------------------------------------------------------

class MeetingRates:
    """Rate at which the source of a dyad reconsiders that link."""

    def rate(self, d: int, g_bits: int, n_nodes: int) -> float:
        raise NotImplementedError

    def table(self, n_nodes: int) -> np.ndarray:
        """``(D, S)`` rates for every dyad and network."""
        D, S = n_dyads(n_nodes), n_networks(n_nodes)
        return np.array([[self.rate(d, g, n_nodes) for g in range(S)] for d in range(D)])


@dataclass(frozen=True)
class Constant(MeetingRates):
    lam: float = 1.0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("meeting rate must be positive and finite")

    def rate(self, d, g_bits, n_nodes):
        return self.lam

    def table(self, n_nodes):
        return np.full((n_dyads(n_nodes), n_networks(n_nodes)), self.lam)


@dataclass(frozen=True, eq=False)
class PerDyad(MeetingRates):
    """Fixed rate per dyad; ``lam`` is a length-``D`` vector or an ``N x N`` matrix."""

    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim == 2:
            n = lam.shape[0]
            lam = np.array([lam[i, j] for i, j in zip(dyad_sources(n), dyad_targets(n))])
        if lam.ndim != 1 or not np.all(lam > 0) or not np.all(np.isfinite(lam)):
            raise ValueError("per-dyad rates must be positive and finite")
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)

    def _check(self, n_nodes):
        if len(self.lam) != n_dyads(n_nodes):
            raise ConfigError(f"{len(self.lam)} per-dyad rates given for N={n_nodes}")

    def rate(self, d, g_bits, n_nodes):
        self._check(n_nodes)
        return float(self.lam[d])

    def table(self, n_nodes):
        self._check(n_nodes)
        return np.repeat(self.lam[:, None], n_networks(n_nodes), axis=1)


@dataclass(frozen=True, eq=False)
class StateDependent(MeetingRates):
    """``fn(dyad, network)`` with the dyad itself masked out of ``network``.

    Masking makes the rate identical before and after a toggle of that dyad.
    ``bound`` must dominate every rate; it drives the thinning step.
    """

    fn: Callable[[Dyad, DirectedNetwork], float]
    bound: float

    def rate(self, d, g_bits, n_nodes):
        masked = DirectedNetwork(n_nodes, g_bits & ~(1 << d))
        r = float(self.fn(dyad_from_index(n_nodes, d), masked))
        if not (0 < r <= self.bound * (1 + 1e-12)):
            raise ValueError(f"state-dependent rate {r} outside (0, {self.bound}]")
        return r


def _proposal_law(rates: MeetingRates, n_nodes: int):
    """Total proposal rate and dyad sampling weights (None = uniform)."""
    D = n_dyads(n_nodes)
    if isinstance(rates, Constant):
        return rates.lam * D, None
    if isinstance(rates, PerDyad):
        rates._check(n_nodes)
        return float(rates.lam.sum()), rates.lam / rates.lam.sum()
    if isinstance(rates, StateDependent):
        return rates.bound * D, None
    raise TypeError(f"unsupported meeting rates {type(rates).__name__}")


# -- switching probabilities ----------------------------------------------------

def marginal_utility(U, g: DirectedNetwork, d) -> float:
    """``U_i(toggle(g, d)) - U_i(g)`` for ``i`` the source of ``d``."""
    i, j = d
    if isinstance(U, UtilityTable):
        k = dyad_index(g.n_nodes, i, j)
        return float(U.values[i, g.bits ^ (1 << k)] - U.values[i, g.bits])
    if hasattr(U, "marginal"):
        return float(U.marginal(Adjacency.of(g), i, j))
    raise TypeError(f"cannot evaluate marginal utilities of {type(U).__name__}")


def switch_probability(U, g: DirectedNetwork, d, sigma: float) -> float:
    """Logit probability that the source of ``d`` toggles it when they meet."""
    return float(expit(beta_of(sigma) * marginal_utility(U, g, d)))


# -- configuration and results ----------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    n_nodes: int
    utilities: object  # UtilityTable, MotifModel, or anything with .marginal(adj, i, j)
    rates: MeetingRates = field(default_factory=Constant)
    sigma: Optional[float] = None
    events: Optional[int] = None
    time: Optional[float] = None
    initial: Optional[DirectedNetwork] = None
    rng_seed: int = 0
    burn_in: int = 0
    thinning: int = 1
    record_every: Optional[int] = None

    def __post_init__(self):
        if self.sigma is None:
            s = getattr(self.utilities, "sigma", None)
            if s is None:
                raise ConfigError("sigma is required for utilities that do not carry one")
            object.__setattr__(self, "sigma", float(s))
        beta_of(self.sigma)
        if (self.events is None) == (self.time is None):
            raise ConfigError("give exactly one of events or time as the horizon")
        if self.events is not None and self.events <= 0:
            raise ConfigError("event horizon must be positive")
        if self.time is not None and not self.time > 0:
            raise ConfigError("time horizon must be positive")
        if self.burn_in < 0 or self.thinning < 1:
            raise ConfigError("burn_in must be >= 0 and thinning >= 1")
        if self.record_every is not None and self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if isinstance(self.utilities, UtilityTable) and self.utilities.n_nodes != self.n_nodes:
            raise ConfigError("utility table is defined for a different N")
        if self.initial is not None and self.initial.n_nodes != self.n_nodes:
            raise ConfigError("initial network has the wrong N")

    @property
    def beta(self) -> float:
        return beta_of(self.sigma)


@dataclass
class TrajectoryStats:
    n_nodes: int
    n_events: int
    n_accepted: int
    total_time: float
    final_state: DirectedNetwork
    n_recorded: int
    visit_frequencies: Optional[np.ndarray] = None  # length 2^D, small N only
    proposals_by_dyad: Optional[np.ndarray] = None
    accepted_by_dyad: Optional[np.ndarray] = None
    mean_motif_densities: Optional[np.ndarray] = None
    block_densities: Optional[np.ndarray] = None
    series: list = field(default_factory=list)  # (event, time, density per motif)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_events if self.n_events else float("nan")

    def acceptance_by_dyad(self) -> Optional[np.ndarray]:
        if self.proposals_by_dyad is None:
            return None
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.accepted_by_dyad / self.proposals_by_dyad

    def to_dict(self) -> dict:
        out = {
            "n_nodes": self.n_nodes,
            "n_events": self.n_events,
            "n_accepted": self.n_accepted,
            "acceptance_rate": self.acceptance_rate,
            "total_time": self.total_time,
            "n_recorded": self.n_recorded,
            "final_state": self.final_state.to_text(),
            "final_state_hex": self.final_state.to_hex(),
        }
        if self.mean_motif_densities is not None:
            out["mean_motif_densities"] = [float(x) for x in self.mean_motif_densities]
        if self.block_densities is not None:
            out["block_densities"] = np.asarray(self.block_densities).tolist()
        return out


# -- simulation ---------------------------------------------------------------------

def _horizon(config: SimConfig, rng, total_rate: float) -> tuple[int, float]:
    if config.events is not None:
        n = int(config.events)
        return n, float(rng.gamma(n, 1.0 / total_rate))
    return int(rng.poisson(total_rate * config.time)), float(config.time)


def _series_clock(rng, config: SimConfig, n_events: int, total_time: float) -> np.ndarray:
    """Times of the recorded events, drawn jointly with the horizon.

    Given the horizon, event times are uniform order statistics, i.e.
    normalized partial sums of unit exponentials. The draws come from a
    spawned stream so that the trajectory itself does not depend on
    whether a series is requested.
    """
    if config.record_every is None or n_events == 0:
        return np.zeros(0)
    clock = rng.spawn(1)[0]
    idx = np.arange(0, n_events, config.record_every)
    # event kg (0-based) is the (kg+1)-th exponential partial sum
    gaps = np.diff(np.concatenate(([0], idx + 1)))
    partial = np.cumsum(clock.gamma(gaps.astype(float)))
    tail = n_events - (idx[-1] + 1) + (0 if config.events is not None else 1)
    total = partial[-1] + (clock.gamma(float(tail)) if tail > 0 else 0.0)
    return total_time * partial / total


def _motif_source(config: SimConfig):
    U = config.utilities
    return U if isinstance(U, MotifModel) else getattr(U, "motif_model", None)


def _state_densities(model: MotifModel, n: int) -> np.ndarray:
    """``(S, K)`` injective motif densities of every network on ``n`` nodes."""
    S = n_networks(n)
    norm = np.array([float(n) ** m.n_nodes for m in model.motifs])
    out = np.empty((S, len(model.motifs)))
    for g in range(S):
        adj = Adjacency.of(DirectedNetwork(n, g))
        out[g] = [embedding_counts(m, adj)[0] for m in model.motifs]
    return out / norm


def _table_utilities(config: SimConfig) -> Optional[UtilityTable]:
    U = config.utilities
    if isinstance(U, UtilityTable):
        return U
    if isinstance(U, MotifModel) and config.n_nodes <= N_MAX_TRANSIENT:
        return motif_utility_table(U, config.n_nodes)
    if hasattr(U, "utility_table") and config.n_nodes <= N_MAX_TRANSIENT:
        return U.utility_table(config.n_nodes)
    return None


def simulate(config: SimConfig, seed=None) -> TrajectoryStats:
    """Run one trajectory; deterministic in ``config.rng_seed`` (or ``seed``)."""
    rng = make_rng(config.rng_seed if seed is None else seed)
    U = _table_utilities(config)
    if U is not None:
        return _simulate_table(config, U, rng)
    if not hasattr(config.utilities, "marginal"):
        raise ConfigError(
            f"utilities of type {type(config.utilities).__name__} cannot be simulated at N={config.n_nodes}"
        )
    return _simulate_sparse(config, rng)


def _dyad_stream(rng, n, weights, D):
    if weights is None:
        return rng.integers(0, D, size=n)
    return rng.choice(D, size=n, p=weights)


def _recording(k_global: int, config: SimConfig) -> bool:
    return k_global >= config.burn_in and (k_global - config.burn_in) % config.thinning == 0


def _simulate_table(config: SimConfig, U: UtilityTable, rng) -> TrajectoryStats:
    n = config.n_nodes
    D, S = n_dyads(n), n_networks(n)
    total_rate, weights = _proposal_law(config.rates, n)
    n_events, total_time = _horizon(config, rng, total_rate)
    clock = _series_clock(rng, config, n_events, total_time)
    motif_model = _motif_source(config)
    dens = _state_densities(motif_model, n) if motif_model is not None else None
    series = []

    accept = expit(config.beta * marginal_table(U))  # (D, S)
    lazy_rates = None
    if isinstance(config.rates, StateDependent):
        if D * S <= _LIST_TABLE_LIMIT:
            accept = accept * config.rates.table(n) / config.rates.bound
        else:
            lazy_rates = config.rates
    flat = accept.reshape(-1)
    P = flat.tolist() if flat.size <= _LIST_TABLE_LIMIT else flat

    bit = [1 << d for d in range(D)]
    g = config.initial.bits if config.initial is not None else 0
    counts = np.zeros(S)
    prop = np.zeros(D, dtype=np.int64)
    acc = [0] * D
    n_rec = 0
    bound = config.rates.bound if lazy_rates is not None else 1.0
    done = 0
    while done < n_events:
        m = min(_BATCH, n_events - done)
        ds = _dyad_stream(rng, m, weights, D)
        us = rng.random(m).tolist()
        prop += np.bincount(ds, minlength=D)
        dl = ds.tolist()
        visits = []
        rec_start = max(0, config.burn_in - done)
        for k in range(m):
            d = dl[k]
            if k >= rec_start and (done + k - config.burn_in) % config.thinning == 0:
                visits.append(g)
            if config.record_every is not None and (done + k) % config.record_every == 0:
                kg = done + k
                row = dens[g].tolist() if dens is not None else []
                series.append((kg, float(clock[kg // config.record_every]), *row))
            p = P[d * S + g]
            if lazy_rates is not None:
                p *= lazy_rates.rate(d, g, n) / bound
            if us[k] < p:
                g ^= bit[d]
                acc[d] += 1
        if visits:
            counts += np.bincount(np.asarray(visits, dtype=np.int64), minlength=S)
            n_rec += len(visits)
        done += m

    freq = counts / n_rec if n_rec else counts
    out = TrajectoryStats(
        n_nodes=n,
        n_events=n_events,
        n_accepted=int(sum(acc)),
        total_time=total_time,
        final_state=DirectedNetwork(n, g),
        n_recorded=n_rec,
        visit_frequencies=freq,
        proposals_by_dyad=prop,
        accepted_by_dyad=np.array(acc, dtype=np.int64),
        series=series,
    )
    if dens is not None and n_rec:
        out.mean_motif_densities = freq @ dens
    return out


def _simulate_sparse(config: SimConfig, rng) -> TrajectoryStats:
    """Neighbor-set engine: marginals from rooted motif counts, no global tables."""
    n = config.n_nodes
    D = n_dyads(n)
    game = config.utilities
    beta = config.beta
    total_rate, weights = _proposal_law(config.rates, n)
    n_events, total_time = _horizon(config, rng, total_rate)
    clock = _series_clock(rng, config, n_events, total_time)
    src, tgt = dyad_sources(n).tolist(), dyad_targets(n).tolist()

    g0 = config.initial if config.initial is not None else DirectedNetwork.empty(n)
    adj = Adjacency.of(g0)
    bits = g0.bits
    state_rates = config.rates if isinstance(config.rates, StateDependent) else None

    motif_model = _motif_source(config)
    motifs = motif_model.motifs if motif_model is not None else ()
    counts = np.array([embedding_counts(m, adj)[0] for m in motifs], dtype=float)
    norm = np.array([float(n) ** m.n_nodes for m in motifs])
    motif_sum = np.zeros(len(motifs))

    types = getattr(game, "types", None)
    if types is not None:
        types = np.asarray(types, dtype=int)
        L = int(getattr(game, "n_types", types.max() + 1))
        block = np.zeros((L, L))
        for i, j in g0.edges:
            block[types[i], types[j]] += 1
        sizes = np.bincount(types, minlength=L).astype(float)
        pairs = np.outer(sizes, sizes) - np.diag(sizes)
        block_sum = np.zeros((L, L))

    prop = np.zeros(D, dtype=np.int64)
    acc = np.zeros(D, dtype=np.int64)
    n_rec = 0
    series = []
    done = 0
    while done < n_events:
        m = min(_BATCH, n_events - done)
        ds = _dyad_stream(rng, m, weights, D)
        us = rng.random(m).tolist()
        prop += np.bincount(ds, minlength=D)
        for k, d in enumerate(ds.tolist()):
            kg = done + k
            if _recording(kg, config):
                n_rec += 1
                motif_sum += counts
                if types is not None:
                    block_sum += block
            if config.record_every is not None and kg % config.record_every == 0:
                series.append((kg, float(clock[kg // config.record_every]), *(counts / norm).tolist()))
            i, j = src[d], tgt[d]
            present = adj.has(i, j)
            if present:
                adj.remove(i, j)
            inc, du_add = game.increment(adj, i, j)
            du = -du_add if present else du_add
            p = 1.0 / (1.0 + math.exp(-beta * du)) if beta * du > -700 else 0.0
            if state_rates is not None:
                p *= state_rates.rate(d, bits, n) / state_rates.bound
            if us[k] < p:
                acc[d] += 1
                bits ^= 1 << d
                if present:
                    counts -= inc
                    if types is not None:
                        block[types[i], types[j]] -= 1
                else:
                    adj.add(i, j)
                    counts += inc
                    if types is not None:
                        block[types[i], types[j]] += 1
            elif present:
                adj.add(i, j)
        done += m

    out = TrajectoryStats(
        n_nodes=n,
        n_events=n_events,
        n_accepted=int(acc.sum()),
        total_time=total_time,
        final_state=DirectedNetwork(n, bits),
        n_recorded=n_rec,
        proposals_by_dyad=prop,
        accepted_by_dyad=acc,
        series=series,
    )
    if motifs and n_rec:
        out.mean_motif_densities = motif_sum / n_rec / norm
    if types is not None and n_rec:
        with np.errstate(invalid="ignore", divide="ignore"):
            out.block_densities = np.where(pairs > 0, block_sum / n_rec / np.where(pairs > 0, pairs, 1), np.nan)
    return out


def _run_replica(args):
    config, seed = args
    return simulate(config, seed=seed)


def simulate_replicas(config: SimConfig, n_replicas: int, workers: Optional[int] = None) -> list[TrajectoryStats]:
    """Independent replicas on spawned streams, returned in replica order."""
    seeds = replica_seeds(config.rng_seed, n_replicas)
    workers = workers or int(os.environ.get("NETFORM_WORKERS", "1"))
    if workers <= 1 or n_replicas <= 1:
        return [simulate(config, seed=s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_replica, [(config, s) for s in seeds]))


# -- exact laws -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    n_nodes: int
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (n_networks(self.n_nodes),):
            raise ValueError("probability vector has the wrong length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("not a probability distribution")
        p.flags.writeable = False
        object.__setattr__(self, "probabilities", p)

    def __call__(self, g: DirectedNetwork) -> float:
        return float(self.probabilities[g.bits])

    def total_variation(self, other) -> float:
        q = other.probabilities if isinstance(other, StationaryDistribution) else np.asarray(other)
        return 0.5 * float(np.abs(self.probabilities - q).sum())


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def exact_stationary(phi: PotentialTable, sigma: float) -> StationaryDistribution:
    """Gibbs law ``exp(beta * phi) / Z``; meeting rates play no role."""
    z = beta_of(sigma) * phi.values
    p = np.exp(z - logsumexp(z))
    p /= p.sum()
    return StationaryDistribution(phi.n_nodes, p)


@dataclass
class BalanceReport:
    balanced: bool
    worst_residual: float  # worst two-dyad Kolmogorov cycle sum of log rates
    flux_residual: float  # worst log-flux mismatch against the path-built candidate law
    tolerance: float
    witness: Optional[tuple] = None
    log_pi: Optional[np.ndarray] = field(default=None, repr=False)

    def stationary(self, n_nodes: int) -> Optional[StationaryDistribution]:
        if self.log_pi is None:
            return None
        z = self.log_pi
        p = np.exp(z - logsumexp(z))
        return StationaryDistribution(n_nodes, p / p.sum())


def _as_table(U, n_nodes: Optional[int] = None) -> UtilityTable:
    if isinstance(U, UtilityTable):
        return U
    if isinstance(U, MotifModel):
        if n_nodes is None:
            raise ValueError("n_nodes is required to tabulate a motif model")
        return motif_utility_table(U, n_nodes)
    if hasattr(U, "utility_table"):
        return U.utility_table(n_nodes)
    raise TypeError(f"expected a utility table, got {type(U).__name__}")


def _log_transition_rates(U: UtilityTable, rates: MeetingRates, sigma: float) -> np.ndarray:
    n = U.n_nodes
    lam = rates.table(n)
    return np.log(lam) + log_expit(beta_of(sigma) * marginal_table(U))


def verify_detailed_balance(U, rates: MeetingRates = Constant(), sigma: float = 0.5,
                            tol: float = 1e-9, n_nodes: Optional[int] = None) -> BalanceReport:
    """Kolmogorov's criterion on every two-dyad square of the hypercube.

    Squares generate all cycles of the hypercube, so passing on every square
    is equivalent to reversibility.
    """
    U = _as_table(U, n_nodes)
    n = U.n_nodes
    check_enumerable(n, N_MAX_TRANSIENT)
    D, S = n_dyads(n), n_networks(n)
    logw = _log_transition_rates(U, rates, sigma)
    states = np.arange(S)
    flips = states[None, :] ^ (1 << np.arange(D))[:, None]
    r = logw - np.take_along_axis(logw, flips, axis=1)  # log W(g->tg) - log W(tg->g)

    log_pi = np.zeros(S)
    for k in range(D):
        lo, hi = 1 << k, 1 << (k + 1)
        prev = np.arange(lo, hi) ^ lo
        log_pi[lo:hi] = log_pi[prev] + r[k, prev]
    flux = float(np.max(np.abs(r + log_pi[None, :] - log_pi[flips])))

    worst, witness = worst_cycle(r, n, tol)
    ok = worst <= tol
    return BalanceReport(ok, worst, flux, tol, witness, log_pi if ok else None)


def generator_matrix(U, rates: MeetingRates, sigma: float, n_nodes: Optional[int] = None) -> sparse.csr_matrix:
    """Sparse generator with ``Q[g, toggle(g, d)] = lam_d(g) p_d(g)``."""
    U = _as_table(U, n_nodes)
    n = U.n_nodes
    check_enumerable(n, N_MAX_TRANSIENT)
    D, S = n_dyads(n), n_networks(n)
    w = np.exp(_log_transition_rates(U, rates, sigma))
    states = np.arange(S)
    rows = np.tile(states, D)
    cols = (states[None, :] ^ (1 << np.arange(D))[:, None]).reshape(-1)
    off = sparse.csr_matrix((w.reshape(-1), (rows, cols)), shape=(S, S))
    return (off - sparse.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()


def transient_distribution(pi0, t, config: SimConfig, tail: float = 1e-14):
    """Law at time ``t`` (scalar or sequence) by uniformization."""
    n = config.n_nodes
    if n > N_MAX_TRANSIENT:
        raise InfeasibleSizeError(
            f"N={n} gives {n_networks(n)} states; the explicit generator is capped at N={N_MAX_TRANSIENT}"
        )
    Q = generator_matrix(config.utilities, config.rates, config.sigma, n)
    p0 = pi0.probabilities if isinstance(pi0, StationaryDistribution) else np.asarray(pi0, dtype=float)
    if p0.shape != (Q.shape[0],):
        raise ValueError("initial distribution has the wrong length")
    q = float(-Q.diagonal().min()) or 1.0
    P = (sparse.identity(Q.shape[0], format="csr") + Q / q).T.tocsr()

    scalar = np.isscalar(t)
    times = [float(t)] if scalar else [float(x) for x in t]
    out = []
    for tt in times:
        if tt < 0:
            raise ValueError("time must be nonnegative")
        if tt == 0:
            out.append(p0.copy())
            continue
        mu = q * tt
        kmax = int(poisson.ppf(1.0 - tail, mu)) + 1
        weights = poisson.pmf(np.arange(kmax + 1), mu)
        v = p0.copy()
        acc = weights[0] * v
        for k in range(1, kmax + 1):
            v = P @ v
            acc += weights[k] * v
        out.append(acc)
    return out[0] if scalar else out
