"""Slow, direct reference implementations used to cross-check the library."""
import itertools
import math

import numpy as np

from netform.network import dyad_index, n_dyads, n_networks


def subsets(bits):
    """All submasks of ``bits``."""
    s = bits
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & bits


def moebius_direct(u, n):
    S = n_networks(n)
    out = np.zeros(S)
    for g in range(S):
        out[g] = sum((-1) ** bin(g ^ h).count("1") * u[h] for h in subsets(g))
    return out


def zeta_direct(v, n):
    return np.array([sum(v[h] for h in subsets(g)) for g in range(n_networks(n))])


def nash_direct(U, tol=1e-9):
    """Networks where no agent gains by replacing her whole out-link set."""
    n = U.n_nodes
    out = []
    for g in range(n_networks(n)):
        ok = True
        for i in range(n):
            block = [dyad_index(n, i, j) for j in range(n) if j != i]
            mask = sum(1 << d for d in block)
            base = g & ~mask
            for pick in range(1 << len(block)):
                h = base | sum(1 << block[k] for k in range(len(block)) if pick >> k & 1)
                if U.values[i, h] > U.values[i, g] + tol:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(g)
    return out


def cycle_residual_direct(U):
    """max |dU_i(g,ij) + dU_k(g+ij,kl) - dU_k(g,kl) - dU_i(g+kl,ij)| by loops."""
    n = U.n_nodes
    D = n_dyads(n)
    src = [d // (n - 1) for d in range(D)]
    worst = 0.0
    for g in range(n_networks(n)):
        for a in range(D):
            for b in range(D):
                ga, gb = g ^ (1 << a), g ^ (1 << b)
                gab = ga ^ (1 << b)
                ia, ib = src[a], src[b]
                r = (U.values[ia, ga] - U.values[ia, g]) + (U.values[ib, gab] - U.values[ib, ga]) \
                    - (U.values[ib, gb] - U.values[ib, g]) - (U.values[ia, gab] - U.values[ia, gb])
                worst = max(worst, abs(r))
    return worst


def count_maps(m, g, injective):
    """Brute force over all ``N^n_m`` node maps."""
    n = g.n_nodes
    E = set(g.edges)
    total = 0
    for phi in itertools.product(range(n), repeat=m.n_nodes):
        if injective and len(set(phi)) < m.n_nodes:
            continue
        if all((phi[a], phi[b]) in E for a, b in m.edges):
            total += 1
    return total


def source_participation(m, g):
    n = g.n_nodes
    E = set(g.edges)
    src = {a for a, _ in m.edges}
    part = [0] * n
    for phi in itertools.permutations(range(n), m.n_nodes):
        if all((phi[a], phi[b]) in E for a, b in m.edges):
            for s in src:
                part[phi[s]] += 1
    return part


def automorphisms(m):
    E = set(m.edges)
    return sum(1 for p in itertools.permutations(range(m.n_nodes)) if {(p[a], p[b]) for a, b in E} == E)


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


def gibbs(weights_log):
    w = np.exp(np.asarray(weights_log) - np.max(weights_log))
    return w / w.sum()


def eap_grid_max(terms, beta, points=200001):
    """Brute-force maximum of the density objective on a fine grid."""
    r = np.linspace(1e-9, 1 - 1e-9, points)
    h = -(r * np.log(r) + (1 - r) * np.log1p(-r))
    val = beta * sum(c * r ** e for c, e in terms) + h
    k = int(np.argmax(val))
    return r[k], val[k]
