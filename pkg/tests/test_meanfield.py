import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from netform.errors import SignConditionError
from netform.meanfield import (
    EAPProblem,
    Kernel,
    TypedModel,
    TypedUtility,
    classify_transition,
    eap,
    entropy,
    finite_n_typed_utility,
    kernel_motif_density,
    scaled_log_partition,
    solve_eap,
    solve_kernel,
    sweep_phase,
    typed_eap,
)
from netform.motifs import Motif, MotifModel, link_reciprocity_model, motif_potential_table, motif_utility
from netform.network import DirectedNetwork, n_networks

from . import oracles

LINK = Motif.link()
PAIR = Motif.reciprocal_pair()


def link_model(a, sigma=0.5):
    return MotifModel((LINK,), (a,), sigma)


def kernel_density_direct(m, psi, w):
    L = len(w)
    total = 0.0
    for types in itertools.product(range(L), repeat=m.n_nodes):
        p = np.prod([w[t] for t in types])
        p *= np.prod([psi[types[a], types[b]] for a, b in m.edges])
        total += p
    return total


# -- entropy and objective ---------------------------------------------------------

def test_entropy_values():
    assert entropy(0.0) == 0 and entropy(1.0) == 0
    assert entropy(0.5) == pytest.approx(math.log(2))
    assert entropy(0.25) == pytest.approx(0.562335, abs=1e-6)
    with pytest.raises(ValueError):
        entropy(1.5)


def test_objective_values():
    zero = EAPProblem(link_reciprocity_model(0.0, 0.0, 0.5))
    r = np.linspace(0.01, 0.99, 7)
    np.testing.assert_allclose(eap(r, zero), entropy(r))
    assert solve_eap(zero).rho_star == pytest.approx(0.5, abs=1e-12)
    assert eap(0.5, EAPProblem(link_model(1.0))) == pytest.approx(0.5 + math.log(2))


def test_sign_condition():
    with pytest.raises(SignConditionError):
        EAPProblem(MotifModel((LINK, PAIR), (1.0, -1.0), 0.5))
    EAPProblem(MotifModel((LINK, PAIR), (-5.0, 1.0), 0.5))  # negative one-edge values are fine


@given(st.floats(-10, 10), st.floats(0.05, 10))
def test_single_link_closed_form(a, beta):
    sol = solve_eap(EAPProblem.from_beta((LINK,), (a,), beta))
    assert abs(sol.rho_star - oracles.logistic(beta * a)) < 1e-10
    assert sol.zeta == pytest.approx(math.log1p(math.exp(beta * a)) if beta * a < 30 else beta * a, rel=1e-9)


@given(st.floats(-6, 2), st.floats(0, 12), st.floats(0, 6), st.floats(0.1, 0.9))
def test_solution_beats_fine_grid(link, pair, cycle, sigma):
    model = MotifModel((LINK, PAIR, Motif.cycle(3)), (link, pair, cycle), sigma)
    prob = EAPProblem(model)
    sol = solve_eap(prob)
    grid = eap(np.linspace(1e-6, 1 - 1e-6, 10001), prob)
    assert sol.zeta >= grid.max() - 1e-9
    r_brute, v_brute = oracles.eap_grid_max(prob.terms(), prob.beta)
    assert sol.zeta >= v_brute - 1e-9


def test_branches_reported_near_transition():
    sol = solve_eap(EAPProblem(link_reciprocity_model(6.0, 3.0, 0.5)))
    assert len(sol.local_maxima) == 2
    assert sol.high_branch - sol.low_branch > 0.3


# -- sweeps ---------------------------------------------------------------------

def test_single_link_sweep_has_no_transition():
    path = [(a,) for a in np.linspace(-10, 10, 201)]
    sw = sweep_phase(link_model(0.0), path)
    assert sw.transitions == [] and sw.max_step() < 0.05


def test_reciprocity_sweep_has_one_transition():
    model = link_reciprocity_model(0.0, 3.0, 0.5)
    grid = np.linspace(0, 20, 201)
    sw = sweep_phase(model, [(-3.0, v) for v in grid])
    assert len(sw.transitions) == 1
    tr = sw.transitions[0]
    assert tr.gap > 0.3 and tr.width < 1e-3
    # at link cost 3 the two branches tie near reciprocity value 6 (symmetry of the objective)
    assert tr.parameter == pytest.approx(6.0, abs=1e-4)
    assert len(sw.rows()) == 201


def test_sigma_path_sweep():
    model = link_reciprocity_model(6.5, 3.0, 0.5)
    sw = sweep_phase(model, np.linspace(0.2, 0.8, 61), kind="sigma")
    assert len(sw.parameters) == 61
    assert all(0 < s.rho_star < 1 for s in sw.solutions)


def test_classification_requires_a_transition():
    with pytest.raises(ValueError):
        classify_transition(link_model(0.0), [(a,) for a in np.linspace(-2, 2, 41)])


def test_linear_path_incentive_driven():
    c = 2.0
    model = link_reciprocity_model(0.0, c, 0.25)
    cls = classify_transition(model, [(-c, v) for v in np.linspace(0, 8, 201)])
    assert cls.kind == "incentive-driven"
    assert cls.limit == pytest.approx(2 * c, rel=0.02)


# -- kernels ---------------------------------------------------------------------

@given(st.sampled_from([LINK, PAIR, Motif.cycle(3), Motif.chain(4)]), st.floats(0, 1),
       st.lists(st.floats(0.05, 1), min_size=1, max_size=4))
def test_constant_kernel_density(m, rho, w):
    w = np.array(w) / np.sum(w)
    psi = np.full((len(w), len(w)), rho)
    assert kernel_motif_density(m, psi, w) == pytest.approx(rho ** m.n_edges, rel=1e-12, abs=1e-300)


def test_kernel_density_examples():
    w = np.array([0.5, 0.5])
    assert kernel_motif_density(LINK, np.zeros((2, 2)), w) == 0
    assert kernel_motif_density(LINK, np.array([[0.2, 0.4], [0.6, 0.8]]), w) == pytest.approx(0.5)


@given(st.integers(0, 2**32 - 1), st.sampled_from([PAIR, Motif.cycle(3), Motif.chain(3)]))
def test_kernel_density_matches_type_sum(seed, m):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(L))
    psi = rng.random((L, L))
    assert kernel_motif_density(m, psi, w) == pytest.approx(kernel_density_direct(m, psi, w), rel=1e-10)


def test_typed_objective_single_type():
    model = TypedModel(np.array([1.0]), link_reciprocity_model(2.0, 0.0, 0.5), c=np.array([[-1.0]]))
    for rho in (0.1, 0.5, 0.8):
        ref = eap(rho, EAPProblem(link_reciprocity_model(2.0, 0.0, 0.5))) + model.beta * (-1.0 * rho)
        assert typed_eap(np.array([[rho]]), model) == pytest.approx(ref, rel=1e-12)


def test_typed_objective_half_kernel():
    v, c = 4.0, 1.5
    model = TypedModel(np.array([0.3, 0.7]), link_reciprocity_model(v, c, 0.4))
    beta = (1 - 0.4) / 0.4
    assert typed_eap(np.full((2, 2), 0.5), model) == pytest.approx(beta * (-c / 2 + v / 8) + math.log(2))


def test_kernel_single_type_matches_density_problem():
    model = TypedModel(np.array([1.0]), MotifModel((PAIR,), (5.0,), 0.5), c=np.array([[-2.0]]))
    sol = solve_kernel(model)
    ref = solve_eap(EAPProblem(link_reciprocity_model(5.0, 2.0, 0.5)))
    assert sol.kernel.psi[0, 0] == pytest.approx(ref.rho_star, abs=1e-7)


def test_kernel_pure_entropy():
    sol = solve_kernel(TypedModel(np.array([0.25, 0.25, 0.5]), sigma=0.5))
    np.testing.assert_allclose(sol.kernel.psi, 0.5, atol=1e-9)


def test_kernel_matches_per_pair_construction():
    L, gamma, v, sigma = 4, 3.0, 5.0, 0.3
    k = np.arange(L)
    D = np.minimum(np.abs(k[:, None] - k[None, :]), L - np.abs(k[:, None] - k[None, :])) / L
    model = TypedModel(np.full(L, 0.25), MotifModel((PAIR,), (v,), sigma), c=-gamma * D)
    sol = solve_kernel(model)
    for a in range(L):
        for b in range(L):
            ref = solve_eap(EAPProblem(link_reciprocity_model(v, gamma * D[a, b], sigma))).rho_star
            assert sol.kernel.psi[a, b] == pytest.approx(ref, abs=1e-4)
    assert sol.kernel.asymmetry() < 1e-8


def test_kernel_validation():
    with pytest.raises(ValueError):
        Kernel(np.array([[1.2]]))
    with pytest.raises(ValueError):
        typed_eap(np.zeros((3, 3)), TypedModel(np.array([0.5, 0.5]), sigma=0.5))
    with pytest.raises(ValueError):
        TypedModel(np.array([0.5, 0.6]), sigma=0.5)


def test_ces_assumptions_audit():
    alpha = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert TypedModel(np.array([0.5, 0.5]), sigma=0.5, alpha=alpha, r=0.5).check_assumptions()


# -- finite populations ---------------------------------------------------------

def test_typed_utility_on_empty_network():
    model = TypedModel(np.array([0.5, 0.5]), link_reciprocity_model(2.0, 1.0, 0.5), c=np.array([[1.0, -2.0], [0.5, 0.0]]),
                       alpha=np.ones((2, 2)), r=0.5)
    g = DirectedNetwork.empty(4)
    assert all(finite_n_typed_utility(i, g, [0, 1, 0, 1], model) == 0 for i in range(4))


def test_linear_typed_utility_expansion():
    c = np.array([[1.0, -2.0], [0.5, 0.0]])
    mm = link_reciprocity_model(2.0, 1.0, 0.5)
    model = TypedModel(np.array([0.5, 0.5]), mm, c=c)
    types = [0, 1, 1, 0]
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = DirectedNetwork(4, int(rng.integers(0, n_networks(4))))
        for i in range(4):
            ref = motif_utility(i, g, mm) + sum(c[types[i], types[j]] for s, j in g.edges if s == i)
            assert finite_n_typed_utility(i, g, types, model) == pytest.approx(ref, abs=1e-12)


def test_typed_utility_marginals_match_differences():
    model = TypedModel(np.array([0.5, 0.5]), link_reciprocity_model(2.0, 1.0, 0.5), c=np.array([[1.0, -2.0], [0.5, 0.0]]),
                       alpha=np.array([[1.0, 2.0], [0.5, 1.0]]), r=0.5)
    U = TypedUtility(model, [0, 1, 1])
    table = U.utility_table()
    from netform.motifs import Adjacency
    for g in range(64):
        adj = Adjacency.of(DirectedNetwork(3, g))
        for d in range(6):
            i, j = d // 2, [x for x in range(3) if x != d // 2][d % 2]
            h = g ^ (1 << d)
            assert U.marginal(adj, i, j) == pytest.approx(table.values[i, h] - table.values[i, g], abs=1e-12)


@pytest.mark.parametrize("a", [-1.0, 0.5, 2.0])
def test_scaled_partition_approaches_limit(a):
    model = link_model(a, 0.5)
    zeta = solve_eap(EAPProblem(model)).zeta
    z3 = scaled_log_partition(motif_potential_table(model, 3), 0.5)
    z4 = scaled_log_partition(motif_potential_table(model, 4), 0.5)
    assert abs(z4 - zeta) < abs(z3 - zeta)
