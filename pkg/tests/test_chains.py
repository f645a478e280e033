import json
import math
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercouple.chains import (
    ChainParams,
    InfeasibleStateError,
    colouring_step,
    colouring_step_batch,
    frozen_check,
    greedy_colouring,
    indset_step,
    indset_step_batch,
    initial_state,
    is_independent,
    is_proper,
    run_chain,
    with_sentinel,
)
from hypercouple.hypergraph import Hypergraph, frozen_colouring, gen_frozen, gen_random_uniform

from conftest import tv_distance


def random_hypergraph(seed, n=8):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 5))
    return gen_random_uniform(n, m, int(rng.integers(1, 4)), int(rng.integers(1, 10)), seed=seed)


# -- feasibility predicates ---------------------------------------------------------


def test_is_independent_examples(edge3):
    assert is_independent(edge3, {0, 1})
    assert not is_independent(edge3, {0, 1, 2})


@pytest.mark.parametrize("seed", range(5))
def test_is_independent_exhaustive(seed):
    H = random_hypergraph(seed, n=10)
    for bits in range(1 << H.n):
        S = {v for v in range(H.n) if bits >> v & 1}
        expected = not any(set(e) <= S for e in H.edges)
        assert is_independent(H, S) == expected


def test_is_proper_examples(edge3):
    assert not is_proper(edge3, [1, 1, 1], 2)
    assert is_proper(edge3, [1, 1, 2], 2)
    assert not is_proper(edge3, [1, 1, 3], 2)  # colour out of range


@pytest.mark.parametrize("seed, q", [(0, 2), (1, 3), (2, 2)])
def test_is_proper_exhaustive(seed, q):
    H = random_hypergraph(seed, n=8)
    for col in product(range(1, q + 1), repeat=H.n):
        expected = all(len({col[v] for v in e}) >= 2 for e in H.edges)
        assert is_proper(H, col, q) == expected


# -- single steps ----------------------------------------------------------------


def test_insert_blocked_by_critical_edge(edge3):
    X = np.array([True, True, False])
    assert indset_step(edge3, X, 1.0, 2, 0.0).tolist() == [True, True, False]


def test_removal(edge3):
    X = np.array([True, True, False])
    assert indset_step(edge3, X, 1.0, 0, 0.9).tolist() == [False, True, False]


def test_insert_when_feasible(edge3):
    X = np.array([True, False, False])
    assert indset_step(edge3, X, 1.0, 2, 0.1).tolist() == [True, False, True]
    # vacate coin on an unoccupied vertex leaves the state alone
    assert indset_step(edge3, X, 1.0, 2, 0.7).tolist() == [True, False, False]


def test_colouring_reject_and_accept(edge3):
    c = np.array([1, 1, 2])
    assert colouring_step(edge3, c, 2, 2, 1).tolist() == [1, 1, 2]
    assert colouring_step(edge3, c, 2, 0, 2).tolist() == [2, 1, 2]


def test_step_does_not_mutate(edge3):
    X = np.array([True, True, False])
    indset_step(edge3, X, 1.0, 0, 0.9)
    assert X.tolist() == [True, True, False]


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_acceptance_probabilities(lam):
    """Forced vertex choices: accepted fractions match 1/(1+lam), lam/(1+lam), 0."""
    H = Hypergraph(3, [(0, 1, 2)])
    rng = np.random.default_rng(7)
    N = 20_000
    u = rng.random(N)
    X = np.array([True, True, False])
    removed = sum(indset_step(H, X, lam, 0, x)[0] == False for x in u)  # noqa: E712
    blocked = sum(indset_step(H, X, lam, 2, x)[2] for x in u)
    Z = np.array([True, False, False])
    inserted = sum(indset_step(H, Z, lam, 1, x)[1] for x in u)
    for count, prob in ((removed, 1 / (1 + lam)), (inserted, lam / (1 + lam))):
        se = math.sqrt(prob * (1 - prob) / N)
        assert abs(count / N - prob) < 4 * se
    assert blocked == 0


# -- batch kernels agree with scalar steps ------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**20), st.sampled_from([0.5, 1.0, 2.0]))
def test_indset_batch_matches_scalar(seed, lam):
    H = random_hypergraph(seed)
    rng = np.random.default_rng(seed)
    R = 64
    X = np.zeros((R, H.n), dtype=bool)
    Xb = with_sentinel(X.copy(), False)
    for _ in range(30):
        v = rng.integers(0, H.n, size=R)
        u = rng.random(size=R)
        for r in range(R):
            X[r] = indset_step(H, X[r], lam, int(v[r]), float(u[r]))
        indset_step_batch(H, Xb, lam, v, u)
        assert np.array_equal(Xb[:, : H.n], X)
        assert not Xb[:, H.n].any()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**20), st.integers(2, 4))
def test_colouring_batch_matches_scalar(seed, q):
    H = random_hypergraph(seed)
    start = greedy_colouring(H, q, seed=seed)
    if start is None:
        return
    rng = np.random.default_rng(seed)
    R = 64
    C = np.repeat(start[None, :], R, axis=0)
    Cb = with_sentinel(C.copy(), 0)
    for _ in range(30):
        v = rng.integers(0, H.n, size=R)
        k = rng.integers(1, q + 1, size=R)
        for r in range(R):
            C[r] = colouring_step(H, C[r], q, int(v[r]), int(k[r]))
        colouring_step_batch(H, Cb, v, k)
        assert np.array_equal(Cb[:, : H.n], C)


# -- runs ---------------------------------------------------------------------------


def test_run_zero_steps(edge3):
    X0 = np.array([True, False, False])
    tr = run_chain(edge3, ChainParams.indset(1.0), X0, 0, seed=1)
    assert tr.final_state.tolist() == X0.tolist() and tr.acceptance_count == 0


def test_run_deterministic(edge3):
    p = ChainParams.colouring(2)
    a = run_chain(edge3, p, [1, 1, 2], 500, seed=9, stride=10)
    b = run_chain(edge3, p, [1, 1, 2], 500, seed=9, stride=10)
    assert a.to_json() == b.to_json()
    assert len(a.samples) == 50


def test_run_rejects_infeasible_start(edge3):
    with pytest.raises(InfeasibleStateError):
        run_chain(edge3, ChainParams.indset(1.0), {0, 1, 2}, 10, seed=0)
    with pytest.raises(InfeasibleStateError):
        run_chain(edge3, ChainParams.colouring(2), [2, 2, 2], 10, seed=0)


def test_trajectory_json(edge3):
    tr = run_chain(edge3, ChainParams.indset(1.0), np.zeros(3, bool), 20, seed=3, stride=5)
    rec = json.loads(tr.to_json())
    assert set(rec) >= {"seed", "t_max", "final_state", "acceptance_count", "samples"}
    assert rec["seed"] == 3 and rec["t_max"] == 20


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**20), st.sampled_from([0.3, 1.0, 4.0]))
def test_indset_closure(seed, lam):
    H = random_hypergraph(seed, n=10)
    tr = run_chain(H, ChainParams.indset(lam), np.zeros(H.n, bool), 400, seed=seed, stride=7)
    assert all(is_independent(H, s) for s in tr.samples + [tr.final_state])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**20), st.integers(2, 4))
def test_colouring_closure(seed, q):
    H = random_hypergraph(seed, n=10)
    start = greedy_colouring(H, q, seed=seed)
    if start is None:
        return
    tr = run_chain(H, ChainParams.colouring(q), start, 400, seed=seed, stride=7)
    assert all(is_proper(H, s, q) for s in tr.samples + [tr.final_state])


def test_stationary_single_graph_edge():
    """Edge {0,1}, lam=1: three independent sets, uniform in the limit."""
    H = Hypergraph(2, [(0, 1)])
    tr = run_chain(H, ChainParams.indset(1.0), np.zeros(2, bool), 10**6, seed=11, stride=1)
    counts = {}
    for s in tr.samples:
        key = tuple(np.flatnonzero(s).tolist())
        counts[key] = counts.get(key, 0) + 1
    emp = {k: c / len(tr.samples) for k, c in counts.items()}
    assert set(emp) == {(), (0,), (1,)}
    assert tv_distance(emp, {(): 1 / 3, (0,): 1 / 3, (1,): 1 / 3}) < 0.02


def test_stationary_weighted_fugacity():
    """pi(I) proportional to lam^|I| on a small hypergraph (at most 20 independent sets)."""
    H = Hypergraph(4, [(0, 1, 2), (1, 2, 3)])
    lam = 2.0
    sets = [s for r in range(5) for s in combinations(range(4), r) if is_independent(H, set(s))]
    assert len(sets) <= 20
    Z = sum(lam ** len(s) for s in sets)
    exact = {s: lam ** len(s) / Z for s in sets}
    tr = run_chain(H, ChainParams.indset(lam), np.zeros(4, bool), 300_000, seed=5, stride=3)
    counts = {}
    for s in tr.samples:
        key = tuple(np.flatnonzero(s).tolist())
        counts[key] = counts.get(key, 0) + 1
    emp = {k: c / len(tr.samples) for k, c in counts.items()}
    assert tv_distance(emp, exact) < 0.05


# -- frozen states --------------------------------------------------------------------


@pytest.mark.parametrize("q, m, proposals", [(2, 3, 8), (3, 3, 18)])
def test_frozen_examples(q, m, proposals):
    H = gen_frozen(q, m)
    assert H.n * q == proposals
    assert frozen_check(H, frozen_colouring(q, m), q) == 0


@pytest.mark.parametrize("q, m", [(2, 3), (3, 3), (3, 4), (4, 3), (2, 5)])
def test_frozen_every_permutation(q, m):
    from itertools import permutations

    H = gen_frozen(q, m)
    for perm in permutations(range(1, q + 1)):
        assert frozen_check(H, frozen_colouring(q, m, perm), q) == 0


def test_not_frozen(edge3):
    assert frozen_check(edge3, [1, 1, 2], 2) >= 1


def test_frozen_check_brute_force(edge3):
    c = np.array([1, 2, 2])
    moves = 0
    for v in range(3):
        for k in (1, 2):
            d = c.copy()
            d[v] = k
            moves += (d != c).any() and is_proper(edge3, d, 2)
    assert frozen_check(edge3, c, 2) == moves


def test_greedy_colouring_failure_reported():
    # K_3 as a graph has no proper 2-colouring
    H = Hypergraph(3, [(0, 1), (1, 2), (0, 2)])
    assert greedy_colouring(H, 2, seed=0, attempts=5) is None
    with pytest.raises(InfeasibleStateError):
        initial_state(H, ChainParams.colouring(2))


def test_params_validation():
    with pytest.raises(ValueError):
        ChainParams.indset(0)
    with pytest.raises(ValueError):
        ChainParams.colouring(1)
