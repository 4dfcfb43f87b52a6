import itertools
import math

import numpy as np
import pytest

from tcfusion.assignment import min_cost_transport, optimal_assignment
from tcfusion.kernels import available_backends


def brute_force_cost(C):
    """Minimum cost over all injections of the smaller side (the oracle)."""
    m, n = C.shape
    if m <= n:
        return min(
            sum(C[i, p[i]] for i in range(m)) for p in itertools.permutations(range(n), m)
        )
    return min(
        sum(C[p[j], j] for j in range(n)) for p in itertools.permutations(range(m), n)
    )


def test_optimal_assignment_2x2():
    a = optimal_assignment(np.array([[1.0, 2.0], [3.0, 1.0]]))
    assert a.pairs == {0: 0, 1: 1}
    assert a.total_cost == 2.0


def test_optimal_assignment_1x1():
    a = optimal_assignment(np.array([[5.0]]))
    assert a.pairs == {0: 0}
    assert a.total_cost == 5.0


def test_optimal_assignment_rectangular_tall():
    a = optimal_assignment(np.array([[0.0, 9.0], [9.0, 0.0], [9.0, 9.0]]))
    assert a.pairs == {0: 0, 1: 1}
    assert a.total_cost == 0.0


def test_optimal_assignment_empty_rejected():
    with pytest.raises(ValueError):
        optimal_assignment(np.zeros((0, 3)))


def test_optimal_assignment_matches_brute_force(rng):
    for _ in range(300):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 6))
        C = rng.random((m, n)) * 100
        a = optimal_assignment(C)
        assert a.total_cost == pytest.approx(brute_force_cost(C), abs=1e-12)
        cols = list(a.pairs.values())
        assert len(cols) == len(set(cols)) == min(m, n)


def test_assignment_cost_invariant_under_permutation(rng):
    for _ in range(50):
        C = rng.random((4, 6)) * 10
        base = optimal_assignment(C).total_cost
        pr = rng.permutation(4)
        pc = rng.permutation(6)
        shuffled = C[np.ix_(pr, pc)]
        assert optimal_assignment(shuffled).total_cost == pytest.approx(base, abs=1e-12)


def test_lap_backends_agree(rng):
    backends = available_backends()
    if len(backends) < 2:
        pytest.skip("only one kernel backend available")
    for _ in range(100):
        m = int(rng.integers(1, 8))
        n = int(rng.integers(m, 9))
        C = rng.random((m, n)) * 50
        results = {name: mod.solve_lap(C) for name, mod in backends.items()}
        vals = list(results.values())
        assert all((v == vals[0]).all() for v in vals)


def test_transport_1x1():
    plan = min_cost_transport(np.array([[7.0]]))
    assert plan.matrix.tolist() == [[1.0]]
    assert plan.cost == 7.0


def test_transport_2x1():
    plan = min_cost_transport(np.array([[1.0], [3.0]]))
    assert plan.matrix.tolist() == [[0.5], [0.5]]
    assert plan.cost == 2.0


def test_transport_empty_rejected():
    with pytest.raises(ValueError):
        min_cost_transport(np.zeros((2, 0)))


def test_transport_square_equals_assignment(rng):
    # Balanced case: optimal transport = optimal assignment / n.
    for _ in range(50):
        n = 4
        C = rng.random((n, n)) * 20
        t = min_cost_transport(C)
        a = optimal_assignment(C)
        assert t.cost == pytest.approx(a.total_cost / n, abs=1e-9)


def test_transport_marginals_exact(rng):
    for _ in range(100):
        m = int(rng.integers(1, 7))
        n = int(rng.integers(1, 7))
        C = rng.random((m, n)) * 30
        for solver in ("flow", "lap"):
            plan = min_cost_transport(C, solver=solver)
            L = plan.scale
            assert L == math.lcm(m, n)
            assert (plan.flow.sum(axis=1) == L // m).all()
            assert (plan.flow.sum(axis=0) == L // n).all()


def test_transport_solvers_agree(rng):
    for _ in range(150):
        m = int(rng.integers(1, 8))
        n = int(rng.integers(1, 8))
        C = rng.random((m, n)) * 50
        a = min_cost_transport(C, solver="flow")
        b = min_cost_transport(C, solver="lap")
        assert a.cost == pytest.approx(b.cost, abs=1e-9)
