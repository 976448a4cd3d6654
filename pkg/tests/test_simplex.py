import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from fairpost.lp import (EQ, GE, LE, ITER_LIMIT, OPTIMAL, UNBOUNDED, LinearProgram,
                         build_dual, build_primal, solve)
from fairpost.oracle import enumerate_lp_optimum

from conftest import tiny_instance


def lp_min(c, a, senses, b, free=None):
    c = np.asarray(c, dtype=float)
    free = [False] * c.size if free is None else free
    return LinearProgram("min", c, sp.csr_matrix(np.asarray(a, dtype=float)), senses,
                         np.asarray(b, dtype=float), free)


class TestKnownPrograms:
    def test_textbook_upper_bounds(self):
        # max 3x + 2y; 2x + y <= 10, x + y <= 8, x <= 4 -> (2, 6), value 18
        lp = LinearProgram("max", [3, 2], sp.csr_matrix(
            np.array([[2.0, 1], [1, 1], [1, 0]])), [LE] * 3, [10, 8, 4], [False] * 2)
        sol = solve(lp)
        assert_allclose(sol.x, [2, 6], atol=1e-9)
        assert sol.objective == pytest.approx(18.0)

    def test_mixed_senses(self):
        lp = lp_min([6, 3], [[0, 3], [1, 1], [2, -1]], [LE, GE, GE], [2, 1, 1])
        sol = solve(lp)
        assert_allclose(sol.x, [2 / 3, 1 / 3], atol=1e-9)
        assert sol.objective == pytest.approx(5.0)

    def test_degenerate_vertex(self):
        lp = LinearProgram("max", [2, 1], sp.csr_matrix(
            np.array([[3.0, 1], [1, -1], [0, 1]])), [LE] * 3, [6, 2, 3], [False] * 2)
        assert solve(lp).objective == pytest.approx(5.0)

    def test_klee_minty_style(self):
        a = np.array([[1.0, 0, 0], [20, 1, 0], [200, 20, 1]])
        lp = LinearProgram("max", [100, 10, 1], sp.csr_matrix(a), [LE] * 3,
                           [1, 100, 10000], [False] * 3)
        sol = solve(lp)
        assert sol.objective == pytest.approx(10000.0)
        assert_allclose(sol.x, [0, 0, 10000], atol=1e-6)

    def test_equality_with_free_variable(self):
        lp = lp_min([1, 1], [[1, 1], [1, -1]], [EQ, GE], [2, -4], free=[False, True])
        sol = solve(lp)
        assert sol.objective == pytest.approx(2.0)

    def test_infeasible_equalities(self):
        lp = lp_min([1], [[1], [1]], [EQ, EQ], [1, 2])
        assert solve(lp).status == "INFEASIBLE"

    def test_redundant_equality_is_tolerated(self):
        lp = lp_min([1, 1], [[1, 1], [2, 2]], [EQ, EQ], [2, 4])
        sol = solve(lp)
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(2.0)

    def test_negative_rhs_normalization(self):
        # -x <= -3 is x >= 3
        lp = lp_min([1], [[-1]], [LE], [-3])
        sol = solve(lp)
        assert sol.x[0] == pytest.approx(3.0)


class TestDualsConvention:
    def test_min_problem_duals(self):
        # min x + 2y s.t. x + y >= 2, y <= 5: active row 1 only, y* = (1, 0)
        lp = lp_min([1, 2], [[1, 1], [0, 1]], [GE, LE], [2, 5])
        sol = solve(lp)
        assert sol.objective == pytest.approx(2.0)
        assert_allclose(sol.duals, [1.0, 0.0], atol=1e-9)
        assert sol.objective == pytest.approx(float(lp.b @ sol.duals))

    def test_max_problem_duals_nonnegative_on_le_rows(self):
        lp = LinearProgram("max", [3, 2], sp.csr_matrix(
            np.array([[2.0, 1], [1, 1], [1, 0]])), [LE] * 3, [10, 8, 4], [False] * 2)
        sol = solve(lp)
        assert np.all(sol.duals >= -1e-9)
        assert sol.objective == pytest.approx(float(lp.b @ sol.duals))

    def test_strong_duality_value_identity_on_fairness_programs(self):
        for seed in range(6):
            bundle, spec = tiny_instance(seed, alpha=0.2)
            for build in (build_primal, build_dual):
                lp = build(bundle, spec)
                sol = solve(lp)
                assert sol.objective == pytest.approx(float(lp.b @ sol.duals), abs=1e-8)


class TestIterationControl:
    def test_iter_limit_then_bland_retry_succeeds(self):
        bundle, spec = tiny_instance(5, alpha=0.05)
        lp = build_dual(bundle, spec)
        limited = solve(lp, max_iters=2)
        assert limited.status == ITER_LIMIT
        full = solve(lp, bland=True)
        baseline = solve(lp)
        assert full.status == OPTIMAL
        assert full.objective == pytest.approx(baseline.objective, abs=1e-9)

    def test_bland_matches_dantzig_on_degenerate_instances(self):
        for seed in range(10):
            bundle, spec = tiny_instance(seed, alpha=0.0)
            lp = build_primal(bundle, spec)
            a = solve(lp)
            b = solve(lp, bland=True)
            assert a.status == b.status == OPTIMAL
            assert a.objective == pytest.approx(b.objective, abs=1e-8)


class TestAgainstOracle:
    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_random_dense_lps(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        a = rng.uniform(-2, 2, (m, n))
        b = rng.uniform(-1, 2, m)
        c = rng.uniform(-2, 2, n)
        senses = [(LE, GE, EQ)[int(rng.integers(0, 3))] for _ in range(m)]
        lp = lp_min(c, a, senses, b)
        got = solve(lp)
        want = enumerate_lp_optimum(lp)
        assert got.status == want.status
        if got.status == OPTIMAL:
            assert got.objective == pytest.approx(want.objective, abs=1e-6)

    def test_unbounded_free_variable(self):
        lp = lp_min([0, -1], [[1, 0]], [LE], [1], free=[False, True])
        assert solve(lp).status == UNBOUNDED
        assert enumerate_lp_optimum(lp).status == UNBOUNDED
