import numpy as np
import pytest

from testinfo.criteria import (CriterionEstimate, d_criterion,
                               expected_test_info, tk_closed_form)
from testinfo.errors import CriterionEvaluationError, DomainError
from testinfo.evidence import EvidenceFunction
from testinfo.models import Design, LinearGaussianModel
from testinfo.optimizer import (CandidateGrid, constrained_select,
                                exchange_optimize)

GRID21 = CandidateGrid(np.linspace(-1, 1, 21), 1)


def tk_criterion(beta0, eta, R, sigma2):
    def crit(design, seed):
        return tk_closed_form(design.matrix(), beta0, eta, R, sigma2)
    return crit


def d_crit(R, sigma2=1.0):
    def crit(design, seed):
        return d_criterion(design.matrix(), R, sigma2)
    return crit


class TestExchange:
    def test_d_optimal_splits_between_boundaries(self):
        res = exchange_optimize(d_crit(0.5 * np.eye(2)), GRID21, n_points=4,
                                seed=0)
        np.testing.assert_allclose(np.sort(res.design.points), [-1, -1, 1, 1])

    def test_delta_sign_rule(self):
        rng = np.random.default_rng(17)
        done = 0
        while done < 10:
            beta0 = rng.normal(size=2)
            eta = rng.normal(size=2)
            A = rng.normal(size=(2, 2))
            R = A @ A.T / 2 + 0.05 * np.eye(2)
            delta = (eta[0] - beta0[0]) * (eta[1] - beta0[1]) + R[0, 1]
            if abs(delta) <= 0.1:
                continue
            res = exchange_optimize(tk_criterion(beta0, eta, R, 1.0), GRID21,
                                    n_points=5, seed=done)
            expect = 1.0 if delta > 0 else -1.0
            np.testing.assert_allclose(res.design.points, expect)
            done += 1

    def test_constant_criterion_terminates_first_pass(self):
        crit = lambda design, seed: CriterionEstimate(1.0)
        res = exchange_optimize(crit, GRID21, n_points=3, seed=4, n_restarts=1)
        assert res.iterations == 1
        assert [v for _, v in res.trace] == [1.0]
        assert res.accepted_moves == []

    def test_trace_nondecreasing_for_deterministic_criterion(self):
        res = exchange_optimize(d_crit(np.eye(2)), GRID21, n_points=4, seed=2)
        values = [v for _, v in res.trace]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_reproducible_given_seed(self):
        crit = tk_criterion(np.zeros(2), np.array([0.5, 0.5]),
                            0.2 * np.eye(2), 1.0)
        a = exchange_optimize(crit, GRID21, n_points=4, seed=11)
        b = exchange_optimize(crit, GRID21, n_points=4, seed=11)
        np.testing.assert_array_equal(a.design.points, b.design.points)

    def test_grid_order_does_not_matter_for_deterministic(self):
        crit = d_crit(np.eye(2))
        fwd = CandidateGrid(np.linspace(-1, 1, 11), 1)
        rev = CandidateGrid(np.linspace(-1, 1, 11)[::-1], 1)
        a = exchange_optimize(crit, fwd, n_points=4, seed=5)
        b = exchange_optimize(crit, rev, n_points=4, seed=5)
        np.testing.assert_array_equal(np.sort(a.design.points),
                                      np.sort(b.design.points))

    def test_one_exchange_optimality(self):
        crit = tk_criterion(np.zeros(2), np.array([0.8, -0.3]),
                            0.3 * np.eye(2), 1.0)
        res = exchange_optimize(crit, GRID21, n_points=4, seed=9)
        best = res.criterion_value.value
        pts = np.array(res.design.points)
        for i in range(len(pts)):
            for g in GRID21.points:
                trial = pts.copy()
                trial[i] = g
                val = crit(GRID21.design(trial), 0).value
                assert val <= best + 1e-9

    def test_failing_criterion_aborts_with_partial_trace(self):
        calls = {"n": 0}

        def crit(design, seed):
            calls["n"] += 1
            if calls["n"] > 3:
                raise RuntimeError("boom")
            return CriterionEstimate(float(calls["n"]))

        with pytest.raises(CriterionEvaluationError) as err:
            exchange_optimize(crit, GRID21, n_points=2, seed=0, n_restarts=1)
        assert err.value.partial is not None

    def test_stochastic_criterion_with_common_random_numbers(self):
        d = Design([0.0], 1)
        model = LinearGaussianModel(d, 1.0, [0.0, 0.0], [1.0, 1.0],
                                    0.3 * np.eye(2))
        prob = model.problem()
        v = EvidenceFunction("log")

        def crit(design, seed):
            return expected_test_info(prob, v, design=design, draw_count=400,
                                      seed=seed)

        grid = CandidateGrid(np.linspace(-1, 1, 5), 2)
        res = exchange_optimize(crit, grid, n_points=2, seed=3, n_restarts=2,
                                max_passes=4)
        assert np.isfinite(res.criterion_value.value)

    def test_bad_arguments_rejected(self):
        with pytest.raises(DomainError):
            exchange_optimize(d_crit(np.eye(2)), GRID21, n_points=0)
        with pytest.raises(DomainError):
            CandidateGrid(np.array([]), 1)


class TestConstrainedSelect:
    def test_singleton_menu(self):
        menu = [Design([0.5], 1)]
        res = constrained_select(lambda d, s: CriterionEstimate(1.0), menu)
        assert res.design is menu[0]

    def test_argmax_selected(self):
        menu = [Design([p], 1) for p in (-0.5, 0.0, 0.5)]
        crit = lambda d, s: CriterionEstimate(float(d.points[0]))
        res = constrained_select(crit, menu, seed=1)
        assert res.design.points[0] == 0.5

    def test_duplicate_entries_take_first_index(self):
        menu = [Design([0.2], 1), Design([0.2], 1)]
        res = constrained_select(lambda d, s: CriterionEstimate(1.0), menu)
        assert res.design is menu[0]

    def test_empty_menu_rejected(self):
        with pytest.raises(DomainError):
            constrained_select(lambda d, s: CriterionEstimate(0.0), [])
