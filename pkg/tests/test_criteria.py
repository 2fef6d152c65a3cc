import numpy as np
import pytest

from testinfo.bayes_factor import bf_linear_gaussian
from testinfo.criteria import (FisherInfo, appendix_b_example, box_hill,
                               conditional_test_info, conditional_tk,
                               d_conditional, d_criterion, expected_test_info,
                               fisher_fraction, fraction_observed,
                               observed_test_info, prior_mean_power, ri1,
                               theorem1_check, tk_closed_form)
from testinfo.errors import (DegenerateEvidenceError, DomainError,
                             InsufficientCalibrationError,
                             UndefinedFractionError)
from testinfo.evidence import EvidenceFunction
from testinfo.models import (BinaryHypothesis, Design, LinearGaussianModel,
                             LinearHypothesis, TwoHypothesisProblem)
from testinfo.rngtools import substream

V_LOG = EvidenceFunction("log")


def v_ppr(p0=0.5):
    return EvidenceFunction("posterior-prior-ratio", prior0=p0)


def random_linear_problem(rng, n_points=4, reps=2, d=2, prior0=0.5):
    pts = np.sort(rng.uniform(-1, 1, n_points))
    design = Design(pts, reps, basis="intercept-slope" if d == 2 else "cubic")
    beta0 = rng.normal(size=d)
    eta = beta0 + rng.normal(scale=0.8, size=d)
    A = rng.normal(size=(d, d))
    R = 0.5 * (A @ A.T) / d + 0.1 * np.eye(d)
    model = LinearGaussianModel(design, float(rng.uniform(0.5, 2.0)),
                                beta0, eta, R)
    return model.problem(prior0)


class TestExpectedTestInfo:
    def test_identical_hypotheses_near_zero(self):
        d = Design([-1, 0, 1], 2)
        hyp = LinearHypothesis(d, 1.0, [0.1, 0.2], 0.3 * np.eye(2))
        prob = TwoHypothesisProblem(0.5, hyp, hyp)
        est = expected_test_info(prob, V_LOG, draw_count=2000, seed=0)
        assert abs(est.value) <= 3 * est.standard_error + 1e-12

    def test_log_evidence_matches_closed_form(self):
        rng = np.random.default_rng(21)
        for _ in range(3):
            prob = random_linear_problem(rng)
            est = expected_test_info(prob, V_LOG, draw_count=20_000, seed=5)
            h1 = prob.hyp1
            want = tk_closed_form(prob.design.matrix(), prob.hyp0.beta_mean,
                                  h1.beta_mean, h1.beta_cov_scale,
                                  h1.noise_variance)
            assert abs(est.value - want.value) <= 3 * est.standard_error

    def test_coherence_for_symmetric_evidence(self):
        rng = np.random.default_rng(22)
        prob = random_linear_problem(rng, prior0=0.3)
        v = v_ppr(0.3)
        fwd = expected_test_info(prob, v, draw_count=40_000, seed=9)
        dual = expected_test_info(prob, v, condition_on="H0-dual",
                                  draw_count=40_000, seed=10)
        se = np.hypot(fwd.standard_error, dual.standard_error)
        assert abs(fwd.value - dual.value) <= 3 * se

    def test_log_evidence_duals_differ_for_asymmetric_case(self):
        # point null against a diffuse alternative: the two directed KL
        # divergences are far apart
        d = Design([-1, -0.5, 0, 0.5, 1], 3)
        model = LinearGaussianModel(d, 1.0, [0.0, 0.0], [0.0, 0.0],
                                    25.0 * np.eye(2))
        prob = model.problem()
        fwd = expected_test_info(prob, V_LOG, draw_count=20_000, seed=3)
        dual = expected_test_info(prob, V_LOG, condition_on="H0-dual",
                                  draw_count=20_000, seed=3)
        se = np.hypot(fwd.standard_error, dual.standard_error)
        assert abs(fwd.value - dual.value) > 3 * se

    def test_jensen_nonnegativity_across_kinds(self):
        rng = np.random.default_rng(23)
        for k in range(6):
            prob = random_linear_problem(rng)
            for v in (V_LOG, v_ppr(0.4), EvidenceFunction("symmetrized-kl")):
                est = expected_test_info(prob, v, draw_count=3000, seed=k)
                assert est.value >= -3 * est.standard_error

    def test_additivity_of_composite_design(self):
        # expected info of the stacked design equals part 1 plus the expected
        # conditional info of part 2, within Monte Carlo error
        rng = np.random.default_rng(24)
        prob = random_linear_problem(rng, n_points=3, reps=1)
        design2 = Design(np.sort(rng.uniform(-1, 1, 3)), 1)
        full = prob.with_design(prob.design.stacked(design2))
        total = expected_test_info(full, V_LOG, draw_count=30_000, seed=1)
        part1 = expected_test_info(prob, V_LOG, draw_count=30_000, seed=2)
        # conditional part averaged over x1 draws
        rng2 = substream(77, "x1")
        conds = []
        for _ in range(40):
            x1 = prob.hyp1.sample_data(rng2, size=1)[0]
            conds.append(conditional_test_info(prob, x1, design2, V_LOG,
                                               draw_count=400, seed=3).value)
        lhs = total.value
        rhs = part1.value + float(np.mean(conds))
        se = np.hypot(total.standard_error, part1.standard_error)
        se = float(np.hypot(se, np.std(conds, ddof=1) / np.sqrt(len(conds))))
        assert abs(lhs - rhs) <= 3 * se


class TestTkClosedForm:
    def test_zero_when_hypotheses_coincide(self):
        M = Design([-1, 0, 1], 1).matrix()
        est = tk_closed_form(M, [0.0, 0.0], [0.0, 0.0], np.zeros((2, 2)), 1.0)
        assert est.value == 0.0
        assert est.standard_error == 0.0

    def test_four_ones_column(self):
        M = np.ones((4, 1))
        est = tk_closed_form(M, [0.0], [1.0], np.zeros((1, 1)), 1.0)
        assert est.value == pytest.approx(2.0, abs=1e-14)

    def test_empty_matrix_gives_zero(self):
        est = tk_closed_form(np.empty((0, 2)), [0.0, 0.0], [1.0, 1.0],
                             np.eye(2), 1.0)
        assert est.value == 0.0

    def test_scale_invariance(self):
        # depends on (eta - beta0)/sigma and R only
        rng = np.random.default_rng(31)
        M = Design(rng.uniform(-1, 1, 4), 2).matrix()
        beta0, eta = rng.normal(size=2), rng.normal(size=2)
        R = 0.3 * np.eye(2)
        base = tk_closed_form(M, beta0, eta, R, 1.0)
        a = 3.7
        scaled = tk_closed_form(M, a * beta0, a * eta, R, a**2)
        assert scaled.value == pytest.approx(base.value, rel=1e-12)


class TestObservedInfo:
    def test_unit_bayes_factor_gives_zero(self):
        d = Design([-1, 0, 1], 2)
        hyp = LinearHypothesis(d, 1.0, [0.0, 0.0], 0.2 * np.eye(2))
        prob = TwoHypothesisProblem(0.5, hyp, hyp)
        x = hyp.sample_data(substream(0, "x"), size=1)[0]
        for order in (("H0", "H1"), ("H1", "H0")):
            assert observed_test_info(prob, x, v_ppr(), order=order) == pytest.approx(0.0, abs=1e-12)

    def test_signs_flip_between_orderings(self):
        rng = np.random.default_rng(32)
        prob = random_linear_problem(rng)
        x = prob.hyp1.sample_data(substream(1, "x"), size=1)[0]
        lbf = bf_linear_gaussian(prob, x).log_bf
        if lbf >= 0:  # want data favoring the alternative here
            x = prob.hyp1.sample_data(substream(2, "x"), size=1)[0]
            lbf = bf_linear_gaussian(prob, x).log_bf
        assert lbf < 0
        fwd = observed_test_info(prob, x, v_ppr())
        rev = observed_test_info(prob, x, v_ppr(), order=("H1", "H0"))
        assert fwd > 0 > rev

    def test_posterior_prior_arithmetic_at_bf_three(self):
        # V(3) = 3/(0.5 + 1.5) = 3/2 so the drop is -1/2
        v = v_ppr(0.5)
        assert v.at_one() - float(v(3.0)) == pytest.approx(-0.5, abs=1e-14)


class TestConditionalInfo:
    def test_empty_followup_design_is_exactly_zero(self):
        rng = np.random.default_rng(41)
        prob = random_linear_problem(rng)
        x1 = prob.hyp1.sample_data(substream(3, "x"), size=1)[0]
        est = conditional_test_info(prob, x1, Design.empty(), V_LOG,
                                    draw_count=100, seed=0)
        assert est.value == 0.0 and est.standard_error == 0.0

    def test_identical_hypotheses_near_zero(self):
        d = Design([-1, 0, 1], 1)
        hyp = LinearHypothesis(d, 1.0, [0.0, 0.0], 0.2 * np.eye(2))
        prob = TwoHypothesisProblem(0.5, hyp, hyp)
        x1 = hyp.sample_data(substream(4, "x"), size=1)[0]
        est = conditional_test_info(prob, x1, Design([0.3], 2), V_LOG,
                                    draw_count=2000, seed=1)
        assert abs(est.value) <= 3 * est.standard_error + 1e-12

    def test_jensen_nonnegative(self):
        rng = np.random.default_rng(42)
        for k in range(5):
            prob = random_linear_problem(rng)
            x1 = prob.hyp1.sample_data(substream(k, "x"), size=1)[0]
            d2 = Design(np.sort(rng.uniform(-1, 1, 2)), 2)
            est = conditional_test_info(prob, x1, d2, v_ppr(0.4),
                                        draw_count=3000, seed=k)
            assert est.value >= -3 * est.standard_error

    def test_conditional_coherence_identity(self):
        # value(H0,H1) = BF(x1) * value(H1,H0) for symmetric evidence
        rng = np.random.default_rng(43)
        prob = random_linear_problem(rng, prior0=0.5)
        d2 = Design([0.2, 0.6], 2)
        for k in range(4):
            x1 = prob.hyp1.sample_data(substream(k, "cc"), size=1)[0]
            z1 = np.exp(bf_linear_gaussian(prob, x1).log_bf)
            fwd = conditional_test_info(prob, x1, d2, v_ppr(), draw_count=20_000,
                                        seed=7, antithetic=True)
            rev = conditional_test_info(prob, x1, d2, v_ppr(), draw_count=20_000,
                                        seed=7, order=("H1", "H0"), antithetic=True)
            se = np.hypot(fwd.standard_error, z1 * rev.standard_error)
            assert abs(fwd.value - z1 * rev.value) <= 3 * se + 1e-12


class TestConditionalTk:
    def test_empty_design_and_zero_bf(self):
        est = conditional_tk(np.empty((0, 4)), np.zeros(4), np.zeros(4),
                             0.2 * np.eye(4), 0.0)
        assert est.value == 0.0

    def test_zero_observed_bf_reduces_to_closed_form(self):
        rng = np.random.default_rng(44)
        M = Design(rng.uniform(-1, 1, 3), 1, basis="cubic").matrix()
        eta_obs = rng.normal(size=4)
        V_obs = 0.1 * np.eye(4)
        est = conditional_tk(M, np.zeros(4), eta_obs, V_obs, 0.0)
        want = tk_closed_form(M, np.zeros(4), eta_obs, V_obs, 1.0)
        assert est.value == pytest.approx(want.value, abs=1e-14)

    def test_matches_monte_carlo_conditional_plus_observed_bf(self):
        # the closed form carries the observed log Bayes factor as an offset
        # on top of the conditional information measured by the MC estimate
        rng = np.random.default_rng(45)
        d1 = Design([-1, -0.5, 0, 0.5, 1], 1, basis="cubic")
        model = LinearGaussianModel(d1, 1.0, np.zeros(4), [1.1, 0, -1.3, 0],
                                    0.2 * np.eye(4))
        prob = model.problem()
        x1 = prob.hyp1.sample_data(substream(5, "x"), size=1)[0]
        eta_obs, V_obs = prob.hyp1.posterior(x1)
        lbf_obs = bf_linear_gaussian(prob, x1).log_bf
        d2 = Design([0.1, 0.4], 1, basis="cubic")
        closed = conditional_tk(d2.matrix(), np.zeros(4), eta_obs, V_obs, lbf_obs)
        mc = conditional_test_info(prob, x1, d2, V_LOG, draw_count=30_000,
                                   seed=2, antithetic=True)
        assert abs(closed.value - (lbf_obs + mc.value)) <= 3 * mc.standard_error


class TestDCriterion:
    def test_empty_design_gives_prior_value(self):
        R = np.array([[0.5, 0.1], [0.1, 0.3]])
        s2 = 1.7
        est = d_criterion(np.empty((0, 2)), R, s2)
        want = -np.linalg.slogdet(s2 * R)[1]
        assert est.value == pytest.approx(want, abs=1e-12)

    def test_adding_rows_never_decreases(self):
        rng = np.random.default_rng(51)
        R = 0.4 * np.eye(2)
        M = Design(rng.uniform(-1, 1, 3), 1).matrix()
        base = d_criterion(M, R, 1.0).value
        for t in rng.uniform(-1, 1, 10):
            M2 = np.vstack([M, [1.0, t]])
            assert d_criterion(M2, R, 1.0).value >= base - 1e-12

    def test_singular_prior_rejected(self):
        with pytest.raises(DomainError):
            d_criterion(np.ones((3, 2)), np.zeros((2, 2)), 1.0)

    def test_conditional_variant_monotone(self):
        rng = np.random.default_rng(52)
        V_obs = 0.2 * np.eye(4)
        M = Design(rng.uniform(-1, 1, 2), 1, basis="cubic").matrix()
        base = d_conditional(M, V_obs).value
        M2 = np.vstack([M, Design([0.5], 1, basis="cubic").matrix()])
        assert d_conditional(M2, V_obs).value >= base - 1e-12


class TestBoxHill:
    def test_identical_hypotheses_near_zero(self):
        d = Design([-1, 0, 1], 2)
        hyp = LinearHypothesis(d, 1.0, [0.0, 0.0], 0.3 * np.eye(2))
        prob = TwoHypothesisProblem(0.5, hyp, hyp)
        est = box_hill(prob, draw_count=4000, seed=0)
        assert abs(est.value) <= 3 * est.standard_error + 1e-12

    def test_separated_supports_reach_prior_entropy(self):
        d = Design([0.0, 1.0], 2)
        h0 = LinearHypothesis(d, 1e-6, [-40.0, 0.0])
        h1 = LinearHypothesis(d, 1e-6, [40.0, 0.0])
        prob = TwoHypothesisProblem(0.3, h0, h1)
        est = box_hill(prob, draw_count=2000, seed=1)
        prior_ent = -(0.3 * np.log(0.3) + 0.7 * np.log(0.7))
        assert est.value == pytest.approx(prior_ent, abs=1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(53)
        for k in range(5):
            prob = random_linear_problem(rng, prior0=float(rng.uniform(0.2, 0.8)))
            est = box_hill(prob, draw_count=2000, seed=k)
            assert est.value >= -3 * est.standard_error


class TestPriorMeanPower:
    def test_null_case_recovers_size(self):
        d = Design([-1, 0, 1], 3)
        model = LinearGaussianModel(d, 1.0, [0.0, 0.0], [0.0, 0.0],
                                    np.zeros((2, 2)))
        prob = model.problem()
        est = prior_mean_power(prob, size=0.05, outer_draws=20,
                               calibration_draws=1000, seed=0)
        assert est.value == pytest.approx(0.05, abs=0.02)

    def test_strong_signal_gives_high_power(self):
        d = Design([-1, 1], 10)
        model = LinearGaussianModel(d, 1.0, [0.0, 0.0], [2.0, 2.0],
                                    0.01 * np.eye(2))
        est = prior_mean_power(model.problem(), outer_draws=20,
                               calibration_draws=600, seed=1)
        assert est.value > 0.95

    def test_insufficient_calibration_rejected(self):
        d = Design([-1, 1], 2)
        model = LinearGaussianModel(d, 1.0, [0.0, 0.0], [1.0, 1.0], np.eye(2))
        with pytest.raises(InsufficientCalibrationError):
            prior_mean_power(model.problem(), size=0.05, calibration_draws=100)


class TestFractionObserved:
    def test_empty_followup_design_gives_one(self):
        rng = np.random.default_rng(61)
        prob = random_linear_problem(rng)
        x1 = prob.hyp1.sample_data(substream(0, "f"), size=1)[0]
        res = fraction_observed(prob, x1, Design.empty(), v_ppr())
        assert res.fraction == 1.0

    def test_unit_bayes_factor_gives_zero(self):
        d = Design([-1, 0, 1], 2)
        hyp = LinearHypothesis(d, 1.0, [0.0, 0.0], 0.2 * np.eye(2))
        prob = TwoHypothesisProblem(0.5, hyp, hyp)
        x1 = hyp.sample_data(substream(1, "f"), size=1)[0]
        res = fraction_observed(prob, x1, Design([0.5], 2), v_ppr(),
                                draw_count=2000, seed=0)
        assert res.fraction == pytest.approx(0.0, abs=1e-9)

    def test_always_inside_unit_interval(self):
        rng = np.random.default_rng(62)
        for k in range(10):
            prob = random_linear_problem(rng)
            which = "H0" if k % 2 else "H1"
            x1 = prob.hypothesis(which).sample_data(substream(k, "f"), size=1)[0]
            d2 = Design(np.sort(rng.uniform(-1, 1, 2)), 1)
            res = fraction_observed(prob, x1, d2, v_ppr(0.4), draw_count=1500,
                                    seed=k)
            assert 0.0 <= res.fraction <= 1.0

    def test_ordering_follows_observed_bayes_factor(self):
        rng = np.random.default_rng(63)
        prob = random_linear_problem(rng)
        x1 = prob.hyp1.sample_data(substream(2, "f"), size=1)[0]
        lbf = bf_linear_gaussian(prob, x1).log_bf
        res = fraction_observed(prob, x1, Design([0.0], 2), v_ppr(),
                                draw_count=500, seed=0)
        want = ("H0", "H1") if lbf <= 0 else ("H1", "H0")
        assert tuple(res.ordering) == want


class TestRi1:
    def test_empty_missing_design_gives_one(self):
        d = Design([1.0], 5, basis="identity")
        x = np.array([0.1, 0.4, -0.2, 0.3, 0.2])
        assert ri1(d, Design.empty(basis="identity"), x, [0.0]) == 1.0

    def test_null_at_mle_undefined(self):
        d = Design([1.0], 5, basis="identity")
        x = np.array([0.1, 0.4, -0.2, 0.3, 0.2])
        with pytest.raises(UndefinedFractionError):
            ri1(d, Design([1.0], 5, basis="identity"), x, [x.mean()])

    def test_normal_mean_equal_split_gives_half(self):
        # I_obs = I_mis = 5 and the log-LR ratio is exactly n_obs/(n_obs+n_mis)
        # in expectation for the Normal-mean model
        d_obs = Design([1.0], 5, basis="identity")
        d_mis = Design([1.0], 5, basis="identity")
        rng = substream(3, "x")
        x = 0.7 + rng.standard_normal(5)
        val = ri1(d_obs, d_mis, x, [x.mean() + 0.3], predictive_draws=40_000,
                  seed=4)
        assert val == pytest.approx(0.5, abs=0.02)


class TestFisherFraction:
    def test_equal_information_even_weight(self):
        assert fisher_fraction(FisherInfo(5.0, 5.0), 1.0) == pytest.approx(0.5)

    def test_conversion_number_tilts_the_split(self):
        assert fisher_fraction(FisherInfo(5.0, 5.0), 0.6) == pytest.approx(0.625)

    def test_zero_conversion_ignores_missing(self):
        assert fisher_fraction(FisherInfo(5.0, 123.0), 0.0) == pytest.approx(1.0)

    def test_negative_information_rejected(self):
        with pytest.raises(DomainError):
            FisherInfo(-1.0, 0.0)

    def test_nonpositive_denominator_rejected(self):
        with pytest.raises(UndefinedFractionError):
            fisher_fraction(FisherInfo(1.0, 1.0), -2.0)


# fractions from Gauss-Hermite quadrature of the exact Normal-mean integrands
# (independent of the sampling path used by the implementation)
_QUAD_PPR03 = {0.2: 0.6514117292628391, 0.1: 0.6317474838282051,
               0.05: 0.6266961207501583}


class TestTheorem1:
    def test_log_evidence_is_exact_at_all_separations(self):
        rows = theorem1_check(0.7, [0.2, 0.1, 0.05], V_LOG, draw_count=20_000,
                              seed=0)
        for row in rows:
            assert row.analytic_fraction == pytest.approx(0.5)
            assert row.abs_error < 1e-9

    def test_posterior_prior_ratio_matches_quadrature_oracle(self):
        v = v_ppr(0.3)
        rows = theorem1_check(0.7, [0.2, 0.1, 0.05], v, draw_count=60_000,
                              seed=1)
        assert rows[0].analytic_fraction == pytest.approx(0.625)
        for row in rows:
            assert row.numeric_fraction == pytest.approx(
                _QUAD_PPR03[row.delta], abs=0.01)
        errs = [r.abs_error for r in rows]
        assert errs[0] > errs[1] > errs[2]
        # error shrinks at least linearly in the separation
        assert errs[0] / errs[1] > 1.3
        assert errs[1] / errs[2] > 1.3

    def test_degenerate_evidence_rejected(self):
        with pytest.raises(DegenerateEvidenceError):
            theorem1_check(0.0, [0.1], EvidenceFunction("symmetrized-kl"))

    def test_increasing_deltas_rejected(self):
        with pytest.raises(DomainError):
            theorem1_check(0.0, [0.05, 0.1], V_LOG)


class TestAppendixB:
    def test_paper_constants_all_flags_true(self):
        report = appendix_b_example(0.999, 0.001, 0.99, 0.1, 0.9)
        assert all(report.flags.values())

    def test_frozen_enumeration_oracle_values(self):
        report = appendix_b_example(0.999, 0.001, 0.99, 0.1, 0.9)
        assert report.phi_bh["t1"] == pytest.approx(6.912767029463099e-05, rel=1e-10)
        assert report.phi_bh["t2"] == pytest.approx(0.0017542325002796256, rel=1e-10)
        assert report.phi_p["t1"] == pytest.approx(0.009990099900998972, rel=1e-10)
        assert report.phi_p["t2"] == pytest.approx(0.007053889171326877, rel=1e-10)
        assert report.expected_true_posterior["t1"]["H1"] == pytest.approx(
            0.010980109801098028, rel=1e-10)

    def test_posterior_on_first_piece_under_second_design(self):
        # pi0 b2' / (pi0 b2' + pi1 b2) with the paper constants
        pi0, b1, b2 = 0.999, 0.1, 0.9
        mix = pi0 * b1 + (1 - pi0) * b2
        want = pi0 * b1 / mix
        assert want == pytest.approx(0.991071, abs=5e-7)

    def test_identical_models_give_zero_criteria(self):
        report = appendix_b_example(alpha=1.0 - 1e-12)
        assert report.phi_bh["t1"] == pytest.approx(0.0, abs=1e-9)
        assert report.phi_p["t1"] == pytest.approx(0.0, abs=1e-9)

    def test_parameters_validated(self):
        with pytest.raises(DomainError):
            appendix_b_example(pi0=0.9, pi1=0.2)
