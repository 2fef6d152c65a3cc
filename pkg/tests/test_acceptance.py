"""End-to-end acceptance suite.

Each test implements one release criterion at its stated tolerance and prints
a PASS/FAIL line (visible with ``pytest -s`` or in captured output).  The
heavy experiment-scale criteria are exercised at the exact sizes they pin.
"""

import time

import numpy as np
import pytest

from testinfo.criteria import (_sample_log_bf, appendix_b_example,
                               conditional_test_info, d_criterion,
                               expected_test_info, fraction_observed,
                               prior_mean_power, theorem1_check,
                               tk_closed_form)
from testinfo.evidence import EvidenceFunction
from testinfo.lightcurve import FollowupConfig, run_followup_experiment
from testinfo.models import (BinaryRegressionModel, Design,
                             LinearGaussianModel, LinearHypothesis,
                             TwoHypothesisProblem)
from testinfo.optimizer import CandidateGrid, constrained_select, exchange_optimize
from testinfo.rngtools import substream
from testinfo.sequential import SequentialStudyConfig, run_sequential_study

V_LOG = EvidenceFunction("log")


def _report(number, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {number} ({name}): {status} {detail}")
    assert passed, f"acceptance criterion {number} failed: {detail}"


def _random_problem(rng, d=2, max_points=5, reps=2, prior0=0.5):
    pts = np.sort(rng.uniform(-1, 1, rng.integers(3, max_points + 1)))
    basis = "intercept-slope" if d == 2 else "cubic"
    design = Design(pts, reps, basis=basis)
    beta0 = rng.normal(scale=0.5, size=d)
    eta = beta0 + rng.normal(scale=0.7, size=d)
    A = rng.normal(size=(d, d))
    R = 0.4 * (A @ A.T) / d + 0.05 * np.eye(d)
    model = LinearGaussianModel(design, float(rng.uniform(0.5, 2.0)), beta0,
                                eta, R)
    return model.problem(prior0)


class TestAcceptance:
    def test_1_closed_form_mc_agreement(self):
        start = time.time()
        rng = np.random.default_rng(1001)
        ok, details = True, []
        for k in range(5):
            d = 2 if k % 2 == 0 else 4
            prob = _random_problem(rng, d=d, reps=int(rng.integers(1, 5)))
            assert prob.design.n_rows <= 20
            est = expected_test_info(prob, V_LOG, draw_count=10_000, seed=k)
            h1 = prob.hyp1
            want = tk_closed_form(prob.design.matrix(), prob.hyp0.beta_mean,
                                  h1.beta_mean, h1.beta_cov_scale,
                                  h1.noise_variance).value
            gap = abs(est.value - want)
            ok &= gap <= 3 * est.standard_error
            details.append(f"{gap:.4f}<=3*{est.standard_error:.4f}")
        elapsed = time.time() - start
        ok &= elapsed < 30
        _report(1, "closed-form vs MC", ok,
                f"[{'; '.join(details)}; {elapsed:.1f}s]")

    def test_2_coherence_identity(self):
        rng = np.random.default_rng(1002)
        ok = True
        details = []
        for k, p0 in enumerate([0.3, 0.5, 0.7, 0.3, 0.5]):
            prob = _random_problem(rng, prior0=p0)
            v = EvidenceFunction("posterior-prior-ratio", prior0=p0)
            fwd = expected_test_info(prob, v, draw_count=30_000, seed=2 * k)
            dual = expected_test_info(prob, v, condition_on="H0-dual",
                                      draw_count=30_000, seed=2 * k + 1)
            se = float(np.hypot(fwd.standard_error, dual.standard_error))
            ok &= abs(fwd.value - dual.value) <= 3 * se
            details.append(f"pi0={p0}: |{fwd.value:.3f}-{dual.value:.3f}|<=3*{se:.3f}")
        # asymmetric construction: the directed KL divergences must differ
        d = Design([-1, -0.5, 0, 0.5, 1], 3)
        model = LinearGaussianModel(d, 1.0, [0.0, 0.0], [0.0, 0.0],
                                    25.0 * np.eye(2))
        prob = model.problem()
        fwd = expected_test_info(prob, V_LOG, draw_count=20_000, seed=11)
        dual = expected_test_info(prob, V_LOG, condition_on="H0-dual",
                                  draw_count=20_000, seed=12)
        se = float(np.hypot(fwd.standard_error, dual.standard_error))
        ok &= abs(fwd.value - dual.value) > 3 * se
        details.append(f"log-duals differ: |{fwd.value:.2f}-{dual.value:.2f}|>3*{se:.3f}")
        _report(2, "coherence identity", ok, f"[{'; '.join(details)}]")

    def test_3_delta_sign_rule(self):
        start = time.time()
        rng = np.random.default_rng(1003)
        grid = CandidateGrid(np.linspace(-1, 1, 21), 1)
        ok = True
        done = 0
        while done < 10:
            beta0 = rng.normal(size=2)
            eta = rng.normal(size=2)
            A = rng.normal(size=(2, 2))
            R = A @ A.T / 2 + 0.05 * np.eye(2)
            delta = (eta[0] - beta0[0]) * (eta[1] - beta0[1]) + R[0, 1]
            if abs(delta) <= 0.1:
                continue
            crit = lambda dsn, s: tk_closed_form(dsn.matrix(), beta0, eta, R, 1.0)
            res = exchange_optimize(crit, grid, n_points=5, seed=done,
                                    n_restarts=3)
            expect = 1.0 if delta > 0 else -1.0
            ok &= np.allclose(res.design.points, expect)
            done += 1
        dres = exchange_optimize(
            lambda dsn, s: d_criterion(dsn.matrix(), 0.5 * np.eye(2), 1.0),
            grid, n_points=4, seed=0, n_restarts=3)
        ok &= np.allclose(np.sort(dres.design.points), [-1, -1, 1, 1])
        elapsed = time.time() - start
        ok &= elapsed < 10
        _report(3, "delta-sign rule", ok,
                f"[10 TK cases + D split; {elapsed:.1f}s]")

    def test_4_theorem1_convergence(self):
        start = time.time()
        deltas = [0.2, 0.1, 0.05]
        ok = True
        details = []
        cases = [
            (V_LOG, 0.5),
            (EvidenceFunction("posterior-prior-ratio", prior0=0.3), 0.625),
        ]
        for v, limit in cases:
            rows = theorem1_check(0.7, deltas, v, draw_count=100_000, seed=4)
            errs = [r.abs_error for r in rows]
            ok &= rows[0].analytic_fraction == pytest.approx(limit, abs=1e-12)
            ok &= errs[-1] < 0.03
            ok &= all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
            details.append(f"{v.kind}: errs={['%.2e' % e for e in errs]}")
        elapsed = time.time() - start
        ok &= elapsed < 120
        _report(4, "Theorem 1 convergence", ok,
                f"[{'; '.join(details)}; {elapsed:.1f}s]")

    def test_5_appendix_b(self):
        start = time.time()
        report = appendix_b_example(0.999, 0.001, 0.99, 0.1, 0.9)
        elapsed = time.time() - start
        ok = all(report.flags.values()) and elapsed < 1.0
        _report(5, "two-design counterexample", ok,
                f"[flags={report.flags}; {elapsed * 1000:.0f}ms]")

    def test_6_binary_power_gap(self):
        start = time.time()
        eta = [-2.0, 10.0]
        R = 10.0 * np.eye(2)
        spread = Design([-1, -0.5, 0, 0.5, 1], 100)
        prob_spread = BinaryRegressionModel.link_choice_problem(spread, eta, R)
        est_spread = prior_mean_power(prob_spread, size=0.05, outer_draws=200,
                                      calibration_draws=2000, seed=60)
        ok = abs(est_spread.value - 0.07) <= 0.04

        grid = CandidateGrid(np.linspace(-1, 1, 21), 100)
        crit = lambda dsn, s: expected_test_info(
            prob_spread, V_LOG, design=dsn, engine="mc", draw_count=1500,
            inner_draws=1500, seed=s)
        search = exchange_optimize(crit, grid, n_points=5, max_passes=6,
                                   seed=61, n_restarts=2)
        prob_opt = BinaryRegressionModel.link_choice_problem(search.design,
                                                             eta, R)
        est_opt = prior_mean_power(prob_opt, size=0.05, outer_draws=200,
                                   calibration_draws=2000, seed=62)
        ok &= est_opt.value >= 0.30
        elapsed = time.time() - start
        ok &= elapsed < 900
        _report(6, "binary power gap", ok,
                f"[spread={est_spread.value:.3f} (target 0.07+-0.04), "
                f"optimized={est_opt.value:.3f}>=0.30 at "
                f"{np.round(search.design.points, 2).tolist()}; {elapsed:.0f}s]")

    def test_7_sequential_study(self):
        start = time.time()
        cfg_a = SequentialStudyConfig(scenario="parabola", beta_draws=20,
                                      datasets_per_beta=50)
        rows_a = {r.procedure: r for r in run_sequential_study(
            cfg_a, procedures=("P", "TK", "D"), constrained=False, seed=70)}
        gap_tk = rows_a["TK"].power - rows_a["D"].power
        gap_p = rows_a["P"].power - rows_a["D"].power
        ok = gap_tk >= 0.08 and gap_p >= 0.08

        cfg_b = SequentialStudyConfig(scenario="random-curves", beta_draws=20,
                                      datasets_per_beta=50)
        rows_b = {r.procedure: r for r in run_sequential_study(
            cfg_b, procedures=("P", "TK", "D"), constrained=False, seed=71)}
        vals = [rows_b[p].power for p in ("P", "TK", "D")]
        spread_b = max(vals) - min(vals)
        ok &= spread_b <= 0.05
        elapsed = time.time() - start
        ok &= elapsed < 1200
        _report(7, "sequential study", ok,
                f"[parabola: TK-D={gap_tk:.3f}, P-D={gap_p:.3f} (>=0.08); "
                f"random-curves spread={spread_b:.3f} (<=0.05); {elapsed:.0f}s]")

    def test_8_lightcurve_followup(self):
        start = time.time()
        cfg = FollowupConfig(n_stars=60, n_stages=30)
        ok = True
        details = []
        bh_ok_count = 0
        match_num, match_den = 0.0, 0
        for seed in range(1, 6):
            res = run_followup_experiment(cfg, seed=seed)
            finals = {m: int(res.counts[m][-1]) for m in res.methods}
            order_ok = finals["oracle"] >= finals["testinfo"] >= finals["random"]
            ok &= order_ok
            bh_ok_count += finals["boxhill"] <= finals["testinfo"]
            n_calls = res.n_tracked * cfg.n_stages
            match_num += res.oracle_match_rate * n_calls
            match_den += n_calls
            details.append(f"s{seed}:{finals} order={'Y' if order_ok else 'N'}")
        match_rate = match_num / match_den
        ok &= match_rate >= 0.60
        ok &= bh_ok_count >= 4
        elapsed = time.time() - start
        ok &= elapsed < 1200
        _report(8, "lightcurve follow-up", ok,
                f"[{'; '.join(details)}; match={match_rate:.3f}>=0.6; "
                f"boxhill<=testinfo on {bh_ok_count}/5; {elapsed:.0f}s]")

    def test_9_property_suites(self):
        start = time.time()
        rng = np.random.default_rng(1009)
        ok = True

        # Jensen non-negativity: 20 random problems x 3 evidence kinds
        kinds = [V_LOG, EvidenceFunction("posterior-prior-ratio", prior0=0.4),
                 EvidenceFunction("symmetrized-kl")]
        for k in range(20):
            prob = _random_problem(rng)
            for v in kinds:
                est = expected_test_info(prob, v, draw_count=2000, seed=k)
                ok &= est.value >= -3 * est.standard_error

        # E[BF | H1] = 1 within 3 se on a linear problem.  The plug-in ratio
        # is bounded by the exact Bayes factor pointwise (its denominator
        # maximizes over the coefficients), so for the mle engine the
        # provable property is E[BF] <= 1, not equality; see the ledger.
        prob = _random_problem(np.random.default_rng(1010), reps=1)
        for engine in ("exact", "mc", "laplace", "mle"):
            lbf, _ = _sample_log_bf(prob, "H1", engine, 600, 400, 5, "accept9")
            bf = np.exp(lbf)
            se = bf.std(ddof=1) / np.sqrt(bf.size)
            if engine == "mle":
                ok &= bf.mean() <= 1.0 + 3 * se
            else:
                ok &= abs(bf.mean() - 1.0) <= 3 * se + 0.02

        # additivity of the composite design
        prob = _random_problem(np.random.default_rng(1011), reps=1)
        d2 = Design([0.15, 0.65], 1)
        full = prob.with_design(prob.design.stacked(d2))
        total = expected_test_info(full, V_LOG, draw_count=30_000, seed=6)
        part1 = expected_test_info(prob, V_LOG, draw_count=30_000, seed=7)
        conds = []
        rng2 = substream(1012, "x1")
        for _ in range(40):
            x1 = prob.hyp1.sample_data(rng2, size=1)[0]
            conds.append(conditional_test_info(prob, x1, d2, V_LOG,
                                               draw_count=500, seed=8).value)
        se = float(np.hypot(np.hypot(total.standard_error, part1.standard_error),
                            np.std(conds, ddof=1) / np.sqrt(len(conds))))
        ok &= abs(total.value - part1.value - np.mean(conds)) <= 3 * se

        # fraction of observed test information stays inside [0, 1]
        v = EvidenceFunction("posterior-prior-ratio", prior0=0.35)
        for k in range(10):
            prob = _random_problem(rng)
            which = "H0" if k % 2 else "H1"
            x1 = prob.hypothesis(which).sample_data(substream(k, "fr"), size=1)[0]
            res = fraction_observed(prob, x1, Design([0.2], 2), v,
                                    draw_count=1200, seed=k)
            ok &= 0.0 <= res.fraction <= 1.0

        # conditional-coherence argmax invariance on 3-candidate menus
        v5 = EvidenceFunction("posterior-prior-ratio", prior0=0.5)
        for k in range(5):
            prob = _random_problem(np.random.default_rng(2000 + k), reps=1)
            x1 = prob.hyp1.sample_data(substream(k, "menu"), size=1)[0]
            menu = [Design([t, t + 0.15], 1) for t in (-0.8, 0.0, 0.6)]
            fwd = constrained_select(
                lambda d, s: conditional_test_info(prob, x1, d, v5,
                                                   draw_count=6000, seed=s,
                                                   antithetic=True), menu)
            rev = constrained_select(
                lambda d, s: conditional_test_info(prob, x1, d, v5,
                                                   draw_count=6000, seed=s,
                                                   order=("H1", "H0"),
                                                   antithetic=True), menu)
            ok &= np.array_equal(fwd.design.points, rev.design.points)

        elapsed = time.time() - start
        ok &= elapsed < 300
        _report(9, "property suites", ok, f"[{elapsed:.0f}s]")
