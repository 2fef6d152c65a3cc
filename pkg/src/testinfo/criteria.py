"""Information criteria for hypothesis-testing designs.

Expected, observed, conditional, and fraction-of-observed test information
under pluggable evidence functions; the closed-form KL criterion for the
linear-Gaussian test; D-optimality; the entropy-change criterion on the model
indicator; prior mean power of the likelihood-ratio test; and the numerical
checks tying the fraction of observed test information to Fisher information.

Every stochastic criterion takes an explicit seed and reports a Monte Carlo
standard error.  Comparisons across designs at a fixed seed share parameter
and noise draws (common random numbers), which is what makes noisy criteria
usable inside the exchange optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .bayes_factor import bf_laplace, compute_log_bf
from .errors import (AbortedEstimateError, DomainError,
                     InsufficientCalibrationError, UndefinedFractionError,
                     UnsupportedModelError)
from .evidence import EvidenceFunction, conversion_number
from .models import (BinaryHypothesis, Design, LinearHypothesis,
                     TwoHypothesisProblem, fit_binary_batch)
from .rngtools import substream

__all__ = [
    "CriterionEstimate",
    "FisherInfo",
    "Theorem1Row",
    "AppendixBReport",
    "FractionResult",
    "expected_test_info",
    "tk_closed_form",
    "observed_test_info",
    "conditional_test_info",
    "conditional_tk",
    "d_criterion",
    "d_conditional",
    "box_hill",
    "prior_mean_power",
    "fraction_observed",
    "ri1",
    "fisher_fraction",
    "theorem1_check",
    "appendix_b_example",
]

_ORDER_FORWARD = ("H0", "H1")
_ORDER_SWAPPED = ("H1", "H0")


@dataclass(frozen=True)
class CriterionEstimate:
    """A criterion value with Monte Carlo standard error and draw count."""

    value: float
    standard_error: float = 0.0
    draws: int = 0
    criterion: str = ""

    def to_record(self, seed=None) -> dict:
        rec = {"criterion": self.criterion, "value": self.value,
               "se": self.standard_error, "draws": self.draws}
        if seed is not None:
            rec["seed"] = seed
        return rec


def _criterion_tag(v: EvidenceFunction) -> str:
    if v.kind == "log":
        return "TK"
    if v.kind == "posterior-prior-ratio":
        return "P"
    return "expected"


def _as_matrix(M) -> np.ndarray:
    if isinstance(M, Design):
        return M.matrix()
    M = np.asarray(M, dtype=float)
    return M if M.ndim == 2 else np.atleast_2d(M)


# -- batched log-Bayes-factor sampling --------------------------------------

_CHUNK = 512


def _linear_mc_log_marginal(hyp: LinearHypothesis, X: np.ndarray,
                            inner_draws: int, rng) -> np.ndarray:
    if hyp.is_point:
        return np.atleast_1d(hyp.log_marginal(X))
    M = hyp.design.matrix()
    n = M.shape[0]
    s2 = hyp.noise_variance
    params = hyp.sample_params(rng, inner_draws)
    MU = params @ M.T                       # (P, n)
    m2 = np.einsum("pi,pi->p", MU, MU)
    const = -0.5 * n * np.log(2 * np.pi * s2)
    out = np.empty(X.shape[0])
    for lo in range(0, X.shape[0], _CHUNK):
        xb = X[lo:lo + _CHUNK]
        x2 = np.einsum("bi,bi->b", xb, xb)
        ll = const - (x2[:, None] - 2.0 * xb @ MU.T + m2[None, :]) / (2 * s2)
        out[lo:lo + _CHUNK] = logsumexp(ll, axis=1) - np.log(inner_draws)
    return out


def _binary_mc_log_marginal(hyp: BinaryHypothesis, counts: np.ndarray,
                            inner_draws: int, rng) -> np.ndarray:
    if hyp.is_point:
        return hyp.log_likelihood_counts(hyp.coef[None, :], counts)[:, 0]
    params = hyp.sample_params(rng, inner_draws)
    out = np.empty(counts.shape[0])
    for lo in range(0, counts.shape[0], _CHUNK):
        ll = hyp.log_likelihood_counts(params, counts[lo:lo + _CHUNK])
        out[lo:lo + _CHUNK] = logsumexp(ll, axis=1) - np.log(inner_draws)
    return out


def _linear_plugin_log_lik(hyp: LinearHypothesis, X: np.ndarray) -> np.ndarray:
    M = hyp.design.matrix()
    s2 = hyp.noise_variance
    n = M.shape[0]
    const = -0.5 * n * np.log(2 * np.pi * s2)
    if hyp.is_point:
        resid = X - M @ hyp.beta_mean
    else:
        beta = X @ np.linalg.pinv(M).T
        resid = X - beta @ M.T
    return const - np.einsum("bi,bi->b", resid, resid) / (2 * s2)


def _sample_log_bf(problem: TwoHypothesisProblem, condition: str, engine: str,
                   draw_count: int, inner_draws: int, seed: int,
                   tag: str) -> tuple[np.ndarray, int]:
    """Simulate ``draw_count`` datasets under ``condition`` and return log BFs.

    Returns ``(log_bf, n_failures)``; failed draws are dropped from the array.
    """
    h0, h1 = problem.hyp0, problem.hyp1
    cond_hyp = problem.hypothesis(condition)
    rng_sim = substream(seed, tag, "sim", condition)
    linear = isinstance(h0, LinearHypothesis) and isinstance(h1, LinearHypothesis)
    binary = isinstance(h0, BinaryHypothesis) and isinstance(h1, BinaryHypothesis)

    if linear and engine in ("exact", "mc", "mle"):
        X = cond_hyp.sample_data(rng_sim, size=draw_count)
        if engine == "exact":
            lbf = np.atleast_1d(h0.log_marginal(X)) - np.atleast_1d(h1.log_marginal(X))
        elif engine == "mc":
            lbf = (_linear_mc_log_marginal(h0, X, inner_draws, substream(seed, "bf-mc", 0))
                   - _linear_mc_log_marginal(h1, X, inner_draws, substream(seed, "bf-mc", 1)))
        else:
            lbf = _linear_plugin_log_lik(h0, X) - _linear_plugin_log_lik(h1, X)
    elif binary and engine in ("mc", "mle"):
        counts = cond_hyp.sample_counts(rng_sim, size=draw_count)
        if engine == "mc":
            lbf = (_binary_mc_log_marginal(h0, counts, inner_draws, substream(seed, "bf-mc", 0))
                   - _binary_mc_log_marginal(h1, counts, inner_draws, substream(seed, "bf-mc", 1)))
        else:
            ll0 = fit_binary_batch(h0.design, h0.link, counts)[2] if not h0.is_point \
                else h0.log_likelihood_counts(h0.coef[None, :], counts)[:, 0]
            ll1 = fit_binary_batch(h1.design, h1.link, counts)[2] if not h1.is_point \
                else h1.log_likelihood_counts(h1.coef[None, :], counts)[:, 0]
            lbf = ll0 - ll1
    else:
        # per-dataset fallback (laplace engine, mixed families)
        X = cond_hyp.sample_data(rng_sim, size=draw_count)
        vals, failures = [], 0
        for i in range(X.shape[0]):
            try:
                vals.append(compute_log_bf(problem, X[i], engine,
                                            draw_count=inner_draws, seed=seed).log_bf)
            except Exception:
                failures += 1
        return np.asarray(vals), failures

    bad = np.isnan(lbf)
    return lbf[~bad], int(bad.sum())


def _check_failures(failures: int, total: int) -> None:
    if total and failures / total > 0.01:
        raise AbortedEstimateError(
            f"engine failed on {failures}/{total} draws (> 1%)")


# -- expected test information ----------------------------------------------

def expected_test_info(problem: TwoHypothesisProblem, v: EvidenceFunction, *,
                       design: Optional[Design] = None, engine: str = "exact",
                       condition_on: str = "H1", draw_count: int = 10_000,
                       inner_draws: int = 1000, seed: int = 0) -> CriterionEstimate:
    """Expected drop in evidence for the null when data arise under H1.

    Monte Carlo average of ``V(1) - V(BF(X))`` over ``X ~ f(. | H1)``.  With
    ``condition_on="H0-dual"`` the hypothesis roles (including the evidence
    function's prior context) are swapped throughout, giving the dual measure.
    """
    if design is not None:
        problem = problem.with_design(design)
    if condition_on == "H0-dual":
        problem, v = problem.swapped(), v.swapped()
    elif condition_on != "H1":
        raise DomainError("condition_on must be 'H1' or 'H0-dual'")
    lbf, failures = _sample_log_bf(problem, "H1", engine, draw_count,
                                   inner_draws, seed, "expected-info")
    _check_failures(failures + int(np.isnan(lbf).sum()), draw_count)
    w = v.value_from_log(lbf)
    value = v.at_one() - float(np.mean(w))
    se = float(np.std(w, ddof=1) / np.sqrt(w.size)) if w.size > 1 else math.inf
    return CriterionEstimate(value, se, int(w.size), _criterion_tag(v))


def tk_closed_form(M, beta0, eta, R, sigma2: float) -> CriterionEstimate:
    """Closed-form expected log-evidence criterion for the linear model.

    Equals the KL divergence between the marginal data models of the
    alternative (Gaussian prior ``N(eta, sigma2 R)``) and the point null.
    Depends on the data scale only through ``(eta - beta0) / sigma`` and ``R``.
    """
    M = _as_matrix(M)
    beta0 = np.atleast_1d(np.asarray(beta0, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    R = np.asarray(R, dtype=float)
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    d = beta0.size
    if M.shape[1] != d or eta.size != d or R.shape != (d, d):
        raise DomainError("tk_closed_form: inconsistent shapes")
    MtM = M.T @ M
    diff = eta - beta0
    sign, logdet = np.linalg.slogdet(np.eye(d) + MtM @ R)
    value = 0.5 * (diff @ MtM @ diff / sigma2 + np.trace(MtM @ R) - logdet)
    return CriterionEstimate(float(value), 0.0, 0, "TK")


# -- observed and conditional measures ---------------------------------------

def _normalize_order(order) -> bool:
    """True when the order is the swapped (H1, H0) one."""
    if tuple(order) == _ORDER_FORWARD:
        return False
    if tuple(order) == _ORDER_SWAPPED:
        return True
    raise DomainError("order must be ('H0','H1') or ('H1','H0')")


def observed_test_info(problem: TwoHypothesisProblem, x, v: EvidenceFunction,
                       engine: str = "exact", order=_ORDER_FORWARD,
                       draw_count: int = 10_000, seed: int = 0) -> float:
    """Observed drop ``V(1) - V(BF(x))``; may be negative.

    For increasing ``V`` exactly one of the two orderings is positive (unless
    the Bayes factor is exactly one).
    """
    if _normalize_order(order):
        problem, v = problem.swapped(), v.swapped()
    res = compute_log_bf(problem, x, engine, draw_count=draw_count, seed=seed)
    return v.at_one() - float(v.value_from_log(res.log_bf))


def _predictive_problem(problem: TwoHypothesisProblem, design2: Design,
                        x1) -> TwoHypothesisProblem:
    h0, h1 = problem.hyp0, problem.hyp1
    if not (hasattr(h0, "predictive") and hasattr(h1, "predictive")):
        raise UnsupportedModelError(
            "posterior-predictive sampling is unavailable for this model family")
    return TwoHypothesisProblem(problem.prior0,
                                h0.predictive(design2, x1),
                                h1.predictive(design2, x1))


def _predictive_draws(hyp: LinearHypothesis, rng, draw_count: int,
                      antithetic: bool) -> np.ndarray:
    if not antithetic:
        return hyp.sample_data(rng, size=draw_count)
    half = max(1, draw_count // 2)
    X = hyp.sample_data(rng, size=half)
    mean = hyp.design.matrix() @ hyp.beta_mean
    return np.vstack([X, 2.0 * mean - X])


def conditional_test_info(problem: TwoHypothesisProblem, x1, design2: Design,
                          v: EvidenceFunction, engine: str = "exact",
                          draw_count: int = 1000, seed: int = 0,
                          order=_ORDER_FORWARD,
                          antithetic: bool = False) -> CriterionEstimate:
    """Observed conditional test information of a follow-up experiment.

    ``W(x1) - E[W(x1, X2) | H1, x1]`` with ``W(z) = V(BF(z))`` and the future
    data drawn from the posterior predictive under the alternative.
    Nonnegative in expectation by Jensen's inequality.  ``antithetic`` mirrors
    the Gaussian predictive draws around their mean, which removes the leading
    noise term for near-linear integrands.
    """
    if _normalize_order(order):
        problem, v = problem.swapped(), v.swapped()
    if design2.is_empty:
        return CriterionEstimate(0.0, 0.0, 0, "conditional")
    lbf1 = compute_log_bf(problem, x1, engine, draw_count=draw_count, seed=seed).log_bf
    pred = _predictive_problem(problem, design2, x1)
    rng = substream(seed, "conditional", "predictive")
    X2 = _predictive_draws(pred.hyp1, rng, draw_count, antithetic)
    if engine == "exact":
        lbf2 = (np.atleast_1d(pred.hyp0.log_marginal(X2))
                - np.atleast_1d(pred.hyp1.log_marginal(X2)))
    else:
        stacked = problem.with_design(problem.design.stacked(design2))
        x1 = np.asarray(x1, dtype=float)
        lbf_full = np.array([
            compute_log_bf(stacked, np.concatenate([x1, X2[i]]), engine,
                           draw_count=draw_count, seed=seed).log_bf
            for i in range(X2.shape[0])
        ])
        lbf2 = lbf_full - lbf1
    w1 = float(v.value_from_log(lbf1))
    w_full = v.value_from_log(lbf1 + lbf2)
    value = w1 - float(np.mean(w_full))
    se = float(np.std(w_full, ddof=1) / np.sqrt(w_full.size))
    return CriterionEstimate(value, se, int(w_full.size), "conditional")


def conditional_tk(M_mis, beta0, eta_obs, V_obs, log_bf_obs: float) -> CriterionEstimate:
    """Deterministic conditional KL criterion for follow-up design.

    The observed-data posterior ``N(eta_obs, V_obs)`` plays the role of the
    alternative prior (unit noise variance), shifted by the observed log
    Bayes factor.  Only the closed-form term varies with ``M_mis``.
    """
    base = tk_closed_form(M_mis, beta0, eta_obs, V_obs, 1.0)
    return CriterionEstimate(float(log_bf_obs) + base.value, 0.0, 0, "TK")


# -- estimation-style criteria -----------------------------------------------

def d_criterion(M, R, sigma2: float) -> CriterionEstimate:
    """Negative log determinant of the posterior covariance (larger is better)."""
    M = _as_matrix(M)
    R = np.asarray(R, dtype=float)
    d = R.shape[0]
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise DomainError("d_criterion needs a positive definite prior scale R")
    sign, logdet = np.linalg.slogdet(M.T @ M + np.linalg.inv(R))
    value = logdet - d * np.log(sigma2)
    return CriterionEstimate(float(value), 0.0, 0, "D")


def d_conditional(M_mis, V_obs) -> CriterionEstimate:
    """Conditional D criterion ``log|V_obs| + log|M'M + V_obs^-1|`` (maximize)."""
    M = _as_matrix(M_mis)
    V = np.asarray(V_obs, dtype=float)
    s1, ld1 = np.linalg.slogdet(V)
    s2, ld2 = np.linalg.slogdet(M.T @ M + np.linalg.inv(V))
    return CriterionEstimate(float(ld1 + ld2), 0.0, 0, "D")


# -- entropy change on the model indicator ------------------------------------

def _posterior_entropy(log_bf: np.ndarray, prior0: float) -> np.ndarray:
    a = np.log(prior0) + log_bf
    b = np.log(1.0 - prior0)
    with np.errstate(invalid="ignore"):
        norm = np.logaddexp(a, b)
    lp0 = a - norm
    lp1 = b - norm
    ent = np.zeros_like(log_bf)
    for lp in (lp0, lp1):
        p = np.exp(lp)
        ent -= np.where(p > 0, p * lp, 0.0)
    return ent


def box_hill(problem: TwoHypothesisProblem, *, design: Optional[Design] = None,
             engine: str = "exact", draw_count: int = 10_000,
             inner_draws: int = 1000, seed: int = 0) -> CriterionEstimate:
    """Expected entropy reduction of the model-indicator posterior.

    Prior entropy of ``(pi0, pi1)`` minus the expected posterior entropy under
    the prior-mixture marginal.  The mixture expectation is computed with one
    stratified arm per hypothesis, weighted by the prior probabilities.
    """
    if design is not None:
        problem = problem.with_design(design)
    pi0 = problem.prior0
    prior_ent = -(pi0 * np.log(pi0) + (1 - pi0) * np.log(1 - pi0))
    per_arm = max(2, draw_count // 2)
    means, variances, total = [], [], 0
    for cond in ("H0", "H1"):
        lbf, failures = _sample_log_bf(problem, cond, engine, per_arm,
                                       inner_draws, seed, "box-hill")
        _check_failures(failures, per_arm)
        ent = _posterior_entropy(lbf, pi0)
        means.append(float(np.mean(ent)))
        variances.append(float(np.var(ent, ddof=1) / ent.size))
        total += ent.size
    value = prior_ent - (pi0 * means[0] + (1 - pi0) * means[1])
    se = float(np.sqrt(pi0**2 * variances[0] + (1 - pi0)**2 * variances[1]))
    return CriterionEstimate(value, se, total, "BH")


# -- prior mean power of the likelihood-ratio test ----------------------------

def _lr_stats_linear(h0: LinearHypothesis, h1: LinearHypothesis,
                     X: np.ndarray) -> np.ndarray:
    """Plug-in LR statistic (evidence for H1): max loglik difference."""
    return _linear_plugin_log_lik(h1, X) - _linear_plugin_log_lik(h0, X)


def _lr_stats_binary(h0: BinaryHypothesis, h1: BinaryHypothesis,
                     counts: np.ndarray) -> np.ndarray:
    ll0 = fit_binary_batch(h0.design, h0.link, counts)[2]
    ll1 = fit_binary_batch(h1.design, h1.link, counts)[2]
    return ll1 - ll0


def prior_mean_power(problem: TwoHypothesisProblem, *,
                     design: Optional[Design] = None, size: float = 0.05,
                     outer_draws: int = 200, calibration_draws: int = 2000,
                     seed: int = 0) -> CriterionEstimate:
    """Power of the size-``size`` LR test averaged over the parameter priors.

    The critical value is the empirical ``1 - size`` quantile of the LR
    statistic over ``calibration_draws`` datasets simulated under the null
    hypothesis as a whole (a fresh null-parameter draw per dataset for
    composite nulls, so the reference distribution is the null prior
    predictive).  Power is then the rejection fraction over datasets at each
    outer draw of the alternative's parameters, averaged with its standard
    error over the outer draws.
    """
    if calibration_draws < 20 / size:
        raise InsufficientCalibrationError(
            f"need at least {int(np.ceil(20 / size))} calibration draws at size {size}")
    if design is not None:
        problem = problem.with_design(design)
    h0, h1 = problem.hyp0, problem.hyp1
    linear = isinstance(h0, LinearHypothesis) and isinstance(h1, LinearHypothesis)
    binary = isinstance(h0, BinaryHypothesis) and isinstance(h1, BinaryHypothesis)
    if not (linear or binary):
        raise UnsupportedModelError("prior_mean_power supports the linear and binary families")

    rng_cal = substream(seed, "power", "cal")
    if linear:
        Xc = h0.sample_data(rng_cal, size=calibration_draws)
        t_cal = _lr_stats_linear(h0, h1, Xc)
    else:
        Sc = h0.sample_counts(rng_cal, size=calibration_draws)
        t_cal = _lr_stats_binary(h0, h1, Sc)
    crit = float(np.quantile(t_cal, 1.0 - size))

    params1 = h1.sample_params(substream(seed, "power", "params", 1), outer_draws)
    powers = np.empty(outer_draws)
    for j in range(outer_draws):
        rng_pow = substream(seed, "power", "pow", j)
        if linear:
            Xp = h1.sample_data(rng_pow, params=params1[j][None, :], size=calibration_draws)
            t_pow = _lr_stats_linear(h0, h1, Xp)
        else:
            Sp = h1.sample_counts(rng_pow, params=params1[j][None, :], size=calibration_draws)
            t_pow = _lr_stats_binary(h0, h1, Sp)
        powers[j] = float(np.mean(t_pow > crit))
    value = float(np.mean(powers))
    se = float(np.std(powers, ddof=1) / np.sqrt(outer_draws))
    return CriterionEstimate(value, se, int(outer_draws * calibration_draws), "power")


# -- fraction of observed test information ------------------------------------

@dataclass(frozen=True)
class FractionResult:
    """Fraction of observed test information plus the ordering that was used."""

    fraction: float
    ordering: tuple
    observed: float
    conditional: float
    clamped: bool = False


def fraction_observed(problem: TwoHypothesisProblem, x1, design2: Design,
                      v: EvidenceFunction, engine: str = "exact",
                      draw_count: int = 1000, seed: int = 0,
                      antithetic: bool = False) -> FractionResult:
    """Observed information relative to observed plus expected follow-up gain.

    The hypothesis ordering follows the sign of the observed Bayes factor
    (forward when ``BF(x1) <= 1``, swapped otherwise), which keeps both terms
    nonnegative and the fraction inside ``[0, 1]``.
    """
    lbf1 = compute_log_bf(problem, x1, engine, draw_count=draw_count, seed=seed).log_bf
    order = _ORDER_FORWARD if lbf1 <= 0 else _ORDER_SWAPPED
    if design2.is_empty:
        return FractionResult(1.0, order, observed_test_info(problem, x1, v, engine,
                                                             order, draw_count, seed), 0.0)
    obs = observed_test_info(problem, x1, v, engine, order, draw_count, seed)
    cond = conditional_test_info(problem, x1, design2, v, engine, draw_count,
                                 seed, order, antithetic).value
    denom = obs + cond
    if denom <= 0:
        return FractionResult(1.0 if obs > 0 else 0.0, order, obs, cond, clamped=True)
    frac = obs / denom
    clamped = frac < 0 or frac > 1
    return FractionResult(float(np.clip(frac, 0.0, 1.0)), order, obs, cond, clamped)


def ri1(design_obs: Design, design_mis: Design, x_obs, theta0,
        noise_variance: float = 1.0, predictive_draws: int = 2000,
        seed: int = 0) -> float:
    """Observed-over-expected-complete log likelihood-ratio fraction.

    Frequentist fraction of observed information: the log LR between the
    observed-data MLE and ``theta0``, divided by its expected complete-data
    value under the predictive at the MLE.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    hyp_obs = LinearHypothesis(design_obs, noise_variance, theta0)
    M = design_obs.matrix()
    if np.linalg.matrix_rank(M) < M.shape[1]:
        raise DomainError("observed design is rank deficient")
    theta_hat, *_ = np.linalg.lstsq(M, np.asarray(x_obs, dtype=float), rcond=None)
    num = float(hyp_obs.log_likelihood(theta_hat, x_obs)
                - hyp_obs.log_likelihood(theta0, x_obs))
    if design_mis.is_empty:
        return 1.0
    hyp_mis_hat = LinearHypothesis(design_mis, noise_variance, theta_hat)
    hyp_mis_null = LinearHypothesis(design_mis, noise_variance, theta0)
    rng = substream(seed, "ri1", "predictive")
    X_mis = hyp_mis_hat.sample_data(rng, size=predictive_draws)
    extra = (np.atleast_1d(hyp_mis_hat.log_likelihood(theta_hat, X_mis))
             - np.atleast_1d(hyp_mis_null.log_likelihood(theta0, X_mis)))
    den = num + float(np.mean(extra))
    if abs(den) < 1e-12 and abs(num) < 1e-12:
        raise UndefinedFractionError("0/0: null value coincides with the MLE")
    if den <= 0:
        raise UndefinedFractionError("expected complete-data log LR is not positive")
    return num / den


# -- Fisher-information limit -------------------------------------------------

@dataclass(frozen=True)
class FisherInfo:
    """Observed and missing Fisher information at a parameter value."""

    observed: float
    missing: float
    at_parameter: float = 0.0

    def __post_init__(self):
        if self.observed < 0 or self.missing < 0:
            raise DomainError("Fisher information components must be nonnegative")


def fisher_fraction(info: FisherInfo, c: float) -> float:
    """Small-separation limit ``I_obs / (I_obs + c I_mis)`` of the fraction."""
    denom = info.observed + c * info.missing
    if denom <= 0:
        raise UndefinedFractionError("I_obs + c * I_mis must be positive")
    return info.observed / denom


@dataclass(frozen=True)
class Theorem1Row:
    delta: float
    numeric_fraction: float
    analytic_fraction: float
    abs_error: float


def theorem1_check(theta_obs: float, deltas, v: EvidenceFunction,
                   draw_count: int = 100_000, seed: int = 0, n_obs: int = 5,
                   n_mis: int = 5, noise_variance: float = 1.0) -> list[Theorem1Row]:
    """Numeric convergence of the observed-information fraction to its limit.

    Normal-mean model with known variance: sharp hypotheses at
    ``theta_obs + delta`` (null) versus ``theta_obs`` (alternative), with the
    observed sample mean pinned at ``theta_obs``.  Draws are shared across
    deltas and mirrored (antithetic), so the comparison against
    ``I_obs / (I_obs + c I_mis)`` is dominated by the deterministic
    separation bias rather than Monte Carlo noise.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise DomainError("deltas must be positive and strictly decreasing")
    c = conversion_number(v)  # raises for degenerate-at-one evidence
    analytic = fisher_fraction(
        FisherInfo(n_obs / noise_variance, n_mis / noise_variance, theta_obs), c)

    design_obs = Design([1.0], n_obs, basis="identity")
    design_mis = Design([1.0], n_mis, basis="identity")
    rng = substream(seed, "theorem1", "x-obs")
    resid = rng.standard_normal(n_obs) * np.sqrt(noise_variance)
    x_obs = theta_obs + resid - resid.mean()

    rows = []
    for delta in deltas:
        h0 = LinearHypothesis(design_obs, noise_variance, [theta_obs + delta])
        h1 = LinearHypothesis(design_obs, noise_variance, [theta_obs])
        prob = TwoHypothesisProblem(0.5, h0, h1)
        res = fraction_observed(prob, x_obs, design_mis, v, engine="exact",
                                draw_count=draw_count, seed=seed, antithetic=True)
        rows.append(Theorem1Row(delta, res.fraction, analytic,
                                abs(res.fraction - analytic)))
    return rows


# -- exact two-design counterexample ------------------------------------------

@dataclass(frozen=True)
class AppendixBReport:
    """Exact comparison of the entropy and probability criteria on two designs.

    All quantities are finite sums over the pieces ``[0,1), [1,2), [3,4)`` of
    the piecewise-uniform data models; nothing is Monte Carlo.
    """

    inputs: dict
    phi_bh: dict
    phi_p: dict
    correct_prob: dict
    expected_true_posterior: dict
    flags: dict = field(default_factory=dict)


def _entropy2(p0: float) -> float:
    out = 0.0
    for p in (p0, 1.0 - p0):
        if p > 0:
            out -= p * np.log(p)
    return float(out)


def appendix_b_example(pi0: float = 0.999, pi1: float = 0.001,
                       alpha: float = 0.99, beta1: float = 0.1,
                       beta2: float = 0.9) -> AppendixBReport:
    """Two candidate designs where the entropy criterion prefers the worse one.

    Under the first design the alternative adds a third piece that separates
    the models perfectly but rarely; under the second it only reweights the
    shared pieces.  The entropy criterion favors the second design even though
    the first is at least as good for reaching the right conclusion under
    either truth, and strictly better under the alternative.
    """
    for name, val in (("pi0", pi0), ("pi1", pi1), ("alpha", alpha),
                      ("beta1", beta1), ("beta2", beta2)):
        if not 0.0 < val < 1.0:
            raise DomainError(f"{name} must lie in (0, 1)")
    if abs(pi0 + pi1 - 1.0) > 1e-12:
        raise DomainError("pi0 + pi1 must equal 1")

    f0 = np.array([beta1, 1.0 - beta1, 0.0])
    f1_by_design = {
        "t1": np.array([alpha * beta1, alpha * (1.0 - beta1), 1.0 - alpha]),
        "t2": np.array([beta2, 1.0 - beta2, 0.0]),
    }
    prior_ent = _entropy2(pi0)
    v_ppr = EvidenceFunction("posterior-prior-ratio", prior0=pi0)

    phi_bh, phi_p = {}, {}
    correct, epost = {}, {}
    for t, f1 in f1_by_design.items():
        mix = pi0 * f0 + pi1 * f1
        post0 = np.divide(pi0 * f0, mix, out=np.zeros(3), where=mix > 0)
        post1 = np.where(mix > 0, 1.0 - post0, 0.0)
        phi_bh[t] = prior_ent - float(sum(
            m * _entropy2(p) for m, p in zip(mix, post0) if m > 0))
        # expected-info drop under the alternative; V(0) = 0 handles the
        # perfectly separating piece
        terms = [f1[j] * float(v_ppr(f0[j] / f1[j])) if f0[j] > 0 else 0.0
                 for j in range(3) if f1[j] > 0]
        phi_p[t] = float(v_ppr.at_one()) - float(np.sum(terms))
        correct[t] = {
            "H0": float((f0 * (post0 > 0.5)).sum()),
            "H1": float((f1 * (post1 > 0.5)).sum()),
        }
        epost[t] = {
            "H0": float((f0 * post0).sum()),
            "H1": float((f1 * post1).sum()),
        }

    flags = {
        "bh1": bool(phi_bh["t1"] < phi_bh["t2"]),
        "bh2": bool(correct["t1"]["H0"] >= correct["t2"]["H0"]
                    and correct["t1"]["H1"] >= correct["t2"]["H1"]),
        "bh3": bool(epost["t1"]["H0"] > epost["t2"]["H0"]
                    and epost["t1"]["H1"] > epost["t2"]["H1"]),
        "bh4": bool(phi_p["t1"] > phi_p["t2"]),
        "bh5": bool(correct["t1"]["H0"] > correct["t2"]["H0"]
                    or correct["t1"]["H1"] > correct["t2"]["H1"]),
    }
    inputs = {"pi0": pi0, "pi1": pi1, "alpha": alpha, "beta1": beta1, "beta2": beta2}
    return AppendixBReport(inputs, phi_bh, phi_p, correct, epost, flags)
