"""Data-generating models, designs, priors, and maximum-likelihood fitting.

Two model families are supported: the Normal linear regression model with a
point null and Gaussian-prior alternative, and binary regression with probit
or complementary log-log links for link-choice testing.  Hypothesis objects
expose a small uniform surface (sampling, likelihoods, optional exact
marginals and conjugate posteriors) that the Bayes-factor engines and
criteria consume.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr, ndtri

from .errors import DomainError, UnsupportedModelError
from .rngtools import substream

__all__ = [
    "Design",
    "basis_matrix",
    "LinearGaussianModel",
    "LinearHypothesis",
    "BinaryRegressionModel",
    "BinaryHypothesis",
    "TwoHypothesisProblem",
    "FitResult",
    "simulate",
    "log_likelihood",
    "link_inverse",
    "link_density",
    "mle_fit",
    "write_design_csv",
    "read_design_csv",
    "write_dataset_csv",
    "read_dataset_csv",
]

PROBIT = "probit"
CLOGLOG = "cloglog"

_BASIS_DIMS = {"intercept-slope": 2, "cubic": 4, "identity": 1}

# linear predictors are clamped here during GLM fitting; beyond it the
# Bernoulli likelihood is flat to double precision and separation is declared
_PREDICTOR_CLAMP = 30.0

_P_FLOOR = 1e-300
_P_CEIL = 1.0 - 1e-16


def basis_matrix(points, basis: str) -> np.ndarray:
    """Model rows for scalar covariates under a named basis."""
    t = np.atleast_1d(np.asarray(points, dtype=float))
    if basis == "intercept-slope":
        return np.column_stack([np.ones_like(t), t])
    if basis == "cubic":
        return np.column_stack([np.ones_like(t), t, t**2, t**3])
    if basis == "identity":
        return t[:, None]
    raise DomainError(f"unknown basis {basis!r}")


@dataclass(frozen=True, eq=False)
class Design:
    """Candidate covariate points with replication counts.

    ``points`` are scalars inside ``box``; ``replications`` is a per-point
    positive count (a scalar broadcasts to all points).  The expanded design
    matrix has one row per replicate.
    """

    points: np.ndarray
    replications: np.ndarray = 1
    basis: str = "intercept-slope"
    box: tuple = (-1.0, 1.0)

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        reps = np.broadcast_to(np.asarray(self.replications, dtype=int),
                               pts.shape).copy()
        if self.basis not in _BASIS_DIMS:
            raise DomainError(f"unknown basis {self.basis!r}")
        if pts.size and (pts.min() < self.box[0] - 1e-9 or pts.max() > self.box[1] + 1e-9):
            raise DomainError(f"design points outside box {self.box}")
        if pts.size and reps.min() < 1:
            raise DomainError("replication counts must be positive")
        pts.setflags(write=False)
        reps.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "replications", reps)

    @property
    def dimension(self) -> int:
        return _BASIS_DIMS[self.basis]

    @property
    def n_rows(self) -> int:
        return int(self.replications.sum()) if self.points.size else 0

    @property
    def is_empty(self) -> bool:
        return self.points.size == 0

    def expanded_points(self) -> np.ndarray:
        if self.is_empty:
            return np.empty(0)
        return np.repeat(self.points, self.replications)

    def matrix(self) -> np.ndarray:
        """Expanded design matrix, shape ``(n_rows, dimension)``."""
        if self.is_empty:
            return np.empty((0, self.dimension))
        return basis_matrix(self.expanded_points(), self.basis)

    def unique_matrix(self) -> np.ndarray:
        return basis_matrix(self.points, self.basis)

    def with_points(self, points, replications=None) -> "Design":
        reps = self.replications if replications is None else replications
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        if np.ndim(reps) > 0 and len(np.atleast_1d(reps)) != pts.size:
            reps = int(np.atleast_1d(reps)[0])
        return Design(pts, reps, self.basis, self.box)

    def stacked(self, other: "Design") -> "Design":
        if other.basis != self.basis:
            raise DomainError("cannot stack designs with different bases")
        if other.is_empty:
            return self
        if self.is_empty:
            return other
        return Design(np.concatenate([self.points, other.points]),
                      np.concatenate([self.replications, other.replications]),
                      self.basis, self.box)

    @staticmethod
    def empty(basis: str = "intercept-slope", box=(-1.0, 1.0)) -> "Design":
        return Design(np.empty(0), np.empty(0, dtype=int), basis, box)


def _psd_factor(R: np.ndarray) -> np.ndarray:
    """Factor ``R = L L^T`` of a symmetric psd matrix, dropping null directions."""
    vals, vecs = np.linalg.eigh(R)
    if vals.min() < -1e-12 * max(1.0, abs(vals.max())):
        raise DomainError("covariance scale matrix is not positive semidefinite")
    keep = vals > max(vals.max(), 0.0) * 1e-14 + 1e-300
    return vecs[:, keep] * np.sqrt(vals[keep])


def _check_symmetric(R: np.ndarray, name: str) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DomainError(f"{name} must be a square matrix")
    if not np.allclose(R, R.T, atol=1e-12):
        raise DomainError(f"{name} must be symmetric to 1e-12")
    return 0.5 * (R + R.T)


@dataclass(frozen=True, eq=False)
class LinearHypothesis:
    """One side of a linear-Gaussian test: ``X = M beta + eps``.

    ``beta_cov_scale`` is the prior covariance scale ``R`` (full covariance
    ``sigma2 * R``); ``None`` marks a point hypothesis at ``beta_mean``.
    """

    design: Design
    noise_variance: float
    beta_mean: np.ndarray
    beta_cov_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise DomainError("noise variance must be positive")
        mean = np.atleast_1d(np.asarray(self.beta_mean, dtype=float))
        if mean.size != self.design.dimension:
            raise DomainError("coefficient dimension does not match basis")
        mean.setflags(write=False)
        object.__setattr__(self, "beta_mean", mean)
        if self.beta_cov_scale is not None:
            R = _check_symmetric(self.beta_cov_scale, "beta_cov_scale")
            if R.shape[0] != mean.size:
                raise DomainError("covariance dimension does not match coefficients")
            _psd_factor(R)  # validates psd
            R.setflags(write=False)
            object.__setattr__(self, "beta_cov_scale", R)

    @property
    def is_point(self) -> bool:
        return self.beta_cov_scale is None

    def with_design(self, design: Design) -> "LinearHypothesis":
        return replace(self, design=design)

    # cached linear algebra for the exact marginal ------------------------

    @cached_property
    def _matrix(self) -> np.ndarray:
        return self.design.matrix()

    @cached_property
    def _marginal_factor(self):
        """``(mean, U, cho)`` with data covariance ``sigma2 (I + U U^T)``."""
        M = self._matrix
        mean = M @ self.beta_mean
        if self.is_point:
            return mean, None, None
        L = _psd_factor(self.beta_cov_scale)
        U = M @ L
        if U.shape[1] == 0:
            return mean, None, None
        A = np.eye(U.shape[1]) + U.T @ U
        return mean, U, cho_factor(A, lower=True)

    def log_marginal(self, x) -> np.ndarray | float:
        """Exact log marginal density of the data under this hypothesis.

        Accepts one dataset ``(n,)`` or a batch ``(B, n)``.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        mean, U, cho = self._marginal_factor
        n = mean.size
        if X.shape[1] != n:
            raise DomainError("data length does not match design")
        s2 = self.noise_variance
        E = X - mean
        ee = np.einsum("bi,bi->b", E, E)
        if U is None:
            logdet = 0.0
            quad = ee
        else:
            logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
            W = E @ U
            T = cho_solve(cho, W.T).T
            quad = ee - np.einsum("bi,bi->b", W, T)
        # quad/s2 may overflow to inf for degenerate noise scales; the
        # resulting -inf log density is the correct limit
        with np.errstate(over="ignore"):
            out = -0.5 * (n * np.log(2 * np.pi * s2) + logdet + quad / s2)
        return float(out[0]) if single else out

    # sampling -------------------------------------------------------------

    def sample_params(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        if self.is_point:
            return np.tile(self.beta_mean, (size, 1))
        L = _psd_factor(self.beta_cov_scale)
        z = rng.standard_normal((size, L.shape[1]))
        return self.beta_mean + np.sqrt(self.noise_variance) * z @ L.T

    def sample_data(self, rng: np.random.Generator, params=None, size: int = 1) -> np.ndarray:
        M = self._matrix
        if params is None:
            params = self.sample_params(rng, size)
        params = np.atleast_2d(np.asarray(params, dtype=float))
        if params.shape[0] == 1 and size > 1:
            params = np.broadcast_to(params, (size, params.shape[1]))
        noise = rng.standard_normal((params.shape[0], M.shape[0]))
        return params @ M.T + np.sqrt(self.noise_variance) * noise

    # likelihood and prior ---------------------------------------------------

    def log_likelihood(self, params, data) -> np.ndarray | float:
        params = np.asarray(params, dtype=float)
        data = np.asarray(data, dtype=float)
        single = params.ndim == 1 and data.ndim == 1
        P = np.atleast_2d(params)
        X = np.atleast_2d(data)
        M = self._matrix
        if X.shape[1] != M.shape[0]:
            raise DomainError("data length does not match design")
        mu = P @ M.T
        if mu.shape[0] == 1 or X.shape[0] == 1 or mu.shape[0] == X.shape[0]:
            resid = X - mu
        else:
            raise DomainError("incompatible parameter/data batch shapes")
        s2 = self.noise_variance
        with np.errstate(over="ignore"):
            out = -0.5 * (M.shape[0] * np.log(2 * np.pi * s2)
                          + np.einsum("bi,bi->b", resid, resid) / s2)
        return float(out[0]) if single else out

    def log_prior(self, params) -> np.ndarray | float:
        if self.is_point:
            raise UnsupportedModelError("point hypothesis has no prior density")
        params = np.asarray(params, dtype=float)
        single = params.ndim == 1
        P = np.atleast_2d(params)
        cov = self.noise_variance * self.beta_cov_scale
        cho = cho_factor(cov, lower=True)
        d = P - self.beta_mean
        sol = cho_solve(cho, d.T).T
        logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
        out = -0.5 * (P.shape[1] * np.log(2 * np.pi) + logdet
                      + np.einsum("bi,bi->b", d, sol))
        return float(out[0]) if single else out

    # conjugate update ------------------------------------------------------

    def posterior(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Posterior ``(mean, covariance)`` of beta given data ``x``."""
        if self.is_point:
            raise UnsupportedModelError("point hypothesis has no posterior")
        M = self._matrix
        s2 = self.noise_variance
        Rinv = np.linalg.inv(self.beta_cov_scale)
        V = s2 * np.linalg.inv(M.T @ M + Rinv)
        eta = V @ (M.T @ np.asarray(x, dtype=float) + Rinv @ self.beta_mean) / s2
        return eta, V

    def predictive(self, design2: Design, x1) -> "LinearHypothesis":
        """Posterior-predictive hypothesis for future data on ``design2``."""
        if self.is_point:
            return LinearHypothesis(design2, self.noise_variance, self.beta_mean)
        eta, V = self.posterior(x1)
        return LinearHypothesis(design2, self.noise_variance, eta,
                                V / self.noise_variance)

    # Laplace interface -------------------------------------------------------

    @property
    def laplace_dim(self) -> int:
        return self.beta_mean.size

    def laplace_start(self) -> np.ndarray:
        return np.array(self.beta_mean)

    def laplace_logpost(self, u, x) -> float:
        return float(self.log_prior(u)) + float(self.log_likelihood(u, x))


@dataclass(frozen=True, eq=False)
class LinearGaussianModel:
    """Normal linear regression test setup: point null vs Gaussian prior."""

    design: Design
    noise_variance: float
    null: np.ndarray
    alt_mean: np.ndarray
    alt_cov: np.ndarray

    def __post_init__(self):
        d = self.design.dimension
        null = np.atleast_1d(np.asarray(self.null, dtype=float))
        eta = np.atleast_1d(np.asarray(self.alt_mean, dtype=float))
        R = _check_symmetric(self.alt_cov, "alt_cov")
        if not (null.size == eta.size == R.shape[0] == d):
            raise DomainError("null, alt_mean, alt_cov, and basis dimensions disagree")
        _psd_factor(R)
        for arr in (null, eta, R):
            arr.setflags(write=False)
        object.__setattr__(self, "null", null)
        object.__setattr__(self, "alt_mean", eta)
        object.__setattr__(self, "alt_cov", R)

    def hypothesis0(self) -> LinearHypothesis:
        return LinearHypothesis(self.design, self.noise_variance, self.null)

    def hypothesis1(self) -> LinearHypothesis:
        return LinearHypothesis(self.design, self.noise_variance,
                                self.alt_mean, self.alt_cov)

    def problem(self, prior0: float = 0.5) -> "TwoHypothesisProblem":
        return TwoHypothesisProblem(prior0, self.hypothesis0(), self.hypothesis1())


def link_inverse(link: str, u) -> np.ndarray | float:
    """Inverse link: success probability at linear predictor ``u``."""
    u = np.asarray(u, dtype=float)
    if link == PROBIT:
        p = ndtr(u)
    elif link == CLOGLOG:
        with np.errstate(over="ignore"):
            p = -np.expm1(-np.exp(u))
    else:
        raise DomainError(f"unknown link {link!r}")
    out = np.clip(p, _P_FLOOR, _P_CEIL)
    return float(out) if out.ndim == 0 else out


def link_density(link: str, u) -> np.ndarray:
    """Derivative dp/du of the inverse link (used by Fisher scoring)."""
    u = np.asarray(u, dtype=float)
    if link == PROBIT:
        return np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
    if link == CLOGLOG:
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(u - np.exp(u))
    raise DomainError(f"unknown link {link!r}")


def _link_forward(link: str, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if link == PROBIT:
        return ndtri(p)
    if link == CLOGLOG:
        return np.log(-np.log1p(-p))
    raise DomainError(f"unknown link {link!r}")


@dataclass(frozen=True, eq=False)
class BinaryHypothesis:
    """Bernoulli regression under one link, with optional Gaussian coef prior."""

    design: Design
    link: str
    coef: np.ndarray
    coef_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.link not in (PROBIT, CLOGLOG):
            raise DomainError(f"unknown link {self.link!r}")
        coef = np.atleast_1d(np.asarray(self.coef, dtype=float))
        if coef.size != self.design.dimension:
            raise DomainError("coefficient dimension does not match basis")
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        if self.coef_cov is not None:
            C = _check_symmetric(self.coef_cov, "coef_cov")
            if np.linalg.eigvalsh(C).min() <= 0:
                raise DomainError("coefficient prior covariance must be positive definite")
            C.setflags(write=False)
            object.__setattr__(self, "coef_cov", C)

    @property
    def is_point(self) -> bool:
        return self.coef_cov is None

    def with_design(self, design: Design) -> "BinaryHypothesis":
        return replace(self, design=design)

    @cached_property
    def _unique(self):
        return self.design.unique_matrix(), self.design.replications.astype(float)

    def success_probs(self, params) -> np.ndarray:
        """Per-unique-point probabilities, params ``(d,)`` or ``(P, d)``."""
        X, _ = self._unique
        u = np.atleast_2d(np.asarray(params, dtype=float)) @ X.T
        return link_inverse(self.link, np.clip(u, -_PREDICTOR_CLAMP, _PREDICTOR_CLAMP))

    def sample_params(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        if self.is_point:
            return np.tile(self.coef, (size, 1))
        L = np.linalg.cholesky(self.coef_cov)
        return self.coef + rng.standard_normal((size, self.coef.size)) @ L.T

    def sample_counts(self, rng: np.random.Generator, params=None, size: int = 1) -> np.ndarray:
        """Per-point success counts, shape ``(size, k)``."""
        _, n = self._unique
        if params is None:
            params = self.sample_params(rng, size)
        p = self.success_probs(params)
        if p.shape[0] == 1 and size > 1:
            p = np.broadcast_to(p, (size, p.shape[1]))
        return rng.binomial(n.astype(int), p)

    def sample_data(self, rng: np.random.Generator, params=None, size: int = 1) -> np.ndarray:
        """Full 0/1 response vectors, shape ``(size, n_rows)``."""
        if params is None:
            params = self.sample_params(rng, size)
        p_pts = self.success_probs(params)
        if p_pts.shape[0] == 1 and size > 1:
            p_pts = np.broadcast_to(p_pts, (size, p_pts.shape[1]))
        p_rows = np.repeat(p_pts, self.design.replications, axis=1)
        return (rng.random(p_rows.shape) < p_rows).astype(float)

    def to_counts(self, data) -> np.ndarray:
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.shape[1] != self.design.n_rows:
            raise DomainError("data length does not match design")
        edges = np.concatenate([[0], np.cumsum(self.design.replications)])
        return np.column_stack([
            data[:, edges[i]:edges[i + 1]].sum(axis=1)
            for i in range(len(self.design.points))
        ])

    def log_likelihood_counts(self, params, counts) -> np.ndarray:
        """Log likelihood matrix ``(B, P)`` for count data vs parameter batch."""
        _, n = self._unique
        p = self.success_probs(params)  # (P, k)
        counts = np.atleast_2d(np.asarray(counts, dtype=float))
        return counts @ np.log(p).T + (n - counts) @ np.log1p(-p).T

    def log_likelihood(self, params, data) -> np.ndarray | float:
        params = np.asarray(params, dtype=float)
        data = np.asarray(data, dtype=float)
        single = params.ndim == 1 and data.ndim == 1
        counts = self.to_counts(data)
        ll = self.log_likelihood_counts(np.atleast_2d(params), counts)
        if single:
            return float(ll[0, 0])
        if params.ndim == 1:
            return ll[:, 0]
        if data.ndim == 1:
            return ll[0, :]
        if ll.shape[0] == ll.shape[1]:
            return np.diag(ll)
        raise DomainError("incompatible parameter/data batch shapes")

    def log_prior(self, params) -> np.ndarray | float:
        if self.is_point:
            raise UnsupportedModelError("point hypothesis has no prior density")
        params = np.asarray(params, dtype=float)
        single = params.ndim == 1
        P = np.atleast_2d(params)
        cho = cho_factor(self.coef_cov, lower=True)
        d = P - self.coef
        sol = cho_solve(cho, d.T).T
        logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
        out = -0.5 * (P.shape[1] * np.log(2 * np.pi) + logdet
                      + np.einsum("bi,bi->b", d, sol))
        return float(out[0]) if single else out

    @property
    def laplace_dim(self) -> int:
        return self.coef.size

    def laplace_start(self) -> np.ndarray:
        return np.array(self.coef)

    def laplace_logpost(self, u, x) -> float:
        return float(self.log_prior(u)) + float(self.log_likelihood(u, x))


@dataclass(frozen=True, eq=False)
class BinaryRegressionModel:
    """Binary regression under one link with a Gaussian coefficient prior."""

    design: Design
    link: str
    coef_prior_mean: np.ndarray
    coef_prior_cov: np.ndarray

    def hypothesis(self) -> BinaryHypothesis:
        return BinaryHypothesis(self.design, self.link,
                                self.coef_prior_mean, self.coef_prior_cov)

    @staticmethod
    def link_choice_problem(design: Design, eta, R, prior0: float = 0.5,
                            null_link: str = CLOGLOG,
                            alt_link: str = PROBIT) -> "TwoHypothesisProblem":
        """Link-selection test: H0 = ``null_link``, H1 = ``alt_link``.

        Both links share the Gaussian prior N(eta, R) on the coefficients.
        """
        h0 = BinaryHypothesis(design, null_link, eta, R)
        h1 = BinaryHypothesis(design, alt_link, eta, R)
        return TwoHypothesisProblem(prior0, h0, h1)


@dataclass(frozen=True, eq=False)
class TwoHypothesisProblem:
    """Prior probabilities plus the data model under each hypothesis."""

    prior0: float
    hyp0: object
    hyp1: object

    def __post_init__(self):
        if not 0.0 < self.prior0 < 1.0:
            raise DomainError("prior0 must lie in (0, 1)")
        d0, d1 = self.hyp0.design, self.hyp1.design
        same = (np.array_equal(d0.points, d1.points)
                and np.array_equal(d0.replications, d1.replications)
                and d0.basis == d1.basis)
        if not same:
            raise DomainError("hypotheses must share one observation design")

    @property
    def prior1(self) -> float:
        return 1.0 - self.prior0

    @property
    def design(self) -> Design:
        return self.hyp0.design

    def swapped(self) -> "TwoHypothesisProblem":
        return TwoHypothesisProblem(self.prior1, self.hyp1, self.hyp0)

    def with_design(self, design: Design) -> "TwoHypothesisProblem":
        return TwoHypothesisProblem(self.prior0,
                                    self.hyp0.with_design(design),
                                    self.hyp1.with_design(design))

    def hypothesis(self, which: str):
        if which in ("H0", "h0", 0):
            return self.hyp0
        if which in ("H1", "h1", 1):
            return self.hyp1
        raise DomainError("hypothesis must be 'H0' or 'H1'")


def simulate(problem: TwoHypothesisProblem, hypothesis: str,
             param_draw=None, seed: int = 0) -> np.ndarray:
    """One dataset from the chosen hypothesis; deterministic given ``seed``.

    When ``param_draw`` is omitted, parameters are drawn from the hypothesis
    prior (composite) or fixed at the point value.
    """
    hyp = problem.hypothesis(hypothesis)
    if not hasattr(hyp, "sample_data"):
        raise UnsupportedModelError(f"{type(hyp).__name__} has no sampling rule")
    rng = substream(seed, "simulate", str(hypothesis))
    return hyp.sample_data(rng, params=param_draw, size=1)[0]


def log_likelihood(hypothesis, params, data):
    """Exact log density (Gaussian) or log mass (Bernoulli product)."""
    return hypothesis.log_likelihood(params, data)


@dataclass(frozen=True)
class FitResult:
    params: np.ndarray
    converged: bool
    n_iter: int
    log_likelihood: float


def fit_binary_batch(design: Design, link: str, counts: np.ndarray,
                     tol: float = 1e-8, max_iter: int = 100):
    """Fisher-scoring MLE for a batch of binomial-count datasets.

    ``counts`` has shape ``(B, k)`` with ``k`` unique design points.  Returns
    ``(params (B, d), converged (B,), loglik (B,), n_iter)``.  Separation is
    flagged by clamping the fitted linear predictor to +-30.
    """
    X = design.unique_matrix()
    n = design.replications.astype(float)
    S = np.atleast_2d(np.asarray(counts, dtype=float))
    B, k = S.shape
    d = X.shape[1]
    if np.linalg.matrix_rank(X) < d:
        raise DomainError("design is rank deficient; MLE not identifiable")

    N = n.sum()
    rate = np.clip(S.sum(axis=1) / N, 0.5 / N, 1 - 0.5 / N)
    beta = np.zeros((B, d))
    beta[:, 0] = _link_forward(link, rate)

    def loglik(b):
        u = np.clip(b @ X.T, -_PREDICTOR_CLAMP, _PREDICTOR_CLAMP)
        p = np.clip(link_inverse(link, u), 1e-12, 1 - 1e-12)
        return (S * np.log(p) + (n - S) * np.log1p(-p)).sum(axis=1)

    ll = loglik(beta)
    active = np.ones(B, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        u = np.clip(beta @ X.T, -_PREDICTOR_CLAMP, _PREDICTOR_CLAMP)
        p = np.clip(link_inverse(link, u), 1e-12, 1 - 1e-12)
        dp = link_density(link, u)
        var = p * (1 - p)
        resid = (S - n * p) * dp / var          # (B, k)
        grad = resid @ X                        # (B, d)
        w = n * dp * dp / var                   # (B, k)
        gnorm = np.linalg.norm(grad, axis=1)
        active = gnorm >= tol
        if not active.any():
            break
        # Fisher information and solve, batched
        F = np.einsum("bk,ki,kj->bij", w, X, X)
        F += 1e-10 * np.eye(d)
        step = np.linalg.solve(F, grad[:, :, None])[:, :, 0]
        # step halving where the log likelihood would decrease
        scale = np.where(active, 1.0, 0.0)
        for _ in range(12):
            trial = beta + scale[:, None] * step
            ll_new = loglik(trial)
            worse = active & (ll_new < ll - 1e-12)
            if not worse.any():
                break
            scale = np.where(worse, scale * 0.5, scale)
        beta = beta + scale[:, None] * step
        ll = loglik(beta)

    # separation: the iterate walked past the clamp (the likelihood has
    # plateaued under clipped predictors by then), or the fit is perfect,
    # which a Bernoulli product only approaches with the MLE at infinity.
    # The estimates are NOT rescaled: every downstream likelihood clips the
    # linear predictor, and shrinking beta would corrupt the fitted
    # probabilities at interior design points.
    umax = np.abs(beta @ X.T).max(axis=1)
    separated = (umax > _PREDICTOR_CLAMP) | (ll > -1e-6)
    converged = ~(active | separated)
    return beta, converged, ll, it


def mle_fit(hypothesis, data) -> FitResult:
    """Maximum-likelihood fit of one dataset under the hypothesis family.

    Gaussian hypotheses use closed-form least squares; binary hypotheses use
    Fisher scoring until the score norm drops below 1e-8 (at most 100
    iterations).  Detected separation returns ``converged=False``; the
    reported log likelihood (and every downstream probability evaluation)
    clamps the linear predictor to +-30, keeping likelihood-ratio statistics
    finite.
    """
    data = np.asarray(data, dtype=float)
    if isinstance(hypothesis, LinearHypothesis):
        M = hypothesis.design.matrix()
        if np.linalg.matrix_rank(M) < M.shape[1]:
            raise DomainError("design is rank deficient; MLE not identifiable")
        beta, *_ = np.linalg.lstsq(M, data, rcond=None)
        ll = float(hypothesis.log_likelihood(beta, data))
        return FitResult(beta, True, 0, ll)
    if isinstance(hypothesis, BinaryHypothesis):
        counts = hypothesis.to_counts(data)
        params, conv, ll, it = fit_binary_batch(hypothesis.design,
                                                hypothesis.link, counts)
        return FitResult(params[0], bool(conv[0]), it, float(ll[0]))
    raise UnsupportedModelError(f"no MLE routine for {type(hypothesis).__name__}")


# -- CSV interchange -------------------------------------------------------

def write_design_csv(design: Design, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point", "replications"])
        for p, r in zip(design.points, design.replications):
            writer.writerow([repr(float(p)), int(r)])


def read_design_csv(path, basis: str = "intercept-slope", box=(-1.0, 1.0)) -> Design:
    points, reps = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["point", "replications"]:
            raise DomainError(f"{path}: expected header 'point,replications'")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise DomainError(f"{path}: malformed design row {row!r}")
            points.append(float(row[0]))
            reps.append(int(row[1]))
    return Design(np.asarray(points), np.asarray(reps, dtype=int), basis, box)


def write_dataset_csv(path, design: Design, data) -> None:
    data = np.asarray(data, dtype=float)
    pts = design.expanded_points()
    if data.size != pts.size:
        raise DomainError("data length does not match design")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_index", "point", "response"])
        for i, (p, y) in enumerate(zip(pts, data)):
            writer.writerow([i, repr(float(p)), repr(float(y))])


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    points, resp = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["row_index", "point", "response"]:
            raise DomainError(f"{path}: expected header 'row_index,point,response'")
        for row in reader:
            if not row:
                continue
            points.append(float(row[1]))
            resp.append(float(row[2]))
    return np.asarray(points), np.asarray(resp)
