"""Sequential design for linear regression coefficient tests.

Conjugate posterior updating, separation analysis, constrained follow-up
menus, and the cubic-regression simulation study comparing the conditional
probability (P), expected-log-evidence (TK), and determinant (D) procedures
by the prior mean power of the likelihood-ratio test they end up with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import chi2, ncx2

from .bayes_factor import bf_linear_gaussian
from .criteria import (CriterionEstimate, conditional_tk, d_conditional)
from .errors import DomainError
from .evidence import EvidenceFunction
from .models import (Design, LinearHypothesis, TwoHypothesisProblem,
                     basis_matrix)
from .optimizer import CandidateGrid, constrained_select, exchange_optimize
from .rngtools import substream

__all__ = [
    "PosteriorState",
    "SequentialStudyConfig",
    "StudyResult",
    "posterior_update",
    "sep_max",
    "build_constrained_menu",
    "gaussian_prior_mean_power",
    "run_sequential_study",
    "SPREAD_POINTS",
]

SPREAD_POINTS = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """Observed-data posterior of the coefficients under the alternative."""

    mean: np.ndarray
    covariance: np.ndarray
    log_bf_obs: Optional[float] = None

    def __post_init__(self):
        C = np.asarray(self.covariance, dtype=float)
        if not np.allclose(C, C.T, atol=1e-12):
            raise DomainError("posterior covariance must be symmetric to 1e-12")
        if np.linalg.eigvalsh(C).min() <= 0:
            raise DomainError("posterior covariance must be positive definite")


def posterior_update(eta, R, M, x, sigma2: float, null=None) -> PosteriorState:
    """Conjugate Gaussian update of ``beta ~ N(eta, sigma2 R)`` given ``x``.

    With ``null`` supplied, the observed-data log Bayes factor against the
    point null is attached to the state.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    R = np.asarray(R, dtype=float)
    M = np.asarray(M, dtype=float) if not isinstance(M, Design) else M.matrix()
    if M.ndim != 2:
        M = np.atleast_2d(M)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    try:
        Rinv = np.linalg.inv(R)
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise DomainError("prior scale R must be invertible (positive definite)")
    if M.shape[0] == 0:
        V = sigma2 * R
        state_mean = eta.copy()
    else:
        V = sigma2 * np.linalg.inv(M.T @ M + Rinv)
        state_mean = V @ (M.T @ x + Rinv @ eta) / sigma2
    log_bf = None
    if null is not None and M.shape[0] > 0:
        h0 = _hypothesis_from_matrix(M, sigma2, np.asarray(null, dtype=float))
        h1 = _hypothesis_from_matrix(M, sigma2, eta, R)
        log_bf = bf_linear_gaussian(TwoHypothesisProblem(0.5, h0, h1), x).log_bf
    elif null is not None:
        log_bf = 0.0
    return PosteriorState(state_mean, V, log_bf)


def _hypothesis_from_matrix(M, sigma2, mean, cov_scale=None):
    # LinearHypothesis only touches design.matrix()/dimension, so a thin
    # stand-in keeps matrix-level callers (e.g. posterior_update) cheap
    class _Rows:
        def __init__(self, rows):
            self._rows = np.asarray(rows, dtype=float)
            self.basis = "matrix"
            self.points = np.arange(self._rows.shape[0], dtype=float)
            self.replications = np.ones(self._rows.shape[0], dtype=int)

        @property
        def dimension(self):
            return self._rows.shape[1]

        @property
        def n_rows(self):
            return self._rows.shape[0]

        @property
        def is_empty(self):
            return self._rows.shape[0] == 0

        def matrix(self):
            return self._rows

    return LinearHypothesis(_Rows(M), sigma2, mean, cov_scale)


def sep_max(state: PosteriorState, beta0, basis: str = "cubic",
            interval=(-1.0, 1.0), grid_resolution: int = 401) -> float:
    """Location of maximum |posterior-mean curve - null curve| on a grid.

    Ties resolve to the smallest grid point.
    """
    if grid_resolution < 101:
        raise DomainError("grid_resolution must be at least 101")
    grid = np.linspace(interval[0], interval[1], grid_resolution)
    diff = np.asarray(state.mean, dtype=float) - np.atleast_1d(np.asarray(beta0, dtype=float))
    sep = np.abs(basis_matrix(grid, basis) @ diff)
    return float(grid[int(np.argmax(sep))])


def build_constrained_menu(sep_location: float, basis: str = "cubic",
                           replications: int = 1) -> tuple[Design, Design]:
    """The two follow-up designs of the constrained comparison.

    (i) the full spread; (ii) a window of length 0.4 centered at the
    separation maximum, translated by the minimal shift that keeps every
    point inside [-1, 1].
    """
    if not -1.0 <= sep_location <= 1.0:
        raise DomainError("sep_location must lie in [-1, 1]")
    spread = Design(SPREAD_POINTS, replications, basis)
    offsets = SPREAD_POINTS / 5.0
    pts = sep_location + offsets
    if pts[-1] > 1.0:
        pts = pts + (1.0 - pts[-1])
    elif pts[0] < -1.0:
        pts = pts + (-1.0 - pts[0])
    narrow = Design(pts, replications, basis)
    return spread, narrow


def gaussian_prior_mean_power(M_comb, beta0, eta, R, sigma2: float = 1.0,
                              size: float = 0.05, prior_draws: int = 512,
                              seed: int = 0,
                              beta_draws: Optional[np.ndarray] = None) -> float:
    """Prior mean power of the LR test for the Gaussian linear model.

    With known noise variance the LR statistic is exactly chi-square with a
    noncentrality of ``|M (beta - beta0)|^2 / sigma2``, so only the prior
    average over ``beta ~ N(eta, sigma2 R)`` needs Monte Carlo.
    """
    M = np.asarray(M_comb, dtype=float) if not isinstance(M_comb, Design) else M_comb.matrix()
    beta0 = np.atleast_1d(np.asarray(beta0, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    d = beta0.size
    if beta_draws is None:
        rng = substream(seed, "gauss-power")
        L = np.linalg.cholesky(np.asarray(R, dtype=float) + 1e-14 * np.eye(d))
        beta_draws = eta + np.sqrt(sigma2) * rng.standard_normal((prior_draws, d)) @ L.T
    else:
        beta_draws = eta + beta_draws  # caller supplies centered draws
    crit = chi2.ppf(1.0 - size, d)
    proj = (beta_draws - beta0) @ M.T
    lam = np.einsum("bi,bi->b", proj, proj) / sigma2
    return float(np.mean(ncx2.sf(crit, d, lam)))


@dataclass(frozen=True)
class SequentialStudyConfig:
    """Desk-scale version of the cubic-regression follow-up study."""

    scenario: str = "parabola"
    beta_draws: int = 20
    datasets_per_beta: int = 50
    n_obs_points: np.ndarray = field(default_factory=lambda: SPREAD_POINTS.copy())
    n_mis: int = 5
    sigma2: float = 1.0
    prior_scale: float = 0.2
    eta_parabola: tuple = (1.1, 0.0, -1.3, 0.0)
    grid_size: int = 21
    p_inner_draws: int = 500
    power_draws: int = 512
    exchange_restarts: int = 2
    exchange_passes: int = 8

    def __post_init__(self):
        if self.scenario not in ("parabola", "random-curves"):
            raise DomainError("scenario must be 'parabola' or 'random-curves'")
        if self.beta_draws < 1 or self.datasets_per_beta < 1:
            raise DomainError("draw counts must be at least 1")


@dataclass(frozen=True)
class StudyResult:
    procedure: str
    scenario: str
    constrained: bool
    power: float
    se: float
    frac_design_i: float
    cell_powers: np.ndarray = field(repr=False, default=None)

    def to_csv_row(self) -> list:
        return [self.procedure, self.scenario, str(self.constrained).lower(),
                repr(self.power), repr(self.se),
                "" if np.isnan(self.frac_design_i) else repr(self.frac_design_i)]


def _conditional_p_value(design: Design, beta0, state: PosteriorState,
                         sigma2: float, v: EvidenceFunction,
                         beta_z: np.ndarray, eps_z: np.ndarray,
                         log_bf_obs: float) -> CriterionEstimate:
    """Conditional P criterion with frozen predictive draws (CRN across designs)."""
    M2 = design.matrix()
    Lp = np.linalg.cholesky(state.covariance + 1e-12 * np.eye(len(beta0)))
    betas = state.mean + beta_z @ Lp.T
    X2 = betas @ M2.T + np.sqrt(sigma2) * eps_z[:, :M2.shape[0]]
    h0 = _hypothesis_from_matrix(M2, sigma2, beta0)
    h1 = _hypothesis_from_matrix(M2, sigma2, state.mean, state.covariance / sigma2)
    lbf2 = np.atleast_1d(h0.log_marginal(X2)) - np.atleast_1d(h1.log_marginal(X2))
    w_full = v.value_from_log(log_bf_obs + lbf2)
    w1 = float(v.value_from_log(np.asarray(log_bf_obs)))
    value = w1 - float(np.mean(w_full))
    se = float(np.std(w_full, ddof=1) / np.sqrt(w_full.size))
    return CriterionEstimate(value, se, int(w_full.size), "P")


def _scenario_params(config: SequentialStudyConfig, j: int, seed: int):
    if config.scenario == "parabola":
        beta0 = np.zeros(4)
        eta = np.asarray(config.eta_parabola, dtype=float)
    else:
        rng = substream(seed, "study", "null-draw", j)
        beta0 = np.concatenate([rng.uniform(-1, 1, 2), rng.uniform(-10, 10, 2)])
        eta = beta0.copy()
    return beta0, eta


def run_sequential_study(config: SequentialStudyConfig,
                         procedures=("P", "TK", "D"), constrained: bool = False,
                         seed: int = 0) -> list[StudyResult]:
    """Two-stage design study: observe, choose follow-up points, score power.

    For every (coefficient draw, dataset) cell the posterior is updated, each
    procedure picks its follow-up design (grid exchange when unconstrained,
    two-design menu otherwise), and the resulting combined design is scored by
    the prior mean power of the size-0.05 LR test.  Power draws are shared
    across procedures and cells, so reported differences are paired.
    """
    procedures = [p.upper() for p in procedures]
    for p in procedures:
        if p not in ("P", "TK", "D"):
            raise DomainError(f"unknown procedure {p!r}")
    R = config.prior_scale * np.eye(4)
    obs_design = Design(config.n_obs_points, 1, basis="cubic")
    M_obs = obs_design.matrix()
    grid = CandidateGrid(np.linspace(-1, 1, config.grid_size), 1, basis="cubic")
    v_p = EvidenceFunction("posterior-prior-ratio", prior0=0.5)

    # common centered draws for the power integral, shared by all cells
    rng_pow = substream(seed, "study", "power-draws")
    power_z = np.sqrt(config.sigma2) * rng_pow.standard_normal((config.power_draws, 4)) \
        @ np.linalg.cholesky(R).T

    n_cells = config.beta_draws * config.datasets_per_beta
    powers = {p: np.empty(n_cells) for p in procedures}
    picked_spread = {p: [] for p in procedures}

    cell = 0
    for j in range(config.beta_draws):
        beta0, eta = _scenario_params(config, j, seed)
        rng_beta = substream(seed, "study", "beta", j)
        beta_true = eta + np.sqrt(config.sigma2) \
            * rng_beta.standard_normal(4) @ np.linalg.cholesky(R).T
        for k in range(config.datasets_per_beta):
            rng_data = substream(seed, "study", "data", j, k)
            x_obs = M_obs @ beta_true + np.sqrt(config.sigma2) \
                * rng_data.standard_normal(M_obs.shape[0])
            state = posterior_update(eta, R, M_obs, x_obs, config.sigma2, null=beta0)

            rng_pred = substream(seed, "study", "pred", j, k)
            beta_z = rng_pred.standard_normal((config.p_inner_draws, 4))
            eps_z = rng_pred.standard_normal((config.p_inner_draws, config.n_mis))

            def crit_for(proc):
                if proc == "TK":
                    return lambda d, s: conditional_tk(d.matrix(), beta0, state.mean,
                                                       state.covariance, state.log_bf_obs)
                if proc == "D":
                    return lambda d, s: d_conditional(d.matrix(), state.covariance)
                return lambda d, s: _conditional_p_value(
                    d, beta0, state, config.sigma2, v_p, beta_z, eps_z,
                    state.log_bf_obs)

            for proc in procedures:
                criterion = crit_for(proc)
                if constrained:
                    menu = build_constrained_menu(sep_max(state, beta0))
                    res = constrained_select(criterion, menu, seed=cell)
                    picked_spread[proc].append(
                        np.array_equal(res.design.points, menu[0].points))
                else:
                    res = exchange_optimize(criterion, grid, config.n_mis,
                                            max_passes=config.exchange_passes,
                                            seed=cell,
                                            n_restarts=config.exchange_restarts)
                M_comb = np.vstack([M_obs, res.design.matrix()])
                powers[proc][cell] = gaussian_prior_mean_power(
                    M_comb, beta0, eta, R, config.sigma2,
                    beta_draws=power_z)
            cell += 1

    out = []
    for proc in procedures:
        vals = powers[proc]
        frac = float(np.mean(picked_spread[proc])) if constrained else float("nan")
        out.append(StudyResult(proc, config.scenario, constrained,
                               float(np.mean(vals)),
                               float(np.std(vals, ddof=1) / np.sqrt(vals.size)),
                               frac, vals))
    return out
