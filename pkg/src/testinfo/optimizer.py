"""Design search: single-point exchange on a grid and finite-menu selection.

Criterion evaluators have the signature ``criterion(design, seed) ->
CriterionEstimate``.  Deterministic criteria ignore the seed; stochastic ones
must honor it, because candidates within a pass are compared under one shared
seed (common random numbers) to stop noise-driven cycling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .criteria import CriterionEstimate
from .errors import CriterionEvaluationError, DomainError
from .models import Design
from .rngtools import substream

__all__ = ["CandidateGrid", "SearchResult", "exchange_optimize", "constrained_select"]


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Sorted distinct scalar candidates with a fixed replication count."""

    points: np.ndarray
    per_point_replications: int = 1
    basis: str = "intercept-slope"
    box: tuple = (-1.0, 1.0)

    def __post_init__(self):
        pts = np.unique(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise DomainError("candidate grid must be nonempty")
        if pts.min() < self.box[0] - 1e-9 or pts.max() > self.box[1] + 1e-9:
            raise DomainError(f"grid points outside box {self.box}")
        if self.per_point_replications < 1:
            raise DomainError("per_point_replications must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def design(self, points) -> Design:
        return Design(points, self.per_point_replications, self.basis, self.box)


@dataclass(frozen=True)
class SearchResult:
    design: Design
    criterion_value: CriterionEstimate
    iterations: int
    trace: list = field(default_factory=list)
    accepted_moves: list = field(default_factory=list)


def _evaluate(criterion, design, seed, trace):
    try:
        est = criterion(design, seed)
    except Exception as exc:
        raise CriterionEvaluationError(
            f"criterion evaluator failed: {exc}",
            partial=list(trace)) from exc
    if not isinstance(est, CriterionEstimate):
        est = CriterionEstimate(float(est))
    return est


def _single_start(criterion, grid: CandidateGrid, n_points: int,
                  max_passes: int, seed: int, rng) -> SearchResult:
    pts = rng.choice(grid.points, size=n_points, replace=True)
    trace = []
    moves = []
    incumbent = grid.design(np.sort(pts))
    best = _evaluate(criterion, incumbent, substream_seed(seed, 0), trace)
    iteration = 0
    trace.append((iteration, best.value))
    for pass_idx in range(1, max_passes + 1):
        pass_seed = substream_seed(seed, pass_idx)
        improved = False
        pts = np.array(incumbent.points)
        # re-anchor the incumbent under this pass's seed so comparisons
        # against candidates share draws
        best = _evaluate(criterion, incumbent, pass_seed, trace)
        for i in range(n_points):
            cand_best, cand_val = None, None
            for g in grid.points:
                if g == pts[i]:
                    continue
                trial_pts = pts.copy()
                trial_pts[i] = g
                trial = grid.design(np.sort(trial_pts))
                est = _evaluate(criterion, trial, pass_seed, trace)
                if cand_val is None or est.value > cand_val.value:
                    cand_best, cand_val = trial_pts, est
            if cand_val is None:
                continue
            tol = max(1e-9, 0.5 * max(best.standard_error, cand_val.standard_error))
            if cand_val.value > best.value + tol:
                pts = cand_best
                incumbent = grid.design(np.sort(pts))
                best = cand_val
                improved = True
                iteration += 1
                trace.append((iteration, best.value))
                moves.append((pass_idx, float(pts[i]), best.value,
                              best.standard_error))
        if not improved:
            return SearchResult(incumbent, best, pass_idx, trace, moves)
    return SearchResult(incumbent, best, max_passes, trace, moves)


def substream_seed(seed: int, pass_idx: int) -> int:
    """Stable per-pass seed so all candidates in a pass share draws."""
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF,
                                       pass_idx]).generate_state(1)[0])


def exchange_optimize(criterion, grid: CandidateGrid, n_points: int,
                      max_passes: int = 20, seed: int = 0,
                      n_restarts: int = 5) -> SearchResult:
    """Greedy one-point exchange over the candidate grid, best of restarts.

    Starts from uniformly drawn grid points, repeatedly replaces the design
    point whose best grid substitute most improves the criterion, and stops
    after a pass with no improvement beyond ``max(1e-9, 0.5 se)``.  Ties keep
    the incumbent.
    """
    if n_points < 1:
        raise DomainError("n_points must be at least 1")
    best = None
    for r in range(max(1, n_restarts)):
        rng = substream(seed, "restart", r)
        result = _single_start(criterion, grid, n_points, max_passes,
                               substream_seed(seed, 10_000 + r), rng)
        if best is None or result.criterion_value.value > best.criterion_value.value:
            best = result
    return best


def constrained_select(criterion, menu, seed: int = 0) -> SearchResult:
    """Evaluate every design in the menu under one seed; argmax, first-index ties."""
    menu = list(menu)
    if not menu:
        raise DomainError("menu must be nonempty")
    shared = substream_seed(seed, 0)
    trace = []
    best_idx, best_est = 0, None
    for i, design in enumerate(menu):
        est = _evaluate(criterion, design, shared, trace)
        trace.append((i, est.value))
        if best_est is None or est.value > best_est.value:
            best_idx, best_est = i, est
    return SearchResult(menu[best_idx], best_est, len(menu), trace,
                        [(0, best_idx, best_est.value, best_est.standard_error)])
