"""Evidence functions.

An evidence function ``V`` is a concave map of the Bayes factor ``z`` that
measures the support the data lend to the null hypothesis.  Test-information
criteria are built from the drop ``V(1) - V(z)``.  Built-in kinds:

``log``
    ``V(z) = log z``.  Gives Kullback-Leibler style criteria.
``posterior-prior-ratio``
    ``V(z) = z / (pi1 + pi0 z)``, the posterior-to-prior probability ratio of
    the null.  Prior-dependent; treats the hypotheses symmetrically.
``symmetrized-kl``
    ``V(z) = (log z - z log z) / 2``.  Symmetric but with ``V'(1) = 0``.
``custom``
    Any user-supplied concave evaluator, registered as a named preset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateEvidenceError, DomainError

__all__ = [
    "EvidenceFunction",
    "SymmetryCheck",
    "check_symmetry",
    "check_concavity",
    "conversion_number",
    "evidence_from_config",
    "register_preset",
    "CUSTOM_PRESETS",
]

LOG = "log"
POSTERIOR_PRIOR = "posterior-prior-ratio"
SYMMETRIZED_KL = "symmetrized-kl"
CUSTOM = "custom"

_KINDS = (LOG, POSTERIOR_PRIOR, SYMMETRIZED_KL, CUSTOM)

# central-difference step for derivatives of custom evaluators near z = 1
_FD_STEP = 1e-5
# |V'(1)| below this is treated as a degenerate (Theorem-1-inapplicable) case
_DEGENERATE_TOL = 1e-6


@dataclass(frozen=True)
class EvidenceFunction:
    """A concave evidence map with optional prior-probability context.

    ``prior0`` is required only by prior-dependent kinds; ``evaluator`` only
    by the custom kind.  Instances are immutable and safe to share across
    threads.
    """

    kind: str
    prior0: Optional[float] = None
    evaluator: Optional[Callable] = None
    preset: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown evidence kind {self.kind!r}")
        if self.kind == POSTERIOR_PRIOR:
            if self.prior0 is None or not 0.0 < self.prior0 < 1.0:
                raise DomainError("posterior-prior-ratio kind needs prior0 in (0, 1)")
        if self.kind == CUSTOM and self.evaluator is None:
            raise DomainError("custom kind needs an evaluator")

    @property
    def prior1(self) -> Optional[float]:
        return None if self.prior0 is None else 1.0 - self.prior0

    def swapped(self) -> "EvidenceFunction":
        """Evidence function with the hypothesis roles exchanged.

        Swapping exchanges the prior probabilities; prior-free kinds are
        unchanged.
        """
        if self.prior0 is None:
            return self
        return replace(self, prior0=self.prior1)

    # -- evaluation ------------------------------------------------------

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0.0) or np.any(~np.isfinite(z)):
            raise DomainError("evidence functions are defined for finite z > 0")
        return self._eval(z)

    def _eval(self, z):
        if self.kind == LOG:
            return np.log(z)
        if self.kind == POSTERIOR_PRIOR:
            return z / (self.prior1 + self.prior0 * z)
        if self.kind == SYMMETRIZED_KL:
            lz = np.log(z)
            return 0.5 * lz - 0.5 * z * lz
        return np.asarray(self.evaluator(z), dtype=float)

    def value_from_log(self, log_z):
        """Evaluate ``V(exp(log_z))`` without forming huge Bayes factors.

        Bayes factors routinely span hundreds of orders of magnitude; criteria
        compose ``V`` with log-domain engines through this entry point.
        Accepts ``-inf``/``+inf`` as genuine limits.
        """
        log_z = np.asarray(log_z, dtype=float)
        if self.kind == LOG:
            return log_z.copy()
        if self.kind == POSTERIOR_PRIOR:
            # z/(pi1 + pi0 z) = exp(log z - logaddexp(log pi1, log pi0 + log z))
            with np.errstate(invalid="ignore"):
                out = np.exp(log_z - np.logaddexp(np.log(self.prior1),
                                                  np.log(self.prior0) + log_z))
            # +inf log z -> 1/pi0 limit
            out = np.where(np.isposinf(log_z), 1.0 / self.prior0, out)
            return out
        if self.kind == SYMMETRIZED_KL:
            with np.errstate(over="ignore", invalid="ignore"):
                out = 0.5 * log_z * (1.0 - np.exp(log_z))
            out = np.where(np.isposinf(log_z), -np.inf, out)
            out = np.where(np.isneginf(log_z), -np.inf, out)
            return out
        with np.errstate(over="ignore"):
            return np.asarray(self.evaluator(np.exp(log_z)), dtype=float)

    def at_one(self) -> float:
        return float(self._eval(np.asarray(1.0)))

    # -- derivatives at z = 1 --------------------------------------------

    def derivatives_at_one(self) -> tuple[float, float]:
        """``(V'(1), V''(1))``, analytic for built-ins, central FD otherwise."""
        if self.kind == LOG:
            return 1.0, -1.0
        if self.kind == POSTERIOR_PRIOR:
            return self.prior1, -2.0 * self.prior0 * self.prior1
        if self.kind == SYMMETRIZED_KL:
            return 0.0, -1.0
        h = _FD_STEP
        vm, v0, vp = (float(self._eval(np.asarray(x))) for x in (1 - h, 1.0, 1 + h))
        return (vp - vm) / (2 * h), (vp - 2 * v0 + vm) / h**2


@dataclass(frozen=True)
class SymmetryCheck:
    """Outcome of a symmetry-condition test on a grid."""

    passed: bool
    max_deviation: float
    indeterminate: tuple = field(default_factory=tuple)


def check_symmetry(v: EvidenceFunction, grid, tol: float = 1e-9) -> SymmetryCheck:
    """Test the hypothesis-symmetry condition ``V(z;H0,H1)/V(1/z;H1,H0) = z``.

    Grid points where the denominator vanishes are reported as indeterminate
    and excluded from the deviation.  Tolerance is relative to ``max(1, z)``.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise DomainError("symmetry check needs a nonempty grid")
    if np.any(grid <= 0):
        raise DomainError("symmetry grid must be positive")
    swapped = v.swapped()
    num = v(grid)
    den = swapped(1.0 / grid)
    bad = den == 0.0
    dev = np.zeros_like(grid)
    ok = ~bad
    dev[ok] = np.abs(num[ok] / den[ok] - grid[ok])
    max_dev = float(dev[ok].max()) if ok.any() else 0.0
    scale = np.maximum(1.0, np.abs(grid[ok])) if ok.any() else np.asarray([1.0])
    passed = bool(np.all(dev[ok] <= tol * scale)) if ok.any() else True
    return SymmetryCheck(passed, max_dev, tuple(grid[bad].tolist()))


def check_concavity(v: EvidenceFunction, grid, tol: float = 1e-9) -> bool:
    """Check ``V(la + (1-l)b) >= l V(a) + (1-l) V(b)`` on consecutive triples."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3:
        raise DomainError("concavity check needs at least 3 grid points")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("concavity grid must be sorted ascending")
    lams = np.array([0.25, 0.5, 0.75])
    a = grid[:-2]
    b = grid[2:]
    va, vb = v(a), v(b)
    for lam in lams:
        mid = v(lam * a + (1 - lam) * b)
        bound = lam * va + (1 - lam) * vb
        scale = np.maximum(1.0, np.maximum(np.abs(va), np.abs(vb)))
        if np.any(mid < bound - tol * scale):
            return False
    return True


def conversion_number(v: EvidenceFunction) -> float:
    """Relative conversion number ``c = -V''(1) / V'(1)``.

    ``c`` weights missing Fisher information against observed Fisher
    information in the small-separation limit of the fraction of observed
    test information.  Raises :class:`DegenerateEvidenceError` when
    ``V'(1) = 0`` (the limit does not apply).
    """
    d1, d2 = v.derivatives_at_one()
    if abs(d1) <= _DEGENERATE_TOL:
        raise DegenerateEvidenceError(
            f"evidence kind {v.kind!r} is degenerate at one: V'(1) = {d1:.3g}"
        )
    return -d2 / d1


# -- named custom presets (config never parses expressions) ---------------

def _sqrt_shift(z):
    return np.sqrt(z) - 1.0


def _neg_squared_log(z):
    # classic non-concave example: variance-of-log-Bayes-factor style measure
    return -np.log(z) ** 2


CUSTOM_PRESETS: dict[str, Callable] = {
    "sqrt-shift": _sqrt_shift,
    "neg-squared-log": _neg_squared_log,
}


def register_preset(name: str, evaluator: Callable) -> None:
    """Register a named custom evaluator for config-driven construction."""
    CUSTOM_PRESETS[name] = evaluator


def evidence_from_config(kind: str, prior0=None, preset=None) -> EvidenceFunction:
    """Build an evidence function from flat config values.

    Custom evaluators are available by preset name only; there is no runtime
    expression parsing.
    """
    if kind == CUSTOM:
        if preset is None or preset not in CUSTOM_PRESETS:
            known = ", ".join(sorted(CUSTOM_PRESETS))
            raise DomainError(f"custom evidence needs a preset name from: {known}")
        return EvidenceFunction(CUSTOM, prior0=prior0,
                                evaluator=CUSTOM_PRESETS[preset], preset=preset)
    return EvidenceFunction(kind, prior0=prior0)
