"""Probability vectors on the task simplex and the local worst-case map.

The robust objective treats a finite family of tasks as the support of a
reference distribution Q. This module owns the simplex side of the story:
validated distribution vectors, KL divergence, the closed-form local
worst-case distribution for a given regularization strength, the radius
that strength corresponds to, and the geometric reference used by the
online driver.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError

#: Tolerance used when validating that weights sum to one.
SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SimplexDistribution:
    """An immutable probability vector.

    Construct through :func:`make_distribution` unless the weights are
    already normalized; the constructor validates but does not rescale.
    """

    weights: np.ndarray = field()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a nonempty 1-d vector")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if np.any(w < 0.0):
            raise DomainError("weights must be nonnegative")
        total = math.fsum(w.tolist())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise DomainError(f"weights must sum to 1 within {SUM_TOLERANCE}, got {total!r}")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.weights.size)

    def __len__(self) -> int:
        return self.n

    def approx_equal(self, other: "SimplexDistribution", tol: float = 1e-12) -> bool:
        """Entrywise equality within an absolute tolerance."""
        if self.n != other.n:
            return False
        return bool(np.max(np.abs(self.weights - other.weights)) <= tol)

    def to_csv_field(self) -> str:
        """Comma-separated weights with 17 significant digits."""
        return ",".join(f"{w:.17g}" for w in self.weights)

    @classmethod
    def from_csv_field(cls, text: str) -> "SimplexDistribution":
        """Inverse of to_csv_field; bit-exact because no renormalization runs."""
        try:
            weights = [float(tok) for tok in text.split(",")]
        except ValueError as exc:
            raise FormatError(f"not a comma-separated weight list: {text!r}") from exc
        return cls(np.array(weights))


def make_distribution(weights) -> SimplexDistribution:
    """Normalize nonnegative weights into a SimplexDistribution.

    The sum is accumulated with compensated summation so that the
    normalized vector satisfies the sum-to-one invariant as tightly as
    float64 allows.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DomainError("weights must be a nonempty 1-d vector")
    if not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite")
    if np.any(w < 0.0):
        raise DomainError("weights must be nonnegative")
    total = math.fsum(w.tolist())
    if total <= 0.0:
        raise DomainError("weights must have positive sum")
    return SimplexDistribution(w / total)


def kl_divergence(p: SimplexDistribution, q: SimplexDistribution) -> float:
    """KL(P || Q) in nats.

    Terms with p_i = 0 contribute zero. If P puts mass where Q has none
    the divergence is +inf.
    """
    if p.n != q.n:
        raise DomainError(f"dimension mismatch: {p.n} vs {q.n}")
    pw, qw = p.weights, q.weights
    pos = pw > 0.0
    if np.any(qw[pos] == 0.0):
        return math.inf
    terms = pw[pos] * np.log(pw[pos] / qw[pos])
    return max(0.0, math.fsum(terms.tolist()))


def _check_values_weights(values, q: SimplexDistribution, lam: float):
    f = np.asarray(values, dtype=float)
    if f.ndim != 1 or f.size != q.n:
        raise DomainError(f"task values must be a vector of length {q.n}")
    if not np.all(np.isfinite(f)):
        raise DomainError("task values must be finite")
    if not (lam > 0.0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be positive and finite, got {lam!r}")
    return f


def local_worst_case(values, q: SimplexDistribution, lam: float) -> SimplexDistribution:
    """Minimizer P* of <P, f> + lam * KL(P || Q) over the simplex.

    Closed form: P*_i proportional to Q_i * exp(-f_i / lam). The exponent
    is shifted by min f so the computation cannot underflow to an all-zero
    vector.
    """
    f = _check_values_weights(values, q, lam)
    shifted = np.exp(-(f - f.min()) / lam)
    return make_distribution(q.weights * shifted)


def radius_for_lambda(values, q: SimplexDistribution, lam: float) -> float:
    """KL radius of the ball on which P*(lam) is the exact worst case.

    Evaluates R = -log(sum_i Q_i e^{-f_i/lam}) - E_{P*}[f] / lam through
    the min-shifted sums, which equals KL(P* || Q).
    """
    f = _check_values_weights(values, q, lam)
    m = float(f.min())
    w = q.weights * np.exp(-(f - m) / lam)
    total = math.fsum(w.tolist())
    mean_f = math.fsum((w * f).tolist()) / total
    radius = -math.log(total) + (m - mean_f) / lam
    return max(0.0, radius)


def geometric_reference(gamma: float, t_w: int) -> SimplexDistribution:
    """Geometric reference over a window of t_w past objectives.

    Weight (1 - gamma) * gamma^{t_w - t} goes to objective t for
    t = 2..t_w; the oldest objective additionally absorbs the tail,
    Gamma_1 = gamma^{t_w} + (1 - gamma) * gamma^{t_w - 1}. With the
    convention 0**0 = 1, gamma = 0 yields all mass on the newest
    objective and gamma = 1 all mass on the oldest.
    """
    if not (0.0 <= gamma <= 1.0):
        raise DomainError(f"gamma must lie in [0, 1], got {gamma!r}")
    if t_w < 1:
        raise DomainError(f"window length must be >= 1, got {t_w}")
    t = np.arange(1, t_w + 1, dtype=float)
    weights = (1.0 - gamma) * gamma ** (t_w - t)
    weights[0] += gamma ** float(t_w)
    return make_distribution(weights)
