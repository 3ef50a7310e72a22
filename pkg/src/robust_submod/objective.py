"""Task families, aggregate objectives, and the KL-robust value.

A task family is an ordered collection of n set functions over one shared
ground set. Aggregates reduce the vector of task values at a subset to a
single scalar:

* ``WEIGHTED_AVG``  sum_i Q_i f_i(S)
* ``WORST_CASE``    min_i f_i(S)
* ``SHIFTED_MIN``   min_i (f_i(S) - lam * Q_i)
* ``KL_ROBUST``     G(S) = -lam * log(sum_i Q_i exp(-f_i(S) / lam))

G is the value of the locally-robust inner problem: minimizing
<P, f(S)> + lam * KL(P || Q) over the simplex. It interpolates between the
worst case (lam -> 0) and the weighted average (lam -> infinity), and
decomposes as G = g(h(S)) with h a normalized monotone submodular surrogate
and g the concave link, which is what the solver guarantees rest on.
"""

import math
from enum import Enum

import numpy as np

from .bitset import full_mask, iter_bits
from .errors import ContractError, DomainError
from .simplex import SimplexDistribution


class AggregateMode(Enum):
    WEIGHTED_AVG = "weighted_avg"
    WORST_CASE = "worst_case"
    SHIFTED_MIN = "shifted_min"
    KL_ROBUST = "kl_robust"


class TaskFamily:
    """Ordered family of task oracles over a shared ground set.

    ``values_fn`` maps a subset bitmask to the length-n vector of task
    values. Families built from vectorized evaluators (facility location,
    satellite utilities) override that single entry point.
    """

    def __init__(self, n_ground: int, n_tasks: int, values_fn):
        if n_ground < 0:
            raise DomainError(f"ground set size must be >= 0, got {n_ground}")
        if n_tasks < 1:
            raise DomainError(f"a task family needs >= 1 task, got {n_tasks}")
        self.n_ground = n_ground
        self.n_tasks = n_tasks
        self._values_fn = values_fn

    @classmethod
    def from_callables(cls, tasks, n_ground: int) -> "TaskFamily":
        tasks = list(tasks)

        def values(mask: int) -> np.ndarray:
            return np.array([f(mask) for f in tasks], dtype=float)

        return cls(n_ground, len(tasks), values)

    def values(self, subset: int) -> np.ndarray:
        """Vector (f_1(S), ..., f_n(S)) for the bitmask S."""
        if subset < 0 or subset >> self.n_ground:
            raise DomainError("subset outside the ground set")
        out = np.asarray(self._values_fn(subset), dtype=float)
        if out.shape != (self.n_tasks,):
            raise ContractError(f"task family returned shape {out.shape}, expected ({self.n_tasks},)")
        return out

    def task(self, i: int):
        """Single-task oracle f_i as a callable on bitmasks."""
        if not 0 <= i < self.n_tasks:
            raise DomainError(f"task index {i} out of range")
        return lambda mask: float(self.values(mask)[i])


def marginal_gain(f, e: int, subset: int) -> float:
    """f(S | {e}) - f(S) for an element e outside the bitmask S."""
    if subset >> e & 1:
        raise ContractError(f"element {e} is already in the subset")
    return float(f(subset | (1 << e))) - float(f(subset))


def _check_q(values: np.ndarray, q: SimplexDistribution):
    if q.n != values.size:
        raise DomainError(f"distribution dimension {q.n} != number of tasks {values.size}")


def weighted_average(values, q: SimplexDistribution) -> float:
    values = np.asarray(values, dtype=float)
    _check_q(values, q)
    return float(np.dot(q.weights, values))


def worst_case(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("empty task value vector")
    return float(values.min())


def shifted_min(values, q: SimplexDistribution, lam: float) -> float:
    """min_i (f_i - lam * Q_i); lam = 0 recovers the plain worst case."""
    values = np.asarray(values, dtype=float)
    _check_q(values, q)
    if lam < 0.0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be >= 0 and finite, got {lam!r}")
    return float(np.min(values - lam * q.weights))


def robust_value(values, q: SimplexDistribution, lam: float) -> float:
    """KL-robust value G of a task value vector.

    Computed as min f - lam * log(sum_i Q_i exp(-(f_i - min f) / lam));
    the shift keeps the exponentials in [0, 1] for any lam.
    """
    values = np.asarray(values, dtype=float)
    _check_q(values, q)
    if not (lam > 0.0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be positive and finite, got {lam!r}")
    if not np.all(np.isfinite(values)):
        raise DomainError("task values must be finite")
    m = float(values.min())
    s = float(np.dot(q.weights, np.exp(-(values - m) / lam)))
    return m - lam * math.log(s)


def surrogate_h(values, q: SimplexDistribution, lam: float) -> float:
    """Submodularity-carrying surrogate h = sum_i Q_i (1 - exp(-f_i / lam)).

    For a family of normalized monotone submodular tasks, h is itself
    normalized (h(empty) = 0), monotone, and submodular; evaluated via
    expm1 so the empty set maps to exactly zero.
    """
    values = np.asarray(values, dtype=float)
    _check_q(values, q)
    if not (lam > 0.0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be positive and finite, got {lam!r}")
    return float(np.dot(q.weights, -np.expm1(-values / lam)))


def link_g(x: float, lam: float) -> float:
    """Concave link g(x) = -lam * log(1 - x) with domain 0 <= x < 1."""
    if not (lam > 0.0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be positive and finite, got {lam!r}")
    if not (0.0 <= x < 1.0):
        raise DomainError(f"link argument must lie in [0, 1), got {x!r}")
    return -lam * math.log1p(-x)


def aggregate_from_values(mode: AggregateMode, values, q: SimplexDistribution | None, lam: float | None) -> float:
    if mode is AggregateMode.WEIGHTED_AVG:
        return weighted_average(values, q)
    if mode is AggregateMode.WORST_CASE:
        return worst_case(values)
    if mode is AggregateMode.SHIFTED_MIN:
        return shifted_min(values, q, lam)
    if mode is AggregateMode.KL_ROBUST:
        return robust_value(values, q, lam)
    raise DomainError(f"unknown aggregate mode {mode!r}")


def aggregate_oracle(family: TaskFamily, mode: AggregateMode, q: SimplexDistribution | None = None,
                     lam: float | None = None):
    """Scalar set-function oracle for an aggregate of a task family."""
    if mode is not AggregateMode.WORST_CASE:
        if q is None:
            raise DomainError(f"aggregate mode {mode.value} requires a reference distribution")
        if q.n != family.n_tasks:
            raise DomainError(f"distribution dimension {q.n} != number of tasks {family.n_tasks}")
    if mode in (AggregateMode.SHIFTED_MIN, AggregateMode.KL_ROBUST) and lam is None:
        raise DomainError(f"aggregate mode {mode.value} requires lambda")

    def oracle(mask: int) -> float:
        return aggregate_from_values(mode, family.values(mask), q, lam)

    return oracle


def normalize_task(f, n_ground: int):
    """Shift and scale a monotone oracle so f(empty) = 0 and f(N) = 1."""
    f_empty = float(f(0))
    f_full = float(f(full_mask(n_ground)))
    span = f_full - f_empty
    if not (span > 0.0 and math.isfinite(span)):
        raise DomainError(f"oracle span f(N) - f(empty) must be positive, got {span!r}")
    return lambda mask: (float(f(mask)) - f_empty) / span


def _submasks(mask: int):
    """All submasks of mask, including 0 and mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def wsc_estimate(f, n_ground: int, sample_budget: int | None = None, seed: int | None = None,
                 zero_tol: float = 1e-12) -> float:
    """Weak-submodularity constant of a monotone set function.

    The constant is the maximum of Delta(e | T) / Delta(e | S) over all
    chains S subset-of T with e outside T. Values <= 1 certify
    submodularity; finite values bound how far curvature arguments
    degrade. Ratios 0/0 are skipped; a zero denominator with a positive
    numerator yields float('inf').

    Without a sample budget the maximum is exact, by enumeration over all
    (S, T, e) chains; the ground set is capped at 14 elements in that
    mode. With a budget, that many random chains are sampled and a lower
    bound is returned.

    Raises ContractError if a negative marginal (beyond zero_tol) reveals
    the oracle is not monotone.
    """
    if n_ground < 1:
        raise DomainError("ground set must be nonempty")

    if sample_budget is None:
        if n_ground > 14:
            raise DomainError(f"exhaustive mode supports at most 14 elements, got {n_ground}")
        table = np.empty(1 << n_ground, dtype=float)
        for mask in range(1 << n_ground):
            table[mask] = float(f(mask))
        best = 0.0
        for t_mask in range(1 << n_ground):
            outside = full_mask(n_ground) & ~t_mask
            if not outside:
                continue
            for e in iter_bits(outside):
                bit = 1 << e
                num = table[t_mask | bit] - table[t_mask]
                if num < -zero_tol:
                    raise ContractError(f"negative marginal {num!r} at element {e}: oracle is not monotone")
                for s_mask in _submasks(t_mask):
                    den = table[s_mask | bit] - table[s_mask]
                    if den < -zero_tol:
                        raise ContractError(f"negative marginal {den!r} at element {e}: oracle is not monotone")
                    if abs(den) <= zero_tol:
                        if num > zero_tol:
                            return math.inf
                        continue
                    best = max(best, num / den)
        return best

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(sample_budget):
        e = int(rng.integers(n_ground))
        others = [i for i in range(n_ground) if i != e]
        in_t = rng.random(len(others)) < 0.5
        t_mask = 0
        for i, flag in zip(others, in_t):
            if flag:
                t_mask |= 1 << i
        s_mask = 0
        for i in iter_bits(t_mask):
            if rng.random() < 0.5:
                s_mask |= 1 << i
        bit = 1 << e
        num = float(f(t_mask | bit)) - float(f(t_mask))
        den = float(f(s_mask | bit)) - float(f(s_mask))
        if num < -zero_tol or den < -zero_tol:
            raise ContractError("negative marginal: oracle is not monotone")
        if abs(den) <= zero_tol:
            if num > zero_tol:
                return math.inf
            continue
        best = max(best, num / den)
    return best
