"""Cardinality-constrained maximization routines.

All solvers consume scalar set-function oracles (callables on bitmasks),
memoize oracle values per run, use lowest-index tie-breaking (candidates
are scanned in ascending element order and a candidate must be strictly
better to displace the incumbent), and stop early once the best marginal
gain is no longer positive.
"""

import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .bitset import full_mask, iter_bits, popcount
from .errors import DomainError
from .objective import AggregateMode, TaskFamily, aggregate_oracle
from .simplex import SimplexDistribution, geometric_reference, make_distribution


@dataclass(frozen=True)
class SolverResult:
    """Outcome of one solver run.

    selection is a bitmask over the ground set; evaluations counts
    distinct oracle evaluations (memoized repeats are free); wall_time is
    seconds of the core loop. order is the acquisition sequence for the
    greedy-family solvers and the sorted indices otherwise.
    """

    selection: int
    objective_value: float
    evaluations: int
    wall_time: float
    n_ground: int
    order: tuple[int, ...] = ()

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(iter_bits(self.selection))

    @property
    def size(self) -> int:
        return popcount(self.selection)


class _Memo:
    """Memoizing, counting wrapper around a scalar oracle."""

    __slots__ = ("fn", "cache", "evaluations")

    def __init__(self, fn):
        self.fn = fn
        self.cache: dict[int, float] = {}
        self.evaluations = 0

    def __call__(self, mask: int) -> float:
        v = self.cache.get(mask)
        if v is None:
            v = float(self.fn(mask))
            self.cache[mask] = v
            self.evaluations += 1
        return v


def _check_cardinality(n_ground: int, k: int):
    if n_ground < 0:
        raise DomainError(f"ground set size must be >= 0, got {n_ground}")
    if not 0 <= k <= n_ground:
        raise DomainError(f"cardinality bound must lie in [0, {n_ground}], got {k}")


def greedy(f, n_ground: int, k: int) -> SolverResult:
    """Exact greedy: K rounds of full argmax over the remaining elements."""
    _check_cardinality(n_ground, k)
    memo = _Memo(f)
    start = time.perf_counter()
    selection = 0
    order = []
    current = memo(0)
    for _ in range(k):
        best_e, best_val = -1, -math.inf
        for e in range(n_ground):
            bit = 1 << e
            if selection & bit:
                continue
            val = memo(selection | bit)
            if val > best_val:
                best_e, best_val = e, val
        if best_e < 0 or best_val - current <= 0.0:
            break
        selection |= 1 << best_e
        order.append(best_e)
        current = best_val
    elapsed = time.perf_counter() - start
    return SolverResult(selection, current, memo.evaluations, elapsed, n_ground, tuple(order))


def lazy_greedy(f, n_ground: int, k: int) -> SolverResult:
    """Greedy with lazy (CELF) marginal-gain re-evaluation.

    On submodular oracles this selects exactly the greedy solution
    (stored gains are upper bounds, and the (gain, index) heap order
    reproduces lowest-index tie-breaking) while skipping most oracle
    calls.
    """
    _check_cardinality(n_ground, k)
    memo = _Memo(f)
    start = time.perf_counter()
    selection = 0
    order = []
    current = memo(0)
    heap = []
    for e in range(n_ground):
        heapq.heappush(heap, (-(memo(1 << e) - current), 0, e))
    rounds = 0
    while rounds < k and heap:
        neg_gain, stamp, e = heapq.heappop(heap)
        if stamp < rounds:
            gain = memo(selection | (1 << e)) - current
            heapq.heappush(heap, (-gain, rounds, e))
            continue
        if -neg_gain <= 0.0:
            break
        selection |= 1 << e
        order.append(e)
        current = memo(selection)
        rounds += 1
    elapsed = time.perf_counter() - start
    return SolverResult(selection, current, memo.evaluations, elapsed, n_ground, tuple(order))


def stochastic_greedy(f, n_ground: int, k: int, epsilon: float | None = None,
                      sample_size: int | None = None, seed: int = 0) -> SolverResult:
    """Greedy over a random candidate sample per round.

    The sample size defaults to ceil((n / K) * log(1 / epsilon)), which
    yields a (1 - 1/e - epsilon) guarantee in expectation for submodular
    objectives. An explicit sample_size overrides the formula. Sampling
    the whole ground set degenerates to exact greedy, element for
    element.
    """
    _check_cardinality(n_ground, k)
    if sample_size is None:
        if epsilon is None:
            raise DomainError("either epsilon or sample_size is required")
        if not (0.0 < epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
        if k > 0:
            sample_size = math.ceil((n_ground / k) * math.log(1.0 / epsilon))
    if sample_size is not None and sample_size < 1:
        raise DomainError(f"sample size must be >= 1, got {sample_size}")
    rng = np.random.default_rng(seed)
    memo = _Memo(f)
    start = time.perf_counter()
    selection = 0
    order = []
    current = memo(0)
    remaining = list(range(n_ground))
    for _ in range(k):
        r = min(sample_size, len(remaining))
        if r == len(remaining):
            candidates = remaining
        else:
            candidates = sorted(rng.choice(remaining, size=r, replace=False).tolist())
        best_e, best_val = -1, -math.inf
        for e in candidates:
            val = memo(selection | (1 << e))
            if val > best_val:
                best_e, best_val = e, val
        if best_e < 0 or best_val - current <= 0.0:
            break
        selection |= 1 << best_e
        order.append(best_e)
        current = best_val
        remaining.remove(best_e)
    elapsed = time.perf_counter() - start
    return SolverResult(selection, current, memo.evaluations, elapsed, n_ground, tuple(order))


_BRUTE_FORCE_LIMIT = 5_000_000


def brute_force(f, n_ground: int, k: int) -> SolverResult:
    """Exhaustive search over all subsets of size exactly K.

    Ties resolve to the lexicographically smallest index tuple. Guarded
    by a candidate-count limit; this is a certification tool for small
    instances, not a solver.
    """
    _check_cardinality(n_ground, k)
    if math.comb(n_ground, k) > _BRUTE_FORCE_LIMIT:
        raise DomainError(f"C({n_ground}, {k}) exceeds the exhaustive search limit")
    memo = _Memo(f)
    start = time.perf_counter()
    best_mask, best_val = 0, memo(0) if k == 0 else -math.inf
    for combo in itertools.combinations(range(n_ground), k):
        mask = 0
        for e in combo:
            mask |= 1 << e
        val = memo(mask)
        if val > best_val:
            best_mask, best_val = mask, val
    elapsed = time.perf_counter() - start
    return SolverResult(best_mask, best_val, memo.evaluations, elapsed, n_ground,
                        tuple(iter_bits(best_mask)))


def greedy_partial_cover(fbar, n_ground: int, level: float, tol: float = 1e-9,
                         max_size: int | None = None):
    """Greedily grow a set until fbar reaches the target level.

    Returns (mask, value, evaluations). Stops when the level is reached
    within tol, no candidate has positive gain, the ground set is
    exhausted, or max_size elements have been taken; failing to saturate
    is signaled by value < level - tol.
    """
    if n_ground < 0:
        raise DomainError(f"ground set size must be >= 0, got {n_ground}")
    memo = _Memo(fbar)
    selection = 0
    current = memo(0)
    size = 0
    while current < level - tol and size < n_ground:
        if max_size is not None and size >= max_size:
            break
        best_e, best_val = -1, -math.inf
        for e in range(n_ground):
            bit = 1 << e
            if selection & bit:
                continue
            val = memo(selection | bit)
            if val > best_val:
                best_e, best_val = e, val
        if best_e < 0 or best_val - current <= 0.0:
            break
        selection |= 1 << best_e
        current = best_val
        size += 1
    return selection, current, memo.evaluations


@dataclass(frozen=True)
class SaturationConfig:
    """Knobs for saturate_with_preference.

    lam = 0 removes the preference shift entirely; weights defaults to
    the uniform distribution; bisection_floor defaults to 1 / n_tasks.
    """

    lam: float = 0.0
    weights: SimplexDistribution | None = None
    alpha: float = 1.0
    bisection_floor: float | None = None

    def __post_init__(self):
        if self.lam < 0.0 or not math.isfinite(self.lam):
            raise DomainError(f"lambda must be >= 0 and finite, got {self.lam!r}")
        if self.alpha < 1.0:
            raise DomainError(f"alpha must be >= 1, got {self.alpha!r}")
        if self.bisection_floor is not None and self.bisection_floor <= 0.0:
            raise DomainError("bisection floor must be positive")


def _saturate_bisection(family: TaskFamily, k: int, shift: np.ndarray, alpha: float,
                        floor: float | None) -> SolverResult:
    n_ground, n_tasks = family.n_ground, family.n_tasks
    _check_cardinality(n_ground, k)
    start = time.perf_counter()
    evaluations = 2
    values_full = family.values(full_mask(n_ground)) - shift
    values_empty = family.values(0) - shift
    k_max = float(values_full.min())
    k_min = min(0.0, float(values_empty.min()))
    if floor is None:
        floor = 1.0 / n_tasks
    budget = int(math.floor(alpha * k + 1e-12)) + 1
    best_mask = 0
    while k_max - k_min >= floor:
        level = (k_min + k_max) / 2.0

        def fbar(mask: int) -> float:
            return float(np.mean(np.minimum(family.values(mask) - shift, level)))

        mask, reached, evals = greedy_partial_cover(fbar, n_ground, level, max_size=budget)
        evaluations += evals
        if reached < level - 1e-9 or popcount(mask) > alpha * k:
            k_max = level
        else:
            best_mask = mask
            k_min = level
    objective = float((family.values(best_mask) - shift).min())
    evaluations += 1
    elapsed = time.perf_counter() - start
    return SolverResult(best_mask, objective, evaluations, elapsed, n_ground,
                        tuple(iter_bits(best_mask)))


def saturate_with_preference(family: TaskFamily, k: int, config: SaturationConfig) -> SolverResult:
    """Bisection on the saturation level of the preference-shifted tasks.

    Searches for the largest level c such that a greedily grown set of at
    most alpha * K elements pushes every f_i - lam * Q_i to c, using the
    truncated mean (1/n) sum_i min(f_i - lam * Q_i, c) as the cover
    objective. With lam = 0 this is exactly the classic saturate
    algorithm; lam > 0 demands more utility from high-weight tasks. The
    reported objective value is min_i (f_i(S) - lam * Q_i).
    """
    q = config.weights
    if q is None:
        q = make_distribution(np.ones(family.n_tasks))
    if q.n != family.n_tasks:
        raise DomainError(f"distribution dimension {q.n} != number of tasks {family.n_tasks}")
    shift = config.lam * q.weights
    return _saturate_bisection(family, k, shift, config.alpha, config.bisection_floor)


def ssa(family: TaskFamily, k: int, alpha: float = 1.0,
        bisection_floor: float | None = None) -> SolverResult:
    """Classic saturate (bisection on min_i f_i, no preference shift).

    Kept independent of saturate_with_preference so the lam = 0
    degeneracy can be certified against a second implementation. The
    reported objective value is min_i f_i(S).
    """
    if alpha < 1.0:
        raise DomainError(f"alpha must be >= 1, got {alpha!r}")
    shift = np.zeros(family.n_tasks)
    return _saturate_bisection(family, k, shift, alpha, bisection_floor)


@dataclass(frozen=True)
class OnlineStepRecord:
    step: int
    selection: int
    utility: float
    solve_time: float
    distinct_count: int


def online_tr_driver(objectives, n_ground: int, k: int, t_w: int, gamma: float, lam: float,
                     epsilon: float = 0.1, sample_size: int | None = None,
                     seed: int = 0) -> list[OnlineStepRecord]:
    """Time-robust online subset selection over a stream of objectives.

    The stream is processed in windows of t_w steps. During the first
    window each step is played with its own stochastic-greedy solution
    (warm-up). At the end of each completed window the t_w observed
    objectives are aggregated with the geometric reference (weight decay
    gamma, oldest first) under the KL-robust value with strength lam, a
    single set is solved for, and that set is played for every step of
    the next window. Per-step utility is the current objective at the
    played set; distinct_count tracks the size of the union of all sets
    played so far.
    """
    objectives = list(objectives)
    horizon = len(objectives)
    if t_w < 1:
        raise DomainError(f"window length must be >= 1, got {t_w}")
    if horizon < t_w:
        raise DomainError(f"stream length {horizon} shorter than one window of {t_w}")
    _check_cardinality(n_ground, k)
    gamma_ref = geometric_reference(gamma, t_w)

    def solve(oracle, step: int) -> tuple[int, float]:
        solver_seed = int(np.random.SeedSequence([seed, step]).generate_state(1)[0])
        t0 = time.perf_counter()
        result = stochastic_greedy(oracle, n_ground, k, epsilon=epsilon,
                                   sample_size=sample_size, seed=solver_seed)
        return result.selection, time.perf_counter() - t0

    records = []
    union_mask = 0
    playing = 0
    for t in range(horizon):
        solve_time = 0.0
        if t < t_w:
            playing, solve_time = solve(objectives[t], t)
        played = playing
        utility = float(objectives[t](played))
        union_mask |= played
        if (t + 1) % t_w == 0 and t + 1 < horizon:
            window = objectives[t + 1 - t_w: t + 1]
            family = TaskFamily.from_callables(window, n_ground)
            oracle = aggregate_oracle(family, AggregateMode.KL_ROBUST, gamma_ref, lam)
            playing, window_time = solve(oracle, t)
            solve_time += window_time
        records.append(OnlineStepRecord(t, played, utility, solve_time, popcount(union_mask)))
    return records


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean with a ramp-up: out[i] = mean(series[max(0, i-window+1): i+1]).

    Reporting helper only; experiment CSVs always carry raw values.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("series must be a nonempty 1-d vector")
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)
