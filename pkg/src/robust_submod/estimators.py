"""scikit-learn style selectors built on the robust solvers."""

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from .imgsum import distance_matrix, facility_tasks
from .objective import AggregateMode, aggregate_oracle
from .simplex import make_distribution
from .solvers import (SaturationConfig, greedy, lazy_greedy,
                      saturate_with_preference, stochastic_greedy)


class FacilityLocationSelector(BaseEstimator, TransformerMixin):
    """Select a robust representative subset of the rows of X.

    Each row is simultaneously a candidate and a task (facility location
    under min-max normalized cosine distance); the selector maximizes an
    aggregate of the per-row utilities subject to |S| <= n_select.

    Parameters
    ----------
    n_select : int, default=10
        Number of rows to pick (fewer if marginal gains hit zero first).
    objective : {"kl_robust", "weighted_average", "shifted_min"}, default="kl_robust"
        Aggregate to maximize. "shifted_min" routes to the
        saturate-with-preference solver; the other two to a greedy-family
        solver.
    solver : {"stochastic_greedy", "greedy", "lazy_greedy"}, default="stochastic_greedy"
        Solver for the greedy-family objectives (ignored for "shifted_min").
    lam : float, default=0.1
        Robustness strength (KL regularization, or preference shift for
        "shifted_min").
    weights : array-like of shape (n_samples,) or None, default=None
        Reference distribution over tasks; None means uniform.
    epsilon : float, default=0.1
        Accuracy knob of stochastic greedy (sets the per-round sample size).
    alpha : float, default=1.0
        Cardinality slack of the saturate solver.
    random_state : int, RandomState instance or None, default=None
        Seeds stochastic greedy.

    Attributes
    ----------
    selected_indices_ : ndarray of sorted selected row indices
    selection_mask_ : int, bitmask form of the selection
    objective_value_ : float, aggregate value at the selection
    n_evaluations_ : int, oracle evaluations spent by the solver
    n_features_in_ : int
    """

    def __init__(self, n_select: int = 10, objective: str = "kl_robust",
                 solver: str = "stochastic_greedy", lam: float = 0.1, weights=None,
                 epsilon: float = 0.1, alpha: float = 1.0, random_state=None):
        self.n_select = n_select
        self.objective = objective
        self.solver = solver
        self.lam = lam
        self.weights = weights
        self.epsilon = epsilon
        self.alpha = alpha
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        n = X.shape[0]
        if not isinstance(self.n_select, numbers.Integral) or not 0 <= self.n_select <= n:
            raise ValueError(f"n_select must be an integer in [0, {n}], got {self.n_select!r}")
        family = facility_tasks(distance_matrix(X))
        q = make_distribution(np.ones(n) if self.weights is None else self.weights)
        if q.n != n:
            raise ValueError(f"weights must have length {n}, got {q.n}")

        if self.objective == "shifted_min":
            config = SaturationConfig(lam=self.lam, weights=q, alpha=self.alpha)
            result = saturate_with_preference(family, int(self.n_select), config)
        elif self.objective in ("kl_robust", "weighted_average"):
            mode = (AggregateMode.KL_ROBUST if self.objective == "kl_robust"
                    else AggregateMode.WEIGHTED_AVG)
            lam = self.lam if mode is AggregateMode.KL_ROBUST else None
            oracle = aggregate_oracle(family, mode, q, lam)
            if self.solver == "greedy":
                result = greedy(oracle, n, int(self.n_select))
            elif self.solver == "lazy_greedy":
                result = lazy_greedy(oracle, n, int(self.n_select))
            elif self.solver == "stochastic_greedy":
                seed = check_random_state(self.random_state).randint(2 ** 31)
                result = stochastic_greedy(oracle, n, int(self.n_select),
                                           epsilon=self.epsilon, seed=seed)
            else:
                raise ValueError(f"unknown solver {self.solver!r}")
        else:
            raise ValueError(f"unknown objective {self.objective!r}")

        self.selection_mask_ = result.selection
        self.selected_indices_ = np.array(result.indices, dtype=int)
        self.objective_value_ = result.objective_value
        self.n_evaluations_ = result.evaluations
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Rows of X at the selected indices (the summary itself when X is
        the fitted matrix)."""
        check_is_fitted(self, "selected_indices_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X[self.selected_indices_]

    def _more_tags(self):
        return {"requires_y": False}
