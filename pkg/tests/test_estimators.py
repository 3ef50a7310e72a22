"""Tests for the scikit-learn style facility-location selector."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from robust_submod import (FacilityLocationSelector, aggregate_oracle,
                           distance_matrix, facility_tasks, greedy,
                           make_distribution, synthetic_embeddings)
from robust_submod.objective import AggregateMode
from robust_submod.solvers import SaturationConfig, saturate_with_preference


def small_x(n=18, dim=5, seed=0):
    return synthetic_embeddings(count=n, dim=dim, seed=seed)


class TestFit:
    def test_basic_fit_attributes(self):
        x = small_x()
        sel = FacilityLocationSelector(n_select=4, random_state=0).fit(x)
        assert sel.selected_indices_.shape == (4,)
        assert sorted(sel.selected_indices_) == list(sel.selected_indices_)
        assert sel.selection_mask_ == sum(1 << int(i) for i in sel.selected_indices_)
        assert sel.n_features_in_ == 5
        assert sel.n_evaluations_ > 0
        assert np.isfinite(sel.objective_value_)

    def test_greedy_solver_matches_direct_call(self):
        x = small_x(seed=1)
        sel = FacilityLocationSelector(n_select=3, objective="weighted_average",
                                       solver="greedy").fit(x)
        family = facility_tasks(distance_matrix(x))
        q = make_distribution(np.ones(18))
        direct = greedy(aggregate_oracle(family, AggregateMode.WEIGHTED_AVG, q),
                        18, 3)
        assert sel.selection_mask_ == direct.selection
        assert sel.objective_value_ == direct.objective_value

    def test_shifted_min_routes_to_saturate(self):
        x = small_x(seed=2)
        sel = FacilityLocationSelector(n_select=4, objective="shifted_min",
                                       lam=0.05, alpha=1.0).fit(x)
        family = facility_tasks(distance_matrix(x))
        q = make_distribution(np.ones(18))
        direct = saturate_with_preference(
            family, 4, SaturationConfig(lam=0.05, weights=q, alpha=1.0))
        assert sel.selection_mask_ == direct.selection

    def test_random_state_reproducible(self):
        x = small_x(seed=3)
        a = FacilityLocationSelector(n_select=5, random_state=42).fit(x)
        b = FacilityLocationSelector(n_select=5, random_state=42).fit(x)
        assert a.selection_mask_ == b.selection_mask_

    def test_custom_weights(self):
        x = small_x(seed=4)
        w = np.arange(1.0, 19.0)
        sel = FacilityLocationSelector(n_select=3, objective="weighted_average",
                                       solver="greedy", weights=w).fit(x)
        assert sel.selected_indices_.shape == (3,)

    def test_validation_errors(self):
        x = small_x()
        with pytest.raises(ValueError, match="n_select"):
            FacilityLocationSelector(n_select=99).fit(x)
        with pytest.raises(ValueError, match="n_select"):
            FacilityLocationSelector(n_select=2.5).fit(x)
        with pytest.raises(ValueError, match="objective"):
            FacilityLocationSelector(objective="maximin", n_select=2).fit(x)
        with pytest.raises(ValueError, match="solver"):
            FacilityLocationSelector(solver="annealing", n_select=2).fit(x)
        with pytest.raises(ValueError, match="weights"):
            FacilityLocationSelector(n_select=2, weights=np.ones(7)).fit(x)


class TestTransform:
    def test_transform_returns_selected_rows(self):
        x = small_x(seed=5)
        sel = FacilityLocationSelector(n_select=4, random_state=1).fit(x)
        summary = sel.transform(x)
        assert np.array_equal(summary, x[sel.selected_indices_])

    def test_fit_transform(self):
        x = small_x(seed=6)
        sel = FacilityLocationSelector(n_select=3, random_state=0)
        assert np.array_equal(sel.fit_transform(x), x[sel.selected_indices_])

    def test_unfitted_raises(self):
        with pytest.raises(NotFittedError):
            FacilityLocationSelector().transform(small_x())

    def test_feature_mismatch(self):
        sel = FacilityLocationSelector(n_select=2, random_state=0).fit(small_x())
        with pytest.raises(ValueError, match="features"):
            sel.transform(np.zeros((4, 9)))


class TestSklearnProtocol:
    def test_get_set_params_and_clone(self):
        sel = FacilityLocationSelector(n_select=7, lam=0.3, random_state=5)
        params = sel.get_params()
        assert params["n_select"] == 7 and params["lam"] == 0.3
        twin = clone(sel)
        assert twin.get_params() == params
        sel.set_params(epsilon=0.2)
        assert sel.get_params()["epsilon"] == 0.2

    def test_works_in_pipeline(self):
        x = small_x(seed=7)
        pipe = Pipeline([
            ("scale", StandardScaler()),
            ("select", FacilityLocationSelector(n_select=3, random_state=0)),
        ])
        out = pipe.fit_transform(x)
        assert out.shape == (3, 5)
