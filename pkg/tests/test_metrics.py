import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftlearn.errors import ArgumentError, ValidationError
from driftlearn.metrics import (
    UNDEFINED_RATIO,
    cl_score,
    forgetting_ratio,
    regression_errors,
    uniform_weights,
)


def test_perfect_predictions_zero_errors():
    out = regression_errors([1.0, 2.0], [1.0, 2.0])
    assert out == {"mse": 0.0, "rmse": 0.0, "mae": 0.0}


def test_unit_errors():
    out = regression_errors([0.0, 0.0], [1.0, 1.0])
    assert out["mse"] == 1.0 and out["rmse"] == 1.0 and out["mae"] == 1.0


def test_half_error():
    out = regression_errors([0.5], [1.0])
    assert out["mse"] == pytest.approx(0.25)
    assert out["rmse"] == pytest.approx(0.5)
    assert out["mae"] == pytest.approx(0.5)


def test_length_mismatch_and_empty():
    with pytest.raises(ArgumentError):
        regression_errors([1.0], [1.0, 2.0])
    with pytest.raises(ArgumentError):
        regression_errors([], [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50),
       st.integers(0, 2**31 - 1))
def test_metric_identities(preds, seed):
    truths = np.random.default_rng(seed).uniform(-1e3, 1e3, len(preds))
    out = regression_errors(preds, truths)
    assert out["rmse"] ** 2 == pytest.approx(out["mse"], abs=1e-12 * max(1, out["mse"]))
    assert out["mae"] <= out["rmse"] + 1e-12


def test_forgetting_ratio_worked_examples():
    assert forgetting_ratio(0.10, 0.12) == pytest.approx(0.2)
    assert forgetting_ratio(0.10, 0.08) == pytest.approx(-0.2)
    assert forgetting_ratio(0.0, 0.0) == 0.0
    assert forgetting_ratio(0.0, 0.5) == UNDEFINED_RATIO
    with pytest.raises(ArgumentError):
        forgetting_ratio(-0.1, 0.2)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-9, 1e6))
def test_forgetting_ratio_identity(e):
    assert forgetting_ratio(e, e) == 0.0


def test_cl_score_all_ones():
    comps = {k: 1.0 for k in ("a", "b", "c")}
    out = cl_score(comps, {"a": 0.2, "b": 0.3, "c": 0.5})
    assert out.fused == pytest.approx(1.0)


def test_cl_score_weighted_sum():
    out = cl_score({"x": 0.8, "y": 0.5}, {"x": 0.5, "y": 0.5})
    assert out.fused == pytest.approx(0.65)


def test_cl_score_validation():
    with pytest.raises(ValidationError):
        cl_score({"x": 0.5}, {"x": 0.9})  # weights sum to 0.9
    with pytest.raises(ValidationError):
        cl_score({"x": 1.2}, {"x": 1.0})  # component out of range
    with pytest.raises(ValidationError):
        cl_score({"x": 0.5}, {"y": 1.0})  # key mismatch
    with pytest.raises(ValidationError):
        cl_score({}, {})


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 0.99))
def test_cl_score_monotone_in_components(lo, hi, w):
    lo, hi = sorted((lo, hi))
    weights = {"a": w, "b": 1.0 - w}
    base = cl_score({"a": lo, "b": 0.5}, weights).fused
    raised = cl_score({"a": hi, "b": 0.5}, weights).fused
    assert raised >= base - 1e-12


def test_uniform_weights_sum_to_one():
    w = uniform_weights()
    assert sum(w.values()) == pytest.approx(1.0)
    assert math.isclose(cl_score({k: 0.5 for k in w}, w).fused, 0.5)
