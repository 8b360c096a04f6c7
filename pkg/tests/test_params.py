import numpy as np
import pytest
from hypothesis import given, strategies as st

from emkit import ParamVec, StoppingRule
from emkit.errors import InvalidParameterError


def make_vec():
    return ParamVec(
        np.array([0.3, 0.7, -1.0, 2.0]),
        (("weights", 0, 2), ("comp1", 2, 4)),
    )


def test_block_access():
    v = make_vec()
    assert np.array_equal(v.block("weights"), [0.3, 0.7])
    assert np.array_equal(v.block("comp1"), [-1.0, 2.0])
    assert v.block_names() == ["weights", "comp1"]
    assert v.coord_names() == ["weights[0]", "weights[1]", "comp1[0]", "comp1[1]"]


def test_with_block_replaces_only_that_block():
    v = make_vec()
    w = v.with_block("comp1", np.array([5.0, 6.0]))
    assert np.array_equal(w.block("comp1"), [5.0, 6.0])
    assert np.array_equal(w.block("weights"), v.block("weights"))
    assert np.array_equal(v.block("comp1"), [-1.0, 2.0])  # original untouched


def test_blocks_must_cover_values():
    with pytest.raises(InvalidParameterError):
        ParamVec(np.zeros(3), (("a", 0, 2),))
    with pytest.raises(InvalidParameterError):
        ParamVec(np.zeros(3), (("a", 0, 2), ("b", 1, 3)))


def test_non_finite_rejected():
    with pytest.raises(InvalidParameterError):
        ParamVec(np.array([1.0, np.nan]), (("a", 0, 2),))


def test_sup_distance():
    v = make_vec()
    w = v.with_values(v.values + np.array([0.0, 0.0, 0.5, -0.25]))
    assert v.sup_distance(w) == 0.5


def test_equality_and_copy():
    v = make_vec()
    assert v == v.copy()
    assert v != v.with_values(v.values + 1)


def test_stopping_rule_any_vs_all():
    any_rule = StoppingRule(10, tol_param=1e-3, tol_loglik=1e-3, mode="any")
    all_rule = StoppingRule(10, tol_param=1e-3, tol_loglik=1e-3, mode="all")
    assert any_rule.satisfied(d_loglik=1e-4, d_param=1.0)
    assert not all_rule.satisfied(d_loglik=1e-4, d_param=1.0)
    assert all_rule.satisfied(d_loglik=1e-4, d_param=1e-4)


def test_stopping_rule_validation():
    with pytest.raises(InvalidParameterError):
        StoppingRule(0)
    with pytest.raises(InvalidParameterError):
        StoppingRule(10, mode="sometimes")


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8))
def test_with_values_round_trip(values):
    arr = np.array(values)
    v = ParamVec(arr, (("a", 0, len(arr)),))
    assert v.with_values(arr.copy()) == v
    assert v.sup_distance(v) == 0.0
