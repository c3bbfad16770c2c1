import math

import pytest
from hypothesis import given, strategies as st

from hiercubes.logreal import (LogReal, log1p_exp, log_expm1, logsumexp_iter)

finite_logs = st.floats(-600.0, 600.0, allow_nan=False)


def test_constructors_and_states():
    assert LogReal.zero().is_zero
    assert LogReal.infinite().is_infinite
    assert LogReal.one().log == 0.0
    assert LogReal.from_float(0.0).is_zero
    assert LogReal.from_float(math.e).log == pytest.approx(1.0)
    with pytest.raises(ValueError):
        LogReal.from_float(-1.0)


@given(finite_logs, finite_logs)
def test_mul_adds_logs(a, b):
    x, y = LogReal.from_log(a), LogReal.from_log(b)
    assert (x * y).log == pytest.approx(a + b)
    assert (x / y).log == pytest.approx(a - b)


def test_quotient_conventions():
    zero, inf, two = LogReal.zero(), LogReal.infinite(), LogReal.from_float(2.0)
    # fractions with infinite denominators are zero, and 0 * inf = 0
    assert (two / inf).is_zero
    assert (zero * inf).is_zero
    assert (inf * zero).is_zero
    assert (two / zero).is_infinite
    assert (inf * two).is_infinite
    with pytest.raises(ZeroDivisionError):
        zero / zero


@given(st.floats(1e-300, 1e300), st.floats(1e-300, 1e300))
def test_add_matches_floats(a, b):
    x = LogReal.from_float(a) + LogReal.from_float(b)
    assert x.log == pytest.approx(math.log(a + b), rel=1e-12)


def test_add_absorbs_states():
    two = LogReal.from_float(2.0)
    assert (two + LogReal.zero()).log == two.log
    assert (two + LogReal.infinite()).is_infinite


def test_float_value_and_overflow():
    assert LogReal.from_log(1000.0).overflows_float
    assert LogReal.from_log(1000.0).float_value() == math.inf
    assert LogReal.zero().float_value() == 0.0
    assert LogReal.from_float(3.0).float_value() == pytest.approx(3.0)


@given(finite_logs)
def test_json_roundtrip_finite(a):
    x = LogReal.from_log(a)
    assert LogReal.from_json_obj(x.to_json_obj()).log == a


def test_json_states():
    assert LogReal.from_json_obj({"state": "zero"}).is_zero
    assert LogReal.from_json_obj({"state": "infinite"}).is_infinite
    assert LogReal.zero().to_json_obj() == {"state": "zero"}
    assert LogReal.infinite().to_json_obj() == {"state": "infinite"}


def test_comparisons():
    assert LogReal.zero() < LogReal.from_float(1e-300) < LogReal.infinite()


@given(st.floats(-700, 700))
def test_log1p_exp_matches_reference(x):
    assert log1p_exp(x) == pytest.approx(math.log1p(math.exp(x))
                                         if x < 500 else x, rel=1e-12)


def test_log1p_exp_no_overflow():
    assert log1p_exp(1e8) == 1e8
    assert log1p_exp(-1e8) == 0.0 or log1p_exp(-1e8) == pytest.approx(0.0)


@given(st.floats(1e-280, 30.0))
def test_log_expm1_matches_reference(x):
    assert log_expm1(x) == pytest.approx(math.log(math.expm1(x)), rel=1e-10)


def test_log_expm1_deep_tail():
    # for tiny x, log(e^x - 1) = log(x) + x/2 + O(x^2)
    x = 1e-200
    assert log_expm1(x) == pytest.approx(math.log(x), rel=1e-12)
    assert log_expm1(50.0) == pytest.approx(50.0, abs=1e-12)


def test_logsumexp_iter():
    terms = [math.log(1.0), math.log(2.0), math.log(3.0)]
    assert logsumexp_iter(terms) == pytest.approx(math.log(6.0))
    assert logsumexp_iter([]) == -math.inf
    assert logsumexp_iter([-math.inf, 0.0]) == pytest.approx(0.0)
    # huge spread: the small term must not poison the result
    assert logsumexp_iter([0.0, -1e6]) == pytest.approx(0.0)
