import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrinvariant.errors import NonpositiveMass, OutOfWindow
from lrinvariant.params import (CaldirolaKanaiParams, OscillatorModel, TimeFunction,
                                eval_gamma, eval_modified_frequency_sq, make_caldirola_kanai)


def test_constant_and_exponential_values():
    f = TimeFunction.constant(2.5)
    assert f.value(3.0) == 2.5
    assert f.derivative(3.0) == 0.0
    g = TimeFunction.exponential(1.5, -0.5)
    assert g.value(2.0) == pytest.approx(1.5 * math.exp(-1.0), rel=1e-15)
    assert g.derivative(2.0) == pytest.approx(-0.75 * math.exp(-1.0), rel=1e-15)


def test_polynomial_derivative():
    f = TimeFunction.polynomial([1.0, -2.0, 3.0])
    np.testing.assert_allclose(f.value(np.array([0.0, 1.0, 2.0])), [1.0, 2.0, 9.0])
    np.testing.assert_allclose(f.derivative(np.array([0.0, 1.0])), [-2.0, 4.0])
    assert TimeFunction.polynomial([4.0]).derivative(1.0) == 0.0


def test_tabulated_reproduces_cubic_exactly():
    # not-a-knot splines are exact for cubics
    ts = np.linspace(0.0, 2.0, 7)
    f = TimeFunction.tabulated(ts, ts ** 3 - ts)
    assert f.window == (0.0, 2.0)
    assert f.value(1.3) == pytest.approx(1.3 ** 3 - 1.3, abs=1e-12)
    assert f.derivative(1.3) == pytest.approx(3 * 1.3 ** 2 - 1, abs=1e-12)
    with pytest.raises(OutOfWindow):
        f.value(2.5)


@pytest.mark.parametrize("times", [[0, 1, 2], [0, 2, 1, 3]])
def test_tabulated_rejects_bad_samples(times):
    with pytest.raises(ValueError):
        TimeFunction.tabulated(times, np.zeros(len(times)))


def test_window_and_mass_checks():
    f = TimeFunction.constant(1.0, window=(0.0, 1.0))
    with pytest.raises(OutOfWindow):
        f.value(1.5)
    bad = OscillatorModel(TimeFunction.polynomial([1.0, -1.0]), TimeFunction.constant(1.0))
    assert bad.mass(0.5) == 0.5
    with pytest.raises(NonpositiveMass):
        bad.mass(2.0)


def test_model_window_is_intersection():
    m = OscillatorModel(TimeFunction.constant(1.0, (0.0, 5.0)), TimeFunction.constant(1.0, (-1.0, 3.0)),
                        TimeFunction.constant(0.0, (1.0, 9.0)))
    assert m.window == (1.0, 3.0)
    assert m.without_y().window == (0.0, 3.0)


def test_reference_modified_frequency(ck_ref, ref_model):
    # Omega^2 = omega^2 + y^2 + gamma y = 1 + 1 + 2
    assert eval_gamma(ref_model, 0.7) == pytest.approx(2.0, rel=1e-15)
    assert eval_modified_frequency_sq(ref_model, 0.7) == pytest.approx(4.0, rel=1e-15)
    assert ck_ref.omega0_sq == 4.0
    assert ck_ref.omega1_sq == 5.0


def test_suppressed_path_matches_zero_y_bitwise():
    ck = CaldirolaKanaiParams(1.3, 0.4, 0.9, 0.0)
    general = make_caldirola_kanai(ck)
    reduced = make_caldirola_kanai(ck, suppress_y=True)
    ts = np.linspace(-1, 2, 11)
    assert eval_modified_frequency_sq(general, ts).tobytes() == eval_modified_frequency_sq(reduced, ts).tobytes()
    assert reduced.y(0.3) == 0.0


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.1, 3.0), b=st.floats(-2.0, 2.0), t=st.floats(-1.0, 1.0))
def test_gamma_of_exponential_mass_is_rate(a, b, t):
    m = OscillatorModel(TimeFunction.exponential(a, b), TimeFunction.constant(1.0))
    assert eval_gamma(m, t) == pytest.approx(b, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-2, 2), min_size=2, max_size=5), t=st.floats(-1, 1))
def test_time_derivative_matches_central_difference(c, t):
    f = TimeFunction.polynomial(c)
    h = 1e-5
    fd = (f.value(t + h) - f.value(t - h)) / (2 * h)
    assert f.derivative(t) == pytest.approx(fd, abs=1e-7)


def test_to_dict_round_trip_fields(ref_model):
    d = ref_model.to_dict()
    assert d["mass"] == {"kind": "exponential", "coefficients": [1.0, 2.0]}
    assert d["y"] == {"kind": "constant", "coefficients": [1.0]}
