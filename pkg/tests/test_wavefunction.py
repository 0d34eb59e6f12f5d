import numpy as np
import pytest

from lrinvariant.errors import OutOfWindow
from lrinvariant.ermakov import solve_rho
from lrinvariant.operators import GridSpec, apply_invariant
from lrinvariant.params import OscillatorModel, TimeFunction
from lrinvariant.verify import gaussian_frame, interior_relative
from lrinvariant.wavefunction import (PacketSpec, _phase_integral, ck_solution_frame,
                                      continuum_norm, eigenfunction_frame, exact_solution_frame,
                                      gauss_legendre, packet_weights, phase_alpha,
                                      synthesize_packet, table_extent)


def test_phase_for_exponential_mass(ck_ref, ref_model, ref_ermakov):
    # M rho^2 = 1 / Omega1, so alpha = -lam Omega1 t / hbar
    assert phase_alpha(2.0, ref_model, ref_ermakov, 0.4) == pytest.approx(-2.0 * np.sqrt(5) * 0.4, rel=1e-12)
    assert phase_alpha(0.0, ref_model, ref_ermakov, 0.4) == 0.0


def test_phase_for_numerical_rho():
    model = OscillatorModel(TimeFunction.polynomial([1.0, 0.3]), TimeFunction.constant(0.8),
                            TimeFunction.constant(0.2))
    er = solve_rho(model, t_span=(0.0, 1.0))
    with pytest.raises(OutOfWindow):
        phase_alpha(1.0, model, er, 1.5)
    # trapezoid oracle on a fine sampling
    ts = np.linspace(0, 1, 20001)
    f = 1.0 / (model.mass(ts) * er.rho(ts) ** 2)
    ref = np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(ts))
    assert _phase_integral(model, er, 1.0) == pytest.approx(ref, rel=1e-8)


def test_routes_agree(ck_ref, ref_model, ref_ermakov, narrow_grid):
    for lam in (-2.0, 1.0):
        a = ck_solution_frame(lam, (1.0, 0.3j), ck_ref, narrow_grid, 0.3).values
        b = exact_solution_frame(lam, (1.0, 0.3j), ref_model, ref_ermakov, narrow_grid, 0.3).values
        assert np.max(np.abs(a - b)) < 1e-10


@pytest.mark.parametrize("lam", [-2.0, 0.0, 3.0])
def test_eigenvalue_equation(lam, ref_model, ref_ermakov, narrow_grid):
    f = eigenfunction_frame(lam, (0.4, 1.0), ref_model, ref_ermakov, narrow_grid, 0.2)
    i_f = apply_invariant(ref_model, ref_ermakov, f, None).values
    assert interior_relative(i_f - lam * f.values, i_f if lam else f.values, narrow_grid) < 2e-5


def test_eigenfunction_at_origin(ck_ref):
    # varphi(0) = 1 for the even branch, so phi(0, 0) = rho(0)^(-1/2) = 5^(1/8)
    g = GridSpec(-2.0, 2.0, 4097)
    f = ck_solution_frame(1.0, (1.0, 0.0), ck_ref, g, 0.0)
    assert f.values[2048] == pytest.approx(5 ** 0.125, rel=1e-14)


def test_table_extent_ladder():
    assert table_extent(0.1) == 8.0
    assert table_extent(7.9) == 8.0
    assert table_extent(8.01) == 16.0


def test_continuum_norm_values():
    # at lam = 0 the even constant is hbar^(3/2) / sqrt(2) * pi * sqrt(2) / W(0, 0)^2
    ne, no = continuum_norm(np.array([0.0, 1.0]), 1.0)
    assert ne[0] == pytest.approx(np.pi / 1.046049620053101649, rel=1e-12)
    assert no[0] == pytest.approx(4 * np.pi * 1.046049620053101649, rel=1e-12)
    ne2, no2 = continuum_norm(np.array([0.0, 2.0]), 2.0)
    np.testing.assert_allclose(ne2, 2 ** 1.5 * ne, rtol=1e-14)
    np.testing.assert_allclose(no2, 2 ** 1.5 * no, rtol=1e-14)


def test_packet_round_trip_64_nodes(ref_model, ref_ermakov):
    g = GridSpec(-10, 10, 1024)
    f = gaussian_frame(g)
    nodes, w = gauss_legendre(-10, 10, 64)
    spec = packet_weights(f, nodes, ref_model, ref_ermakov, lambda_weights=w)
    assert spec.tail_estimate < 1e-3
    out = synthesize_packet(spec, ref_model, ref_ermakov, g, 0.0, workers=2)
    assert interior_relative(out.values - f.values, f.values, g) < 0.02
    # the even Gaussian has no odd content
    assert np.max(np.abs(spec.c_odd)) < 1e-10 * np.max(np.abs(spec.c_even))


def test_packet_validation(ref_model, ref_ermakov):
    g = GridSpec(-10, 10, 256)
    with pytest.raises(ValueError):
        packet_weights(gaussian_frame(g, t=0.5), [0.0, 1.0], ref_model, ref_ermakov)
    with pytest.raises(ValueError):
        PacketSpec([1.0, 0.0], [1, 1], [0, 0], [0, 0])
