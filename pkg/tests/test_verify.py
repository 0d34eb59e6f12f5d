import math

import numpy as np
import pytest

from lrinvariant.operators import GridSpec, WavefunctionFrame
from lrinvariant.params import CaldirolaKanaiParams, OscillatorModel, TimeFunction, make_caldirola_kanai
from lrinvariant.propagator import PropagationRun, propagate
from lrinvariant.verify import (ResidualReport, ScaledErmakov, ck_family, classical_solve,
                                ehrenfest_check, gauge_identity_check, gaussian_frame,
                                invariant_drift, summary_table, tdse_residual, weber_fd_residual,
                                weber_parity_error)
from lrinvariant import weber


def test_report_pass_semantics():
    assert ResidualReport("a", "max", 1e-9, 1e-8).passed
    assert not ResidualReport("a", "max", 1e-7, 1e-8).passed
    assert ResidualReport("m", "max", 1.0, 1e-2, "exceed").passed
    assert not ResidualReport("m", "max", 1e-3, 1e-2, "exceed").passed
    assert not ResidualReport("n", "max", math.nan, 1.0).passed
    with pytest.raises(ValueError):
        ResidualReport("x", "L1", 0.0, 1.0)


def test_tdse_residual_and_phase_mutation(ck_ref, ref_model, narrow_grid):
    good = tdse_residual(ck_family(1.0, (1.0, 0.0), ck_ref, narrow_grid), ref_model, 0.3)
    bad = tdse_residual(ck_family(1.0, (1.0, 0.0), ck_ref, narrow_grid, flip_phase=True), ref_model, 0.3)
    assert good.passed and good.value < 1e-5
    assert bad.value > 1e-2


def test_tdse_residual_of_zero_family(ref_model):
    g = GridSpec(-3, 3, 64)
    rep = tdse_residual(lambda t: WavefunctionFrame(g, t, np.zeros(64)), ref_model, 0.2)
    assert rep.value == 0.0


def test_tdse_residual_converges_second_order():
    # y0 = 1 reference model, refine spacing and dt_fd together
    ck = CaldirolaKanaiParams(1.0, 2.0, 1.0, 1.0)
    model = make_caldirola_kanai(ck)
    vals = []
    for n, dt in ((1025, 2e-3), (2049, 1e-3)):
        g = GridSpec(-2, 2, n)
        vals.append(tdse_residual(ck_family(1.0, (1.0, 0.0), ck, g), model, 0.3, dt_fd=dt).value)
    assert vals[0] / vals[1] == pytest.approx(4.0, rel=0.1)


def test_classical_closed_form():
    # CK(1, 2, 1, 0): roots of r^2 + 2 r - 1 are -1 +- sqrt(2)
    model = make_caldirola_kanai(CaldirolaKanaiParams(1.0, 2.0, 1.0, 0.0))
    cl = classical_solve(model, 1.0, 0.0, (0.0, 2.0))
    r1, r2 = -1 + math.sqrt(2), -1 - math.sqrt(2)
    a = -r2 / (r1 - r2)
    ts = np.linspace(0, 2, 21)
    np.testing.assert_allclose(cl(ts), a * np.exp(r1 * ts) + (1 - a) * np.exp(r2 * ts), atol=1e-9)
    assert np.max(np.abs(cl.residual(model, ts))) < 1e-8


def test_classical_trivial_cases():
    free = OscillatorModel(TimeFunction.constant(1.0), TimeFunction.constant(0.0), None)
    cl = classical_solve(free, 0.5, 2.0, (0.0, 1.0))
    np.testing.assert_allclose(cl(np.linspace(0, 1, 5)), 0.5 + 2.0 * np.linspace(0, 1, 5), atol=1e-12)
    zero = classical_solve(free, 0.0, 0.0, (0.0, 1.0))
    assert not np.any(zero.q)


def test_invariant_drift_and_wrong_rho(ref_model, ref_ermakov):
    g = GridSpec(-8, 8, 8192)
    run = propagate(ref_model, gaussian_frame(g, width=0.5), 0.05, 1e-4, stride=100)
    assert invariant_drift(run, ref_ermakov).passed
    assert invariant_drift(run, ScaledErmakov(ref_ermakov, 1.1)).value > 1e-2
    single = PropagationRun(run.model, g, 1e-4, run.frames[:1], run.norm_history[:1])
    assert invariant_drift(single, ref_ermakov).value == 0.0


def test_ehrenfest(ref_model):
    g = GridSpec(-15, 15, 4096)
    run = propagate(ref_model, gaussian_frame(g, centre=1.0), 0.2, 1e-4, stride=100)
    assert ehrenfest_check(run, ref_model).value < 1e-4
    assert ehrenfest_check(run, ref_model, omega_sq_scale=1.1).value > 1e-3
    centred = propagate(ref_model, gaussian_frame(g), 0.2, 1e-4, stride=500)
    qs = [abs(np.sum(g.nodes * np.abs(f.values) ** 2) * g.spacing) for f in centred.frames]
    assert max(qs) <= 1e-8


def test_gauge_check_and_mutation(ref_model, ref_ermakov):
    g = GridSpec(-30, 30, 2048)
    assert gauge_identity_check(ref_model, ref_ermakov, g, 0.4, trials=16).value <= 1e-8
    assert gauge_identity_check(ref_model, ref_ermakov, g, 0.4, trials=4, gauge_sign=-1.0).value > 1e-2


def test_trivial_gauge():
    # with rho' = y rho the phase map is the identity, so I and I' coincide
    ck = CaldirolaKanaiParams(1.0, 0.0, 1.0, 0.0)
    model = make_caldirola_kanai(ck)
    from lrinvariant.ermakov import ErmakovSolution
    er = ErmakovSolution.closed_form(ck, model)
    assert gauge_identity_check(model, er, GridSpec(-10, 10, 512), 0.0, trials=4).value < 1e-14


def test_weber_helpers():
    t = weber.build_eigenfunction_table(1.0, 8.0, 16001)
    assert weber_fd_residual(t) < 2e-5
    assert weber_parity_error(t) == 0.0


def test_summary_table_lists_every_report():
    reps = [ResidualReport("b", "max", 1.0, 2.0), ResidualReport("a", "max", 3.0, 2.0)]
    text = summary_table(reps)
    assert "PASS" in text and "FAIL" in text
    assert len(text.splitlines()) == 3
