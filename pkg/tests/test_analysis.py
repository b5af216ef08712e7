import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssecho.analysis import (AngleModel, cooperativity_from_fields, cw_model, filter_function,
                             fit_cw_sweep, fit_eta, fit_eta_pooled, fit_linear_through_origin,
                             fit_recovery, predict_sse, recovery_model, resonance_field,
                             ste_amplitude)
from ssecho.detection import EchoRecord
from ssecho.dynamics import CavityParams, steady_state_field
from ssecho.ensemble import EnsembleSpec, build_ensemble, ensemble_quantities
from ssecho.errors import InsufficientDataError, ValidationError

TP = 2 * math.pi
R90 = math.pi / 2


def records(amps, flagged=()):
    return [EchoRecord(k + 1, 50.0 + 25 * k, a, complex(a, 0), (45.0 + 25 * k, 55.0 + 25 * k), k in flagged)
            for k, a in enumerate(amps)]


# -- filter function -------------------------------------------------------------------------

def test_filter_on_resonance():
    assert filter_function(0.0, 3.0) == 1.0


def test_filter_half_point():
    assert filter_function(math.sqrt(3) / 2 * 3.0, 3.0) == pytest.approx(0.5, rel=1e-14)


def test_filter_domain():
    with pytest.raises(ValidationError):
        filter_function(1.0, 0.0)


@given(st.floats(0, 1e6), st.floats(1e-3, 1e3))
def test_filter_even_bounded(d, k):
    f = filter_function(d, k)
    assert f == filter_function(-d, k)
    assert 0 < f <= 1


@given(st.floats(0, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_filter_strictly_decreasing(d, step, k):
    assert filter_function(d + step, k) < filter_function(d, k)


def test_filter_vanishes_far_off_resonance():
    assert filter_function(1e12, 1.0) < 1e-11


# -- STE and echo-train law -------------------------------------------------------------------------

def test_ste_amplitude_values():
    assert ste_amplitude(R90, R90, R90) == 1.0
    assert ste_amplitude(math.radians(30), R90, R90) == pytest.approx(0.5)


def test_predict_sse_examples():
    np.testing.assert_allclose(predict_sse(1.0, 0.21, R90, R90, 3), [1, 0.21, 0.0441])
    assert predict_sse(2.0, 0.0, 0.3, 1.0, 4)[1:] == [0.0, 0.0, 0.0]
    a = predict_sse(1.0, 0.3, math.radians(30), R90, 2)
    assert a[1] == pytest.approx(0.15)


def test_predict_sse_domain():
    with pytest.raises(ValidationError):
        predict_sse(-1.0, 0.2, R90, R90, 3)
    with pytest.raises(ValidationError):
        predict_sse(1.0, -0.2, R90, R90, 3)


def test_fit_eta_exact_geometric():
    fit = fit_eta(records([1.0, 0.1, 0.01, 0.001]), R90, R90)
    assert fit.eta == pytest.approx(0.1, rel=1e-12)
    assert fit.residual_rms < 1e-12


def test_fit_eta_skips_flagged():
    fit = fit_eta(records([1.0, 0.2, 0.04, 0.5, 0.0016], flagged=(3,)), R90, R90)
    assert fit.eta == pytest.approx(0.2, rel=1e-12) and fit.n_used == 4


def test_fit_eta_insufficient():
    with pytest.raises(InsufficientDataError):
        fit_eta(records([1.0, 0.1, 0.01], flagged=(2,)), R90, R90)


def test_fit_eta_weighted():
    fit = fit_eta(records([1.0, 0.1, 0.01, 0.002]), R90, R90, weights=[1, 1, 1, 1e-9])
    assert fit.eta == pytest.approx(0.1, rel=1e-6)


@settings(max_examples=200)
@given(st.floats(1e-3, 10), st.floats(0.01, 0.99), st.floats(1, 179), st.floats(1, 179), st.integers(3, 8))
def test_fit_eta_inverts_predict_sse(a1, eta_ratio, b1_deg, b2_deg, n):
    b1, b2 = math.radians(b1_deg), math.radians(b2_deg)
    sb = math.sin(b1) * math.sin(b2)
    eta = eta_ratio / sb
    fit = fit_eta(records(predict_sse(a1, eta, b1, b2, n)), b1, b2)
    assert fit.eta == pytest.approx(eta, rel=1e-9)
    assert fit.residual_rms < 1e-12


def test_pooled_eta():
    sets = []
    for x in (1.0, 0.75, 0.5, 0.25):
        b1 = x * R90
        sets.append((records(predict_sse(x, 0.3, b1, R90, 4)), b1, R90))
    fit = fit_eta_pooled(sets)
    assert fit.eta == pytest.approx(0.3, rel=1e-12)
    assert fit.spread < 1e-10


# -- linear fit ------------------------------------------------------------------------------------

def test_linear_exact():
    x = np.array([1.0, 2.0, 3.5, 4.0])
    fit = fit_linear_through_origin(x, 0.16 * x)
    assert fit.slope == pytest.approx(0.16, rel=1e-14) and fit.r2 == pytest.approx(1.0)


def test_linear_zero_y():
    assert fit_linear_through_origin([1, 2, 3], [0, 0, 0]).slope == 0.0


def test_linear_degenerate():
    with pytest.raises(InsufficientDataError):
        fit_linear_through_origin([0, 0, 0], [1, 2, 3])
    with pytest.raises(InsufficientDataError):
        fit_linear_through_origin([1, 2], [1, 2])


def test_linear_warns_on_poor_fit():
    with pytest.warns(RuntimeWarning):
        fit_linear_through_origin([1, 2, 3, 4], [1, -2, 3, -4])


# -- CW fit ---------------------------------------------------------------------------------------

CW_TRUE = (TP * 10, TP * 76, TP * 1.9)
DELTAS = TP * np.linspace(-300, 300, 41)


def test_cw_noiseless_recovery():
    fit = fit_cw_sweep(DELTAS, cw_model(DELTAS, *CW_TRUE))
    for got, want in zip((fit.g_ens, fit.gamma, fit.kappa), CW_TRUE):
        assert got == pytest.approx(want, rel=1e-3)
    assert all(v >= 0 for v in fit.cov_diag)


def test_cw_flat_flags_gamma():
    k = np.full(DELTAS.size, TP * 1.9)
    fit = fit_cw_sweep(DELTAS, k)
    assert fit.kappa == pytest.approx(TP * 1.9)
    assert fit.g_ens == 0.0 and "gamma_unidentifiable" in fit.flags


def test_cw_needs_five_points():
    with pytest.raises(InsufficientDataError):
        fit_cw_sweep(DELTAS[:4], cw_model(DELTAS[:4], *CW_TRUE))


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_cw_scale_equivariance(s):
    k = cw_model(DELTAS, *CW_TRUE) * (1 + 0.01 * np.sin(np.arange(DELTAS.size)))
    a = fit_cw_sweep(DELTAS, k)
    b = fit_cw_sweep(DELTAS, s * k)
    assert b.gamma == pytest.approx(a.gamma, rel=1e-6)
    assert b.kappa == pytest.approx(s * a.kappa, rel=1e-6)
    assert b.g_ens == pytest.approx(math.sqrt(s) * a.g_ens, rel=1e-6)


# -- recovery fits -----------------------------------------------------------------------------------

def test_mono_recovery():
    t = np.linspace(0, 3000, 60)
    fit = fit_recovery(t, recovery_model(t, [2.0], [440.0], 0.3))
    assert fit.t1[0] == pytest.approx(440.0, rel=1e-3)
    assert fit.amplitudes[0] == pytest.approx(2.0, rel=1e-6)


def test_bi_recovery_and_ordering():
    t = np.geomspace(0.1, 600, 80)
    fit = fit_recovery(t, recovery_model(t, [2.0, 1.0], [97.0, 4.7], 0.0), "bi")
    assert fit.t1[0] < fit.t1[1]
    assert fit.t1 == pytest.approx((4.7, 97.0), rel=1e-2)
    assert fit.amplitudes == pytest.approx((1.0, 2.0), rel=1e-2)


def test_constant_signal_recovery_flagged():
    t = np.linspace(0, 10, 20)
    fit = fit_recovery(t, np.full(t.size, 0.4))
    assert fit.amplitudes == (0.0,) and "t1_unidentifiable" in fit.flags
    assert fit.baseline == pytest.approx(0.4)


def test_recovery_input_checks():
    with pytest.raises(InsufficientDataError):
        fit_recovery([0, 1, 2], [0, 1, 2])
    with pytest.raises(ValidationError):
        fit_recovery([0, 2, 1, 3, 4, 5], [0, 1, 2, 3, 4, 5])
    with pytest.raises(ValidationError):
        fit_recovery(np.arange(6.0), np.arange(6.0), model="tri")


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_recovery_scale_equivariance(s):
    t = np.linspace(0, 3000, 40)
    y = recovery_model(t, [2.0], [440.0], 0.3) * (1 + 0.01 * np.cos(np.arange(t.size)))
    a, b = fit_recovery(t, y), fit_recovery(t, s * y)
    assert b.t1[0] == pytest.approx(a.t1[0], rel=1e-6)


# -- cooperativity from fields ------------------------------------------------------------------------

def test_cooperativity_from_fields_examples():
    assert cooperativity_from_fields(0.3 + 0.1j, 0.3 + 0.1j) == 0.0
    assert cooperativity_from_fields(2.0, 1.0) == 1.0
    with pytest.raises(ValidationError):
        cooperativity_from_fields(1.0, 0.0)


def lorentzian_ensemble(g_ens_mhz, gamma_mhz=76.0):
    # continuum-like inhomogeneous line; T2 smooths over the bin spacing
    spec = EnsembleSpec(n_bins=4000, linewidth=TP * gamma_mhz, truncation=5.0, g_ens=TP * g_ens_mhz,
                        T2=1.0)
    return build_ensemble(spec)


def test_field_ratio_matches_ensemble_cooperativity():
    ens = lorentzian_ensemble(10.0)
    cav = CavityParams(TP * 1.9)
    c_fields = cooperativity_from_fields(steady_state_field(ens, cav, 1.0, "saturated"),
                                         steady_state_field(ens, cav, 1.0, "polarized"))
    c_bins = ensemble_quantities(ens, TP * 76, TP * 1.9).cooperativity
    assert c_fields == pytest.approx(c_bins, rel=0.10)


def test_field_cooperativity_increases_with_coupling():
    cav = CavityParams(TP * 1.9)
    cs = []
    for g in (0.5, 1.0, 2.0, 5.0, 10.0):
        ens = lorentzian_ensemble(g)
        cs.append(cooperativity_from_fields(steady_state_field(ens, cav, 1.0, "saturated"),
                                            steady_state_field(ens, cav, 1.0, "polarized")))
    assert all(b > a for a, b in zip(cs, cs[1:]))


# -- resonance field ------------------------------------------------------------------------------------

MODEL = AngleModel.from_mhz(17.0, 117.0, 2.5, 6500.0)


def test_resonance_field_endpoints():
    assert resonance_field(2.5, MODEL) == pytest.approx(382.35, abs=0.01)
    assert resonance_field(92.5, MODEL) == pytest.approx(6500 / 117, rel=1e-12)


@given(st.floats(-360, 360))
def test_resonance_field_symmetric_periodic_bounded(x):
    b = resonance_field(2.5 + x, MODEL)
    assert b == pytest.approx(resonance_field(2.5 - x, MODEL), rel=1e-12)
    assert b == pytest.approx(resonance_field(2.5 + x + 180.0, MODEL), rel=1e-9)
    assert 6500 / 117 * (1 - 1e-12) <= b <= 6500 / 17 * (1 + 1e-12)


def test_angle_model_validation():
    with pytest.raises(ValidationError):
        AngleModel(0.0, 1.0)
