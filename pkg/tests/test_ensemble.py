import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ssecho.ensemble import (Ensemble, EnsembleSpec, SpinBin, annulus_coupling_pdf, annulus_mean,
                             build_ensemble, ensemble_quantities, lineshape_cdf, nominal_cooperativity,
                             sample_annulus)
from ssecho.errors import ValidationError
from ssecho.units import angular_to_mhz, mhz_to_angular

TP = 2 * math.pi


def test_zero_linewidth_puts_every_bin_on_resonance():
    ens = build_ensemble(EnsembleSpec(n_bins=100, linewidth=0.0))
    assert len(ens) == 100
    assert np.all(ens.detuning == 0)


@pytest.mark.parametrize("sampling", ["grid", "random"])
def test_lorentzian_median_abs_detuning_is_hwhm(sampling):
    gamma = 3.0
    n = 200_000
    ens = build_ensemble(EnsembleSpec(n_bins=n, linewidth=gamma, truncation=1e7, sampling=sampling, seed=4))
    med = np.median(np.abs(ens.detuning))
    # standard error of the median of |x| for a half-Cauchy: 1/(2 sqrt(n) f(m)), f(m) = 1/(pi hw)
    se = math.pi * (gamma / 2) / (2 * math.sqrt(n))
    assert abs(med - gamma / 2) < 4 * se


def test_uniform_coupling_with_equal_bounds():
    ens = build_ensemble(EnsembleSpec(n_bins=50, linewidth=1.0, g_min=0.7, g_max=0.7))
    assert np.all(ens.coupling == 0.7)


def test_initial_bloch_vectors_point_down():
    ens = build_ensemble(EnsembleSpec(n_bins=10, linewidth=1.0, polarization=0.6))
    assert np.all(ens.sz == -0.3) and np.all(ens.sx == 0) and np.all(ens.sy == 0)


def test_annulus_pdf_normalized():
    val, _ = integrate.quad(lambda g: annulus_coupling_pdf(g, 0.3, 5.0), 0.3, 5.0, limit=200)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_annulus_pdf_ratio_and_support():
    assert annulus_coupling_pdf(1.0, 1.0, 2.0) / annulus_coupling_pdf(2.0, 1.0, 2.0) == pytest.approx(8.0)
    assert annulus_coupling_pdf(0.5, 1.0, 2.0) == 0.0
    assert annulus_coupling_pdf(2.5, 1.0, 2.0) == 0.0


def test_annulus_sample_mean_matches_closed_form():
    rng = np.random.default_rng(11)
    g = sample_annulus(1_000_000, 1.0, 100.0, rng)
    exact, _ = integrate.quad(lambda x: x * annulus_coupling_pdf(x, 1.0, 100.0), 1.0, 100.0, limit=500)
    assert annulus_mean(1.0, 100.0) == pytest.approx(exact, rel=1e-10)
    assert g.mean() == pytest.approx(exact, rel=5e-3)


@pytest.mark.parametrize("gmin", [0.0, -1.0])
def test_annulus_rejects_nonpositive_gmin(gmin):
    with pytest.raises(ValidationError):
        annulus_coupling_pdf(1.0, gmin, 2.0)


def test_cooperativity_examples():
    # 4 g^2 / (Gamma kappa) with linear frequencies converted to angular
    for g, gam, kap, expect in [(1.2, 15.0, 1.9, 0.2021), (10.0, 76.0, 1.9, 2.770)]:
        bins = [SpinBin(0.0, TP * g, 1.0)]
        q = ensemble_quantities(bins, TP * gam, TP * kap)
        assert q.cooperativity == pytest.approx(expect, abs=5e-4)


def test_identical_bins_give_sqrt_n_scaling():
    g0, n = 0.37, 400
    bins = [SpinBin(0.0, g0, 1.0) for _ in range(n)]
    q = ensemble_quantities(bins, 1.0, 1.0)
    assert q.g_ens == pytest.approx(g0 * math.sqrt(n), rel=1e-12)
    assert q.n_eff == pytest.approx(n)


@pytest.mark.parametrize("bad", [{"linewidth": 0.0}, {"kappa_tot": -1.0}])
def test_quantities_domain_errors(bad):
    args = {"linewidth": 1.0, "kappa_tot": 1.0}
    args.update(bad)
    with pytest.raises(ValidationError):
        ensemble_quantities([SpinBin(0.0, 1.0, 1.0)], **args)


@pytest.mark.parametrize("field,value", [
    ("n_bins", 0), ("linewidth", -1.0), ("lineshape", "voigt"), ("coupling_dist", "ring"),
    ("T1", 0.0), ("T2", -2.0), ("polarization", 1.5), ("sampling", "sobol"), ("edge_taper", 2.0),
])
def test_spec_validation_names_field(field, value):
    with pytest.raises(ValidationError) as err:
        EnsembleSpec(n_bins=10, **{field: value}) if field != "n_bins" else EnsembleSpec(n_bins=value)
    assert err.value.field == field


def test_spin_bin_invariants():
    with pytest.raises(ValidationError):
        SpinBin(0.0, 1.0, 0.0)
    with pytest.raises(ValidationError):
        SpinBin(0.0, -1.0, 1.0)
    with pytest.raises(ValidationError):
        SpinBin(0.0, 1.0, 1.0, 0.5, 0.0, -0.5)


def test_truncated_grid_keeps_full_line_spectral_density():
    gam, half = TP * 76, TP * 1.25
    spec = EnsembleSpec(n_bins=4800, linewidth=gam, truncation=half / gam, coupling_dist="annulus",
                        g_min=TP * 0.1, g_max=TP * 10, coupling_classes=12, g_ens=TP * 10)
    ens = build_ensemble(spec)
    mass = lineshape_cdf(half, gam) - lineshape_cdf(-half, gam)
    g2 = np.sum(ens.weight * ens.coupling ** 2)
    assert g2 == pytest.approx((TP * 10) ** 2 * mass, rel=1e-12)
    assert nominal_cooperativity(spec, TP * 1.9) == pytest.approx(4 * 100 / (76 * 1.9), rel=1e-12)


def test_log_coupling_classes_share_g_squared():
    spec = EnsembleSpec(n_bins=12, linewidth=1.0, coupling_dist="annulus", g_min=1.0, g_max=100.0,
                        coupling_classes=12)
    ens = build_ensemble(spec)
    share = ens.weight * ens.coupling ** 2
    assert share.max() / share.min() < 1.5


def test_edge_taper_rolls_off_weights():
    spec = EnsembleSpec(n_bins=200, linewidth=10.0, truncation=0.5, edge_taper=0.3)
    ens = build_ensemble(spec)
    w = ens.weight
    assert w[0] < 0.05 * w[100] and w[-1] < 0.05 * w[100]


def test_units_boundary():
    assert mhz_to_angular(1.0) == pytest.approx(TP)
    assert angular_to_mhz(mhz_to_angular(76.0)) == pytest.approx(76.0)
    np.testing.assert_allclose(mhz_to_angular([1.0, 2.0]), [TP, 2 * TP])


# -- properties -------------------------------------------------------------------------

bin_arrays = st.integers(1, 60).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0, 1e3), min_size=n, max_size=n),
    st.lists(st.floats(1e-6, 1e6), min_size=n, max_size=n)))


@given(bin_arrays)
def test_weighted_rms_identity(arrays):
    g, w = map(np.array, arrays)
    ens = Ensemble(np.zeros(g.size), g, w, np.zeros(g.size), np.zeros(g.size), np.full(g.size, -0.5))
    q = ensemble_quantities(ens, 1.0, 1.0)
    exact = math.fsum(w * g * g)
    assert abs(q.g_ens ** 2 - exact) <= 1e-12 * max(exact, 1e-300)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["grid", "random"]), st.sampled_from(["uniform", "annulus"]))
def test_sampling_is_deterministic(seed, sampling, dist):
    spec = EnsembleSpec(n_bins=64, linewidth=2.0, coupling_dist=dist, g_min=0.5, g_max=3.0,
                        coupling_classes=4, sampling=sampling, seed=seed)
    a, b = build_ensemble(spec), build_ensemble(spec)
    for name in ("detuning", "coupling", "weight"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["lorentzian", "gaussian"]))
def test_lineshape_symmetry(seed, shape):
    n = 20_000
    ens = build_ensemble(EnsembleSpec(n_bins=n, linewidth=1.0, lineshape=shape, truncation=5.0,
                                      sampling="random", seed=seed))
    se = ens.detuning.std() / math.sqrt(n)
    assert abs(ens.detuning.mean()) < 5 * se


@given(st.floats(0.01, 10), st.floats(1e-3, 1e3), st.integers(1, 40))
def test_cooperativity_linear_in_spin_number(g0, w, n):
    bins = [SpinBin(0.0, g0, w)] * n
    doubled = [SpinBin(0.0, g0, 2 * w)] * n
    c1 = ensemble_quantities(bins, 2.0, 3.0).cooperativity
    c2 = ensemble_quantities(doubled, 2.0, 3.0).cooperativity
    assert c2 == pytest.approx(2 * c1, rel=1e-12)
