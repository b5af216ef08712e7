import io
import math

import numpy as np
import pytest
from scipy import stats

from ssecho.config import load_config, resolve
from ssecho.detection import (EchoRecord, echo_phase, extract_echoes, records_from_csv,
                              records_to_csv)
from ssecho.dynamics import Trace, integrate
from ssecho.errors import DataSchemaError, ValidationError
from ssecho.sequence import DrivePulse, PulseSequence

TAU = 25.0


def blip_trace(centres_heights, phase=0.0, t_end=130.0, dt=0.01, seq=None):
    t = np.round(np.arange(0.0, t_end + dt / 2, dt), 10)
    field = np.zeros_like(t, dtype=complex)
    for c, h in centres_heights:
        field += h * np.exp(-0.5 * ((t - c) / 0.8) ** 2)
    return Trace(t, field * np.exp(1j * phase), 1.0, sequence=seq)


def test_gaussian_blip_at_echo1():
    recs = extract_echoes(blip_trace([(2 * TAU, 0.7)]), TAU, 4, 5.0, t_ref=0.0)
    assert recs[0].peak_mag == pytest.approx(0.7, rel=1e-12)
    assert recs[0].t_peak == pytest.approx(2 * TAU)
    assert recs[0].window == (2 * TAU - 5, 2 * TAU + 5)
    assert [r.k for r in recs] == [1, 2, 3, 4]


def test_zero_trace_is_all_flagged():
    recs = extract_echoes(blip_trace([]), TAU, 4, 5.0, t_ref=0.0)
    assert all(r.flagged and r.peak_mag == 0 for r in recs)


def test_below_floor_flagged_not_dropped():
    tr = blip_trace([(50, 1.0), (75, 0.1), (100, 1e-4)])
    tr.field[(tr.times > 60) & (tr.times < 67)] += 1e-3
    recs = extract_echoes(tr, TAU, 4, 5.0, t_ref=0.0)
    assert len(recs) == 4
    assert [r.flagged for r in recs] == [False, False, True, True]


def test_phase_of_real_and_rotated_blips():
    rec = extract_echoes(blip_trace([(50, 0.7)]), TAU, 1, 5.0, t_ref=0.0, floor=0.0)[0]
    assert echo_phase(rec) == pytest.approx(0.0, abs=1e-12)
    rec = extract_echoes(blip_trace([(50, 0.7)], math.pi / 3), TAU, 1, 5.0, t_ref=0.0, floor=0.0)[0]
    assert echo_phase(rec) == pytest.approx(math.pi / 3, abs=1e-9)


def test_phase_of_flagged_record_is_an_error():
    rec = EchoRecord(1, 50.0, 0.0, 0j, (45.0, 55.0), True)
    with pytest.raises(ValidationError):
        echo_phase(rec)


def test_window_over_drive_pulse_rejected():
    seq = PulseSequence((DrivePulse(0, 2), DrivePulse(25, 2), DrivePulse(49, 2)), (), 130.0, 25.0)
    with pytest.raises(ValidationError, match="overlaps"):
        extract_echoes(blip_trace([], seq=seq), n_max=2)


def test_window_must_be_narrower_than_half_tau():
    with pytest.raises(ValidationError):
        extract_echoes(blip_trace([]), TAU, 2, 13.0, t_ref=0.0)


def test_trace_must_cover_last_window():
    with pytest.raises(ValidationError):
        extract_echoes(blip_trace([], t_end=100.0), TAU, 4, 5.0, t_ref=0.0)


def test_translation_covariance():
    seq = PulseSequence((DrivePulse(0, 2), DrivePulse(25, 2)), (), 135.0, 25.0)
    tr = blip_trace([(51, 1.0), (76.3, 0.3), (101.5, 0.08), (126.2, 0.02)], t_end=140.0, seq=seq)
    shift = 7.0
    moved = tr.shifted(shift)
    a = extract_echoes(tr)
    b = extract_echoes(moved)
    for x, y in zip(a, b):
        assert y.t_peak == pytest.approx(x.t_peak + shift, abs=1e-9)
        assert y.peak_mag == x.peak_mag
        assert y.area == pytest.approx(x.area, rel=1e-12)
        assert y.flagged == x.flagged


def test_echo_csv_round_trip():
    recs = extract_echoes(blip_trace([(50, 0.7), (75, 0.2)], 0.4), TAU, 3, 5.0, t_ref=0.0)
    back = records_from_csv(io.StringIO(records_to_csv(recs)))
    assert records_to_csv(recs).splitlines()[0] == "k,t_peak_us,peak_mag,area_re,area_im,flagged"
    for x, y in zip(recs, back):
        assert (x.k, x.t_peak, x.peak_mag, x.area, x.flagged) == (y.k, y.t_peak, y.peak_mag, y.area, y.flagged)


@pytest.mark.parametrize("text,row,col", [
    ("k,t_peak_us,peak_mag,area_re,flagged\n", 1, "area_im"),
    ("k,t_peak_us,peak_mag,area_re,area_im,flagged\n1,50,abc,0,0,0\n", 2, "peak_mag"),
    ("k,t_peak_us,peak_mag,area_re,area_im,flagged\n1,50,-1,0,0,0\n", 2, "peak_mag"),
    ("k,t_peak_us,peak_mag,area_re,area_im,flagged\n1,50,1,0,0\n", 2, None),
])
def test_echo_csv_schema_errors(text, row, col):
    with pytest.raises(DataSchemaError) as err:
        records_from_csv(io.StringIO(text))
    assert err.value.row == row and err.value.column == col


def test_global_phase_covariance():
    doc = load_config("fig3e")
    exp = resolve(doc)
    ens = exp.ensemble()
    phi = 40.0
    a = extract_echoes(integrate(ens, exp.cavity, exp.sequence, exp.sim), n_max=3)
    b = extract_echoes(integrate(ens, exp.cavity, exp.sequence.with_phase_offset(phi), exp.sim), n_max=3)
    for x, y in zip(a, b):
        assert y.peak_mag == pytest.approx(x.peak_mag, rel=1e-6)
        d = (echo_phase(y) - echo_phase(x) - math.radians(phi) + math.pi) % (2 * math.pi) - math.pi
        assert abs(d) < 1e-6


@pytest.mark.slow
def test_metric_consistency_across_silencing_sweep(fig2c_sweep):
    _, results, _ = fig2c_sweep
    for k in range(3):
        peak = [res.records[k].peak_mag for res in results]
        area = [abs(res.records[k].area) / 10.0 for res in results]
        assert stats.spearmanr(peak, area).statistic > 0.99


@pytest.mark.slow
def test_echo_ratios_constant_at_high_cooperativity(fig1b_run):
    """Echo-to-echo ratios of the two-pulse train agree within 15%."""
    a = [r.amplitude(fig1b_run.experiment.metric) for r in fig1b_run.records]
    r21, r32 = a[1] / a[0], a[2] / a[1]
    print(f"echo2/echo1 = {r21:.4f}, echo3/echo2 = {r32:.4f}, rel diff = {abs(r32 / r21 - 1):.3f}")
    assert abs(r32 / r21 - 1) < 0.15
