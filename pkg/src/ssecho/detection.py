"""Echo extraction from traces.

Echo ``k`` (1-based) is searched in a window centred at ``t_ref + (k+1) tau``
where ``t_ref`` is the centre of the first drive pulse.  Each record keeps the
peak of ``|emitted|`` and the complex area of ``emitted`` over the window.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataSchemaError, ValidationError

METRICS = ("peak", "area")
ECHO_COLUMNS = ("k", "t_peak_us", "peak_mag", "area_re", "area_im", "flagged")


@dataclass(frozen=True)
class EchoRecord:
    k: int
    t_peak: float
    peak_mag: float
    area: complex
    window: tuple
    flagged: bool = False

    def __post_init__(self):
        lo, hi = self.window
        if not lo <= self.t_peak <= hi:
            raise ValidationError("t_peak outside window", "t_peak")
        if not self.peak_mag >= 0:
            raise ValidationError("must be >= 0", "peak_mag")

    def amplitude(self, metric="peak"):
        if metric == "peak":
            return self.peak_mag
        if metric == "area":
            return abs(self.area)
        raise ValidationError(f"must be one of {METRICS}", "metric")


def _trapz(y, x):
    if len(x) < 2:
        return 0j
    return complex(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def noise_floor(trace, segment):
    """3 x RMS of ``|emitted|`` over the time segment (t0, t1)."""
    t0, t1 = segment
    sel = (trace.times >= t0) & (trace.times <= t1)
    if not np.any(sel):
        raise ValidationError(f"quiet segment {segment} holds no samples", "quiet_segment")
    mag = np.abs(trace.emitted[sel])
    return 3.0 * float(np.sqrt(np.mean(mag ** 2)))


def default_quiet_segment(trace, tau, t_ref, window_halfwidth):
    """Central half of the gap between the echo1 and echo2 windows, or None
    if the trace ends first.

    The stretch right after the last pulse is avoided because the cavity and
    the strongly coupled spins ring down there, and the gap edges hold the
    tails of broad echoes.
    """
    mid = t_ref + 2.5 * tau
    half = 0.25 * (tau - 2 * window_halfwidth)
    lo, hi = mid - half, mid + half
    return (lo, hi) if trace.times[-1] >= hi else None


def extract_echoes(trace, tau=None, n_max=4, window_halfwidth=5.0, *, t_ref=None,
                   drives=None, quiet_segment="auto", floor=None):
    """One :class:`EchoRecord` per k = 1..n_max.

    ``tau`` and ``t_ref`` default to the trace's sequence.  Records whose peak
    does not exceed the noise floor are flagged.  The floor is ``floor`` if
    given, else 3 x RMS over ``quiet_segment`` ("auto" picks the middle of
    the gap between the echo1 and echo2 windows; None disables it).
    """
    seq = trace.sequence
    if tau is None:
        if seq is None or seq.tau is None:
            raise ValidationError("no tau given and trace has no sequence", "tau")
        tau = seq.tau
    if t_ref is None:
        t_ref = seq.t_ref if seq is not None else 0.0
    if drives is None:
        drives = seq.drives if seq is not None else ()
    if not 0 < window_halfwidth < tau / 2:
        raise ValidationError("need 0 < window_halfwidth < tau/2", "window_halfwidth")
    times = trace.times
    last = t_ref + (n_max + 1) * tau + window_halfwidth
    if times[0] > t_ref + 2 * tau - window_halfwidth or times[-1] < last - 1e-9:
        raise ValidationError(f"trace must cover up to {last:g} us", "trace")

    if floor is None:
        if quiet_segment == "auto":
            quiet_segment = default_quiet_segment(trace, tau, t_ref, window_halfwidth)
        floor = noise_floor(trace, quiet_segment) if quiet_segment is not None else 0.0

    emitted = trace.emitted
    mag = np.abs(emitted)
    tol = 1e-9 * max(1.0, abs(last))
    records = []
    for k in range(1, n_max + 1):
        centre = t_ref + (k + 1) * tau
        lo, hi = centre - window_halfwidth, centre + window_halfwidth
        for p in drives:
            if p.t_start < hi and lo < p.t_end:
                raise ValidationError(
                    f"echo {k} window [{lo:g}, {hi:g}] overlaps {p.describe()}", "window")
        sel = np.flatnonzero((times >= lo - tol) & (times <= hi + tol))
        i = sel[int(np.argmax(mag[sel]))]
        t_peak = min(max(float(times[i]), lo), hi)
        peak = float(mag[i])
        area = _trapz(emitted[sel], times[sel])
        records.append(EchoRecord(k, t_peak, peak, area, (lo, hi), bool(peak <= floor)))
    return records


def echo_phase(record: EchoRecord) -> float:
    """Argument of the integrated area, in (-pi, pi]."""
    if record.flagged:
        raise ValidationError(f"echo {record.k} is below the noise floor", "record")
    phi = math.atan2(record.area.imag, record.area.real)
    return math.pi if phi == -math.pi else phi


def amplitudes(records, metric="peak", include_flagged=False):
    return np.array([r.amplitude(metric) for r in records
                     if include_flagged or not r.flagged])


# -- CSV ------------------------------------------------------------------------------

def records_to_csv(records, target=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ECHO_COLUMNS)
    for r in records:
        w.writerow([r.k, repr(float(r.t_peak)), repr(float(r.peak_mag)),
                    repr(float(r.area.real)), repr(float(r.area.imag)), int(r.flagged)])
    text = buf.getvalue()
    if target is None:
        return text
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)
    return None


def records_from_csv(source):
    """Parse an echo CSV (path or text stream).  Schema errors carry row/column."""
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows:
        raise DataSchemaError("empty file", row=1)
    header = tuple(h.strip() for h in rows[0])
    missing = [c for c in ECHO_COLUMNS if c not in header]
    if missing:
        raise DataSchemaError(f"missing columns {missing}", row=1, column=missing[0])
    col = {c: header.index(c) for c in ECHO_COLUMNS}
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataSchemaError(f"expected {len(header)} fields, got {len(row)}", row=n)
        vals = {}
        for c in ECHO_COLUMNS:
            text = row[col[c]].strip()
            try:
                vals[c] = int(text) if c in ("k", "flagged") else float(text)
            except ValueError:
                raise DataSchemaError(f"bad value {text!r}", row=n, column=c) from None
            if c not in ("k", "flagged") and not math.isfinite(vals[c]):
                raise DataSchemaError(f"non-finite value {text!r}", row=n, column=c)
        if vals["peak_mag"] < 0:
            raise DataSchemaError("peak_mag must be >= 0", row=n, column="peak_mag")
        if vals["flagged"] not in (0, 1):
            raise DataSchemaError("flagged must be 0 or 1", row=n, column="flagged")
        t = vals["t_peak_us"]
        out.append(EchoRecord(vals["k"], t, vals["peak_mag"],
                              complex(vals["area_re"], vals["area_im"]), (t, t), bool(vals["flagged"])))
    return out
