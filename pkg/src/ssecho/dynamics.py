"""Mean-field cavity + spin-ensemble dynamics.

Rotating frame at the bare cavity frequency, time in us, rates in rad/us,
s = Sx - i Sy per bin::

    da/dt  = -(kappa_tot/2 + i Dc(t)) a - i sum_j w_j g_j s_j + eps(t)
    ds_j/dt = -(1/T2 + i delta_j) s_j + 2i g_j a sz_j
    dsz_j/dt = -(sz_j - sz_eq)/T1 + i g_j (conj(a) s_j - a conj(s_j))

Dc(t) comes from detune windows and eps(t) = eps0 * amp_rel * exp(i phase)
from drive pulses.  Both are piecewise constant; integration uses classic RK4
with step edges placed on every event edge and every output sample.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .ensemble import Ensemble
from .errors import NumericalError, ValidationError
from .sequence import PulseSequence

DT_WARN = 0.1
DT_ERROR = 0.5
TRACE_COLUMNS = ("time_us", "re_a", "im_a", "abs_a", "re_out", "im_out")


@dataclass(frozen=True)
class CavityParams:
    """Loss rates and reference drive rate, all rad/us."""

    kappa_c: float
    kappa_int: float = 0.0
    drive: float = 1.0

    def __post_init__(self):
        if not (self.kappa_c > 0 and math.isfinite(self.kappa_c)):
            raise ValidationError("must be finite and > 0", "kappa_c")
        if not (self.kappa_int >= 0 and math.isfinite(self.kappa_int)):
            raise ValidationError("must be finite and >= 0", "kappa_int")
        if not math.isfinite(self.drive):
            raise ValidationError("must be finite", "drive")

    @property
    def kappa_tot(self):
        return self.kappa_c + self.kappa_int


@dataclass(frozen=True)
class SimConfig:
    """Fixed RK4 step ``dt`` (us); one output sample every ``stride`` steps."""

    dt: float = 0.004
    stride: int = 5

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError("must be finite and > 0", "dt")
        if not isinstance(self.stride, (int, np.integer)) or self.stride < 1:
            raise ValidationError("must be an integer >= 1", "stride")

    @property
    def sample_interval(self):
        return self.dt * self.stride

    @classmethod
    def for_rate(cls, max_rate, sample_interval=0.02, target=0.05):
        """Largest step that divides ``sample_interval`` with dt * max_rate <= target."""
        stride = max(1, math.ceil(sample_interval * max_rate / target - 1e-9))
        return cls(sample_interval / stride, stride)


@dataclass
class Trace:
    """Sampled cavity field of one run.  ``final`` holds the spins at the end."""

    times: np.ndarray
    field: np.ndarray
    kappa_c: float
    final: Ensemble | None = None
    sequence: PulseSequence | None = None

    @property
    def emitted(self):
        return math.sqrt(self.kappa_c) * self.field

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def shifted(self, offset):
        seq = self.sequence.shifted(offset) if self.sequence is not None else None
        return Trace(self.times + offset, self.field.copy(), self.kappa_c, self.final, seq)

    def to_csv(self, target=None):
        """Write the CSV export to a path or text stream; return the text if ``target`` is None."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        out = self.emitted
        for t, a, e in zip(self.times, self.field, out):
            w.writerow([f"{t:.6f}", f"{a.real:.12e}", f"{a.imag:.12e}", f"{abs(a):.12e}",
                        f"{e.real:.12e}", f"{e.imag:.12e}"])
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return None


def read_trace_csv(path, kappa_c=None):
    """Load a trace CSV written by :meth:`Trace.to_csv`."""
    from .errors import DataSchemaError

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise DataSchemaError(f"header must be {','.join(TRACE_COLUMNS)}", row=1)
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    field = data[:, 1] + 1j * data[:, 2]
    if kappa_c is None:
        nz = np.abs(field) > 0
        kappa_c = float(np.median((np.abs(data[nz, 4] + 1j * data[nz, 5]) / np.abs(field[nz])) ** 2)) \
            if np.any(nz) else 1.0
    return Trace(data[:, 0], field, kappa_c)


# -- program construction -------------------------------------------------------

def max_rate(ens: Ensemble, cavity: CavityParams, seq: PulseSequence):
    """Largest rate the step size must resolve (rad/us).

    Includes spin detunings, total loss, window detunings, the drive rate and
    an estimate of the fastest Rabi rate 2 g_max |a| with |a| <= 2 eps/kappa.
    """
    eps_max = max((abs(p.amp_rel) * abs(cavity.drive) for p in seq.drives), default=0.0)
    rates = [cavity.kappa_tot, eps_max]
    if len(ens):
        rates.append(float(np.max(np.abs(ens.detuning))))
        rates.append(4.0 * float(np.max(ens.coupling)) * eps_max / cavity.kappa_tot)
    rates += [abs(w.delta) for w in seq.detunes]
    return max(rates)


def check_dt(dt, rate):
    x = dt * rate
    if x > DT_ERROR:
        raise ValidationError(
            f"dt*max_rate = {x:.3g} exceeds {DT_ERROR}; need dt < {DT_ERROR / rate:.3g} us "
            f"(recommended < {DT_WARN / rate:.3g} us)", "dt")
    if x > DT_WARN:
        warnings.warn(f"dt*max_rate = {x:.3g} exceeds {DT_WARN}; recommended dt < "
                      f"{DT_WARN / rate:.3g} us", RuntimeWarning, stacklevel=3)
    return x


def build_program(seq: PulseSequence, cavity: CavityParams, cfg: SimConfig):
    """Segment arrays for the kernel and the output time grid."""
    h_out = cfg.sample_interval
    total = float(seq.total_duration)
    n_out = int(math.floor(total / h_out + 1e-9))
    grid = np.arange(n_out + 1) * h_out
    tol = 1e-9 * max(1.0, total)

    points = list(grid)
    for e in seq.edges():
        k = int(round(e / h_out))
        if abs(e - k * h_out) <= tol or e > grid[-1] + tol:
            continue
        points.append(e)
    if total > grid[-1] + tol:
        points.append(total)
    points = np.array(sorted(points))
    on_grid = np.zeros(len(points), dtype=bool)
    idx = np.searchsorted(points, grid)
    on_grid[idx] = True

    lo, hi = points[:-1], points[1:]
    mids = 0.5 * (lo + hi)
    seg_n = np.ceil((hi - lo) / cfg.dt - 1e-9).astype(np.int64)
    seg_n = np.maximum(seg_n, 1)
    seg_h = (hi - lo) / seg_n
    seg_det = np.zeros(len(lo))
    seg_eps = np.zeros(len(lo), dtype=np.complex128)
    for w in seq.detunes:
        seg_det[(mids > w.t_start) & (mids < w.t_end)] += w.delta
    for p in seq.drives:
        seg_eps[(mids > p.t_start) & (mids < p.t_end)] += cavity.drive * p.amp_rel * np.exp(1j * p.phase)
    seg_rec = on_grid[1:].copy()
    return grid, seg_h, seg_n, seg_det, seg_eps, seg_rec


def integrate(bins, cavity: CavityParams, seq: PulseSequence, cfg: SimConfig = SimConfig(),
              a0: complex = 0j) -> Trace:
    """Integrate the equations of motion over ``seq``.

    ``bins`` is an :class:`Ensemble` (or a list of SpinBin); it is not
    modified.  The returned trace carries the final spin state in ``final``.
    """
    ens = bins if isinstance(bins, Ensemble) else Ensemble.from_bins(bins)
    check_dt(cfg.dt, max_rate(ens, cavity, seq))
    grid, seg_h, seg_n, seg_det, seg_eps, seg_rec = build_program(seq, cavity, cfg)

    s = np.ascontiguousarray(ens.s_minus, dtype=np.complex128)
    z = ens.sz.copy()
    gam2 = 0.0 if math.isinf(ens.T2) else 1.0 / ens.T2
    gam1 = 0.0 if math.isinf(ens.T1) else 1.0 / ens.T1
    out = np.empty(len(grid), dtype=np.complex128)
    _, status = _kernel.integrate_segments(
        complex(a0), s, z, ens.detuning, ens.coupling, ens.weight, gam2, gam1, ens.sz_eq,
        0.5 * cavity.kappa_tot, seg_h, seg_n, seg_det, seg_eps, seg_rec, out)
    if status >= 0:
        t_fail = float(np.cumsum(seg_h * seg_n)[status])
        raise NumericalError(f"non-finite cavity field at t = {t_fail:.6g} us")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(z))):
        raise NumericalError(f"non-finite spin state at t = {seq.total_duration:.6g} us")
    return Trace(grid, out, cavity.kappa_c, ens.with_state(s, z), seq)


# -- steady state and effective loss ----------------------------------------------

def steady_state_field(bins, cavity: CavityParams, drive: complex, spin_state: str) -> complex:
    """Linear-response steady-state cavity field for a resonant drive.

    ``saturated`` puts every sz at 0 (a = 2 eps/kappa_tot); ``polarized`` at
    -1/2.  The spin coherences are eliminated exactly from the linear steady
    state equations, leaving a scalar equation for ``a``.
    """
    ens = bins if isinstance(bins, Ensemble) else Ensemble.from_bins(bins)
    if spin_state == "saturated":
        sz = 0.0
    elif spin_state == "polarized":
        sz = -0.5
    else:
        raise ValidationError("must be 'saturated' or 'polarized'", "spin_state")
    gam2 = 0.0 if math.isinf(ens.T2) else 1.0 / ens.T2
    denom = gam2 + 1j * ens.detuning
    active = (ens.coupling > 0) & (sz != 0.0)
    if np.any(active & (np.abs(denom) == 0)):
        raise NumericalError("singular steady state: resonant bin without T2 damping")
    with np.errstate(divide="ignore", invalid="ignore"):
        resp = np.where(active, ens.weight * ens.coupling ** 2 * (-2.0 * sz) / denom, 0.0)
    coeff = 0.5 * cavity.kappa_tot + complex(np.sum(resp))
    if abs(coeff) == 0 or not np.isfinite(coeff):
        raise NumericalError("singular steady state: vanishing field response")
    return complex(drive) / coeff


def dressed_loss_rate(bins, cavity: CavityParams, probe=None, dt=None, bandwidth=None):
    """Cavity loss rate including absorption by the current spin state.

    Absorbing bins add 2 pi rho to kappa_tot, where rho is the spectral density
    of w g**2 (-2 sz) averaged over the power spectrum of the emitted signal.
    Pass the complex ``probe`` waveform sampled at ``dt`` (for example an echo),
    or a Lorentzian ``bandwidth`` (FWHM, rad/us, default kappa_tot).
    """
    ens = bins if isinstance(bins, Ensemble) else Ensemble.from_bins(bins)
    strength = ens.weight * ens.coupling ** 2 * (-2.0 * ens.sz)
    if probe is not None:
        probe = np.asarray(probe, dtype=complex)
        t = np.arange(len(probe)) * dt
        phases = np.exp(1j * np.outer(ens.detuning, t))
        spec = np.abs(phases @ probe * dt) ** 2
        norm = 2.0 * math.pi * float(np.sum(np.abs(probe) ** 2) * dt)
        kern = spec / norm
    else:
        bw = cavity.kappa_tot if bandwidth is None else bandwidth
        kern = (0.5 * bw / math.pi) / (ens.detuning ** 2 + (0.5 * bw) ** 2)
    return cavity.kappa_tot + 2.0 * math.pi * float(np.sum(strength * kern))
