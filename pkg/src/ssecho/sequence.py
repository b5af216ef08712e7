"""Pulse programs on two channels: cavity drive pulses and resonator detuning windows.

Events keep the units of the text format (us, MHz, degrees) so that text and
JSON round-trips are bit-exact; ``phase`` and ``delta`` give the angular values
used by the integrator.

Text format, one event per line, ``#`` starts a comment::

    pulse  <t_start_us> <dur_us> <amp_rel> <phase_deg>
    detune <t_start_us> <dur_us> <delta_MHz>
    tau    <tau_us>          # optional, default: spacing of the first two pulses
    end    <total_us>
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import SequenceSemanticError, SequenceSyntaxError, ValidationError
from .units import TWO_PI

FORMAT_TAG = "ssecho-sequence"


@dataclass(frozen=True)
class DrivePulse:
    t_start: float
    duration: float
    amp_rel: float = 1.0
    phase_deg: float = 0.0

    def __post_init__(self):
        _finite(self, ("t_start", "duration", "amp_rel", "phase_deg"))
        if not self.duration > 0:
            raise ValidationError("must be > 0", "pulse.duration")
        if not self.t_start >= 0:
            raise ValidationError("must be >= 0", "pulse.t_start")

    @property
    def t_end(self):
        return self.t_start + self.duration

    @property
    def center(self):
        return self.t_start + 0.5 * self.duration

    @property
    def phase(self):
        """Phase in rad."""
        return math.radians(self.phase_deg)

    def describe(self):
        return f"pulse [{self.t_start:g}, {self.t_end:g}] us"


@dataclass(frozen=True)
class DetuneWindow:
    t_start: float
    duration: float
    delta_mhz: float = 0.0

    def __post_init__(self):
        _finite(self, ("t_start", "duration", "delta_mhz"))
        if not self.duration > 0:
            raise ValidationError("must be > 0", "detune.duration")
        if not self.t_start >= 0:
            raise ValidationError("must be >= 0", "detune.t_start")

    @property
    def t_end(self):
        return self.t_start + self.duration

    @property
    def center(self):
        return self.t_start + 0.5 * self.duration

    @property
    def delta(self):
        """Cavity detuning in rad/us."""
        return TWO_PI * self.delta_mhz

    def describe(self):
        return f"detune [{self.t_start:g}, {self.t_end:g}] us"


def _finite(obj, names):
    for name in names:
        v = getattr(obj, name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(f"must be a finite number, got {v!r}", name)


def _overlaps(events):
    ev = sorted(events, key=lambda e: e.t_start)
    for prev, cur in zip(ev, ev[1:]):
        if cur.t_start < prev.t_end:
            return prev, cur
    return None


@dataclass(frozen=True)
class PulseSequence:
    """Validated program.  ``tau`` defaults to the start spacing of the first two pulses."""

    drives: tuple = ()
    detunes: tuple = ()
    total_duration: float = 0.0
    tau: float | None = field(default=None)

    def __post_init__(self):
        drives = tuple(sorted(self.drives, key=lambda e: e.t_start))
        detunes = tuple(sorted(self.detunes, key=lambda e: e.t_start))
        object.__setattr__(self, "drives", drives)
        object.__setattr__(self, "detunes", detunes)
        if not (isinstance(self.total_duration, (int, float)) and self.total_duration > 0
                and math.isfinite(self.total_duration)):
            raise ValidationError("must be finite and > 0", "total_duration")
        if self.tau is None:
            object.__setattr__(self, "tau", self.inferred_tau())
        elif not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValidationError("must be finite and > 0", "tau")
        for chan in (drives, detunes):
            clash = _overlaps(chan)
            if clash:
                raise SequenceSemanticError(
                    f"{clash[0].describe()} overlaps {clash[1].describe()}", clash)
        for ev in drives + detunes:
            if ev.t_end > self.total_duration:
                raise SequenceSemanticError(
                    f"{ev.describe()} ends after end {self.total_duration:g} us", (ev,))

    def inferred_tau(self):
        if len(self.drives) >= 2:
            tau = self.drives[1].t_start - self.drives[0].t_start
            return tau if tau > 0 else None
        return None

    @property
    def t_ref(self):
        """Echo bookkeeping origin: centre of the first pulse (0 without pulses)."""
        return self.drives[0].center if self.drives else 0.0

    def echo_time(self, k):
        """Expected time of echo ``k`` (echo1 sits at 2 tau)."""
        if self.tau is None:
            raise ValidationError("sequence has no tau", "tau")
        return self.t_ref + (k + 1) * self.tau

    def edges(self):
        out = {0.0, float(self.total_duration)}
        for ev in self.drives + self.detunes:
            out.add(float(ev.t_start))
            out.add(float(ev.t_end))
        return sorted(out)

    def shifted(self, dt):
        """Same program delayed by ``dt`` us (total duration grows by ``dt``)."""
        return PulseSequence(
            tuple(DrivePulse(p.t_start + dt, p.duration, p.amp_rel, p.phase_deg) for p in self.drives),
            tuple(DetuneWindow(w.t_start + dt, w.duration, w.delta_mhz) for w in self.detunes),
            self.total_duration + dt, self.tau)

    def with_phase_offset(self, phase_deg):
        return PulseSequence(
            tuple(DrivePulse(p.t_start, p.duration, p.amp_rel, p.phase_deg + phase_deg)
                  for p in self.drives),
            self.detunes, self.total_duration, self.tau)

    def truncated(self, t_end):
        """Program cut at ``t_end``; events are clipped to it."""
        def clip(ev, cls, *rest):
            if ev.t_start >= t_end:
                return None
            return cls(ev.t_start, min(ev.t_end, t_end) - ev.t_start, *rest)
        drives = [clip(p, DrivePulse, p.amp_rel, p.phase_deg) for p in self.drives]
        detunes = [clip(w, DetuneWindow, w.delta_mhz) for w in self.detunes]
        return PulseSequence(tuple(d for d in drives if d), tuple(d for d in detunes if d),
                             t_end, self.tau)

    def without_detunes(self):
        return PulseSequence(self.drives, (), self.total_duration, self.tau)


# -- text format ---------------------------------------------------------------

_ARITY = {"pulse": 4, "detune": 3, "end": 1, "tau": 1}


def _tokens(line):
    """Split into (token, 1-based column) pairs."""
    out, i = [], 0
    while i < len(line):
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < len(line) and not line[j].isspace():
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def _number(tok, col, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise SequenceSyntaxError(f"expected a number, got {tok!r}", lineno, col) from None
    if not math.isfinite(v):
        raise SequenceSyntaxError(f"non-finite number {tok!r}", lineno, col)
    return v


def parse_sequence(text: str) -> PulseSequence:
    """Parse the line format (or the JSON form, detected by a leading ``{``)."""
    if text.lstrip().startswith("{"):
        return sequence_from_json(text)
    drives, detunes = [], []
    total = tau = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        key, kcol = toks[0]
        if key not in _ARITY:
            raise SequenceSyntaxError(f"unknown keyword {key!r}", lineno, kcol)
        args = toks[1:]
        if len(args) != _ARITY[key]:
            col = args[_ARITY[key]][1] if len(args) > _ARITY[key] else len(raw.rstrip()) + 1
            raise SequenceSyntaxError(
                f"{key!r} takes {_ARITY[key]} values, got {len(args)}", lineno, col)
        vals = [_number(t, c, lineno) for t, c in args]
        if total is not None:
            raise SequenceSyntaxError("event after 'end'", lineno, kcol)
        try:
            if key == "pulse":
                drives.append(DrivePulse(*vals))
            elif key == "detune":
                detunes.append(DetuneWindow(*vals))
            elif key == "tau":
                if tau is not None:
                    raise SequenceSyntaxError("duplicate 'tau'", lineno, kcol)
                tau = vals[0]
            else:
                total = vals[0]
        except ValidationError as exc:
            if isinstance(exc, SequenceSyntaxError):
                raise
            raise SequenceSyntaxError(str(exc), lineno, kcol) from None
    if total is None:
        raise SequenceSyntaxError("missing 'end' line", len(text.splitlines()) + 1)
    return PulseSequence(tuple(drives), tuple(detunes), total, tau)


def _fmt(v):
    return repr(float(v))


def serialize_sequence(seq: PulseSequence) -> str:
    """Text form; floats use the shortest repr so parsing restores them exactly."""
    lines = []
    for p in seq.drives:
        lines.append(f"pulse {_fmt(p.t_start)} {_fmt(p.duration)} {_fmt(p.amp_rel)} {_fmt(p.phase_deg)}")
    for w in seq.detunes:
        lines.append(f"detune {_fmt(w.t_start)} {_fmt(w.duration)} {_fmt(w.delta_mhz)}")
    if seq.tau is not None and seq.tau != seq.inferred_tau():
        lines.append(f"tau {_fmt(seq.tau)}")
    lines.append(f"end {_fmt(seq.total_duration)}")
    return "\n".join(lines) + "\n"


def sequence_to_dict(seq: PulseSequence) -> dict:
    return {
        "format": FORMAT_TAG,
        "end_us": float(seq.total_duration),
        "tau_us": None if seq.tau is None else float(seq.tau),
        "events": [{"type": "pulse", "t_start_us": float(p.t_start), "dur_us": float(p.duration),
                    "amp_rel": float(p.amp_rel), "phase_deg": float(p.phase_deg)}
                   for p in seq.drives]
                  + [{"type": "detune", "t_start_us": float(w.t_start), "dur_us": float(w.duration),
                      "delta_mhz": float(w.delta_mhz)} for w in seq.detunes],
    }


def sequence_to_json(seq: PulseSequence) -> str:
    return json.dumps(sequence_to_dict(seq), indent=1)


def sequence_from_dict(doc: dict) -> PulseSequence:
    if not isinstance(doc, dict) or "end_us" not in doc:
        raise ValidationError("sequence document needs 'end_us'", "sequence")
    drives, detunes = [], []
    for i, ev in enumerate(doc.get("events", [])):
        try:
            kind = ev["type"]
            if kind == "pulse":
                drives.append(DrivePulse(float(ev["t_start_us"]), float(ev["dur_us"]),
                                         float(ev.get("amp_rel", 1.0)), float(ev.get("phase_deg", 0.0))))
            elif kind == "detune":
                detunes.append(DetuneWindow(float(ev["t_start_us"]), float(ev["dur_us"]),
                                            float(ev.get("delta_mhz", 0.0))))
            else:
                raise ValidationError(f"unknown event type {kind!r}", f"events[{i}].type")
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed event: {exc}", f"events[{i}]") from None
    tau = doc.get("tau_us")
    return PulseSequence(tuple(drives), tuple(detunes), float(doc["end_us"]),
                         None if tau is None else float(tau))


def sequence_from_json(text: str) -> PulseSequence:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SequenceSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return sequence_from_dict(doc)


# -- presets --------------------------------------------------------------------

PRESETS = ("fig1b", "fig2a", "fig2e", "fig3e")


def _two_pulse(tau, pulse_us, amp1, amp2, phase_deg):
    return [DrivePulse(0.0, pulse_us, amp1, phase_deg), DrivePulse(tau, pulse_us, amp2, phase_deg)]


def make_preset(name, *, tau=25.0, pulse_us=2.0, amp1=None, amp2=None, phase_deg=0.0,
                n_echoes=4, guard_us=5.0, total_us=None, variant="plain", echo=2,
                delta_mhz=None, window_us=None, offset_us=0.0, beta1_ratio=None):
    """Build one of the named protocols.

    fig1b   two equal pulses, optionally a detune window that silences echo
            ``echo`` (variant "silence") or sits in the gap before it
            (variant "between").
    fig2a   two pulses plus a window of ``window_us`` centred on echo1
            (shifted by ``offset_us``) at cavity detuning ``delta_mhz``.
    fig2e   first pulse scaled by ``beta1_ratio``, second pulse fixed.
    fig3e   two equal pulses at the reference amplitude.

    Echo times are counted from the centre of the first pulse.  ``guard_us``
    is the echo detection half-width; the default trace ends ``guard_us + 4``
    after the last expected echo.
    """
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {PRESETS}", "preset")
    t_ref = 0.5 * pulse_us
    if total_us is None:
        total_us = math.ceil(t_ref + (n_echoes + 1) * tau + guard_us + 4.0)
    detunes = []
    if name == "fig1b":
        a1 = 0.4 if amp1 is None else amp1
        a2 = a1 if amp2 is None else amp2
        delta = 20.0 if delta_mhz is None else delta_mhz
        if variant == "silence":
            width = 20.0 if window_us is None else window_us
            centre = t_ref + (echo + 1) * tau + offset_us
            detunes.append(DetuneWindow(centre - 0.5 * width, width, delta))
        elif variant == "between":
            width = (tau - 2 * guard_us) if window_us is None else window_us
            centre = t_ref + (echo + 0.5) * tau + offset_us
            win = DetuneWindow(centre - 0.5 * width, width, delta)
            lo_echo, hi_echo = t_ref + echo * tau + guard_us, t_ref + (echo + 1) * tau - guard_us
            if win.t_start < lo_echo - 1e-12 or win.t_end > hi_echo + 1e-12:
                raise SequenceSemanticError(
                    f"{win.describe()} overlaps an echo window; needs duration <= {tau - 2 * guard_us:g}",
                    (win,))
            detunes.append(win)
        elif variant != "plain":
            raise ValidationError("must be plain, silence or between", "variant")
    elif name == "fig2a":
        a1 = 1.0 if amp1 is None else amp1
        a2 = 1.0 if amp2 is None else amp2
        width = 20.0 if window_us is None else window_us
        centre = t_ref + 2 * tau + offset_us
        detunes.append(DetuneWindow(centre - 0.5 * width, width, 0.0 if delta_mhz is None else delta_mhz))
    elif name == "fig2e":
        ratio = 1.0 if beta1_ratio is None else beta1_ratio
        a1 = ratio if amp1 is None else amp1
        a2 = 1.0 if amp2 is None else amp2
    else:
        a1 = 1.0 if amp1 is None else amp1
        a2 = 1.0 if amp2 is None else amp2
    drives = _two_pulse(tau, pulse_us, a1, a2, phase_deg)
    for w in detunes:
        for p in drives:
            if w.t_start < p.t_end and p.t_start < w.t_end:
                raise SequenceSemanticError(f"{w.describe()} overlaps {p.describe()}", (w, p))
    return PulseSequence(tuple(drives), tuple(detunes), float(total_us), float(tau))
