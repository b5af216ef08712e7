"""Experiment configs: one JSON document in MHz (linear), us and degrees.

Conversion to internal angular units happens only in :func:`resolve`.
Preset configs for the four reference experiments are embedded here.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .dynamics import CavityParams, SimConfig, max_rate
from .ensemble import EnsembleSpec, build_ensemble
from .errors import ValidationError
from .sequence import PRESETS as SEQUENCE_PRESETS
from .sequence import PulseSequence, make_preset, parse_sequence, sequence_from_dict
from .units import TWO_PI

# Desk-scale model of the I=0 sample: 4800 bins = 400 detunings x 12 coupling
# classes.  Only a 1.25 MHz half-band around the cavity is simulated; spins
# further out barely interact during a 2 us pulse or a ~3 us echo.
_BASE = {
    "ensemble": {
        "n_bins": 4800,
        "lineshape": "lorentzian",
        "linewidth_mhz": 76.0,
        "band_halfwidth_mhz": 1.25,
        "edge_taper": 0.3,
        "coupling_dist": "annulus",
        "g_min_mhz": 0.1,
        "g_max_mhz": 10.0,
        "coupling_classes": 12,
        "g_ens_mhz": 10.0,
        "T1_us": None,
        "T2_us": None,
        "polarization": 1.0,
        "sampling": "grid",
    },
    "cavity": {"kappa_c_mhz": 1.9, "kappa_int_mhz": 0.0, "drive_mhz": 0.05},
    "sim": {"dt_us": "auto", "sample_interval_us": 0.02, "dt_target": 0.05},
    "detection": {"n_echoes": 4, "window_halfwidth_us": 5.0, "metric": "area"},
    "analysis": {"beta_per_amp_deg": 90.0},
    "seed": 0,
}

PRESET_CONFIGS = {
    "fig1b": {
        "description": "Two equal 2 us pulses, tau = 25 us: Hahn echo plus self-stimulated echoes",
        "sequence": {"preset": "fig1b", "params": {}},
    },
    "fig2c": {
        "description": "20 us cavity detuning window over echo1, swept in detuning",
        "sequence": {"preset": "fig2a", "params": {"delta_mhz": 0.0}},
        "sim": {"dt_target": 0.1},
        "sweep": {"path": "sequence.params.delta_mhz",
                  "values": [0.0, 1.5, 3.0, 6.0, 9.0, 12.0, 16.0, 21.0]},
    },
    "fig2e": {
        "description": "First-pulse amplitude swept at fixed second pulse",
        "sequence": {"preset": "fig2e", "params": {}},
        "sweep": {"path": "sequence.params.beta1_ratio", "values": [1.0, 0.75, 0.5, 0.25]},
    },
    "fig3e": {
        "description": "Two 90 degree pulses at several cooperativities (fixed kappa, linewidth)",
        "sequence": {"preset": "fig3e", "params": {}},
        "sweep": {"path": "ensemble.cooperativity", "values": [0.2, 0.5, 1.0, 2.0, 3.0]},
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset_config(name):
    if name not in PRESET_CONFIGS:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESET_CONFIGS)}", "preset")
    return _merge(_BASE, PRESET_CONFIGS[name])


def load_config(source):
    """Config dict from a preset name, a JSON file path or a dict.  Files
    may override a preset through a top-level ``"preset"`` key."""
    if isinstance(source, dict):
        doc = source
        base_dir = Path(".")
    elif source in PRESET_CONFIGS:
        return preset_config(source)
    else:
        path = Path(source)
        if not path.is_file():
            raise ValidationError(f"no such file: {source}", "config")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON at line {exc.lineno}: {exc.msg}", "config") from None
        base_dir = path.parent
    if not isinstance(doc, dict):
        raise ValidationError("top level must be an object", "config")
    user_ens = doc.get("ensemble", {})
    if "preset" in doc:
        doc = _merge(preset_config(doc["preset"]), {k: v for k, v in doc.items() if k != "preset"})
    else:
        doc = _merge(_BASE, doc)
    # a user-given alternative replaces the inherited default
    for given, inherited in (("truncation", "band_halfwidth_mhz"), ("n_spins", "g_ens_mhz"),
                             ("cooperativity", "g_ens_mhz")):
        if given in user_ens and inherited not in user_ens:
            doc["ensemble"].pop(inherited, None)
    seq = doc.get("sequence", {})
    if "file" in seq:
        p = Path(seq["file"])
        if not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            raise ValidationError(f"no such file: {seq['file']}", "sequence.file")
        doc["sequence"] = {"text": p.read_text()}
    return doc


# -- path access for sweeps ---------------------------------------------------------

_VIRTUAL = {"ensemble.cooperativity"}


def set_path(doc, path, value):
    """Copy of ``doc`` with dotted ``path`` set to ``value``."""
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(f"sweep value must be finite, got {value!r}", "sweep.values")
    out = copy.deepcopy(doc)
    if path in _VIRTUAL:
        out["ensemble"]["cooperativity"] = value
        return out
    keys = path.split(".")
    node = out
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ValidationError(f"path does not resolve at {k!r}", "sweep.path")
        node = node[k]
    last = keys[-1]
    if keys[:2] == ["sequence", "params"] or last in node:
        node[last] = value
        return out
    raise ValidationError(f"unknown field {path!r}", "sweep.path")


# -- resolution ---------------------------------------------------------------------------

@dataclass
class Experiment:
    spec: EnsembleSpec
    cavity: CavityParams
    sequence: PulseSequence
    sim: SimConfig
    n_echoes: int
    window_halfwidth: float
    metric: str
    beta_per_amp: float
    seed: int
    resolved: dict

    def ensemble(self):
        return build_ensemble(self.spec)

    def betas(self):
        """Nominal flip angles (rad) of the first two pulses."""
        return tuple(math.radians(self.beta_per_amp * p.amp_rel) for p in self.sequence.drives[:2])


def _num(d, key, default=None, allow_none=False):
    v = d.get(key, default)
    if v is None:
        if allow_none:
            return None
        raise ValidationError("required", key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"must be a number, got {v!r}", key)
    return float(v)


_ENSEMBLE_KEYS = {"n_bins", "lineshape", "linewidth_mhz", "truncation", "band_halfwidth_mhz",
                  "edge_taper", "coupling_dist", "g_min_mhz", "g_max_mhz", "coupling_classes",
                  "g_ens_mhz", "n_spins", "T1_us", "T2_us", "polarization", "sampling",
                  "cooperativity", "seed"}


def resolve(doc, seed=None) -> Experiment:
    """Validate a config dict and convert it to internal units."""
    seed = int(doc.get("seed", 0) if seed is None else seed)
    e = doc.get("ensemble", {})
    unknown = set(e) - _ENSEMBLE_KEYS
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", "ensemble")
    c = doc.get("cavity", {})
    cavity = CavityParams(TWO_PI * _num(c, "kappa_c_mhz"), TWO_PI * _num(c, "kappa_int_mhz", 0.0),
                          TWO_PI * _num(c, "drive_mhz", 1.0))
    linewidth = TWO_PI * _num(e, "linewidth_mhz", 0.0)
    if "band_halfwidth_mhz" in e and e["band_halfwidth_mhz"] is not None:
        if linewidth <= 0:
            raise ValidationError("needs linewidth_mhz > 0", "band_halfwidth_mhz")
        truncation = TWO_PI * _num(e, "band_halfwidth_mhz") / linewidth
    else:
        truncation = _num(e, "truncation", 5.0)
    g_ens = _num(e, "g_ens_mhz", None, allow_none=True)
    if e.get("cooperativity") is not None:
        coop = _num(e, "cooperativity")
        if coop < 0 or linewidth <= 0:
            raise ValidationError("needs cooperativity >= 0 and linewidth_mhz > 0", "cooperativity")
        g_ens = math.sqrt(coop * cavity.kappa_tot * linewidth / 4.0) / TWO_PI
    t1 = _num(e, "T1_us", None, allow_none=True)
    t2 = _num(e, "T2_us", None, allow_none=True)
    spec = EnsembleSpec(
        n_bins=int(_num(e, "n_bins", 1)),
        linewidth=linewidth,
        lineshape=e.get("lineshape", "lorentzian"),
        truncation=truncation,
        edge_taper=_num(e, "edge_taper", 0.0),
        coupling_dist=e.get("coupling_dist", "uniform"),
        g_min=TWO_PI * _num(e, "g_min_mhz", 1.0),
        g_max=TWO_PI * _num(e, "g_max_mhz", 1.0),
        coupling_classes=int(_num(e, "coupling_classes", 1)),
        g_ens=None if g_ens is None else TWO_PI * g_ens,
        n_spins=_num(e, "n_spins", None, allow_none=True),
        T1=math.inf if t1 is None else t1,
        T2=math.inf if t2 is None else t2,
        polarization=_num(e, "polarization", 1.0),
        sampling=e.get("sampling", "grid"),
        seed=int(e.get("seed", seed)),
    )

    s = doc.get("sequence")
    if not isinstance(s, dict):
        raise ValidationError("missing sequence (preset, text, json or file)", "sequence")
    if "preset" in s:
        if s["preset"] not in SEQUENCE_PRESETS:
            raise ValidationError(f"unknown sequence preset {s['preset']!r}", "sequence.preset")
        try:
            seq = make_preset(s["preset"], **s.get("params", {}))
        except TypeError as exc:
            raise ValidationError(str(exc), "sequence.params") from None
    elif "text" in s:
        seq = parse_sequence(s["text"])
    elif "json" in s:
        seq = sequence_from_dict(s["json"])
    else:
        raise ValidationError("needs preset, text, json or file", "sequence")

    det = doc.get("detection", {})
    metric = det.get("metric", "area")
    if metric not in ("peak", "area"):
        raise ValidationError("must be peak or area", "detection.metric")

    sim = doc.get("sim", {})
    dt = sim.get("dt_us", "auto")
    if dt == "auto":
        ens = build_ensemble(spec)
        rate = max_rate(ens, cavity, seq)
        cfg = SimConfig.for_rate(rate, _num(sim, "sample_interval_us", 0.02), _num(sim, "dt_target", 0.05))
    else:
        cfg = SimConfig(_num(sim, "dt_us"), int(_num(sim, "stride", 1)))

    resolved = copy.deepcopy(doc)
    resolved["seed"] = seed
    resolved["resolved_units"] = {
        "kappa_c_rad_per_us": cavity.kappa_c, "kappa_int_rad_per_us": cavity.kappa_int,
        "drive_rad_per_us": cavity.drive, "linewidth_rad_per_us": spec.linewidth,
        "truncation_in_linewidths": spec.truncation, "g_min_rad_per_us": spec.g_min,
        "g_max_rad_per_us": spec.g_max, "g_ens_rad_per_us": spec.g_ens,
        "dt_us": cfg.dt, "stride": cfg.stride, "tau_us": seq.tau,
    }
    return Experiment(spec, cavity, seq, cfg, int(det.get("n_echoes", 4)),
                      _num(det, "window_halfwidth_us", 5.0), metric,
                      _num(doc.get("analysis", {}), "beta_per_amp_deg", 90.0), seed, resolved)
