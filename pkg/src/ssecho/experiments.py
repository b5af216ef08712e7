"""Run configured experiments and sweeps, and derive the summary numbers."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import filter_function, fit_eta, fit_eta_pooled, fit_linear_through_origin
from .config import resolve, set_path
from .dynamics import Trace, dressed_loss_rate, integrate
from .ensemble import ensemble_quantities, nominal_cooperativity
from .errors import InsufficientDataError
from .detection import extract_echoes
from .units import TWO_PI


@dataclass
class RunResult:
    experiment: object
    trace: Trace
    records: list
    summary: dict = field(default_factory=dict)


def run_experiment(exp) -> RunResult:
    ens = exp.ensemble()
    trace = integrate(ens, exp.cavity, exp.sequence, exp.sim)
    records = extract_echoes(trace, exp.sequence.tau, exp.n_echoes, exp.window_halfwidth)
    q = ensemble_quantities(ens, exp.spec.linewidth, exp.cavity.kappa_tot)
    summary = {
        "version": __version__,
        "config": exp.resolved,
        "metric": exp.metric,
        "ensemble": {
            "n_bins": len(ens),
            "g_ens_in_band_mhz": q.g_ens / TWO_PI,
            "cooperativity_in_band": q.cooperativity,
            "cooperativity_nominal": nominal_cooperativity(exp.spec, exp.cavity.kappa_tot),
        },
        "echoes": [{"k": r.k, "t_peak_us": r.t_peak, "offset_us": r.t_peak - exp.sequence.echo_time(r.k),
                    "amplitude": r.amplitude(exp.metric), "peak_mag": r.peak_mag,
                    "flagged": r.flagged} for r in records],
    }
    if len(exp.sequence.drives) >= 2:
        b1, b2 = exp.betas()
        try:
            fit = fit_eta(records, b1, b2, exp.metric)
            summary["eta"] = {"eta": fit.eta, "ratio": fit.ratio, "residual_rms": fit.residual_rms,
                              "n_used": fit.n_used, "beta1_deg": math.degrees(b1),
                              "beta2_deg": math.degrees(b2)}
        except (InsufficientDataError, ValueError):
            summary["eta"] = None
    return RunResult(exp, trace, records, summary)


def echo_loss_rate(result: RunResult, k=1):
    """Dressed loss rate seen by echo ``k``: spins at the start of its window,
    weighted by the echo's power spectrum (rad/us)."""
    exp = result.experiment
    t0 = exp.sequence.echo_time(k) - exp.window_halfwidth
    early = integrate(exp.ensemble(), exp.cavity, exp.sequence.truncated(t0), exp.sim)
    tr = result.trace
    sel = (tr.times >= t0) & (tr.times <= t0 + 2 * exp.window_halfwidth)
    return dressed_loss_rate(early.final, exp.cavity, probe=tr.emitted[sel], dt=tr.dt)


def _point(doc, path, value, seed):
    return run_experiment(resolve(set_path(doc, path, value), seed))


def run_sweep(doc, path=None, values=None, threads=1, seed=None):
    """Run every sweep point.  Returns (sorted values, results, summary)."""
    sweep = doc.get("sweep", {})
    path = path or sweep.get("path")
    values = list(sweep.get("values", []) if values is None else values)
    if not path or not values:
        from .errors import ValidationError
        raise ValidationError("sweep needs a path and values", "sweep")
    values = sorted(float(v) for v in values)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda v: _point(doc, path, v, seed), values))
    else:
        results = [_point(doc, path, v, seed) for v in values]
    return values, results, sweep_summary(path, values, results)


def sweep_summary(path, values, results):
    metric = results[0].experiment.metric
    amps = np.array([[r.amplitude(metric) for r in res.records] for res in results])
    out = {"version": __version__, "path": path, "values": values, "metric": metric,
           "points": [res.summary for res in results]}
    if len(values) >= 3 and amps.shape[1] >= 3:
        try:
            f21 = fit_linear_through_origin(amps[:, 0], amps[:, 1])
            f32 = fit_linear_through_origin(amps[:, 1], amps[:, 2])
            out["slopes"] = {"echo2_vs_echo1": f21.slope, "r2_21": f21.r2,
                             "echo3_vs_echo2": f32.slope, "r2_32": f32.r2}
        except InsufficientDataError:
            pass
    if path.endswith("delta_mhz") and 0.0 in values:
        base = results[values.index(0.0)]
        kappa = echo_loss_rate(base)
        x = TWO_PI * np.array(values) / kappa
        meas = amps[:, 0] / amps[values.index(0.0), 0]
        model = filter_function(TWO_PI * np.array(values), kappa)
        out["filter"] = {"kappa_eff_mhz": kappa / TWO_PI, "x": x.tolist(), "measured": meas.tolist(),
                         "model": model.tolist(),
                         "rms_rel": float(np.sqrt(np.mean((meas / model - 1) ** 2)))}
    if len(values) >= 2 and all(len(res.experiment.sequence.drives) >= 2 for res in results):
        sets = [(res.records, *res.experiment.betas()) for res in results]
        try:
            pooled = fit_eta_pooled(sets, metric)
            out["eta"] = {"pooled": pooled.eta, "per_point": list(pooled.per_dataset),
                          "spread": pooled.spread}
        except InsufficientDataError:
            out["eta"] = None
    return out
