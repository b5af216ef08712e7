"""Command-line batch runner.

    ssecho run    --config fig1b --out out/
    ssecho sweep  --config fig2c --out out/ --threads 2
    ssecho fit    eta --input out/echoes.csv --beta1-deg 90 --beta2-deg 90
    ssecho preset list

``--config`` takes a preset name or a JSON file.  Exit codes: 0 ok,
2 config/validation, 3 data schema, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fit_cw_sweep, fit_eta, fit_linear_through_origin, fit_recovery
from .config import PRESET_CONFIGS, load_config, preset_config, resolve
from .detection import records_from_csv, records_to_csv
from .errors import DataSchemaError, SSEError, ValidationError
from .experiments import run_experiment, run_sweep
from .units import TWO_PI


def _dump(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=True, default=_jsonable) + "\n"
    Path(path).write_text(text)
    return text


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(result, out):
    result.trace.to_csv(out / "trace.csv")
    records_to_csv(result.records, out / "echoes.csv")
    _dump(result.summary, out / "summary.json")


def cmd_run(args):
    doc = load_config(args.config)
    result = run_experiment(resolve(doc, args.seed))
    out = _out_dir(args)
    _write_run(result, out)
    for e in result.summary["echoes"]:
        flag = "  (below noise)" if e["flagged"] else ""
        print(f"echo{e['k']}  t={e['t_peak_us']:.2f} us  {result.summary['metric']}={e['amplitude']:.4g}{flag}")
    return 0


def _point_name(path, value):
    return f"point_{path.split('.')[-1]}={value!r}"


def cmd_sweep(args):
    doc = load_config(args.config)
    values, results, summary = run_sweep(doc, threads=args.threads, seed=args.seed)
    out = _out_dir(args)
    path = summary["path"]
    for v, res in zip(values, results):
        d = out / _point_name(path, v)
        d.mkdir(exist_ok=True)
        _write_run(res, d)
    metric = summary["metric"]
    with open(out / "combined.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep_value", "echo_k", "amplitude", "metric", "t_peak_us", "flagged"])
        for v, res in zip(values, results):
            for r in res.records:
                w.writerow([repr(v), r.k, repr(r.amplitude(metric)), metric, repr(r.t_peak), int(r.flagged)])
    _dump(summary, out / "summary.json")
    for v, res in zip(values, results):
        eta = res.summary.get("eta")
        amps = ", ".join(f"{r.amplitude(metric):.3g}" for r in res.records)
        print(f"{path}={v:g}: [{amps}]" + (f"  eta={eta['eta']:.3f}" if eta else ""))
    if summary.get("eta"):
        print(f"pooled eta = {summary['eta']['pooled']:.4f} (spread {summary['eta']['spread']:.3f})")
    return 0


# -- fit subcommands --------------------------------------------------------------------

def _read_table(path, columns):
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"no such file: {path}", "input")
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataSchemaError("empty file", row=1)
    header = [h.strip() for h in rows[0]]
    for c in columns:
        if c not in header:
            raise DataSchemaError(f"missing column; header must include {list(columns)}", row=1, column=c)
    idx = [header.index(c) for c in columns]
    data = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataSchemaError(f"expected {len(header)} fields, got {len(row)}", row=n)
        vals = []
        for c, i in zip(columns, idx):
            try:
                v = float(row[i])
            except ValueError:
                raise DataSchemaError(f"bad value {row[i]!r}", row=n, column=c) from None
            if not math.isfinite(v):
                raise DataSchemaError(f"non-finite value {row[i]!r}", row=n, column=c)
            vals.append(v)
        data.append(vals)
    return np.array(data, dtype=float).reshape(-1, len(columns))


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_fit(args):
    kind = args.kind
    if kind == "eta":
        records = records_from_csv(args.input)
        fit = fit_eta(records, math.radians(args.beta1_deg), math.radians(args.beta2_deg), args.metric)
        params = {"eta": {"value": fit.eta, "unit": "1"},
                  "ratio": {"value": fit.ratio, "unit": "1"}}
        cov = {}
        extra = {"metric": fit.metric, "n_used": fit.n_used, "predicted": list(fit.predicted),
                 "beta1_deg": args.beta1_deg, "beta2_deg": args.beta2_deg}
        rms = fit.residual_rms
    elif kind == "cw":
        data = _read_table(args.input, ("detuning_mhz", "kappa_tot_mhz"))
        fit = fit_cw_sweep(TWO_PI * data[:, 0], TWO_PI * data[:, 1], seed=args.seed)
        vals = {"g_ens": fit.g_ens, "gamma": fit.gamma, "kappa": fit.kappa}
        params = {k: {"value": v / TWO_PI, "unit": "MHz"} for k, v in vals.items()}
        cov = {k: v / TWO_PI ** 2 for k, v in zip(vals, fit.cov_diag)}
        extra = {"flags": list(fit.flags)}
        rms = fit.residual_rms / TWO_PI
    elif kind == "recovery":
        data = _read_table(args.input, ("time_ms", "signal"))
        fit = fit_recovery(data[:, 0], data[:, 1], args.model, seed=args.seed)
        params = {f"A{i + 1}": {"value": a, "unit": "signal"} for i, a in enumerate(fit.amplitudes)}
        params.update({f"T1_{i + 1}": {"value": t, "unit": "ms"} for i, t in enumerate(fit.t1)})
        params["baseline"] = {"value": fit.baseline, "unit": "signal"}
        cov = dict(zip(params, fit.cov_diag))
        extra = {"flags": list(fit.flags)}
        rms = fit.residual_rms
    else:
        data = _read_table(args.input, ("x", "y"))
        fit = fit_linear_through_origin(data[:, 0], data[:, 1])
        params = {"slope": {"value": fit.slope, "unit": "1"}}
        cov = {"slope": fit.stderr ** 2}
        extra = {"r2": fit.r2, "n": fit.n}
        rms = float(np.sqrt(np.mean((data[:, 1] - fit.slope * data[:, 0]) ** 2)))
    model = kind if kind != "recovery" else f"recovery_{args.model}"
    summary = {"model": model, "parameters": params, "covariance_diagonal": cov,
               "residual_rms": rms, "input": {"path": str(args.input), "sha256": _sha256(args.input)},
               "version": __version__, **extra}
    text = json.dumps(summary, indent=1, sort_keys=True, default=_jsonable) + "\n"
    if args.out:
        out = _out_dir(args)
        (out / f"fit_{model}.json").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_preset(args):
    if args.action == "list":
        for name in sorted(PRESET_CONFIGS):
            print(f"{name:6s}  {PRESET_CONFIGS[name]['description']}")
    else:
        if not args.name:
            raise ValidationError("preset show needs a name", "name")
        print(json.dumps(preset_config(args.name), indent=1))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ssecho", description="Self-stimulated echo simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="preset name or JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
        sp.add_argument("--out", default="ssecho_out", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")

    common(sub.add_parser("run", help="simulate one sequence"))
    common(sub.add_parser("sweep", help="simulate a parameter sweep"))

    fp = sub.add_parser("fit", help="fit a model to CSV data")
    fp.add_argument("kind", choices=("eta", "cw", "recovery", "linear"))
    fp.add_argument("--input", required=True)
    fp.add_argument("--beta1-deg", type=float, default=90.0)
    fp.add_argument("--beta2-deg", type=float, default=90.0)
    fp.add_argument("--metric", choices=("peak", "area"), default="peak")
    fp.add_argument("--model", choices=("mono", "bi"), default="mono")
    fp.add_argument("--seed", type=int, default=0)
    fp.add_argument("--out", default=None)
    fp.add_argument("--threads", type=int, default=1)

    pp = sub.add_parser("preset", help="list or show embedded presets")
    pp.add_argument("action", choices=("list", "show"))
    pp.add_argument("name", nargs="?")
    return p


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "fit": cmd_fit, "preset": cmd_preset}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except SSEError as exc:
        print(f"ssecho: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
