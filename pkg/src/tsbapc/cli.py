"""Command-line entry point ``tsbapc``.

Exit status: 0 on success, 2 for configuration or input errors, 3 for
numerical failures. Every command writes ``manifest.json`` listing the
resolved settings next to its artifacts.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, kernels
from .attribution import PrecisionError, attribute_bapc, ig_heatmaps
from .correction import CorrectionOptions, fit_correction
from .engine import bapc, sbapc, window_scan
from .io import load_air_passengers, write_csv, write_json, write_series
from .lime import lime_explain
from .models import FitConfig, FitError, canonical_family, fit_ar2_robust, fit
from .synthetic import KINDS as SYNTHETIC_KINDS
from .synthetic import SyntheticSpec, generate
from .timeseries import CSVFormatError, WindowConfig, read_series_csv, slice_series

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DATASETS = (*SYNTHETIC_KINDS, "airpassengers")


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# -- argument groups ---------------------------------------------------------

def _add_dataset(p):
    g = p.add_argument_group("data")
    g.add_argument("--dataset", choices=DATASETS, help="built-in series")
    g.add_argument("--csv", help="series file with header value, t,value or label,value")
    g.add_argument("--length", type=int, help="length of a synthetic series")
    g.add_argument("--change-index", type=int, help="first affected sample of a synthetic series")


def _add_base(p, default="constant"):
    g = p.add_argument_group("base model")
    g.add_argument("--base", default=default, help="constant, linear, polyseasonal, sinusoid, damped-sinusoid, ar2")
    g.add_argument("--period", type=float, default=12.0)
    g.add_argument("--omega", type=float, help="fixed angular frequency of the sinusoid family")
    g.add_argument("--no-robust", action="store_true", help="plain least squares for ar2")
    g.add_argument("--robust-k", type=float, default=3.0)
    g.add_argument("--max-iterations", type=int, default=200)
    g.add_argument("--tolerance", type=float, default=1e-12)


def _add_correction(p):
    g = p.add_argument_group("correction model")
    g.add_argument("--correction", default="nn1", help="nn1 or arnet")
    g.add_argument("--order", type=int, default=12)
    g.add_argument("--hidden", type=int, default=16)
    g.add_argument("--epochs", type=int, default=500)
    g.add_argument("--learning-rate", type=float, default=0.01)


def _add_window(p):
    p.add_argument("--n", type=int, help="training window (default: whole series)")
    p.add_argument("--r", type=int, default=0, help="correction window")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsbapc", description="Explain residual corrections through base-model refits.")
    parser.add_argument("--version", action="version", version=f"tsbapc {__version__}")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--config", help="JSON file whose keys override the command's defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic series")
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--change-index", type=int)
    p.add_argument("--raw-sampling", action="store_true", help="use the change time as given")
    p.add_argument("--ramp-form", choices=("kink", "jump"), default="kink")
    p.add_argument("--out", help="output CSV (default: <out-dir>/data.csv)")

    p = sub.add_parser("fit", help="fit a base model")
    _add_dataset(p)
    _add_base(p)

    p = sub.add_parser("bapc", help="single-window before/after comparison")
    _add_dataset(p)
    _add_base(p)
    _add_correction(p)
    _add_window(p)
    p.add_argument("--ig-t", type=int, nargs="*", default=[], help="also attribute at these indices")

    p = sub.add_parser("sbapc", help="sliding-window comparison with attribution heatmaps")
    _add_dataset(p)
    _add_base(p)
    _add_correction(p)
    _add_window(p)
    p.add_argument("--no-ig", action="store_true", help="skip the per-parameter heatmaps")

    p = sub.add_parser("window-scan", help="surrogate correction at one index for every r")
    _add_dataset(p)
    _add_base(p)
    _add_correction(p)
    _add_window(p)
    p.add_argument("--t-eval", type=int, help="evaluation index (default: last)")

    p = sub.add_parser("ig", help="integrated gradients of a single-window run")
    _add_dataset(p)
    _add_base(p)
    _add_correction(p)
    _add_window(p)
    p.add_argument("--t", type=int, nargs="+", help="evaluation indices (default: the whole window)")
    p.add_argument("--method", choices=("auto", "closed-form", "quadrature"), default="auto")

    p = sub.add_parser("lime", help="segment-masking LIME for the autoregressive correction")
    _add_dataset(p)
    _add_base(p)
    _add_correction(p)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--p", type=int, help="lag order (default: --order)")
    p.add_argument("--segment-size", type=int, default=3)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--ridge", type=float, default=1e-3)

    p = sub.add_parser("airpassengers-demo", help="sliding-window run on the bundled airline data")
    p.add_argument("--csv", help="alternative month,passengers file")
    _add_correction(p)
    p.set_defaults(correction="arnet")
    p.add_argument("--workers", type=int, default=1)
    return parser


# -- helpers -----------------------------------------------------------------

def _load_series(a):
    if a.dataset and a.csv:
        raise ConfigError("give either --dataset or --csv, not both")
    if a.csv:
        if not os.path.exists(a.csv):
            raise ConfigError(f"no such file: {a.csv}")
        return read_series_csv(a.csv), None
    if not a.dataset:
        raise ConfigError("a series is required: use --dataset or --csv")
    if a.dataset == "airpassengers":
        return load_air_passengers(), None
    spec = SyntheticSpec.default(a.dataset, n=a.length, change_index=a.change_index)
    return generate(spec), spec


def _fit_config(a, spec):
    omega = a.omega
    if omega is None and spec is not None and spec.kind in ("sinacp", "sinfcp"):
        omega = spec.omega
    family = canonical_family(a.base)
    if family == "sinusoid" and omega is None:
        raise ConfigError("the sinusoid base needs --omega")
    return FitConfig(max_iterations=a.max_iterations, tolerance=a.tolerance, robust=not a.no_robust,
                     robust_k=a.robust_k, seed=a.seed, period=a.period, omega=omega)


def _correction_options(a):
    return CorrectionOptions(order=a.order, hidden=a.hidden, epochs=a.epochs,
                             learning_rate=a.learning_rate, seed=a.seed)


def _window(a, series):
    n = a.n if a.n is not None else series.n
    if n > series.n:
        raise ConfigError(f"--n {n} exceeds the series length {series.n}")
    try:
        return WindowConfig(n, a.r)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _last_window(series, n):
    if n == series.n:
        return series
    return slice_series(series, series.end_index - n + 1, series.end_index)


def _out(a, name):
    return os.path.join(a.out_dir, name)


def _settings(a):
    # the output location is not a setting; leaving it out keeps manifests comparable
    return {k: v for k, v in sorted(vars(a).items()) if k != "out_dir"}


# -- commands ----------------------------------------------------------------

def cmd_generate(a):
    spec = SyntheticSpec.default(a.kind, n=a.n, change_index=a.change_index,
                                 raw_sampling=a.raw_sampling, ramp_form=a.ramp_form)
    path = a.out or _out(a, "data.csv")
    write_series(path, generate(spec))
    return {"spec": spec.to_json_dict()}, [path]


def cmd_fit(a):
    series, spec = _load_series(a)
    cfg = _fit_config(a, spec)
    family = canonical_family(a.base)
    removed = []
    if family == "ar2" and cfg.robust:
        model, rem = fit_ar2_robust(series, cfg)
        removed = sorted(rem)
    else:
        model = fit(family, series, cfg)
    path = _out(a, "model.json")
    write_json(path, {"model": model.to_json_dict(), "converged": model.converged, "removed_indices": removed})
    return {"fit_config": cfg.to_json_dict()}, [path]


def cmd_bapc(a):
    series, spec = _load_series(a)
    cfg = _fit_config(a, spec)
    opts = _correction_options(a)
    w = _window(a, series)
    res = bapc(_last_window(series, w.n), a.base, a.correction, w, cfg, opts)
    doc = res.to_json_dict()
    doc["seed"] = a.seed
    if a.ig_t:
        doc["ig"] = {str(t): attribute_bapc(res, t).as_dict() for t in a.ig_t}
    paths = [_out(a, "bapc_result.json"), _out(a, "modified_series.csv")]
    write_json(paths[0], doc)
    write_series(paths[1], res.modified_series)
    return {"fit_config": cfg.to_json_dict(), "correction_options": opts.to_json_dict()}, paths


def _write_heatmaps(a, result):
    paths = [_out(a, "surrogate_matrix.csv")]
    write_csv(paths[0], ["s", "t", "delta_f"], result.cells())
    if getattr(a, "no_ig", False):
        return paths, None
    maps = ig_heatmaps(result)
    for name in maps.names:
        path = _out(a, f"ig_{name}.csv")
        write_csv(path, ["s", "t", "ig"], maps.cells(name))
        paths.append(path)
    path = _out(a, "completeness.csv")
    write_csv(path, ["s", "t", "residual"], maps.cells("residual"))
    paths.append(path)
    return paths, maps


def _sbapc_summary(series, result, maps):
    finite = np.where(np.isfinite(result.matrix), result.matrix, np.nan)
    summary = {"failed_anchors": {str(s): e for s, e in result.errors.items()}}
    if np.any(np.isfinite(finite)):
        peak = np.nanmax(np.abs(finite), axis=1)
        for key, idx in (("argmax_abs_anchor", int(np.nanargmax(peak))),
                         ("argmin_anchor", int(np.nanargmin(np.nanmin(finite, axis=1)))),
                         ("argmax_anchor", int(np.nanargmax(np.nanmax(finite, axis=1))))):
            s = result.anchors[idx]
            summary[key] = {"s": s, "label": series.label(s)}
    if maps is not None:
        summary["max_scaled_completeness_residual"] = maps.max_scaled_residual
        summary["failed_cells"] = len(maps.errors)
    return summary


def cmd_sbapc(a):
    series, spec = _load_series(a)
    cfg = _fit_config(a, spec)
    opts = _correction_options(a)
    n = a.n if a.n is not None else series.n
    if n > series.n:
        raise ConfigError(f"--n {n} exceeds the series length {series.n}")
    result = sbapc(series, n, a.r, a.base, a.correction, cfg, opts, workers=a.workers)
    paths, maps = _write_heatmaps(a, result)
    summary = _sbapc_summary(series, result, maps)
    path = _out(a, "sbapc_summary.json")
    write_json(path, summary)
    paths.append(path)
    if len(result.errors) == len(result.anchors):
        raise NumericalFailure("every anchor failed", paths)
    return {"fit_config": cfg.to_json_dict(), "correction_options": opts.to_json_dict()}, paths


def cmd_window_scan(a):
    series, spec = _load_series(a)
    cfg = _fit_config(a, spec)
    opts = _correction_options(a)
    w = _window(a, series)
    window = _last_window(series, w.n)
    t_eval = a.t_eval if a.t_eval is not None else window.end_index
    scan = window_scan(window, a.base, a.correction, t_eval, cfg, opts, workers=a.workers)
    paths = [_out(a, "window_scan.csv"), _out(a, "window_scan.json")]
    write_csv(paths[0], ["r", "delta_f"], scan.entries())
    write_json(paths[1], {"t_eval": t_eval, "argmax_abs_r": scan.argmax_r,
                          "failed": {str(r): e for r, e in scan.errors.items()}})
    return {"fit_config": cfg.to_json_dict(), "correction_options": opts.to_json_dict()}, paths


def cmd_ig(a):
    series, spec = _load_series(a)
    cfg = _fit_config(a, spec)
    opts = _correction_options(a)
    w = _window(a, series)
    window = _last_window(series, w.n)
    res = bapc(window, a.base, a.correction, w, cfg, opts)
    times = a.t or list(range(window.start_index, window.end_index + 1))
    atts = []
    for t in times:
        if not window.start_index <= t <= window.end_index:
            raise ConfigError(f"t={t} lies outside the window [{window.start_index}, {window.end_index}]")
        atts.append(attribute_bapc(res, t, a.method))
    s = window.end_index
    paths = []
    for k, name in enumerate(res.parameter_names):
        path = _out(a, f"ig_{name}.csv")
        write_csv(path, ["s", "t", "ig"], ((s, int(att.t), float(att.values[k])) for att in atts))
        paths.append(path)
    path = _out(a, "completeness.csv")
    write_csv(path, ["s", "t", "residual"], ((s, int(att.t), att.completeness_residual) for att in atts))
    paths.append(path)
    return {"fit_config": cfg.to_json_dict(), "correction_options": opts.to_json_dict(),
            "methods": sorted({att.method for att in atts})}, paths


def cmd_lime(a):
    series, spec = _load_series(a)
    cfg = _fit_config(a, spec)
    opts = _correction_options(a)
    family = canonical_family(a.base)
    theta0 = fit_ar2_robust(series, cfg)[0] if family == "ar2" and cfg.robust else fit(family, series, cfg)
    residuals = series.with_values(series.values - np.asarray(theta0(series.index)))
    model = fit_correction("arnet", residuals, opts)
    exp = lime_explain(model, residuals, a.t, a.p if a.p is not None else opts.order,
                       a.segment_size, a.samples, a.seed, a.ridge)
    paths = [_out(a, "lime.csv"), _out(a, "lime.json")]
    write_csv(paths[0], ["lag_index", "coefficient"],
              ((j + 1, float(c)) for j, c in enumerate(exp.coefficients)))
    write_json(paths[1], exp.metadata())
    return {"fit_config": cfg.to_json_dict(), "correction_options": opts.to_json_dict()}, paths


def cmd_airpassengers(a):
    series = load_air_passengers(a.csv)
    cfg = FitConfig(seed=a.seed, period=12.0)
    opts = _correction_options(a)
    result = sbapc(series, 48, 12, "polyseasonal", a.correction, cfg, opts, workers=a.workers)
    paths, maps = _write_heatmaps(a, result)
    path = _out(a, "sbapc_summary.json")
    write_json(path, _sbapc_summary(series, result, maps))
    paths.append(path)
    return {"fit_config": cfg.to_json_dict(), "correction_options": opts.to_json_dict(),
            "window": {"n": 48, "r": 12}, "base": "polyseasonal"}, paths


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "bapc": cmd_bapc,
    "sbapc": cmd_sbapc,
    "window-scan": cmd_window_scan,
    "ig": cmd_ig,
    "lime": cmd_lime,
    "airpassengers-demo": cmd_airpassengers,
}


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    try:
        with open(known.config) as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(overrides, dict):
        raise ConfigError("config file must hold a JSON object")
    overrides = {k.replace("-", "_"): v for k, v in overrides.items()}
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    valid = {act.dest for act in sub._actions} | {act.dest for act in parser._actions}
    unknown = sorted(set(overrides) - valid)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    # config values act as defaults; explicit flags still win
    sub.set_defaults(**overrides)
    parser.set_defaults(**{k: v for k, v in overrides.items() if k in {a.dest for a in parser._actions}})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        print(f"tsbapc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG

    manifest = {"command": args.command, "settings": _settings(args), "version": __version__,
                "kernel_backend": kernels.BACKEND}
    status = EXIT_OK
    try:
        extra, paths = COMMANDS[args.command](args)
        manifest.update(extra)
    except NumericalFailure as exc:
        print(f"tsbapc: numerical failure: {exc.args[0]}", file=sys.stderr)
        manifest["error"] = exc.args[0]
        paths, status = exc.args[1], EXIT_NUMERIC
    except (FitError, PrecisionError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"tsbapc: numerical failure: {exc}", file=sys.stderr)
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        paths, status = [], EXIT_NUMERIC
    except (ConfigError, CSVFormatError, OSError, ValueError, IndexError) as exc:
        print(f"tsbapc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest["outputs"] = sorted(os.path.basename(p) for p in paths)
    write_json(_out(args, "manifest.json"), manifest)
    return status


if __name__ == "__main__":
    sys.exit(main())
