"""Command-line entry point: ``gen``, ``run`` and ``export``.

Exit codes: 0 success, 2 usage error, 1 runtime failure. Usage errors are
detected before any output file is written.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import harness
from .dataset import load_csv, save_csv, synth_spectra
from .errors import NirbenchError
from .reduce import pca_fit
from .select import GaConfig, ga_trace_csv

OUT_ENV = "NIRBENCH_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
        return v

    return conv


def _fraction(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"fraction must lie in (0, 1), got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nirbench", description="NIR spectra classification benchmark")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic spectra CSV")
    g.add_argument("--n-per-class", type=_positive(int), default=40)
    g.add_argument("--p", type=_positive(int), default=200)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--informative", default="3,7,11,19,23", help="comma-separated feature indices")
    g.add_argument("--noise-sd", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="benchmark pipelines over repeated stratified splits")
    r.add_argument("--data")
    r.add_argument("--config", help="JSON file with any of the run options")
    r.add_argument("--preset", choices=["table2", "pls-only", "fast"])
    r.add_argument("--spec", action="append", help="pipeline such as pls:15 or lda+pca (repeatable)")
    r.add_argument("--splits", type=_positive(int))
    r.add_argument("--fraction", type=_fraction)
    r.add_argument("--seed", type=int)
    r.add_argument("--pls-components", type=_positive(int))
    r.add_argument("--ga-generations", type=_positive(int))
    r.add_argument("--ga-population", type=_positive(int))
    r.add_argument("--threads", type=_positive(int))
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./nirbench_out)")

    e = sub.add_parser("export", help="write plot data as CSV")
    e.add_argument("--data", required=True)
    e.add_argument("--what", required=True, choices=["pcs", "spectra"])
    e.add_argument("--ncomp", type=_positive(int), default=3)
    e.add_argument("--out", required=True)
    return parser


# ------------------------------------------------------------------------ gen


def cmd_gen(args) -> int:
    if args.k < 2:
        raise UsageError("gen: --k must be >= 2")
    try:
        informative = [int(s) for s in args.informative.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"gen: bad --informative {args.informative!r}") from None
    if not informative or min(informative) < 0 or max(informative) >= args.p:
        raise UsageError(f"gen: informative indices must lie in [0, {args.p})")
    if args.noise_sd < 0:
        raise UsageError("gen: --noise-sd must be non-negative")
    data = synth_spectra(args.n_per_class, args.p, args.k, informative, args.noise_sd, args.seed)
    save_csv(data, args.out)
    print(f"n={data.n} p={data.p} k={data.k}")
    return 0


# ------------------------------------------------------------------------ run

_RUN_DEFAULTS = {"preset": None, "spec": None, "splits": 100, "fraction": 0.5, "seed": 0,
                 "pls_components": 15, "ga_generations": None, "ga_population": None, "threads": None,
                 "out": None, "data": None, "ga": None}


def _run_options(args) -> dict:
    opts = dict(_RUN_DEFAULTS)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"run: cannot read --config: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("run: --config must hold a JSON object")
        unknown = set(cfg) - set(opts)
        if unknown:
            raise UsageError(f"run: unknown config keys {sorted(unknown)}")
        if isinstance(cfg.get("spec"), str):
            cfg["spec"] = [cfg["spec"]]
        opts.update(cfg)
    for key in opts:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if not opts["data"]:
        raise UsageError("run: --data is required")
    if opts["preset"] and opts["spec"]:
        raise UsageError("run: give --preset or --spec, not both")
    if not opts["preset"] and not opts["spec"]:
        opts["preset"] = "table2"
    if int(opts["splits"]) < 1:
        raise UsageError("run: splits must be >= 1")
    if not 0.0 < float(opts["fraction"]) < 1.0:
        raise UsageError("run: fraction must lie in (0, 1)")
    return opts


def _ga_config(opts) -> GaConfig:
    extra = dict(opts["ga"] or {})
    names = {f.name for f in fields(GaConfig)}
    if set(extra) - names:
        raise UsageError(f"run: unknown GA settings {sorted(set(extra) - names)}")
    if opts["ga_generations"]:
        extra["generations"] = int(opts["ga_generations"])
    if opts["ga_population"]:
        extra["population_size"] = int(opts["ga_population"])
    try:
        return GaConfig(**extra)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"run: bad GA settings: {exc}") from None


def _specs(opts, ga):
    try:
        pls = int(opts["pls_components"])
        if opts["spec"]:
            # a bare "pls" takes the --pls-components value
            return [harness.parse_spec(f"{s}:{pls}" if s.strip().lower() in ("pls", "plsda") else s, ga)
                    for s in opts["spec"]]
        return harness.preset(opts["preset"], ga, pls)
    except ValueError as exc:
        raise UsageError(f"run: {exc}") from None


def cmd_run(args) -> int:
    opts = _run_options(args)
    ga = _ga_config(opts)
    specs = _specs(opts, ga)
    out = Path(opts["out"] or os.environ.get(OUT_ENV) or "nirbench_out")
    data = load_csv(opts["data"])
    reports = harness.run_benchmark(data, specs, int(opts["splits"]), float(opts["fraction"]),
                                    int(opts["seed"]), opts["threads"])
    out.mkdir(parents=True, exist_ok=True)
    table_csv, table_txt = harness.emit_table(reports)
    (out / "table.csv").write_text(table_csv)
    meta = {"data": str(opts["data"]), "splits": int(opts["splits"]), "fraction": float(opts["fraction"]),
            "seed": int(opts["seed"]), "class_names": list(data.class_names)}
    (out / "report.json").write_text(harness.reports_json(reports, specs, meta))
    for rep in reports:
        if rep.last_split_confusion is not None:
            name = "confusion_" + rep.label.replace(" ", "_") + ".csv"
            (out / name).write_text(harness.confusion_csv(rep.last_split_confusion, data.class_names))
    trace = next((rep.ga_trace for rep in reports if rep.ga_trace is not None), None)
    if trace is not None:
        (out / "ga_trace.csv").write_text(ga_trace_csv(trace))
    sys.stdout.write(table_txt)
    return 0


# --------------------------------------------------------------------- export


def cmd_export(args) -> int:
    data = load_csv(args.data)
    out = Path(args.out)
    if args.what == "pcs":
        if args.ncomp > min(data.n, data.p):
            raise UsageError(f"export: --ncomp must be <= {min(data.n, data.p)}")
        model = pca_fit(data, n_components=args.ncomp)
        scores = model.transform(data)
        with out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*(f"PC{i + 1}" for i in range(args.ncomp)), "label"])
            for row, lab in zip(scores, data.labels):
                w.writerow([*(format(v, ".17g") for v in row), data.class_names[lab]])
    else:
        with out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", "wavelength", "absorbance", "label"])
            for i in range(data.n):
                lab = data.class_names[data.labels[i]]
                for wl, a in zip(data.wavelengths, data.absorbances[i]):
                    w.writerow([i, format(wl, ".17g"), format(a, ".17g"), lab])
    return 0


_COMMANDS = {"gen": cmd_gen, "run": cmd_run, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (NirbenchError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
