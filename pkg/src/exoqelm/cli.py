"""Command-line entry point: ``exoqelm {generate,run,sweep,report}``.

Exit codes: 0 success, 2 configuration/usage error, 3 I/O or dataset
format error, 4 numerical or pipeline-stage failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from exoqelm import __version__
from exoqelm.config import RunConfig, default_output_root, load_config, parse_shots
from exoqelm.errors import ConfigError, DatasetFormatError, NumericalError, StageError
from exoqelm.evaluation import bootstrap_table, feature_sweep, shots_comparison, tolerance_sweep, training_size_sweep
from exoqelm.forwardmodel import PARAM_NAMES, generate_dataset, write_dataset
from exoqelm.pipeline import checksum, fit_and_score, prepare, run_pipeline

log = logging.getLogger("exoqelm")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4
SWEEP_VARS = ("M", "train_size", "threshold", "shots")


class UsageError(ConfigError):
    pass


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _fresh_dir(path: Path, overwrite: bool) -> Path:
    if path.exists() and any(path.iterdir()):
        if not overwrite:
            raise FileExistsError(f"{path} already exists; pass --overwrite to replace it")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump(path, data):
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _config_from_args(args) -> RunConfig:
    if getattr(args, "manifest", None):
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        cfg = RunConfig.from_dict(manifest["config"])
    else:
        cfg = load_config(args.config, args.set or ())
    if getattr(args, "dataset", None):
        cfg = cfg.replace(dataset_path=str(args.dataset))
    return cfg.validate()


# ---------------------------------------------------------------- generate


def cmd_generate(args) -> int:
    out = Path(args.out) if args.out else default_output_root() / f"dataset_n{args.n}_seed{args.seed}.csv"
    if out.exists() and not args.overwrite:
        raise FileExistsError(f"{out} already exists; pass --overwrite to replace it")
    out.parent.mkdir(parents=True, exist_ok=True)
    ds = generate_dataset(args.n, args.seed)
    write_dataset(ds, out)
    print(f"seed={args.seed} n={args.n} path={out}")
    return EXIT_OK


# ---------------------------------------------------------------- run


def write_run(result, out: Path) -> dict:
    """Write every artifact of a finished run into ``out``; return the manifest."""
    cfg = result.config
    prepared = result.prepared
    prepared.bank.save(out / "bank.json")
    result.weights.save(out / "weights.json")
    result.metrics.write_csv(out / "metrics.csv")

    metrics = {
        **result.metrics.summary(),
        "shots": "inf" if result.shots is None else result.shots,
        "mode": cfg.mode,
        "config_hash": cfg.fingerprint(),
    }
    _dump(out / "metrics.json", metrics)

    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", *(f"true_{n}" for n in PARAM_NAMES), *(f"pred_{n}" for n in PARAM_NAMES)])
        for j, sid in enumerate(prepared.test_ids):
            w.writerow([int(sid), *map(repr, prepared.Y_test[:, j].tolist()), *map(repr, result.Y_pred[:, j].tolist())])

    ds = prepared.dataset
    manifest = {
        "exoqelm_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.fingerprint(),
        "seeds": {
            "dataset": ds.seed if cfg.dataset_path else cfg.dataset_seed,
            "split": cfg.split_seed,
            "reservoir": cfg.reservoir_seed,
            "sampling": cfg.sampling_seed,
            "noise": cfg.noise_seed,
            "bootstrap": cfg.bootstrap_seed,
        },
        "dataset": {"path": cfg.dataset_path, "n": len(ds), "checksum": checksum(ds.depths)},
        "split": {"n_train": int(prepared.train_ids.size), "n_test": int(prepared.test_ids.size)},
        "checksums": {
            "P_train": checksum(result.P_train.values),
            "P_test": checksum(result.P_test.values),
            "W": checksum(result.weights.W),
        },
    }
    _dump(out / "manifest.json", manifest)
    return manifest


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out) if args.out else Path(cfg.output_dir) if cfg.output_dir else default_output_root() / f"run_{cfg.fingerprint()[:12]}"
    _fresh_dir(out, args.overwrite)
    result = run_pipeline(cfg)
    manifest = write_run(result, out)
    acc = result.metrics.summary()["accuracy"]
    print(f"run written to {out}")
    print("accuracy: " + ", ".join(f"{k}={v * 100:.1f}%" for k, v in acc.items()))
    print(f"P_train sha256 {manifest['checksums']['P_train'][:16]}")
    return EXIT_OK


# ---------------------------------------------------------------- sweep


def parse_values(var: str, text: str) -> list:
    text = text.strip()
    if var == "shots":
        return [parse_shots(v) for v in text.split(",")]
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            start, stop = int(lo), int(hi)
        except ValueError:
            raise UsageError(f"cannot parse sweep range {text!r}") from None
        if stop < start:
            raise UsageError(f"empty range {text!r}")
        values = list(range(start, stop + 1))
    else:
        conv = float if var == "threshold" else int
        try:
            values = [conv(v) for v in text.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse sweep values {text!r}") from None
    return values


def cmd_sweep(args) -> int:
    if args.var not in SWEEP_VARS:
        raise UsageError(f"invalid sweep variable {args.var!r}; choose from {SWEEP_VARS}")
    cfg = _config_from_args(args)
    values = parse_values(args.var, args.values)
    out = Path(args.out) if args.out else default_output_root() / f"sweep_{args.var}_{cfg.fingerprint()[:12]}"
    _fresh_dir(out, args.overwrite)

    if args.var == "threshold":
        values = sorted(values)
        errors = fit_and_score(prepare(cfg), cfg.shots).metrics.errors
        sweep = tolerance_sweep(errors, values)
        sweep.fingerprints = [cfg.fingerprint(exclude=("output_dir", "threshold"))] * len(values)
    elif args.var == "M":
        sweep = feature_sweep(values, cfg)
    elif args.var == "train_size":
        sweep = training_size_sweep(values, cfg)
    else:
        sweep = shots_comparison(cfg, values)

    for v, acc, fp in zip(sweep.values, sweep.accuracy, sweep.fingerprints):
        point = out / f"{args.var}={'inf' if v is None else v}"
        point.mkdir()
        _dump(point / "metrics.json", {"value": "inf" if v is None else v, "fingerprint": fp, "accuracy": dict(zip(PARAM_NAMES, map(float, acc)))})
    sweep.write_csv(out / "sweep.csv")
    sweep.write_plot_csv(out / "plot.csv")
    sweep.write_fingerprint(out / "fingerprint.json")
    _dump(out / "config.json", cfg.to_dict())

    print(f"sweep over {args.var}: {len(sweep.values)} points -> {out}")
    print(_table([("inf" if v is None else str(v)) for v in sweep.values], sweep.accuracy, args.var))
    return EXIT_OK


def _table(labels, acc, head):
    width = max(8, max(len(l) for l in labels) + 1)
    lines = [f"{head:<{width}}" + "".join(f"{n:>8}" for n in PARAM_NAMES)]
    for label, row in zip(labels, acc):
        lines.append(f"{label:<{width}}" + "".join(f"{a * 100:8.1f}" for a in row))
    return "\n".join(lines)


# ---------------------------------------------------------------- report


REQUIRED = ("manifest.json", "metrics.json", "metrics.csv", "predictions.csv")


def _read_predictions(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    k = len(PARAM_NAMES)
    return data[:, 0].astype(int), data[:, 1 : 1 + k].T, data[:, 1 + k : 1 + 2 * k].T


def _read_errors(path):
    rows = {n: [] for n in PARAM_NAMES}
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows[r["parameter"]].append(float(r["epsilon"]))
    return np.array([rows[n] for n in PARAM_NAMES])


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"{run_dir} is not a directory")
    missing = [f for f in REQUIRED if not (run_dir / f).exists()]
    if missing:
        raise FileNotFoundError(f"incomplete run directory {run_dir}: missing {', '.join(missing)}")
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    cfg = RunConfig.from_dict(manifest["config"])
    metrics = json.loads((run_dir / "metrics.json").read_text(encoding="utf-8"))

    out = Path(args.out) if args.out else run_dir / "report"
    _fresh_dir(out, args.overwrite)

    _, y_true, y_pred = _read_predictions(run_dir / "predictions.csv")
    boot = bootstrap_table(y_true, y_pred, cfg.bootstrap_resamples, cfg.bootstrap_level, cfg.bootstrap_seed)
    boot.write_csv(out / "bootstrap.csv")

    errors = _read_errors(run_dir / "metrics.csv")
    thresholds = sorted(set(cfg.thresholds) | {cfg.threshold})
    tol = tolerance_sweep(errors, thresholds)
    tol.write_csv(out / "tolerance.csv")
    tol.write_plot_csv(out / "tolerance_plot.csv")

    with open(out / "accuracy.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "accuracy_percent"])
        for name in PARAM_NAMES:
            w.writerow([name, repr(metrics["accuracy"][name] * 100.0)])

    shots = metrics.get("shots", "inf")
    print(f"mode={metrics.get('mode', cfg.mode)} shots={shots} n_test={metrics['n_test']} threshold={metrics['threshold_percent']}%")
    print(f"{'parameter':<10}{'accuracy %':>12}")
    for name in PARAM_NAMES:
        print(f"{name:<10}{metrics['accuracy'][name] * 100:>12.1f}")
    print(f"report written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exoqelm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a labelled synthetic dataset")
    g.add_argument("--n", type=_positive_int, default=10000)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out", help="output CSV path")
    g.add_argument("--overwrite", action="store_true")
    g.set_defaults(func=cmd_generate)

    def add_config(p):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", help="INI configuration file")
        src.add_argument("--manifest", help="replay the configuration stored in a run manifest")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("--dataset", help="dataset CSV (overrides [dataset] path)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--overwrite", action="store_true", help="replace an existing output directory")

    r = sub.add_parser("run", help="run the full pipeline once")
    add_config(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one variable and record accuracies")
    add_config(s)
    s.add_argument("--var", required=True, help=f"one of {', '.join(SWEEP_VARS)}")
    s.add_argument("--values", required=True, help="comma list or inclusive range a..b; shots accept 'inf'")
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="summarise a finished run")
    rep.add_argument("run_dir")
    rep.add_argument("--out", help="report directory (default RUN_DIR/report)")
    rep.add_argument("--overwrite", action="store_true")
    rep.set_defaults(func=cmd_report)
    return parser


def _exit_code(exc) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, (OSError, DatasetFormatError)):
        return EXIT_IO
    return EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, DatasetFormatError, StageError, NumericalError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        code = _exit_code(exc)
        print(f"exoqelm {args.command}: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
