"""Bootstrap parameter-estimation intervals and accuracy sweeps."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from exoqelm.config import RunConfig
from exoqelm.forwardmodel import PARAM_NAMES, build_grid
from exoqelm.pipeline import fit_and_score, prepare
from exoqelm.qreservoir import derive_seed
from exoqelm.readout import accuracy

log = logging.getLogger(__name__)

N_RESAMPLES = 1000
LEVEL = 0.95


@dataclass
class BootstrapRecord:
    parameter: str
    true_value: float
    median: float
    lower: float
    upper: float
    count: int


@dataclass
class BootstrapResult:
    records: list = field(default_factory=list)
    level: float = LEVEL
    resamples: int = N_RESAMPLES

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "true_value", "median", "lower", "upper", "count"])
            for r in self.records:
                w.writerow([r.parameter, repr(r.true_value), repr(r.median), repr(r.lower), repr(r.upper), r.count])


def bootstrap_group(values, resamples: int, level: float, rng: np.random.Generator):
    """(median, lower, upper) of the bootstrap distribution of the sample median.

    The point estimate is the median of the resampled medians, so it always
    lies inside the percentile interval.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty group")
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    medians = np.median(values[idx], axis=1)
    tail = 50.0 * (1.0 - level)
    lo, mid, hi = np.percentile(medians, [tail, 50.0, 100.0 - tail])
    return float(mid), float(lo), float(hi)


def bootstrap_estimates(groups: dict, resamples: int = N_RESAMPLES, level: float = LEVEL, seed: int = 0, parameter: str = "") -> BootstrapResult:
    """Bootstrap each ``true_value -> predictions`` group independently.

    Group ``j`` (in sorted key order) resamples with ``derive_seed(seed, j)``.
    """
    if resamples < 100:
        raise ValueError("need at least 100 bootstrap resamples")
    empty = [k for k, v in groups.items() if len(v) == 0]
    if empty:
        raise ValueError(f"empty bootstrap group(s) for true value(s) {empty}")
    result = BootstrapResult(level=level, resamples=resamples)
    for j, key in enumerate(sorted(groups)):
        rng = np.random.default_rng(derive_seed(seed, j))
        med, lo, hi = bootstrap_group(groups[key], resamples, level, rng)
        result.records.append(BootstrapRecord(parameter, float(key), med, lo, hi, len(groups[key])))
    return result


def bootstrap_table(Y_true, Y_pred, resamples: int = N_RESAMPLES, level: float = LEVEL, seed: int = 0, grid=None) -> BootstrapResult:
    """Per parameter and per grid value: bootstrap of predictions sharing that true value.

    Grid values absent from the test set are reported with ``count = 0`` and
    NaN estimates.
    """
    grid = build_grid() if grid is None else grid
    Y_true = np.asarray(Y_true, dtype=float)
    Y_pred = np.asarray(Y_pred, dtype=float)
    table = BootstrapResult(level=level, resamples=resamples)
    for p, name in enumerate(PARAM_NAMES):
        values = grid[name]
        groups = {}
        for v in values:
            mask = np.isclose(Y_true[p], v, rtol=1e-12, atol=1e-12)
            groups[float(v)] = Y_pred[p, mask]
        present = {k: g for k, g in groups.items() if g.size}
        res = bootstrap_estimates(present, resamples, level, derive_seed(seed, p), name) if present else BootstrapResult()
        by_value = {r.true_value: r for r in res.records}
        for v in sorted(groups):
            if v in by_value:
                table.records.append(by_value[v])
            else:
                log.warning("no test samples with %s = %g", name, v)
                table.records.append(BootstrapRecord(name, v, float("nan"), float("nan"), float("nan"), 0))
    return table


@dataclass
class SweepResult:
    variable: str
    values: list
    accuracy: np.ndarray  # (len(values), D_feat)
    fingerprints: list = field(default_factory=list)
    param_names: tuple = PARAM_NAMES

    def rows(self):
        for v, acc in zip(self.values, self.accuracy):
            for name, a in zip(self.param_names, acc):
                yield v, name, float(a)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([self.variable, "parameter", "accuracy"])
            for v, name, a in self.rows():
                w.writerow([_fmt_value(v), name, repr(a)])

    def write_plot_csv(self, path) -> None:
        """Wide layout: one row per swept value, one accuracy column per parameter (percent)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([self.variable, *self.param_names])
            for v, acc in zip(self.values, self.accuracy):
                w.writerow([_fmt_value(v), *(repr(float(a) * 100.0) for a in acc)])

    def write_fingerprint(self, path) -> None:
        Path(path).write_text(json.dumps({"variable": self.variable, "fingerprints": self.fingerprints}, indent=1), encoding="utf-8")


def _fmt_value(v):
    return "inf" if v is None else repr(v)


def tolerance_sweep(errors, thresholds) -> SweepResult:
    """Accuracy per parameter at each threshold (percent relative error)."""
    thresholds = [float(t) for t in thresholds]
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be ascending")
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    acc = np.array([accuracy(errors, t) for t in thresholds])
    names = PARAM_NAMES if errors.shape[0] == len(PARAM_NAMES) else tuple(f"y{i}" for i in range(errors.shape[0]))
    return SweepResult("threshold", thresholds, acc, param_names=names)


def _sweep(variable, values, configs, dataset=None) -> SweepResult:
    accs, prints = [], []
    for v, cfg in zip(values, configs):
        log.info("sweep %s = %s", variable, v)
        accs.append(fit_and_score(prepare(cfg, dataset), cfg.shots).metrics.accuracy)
        prints.append(cfg.fingerprint(exclude=("output_dir", _FIELD[variable])))
    return SweepResult(variable, list(values), np.array(accs), prints)


_FIELD = {"M": "n_components", "train_size": "train_size", "shots": "shots", "threshold": "threshold"}


def feature_sweep(M_values, config: RunConfig, dataset=None) -> SweepResult:
    """Re-run the whole pipeline (PCA, bank, readout) for each component count."""
    if any(m < 1 for m in M_values):
        raise ValueError("component counts must be >= 1")
    return _sweep("M", list(M_values), [config.replace(n_components=m) for m in M_values], dataset)


def training_size_sweep(sizes, config: RunConfig, dataset=None) -> SweepResult:
    """Train on nested prefixes of the training split; the test split stays fixed."""
    if any(s < len(PARAM_NAMES) for s in sizes):
        raise ValueError(f"training sizes must be >= {len(PARAM_NAMES)} (number of targets)")
    return _sweep("train_size", list(sizes), [config.replace(train_size=s) for s in sizes], dataset)


def shots_comparison(config: RunConfig, shots_list, dataset=None) -> SweepResult:
    """Accuracy per shots setting (``None`` = exact probabilities) on one bank and split."""
    prepared = prepare(config, dataset)
    accs, prints = [], []
    for shots in shots_list:
        accs.append(fit_and_score(prepared, shots).metrics.accuracy)
        prints.append(config.fingerprint(exclude=("output_dir", "shots")))
    return SweepResult("shots", list(shots_list), np.array(accs), prints)
