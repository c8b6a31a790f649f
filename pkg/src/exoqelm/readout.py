"""Linear readout trained by Moore-Penrose pseudoinverse, plus error metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from exoqelm.forwardmodel import PARAM_NAMES

RCOND = 1e-10
THRESHOLD = 5.0


def pinv(P, rcond: float = RCOND):
    """Pseudoinverse ``V diag(1/s) U^T`` keeping singular values above ``rcond * s_max``.

    Returns ``(P_plus, rank)``.
    """
    P = np.asarray(P, dtype=float)
    u, s, vt = np.linalg.svd(P, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise ValueError("cannot invert an all-zero matrix")
    keep = s > rcond * s[0]
    rank = int(keep.sum())
    P_plus = (vt[:rank].T / s[:rank]) @ u[:, :rank].T
    return P_plus, rank


@dataclass
class ReadoutWeights:
    W: np.ndarray  # (D_feat, D_out)
    rcond: float = RCOND
    rank: int = 0
    param_names: tuple = PARAM_NAMES

    def to_dict(self) -> dict:
        return {"rcond": self.rcond, "rank": self.rank, "param_names": list(self.param_names), "W": self.W.tolist()}

    @classmethod
    def from_dict(cls, data) -> ReadoutWeights:
        return cls(np.array(data["W"], dtype=float), data["rcond"], data["rank"], tuple(data["param_names"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> ReadoutWeights:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _values(P):
    return np.asarray(getattr(P, "values", P), dtype=float)


def train(P_train, Y_train, rcond: float = RCOND) -> ReadoutWeights:
    """Least-squares readout ``W = Y P^+`` for ``P`` (D_out, D) and ``Y`` (D_feat, D)."""
    P = _values(P_train)
    Y = np.atleast_2d(np.asarray(Y_train, dtype=float))
    if P.shape[1] != Y.shape[1]:
        raise ValueError(f"P has {P.shape[1]} samples but Y has {Y.shape[1]}")
    if P.shape[1] < 1:
        raise ValueError("need at least one training sample")
    P_plus, rank = pinv(P, rcond)
    names = PARAM_NAMES if Y.shape[0] == len(PARAM_NAMES) else tuple(f"y{i}" for i in range(Y.shape[0]))
    return ReadoutWeights(Y @ P_plus, rcond, rank, names)


def predict(weights, P) -> np.ndarray:
    W = weights.W if isinstance(weights, ReadoutWeights) else np.asarray(weights, dtype=float)
    P = _values(P)
    if W.shape[1] != P.shape[0]:
        raise ValueError(f"weights expect {W.shape[1]} outcomes, P has {P.shape[0]}")
    return W @ P


def relative_error(y_test, y_pred) -> np.ndarray:
    """Squared relative error in percent: 100 (y_test - y_pred)^2 / y_test^2."""
    y_test = np.asarray(y_test, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if np.any(y_test == 0):
        raise ValueError("relative error undefined for zero targets")
    return (y_test - y_pred) ** 2 / y_test**2 * 100.0


def accuracy(errors, threshold: float = THRESHOLD) -> np.ndarray:
    """Fraction of samples (last axis) with error <= ``threshold``."""
    errors = np.asarray(errors, dtype=float)
    if errors.shape[-1] == 0:
        raise ValueError("accuracy of an empty test set")
    return np.mean(errors <= threshold, axis=-1)


def split(n, train_fraction: float, seed: int):
    """Random disjoint (train, test) index arrays over ``range(n)``.

    ``n`` may also be a sized dataset.
    """
    n = n if isinstance(n, (int, np.integer)) else len(n)
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(round(train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise ValueError(f"split of {n} samples at {train_fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:]


@dataclass
class MetricsReport:
    errors: np.ndarray  # (D_feat, D_test), percent
    threshold: float = THRESHOLD
    sample_ids: np.ndarray | None = None
    param_names: tuple = PARAM_NAMES
    accuracy: np.ndarray = field(init=False)

    def __post_init__(self):
        self.accuracy = accuracy(self.errors, self.threshold)

    def summary(self) -> dict:
        return {
            "threshold_percent": self.threshold,
            "n_test": int(self.errors.shape[1]),
            "accuracy": {n: float(a) for n, a in zip(self.param_names, self.accuracy)},
        }

    def write_csv(self, path) -> None:
        ids = np.arange(self.errors.shape[1]) if self.sample_ids is None else self.sample_ids
        lines = ["parameter,sample_id,epsilon"]
        for name, row in zip(self.param_names, self.errors):
            lines.extend(f"{name},{int(i)},{float(e)!r}" for i, e in zip(ids, row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def evaluate(y_test, y_pred, threshold: float = THRESHOLD, sample_ids=None) -> MetricsReport:
    return MetricsReport(relative_error(y_test, y_pred), threshold, sample_ids)
