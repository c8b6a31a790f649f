"""End-to-end orchestration: split -> features -> reservoirs -> readout -> metrics."""

from __future__ import annotations

import hashlib
import logging
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from exoqelm import noise
from exoqelm.config import RunConfig
from exoqelm.errors import StageError
from exoqelm.forwardmodel import SpectralDataset, generate_dataset, read_dataset
from exoqelm.preprocess import FeatureMatrix, PatchLayout, Preprocessor, interpolate_rows, working_grid
from exoqelm.qreservoir import ProbabilityMatrix, ReservoirBank, build_bank, build_probability_matrix, derive_seed
from exoqelm.readout import MetricsReport, ReadoutWeights, evaluate, predict, split, train

log = logging.getLogger(__name__)


@contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def load_dataset(config: RunConfig) -> SpectralDataset:
    if config.dataset_path is not None:
        return read_dataset(config.dataset_path)
    return generate_dataset(config.n_spectra, config.dataset_seed)


def layout_for(config: RunConfig) -> PatchLayout:
    spec = config.patches
    if spec is None:
        spec = "taurex" if config.mode == "taurex" else "jwst"
    try:
        return PatchLayout.preset(spec)
    except ValueError:
        return PatchLayout(tuple(float(e) for e in spec.split(",")))


def working_depths(ds: SpectralDataset, config: RunConfig, sample_ids=None):
    """Depths on the mode's working grid; noisy modes get per-sample seeded shot noise.

    Sample ``i`` is noised with ``derive_seed(noise_seed, i)`` so its noise does
    not depend on the split.
    """
    lam = working_grid(config.mode, ds.wavelengths)
    ids = np.arange(len(ds)) if sample_ids is None else np.asarray(sample_ids)
    depths = ds.depths[ids]
    if config.mode != "taurex":
        depths = interpolate_rows(depths, ds.wavelengths, lam)
    if config.mode in ("njwst", "fjwst"):
        sigma = noise.sigma_per_bin(lam, config.instrument)
        noisy = np.empty_like(depths)
        for row, sid in enumerate(ids):
            rng = np.random.default_rng(derive_seed(config.noise_seed, sid))
            noisy[row] = depths[row] + rng.normal(0.0, 1.0, lam.size) * sigma
        depths = noisy
    return lam, depths


@dataclass
class Prepared:
    """Everything up to (not including) measurement: fitted features and bank."""

    config: RunConfig
    dataset: SpectralDataset
    train_ids: np.ndarray
    test_ids: np.ndarray
    preprocessor: Preprocessor
    X_train: FeatureMatrix
    X_test: FeatureMatrix
    bank: ReservoirBank

    @property
    def Y_train(self):
        return self.dataset.labels[self.train_ids].T

    @property
    def Y_test(self):
        return self.dataset.labels[self.test_ids].T


@dataclass
class RunResult:
    prepared: Prepared
    shots: int | None
    P_train: ProbabilityMatrix
    P_test: ProbabilityMatrix
    weights: ReadoutWeights
    Y_pred: np.ndarray
    metrics: MetricsReport

    @property
    def config(self):
        return self.prepared.config


def split_ids(n: int, config: RunConfig):
    train_ids, test_ids = split(n, config.train_fraction, config.split_seed)
    if config.train_size is not None:
        if config.train_size > train_ids.size:
            raise ValueError(f"train_size={config.train_size} exceeds the {train_ids.size} training samples")
        train_ids = train_ids[: config.train_size]
    if config.test_size is not None:
        if config.test_size > test_ids.size:
            raise ValueError(f"test_size={config.test_size} exceeds the {test_ids.size} test samples")
        test_ids = test_ids[: config.test_size]
    return train_ids, test_ids


def prepare(config: RunConfig, dataset: SpectralDataset | None = None) -> Prepared:
    config.validate(check_paths=dataset is None)
    with stage("dataset"):
        ds = load_dataset(config) if dataset is None else dataset
    with stage("split"):
        train_ids, test_ids = split_ids(len(ds), config)
    with stage("preprocess"):
        lam, train_depths = working_depths(ds, config, train_ids)
        _, test_depths = working_depths(ds, config, test_ids)
        pre = Preprocessor(config.mode, lam, layout_for(config), config.n_components, config.filter_components)
        pre.fit(train_depths)
        X_train = pre.transform(train_depths)
        X_test = pre.transform(test_depths)
    with stage("reservoir"):
        bank = build_bank(
            pre.layout.n_patches,
            config.n_components,
            config.reservoir_seed,
            qubits=config.qubits,
            global_qubits=config.global_qubits,
            encoder_span=config.encoder_span,
        ).fit_encoders(X_train)
    return Prepared(config, ds, train_ids, test_ids, pre, X_train, X_test, bank)


def measure(prepared: Prepared, shots=None):
    """Probability matrices for the train and test splits at ``shots``."""
    cfg = prepared.config
    with stage("measurement"):
        P_train = build_probability_matrix(prepared.X_train, prepared.bank, shots, cfg.sampling_seed, prepared.train_ids)
        P_test = build_probability_matrix(prepared.X_test, prepared.bank, shots, cfg.sampling_seed, prepared.test_ids)
    return P_train, P_test


def fit_and_score(prepared: Prepared, shots=None) -> RunResult:
    P_train, P_test = measure(prepared, shots)
    with stage("readout"):
        weights = train(P_train, prepared.Y_train)
        Y_pred = predict(weights, P_test)
        metrics = evaluate(prepared.Y_test, Y_pred, prepared.config.threshold, prepared.test_ids)
    return RunResult(prepared, shots, P_train, P_test, weights, Y_pred, metrics)


def run_pipeline(config: RunConfig, dataset: SpectralDataset | None = None) -> RunResult:
    result = fit_and_score(prepare(config, dataset), config.shots)
    log.info("accuracy %s", result.metrics.summary()["accuracy"])
    return result


def checksum(array) -> str:
    return hashlib.sha256(np.ascontiguousarray(array, dtype=float).tobytes()).hexdigest()
