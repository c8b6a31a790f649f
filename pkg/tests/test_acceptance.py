"""End-to-end acceptance criteria on the desk-scale toy dataset."""

import json
import math
import time
from functools import reduce

import numpy as np
import pytest

from exoqelm.cli import main
from exoqelm.config import RunConfig
from exoqelm.evaluation import feature_sweep, tolerance_sweep
from exoqelm.forwardmodel import PARAM_NAMES, generate_dataset
from exoqelm.noise import InstrumentModel, photon_count, sigma_per_bin
from exoqelm.pipeline import build_probability_matrix, fit_and_score, prepare, run_pipeline
from exoqelm.preprocess import jwst_wavelengths
from exoqelm.qreservoir import (
    AngleEncoder,
    ReservoirConfig,
    encode,
    evolve_reservoir,
    exact_probabilities,
    sample_probabilities,
    zero_state,
)
from exoqelm.readout import pinv, predict

from test_noise import trapezoid_oracle

CFG = RunConfig()  # JWST mode, D = 4080, 75/25, M = 5, 8 + 1 reservoirs of 5 qubits
SHOTS = 20000
IDX = {n: i for i, n in enumerate(PARAM_NAMES)}


@pytest.fixture(scope="module")
def dataset():
    return generate_dataset(CFG.n_spectra, CFG.dataset_seed)


@pytest.fixture(scope="module")
def prepared(dataset):
    return prepare(CFG, dataset)


@pytest.fixture(scope="module")
def exact_run(prepared):
    return fit_and_score(prepared, None)


@pytest.fixture(scope="module")
def shot_run(prepared):
    return fit_and_score(prepared, SHOTS)


def pct(acc):
    return " ".join(f"{n}={a * 100:.1f}" for n, a in zip(PARAM_NAMES, acc))


# --- 1 ----------------------------------------------------------------------------


def _dense(op, k, q):
    return reduce(np.kron, [op if j == k else np.eye(2) for j in range(q)])


def _rot(theta, pauli):
    return math.cos(theta) * np.eye(2) - 1j * math.sin(theta) * pauli


def _oracle_state(x, enc, cfg):
    q = cfg.Q
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    P0, P1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    U = np.eye(1 << q, dtype=complex)
    for k, a in enumerate(enc.angles(x)):
        U = _dense(_rot(a, X), k, q) @ U
    for k in range(q):
        U = _dense(_rot(cfg.beta[k], Y), k, q) @ U
    for k in range(q - 1):
        cnot = _dense(P0, k, q) + reduce(np.kron, [P1 if j == k else X if j == k + 1 else np.eye(2) for j in range(q)])
        U = cnot @ U
    for k in range(q):
        U = _dense(_rot(cfg.alpha[k], Y), k, q) @ U
    return U @ zero_state(q)


def test_criterion_01_simulator_oracle(criterion):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for q in (1, 2, 3):
        for trial in range(20):
            cfg = ReservoirConfig.random(q, 100 * q + trial)
            enc = AngleEncoder(np.zeros(q), np.ones(q))
            x = rng.uniform(0, 1, q)
            ours = evolve_reservoir(encode(zero_state(q), x, enc), cfg)
            worst = max(worst, np.abs(ours - _oracle_state(x, enc, cfg)).max())
    elapsed = time.perf_counter() - start
    criterion(1, worst <= 1e-12 and elapsed < 1.0, f"max amplitude error {worst:.1e} (<= 1e-12), {elapsed:.3f} s (< 1 s)")


# --- 2 ----------------------------------------------------------------------------


def test_criterion_02_probability_normalization(dataset, criterion):
    cfg = CFG.replace(n_spectra=1000)
    prep = prepare(cfg, dataset.subset(np.arange(1000)))
    worst = 0.0
    for X, ids in ((prep.X_train, prep.train_ids), (prep.X_test, prep.test_ids)):
        P = build_probability_matrix(X, prep.bank, None, 0, ids).values
        for sl in prep.bank.block_slices():
            worst = max(worst, np.abs(P[sl].sum(axis=0) - 1).max())
    criterion(2, worst <= 1e-10, f"max |block sum - 1| = {worst:.1e} over 1000 spectra x 9 blocks (<= 1e-10)")


# --- 3 ----------------------------------------------------------------------------


def test_criterion_03_pseudoinverse(exact_run, criterion):
    P = exact_run.P_train.values
    Pp, rank = pinv(P)
    r1 = np.linalg.norm(P @ Pp @ P - P) / np.linalg.norm(P)
    r2 = np.linalg.norm(Pp @ P @ Pp - Pp) / np.linalg.norm(Pp)
    Y = exact_run.prepared.Y_train
    res = np.linalg.norm(predict(exact_run.weights, P) - Y)
    rng = np.random.default_rng(0)
    scale = np.abs(exact_run.weights.W).std()
    beaten = sum(res <= np.linalg.norm(rng.normal(0, scale, exact_run.weights.W.shape) @ P - Y) for _ in range(100))
    ok = P.shape == (288, 3060) and r1 <= 1e-8 and r2 <= 1e-8 and beaten == 100
    criterion(3, ok, f"P {P.shape}, rank {rank}, PP+P rel {r1:.1e}, P+PP+ rel {r2:.1e}, beats {beaten}/100 random maps")


# --- 4 ----------------------------------------------------------------------------


def test_criterion_04_linearity(exact_run, criterion):
    rng = np.random.default_rng(4)
    P = exact_run.P_test.values
    W = exact_run.weights
    p1, p2 = P[:, rng.integers(P.shape[1])], P[:, rng.integers(P.shape[1])]
    a, b = 0.37, 1.9
    lhs = predict(W, (a * p1 + b * p2)[:, None])[:, 0]
    rhs = a * predict(W, p1[:, None])[:, 0] + b * predict(W, p2[:, None])[:, 0]
    # Relative to the magnitude of the summed terms, which sets float round-off.
    scale = np.abs(W.W) @ (np.abs(a * p1) + np.abs(b * p2))
    lin = np.max(np.abs(lhs - rhs) / scale)

    cfg = ReservoirConfig.random(1, 3)
    Y = np.array([[0, -1j], [1j, 0]])
    U = _rot(cfg.alpha[0], Y) @ _rot(cfg.beta[0], Y)
    worst = 0.0
    for _ in range(50):
        psi = [s / np.linalg.norm(s) for s in rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))]
        w = rng.uniform()
        rho = w * np.outer(psi[0], psi[0].conj()) + (1 - w) * np.outer(psi[1], psi[1].conj())
        p_mix = np.real(np.diag(U @ rho @ U.conj().T))
        mix = w * exact_probabilities(evolve_reservoir(psi[0], cfg)) + (1 - w) * exact_probabilities(evolve_reservoir(psi[1], cfg))
        worst = max(worst, np.abs(p_mix - mix).max())
    criterion(4, lin <= 1e-12 and worst <= 1e-10, f"predictor linearity rel err {lin:.1e} (<= 1e-12); channel mixture err {worst:.1e} (<= 1e-10)")


# --- 5 ----------------------------------------------------------------------------


def test_criterion_05_sampling_convergence(prepared, exact_run, shot_run, criterion):
    rng = np.random.default_rng(5)
    bank = prepared.bank
    l1 = []
    for t in range(100):
        i = t % len(bank)
        s = rng.integers(len(prepared.X_train))
        x = prepared.X_train.reservoir_inputs(i)[s]
        p = exact_probabilities(evolve_reservoir(encode(zero_state(bank.configs[i].Q), x, bank.encoders[i]), bank.configs[i]))
        l1.append(np.abs(sample_probabilities(p, SHOTS, rng) - p).sum())
    bound = 2 * math.sqrt(32 / SHOTS)
    drop = (exact_run.metrics.accuracy - shot_run.metrics.accuracy) * 100
    ok = np.mean(l1) <= bound and np.all((drop >= 0) & (drop <= 20))
    criterion(
        5,
        ok,
        f"mean L1 {np.mean(l1):.4f} (<= {bound:.4f}); degradation points "
        + " ".join(f"{n}={d:.1f}" for n, d in zip(PARAM_NAMES, drop))
        + " (in [0, 20])",
    )


# --- 6 ----------------------------------------------------------------------------


def test_criterion_06_table_trends(dataset, criterion):
    start = time.perf_counter()
    run = run_pipeline(CFG.replace(shots=SHOTS), dataset)  # the full finite-shot run, timed
    elapsed = time.perf_counter() - start
    exact = fit_and_score(run.prepared, None).metrics.accuracy

    # M-insensitivity of the radius is checked at the feature-study training
    # size (10^4 spectra, 80/20); the 4080-spectrum spread is reported too.
    big_cfg = CFG.replace(n_spectra=10_000, train_fraction=0.8)
    big = generate_dataset(big_cfg.n_spectra, big_cfg.dataset_seed)
    sweep = feature_sweep(range(1, 9), big_cfg, big)
    radius = sweep.accuracy[:, IDX["radius"]] * 100
    spread = radius.max() - radius.min()
    small = feature_sweep([1, 8], CFG, dataset).accuracy[:, IDX["radius"]] * 100

    ok = (
        exact[IDX["radius"]] >= 0.95
        and exact[IDX["h2o"]] >= 0.80
        and exact[IDX["ch4"]] >= 0.80
        and spread <= 5.0
        and elapsed <= 600
    )
    criterion(
        6,
        ok,
        f"infinite-stat {pct(exact)}; radius over M=1..8 (10^4, 80/20) "
        + " ".join(f"{r:.1f}" for r in radius)
        + f" spread {spread:.1f} (<= 5) [D=4080: M=1 {small[0]:.1f}, M=8 {small[1]:.1f}]; run {elapsed:.0f} s",
    )


# --- 7 ----------------------------------------------------------------------------


def test_criterion_07_pca_filter(dataset, criterion):
    noisy = run_pipeline(CFG.replace(mode="njwst"), dataset).metrics.accuracy
    filtered = run_pipeline(CFG.replace(mode="fjwst"), dataset).metrics.accuracy
    wins = int(np.sum(filtered >= noisy))
    criterion(7, wins >= 4, f"FJWST >= NJWST on {wins}/7; NJWST {pct(noisy)}; FJWST {pct(filtered)}")


# --- 8 ----------------------------------------------------------------------------


def test_criterion_08_tolerance_sweep(shot_run, criterion):
    errors = shot_run.metrics.errors
    thresholds = np.concatenate([[0.0], np.geomspace(1e-3, 100, 200), np.sort(errors.ravel())[::50]])
    thresholds = np.unique(thresholds)
    acc = tolerance_sweep(errors, thresholds).accuracy
    steps = np.diff(acc, axis=0)
    monotone = np.all(steps >= 0)
    # Each step must not exceed the mass of errors falling in (t_{i-1}, t_i].
    mass = np.array([np.mean((errors > a) & (errors <= b), axis=1) for a, b in zip(thresholds, thresholds[1:])])
    excess = np.max(steps - mass)
    criterion(8, bool(monotone) and excess <= 1e-12, f"{len(thresholds)} thresholds, monotone={bool(monotone)}, max step excess {excess:.1e}")


# --- 9 ----------------------------------------------------------------------------


def test_criterion_09_photon_noise(criterion):
    inst = InstrumentModel()
    n = photon_count(1.0, 1.1, inst)
    oracle = trapezoid_oracle(1.0, 1.1, inst)
    rel = abs(n - oracle) / oracle
    sigma = sigma_per_bin(jwst_wavelengths(), inst)
    ok = rel <= 1e-6 and np.all(sigma >= 30e-6)
    criterion(9, ok, f"N_ph={n:.6e}, oracle rel diff {rel:.1e} (<= 1e-6); min sigma {sigma.min() * 1e6:.2f} ppm (>= 30)")


# --- 10 ---------------------------------------------------------------------------


def test_criterion_10_reproducibility(tmp_path, criterion):
    first = tmp_path / "first"
    assert main(["run", "--out", str(first)]) == 0
    inf_runs = [first]
    for name in ("replay_a", "replay_b"):
        assert main(["run", "--manifest", str(first / "manifest.json"), "--out", str(tmp_path / name)]) == 0
        inf_runs.append(tmp_path / name)
    same_inf = len({(d / "metrics.json").read_bytes() for d in inf_runs}) == 1

    shots = tmp_path / "shots"
    assert main(["run", "--set", f"reservoir.shots={SHOTS}", "--out", str(shots)]) == 0
    assert main(["run", "--manifest", str(shots / "manifest.json"), "--out", str(tmp_path / "shots_replay")]) == 0
    a = json.loads((shots / "manifest.json").read_text())["checksums"]
    b = json.loads((tmp_path / "shots_replay" / "manifest.json").read_text())["checksums"]
    same_fin = a == b and (shots / "metrics.json").read_bytes() == (tmp_path / "shots_replay" / "metrics.json").read_bytes()
    criterion(10, same_inf and same_fin, f"infinite-stat metrics JSON bitwise identical: {same_inf}; {SHOTS}-shot checksums identical: {same_fin}")
