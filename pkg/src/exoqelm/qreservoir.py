"""Statevector simulation of the factorised qubit reservoirs.

Gate convention: rotations are ``R(theta) = exp(-i theta sigma)`` with no
factor 1/2, so an RX angle of pi/2 already flips |0> to |1> and 2*pi is a
full return. Qubit 0 is the leftmost tensor factor (most significant bit of
the basis index).

States may carry leading batch axes: an array of shape (..., 2**Q) holds one
state per batch entry, and gate angles broadcast against the batch shape.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# Encoded angles span [0, pi]. With exp(-i theta sigma) rotations the outcome
# probabilities are pi-periodic in theta, so a 2*pi span would make features
# half a range apart indistinguishable. pi here equals a 2*pi span in the
# half-angle exp(-i theta sigma / 2) convention used by hardware SDKs.
ENCODER_SPAN = math.pi
INFINITE = None  # shots value meaning exact probabilities


def n_qubits(state) -> int:
    dim = np.shape(state)[-1]
    q = int(dim).bit_length() - 1
    if dim < 2 or 1 << q != dim:
        raise ValueError(f"state dimension {dim} is not a power of two")
    return q


def zero_state(q: int, batch=()) -> np.ndarray:
    state = np.zeros((*batch, 1 << q), dtype=complex)
    state[..., 0] = 1.0
    return state


def _split(state, k):
    q = n_qubits(state)
    if not 0 <= k < q:
        raise IndexError(f"qubit index {k} out of range for {q} qubits")
    batch = state.shape[:-1]
    return state.reshape(*batch, 1 << k, 2, 1 << (q - k - 1)), batch


def _angle(theta, batch):
    theta = np.asarray(theta, dtype=float)
    return theta.reshape(theta.shape + (1,) * (len(batch) + 2 - theta.ndim)) if theta.ndim else theta


def _rotate(state, k, theta, imaginary):
    s, batch = _split(np.asarray(state, dtype=complex), k)
    th = _angle(theta, batch)
    c, sn = np.cos(th), np.sin(th)
    a0, a1 = s[..., 0, :], s[..., 1, :]
    if imaginary:
        b0 = c * a0 - 1j * sn * a1
        b1 = -1j * sn * a0 + c * a1
    else:
        b0 = c * a0 - sn * a1
        b1 = sn * a0 + c * a1
    return np.stack([b0, b1], axis=-2).reshape(*batch, -1)


def apply_rx(state, k: int, theta) -> np.ndarray:
    """exp(-i theta X) on qubit ``k``."""
    return _rotate(state, k, theta, imaginary=True)


def apply_ry(state, k: int, theta) -> np.ndarray:
    """exp(-i theta Y) on qubit ``k``."""
    return _rotate(state, k, theta, imaginary=False)


def apply_cnot(state, k: int) -> np.ndarray:
    """CNOT with control ``k`` and target ``k + 1``."""
    state = np.asarray(state, dtype=complex)
    q = n_qubits(state)
    if not 0 <= k < q - 1:
        raise IndexError(f"CNOT control {k} out of range for {q} qubits")
    batch = state.shape[:-1]
    s = state.reshape(*batch, 1 << k, 2, 2, 1 << (q - k - 2)).copy()
    s[..., 1, [0, 1], :] = s[..., 1, [1, 0], :]
    return s.reshape(*batch, -1)


@dataclass
class AngleEncoder:
    """Affine map of each feature from its training range onto [0, span]."""

    lo: np.ndarray
    hi: np.ndarray
    span: float = ENCODER_SPAN

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.lo >= self.hi):
            raise ValueError("encoder requires lo < hi for every feature")
        if not 0 < self.span <= TWO_PI:
            raise ValueError("encoder span must lie in (0, 2 pi]")

    @classmethod
    def fit(cls, features, span: float = ENCODER_SPAN) -> AngleEncoder:
        """Fit on an (n, m) training block. A constant feature gets a unit-width range."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        lo = features.min(axis=0)
        hi = features.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        return cls(lo, hi, span)

    def __len__(self):
        return self.lo.size

    def angles(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.lo.size:
            raise ValueError(f"expected {self.lo.size} features, got {x.shape[-1]}")
        theta = self.span * (x - self.lo) / (self.hi - self.lo)
        outside = (theta < 0) | (theta > self.span)
        if np.any(outside):
            log.warning("clamping %d feature value(s) outside the encoder's training range", int(outside.sum()))
            theta = np.clip(theta, 0.0, self.span)
        return theta


def encode(state, x, encoder: AngleEncoder) -> np.ndarray:
    """Apply RX(angle_k) to qubit k for each feature k; other qubits untouched."""
    theta = encoder.angles(x)
    m = theta.shape[-1]
    if m > n_qubits(state):
        raise ValueError(f"{m} features do not fit on {n_qubits(state)} qubits")
    for k in range(m):
        state = apply_rx(state, k, theta[..., k])
    return state


@dataclass
class ReservoirConfig:
    Q: int
    alpha: np.ndarray
    beta: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.alpha.shape != (self.Q,) or self.beta.shape != (self.Q,):
            raise ValueError("alpha and beta need one angle per qubit")

    @classmethod
    def random(cls, Q: int, seed: int) -> ReservoirConfig:
        rng = np.random.default_rng(seed)
        alpha = rng.uniform(0.0, TWO_PI, Q)
        beta = rng.uniform(0.0, TWO_PI, Q)
        return cls(Q, alpha, beta, int(seed))


def evolve_reservoir(state, config: ReservoirConfig) -> np.ndarray:
    """RY(beta) layer, CNOT chain 0->1->...->Q-1, then RY(alpha) layer."""
    if n_qubits(state) != config.Q:
        raise ValueError(f"state has {n_qubits(state)} qubits, reservoir expects {config.Q}")
    for k in range(config.Q):
        state = apply_ry(state, k, config.beta[k])
    for k in range(config.Q - 1):
        state = apply_cnot(state, k)
    for k in range(config.Q):
        state = apply_ry(state, k, config.alpha[k])
    return state


def exact_probabilities(state) -> np.ndarray:
    return np.abs(np.asarray(state)) ** 2


def sample_probabilities(p, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Empirical outcome frequencies from ``shots`` multinomial draws."""
    if shots is None or shots < 1:
        raise ValueError("shots must be a positive integer")
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    p = p / p.sum(axis=-1, keepdims=True)
    return rng.multinomial(int(shots), p) / shots


def derive_seed(*entropy) -> int:
    """Deterministic 63-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(e) for e in entropy]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class ReservoirBank:
    """One reservoir per row of X: ``n_patches`` patch reservoirs, then the global one."""

    configs: list
    n_inputs: list
    master_seed: int = 0
    encoders: list = field(default_factory=list)
    encoder_span: float = ENCODER_SPAN

    def __len__(self):
        return len(self.configs)

    @property
    def output_dim(self) -> int:
        return sum(1 << c.Q for c in self.configs)

    @property
    def fitted(self) -> bool:
        return len(self.encoders) == len(self.configs)

    def block_slices(self) -> list:
        out, start = [], 0
        for c in self.configs:
            out.append(slice(start, start + (1 << c.Q)))
            start += 1 << c.Q
        return out

    def fit_encoders(self, features) -> ReservoirBank:
        """Fit angle encoders on a training :class:`FeatureMatrix`."""
        self.encoders = [AngleEncoder.fit(features.reservoir_inputs(i), self.encoder_span) for i in range(len(self))]
        return self

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "encoder_span": self.encoder_span,
            "reservoirs": [
                {
                    "Q": c.Q,
                    "seed": c.seed,
                    "n_inputs": n,
                    "alpha": c.alpha.tolist(),
                    "beta": c.beta.tolist(),
                    **({"encoder_lo": e.lo.tolist(), "encoder_hi": e.hi.tolist()} if e is not None else {}),
                }
                for c, n, e in zip(self.configs, self.n_inputs, self.encoders or [None] * len(self))
            ],
        }

    @classmethod
    def from_dict(cls, data) -> ReservoirBank:
        span = data.get("encoder_span", ENCODER_SPAN)
        configs, n_inputs, encoders = [], [], []
        for r in data["reservoirs"]:
            configs.append(ReservoirConfig(r["Q"], r["alpha"], r["beta"], r["seed"]))
            n_inputs.append(r["n_inputs"])
            if "encoder_lo" in r:
                encoders.append(AngleEncoder(r["encoder_lo"], r["encoder_hi"], span))
        if encoders and len(encoders) != len(configs):
            raise ValueError("bank file has encoders for only some reservoirs")
        return cls(configs, n_inputs, data["master_seed"], encoders, span)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> ReservoirBank:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_bank(
    n_patches: int,
    M: int,
    master_seed: int,
    qubits: int | None = None,
    global_qubits: int = 5,
    encoder_span: float = ENCODER_SPAN,
) -> ReservoirBank:
    """Patch reservoirs with ``Q = max(M, 3)`` qubits (or ``qubits``) plus a global reservoir.

    Reservoir ``i`` draws its angles from ``derive_seed(master_seed, i)``.
    """
    q_patch = max(M, 3) if qubits is None else qubits
    if q_patch < M:
        raise ValueError(f"reservoirs need at least M={M} qubits, got {q_patch}")
    if global_qubits < 3:
        raise ValueError("the global reservoir encodes 3 features and needs >= 3 qubits")
    configs, n_inputs = [], []
    for i in range(n_patches + 1):
        q = global_qubits if i == n_patches else q_patch
        configs.append(ReservoirConfig.random(q, derive_seed(master_seed, i)))
        n_inputs.append(3 if i == n_patches else M)
    return ReservoirBank(configs, n_inputs, master_seed, encoder_span=encoder_span)


def reservoir_probabilities(x, config: ReservoirConfig, encoder: AngleEncoder) -> np.ndarray:
    """Exact outcome probabilities for a batch ``x`` of shape (n, features)."""
    x = np.atleast_2d(x)
    state = zero_state(config.Q, batch=(x.shape[0],))
    state = encode(state, x, encoder)
    state = evolve_reservoir(state, config)
    return exact_probabilities(state)


def _sample_block(p, shots, seed, sample_ids, reservoir):
    out = np.empty_like(p)
    for row, sid in enumerate(sample_ids):
        rng = np.random.default_rng(derive_seed(seed, sid, reservoir))
        out[row] = sample_probabilities(p[row], shots, rng)
    return out


def run_bank(x_rows, bank: ReservoirBank, shots=INFINITE, seed: int = 0, sample_id: int = 0) -> np.ndarray:
    """P column for one sample: concatenated outcome probabilities of every reservoir.

    ``x_rows`` is the list of feature rows of X (patches then globals).
    With finite ``shots``, reservoir ``i`` samples with ``derive_seed(seed, sample_id, i)``.
    """
    if not bank.fitted:
        raise RuntimeError("reservoir encoders are not fitted")
    if len(x_rows) != len(bank):
        raise ValueError(f"X has {len(x_rows)} rows but the bank has {len(bank)} reservoirs")
    blocks = []
    for i, (x, cfg, enc) in enumerate(zip(x_rows, bank.configs, bank.encoders)):
        p = reservoir_probabilities(np.asarray(x)[None, :], cfg, enc)
        if shots is not INFINITE:
            p = _sample_block(p, shots, seed, [sample_id], i)
        blocks.append(p[0])
    return np.concatenate(blocks)


@dataclass
class ProbabilityMatrix:
    """Outcome probabilities, (D_out, D): one column per sample."""

    values: np.ndarray
    shots: int | None = INFINITE
    sample_ids: np.ndarray | None = None

    @property
    def shape(self):
        return self.values.shape


def build_probability_matrix(features, bank: ReservoirBank, shots=INFINITE, seed: int = 0, sample_ids=None) -> ProbabilityMatrix:
    """Stack :func:`run_bank` columns for every sample of a :class:`FeatureMatrix`.

    ``sample_ids`` (default 0..D-1) key the per-sample sampling seeds so a
    column does not depend on which other samples share the batch.
    """
    if not bank.fitted:
        raise RuntimeError("reservoir encoders are not fitted")
    n = len(features)
    if features.n_patches + 1 != len(bank):
        raise ValueError(f"X has {features.n_patches + 1} rows but the bank has {len(bank)} reservoirs")
    ids = np.arange(n) if sample_ids is None else np.asarray(sample_ids, dtype=int)
    blocks = []
    for i, (cfg, enc) in enumerate(zip(bank.configs, bank.encoders)):
        p = reservoir_probabilities(features.reservoir_inputs(i), cfg, enc)
        if shots is not INFINITE:
            p = _sample_block(p, shots, seed, ids, i)
        blocks.append(p)
    return ProbabilityMatrix(np.concatenate(blocks, axis=1).T.copy(), shots, ids)
