"""Toy transmission-spectrum generator over a discrete atmospheric parameter grid.

This stands in for a radiative-transfer code. A spectrum is a flat
baseline set by the planet radius plus Gaussian absorption bands whose
amplitude grows with the molecule's log10 volume mixing ratio and with a
scale-height factor ``T R^2 / M``::

    depth(lam) = d0 R^2 + sum_m amp_m sum_b s_b exp(-(lam - c_b)^2 / (2 w_b(T)^2))
    amp_m      = AMP_PER_DEX * (log10 VMR_m + 9) * (T / 1000) * R^2 / M
    w_b(T)     = w_b * sqrt(T / 1000)

with ``R``, ``M`` in Jupiter units and ``T`` in Kelvin. Band centres,
reference widths and relative strengths live in :data:`BANDS`.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from exoqelm.errors import DatasetFormatError

PARAM_NAMES = ("ch4", "co2", "co", "h2o", "mass", "radius", "temp")
MOLECULES = ("ch4", "co2", "co", "h2o")

# Lower/upper bounds in physical units; VMRs are linear here, log10 in the grid.
PARAM_BOUNDS = {
    "ch4": (1e-8, 1e-1),
    "co2": (1e-8, 1e-1),
    "co": (1e-8, 1e-1),
    "h2o": (1e-8, 1e-1),
    "mass": (0.8, 2.0),
    "radius": (0.8, 1.5),
    "temp": (1000.0, 2000.0),
}
GRID_SIZE = 10

WAVELENGTH_RANGE = (0.3, 50.0)
DEFAULT_NBINS = 515

# (R_jup / 1.46 R_sun)^2: Jupiter-size planet around the default host star.
BASE_DEPTH = 4.95e-3
AMP_PER_DEX = 30e-6
VMR_OFFSET = 9.0
T_REF = 1000.0

# molecule -> ((centre um, width at T_REF um, relative strength), ...)
BANDS = {
    "h2o": (
        (0.94, 0.03, 0.35),
        (1.15, 0.04, 0.55),
        (1.40, 0.07, 1.00),
        (1.90, 0.08, 1.00),
        (2.70, 0.12, 1.20),
        (6.30, 0.50, 1.20),
    ),
    "ch4": (
        (1.17, 0.04, 0.40),
        (1.70, 0.06, 0.80),
        (2.30, 0.08, 1.00),
        (3.30, 0.15, 1.50),
        (7.70, 0.50, 1.00),
    ),
    "co2": (
        (1.60, 0.04, 0.30),
        (2.00, 0.05, 0.60),
        (2.70, 0.06, 0.50),
        (4.30, 0.15, 1.60),
        (15.0, 1.00, 1.00),
    ),
    "co": (
        (1.57, 0.03, 0.15),
        (2.35, 0.08, 0.60),
        (4.70, 0.15, 1.20),
    ),
    # H2-H2 collision-induced absorption, fixed background abundance.
    "h2": (
        (1.20, 0.20, 0.50),
        (2.40, 0.35, 1.00),
    ),
}
BACKGROUND_LOG_VMR = {"h2": -1.0}


@dataclass(frozen=True)
class AtmosphericParams:
    """Retrieval targets. VMRs are stored as log10 values."""

    ch4: float
    co2: float
    co: float
    h2o: float
    mass: float
    radius: float
    temp: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            low, high = grid_bounds(name)
            if not (math.isfinite(value) and low <= value <= high):
                raise ValueError(f"{name}={value!r} outside bounds [{low}, {high}]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> AtmosphericParams:
        values = [float(v) for v in values]
        if len(values) != len(PARAM_NAMES):
            raise ValueError(f"expected {len(PARAM_NAMES)} values, got {len(values)}")
        return cls(*values)


def grid_bounds(name, bounds=PARAM_BOUNDS):
    """Bounds of ``name`` in grid representation (log10 for VMRs)."""
    low, high = bounds[name]
    if name in MOLECULES:
        return math.log10(low), math.log10(high)
    return float(low), float(high)


@dataclass
class ParameterGrid:
    values: dict = field(default_factory=dict)

    def __getitem__(self, name) -> np.ndarray:
        return self.values[name]

    def contains(self, params: AtmosphericParams) -> bool:
        return all(getattr(params, n) in self.values[n] for n in PARAM_NAMES)


def build_grid(bounds=PARAM_BOUNDS, size=GRID_SIZE) -> ParameterGrid:
    """Ten admissible values per parameter, endpoints included.

    VMRs are spaced uniformly in log10 and stored as log10 values; mass,
    radius and temperature are spaced linearly.
    """
    values = {}
    for name in PARAM_NAMES:
        low, high = bounds[name]
        if not (math.isfinite(low) and math.isfinite(high)):
            raise ValueError(f"non-finite bounds for {name}: {(low, high)}")
        if not low < high:
            raise ValueError(f"bounds for {name} must satisfy low < high, got {(low, high)}")
        if name in MOLECULES and low <= 0:
            raise ValueError(f"mixing-ratio bounds for {name} must be positive")
        lo, hi = grid_bounds(name, bounds)
        values[name] = np.linspace(lo, hi, size)
    return ParameterGrid(values)


def sample_params(grid: ParameterGrid, rng: np.random.Generator) -> AtmosphericParams:
    """Draw each parameter independently and uniformly from its grid values."""
    picks = []
    for name in PARAM_NAMES:
        vals = grid[name]
        picks.append(vals[rng.integers(len(vals))])
    return AtmosphericParams.from_array(picks)


@dataclass
class Spectrum:
    wavelengths: np.ndarray
    depths: np.ndarray
    params: AtmosphericParams | None = None

    def __post_init__(self):
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        self.depths = np.asarray(self.depths, dtype=float)
        if self.wavelengths.shape != self.depths.shape or self.wavelengths.ndim != 1:
            raise ValueError("wavelengths and depths must be 1-D arrays of equal length")
        if np.any(np.diff(self.wavelengths) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(self.depths)):
            raise ValueError("depths must be finite")

    def __len__(self):
        return len(self.depths)


def default_wavelengths(nbins=DEFAULT_NBINS) -> np.ndarray:
    """Bins uniform in log10(wavelength) over 0.3-50 um."""
    return np.geomspace(*WAVELENGTH_RANGE, nbins)


def scale_height_factor(params: AtmosphericParams) -> float:
    return (params.temp / T_REF) * params.radius**2 / params.mass


def molecule_amplitude(params: AtmosphericParams, molecule: str) -> float:
    log_vmr = BACKGROUND_LOG_VMR[molecule] if molecule in BACKGROUND_LOG_VMR else getattr(params, molecule)
    return AMP_PER_DEX * (log_vmr + VMR_OFFSET) * scale_height_factor(params)


def synth_spectrum(params: AtmosphericParams, wavelengths=None) -> Spectrum:
    """Evaluate the closed-form toy spectrum on ``wavelengths`` (micrometres)."""
    if not isinstance(params, AtmosphericParams):
        params = AtmosphericParams.from_array(params)
    lam = default_wavelengths() if wavelengths is None else np.asarray(wavelengths, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("wavelength grid must be a non-empty 1-D array")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("wavelength grid must be strictly increasing")
    if lam[0] < WAVELENGTH_RANGE[0] or lam[-1] > WAVELENGTH_RANGE[1]:
        raise ValueError(f"wavelength grid must lie within {WAVELENGTH_RANGE} um")

    width_scale = math.sqrt(params.temp / T_REF)
    depths = np.full(lam.shape, BASE_DEPTH * params.radius**2)
    for molecule in BANDS:
        amp = molecule_amplitude(params, molecule)
        profile = np.zeros_like(lam)
        for centre, width, strength in BANDS[molecule]:
            w = width * width_scale
            profile += strength * np.exp(-0.5 * ((lam - centre) / w) ** 2)
        depths += amp * profile
    return Spectrum(lam, depths, params)


@dataclass
class SpectralDataset:
    """Labelled spectra on a shared grid.

    ``depths`` is (n, nbins), ``labels`` is (n, 7) in :data:`PARAM_NAMES`
    order with log10 VMRs.
    """

    wavelengths: np.ndarray
    depths: np.ndarray
    labels: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        self.depths = np.atleast_2d(np.asarray(self.depths, dtype=float))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=float))
        if self.depths.shape[1] != self.wavelengths.size:
            raise ValueError("depth rows do not match the wavelength grid")
        if self.labels.shape != (self.depths.shape[0], len(PARAM_NAMES)):
            raise ValueError("every spectrum needs a 7-parameter label")

    def __len__(self):
        return self.depths.shape[0]

    def __getitem__(self, i) -> Spectrum:
        return Spectrum(self.wavelengths, self.depths[i], AtmosphericParams.from_array(self.labels[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, indices) -> SpectralDataset:
        indices = np.asarray(indices, dtype=int)
        return SpectralDataset(self.wavelengths, self.depths[indices], self.labels[indices], self.seed)

    def __eq__(self, other):
        if not isinstance(other, SpectralDataset):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.wavelengths, other.wavelengths)
            and np.array_equal(self.depths, other.depths)
            and np.array_equal(self.labels, other.labels)
        )


def generate_dataset(n: int, seed: int, wavelengths=None, grid: ParameterGrid | None = None) -> SpectralDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = default_wavelengths() if wavelengths is None else np.asarray(wavelengths, dtype=float)
    grid = build_grid() if grid is None else grid
    rng = np.random.default_rng(seed)
    depths = np.empty((n, lam.size))
    labels = np.empty((n, len(PARAM_NAMES)))
    for i in range(n):
        params = sample_params(grid, rng)
        depths[i] = synth_spectrum(params, lam).depths
        labels[i] = params.as_array()
    return SpectralDataset(lam, depths, labels, seed)


_HEADER = re.compile(r"^#\s*seed=(\d+)\s+nbins=(\d+)\s*$")


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_dataset(ds: SpectralDataset, path) -> None:
    """Write ``ds`` as CSV: header, wavelength line, one row per spectrum."""
    buf = io.StringIO()
    buf.write(f"# seed={int(ds.seed)} nbins={ds.wavelengths.size}\n")
    buf.write(_fmt(ds.wavelengths) + "\n")
    for label, depth in zip(ds.labels, ds.depths):
        buf.write(_fmt(label) + "," + _fmt(depth) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _parse_floats(line, lineno):
    try:
        return [float(tok) for tok in line.split(",")]
    except ValueError as exc:
        raise DatasetFormatError(f"non-numeric value ({exc})", row=lineno) from None


def read_dataset(path) -> SpectralDataset:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetFormatError("empty dataset file", row=1)
    m = _HEADER.match(lines[0])
    if m is None:
        raise DatasetFormatError(f"malformed header {lines[0]!r}", row=1)
    seed, nbins = int(m.group(1)), int(m.group(2))
    if len(lines) < 2:
        raise DatasetFormatError("missing wavelength grid line", row=2)
    grid = _parse_floats(lines[1], 2)
    if len(grid) != nbins:
        raise DatasetFormatError(f"wavelength grid has {len(grid)} values, header says {nbins}", row=2)

    ncols = len(PARAM_NAMES) + nbins
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        values = _parse_floats(line, lineno)
        if len(values) != ncols:
            raise DatasetFormatError(f"expected {ncols} columns, found {len(values)}", row=lineno)
        rows.append(values)
    if not rows:
        raise DatasetFormatError("dataset contains no spectra", row=len(lines) + 1)
    data = np.array(rows)
    k = len(PARAM_NAMES)
    return SpectralDataset(np.array(grid), data[:, k:], data[:, :k], seed)
