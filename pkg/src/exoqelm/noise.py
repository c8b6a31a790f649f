"""Photon shot noise for a JWST-like observation of the host star.

The mean photoelectron count collected in a bin [lam1, lam2] is

    N_ph = pi tau dt / (h c) * (R_star D / (2 d))^2 * int B(lam, T_star) lam dlam

and the per-bin noise is ``max(1/sqrt(N_ph), floor)``, added to the
transit depth as a zero-mean Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants, integrate

from exoqelm.forwardmodel import Spectrum

H = constants.h
C = constants.c
K_B = constants.k
PARSEC = constants.parsec
R_SUN = 6.957e8  # IAU nominal solar radius, m


@dataclass(frozen=True)
class InstrumentModel:
    """Observation set-up. ``D`` keeps the dimensionless value 16 as quoted."""

    R_star: float = 1.46
    T_star: float = 6460.0
    d: float = 270.0
    D: float = 16.0
    tau: float = 0.4
    dt: float = 21340.0
    floor_ppm: float = 30.0
    wavelength_range: tuple = (0.6, 2.8)

    def __post_init__(self):
        for name in ("R_star", "T_star", "d", "D", "tau", "dt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"instrument parameter {name} must be positive, got {value!r}")
        if not (math.isfinite(self.floor_ppm) and self.floor_ppm >= 0):
            raise ValueError("floor_ppm must be >= 0")

    @property
    def prefactor(self) -> float:
        """pi tau dt / (h c) * (R_star D / 2d)^2 in SI units."""
        r_star = self.R_star * R_SUN
        dist = self.d * PARSEC
        return math.pi * self.tau * self.dt / (H * C) * (r_star * self.D / (2.0 * dist)) ** 2


def planck(lam, T):
    """Black-body spectral radiance B(lam, T) in W m^-3 sr^-1 (lam in metres)."""
    lam = np.asarray(lam, dtype=float)
    if not (np.all(np.isfinite(lam)) and math.isfinite(T)):
        raise ValueError("planck inputs must be finite")
    if np.any(lam <= 0) or T <= 0:
        raise ValueError("planck requires lam > 0 and T > 0")
    x = H * C / (lam * K_B * T)
    return 2.0 * H * C**2 / lam**5 / np.expm1(x)


def photon_count(lam1: float, lam2: float, inst: InstrumentModel | None = None) -> float:
    """Mean photoelectrons collected between ``lam1`` and ``lam2`` micrometres."""
    inst = InstrumentModel() if inst is None else inst
    if not (0 < lam1 <= lam2):
        raise ValueError(f"bin edges must satisfy 0 < lam1 <= lam2, got ({lam1}, {lam2})")
    if lam1 == lam2:
        return 0.0
    a, b = lam1 * 1e-6, lam2 * 1e-6
    integral, _ = integrate.quad(
        lambda lam: float(planck(lam, inst.T_star)) * lam, a, b, epsabs=0.0, epsrel=1e-12, limit=200
    )
    return inst.prefactor * integral


def sigma_from_count(n_ph: float, floor_ppm: float = 30.0) -> float:
    if not n_ph > 0:
        raise ValueError("photon count must be positive (sigma would be infinite)")
    return max(1.0 / math.sqrt(n_ph), floor_ppm / 1e6)


def noise_sigma(bin_edges, inst: InstrumentModel | None = None) -> float:
    """Relative 1-sigma noise for a single bin ``(lam1, lam2)`` in micrometres."""
    inst = InstrumentModel() if inst is None else inst
    lam1, lam2 = bin_edges
    return sigma_from_count(photon_count(lam1, lam2, inst), inst.floor_ppm)


def bin_edges(wavelengths) -> np.ndarray:
    """Edges halfway between bin centres; outer edges mirror the first/last gap."""
    lam = np.asarray(wavelengths, dtype=float)
    if lam.size < 2:
        raise ValueError("need at least two bins to infer edges")
    mid = 0.5 * (lam[1:] + lam[:-1])
    first = lam[0] - (mid[0] - lam[0])
    last = lam[-1] + (lam[-1] - mid[-1])
    return np.concatenate([[first], mid, [last]])


def sigma_per_bin(wavelengths, inst: InstrumentModel | None = None) -> np.ndarray:
    inst = InstrumentModel() if inst is None else inst
    edges = bin_edges(wavelengths)
    return np.array([noise_sigma((lo, hi), inst) for lo, hi in zip(edges[:-1], edges[1:])])


def _check_range(wavelengths, inst):
    lo, hi = inst.wavelength_range
    if wavelengths[0] < lo or wavelengths[-1] > hi:
        raise ValueError(f"spectrum grid [{wavelengths[0]}, {wavelengths[-1]}] um outside instrument range {inst.wavelength_range}")


def add_shot_noise(spectrum: Spectrum, inst: InstrumentModel | None, rng: np.random.Generator, sigma=None) -> Spectrum:
    """Return a copy of ``spectrum`` with independent Gaussian noise per bin.

    ``sigma`` may be passed to reuse a precomputed :func:`sigma_per_bin`.
    """
    inst = InstrumentModel() if inst is None else inst
    _check_range(spectrum.wavelengths, inst)
    if sigma is None:
        sigma = sigma_per_bin(spectrum.wavelengths, inst)
    noisy = spectrum.depths + rng.normal(0.0, 1.0, spectrum.depths.shape) * sigma
    return Spectrum(spectrum.wavelengths, noisy, spectrum.params)
