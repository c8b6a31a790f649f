"""Quantum extreme learning machine retrieval of exoplanet atmospheric parameters.

The pipeline: synthetic transmission spectra -> (optional shot noise, PCA
filter) -> patching, per-patch normalisation and PCA -> angle encoding into
small simulated qubit reservoirs -> outcome probabilities -> linear readout
trained by pseudoinverse.
"""

from exoqelm.forwardmodel import (
    PARAM_NAMES,
    AtmosphericParams,
    ParameterGrid,
    Spectrum,
    SpectralDataset,
    build_grid,
    generate_dataset,
    read_dataset,
    sample_params,
    synth_spectrum,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "PARAM_NAMES",
    "AtmosphericParams",
    "ParameterGrid",
    "Spectrum",
    "SpectralDataset",
    "build_grid",
    "generate_dataset",
    "read_dataset",
    "sample_params",
    "synth_spectrum",
    "write_dataset",
]
