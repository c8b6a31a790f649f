"""Feature extraction: interpolation, patching, normalisation and per-patch PCA.

For every spectrum the feature matrix X has one row of ``M`` principal
components per patch plus a final row holding the spectrum's global
(max, min, mean).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from exoqelm.forwardmodel import Spectrum

MODES = ("taurex", "jwst", "njwst", "fjwst")

# Working grid for the JWST modes: 0.02 um bins over 0.6-2.8 um.
JWST_RANGE = (0.6, 2.8)
JWST_NBINS = 111

# Patch edges in micrometres. The 14-patch preset follows the main water
# bands and instrument pass-bands; the 8-patch preset covers NIRISS only.
TAUREX_EDGES = (0.3, 0.6, 0.85, 1.05, 1.3, 1.55, 1.8, 2.05, 2.4, 2.8, 3.6, 4.5, 5.5, 10.0, 50.0)
JWST_EDGES = (0.6, 0.85, 1.05, 1.3, 1.55, 1.8, 2.05, 2.4, 2.8)
PRESETS = {"taurex": TAUREX_EDGES, "jwst": JWST_EDGES}


def jwst_wavelengths() -> np.ndarray:
    return np.linspace(*JWST_RANGE, JWST_NBINS)


@dataclass(frozen=True)
class PatchLayout:
    edges: tuple

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2:
            raise ValueError("a patch layout needs at least two edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("patch edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @property
    def n_patches(self) -> int:
        return len(self.edges) - 1

    @classmethod
    def preset(cls, name) -> PatchLayout:
        try:
            return cls(PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown patch preset {name!r}; choose from {sorted(PRESETS)}") from None


def interpolate(spectrum: Spectrum, target_grid) -> Spectrum:
    """Piecewise-linear resampling of ``spectrum`` onto ``target_grid``."""
    target = np.asarray(target_grid, dtype=float)
    src = spectrum.wavelengths
    if target[0] < src[0] or target[-1] > src[-1]:
        raise ValueError(
            f"target grid [{target[0]}, {target[-1]}] extrapolates beyond source [{src[0]}, {src[-1]}]"
        )
    return Spectrum(target, np.interp(target, src, spectrum.depths), spectrum.params)


def interpolate_rows(depths, source_grid, target_grid) -> np.ndarray:
    """Row-wise :func:`interpolate` for a (n, bins) depth matrix."""
    src = np.asarray(source_grid, dtype=float)
    target = np.asarray(target_grid, dtype=float)
    if target[0] < src[0] or target[-1] > src[-1]:
        raise ValueError("target grid extrapolates beyond source grid")
    depths = np.atleast_2d(depths)
    return np.stack([np.interp(target, src, row) for row in depths])


def patch_indices(wavelengths, layout: PatchLayout) -> list:
    """Bin indices of each patch: half-open [e_j, e_j+1), last patch closed."""
    lam = np.asarray(wavelengths, dtype=float)
    edges = layout.edges
    out = []
    for j in range(layout.n_patches):
        lo, hi = edges[j], edges[j + 1]
        if j == layout.n_patches - 1:
            mask = (lam >= lo) & (lam <= hi)
        else:
            mask = (lam >= lo) & (lam < hi)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise ValueError(f"patch {j} [{lo}, {hi}] contains no bins")
        out.append(idx)
    return out


def split_patches(spectrum: Spectrum, layout: PatchLayout) -> list:
    return [spectrum.depths[idx] for idx in patch_indices(spectrum.wavelengths, layout)]


def normalize_patch(v) -> np.ndarray:
    """Min-max scale to [0, 1]; rows of a 2-D input are scaled independently.

    A constant patch maps to zeros.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == 0:
        raise ValueError("cannot normalise an empty patch")
    lo = v.min(axis=-1, keepdims=True)
    span = v.max(axis=-1, keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (v - lo) / safe, 0.0)


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (M, bins), orthonormal rows
    explained_variance: np.ndarray
    total_variance: float = 0.0

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(rows, n_components: int) -> PcaModel:
    """PCA via SVD of the centred data.

    Each component is signed so that its largest-magnitude entry is positive.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    n, bins = rows.shape
    if n_components < 1 or n_components > min(n, bins):
        raise ValueError(f"n_components={n_components} must lie in [1, min(samples={n}, bins={bins})]")
    mean = rows.mean(axis=0)
    _, s, vt = np.linalg.svd(rows - mean, full_matrices=False)
    comps = vt[:n_components].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(n_components), pivot])
    comps *= signs[:, None]
    denom = max(n - 1, 1)
    var = s**2 / denom
    return PcaModel(mean, comps, var[:n_components].copy(), float(var.sum()))


def _check_dim(model, width):
    if width != model.mean.size:
        raise ValueError(f"row length {width} does not match PCA model dimension {model.mean.size}")


def pca_transform(model: PcaModel, row) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    _check_dim(model, row.shape[-1])
    return (row - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, comps) -> np.ndarray:
    comps = np.asarray(comps, dtype=float)
    if comps.shape[-1] != model.n_components:
        raise ValueError(f"expected {model.n_components} components, got {comps.shape[-1]}")
    return model.mean + comps @ model.components


def pca_filter(rows, k: int = 10, fit_rows=None) -> np.ndarray:
    """Replace each row by its rank-``k`` PCA reconstruction.

    The PCA is fitted on ``fit_rows`` when given (e.g. the training split),
    otherwise on ``rows`` themselves.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    model = pca_fit(rows if fit_rows is None else fit_rows, k)
    return pca_inverse(model, pca_transform(model, rows))


def cumulative_explained_variance(model: PcaModel) -> np.ndarray:
    total = model.total_variance if model.total_variance > 0 else model.explained_variance.sum()
    if total <= 0:
        return np.ones_like(model.explained_variance)
    return np.cumsum(model.explained_variance) / total


def global_features(spectrum) -> np.ndarray:
    """(max, min, mean) of the depths; accepts a Spectrum or (n, bins) array."""
    depths = spectrum.depths if isinstance(spectrum, Spectrum) else np.asarray(spectrum, dtype=float)
    if depths.shape[-1] == 0:
        raise ValueError("empty spectrum")
    return np.stack([depths.max(axis=-1), depths.min(axis=-1), depths.mean(axis=-1)], axis=-1)


@dataclass
class FeatureMatrix:
    """Features for a batch of spectra.

    ``patches`` is (n, N_p, M); ``globals_`` is (n, 3). Row ``i`` of X for
    sample ``s`` is ``patches[s, i]`` for i < N_p and ``globals_[s]`` last.
    """

    patches: np.ndarray
    globals_: np.ndarray

    def __len__(self):
        return self.patches.shape[0]

    @property
    def n_patches(self) -> int:
        return self.patches.shape[1]

    def rows(self, sample: int) -> list:
        return [self.patches[sample, i] for i in range(self.n_patches)] + [self.globals_[sample]]

    def reservoir_inputs(self, i: int) -> np.ndarray:
        """(n, features) input block for reservoir ``i``."""
        return self.globals_ if i == self.n_patches else self.patches[:, i, :]

    def subset(self, indices) -> FeatureMatrix:
        return FeatureMatrix(self.patches[indices], self.globals_[indices])


def working_grid(mode: str, source_grid) -> np.ndarray:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    return np.asarray(source_grid, dtype=float) if mode == "taurex" else jwst_wavelengths()


@dataclass
class Preprocessor:
    """Fits the filter and per-patch PCA models on training spectra.

    Inputs to :meth:`fit` and :meth:`transform` are depth matrices already on
    the working grid (interpolated and, for the noisy modes, noised).
    """

    mode: str
    wavelengths: np.ndarray
    layout: PatchLayout
    n_components: int = 5
    filter_components: int = 10
    filter_model: PcaModel | None = None
    pca_models: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        self._indices = patch_indices(self.wavelengths, self.layout)
        smallest = min(idx.size for idx in self._indices)
        if self.n_components > smallest:
            raise ValueError(f"M={self.n_components} exceeds the smallest patch size ({smallest} bins)")

    @property
    def fitted(self) -> bool:
        return len(self.pca_models) == self.layout.n_patches

    def denoise(self, depths) -> np.ndarray:
        if self.mode != "fjwst":
            return np.atleast_2d(depths)
        if self.filter_model is None:
            raise RuntimeError("filter PCA has not been fitted")
        return pca_inverse(self.filter_model, pca_transform(self.filter_model, depths))

    def normalized_patches(self, depths) -> list:
        return [normalize_patch(depths[:, idx]) for idx in self._indices]

    def fit(self, depths) -> Preprocessor:
        depths = np.atleast_2d(np.asarray(depths, dtype=float))
        if self.mode == "fjwst":
            self.filter_model = pca_fit(depths, self.filter_components)
        clean = self.denoise(depths)
        self.pca_models = [pca_fit(p, self.n_components) for p in self.normalized_patches(clean)]
        return self

    def transform(self, depths) -> FeatureMatrix:
        if not self.fitted:
            raise RuntimeError("Preprocessor.transform called before fit")
        depths = self.denoise(np.atleast_2d(np.asarray(depths, dtype=float)))
        comps = [pca_transform(m, p) for m, p in zip(self.pca_models, self.normalized_patches(depths))]
        return FeatureMatrix(np.stack(comps, axis=1), global_features(depths))


def assemble_X(spectra, layout: PatchLayout, pca_models, mode: str, filter_model: PcaModel | None = None) -> list:
    """Per-spectrum feature rows ``[x^1, ..., x^Np, (max, min, mean)]``.

    ``spectra`` must already sit on the working grid for ``mode``; in
    ``fjwst`` mode ``filter_model`` supplies the denoising PCA.
    """
    out = []
    for spec in spectra:
        depths = spec.depths
        if mode == "fjwst":
            if filter_model is None:
                raise ValueError("fjwst mode requires a fitted filter model")
            depths = pca_inverse(filter_model, pca_transform(filter_model, depths))
        patches = split_patches(Spectrum(spec.wavelengths, depths), layout)
        rows = [pca_transform(m, normalize_patch(p)) for m, p in zip(pca_models, patches)]
        rows.append(global_features(depths))
        out.append(rows)
    return out
