"""Run configuration: an INI-style key-value file with one section per module.

Example::

    [run]
    mode = jwst

    [dataset]
    n = 4080
    seed = 7

    [preprocess]
    patches = jwst          ; preset name or comma-separated edges in um
    pca.components = 5
    filter.components = 10

    [reservoir]
    seed = 1
    shots = inf             ; or a positive integer

Unknown sections or keys are rejected so typos do not silently fall back
to defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from exoqelm.errors import ConfigError
from exoqelm.noise import InstrumentModel
from exoqelm.preprocess import MODES, PRESETS
from exoqelm.qreservoir import ENCODER_SPAN

OUTPUT_ROOT_ENV = "EXOQELM_OUTPUT_ROOT"


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


@dataclass
class RunConfig:
    mode: str = "jwst"
    dataset_path: str | None = None
    n_spectra: int = 4080
    dataset_seed: int = 7
    patches: str | None = None  # preset name or comma-separated edges; None -> preset for mode
    n_components: int = 5
    filter_components: int = 10
    reservoir_seed: int = 1
    qubits: int | None = None
    global_qubits: int = 5
    encoder_span: float = ENCODER_SPAN
    shots: int | None = None  # None = infinite statistics
    sampling_seed: int = 2
    train_fraction: float = 0.75
    split_seed: int = 3
    train_size: int | None = None
    test_size: int | None = None
    threshold: float = 5.0
    thresholds: tuple = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
    noise_seed: int = 4
    bootstrap_resamples: int = 1000
    bootstrap_level: float = 0.95
    bootstrap_seed: int = 5
    instrument: InstrumentModel = field(default_factory=InstrumentModel)
    output_dir: str | None = None

    def validate(self, check_paths: bool = True) -> RunConfig:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dataset_path is not None and check_paths and not Path(self.dataset_path).exists():
            raise ConfigError(f"dataset path {self.dataset_path!r} does not exist")
        if self.n_spectra < 1:
            raise ConfigError("dataset.n must be >= 1")
        if self.n_components < 1:
            raise ConfigError("pca.components must be >= 1")
        if self.filter_components < 1:
            raise ConfigError("filter.components must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1 or inf")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("split.fraction must lie in (0, 1)")
        if not 0 < self.encoder_span <= 2 * math.pi:
            raise ConfigError("encoder.span must lie in (0, 2 pi]")
        if not 0 < self.bootstrap_level < 1:
            raise ConfigError("bootstrap.level must lie in (0, 1)")
        if self.bootstrap_resamples < 100:
            raise ConfigError("bootstrap.resamples must be >= 100")
        if self.patches is not None and self.patches not in PRESETS:
            try:
                edges = [float(e) for e in self.patches.split(",")]
            except ValueError:
                raise ConfigError(f"patches must be a preset {sorted(PRESETS)} or comma-separated edges") from None
            if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
                raise ConfigError("patch edges must be strictly increasing")
        return self

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["instrument"] = dataclasses.asdict(self.instrument)
        d["instrument"]["wavelength_range"] = list(self.instrument.wavelength_range)
        d["thresholds"] = list(self.thresholds)
        return d

    @classmethod
    def from_dict(cls, data) -> RunConfig:
        data = dict(data)
        inst = data.pop("instrument", None)
        if inst is not None:
            inst = dict(inst)
            if "wavelength_range" in inst:
                inst["wavelength_range"] = tuple(inst["wavelength_range"])
            data["instrument"] = InstrumentModel(**inst)
        if "thresholds" in data:
            data["thresholds"] = tuple(data["thresholds"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        return cls(**data)

    def fingerprint(self, exclude=("output_dir",)) -> str:
        """SHA-256 over the canonical JSON of every field not in ``exclude``."""
        d = {k: v for k, v in self.to_dict().items() if k not in exclude}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_shots(text) -> int | None:
    text = str(text).strip().lower()
    if text in ("inf", "infinite", "none"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"shots must be a positive integer or 'inf', got {text!r}") from None
    if value < 1:
        raise ConfigError("shots must be >= 1 or inf")
    return value


def parse_angle(text) -> float:
    t = str(text).strip().lower().replace(" ", "")
    if t.endswith("pi"):
        factor = t[:-2].rstrip("*") or "1"
        try:
            return float(factor) * math.pi
        except ValueError:
            raise ConfigError(f"cannot parse angle {text!r}") from None
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"cannot parse angle {text!r}") from None


def _optional_int(text):
    t = str(text).strip().lower()
    return None if t in ("", "auto", "none") else int(t)


# (section, key) -> (field, parser)
_KEYS = {
    ("run", "mode"): ("mode", str),
    ("run", "output_dir"): ("output_dir", str),
    ("dataset", "path"): ("dataset_path", str),
    ("dataset", "n"): ("n_spectra", int),
    ("dataset", "seed"): ("dataset_seed", int),
    ("preprocess", "mode"): ("mode", str),
    ("preprocess", "patches"): ("patches", str),
    ("preprocess", "pca.components"): ("n_components", int),
    ("preprocess", "filter.components"): ("filter_components", int),
    ("reservoir", "seed"): ("reservoir_seed", int),
    ("reservoir", "qubits"): ("qubits", _optional_int),
    ("reservoir", "global_qubits"): ("global_qubits", int),
    ("reservoir", "encoder.span"): ("encoder_span", parse_angle),
    ("reservoir", "shots"): ("shots", parse_shots),
    ("reservoir", "sampling_seed"): ("sampling_seed", int),
    ("split", "fraction"): ("train_fraction", float),
    ("split", "seed"): ("split_seed", int),
    ("split", "train_size"): ("train_size", _optional_int),
    ("split", "test_size"): ("test_size", _optional_int),
    ("metrics", "threshold"): ("threshold", float),
    ("metrics", "thresholds"): ("thresholds", lambda s: tuple(float(v) for v in s.split(","))),
    ("metrics", "bootstrap.resamples"): ("bootstrap_resamples", int),
    ("metrics", "bootstrap.level"): ("bootstrap_level", float),
    ("metrics", "bootstrap.seed"): ("bootstrap_seed", int),
    ("noise", "seed"): ("noise_seed", int),
}
_INSTRUMENT_KEYS = {"r_star": "R_star", "t_star": "T_star", "d": "d", "diameter": "D", "tau": "tau", "dt": "dt", "floor_ppm": "floor_ppm"}


def apply_setting(values: dict, inst: dict, section: str, key: str, raw: str) -> None:
    section, key = section.strip().lower(), key.strip().lower()
    try:
        if section == "instrument":
            if key not in _INSTRUMENT_KEYS:
                raise ConfigError(f"unknown key [instrument] {key}")
            inst[_INSTRUMENT_KEYS[key]] = float(raw)
            return
        if (section, key) not in _KEYS:
            raise ConfigError(f"unknown key [{section}] {key}")
        name, parser = _KEYS[(section, key)]
        values[name] = parser(raw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from None


def load_config(path=None, overrides=()) -> RunConfig:
    """Read a config file (optional) and apply ``section.key=value`` overrides."""
    values, inst = {}, {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                apply_setting(values, inst, section, key, raw)
    for item in overrides:
        target, sep, raw = item.partition("=")
        section, dot, key = target.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        apply_setting(values, inst, section, key, raw)
    cfg = RunConfig(**values)
    if inst:
        try:
            cfg.instrument = InstrumentModel(**inst)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg
