"""JSON scenario configuration.

A config file is a JSON object with optional sections; every section and key
is checked against the defaults, and anything unknown is rejected with the
dotted key path in the message.  Missing keys take their defaults, so ``{}``
is a valid config.  Physical quantities are SI, momenta are in hbar k0.
Complex reflectivities may be given as a number or as ``[re, im]``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace

import numpy as np

from .beam import AveragingSpec
from .emission import EmissionConfig
from .interferometer import BraggConfig, Detector, Scenario
from .params import ExperimentParams
from .states import WavepacketSpec

DEFAULT_DISTANCES = (1e-6, 2e-6, 3e-6, 4e-6, 6e-6, 8e-6, 10e-6, 14e-6, 20e-6)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class FitSettings:
    """``floor_fraction``: a bin counts as populated when its pre-grating
    counts reach this fraction of the peak bin.  ``count_floor``: bins whose
    mean counts fall below this are not fitted (V reported as undefined)."""

    poisson: bool = True
    floor_fraction: float = 0.05
    count_floor: float = 1.0


@dataclass(frozen=True)
class ScanSettings:
    """Distances for scan-distance and the phase list; ``phases_rad`` empty
    means ``n_phases`` equispaced phases over one period."""

    d_means_m: tuple = DEFAULT_DISTANCES
    phases_rad: tuple = ()
    n_phases: int = 12

    def phases(self) -> np.ndarray:
        if self.phases_rad:
            return np.asarray(self.phases_rad, dtype=float)
        return np.linspace(0, 2 * np.pi, self.n_phases, endpoint=False)


@dataclass(frozen=True)
class GridSettings:
    n_points: int = 4096
    p_max: float = 8.0


# section name -> (dataclass, keys that are derived elsewhere and not configurable)
SECTIONS = {
    "params": (ExperimentParams, ()),
    "packet": (WavepacketSpec, ("d",)),
    "emission": (EmissionConfig, ()),
    "bragg": (BraggConfig, ()),
    "detector": (Detector, ("flight_time",)),
    "averaging": (AveragingSpec, ()),
    "grid": (GridSettings, ()),
    "scan": (ScanSettings, ()),
    "fit": (FitSettings, ()),
}
TOP_LEVEL_SCALARS = {"seed": 0}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    scan: ScanSettings
    fit: FitSettings
    seed: int
    document: dict  # fully resolved JSON document (defaults filled in)

    @property
    def config_hash(self) -> str:
        return config_hash(self.document)


def _section_defaults(cls, skip) -> dict:
    out = {}
    for f in fields(cls):
        if f.name in skip:
            continue
        out[f.name] = _to_json(getattr(cls(), f.name))
    return out


def _to_json(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, tuple):
        return [_to_json(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def default_document() -> dict:
    doc = {name: _section_defaults(cls, skip) for name, (cls, skip) in SECTIONS.items()}
    doc.update(TOP_LEVEL_SCALARS)
    return doc


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _coerce(path: str, value, default):
    """Check ``value`` against the type of ``default`` and convert for the dataclass."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not _is_number(value):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, complex):
        if _is_number(value):
            return complex(value)
        if isinstance(value, list) and len(value) == 2 and all(map(_is_number, value)):
            return complex(value[0], value[1])
        raise ConfigError(f"{path}: expected a number or [re, im], got {value!r}")
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(map(_is_number, value)):
            raise ConfigError(f"{path}: expected a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if default is None:
        if value is None:
            return None
        if not _is_number(value):
            raise ConfigError(f"{path}: expected a number or null, got {value!r}")
        return float(value)
    raise ConfigError(f"{path}: unsupported value {value!r}")


def _build_section(name: str, raw: dict):
    cls, skip = SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object")
    defaults = cls()
    allowed = {f.name for f in fields(cls)} - set(skip)
    kwargs = {}
    for key, value in raw.items():
        if key not in allowed:
            raise ConfigError(f"unknown config key '{name}.{key}'")
        kwargs[key] = _coerce(f"{name}.{key}", value, getattr(defaults, key))
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def parse_config(raw: dict, seed: int | None = None) -> ScenarioConfig:
    """Validate a JSON document and assemble the scenario it describes."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in SECTIONS and key not in TOP_LEVEL_SCALARS:
            raise ConfigError(f"unknown config key '{key}'")
    built = {name: _build_section(name, raw.get(name, {})) for name in SECTIONS}
    seed_value = raw.get("seed", 0) if seed is None else seed
    if isinstance(seed_value, bool) or not isinstance(seed_value, int) or seed_value < 0:
        raise ConfigError(f"seed: expected a non-negative integer, got {seed_value!r}")

    params = built["params"]
    grid, scan = built["grid"], built["scan"]
    if any(d < 0 for d in scan.d_means_m):
        raise ConfigError("scan.d_means_m: distances must be non-negative")
    if any(b <= a for a, b in zip(scan.d_means_m, scan.d_means_m[1:])):
        raise ConfigError("scan.d_means_m: distances must be strictly increasing")
    if not scan.d_means_m:
        raise ConfigError("scan.d_means_m: at least one distance is required")
    if scan.n_phases < 1:
        raise ConfigError("scan.n_phases must be positive")

    detector = replace(built["detector"], flight_time=params.t_detector)
    scenario = Scenario(
        params=params,
        packet=replace(built["packet"], d=params.d_mean),
        emission=built["emission"],
        detector=detector,
        averaging=built["averaging"],
        n_points=grid.n_points,
        p_max=grid.p_max,
        bragg=built["bragg"],
        seed=seed_value,
    )
    try:
        g = scenario.grid()
        detector.edges(g)
        scenario.splitter()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    document = {name: _section_json(built[name], SECTIONS[name][1]) for name in SECTIONS}
    document["seed"] = seed_value
    return ScenarioConfig(scenario, scan, built["fit"], seed_value, document)


def _section_json(obj, skip) -> dict:
    return {f.name: _to_json(getattr(obj, f.name)) for f in fields(obj) if f.name not in skip}


def load_config(path: str | None, seed: int | None = None) -> ScenarioConfig:
    if path is None:
        return parse_config({}, seed)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, seed)


def canonical_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


def config_hash(document: dict) -> str:
    return hashlib.sha256(canonical_json(document).encode()).hexdigest()[:16]
