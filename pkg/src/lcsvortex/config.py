"""Pipeline configuration: plain-text key=value files plus overrides.

The file format is one ``key = value`` statement per line with ``#``
comments. Unknown keys are rejected. The same keys are accepted as
``--set key=value`` command-line overrides, which take precedence over the
file. See README for the documented schema.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .validation import check_domain, check_lambda_grid, check_positive, check_resolution

OUTPUT_DIR_ENV = "LCSVORTEX_OUTPUT_DIR"

_VELOCITY_KINDS = ("double_gyre", "multi_vortex", "gridded")
_SIGNS = {"both": (1, -1), "plus": (1,), "minus": (-1,)}


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the five-stage census pipeline."""

    velocity: str = "double_gyre"
    double_gyre_a: float = 0.2
    double_gyre_epsilon: float = 0.2
    double_gyre_omega: float = 0.6283185307179586
    gridded_header: str | None = None

    t0: float = 0.0
    T: float = 1.0
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    resolution: tuple = (400, 400)
    rho: float = 0.1

    integrator: str = "rk45"
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    rk4_step: float | None = None

    min_separation_factor: float = 2.0
    max_pair_distance: float = 2.0
    section_length: float = 1.5
    section_seeds: int = 100
    lambda_min: float = 0.85
    lambda_max: float = 1.15
    lambda_step: float = 0.01
    signs: str = "both"
    orbit_step: float | None = None
    max_arclength: float | None = None
    stretch_tolerance: float = 0.02

    output_dir: str = "out"
    checkpoint_dir: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.velocity not in _VELOCITY_KINDS:
            raise ConfigError(f"velocity must be one of {_VELOCITY_KINDS}, got {self.velocity!r}")
        if self.velocity == "gridded" and not self.gridded_header:
            raise ConfigError("velocity=gridded requires gridded_header")
        if self.signs not in _SIGNS:
            raise ConfigError(f"signs must be one of {tuple(_SIGNS)}, got {self.signs!r}")
        if self.integrator not in ("rk45", "rk4"):
            raise ConfigError(f"integrator must be rk45 or rk4, got {self.integrator!r}")
        try:
            check_domain(self.domain)
            check_resolution(self.resolution)
            check_positive(self.rho, "rho")
            check_positive(self.abs_tol, "abs_tol")
            check_positive(self.rel_tol, "rel_tol")
            check_positive(self.section_length, "section_length")
            check_lambda_grid(self.lambda_min, self.lambda_max, self.lambda_step)
            check_positive(self.min_separation_factor, "min_separation_factor")
            check_positive(self.max_pair_distance, "max_pair_distance")
            check_positive(self.stretch_tolerance, "stretch_tolerance")
        except ValueError as err:
            raise ConfigError(str(err)) from err
        if self.section_seeds < 2:
            raise ConfigError(f"section_seeds must be >= 2, got {self.section_seeds}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    @property
    def sign_tuple(self):
        return _SIGNS[self.signs]

    @property
    def checkpoint_path(self) -> Path:
        base = self.checkpoint_dir or str(Path(self.output_dir) / "checkpoints")
        return Path(base)


_FLOAT_KEYS = {
    "double_gyre.A", "double_gyre.epsilon", "double_gyre.omega", "t0", "T",
    "rho", "abs_tol", "rel_tol", "rk4_step", "min_separation_factor",
    "max_pair_distance", "section_length", "lambda_min", "lambda_max",
    "lambda_step", "orbit_step", "max_arclength", "stretch_tolerance",
}
_INT_KEYS = {"section_seeds", "threads"}
_STR_KEYS = {"velocity", "gridded.header", "integrator", "signs", "output_dir",
             "checkpoint_dir"}
_TUPLE_KEYS = {"domain": 4, "resolution": 2}

_KEY_TO_FIELD = {
    "double_gyre.A": "double_gyre_a",
    "double_gyre.epsilon": "double_gyre_epsilon",
    "double_gyre.omega": "double_gyre_omega",
    "gridded.header": "gridded_header",
}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _FLOAT_KEYS:
        if raw.lower() in ("none", ""):
            return None
        try:
            return float(raw)
        except ValueError as err:
            raise ConfigError(f"key '{key}': expected a number, got {raw!r}") from err
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError as err:
            raise ConfigError(f"key '{key}': expected an integer, got {raw!r}") from err
    if key in _TUPLE_KEYS:
        parts = [p for p in raw.replace(",", " ").split() if p]
        if len(parts) != _TUPLE_KEYS[key]:
            raise ConfigError(f"key '{key}': expected {_TUPLE_KEYS[key]} values, got {raw!r}")
        return tuple(float(p) for p in parts)
    if key in _STR_KEYS:
        return raw
    raise ConfigError(f"unknown configuration key '{key}'")


def parse_assignments(lines, source="<config>") -> dict:
    out = {}
    for lineno, line in enumerate(lines, 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        out[_KEY_TO_FIELD.get(key, key)] = _coerce(key, raw)
    return out


def load_config(path=None, overrides=()) -> PipelineConfig:
    """Build a PipelineConfig from an optional file plus key=value overrides.

    The LCSVORTEX_OUTPUT_DIR environment variable, when set, supersedes the
    configured output directory.
    """
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_assignments(path.read_text().splitlines(), str(path)))
    values.update(parse_assignments(list(overrides), "--set"))
    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        values["output_dir"] = env_out
    try:
        cfg = PipelineConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from err
    if cfg.velocity == "gridded" and not Path(cfg.gridded_header).is_file():
        raise ConfigError(f"gridded velocity header not found: {cfg.gridded_header}")
    return cfg


def canonical_text(cfg: PipelineConfig) -> str:
    """Stable textual form of a config, used to fingerprint checkpoints."""
    items = []
    for f in fields(cfg):
        if f.name in ("output_dir", "checkpoint_dir", "threads"):
            continue  # execution details do not affect results
        items.append(f"{f.name}={getattr(cfg, f.name)!r}")
    return "\n".join(items) + "\n"
