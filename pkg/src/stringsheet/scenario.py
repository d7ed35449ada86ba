"""Scenario files: JSON configuration for the command-line pipelines.

A scenario names a metric model, an initial-data recipe (built-in expression
families per component, or a CSV of samples), a domain, grid and output
settings, and optional threshold overrides.  See the README for the full
schema with defaults and units.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from .config import DEFAULT_THRESHOLDS, Thresholds
from .errors import ConfigError
from .metrics import MetricModel, Minkowski, OriGeneral, OriQuadratic
from .worldsheet import Domain

__all__ = [
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "build_model",
    "build_theta_grid",
    "build_initial_arrays",
    "FAMILIES",
    "PROFILE_REGISTRY",
]


def _family_constant(theta, spec):
    return np.full_like(theta, float(spec.get("value", 0.0)))


def _family_sine(theta, spec):
    amp = float(spec.get("amplitude", 0.0))
    k = float(spec.get("wavenumber", 1.0))
    phase = float(spec.get("phase", 0.0))
    offset = float(spec.get("offset", 0.0))
    return offset + amp * np.sin(k * theta + phase)


def _family_gaussian(theta, spec):
    amp = float(spec.get("amplitude", 0.0))
    center = float(spec.get("center", 0.0))
    width = float(spec.get("width", 1.0))
    offset = float(spec.get("offset", 0.0))
    if width <= 0.0:
        raise ConfigError("gaussian width must be positive")
    return offset + amp * np.exp(-((theta - center) ** 2) / (2.0 * width**2))


def _family_linear(theta, spec):
    slope = float(spec.get("slope", 1.0))
    offset = float(spec.get("offset", 0.0))
    return offset + slope * theta


FAMILIES = {
    "constant": _family_constant,
    "sine": _family_sine,
    "gaussian": _family_gaussian,
    "linear": _family_linear,
}


def _profile_xy(c):
    return dict(
        f=lambda x, y, z: c * x * y,
        f_x=lambda x, y, z: c * y,
        f_y=lambda x, y, z: c * x,
        f_z=lambda x, y, z: np.zeros_like(np.asarray(x, dtype=float)),
    )


def _profile_linear(cx, cy, cz):
    return dict(
        f=lambda x, y, z: cx * x + cy * y + cz * z,
        f_x=lambda x, y, z: np.full_like(np.asarray(x, dtype=float), cx),
        f_y=lambda x, y, z: np.full_like(np.asarray(x, dtype=float), cy),
        f_z=lambda x, y, z: np.full_like(np.asarray(x, dtype=float), cz),
    )


# built-in harmonic wave profiles selectable from scenario files
PROFILE_REGISTRY = {
    "xy": (_profile_xy, ("c",)),
    "linear": (_profile_linear, ("cx", "cy", "cz")),
}


@dataclass
class Scenario:
    metric: dict
    domain: dict
    grid: dict
    initial_data: dict
    output: dict = field(default_factory=dict)
    thresholds: Thresholds = DEFAULT_THRESHOLDS
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict)

    @property
    def step(self) -> float:
        return float(self.grid["h"])

    @property
    def t_max(self) -> float:
        return float(self.grid["t_max"])

    @property
    def out_dir(self) -> Path:
        # outputs land relative to the working directory, inputs relative to
        # the scenario file
        return Path(self.output.get("directory", "out"))

    @property
    def snapshot_stride(self) -> int:
        return int(self.output.get("snapshot_stride", 16))


def scenario_from_dict(cfg: dict, base_dir: Path = Path(".")) -> Scenario:
    for key in ("metric", "domain", "grid", "initial_data"):
        if key not in cfg:
            raise ConfigError(f"scenario is missing required section {key!r}")
    grid = dict(cfg["grid"])
    if "h" not in grid:
        raise ConfigError("grid section requires a step 'h'")
    if "t_max" not in grid:
        raise ConfigError("grid section requires 't_max'")
    if float(grid["h"]) <= 0.0 or float(grid["t_max"]) <= 0.0:
        raise ConfigError("grid values must be positive")
    thresholds = DEFAULT_THRESHOLDS
    overrides = cfg.get("thresholds", {})
    if overrides:
        known = {k for k in Thresholds.__dataclass_fields__}
        bad = set(overrides) - known
        if bad:
            raise ConfigError(f"unknown threshold keys: {sorted(bad)}")
        thresholds = thresholds.with_overrides(**{k: float(v) for k, v in overrides.items()})
    return Scenario(
        metric=dict(cfg["metric"]),
        domain=dict(cfg["domain"]),
        grid=grid,
        initial_data=dict(cfg["initial_data"]),
        output=dict(cfg.get("output", {})),
        thresholds=thresholds,
        base_dir=base_dir,
        raw=cfg,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("scenario file must contain a JSON object")
    return scenario_from_dict(cfg, base_dir=path.parent)


def build_model(scenario: Scenario) -> MetricModel:
    spec = scenario.metric
    tag = spec.get("model")
    if tag == "minkowski":
        return Minkowski(int(spec.get("spatial_dim", 3)))
    if tag == "ori_quadratic":
        if "a" not in spec:
            raise ConfigError("ori_quadratic requires parameter 'a'")
        return OriQuadratic(float(spec["a"]))
    if tag == "ori_general":
        name = spec.get("profile")
        if name not in PROFILE_REGISTRY:
            raise ConfigError(
                f"unknown wave profile {name!r}; choose from {sorted(PROFILE_REGISTRY)}"
            )
        builder, params = PROFILE_REGISTRY[name]
        args = [float(spec.get(p, 0.0)) for p in params]
        model = OriGeneral(**builder(*args), name=f"ori_general({name})")
        # harmonicity is a precondition of the family: spot-check on a probe
        # grid at scenario start, reject on violation
        probe = np.stack(
            np.meshgrid(*([np.linspace(-2.0, 2.0, 5)] * 4), indexing="ij"), axis=-1
        ).reshape(-1, 4)
        if model.harmonic_residual(probe) > 1e-8:
            raise ConfigError(f"wave profile {name!r} is not harmonic in (x, y)")
        return model
    raise ConfigError(f"unknown metric model {tag!r}")


def build_domain(scenario: Scenario) -> Domain:
    spec = scenario.domain
    kind = spec.get("kind")
    if kind == "periodic":
        return Domain.closed(float(spec.get("length", 2.0 * math.pi)))
    if kind == "line":
        window = spec.get("window")
        if (
            not isinstance(window, (list, tuple))
            or len(window) != 2
            or float(window[0]) >= float(window[1])
        ):
            raise ConfigError("line domain requires 'window': [lo, hi] with lo < hi")
        return Domain.line()
    raise ConfigError(f"unknown domain kind {kind!r}")


def build_theta_grid(scenario: Scenario) -> np.ndarray:
    spec = scenario.domain
    h = scenario.step
    if spec.get("kind") == "periodic":
        length = float(spec.get("length", 2.0 * math.pi))
        start = float(spec.get("start", 0.0))
        n = max(8, int(round(length / h)))
        return start + (length / n) * np.arange(n)
    lo, hi = map(float, spec["window"])
    n = int(np.floor((hi - lo) / h + 1e-9)) + 1
    return lo + h * np.arange(n)


def _arrays_from_families(theta: np.ndarray, spec_list, dim: int, label: str) -> np.ndarray:
    if not isinstance(spec_list, list) or len(spec_list) != dim:
        raise ConfigError(f"{label} must list {dim} component families")
    cols = []
    for k, spec in enumerate(spec_list):
        fam = spec.get("family")
        if fam not in FAMILIES:
            raise ConfigError(
                f"{label}[{k}]: unknown family {fam!r}; choose from {sorted(FAMILIES)}"
            )
        cols.append(FAMILIES[fam](theta, spec))
    return np.stack(cols, axis=1)


def _arrays_from_csv(path: Path, theta: np.ndarray, dim: int):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read samples file {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"samples file {path} is empty")
    header = rows[0]
    expected = (
        ["theta"]
        + [f"phi{c}" for c in range(dim)]
        + [f"psi{c}" for c in range(dim)]
    )
    if header != expected:
        raise ConfigError(
            f"samples file must have columns {expected}, got {header}"
        )
    body = np.array([[float(v) for v in row] for row in rows[1:]])
    if body.shape[0] != len(theta):
        raise ConfigError(
            f"samples file has {body.shape[0]} rows, grid has {len(theta)} nodes"
        )
    if np.max(np.abs(body[:, 0] - theta)) > 1e-9 * max(1.0, float(np.max(np.abs(theta)))):
        raise ConfigError("samples file theta column does not match the scenario grid")
    return body[:, 1 : dim + 1], body[:, dim + 1 :]


def build_initial_arrays(scenario: Scenario, theta: np.ndarray, dim: int):
    spec = scenario.initial_data
    if "csv" in spec:
        return _arrays_from_csv(scenario.base_dir / spec["csv"], theta, dim)
    if "phi" not in spec or "psi" not in spec:
        raise ConfigError("initial_data requires 'phi' and 'psi' family lists (or 'csv')")
    phi = _arrays_from_families(theta, spec["phi"], dim, "phi")
    psi = _arrays_from_families(theta, spec["psi"], dim, "psi")
    return phi, psi
