"""Experiment configuration, JSON config files and the packaged tolerance table."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import ContractError
from .limit_laws import RegimeSpec

SUITES = ("moments", "stationarity", "couplings", "asymptotics", "profile")
FORMATS = ("csv", "json")
DEFAULT_SEED = 20240917
DEFAULT_SAMPLES = 100_000
DEFAULT_THETAS = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)
DEFAULT_LADDERS = {
    "large": (512, 2048, 8192),
    "critical": (10_000, 100_000, 1_000_000),
    "small": (10_000, 100_000, 1_000_000),
}


def load_tolerances() -> dict[str, float]:
    """label -> tolerance from the packaged table (provenance fields are dropped)."""
    raw = json.loads(resources.files(__package__).joinpath("tolerances.json").read_text())
    return {label: float(entry["value"]) for label, entry in raw["tolerances"].items()}


def load_goldens() -> dict:
    return json.loads(resources.files(__package__).joinpath("goldens.json").read_text())


@dataclass(frozen=True)
class ThetaGrid:
    """Either explicit ``values`` or ``steps`` evenly spaced points on [lo, hi]."""

    lo: float = -2.0
    hi: float = 2.0
    steps: int = 9
    values: tuple[float, ...] | None = DEFAULT_THETAS

    def __post_init__(self):
        pts = self.points()
        if len(pts) == 0:
            raise ContractError("theta grid is empty")
        if any(not math.isfinite(x) for x in pts) or any(b <= a for a, b in zip(pts, pts[1:])):
            raise ContractError(f"theta grid must be finite and strictly increasing, got {pts}")

    def points(self) -> tuple[float, ...]:
        if self.values is not None:
            return tuple(float(x) for x in self.values)
        if self.steps < 1:
            return ()
        if self.steps == 1:
            return (float(self.lo),)
        return tuple(float(x) for x in np.linspace(self.lo, self.hi, self.steps))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on.  Two runs with equal configs produce identical reports."""

    suites: tuple[str, ...] = SUITES
    n_ladder: tuple[int, ...] | None = None  # None: per-regime defaults
    k: int | None = None
    regime: RegimeSpec = field(default_factory=lambda: RegimeSpec("large"))
    theta_grid: ThetaGrid = field(default_factory=ThetaGrid)
    seed: int = DEFAULT_SEED
    samples: int = DEFAULT_SAMPLES
    tolerances: dict[str, float] = field(default_factory=load_tolerances)
    output: str | None = None
    format: str = "csv"
    workers: int = 1
    # the profile subcommand runs cfg.regime only; verify runs every regime
    all_regimes: bool = True

    def __post_init__(self):
        unknown = set(self.suites) - set(SUITES)
        if unknown:
            raise ContractError(f"unknown suites {sorted(unknown)}; choose from {SUITES}")
        if self.n_ladder is not None:
            if not self.n_ladder or any(b <= a for a, b in zip(self.n_ladder, self.n_ladder[1:])):
                raise ContractError(f"n_ladder must be non-empty and strictly increasing, got {self.n_ladder}")
        for label, tol in self.tolerances.items():
            if not (isinstance(tol, (int, float)) and math.isfinite(tol) and tol > 0):
                raise ContractError(f"tolerance for {label!r} must be a positive number, got {tol}")
        if not 0 <= self.seed < 2**64:
            raise ContractError(f"seed must be a 64-bit unsigned value, got {self.seed}")
        if self.samples < 1:
            raise ContractError(f"samples must be >= 1, got {self.samples}")
        if self.format not in FORMATS:
            raise ContractError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.workers < 1:
            raise ContractError(f"workers must be >= 1, got {self.workers}")

    def tol(self, label: str) -> float:
        try:
            return self.tolerances[label]
        except KeyError:
            raise ContractError(f"no tolerance configured for {label!r}") from None

    def ladder(self, kind: str) -> tuple[int, ...]:
        return self.n_ladder if self.n_ladder is not None else DEFAULT_LADDERS[kind]

    def to_dict(self) -> dict:
        """Plain JSON-ready view; ``workers`` is omitted because it cannot change results."""
        grid = self.theta_grid
        return {
            "suites": list(self.suites),
            "n_ladder": None if self.n_ladder is None else list(self.n_ladder),
            "k": self.k,
            "regime": {"kind": self.regime.kind, "alpha": self.regime.alpha, "time_form": self.regime.time_form},
            "theta_grid": {"min": grid.lo, "max": grid.hi, "steps": grid.steps,
                           "values": None if grid.values is None else list(grid.values)},
            "seed": self.seed,
            "samples": self.samples,
            "tolerances": dict(sorted(self.tolerances.items())),
            "format": self.format,
            "all_regimes": self.all_regimes,
        }


def _regime_from(d: dict, base: RegimeSpec) -> RegimeSpec:
    kind = d.get("kind", base.kind)
    alpha = d.get("alpha", base.alpha if kind == base.kind else None)
    form = d.get("time_form", base.time_form if kind == base.kind else None)
    if kind != "critical":
        alpha = None
    return RegimeSpec(kind, alpha, form)


def _grid_from(d: dict, base: ThetaGrid) -> ThetaGrid:
    explicit = "values" in d
    lo, hi, steps = d.get("min", base.lo), d.get("max", base.hi), d.get("steps", base.steps)
    ranged = any(key in d for key in ("min", "max", "steps"))
    values = d.get("values") if explicit else (None if ranged else base.values)
    return ThetaGrid(float(lo), float(hi), int(steps), None if values is None else tuple(values))


def config_from_dict(d: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay the keys present in ``d`` onto ``base``."""
    base = base or ExperimentConfig()
    known = {"suites", "n_ladder", "k", "regime", "theta_grid", "seed", "samples", "tolerances",
             "output", "format", "workers", "all_regimes"}
    extra = set(d) - known
    if extra:
        raise ContractError(f"unknown config keys {sorted(extra)}")
    changes = {}
    if "suites" in d:
        changes["suites"] = tuple(d["suites"])
    if "n_ladder" in d:
        changes["n_ladder"] = None if d["n_ladder"] is None else tuple(int(n) for n in d["n_ladder"])
    if "regime" in d:
        changes["regime"] = _regime_from(d["regime"], base.regime)
    if "theta_grid" in d:
        changes["theta_grid"] = _grid_from(d["theta_grid"], base.theta_grid)
    if "tolerances" in d:
        changes["tolerances"] = {**base.tolerances, **d["tolerances"]}
    for key in ("k", "seed", "samples", "output", "format", "workers", "all_regimes"):
        if key in d:
            changes[key] = d[key]
    return replace(base, **changes)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ContractError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ContractError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ContractError(f"config {path} must hold a JSON object")
    return config_from_dict(data)
