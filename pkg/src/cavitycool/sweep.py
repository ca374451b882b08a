"""Grid sweeps of the cooling protocol over coupling and electron spacing."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import SimulationError
from .protocol import ProtocolConfig, run_cooling, stable_metrics


@dataclass(frozen=True)
class SweepConfig:
    g_values: tuple[float, ...]
    dt_values: tuple[float, ...]
    base: ProtocolConfig = field(default_factory=ProtocolConfig)
    worker_count: int = 1

    def __post_init__(self):
        g = tuple(float(x) for x in self.g_values)
        dt = tuple(float(x) for x in self.dt_values)
        if not g or not dt:
            raise ValueError("sweep grids must be non-empty")
        if any(x <= 0 for x in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("g_values must be positive and strictly ascending")
        if any(x < 0 for x in dt) or any(b <= a for a, b in zip(dt, dt[1:])):
            raise ValueError("dt_values must be non-negative and strictly ascending")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        object.__setattr__(self, "g_values", g)
        object.__setattr__(self, "dt_values", dt)

    def cell_configs(self) -> list[ProtocolConfig]:
        """Per-cell configs in row-major order (dt outer, g inner)."""
        return [replace(self.base, g=complex(g), delta_t_kappa=dt)
                for dt in self.dt_values for g in self.g_values]

    def to_dict(self) -> dict:
        return {"g_values": list(self.g_values), "dt_values": list(self.dt_values),
                "base": self.base.to_dict(), "worker_count": self.worker_count}

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        return cls(tuple(data["g_values"]), tuple(data["dt_values"]),
                   ProtocolConfig.from_dict(data["base"]), data.get("worker_count", 1))


def default_sweep_config(worker_count: int = 1) -> SweepConfig:
    """17 log-spaced couplings in [0.05, 1] by 13 log-spaced spacings in [0.01, 0.4]."""
    base = ProtocolConfig(nbar_initial=1.0, dim=128, max_ocb=200)
    return SweepConfig(tuple(np.geomspace(0.05, 1.0, 17)), tuple(np.geomspace(0.01, 0.4, 13)),
                       base, worker_count)


@dataclass(frozen=True)
class SweepCell:
    g: float
    dt_kappa: float
    cooling_ratio: float
    prob_final: float
    reached: bool
    ocb_at_stability: int
    error: str | None = None


CSV_FIELDS = ("g", "dt_kappa", "cooling_ratio", "prob_final", "reached", "ocb_at_stability")


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_cells_csv(cells, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for c in cells:
            writer.writerow([_fmt(getattr(c, k)) for k in CSV_FIELDS])


@dataclass
class SweepResult:
    config: SweepConfig
    cells: list[SweepCell]

    def grid(self, name: str) -> np.ndarray:
        """Field ``name`` as an array of shape (len(dt_values), len(g_values))."""
        vals = np.array([getattr(c, name) for c in self.cells], dtype=float)
        return vals.reshape(len(self.config.dt_values), len(self.config.g_values))

    def success_fraction(self) -> float:
        return sum(c.error is None for c in self.cells) / len(self.cells)

    def to_csv(self, path) -> None:
        write_cells_csv(self.cells, path)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"config": self.config.to_dict(),
                       "cells": [asdict(c) for c in self.cells]}, fh, indent=1, allow_nan=True)

    @classmethod
    def from_json(cls, path) -> "SweepResult":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(SweepConfig.from_dict(doc["config"]), [SweepCell(**c) for c in doc["cells"]])


def run_cell(config: ProtocolConfig) -> SweepCell:
    """One sweep cell; simulation failures are recorded instead of raised."""
    g, dt = abs(config.g), config.delta_t_kappa
    try:
        trace = run_cooling(config)
    except (SimulationError, ValueError) as exc:
        return SweepCell(g, dt, math.nan, math.nan, False, 0, f"{type(exc).__name__}: {exc}")
    m = stable_metrics(trace, config.stability_rel_tol)
    ratio = m.nbar_final / config.nbar_initial if config.nbar_initial > 0 else math.nan
    return SweepCell(g, dt, ratio, m.prob_final, m.reached, m.ocb_at_stability)


def run_sweep(config: SweepConfig) -> SweepResult:
    """Run every (g, dt) cell; output order and values do not depend on ``worker_count``."""
    cells = config.cell_configs()
    if config.worker_count == 1:
        results = [run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=config.worker_count) as pool:
            results = list(pool.map(run_cell, cells))
    return SweepResult(config, results)


def slice(result: SweepResult, axis: str, value: float, tol: float = 1e-12) -> list[SweepCell]:
    """Row (``axis="dt"``) or column (``axis="g"``) of the grid at an exact grid value."""
    if axis == "dt":
        grid, key = result.config.dt_values, "dt_kappa"
    elif axis == "g":
        grid, key = result.config.g_values, "g"
    else:
        raise ValueError(f"axis must be 'g' or 'dt', got {axis!r}")
    hits = [x for x in grid if abs(x - value) <= tol]
    if not hits:
        listing = ", ".join(f"{x:.17g}" for x in grid)
        raise ValueError(f"{axis}={value!r} is not on the grid; available values: {listing}")
    target = hits[0]
    return [c for c in result.cells if getattr(c, key) == target]
