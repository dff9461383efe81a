"""Volume against unit weight: one independent solve per rho_g value."""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import solve_problem
from .geometry import GeometryError, ProblemSpec, generate_ground_structure, restrict_topology
from .reconstruct import elevations
from .socp import NumericalError

SWEEP_COLUMNS = ("rho_g", "volume", "max_z", "weight", "status", "iterations")


def parse_rho_list(text):
    """``start:stop:step`` (stop included when hit) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range {text!r} must be start:stop:step")
        start, stop, step = map(float, parts)
        if step <= 0.0 or stop < start:
            raise ValueError(f"empty range {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ValueError("empty rho_g list")
    return values


@dataclass
class SweepRow:
    rho_g: float
    volume: float
    max_z: float
    status: str
    iterations: int
    wall_time: float = 0.0

    @property
    def weight(self):
        return self.rho_g * self.volume


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def volumes(self):
        return np.array([r.volume for r in self.rows])

    def write_csv(self, fh):
        """Deterministic table; wall time is left out so reruns match byte for byte."""
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            wr.writerow([repr(r.rho_g), f"{r.volume:.10g}", f"{r.max_z:.10g}",
                         f"{r.weight:.10g}", r.status, r.iterations])


def _one(spec: ProblemSpec, rho_g, topology, keep, backend):
    t0 = time.perf_counter()
    s = spec.with_rho_g(rho_g)
    try:
        connectivity = "explicit" if s.elements is not None else "full"
        gs = generate_ground_structure(s, connectivity)
        if topology != "full":
            gs = restrict_topology(gs, topology, keep)
        res = solve_problem(s, gs, backend=backend)
    except NumericalError:
        return SweepRow(rho_g, float("nan"), float("nan"), "numerical_error", 0,
                        time.perf_counter() - t0)
    except GeometryError:
        return SweepRow(rho_g, float("nan"), float("nan"), "empty_ground_structure", 0,
                        time.perf_counter() - t0)
    if res.optimal:
        z = elevations(res.dual["w"], rho_g, s.sigma)
        vol, zmax = res.volume, float(np.nanmax(z))
    else:
        vol = zmax = float("nan")
    return SweepRow(rho_g, vol, zmax, res.status, res.solution.iterations,
                    time.perf_counter() - t0)


def run_sweep(spec: ProblemSpec, rho_values, topology="full", keep=None, backend=None,
              workers=None):
    """Solve at every ``rho_g``; failures become rows, the sweep carries on."""
    values = sorted(float(v) for v in rho_values)
    if not values:
        raise ValueError("rho_g list is empty")
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_one, [spec] * len(values), values, [topology] * len(values),
                                 [keep] * len(values), [backend] * len(values)))
    else:
        rows = [_one(spec, v, topology, keep, backend) for v in values]
    return SweepResult(rows)
