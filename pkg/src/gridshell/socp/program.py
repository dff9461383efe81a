"""Conic program container and its plain-text dump format."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal_infeasible"
DUAL_INFEASIBLE = "dual_infeasible"
MAX_ITER = "max_iter"


class ConicError(ValueError):
    """Malformed conic program."""


class NumericalError(RuntimeError):
    """The KKT system could not be factorized or produced non-finite values."""


@dataclass
class ConicProgram:
    """minimize c'x  s.t.  A x = b,  x[orthant] >= 0,  x[rotated] in Kr.

    ``rotated`` is a (k, 3) integer array; each row ``(i, j, l)`` constrains
    ``2 x_i x_j >= x_l**2`` with ``x_i, x_j >= 0``.  Variables listed in neither
    ``orthant`` nor ``rotated`` are free.
    """

    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    orthant: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    rotated: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=int))
    offset: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.A = sp.csc_matrix(self.A, dtype=float)
        self.orthant = np.asarray(self.orthant, dtype=np.int64).ravel()
        self.rotated = np.asarray(self.rotated, dtype=np.int64).reshape(-1, 3)
        n = self.c.size
        if self.A.shape != (self.b.size, n):
            raise ConicError(
                f"A has shape {self.A.shape}, expected ({self.b.size}, {n})")
        tagged = np.concatenate([self.orthant, self.rotated.ravel()])
        if tagged.size and (tagged.min() < 0 or tagged.max() >= n):
            raise ConicError("cone index out of range")
        if np.unique(tagged).size != tagged.size:
            raise ConicError("a variable belongs to more than one cone")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.A.data))):
            raise ConicError("non-finite program data")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.orthant] = False
        mask[self.rotated.ravel()] = False
        return np.flatnonzero(mask)

    def scaled(self, factor: float) -> "ConicProgram":
        return ConicProgram(self.c * factor, self.A, self.b, self.orthant,
                            self.rotated, self.offset * factor)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.offset

    def cone_violation(self, x: np.ndarray) -> float:
        """Largest violation of the cone constraints at ``x`` (0 if inside)."""
        worst = 0.0
        if self.orthant.size:
            worst = max(worst, float(np.max(-x[self.orthant], initial=0.0)))
        if self.rotated.size:
            t = x[self.rotated]
            worst = max(worst, float(np.max(-t[:, :2], initial=0.0)))
            gap = 2.0 * t[:, 0] * t[:, 1] - t[:, 2] ** 2
            scale = np.maximum(1.0, np.abs(t).max(axis=1))
            worst = max(worst, float(np.max(-gap / scale, initial=0.0)))
        return worst


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    primal_objective: float
    dual_objective: float
    residuals: dict
    iterations: int
    ray: dict | None = None
    backend: str = "embedded"

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def dump_program(program: ConicProgram, path) -> None:
    """Write ``program`` in a line-oriented text format.

    Layout::

        conic-program 1
        n <n> m <m> offset <offset>
        c <n floats>
        b <m floats>
        orthant <count> <indices...>
        rotated <count> <3*count indices...>
        A <nnz>
        <row> <col> <value>      (one line per nonzero)
    """
    A = program.A.tocoo()
    lines = [
        "conic-program 1",
        f"n {program.n} m {program.m} offset {program.offset!r}",
        "c " + " ".join(repr(float(v)) for v in program.c),
        "b " + " ".join(repr(float(v)) for v in program.b),
        f"orthant {program.orthant.size} " + " ".join(map(str, program.orthant)),
        f"rotated {program.rotated.shape[0]} "
        + " ".join(map(str, program.rotated.ravel())),
        f"A {A.nnz}",
    ]
    lines += [f"{r} {c} {v!r}" for r, c, v in zip(A.row, A.col, A.data.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_program(path) -> ConicProgram:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split() != ["conic-program", "1"]:
        raise ConicError("not a conic-program file")
    head = lines[1].split()
    n, m, offset = int(head[1]), int(head[3]), float(head[5])

    def floats(line, key):
        parts = line.split()
        if parts[0] != key:
            raise ConicError(f"expected '{key}' line")
        return np.array([float(v) for v in parts[1:]])

    c = floats(lines[2], "c")
    b = floats(lines[3], "b")
    orth = [int(v) for v in lines[4].split()[2:]]
    rot = [int(v) for v in lines[5].split()[2:]]
    nnz = int(lines[6].split()[1])
    trip = np.array([ln.split() for ln in lines[7:7 + nnz]], dtype=float).reshape(-1, 3)
    A = sp.csc_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))),
                      shape=(m, n))
    return ConicProgram(c, A, b, np.array(orth, dtype=int),
                        np.array(rot, dtype=int).reshape(-1, 3), offset)
