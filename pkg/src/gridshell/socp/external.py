"""Adapter routing a ConicProgram to an external conic solver.

Backend selection, in order of precedence: the explicit ``backend`` argument,
the ``GRIDSHELL_SOLVER_BACKEND`` environment variable, then ``embedded``.
Accepted values are ``embedded`` and ``external:clarabel``.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from . import ipm
from .cones import ROT
from .program import (DUAL_INFEASIBLE, MAX_ITER, OPTIMAL, PRIMAL_INFEASIBLE,
                      ConicProgram, ConicSolution, NumericalError)

ENV_VAR = "GRIDSHELL_SOLVER_BACKEND"
EXTERNAL = ("clarabel",)


class BackendUnavailable(RuntimeError):
    pass


def resolve_backend(backend: str | None = None) -> str:
    name = backend or os.environ.get(ENV_VAR) or "embedded"
    if name == "embedded":
        return name
    if name.startswith("external:") and name.split(":", 1)[1] in EXTERNAL:
        return name
    raise BackendUnavailable(f"unknown solver backend {name!r}")


def solve_with(program: ConicProgram, backend: str | None = None, tol: float = 1e-8,
               max_iter: int = 100) -> ConicSolution:
    name = resolve_backend(backend)
    if name == "embedded":
        return ipm.solve(program, tol=tol, max_iter=max_iter)
    return adapter_solve(program, tol=tol, max_iter=max_iter)


def adapter_solve(program: ConicProgram, tol: float = 1e-8, max_iter: int = 200) -> ConicSolution:
    """Solve with Clarabel, mapping its duals onto ``c - A'y - z = 0``."""
    try:
        import clarabel
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise BackendUnavailable("clarabel is not installed") from exc

    n, m = program.n, program.m
    orth, rot = program.orthant, program.rotated
    k = rot.shape[0]
    no = orth.size
    blocks = [program.A]
    if no:
        blocks.append(-sp.csc_matrix((np.ones(no), (np.arange(no), orth)), shape=(no, n)))
    if k:
        r, c, v = [], [], []
        for a in range(3):
            for b in range(3):
                if ROT[a, b] != 0.0:
                    r.append(3 * np.arange(k) + a)
                    c.append(rot[:, b])
                    v.append(np.full(k, -ROT[a, b]))
        blocks.append(sp.csc_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                                    shape=(3 * k, n)))
    G = sp.vstack(blocks, format="csc")
    h = np.concatenate([program.b, np.zeros(no + 3 * k)])
    cones = []
    if m:
        cones.append(clarabel.ZeroConeT(m))
    if no:
        cones.append(clarabel.NonnegativeConeT(no))
    cones += [clarabel.SecondOrderConeT(3) for _ in range(k)]

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_feas = tol
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_infeas_abs = tol
    settings.tol_infeas_rel = tol
    P = sp.csc_matrix((n, n))
    solver = clarabel.DefaultSolver(P, program.c, G, h, cones, settings)
    res = solver.solve()

    status_map = {
        "Solved": OPTIMAL, "AlmostSolved": OPTIMAL,
        "PrimalInfeasible": PRIMAL_INFEASIBLE, "AlmostPrimalInfeasible": PRIMAL_INFEASIBLE,
        "DualInfeasible": DUAL_INFEASIBLE, "AlmostDualInfeasible": DUAL_INFEASIBLE,
        "MaxIterations": MAX_ITER, "MaxTime": MAX_ITER,
    }
    status = status_map.get(str(res.status).split(".")[-1])
    if status is None:
        raise NumericalError(f"external solver failed: {res.status}")

    x = np.asarray(res.x)
    zz = np.asarray(res.z)
    y = -zz[:m]
    z = np.zeros(n)
    z[orth] = zz[m:m + no]
    if k:
        zs = zz[m + no:].reshape(k, 3)
        z[rot] = zs @ ROT.T
    ray = None
    if status == PRIMAL_INFEASIBLE:
        scale = float(program.b @ y)
        ray = {"y": y / scale, "z": z / scale,
               "residual": float(np.linalg.norm(program.A.T @ y + z) / scale)}
    elif status == DUAL_INFEASIBLE:
        scale = -float(program.c @ x)
        ray = {"x": x / scale, "residual": float(np.linalg.norm(program.A @ x) / scale)}

    pres = np.linalg.norm(program.A @ x - program.b) / (1.0 + np.linalg.norm(program.b))
    dres = np.linalg.norm(program.c - program.A.T @ y - z) / (1.0 + np.linalg.norm(program.c))
    pobj = program.objective(x)
    dobj = float(program.b @ y) + program.offset
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    return ConicSolution(status=status, x=x, y=y, z=z, primal_objective=pobj,
                         dual_objective=dobj,
                         residuals={"primal": pres, "dual": dres, "gap": gap},
                         iterations=int(res.iterations), ray=ray,
                         backend="external:clarabel")
