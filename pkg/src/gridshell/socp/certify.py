"""Infeasibility certificates for programs the main solve could not settle.

A point ``y`` with ``b'y = 1`` and ``z = -A'y`` in the (self-dual) cone proves
that ``A x = b, x in K`` has no solution.  Searching for one is itself a conic
program, solved here with whichever backend is in use.
"""

import numpy as np
import scipy.sparse as sp

from .cones import ROT
from .program import ConicProgram


def _tagged(program: ConicProgram):
    mask = np.zeros(program.n, dtype=bool)
    mask[program.orthant] = True
    mask[program.rotated.ravel()] = True
    return np.flatnonzero(mask)


def farkas_program(program: ConicProgram) -> ConicProgram:
    """Variables ``(y, z_K)``: ``A'y + z = 0`` (zero on free columns), ``b'y = 1``."""
    m = program.m
    cone = _tagged(program)
    where = np.full(program.n, -1)
    where[cone] = np.arange(cone.size)
    At = program.A.T.tocsc()
    Z = sp.csc_matrix((np.ones(cone.size), (cone, np.arange(cone.size))),
                      shape=(program.n, cone.size))
    A = sp.vstack([sp.hstack([At, Z]), sp.hstack([sp.csc_matrix(program.b.reshape(1, -1)),
                                                  sp.csc_matrix((1, cone.size))])], format="csc")
    b = np.zeros(program.n + 1)
    b[-1] = 1.0
    return ConicProgram(np.zeros(m + cone.size), A, b, orthant=m + where[program.orthant],
                        rotated=m + where[program.rotated])


def project(program: ConicProgram, v):
    """Euclidean projection of ``v`` onto the cone (free columns go to zero)."""
    out = np.zeros_like(v)
    out[program.orthant] = np.maximum(v[program.orthant], 0.0)
    rot = program.rotated
    if rot.size:
        u = v[rot] @ ROT.T                     # rotated cone -> Lorentz cone
        t, w = u[:, 0], u[:, 1:]
        nw = np.linalg.norm(w, axis=1)
        p = np.zeros_like(u)
        inside = nw <= t
        p[inside] = u[inside]
        mid = ~inside & (nw > -t)
        a = 0.5 * (t[mid] + nw[mid])
        p[mid, 0] = a
        p[mid, 1:] = w[mid] * (a / nw[mid])[:, None]
        out[rot] = p @ ROT.T
    return out


def certify_infeasible(program: ConicProgram, solve, tol: float = 1e-8):
    """Return a primal infeasibility ray ``{"y", "z", "residual"}`` or ``None``.

    ``solve`` maps a ConicProgram to a ConicSolution.  Whatever it returns is
    checked independently: ``y`` is scaled to ``b'y = 1``, ``z`` is the exact
    projection of ``-A'y`` onto the cone and the ray is accepted only when
    ``|A'y + z| <= tol (1 + |A'y|)``.
    """
    aux = solve(farkas_program(program))
    y = aux.x[:program.m]
    bty = float(program.b @ y)
    if not (np.isfinite(bty) and bty > 0.0):
        return None
    y = y / bty
    aty = program.A.T @ y
    z = project(program, -aty)
    residual = float(np.linalg.norm(aty + z) / (1.0 + np.linalg.norm(aty)))
    if not residual <= tol:
        return None
    return {"y": y, "z": z, "residual": residual}
