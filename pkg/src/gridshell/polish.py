"""Newton refinement of an interior-point solution on its active set.

At an optimum every loaded element sits on the boundary of its cone and its
reduced cost vanishes, so the thrusts ``s`` of the active elements and the
virtual displacements ``(u, w)`` solve a square nonlinear system:

* equilibrium with end forces on the tight cone, and
* zero reduced cost on every active element.

Interior-point iterates satisfy it to roughly the square root of the duality
gap in the elevations.  A few Newton steps bring the residual to rounding
level, which is what the elevation walk and the compatibility checks need.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, lsmr, spsolve

from .assembly import SELFWEIGHT, WEIGHTLESS, SolveResult
from .memberadd import candidate_multipliers

log = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
ACTIVE_REL = 1e-6


class _System:
    """Residual and Jacobian in the unknowns ``[s_active, u_rows, w_rows]``."""

    def __init__(self, result: SolveResult, active):
        asm = result.assembly
        mp = asm.maps
        self.kind = result.kind
        self.spec, self.gs = result.spec, result.gs
        self.active = active
        self.B = mp.B.tocsc()[:, active]
        self.DA = mp.DA.tocsc()[:, active]
        self.DB = mp.DB.tocsc()[:, active]
        self.f_xy, self.f_z = mp.f_xy, mp.f_z
        self.xy_nodes, self.xy_comp, self.z_nodes = mp.xy_nodes, mp.xy_comp, mp.z_nodes
        # rows and duals touched by the active set; the rest stay as they are
        self.rows_xy = np.flatnonzero(np.diff(self.B.tocsr().indptr))
        self.rows_z = np.flatnonzero(np.diff((abs(self.DA) + abs(self.DB)).tocsr().indptr))
        self.na = active.size
        pairs = self.gs.pairs[active]
        self.a, self.b = pairs[:, 0], pairs[:, 1]
        self.length = self.gs.length[active]
        self.lbar = self.gs.lbar[active]

    def split(self, x):
        na, ny = self.na, self.rows_xy.size
        return x[:na], x[na:na + ny], x[na + ny:]

    def nodal(self, yu, yw, u_all, w_all):
        u = u_all.copy()
        w = w_all.copy()
        u[self.xy_nodes[self.rows_xy], self.xy_comp[self.rows_xy]] = yu
        w[self.z_nodes[self.rows_z]] = yw
        return u, w

    def forces(self, s, w):
        """End forces, reduced costs and their derivatives on the tight cone.

        Returns ``qA, qB, (dqA/dwA, dqA/dwB), (dqB/dwA, dqB/dwB), cost,
        (dcost/dwA, dcost/dwB), (dqA/ds, dqB/ds)``.
        """
        wa, wb = w[self.a], w[self.b]
        if self.kind == SELFWEIGHT:
            rg = self.spec.rho_g
            sn, cs = np.sin(self.lbar), np.cos(self.lbar)
            ma, mb = 1.0 / rg - wa, 1.0 / rg - wb
            rho = np.sqrt(mb / ma)
            qa = s * (rho - cs) / sn
            qb = s * (1.0 / rho - cs) / sn
            dqa = (s * rho / (2 * ma * sn), -s * rho / (2 * mb * sn))
            dqb = (-s / (2 * rho * ma * sn), s / (2 * rho * mb * sn))
            cost = (2.0 * np.sqrt(ma * mb) - cs * (ma + mb)) / sn
            dcost = (-(rho - cs) / sn, -(1.0 / rho - cs) / sn)
            slope = ((rho - cs) / sn, (1.0 / rho - cs) / sn)
        else:
            sg = self.spec.sigma
            h = sg * (wa - wb) / (2.0 * self.length)
            qa, qb = s * h, -s * h
            c = sg * s / (2.0 * self.length)
            dqa, dqb = (c, -c), (-c, c)
            cost = self.length / sg - sg * (wa - wb) ** 2 / (4.0 * self.length)
            dcost = (-h, h)
            slope = (h, -h)
        return qa, qb, dqa, dqb, cost, dcost, slope

    def evaluate(self, x, u_all, w_all, jacobian=True):
        s, yu, yw = self.split(x)
        u, w = self.nodal(yu, yw, u_all, w_all)
        qa, qb, dqa, dqb, cost, dcost, slope = self.forces(s, w)
        du = np.einsum("ij,ij->i", u[self.a] - u[self.b], self.gs.direction[self.active])
        F = np.concatenate([
            (self.B @ s - self.f_xy)[self.rows_xy],
            (self.DA @ qa + self.DB @ qb - self.f_z)[self.rows_z],
            du - cost,
        ])
        if not jacobian:
            return F, (s, u, w, qa, qb)
        # w columns: map node -> position among the polished vertical rows
        zpos = np.full(self.spec.n, -1)
        zpos[self.z_nodes[self.rows_z]] = np.arange(self.rows_z.size)
        Bs = self.B[self.rows_xy]
        dF2ds = (self.DA @ sp.diags(slope[0]) + self.DB @ sp.diags(slope[1])).tocsr()[self.rows_z]
        ia, ib = zpos[self.a], zpos[self.b]
        # vertical rows: DA qA + DB qB, qA and qB each depend on wA and wB
        rowA = self.DA.tocsr()[self.rows_z].tocoo()
        rowB = self.DB.tocsr()[self.rows_z].tocoo()
        r, c, v = [], [], []
        for coo, dq in ((rowA, dqa), (rowB, dqb)):
            e = coo.col
            for col, d in ((ia[e], dq[0][e]), (ib[e], dq[1][e])):
                keep = col >= 0
                r.append(coo.row[keep])
                c.append(col[keep])
                v.append((coo.data * d)[keep])
        nz = self.rows_z.size
        dF2dw = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                              shape=(nz, nz))
        # reduced cost rows: du = B' u, minus dcost/dw
        dF3du = Bs.T.tocsr()
        e = np.arange(self.na)
        r, c, v = [], [], []
        for col, d in ((ia, dcost[0]), (ib, dcost[1])):
            keep = col >= 0
            r.append(e[keep])
            c.append(col[keep])
            v.append(-d[keep])
        dF3dw = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                              shape=(self.na, nz))
        J = sp.bmat([[Bs, None, None],
                     [dF2ds, None, dF2dw],
                     [None, dF3du, dF3dw]], format="csc")
        return F, J, (s, u, w, qa, qb)


def _scale(result):
    s = result.primal["s"]
    return max(1.0, float(np.abs(s).max()),
               float(np.abs(result.spec.loads).max(initial=0.0)))


def polish(result: SolveResult, active_rel=ACTIVE_REL, max_steps=10, tol=1e-14):
    """Refined copy of ``result``, or ``result`` itself if refinement fails.

    The refined point is accepted only if the thrusts stay nonnegative and the
    residual ends below ``tol`` relative to the force scale.
    """
    if not result.optimal or result.kind not in (SELFWEIGHT, WEIGHTLESS):
        return result
    spec = result.spec
    s0 = result.primal["s"]
    w0, u0 = result.dual["w"], result.dual["u"]
    if spec.rho_g > 0.0 and np.any(1.0 - spec.rho_g * w0 <= 1e-6):
        return result          # counterweight nodes: w is pinned at 1/rho_g
    top = max(s0.max(initial=0.0), float(np.abs(spec.loads).sum()))
    if s0.max(initial=0.0) <= active_rel * top:
        return result
    active = np.flatnonzero(s0 > active_rel * top)
    sysm = _System(result, active)
    x = np.concatenate([s0[active],
                        u0[sysm.xy_nodes[sysm.rows_xy], sysm.xy_comp[sysm.rows_xy]],
                        w0[sysm.z_nodes[sysm.rows_z]]])
    scale = _scale(result)
    F, J, _ = sysm.evaluate(x, u0, w0)
    res0 = float(np.abs(F).max()) / scale
    best = res0
    for _ in range(max_steps):
        if best <= tol:
            break
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                dx = spsolve(J, -F) if J.shape[0] == J.shape[1] else None
            except (MatrixRankWarning, RuntimeError):
                dx = None
        if dx is None or not np.all(np.isfinite(dx)):
            dx = lsmr(J, -F, atol=1e-15, btol=1e-15, maxiter=20 * J.shape[1])[0]
        x_new = x + dx
        # a full step may leave the domain 1 - rho_g w > 0; that shows up as NaN
        with np.errstate(invalid="ignore", divide="ignore"):
            F_new, J_new, _ = sysm.evaluate(x_new, u0, w0)
        r_new = float(np.abs(F_new).max()) / scale
        if not np.isfinite(r_new) or r_new >= best:
            break
        x, F, J, best = x_new, F_new, J_new, r_new
    s, u, w, qa, qb = sysm.evaluate(x, u0, w0, jacobian=False)[1]
    if best > max(tol, 1e-12) or np.any(s < 0.0):
        log.debug("polish rejected: residual %.3e -> %.3e", res0, best)
        return result
    log.debug("polish: residual %.3e -> %.3e on %d elements", res0, best, active.size)
    return _rebuild(result, active, s, u, w, qa, qb)


def _rebuild(result, active, s_a, u, w, qa_a, qb_a):
    spec, gs = result.spec, result.gs
    m = gs.m
    s = np.zeros(m)
    s[active] = s_a
    qa = np.zeros(m)
    qb = np.zeros(m)
    qa[active] = qa_a
    qb[active] = qb_a
    dual = dict(result.dual)
    dual["u"], dual["w"] = u, w
    if result.kind == SELFWEIGHT:
        lb = gs.lbar
        sn, cs = np.sin(lb), np.cos(lb)
        t1, t2 = sn * qa + cs * s, sn * qb + cs * s
        ma = 1.0 / spec.rho_g - w[gs.pairs[:, 0]]
        mb = 1.0 / spec.rho_g - w[gs.pairs[:, 1]]
        # t2 - t1 = s (1/rho - rho) with rho = sqrt(mB / mA)
        rho = np.sqrt(mb / ma)
        dt = np.where(s > 0.0, s * (1.0 / rho - rho), t2 - t1)
        primal = {"s": s, "qA": qa, "qB": qb,
                  "t": np.column_stack([t1, t2, SQRT2 * s]), "dt": dt}
        volume = float(np.sum(qa + qb) / spec.rho_g)
        g1, g2, g3 = candidate_multipliers(gs, u, w, spec.rho_g)
        g3c = np.minimum(g3, 0.0)
        dual["g"] = np.column_stack([g1, g2, g3c])
        dual["s_slack"] = SQRT2 * (g3 - g3c)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(s > 0.0, qa * qa / s, 0.0)
        primal = {"s": s, "q": qa, "r": r}
        volume = float(np.sum(gs.length * (s + r)) / spec.sigma)
    return replace(result, primal=primal, dual=dual, volume=volume, polished=True)
