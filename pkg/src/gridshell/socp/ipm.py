"""Homogeneous self-dual interior-point method for orthant/SOC programs."""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

from . import cones as K
from .kkt import KKTSystem
from .program import (DUAL_INFEASIBLE, MAX_ITER, OPTIMAL, PRIMAL_INFEASIBLE,
                      ConicProgram, ConicSolution, NumericalError)

log = logging.getLogger(__name__)

CENTRALITY = 1e-5


def _rotation(n, rotated):
    """Sparse symmetric involution taking rotated-cone triples to Lorentz form."""
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.ones(n)]
    if rotated.size:
        keep = np.ones(n, dtype=bool)
        keep[rotated.ravel()] = False
        rows, cols, vals = [np.flatnonzero(keep)], [np.flatnonzero(keep)], [np.ones(keep.sum())]
        for a in range(3):
            for b in range(3):
                if K.ROT[a, b] != 0.0:
                    rows.append(rotated[:, a])
                    cols.append(rotated[:, b])
                    vals.append(np.full(rotated.shape[0], K.ROT[a, b]))
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def _ruiz(A, cones, n_iter=15):
    """Row/column equilibration; one column factor shared by each cone block."""
    m, n = A.shape
    d = np.ones(m)
    e = np.ones(n)
    As = A.copy()
    for _ in range(n_iter):
        absA = abs(As)
        row = np.sqrt(absA.max(axis=1).toarray().ravel()) if m else np.zeros(0)
        col = np.sqrt(absA.max(axis=0).toarray().ravel())
        if cones.size:
            col[cones] = col[cones].max(axis=1, keepdims=True)
        row[row == 0.0] = 1.0
        col[col == 0.0] = 1.0
        d /= row
        e /= col
        As = sp.diags(1.0 / row) @ As @ sp.diags(1.0 / col)
        if max(np.abs(row - 1).max(initial=0), np.abs(col - 1).max(initial=0)) < 1e-3:
            break
    return sp.csc_matrix(As), d, e


class _Iterate:
    __slots__ = ("x", "y", "z", "tau", "kappa")

    def __init__(self, x, y, z, tau, kappa):
        self.x, self.y, self.z, self.tau, self.kappa = x, y, z, tau, kappa


def solve(program: ConicProgram, tol: float = 1e-8, max_iter: int = 100,
          scale: bool = True) -> ConicSolution:
    """Solve ``program`` and return primal, dual and status.

    Residuals reported (and used for termination) are measured on the
    original, unscaled data:  ``pres = |Ax - b| / (1 + |b|)``,
    ``dres = |c - A'y - z| / (1 + max(|c|, |A'y|, |z|))`` and the
    complementarity gap ``x'z`` relative to the objective magnitude.
    """
    n, m = program.n, program.m
    orth = program.orthant
    cones = program.rotated
    free = program.free
    if n == 0:
        raise NumericalError("empty program")

    T = _rotation(n, cones)
    A0 = sp.csc_matrix(program.A @ T)
    c0 = T @ program.c
    b0 = program.b.copy()

    if scale and m:
        A, D, E = _ruiz(A0, cones)
    else:
        A, D, E = A0, np.ones(m), np.ones(n)
    bs = D * b0
    cs = E * c0
    rb = max(1.0, np.linalg.norm(bs, np.inf))
    rc = max(1.0, np.linalg.norm(cs, np.inf))
    b = bs / rb
    c = cs / rc

    def unscale(it):
        x = E * it.x * rb
        y = D * it.y * rc
        z = it.z / E * rc
        return T @ x, y, z

    def orig(it):
        # unscaled iterate in the Lorentz frame (no T), for residuals
        return E * it.x * rb, D * it.y * rc, it.z / E * rc

    kkt = KKTSystem(A, orth, cones, free)
    nrm_b = np.linalg.norm(b0)
    nrm_c = np.linalg.norm(c0)
    degree = orth.size + cones.shape[0]

    x = np.zeros(n)
    z = np.zeros(n)
    x[orth] = 1.0
    z[orth] = 1.0
    if cones.size:
        x[cones[:, 0]] = 1.0
        z[cones[:, 0]] = 1.0
    it = _Iterate(x, np.zeros(m), z, 1.0, 1.0)

    def measures(it):
        xo, yo, zo = orig(it)
        tau = it.tau
        ax = A0 @ xo / tau
        aty = A0.T @ yo / tau
        pres = np.linalg.norm(ax - b0) / (1.0 + max(nrm_b, np.linalg.norm(ax)))
        dres = np.linalg.norm(c0 - aty - zo / tau) / (
            1.0 + max(nrm_c, np.linalg.norm(aty), np.linalg.norm(zo) / tau))
        pobj = float(c0 @ xo) / tau
        dobj = float(b0 @ yo) / tau
        # complementarity x'z, identical to c'x - b'y on feasible points
        gap = abs(float(xo @ zo)) / tau ** 2 / max(1.0, abs(pobj), abs(dobj))
        return pres, dres, gap, pobj, dobj, xo, yo, zo

    status = MAX_ITER
    ray = None
    iters = 0
    best = None
    stalled = 0
    for iters in range(max_iter + 1):
        pres, dres, gap, pobj, dobj, xo, yo, zo = measures(it)
        score = max(pres, dres, gap)
        if best is None or score < best[0]:
            best = (score, it.x.copy(), it.y.copy(), it.z.copy(), it.tau, it.kappa,
                    pres, dres, gap, pobj, dobj)
        log.debug("iter %d pres %.2e dres %.2e gap %.2e tau %.2e kappa %.2e",
                  iters, pres, dres, gap, it.tau, it.kappa)
        if pres <= tol and dres <= tol and gap <= tol:
            status = OPTIMAL
            break
        bty = float(b0 @ yo)
        if bty > 0.0:
            cert = np.linalg.norm(A0.T @ yo + zo) / bty
            if cert <= tol:
                status = PRIMAL_INFEASIBLE
                ray = {"y": yo / bty, "z": T @ (zo / bty),
                       "residual": cert, "tau_over_kappa": it.tau / it.kappa}
                break
        ctx = float(c0 @ xo)
        if ctx < 0.0:
            cert = np.linalg.norm(A0 @ xo) / -ctx
            if cert <= tol:
                status = DUAL_INFEASIBLE
                ray = {"x": T @ (xo / -ctx), "residual": cert,
                       "tau_over_kappa": it.tau / it.kappa}
                break
        if iters == max_iter:
            break
        try:
            alpha = _step(it, A, b, c, orth, cones, kkt, degree)
        except NumericalError:
            # a rejected step leaves the iterate untouched; retry with a
            # stiffer quasi-definite shift before giving up
            if kkt.reg >= 1e-4:
                if best is None:
                    raise
                break
            kkt.increase_regularisation()
            log.debug("KKT failure, regularisation raised to %.1e", kkt.reg)
            continue
        stalled = stalled + 1 if alpha < 1e-6 else 0
        if stalled >= 3:
            break

    if status == MAX_ITER:
        _, bx, by, bz, btau, bkappa, pres, dres, gap, pobj, dobj = best
        it = _Iterate(bx, by, bz, btau, bkappa)
    xo, yo, zo = unscale(it)
    tau = it.tau
    x_out, y_out, z_out = xo / tau, yo / tau, T @ (zo / tau)
    if status == OPTIMAL or status == MAX_ITER:
        pobj = program.objective(x_out)
        dobj = float(program.b @ y_out) + program.offset
    else:
        pobj = dobj = np.nan
    return ConicSolution(
        status=status, x=x_out, y=y_out, z=z_out,
        primal_objective=pobj, dual_objective=dobj,
        residuals={"primal": pres, "dual": dres, "gap": gap},
        iterations=iters, ray=ray)


def _blocks(v, orth, cones):
    return v[orth], (v[cones] if cones.size else np.zeros((0, 3)))


def _step(it, A, b, c, orth, cones, kkt, degree):
    n = it.x.size
    xo, xc = _blocks(it.x, orth, cones)
    zo, zc = _blocks(it.z, orth, cones)
    tau, kappa = it.tau, it.kappa

    wo = np.sqrt(xo / zo)
    lam_o = np.sqrt(xo * zo)
    if cones.size:
        W = K.NTScaling(xc, zc)
        lam_c = W.lam
        lam_det = W.lam_det
        h_cone = W.hessian()
    else:
        W = None
        lam_c = np.zeros((0, 3))
        lam_det = np.zeros(0)
        h_cone = np.zeros((0, 3, 3))
    kkt.factor(zo / xo, h_cone)

    r_p = A @ it.x - b * tau
    r_d = c * tau - A.T @ it.y - it.z
    r_g = kappa - b @ it.y + c @ it.x
    mu = (xo @ zo + np.einsum("ij,ij->", xc, zc) + tau * kappa) / (degree + 1)

    u1, v1 = kkt.solve(-c, b)
    # b'v1 + c'u1 = -u1'H u1 exactly; the quadratic form keeps the sign robust
    u1o, u1c = _blocks(u1, orth, cones)
    quad = (zo / xo) @ (u1o * u1o)
    if W is not None:
        quad += np.sum(W.apply_inv(u1c) ** 2)

    def direction(eta, ds_o, ds_c, dkappa_rhs):
        # W^{-1}(lam \ d_s)
        t_o = (ds_o / lam_o) / wo
        t_c = W.apply_inv(K.jdiv(lam_c, ds_c, lam_det)) if W is not None else ds_c
        r1 = -eta * r_d
        r1[orth] += t_o
        if cones.size:
            r1[cones] += t_c
        r2 = -eta * r_p
        u0, v0 = kkt.solve(r1, r2)
        den = kappa + tau * quad
        if not den > 0.0:
            raise NumericalError("homogeneous embedding lost positivity")
        dtau = (dkappa_rhs + tau * eta * r_g + tau * (b @ v0 + c @ u0)) / den
        dx = u0 + dtau * u1
        dy = -(v0 + dtau * v1)
        # from the linearised tau*kappa complementarity; the gap row would
        # subtract O(1) quantities to produce an O(kappa) update
        dkappa = (dkappa_rhs - kappa * dtau) / tau
        dz = np.zeros(n)
        dxo, dxc = _blocks(dx, orth, cones)
        # scaled directions W^{-1} dx and W dz share the centre lam
        sx_o = dxo / wo
        sz_o = ds_o / lam_o - sx_o
        dz[orth] = sz_o / wo
        if cones.size:
            sx_c = W.apply_inv(dxc)
            sz_c = K.jdiv(lam_c, ds_c, lam_det) - sx_c
            dz[cones] = W.apply_inv(sz_c)
        else:
            sx_c = sz_c = np.zeros((0, 3))
        return dx, dy, dz, dtau, dkappa, (sx_o, sz_o, sx_c, sz_c)

    def max_step(dtau, dkappa, scaled):
        sx_o, sz_o, sx_c, sz_c = scaled
        alpha = np.inf
        if orth.size:
            alpha = min(alpha, K.orthant_step(lam_o, sx_o).min(),
                        K.orthant_step(lam_o, sz_o).min())
        if cones.size:
            alpha = min(alpha, K.soc_step(lam_c, sx_c).min(), K.soc_step(lam_c, sz_c).min())
        if dtau < 0:
            alpha = min(alpha, -tau / dtau)
        if dkappa < 0:
            alpha = min(alpha, -kappa / dkappa)
        return alpha

    def well_centred(alpha, dx, dz, dtau, dkappa):
        xn, zn = it.x + alpha * dx, it.z + alpha * dz
        tn, kn = tau + alpha * dtau, kappa + alpha * dkappa
        xo_, xc_ = _blocks(xn, orth, cones)
        zo_, zc_ = _blocks(zn, orth, cones)
        pairs = [xo_ * zo_, K.lorentz_norm(xc_) * K.lorentz_norm(zc_), np.array([tn * kn])]
        mu_new = (xo_ @ zo_ + np.einsum("ij,ij->", xc_, zc_) + tn * kn) / (degree + 1)
        return min(p.min(initial=np.inf) for p in pairs) >= CENTRALITY * mu_new

    # affine predictor
    ds_o = -lam_o * lam_o
    ds_c = -K.jprod(lam_c, lam_c)
    dx, dy, dz, dtau, dkappa, scaled = direction(1.0, ds_o, ds_c, -tau * kappa)
    alpha_a = min(1.0, max_step(dtau, dkappa, scaled))
    sigma = (1.0 - alpha_a) ** 3

    # combined corrector
    sx_o, sz_o, sx_c, sz_c = scaled
    ds_o = -lam_o * lam_o - sx_o * sz_o + sigma * mu
    if cones.size:
        ds_c = (-K.jprod(lam_c, lam_c) - K.jprod(sx_c, sz_c)
                + sigma * mu * K.identity(cones.shape[0]))
    dk = -tau * kappa - dtau * dkappa + sigma * mu
    dx, dy, dz, dtau, dkappa, scaled = direction(1.0 - sigma, ds_o, ds_c, dk)
    alpha = min(1.0, 0.99 * max_step(dtau, dkappa, scaled))
    for _ in range(30):
        if well_centred(alpha, dx, dz, dtau, dkappa):
            break
        alpha *= 0.8

    log.debug("   mu %.2e alpha_a %.3f sigma %.2e alpha %.3f", mu, alpha_a, sigma, alpha)
    x_new, z_new = it.x + alpha * dx, it.z + alpha * dz
    tau_new = tau + alpha * dtau
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(z_new)) and np.isfinite(tau_new)):
        raise NumericalError("non-finite iterate")
    it.x, it.z, it.tau = x_new, z_new, tau_new
    it.y = it.y + alpha * dy
    it.kappa = kappa + alpha * dkappa
    return alpha
