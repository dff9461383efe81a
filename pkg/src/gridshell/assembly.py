"""Conic programs for the self-weight, weightless and lumped-weight formulations.

Sign conventions
----------------
* ``fz`` is positive upward.
* ``qA``/``qB`` are the vertical forces an element exerts downward on its
  end nodes, so vertical equilibrium at a free node reads ``sum q = fz``.
* ``B`` holds ``+e`` at end A and ``-e`` at end B, ``e`` the unit vector A->B,
  so horizontal equilibrium reads ``B s = f_xy``.

Variable layout is element-major:

* self-weight: ``[s, t1, t2, t3]`` per element, ``s >= 0`` and
  ``2 t1 t2 >= t3**2`` with ``t1 = sin(lbar) qA + cos(lbar) s``,
  ``t2 = sin(lbar) qB + cos(lbar) s`` and a link row ``t3 = sqrt(2) s``;
* weightless and lumped: ``[s, r, p]`` per element with ``2 s r >= p**2``
  and ``q = p / sqrt(2)``, so that ``r >= q**2 / s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import dataclasses

import numpy as np
import scipy.sparse as sp

from .geometry import GroundStructure, ProblemSpec
from .socp import MAX_ITER, OPTIMAL, PRIMAL_INFEASIBLE, ConicProgram, ConicSolution, solve_with
from .socp.certify import certify_infeasible

SQRT2 = np.sqrt(2.0)
SELFWEIGHT, WEIGHTLESS, LUMPED = "selfweight", "weightless", "lumped"


class AssemblyError(ValueError):
    pass


@dataclass
class EquilibriumMaps:
    B: sp.csr_matrix          # (2 * n_xy, m)
    DA: sp.csr_matrix         # (n_z, m)
    DB: sp.csr_matrix         # (n_z, m)
    f_xy: np.ndarray
    f_z: np.ndarray
    xy_nodes: np.ndarray      # node index of each horizontal row
    xy_comp: np.ndarray       # 0 (x) or 1 (y) for each horizontal row
    z_nodes: np.ndarray       # node index of each vertical row
    z_row: np.ndarray         # node -> vertical row or -1


def equilibrium_maps(spec: ProblemSpec, gs: GroundStructure) -> EquilibriumMaps:
    n, m = spec.n, gs.m
    held = spec.restrained
    xy_nodes, xy_comp = np.nonzero(~held[:, :2])
    z_nodes = np.flatnonzero(~held[:, 2])
    xy_row = np.full((n, 2), -1)
    xy_row[xy_nodes, xy_comp] = np.arange(xy_nodes.size)
    z_row = np.full(n, -1)
    z_row[z_nodes] = np.arange(z_nodes.size)
    a, b = gs.pairs[:, 0], gs.pairs[:, 1]
    e = gs.direction
    rows, cols, vals = [], [], []
    for end, sign in ((a, 1.0), (b, -1.0)):
        for comp in (0, 1):
            r = xy_row[end, comp]
            keep = r >= 0
            rows.append(r[keep])
            cols.append(np.flatnonzero(keep))
            vals.append(sign * e[keep, comp])
    B = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(xy_nodes.size, m))

    def incidence(end):
        r = z_row[end]
        keep = r >= 0
        return sp.csr_matrix((np.ones(keep.sum()), (r[keep], np.flatnonzero(keep))),
                             shape=(z_nodes.size, m))

    f_xy = spec.loads[xy_nodes, xy_comp]
    f_z = spec.loads[z_nodes, 2]
    return EquilibriumMaps(B, incidence(a), incidence(b), f_xy, f_z, xy_nodes, xy_comp,
                           z_nodes, z_row)


@dataclass
class Assembly:
    """A conic program plus everything needed to interpret its solution."""

    kind: str
    spec: ProblemSpec
    gs: GroundStructure
    maps: EquilibriumMaps
    program: ConicProgram
    width: int                # variables per element

    @property
    def m(self):
        return self.gs.m

    def element_block(self, x):
        return x.reshape(self.m, self.width)

    # ----- primal
    def primal_fields(self, x):
        v = self.element_block(x)
        s = v[:, 0].copy()
        if self.kind == SELFWEIGHT:
            lb = self.gs.lbar
            sl, cl = np.sin(lb), np.cos(lb)
            th = np.tan(0.5 * lb)
            a = _shear(lb)
            T1, T2, T3 = v[:, 1], v[:, 2], v[:, 3]
            qA = th * a * T1 - cl / (SQRT2 * sl) * T3
            qB = th * a * T1 + T2 / (a * sl) + (2.0 - cl) / (SQRT2 * sl) * T3
            t1 = a * T1
            t = np.column_stack([t1, T2 / a + SQRT2 * T3 + t1, T3 + SQRT2 * t1])
            # t2 - t1 without cancellation
            return {"s": s, "qA": qA, "qB": qB, "t": t, "dt": T2 / a + SQRT2 * T3}
        q = v[:, 2] / SQRT2
        return {"s": s, "q": q, "r": v[:, 1].copy()}

    # ----- dual
    def dual_fields(self, sol: ConicSolution):
        n = self.spec.n
        mp = self.maps
        ny = mp.xy_nodes.size
        nz = mp.z_nodes.size
        y = sol.y
        u = np.zeros((n, 2))
        u[mp.xy_nodes, mp.xy_comp] = y[:ny]
        w = np.zeros(n)
        w[mp.z_nodes] = y[ny:ny + nz]
        zb = self.element_block(sol.z)
        if self.kind == SELFWEIGHT:
            # duals of t from duals of T: solve L' g = z_T
            a = _shear(self.gs.lbar)
            g = np.empty((self.m, 3))
            g[:, 1] = a * zb[:, 2]
            g[:, 2] = zb[:, 3] - SQRT2 * g[:, 1]
            g[:, 0] = zb[:, 1] / a - g[:, 1] - SQRT2 * g[:, 2]
            slack = zb[:, 0].copy()
        else:
            g = zb[:, [0, 1, 2]].copy()
            slack = np.zeros(self.m)
        return {"u": u, "w": w, "g": g, "s_slack": slack}

    def horizontal_extension(self, u):
        """Delta u per element, the element row of B' u."""
        e = self.gs.direction
        a, b = self.gs.pairs[:, 0], self.gs.pairs[:, 1]
        return np.einsum("ij,ij->i", u[a] - u[b], e)

    def volume(self, x):
        f = self.primal_fields(x)
        if self.kind == SELFWEIGHT:
            return float(np.sum(f["qA"] + f["qB"]) / self.spec.rho_g)
        return float(np.sum(self.gs.length * (f["s"] + f["r"])) / self.spec.sigma)


def _rows(maps, m, width, col_s, col_za, col_zb, za_coef, zb_coef, z_s_coef=None):
    """Stack horizontal rows (on column ``col_s``) and vertical rows."""
    B = maps.B.tocoo()
    rows = [B.row]
    cols = [B.col * width + col_s]
    vals = [B.data]
    off = maps.B.shape[0]
    for D, col, coef in ((maps.DA, col_za, za_coef), (maps.DB, col_zb, zb_coef)):
        Dc = D.tocoo()
        rows.append(off + Dc.row)
        cols.append(Dc.col * width + col)
        vals.append(coef[Dc.col])
    if z_s_coef is not None:
        for D, coef in ((maps.DA, z_s_coef[0]), (maps.DB, z_s_coef[1])):
            Dc = D.tocoo()
            rows.append(off + Dc.row)
            cols.append(Dc.col * width + 0)
            vals.append(coef[Dc.col])
    return rows, cols, vals, off + maps.DA.shape[0]


def _shear(lbar):
    """Scale ``a`` of the per-element cone automorphism (see ``assemble_selfweight``)."""
    return 1.0 / lbar


def assemble_selfweight(spec: ProblemSpec, gs: GroundStructure) -> Assembly:
    """Self-weight program.

    The cone triple ``t`` is close to the ray ``t1 = t2 = t3 / sqrt(2) = s``
    for short or light elements, and writing the objective directly in ``t``
    cancels to O(lbar) relative accuracy.  The solver therefore works on
    ``T = (t1 / a, a (t2 - sqrt(2) t3 + t1), t3 - sqrt(2) t1)``, the image of
    ``t`` under an automorphism of the rotated cone (a shear followed by a
    hyperbolic scaling), in which every coefficient is well scaled.
    """
    if not spec.rho_g > 0.0:
        raise AssemblyError("self-weight assembly needs rho_g > 0; use the weightless form")
    if gs.m == 0:
        raise AssemblyError("empty ground structure")
    m = gs.m
    maps = equilibrium_maps(spec, gs)
    lb = gs.lbar
    sl, cl = np.sin(lb), np.cos(lb)
    th = np.tan(0.5 * lb)
    a = _shear(lb)
    # qA = th a T1 - cot(lbar) T3 / sqrt2
    # qB = th a T1 + T2 / (a sin) + (2 - cos) T3 / (sqrt2 sin)
    qa = [(1, th * a), (3, -cl / (SQRT2 * sl))]
    qb = [(1, th * a), (2, 1.0 / (a * sl)), (3, (2.0 - cl) / (SQRT2 * sl))]
    B = maps.B.tocoo()
    rows, cols, vals = [B.row], [4 * B.col], [B.data]
    off = maps.B.shape[0]
    for D, terms in ((maps.DA, qa), (maps.DB, qb)):
        Dc = D.tocoo()
        for col, coef in terms:
            rows.append(off + Dc.row)
            cols.append(4 * Dc.col + col)
            vals.append(coef[Dc.col])
    nrow = off + maps.DA.shape[0]
    link = nrow + np.arange(m)
    base = 4 * np.arange(m)
    # s = t3 / sqrt2 = a T1 + T3 / sqrt2
    rows += [link, link, link]
    cols += [base, base + 1, base + 3]
    vals += [np.ones(m), -a, np.full(m, -1.0 / SQRT2)]
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nrow + m, 4 * m)).tocsc()
    A.sum_duplicates()
    b = np.concatenate([maps.f_xy, maps.f_z, np.zeros(m)])
    c = np.zeros((m, 4))
    c[:, 1] = 2.0 * a * th / spec.rho_g
    c[:, 2] = 1.0 / (a * sl * spec.rho_g)
    c[:, 3] = SQRT2 * th / spec.rho_g
    program = ConicProgram(c.ravel(), A, b, orthant=base,
                           rotated=np.column_stack([base + 1, base + 2, base + 3]))
    return Assembly(SELFWEIGHT, spec, gs, maps, program, 4)


def _assemble_straight(spec, gs, lumped):
    if gs.m == 0:
        raise AssemblyError("empty ground structure")
    m = gs.m
    maps = equilibrium_maps(spec, gs)
    h = np.full(m, 1.0 / SQRT2)
    rows, cols, vals, nrow = _rows(maps, m, 3, 0, 2, 2, h, -h)
    if lumped:
        z = 0.5 * gs.length * spec.rho_g / spec.sigma
        for D in (maps.DA, maps.DB):
            Dc = D.tocoo()
            for col in (0, 1):
                rows.append(maps.B.shape[0] + Dc.row)
                cols.append(Dc.col * 3 + col)
                vals.append(z[Dc.col])
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nrow, 3 * m)).tocsc()
    A.sum_duplicates()
    b = np.concatenate([maps.f_xy, maps.f_z])
    c = np.zeros((m, 3))
    c[:, 0] = gs.length / spec.sigma
    c[:, 1] = gs.length / spec.sigma
    base = 3 * np.arange(m)
    program = ConicProgram(c.ravel(), A, b,
                           rotated=np.column_stack([base, base + 1, base + 2]))
    return Assembly(LUMPED if lumped else WEIGHTLESS, spec, gs, maps, program, 3)


def assemble_weightless(spec: ProblemSpec, gs: GroundStructure) -> Assembly:
    return _assemble_straight(spec, gs, lumped=False)


def assemble_lumped(spec: ProblemSpec, gs: GroundStructure) -> Assembly:
    if not spec.rho_g > 0.0:
        raise AssemblyError("lumped assembly needs rho_g > 0")
    return _assemble_straight(spec, gs, lumped=True)


def assemble(spec, gs, formulation="auto"):
    if formulation == "auto":
        formulation = SELFWEIGHT if spec.rho_g > 0.0 else WEIGHTLESS
    return {SELFWEIGHT: assemble_selfweight, WEIGHTLESS: assemble_weightless,
            LUMPED: assemble_lumped}[formulation](spec, gs)


@dataclass
class SolveResult:
    assembly: Assembly
    solution: ConicSolution
    primal: dict | None
    dual: dict | None
    volume: float
    polished: bool = False

    @property
    def status(self):
        return self.solution.status

    @property
    def optimal(self):
        return self.solution.optimal

    @property
    def kind(self):
        return self.assembly.kind

    @property
    def spec(self):
        return self.assembly.spec

    @property
    def gs(self):
        return self.assembly.gs


def map_duals(assembly: Assembly, solution: ConicSolution):
    if not solution.optimal:
        raise AssemblyError(f"cannot map duals of a {solution.status} solution")
    return assembly.dual_fields(solution)


def _unloaded(assembly: Assembly) -> ConicSolution:
    """Exact optimum of a program with b = 0: x = 0, y = 0, z = c (c lies in the dual cone)."""
    prog = assembly.program
    res = {"primal": 0.0, "dual": 0.0, "gap": 0.0}
    return ConicSolution(OPTIMAL, np.zeros(prog.n), np.zeros(prog.m), prog.c.copy(),
                         prog.offset, prog.offset, res, 0)


def solve_assembly(assembly: Assembly, backend=None, tol=1e-8, max_iter=100) -> SolveResult:
    if not np.any(assembly.program.b):
        sol = _unloaded(assembly)
    else:
        sol = solve_with(assembly.program, backend=backend, tol=tol, max_iter=max_iter)
    if sol.status == MAX_ITER:
        # an unsettled solve may still be provably infeasible
        ray = certify_infeasible(
            assembly.program, lambda p: solve_with(p, backend=backend, tol=tol, max_iter=max_iter), tol)
        if ray is not None:
            sol = dataclasses.replace(sol, status=PRIMAL_INFEASIBLE, ray=ray)
    if sol.optimal or sol.status == MAX_ITER:
        primal = assembly.primal_fields(sol.x)
        dual = assembly.dual_fields(sol)
        vol = assembly.volume(sol.x)
    else:
        primal = dual = None
        vol = float("nan")
    return SolveResult(assembly, sol, primal, dual, vol)


def solve_problem(spec, gs, formulation="auto", backend=None, tol=1e-8, max_iter=100,
                  refine=True):
    """Assemble and solve; ``refine`` runs Newton polishing on optimal results."""
    result = solve_assembly(assemble(spec, gs, formulation), backend, tol, max_iter)
    if refine:
        from .polish import polish
        result = polish(result)
    return result
