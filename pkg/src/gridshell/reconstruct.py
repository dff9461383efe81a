"""From optimal forces and virtual displacements to a physical grid-shell.

The nodal elevations follow from the vertical virtual displacement ``w``::

    z = sigma * log(1 - rho_g * w) / (2 * rho_g)      (self-weight)
    z = -sigma * w / 2                                (weightless)

Nodes where ``w`` reaches ``1 / rho_g`` carry their load with lumped
material alone (counterweight nodes) and have no determined elevation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import catenary
from .assembly import LUMPED, SELFWEIGHT, WEIGHTLESS, SolveResult

GRIDSHELL, COUNTERWEIGHT = "gridshell", "counterweight"
ACTIVE_REL = 1e-8
COUNTERWEIGHT_REL = 1e-6
ACCEPT = 1e-6


class ReconstructionError(RuntimeError):
    pass


# --------------------------------------------------------------------------- elevations

def elevations(w, rho_g, sigma):
    """Nodal elevations from ``w``; NaN where ``1 - rho_g w`` is not positive."""
    w = np.asarray(w, dtype=float)
    if rho_g == 0.0:
        return -0.5 * sigma * w
    arg = -rho_g * w
    z = np.full(w.shape, np.nan)
    ok = arg > -1.0
    z[ok] = sigma * np.log1p(arg[ok]) / (2.0 * rho_g)
    return z


def classify_regions(w, rho_g, tol=COUNTERWEIGHT_REL, pairs=None, s=None, floor=0.0):
    """Label nodes ``gridshell`` or ``counterweight``.

    With ``pairs`` and ``s`` given, also checks that no element carrying
    thrust joins the two classes.
    """
    w = np.asarray(w, dtype=float)
    labels = np.full(w.shape, GRIDSHELL, dtype=object)
    if rho_g > 0.0:
        cw = (1.0 / rho_g - w) <= tol / rho_g
        labels[cw] = COUNTERWEIGHT
    if pairs is not None and s is not None and s.size:
        live = active_mask(s, floor)
        mixed = labels[pairs[live, 0]] != labels[pairs[live, 1]]
        if np.any(mixed):
            raise ReconstructionError(
                f"{int(mixed.sum())} loaded elements join gridshell and counterweight nodes")
    return labels


# --------------------------------------------------------------------------- checks

@dataclass
class CompatibilityReport:
    """Max relative residual of each optimality property over all elements."""

    cone_equality: float        # (I)  t1 t2 = s^2
    slackness: float            # (II) (1/rg - wA) t1 = (1/rg - wB) t2
    idle_forces: float          # (III) s = 0 => qA = qB = 0
    coupling: float             # end forces vs. catenary through the elevations
    per_element: np.ndarray = field(repr=False, default=None)

    @property
    def worst(self):
        return max(self.cone_equality, self.slackness, self.idle_forces, self.coupling)

    def ok(self, tol=ACCEPT):
        return self.worst <= tol

    def as_dict(self):
        return {"cone_equality": self.cone_equality, "slackness": self.slackness,
                "idle_forces": self.idle_forces, "coupling": self.coupling}


def _fields(result: SolveResult):
    p = result.primal
    if result.kind == SELFWEIGHT:
        return p["s"], p["qA"], p["qB"]
    return p["s"], p["q"], -p["q"]


def force_floor(spec):
    """Total applied load; thrusts far below it are solver noise."""
    return float(np.abs(spec.loads).sum())


def active_mask(s, floor=0.0, rel=ACTIVE_REL):
    """Elements with ``s > rel * max(max s, floor)``."""
    s = np.asarray(s, dtype=float)
    if s.size == 0:
        return np.zeros(0, dtype=bool)
    top = max(float(s.max()), floor)
    return s > rel * top if top > 0.0 else np.zeros(s.shape, dtype=bool)


def verify_compatibility(result: SolveResult, z=None, labels=None) -> CompatibilityReport:
    """Residuals of the properties every optimal pair must satisfy.

    Force residuals are relative to the largest force in the solution, the
    slackness residual additionally to the largest ``1/rho_g - w``.
    """
    if result.kind == LUMPED:
        raise ReconstructionError("compatibility is undefined for the lumped formulation")
    spec, gs = result.spec, result.gs
    s, qA, qB = _fields(result)
    w = result.dual["w"]
    if z is None:
        z = elevations(w, spec.rho_g, spec.sigma)
    if labels is None:
        labels = classify_regions(w, spec.rho_g)
    a, b = gs.pairs[:, 0], gs.pairs[:, 1]
    floor = force_floor(spec)
    live = active_mask(s, floor)
    scale = max(np.abs(s).max(initial=0.0), np.abs(qA).max(initial=0.0),
                np.abs(qB).max(initial=0.0), floor)
    if scale == 0.0:
        return CompatibilityReport(0.0, 0.0, 0.0, 0.0, np.zeros(gs.m))
    shell = (labels[a] == GRIDSHELL) & (labels[b] == GRIDSHELL)
    dz = z[b] - z[a]

    if result.kind == SELFWEIGHT:
        lb = gs.lbar
        t1, t2 = catenary.cone_factors(s, qA, qB, lb)
        # (I) and (III) need 1/rho_g - w > 0 at both ends: lumped masses sit
        # legitimately on idle elements at counterweight nodes
        cone = np.where(shell, np.abs(t1 * t2 - s * s), 0.0) / scale ** 2
        mA = 1.0 / spec.rho_g - w[a]
        mB = 1.0 / spec.rho_g - w[b]
        mscale = max(np.abs(1.0 / spec.rho_g - w).max(), 1e-300)
        slack = np.where(live, np.abs(mA * t1 - mB * t2) / (mscale * scale), 0.0)
        k = spec.rho_g / spec.sigma
        coup = np.zeros(gs.m)
        use = live & shell
        if np.any(use):
            ta, tb = catenary.end_tangents(gs.length[use], dz[use], k)
            coup[use] = np.maximum(np.abs(qA[use] - s[use] * ta),
                                   np.abs(qB[use] + s[use] * tb)) / scale
    else:
        r = result.primal["r"]
        # 2 s r >= p^2 with p = sqrt(2) q, i.e. s r >= q^2
        cone = np.abs(s * r - qA * qA) / scale ** 2
        slack = np.zeros(gs.m)
        coup = np.where(live, np.abs(qA - s * dz / gs.length) / scale, 0.0)
    idle = np.where(~live & shell, np.maximum(np.abs(qA), np.abs(qB)) / scale, 0.0)
    per = np.maximum.reduce([cone, slack, idle, coup])
    return CompatibilityReport(float(cone.max()), float(slack.max()), float(idle.max()),
                               float(coup.max()), per)


# --------------------------------------------------------------------------- walking

@dataclass
class WalkResult:
    z: np.ndarray                 # NaN for nodes untouched by active elements
    residual: np.ndarray          # closure error per element, NaN on tree edges / idle
    tree: np.ndarray              # bool mask of elements used as tree edges
    floating: list                # node arrays of components without a support

    @property
    def max_residual(self):
        r = self.residual[np.isfinite(self.residual)]
        return float(np.abs(r).max()) if r.size else 0.0


def element_rise(result: SolveResult):
    """zB - zA implied by each element's own forces."""
    spec, gs = result.spec, result.gs
    s, qA, qB = _fields(result)
    with np.errstate(divide="ignore", invalid="ignore"):
        if result.kind == SELFWEIGHT:
            t1 = result.primal["t"][:, 0]
            return -0.5 * np.log1p(result.primal["dt"] / t1) * spec.sigma / spec.rho_g
        # straight bars, also the lumped model's reading of q
        return gs.length * qA / s


def walk_elevations(result: SolveResult, rise=None):
    """Elevations by walking active elements outward from the supports.

    A spanning tree of the active elements is grown with the heaviest
    elements first, rooted at a virtual node joined to every vertically
    supported node.  Each non-tree element closes a cycle; its closure
    error ``z_B - z_A - rise`` is returned.
    """
    spec, gs = result.spec, result.gs
    n = spec.n
    s = _fields(result)[0]
    if rise is None:
        rise = element_rise(result)
    live = active_mask(s, force_floor(spec))
    idx = np.flatnonzero(live)
    held = np.flatnonzero(spec.z_supported)
    root = n
    # Kruskal order depends only on ranking; heavier elements get lighter weights
    weight = 2.0 + (s.max(initial=0.0) - s[idx]) / max(s.max(initial=0.0), 1e-300)
    rows = np.concatenate([gs.pairs[idx, 0], np.full(held.size, root)])
    cols = np.concatenate([gs.pairs[idx, 1], held])
    vals = np.concatenate([weight, np.ones(held.size)])
    G = sp.coo_matrix((vals, (rows, cols)), shape=(n + 1, n + 1)).tocsr()
    T = csgraph.minimum_spanning_tree(G + G.T).tocoo()

    tree_pairs = set()
    adj = [[] for _ in range(n + 1)]
    for i, j in zip(T.row, T.col):
        adj[i].append(j)
        adj[j].append(i)
        tree_pairs.add((min(i, j), max(i, j)))
    lookup = {(int(gs.pairs[e, 0]), int(gs.pairs[e, 1])): e for e in idx}

    z = np.full(n, np.nan)
    seen = np.zeros(n + 1, dtype=bool)
    floating = []

    def grow(start, z0):
        stack = [start]
        seen[start] = True
        members = []
        if start < n:
            z[start] = z0
        while stack:
            i = stack.pop()
            if i < n:
                members.append(i)
            for j in adj[i]:
                if seen[j]:
                    continue
                seen[j] = True
                if i == root:
                    z[j] = 0.0
                elif i < j:
                    z[j] = z[i] + rise[lookup[(i, j)]]
                else:
                    z[j] = z[i] - rise[lookup[(j, i)]]
                stack.append(j)
        return members

    grow(root, 0.0)
    touched = np.unique(gs.pairs[idx].ravel()) if idx.size else np.zeros(0, dtype=int)
    for node in touched:
        if not seen[node]:
            floating.append(np.array(sorted(grow(int(node), 0.0))))

    tree = np.zeros(gs.m, dtype=bool)
    residual = np.full(gs.m, np.nan)
    for e in idx:
        pa, pb = int(gs.pairs[e, 0]), int(gs.pairs[e, 1])
        if (pa, pb) in tree_pairs:
            tree[e] = True
        else:
            residual[e] = z[pb] - z[pa] - rise[e]
    return WalkResult(z, residual, tree, floating)


# --------------------------------------------------------------------------- shell

@dataclass
class CriteriaReport:
    feasible: bool
    margin: float                       # min over z-free nodes of 1/rho_g - w
    counterweight: np.ndarray           # node indices
    compatibility: CompatibilityReport | None

    @property
    def pure_gridshell(self):
        return self.feasible and self.counterweight.size == 0 and self.margin > 0.0


@dataclass
class GridShell:
    nodes: np.ndarray                   # (n, 2)
    z: np.ndarray                       # (n,)
    labels: np.ndarray                  # (n,) gridshell / counterweight
    elements: np.ndarray                # indices into the ground structure
    polylines: list                     # (samples, 3) arrays, one per element
    areas: list                         # (samples,) cross-section areas
    lumped_mass: np.ndarray             # (n,) downward force of lumped material
    volume: float
    criteria: CriteriaReport
    w: np.ndarray = None                # (n,) vertical virtual displacement
    arbitrary_elevation: bool = False

    @property
    def end_areas(self):
        return np.array([[a[0], a[-1]] for a in self.areas]).reshape(-1, 2)

    @property
    def mid_areas(self):
        return np.array([a[len(a) // 2] for a in self.areas])

    @property
    def weight(self):
        return self.volume


def criteria(result: SolveResult, labels=None, compatibility=None):
    spec = result.spec
    if not result.optimal:
        return CriteriaReport(False, float("nan"), np.zeros(0, dtype=int), None)
    w = result.dual["w"]
    free = ~spec.z_supported
    if labels is None:
        labels = classify_regions(w, spec.rho_g)
    if spec.rho_g > 0.0:
        margin = float((1.0 / spec.rho_g - w[free]).min(initial=np.inf))
    else:
        margin = float("inf")
    return CriteriaReport(True, margin, np.flatnonzero(labels == COUNTERWEIGHT), compatibility)


def build_shell(result: SolveResult, z=None, samples_per_element=17, tol=ACCEPT) -> GridShell:
    """Assemble polylines, areas and lumped masses of an accepted solution."""
    if result.kind == LUMPED:
        raise ReconstructionError("the lumped formulation does not define a consistent shell")
    if not result.optimal:
        raise ReconstructionError(f"solution status is {result.status}")
    spec, gs = result.spec, result.gs
    s, qA, qB = _fields(result)
    w = result.dual["w"]
    floor = force_floor(spec)
    labels = classify_regions(w, spec.rho_g, pairs=gs.pairs, s=s, floor=floor)
    cw = labels == COUNTERWEIGHT
    if np.any(cw) and np.any(spec.loads[cw, :2] != 0.0):
        raise ReconstructionError("counterweight regions with in-plane loads are not supported")
    if z is None:
        z = elevations(w, spec.rho_g, spec.sigma)
    z = np.where(cw, 0.0, z)
    if not np.all(np.isfinite(z)):
        raise ReconstructionError("non-finite elevations outside counterweight regions")
    report = verify_compatibility(result, z, labels)
    if not report.ok(tol):
        raise ReconstructionError(f"compatibility residual {report.worst:.3e} exceeds {tol:g}")

    n = spec.n
    k = spec.rho_g / spec.sigma
    live = active_mask(s, floor)
    mass = np.zeros(n)
    # idle elements carry only (vanishing) lumped forces
    np.add.at(mass, gs.pairs[~live, 0], qA[~live])
    np.add.at(mass, gs.pairs[~live, 1], qB[~live])
    polylines, areas = [], []
    elements = np.flatnonzero(live)
    for e in elements:
        a, b = gs.pairs[e]
        l = gs.length[e]
        dz = z[b] - z[a]
        xd, zz = catenary.sample_centerline(z[a], z[b], l, k, s[e], samples_per_element)
        plan = gs.nodes[a] + np.outer(xd, gs.direction[e])
        polylines.append(np.column_stack([plan, zz]))
        if k > 0.0:
            tan_a, _ = catenary.end_tangents(l, dz, k)
            slopes = catenary.slope(xd, float(tan_a), k)
            _, _, xA, xB = catenary.decompose_lumped(s[e], qA[e], qB[e], gs.lbar[e],
                                                     kdz=k * dz, tol=tol)
            mass[a] += xA
            mass[b] += xB
        else:
            slopes = np.full(xd.shape, dz / l)
        areas.append(catenary.section_area(s[e], slopes, spec.sigma))
    mass[spec.z_supported] = 0.0
    crit = criteria(result, labels, report)
    return GridShell(spec.nodes.copy(), z, labels, elements, polylines, areas, mass,
                     float(result.volume), crit, w=w.copy(),
                     arbitrary_elevation=bool(np.any(cw)))
