"""Planar node grids and ground structures of potential elements."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FREE, PIN, ROLLER = "free", "pin_xyz", "roller_z"
# mirror-plane supports: sym_x restrains x (plane normal to x), and so on
SYM_X, SYM_Y, SYM_XY = "sym_x", "sym_y", "sym_xy"
SUPPORT_KINDS = (FREE, PIN, ROLLER, SYM_X, SYM_Y, SYM_XY)
RESTRAINTS = {
    FREE: (False, False, False),
    PIN: (True, True, True),
    ROLLER: (False, False, True),
    SYM_X: (True, False, False),
    SYM_Y: (False, True, False),
    SYM_XY: (True, True, False),
}
TOL = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    def to_dict(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    def to_dict(self):
        return {"type": "polygon", "vertices": [list(v) for v in self.vertices]}


def shape_from_dict(d):
    kind = d.get("type")
    if kind == "disk":
        return Disk(tuple(map(float, d["center"])), float(d["radius"]))
    if kind == "polygon":
        return Polygon(tuple(tuple(map(float, v)) for v in d["vertices"]))
    raise GeometryError(f"unknown exclusion shape {kind!r}")


@dataclass
class ProblemSpec:
    nodes: np.ndarray                      # (n, 2)
    supports: np.ndarray                   # (n,) of support kind strings
    loads: np.ndarray                      # (n, 3) fx, fy, fz; fz positive up
    sigma: float
    rho_g: float
    exclusions: list = field(default_factory=list)
    elements: np.ndarray | None = None     # optional explicit (m, 2) pairs
    name: str = ""

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        n = self.nodes.shape[0]
        self.supports = np.asarray(self.supports, dtype=object).reshape(-1)
        self.loads = np.asarray(self.loads, dtype=float).reshape(-1, 3)
        if self.elements is not None:
            self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, 2)
        if n == 0:
            raise GeometryError("problem has no nodes")
        if self.supports.size != n or self.loads.shape[0] != n:
            raise GeometryError("supports and loads must have one entry per node")
        bad = set(self.supports) - set(SUPPORT_KINDS)
        if bad:
            raise GeometryError(f"unknown support kinds {sorted(bad)}")
        if not self.sigma > 0.0:
            raise GeometryError("sigma must be positive")
        if not self.rho_g >= 0.0:
            raise GeometryError("rho_g must be nonnegative")
        if np.any(self.loads != 0.0) and not np.any(self.supports == PIN):
            raise GeometryError("a loaded problem needs at least one pin_xyz support")
        if self.elements is not None and self.elements.size:
            if self.elements.min() < 0 or self.elements.max() >= n:
                raise GeometryError("explicit element references a missing node")

    @property
    def n(self):
        return self.nodes.shape[0]

    @property
    def restrained(self):
        """(n, 3) flags: which of x, y, z is held by a support at each node."""
        return np.array([RESTRAINTS[k] for k in self.supports], dtype=bool).reshape(-1, 3)

    @property
    def z_supported(self):
        return self.restrained[:, 2]

    def with_rho_g(self, rho_g):
        return ProblemSpec(self.nodes, self.supports, self.loads, self.sigma, rho_g,
                           list(self.exclusions), self.elements, self.name)

    def scaled_material(self, factor):
        return ProblemSpec(self.nodes, self.supports, self.loads, self.sigma * factor,
                           self.rho_g * factor, list(self.exclusions), self.elements,
                           self.name)


@dataclass
class GroundStructure:
    nodes: np.ndarray        # (n, 2)
    pairs: np.ndarray        # (m, 2) node indices, A < B, sorted lexicographically
    k: float                 # rho_g / sigma

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        d = self.nodes[self.pairs[:, 1]] - self.nodes[self.pairs[:, 0]]
        self.length = np.hypot(d[:, 0], d[:, 1])
        self.phi = np.arctan2(d[:, 1], d[:, 0])
        self.direction = d / self.length[:, None] if len(d) else d
        self.lbar = self.k * self.length

    @property
    def m(self):
        return self.pairs.shape[0]

    @property
    def n(self):
        return self.nodes.shape[0]

    def subset(self, mask_or_index):
        return GroundStructure(self.nodes, self.pairs[mask_or_index], self.k)


# --------------------------------------------------------------------------- grids

def _points_in_polygon(pts, poly, tol=TOL):
    """Inside-or-on-boundary test for a simple polygon."""
    poly = np.asarray(poly, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    for (x1, y1), (x2, y2) in zip(poly, np.roll(poly, -1, axis=0)):
        ex, ey = x2 - x1, y2 - y1
        seg2 = ex * ex + ey * ey
        t = np.clip(((x - x1) * ex + (y - y1) * ey) / seg2, 0.0, 1.0)
        on_edge |= np.hypot(x - x1 - t * ex, y - y1 - t * ey) <= tol
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * ex / ey
        inside ^= crosses & (x < xint)
    return inside | on_edge


def ring_nodes(center, radius, count, offset=None):
    """``count`` equally spaced nodes on a circle, rotated by half a step by default."""
    if offset is None:
        offset = np.pi / count
    ang = offset + 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])


def build_grid(domain_polygon, spacing, holes=(), ring_count=0, ring_offset=None):
    """Regular grid inside ``domain_polygon`` with disk holes removed.

    Grid lines start at the polygon's lower-left bounding-box corner.  Nodes
    strictly inside a hole are dropped; with ``ring_count > 0`` that many
    equally spaced nodes are appended on each hole's circle.
    """
    if not spacing > 0.0:
        raise GeometryError("spacing must be positive")
    poly = np.asarray(domain_polygon, dtype=float)
    if poly.shape[0] < 3:
        raise GeometryError("domain polygon needs at least three vertices")
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    if np.any(hi - lo <= 0.0):
        raise GeometryError("degenerate domain polygon")
    counts = np.floor((hi - lo) / spacing + 1e-9).astype(int) + 1
    xs = lo[0] + spacing * np.arange(counts[0])
    ys = lo[1] + spacing * np.arange(counts[1])
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    scale = max(1.0, float(np.max(hi - lo)))
    pts = pts[_points_in_polygon(pts, poly, TOL * scale)]
    for h in holes:
        h = h if isinstance(h, Disk) else Disk(tuple(h[0]), float(h[1]))
        dist = np.hypot(pts[:, 0] - h.center[0], pts[:, 1] - h.center[1])
        pts = pts[dist >= h.radius - TOL * scale]
    if ring_count:
        rings = [ring_nodes(h.center if isinstance(h, Disk) else h[0],
                            h.radius if isinstance(h, Disk) else h[1],
                            ring_count, ring_offset) for h in holes]
        pts = np.vstack([pts] + rings)
    if len(pts) == 0:
        raise GeometryError("domain too small for the requested spacing")
    return pts


# --------------------------------------------------------------------------- filters

def _collinear_blocked(nodes, tol):
    """Boolean n x n matrix: True where a third node sits on the open segment."""
    n = len(nodes)
    blocked = np.zeros((n, n), dtype=bool)
    dmin = np.inf
    for i in range(n):
        d = np.hypot(*(nodes - nodes[i]).T)
        d[i] = np.inf
        dmin = min(dmin, d.min())
    dtheta = 4.0 * tol / dmin if np.isfinite(dmin) and dmin > 0 else tol
    for i in range(n):
        v = nodes - nodes[i]
        r = np.hypot(v[:, 0], v[:, 1])
        others = np.flatnonzero(np.arange(n) != i)
        theta = np.arctan2(v[others, 1], v[others, 0])
        order = np.argsort(theta, kind="stable")
        th = theta[order]
        idx = others[order]
        # cluster consecutive directions, merging across the +-pi seam
        new = np.empty(len(th), dtype=bool)
        if len(th) == 0:
            continue
        new[0] = True
        new[1:] = np.diff(th) > dtheta
        cluster = np.cumsum(new) - 1
        if len(th) > 1 and cluster[-1] > 0 and th[0] + 2 * np.pi - th[-1] <= dtheta:
            cluster[cluster == cluster[-1]] = 0
        # blocker candidate: the nearest node of each direction cluster
        order2 = np.lexsort((r[idx], cluster))
        idx, cluster = idx[order2], cluster[order2]
        first = np.ones(len(idx), dtype=bool)
        first[1:] = cluster[1:] != cluster[:-1]
        head = np.maximum.accumulate(np.where(first, np.arange(len(idx)), 0))
        cand = ~first
        if not cand.any():
            continue
        far = v[idx[cand]]
        near = v[idx[head[cand]]]
        rf = r[idx[cand]]
        cross = np.abs(far[:, 0] * near[:, 1] - far[:, 1] * near[:, 0]) / rf
        proj = np.einsum("ij,ij->i", far, near) / rf
        hit = (cross <= tol) & (proj > tol) & (proj < rf - tol)
        blocked[i, idx[cand][hit]] = True
    return blocked


def _segment_point_distance(a, b, p):
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    q = a + t[:, None] * d
    return np.hypot(*(p - q).T)


def _crosses_disk(a, b, disk, nodes_on_ring, pair_idx, tol):
    c = np.broadcast_to(np.asarray(disk.center, dtype=float), a.shape)
    hit = _segment_point_distance(a, b, c) < disk.radius - tol
    if nodes_on_ring is not None and len(nodes_on_ring) > 1:
        # chords between angularly adjacent boundary nodes stay admissible
        ring_ids, ring_pos = nodes_on_ring
        pos = np.full(pair_idx.max() + 1, -1)
        pos[ring_ids] = ring_pos
        pa, pb = pos[pair_idx[:, 0]], pos[pair_idx[:, 1]]
        cnt = len(ring_ids)
        adjacent = (pa >= 0) & (pb >= 0) & (((pa - pb) % cnt == 1) | ((pb - pa) % cnt == 1))
        hit &= ~adjacent
    return hit


def _ring_of(nodes, disk, tol):
    d = np.hypot(nodes[:, 0] - disk.center[0], nodes[:, 1] - disk.center[1])
    ids = np.flatnonzero(np.abs(d - disk.radius) <= max(tol, 1e-7 * disk.radius))
    if ids.size < 2:
        return None
    ang = np.arctan2(nodes[ids, 1] - disk.center[1], nodes[ids, 0] - disk.center[0])
    order = np.argsort(ang)
    pos = np.empty(ids.size, dtype=int)
    pos[order] = np.arange(ids.size)
    return ids, pos


def _orient(a, b, p):
    return (b[:, 0] - a[:, 0]) * (p[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[:, 0] - a[:, 0])


def _crosses_polygon(a, b, poly, tol):
    poly = np.asarray(poly.vertices, dtype=float)
    hit = np.zeros(len(a), dtype=bool)
    for p1, p2 in zip(poly, np.roll(poly, -1, axis=0)):
        P1 = np.broadcast_to(p1, a.shape)
        P2 = np.broadcast_to(p2, a.shape)
        o1, o2 = _orient(a, b, P1), _orient(a, b, P2)
        o3, o4 = _orient(P1, P2, a), _orient(P1, P2, b)
        hit |= (o1 * o2 < -tol) & (o3 * o4 < -tol)
    # segments lying inside without crossing an edge
    for t in (0.25, 0.5, 0.75):
        p = a + t * (b - a)
        hit |= _points_in_polygon(p, poly, 0.0) & (_boundary_distance(p, poly) > tol)
    return hit


def _boundary_distance(p, poly):
    best = np.full(len(p), np.inf)
    for p1, p2 in zip(poly, np.roll(poly, -1, axis=0)):
        A = np.broadcast_to(p1, p.shape)
        B = np.broadcast_to(p2, p.shape)
        best = np.minimum(best, _segment_point_distance(A, B, p))
    return best


def generate_ground_structure(spec: ProblemSpec, connectivity="full", collinear=True):
    """Potential elements for ``spec``.

    connectivity: ``full`` (all pairs), ``adjacent`` (8-neighbour grid links,
    see :func:`adjacent_pairs`) or ``explicit`` (``spec.elements``).
    Filters: zero length, duplicates, length >= pi*sigma/rho_g, a third node
    on the open segment (``collinear``), crossing an exclusion region.
    """
    nodes = spec.nodes
    n = spec.n
    scale = max(1.0, float(np.ptp(nodes, axis=0).max()))
    tol = TOL * scale
    if connectivity == "explicit":
        if spec.elements is None:
            raise GeometryError("explicit connectivity requires an element list")
        pairs = np.sort(spec.elements, axis=1)
    elif connectivity == "full":
        i, j = np.triu_indices(n, k=1)
        pairs = np.column_stack([i, j])
    elif connectivity == "adjacent":
        pairs = adjacent_pairs(nodes)
    else:
        raise GeometryError(f"unknown connectivity {connectivity!r}")
    pairs = np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)
    a, b = nodes[pairs[:, 0]], nodes[pairs[:, 1]]
    length = np.hypot(*(b - a).T)
    keep = (pairs[:, 0] != pairs[:, 1]) & (length > tol)
    k = spec.rho_g / spec.sigma
    if k > 0.0:
        keep &= k * length < np.pi
    if collinear and connectivity != "explicit":
        blocked = _collinear_blocked(nodes, tol)
        keep &= ~(blocked[pairs[:, 0], pairs[:, 1]] | blocked[pairs[:, 1], pairs[:, 0]])
    for shape in spec.exclusions:
        if isinstance(shape, Disk):
            ring = _ring_of(nodes, shape, tol)
            keep &= ~_crosses_disk(a, b, shape, ring, pairs, tol)
        else:
            keep &= ~_crosses_polygon(a, b, shape, tol)
    pairs = pairs[keep]
    if len(pairs) == 0:
        raise GeometryError("ground structure is empty after filtering")
    return GroundStructure(nodes, pairs, k)


def adjacent_pairs(nodes, factor=1.5):
    """Links between nodes closer than ``factor`` times the median nearest spacing
    times sqrt(2): on a square grid these are the 8-neighbour connections."""
    from scipy.spatial import cKDTree

    tree = cKDTree(nodes)
    d, _ = tree.query(nodes, k=2)
    h = float(np.median(d[:, 1]))
    pairs = np.array(sorted(tree.query_pairs(h * np.sqrt(2.0) * (1.0 + 1e-6))), dtype=np.int64)
    return pairs.reshape(-1, 2)


# --------------------------------------------------------------------------- restrictions

def restrict_topology(gs: GroundStructure, pattern, keep=None):
    """Subset of ``gs``.

    pattern ``archgrid``: axis-aligned elements only.  ``diagonals``: elements
    along the two main diagonals of the node bounding box plus axis-aligned
    elements perpendicular to the bounding-box edge nearest their midpoint.
    ``list``: the node pairs given in ``keep``.
    """
    tol = 1e-9
    d = gs.direction
    axis_x = np.abs(d[:, 1]) <= tol
    axis_y = np.abs(d[:, 0]) <= tol
    if pattern == "archgrid":
        mask = axis_x | axis_y
    elif pattern == "diagonals":
        lo, hi = gs.nodes.min(axis=0), gs.nodes.max(axis=0)
        span = hi - lo
        rel = (gs.nodes - lo) / span
        a, b = gs.pairs[:, 0], gs.pairs[:, 1]
        on_d1 = (np.abs(rel[a, 0] - rel[a, 1]) <= tol) & (np.abs(rel[b, 0] - rel[b, 1]) <= tol)
        on_d2 = (np.abs(rel[a, 0] + rel[a, 1] - 1) <= tol) & (np.abs(rel[b, 0] + rel[b, 1] - 1) <= tol)
        mid = 0.5 * (rel[a] + rel[b])
        dx = np.minimum(mid[:, 0], 1 - mid[:, 0])
        dy = np.minimum(mid[:, 1], 1 - mid[:, 1])
        mask = on_d1 | on_d2 | (axis_x & (dx <= dy + tol)) | (axis_y & (dy <= dx + tol))
    elif pattern == "list":
        if keep is None:
            raise GeometryError("list restriction needs node pairs")
        want = {tuple(sorted(map(int, p))) for p in keep}
        mask = np.array([tuple(p) in want for p in gs.pairs.tolist()], dtype=bool)
    else:
        raise GeometryError(f"unknown topology pattern {pattern!r}")
    if not mask.any():
        raise GeometryError("topology restriction leaves no elements")
    return gs.subset(mask)
