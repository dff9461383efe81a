"""Builders for the standard demonstration problems (lengths in L, forces in F)."""

from __future__ import annotations

import numpy as np

from .geometry import FREE, PIN, ROLLER, SYM_X, SYM_XY, SYM_Y, Disk, ProblemSpec, build_grid

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def _on_edge(nodes, lo, hi, tol=1e-9):
    x, y = nodes[:, 0], nodes[:, 1]
    return ((np.abs(x - lo[0]) <= tol) | (np.abs(x - hi[0]) <= tol)
            | (np.abs(y - lo[1]) <= tol) | (np.abs(y - hi[1]) <= tol))


def barrel_vault(rho_g=0.0, sigma=1.0, span=1.0, rows=4, load=1.0, subdivisions=1):
    """Parallel one-way arches: pins at x = 0 and x = span, a load at each apex.

    ``subdivisions`` splits each half-span into that many equal segments
    (extra collinear nodes along every arch chord).
    """
    xs = np.linspace(0.0, span, 2 * subdivisions + 1)
    ys = np.arange(rows) * span / 3.0
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    supports = np.where((nodes[:, 0] == 0.0) | (nodes[:, 0] == span), PIN, FREE)
    loads = np.zeros((len(nodes), 3))
    apex = np.isclose(nodes[:, 0], 0.5 * span)
    loads[apex, 2] = -load
    return ProblemSpec(nodes, supports, loads, sigma, rho_g, name="barrel-vault")


def single_arch(rho_g=0.0, sigma=1.0, span=1.0, load=1.0):
    nodes = np.array([[0.0, 0.0], [0.5 * span, 0.0], [span, 0.0]])
    loads = np.zeros((3, 3))
    loads[1, 2] = -load
    return ProblemSpec(nodes, [PIN, FREE, PIN], loads, sigma, rho_g, name="single-arch")


def square_distributed(rho_g=0.0, sigma=1.0, divisions=10, total_load=1.0, upward=False):
    """Square with all edge nodes pinned and equal loads at interior nodes."""
    nodes = build_grid(UNIT_SQUARE, 1.0 / divisions)
    edge = _on_edge(nodes, (0.0, 0.0), (1.0, 1.0))
    supports = np.where(edge, PIN, FREE)
    loads = np.zeros((len(nodes), 3))
    per = total_load / np.count_nonzero(~edge)
    loads[~edge, 2] = per if upward else -per
    name = "square-upward" if upward else "square-distributed"
    return ProblemSpec(nodes, supports, loads, sigma, rho_g, name=name)


def square_point_load(rho_g=0.0, sigma=1.0, divisions=10, load=1.0):
    """Square grid pinned at its four corners with one central load."""
    nodes = build_grid(UNIT_SQUARE, 1.0 / divisions)
    corner = np.isin(np.round(nodes[:, 0], 9), (0.0, 1.0)) & np.isin(np.round(nodes[:, 1], 9), (0.0, 1.0))
    supports = np.where(corner, PIN, FREE)
    loads = np.zeros((len(nodes), 3))
    centre = np.argmin(np.hypot(nodes[:, 0] - 0.5, nodes[:, 1] - 0.5))
    loads[centre, 2] = -load
    return ProblemSpec(nodes, supports, loads, sigma, rho_g, name="square-point-load")


def five_node(rho_g=0.0, sigma=1.0, load=1.0):
    """Four pinned corners and a loaded centre node."""
    nodes = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
    loads = np.zeros((5, 3))
    loads[4, 2] = -load
    return ProblemSpec(nodes, [PIN] * 4 + [FREE], loads, sigma, rho_g, name="five-node")


def quarter_square(rho_g=1.0, sigma=1.0, divisions=5, total_load=1.0):
    """One quarter of the distributed-load square, cut along its symmetry lines.

    Nodes on x = 0 and y = 0 are pinned; nodes on the cut x = 0.5 (y = 0.5)
    are restrained normal to the cut.  Each quarter-domain node carries its
    share of ``total_load`` / 4, halved on the cut lines and quartered at the
    centre, so the volume is a quarter of the full-square optimum.
    """
    h = 0.5 / divisions
    nodes = build_grid([(0, 0), (0.5, 0), (0.5, 0.5), (0, 0.5)], h)
    x, y = nodes[:, 0], nodes[:, 1]
    pinned = (np.abs(x) <= 1e-9) | (np.abs(y) <= 1e-9)
    cut_x = np.abs(x - 0.5) <= 1e-9
    cut_y = np.abs(y - 0.5) <= 1e-9
    supports = np.where(pinned, PIN, np.where(cut_x & cut_y, SYM_XY,
                        np.where(cut_x, SYM_X, np.where(cut_y, SYM_Y, FREE))))
    per = total_load / (2 * divisions - 1) ** 2
    share = np.where(cut_x, 0.5, 1.0) * np.where(cut_y, 0.5, 1.0)
    loads = np.zeros((len(nodes), 3))
    loads[~pinned, 2] = -per * share[~pinned]
    return ProblemSpec(nodes, supports, loads, sigma, rho_g, name="quarter-square")


def two_hole(rho_g=0.5, sigma=1.0, total_load=1.0):
    """0.75 x 1 rectangle at L/40 spacing with two 0.15-radius holes.

    Outer boundary pinned, the ring of the hole at (0.5, 0.25) on vertical-only
    supports, the other ring free; equal downward loads on all free nodes.
    """
    holes = [Disk((0.5, 0.25), 0.15), Disk((0.25, 0.75), 0.15)]
    nodes = build_grid([(0, 0), (0.75, 0), (0.75, 1), (0, 1)], 1.0 / 40, holes, ring_count=32)
    outer = _on_edge(nodes, (0.0, 0.0), (0.75, 1.0))
    ring1 = np.abs(np.hypot(nodes[:, 0] - 0.5, nodes[:, 1] - 0.25) - 0.15) <= 1e-9
    supports = np.where(outer, PIN, np.where(ring1, ROLLER, FREE))
    loads = np.zeros((len(nodes), 3))
    free = supports == FREE
    loads[free, 2] = -total_load / np.count_nonzero(free)
    return ProblemSpec(nodes, supports, loads, sigma, rho_g, exclusions=holes, name="two-hole")


def crossing_arms(rho_g=0.5, sigma=1.0):
    """Small self-overlapping domain given by explicit nodes and elements.

    Two arms share the same plan area around (0.5, 0.5) but belong to
    different levels: the lower arm spans x, the upper arm spans y, and the
    two node sets are never connected to each other.
    """
    lower = [(0.0, 0.5), (0.25, 0.5), (0.5, 0.5), (0.75, 0.5), (1.0, 0.5)]
    upper = [(0.5, 0.0), (0.5, 0.25), (0.5, 0.5 + 1e-3), (0.5, 0.75), (0.5, 1.0)]
    nodes = np.array(lower + upper)
    supports = [PIN, FREE, FREE, FREE, PIN, PIN, FREE, FREE, FREE, PIN]
    loads = np.zeros((10, 3))
    loads[[1, 2, 3, 6, 7, 8], 2] = -1.0 / 6
    elements = []
    for base in (0, 5):
        for i in range(5):
            for j in range(i + 1, 5):
                elements.append((base + i, base + j))
    return ProblemSpec(nodes, supports, loads, sigma, rho_g, elements=np.array(elements),
                       name="crossing-arms")


BUILDERS = {
    "barrel-vault": barrel_vault,
    "single-arch": single_arch,
    "square-distributed": square_distributed,
    "square-upward": lambda **kw: square_distributed(upward=True, **kw),
    "square-point-load": square_point_load,
    "five-node": five_node,
    "quarter-square": quarter_square,
    "two-hole": two_hole,
    "crossing-arms": crossing_arms,
}
