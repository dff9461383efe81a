import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridshell import problems
from gridshell.geometry import (PIN, Disk, GeometryError, ProblemSpec, adjacent_pairs,
                                build_grid, generate_ground_structure, restrict_topology)

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def brute_pairs(nodes, tol=1e-9):
    """Every pair with no third node on the open segment, by direct incidence tests."""
    out = []
    for i, j in itertools.combinations(range(len(nodes)), 2):
        a, b = nodes[i], nodes[j]
        d = b - a
        L = np.hypot(*d)
        if L <= tol:
            continue
        blocked = False
        for k in range(len(nodes)):
            if k in (i, j):
                continue
            p = nodes[k] - a
            cross = abs(d[0] * p[1] - d[1] * p[0]) / L
            t = (d @ p) / L
            if cross <= tol and tol < t < L - tol:
                blocked = True
                break
        if not blocked:
            out.append((i, j))
    return out


def spec_for(nodes, rho_g=0.0, exclusions=()):
    n = len(nodes)
    supports = [PIN] + ["free"] * (n - 1)
    return ProblemSpec(nodes, supports, np.zeros((n, 3)), 1.0, rho_g, list(exclusions))


# --------------------------------------------------------------------------- grids

def test_unit_square_grid_counts():
    assert len(build_grid(SQUARE, 0.1)) == 121
    corners = build_grid(SQUARE, 1.0)
    assert len(corners) == 4
    assert {tuple(p) for p in corners} == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)}


def test_two_hole_node_count():
    spec = problems.two_hole()
    assert spec.n == 1117


def test_grid_errors():
    with pytest.raises(GeometryError):
        build_grid(SQUARE, 0.0)
    with pytest.raises(GeometryError):
        build_grid([(0, 0), (1, 0)], 0.1)
    with pytest.raises(GeometryError):
        build_grid(SQUARE, 0.1, holes=[Disk((0.5, 0.5), 2.0)])


# --------------------------------------------------------------------------- ground structures

def test_square_grid_matches_brute_force():
    nodes = build_grid(SQUARE, 0.1)
    gs = generate_ground_structure(spec_for(nodes))
    want = brute_pairs(nodes)
    assert len(want) < 7260
    assert sorted(map(tuple, gs.pairs.tolist())) == want
    assert gs.m == lattice_pair_count(11) == 4492


def lattice_pair_count(N):
    """On an N x N lattice a pair is unblocked iff gcd(|dx|, |dy|) = 1."""
    from math import gcd
    total = 0
    for dx in range(-(N - 1), N):
        for dy in range(N):
            if (dy > 0 or dx > 0) and gcd(abs(dx), dy) == 1:
                total += (N - abs(dx)) * (N - dy)
    return total


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(0, 10_000))
def test_random_lattice_subsets_match_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    lattice = np.array([(i, j) for i in range(7) for j in range(7)], dtype=float) / 6.0
    nodes = lattice[rng.choice(len(lattice), size=n, replace=False)]
    gs = generate_ground_structure(spec_for(nodes))
    assert sorted(map(tuple, gs.pairs.tolist())) == brute_pairs(nodes)


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 30), st.integers(0, 10_000))
def test_filtering_is_order_independent(n, seed):
    rng = np.random.default_rng(seed)
    lattice = np.array([(i, j) for i in range(6) for j in range(6)], dtype=float) / 5.0
    nodes = lattice[rng.choice(len(lattice), size=n, replace=False)]
    perm = rng.permutation(n)
    a = generate_ground_structure(spec_for(nodes, rho_g=3.0))
    b = generate_ground_structure(spec_for(nodes[perm], rho_g=3.0))
    back = {tuple(sorted((int(perm[i]), int(perm[j])))) for i, j in b.pairs.tolist()}
    assert back == set(map(tuple, a.pairs.tolist()))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 8.0), st.integers(0, 10_000))
def test_length_filter(rho_g, seed):
    nodes = np.random.default_rng(seed).uniform(0, 1, (25, 2))
    try:
        gs = generate_ground_structure(spec_for(nodes, rho_g=rho_g))
    except GeometryError:
        return
    assert np.all(gs.lbar < np.pi)
    full = generate_ground_structure(spec_for(nodes))
    expect = np.count_nonzero(rho_g * full.length < np.pi) if rho_g else full.m
    assert gs.m == expect


def test_length_filter_boundary_is_exclusive():
    nodes = np.array([[0.0, 0.0], [0.5, 0.0]])
    with pytest.raises(GeometryError):
        generate_ground_structure(spec_for(nodes, rho_g=2 * np.pi))
    assert generate_ground_structure(spec_for(nodes, rho_g=2 * np.pi - 1e-9)).m == 1


def test_pairs_sorted_and_unique():
    gs = generate_ground_structure(problems.square_point_load(rho_g=1.0))
    p = gs.pairs
    assert np.all(p[:, 0] < p[:, 1])
    assert len(np.unique(p, axis=0)) == gs.m


def test_explicit_connectivity():
    spec = problems.crossing_arms()
    gs = generate_ground_structure(spec, "explicit")
    assert gs.m == 20
    # no element joins the two levels
    assert not np.any((gs.pairs[:, 0] < 5) & (gs.pairs[:, 1] >= 5))


def test_disk_exclusion():
    nodes = np.array([[0.0, 0.5], [1.0, 0.5], [0.0, 0.0], [1.0, 0.0]])
    gs = generate_ground_structure(spec_for(nodes, exclusions=[Disk((0.5, 0.5), 0.2)]))
    assert (0, 1) not in set(map(tuple, gs.pairs.tolist()))
    assert (2, 3) in set(map(tuple, gs.pairs.tolist()))


def test_adjacent_pairs_on_grid():
    nodes = build_grid(SQUARE, 0.25)
    # 5x5 grid: 2*5*4 axis links plus 2*4*4 diagonals
    assert len(adjacent_pairs(nodes)) == 40 + 32


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="grid and ring layout gives 228,304 elements; see notes")
def test_two_hole_element_count():
    gs = generate_ground_structure(problems.two_hole())
    assert gs.m == 258_856


@pytest.mark.slow
def test_two_hole_no_element_crosses_a_hole():
    spec = problems.two_hole()
    gs = generate_ground_structure(spec)
    a, b = spec.nodes[gs.pairs[:, 0]], spec.nodes[gs.pairs[:, 1]]
    for disk in spec.exclusions:
        c = np.asarray(disk.center)
        d = b - a
        t = np.clip(np.einsum("ij,ij->i", c - a, d) / np.einsum("ij,ij->i", d, d), 0, 1)
        dist = np.hypot(*(a + t[:, None] * d - c).T)
        # ring chords cut the circle by at most the sagitta of one ring step
        sag = disk.radius * (1 - np.cos(np.pi / 32))
        assert dist.min() >= disk.radius - sag - 1e-9


# --------------------------------------------------------------------------- restrictions

def test_archgrid_is_axis_aligned():
    gs = generate_ground_structure(problems.square_distributed(rho_g=2.0))
    arch = restrict_topology(gs, "archgrid")
    phi = np.mod(arch.phi, np.pi)
    assert np.all(np.isclose(phi, 0.0) | np.isclose(phi, np.pi / 2))
    # every axis-aligned neighbour link survives
    assert arch.m == 2 * 11 * 10


def test_diagonals_pattern():
    gs = generate_ground_structure(problems.square_distributed(rho_g=2.0))
    diag = restrict_topology(gs, "diagonals")
    phi = np.mod(diag.phi, np.pi)
    on_axis = np.isclose(phi, 0.0) | np.isclose(phi, np.pi / 2)
    on_diag = np.isclose(phi, np.pi / 4) | np.isclose(phi, 3 * np.pi / 4)
    assert np.all(on_axis | on_diag)
    rel = gs.nodes
    a, b = diag.pairs[:, 0], diag.pairs[:, 1]
    main = (np.isclose(rel[a, 0], rel[a, 1]) & np.isclose(rel[b, 0], rel[b, 1])) | \
           (np.isclose(rel[a, 0] + rel[a, 1], 1) & np.isclose(rel[b, 0] + rel[b, 1], 1))
    assert np.all(main[on_diag])
    assert np.count_nonzero(on_diag) == 20
    # horizontal members only where the nearest edge is a vertical one
    mid = 0.5 * (rel[a] + rel[b])
    dx = np.minimum(mid[:, 0], 1 - mid[:, 0])
    dy = np.minimum(mid[:, 1], 1 - mid[:, 1])
    horiz = np.isclose(phi, 0.0)
    assert np.all(dx[horiz] <= dy[horiz] + 1e-9)


def test_five_node_keep_list():
    five = problems.five_node(rho_g=2.0)
    gs = generate_ground_structure(five)
    # 10 pairs; the two corner diagonals pass through the centre node
    assert gs.m == 8
    spokes = [(i, 4) for i in range(4)]
    sub = restrict_topology(gs, "list", spokes)
    assert sorted(map(tuple, sub.pairs.tolist())) == spokes


def test_restriction_errors():
    gs = generate_ground_structure(problems.five_node())
    with pytest.raises(GeometryError):
        restrict_topology(gs, "list", [(0, 4), (1, 3)][1:2])
    with pytest.raises(GeometryError):
        restrict_topology(gs, "spiral")
    with pytest.raises(GeometryError):
        restrict_topology(gs, "list")


def test_spec_validation():
    with pytest.raises(GeometryError):
        ProblemSpec(np.zeros((0, 2)), [], np.zeros((0, 3)), 1.0, 0.0)
    with pytest.raises(GeometryError):
        ProblemSpec([[0, 0]], ["free"], [[0, 0, -1]], 1.0, 0.0)
    with pytest.raises(GeometryError):
        ProblemSpec([[0, 0]], ["glued"], [[0, 0, 0]], 1.0, 0.0)
    with pytest.raises(GeometryError):
        ProblemSpec([[0, 0]], [PIN], [[0, 0, 0]], 0.0, 0.0)
