import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import solved
from gridshell import problems
from gridshell.geometry import generate_ground_structure
from gridshell.memberadd import (THRESHOLD, MemberAddingError, candidate_multipliers,
                                 initial_set, optimize_adaptive, price, straight_ratio,
                                 violation)
from gridshell.reconstruct import active_mask, force_floor

SQ2 = np.sqrt(2.0)


def test_violation_examples():
    assert violation(1.0, 1.0, -SQ2) == pytest.approx(1.0)
    assert violation(1.0, 1.0, -2.0) == pytest.approx(2.0)
    assert violation(1.0, 1.0, 3.0) == 0.0
    assert violation(0.0, 1.0, -1.0) == np.inf
    assert violation(-1.0, -1.0, -1.0) == np.inf
    # the cone apex is on the boundary, not outside it
    assert violation(0.0, 1.0, 0.0) == 1.0
    assert violation(0.0, 0.0, -1e-17) == 1.0


def test_counterweight_duals_price_finitely():
    spec, gs, res = solved("square-upward", 20.0)
    ratio = price(res, gs)
    assert np.all(np.isfinite(ratio))
    assert ratio.max() <= 1.0 + 1e-6


def test_zero_duals_never_violate():
    spec = problems.square_point_load(rho_g=1.8, divisions=4)
    gs = generate_ground_structure(spec)
    zero_u, zero_w = np.zeros((spec.n, 2)), np.zeros(spec.n)
    assert np.all(violation(*candidate_multipliers(gs, zero_u, zero_w, 1.8)) < 1.0)
    assert np.all(straight_ratio(gs, zero_u, zero_w, 1.0) <= 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.2, 3.0))
def test_candidates_satisfy_dual_equalities(seed, rho_g):
    spec = problems.square_point_load(rho_g=rho_g, divisions=3)
    gs = generate_ground_structure(spec)
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(spec.n, 2))
    w = rng.normal(size=spec.n)
    g1, g2, g3 = candidate_multipliers(gs, u, w, rho_g)
    a, b = gs.pairs[:, 0], gs.pairs[:, 1]
    sl, cl = np.sin(gs.lbar), np.cos(gs.lbar)
    du = np.einsum("ij,ij->i", u[a] - u[b], gs.direction)
    assert sl * g1 == pytest.approx(1.0 / rho_g - w[a])
    assert sl * g2 == pytest.approx(1.0 / rho_g - w[b])
    assert cl * (g1 + g2) + SQ2 * g3 + du == pytest.approx(np.zeros(gs.m), abs=1e-9)


@pytest.mark.parametrize("name,rho", [("square-point-load", 1.8), ("square-distributed", 2.0)])
def test_active_elements_sit_on_the_cone_boundary(name, rho):
    spec, gs, res = solved(name, rho)
    g1, g2, g3 = candidate_multipliers(gs, res.dual["u"], res.dual["w"], rho)
    live = active_mask(res.primal["s"], force_floor(spec))
    assert np.abs(2 * g1[live] * g2[live] - g3[live] ** 2).max() <= 1e-8 * np.abs(g3[live] ** 2).max()
    # and they equal the duals the solver attached to the cone
    g = res.dual["g"]
    assert g[live, 0] == pytest.approx(g1[live], rel=1e-7)
    assert g[live, 1] == pytest.approx(g2[live], rel=1e-7)
    assert g[live, 2] == pytest.approx(g3[live], rel=1e-7)


@pytest.mark.parametrize("name,rho", [("square-point-load", 1.8), ("square-distributed", 2.0),
                                      ("barrel-vault", 0.0), ("square-distributed", 0.0)])
def test_full_optimum_certifies_itself(name, rho):
    spec, gs, res = solved(name, rho)
    ratio = price(res, gs)
    assert ratio.max() <= 1.0 + 1e-6
    live = active_mask(res.primal["s"], force_floor(spec))
    assert ratio[live] == pytest.approx(np.ones(live.sum()), abs=1e-6)


def test_initial_set_contents():
    spec = problems.square_point_load(rho_g=1.8)
    gs = generate_ground_structure(spec)
    init = initial_set(spec, gs)
    pairs = gs.pairs[init]
    held = spec.restrained.any(axis=1)
    short = gs.length[init] <= 0.1 * np.sqrt(2) + 1e-9
    assert np.all(short | held[pairs[:, 0]] | held[pairs[:, 1]])
    assert init.size < gs.m


@pytest.mark.parametrize("name,rho", [("square-point-load", 1.8), ("square-distributed", 2.0),
                                      ("square-distributed", 0.0)])
def test_adaptive_matches_full_solve(name, rho, caplog):
    spec, gs, full = solved(name, rho)
    with caplog.at_level(logging.INFO, logger="gridshell.memberadd"):
        ad = optimize_adaptive(spec, gs)
    assert ad.state.certified
    assert ad.certificate["max_ratio"] <= THRESHOLD
    assert ad.volume == pytest.approx(full.volume, rel=1e-6)
    assert ad.state.iteration < 20
    assert ad.state.active.size < gs.m
    assert [h["iter"] for h in ad.state.history] == list(range(1, len(ad.state.history) + 1))
    assert any("max_ratio=" in r.getMessage() for r in caplog.records)


def test_full_initial_set_stops_after_one_round():
    spec, gs, full = solved("square-point-load", 1.65)
    ad = optimize_adaptive(spec, gs, initial=np.arange(gs.m))
    assert ad.state.iteration == 1
    assert ad.volume == pytest.approx(full.volume, rel=1e-9)


def test_infeasible_start_densifies():
    # a single perimeter bar cannot reach the loaded centre node
    spec, gs, full = solved("five-node", 2.0)
    start = [int(np.flatnonzero((gs.pairs[:, 0] == 0) & (gs.pairs[:, 1] == 1))[0])]
    ad = optimize_adaptive(spec, gs, initial=start)
    assert ad.volume == pytest.approx(full.volume, rel=1e-6)
    assert ad.state.certified


def test_empty_structure_is_an_error():
    spec, gs, _ = solved("five-node", 2.0)
    with pytest.raises(MemberAddingError):
        optimize_adaptive(spec, gs.subset(np.zeros(gs.m, dtype=bool)))
