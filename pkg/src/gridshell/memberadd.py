"""Member adding: grow a small ground structure until no left-out element pays off.

Each round solves the program on the active elements, prices every inactive
element of the full structure from the virtual displacements ``(u, w)`` and
adds the worst violators.  Once nothing violates, the incumbent is optimal for
the full structure by strong duality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assembly import LUMPED, SELFWEIGHT, SolveResult, solve_problem
from .geometry import GroundStructure, ProblemSpec, adjacent_pairs

log = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
THRESHOLD = 1.0 + 1e-9


class MemberAddingError(RuntimeError):
    pass


def _extension(gs: GroundStructure, u):
    a, b = gs.pairs[:, 0], gs.pairs[:, 1]
    return np.einsum("ij,ij->i", u[a] - u[b], gs.direction)


def candidate_multipliers(gs: GroundStructure, u, w, rho_g):
    """Cone multipliers ``(g1, g2, g3)`` each element would need at ``(u, w)``.

    ``g3`` takes the orthant slack of ``s`` as zero.
    """
    lb = gs.lbar
    sl, cl = np.sin(lb), np.cos(lb)
    a, b = gs.pairs[:, 0], gs.pairs[:, 1]
    g1 = (1.0 / rho_g - w[a]) / sl
    g2 = (1.0 / rho_g - w[b]) / sl
    g3 = -(_extension(gs, u) + cl * (g1 + g2)) / SQRT2
    return g1, g2, g3


def _cone_ratio(x, y, z, rel=1e-12):
    """``z**2 / (2 x y)`` for the rotated cone ``2 x y >= z**2``.

    Points at the apex (``x`` or ``y`` and ``z`` all within round-off of zero)
    are on the boundary and read 1; anything else with ``x`` or ``y``
    nonpositive is outside and reads ``inf``.
    """
    scale = max(1.0, float(np.max(np.abs(np.concatenate([np.ravel(x), np.ravel(y),
                                                          np.ravel(z)])), initial=0.0)))
    tiny = rel * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((x > tiny) & (y > tiny), z * z / (2.0 * x * y), np.inf)
    apex = (x >= -tiny) & (y >= -tiny) & (np.minimum(x, y) <= tiny) & (np.abs(z) <= tiny)
    return np.where(apex, np.minimum(ratio, 1.0), ratio)


def violation(g1, g2, g3):
    """``g3**2 / (2 g1 g2)``; above 1 the element would lower the volume.

    A positive ``g3`` is pulled to zero by the slack on ``s >= 0``, so it never
    violates.  Nonpositive ``g1`` or ``g2`` gives ``inf`` unless ``g3`` vanishes.
    """
    g1, g2, g3 = (np.asarray(v, dtype=float) for v in (g1, g2, g3))
    return _cone_ratio(g1, g2, np.minimum(g3, 0.0))


def straight_ratio(gs: GroundStructure, u, w, sigma, rho_g=0.0, lumped=False):
    """Violation ratio for bar elements (weightless and lumped programs)."""
    a, b = gs.pairs[:, 0], gs.pairs[:, 1]
    cost = gs.length / sigma
    if lumped:
        cost = cost - 0.5 * gs.length * rho_g / sigma * (w[a] + w[b])
    zs = cost - _extension(gs, u)
    zp = (w[a] - w[b]) / SQRT2
    return _cone_ratio(zs, cost, zp)


def price(result: SolveResult, gs_full: GroundStructure):
    """Violation ratio of every element of ``gs_full`` at the incumbent duals."""
    spec = result.spec
    u, w = result.dual["u"], result.dual["w"]
    if result.kind == SELFWEIGHT:
        return violation(*candidate_multipliers(gs_full, u, w, spec.rho_g))
    return straight_ratio(gs_full, u, w, spec.sigma, spec.rho_g, result.kind == LUMPED)


@dataclass
class AdaptiveState:
    active: np.ndarray                       # indices into the full structure
    iteration: int = 0
    history: list = field(default_factory=list)   # dicts: iter, active, max_ratio, volume
    incumbent: SolveResult | None = None
    max_ratio: float = float("inf")

    @property
    def certified(self):
        return self.max_ratio <= THRESHOLD


@dataclass
class AdaptiveResult:
    result: SolveResult
    state: AdaptiveState
    gs_full: GroundStructure

    @property
    def volume(self):
        return self.result.volume

    @property
    def certificate(self):
        return {"max_ratio": self.state.max_ratio, "threshold": THRESHOLD,
                "iterations": self.state.iteration}


def initial_set(spec: ProblemSpec, gs_full: GroundStructure):
    """8-neighbour links plus every element touching a support."""
    near = adjacent_pairs(spec.nodes)
    near = {tuple(p) for p in np.sort(near, axis=1).tolist()}
    mask = np.array([tuple(p) in near for p in gs_full.pairs.tolist()], dtype=bool)
    held = spec.restrained.any(axis=1)
    mask |= held[gs_full.pairs[:, 0]] | held[gs_full.pairs[:, 1]]
    return np.flatnonzero(mask)


def optimize_adaptive(spec: ProblemSpec, gs_full: GroundStructure, formulation="auto",
                      initial=None, add_fraction=0.1, cap=100, max_rounds=100,
                      backend=None, tol=1e-8):
    """Full-structure optimum by member adding.

    Each round adds at most ``max(cap, add_fraction * active)`` violators, the
    worst first.  If the first sub-problem is infeasible the initial set is
    densified once with the complete structure.
    """
    if gs_full.m == 0:
        raise MemberAddingError("empty ground structure")
    active = np.asarray(initial_set(spec, gs_full) if initial is None else initial, dtype=int)
    if active.size == 0:
        active = np.arange(gs_full.m)
    state = AdaptiveState(np.unique(active))
    densified = False
    while True:
        state.iteration += 1
        res = solve_problem(spec, gs_full.subset(state.active), formulation, backend, tol)
        if not res.optimal:
            if state.iteration == 1 and not densified and state.active.size < gs_full.m:
                log.info("initial set gives %s; densifying", res.status)
                densified = True
                state.active = np.arange(gs_full.m)
                state.iteration = 0
                continue
            raise MemberAddingError(f"sub-problem ended with status {res.status}")
        ratio = price(res, gs_full)
        ratio[state.active] = 0.0
        state.max_ratio = float(ratio.max())
        state.incumbent = res
        state.history.append({"iter": state.iteration, "active": int(state.active.size),
                              "max_ratio": state.max_ratio, "volume": res.volume})
        log.info("iter=%d active=%d max_ratio=%.9g volume=%.10g", state.iteration,
                 state.active.size, state.max_ratio, res.volume)
        if state.certified:
            break
        if state.iteration >= max_rounds:
            raise MemberAddingError(f"no certificate after {max_rounds} rounds")
        bad = np.flatnonzero(ratio > THRESHOLD)
        quota = max(cap, int(add_fraction * state.active.size))
        worst = bad[np.argsort(-ratio[bad], kind="stable")[:quota]]
        state.active = np.union1d(state.active, worst)
    return AdaptiveResult(state.incumbent, state, gs_full)
