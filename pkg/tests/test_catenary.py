import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from gridshell import catenary as cat

finite = dict(allow_nan=False, allow_infinity=False)
lengths = st.floats(0.05, 3.0, **finite)
rises = st.floats(-1.0, 1.0, **finite)


@st.composite
def element(draw):
    l = draw(lengths)
    k = draw(st.floats(0.01, 0.95, **finite)) * np.pi / l
    # rise measured against the span keeps |k dz| < pi
    return l, draw(rises) * l, k


# --------------------------------------------------------------------------- oracles

def _shoot(l, dz, k):
    """End slopes by integrating the arch ODE z'' = -k (1 + z'^2) and shooting on z'(0)."""
    def run(p):
        return solve_ivp(lambda x, y: [y[1], -k * (1 + y[1] ** 2)], (0, l), [0.0, p],
                         rtol=1e-12, atol=1e-12)
    p = brentq(lambda p: run(p).y[0, -1] - dz, -5.0, 20.0, xtol=1e-14)
    return p, run(p).y[1, -1]


def test_end_tangents_match_shooting_oracle():
    ta, tb = cat.end_tangents(1.0, 0.5, 1.0)
    pa, pb = _shoot(1.0, 0.5, 1.0)
    assert ta == pytest.approx(pa, abs=1e-8)
    assert tb == pytest.approx(pb, abs=1e-8)


def test_symmetric_arch_tangents():
    ta, tb = cat.end_tangents(1.0, 0.0, 1.0)
    assert ta == pytest.approx(np.tan(0.5))
    assert tb == pytest.approx(-np.tan(0.5))


def test_leg_volume_against_area_quadrature():
    # s = 1, kl = 1, l = 1, rho_g = sigma = 1
    v = cat.volume_from_geometry(1.0, 1.0, 0.0, 1.0, 1.0)
    assert v == pytest.approx(2 * np.tan(0.5), rel=1e-12)
    ta, _ = cat.end_tangents(1.0, 0.0, 1.0)

    def area_ds(x):
        t = cat.slope(x, ta, 1.0)
        return cat.section_area(1.0, t, 1.0) * np.sqrt(1 + t * t)
    assert quad(area_ds, 0, 1, epsabs=1e-13)[0] == pytest.approx(1.092605, abs=1e-6)
    assert quad(area_ds, 0, 1, epsabs=1e-13)[0] == pytest.approx(v, rel=1e-10)


def test_midpoint_sag_above_chord():
    l, k = 1.0, 1.2
    xd, z = cat.sample_centerline(0.0, 0.0, l, k, n_samples=17)
    sag = -np.log(np.cos(0.5 * k * l)) / k
    assert z[8] == pytest.approx(sag, rel=1e-12)
    assert np.all(z[1:-1] > 0.0)


def test_element_volume_examples():
    assert cat.element_volume(0.0, 0.0, 3.0) == 0.0
    assert cat.element_volume(0.5, 0.5, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cat.element_volume(-1.0, 0.0, 1.0)


def test_domain_errors():
    with pytest.raises(cat.DomainError):
        cat.end_tangents(1.0, 0.0, np.pi)
    with pytest.raises(ValueError):
        cat.coupling_forces(-1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        cat.sample_centerline(0, 0, 1, 1, n_samples=1)


def test_product_identity_example():
    s, l, dz, k = 2.0, 1.0, -0.3, 0.8
    qa, qb = cat.coupling_forces(s, l, dz, k)
    t1, t2 = cat.cone_factors(s, qa, qb, k * l)
    assert t1 * t2 == pytest.approx(s * s, rel=1e-13)


# --------------------------------------------------------------------------- properties

@settings(max_examples=300, deadline=None)
@given(element())
def test_antisymmetry(e):
    l, dz, k = e
    ta, tb = cat.end_tangents(l, dz, k)
    ra, rb = cat.end_tangents(l, -dz, k)
    # walking the element from B to A swaps and negates the slopes
    assert ra == pytest.approx(-tb, rel=1e-9, abs=1e-12)
    assert rb == pytest.approx(-ta, rel=1e-9, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(element(), st.floats(1e-3, 1e3, **finite))
def test_product_identity(e, s):
    l, dz, k = e
    qa, qb = cat.coupling_forces(s, l, dz, k)
    t1, t2 = cat.cone_factors(s, qa, qb, k * l)
    assert t1 * t2 == pytest.approx(s * s, rel=1e-9)
    # and the rise is recovered from the force ratio
    assert 0.5 * np.log(t1 / t2) / k == pytest.approx(dz, abs=1e-9 * max(1.0, abs(dz)))


@settings(max_examples=200, deadline=None)
@given(lengths, rises, st.floats(0.1, 10.0, **finite))
def test_weightless_limit(l, r, s):
    dz, k = r * l, 1e-7 / l
    qa, qb = cat.coupling_forces(s, l, dz, k)
    assert qa == pytest.approx(s * dz / l, rel=1e-6, abs=1e-6 * s)
    assert qb == pytest.approx(-s * dz / l, rel=1e-6, abs=1e-6 * s)
    v = cat.volume_from_geometry(s, l, dz, k, 1.0)
    assert v == pytest.approx(s * (l + dz * dz / l), rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(element(), st.floats(0.1, 5.0, **finite))
def test_volume_identity(e, s):
    l, dz, k = e
    qa, qb = cat.coupling_forces(s, l, dz, k)
    sigma = 2.0
    v_geom = cat.volume_from_geometry(s, l, dz, k, sigma)
    assert cat.element_volume(qa, qb, k * sigma) == pytest.approx(v_geom, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(element(), st.floats(0.1, 5.0, **finite))
def test_area_integral_equals_volume(e, s):
    l, dz, k = e
    ta, _ = cat.end_tangents(l, dz, k)

    def area_ds(x):
        t = cat.slope(x, float(ta), k)
        return cat.section_area(s, t, 1.0) * np.sqrt(1 + t * t)
    v = cat.volume_from_geometry(s, l, dz, k, 1.0)
    assert quad(area_ds, 0, l, epsabs=0, epsrel=1e-11, limit=200)[0] == pytest.approx(v, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(element())
def test_centerline_hits_both_ends(e):
    l, dz, k = e
    ta, _ = cat.end_tangents(l, dz, k)
    assert cat.centerline(l, 0.3, float(ta), k) == pytest.approx(0.3 + dz, abs=1e-9)


# --------------------------------------------------------------------------- lumped masses

def test_decompose_tight_triple_has_no_mass():
    qa, qb = cat.coupling_forces(1.5, 0.8, 0.2, 1.1)
    _, _, xa, xb = cat.decompose_lumped(1.5, qa, qb, 1.1 * 0.8)
    assert abs(xa) < 1e-12 and abs(xb) < 1e-12


def test_decompose_zero_thrust_is_pure_mass():
    assert cat.decompose_lumped(0.0, 0.0, 1.0, 1.0) == (0.0, 0.0, 0.0, 1.0)


def test_decompose_rejects_outside_cone():
    with pytest.raises(ValueError):
        cat.decompose_lumped(1.0, 0.0, 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(element(), st.floats(0.2, 3.0, **finite), st.floats(0.0, 1.0, **finite),
       st.floats(0.0, 1.0, **finite))
def test_pinned_decomposition_recovers_masses(e, s, ma, mb):
    l, dz, k = e
    qa0, qb0 = cat.coupling_forces(s, l, dz, k)
    _, _, xa, xb = cat.decompose_lumped(s, qa0 + ma, qb0 + mb, k * l, kdz=k * dz)
    assert xa == pytest.approx(ma, abs=1e-9) and xb == pytest.approx(mb, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(element(), st.floats(0.2, 3.0, **finite), st.floats(0.01, 1.0, **finite),
       st.floats(0.01, 1.0, **finite))
def test_free_decomposition_centres_admissible_range(e, s, ma, mb):
    """Brute-force scan of rises that leave both masses nonnegative."""
    l, dz, k = e
    qa0, qb0 = cat.coupling_forces(s, l, dz, k)
    qa, qb = qa0 + ma, qb0 + mb
    qa_bar, qb_bar, xa, xb = cat.decompose_lumped(s, qa, qb, k * l)
    grid = np.linspace(dz - 5.0 / k, dz + 5.0 / k, 400001)
    ga, gb = cat.coupling_forces(s, l, grid, k)
    ok = grid[(ga <= qa) & (gb <= qb)]
    centre = 0.5 * (ok.min() + ok.max())
    step = grid[1] - grid[0]
    # the rise carried by the returned catenary, read off its A-end factor
    t1, _ = cat.cone_factors(s, qa_bar, qb_bar, k * l)
    assert np.log(t1 / s) / k == pytest.approx(centre, abs=2 * step)
    assert xa >= 0.0 and xb >= 0.0
    assert qa_bar + xa == pytest.approx(qa) and qb_bar + xb == pytest.approx(qb)
