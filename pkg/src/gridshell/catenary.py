"""Closed-form kernel for the catenary of equal stress.

Local frame: ``xd`` runs horizontally from end A (xd = 0) to end B (xd = l),
``z`` is positive up, ``k = rho_g / sigma``.  The centreline is

    z(xd) = zA + log(cos(C1 - k xd) / cos C1) / k,   tan C1 = tanA,

so the slope at ``xd`` is ``tan(C1 - k xd)``.  ``tanA`` and ``tanB`` are the
signed slopes at the two ends in that frame; a symmetric arch has
``tanA = -tanB = tan(k l / 2)``.

Everything accepts numpy arrays and broadcasts.
"""

from __future__ import annotations

import numpy as np


class DomainError(ValueError):
    """Input outside 0 < k l < pi."""


def _check_lbar(lbar):
    lbar = np.asarray(lbar, dtype=float)
    if np.any(~(lbar > 0.0)) or np.any(~(lbar < np.pi)):
        raise DomainError("k*l must lie strictly inside (0, pi)")
    return lbar


def end_tangents(l, dz, k):
    """(tanA, tanB) of the equal-stress catenary spanning ``l`` and rising ``dz``."""
    l, dz, k = (np.asarray(v, dtype=float) for v in (l, dz, k))
    kl = _check_lbar(k * l)
    # cos(kl) - exp(k dz) written without cancellation as k -> 0
    half = 2.0 * np.sin(0.5 * kl) ** 2
    sin_kl = np.sin(kl)
    tan_a = (half + np.expm1(k * dz)) / sin_kl
    tan_b = -(half + np.expm1(-k * dz)) / sin_kl
    return tan_a, tan_b


def coupling_forces(s, l, dz, k):
    """Vertical end forces (qA, qB) pushing down on the nodes for thrust ``s``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise ValueError("horizontal force s must be nonnegative")
    tan_a, tan_b = end_tangents(l, dz, k)
    return s * tan_a, -s * tan_b


def element_volume(qA, qB, rho_g):
    """Material volume: total downward end force over unit weight."""
    qA, qB = np.asarray(qA, dtype=float), np.asarray(qB, dtype=float)
    if rho_g <= 0.0:
        raise ValueError("rho_g must be positive")
    total = qA + qB
    if np.any(total < -1e-12 * np.maximum(1.0, np.abs(qA) + np.abs(qB))):
        raise ValueError("negative element weight")
    return total / rho_g


def volume_from_geometry(s, l, dz, k, sigma):
    """Volume (s/sigma)(tanA - tanB)/k, with its straight-chord limit at k = 0."""
    s = np.asarray(s, dtype=float)
    if np.all(np.asarray(k) == 0.0):
        l, dz = np.asarray(l, float), np.asarray(dz, float)
        return s / sigma * (l + dz * dz / l)
    tan_a, tan_b = end_tangents(l, dz, k)
    return s / sigma * (tan_a - tan_b) / k


def centerline(xd, zA, tanA, k):
    """Elevation at horizontal offset ``xd`` from end A."""
    xd = np.asarray(xd, dtype=float)
    if k == 0.0:
        return zA + tanA * xd
    kx = k * xd
    # log(cos(C1 - kx)/cos C1) = log1p(cos kx - 1 + tanA sin kx)
    return zA + np.log1p(-2.0 * np.sin(0.5 * kx) ** 2 + tanA * np.sin(kx)) / k


def slope(xd, tanA, k):
    """tan(C1 - k xd)."""
    t = np.tan(k * np.asarray(xd, dtype=float))
    return (tanA - t) / (1.0 + tanA * t)


def sample_centerline(zA, zB, l, k, s=None, n_samples=17):
    """Polyline ``(xd, z)`` with ``n_samples`` evenly spaced points from A to B.

    ``s`` does not affect the shape; it is accepted so callers can pass a full
    element record.  ``k = 0`` gives the straight chord.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    dz = zB - zA
    xd = np.linspace(0.0, l, n_samples)
    if k == 0.0:
        tan_a = dz / l
    else:
        tan_a, _ = end_tangents(l, dz, k)
        tan_a = float(tan_a)
    z = centerline(xd, zA, tan_a, k)
    z[0], z[-1] = zA, zB
    return xd, z


def section_area(s, tan_alpha, sigma):
    """Cross-section area carrying axial force s / cos(alpha) at stress sigma."""
    s = np.asarray(s, dtype=float)
    return s / sigma * np.sqrt(1.0 + np.asarray(tan_alpha, dtype=float) ** 2)


def cone_factors(s, qA, qB, lbar):
    """(t1, t2) = (sin lbar qA + cos lbar s, sin lbar qB + cos lbar s)."""
    sl, cl = np.sin(lbar), np.cos(lbar)
    return sl * qA + cl * s, sl * qB + cl * s


def decompose_lumped(s, qA, qB, lbar, kdz=None, tol=1e-8):
    """Split end forces into an aligned catenary plus nonnegative lumped masses.

    Returns ``(qA_bar, qB_bar, xA, xB)`` with ``qA = qA_bar + xA`` and
    ``qB = qB_bar + xB``; ``(s, qA_bar, qB_bar)`` satisfies the catenary
    product identity exactly.

    ``kdz`` (= k * (zB - zA)) pins the catenary to given node elevations.
    Without it the catenary is taken at the centre of the admissible range
    of ``kdz``, which is ``0.5 * log(t1 / t2)``; when the cone constraint is
    tight that range is a single point and both masses vanish.
    """
    s, qA, qB = float(s), float(qA), float(qB)
    lbar = float(_check_lbar(lbar))
    limit = tol * max(1.0, abs(s))
    if s < -limit:
        raise ValueError("negative horizontal force")
    if s <= 0.0:
        if qA < -limit or qB < -limit:
            raise ValueError("lumped masses would be negative")
        return 0.0, 0.0, qA, qB
    t1, t2 = cone_factors(s, qA, qB, lbar)
    if t1 <= 0.0 or t2 <= 0.0 or t1 * t2 < s * s * (1.0 - 1e-12) - limit * s:
        raise ValueError("end forces violate the catenary cone")
    if kdz is None:
        kdz = 0.5 * np.log(t1 / t2)
    sl, cl = np.sin(lbar), np.cos(lbar)
    qa_bar = s * (np.exp(kdz) - cl) / sl
    qb_bar = s * (np.exp(-kdz) - cl) / sl
    xA, xB = qA - qa_bar, qB - qb_bar
    if xA < -limit or xB < -limit:
        raise ValueError("lumped masses would be negative for this elevation difference")
    return qa_bar, qb_bar, xA, xB
