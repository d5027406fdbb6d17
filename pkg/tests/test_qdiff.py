import types

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wplab.disk import conformal_factor
from wplab.errors import DegenerateDifferential
from wplab.qdiff import (HarmonicBeltrami, QuadraticDifferential, beltrami_from_q, poincare_series, qb_pairing,
                         sample_points, wp_norm_sq, zero_differential)


@pytest.fixture(scope="module")
def q0(genus2):
    return poincare_series(genus2, 0, 6)


@pytest.fixture(scope="module")
def q2(genus2):
    return poincare_series(genus2, 2, 6)


def test_trivial_group_gives_constant_one():
    trivial = types.SimpleNamespace(ambient=[], polygon=[])
    q = poincare_series(trivial, 0, 6)
    z = np.array([0.0, 0.3 + 0.1j, -0.7j])
    assert np.array_equal(q(z), np.ones(3, dtype=complex))
    assert q.n_terms == 1


def test_automorphy_improves_with_truncation(genus2):
    pts = sample_points(genus2, 50, seed=3)
    res = [QuadraticDifferential(genus2, 0, L).automorphy_residual(pts) for L in range(2, 7)]
    assert res[-1] <= QuadraticDifferential(genus2, 0, 4).automorphy_residual(pts)
    assert np.all(np.diff(res) <= 1e-12)


def test_cauchy_riemann_residual(q2, genus2):
    pts = sample_points(genus2, 50, seed=4)
    peak = np.abs(q2.series(pts)).max()
    assert q2.holomorphy_residual(pts) <= 1e-6 * peak


def test_report_is_filled(q0):
    assert set(q0.report) >= {"max_abs", "automorphy_residual", "holomorphy_residual", "terms"}
    assert q0.report["automorphy_residual"] < 1e-2 * q0.report["max_abs"]


def test_polynomial_evaluation_matches_raw_series(q0, genus2):
    pts = sample_points(genus2, 40, seed=5)
    assert np.abs(q0(pts) - q0.series(pts)).max() <= 1e-10 * np.abs(q0.series(pts)).max()


def test_degenerate_series_rejected(genus2, monkeypatch):
    monkeypatch.setattr(QuadraticDifferential, "series", lambda self, z: np.zeros(np.shape(z), complex))
    with pytest.raises(DegenerateDifferential):
        poincare_series(genus2, 0, 2)


def test_zero_differential_gives_zero_beltrami(base_domain):
    mu = beltrami_from_q(zero_differential(base_domain.surface))
    assert not np.any(mu(np.array([0.1, 0.2j])))
    assert wp_norm_sq(mu, base_domain) == 0.0


def test_beltrami_pointwise_identity(q0, genus2):
    mu = HarmonicBeltrami(q0)
    z = sample_points(genus2, 30, seed=6)
    lam2 = conformal_factor(z)
    assert np.allclose(np.abs(mu(z)) ** 2 * lam2, np.abs(q0(z)) ** 2 / lam2, rtol=1e-13)


def test_beltrami_deck_invariance(q0, genus2, rng):
    z = sample_points(genus2, 20, seed=7)
    tol = q0.report["automorphy_residual"]
    for zi in z:
        g = genus2.ambient[rng.integers(len(genus2.ambient))]
        w = g(zi)
        a = abs(q0.series(np.array([w]))[0]) / conformal_factor(w)
        b = abs(q0.series(np.array([zi]))[0]) / conformal_factor(zi)
        assert abs(a - b) <= tol / conformal_factor(zi)


def test_wp_norm_homogeneous(q0, base_domain):
    mu = HarmonicBeltrami(q0)
    assert wp_norm_sq(mu.scaled(2.0), base_domain) == pytest.approx(4 * wp_norm_sq(mu, base_domain), rel=1e-13)


def _inside_polygon(z, polygon):
    """Points on the origin side of every geodesic side (circles orthogonal to the unit circle)."""
    inside = np.ones(z.shape, dtype=bool)
    n = len(polygon)
    for s in range(n):
        p, q = polygon[s], polygon[(s + 1) % n]
        A = np.array([[p.real, p.imag], [q.real, q.imag]])
        rhs = 0.5 * np.array([1 + abs(p) ** 2, 1 + abs(q) ** 2])
        cx, cy = np.linalg.solve(A, rhs)
        c = complex(cx, cy)
        inside &= np.abs(z - c) > np.sqrt(abs(c) ** 2 - 1)
    return inside


def test_wp_norm_monte_carlo_oracle(q0, base_domain):
    poly = base_domain.surface.polygon
    R = np.abs(poly).max()
    rng = np.random.default_rng(11)
    n = 400_000
    z = R * (2 * rng.random(n) - 1 + 1j * (2 * rng.random(n) - 1))
    keep = (np.abs(z) < R) & _inside_polygon(z, poly)
    f = np.zeros(n)
    f[keep] = np.abs(q0(z[keep])) ** 2 / conformal_factor(z[keep])
    estimate = (2 * R) ** 2 * f.mean()
    assert wp_norm_sq(HarmonicBeltrami(q0), base_domain) == pytest.approx(estimate, rel=1e-2)


def test_pairing_identities(q0, base_domain):
    mu = HarmonicBeltrami(q0)
    qn = q0.on_domain(base_domain)[0]
    wp = wp_norm_sq(mu, base_domain)
    assert wp > 0
    assert qb_pairing(qn, mu, base_domain) == pytest.approx(wp, rel=1e-12)
    assert abs(qb_pairing(1j * qn, mu, base_domain)) <= 1e-12 * wp
    zero = HarmonicBeltrami(zero_differential(base_domain.surface))
    assert qb_pairing(qn, zero, base_domain) == 0.0


@pytest.fixture(scope="module")
def small(genus2):
    from wplab.mesh import triangulate

    dom = triangulate(genus2, 1)
    qs = [poincare_series(genus2, m, 4) for m in (0, 1, 2)]
    return dom, qs


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_pairing_bilinear(small, a, b):
    dom, (qa, qb, qc) = small
    pa, pb, pc = (q.on_domain(dom)[0] for q in (qa, qb, qc))
    mu_a, mu_b, mu_c = (HarmonicBeltrami(q) for q in (qa, qb, qc))
    scale = (abs(a) + abs(b) + 1) * max(wp_norm_sq(m, dom) for m in (mu_a, mu_b, mu_c))
    # first slot
    lhs = qb_pairing(a * pa + b * pb, mu_c, dom)
    rhs = a * qb_pairing(pa, mu_c, dom) + b * qb_pairing(pb, mu_c, dom)
    assert abs(lhs - rhs) <= 1e-12 * scale
    # second slot: mu is conjugate-linear in q, so real scalars pass through
    lhs = qb_pairing(pc, HarmonicBeltrami(qa.scaled(a)), dom) + qb_pairing(pc, HarmonicBeltrami(qb.scaled(b)), dom)
    rhs = a * qb_pairing(pc, mu_a, dom) + b * qb_pairing(pc, mu_b, dom)
    assert abs(lhs - rhs) <= 1e-12 * scale
