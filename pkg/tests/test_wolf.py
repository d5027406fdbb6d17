import numpy as np
import pytest

from wplab.disk import conformal_factor
from wplab.errors import OutOfRange
from wplab.mesh import hyperbolic_area
from wplab.qdiff import HarmonicBeltrami, poincare_series, sample_points
from wplab.wolf import (ScalarField, WolfMetricFamily, alpha_bound_slack, assemble_laplacian, metric_at,
                        solve_alpha, volume_element)


@pytest.fixture(scope="module")
def lap(base_domain):
    return assemble_laplacian(base_domain)


@pytest.fixture(scope="module")
def family(base_domain, genus2):
    return WolfMetricFamily(base_domain, HarmonicBeltrami(poincare_series(genus2, 0, 6)))


@pytest.fixture(scope="module")
def flat_family(base_domain):
    return WolfMetricFamily(base_domain, None)


def test_constants_in_kernel(lap, base_domain):
    f = np.full(base_domain.n_orbits, 3.7)
    assert np.abs(lap(f)).max() <= 1e-12


def test_mass_partitions_area(lap, base_domain):
    assert lap.mass.sum() == pytest.approx(hyperbolic_area(base_domain), rel=1e-12)


def test_mass_weighted_symmetry(lap, base_domain, rng):
    n = base_domain.n_orbits
    for _ in range(5):
        f, g = rng.normal(size=n), rng.normal(size=n)
        a, b = lap.inner(lap(f), g), lap.inner(f, lap(g))
        assert abs(a - b) <= 1e-10 * max(abs(a), abs(b))


def test_shifted_operator_negative_definite(lap, base_domain, rng):
    for _ in range(50):
        f = rng.normal(size=base_domain.n_orbits)
        rq = lap.inner(lap(f) - 2 * f, f)
        assert rq <= -2 * lap.inner(f, f) + 1e-10


def test_alpha_of_zero_is_zero(base_domain):
    assert not np.any(solve_alpha(base_domain, np.zeros(base_domain.n_orbits)).values)


def test_alpha_of_constant_source(base_domain):
    alpha = solve_alpha(base_domain, ScalarField(base_domain, np.full(base_domain.n_orbits, 0.37)))
    assert np.abs(alpha.values - 0.37).max() <= 1e-9


def test_alpha_residual(base_domain, family, lap):
    a = family.alpha.values
    h = family.h_orbits
    res = np.linalg.norm(lap.stiffness @ a + 2 * lap.mass * a - 2 * lap.mass * h)
    assert res <= 1e-10 * np.linalg.norm(2 * lap.mass * h)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_alpha_pointwise_bound(base_domain, genus2, m):
    fam = WolfMetricFamily(base_domain, HarmonicBeltrami(poincare_series(genus2, m, 6)))
    margin, slack = alpha_bound_slack(fam)
    assert margin >= -slack


def test_metric_at_zero(family, genus2):
    for z in sample_points(genus2, 10, seed=1):
        G = metric_at(family, 0.0, z)
        lam2 = conformal_factor(z)
        assert G.zz == 0 and G.zbarzbar == 0
        assert G.zzbar == 0.5 * lam2
        assert G.det == pytest.approx(-0.25 * lam2**2, rel=1e-15)


def test_flat_family_is_diagonal(flat_family, genus2):
    z = sample_points(genus2, 5, seed=2)[0]
    t = 0.9 * flat_family.t_max
    G = metric_at(flat_family, t, z)
    assert G.zz == 0 and G.zbarzbar == 0
    assert G.det == pytest.approx(-0.25 * conformal_factor(z) ** 2, rel=1e-15)
    assert volume_element(flat_family, t, z) == volume_element(flat_family, 0.0, z)


def test_det_is_even_in_t(family, genus2):
    t = 0.7 * family.t_max
    for z in sample_points(genus2, 20, seed=3):
        assert metric_at(family, t, z).det - metric_at(family, -t, z).det == 0.0


def test_volume_element_at_zero_and_first_derivative(family, genus2):
    h = 1e-4
    for z in sample_points(genus2, 20, seed=4):
        lam2 = conformal_factor(z)
        assert volume_element(family, 0.0, z) == pytest.approx(0.5 * lam2, rel=1e-15)
        d = (volume_element(family, h, z) - volume_element(family, -h, z)) / (2 * h)
        assert abs(d) <= 1e-6 * lam2
        ddet = (metric_at(family, h, z).det - metric_at(family, -h, z).det) / (2 * h)
        assert ddet == 0.0


def test_volume_integrates_to_area(family, base_domain):
    vol = 2.0 * family.volume_nodes(0.0)
    assert base_domain.integrate(vol) == pytest.approx(hyperbolic_area(base_domain), rel=1e-12)


def test_t_beyond_range_rejected(family, genus2):
    with pytest.raises(OutOfRange):
        metric_at(family, 1.01 * family.t_max, sample_points(genus2, 1)[0])


def test_t_max_keeps_correction_subordinate(family):
    corr = family.t_max**2 * (family.h_nodes + family.alpha_nodes)
    assert corr.max() == pytest.approx(0.1, rel=1e-12)


def test_node_coefficients_match_metric(family, base_domain):
    t = 0.5 * family.t_max
    a, b = family.node_coefficients(t)
    f, k = 7, 2
    z = base_domain.nodes[f, k]
    G = metric_at(family, t, z)
    root = np.sqrt(abs(G.det))
    # the node value of alpha is interpolated, the point value uses the same barycentric weights
    assert a[f, k] == pytest.approx(G.zzbar / root, rel=1e-9)
    assert b[f, k] == pytest.approx(G.zz / root, rel=1e-9)
