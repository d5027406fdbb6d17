import numpy as np
import pytest
import scipy.sparse as sp

from wplab.disk import log_factor_dv
from wplab.jacobi import BundleOneForm, BundleSection, JacobiSystem
from wplab.qdiff import HarmonicBeltrami, wp_norm_sq, zero_differential
from wplab.variation import constant_scenario, covering_scenario, identity_scenario


def _section(rng, n):
    return BundleSection(rng.normal(size=n) + 1j * rng.normal(size=n), rng.normal(size=n) + 1j * rng.normal(size=n))


def _form(rng, shape):
    return BundleOneForm(rng.normal(size=shape) + 1j * rng.normal(size=shape),
                         rng.normal(size=shape) + 1j * rng.normal(size=shape))


@pytest.fixture(scope="module")
def identity_system():
    return JacobiSystem(identity_scenario(2, 2).initial)


@pytest.fixture(scope="module")
def cover2_interp_jacobi():
    sc = covering_scenario(2, 2, 2)
    return sc, JacobiSystem(sc.initial)


@pytest.fixture(scope="module")
def constant_system():
    sc = constant_scenario(2, 2)
    return JacobiSystem(sc.critical()[0])


# -------------------------------------------------------------------- d-bar

def test_d01_of_zero(cover_jacobi):
    n = cover_jacobi.n
    w = cover_jacobi.d01(BundleSection(np.zeros(n, complex), np.zeros(n, complex)))
    assert not np.any(w.vector())


def test_d01_is_linear(cover_jacobi, rng):
    J = cover_jacobi
    W1, W2 = _section(rng, J.n), _section(rng, J.n)
    a, b = 0.3 - 1.2j, 2.1 + 0.4j
    lhs = J.d01(a * W1 + b * W2).vector()
    rhs = a * J.d01(W1).vector() + b * J.d01(W2).vector()
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()


def test_d01_adjointness(cover_jacobi, rng):
    J = cover_jacobi
    for _ in range(20):
        W, w = _section(rng, J.n), _form(rng, J.form_shape)
        a = J.form_inner(J.d01(W), w)
        b = J.section_inner(W, J.d01_adjoint(w))
        assert abs(a - b) <= 1e-10 * abs(a)


def test_adjoint_of_zero(cover_jacobi):
    z = np.zeros(cover_jacobi.form_shape, complex)
    assert not np.any(cover_jacobi.d01_adjoint(BundleOneForm(z, z)).vector())


def test_holomorphic_chart_field_converges():
    # for the identity map u_zbar = 0, so d-bar of (f, 0) is the chart d-bar of the interpolant of f
    res = []
    for level in (1, 2, 3):
        dom = identity_scenario(2, level).domain
        J = JacobiSystem(identity_scenario(2, level).initial)
        z = dom.vertices
        F1 = z**2 + 0.5 * z
        w = J.d01_occurrences(F1, np.zeros_like(F1))
        ref = BundleOneForm(np.ones(J.form_shape, complex), np.zeros(J.form_shape, complex))
        res.append(J.form_norm(w) / J.form_norm(ref))
    assert res[0] > res[1] > res[2]
    assert res[2] <= 0.6 * res[1]


def test_connection_coefficient(cover_jacobi, rng):
    c = cover_jacobi.connection
    v = c.barycenter_values
    assert np.abs(c.c - 2 * np.conj(v) / (1 - np.abs(v) ** 2)).max() <= 1e-10
    # independent check: 2 d/dv log rho by central differences
    z = 0.8 * (rng.random(20) - 0.5) + 0.8j * (rng.random(20) - 0.5)
    h = 1e-6
    logrho = lambda x: np.log(2.0 / (1.0 - np.abs(x) ** 2))  # noqa: E731
    dx = (logrho(z + h) - logrho(z - h)) / (2 * h)
    dy = (logrho(z + 1j * h) - logrho(z - 1j * h)) / (2 * h)
    assert np.abs(log_factor_dv(z) - (dx - 1j * dy)).max() <= 1e-8


# ---------------------------------------------------------------- curvature

def test_curvature_of_zero(cover_jacobi):
    n = cover_jacobi.n
    assert not np.any(cover_jacobi.curvature_R(BundleSection(np.zeros(n, complex), np.zeros(n, complex))).vector())


def test_curvature_nonnegative(cover_jacobi, rng):
    J = cover_jacobi
    for _ in range(20):
        W = _section(rng, J.n)
        assert J.section_inner(J.curvature_R(W), W).real >= -1e-10 * J.section_norm(W) ** 2


def test_curvature_matches_pointwise_formula(cover_jacobi, rng):
    J = cover_jacobi
    for _ in range(5):
        W = _section(rng, J.n)
        a = J.section_inner(J.curvature_R(W), W)
        b = J.curvature_quadratic(W)
        assert abs(a.real - b) <= 1e-10 * b
        assert abs(a.imag) <= 1e-10 * b


def test_curvature_vanishes_on_du_direction(cover_interp_jacobi, rng):
    # at the holomorphic covering u_zbar = 0, so the d/dv direction is parallel to du/dz
    J = cover_interp_jacobi
    s = rng.normal(size=J.n) + 1j * rng.normal(size=J.n)
    W = BundleSection(s, np.zeros(J.n, complex))
    assert J.section_norm(J.curvature_R(W)) <= 1e-8 * J.section_norm(W)


# ------------------------------------------------------------------- Jacobi

def test_jacobi_form_is_hermitian(cover_jacobi):
    A = cover_jacobi.jacobi_form
    assert abs(A - A.conj().T).max() <= 1e-12 * abs(A).max()


def test_jacobi_symmetric(cover_jacobi, rng):
    J = cover_jacobi
    for _ in range(10):
        W1, W2 = _section(rng, J.n), _section(rng, J.n)
        a = J.section_inner(J.jacobi_apply(W1), W2)
        b = J.section_inner(W1, J.jacobi_apply(W2))
        assert abs(a - b) <= 1e-10 * max(abs(a), abs(b))


def test_jacobi_positive(cover_jacobi, rng):
    J = cover_jacobi
    for _ in range(50):
        W = _section(rng, J.n)
        assert J.section_inner(J.jacobi_apply(W), W).real >= -1e-10 * J.section_norm(W) ** 2


def test_jacobi_preserves_reality(cover_jacobi, rng):
    J = cover_jacobi
    for _ in range(5):
        W = BundleSection.real(rng.normal(size=J.n) + 1j * rng.normal(size=J.n))
        JW = J.jacobi_apply(W)
        assert JW.reality_defect() <= 1e-10 * np.abs(JW.f1).max()


def test_jacobi_matrix_is_mass_weighted_form(cover_jacobi, rng):
    J = cover_jacobi
    W = _section(rng, J.n)
    assert np.allclose(J.jacobi_matrix() @ W.vector(), J.jacobi_apply(W).vector(), rtol=1e-13, atol=0)


# ---------------------------------------------------------------- right side

def test_rhs_of_zero_mu(cover_jacobi, cover):
    w, rhs = cover_jacobi.rhs_from_mu(HarmonicBeltrami(zero_differential(cover.surface)))
    assert not np.any(w.vector()) and not np.any(rhs.vector())
    w, rhs = cover_jacobi.rhs_from_mu(None)
    assert not np.any(w.vector()) and not np.any(rhs.vector())


def test_rhs_is_real(cover_jacobi, cover_mus):
    _, rhs = cover_jacobi.rhs_from_mu(cover_mus[0])
    assert rhs.reality_defect() == 0.0


def test_i_mu_du_energy_identity(cover_jacobi, cover_mus):
    for mu in cover_mus:
        a, b = cover_jacobi.i_mu_du_energy_identity(mu)
        assert a == pytest.approx(b, rel=1e-10)


def _adjoint_ratios(J, mus):
    out = []
    for mu in mus:
        w, rhs = J.rhs_from_mu(mu)
        nw = J.form_norm(w)
        out.append((J.section_norm(J.d01_adjoint(w)) / nw, J.section_norm(rhs) / nw))
    return np.array(out)


@pytest.mark.xfail(strict=True, reason="the adjoint of i_mu du vanishes only up to the O(h^2) error of the "
                                       "interpolated covering, about 4e-4 at level 3")
def test_covering_adjoint_of_i_mu_du_small(cover_interp_jacobi, cover_mus):
    assert np.all(_adjoint_ratios(cover_interp_jacobi, cover_mus)[:, 0] <= 1e-4)


@pytest.mark.xfail(strict=True, reason="same discretisation error as the adjoint, about 6e-4 at level 3")
def test_covering_rhs_small(cover_interp_jacobi, cover_mus):
    assert np.all(_adjoint_ratios(cover_interp_jacobi, cover_mus)[:, 1] <= 1e-4)


def test_covering_adjoint_of_i_mu_du_converges(cover_interp_jacobi, cover2_interp_jacobi, cover_mus):
    sc2, J2 = cover2_interp_jacobi
    coarse = _adjoint_ratios(J2, sc2.mu_list(3, 6))
    fine = _adjoint_ratios(cover_interp_jacobi, cover_mus)
    assert np.all(fine <= 0.5 * coarse)
    assert np.all(fine <= 2e-3)


# ------------------------------------------------------------------- solves

def test_solve_residual(cover_jacobi, cover_mus):
    J = cover_jacobi
    _, rhs = J.rhs_from_mu(cover_mus[0])
    V = J.solve_jacobi(rhs)
    r = J.jacobi_apply(V) - J.project_off_kernel(rhs)
    assert J.section_norm(r) <= 1e-8 * J.section_norm(rhs)


def test_solve_zero(cover_jacobi):
    n = cover_jacobi.n
    V = cover_jacobi.solve_jacobi(BundleSection(np.zeros(n, complex), np.zeros(n, complex)))
    assert not np.any(V.vector())


def test_covering_jacobi_has_no_kernel(cover_jacobi):
    smallest, lam_max = cover_jacobi.jacobi_spectrum_bottom()
    assert len(cover_jacobi.jacobi_kernel()) == 0
    assert smallest.min() > 1e-3


def test_constant_map_kernel(constant_system):
    # a constant map has J = d-bar^* d-bar with the constant sections as kernel
    K = constant_system.jacobi_kernel()
    assert len(K) == 4
    for Z in K:
        assert constant_system.section_norm(constant_system.jacobi_apply(Z)) <= 1e-8


def test_kernel_invariance(constant_system, rng):
    J = constant_system
    rhs = J.project_off_kernel(BundleSection.real(rng.normal(size=J.n) + 1j * rng.normal(size=J.n)))
    V = J.solve_jacobi(rhs)
    base = J.section_inner(J.jacobi_apply(V), V).real
    assert J.section_norm(J.jacobi_apply(V) - rhs) <= 1e-8 * J.section_norm(rhs)
    for Z in J.jacobi_kernel():
        V2 = V + 3.0 * Z
        assert abs(J.section_inner(J.jacobi_apply(V2), V2).real - base) <= 1e-8 * abs(base)
        # V is the minimum-norm solution
        assert abs(J.section_inner(V, Z)) <= 1e-8 * J.section_norm(V)


# ------------------------------------------------------- harmonic projection

def test_exact_forms_project_to_zero(cover_jacobi, rng):
    J = cover_jacobi
    w = J.d01(_section(rng, J.n))
    assert J.form_norm(J.harmonic_projection(w)) <= 1e-6 * J.form_norm(w)


def test_i_mu_du_is_harmonic(cover_interp_jacobi, cover_mus):
    J = cover_interp_jacobi
    for mu in cover_mus:
        w = J.i_mu_du(mu)
        assert J.form_norm(J.harmonic_projection(w) - w) <= 1e-3 * J.form_norm(w)


def test_projection_contracts_and_is_orthogonal(cover_jacobi, rng):
    J = cover_jacobi
    for _ in range(3):
        w = _form(rng, J.form_shape)
        H = J.harmonic_projection(w)
        n, nh, nr = J.form_norm(w), J.form_norm(H), J.form_norm(w - H)
        assert nh <= n + 1e-10
        assert abs(n**2 - nh**2 - nr**2) <= 1e-8 * n**2
        assert J.section_norm(J.d01_adjoint(H)) <= 1e-6 * n


def test_projection_norm_is_wp_norm(cover_interp_jacobi, cover_mus, cover):
    J = cover_interp_jacobi
    for mu in cover_mus:
        H = J.harmonic_projection(J.i_mu_du(mu))
        assert J.form_norm(H) ** 2 == pytest.approx(wp_norm_sq(mu, cover.domain), rel=2e-2)


def test_real_double_matches_complex(cover_jacobi, rng):
    from wplab.jacobi import _real_double

    A = cover_jacobi.jacobi_form
    x = rng.normal(size=A.shape[0]) + 1j * rng.normal(size=A.shape[0])
    y = _real_double(A) @ np.concatenate([x.real, x.imag])
    z = A @ x
    assert np.allclose(y, np.concatenate([z.real, z.imag]), rtol=1e-13, atol=1e-13 * np.abs(z).max())
    assert sp.issparse(_real_double(A))
