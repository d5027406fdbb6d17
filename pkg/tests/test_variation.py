import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wplab.errors import CurveError, InvalidArgument
from wplab.harmonic import SolverConfig, energy
from wplab.jacobi import JacobiSystem
from wplab.qdiff import HarmonicBeltrami, wp_norm_sq, zero_differential
from wplab.variation import (CURVE_HEADER, DERIVS_HEADER, CertificationReport, certify_critical, constant_scenario,
                             covering_certificate, energy_curve, first_variation_formula, hopf_sup_norm, mu_list,
                             second_variation_formula, symmetric_grid, write_curve_csv, write_derivs_csv,
                             write_report)


@pytest.fixture(scope="module")
def certificate():
    return covering_certificate(2, 2, 3)


@pytest.fixture(scope="module")
def cover_curves(cover, cover_mus):
    return [energy_curve(cover, mu) for mu in cover_mus]


@pytest.fixture(scope="module")
def cover_second(cover_critical, cover_mus, cover_jacobi):
    return [second_variation_formula(cover_critical, mu, cover_jacobi) for mu in cover_mus]


# ------------------------------------------------------------------ curves

def test_zero_direction_gives_flat_curve(identity2):
    curve = energy_curve(identity2, HarmonicBeltrami(zero_differential(identity2.surface)))
    assert np.ptp(curve.energy) <= 1e-10
    curve = energy_curve(identity2, None)
    assert np.ptp(curve.energy) <= 1e-10


def test_covering_curve_has_minimum_at_zero(cover_curves):
    for c in cover_curves:
        assert np.all(c.energy >= c.value(0.0) - 1e-6)
        assert np.allclose(c.t, -c.t[::-1])
        assert np.all(c.grad_norm <= 1e-10 * np.maximum(1.0, c.energy))


def test_fd_error_halves_with_grid(cover, cover_mus, cover_curves):
    fine = energy_curve(cover, cover_mus[0], h=0.5 * cover_curves[0].h)
    assert fine.fd_second_err <= 0.6 * cover_curves[0].fd_second_err


def test_curve_error_names_t(twisted, genus2):
    mu = mu_list(genus2, 1, 6)[0]
    with pytest.raises(CurveError) as info:
        energy_curve(twisted.initial, mu, cfg=SolverConfig(max_iter=1))
    assert info.value.t == 0.0
    assert "t=0.0" in str(info.value)


def test_curve_value_lookup(cover_curves):
    c = cover_curves[0]
    assert c.value(c.t[1]) == c.energy[1]
    with pytest.raises(KeyError):
        c.value(0.123456)


@pytest.mark.parametrize("points", [3, 4, 6])
def test_grid_rejects_bad_sizes(points):
    with pytest.raises(InvalidArgument):
        symmetric_grid(0.1, points)


@settings(max_examples=30, deadline=None)
@given(h=st.floats(1e-4, 1.0), k=st.integers(2, 6))
def test_grid_is_symmetric(h, k):
    g = symmetric_grid(h, 2 * k + 1)
    assert g[k] == 0.0
    assert np.array_equal(g, -g[::-1])
    assert np.allclose(np.diff(g), h)


# --------------------------------------------------------- first variation

def test_first_variation_vanishes_at_covering(cover_critical, cover_mus):
    E0 = energy(cover_critical)
    for mu in cover_mus:
        assert abs(first_variation_formula(cover_critical, mu)) <= 1e-4 * E0


def test_first_variation_of_zero(cover_critical):
    assert first_variation_formula(cover_critical, None) == 0.0
    assert first_variation_formula(cover_critical, HarmonicBeltrami(zero_differential(cover_critical.domain.surface))) == 0.0


def test_first_variation_matches_fd_off_critical(twisted):
    m = twisted.critical()[0]
    mu = mu_list(twisted.surface, 1, 6)[0]
    curve = energy_curve(twisted, mu)
    f1 = first_variation_formula(m, mu)
    assert abs(curve.fd_first) > 1e-3 * energy(m)
    assert abs(f1 - curve.fd_first) <= max(5e-2 * abs(curve.fd_first), 3 * curve.fd_first_err)


def test_fd_first_matches_formula_at_covering(cover_critical, cover_mus, cover_curves):
    # both sides vanish here, so the comparison is against the energy scale
    E0 = energy(cover_critical)
    for mu, c in zip(cover_mus, cover_curves):
        assert abs(first_variation_formula(cover_critical, mu) - c.fd_first) <= max(1e-4 * E0, 3 * c.fd_first_err)


# -------------------------------------------------------- second variation

def test_second_variation_is_four_wp(cover_second):
    for sv in cover_second:
        assert sv.value == pytest.approx(4 * sv.wp_sq, rel=0.1)
        assert sv.value == pytest.approx(4 * sv.harmonic_sq, rel=0.1)


def test_second_variation_matches_fd(cover_second, cover_curves):
    for sv, c in zip(cover_second, cover_curves):
        assert abs(sv.value - c.fd_second) <= max(0.1 * abs(sv.value), 3 * c.fd_second_err)
        assert c.fd_second >= -1e-6 * c.value(0.0)


def test_second_variation_above_diagnostic(cover_second, cover_critical):
    E0 = energy(cover_critical)
    for sv in cover_second:
        assert sv.value >= sv.diagnostic - 1e-6 * E0


def test_second_variation_ingredients(cover_second, cover_critical, cover_mus):
    for sv, mu in zip(cover_second, cover_mus):
        assert sv.value == pytest.approx(2 * (2 * sv.i_mu_du_sq - sv.jvv), rel=1e-14)
        assert sv.wp_sq == wp_norm_sq(mu, cover_critical.domain)
        assert sv.jvv >= 0


def test_second_variation_of_zero(cover_critical):
    sv = second_variation_formula(cover_critical, None)
    assert sv.value == 0.0 and sv.wp_sq == 0.0
    sv = second_variation_formula(cover_critical, HarmonicBeltrami(zero_differential(cover_critical.domain.surface)))
    assert sv.value == 0.0


def test_second_variation_independent_of_kernel(rng):
    # the constant map has a kernel; the formula depends on V only through <J V, V>
    sc = constant_scenario(2, 2)
    J = JacobiSystem(sc.critical()[0])
    assert len(J.jacobi_kernel()) > 0
    from wplab.jacobi import BundleSection

    rhs = J.project_off_kernel(BundleSection.real(rng.normal(size=J.n) + 1j * rng.normal(size=J.n)))
    V = J.solve_jacobi(rhs)
    value = lambda W: 2 * (0.0 - J.section_inner(J.jacobi_apply(W), W).real)  # noqa: E731
    base = value(V)
    for Z in J.jacobi_kernel():
        assert abs(value(V + 2.5 * Z) - base) <= 1e-8 * abs(base)


# ----------------------------------------------------------- certificates

def test_covering_certificate_passes(certificate):
    assert certificate.passed, [c for c in certificate.failures()]
    assert certificate.degree == 2
    assert certificate.energy == pytest.approx(8 * np.pi, rel=1e-2)
    assert certificate.ramification_free is True
    names = {c.name for c in certificate.checks}
    assert {"density_band", "density_upper", "energy_area", "degree", "riemann_hurwitz"} <= names
    assert {f"mu{i}.{k}" for i in range(3) for k in ("second_vs_wp", "strict_convexity")} <= names


def test_certificate_records_reproduce_checks(certificate):
    for c in certificate.checks:
        if c.name.endswith("second_vs_wp"):
            assert c.passed == (abs(c.value - c.reference) <= c.tolerance * c.reference)
        if c.name.endswith("nonneg"):
            assert c.passed == (c.value >= -c.tolerance)
    for rec in certificate.mus:
        assert rec.convexity_constant > 0
        assert rec.curve_min_gap >= -1e-6
        assert rec.formula2 >= rec.diagnostic - 1e-6 * certificate.energy


def test_identity_certificate():
    rep = covering_certificate(2, 1, 3, n_mu=2, with_curves=False)
    assert rep.passed, rep.failures()
    assert rep.degree == 1
    assert rep.energy == pytest.approx(4 * np.pi, rel=1e-2)


def test_scaled_start_reconverges():
    rep = covering_certificate(2, 2, 3, n_mu=1, with_curves=False, start_scale=0.8)
    assert rep.passed, rep.failures()
    assert rep.energy == pytest.approx(8 * np.pi, rel=1e-2)


def test_cover_degree_must_be_positive():
    with pytest.raises(InvalidArgument):
        covering_certificate(2, 0)


def test_certify_off_critical(twisted):
    rep = certify_critical(twisted.initial, ())
    assert not rep.is_critical
    assert rep.hopf_sup > rep.critical_tol
    assert not rep.passed


def test_certify_without_mus(cover_critical):
    rep = certify_critical(cover_critical, ())
    assert [c.name for c in rep.checks] == ["hopf_sup", "riemann_hurwitz"]
    assert rep.mus == []
    assert rep.hopf_sup == hopf_sup_norm(cover_critical)


@pytest.mark.xfail(strict=True, reason="the level-3 minimiser's Hopf sup-norm is 2.4e-4, above the 1e-4 "
                                       "critical tolerance; level 4 resolves it")
def test_certify_covering_level3_all_pass(cover_critical, cover_mus):
    assert certify_critical(cover_critical, cover_mus).passed


@pytest.mark.slow
def test_certify_covering_level4_all_pass():
    from wplab.variation import covering_scenario

    sc = covering_scenario(2, 2, 4)
    m, _ = sc.critical()
    rep = certify_critical(m, sc.mu_list(3, 6))
    assert rep.is_critical
    assert rep.passed, rep.failures()


# ------------------------------------------------------------------ output

def test_csv_headers(tmp_path, cover_curves, certificate):
    write_curve_csv(tmp_path / "curve.csv", cover_curves[0])
    write_derivs_csv(tmp_path / "derivs.csv", certificate.mus)
    with open(tmp_path / "curve.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CURVE_HEADER == ["t", "energy", "grad_norm"]
    assert [float(r[1]) for r in rows[1:]] == list(cover_curves[0].energy)
    with open(tmp_path / "derivs.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == DERIVS_HEADER == ["mu_id", "fd1", "formula1", "fd2", "formula2", "wp4", "hproj4"]
    assert len(rows) == 4


def test_report_lines_are_key_value(tmp_path, certificate):
    write_report(tmp_path / "cert.txt", certificate, {"genus": 2})
    lines = (tmp_path / "cert.txt").read_text().splitlines()
    assert all(": " in ln for ln in lines)
    keys = dict(ln.split(": ", 1) for ln in lines)
    assert keys["passed"] == "true"
    assert keys["config.genus"] == "2"
    assert float(keys["energy"]) == certificate.energy


def test_report_pass_flag():
    rep = CertificationReport("x", True, 0.0, 1e-4, 1.0, 1.0, 1, 1.0, 0.0, 1.0, 1.0)
    assert rep.passed
    rep.add("a", 1.0, 0.0, 0.5, False)
    assert not rep.passed and [c.name for c in rep.failures()] == ["a"]


def test_mu_list_is_independent(genus2):
    mus = mu_list(genus2, 3, 6)
    assert len(mus) == 3
    from wplab.qdiff import sample_points

    z = sample_points(genus2, 64, seed=99)
    M = np.stack([mu.q(z) for mu in mus])
    s = np.linalg.svd(M, compute_uv=False)
    assert s[-1] > 1e-6 * s[0]
