"""Desk-scale acceptance suite shared by ``verify-all`` and the test suite.

Each criterion returns the measured numbers together with the bound it is
judged against, so that a failure can be read off the report directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .harmonic import SolverConfig, energy, evaluate, holomorphy_residual, identity_map, minimize
from .jacobi import BundleSection, JacobiSystem
from .mesh import hyperbolic_area, triangulate
from .qdiff import qb_pairing, wp_norm_sq
from .surface import build_surface
from .variation import (Check, constant_scenario, covering_certificate, covering_scenario, energy_curve,
                        first_variation_formula, mu_list, twisted_scenario)
from .wolf import WolfMetricFamily, alpha_bound_slack

AREA_TOL = 1e-3
ALPHA_TOL = 1e-6
SYMMETRY_TOL = 1e-12
RAYLEIGH_TOL = 1e-10
REALITY_TOL = 1e-10
DENSITY_BAND = (0.99, 1.01)
ENERGY_TOL = 1e-2
DEGREE_SLACK = 5e-2
CRITICAL_FIRST_TOL = 1e-4
FIRST_FD_TOL = 5e-2
SECOND_TOL = 0.1
CONVEXITY_TOL = 1e-6
KERNEL_TOL = 1e-8
GRADIENT_TOL = 1e-5
PAIRING_TOL = 1e-12
IDENTITY_TOL = 1e-10
RATIO_TOL = 0.6


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name, value, reference, tolerance, passed):
        self.checks.append(Check(name, float(value), float(reference), float(tolerance), bool(passed)))

    def line(self):
        worst = [c for c in self.checks if not c.passed] or self.checks
        detail = "; ".join(f"{c.name}={c.value:.3e} (ref {c.reference:.3e}, tol {c.tolerance:.1e})"
                           for c in worst[:3])
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.title} :: {detail}"


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b))


class AcceptanceContext:
    """Shared scenario data; every expensive object is built once on first use."""

    def __init__(self, genus=2, d=2, level=3, truncation=6, n_mu=3, seed=0, kappa=None, cfg=None):
        self.genus = genus
        self.d = d
        self.level = level
        self.truncation = truncation
        self.n_mu = n_mu
        self.seed = seed
        self.kappa = kappa
        self.cfg = cfg or SolverConfig()

    @cached_property
    def cover(self):
        sc = covering_scenario(self.genus, self.d, self.level)
        sc.solver = self.cfg
        return sc

    @cached_property
    def critical(self):
        return self.cover.critical()[0]

    @cached_property
    def mus(self):
        return self.cover.mu_list(self.n_mu, self.truncation)

    @cached_property
    def jacobi(self):
        return JacobiSystem(self.critical) if self.kappa is None else JacobiSystem(self.critical, self.kappa)

    @cached_property
    def certificate(self):
        return covering_certificate(self.genus, self.d, self.level, mus=self.mus, cfg=self.cfg, kappa=self.kappa)

    @cached_property
    def twisted(self):
        sc = twisted_scenario(self.genus, self.level)
        sc.solver = self.cfg
        return sc


def criterion_1(ctx: AcceptanceContext):
    res = CriterionResult(1, "Gauss-Bonnet area")
    for g in (2, 3):
        dom = triangulate(build_surface(g), ctx.level)
        ref = 4.0 * np.pi * (g - 1)
        err = _rel(hyperbolic_area(dom), ref)
        res.add(f"genus{g}_area_rel_err", err, ref, AREA_TOL, err <= AREA_TOL)
    return res


def criterion_2(ctx: AcceptanceContext):
    res = CriterionResult(2, "alpha >= h/3 pointwise")
    sets = [("cover", ctx.cover.domain, ctx.mus)]
    base = triangulate(build_surface(ctx.genus), ctx.level)
    sets.append(("base", base, mu_list(base.surface, ctx.n_mu, ctx.truncation)))
    for label, dom, mus in sets:
        for i, mu in enumerate(mus):
            margin, slack = alpha_bound_slack(WolfMetricFamily(dom, mu))
            res.add(f"{label}_mu{i}_margin", margin, -slack, ALPHA_TOL, margin >= -slack)
    return res


def criterion_3(ctx: AcceptanceContext, samples: int = 50):
    res = CriterionResult(3, "Jacobi operator real, symmetric, semi-positive")
    J = ctx.jacobi
    A = J.jacobi_form
    scale = abs(A).max()
    asym = abs(A - A.conj().T).max() / scale
    res.add("matrix_asymmetry", asym, 0.0, SYMMETRY_TOL, asym <= SYMMETRY_TOL)
    rng = np.random.default_rng(ctx.seed)
    n = J.n
    worst_rq, worst_adj, worst_real = np.inf, 0.0, 0.0
    for _ in range(samples):
        X = BundleSection(rng.normal(size=n) + 1j * rng.normal(size=n), rng.normal(size=n) + 1j * rng.normal(size=n))
        Y = BundleSection(rng.normal(size=n) + 1j * rng.normal(size=n), rng.normal(size=n) + 1j * rng.normal(size=n))
        JX = J.jacobi_apply(X)
        worst_rq = min(worst_rq, J.section_inner(JX, X).real / J.section_inner(X, X).real)
        adj = abs(J.section_inner(JX, Y) - J.section_inner(X, J.jacobi_apply(Y)))
        worst_adj = max(worst_adj, adj / (J.section_norm(JX) * J.section_norm(Y)))
        R = BundleSection.real(rng.normal(size=n) + 1j * rng.normal(size=n))
        JR = J.jacobi_apply(R)
        worst_real = max(worst_real, JR.reality_defect() / np.abs(JR.vector()).max())
    res.add("operator_adjointness", worst_adj, 0.0, SYMMETRY_TOL, worst_adj <= SYMMETRY_TOL)
    res.add("min_rayleigh_quotient", worst_rq, 0.0, RAYLEIGH_TOL, worst_rq >= -RAYLEIGH_TOL)
    res.add("real_section_defect", worst_real, 0.0, REALITY_TOL, worst_real <= REALITY_TOL)
    return res


def criterion_4(ctx: AcceptanceContext):
    res = CriterionResult(4, "covering certificate")
    rep = ctx.certificate
    lo, hi = DENSITY_BAND
    res.add("density_min", rep.density_min, lo, 0.0, rep.density_min >= lo)
    res.add("density_max", rep.density_max, hi, 0.0, rep.density_max <= hi)
    area = 2.0 * np.pi * ctx.d * (2 * ctx.genus - 2)
    err = _rel(rep.energy, area)
    res.add("energy_vs_area_rel", err, area, ENERGY_TOL, err <= ENERGY_TOL)
    res.add("degree", rep.degree if rep.degree is not None else np.nan, ctx.d, 0.0, rep.degree == ctx.d)
    res.add("degree_slack", rep.degree_slack, 0.0, DEGREE_SLACK, rep.degree_slack <= DEGREE_SLACK)
    return res


def criterion_5(ctx: AcceptanceContext, twisted_mu_seeds=(0, 2)):
    res = CriterionResult(5, "first variation")
    m = ctx.critical
    E0 = energy(m)
    for i, mu in enumerate(ctx.mus):
        f1 = first_variation_formula(m, mu)
        res.add(f"covering_mu{i}_abs_over_E", abs(f1) / E0, 0.0, CRITICAL_FIRST_TOL, abs(f1) <= CRITICAL_FIRST_TOL * E0)
    sc = ctx.twisted
    mt = sc.critical()[0]
    for s in twisted_mu_seeds:
        mu = mu_list(sc.surface, 1, ctx.truncation, start=s)[0]
        curve = energy_curve(sc, mu)
        f1 = first_variation_formula(mt, mu)
        err = _rel(f1, curve.fd_first)
        res.add(f"twisted_seed{s}_rel_err", err, curve.fd_first, FIRST_FD_TOL, err <= FIRST_FD_TOL)
    return res


def criterion_6(ctx: AcceptanceContext):
    res = CriterionResult(6, "second variation at the covering")
    for r in ctx.certificate.mus:
        vals = {"formula2": r.formula2, "fd2": r.fd2, "wp4": r.wp4, "hproj4": r.hproj4}
        worst = max(_rel(a, b) for a in vals.values() for b in vals.values())
        res.add(f"mu{r.mu_id}_spread", worst, r.wp4, SECOND_TOL, worst <= SECOND_TOL)
        low = min(vals.values())
        res.add(f"mu{r.mu_id}_min_value", low, 0.0, 0.0, low > 0)
    return res


def criterion_7(ctx: AcceptanceContext):
    res = CriterionResult(7, "convexity sweep")
    for r in ctx.certificate.mus:
        res.add(f"mu{r.mu_id}_min_gap", r.curve_min_gap, 0.0, CONVEXITY_TOL, r.curve_min_gap >= -CONVEXITY_TOL)
    return res


def kernel_invariance(J: JacobiSystem, rhs: BundleSection, rng, trials: int = 5):
    """Worst relative change of Re <J V, V> when numerical-kernel vectors are added to V."""
    V = J.solve_jacobi(J.project_off_kernel(rhs))
    base = J.section_inner(J.jacobi_apply(V), V).real
    Z = J.jacobi_kernel()
    worst = 0.0
    for _ in range(trials if Z else 0):
        W = V
        for z in Z:
            W = W + (rng.normal() + 1j * rng.normal()) * J.section_norm(V) * z
        val = J.section_inner(J.jacobi_apply(W), W).real
        worst = max(worst, abs(val - base) / abs(base))
    return worst, len(Z), base


def criterion_8(ctx: AcceptanceContext):
    res = CriterionResult(8, "solution independence of <JV, V>")
    rng = np.random.default_rng(ctx.seed)
    sc = constant_scenario(ctx.genus, min(ctx.level, 2))
    J = JacobiSystem(sc.initial)
    n = J.n
    rhs = BundleSection(rng.normal(size=n) + 1j * rng.normal(size=n), rng.normal(size=n) + 1j * rng.normal(size=n))
    worst, dim, _ = kernel_invariance(J, rhs, rng)
    res.add("constant_map_kernel_dim", dim, 4, 0.0, dim > 0)
    res.add("constant_map_rel_change", worst, 0.0, KERNEL_TOL, worst <= KERNEL_TOL)
    Jc = ctx.jacobi
    _, rhs_c = Jc.rhs_from_mu(ctx.mus[0])
    worst_c, dim_c, _ = kernel_invariance(Jc, rhs_c, rng)
    res.add(f"covering_rel_change_kernel_dim{dim_c}", worst_c, 0.0, KERNEL_TOL, worst_c <= KERNEL_TOL)
    return res


def gradient_check(m, family=None, t=0.0, directions=5, eps=1e-5, seed=0):
    """Worst relative error of the analytic directional derivative against central differences."""
    rng = np.random.default_rng(seed)
    p = evaluate(m, family, t, order=1)
    worst = 0.0
    for _ in range(directions):
        n = len(m.values)
        d = rng.normal(size=n) + 1j * rng.normal(size=n)
        d *= (1.0 - np.abs(m.values) ** 2) / np.abs(d).max()
        ep = energy(m.with_values(m.values + eps * d), family, t)
        em = energy(m.with_values(m.values - eps * d), family, t)
        fd = (ep - em) / (2 * eps)
        an = float(np.sum(np.real(np.conj(p.gradient) * d)))
        worst = max(worst, abs(fd - an) / abs(an))
    return worst


def criterion_9(ctx: AcceptanceContext):
    res = CriterionResult(9, "oracle consistencies")
    sc = twisted_scenario(ctx.genus, min(ctx.level, 2))
    m = sc.initial
    mu = mu_list(sc.surface, 1, ctx.truncation)[0]
    fam = WolfMetricFamily(sc.domain, mu)
    for label, family, t in (("t0", None, 0.0), ("t_half", fam, 0.5 * fam.t_max)):
        err = gradient_check(m, family, t, seed=ctx.seed)
        res.add(f"gradient_fd_{label}", err, 0.0, GRADIENT_TOL, err <= GRADIENT_TOL)
    dom = ctx.cover.domain
    for i, mu in enumerate(ctx.mus):
        qn = mu.q.on_domain(dom)[0]
        err = _rel(qb_pairing(qn, mu, dom), wp_norm_sq(mu, dom))
        res.add(f"pairing_mu{i}", err, 0.0, PAIRING_TOL, err <= PAIRING_TOL)
        a, b = ctx.jacobi.i_mu_du_energy_identity(mu)
        err = _rel(a, b)
        res.add(f"i_mu_du_identity_mu{i}", err, 0.0, IDENTITY_TOL, err <= IDENTITY_TOL)
    return res


def criterion_10(ctx: AcceptanceContext):
    res = CriterionResult(10, "refinement behaviour")
    coarse = covering_scenario(ctx.genus, ctx.d, ctx.level - 1)
    coarse.solver = ctx.cfg
    r_coarse = holomorphy_residual(coarse.critical()[0])[0]
    r_fine = holomorphy_residual(ctx.critical)[0]
    ratio = r_fine / r_coarse
    res.add("covering_hopf_residual_ratio", ratio, 0.0, RATIO_TOL, ratio <= RATIO_TOL)
    ident = [minimize(identity_map(triangulate(build_surface(ctx.genus), lv)), cfg=ctx.cfg)[0]
             for lv in (ctx.level - 1, ctx.level)]
    ratio = holomorphy_residual(ident[1])[0] / holomorphy_residual(ident[0])[0]
    res.add("identity_hopf_residual_ratio", ratio, 0.0, RATIO_TOL, ratio <= RATIO_TOL)
    rec = ctx.certificate.mus[0]
    fam = WolfMetricFamily(ctx.critical.domain, ctx.mus[0])
    half = energy_curve(ctx.critical, ctx.mus[0], h=fam.t_max / 8.0, family=fam, cfg=ctx.cfg)
    ratio = half.fd_second_err / rec.fd2_err
    res.add("fd_second_error_ratio", ratio, 0.0, RATIO_TOL, ratio <= RATIO_TOL)
    return res


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10)


def run_all(ctx: AcceptanceContext = None, emit=None):
    """Evaluate every criterion in order; ``emit`` receives each result line as it is produced."""
    ctx = ctx or AcceptanceContext()
    out = []
    for crit in CRITERIA:
        r = crit(ctx)
        out.append(r)
        if emit is not None:
            emit(r.line())
    return out
