"""Equivariant harmonic maps into the hyperbolic disk by discrete energy minimisation.

A map stores one target value per vertex orbit.  The value used at an
occurrence with deck transform D is phi(D)(v), where phi is the
homomorphism of surface groups; the map is affine on every face in the
face's own chart.  The energy against the metric g(t) is evaluated with the
6-point rule, with rho^2 taken at the mapped quadrature nodes.

Complex gradients follow the convention dE = Re(conj(g) dv).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .disk import (MoebiusTransform, apply_arrays, coefficient_arrays, conformal_factor,
                   derivative_arrays, second_derivative_arrays)
from .errors import IllResolvedDegree, InvalidArgument, MapOutOfRange, NonConvergence
from .mesh import QUAD_BARY, QUAD_WEIGHTS, TriangulatedDomain
from .surface import FuchsianSurface, Homomorphism


class EquivariantMap:
    """Piecewise-affine equivariant map from a triangulated domain into the disk.

    Parameters
    ----------
    domain : TriangulatedDomain
    target : FuchsianSurface
    hom : Homomorphism
        Images of the domain's ambient generators in the target group.
    values : array of complex, shape (norbits,)
        Target value of each vertex orbit (at its representative).
    """

    def __init__(self, domain: TriangulatedDomain, target: FuchsianSurface, hom: Homomorphism, values):
        self.domain = domain
        self.target = target
        self.hom = hom
        self.values = np.array(values, dtype=complex)
        if self.values.shape != (domain.n_orbits,):
            raise InvalidArgument("one value per vertex orbit is required")

    def copy(self, values=None):
        return EquivariantMap(self.domain, self.target, self.hom,
                              self.values if values is None else values)

    @cached_property
    def occurrence_coefficients(self):
        """SU(1,1) coefficients of phi(D_i) for every occurrence i."""
        cache = {}
        out = []
        for w in self.domain.deck_words:
            if w not in cache:
                cache[w] = self.hom(w)
            out.append(cache[w])
        return coefficient_arrays(out)

    def _share_cache(self, other):
        if "occurrence_coefficients" in self.__dict__:
            other.__dict__["occurrence_coefficients"] = self.occurrence_coefficients
        return other

    def with_values(self, values):
        return self._share_cache(self.copy(values))

    def occurrence_values(self, values=None):
        v = self.values if values is None else values
        a, b = self.occurrence_coefficients
        return apply_arrays(a, b, v[self.domain.orbit])

    def derivatives(self, values=None):
        """Per-face (u_z, u_zbar) of the affine interpolant in each face's chart."""
        U = self.occurrence_values(values)[self.domain.faces]
        return np.sum(U * self.domain.dz, axis=1), np.sum(U * self.domain.dzbar, axis=1)

    def equivariance_defect(self):
        """Largest |used value - phi(D) v_rep| over occurrences (zero by construction)."""
        a, b = self.occurrence_coefficients
        used = self.occurrence_values()
        direct = np.array([self.hom(w)(self.values[o]) for w, o in
                           zip(self.domain.deck_words, self.domain.orbit)])
        return float(np.abs(used - direct).max())

    def conjugated(self):
        """Orientation-conjugated map v -> conj(v) with conjugated homomorphism."""
        return EquivariantMap(self.domain, self.target, self.hom.conjugated(), np.conj(self.values))

    def recentered(self, point=None):
        """Gauge transform u -> tau u, phi -> tau phi tau^{-1} with tau moving ``point`` to 0."""
        if point is None:
            point = self.values[np.argmin(np.abs(self.domain.vertices[self.domain.representative]))]
        tau = MoebiusTransform(1.0, -complex(point))
        hom = Homomorphism([tau @ g @ tau.inverse() for g in self.hom.images])
        return EquivariantMap(self.domain, self.target, hom, tau(self.values))


def identity_map(domain: TriangulatedDomain, target: FuchsianSurface = None, hom: Homomorphism = None):
    """Map v = z with phi the identity on the ambient group (inclusion for covers)."""
    target = target or domain.surface
    hom = hom or Homomorphism(list(domain.surface.ambient))
    return EquivariantMap(domain, target, hom, domain.vertices[domain.representative])


def perturbed(m: EquivariantMap, size: float, seed: int = 0) -> EquivariantMap:
    """Move every stored value by a random displacement of hyperbolic length about ``size``.

    The displacement is applied in the chart centred at the value,
    v -> (v + w) / (1 + conj(v) w) with |w| ~ size/2, so points close to the
    rim stay inside the disk.
    """
    rng = np.random.default_rng(seed)
    w = 0.5 * size * (rng.normal(size=m.values.shape) + 1j * rng.normal(size=m.values.shape)) / np.sqrt(2)
    v = m.values
    return m.with_values((v + w) / (1.0 + np.conj(v) * w))


# ----------------------------------------------------------------------------
# energy kernels

def _real_block(c):
    """Real 2x2 matrices of multiplication by complex c, shape c.shape + (2, 2)."""
    c = np.asarray(c)
    out = np.empty(c.shape + (2, 2))
    out[..., 0, 0] = c.real
    out[..., 0, 1] = -c.imag
    out[..., 1, 0] = c.imag
    out[..., 1, 1] = c.real
    return out


_E = np.array([[0.0, -1.0], [1.0, 0.0]])
# node interpolation as real (6 nodes, 2, 6) blocks
_N = np.einsum("qk,ab->qakb", QUAD_BARY, np.eye(2)).reshape(6, 2, 6)


@dataclass
class EnergyParts:
    energy: float
    face_energy: np.ndarray
    uz: np.ndarray
    uzb: np.ndarray
    unodes: np.ndarray
    gradient: np.ndarray = None
    hessian: sp.csr_matrix = None


def _coefficients(family, t, domain):
    if family is None:
        shape = domain.nodes.shape
        return np.ones(shape), np.zeros(shape, dtype=complex)
    return family.node_coefficients(t)


def evaluate(m: EquivariantMap, family=None, t: float = 0.0, values=None, order: int = 0) -> EnergyParts:
    """Energy and optionally its gradient (order >= 1) and Hessian (order 2)."""
    dom = m.domain
    v = m.values if values is None else values
    a_n, b_n = _coefficients(family, t, dom)
    occ = m.occurrence_values(v)
    U = occ[dom.faces]  # (nf, 3)
    dz, dzb = dom.dz, dom.dzbar
    uz = np.sum(U * dz, axis=1)
    uzb = np.sum(U * dzb, axis=1)
    un = U @ QUAD_BARY.T  # (nf, 6)
    r2 = un.real**2 + un.imag**2
    if np.any(r2 >= 1.0):
        raise MapOutOfRange("mapped quadrature node left the unit disk")
    s = 1.0 / (1.0 - r2)
    f = 4.0 * s * s
    S = (np.abs(uz) ** 2 + np.abs(uzb) ** 2)[:, None]
    W = (uzb * np.conj(uz))[:, None]
    Q = a_n * S - 2.0 * np.real(b_n * W)
    wts = dom.node_weights
    face_energy = np.sum(wts * f * Q, axis=1)
    parts = EnergyParts(float(np.sum(face_energy)), face_energy, uz, uzb, un)
    if order < 1:
        return parts

    # gradient with respect to the occurrence values of each face corner
    fg = 16.0 * un * s**3  # complex gradient of rho^2 at the nodes
    GQ = (a_n[:, :, None] * 2.0 * (uz[:, None, None] * np.conj(dz)[:, None, :]
                                   + uzb[:, None, None] * np.conj(dzb)[:, None, :])
          - 2.0 * (np.conj(b_n)[:, :, None] * uz[:, None, None] * np.conj(dzb)[:, None, :]
                   + b_n[:, :, None] * uzb[:, None, None] * np.conj(dz)[:, None, :]))
    Gc = np.sum(wts[:, :, None] * (f[:, :, None] * GQ + (Q * fg)[:, :, None] * QUAD_BARY[None, :, :]), axis=1)
    g_occ = np.zeros(dom.n_vertices, dtype=complex)
    np.add.at(g_occ, dom.faces.ravel(), Gc.ravel())
    ca, cb = m.occurrence_coefficients
    vo = v[dom.orbit]
    d1 = derivative_arrays(ca, cb, vo)
    parts.gradient = dom.orbit_sum(np.conj(d1) * g_occ)
    if order < 2:
        return parts

    # Hessian in real coordinates (x0, y0, x1, y1, x2, y2) per face
    nf = dom.n_faces
    Ma = _real_block(dz).transpose(0, 2, 1, 3).reshape(nf, 2, 6)
    Mb = _real_block(dzb).transpose(0, 2, 1, 3).reshape(nf, 2, 6)
    SA = np.einsum("fai,faj->fij", Ma, Ma) + np.einsum("fai,faj->fij", Mb, Mb)
    SR = 0.5 * (np.einsum("fai,faj->fij", Mb, Ma) + np.einsum("fai,faj->fij", Ma, Mb))
    EMa = np.einsum("ab,fbj->faj", _E, Ma)
    SI_half = np.einsum("fai,faj->fij", Mb, EMa)
    SI = 0.5 * (SI_half + SI_half.transpose(0, 2, 1))
    Ur = np.stack([U.real, U.imag], axis=2).reshape(nf, 6)
    SAU = np.einsum("fij,fj->fi", SA, Ur)
    SRU = np.einsum("fij,fj->fi", SR, Ur)
    SIU = np.einsum("fij,fj->fi", SI, Ur)
    wf = wts * f
    ca_w = np.sum(wf * a_n, axis=1)
    cr_w = np.sum(wf * b_n.real, axis=1)
    ci_w = np.sum(wf * b_n.imag, axis=1)
    H = 2.0 * (ca_w[:, None, None] * SA - 2.0 * cr_w[:, None, None] * SR + 2.0 * ci_w[:, None, None] * SI)
    # S_q U per node, shape (nf, 6 nodes, 6)
    SqU = (a_n[:, :, None] * SAU[:, None, :] - 2.0 * b_n.real[:, :, None] * SRU[:, None, :]
           + 2.0 * b_n.imag[:, :, None] * SIU[:, None, :])
    grad_f = np.stack([fg.real, fg.imag], axis=2)  # (nf, 6, 2)
    Ngf = np.einsum("qai,fqa->fqi", _N, grad_f)  # (nf, 6, 6)
    cross = np.einsum("fq,fqi,fqj->fij", wts, SqU, Ngf)
    H += 2.0 * (cross + cross.transpose(0, 2, 1))
    r = np.stack([un.real, un.imag], axis=2)
    hess_f = (16.0 * s**3)[:, :, None, None] * np.eye(2) + (96.0 * s**4)[:, :, None, None] * np.einsum("fqa,fqb->fqab", r, r)
    NHN = np.einsum("qai,fqab,qbj->fqij", _N, hess_f, _N)
    H += np.einsum("fq,fqij->fij", wts * Q, NHN)

    # change of variables to orbit values: U_i = Phi_i(v)
    J = _real_block(d1)  # (nv, 2, 2)
    Jf = J[dom.faces]  # (nf, 3, 2, 2)
    T = np.zeros((nf, 6, 6))
    for k in range(3):
        T[:, 2 * k:2 * k + 2, 2 * k:2 * k + 2] = Jf[:, k]
    Ho = np.einsum("fki,fkl,flj->fij", T, H, T)
    # second-order term of the Moebius reparametrisation
    c = np.conj(g_occ) * second_derivative_arrays(ca, cb, vo)
    K2 = np.empty((dom.n_vertices, 2, 2))
    K2[:, 0, 0] = c.real
    K2[:, 0, 1] = -c.imag
    K2[:, 1, 0] = -c.imag
    K2[:, 1, 1] = -c.real

    orb = dom.orbit[dom.faces]  # (nf, 3)
    idx = (2 * orb[:, :, None] + np.arange(2)[None, None, :]).reshape(nf, 6)
    rows = np.repeat(idx, 6, axis=1).ravel()
    cols = np.tile(idx, (1, 6)).ravel()
    vals = Ho.ravel()
    oidx = 2 * dom.orbit[:, None] + np.arange(2)[None, :]
    rows = np.concatenate([rows, np.repeat(oidx, 2, axis=1).ravel()])
    cols = np.concatenate([cols, np.tile(oidx, (1, 2)).ravel()])
    vals = np.concatenate([vals, K2.ravel()])
    n2 = 2 * dom.n_orbits
    Hs = sp.csr_matrix((vals, (rows, cols)), shape=(n2, n2))
    parts.hessian = 0.5 * (Hs + Hs.T)
    return parts


# ----------------------------------------------------------------------------
# public operations

def energy(m: EquivariantMap, family=None, t: float = 0.0) -> float:
    """Discrete energy of the map against g(t) (t=0 gives the hyperbolic domain metric)."""
    return evaluate(m, family, t).energy


def tension_gradient(m: EquivariantMap, family=None, t: float = 0.0) -> np.ndarray:
    """Complex gradient of the discrete energy with respect to the orbit values."""
    return evaluate(m, family, t, order=1).gradient


def energy_hessian(m: EquivariantMap, family=None, t: float = 0.0) -> sp.csr_matrix:
    """Real Hessian in coordinates (Re v_0, Im v_0, Re v_1, ...)."""
    return evaluate(m, family, t, order=2).hessian


def gradient_norm(values, gradient) -> float:
    """Sup over orbits of the target-metric dual norm |g| / rho(v) of the gradient.

    The chart gradient at v is rho(v) times the gradient with respect to
    hyperbolic displacement, so this is the size of the tension independent
    of how close the stored value sits to the rim.
    """
    rho = 2.0 / (1.0 - np.abs(values) ** 2)
    return float(np.max(np.abs(gradient) / rho))


def _face_volume(m, family, t):
    dom = m.domain
    if family is None or t == 0:
        return dom.integrate_per_face(dom.lambda_sq_nodes)
    return dom.integrate_per_face(2.0 * family.volume_nodes(t))


def energy_density(m: EquivariantMap, family=None, t: float = 0.0, at_nodes: bool = False):
    """Energy density 1/2 |du|^2.

    Per face, the face energy divided by the face's g(t)-area; with
    ``at_nodes`` the pointwise values at the quadrature nodes.
    """
    if at_nodes:
        dom = m.domain
        a_n, b_n = _coefficients(family, t, dom)
        p = evaluate(m, family, t)
        S = (np.abs(p.uz) ** 2 + np.abs(p.uzb) ** 2)[:, None]
        W = (p.uzb * np.conj(p.uz))[:, None]
        vol = dom.lambda_sq_nodes if (family is None or t == 0) else 2.0 * family.volume_nodes(t)
        return conformal_factor(p.unodes) * (a_n * S - 2.0 * np.real(b_n * W)) / vol
    p = evaluate(m, family, t)
    return p.face_energy / _face_volume(m, family, t)


def hopf_differential(m: EquivariantMap) -> np.ndarray:
    """Per-face Hopf differential rho^2(u(barycentre)) u_z conj(u_zbar)."""
    uz, uzb = m.derivatives()
    ub = m.occurrence_values()[m.domain.faces].mean(axis=1)
    return conformal_factor(ub) * uz * np.conj(uzb)


def beltrami_of_family(family, t: float):
    """Beltrami coefficient nu of g(t) at the quadrature nodes, g(t) ~ |dz + nu dzbar|^2."""
    family.check_t(t)
    k = t * family.q_nodes / (family.lam2_nodes * (1.0 + t * t * (family.h_nodes + family.alpha_nodes)))
    return np.conj(k) * 2.0 / (1.0 + np.sqrt(1.0 - 4.0 * np.abs(k) ** 2))


def _face_gradient_z(domain, node_values):
    """d/dz of the per-face least-squares affine fit to node values."""
    x = domain.nodes.real
    y = domain.nodes.imag
    X = np.stack([np.ones_like(x), x, y], axis=2)  # (nf, 6, 3)
    XtX = np.einsum("fqi,fqj->fij", X, X)
    Xtv = np.einsum("fqi,fq->fi", X, node_values)
    c = np.linalg.solve(XtX, Xtv[..., None])[..., 0]
    return 0.5 * (c[:, 1] - 1j * c[:, 2])


def structure_hopf(m: EquivariantMap, family=None, t: float = 0.0):
    """(2,0)-part psi of the pulled-back metric for the complex structure of g(t).

    psi is the coefficient of (dz + nu dzbar)^2; at t=0 it is the Hopf
    differential.  Returns (psi, nu, nu_z) per face.
    """
    dom = m.domain
    phi = hopf_differential(m)
    if family is None or t == 0:
        z = np.zeros(dom.n_faces, dtype=complex)
        return phi, z, z
    uz, uzb = m.derivatives()
    ub = m.occurrence_values()[dom.faces].mean(axis=1)
    Q = 0.5 * conformal_factor(ub) * (np.abs(uz) ** 2 + np.abs(uzb) ** 2)
    nu_nodes = beltrami_of_family(family, t)
    nu = nu_nodes.mean(axis=1)
    nu_z = _face_gradient_z(dom, nu_nodes)
    nb = np.conj(nu)
    psi = (phi - 2.0 * Q * nb + np.conj(phi) * nb**2) / (1.0 - np.abs(nu) ** 2) ** 2
    return psi, nu, nu_z


def holomorphy_residual(m: EquivariantMap, family=None, t: float = 0.0, phi=None):
    """Dual-norm size of the weak d-bar of the Hopf differential.

    For the complex structure of g(t) with Beltrami coefficient nu, a
    holomorphic quadratic differential psi (coefficient of (dz + nu dzbar)^2)
    satisfies d_zbar psi - d_z(nu psi) - nu_z psi = 0.  For every interior
    vertex i the weak form r_i = sum_f A_f psi_f (-d_zbar p_i + nu d_z p_i - nu_z / 3)
    is assembled; the residual is sqrt(r^H K^{-1} r), the norm of the
    functional on H^1_0 of the domain interior, divided by the L^2 norm of psi.

    Returns
    -------
    (float, float)
        Relative and absolute residual.
    """
    from .wolf import flat_stiffness

    dom = m.domain
    if phi is None:
        psi, nu, nu_z = structure_hopf(m, family, t)
    else:
        psi = np.asarray(phi)
        nu = nu_z = np.zeros(dom.n_faces, dtype=complex)
    inner = np.flatnonzero(dom.interior_occurrence)
    area = dom.face_signed_area
    contrib = (area * psi)[:, None] * (-dom.dzbar + nu[:, None] * dom.dz - (nu_z / 3.0)[:, None])
    r = np.zeros(dom.n_vertices, dtype=complex)
    np.add.at(r, dom.faces.ravel(), contrib.ravel())
    r = r[inner]
    K = flat_stiffness(dom)[inner][:, inner].tocsc()
    lu = spla.splu(K)
    x = lu.solve(r.real) + 1j * lu.solve(r.imag)
    absolute = float(np.sqrt(max(np.real(np.vdot(r, x)), 0.0)))
    norm = float(np.sqrt(np.sum(area * np.abs(psi) ** 2)))
    return (absolute / norm if norm > 0 else 0.0), absolute


def degree(m: EquivariantMap):
    """Degree from the integral of rho^2 (|u_z|^2 - |u_zbar|^2) over Area(target).

    Returns
    -------
    (int, float, float)
        Rounded degree, the real integral ratio, and its distance to the integer.
    """
    dom = m.domain
    p = evaluate(m)
    jac = (np.abs(p.uz) ** 2 - np.abs(p.uzb) ** 2)[:, None]
    value = dom.integrate(conformal_factor(p.unodes) * jac)
    area = -2.0 * np.pi * m.target.euler_characteristic
    x = value / area
    k = int(np.round(x))
    dist = abs(x - k)
    if dist > 0.2:
        raise IllResolvedDegree(f"degree integral {x:.4f} is {dist:.3f} from an integer")
    return k, float(x), float(dist)


@dataclass
class EnergyReport:
    """Summary of a map's energy state."""

    energy: float
    density: np.ndarray
    hopf: np.ndarray
    gradient_norm: float
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = True


def make_report(m: EquivariantMap, family=None, t: float = 0.0, iterations: int = 0, history=None,
                converged: bool = True) -> EnergyReport:
    p = evaluate(m, family, t, order=1)
    return EnergyReport(
        energy=p.energy,
        density=p.face_energy / _face_volume(m, family, t),
        hopf=hopf_differential(m),
        gradient_norm=gradient_norm(m.values, p.gradient),
        iterations=iterations,
        history=list(history or [p.energy]),
        converged=converged,
    )


@dataclass
class SolverConfig:
    """Tolerances of :func:`minimize`."""

    tol: float = 1e-10
    max_iter: int = 100
    armijo: float = 1e-4
    max_halvings: int = 40
    newton: bool = True


def _to_real(g):
    return np.stack([g.real, g.imag], axis=1).ravel()


def _to_complex(x):
    return x[0::2] + 1j * x[1::2]


def minimize(map0: EquivariantMap, family=None, t: float = 0.0, cfg: SolverConfig = None):
    """Minimise the discrete energy in the equivariant class of ``map0``.

    Newton steps with the exact Hessian are used when they are descent
    directions; otherwise the Hessian is shifted by increasing multiples of a
    positive definite metric model (Levenberg style) until the step descends.
    With ``cfg.newton`` false the metric model alone preconditions the
    gradient.
    Every step is accepted by Armijo backtracking (halving), so the energy
    never increases.

    Returns
    -------
    (EquivariantMap, EnergyReport)

    Raises
    ------
    NonConvergence
        When ``cfg.max_iter`` steps do not reach
        gradient_norm <= cfg.tol * max(1, E).
    """
    cfg = cfg or SolverConfig()
    if cfg.tol <= 0:
        raise InvalidArgument("solver tolerance must be positive")
    m = map0.with_values(map0.values.copy())
    if np.abs(m.values).max() >= 1 - 1e-6:
        m = m.recentered()
    parts = evaluate(m, family, t, order=2 if cfg.newton else 1)
    history = [parts.energy]
    for it in range(cfg.max_iter + 1):
        g = parts.gradient
        gnorm = gradient_norm(m.values, g)
        if gnorm <= cfg.tol * max(1.0, parts.energy):
            return m, make_report(m, family, t, it, history)
        if it == cfg.max_iter:
            break
        gr = _to_real(g)
        step = _descent_step(m, parts, gr, cfg.newton)
        slope = float(step @ gr)
        alpha = 1.0
        accepted = False
        for _ in range(cfg.max_halvings):
            trial = m.values + alpha * _to_complex(step)
            try:
                e_trial = evaluate(m, family, t, values=trial).energy
            except MapOutOfRange:
                alpha *= 0.5
                continue
            if e_trial <= parts.energy + cfg.armijo * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # no decrease at rounding level: the iterate is as good as it gets
            if abs(slope) <= 1e-14 * max(1.0, parts.energy):
                return m, make_report(m, family, t, it, history)
            break
        m = m.with_values(trial)
        if np.abs(m.values).max() >= 1 - 1e-6:
            m = m.recentered()
        parts = evaluate(m, family, t, order=2 if cfg.newton else 1)
        history.append(parts.energy)
    report = make_report(m, family, t, len(history) - 1, history, converged=False)
    raise NonConvergence(f"no convergence after {cfg.max_iter} iterations "
                         f"(gradient {report.gradient_norm:.3e}, energy {report.energy:.12g})",
                         report=report, map=m)


def _metric_matrix(m: EquivariantMap):
    """Real doubled (K + M) weighted by rho(v) on both sides, an SPD model Hessian."""
    from .wolf import assemble_laplacian

    lap = assemble_laplacian(m.domain)
    rho = sp.diags(2.0 / (1.0 - np.abs(m.values) ** 2))
    A = rho @ (lap.stiffness + sp.diags(lap.mass)) @ rho
    return sp.kron(A, sp.identity(2), format="csc")


def _descent_step(m: EquivariantMap, parts: EnergyParts, gr, newton: bool):
    """Newton step, shifted towards the metric model until it is a descent direction."""
    P = _metric_matrix(m)
    if not newton:
        return -spla.splu(P).solve(gr)
    Hm = parts.hessian.tocsc()
    scale = float(np.mean(np.abs(Hm.diagonal())) / np.mean(P.diagonal()))
    gn = np.linalg.norm(gr)
    for sigma in [0.0] + [scale * 10.0**k for k in range(-4, 9)]:
        try:
            step = -spla.splu((Hm + sigma * P).tocsc()).solve(gr)
        except RuntimeError:
            continue
        if np.all(np.isfinite(step)) and step @ gr < -1e-10 * np.linalg.norm(step) * gn:
            return step
    return -spla.splu(P).solve(gr)


# ----------------------------------------------------------------------------
# checkpoint format

MAP_HEADER = "WPLAB-MAP v1"


def write_map(m: EquivariantMap, path):
    """Write values and homomorphism images in the ``WPLAB-MAP v1`` format."""
    r = lambda x: repr(float(x))  # noqa: E731
    lines = [f"{MAP_HEADER} orbits {m.domain.n_orbits} generators {len(m.hom.images)}"]
    for g in m.hom.images:
        lines.append(f"HOM {r(g.alpha.real)} {r(g.alpha.imag)} {r(g.beta.real)} {r(g.beta.imag)}")
    for i, v in enumerate(m.values):
        lines.append(f"VALUE {i} {r(v.real)} {r(v.imag)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_map(path, domain: TriangulatedDomain, target: FuchsianSurface) -> EquivariantMap:
    """Read a map written by :func:`write_map` onto the given domain."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(MAP_HEADER):
        raise InvalidArgument("not a WPLAB-MAP v1 file")
    images = []
    values = np.zeros(domain.n_orbits, dtype=complex)
    seen = 0
    for ln in lines[1:]:
        tok = ln.split()
        if not tok:
            continue
        if tok[0] == "HOM":
            x = [float(v) for v in tok[1:5]]
            images.append(MoebiusTransform(complex(x[0], x[1]), complex(x[2], x[3])))
        elif tok[0] == "VALUE":
            values[int(tok[1])] = complex(float(tok[2]), float(tok[3]))
            seen += 1
        else:
            raise InvalidArgument(f"unknown record {tok[0]!r}")
    if seen != domain.n_orbits:
        raise InvalidArgument("map file does not match the domain's orbit count")
    return EquivariantMap(domain, target, Homomorphism(images), values)
