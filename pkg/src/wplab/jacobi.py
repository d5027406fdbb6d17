"""Bundle calculus along an equivariant map: d-bar operator, curvature term, Jacobi operator.

Sections W = f1 d/dv + f2 d/dvbar of the pulled-back complexified tangent
bundle are stored as one complex pair per vertex orbit, expressed at the
orbit's stored target value.  At an occurrence with target transform Phi
the components become Phi'(v) f1 and conj(Phi'(v)) f2.  Bundle-valued
(0,1)-forms are stored at the quadrature nodes of every face, against dzbar
in the face's chart.

Inner products:

    sections  <W, W'> = sum_o rho^2(v_o) m_o (f1 conj(f1') + f2 conj(f2'))
    forms     <w, w'> = sum_(f,q) A_f w_q rho^2(u_q) (w1 conj(w1') + w2 conj(w2'))

with m_o the lumped hyperbolic vertex mass.  The adjoint of the d-bar
operator is its exact transpose in these inner products, so the discrete
Jacobi operator is symmetric by construction.  Complex linear operators are
solved through their real doubled form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .disk import conformal_factor, derivative_arrays, log_factor_dv
from .errors import SolverError
from .harmonic import EquivariantMap
from .mesh import QUAD_BARY

KERNEL_KAPPA = 1e-10


@dataclass
class BundleSection:
    """Complex pair (f1, f2) per vertex orbit."""

    f1: np.ndarray
    f2: np.ndarray

    @classmethod
    def from_vector(cls, x):
        n = len(x) // 2
        return cls(np.array(x[:n]), np.array(x[n:]))

    @classmethod
    def real(cls, f):
        """Real section f d/dv + conj(f) d/dvbar."""
        f = np.asarray(f, dtype=complex)
        return cls(f.copy(), np.conj(f))

    def vector(self):
        return np.concatenate([self.f1, self.f2])

    def conj_swap(self):
        """Complex conjugation of the bundle, (f1, f2) -> (conj f2, conj f1)."""
        return BundleSection(np.conj(self.f2), np.conj(self.f1))

    def reality_defect(self):
        return float(np.abs(self.f2 - np.conj(self.f1)).max()) if self.f1.size else 0.0

    def __add__(self, other):
        return BundleSection(self.f1 + other.f1, self.f2 + other.f2)

    def __sub__(self, other):
        return BundleSection(self.f1 - other.f1, self.f2 - other.f2)

    def __mul__(self, c):
        return BundleSection(c * self.f1, c * self.f2)

    __rmul__ = __mul__


@dataclass
class BundleOneForm:
    """Complex pair (w1, w2) against dzbar at every quadrature node, arrays of shape (nf, 6)."""

    w1: np.ndarray
    w2: np.ndarray

    @classmethod
    def from_vector(cls, x, shape):
        n = int(np.prod(shape))
        return cls(np.reshape(x[:n], shape), np.reshape(x[n:], shape))

    def vector(self):
        return np.concatenate([self.w1.ravel(), self.w2.ravel()])

    def __add__(self, other):
        return BundleOneForm(self.w1 + other.w1, self.w2 + other.w2)

    def __sub__(self, other):
        return BundleOneForm(self.w1 - other.w1, self.w2 - other.w2)

    def __mul__(self, c):
        return BundleOneForm(c * self.w1, c * self.w2)

    __rmul__ = __mul__


@dataclass
class ConnectionData:
    """Per-face connection coefficient c = 2 d/dv log rho at the mapped barycentre, with u_z and u_zbar."""

    c: np.ndarray
    barycenter_values: np.ndarray
    uz: np.ndarray
    uzb: np.ndarray


def _real_double(A):
    """Real symmetric form [[Re A, -Im A], [Im A, Re A]] of a complex matrix."""
    A = sp.csr_matrix(A)
    return sp.bmat([[A.real, -A.imag], [A.imag, A.real]], format="csr")


def _to_real(x):
    return np.concatenate([x.real, x.imag])


def _from_real(y):
    n = len(y) // 2
    return y[:n] + 1j * y[n:]


class _DeflatedSolver:
    """Minimum-norm solver for a real symmetric PSD matrix A with diagonal mass M.

    Eigenvectors of A x = lam M x with lam < kappa * lam_max are taken as the
    numerical kernel Z (M-orthonormal).  Solutions of A x = M P r, P the
    M-orthogonal projection off Z, are found with a sparse LU of the bordered
    system [[A, M Z], [Z^T M, -I]], which equals A + M Z Z^T M after
    elimination.
    """

    def __init__(self, A, mass, kappa=KERNEL_KAPPA, probe=8):
        self.A = sp.csc_matrix(A)
        self.mass = np.asarray(mass, dtype=float)
        self.kappa = kappa
        Mop = sp.diags(self.mass)
        n = self.A.shape[0]
        v0 = np.ones(n) / np.sqrt(n)
        self.lam_max = float(spla.eigsh(self.A, k=1, M=Mop, which="LA", v0=v0,
                                        return_eigenvectors=False, tol=1e-8)[0])
        # block inverse iteration resolves repeated eigenvalues, which a
        # single-vector Krylov method cannot separate
        sigma = -1e-6 * self.lam_max
        shifted = spla.splu(sp.csc_matrix(self.A - sigma * Mop))
        rng = np.random.default_rng(0)
        p = min(probe, n)
        while True:
            vals, Z = self._bottom_block(shifted, rng.standard_normal((n, p)))
            keep = vals < kappa * self.lam_max
            if keep.sum() < p - 1 or p >= n:
                break
            p = min(2 * p, n)
        self.smallest = vals
        Z = Z[:, keep]
        self.kernel = Z
        MZ = self.mass[:, None] * Z
        k = Z.shape[1]
        if k:
            B = sp.bmat([[self.A, sp.csc_matrix(MZ)], [sp.csc_matrix(MZ.T), -sp.identity(k)]], format="csc")
        else:
            B = self.A
        self._lu = spla.splu(B)
        self._k = k

    def _bottom_block(self, lu, X, iters=60, rtol=1e-12):
        """Lowest Ritz pairs of A x = lam M x from inverse subspace iteration."""
        vals = None
        for _ in range(iters):
            Y = lu.solve(self.mass[:, None] * X)
            G = Y.T @ (self.mass[:, None] * Y)
            L = np.linalg.cholesky(0.5 * (G + G.T))
            Q = np.linalg.solve(L, Y.T).T  # M-orthonormal
            H = Q.T @ (self.A @ Q)
            new, S = np.linalg.eigh(0.5 * (H + H.T))
            X = Q @ S
            if vals is not None and np.all(np.abs(new - vals) <= rtol * self.lam_max):
                return new, X
            vals = new
        return vals, X

    def project(self, r):
        """M-orthogonal projection of r off the numerical kernel."""
        if not self._k:
            return r
        return r - self.kernel @ (self.kernel.T @ (self.mass * r))

    def _solve_bordered(self, b):
        if self._k:
            return self._lu.solve(np.concatenate([b, np.zeros(self._k)]))[: len(b)]
        return self._lu.solve(b)

    def solve(self, r, rtol=1e-8):
        """Minimum-norm x with A x = M P r; raises SolverError above ``rtol``."""
        b = self.mass * self.project(r)
        nb = np.linalg.norm(b)
        if nb == 0:
            return np.zeros_like(b)
        x = self._solve_bordered(b)
        for _ in range(3):
            res = b - self.A @ x
            if np.linalg.norm(res) <= 1e-3 * rtol * nb:
                break
            x = x + self._solve_bordered(res)
        x = self.project(x)
        rel = float(np.linalg.norm(self.A @ x - b) / nb)
        if rel > rtol:
            raise SolverError("deflated solve did not reach tolerance", rel)
        return x


class JacobiSystem:
    """Discrete d-bar operator, curvature term and Jacobi operator along a map.

    Parameters
    ----------
    m : EquivariantMap
    kappa : float
        Relative eigenvalue threshold defining the numerical kernel.
    """

    def __init__(self, m: EquivariantMap, kappa: float = KERNEL_KAPPA):
        self.map = m
        self.domain = m.domain
        self.kappa = kappa
        dom = self.domain
        self.n = dom.n_orbits
        self.uz, self.uzb = m.derivatives()
        self.unodes = m.occurrence_values()[dom.faces] @ QUAD_BARY.T
        self.rho2_nodes = conformal_factor(self.unodes)
        ca, cb = m.occurrence_coefficients
        # Phi'(v_o) for every occurrence
        self.lift = derivative_arrays(ca, cb, m.values[dom.orbit])
        self.section_mass = conformal_factor(m.values) * self._vertex_mass()
        self.form_weights = dom.node_weights * self.rho2_nodes

    def _vertex_mass(self):
        dom = self.domain
        per_corner = (dom.lambda_sq_nodes * dom.node_weights) @ QUAD_BARY
        mass = np.zeros(dom.n_vertices)
        np.add.at(mass, dom.faces.ravel(), per_corner.ravel())
        return dom.orbit_sum(mass)

    # --------------------------------------------------------------- geometry
    @cached_property
    def connection(self) -> ConnectionData:
        ub = self.map.occurrence_values()[self.domain.faces].mean(axis=1)
        return ConnectionData(log_factor_dv(ub), ub, self.uz, self.uzb)

    @cached_property
    def connection_nodes(self):
        """c = 2 d/dv log rho at every mapped quadrature node."""
        return log_factor_dv(self.unodes)

    # -------------------------------------------------------------- operators
    @cached_property
    def d01_matrix(self):
        """Complex sparse matrix from section vectors (f1, f2) to form vectors (w1, w2)."""
        dom = self.domain
        nf = dom.n_faces
        c = self.connection_nodes
        lift_f = self.lift[dom.faces]  # (nf, 3)
        orb = dom.orbit[dom.faces]
        # entries for node (f, q) and corner k
        e1 = (dom.dzbar[:, None, :] + (c * self.uzb[:, None])[:, :, None] * QUAD_BARY[None, :, :]) * lift_f[:, None, :]
        e2 = (dom.dzbar[:, None, :] + np.conj(c * self.uz[:, None])[:, :, None] * QUAD_BARY[None, :, :]) * np.conj(lift_f)[:, None, :]
        rows = np.broadcast_to(np.arange(nf * 6).reshape(nf, 6, 1), (nf, 6, 3)).ravel()
        cols = np.broadcast_to(orb[:, None, :], (nf, 6, 3)).ravel()
        nn = nf * 6
        D1 = sp.csr_matrix((e1.ravel(), (rows, cols)), shape=(nn, self.n))
        D2 = sp.csr_matrix((e2.ravel(), (rows, cols)), shape=(nn, self.n))
        return sp.block_diag([D1, D2], format="csr")

    @cached_property
    def _form_mass(self):
        w = self.form_weights.ravel()
        return np.concatenate([w, w])

    @cached_property
    def _sec_mass(self):
        return np.concatenate([self.section_mass, self.section_mass])

    @cached_property
    def laplacian_form(self):
        """Hermitian matrix D^H M_f D of the d-bar Dirichlet form."""
        D = self.d01_matrix
        A = (D.conj().T @ sp.diags(self._form_mass) @ D).tocsr()
        return 0.5 * (A + A.conj().T)

    @cached_property
    def curvature_form(self):
        """Hermitian matrix of sum A w rho^4/2 (|F1|^2 |u_zbar|^2 + |F2|^2 |u_z|^2 - 2 Re(conj(F1) F2 u_z u_zbar))."""
        dom = self.domain
        nf = dom.n_faces
        w = 0.5 * dom.node_weights * self.rho2_nodes**2  # (nf, 6)
        lift_f = self.lift[dom.faces]
        b1 = QUAD_BARY[None, :, :] * lift_f[:, None, :]  # (nf, 6, 3)
        b2 = QUAD_BARY[None, :, :] * np.conj(lift_f)[:, None, :]
        uz = self.uz[:, None, None, None]
        uzb = self.uzb[:, None, None, None]
        ww = w[:, :, None, None]
        r11 = ww * np.abs(uzb) ** 2 * np.conj(b1)[:, :, :, None] * b1[:, :, None, :]
        r22 = ww * np.abs(uz) ** 2 * np.conj(b2)[:, :, :, None] * b2[:, :, None, :]
        r12 = -ww * (uz * uzb) * np.conj(b1)[:, :, :, None] * b2[:, :, None, :]
        r11, r22, r12 = (x.sum(axis=1) for x in (r11, r22, r12))  # (nf, 3, 3)
        orb = dom.orbit[dom.faces]
        rows = np.repeat(orb, 3, axis=1).ravel()
        cols = np.tile(orb, (1, 3)).ravel()
        n = self.n
        R11 = sp.csr_matrix((r11.ravel(), (rows, cols)), shape=(n, n))
        R22 = sp.csr_matrix((r22.ravel(), (rows, cols)), shape=(n, n))
        R12 = sp.csr_matrix((r12.ravel(), (rows, cols)), shape=(n, n))
        R = sp.bmat([[R11, R12], [R12.conj().T, R22]], format="csr")
        return 0.5 * (R + R.conj().T)

    @cached_property
    def jacobi_form(self):
        """Hermitian matrix A of J = M_s^{-1} A, averaged with its conjugate under the bundle conjugation."""
        A0 = (self.laplacian_form + self.curvature_form).tocsr()
        n = self.n
        P = sp.bmat([[None, sp.identity(n)], [sp.identity(n), None]], format="csr")
        A = 0.5 * (A0 + P @ A0.conj() @ P)
        return sp.csr_matrix(0.5 * (A + A.conj().T))

    # ------------------------------------------------------------ inner products
    def section_inner(self, a: BundleSection, b: BundleSection) -> complex:
        return complex(np.sum(self._sec_mass * a.vector() * np.conj(b.vector())))

    def form_inner(self, a: BundleOneForm, b: BundleOneForm) -> complex:
        return complex(np.sum(self._form_mass * a.vector() * np.conj(b.vector())))

    def section_norm(self, a: BundleSection) -> float:
        return float(np.sqrt(max(self.section_inner(a, a).real, 0.0)))

    def form_norm(self, a: BundleOneForm) -> float:
        return float(np.sqrt(max(self.form_inner(a, a).real, 0.0)))

    @property
    def form_shape(self):
        return (self.domain.n_faces, 6)

    # ------------------------------------------------------------- applications
    def d01(self, W: BundleSection) -> BundleOneForm:
        """Covariant d-bar: (d_zbar f1 + c u_zbar f1, d_zbar f2 + conj(c u_z) f2) at every node."""
        return BundleOneForm.from_vector(self.d01_matrix @ W.vector(), self.form_shape)

    def d01_occurrences(self, F1, F2) -> BundleOneForm:
        """d-bar of per-occurrence component values given directly in the face charts.

        Useful for chart-local fields that are not equivariant sections.
        """
        dom = self.domain
        c = self.connection_nodes
        G1 = F1[dom.faces]
        G2 = F2[dom.faces]
        w1 = np.sum(G1 * dom.dzbar, axis=1)[:, None] + c * self.uzb[:, None] * (G1 @ QUAD_BARY.T)
        w2 = np.sum(G2 * dom.dzbar, axis=1)[:, None] + np.conj(c * self.uz[:, None]) * (G2 @ QUAD_BARY.T)
        return BundleOneForm(w1, w2)

    def d01_adjoint(self, w: BundleOneForm) -> BundleSection:
        """Exact adjoint M_s^{-1} D^H M_f of :meth:`d01`."""
        x = self.d01_matrix.conj().T @ (self._form_mass * w.vector())
        return BundleSection.from_vector(x / self._sec_mass)

    def curvature_R(self, W: BundleSection) -> BundleSection:
        return BundleSection.from_vector((self.curvature_form @ W.vector()) / self._sec_mass)

    def curvature_quadratic(self, W: BundleSection) -> float:
        """Pointwise quadrature of the curvature form, without assembling a matrix."""
        dom = self.domain
        F1 = (self.lift * W.f1[dom.orbit])[dom.faces] @ QUAD_BARY.T
        F2 = (np.conj(self.lift) * W.f2[dom.orbit])[dom.faces] @ QUAD_BARY.T
        uz = self.uz[:, None]
        uzb = self.uzb[:, None]
        dens = (np.abs(F1) ** 2 * np.abs(uzb) ** 2 + np.abs(F2) ** 2 * np.abs(uz) ** 2
                - 2.0 * np.real(np.conj(F1) * F2 * uz * uzb))
        return float(np.sum(dom.node_weights * 0.5 * self.rho2_nodes**2 * dens))

    def jacobi_apply(self, W: BundleSection) -> BundleSection:
        """J W = (d-bar)^* d-bar W + R W."""
        return BundleSection.from_vector((self.jacobi_form @ W.vector()) / self._sec_mass)

    def jacobi_matrix(self):
        """Assembled J = M_s^{-1} A as a sparse complex matrix."""
        return (sp.diags(1.0 / self._sec_mass) @ self.jacobi_form).tocsr()

    # ------------------------------------------------------------------- solves
    @cached_property
    def _jacobi_solver(self):
        return _DeflatedSolver(_real_double(self.jacobi_form), np.concatenate([self._sec_mass] * 2), self.kappa)

    @cached_property
    def _laplacian_solver(self):
        return _DeflatedSolver(_real_double(self.laplacian_form), np.concatenate([self._sec_mass] * 2), self.kappa)

    def jacobi_kernel(self):
        """M-orthonormal numerical kernel of J as a list of sections."""
        Z = self._jacobi_solver.kernel
        return [BundleSection.from_vector(_from_real(Z[:, j])) for j in range(Z.shape[1])]

    def jacobi_spectrum_bottom(self):
        """Smallest computed eigenvalues of J (real doubled, each value twice) and lambda_max."""
        s = self._jacobi_solver
        return s.smallest, s.lam_max

    def solve_jacobi(self, rhs: BundleSection, rtol: float = 1e-8) -> BundleSection:
        """Minimum-norm V with J V = P(rhs), P the projection off the numerical kernel."""
        x = self._jacobi_solver.solve(_to_real(rhs.vector()), rtol=rtol)
        return BundleSection.from_vector(_from_real(x))

    def project_off_kernel(self, rhs: BundleSection) -> BundleSection:
        return BundleSection.from_vector(_from_real(self._jacobi_solver.project(_to_real(rhs.vector()))))

    def harmonic_projection(self, w: BundleOneForm, rtol: float = 1e-8) -> BundleOneForm:
        """H(w) = w - d01(s) with s the minimum-norm solution of (d-bar)^* d-bar s = (d-bar)^* w."""
        rhs = self.d01_adjoint(w)
        x = self._laplacian_solver.solve(_to_real(rhs.vector()), rtol=rtol)
        return w - self.d01(BundleSection.from_vector(_from_real(x)))

    # --------------------------------------------------------------- variation
    def i_mu_du(self, mu) -> BundleOneForm:
        """mu (u_z, conj(u_zbar)) at every node, mu = conj(q)/lambda^2."""
        mun = mu.on_domain(self.domain) if mu is not None else np.zeros(self.form_shape, dtype=complex)
        return BundleOneForm(mun * self.uz[:, None], mun * np.conj(self.uzb)[:, None])

    def rhs_from_mu(self, mu):
        """(i_mu du, W + C W) with W = (d-bar)^*(i_mu du) and C the bundle conjugation.

        With this sign the harmonic family's variation field V solves J V = rhs
        and the second derivative of the energy is
        4 ||i_mu du||^2 - 2 <J V, V>.
        """
        w = self.i_mu_du(mu)
        W = self.d01_adjoint(w)
        return w, W + W.conj_swap()

    def i_mu_du_energy_identity(self, mu):
        """(||i_mu du||^2, 1/2 int |du|^2 |q|^2/lambda^4 dmu) by the same quadrature."""
        w = self.i_mu_du(mu)
        dom = self.domain
        half_du2 = self.rho2_nodes * (np.abs(self.uz) ** 2 + np.abs(self.uzb) ** 2)[:, None] / dom.lambda_sq_nodes
        mun = mu.on_domain(dom)
        hq = np.abs(mun) ** 2  # |q|^2 / lambda^4
        rhs = float(np.sum(dom.node_weights * half_du2 * hq * dom.lambda_sq_nodes))
        return self.form_norm(w) ** 2, rhs


def d01(system: JacobiSystem, W: BundleSection) -> BundleOneForm:
    return system.d01(W)


def d01_adjoint(system: JacobiSystem, w: BundleOneForm) -> BundleSection:
    return system.d01_adjoint(w)


def curvature_R(system: JacobiSystem, W: BundleSection) -> BundleSection:
    return system.curvature_R(W)


def jacobi_apply(system: JacobiSystem, W: BundleSection) -> BundleSection:
    return system.jacobi_apply(W)


def rhs_from_mu(system: JacobiSystem, mu):
    return system.rhs_from_mu(mu)


def solve_jacobi(system: JacobiSystem, rhs: BundleSection) -> BundleSection:
    return system.solve_jacobi(rhs)


def harmonic_projection(system: JacobiSystem, w: BundleOneForm) -> BundleOneForm:
    return system.harmonic_projection(w)
