"""Wolf's expansion of hyperbolic metrics along a Weil-Petersson geodesic.

Along the geodesic with tangent mu = conj(q)/lambda^2 the metric is, up to
O(t^4),

    g(t) = t q dz^2 + (lambda^2/2 + t^2/2 (h + alpha) lambda^2) (dz dzbar + dzbar dz) + t conj(q) dzbar^2

with h = |q|^2/lambda^4 and alpha = -2 (Delta - 2)^{-1} h.  The family is
used as the definition of the deformation path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .disk import conformal_factor
from .errors import InvalidArgument, MeshError, OutOfRange, SolverError
from .mesh import QUAD_BARY, QUAD_WEIGHTS, TriangulatedDomain


@dataclass
class ScalarField:
    """One value per vertex orbit, interpolated affinely inside faces."""

    domain: TriangulatedDomain
    values: np.ndarray

    def occurrences(self):
        return self.values[self.domain.orbit]

    def at_nodes(self):
        return self.domain.interpolate(self.occurrences())


@dataclass
class Laplacian:
    """Discrete hyperbolic Laplacian Delta = -M^{-1} K on vertex orbits.

    ``stiffness`` is the flat cotangent matrix K (the Dirichlet form is
    conformally invariant) and ``mass`` the lumped hyperbolic mass
    m_i = integral of lambda^2 times the hat function of i.
    """

    stiffness: sp.csr_matrix
    mass: np.ndarray

    def __post_init__(self):
        off = sp.triu(self.stiffness, k=1).tocoo()
        self._edges = (off.row, off.col, off.data)

    def apply_stiffness(self, f):
        """K f in edge-difference form, exactly zero on constants."""
        i, j, w = self._edges
        d = w * (f[j] - f[i])
        out = np.zeros(np.shape(f), dtype=np.result_type(f, float))
        np.add.at(out, i, d)
        np.add.at(out, j, -d)
        return out

    def __call__(self, f):
        return -self.apply_stiffness(np.asarray(f)) / self.mass

    def inner(self, f, g):
        """Mass-weighted inner product."""
        return float(np.sum(self.mass * f * g))

    def matrix(self):
        return -sp.diags(1.0 / self.mass) @ self.stiffness


def flat_stiffness(domain: TriangulatedDomain):
    """Cotangent stiffness assembled on occurrences, shape (nv, nv)."""
    area = domain.face_signed_area
    if np.any(area <= 0):
        raise MeshError("degenerate or inverted face")
    b = domain.dzbar
    # grad(phi_i) . grad(phi_j) = 4 Re(dzbar phi_i * conj(dzbar phi_j))
    local = 4.0 * np.real(b[:, :, None] * np.conj(b[:, None, :])) * area[:, None, None]
    rows = np.repeat(domain.faces, 3, axis=1).ravel()
    cols = np.tile(domain.faces, (1, 3)).ravel()
    n = domain.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_laplacian(domain: TriangulatedDomain) -> Laplacian:
    """Vertex-orbit Laplacian: flat cotangent stiffness over hyperbolic lumped mass."""
    P = domain.orbit_matrix
    K = (P.T @ flat_stiffness(domain) @ P).tocoo()
    # symmetrise and rebuild the diagonal from the off-diagonal entries so
    # that constants lie in the kernel to rounding
    K = sp.csr_matrix(0.5 * (K + K.T))
    off = K - sp.diags(K.diagonal())
    K = (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()
    lam = domain.lambda_sq_nodes * domain.node_weights  # (nf, 6)
    per_corner = lam @ QUAD_BARY  # (nf, 3)
    mass = np.zeros(domain.n_vertices)
    np.add.at(mass, domain.faces.ravel(), per_corner.ravel())
    mass = domain.orbit_sum(mass)
    return Laplacian(K.tocsr(), mass)


def _as_orbit_h(domain, source):
    """Return |q|^2/lambda^4 at orbit representatives from a differential or a field."""
    from .qdiff import HarmonicBeltrami, QuadraticDifferential

    if isinstance(source, QuadraticDifferential):
        source = HarmonicBeltrami(source)
    if isinstance(source, HarmonicBeltrami):
        return source.h_on_domain(domain)[1]
    if isinstance(source, ScalarField):
        return np.asarray(source.values, dtype=float)
    vals = np.asarray(source, dtype=float)
    if vals.shape != (domain.n_orbits,):
        raise InvalidArgument("field must have one value per vertex orbit")
    return vals


def solve_alpha(domain: TriangulatedDomain, q, laplacian: Laplacian = None, rtol: float = 1e-12,
                maxiter: int = 5000) -> ScalarField:
    """Solve (Delta - 2) alpha = -2 h with h = |q|^2/lambda^4.

    Parameters
    ----------
    domain : TriangulatedDomain
    q : QuadraticDifferential, HarmonicBeltrami, ScalarField or array
        Source of h; arrays and fields are taken as h itself.

    Returns
    -------
    ScalarField
        alpha per vertex orbit.  The weak system (K + 2M) alpha = 2 M h is
        symmetric positive definite and solved by preconditioned CG.
    """
    lap = laplacian or assemble_laplacian(domain)
    h = _as_orbit_h(domain, q)
    A = (lap.stiffness + 2.0 * sp.diags(lap.mass)).tocsr()
    rhs = 2.0 * lap.mass * h
    if not np.any(rhs):
        return ScalarField(domain, np.zeros(domain.n_orbits))
    pre = sp.diags(1.0 / A.diagonal())
    alpha, info = spla.cg(A, rhs, x0=h.copy(), rtol=rtol, atol=0.0, M=pre, maxiter=maxiter)
    res = float(np.linalg.norm(A @ alpha - rhs) / np.linalg.norm(rhs))
    if info != 0 or res > 1e-10:
        raise SolverError("alpha solve did not converge", res)
    return ScalarField(domain, alpha)


@dataclass(frozen=True)
class GMatrix:
    """Coefficients of g(t) against dz^2, dz dzbar + dzbar dz and dzbar^2."""

    zz: complex
    zzbar: float
    zbarzbar: complex

    @property
    def det(self):
        return np.real(self.zz * self.zbarzbar) - self.zzbar**2

    def matrix(self):
        return np.array([[self.zz, self.zzbar], [self.zzbar, self.zbarzbar]])


class WolfMetricFamily:
    """Data defining g(t) on a triangulated domain.

    Attributes
    ----------
    domain : TriangulatedDomain
    mu : HarmonicBeltrami
    alpha : ScalarField
    t_max : float
    """

    def __init__(self, domain, mu=None, alpha: ScalarField = None, t_max="auto"):
        from .qdiff import HarmonicBeltrami, QuadraticDifferential

        if isinstance(mu, QuadraticDifferential):
            mu = HarmonicBeltrami(mu)
        self.domain = domain
        self.mu = mu
        if mu is None:
            self.q_nodes = np.zeros(domain.nodes.shape, dtype=complex)
            self.h_nodes = np.zeros(domain.nodes.shape)
            h_orbits = np.zeros(domain.n_orbits)
        else:
            self.q_nodes = mu.q.on_domain(domain)[0]
            self.h_nodes, h_orbits = mu.h_on_domain(domain)
        self.h_orbits = h_orbits
        self.alpha = alpha if alpha is not None else solve_alpha(domain, h_orbits)
        self.alpha_nodes = self.alpha.at_nodes()
        self.lam2_nodes = domain.lambda_sq_nodes
        if t_max == "auto" or t_max is None:
            t_max = auto_t_max(self.h_nodes + self.alpha_nodes)
        self.t_max = float(t_max)
        if not self.t_max > 0:
            raise InvalidArgument("t_max must be positive")

    def check_t(self, t):
        if abs(t) > self.t_max * (1 + 1e-12):
            raise OutOfRange(f"|t|={abs(t)!r} exceeds t_max={self.t_max!r}")

    def node_coefficients(self, t):
        """Energy weights at the quadrature nodes.

        Returns ``(a, b)`` with a = G_zzbar/sqrt|det G| and b = G_zz/sqrt|det G|,
        so that the energy integrand against the chart area is
        rho^2 (a (|u_z|^2 + |u_zbar|^2) - 2 Re(b u_zbar conj(u_z))).
        """
        self.check_t(t)
        if t == 0:
            return np.ones(self.lam2_nodes.shape), np.zeros(self.lam2_nodes.shape, dtype=complex)
        gzzbar = 0.5 * self.lam2_nodes * (1.0 + t * t * (self.h_nodes + self.alpha_nodes))
        gzz = t * self.q_nodes
        root = np.sqrt(gzzbar**2 - np.abs(gzz) ** 2)
        return gzzbar / root, gzz / root

    def volume_nodes(self, t):
        """sqrt|det G| at the nodes (density against i dz^dzbar)."""
        self.check_t(t)
        gzzbar = 0.5 * self.lam2_nodes * (1.0 + t * t * (self.h_nodes + self.alpha_nodes))
        return np.sqrt(np.abs(gzzbar**2 - t * t * np.abs(self.q_nodes) ** 2))

    # ------------------------------------------------------------- pointwise
    def _point_data(self, z):
        z = complex(z)
        f, bary = self.domain_locate(z)
        lam2 = float(conformal_factor(z))
        if self.mu is None:
            return lam2, 0j, 0.0
        q = complex(self.mu.q(np.array([z]))[0])
        h = abs(q) ** 2 / lam2**2
        alpha_occ = self.alpha.occurrences()[self.domain.faces[f]]
        return lam2, q, h + float(bary @ alpha_occ)

    def domain_locate(self, z):
        """Face containing chart point z and its barycentric coordinates."""
        if not hasattr(self, "_tree"):
            from scipy.spatial import cKDTree

            bc = self.domain.barycenters
            self._tree = cKDTree(np.stack([bc.real, bc.imag], axis=1))
        _, cand = self._tree.query([z.real, z.imag], k=min(32, self.domain.n_faces))
        best = None
        for f in np.atleast_1d(cand):
            c = self.domain.corners[f]
            bary = _barycentric(c, z)
            if bary.min() >= -1e-12:
                return int(f), bary
            if best is None or bary.min() > best[1].min():
                best = (int(f), bary)
        if best[1].min() < -1e-6:
            raise InvalidArgument("point is not inside the triangulated domain")
        return best


def _barycentric(c, z):
    m = np.array([[c[0].real, c[1].real, c[2].real],
                  [c[0].imag, c[1].imag, c[2].imag],
                  [1.0, 1.0, 1.0]])
    return np.linalg.solve(m, np.array([z.real, z.imag, 1.0]))


def auto_t_max(h_plus_alpha, fraction: float = 0.1) -> float:
    """Largest t keeping t^2 (h + alpha) <= fraction, so the t^2 term of G stays subordinate."""
    peak = float(np.max(h_plus_alpha)) if np.size(h_plus_alpha) else 0.0
    if peak <= 0:
        return 1.0
    return float(np.sqrt(fraction / peak))


def metric_at(family: WolfMetricFamily, t: float, z) -> GMatrix:
    """G(t) at a chart point inside the domain; the O(t^4) remainder is dropped."""
    family.check_t(t)
    lam2, q, ha = family._point_data(z)
    return GMatrix(t * q, 0.5 * lam2 + 0.5 * t * t * ha * lam2, t * np.conj(q))


def volume_element(family: WolfMetricFamily, t: float, z) -> float:
    """sqrt|det G(t)| at a chart point (density against i dz^dzbar)."""
    return float(np.sqrt(abs(metric_at(family, t, z).det)))


def alpha_bound_slack(family: WolfMetricFamily):
    """min over orbits of alpha - h/3, and the allowed slack 1e-6 max h."""
    h = family.h_orbits
    margin = float(np.min(family.alpha.values - h / 3.0))
    return margin, 1e-6 * float(np.max(h)) if h.size else 0.0
