"""Poincare disk geometry: the hyperbolic metric and its isometry group SU(1,1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def conformal_factor(z):
    """Return lambda^2(z) = 4 / (1 - |z|^2)^2, the density of the disk metric."""
    z = np.asarray(z)
    return 4.0 / (1.0 - (z.real**2 + z.imag**2)) ** 2


def log_factor_dv(v):
    """Return d/dv log rho^2 at v, i.e. 2*conj(v) / (1 - |v|^2)."""
    v = np.asarray(v)
    return 2.0 * np.conj(v) / (1.0 - (v.real**2 + v.imag**2))


def distance(z, w):
    """Hyperbolic distance between points of the disk (curvature -1)."""
    z = np.asarray(z)
    w = np.asarray(w)
    x = np.abs(z - w) / np.abs(1.0 - np.conj(w) * z)
    return 2.0 * np.arctanh(np.minimum(x, 1.0))


def geodesic_point(p, q, s):
    """Point at fraction ``s`` of the hyperbolic distance from ``p`` to ``q``."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    x = (q - p) / (1.0 - np.conj(p) * q)
    r = np.abs(x)
    safe = np.where(r > 0, r, 1.0)
    y = np.where(r > 0, np.tanh(s * np.arctanh(r)) * x / safe, 0.0)
    return (y + p) / (1.0 + np.conj(p) * y)


@dataclass(frozen=True)
class MoebiusTransform:
    """Orientation-preserving disk isometry z -> (alpha z + beta) / (conj(beta) z + conj(alpha)).

    Coefficients are kept normalised so that |alpha|^2 - |beta|^2 = 1.
    """

    alpha: complex = 1.0 + 0.0j
    beta: complex = 0.0j

    def __post_init__(self):
        a = complex(self.alpha)
        b = complex(self.beta)
        det = abs(a) ** 2 - abs(b) ** 2
        if not det > 0:
            raise ValueError("Moebius coefficients must satisfy |alpha| > |beta|")
        # rescale unless already normalised to rounding accuracy, which keeps
        # normalised coefficients bit-stable (needed for exact file round trips)
        scale = abs(a) ** 2 + abs(b) ** 2
        if abs(det - 1.0) > 8 * np.finfo(float).eps * scale:
            s = det**-0.5
            a, b = a * s, b * s
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0)

    @classmethod
    def rotation(cls, theta):
        """Rotation z -> exp(i theta) z."""
        return cls(np.exp(0.5j * theta), 0.0)

    @classmethod
    def translation(cls, d, theta=0.0):
        """Hyperbolic translation by distance ``d`` along the diameter at angle ``theta``."""
        r = cls.rotation(theta)
        return r @ cls(np.cosh(0.5 * d), np.sinh(0.5 * d)) @ r.inverse()

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1])

    def matrix(self):
        a, b = self.alpha, self.beta
        return np.array([[a, b], [b.conjugate(), a.conjugate()]])

    def __call__(self, z):
        a, b = self.alpha, self.beta
        z = np.asarray(z)
        return (a * z + b) / (b.conjugate() * z + a.conjugate())

    def derivative(self, z):
        a, b = self.alpha, self.beta
        return 1.0 / (b.conjugate() * np.asarray(z) + a.conjugate()) ** 2

    def second_derivative(self, z):
        a, b = self.alpha, self.beta
        return -2.0 * b.conjugate() / (b.conjugate() * np.asarray(z) + a.conjugate()) ** 3

    def __matmul__(self, other):
        a1, b1 = self.alpha, self.beta
        a2, b2 = other.alpha, other.beta
        return MoebiusTransform(a1 * a2 + b1 * b2.conjugate(), a1 * b2 + b1 * a2.conjugate())

    def inverse(self):
        return MoebiusTransform(self.alpha.conjugate(), -self.beta)

    def conjugated(self):
        """The transform c o g o c with c complex conjugation."""
        return MoebiusTransform(self.alpha.conjugate(), self.beta.conjugate())

    def trace(self):
        """Real trace 2 Re(alpha) of the SU(1,1) matrix."""
        return 2.0 * self.alpha.real

    def distance_to(self, other):
        """Matrix distance modulo sign, used to compare group elements."""
        m1 = self.matrix()
        m2 = other.matrix()
        return min(np.abs(m1 - m2).max(), np.abs(m1 + m2).max())

    def is_identity(self, tol=1e-9):
        return self.distance_to(MoebiusTransform.identity()) <= tol

    def power(self, s):
        """Real power exp(s log g) for a hyperbolic element."""
        from scipy.linalg import expm, logm

        m = self.matrix()
        if self.alpha.real < 0:
            m = -m
        return MoebiusTransform.from_matrix(expm(s * logm(m)))


def point_to_origin(p):
    """Isometry sending ``p`` to 0, z -> (z - p) / (1 - conj(p) z)."""
    p = complex(p)
    return MoebiusTransform(1.0, -p)


def coefficient_arrays(transforms):
    """Stack the (alpha, beta) coefficients of a sequence of transforms."""
    a = np.array([g.alpha for g in transforms], dtype=complex)
    b = np.array([g.beta for g in transforms], dtype=complex)
    return a, b


def apply_arrays(a, b, z):
    """Evaluate transforms with coefficient arrays ``a``, ``b`` pointwise on ``z``."""
    return (a * z + b) / (np.conj(b) * z + np.conj(a))


def derivative_arrays(a, b, z):
    return 1.0 / (np.conj(b) * z + np.conj(a)) ** 2


def second_derivative_arrays(a, b, z):
    return -2.0 * np.conj(b) / (np.conj(b) * z + np.conj(a)) ** 3
