"""Holomorphic quadratic differentials from Poincare series and harmonic Beltrami differentials.

The relative Poincare series q(z) = sum_gamma gamma(z)^m gamma'(z)^2 is
truncated to group elements whose reduced word in the standard generators
has length at most L.  Summing it directly costs one term per element and
point, so for mesh-sized point sets the truncated series is evaluated once
on a circle enclosing the base polygon and converted to Taylor coefficients
by FFT; inside the polygon the resulting polynomial reproduces the same
truncated series to rounding.  Points outside the polygon are first moved
into it with side pairings, using q(z) = q(gz) g'(z)^2.
"""

from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np

from .disk import conformal_factor
from .errors import DegenerateDifferential, InvalidArgument
from .surface import FuchsianSurface


@numba.njit(cache=True, fastmath=True)
def _series_kernel(z, a, b, powers, out):
    # sum over elements of (g z)^m g'(z)^2 for every seed power m
    n = z.shape[0]
    k = a.shape[0]
    nm = powers.shape[0]
    for i in range(n):
        zr = z[i].real
        zi = z[i].imag
        acc_r = np.zeros(nm)
        acc_i = np.zeros(nm)
        for j in range(k):
            ar = a[j].real
            ai = a[j].imag
            br = b[j].real
            bi = b[j].imag
            dr = br * zr + bi * zi + ar
            di = br * zi - bi * zr - ai
            nr = ar * zr - ai * zi + br
            ni = ar * zi + ai * zr + bi
            inv = 1.0 / (dr * dr + di * di)
            er = dr * inv
            ei = -di * inv
            wr = nr * er - ni * ei
            wi = nr * ei + ni * er
            e2r = er * er - ei * ei
            e2i = 2.0 * er * ei
            pr = e2r * e2r - e2i * e2i
            pi = 2.0 * e2r * e2i
            p = 0
            for m in range(nm):
                while p < powers[m]:
                    pr, pi = pr * wr - pi * wi, pr * wi + pi * wr
                    p += 1
                acc_r[m] += pr
                acc_i[m] += pi
        for m in range(nm):
            out[i, m] = acc_r[m] + 1j * acc_i[m]


def enumerate_elements(generators, L: int, tol: float = 1e-9):
    """Group elements given by reduced words of length <= L, deduplicated.

    Returns
    -------
    alpha, beta : ndarray of complex
        Coefficients of the distinct elements (identity first).
    lengths : ndarray of int
        Word length at which each element was first found.
    """
    return _enumerate_cached(tuple((complex(g.alpha), complex(g.beta)) for g in generators), int(L), tol)


@lru_cache(maxsize=8)
def _enumerate_cached(gens, L, tol):
    k = len(gens)
    ga = np.array([g[0] for g in gens] + [np.conj(g[0]) for g in gens], dtype=complex)
    gb = np.array([g[1] for g in gens] + [-g[1] for g in gens], dtype=complex)
    A = [np.array([1.0 + 0j])]
    B = [np.array([0j])]
    lengths = [np.zeros(1, dtype=np.int64)]
    fa, fb = A[0], B[0]
    last = np.array([-1])
    for length in range(1, L + 1):
        if k == 0 or len(fa) == 0:
            break
        na, nb, nl = [], [], []
        for letter in range(2 * k):
            inverse = (letter + k) % (2 * k)
            keep = last != inverse
            a1, b1 = fa[keep], fb[keep]
            na.append(a1 * ga[letter] + b1 * np.conj(gb[letter]))
            nb.append(a1 * gb[letter] + b1 * np.conj(ga[letter]))
            nl.append(np.full(keep.sum(), letter))
        fa = np.concatenate(na)
        fb = np.concatenate(nb)
        last = np.concatenate(nl)
        A.append(fa)
        B.append(fb)
        lengths.append(np.full(len(fa), length))
    a = np.concatenate(A)
    b = np.concatenate(B)
    lengths = np.concatenate(lengths)
    # fix the sign ambiguity of SU(1,1) and drop near-duplicates
    flip = a.real < 0
    a = np.where(flip, -a, a)
    b = np.where(flip, -b, b)
    scale = np.maximum(1.0, np.abs(a))
    key = np.stack([a.real, a.imag, b.real, b.imag], axis=1) / scale[:, None]
    key = np.round(key / tol).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    first.sort()
    return a[first], b[first], lengths[first]


def _polygon_geodesics(polygon):
    # centre and radius of the circle carrying each side
    p = np.asarray(polygon, dtype=complex)
    q = np.roll(p, -1)
    mid = 0.5 * (p + q)
    # circle orthogonal to the unit circle through p and q
    # centre c satisfies |c|^2 = 1 + r^2 and |c - p| = |c - q| = r
    direction = mid / np.abs(mid)
    # solve for t with c = t * direction
    t = (1.0 + np.abs(p) ** 2) / (2.0 * np.real(np.conj(direction) * p))
    c = t * direction
    r = np.sqrt(np.abs(c) ** 2 - 1.0)
    return c, r


class PolygonReducer:
    """Moves points of the disk into the base polygon using its side pairings."""

    def __init__(self, surface: FuchsianSurface):
        self.polygon = np.asarray(surface.polygon)
        self.centres, self.radii = _polygon_geodesics(self.polygon)
        n = len(self.polygon)
        # for each side s, the element mapping the tile across s back onto the polygon
        from .surface import _base_side_maps
        self.back = []
        for s in range(n):
            _, letter = _base_side_maps(len(self.polygon) // 4)[s]
            g = surface.element((letter,)) if len(surface.ambient) else None
            self.back.append(g.inverse())
        self.radius = float(np.abs(self.polygon).max())

    def reduce(self, z, max_steps=200):
        """Return (z', a, b) with z' = g(z) in the polygon and g given by coefficients a, b."""
        z = np.array(z, dtype=complex, copy=True)
        a = np.ones_like(z)
        b = np.zeros_like(z)
        ba = np.array([g.alpha for g in self.back])
        bb = np.array([g.beta for g in self.back])
        for _ in range(max_steps):
            ratio = np.abs(z[:, None] - self.centres[None, :]) / self.radii[None, :]
            worst = ratio.argmin(axis=1)
            outside = ratio[np.arange(len(z)), worst] < 1.0 - 1e-13
            if not outside.any():
                break
            idx = np.flatnonzero(outside)
            s = worst[idx]
            ga, gb = ba[s], bb[s]
            zi = z[idx]
            z[idx] = (ga * zi + gb) / (np.conj(gb) * zi + np.conj(ga))
            a0, b0 = a[idx], b[idx]
            a[idx] = ga * a0 + gb * np.conj(b0)
            b[idx] = ga * b0 + gb * np.conj(a0)
        return z, a, b


class QuadraticDifferential:
    """Truncated relative Poincare series of weight 4 on a Fuchsian group.

    Parameters
    ----------
    group : FuchsianSurface
        The series runs over the group generated by ``group.ambient``; for a
        cover this is the base group, so q is the pullback of a differential
        on the base surface.
    seed_power : int
        Exponent m of the seed w^m.
    truncation : int
        Maximal reduced word length L.
    scale : complex
        Constant factor applied to the series.
    """

    def __init__(self, group: FuchsianSurface, seed_power: int = 0, truncation: int = 6,
                 scale: complex = 1.0):
        if truncation < 0 or seed_power < 0:
            raise InvalidArgument("seed power and truncation must be non-negative")
        self.group = group
        self.seed_power = int(seed_power)
        self.truncation = int(truncation)
        self.scale = complex(scale)
        self.alpha, self.beta, self.word_lengths = enumerate_elements(group.ambient, truncation)
        self._reducer = PolygonReducer(group) if len(group.ambient) and len(group.polygon) else None
        self._taylor = None
        self._cache = {}
        self.report = {}

    @property
    def n_terms(self):
        return len(self.alpha)

    # ---------------------------------------------------------------- evaluation
    def series(self, z):
        """Direct evaluation of the truncated sum at arbitrary points."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty((len(z), 1), dtype=complex)
        _series_kernel(z.ravel(), self.alpha, self.beta, np.array([self.seed_power]), out)
        return self.scale * out[:, 0].reshape(z.shape)

    def _fit(self):
        if self._taylor is not None:
            return self._taylor
        r_poly = self._reducer.radius
        r_fit = 0.5 * (1.0 + r_poly)
        valid = 1.02 * r_poly
        n = int(np.ceil(np.log(1e-18) / np.log(valid / r_fit)))
        n = 1 << max(6, int(np.ceil(np.log2(n))))
        w = r_fit * np.exp(2j * np.pi * np.arange(n) / n)
        vals = np.empty((n, 1), dtype=complex)
        _series_kernel(w, self.alpha, self.beta, np.array([self.seed_power]), vals)
        coef = np.fft.fft(vals[:, 0]) / n  # coefficients of (z / r_fit)^k
        self._taylor = (coef, r_fit, valid)
        return self._taylor

    def _polynomial(self, z):
        coef, r_fit, _ = self._fit()
        x = z / r_fit
        acc = np.zeros_like(z)
        for c in coef[::-1]:
            acc = acc * x + c
        return acc

    def __call__(self, z, reduce: bool = True):
        """Evaluate q at chart points.

        With ``reduce`` (default) points are moved into the base polygon and
        the fast polynomial representation is used; otherwise the raw
        truncated sum is evaluated term by term.
        """
        z = np.asarray(z, dtype=complex)
        if self.scale == 0:
            return np.zeros(z.shape, dtype=complex)
        if not reduce or self._reducer is None:
            return self.series(z)
        shape = z.shape
        flat = z.ravel()
        _, _, valid = self._fit()
        out = np.empty_like(flat)
        inside = np.abs(flat) <= valid
        if inside.any():
            out[inside] = self._polynomial(flat[inside])
        if (~inside).any():
            zo, a, b = self._reducer.reduce(flat[~inside])
            if np.any(np.abs(zo) > valid):
                raise InvalidArgument("point could not be reduced into the base polygon")
            dg = 1.0 / (np.conj(b) * flat[~inside] + np.conj(a)) ** 2
            out[~inside] = self._polynomial(zo) * dg**2
        return self.scale * out.reshape(shape)

    def scaled(self, c) -> "QuadraticDifferential":
        """Return c * q sharing the enumerated group data."""
        other = object.__new__(QuadraticDifferential)
        other.__dict__.update(self.__dict__)
        other.scale = self.scale * complex(c)
        other._cache = {}
        other.report = dict(self.report)
        return other

    def on_domain(self, domain):
        """Values at the quadrature nodes (nf, 6) and at orbit representatives."""
        key = id(domain)
        if key not in self._cache:
            nodes = self(domain.nodes)
            reps = self(domain.vertices[domain.representative])
            self._cache[key] = (domain, nodes, reps)
        return self._cache[key][1], self._cache[key][2]

    # ------------------------------------------------------------------ checks
    def automorphy_residual(self, points, generators=None):
        """Max over points and generators of |q(g z) g'(z)^2 - q(z)| for the raw sum."""
        gens = self.group.ambient if generators is None else generators
        z = np.asarray(points, dtype=complex)
        q0 = self.series(z)
        worst = 0.0
        for g in gens:
            worst = max(worst, float(np.abs(self.series(g(z)) * g.derivative(z) ** 2 - q0).max()))
        return worst

    def holomorphy_residual(self, points, h=1e-4):
        """Max of |d q / d zbar| by central differences of the raw sum."""
        z = np.asarray(points, dtype=complex)
        dx = (self.series(z + h) - self.series(z - h)) / (2 * h)
        dy = (self.series(z + 1j * h) - self.series(z - 1j * h)) / (2 * h)
        return float(np.abs(0.5 * (dx + 1j * dy)).max())


def sample_points(surface: FuchsianSurface, count: int = 50, seed: int = 0, fraction: float = 0.9):
    """Random points inside the base polygon, within ``fraction`` of its inradius."""
    rng = np.random.default_rng(seed)
    n = len(surface.polygon)
    inradius = np.tanh(0.5 * np.arccosh(1.0 / np.tan(np.pi / n))) if n else 0.5
    r = fraction * inradius * np.sqrt(rng.random(count))
    return r * np.exp(2j * np.pi * rng.random(count))


def poincare_series(surface: FuchsianSurface, m: int = 0, L: int = 6, check_points: int = 50,
                    seed: int = 0) -> QuadraticDifferential:
    """Build the truncated Poincare series q_m and measure its invariants.

    Raises
    ------
    DegenerateDifferential
        If q vanishes numerically on the sample points.
    """
    q = QuadraticDifferential(surface, m, L)
    pts = sample_points(surface, check_points, seed)
    vals = q.series(pts)
    peak = float(np.abs(vals).max())
    if peak < 1e-14:
        raise DegenerateDifferential(f"Poincare series with m={m} vanishes on all samples; try another m")
    q.report = {
        "max_abs": peak,
        "automorphy_residual": q.automorphy_residual(pts) if len(surface.ambient) else 0.0,
        "holomorphy_residual": q.holomorphy_residual(pts),
        "terms": q.n_terms,
    }
    return q


class HarmonicBeltrami:
    """Harmonic Beltrami differential mu = conj(q) / lambda^2."""

    def __init__(self, q: QuadraticDifferential):
        self.q = q

    def __call__(self, z, reduce: bool = True):
        z = np.asarray(z, dtype=complex)
        return np.conj(self.q(z, reduce=reduce)) / conformal_factor(z)

    def scaled(self, c: float) -> "HarmonicBeltrami":
        return HarmonicBeltrami(self.q.scaled(c))

    def on_domain(self, domain):
        """Values at the quadrature nodes, shape (nf, 6)."""
        qn, _ = self.q.on_domain(domain)
        return np.conj(qn) / domain.lambda_sq_nodes

    def h_on_domain(self, domain):
        """|q|^2 / lambda^4 at nodes and at orbit representatives."""
        qn, qr = self.q.on_domain(domain)
        zr = domain.vertices[domain.representative]
        return (np.abs(qn) ** 2 / domain.lambda_sq_nodes**2,
                np.abs(qr) ** 2 / conformal_factor(zr) ** 2)


def beltrami_from_q(q: QuadraticDifferential) -> HarmonicBeltrami:
    """Harmonic Beltrami differential of q."""
    return HarmonicBeltrami(q)


def zero_differential(surface: FuchsianSurface) -> QuadraticDifferential:
    """The zero quadratic differential (no group elements are enumerated)."""
    return QuadraticDifferential(surface, 0, 0, scale=0.0)


def wp_norm_sq(mu: HarmonicBeltrami, domain) -> float:
    """Weil-Petersson norm squared, the integral of |mu|^2 lambda^2 over the domain."""
    vals = mu.on_domain(domain)
    return domain.integrate(np.abs(vals) ** 2 * domain.lambda_sq_nodes)


def qb_pairing(phi, mu: HarmonicBeltrami, domain) -> float:
    """Pairing Re of the integral of phi * mu, with phi sampled at the quadrature nodes."""
    vals = mu.on_domain(domain)
    return float(np.real(np.sum(domain.node_weights * np.asarray(phi) * vals)))
