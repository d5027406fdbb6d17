"""Fuchsian groups of closed hyperbolic surfaces and their cyclic covers.

A surface is presented by a fundamental domain made of one or more copies
("tiles") of the regular 4g-gon of a base surface, glued by Moebius side
pairings.  Group elements are tracked twice: as Moebius transforms, and as
reduced words in the standard generators a_1, b_1, ..., a_g, b_g of the base
surface (letter ``2i+1`` is a_{i+1}, ``2i+2`` is b_{i+1}, negative letters are
inverses).  Words let a homomorphism into another group be evaluated exactly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .disk import MoebiusTransform, point_to_origin
from .errors import InvalidArgument

Word = tuple


def reduce_word(word) -> Word:
    """Freely reduce a word in signed letters."""
    out = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert_word(word) -> Word:
    return tuple(-x for x in reversed(word))


def evaluate_word(word, generators: Sequence[MoebiusTransform]) -> MoebiusTransform:
    """Evaluate a word as the product of generators, leftmost letter outermost."""
    g = MoebiusTransform.identity()
    for x in word:
        h = generators[abs(x) - 1]
        g = g @ (h if x > 0 else h.inverse())
    return g


def regular_polygon_radius(n: int, tol: float = 1e-15) -> float:
    """Euclidean circumradius of the regular hyperbolic n-gon with interior angles 2*pi/n.

    Found by bisection on the interior angle, which decreases from the
    Euclidean value (n-2)*pi/n at radius 0 to 0 at the ideal polygon.
    """
    target = 2.0 * np.pi / n
    lo, hi = 0.0, 1.0 - 1e-12
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _vertex_angle(mid, n) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _vertex_angle(r, n):
    p = r + 0j
    m = point_to_origin(p)
    a = m(r * np.exp(2j * np.pi / n))
    b = m(r * np.exp(-2j * np.pi / n))
    return abs(np.angle(a / b))


def polygon_angles(polygon) -> np.ndarray:
    """Interior angles of a geodesic polygon with counterclockwise vertices."""
    p = np.asarray(polygon, dtype=complex)
    n = len(p)
    out = np.empty(n)
    for k in range(n):
        m = point_to_origin(p[k])
        nxt = m(p[(k + 1) % n])
        prv = m(p[k - 1])
        out[k] = np.angle(prv / nxt) % (2 * np.pi)
    return out


def _side_pairing(n, j, k, inradius):
    """Isometry mapping side k of the regular n-gon onto side j, reversing orientation."""
    phi_j = 2 * np.pi * (j + 0.5) / n
    phi_k = 2 * np.pi * (k + 0.5) / n
    rot = MoebiusTransform.rotation
    step = MoebiusTransform(np.cosh(inradius), np.sinh(inradius))
    return rot(phi_j) @ step @ rot(np.pi - phi_k)


@dataclass(frozen=True)
class Pairing:
    """Side pairing of a fundamental domain.

    ``transform`` maps side ``side`` onto side ``partner`` (orientation reversed);
    ``word`` expresses it in the ambient generators.
    """

    side: int
    partner: int
    transform: MoebiusTransform
    word: Word

    def __iter__(self):
        return iter((self.side, self.partner, self.transform))


@dataclass(frozen=True)
class FuchsianSurface:
    """Closed hyperbolic surface as a disk quotient by a Fuchsian group.

    Attributes
    ----------
    genus : int
    generators : list of MoebiusTransform
        Generators of the surface group.  For a base surface these are the
        standard a_1, b_1, ..., a_g, b_g; for a cover they are the side
        pairings of its fundamental domain (one per pair of sides).
    polygon : ndarray of complex
        Vertices of the regular base polygon, counterclockwise.
    pairings : list of Pairing
        One entry per side of the fundamental domain.  Side ``t*n + s`` is
        side ``s`` of tile ``t``, with ``n`` the number of polygon sides.
    tiles : list of words
        Ambient-group elements whose images of the polygon make up the domain.
    ambient : list of MoebiusTransform
        Standard generators of the base surface group; words refer to these.
    characters : tuple of int or None
        For a cyclic cover, the values of the defining map to Z/d on the
        ambient generators.
    degree : int
        Index of the group in the ambient group.
    """

    genus: int
    generators: list
    polygon: np.ndarray
    pairings: list
    tiles: list = field(default_factory=lambda: [()])
    ambient: list = None
    characters: tuple = None
    degree: int = 1

    def __post_init__(self):
        if self.ambient is None:
            object.__setattr__(self, "ambient", list(self.generators))

    @property
    def base_genus(self):
        return len(self.polygon) // 4

    @property
    def euler_characteristic(self):
        return 2 - 2 * self.genus

    @property
    def sides_per_tile(self):
        return len(self.polygon)

    def element(self, word) -> MoebiusTransform:
        """Moebius transform of an ambient word."""
        return evaluate_word(word, self.ambient)

    def tile_transforms(self):
        return [self.element(w) for w in self.tiles]

    def side_endpoints(self, side):
        """Chart endpoints of a domain side, in counterclockwise order."""
        n = self.sides_per_tile
        t, s = divmod(side, n)
        c = self.element(self.tiles[t])
        return c(self.polygon[s]), c(self.polygon[(s + 1) % n])

    def relator_deviation(self) -> float:
        """Deviation from +-identity of the product of commutators of the standard generators."""
        g = MoebiusTransform.identity()
        gens = self.ambient
        for i in range(len(gens) // 2):
            a, b = gens[2 * i], gens[2 * i + 1]
            g = g @ a @ b @ a.inverse() @ b.inverse()
        return g.distance_to(MoebiusTransform.identity())

    def cycle_deviation(self) -> float:
        """Largest deviation from identity of the products of pairings around vertex cycles.

        This is the defining relation of a polygon presentation and applies to
        covers as well as base surfaces.
        """
        n = self.sides_per_tile
        by_side = {p.side: p for p in self.pairings}
        internal = self._internal_partners()

        def next_outer(x):
            # side starting at the corner where side ``x`` ends
            t, s = divmod(x, n)
            x = t * n + (s + 1) % n
            while x not in by_side:
                t, s = divmod(internal[x], n)
                x = t * n + (s + 1) % n
            return x

        seen = set()
        worst = 0.0
        for x0 in sorted(by_side):
            if x0 in seen:
                continue
            g = MoebiusTransform.identity()
            x = x0
            for _ in range(len(by_side) + 1):
                seen.add(x)
                p = by_side[x]
                g = p.transform @ g
                x = next_outer(p.partner)
                if x == x0:
                    break
            worst = max(worst, g.distance_to(MoebiusTransform.identity()))
        return worst

    def _internal_partners(self):
        n = self.sides_per_tile
        outer = {p.side for p in self.pairings}
        ends = {}
        for x in range(len(self.tiles) * n):
            if x not in outer:
                a, b = self.side_endpoints(x)
                ends[x] = (a, b)
        out = {}
        for x, (a, b) in ends.items():
            for y, (c, d) in ends.items():
                if y != x and abs(a - d) < 1e-9 and abs(b - c) < 1e-9:
                    out[x] = y
        return out

    def angle_sum(self) -> float:
        """Sum of the interior angles of the base polygon (2*pi for a smooth quotient)."""
        return float(polygon_angles(self.polygon).sum())

    def pairing_endpoint_error(self) -> float:
        """Largest endpoint mismatch of the side pairings (orientation reversed)."""
        worst = 0.0
        for p in self.pairings:
            a, b = self.side_endpoints(p.side)
            c, d = self.side_endpoints(p.partner)
            worst = max(worst, abs(p.transform(a) - d), abs(p.transform(b) - c))
        return worst


def _standard_data(genus):
    n = 4 * genus
    r = regular_polygon_radius(n)
    polygon = r * np.exp(2j * np.pi * np.arange(n) / n)
    inradius = np.arccosh(1.0 / np.tan(np.pi / n))
    gens = []
    for i in range(genus):
        gens.append(_side_pairing(n, 4 * i, 4 * i + 2, inradius))
        gens.append(_side_pairing(n, 4 * i + 1, 4 * i + 3, inradius).inverse())
    return polygon, gens


def _base_side_maps(genus):
    """For each polygon side s: (partner s', letter of the element mapping s' onto s)."""
    out = {}
    for i in range(genus):
        a, b = 2 * i + 1, 2 * i + 2
        out[4 * i] = (4 * i + 2, a)
        out[4 * i + 2] = (4 * i, -a)
        out[4 * i + 3] = (4 * i + 1, b)
        out[4 * i + 1] = (4 * i + 3, -b)
    return out


def build_surface(genus: int) -> FuchsianSurface:
    """Regular 4g-gon surface of the given genus with the standard side pairings.

    Parameters
    ----------
    genus : int
        Genus, at least 2.

    Returns
    -------
    FuchsianSurface
        Generators a_i, b_i satisfy prod [a_i, b_i] = 1.  Side 4i+2 is mapped
        onto side 4i by a_i and side 4i+1 onto side 4i+3 by b_i^{-1}.
    """
    if int(genus) != genus or genus < 2:
        raise InvalidArgument(f"genus must be an integer >= 2, got {genus!r}")
    genus = int(genus)
    polygon, gens = _standard_data(genus)
    pairings = []
    for s, (s2, letter) in sorted(_base_side_maps(genus).items()):
        # the element for side s maps s2 onto s; record it from s2's side
        g = evaluate_word((letter,), gens)
        pairings.append(Pairing(s2, s, g, (letter,)))
    pairings.sort(key=lambda p: p.side)
    return FuchsianSurface(genus, gens, polygon, pairings)


def build_cyclic_cover(base: FuchsianSurface, hom, d: int = None):
    """Cyclic cover of ``base`` defined by a map of the generators to Z/d.

    Parameters
    ----------
    base : FuchsianSurface
        A base surface (single tile).
    hom : sequence of int
        Value in Z/d of each standard generator a_1, b_1, ..., a_g, b_g.
    d : int, optional
        Order of the cyclic group; defaults to ``len`` of nothing, so must be
        given unless ``hom`` is a ``(values, d)`` pair.

    Returns
    -------
    cover : FuchsianSurface
        Kernel subgroup with a fundamental domain of d tiles.
    phi : Homomorphism
        Inclusion of the cover group into the base group.
    """
    if d is None:
        hom, d = hom
    d = int(d)
    values = tuple(int(x) % d for x in hom)
    if len(values) != len(base.ambient):
        raise InvalidArgument("hom must assign a value to every generator")
    if d < 1 or np.gcd.reduce(list(values) + [d]) != 1:
        raise InvalidArgument("hom is not surjective onto Z/d; the cover would be disconnected")
    if len(base.tiles) != 1:
        raise InvalidArgument("covers are built over single-tile base surfaces")

    n = base.sides_per_tile
    side_maps = _base_side_maps(base.genus)

    def char(word):
        return sum(values[abs(x) - 1] * (1 if x > 0 else -1) for x in word) % d

    # breadth-first growth of a connected union of tiles, one per residue
    tiles = [()]
    residues = {0: 0}
    queue = deque([0])
    while queue and len(tiles) < d:
        t = queue.popleft()
        for s in range(n):
            w = reduce_word(tiles[t] + (side_maps[s][1],))
            r = char(w)
            if r not in residues:
                residues[r] = len(tiles)
                tiles.append(w)
                queue.append(len(tiles) - 1)
    tile_el = [base.element(w) for w in tiles]

    pairings = []
    for t, w in enumerate(tiles):
        for s in range(n):
            s2, letter = side_maps[s]
            nb = reduce_word(w + (letter,))
            t2 = residues[char(nb)]
            if base.element(nb).distance_to(tile_el[t2]) < 1e-9:
                continue  # neighbour tile is inside the domain
            # kappa maps side s2 of tile t2 onto side s of tile t
            kw = reduce_word(nb + invert_word(tiles[t2]))
            kappa = base.element(kw)
            pairings.append(Pairing(t2 * n + s2, t * n + s, kappa, kw))
    pairings.sort(key=lambda p: p.side)

    gens = []
    seen = set()
    for p in pairings:
        key = tuple(sorted((p.side, p.partner)))
        if key not in seen:
            seen.add(key)
            gens.append(p.transform)
    genus = d * (base.genus - 1) + 1
    cover = FuchsianSurface(genus, gens, base.polygon, pairings, tiles=tiles,
                            ambient=list(base.ambient), characters=values, degree=d)
    return cover, Homomorphism(list(base.ambient))


@dataclass(frozen=True)
class Homomorphism:
    """Homomorphism of surface groups given by images of the ambient generators.

    Calling it on a word returns the image element.
    """

    images: list

    def __call__(self, word) -> MoebiusTransform:
        return evaluate_word(word, self.images)

    def conjugated(self):
        """Homomorphism followed by conjugation with z -> conj(z)."""
        return Homomorphism([g.conjugated() for g in self.images])


def twisted_surface(base: FuchsianSurface, s: float) -> FuchsianSurface:
    """Base surface deformed by a partial twist along the separating curve [a_1, b_1].

    The generators of the second and later handles are conjugated by
    ``c**s`` with ``c = [a_1, b_1]``; the relator is preserved because
    ``c**s`` commutes with ``c``.  For s != 0 the result is a different point
    of Teichmueller space with the same polygon-free group presentation.
    """
    a, b = base.ambient[0], base.ambient[1]
    c = a @ b @ a.inverse() @ b.inverse()
    cs = c.power(s)
    gens = list(base.ambient[:2]) + [cs @ g @ cs.inverse() for g in base.ambient[2:]]
    # pairings of the deformed group refer to a deformed, non-regular domain
    # which is never triangulated; keep the generator data only
    return FuchsianSurface(base.genus, gens, base.polygon, [], ambient=gens)


def coset_index(base: FuchsianSurface, cover: FuchsianSurface, max_word_length: int = 8,
                subgroup_word_length: int = 3) -> int:
    """Index of the cover group in the base group by Schreier-graph coset enumeration.

    Membership in the subgroup is tested against subgroup elements enumerated
    as words of bounded length in the cover's side-pairing generators, so the
    count does not use the defining characters of the cover.
    """
    letters = list(cover.generators) + [g.inverse() for g in cover.generators]
    sub = [MoebiusTransform.identity()]
    frontier = [(MoebiusTransform.identity(), None)]
    k = len(cover.generators)
    for _ in range(subgroup_word_length):
        nxt = []
        for g, last in frontier:
            for i, h in enumerate(letters):
                if last is not None and (i - last) % (2 * k) == k:
                    continue
                e = g @ h
                nxt.append((e, i))
                sub.append(e)
        frontier = nxt
    mats = np.array([g.matrix().ravel() for g in sub])

    def in_subgroup(g):
        m = g.matrix().ravel()
        return bool((np.minimum(np.abs(mats - m).max(axis=1), np.abs(mats + m).max(axis=1)) < 1e-7).any())

    gens = list(base.ambient) + [g.inverse() for g in base.ambient]
    reps = [(MoebiusTransform.identity(), 0)]
    queue = deque([0])
    while queue:
        i = queue.popleft()
        r, length = reps[i]
        if length >= max_word_length:
            continue
        for s in gens:
            x = r @ s
            if not any(in_subgroup(x @ r2.inverse()) for r2, _ in reps):
                reps.append((x, length + 1))
                queue.append(len(reps) - 1)
    return len(reps)
