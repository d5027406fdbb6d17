"""Triangulated fundamental domains with equivariant boundary identifications.

The domain of a surface is triangulated tile by tile.  Each tile is a fan
around the polygon centre whose rim has ``segments`` geodesic pieces per
side; ``level`` rounds of 1->4 refinement follow.  Interior edges are split at
chart midpoints and rim edges at hyperbolic midpoints, so rim vertices stay on
the geodesic sides and paired sides carry matching vertices.

Every vertex occurrence belongs to an orbit under the deck group.  One
occurrence per orbit is the representative; occurrence ``i`` satisfies
``z_i = D_i(z_rep)`` with ``D_i`` its deck transform.
"""

from __future__ import annotations

from collections import deque
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .disk import (MoebiusTransform, coefficient_arrays, conformal_factor,
                   geodesic_point)
from .errors import InvalidArgument, MeshError
from .surface import (FuchsianSurface, Pairing, evaluate_word, invert_word,
                      reduce_word)

# symmetric 6-point rule on the triangle, exact for polynomials of degree 4
_A1, _B1, _W1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
_A2, _B2, _W2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
QUAD_BARY = np.array([
    [_B1, _A1, _A1], [_A1, _B1, _A1], [_A1, _A1, _B1],
    [_B2, _A2, _A2], [_A2, _B2, _A2], [_A2, _A2, _B2],
])
QUAD_WEIGHTS = np.array([_W1, _W1, _W1, _W2, _W2, _W2])

DEFAULT_SEGMENTS = 6


def _fan(polygon, segments):
    n = len(polygon)
    rim = []
    rim_tags = []  # (side, k) with k in [0, segments]
    for s in range(n):
        p, q = polygon[s], polygon[(s + 1) % n]
        for k in range(segments):
            rim.append(complex(geodesic_point(p, q, k / segments)))
            tags = [(s, k)]
            if k == 0:
                tags.append(((s - 1) % n, segments))
            rim_tags.append(tags)
    z = np.array([0j] + rim)
    m = len(rim)
    faces = np.array([[0, 1 + i, 1 + (i + 1) % m] for i in range(m)])
    tags = [[]] + rim_tags
    return z, faces, tags


def _refine(z, faces, tags):
    """One round of 1->4 subdivision; ``tags`` hold (side, position) of rim vertices."""
    z = list(z)
    tags = [[(s, 2 * k) for s, k in t] for t in tags]
    mid = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        if key in mid:
            return mid[key]
        ti = dict(tags[i])
        tj = dict(tags[j])
        common = [s for s in ti if s in tj and abs(ti[s] - tj[s]) == 2]
        if common:
            s = common[0]
            w = complex(geodesic_point(z[i], z[j], 0.5))
            new_tags = [(s, (ti[s] + tj[s]) // 2)]
        else:
            w = 0.5 * (z[i] + z[j])
            new_tags = []
        z.append(w)
        tags.append(new_tags)
        mid[key] = len(z) - 1
        return mid[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return np.array(z), np.array(out), tags


def _base_tile(polygon, segments, level):
    z, faces, tags = _fan(polygon, segments)
    for _ in range(level):
        z, faces, tags = _refine(z, faces, tags)
    return z, faces, tags, segments * 2**level


class TriangulatedDomain:
    """Triangulated fundamental domain of a :class:`FuchsianSurface`.

    Attributes
    ----------
    surface : FuchsianSurface
    vertices : ndarray of complex, shape (nv,)
        Chart coordinates of vertex occurrences.
    faces : ndarray of int, shape (nf, 3)
        Counterclockwise vertex triples.
    orbit : ndarray of int, shape (nv,)
        Orbit id of each occurrence.
    representative : ndarray of int, shape (norbits,)
        Occurrence storing each orbit.
    deck_words : list of tuple
        Ambient word of the deck transform of each occurrence.
    refinement_level : int
    """

    def __init__(self, surface, vertices, faces, orbit, representative, deck_words,
                 refinement_level, segments=DEFAULT_SEGMENTS):
        self.surface = surface
        self.vertices = np.asarray(vertices, dtype=complex)
        self.faces = np.asarray(faces, dtype=np.int64)
        self.orbit = np.asarray(orbit, dtype=np.int64)
        self.representative = np.asarray(representative, dtype=np.int64)
        self.deck_words = [tuple(w) for w in deck_words]
        self.refinement_level = int(refinement_level)
        self.segments = int(segments)
        self._check()

    # ------------------------------------------------------------------ basics
    @property
    def genus(self):
        return self.surface.genus

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_orbits(self):
        return len(self.representative)

    @cached_property
    def deck_transforms(self):
        cache = {}
        out = []
        for w in self.deck_words:
            if w not in cache:
                cache[w] = self.surface.element(w)
            out.append(cache[w])
        return out

    @cached_property
    def deck_coefficients(self):
        return coefficient_arrays(self.deck_transforms)

    @property
    def boundary_orbits(self):
        """Orbits with several occurrences: orbit -> list of (occurrence, deck transform)."""
        out = {}
        counts = np.bincount(self.orbit, minlength=self.n_orbits)
        for i in np.flatnonzero(counts[self.orbit] > 1):
            out.setdefault(int(self.orbit[i]), []).append((int(i), self.deck_transforms[i]))
        return out

    def _check(self):
        if np.any(np.abs(self.vertices) >= 1 - 1e-9):
            raise MeshError("vertex outside the open unit disk")
        if np.any(self.face_signed_area <= 0):
            raise MeshError("face with non-positive chart orientation; tiles far from the origin "
                            "(covers) need refinement level 2 or more")

    # --------------------------------------------------------------- geometry
    @cached_property
    def corners(self):
        return self.vertices[self.faces]

    @cached_property
    def face_signed_area(self):
        z = self.vertices[self.faces]
        e1 = z[:, 1] - z[:, 0]
        e2 = z[:, 2] - z[:, 0]
        return 0.5 * (e1.real * e2.imag - e1.imag * e2.real)

    @property
    def face_area(self):
        """Euclidean chart area of each face."""
        return self.face_signed_area

    @cached_property
    def dzbar(self):
        """d/dzbar of the three hat functions on each face, shape (nf, 3)."""
        z = self.corners
        area = self.face_signed_area[:, None]
        opposite = np.roll(z, -2, axis=1) - np.roll(z, -1, axis=1)
        return 1j * opposite / (4.0 * area)

    @property
    def dz(self):
        """d/dz of the three hat functions on each face."""
        return np.conj(self.dzbar)

    @cached_property
    def nodes(self):
        """Quadrature nodes, shape (nf, 6)."""
        return self.corners @ QUAD_BARY.T

    @cached_property
    def node_weights(self):
        """Chart-area quadrature weights, shape (nf, 6)."""
        return self.face_signed_area[:, None] * QUAD_WEIGHTS[None, :]

    @cached_property
    def lambda_sq_nodes(self):
        return conformal_factor(self.nodes)

    @cached_property
    def barycenters(self):
        return self.corners.mean(axis=1)

    def integrate(self, values):
        """Integrate node samples, shape (nf, 6), against the chart area (i/2)dz^dzbar."""
        return float(np.sum(self.node_weights * values))

    def integrate_per_face(self, values):
        return np.sum(self.node_weights * values, axis=1)

    def hyperbolic_area(self):
        return self.integrate(self.lambda_sq_nodes)

    def max_edge_length(self):
        z = self.corners
        return float(np.abs(z - np.roll(z, 1, axis=1)).max())

    def interpolate(self, occurrence_values):
        """Affine interpolation of per-occurrence values to the quadrature nodes."""
        v = np.asarray(occurrence_values)[self.faces]
        return v @ QUAD_BARY.T

    @cached_property
    def node_matrix(self):
        """Sparse (nf*6, nv) matrix of hat-function values at the nodes."""
        nf = self.n_faces
        rows = np.repeat(np.arange(nf * 6), 3)
        cols = np.repeat(self.faces, 6, axis=0).ravel()
        vals = np.tile(QUAD_BARY.ravel(), nf)
        return sp.csr_matrix((vals, (rows, cols)), shape=(nf * 6, self.n_vertices))

    @cached_property
    def orbit_matrix(self):
        """Sparse (nv, norbits) 0/1 matrix sending orbit values to occurrences."""
        nv = self.n_vertices
        return sp.csr_matrix((np.ones(nv), (np.arange(nv), self.orbit)),
                             shape=(nv, self.n_orbits))

    # ------------------------------------------------------------- topology
    def edge_count(self):
        """Number of edges of the identified complex.

        Two occurrence edges are identified when one deck transform maps both
        endpoints of one onto the other, which is detected through the orbit
        ids and the relative deck transform of the endpoints.
        """
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.unique(np.sort(e, axis=1), axis=0)
        keys = set()
        deck = self.deck_transforms
        for a, b in e:
            oa, ob = int(self.orbit[a]), int(self.orbit[b])
            if oa > ob:
                a, b, oa, ob = b, a, ob, oa
            rel = deck[a].inverse() @ deck[b]
            k1 = _element_key(rel)
            if oa == ob:
                k1 = min(k1, _element_key(rel.inverse()))
            keys.add((oa, ob, k1))
        return len(keys)

    def euler_characteristic(self):
        return self.n_orbits - self.edge_count() + self.n_faces

    # ------------------------------------------------------------- orbit ops
    def orbit_sum(self, occurrence_values):
        """Sum per-occurrence values into orbits."""
        v = np.asarray(occurrence_values)
        out = np.zeros((self.n_orbits,) + v.shape[1:], dtype=v.dtype)
        np.add.at(out, self.orbit, v)
        return out

    @cached_property
    def interior_occurrence(self):
        """True for occurrences whose orbit has a single occurrence off the rim."""
        counts = np.bincount(self.orbit, minlength=self.n_orbits)
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.sort(e, axis=1)
        _, idx, cnt = np.unique(e, axis=0, return_index=True, return_counts=True)
        rim = np.zeros(self.n_vertices, dtype=bool)
        rim[e[idx[cnt == 1]].ravel()] = True
        return (counts[self.orbit] == 1) & ~rim


def _element_key(g: MoebiusTransform):
    m = g.matrix().ravel()
    if m[0].real < 0 or (m[0].real == 0 and m[0].imag < 0):
        m = -m
    return tuple(np.round(np.concatenate([m.real, m.imag]), 7) + 0.0)


def triangulate(surface: FuchsianSurface, level: int, segments: int = DEFAULT_SEGMENTS) -> TriangulatedDomain:
    """Triangulate the fundamental domain of ``surface``.

    Parameters
    ----------
    surface : FuchsianSurface
    level : int
        Number of 1->4 refinement rounds.
    segments : int
        Geodesic pieces per polygon side in the base fan.

    Returns
    -------
    TriangulatedDomain
        Face count is ``tiles * 4g * segments * 4**level``.

    Raises
    ------
    MeshError
        If a face comes out inverted.  Tiles other than the base polygon are
        refined in the base chart and then mapped, so covers need level >= 2.
    """
    if int(level) != level or level < 0:
        raise InvalidArgument("level must be a non-negative integer")
    if segments < 1:
        raise InvalidArgument("segments must be positive")
    if not surface.pairings:
        raise InvalidArgument("surface has no side pairings to triangulate")
    n = surface.sides_per_tile
    z0, f0, tags0, N = _base_tile(surface.polygon, segments, level)
    nb = len(z0)

    tiles = surface.tile_transforms()
    z = np.concatenate([c(z0) for c in tiles])
    faces = np.concatenate([f0 + t * nb for t in range(len(tiles))])
    # rim index: (global side, position) -> occurrence before merging
    rim = {}
    for t in range(len(tiles)):
        for i, tg in enumerate(tags0):
            for s, k in tg:
                rim[(t * n + s, k)] = t * nb + i

    outer = {p.side: p for p in surface.pairings}
    parent = np.arange(len(z))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # sides shared by two tiles: merge coincident vertices
    for x in range(len(tiles) * n):
        if x in outer:
            continue
        a, b = surface.side_endpoints(x)
        for y in range(len(tiles) * n):
            if y == x or y in outer:
                continue
            c, d = surface.side_endpoints(y)
            if abs(a - d) < 1e-9 and abs(b - c) < 1e-9 and x < y:
                for k in range(N + 1):
                    i, j = rim[(x, k)], rim[(y, N - k)]
                    if abs(z[i] - z[j]) > 1e-9:
                        raise MeshError("internal side vertices do not coincide")
                    ri, rj = find(i), find(j)
                    parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(z))])
    keep, new_index = np.unique(roots, return_inverse=True)
    z = z[keep]
    faces = new_index[faces]
    rim = {key: int(new_index[v]) for key, v in rim.items()}

    # deck identifications across outer sides: z[rim[partner, N-k]] = g(z[rim[side, k]])
    links = [[] for _ in range(len(z))]
    for p in surface.pairings:
        for k in range(N + 1):
            i = rim[(p.side, k)]
            j = rim[(p.partner, N - k)]
            if abs(p.transform(z[i]) - z[j]) > 1e-9:
                raise MeshError(f"pairing {p.side}->{p.partner} does not match rim vertices")
            links[i].append((j, p.word))
            links[j].append((i, invert_word(p.word)))

    orbit = -np.ones(len(z), dtype=np.int64)
    words = [None] * len(z)
    reps = []
    absz = np.abs(z)
    for start in range(len(z)):
        if orbit[start] >= 0:
            continue
        comp = [start]
        orbit[start] = len(reps)
        words[start] = ()
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j, w in links[i]:
                if orbit[j] < 0:
                    orbit[j] = orbit[start]
                    words[j] = reduce_word(w + words[i])
                    comp.append(j)
                    queue.append(j)
        rep = min(comp, key=lambda i: (absz[i], i))
        if rep != start:
            back = invert_word(words[rep])
            for i in comp:
                words[i] = reduce_word(words[i] + back)
        reps.append(rep)

    dom = TriangulatedDomain(surface, z, faces, orbit, reps, words, level, segments)
    deck = dom.deck_transforms
    rz = z[np.asarray(reps)][orbit]
    err = max((abs(deck[i](rz[i]) - z[i]) for i in range(len(z))), default=0.0)
    if err > 1e-9:
        raise MeshError(f"deck transforms inconsistent with vertex positions ({err:.2e})")
    return dom


def hyperbolic_area(domain: TriangulatedDomain) -> float:
    """Hyperbolic area of the domain, the quadrature of lambda^2 over all faces."""
    return domain.hyperbolic_area()


# ------------------------------------------------------------------ file format
MESH_HEADER = "WPLAB-MESH v1"


def write_mesh(domain: TriangulatedDomain, path):
    """Write a domain in the line-oriented ``WPLAB-MESH v1`` format.

    Besides the VERTEX, FACE, PAIRING and GENERATOR records, the file carries
    TILE records (ambient words of the tiles), a POLYGON record per base
    polygon vertex, and a DECK record per vertex with its orbit id and deck
    word, so that the domain is reconstructed exactly.
    """
    s = domain.surface
    r = _fmt
    lines = [f"{MESH_HEADER} genus {s.genus} level {domain.refinement_level} "
             f"segments {domain.segments} degree {s.degree}"]
    if s.characters is not None:
        lines.append("CHARACTERS " + " ".join(str(c) for c in s.characters))
    for g in s.ambient:
        lines.append(f"GENERATOR {r(g.alpha.real)} {r(g.alpha.imag)} {r(g.beta.real)} {r(g.beta.imag)}")
    for p in s.polygon:
        lines.append(f"POLYGON {r(p.real)} {r(p.imag)}")
    for w in s.tiles:
        lines.append("TILE " + " ".join(str(x) for x in w))
    for p in s.pairings:
        g = p.transform
        lines.append(f"PAIRING {p.side} {p.partner} {r(g.alpha.real)} {r(g.alpha.imag)} "
                     f"{r(g.beta.real)} {r(g.beta.imag)} " + " ".join(str(x) for x in p.word))
    for i, v in enumerate(domain.vertices):
        lines.append(f"VERTEX {i} {r(v.real)} {r(v.imag)}")
    for f in domain.faces:
        lines.append(f"FACE {f[0]} {f[1]} {f[2]}")
    rep = set(domain.representative.tolist())
    for i in range(domain.n_vertices):
        flag = "R" if i in rep else "-"
        lines.append(f"DECK {i} {domain.orbit[i]} {flag} " + " ".join(str(x) for x in domain.deck_words[i]))
    with open(path, "w") as fh:
        fh.write("\n".join(line.rstrip() for line in lines) + "\n")


def read_mesh(path) -> TriangulatedDomain:
    """Read a domain written by :func:`write_mesh`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    head = lines[0].split()
    if " ".join(head[:2]) != MESH_HEADER:
        raise MeshError("not a WPLAB-MESH v1 file")
    meta = dict(zip(head[2::2], head[3::2]))
    gens, polygon, tiles, pairings = [], [], [], []
    verts, faces, deck = {}, [], {}
    chars = None
    for ln in lines[1:]:
        tok = ln.split()
        if not tok:
            continue
        kind = tok[0]
        if kind == "GENERATOR":
            a, b = _complex_pair(tok[1:5])
            gens.append(MoebiusTransform(a, b))
        elif kind == "POLYGON":
            polygon.append(complex(float(tok[1]), float(tok[2])))
        elif kind == "TILE":
            tiles.append(tuple(int(x) for x in tok[1:]))
        elif kind == "CHARACTERS":
            chars = tuple(int(x) for x in tok[1:])
        elif kind == "PAIRING":
            a, b = _complex_pair(tok[3:7])
            pairings.append(Pairing(int(tok[1]), int(tok[2]), MoebiusTransform(a, b),
                                    tuple(int(x) for x in tok[7:])))
        elif kind == "VERTEX":
            verts[int(tok[1])] = complex(float(tok[2]), float(tok[3]))
        elif kind == "FACE":
            faces.append([int(tok[1]), int(tok[2]), int(tok[3])])
        elif kind == "DECK":
            deck[int(tok[1])] = (int(tok[2]), tok[3] == "R", tuple(int(x) for x in tok[4:]))
        else:
            raise MeshError(f"unknown record {kind!r}")
    nv = len(verts)
    z = np.array([verts[i] for i in range(nv)])
    orbit = np.array([deck[i][0] for i in range(nv)])
    reps = np.zeros(orbit.max() + 1, dtype=np.int64)
    for i in range(nv):
        if deck[i][1]:
            reps[deck[i][0]] = i
    words = [deck[i][2] for i in range(nv)]
    degree = int(meta.get("degree", 1))
    genus = int(meta["genus"])
    if degree == 1 and len(tiles) == 1 and tiles[0] == ():
        generators = list(gens)
    else:
        generators = []
        seen = set()
        for p in pairings:
            key = tuple(sorted((p.side, p.partner)))
            if key not in seen:
                seen.add(key)
                generators.append(p.transform)
    surface = FuchsianSurface(genus, generators, np.array(polygon), pairings, tiles=tiles,
                              ambient=gens, characters=chars, degree=degree)
    return TriangulatedDomain(surface, z, faces, orbit, reps, words,
                              int(meta["level"]), int(meta.get("segments", DEFAULT_SEGMENTS)))


def _fmt(x):
    """Shortest decimal that round-trips the float exactly."""
    return repr(float(x))


def _complex_pair(tok):
    x = [float(t) for t in tok]
    return complex(x[0], x[1]), complex(x[2], x[3])
