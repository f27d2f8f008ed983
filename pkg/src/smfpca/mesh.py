"""Triangulated surfaces: loading, validation, generation, and queries.

A surface is a collection of vertices in 3-space together with oriented
triangles. Construction validates the combinatorics (index ranges,
edge-manifoldness, consistent orientation) and the geometry (no
degenerate triangles). Meshes are immutable once built; all queries are
safe to run concurrently.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateTriangle,
    DimensionMismatch,
    InputError,
    ParseError,
    ResourceLimit,
    TopologyError,
)

# Tolerance for barycentric containment; tiny negatives are clamped.
BARY_EPSILON = 1e-9

# Hard cap on generated sphere vertices (subdivision 8 stays below it).
SPHERE_VERTEX_CAP = 1_000_000

# Above this triangle count, closest-point queries prune candidates
# with a KD-tree; below it, the exhaustive scan is both fast and the
# definition of correctness.
_LOCATE_BRUTE_MAX = 10_000


@dataclass(frozen=True, eq=False)
class SurfaceLocation:
    """A point on the surface: a triangle index plus barycentric weights.

    Weights are clamped into [0, 1] at construction: values in
    [-BARY_EPSILON, 0) become 0 and the triple is renormalized to sum
    to 1. Larger violations raise :class:`InputError`.
    """

    triangle_index: int
    barycentric: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.barycentric, dtype=np.float64)
        if b.shape != (3,):
            raise DimensionMismatch("barycentric coordinates must be a 3-vector")
        if b.min() < -BARY_EPSILON:
            raise InputError(f"negative barycentric weight {b.min():g}")
        total = b.sum()
        if abs(total - 1.0) > BARY_EPSILON:
            raise InputError(f"barycentric weights sum to {total:g}, expected 1")
        b = np.maximum(b, 0.0)
        b = b / b.sum()
        b.flags.writeable = False
        object.__setattr__(self, "triangle_index", int(self.triangle_index))
        object.__setattr__(self, "barycentric", b)


@dataclass(frozen=True, eq=False)
class TriangleGeometry:
    """Flat-metric data of one triangle.

    Attributes
    ----------
    area : float
        Triangle area in squared length units.
    basis_gradients : ndarray, shape (3, 3)
        Row i is the ambient-space gradient of the nodal basis function
        attached to local vertex i, constant over the triangle. The rows
        sum to zero and are orthogonal to the triangle normal.
    """

    area: float
    basis_gradients: np.ndarray


class TriangleMesh:
    """An oriented, edge-manifold triangulated surface embedded in 3-space.

    Parameters
    ----------
    vertices : array_like, shape (K, 3)
        Ambient coordinates.
    triangles : array_like, shape (T, 3)
        Ordered vertex-index triples; ordering fixes the orientation.

    Raises
    ------
    TopologyError
        Out-of-range or repeated indices, a non-manifold edge, or
        inconsistent orientation. The offending element index is
        attached when known.
    DegenerateTriangle
        A triangle with area at or below the degeneracy threshold
        (1e-12 times the squared bounding-box diagonal).

    Notes
    -----
    Open meshes (boundary edges present) are accepted; `closed` is then
    False and downstream smoothing implicitly imposes natural boundary
    conditions. Instances are immutable and safe for concurrent reads.
    """

    def __init__(self, vertices, triangles):
        v = np.ascontiguousarray(vertices, dtype=np.float64)
        t = np.ascontiguousarray(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise DimensionMismatch("vertices must have shape (K, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise DimensionMismatch("triangles must have shape (T, 3)")
        if not np.isfinite(v).all():
            raise InputError("non-finite vertex coordinate")
        self.vertices = v
        self.triangles = t
        if t.size:
            bad = np.flatnonzero((t < 0).any(axis=1) | (t >= len(v)).any(axis=1))
            if bad.size:
                raise TopologyError("vertex index out of range", element_index=int(bad[0]))
            rep = np.flatnonzero(
                (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 2] == t[:, 0])
            )
            if rep.size:
                raise TopologyError("repeated vertex in triangle", element_index=int(rep[0]))

        bbox = v.max(axis=0) - v.min(axis=0) if len(v) else np.zeros(3)
        diag2 = float(bbox @ bbox)
        # Scale-relative degeneracy threshold in squared length units.
        self.area_epsilon = 1e-12 * diag2

        self._areas, self._gradients = self._compute_geometry()
        self._edge_census()

        referenced = np.unique(t)
        if referenced.size < len(v):
            warnings.warn(
                "mesh has vertices not referenced by any triangle; "
                "finite element operators built on it will be singular",
                stacklevel=2,
            )

        for a in (self.vertices, self.triangles, self._areas, self._gradients):
            a.flags.writeable = False
        self._vertex_tree = None
        self._centroid_tree = None
        self._centroid_radius = None

    # -- basic shape --------------------------------------------------

    @property
    def K(self) -> int:
        """Vertex count."""
        return self.vertices.shape[0]

    @property
    def T(self) -> int:
        """Triangle count."""
        return self.triangles.shape[0]

    def is_closed(self) -> bool:
        """True iff every edge is shared by exactly two triangles."""
        return self.closed

    @property
    def areas(self):
        """Per-triangle areas, shape (T,)."""
        return self._areas

    def total_area(self) -> float:
        return float(self._areas.sum())

    # -- construction helpers -----------------------------------------

    def _compute_geometry(self):
        v, t = self.vertices, self.triangles
        p0 = v[t[:, 0]]
        p1 = v[t[:, 1]]
        p2 = v[t[:, 2]]
        n = np.cross(p1 - p0, p2 - p0)
        two_a = np.linalg.norm(n, axis=1)
        areas = 0.5 * two_a
        bad = np.flatnonzero(areas <= self.area_epsilon)
        if bad.size:
            raise DegenerateTriangle(
                f"triangle area {areas[bad[0]]:g} at or below threshold "
                f"{self.area_epsilon:g}",
                element_index=int(bad[0]),
            )
        unit_n = n / two_a[:, None]
        grads = np.empty((self.T, 3, 3))
        # Gradient of barycentric coordinate i: rotate the opposite edge
        # into the triangle plane and divide by twice the area.
        grads[:, 0] = np.cross(unit_n, p2 - p1) / two_a[:, None]
        grads[:, 1] = np.cross(unit_n, p0 - p2) / two_a[:, None]
        grads[:, 2] = np.cross(unit_n, p1 - p0) / two_a[:, None]
        return areas, grads

    def _edge_census(self):
        t = self.triangles
        K = max(self.K, 1)
        half = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)
        owner = np.tile(np.arange(self.T), 3)
        lo = np.minimum(half[:, 0], half[:, 1])
        hi = np.maximum(half[:, 0], half[:, 1])
        und = lo * np.int64(K) + hi
        uniq, inverse, counts = np.unique(und, return_inverse=True, return_counts=True)
        if counts.size and counts.max() > 2:
            key = uniq[np.argmax(counts)]
            culprit = owner[np.flatnonzero(und == key)[-1]]
            raise TopologyError(
                "edge shared by more than two triangles", element_index=int(culprit)
            )
        directed = half[:, 0] * np.int64(K) + half[:, 1]
        order = np.argsort(directed, kind="stable")
        srt = directed[order]
        dup = np.flatnonzero(srt[1:] == srt[:-1]) if srt.size else np.array([], int)
        if dup.size:
            culprit = owner[order[dup[0] + 1]]
            raise TopologyError(
                "inconsistent orientation: edge traversed twice in the "
                "same direction",
                element_index=int(culprit),
            )
        self.edge_count = int(uniq.size)
        self.boundary_edge_count = int((counts == 1).sum())
        self.closed = bool(counts.size) and bool((counts == 2).all())

    # -- queries ------------------------------------------------------

    def triangle_geometry(self, t: int) -> TriangleGeometry:
        """Area and nodal basis gradients of triangle ``t``.

        Raises
        ------
        DegenerateTriangle
            Never for a validated mesh; kept for callers constructing
            geometry from mutated vertex sets.
        """
        if not 0 <= t < self.T:
            raise DimensionMismatch(f"triangle index {t} out of range [0, {self.T})")
        area = float(self._areas[t])
        if area <= self.area_epsilon:
            raise DegenerateTriangle("degenerate triangle", element_index=t)
        return TriangleGeometry(area=area, basis_gradients=self._gradients[t])

    def locate_point(self, p) -> SurfaceLocation:
        """Closest point on the mesh to ``p``, as a surface location.

        Exhaustive over all triangles below a size threshold; above it,
        candidates are pruned with KD-trees (same result, the exhaustive
        scan defines correctness). Distance ties resolve to the lowest
        triangle index.
        """
        p = np.asarray(p, dtype=np.float64).reshape(3)
        if self.T <= _LOCATE_BRUTE_MAX:
            cand = np.arange(self.T)
        else:
            cand = self._candidate_triangles(p)
        bary, d2 = _closest_point_barycentric(
            self.vertices, self.triangles[cand], p
        )
        best = int(np.argmin(d2))
        return SurfaceLocation(int(cand[best]), bary[best])

    def location_coordinates(self, loc: SurfaceLocation):
        """Ambient coordinates of a surface location."""
        tri = self.triangles[loc.triangle_index]
        return loc.barycentric @ self.vertices[tri]

    def _candidate_triangles(self, p):
        if self._vertex_tree is None:
            centroids = self.vertices[self.triangles].mean(axis=1)
            spread = np.linalg.norm(
                self.vertices[self.triangles] - centroids[:, None, :], axis=2
            ).max()
            self._centroid_radius = float(spread)
            self._centroid_tree = cKDTree(centroids)
            self._vertex_tree = cKDTree(self.vertices)
        d0, _ = self._vertex_tree.query(p)
        # Any triangle holding the true closest point has its centroid
        # within d0 + max centroid-to-corner spread of p.
        idx = self._centroid_tree.query_ball_point(
            p, d0 + self._centroid_radius * (1 + 1e-12) + 1e-300
        )
        idx.sort()
        return np.asarray(idx, dtype=np.int64)


def _closest_point_barycentric(vertices, triangles, p):
    """Barycentric coordinates of the closest point to ``p`` on each triangle.

    Region-by-region projection onto vertices, edges, and interiors;
    vectorized over the triangle list. Returns (bary (M, 3), d2 (M,)).
    """
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2_ = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    m = triangles.shape[0]
    bary = np.zeros((m, 3))
    done = np.zeros(m, dtype=bool)

    def claim(cond):
        mask = cond & ~done
        done[mask] = True
        return mask

    mask = claim((d1 <= 0) & (d2_ <= 0))
    bary[mask, 0] = 1.0
    mask = claim((d3 >= 0) & (d4 <= d3))
    bary[mask, 1] = 1.0
    vc = d1 * d4 - d3 * d2_
    mask = claim((vc <= 0) & (d1 >= 0) & (d3 <= 0))
    if mask.any():
        v = d1[mask] / (d1[mask] - d3[mask])
        bary[mask, 0] = 1.0 - v
        bary[mask, 1] = v
    mask = claim((d6 >= 0) & (d5 <= d6))
    bary[mask, 2] = 1.0
    vb = d5 * d2_ - d1 * d6
    mask = claim((vb <= 0) & (d2_ >= 0) & (d6 <= 0))
    if mask.any():
        w = d2_[mask] / (d2_[mask] - d6[mask])
        bary[mask, 0] = 1.0 - w
        bary[mask, 2] = w
    va = d3 * d6 - d4 * d5
    mask = claim((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0))
    if mask.any():
        w = (d4[mask] - d3[mask]) / ((d4[mask] - d3[mask]) + (d5[mask] - d6[mask]))
        bary[mask, 1] = 1.0 - w
        bary[mask, 2] = w
    mask = ~done
    if mask.any():
        denom = va[mask] + vb[mask] + vc[mask]
        v = vb[mask] / denom
        w = vc[mask] / denom
        bary[mask, 0] = 1.0 - v - w
        bary[mask, 1] = v
        bary[mask, 2] = w

    np.clip(bary, 0.0, 1.0, out=bary)
    bary /= bary.sum(axis=1, keepdims=True)
    closest = bary[:, 0, None] * a + bary[:, 1, None] * b + bary[:, 2, None] * c
    diff = closest - p
    return bary, np.einsum("ij,ij->i", diff, diff)


def vertex_locations(mesh: TriangleMesh):
    """One surface location per vertex: its indicator in the lowest-index
    triangle referencing it.

    Raises
    ------
    TopologyError
        If some vertex is referenced by no triangle.
    """
    flat = mesh.triangles.ravel()
    uniq, first = np.unique(flat, return_index=True)
    if uniq.size < mesh.K:
        missing = np.setdiff1d(np.arange(mesh.K), uniq)
        raise TopologyError(
            "vertex not referenced by any triangle", element_index=int(missing[0])
        )
    locs = []
    eye = np.eye(3)
    for k in range(mesh.K):
        pos = first[k]
        locs.append(SurfaceLocation(int(pos // 3), eye[pos % 3]))
    return locs


# -- OFF input/output -------------------------------------------------


def load_mesh(path, format="off") -> TriangleMesh:
    """Load a triangulated surface from an ASCII OFF file.

    The format, exactly: a header line ``OFF``; a counts line
    ``K T E`` (E ignored); K vertex lines of three decimal numbers;
    T face lines ``3 i j k``. Comment text after ``#`` and blank lines
    are skipped anywhere.

    Parameters
    ----------
    path : str or pathlib.Path
    format : {"off"}
        Only OFF is supported.

    Raises
    ------
    ParseError
        Malformed content, with the offending one-based line number.
    TopologyError, DegenerateTriangle
        Propagated from mesh validation.
    """
    if format.lower() != "off":
        raise InputError(f"unsupported mesh format {format!r}")
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        raw = handle.readlines()

    significant = []
    for lineno, line in enumerate(raw, start=1):
        text = line.split("#", 1)[0].strip()
        if text:
            significant.append((lineno, text))
    cursor = 0

    def next_line(expect):
        nonlocal cursor
        if cursor >= len(significant):
            last = significant[-1][0] if significant else 1
            raise ParseError(f"unexpected end of file, expected {expect}", line=last)
        item = significant[cursor]
        cursor += 1
        return item

    lineno, text = next_line("OFF header")
    if text != "OFF":
        raise ParseError(f"expected OFF header, found {text!r}", line=lineno)
    lineno, text = next_line("counts line")
    parts = text.split()
    if len(parts) not in (2, 3):
        raise ParseError("counts line must read 'K T E'", line=lineno)
    try:
        n_vertices, n_faces = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError("counts line must hold integers", line=lineno) from None
    if n_vertices < 0 or n_faces < 0:
        raise ParseError("negative count", line=lineno)

    vertices = np.empty((n_vertices, 3))
    for k in range(n_vertices):
        lineno, text = next_line(f"vertex line {k}")
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(
                f"vertex line must hold 3 coordinates, found {len(parts)}",
                line=lineno,
            )
        try:
            vertices[k] = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-numeric vertex coordinate in {text!r}", line=lineno) from None

    triangles = np.empty((n_faces, 3), dtype=np.int64)
    for t in range(n_faces):
        lineno, text = next_line(f"face line {t}")
        parts = text.split()
        try:
            tokens = [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-integer face token in {text!r}", line=lineno) from None
        if len(tokens) != 4 or tokens[0] != 3:
            raise ParseError("face line must read '3 i j k'", line=lineno)
        for idx in tokens[1:]:
            if not 0 <= idx < n_vertices:
                raise ParseError(
                    f"vertex index {idx} out of range [0, {n_vertices})", line=lineno
                )
        triangles[t] = tokens[1:]

    if cursor != len(significant):
        lineno, text = significant[cursor]
        raise ParseError(f"unexpected trailing content {text!r}", line=lineno)
    return TriangleMesh(vertices, triangles)


def save_mesh(mesh: TriangleMesh, path):
    """Write a mesh as ASCII OFF (the format `load_mesh` reads)."""
    lines = ["OFF", f"{mesh.K} {mesh.T} {mesh.edge_count}"]
    for v in mesh.vertices:
        lines.append(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for t in mesh.triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


# -- generators -------------------------------------------------------

_ICOSA_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def _icosahedron_vertices():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _subdivide_on_sphere(vertices, faces):
    n = len(vertices)
    edges = np.concatenate(
        [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0
    )
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    key = lo * np.int64(n) + hi
    uniq, inverse = np.unique(key, return_inverse=True)
    mids = vertices[uniq // n] + vertices[uniq % n]
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    new_vertices = np.concatenate([vertices, mids], axis=0)

    nf = len(faces)
    mid_index = n + inverse
    ab = mid_index[:nf]
    bc = mid_index[nf : 2 * nf]
    ca = mid_index[2 * nf :]
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ],
        axis=0,
    )
    return new_vertices, new_faces


def unit_sphere_mesh(subdivisions: int) -> TriangleMesh:
    """Icosahedron subdivided ``subdivisions`` times, projected to radius 1.

    The result is closed and consistently outward-oriented, with
    K = 10 * 4**subdivisions + 2 vertices.

    Raises
    ------
    ResourceLimit
        If the vertex count would exceed the built-in cap.
    """
    if subdivisions < 0:
        raise InputError("subdivisions must be nonnegative")
    predicted = 10 * 4**subdivisions + 2
    if predicted > SPHERE_VERTEX_CAP:
        raise ResourceLimit(
            f"subdivisions {subdivisions} would create {predicted} vertices "
            f"(cap {SPHERE_VERTEX_CAP})"
        )
    vertices = _icosahedron_vertices()
    faces = _ICOSA_FACES.copy()
    for _ in range(subdivisions):
        vertices, faces = _subdivide_on_sphere(vertices, faces)
    volume = np.einsum(
        "ij,ij->i",
        vertices[faces[:, 0]],
        np.cross(vertices[faces[:, 1]], vertices[faces[:, 2]]),
    ).sum()
    if volume < 0:
        faces = faces[:, [0, 2, 1]]
    return TriangleMesh(vertices, faces)
