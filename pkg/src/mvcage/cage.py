"""Cage mesh representation, validation, and per-(triangle, point) frames.

The cage is a closed, consistently oriented triangular mesh with outward
normals. Everything downstream consumes the per-triangle/per-point
"frame": distances, cross products, subtended angles, the mean normal
vector of the projected spherical triangle, and a classification of the
query point against the triangle's support plane.

Index arithmetic is cyclic mod 3 everywhere: for corner j of a triangle
(t1, t2, t3), "j+1" and "j+2" wrap around. This convention is fixed here
once and used verbatim by the weight and derivative formulas.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (DegenerateTriangle, InconsistentOrientation,
                     NonManifoldEdge, NotClosed, VertexCoincidence)


@dataclass(frozen=True)
class Tolerances:
    """Knobs shared across the evaluation pipeline.

    eps_plane   classifies a point as lying in a support plane, relative
                to the triangle's mean edge length.
    eps_theta   series/closed-form seam of the scalar kernels (radians).
    eps_switch  below this plane distance (relative to mean edge) the
                derivative formulas switch to the planar special case
                evaluated at the projected point.
    eps_vertex  vertex-coincidence threshold, relative to the cage bbox
                diagonal.
    eps_pi      kernel domain guard below pi.
    eps_area    degenerate-triangle threshold, relative to bbox diag^2.
    singular_ratio  |sum w| / max|w| below which normalization refuses.
    """

    eps_plane: float = 1e-9
    eps_theta: float = 1e-3
    eps_switch: float = 1e-7
    eps_vertex: float = 1e-12
    eps_pi: float = 1e-9
    eps_area: float = 1e-12
    eps_bary: float = 1e-12
    singular_ratio: float = 1e-14

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


DEFAULT_TOLERANCES = Tolerances()


class Classification(enum.IntEnum):
    GENERIC = 0
    ON_SUPPORT_PLANE_OUTSIDE = 1
    INSIDE = 2
    ON_EDGE_OR_VERTEX = 3


def _as_points(a, name):
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def signed_volume(vertices, triangles):
    """Signed volume of a closed triangle mesh (positive for outward normals)."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=int)
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return float(np.einsum("ij,ij->", a, np.cross(b, c)) / 6.0)


class CageMesh:
    """Immutable validated cage. Construct through :func:`load_cage`."""

    def __init__(self, vertices, triangles, orientation_flipped=False):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.orientation_flipped = bool(orientation_flipped)

        tri_pts = self.vertices[self.triangles]          # (m, 3, 3)
        # edge_vectors[t, j] = p_{t_{j+2}} - p_{t_{j+1}}
        self.edge_vectors = tri_pts[:, [2, 0, 1], :] - tri_pts[:, [1, 2, 0], :]
        self.edge_skews = _skew_batch(self.edge_vectors)  # (m, 3, 3, 3)
        cross = np.cross(tri_pts[:, 1] - tri_pts[:, 0], tri_pts[:, 2] - tri_pts[:, 0])
        nrm = np.linalg.norm(cross, axis=1)
        self.areas = nrm / 2.0
        self.tri_normals = cross / nrm[:, None]
        self.mean_edge = np.linalg.norm(self.edge_vectors, axis=2).mean(axis=1)
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        self.bbox_diag = float(np.linalg.norm(hi - lo))
        self.signed_volume = signed_volume(self.vertices, self.triangles)

        adj = [[] for _ in range(len(self.vertices))]
        for t, tri in enumerate(self.triangles):
            for v in tri:
                adj[v].append(t)
        self.vertex_triangle_adjacency = [np.array(a, dtype=np.int64) for a in adj]

        for a in (self.vertices, self.triangles, self.edge_vectors,
                  self.edge_skews, self.tri_normals, self.areas, self.mean_edge):
            a.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def __repr__(self):
        flip = ", flipped" if self.orientation_flipped else ""
        return (f"CageMesh({self.n_vertices} vertices, "
                f"{self.n_triangles} triangles{flip})")


def _skew_batch(k):
    """Skew matrices K with K @ u = k x u, for an (..., 3) stack."""
    out = np.zeros(k.shape[:-1] + (3, 3))
    kx, ky, kz = k[..., 0], k[..., 1], k[..., 2]
    out[..., 0, 1] = -kz
    out[..., 0, 2] = ky
    out[..., 1, 0] = kz
    out[..., 1, 2] = -kx
    out[..., 2, 0] = -ky
    out[..., 2, 1] = kx
    return out


def load_cage(vertices, triangles, tol=DEFAULT_TOLERANCES):
    """Validate an indexed triangle soup and return a :class:`CageMesh`.

    Raises NotClosed / NonManifoldEdge / InconsistentOrientation /
    DegenerateTriangle. A cage whose consistent winding points inward is
    flipped wholesale and flagged with ``orientation_flipped``.
    """
    verts = _as_points(vertices, "vertices")
    tris = np.asarray(triangles, dtype=np.int64)
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise ValueError(f"triangles must have shape (m, 3), got {tris.shape}")
    if tris.size == 0:
        raise NotClosed("cage has no triangles")
    if tris.min() < 0 or tris.max() >= len(verts):
        raise ValueError("triangle index out of range")
    if np.any(tris[:, 0] == tris[:, 1]) or np.any(tris[:, 1] == tris[:, 2]) \
            or np.any(tris[:, 0] == tris[:, 2]):
        raise DegenerateTriangle("triangle with a repeated vertex")

    # every undirected edge must appear exactly twice, in opposite directions
    halfedges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    undirected = np.sort(halfedges, axis=1)
    uniq, counts = np.unique(undirected, axis=0, return_counts=True)
    if np.any(counts > 2):
        bad = uniq[np.argmax(counts > 2)]
        raise NonManifoldEdge(f"edge {tuple(bad)} belongs to {counts.max()} triangles")
    if np.any(counts == 1):
        bad = uniq[np.argmax(counts == 1)]
        raise NotClosed(f"boundary edge {tuple(bad)}")
    uniq_dir, counts_dir = np.unique(halfedges, axis=0, return_counts=True)
    if np.any(counts_dir > 1):
        bad = uniq_dir[np.argmax(counts_dir > 1)]
        raise InconsistentOrientation(
            f"directed edge {tuple(bad)} used twice; windings disagree")

    flipped = False
    vol = signed_volume(verts, tris)
    if vol < 0:
        tris = tris[:, [0, 2, 1]]
        flipped = True
    elif vol == 0:
        raise InconsistentOrientation("cage has zero signed volume")

    lo, hi = verts.min(axis=0), verts.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    tri_pts = verts[tris]
    areas = 0.5 * np.linalg.norm(
        np.cross(tri_pts[:, 1] - tri_pts[:, 0], tri_pts[:, 2] - tri_pts[:, 0]), axis=1)
    if np.any(areas <= tol.eps_area * diag ** 2):
        raise DegenerateTriangle(
            f"triangle {int(np.argmin(areas))} has area {areas.min():.3e} "
            f"<= {tol.eps_area:g} * bbox_diag^2")

    return CageMesh(verts, tris, orientation_flipped=flipped)


@dataclass
class TriangleFrame:
    """All per-(triangle, query point) quantities the formulas consume."""

    triangle: int
    d: np.ndarray            # (3,)   |p_{t_j} - eta|
    N: np.ndarray            # (3, 3) rows N_j = (p_{t_{j+1}}-eta) x (p_{t_{j+2}}-eta)
    n: np.ndarray            # (3, 3) rows N_j / |N_j|
    theta: np.ndarray        # (3,)   angle subtended by edge (t_{j+1}, t_{j+2})
    JN: np.ndarray           # (3, 3, 3) skew matrices of the opposite edges
    detA: float
    m: np.ndarray            # (3,)   mean normal vector of the projection
    n_T: np.ndarray          # (3,)   unit triangle normal
    area: float
    classification: Classification
    plane_distance: float    # signed distance of eta to the support plane


class FrameBatch:
    """Frames for every triangle of a cage at one query point (vectorized)."""

    __slots__ = ("cage", "eta", "tol", "e", "d", "N", "normN", "n", "theta",
                 "detA", "m", "plane_dist", "classification", "near_vertex")

    def __init__(self, cage, eta, tol=DEFAULT_TOLERANCES):
        eta = np.asarray(eta, dtype=float).reshape(3)
        if not np.all(np.isfinite(eta)):
            raise ValueError("query point must be finite")
        self.cage = cage
        self.eta = eta
        self.tol = tol

        dv = cage.vertices - eta
        vdist = np.linalg.norm(dv, axis=1)
        near = int(np.argmin(vdist))
        self.near_vertex = near if vdist[near] <= tol.eps_vertex * cage.bbox_diag else -1

        e = dv[cage.triangles]                        # (m, 3, 3), rows e_j
        self.e = e
        self.d = np.linalg.norm(e, axis=2)            # (m, 3)
        N = np.cross(e[:, [1, 2, 0], :], e[:, [2, 0, 1], :])
        self.N = N
        normN = np.linalg.norm(N, axis=2)
        self.normN = normN
        with np.errstate(invalid="ignore", divide="ignore"):
            n = np.where(normN[:, :, None] > 0.0, N / normN[:, :, None], 0.0)
        self.n = n
        dots = np.einsum("mjk,mjk->mj", e[:, [1, 2, 0], :], e[:, [2, 0, 1], :])
        self.theta = np.arctan2(normN, dots)          # (m, 3), in [0, pi]
        self.detA = np.einsum("mk,mk->m", e[:, 0, :], N[:, 0, :])
        self.m = 0.5 * np.einsum("mj,mjk->mk", self.theta, n)
        self.plane_dist = -np.einsum("mk,mk->m", e[:, 0, :], cage.tri_normals)
        self.classification = self._classify()

    def _classify(self):
        cage, tol = self.cage, self.tol
        cls = np.zeros(cage.n_triangles, dtype=np.int8)
        near_plane = np.abs(self.plane_dist) <= tol.eps_plane * cage.mean_edge
        for t in np.nonzero(near_plane)[0]:
            cls[t] = self._classify_in_plane(int(t))
        return cls

    def _classify_in_plane(self, t):
        cage, tol = self.cage, self.tol
        a, b, c = cage.vertices[cage.triangles[t]]
        proj = self.eta - self.plane_dist[t] * cage.tri_normals[t]
        v0, v1, v2 = b - a, c - a, proj - a
        d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
        d20, d21 = v2 @ v0, v2 @ v1
        denom = d00 * d11 - d01 * d01
        b1 = (d11 * d20 - d01 * d21) / denom
        b2 = (d00 * d21 - d01 * d20) / denom
        bary = np.array([1.0 - b1 - b2, b1, b2])
        eps = tol.eps_bary
        if np.all(bary > eps):
            return Classification.INSIDE
        if np.all(bary >= -eps):
            return Classification.ON_EDGE_OR_VERTEX
        return Classification.ON_SUPPORT_PLANE_OUTSIDE

    def frame(self, t):
        """Extract the :class:`TriangleFrame` for triangle ``t``."""
        t = int(t)
        tri = self.cage.triangles[t]
        if self.near_vertex >= 0 and self.near_vertex in tri:
            raise VertexCoincidence(self.near_vertex)
        return TriangleFrame(
            triangle=t,
            d=self.d[t].copy(),
            N=self.N[t].copy(),
            n=self.n[t].copy(),
            theta=self.theta[t].copy(),
            JN=self.cage.edge_skews[t].copy(),
            detA=float(self.detA[t]),
            m=self.m[t].copy(),
            n_T=self.cage.tri_normals[t].copy(),
            area=float(self.cage.areas[t]),
            classification=Classification(int(self.classification[t])),
            plane_distance=float(self.plane_dist[t]),
        )


def build_triangle_frame(cage, t, eta, tol=DEFAULT_TOLERANCES):
    """Frame for one triangle at one query point.

    Raises :class:`VertexCoincidence` if ``eta`` effectively sits on one
    of the triangle's vertices; callers handle that by interpolation.
    """
    return FrameBatch(cage, eta, tol).frame(t)
