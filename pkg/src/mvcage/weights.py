"""Mean value weights: per-triangle contributions, per-vertex assembly,
normalized coordinates, and the on-surface interpolation fallback."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cage import (Classification, DEFAULT_TOLERANCES, FrameBatch)
from .errors import NormalizationSingular, WrongClassification


class WeightSource(enum.Enum):
    GENERAL_FORMULA = "GeneralFormula"
    PLANAR_FORMULA = "PlanarFormula"
    SURFACE_FALLBACK = "SurfaceFallback"


@dataclass
class TriangleWeights:
    """Weights of one triangle's three corners at one query point."""

    w: np.ndarray
    source: WeightSource


@dataclass
class WeightVector:
    """Per-vertex weights w_i and normalized coordinates lam_i.

    On the cage surface the coordinates are barycentric interpolation
    weights (at most three nonzeros) and ``w`` is None: the unnormalized
    weights diverge there.
    """

    w: Optional[np.ndarray]
    lam: np.ndarray
    on_surface: bool = False
    surface_location: Optional[tuple] = None   # (triangle index, barycentric)


def _general_triangle_weights(batch, idx):
    """w_j = (N_j . m) / detA for a subset of generically classified triangles."""
    N = batch.N[idx]
    m = batch.m[idx]
    detA = batch.detA[idx]
    return np.einsum("sjk,sk->sj", N, m) / detA[:, None]


def triangle_weights(frame, cage, t, eta):
    """General-formula weights of triangle ``t``'s corners.

    Only valid for a Generic frame; the coplanar and on-surface cases
    have their own entry points.
    """
    if frame.classification != Classification.GENERIC:
        raise WrongClassification(
            f"triangle_weights needs a Generic frame, got {frame.classification.name}")
    w = frame.N @ frame.m / frame.detA
    return TriangleWeights(w=w, source=WeightSource.GENERAL_FORMULA)


def triangle_weights_planar(frame, cage, t, eta):
    """Weights when the query point lies in the support plane, outside.

    The projected spherical triangle degenerates to an arc of zero area,
    so every corner weight vanishes: the detA -> 0 limit of the general
    quotient is exactly zero (the weight is an odd function of the signed
    plane distance). Validated against the normal-approach limit in the
    test suite.
    """
    if frame.classification != Classification.ON_SUPPORT_PLANE_OUTSIDE:
        raise WrongClassification(
            "triangle_weights_planar needs an OnSupportPlaneOutsideT frame, "
            f"got {frame.classification.name}")
    return TriangleWeights(w=np.zeros(3), source=WeightSource.PLANAR_FORMULA)


def _barycentric_in_triangle(cage, t, eta):
    a, b, c = cage.vertices[cage.triangles[t]]
    n_T = cage.tri_normals[t]
    proj = eta - ((eta - a) @ n_T) * n_T
    v0, v1, v2 = b - a, c - a, proj - a
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    denom = d00 * d11 - d01 * d01
    b1 = (d11 * d20 - d01 * d21) / denom
    b2 = (d00 * d21 - d01 * d20) / denom
    bary = np.array([1.0 - b1 - b2, b1, b2])
    bary = np.clip(bary, 0.0, 1.0)
    return bary / bary.sum()


def surface_weights(cage, t, eta):
    """Interpolation fallback: barycentric coordinates of ``eta`` in triangle ``t``."""
    eta = np.asarray(eta, dtype=float).reshape(3)
    bary = _barycentric_in_triangle(cage, t, eta)
    lam = np.zeros(cage.n_vertices)
    lam[cage.triangles[t]] = bary
    return WeightVector(w=None, lam=lam, on_surface=True,
                        surface_location=(int(t), bary))


def _vertex_indicator(cage, vertex):
    lam = np.zeros(cage.n_vertices)
    lam[vertex] = 1.0
    t = int(cage.vertex_triangle_adjacency[vertex][0])
    bary = np.zeros(3)
    bary[list(cage.triangles[t]).index(vertex)] = 1.0
    return WeightVector(w=None, lam=lam, on_surface=True,
                        surface_location=(t, bary))


def _surface_triangle(batch):
    """Index of a triangle whose surface owns the query point, or -1."""
    cls = batch.classification
    on = np.nonzero((cls == Classification.INSIDE)
                    | (cls == Classification.ON_EDGE_OR_VERTEX))[0]
    return int(on[0]) if len(on) else -1


def _accumulate(cage, idx, per_triangle):
    """Scatter-add per-triangle corner values (s, 3, ...) onto vertices."""
    tris = cage.triangles[idx]
    flat = tris.ravel()
    if per_triangle.ndim == 2:
        return np.bincount(flat, weights=per_triangle.ravel(),
                           minlength=cage.n_vertices)
    out_shape = (cage.n_vertices,) + per_triangle.shape[2:]
    out = np.zeros(out_shape)
    vals = per_triangle.reshape(len(flat), -1)
    for c in range(vals.shape[1]):
        out.reshape(cage.n_vertices, -1)[:, c] = np.bincount(
            flat, weights=vals[:, c], minlength=cage.n_vertices)
    return out


def _raw_vertex_weights(batch):
    """Unnormalized per-vertex weights, or a surface WeightVector short-circuit.

    Returns (w, None) off the surface and (None, WeightVector) on it.
    """
    cage = batch.cage
    if batch.near_vertex >= 0:
        return None, _vertex_indicator(cage, batch.near_vertex)
    t_surf = _surface_triangle(batch)
    if t_surf >= 0:
        return None, surface_weights(cage, t_surf, batch.eta)
    w_tri = np.zeros((cage.n_triangles, 3))
    generic = np.nonzero(batch.classification == Classification.GENERIC)[0]
    if len(generic):
        w_tri[generic] = _general_triangle_weights(batch, generic)
    # coplanar-outside triangles contribute exactly zero
    w = _accumulate(cage, np.arange(cage.n_triangles), w_tri)
    return w, None


def normalize_weights(w, singular_ratio=DEFAULT_TOLERANCES.singular_ratio):
    """lam = w / sum(w), refusing when the sum has cancelled away."""
    total = w.sum()
    scale = np.abs(w).max()
    if scale == 0.0 or abs(total) < singular_ratio * scale:
        raise NormalizationSingular(
            f"|sum w| = {abs(total):.3e} below {singular_ratio:g} * max|w| = "
            f"{singular_ratio * scale:.3e}")
    return w / total


def mvc_coordinates(cage, eta, tol=DEFAULT_TOLERANCES):
    """Mean value coordinates of ``eta`` with respect to the cage.

    Works inside and outside the cage (coordinates are signed; no
    clamping). Points on the cage surface return the interpolation
    fallback. Raises :class:`NormalizationSingular` when the weight sum
    has cancelled to numerical noise (far outside the cage).
    """
    batch = FrameBatch(cage, eta, tol)
    w, surface = _raw_vertex_weights(batch)
    if surface is not None:
        return surface
    lam = normalize_weights(w, tol.singular_ratio)
    return WeightVector(w=w, lam=lam, on_surface=False)
