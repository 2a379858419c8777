"""Exact first and second derivatives of the mean value weights and
coordinates: the general formulas, the coplanar special cases, and the
aggregation into per-vertex gradients and Hessians of lam_i.

The Hessian assembly keeps each of its fourteen sums as a separately
named term (see ``HESSIAN_TERMS``) so a failing finite-difference check
can be bisected to one term.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .cage import Classification, DEFAULT_TOLERANCES, FrameBatch
from .errors import (DegenerateTriangle, OnSurface, WrongClassification)
from .kernels import KernelId, eval_kernel, eval_kernel_derivative
from .weights import (WeightSource, _accumulate, _general_triangle_weights,
                      _surface_triangle, normalize_weights)


@dataclass
class TriangleDerivatives:
    """Gradients and Hessians of one triangle's three corner weights."""

    grad: np.ndarray   # (3, 3)    rows grad w_{t_j}
    hess: np.ndarray   # (3, 3, 3) stack of Hessians
    source: WeightSource


@dataclass
class DerivativeSet:
    """Per-vertex derivative data at one query point."""

    w: np.ndarray             # (n,)
    grad_w: np.ndarray        # (n, 3)
    hess_w: np.ndarray        # (n, 3, 3)
    grad_lambda: np.ndarray   # (n, 3)
    hess_lambda: np.ndarray   # (n, 3, 3)


class _Ctx:
    """Shared per-triangle quantities for a subset of triangles.

    Either sliced out of a FrameBatch (one query point) or built directly
    for per-triangle projected points (the planar path).
    """

    def __init__(self, cage, idx, e, eps_theta, eps_pi):
        self.cage = cage
        self.idx = idx
        self.e = e                                     # (s, 3, 3)
        self.d = np.linalg.norm(e, axis=2)
        self.N = np.cross(e[:, [1, 2, 0], :], e[:, [2, 0, 1], :])
        dots = np.einsum("sjk,sjk->sj", e[:, [1, 2, 0], :], e[:, [2, 0, 1], :])
        self.theta = np.arctan2(np.linalg.norm(self.N, axis=2), dots)
        self.detA = np.einsum("sk,sk->s", e[:, 0, :], self.N[:, 0, :])
        self.E = cage.edge_vectors[idx]                # (s, 3, 3)
        self.JN = cage.edge_skews[idx]                 # (s, 3, 3, 3)
        self.nT = cage.tri_normals[idx]
        self.area = cage.areas[idx]
        self.d1 = self.d[:, [1, 2, 0]]                 # d_{j+1}
        self.d2 = self.d[:, [2, 0, 1]]                 # d_{j+2}
        self.D = self.d1 * self.d2
        # svec_j = 2 eta - p_{t_{j+1}} - p_{t_{j+2}}
        self.svec = -(e[:, [1, 2, 0], :] + e[:, [2, 0, 1], :])
        self.em1 = -e[:, [1, 2, 0], :]                 # eta - p_{t_{j+1}}
        self.em2 = -e[:, [2, 0, 1], :]                 # eta - p_{t_{j+2}}
        self.eps_theta = eps_theta
        self.eps_pi = eps_pi
        self._kernels = {}

    def kernel(self, kid):
        if kid not in self._kernels:
            self._kernels[kid] = eval_kernel(kid, self.theta, self.eps_theta,
                                             self.eps_pi)
        return self._kernels[kid]

    def kernel_deriv(self, kid):
        key = ("d", kid)
        if key not in self._kernels:
            self._kernels[key] = eval_kernel_derivative(
                kid, self.theta, self.eps_theta, self.eps_pi)
        return self._kernels[key]


def _ctx_from_batch(batch, idx):
    return _Ctx(batch.cage, idx, batch.e[idx], batch.tol.eps_theta,
                batch.tol.eps_pi)


def _ctx_at_points(cage, idx, etas, tol):
    pts = cage.vertices[cage.triangles[idx]]           # (s, 3, 3)
    e = pts - etas[:, None, :]
    return _Ctx(cage, idx, e, tol.eps_theta, tol.eps_pi)


# --------------------------------------------------------------------------
# general case
# --------------------------------------------------------------------------

def _general_B(ctx, w_tri):
    """The 3x3 matrix whose transpose maps N_i to detA * grad w_i."""
    k1 = ctx.kernel(KernelId.EQ1)
    k2 = ctx.kernel(KernelId.EQ2)
    N, JN, D = ctx.N, ctx.JN, ctx.D
    q = np.einsum("sjk,sjkb->sjb", N, JN)              # N_j^t JN_j, row vector
    B = np.einsum("sj,sja,sjb->sab", k1 / (2.0 * D ** 3), N, q)
    B -= np.einsum("sj,sja,sjb->sab", 1.0 / (2.0 * D ** 2), N, ctx.svec)
    B += np.einsum("sj,sjab->sab", k2 / (2.0 * D), JN)
    B += w_tri.sum(axis=1)[:, None, None] * np.eye(3)
    return B


def _general_gradients(ctx, w_tri):
    """grad w_{t_i} = B^t N_i / detA for each corner, (s, 3, 3)."""
    B = _general_B(ctx, w_tri)
    return np.einsum("sba,sib->sia", B, ctx.N) / ctx.detA[:, None, None]


def _hess_ctx(ctx):
    """Extra shared pieces for the Hessian terms."""
    N, JN = ctx.N, ctx.JN
    ctx.q = np.einsum("sjk,sjkb->sjb", N, JN)          # N_j^t JN_j
    ctx.NNJ = N[:, :, :, None] * ctx.q[:, :, None, :]  # N_j (N_j^t JN_j)
    ctx.JNtN = np.einsum("sjab,sja->sjb", JN, N)       # JN_j^t N_j
    ctx.JTJ = np.einsum("sjka,sjkb->sjab", JN, JN)     # JN_j^t JN_j
    return ctx


# The fourteen sums of d_c(Jm): each term maps ctx -> (s, 3, 3, 3) with
# axes [triangle, c, row, col].

def _t01_eq6_jntn_nnj(ctx):
    k6 = ctx.kernel(KernelId.EQ6)
    return np.einsum("sj,sjc,sjab->scab", k6 / (2 * ctx.D ** 5), ctx.JNtN, ctx.NNJ)


def _t02_eq7_s_nnj(ctx):
    k7 = ctx.kernel(KernelId.EQ7)
    return -np.einsum("sj,sjc,sjab->scab", k7 / (2 * ctx.D ** 4), ctx.svec, ctx.NNJ)


def _t03_eq1_dn_ntjn(ctx):
    k1 = ctx.kernel(KernelId.EQ1)
    return np.einsum("sj,sjac,sjb->scab", k1 / (2 * ctx.D ** 3), ctx.JN, ctx.q)


def _t04_eq1_n_dntjn(ctx):
    k1 = ctx.kernel(KernelId.EQ1)
    return np.einsum("sj,sja,sjcb->scab", k1 / (2 * ctx.D ** 3), ctx.N, ctx.JTJ)


def _t05_eq1_em1_nnj(ctx):
    k1 = ctx.kernel(KernelId.EQ1)
    f = 3.0 * k1 / (2 * ctx.d2 ** 3 * ctx.d1 ** 5)
    return -np.einsum("sj,sjc,sjab->scab", f, ctx.em1, ctx.NNJ)


def _t06_eq1_em2_nnj(ctx):
    k1 = ctx.kernel(KernelId.EQ1)
    f = 3.0 * k1 / (2 * ctx.d2 ** 5 * ctx.d1 ** 3)
    return -np.einsum("sj,sjc,sjab->scab", f, ctx.em2, ctx.NNJ)


def _t07_dn_st(ctx):
    return -np.einsum("sj,sjac,sjb->scab", 1.0 / (2 * ctx.D ** 2), ctx.JN, ctx.svec)


def _t08_em1_n_st(ctx):
    f = 1.0 / (ctx.d2 ** 2 * ctx.d1 ** 4)
    return np.einsum("sj,sjc,sja,sjb->scab", f, ctx.em1, ctx.N, ctx.svec)


def _t09_em2_n_st(ctx):
    f = 1.0 / (ctx.d2 ** 4 * ctx.d1 ** 2)
    return np.einsum("sj,sjc,sja,sjb->scab", f, ctx.em2, ctx.N, ctx.svec)


def _t10_eq8_jntn_jn(ctx):
    k8 = ctx.kernel(KernelId.EQ8)
    return np.einsum("sj,sjc,sjab->scab", k8 / (2 * ctx.D ** 3), ctx.JNtN, ctx.JN)


def _t11_eq9_s_jn(ctx):
    k9 = ctx.kernel(KernelId.EQ9)
    return -np.einsum("sj,sjc,sjab->scab", k9 / (2 * ctx.D ** 2), ctx.svec, ctx.JN)


def _t12_em1_eq2_jn(ctx):
    k2 = ctx.kernel(KernelId.EQ2)
    f = k2 / (2 * ctx.d2 * ctx.d1 ** 3)
    return -np.einsum("sj,sjc,sjab->scab", f, ctx.em1, ctx.JN)


def _t13_em2_eq2_jn(ctx):
    k2 = ctx.kernel(KernelId.EQ2)
    f = k2 / (2 * ctx.d2 ** 3 * ctx.d1)
    return -np.einsum("sj,sjc,sjab->scab", f, ctx.em2, ctx.JN)


def _t14_n_deltat(ctx):
    v = -np.einsum("sj,sja->sa", 1.0 / (ctx.d2 ** 2 * ctx.d1 ** 2), ctx.N)
    return np.einsum("sa,cb->scab", v, np.eye(3))


HESSIAN_TERMS = {
    "eq6_jntn_nnj": _t01_eq6_jntn_nnj,
    "eq7_s_nnj": _t02_eq7_s_nnj,
    "eq1_dn_ntjn": _t03_eq1_dn_ntjn,
    "eq1_n_dntjn": _t04_eq1_n_dntjn,
    "eq1_em1_nnj": _t05_eq1_em1_nnj,
    "eq1_em2_nnj": _t06_eq1_em2_nnj,
    "dn_st": _t07_dn_st,
    "em1_n_st": _t08_em1_n_st,
    "em2_n_st": _t09_em2_n_st,
    "eq8_jntn_jn": _t10_eq8_jntn_jn,
    "eq9_s_jn": _t11_eq9_s_jn,
    "em1_eq2_jn": _t12_em1_eq2_jn,
    "em2_eq2_jn": _t13_em2_eq2_jn,
    "n_deltat": _t14_n_deltat,
}


def _d_jm(ctx):
    """d_c(Jm) as the sum of the fourteen registered terms, (s, 3, 3, 3)."""
    _hess_ctx(ctx)
    out = None
    for fn in HESSIAN_TERMS.values():
        term = fn(ctx)
        out = term if out is None else out + term
    return out


def _general_hessians(ctx, grad_tri):
    """Hessians of the three corner weights, (s, 3, 3, 3)."""
    dJm = _d_jm(ctx)
    rows = np.einsum("sia,scab->sicb", ctx.N, dJm) / ctx.detA[:, None, None, None]
    S = grad_tri.sum(axis=1)                           # (s, 3)
    corr = (np.einsum("sia,sb->siab", ctx.N, S)
            + np.einsum("sa,sib->siab", S, ctx.N)) / ctx.detA[:, None, None, None]
    return rows + corr


# --------------------------------------------------------------------------
# coplanar special case
# --------------------------------------------------------------------------

def _planar_eval(ctx, want_dw=False):
    """Gradient scale factors g_i (and optionally the in-plane gradient u_i
    of the normal slope) for coplanar-outside configurations.

    grad w_i = g_i * n_T. The derivation replaces the printed kernel
    cos(theta) eq3(theta) of the third gradient sum by its correct value
    (1 + cos(theta)) eq3(theta) == -1 (see the FD tests that pin this).
    """
    k1 = ctx.kernel(KernelId.EQ1)
    k2 = ctx.kernel(KernelId.EQ2)
    EE = np.einsum("sia,sja->sij", ctx.E, ctx.E)       # edge Gram matrix
    NN = np.einsum("sia,sja->sij", ctx.N, ctx.N)
    E2 = np.einsum("sja,sja->sj", ctx.E, ctx.E)
    D = ctx.D
    S = np.einsum("sij,sj->si", EE, k2 / (2 * D))
    S += np.einsum("sij,sj->si", NN, k1 * E2 / (4 * D ** 3))
    S -= np.einsum("sij,sj->si", NN, 1.0 / (2 * D ** 2))
    g = -S / (2.0 * ctx.area[:, None])
    if not want_dw:
        return g, None

    k1p = ctx.kernel_deriv(KernelId.EQ1)
    k2p = ctx.kernel_deriv(KernelId.EQ2)
    sig = np.sign(np.einsum("sja,sa->sj", ctx.N, ctx.nT))
    nxE = np.cross(ctx.nT[:, None, :], ctx.E)
    # r_j = (eta - p_{j+1})/d1^2 + (eta - p_{j+2})/d2^2
    r = ctx.em1 / ctx.d1[:, :, None] ** 2 + ctx.em2 / ctx.d2[:, :, None] ** 2
    dtheta = ((sig * np.cos(ctx.theta))[:, :, None] * nxE
              - np.sin(ctx.theta)[:, :, None] * ctx.svec) / D[:, :, None]
    X = np.einsum("sika,sjk->sija", ctx.JN, ctx.N)
    X = X + X.transpose(0, 2, 1, 3)                    # JN_i^t N_j + JN_j^t N_i
    acc = np.einsum("sij,sja->sia",
                    EE, k2p[:, :, None] * dtheta / (2 * D[:, :, None]))
    acc -= np.einsum("sij,sj,sja->sia", EE, k2 / (2 * D), r)
    acc += np.einsum("sij,sja->sia",
                     NN, (k1p * E2)[:, :, None] * dtheta / (4 * D[:, :, None] ** 3))
    acc += np.einsum("sj,sija->sia", k1 * E2 / (4 * D ** 3), X)
    acc -= 3.0 * np.einsum("sij,sj,sja->sia", NN, k1 * E2 / (4 * D ** 3), r)
    acc -= np.einsum("sj,sija->sia", 1.0 / (2 * D ** 2), X)
    acc += np.einsum("sij,sj,sja->sia", NN, 1.0 / D ** 2, r)
    u = -acc / (2.0 * ctx.area[:, None, None])
    return g, u


def triangle_gradients(frame, cage, t, eta, weights=None):
    """Gradients of the three corner weights of a Generic triangle, (3, 3)."""
    if frame.classification != Classification.GENERIC:
        raise WrongClassification(
            f"triangle_gradients needs a Generic frame, got {frame.classification.name}")
    eta = np.asarray(eta, dtype=float).reshape(3)
    ctx = _ctx_at_points(cage, np.array([t]), eta[None, :], DEFAULT_TOLERANCES)
    if weights is None:
        w_tri = np.einsum("sjk,sk->sj", ctx.N,
                          0.5 * np.einsum("sj,sjk->sk", ctx.theta,
                                          _unit(ctx.N))) / ctx.detA[:, None]
    else:
        w_tri = np.asarray(weights.w, dtype=float)[None, :]
    return _general_gradients(ctx, w_tri)[0]


def triangle_gradients_planar(frame, cage, t, eta, tol=DEFAULT_TOLERANCES):
    """Coplanar-outside gradients; each is a scalar times the face normal."""
    if frame.classification != Classification.ON_SUPPORT_PLANE_OUTSIDE:
        raise WrongClassification(
            "triangle_gradients_planar needs an OnSupportPlaneOutsideT frame, "
            f"got {frame.classification.name}")
    if frame.area <= tol.eps_area * cage.bbox_diag ** 2:
        raise DegenerateTriangle(f"triangle {t} is degenerate")
    eta = np.asarray(eta, dtype=float).reshape(3)
    proj = eta - frame.plane_distance * frame.n_T
    ctx = _ctx_at_points(cage, np.array([t]), proj[None, :], tol)
    g, _ = _planar_eval(ctx)
    return g[0][:, None] * frame.n_T[None, :]


def triangle_hessians(frame, cage, t, eta, weights=None, grads=None):
    """Hessians of the three corner weights of a Generic triangle, (3, 3, 3)."""
    if frame.classification != Classification.GENERIC:
        raise WrongClassification(
            f"triangle_hessians needs a Generic frame, got {frame.classification.name}")
    eta = np.asarray(eta, dtype=float).reshape(3)
    ctx = _ctx_at_points(cage, np.array([t]), eta[None, :], DEFAULT_TOLERANCES)
    if grads is None:
        if weights is None:
            weights = triangle_weights(frame, cage, t, eta)
        grads = triangle_gradients(frame, cage, t, eta, weights)
    return _general_hessians(ctx, np.asarray(grads)[None, :, :])[0]


def triangle_hessians_planar(frame, cage, t, eta, tol=DEFAULT_TOLERANCES,
                             symmetrized=False):
    """Coplanar-outside Hessians.

    By default returns the one-sided form u_i n_T^t (the outer product of
    the in-plane gradient of the normal slope with the face normal). The
    weight is an odd function of the signed plane distance, so the true
    two-sided Hessian is the symmetrized completion u_i n_T^t + n_T u_i^t;
    pass ``symmetrized=True`` for that (it is what the smooth general
    formula converges to, and what the aggregation uses).
    """
    if frame.classification != Classification.ON_SUPPORT_PLANE_OUTSIDE:
        raise WrongClassification(
            "triangle_hessians_planar needs an OnSupportPlaneOutsideT frame, "
            f"got {frame.classification.name}")
    eta = np.asarray(eta, dtype=float).reshape(3)
    proj = eta - frame.plane_distance * frame.n_T
    ctx = _ctx_at_points(cage, np.array([t]), proj[None, :], tol)
    _, u = _planar_eval(ctx, want_dw=True)
    H = u[0][:, :, None] * frame.n_T[None, None, :]
    if symmetrized:
        H = H + H.transpose(0, 2, 1)
    return H


def _unit(N):
    nrm = np.linalg.norm(N, axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(nrm[:, :, None] > 0.0, N / nrm[:, :, None], 0.0)


# --------------------------------------------------------------------------
# aggregation
# --------------------------------------------------------------------------

def _per_triangle_derivatives(batch):
    """w, gradients and Hessians for every triangle at one query point.

    Triangles exactly in (or within eps_switch of) their support plane are
    evaluated with the planar formulas at the projected point; the
    Hessians there use the symmetrized completion, which is the limit of
    the general formula.
    """
    cage, tol = batch.cage, batch.tol
    m = cage.n_triangles
    cls = batch.classification
    near_seam = np.abs(batch.plane_dist) < tol.eps_switch * cage.mean_edge
    planar = (cls == Classification.ON_SUPPORT_PLANE_OUTSIDE) | (
        (cls == Classification.GENERIC) & near_seam)
    generic = np.nonzero(~planar)[0]
    planar = np.nonzero(planar)[0]

    w_tri = np.zeros((m, 3))
    grad_tri = np.zeros((m, 3, 3))
    hess_tri = np.zeros((m, 3, 3, 3))
    if len(generic):
        ctx = _ctx_from_batch(batch, generic)
        w_tri[generic] = _general_triangle_weights(batch, generic)
        grad_tri[generic] = _general_gradients(ctx, w_tri[generic])
        hess_tri[generic] = _general_hessians(ctx, grad_tri[generic])
    if len(planar):
        proj = (batch.eta[None, :]
                - batch.plane_dist[planar, None] * cage.tri_normals[planar])
        ctx = _ctx_at_points(cage, planar, proj, tol)
        g, u = _planar_eval(ctx, want_dw=True)
        nT = cage.tri_normals[planar]
        grad_tri[planar] = g[:, :, None] * nT[:, None, :]
        H = u[:, :, :, None] * nT[:, None, None, :]
        hess_tri[planar] = H + H.transpose(0, 1, 3, 2)
    return w_tri, grad_tri, hess_tri


def derivative_set(cage, eta, tol=DEFAULT_TOLERANCES):
    """Per-vertex gradients and Hessians of w_i and lam_i at ``eta``.

    Refuses points on the cage surface: the deformation is only
    continuous across cage edges, so the derivatives do not exist there.
    """
    batch = FrameBatch(cage, eta, tol)
    if batch.near_vertex >= 0 or _surface_triangle(batch) >= 0:
        raise OnSurface("derivatives are not defined on the cage surface")
    w_tri, grad_tri, hess_tri = _per_triangle_derivatives(batch)
    all_t = np.arange(cage.n_triangles)
    w = _accumulate(cage, all_t, w_tri)
    grad_w = _accumulate(cage, all_t, grad_tri)
    hess_w = _accumulate(cage, all_t, hess_tri).reshape(cage.n_vertices, 3, 3)

    lam = normalize_weights(w, tol.singular_ratio)
    sw = w.sum()
    gs = grad_w.sum(axis=0)
    Hs = hess_w.sum(axis=0)
    grad_lambda = grad_w / sw - np.outer(lam, gs) / sw
    cross = (np.einsum("ia,b->iab", grad_w, gs)
             + np.einsum("a,ib->iab", gs, grad_w))
    hess_lambda = (hess_w / sw
                   - lam[:, None, None] * Hs / sw
                   - cross / sw ** 2
                   + 2.0 * lam[:, None, None] * np.outer(gs, gs) / sw ** 2)
    return DerivativeSet(w=w, grad_w=grad_w, hess_w=hess_w,
                         grad_lambda=grad_lambda, hess_lambda=hess_lambda)
