"""Global minimisation of quadratics over the Euclidean unit sphere.

Metric spheres S_r(0) are dilations of the Euclidean unit sphere of
R^(2n+1), so questions like "is y within t of S_r(x)" reduce, after moving
the centre to the identity, to minimising the gauge

    F_t(xi) = |r a - z|^2 / t^2 + (r^2 b - tau - (r/2) Im<a, z>)^2 / t^4

over xi = (a, b) on the unit sphere, with F_t(xi) <= 1 iff the sphere point
(r a, r^2 b) lies within distance t of y = (z, tau).  F_t is a convex
quadratic ||M xi - v||^2, and its constrained minimum is a trust-region
subproblem solved exactly through the secular equation: diagonalise
P = M^T M, then the multiplier mu < lambda_min solves

    sum_i  qt_i^2 / (lambda_i - mu)^2 = 1,

monotone on that half-line, with the classical hard case (q orthogonal to
the bottom eigenspace) handled by padding along the bottom eigenvector.
Everything here is float numerics; exact integer screens live in the ball
module and only route the ambiguous band through these solvers.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import ContinuousPoint, Point, as_continuous, homogeneous_norm, multiply

_BISECT_STEPS = 96
_HARD_EPS = 1e-30


def _secular_batched(lam: np.ndarray, qt: np.ndarray, c: np.ndarray):
    """Minimise xi^T diag(lam) xi + 2 qt . xi + c over ||xi|| = 1, batched.

    lam: (N, d) ascending eigenvalues, qt: (N, d), c: (N,).
    Returns (values (N,), xi (N, d)) in the eigenbasis.
    """
    lam = np.asarray(lam, dtype=float)
    qt = np.asarray(qt, dtype=float)
    c = np.asarray(c, dtype=float)
    n, d = lam.shape
    lam1 = lam[:, 0]
    # shift: phi(s) = sum qt_i^2 / (gap_i + s)^2 with gap_i = lam_i - lam1 >= 0,
    # decreasing in s > 0; want phi(s) = 1, i.e. s = lam1 - mu.
    gap = lam - lam1[:, None]
    qn = np.linalg.norm(qt, axis=1)
    scale = np.maximum(np.max(gap, axis=1), qn)
    scale = np.maximum(scale, 1e-300)
    s_floor = 1e-18 * scale

    def phi(s):
        return np.sum(qt * qt / (gap + s[:, None]) ** 2, axis=1)

    hard = phi(s_floor) < 1.0
    lo = s_floor.copy()
    hi = np.maximum(qn, s_floor * 2)
    s = hi.copy()
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        high_phi = phi(mid) > 1.0
        lo = np.where(high_phi, mid, lo)
        hi = np.where(high_phi, hi, mid)
        s = hi
    xi = -qt / (gap + s[:, None])
    if np.any(hard):
        # q has no weight on the bottom eigenspace and the fixed part of xi is
        # short: pad along the bottom eigenvector to reach the sphere.
        gap_h = gap[hard]
        qt_h = qt[hard]
        safe = gap_h > np.maximum(_HARD_EPS, 1e-14 * scale[hard])[:, None]
        fixed = np.where(safe, -qt_h / np.where(safe, gap_h, 1.0), 0.0)
        pad = np.sqrt(np.maximum(0.0, 1.0 - np.sum(fixed * fixed, axis=1)))
        fixed[:, 0] += pad
        xi[hard] = fixed
        s[hard] = 0.0
    mu = lam1 - s
    values = mu + c + np.sum(qt * xi, axis=1)
    return values, xi


def min_quadratic_on_sphere_batched(
    P: np.ndarray, q: np.ndarray, c: np.ndarray, return_argmin: bool = False
):
    """Global min of xi^T P xi + 2 q . xi + c over ||xi||=1 for stacked inputs.

    P: (N, d, d) symmetric, q: (N, d), c: (N,).
    """
    lam, vecs = np.linalg.eigh(P)
    qt = np.einsum("nij,ni->nj", vecs, np.asarray(q, dtype=float))
    values, xi_t = _secular_batched(lam, qt, np.asarray(c, dtype=float))
    if not return_argmin:
        return values
    xi = np.einsum("nij,nj->ni", vecs, xi_t)
    return values, xi


def min_quadratic_on_sphere(P, q, c: float = 0.0, return_argmin: bool = False):
    """Scalar wrapper around the batched secular solver."""
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float)
    out = min_quadratic_on_sphere_batched(P[None], q[None], np.array([c]), return_argmin)
    if return_argmin:
        values, xi = out
        return float(values[0]), xi[0]
    return float(out[0])


def gauge_matrix(z_flat: np.ndarray, tau: float, r: float, t: float):
    """(M, v) with F_t(xi) = ||M xi - v||^2 for y = (z, tau) against S_r(0).

    z_flat is the horizontal part as a real vector (Re z_1..n, Im z_1..n).
    Row layout: 2n rows match the horizontal offset, the last row carries the
    central offset including the twist term (r/2) Im<a, z>, whose gradient in
    a is (z_im, -z_re).
    """
    z_flat = np.asarray(z_flat, dtype=float)
    if t <= 0:
        raise ValueError("tolerance t must be positive")
    two_n = z_flat.shape[0]
    n = two_n // 2
    d = two_n + 1
    M = np.zeros((d, d))
    v = np.zeros(d)
    M[:two_n, :two_n] = (r / t) * np.eye(two_n)
    v[:two_n] = z_flat / t
    M[two_n, two_n] = r * r / (t * t)
    M[two_n, :n] = -(r / (2 * t * t)) * z_flat[n:]
    M[two_n, n:two_n] = (r / (2 * t * t)) * z_flat[:n]
    v[two_n] = tau / (t * t)
    return M, v


def gauge_matrix_batched(z_flat: np.ndarray, tau: np.ndarray, r: float, t: float):
    """Stacked (M, v) for z_flat (N, 2n), tau (N,)."""
    z_flat = np.asarray(z_flat, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if t <= 0:
        raise ValueError("tolerance t must be positive")
    n_pts, two_n = z_flat.shape
    n = two_n // 2
    d = two_n + 1
    M = np.zeros((n_pts, d, d))
    idx = np.arange(two_n)
    M[:, idx, idx] = r / t
    M[:, two_n, two_n] = r * r / (t * t)
    M[:, two_n, :n] = -(r / (2 * t * t)) * z_flat[:, n:]
    M[:, two_n, n:two_n] = (r / (2 * t * t)) * z_flat[:, :n]
    v = np.concatenate([z_flat / t, (tau / (t * t))[:, None]], axis=1)
    return M, v


def _quad_from_gauge(M: np.ndarray, v: np.ndarray):
    if M.ndim == 2:
        P = M.T @ M
        q = -M.T @ v
        c = float(v @ v)
    else:
        P = np.einsum("nji,njk->nik", M, M)
        q = -np.einsum("nji,nj->ni", M, v)
        c = np.sum(v * v, axis=1)
    return P, q, c


def gauge_min(z_flat, tau: float, r: float, t: float, return_argmin: bool = False):
    """min_{||xi||=1} F_t(xi); <= 1 certifies dist((z,tau), S_r(0)) <= t."""
    M, v = gauge_matrix(z_flat, tau, r, t)
    P, q, c = _quad_from_gauge(M, v)
    return min_quadratic_on_sphere(P, q, c, return_argmin=return_argmin)


def gauge_min_batched(z_flat, tau, r: float, t: float):
    M, v = gauge_matrix_batched(z_flat, tau, r, t)
    P, q, c = _quad_from_gauge(M, v)
    return min_quadratic_on_sphere_batched(P, q, c)


def sphere_point(r: float, xi: np.ndarray) -> ContinuousPoint:
    """Map xi on the unit sphere of R^(2n+1) to delta_r of it on S_r(0)."""
    xi = np.asarray(xi, dtype=float)
    n = (xi.shape[0] - 1) // 2
    z = tuple(complex(r * xi[j], r * xi[n + j]) for j in range(n))
    return ContinuousPoint(z, r * r * float(xi[-1]))


def point_to_flat(p: Point):
    """(z_flat, tau) real coordinates of a group point."""
    cp = as_continuous(p)
    z_flat = np.array([w.real for w in cp.z] + [w.imag for w in cp.z], dtype=float)
    return z_flat, cp.tau


def sphere_distance(
    y: Point, r: float, *, rel_tol: float = 1e-12, return_witness: bool = False
):
    """dist(y, S_r(0)) by bisection on the certified membership predicate.

    The predicate t -> (min F_t <= 1) is monotone; the bracket is the exact
    sandwich |N(y) - r| <= dist <= sqrt(|N(y)^2 - r^2|), the upper end being
    the distance realised by the dilation witness delta_{r/N(y)}(y).
    """
    cp = as_continuous(y)
    lam = homogeneous_norm(cp)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0.0 or lam == 0.0:
        dist = abs(lam - r)
        if return_witness:
            w = ContinuousPoint((0j,) * cp.n, 0.0) if r == 0 else sphere_point(
                r, np.array([0.0] * (2 * cp.n) + [1.0]))
            return dist, w
        return dist
    z_flat, tau = point_to_flat(cp)
    lo = abs(lam - r)
    hi = math.sqrt(abs(lam * lam - r * r))
    if hi <= lo:
        hi = lo
    span = max(hi, 1.0)
    witness_xi: Optional[np.ndarray] = None
    while hi - lo > rel_tol * span:
        mid = 0.5 * (lo + hi)
        if mid <= 0.0:
            break
        val, xi = gauge_min(z_flat, tau, r, mid, return_argmin=True)
        if val <= 1.0:
            hi = mid
            witness_xi = xi
        else:
            lo = mid
    dist = hi
    if not return_witness:
        return dist
    if witness_xi is None:
        _, witness_xi = gauge_min(z_flat, tau, r, max(hi, rel_tol), return_argmin=True)
    return dist, sphere_point(r, witness_xi)


def project_to_sphere(y: Point, center: Point, r: float) -> tuple[float, ContinuousPoint]:
    """Nearest point of S_r(center) to y, via right translation to the origin."""
    cy = as_continuous(y)
    cc = as_continuous(center)
    reduced = ContinuousPoint(
        tuple(a - b for a, b in zip(cy.z, cc.z)),
        cy.tau - cc.tau - 0.5 * sum((w.conjugate() * u).imag for w, u in zip(cy.z, cc.z)),
    )
    # reduced = y * center^{-1}; right invariance moves the sphere to origin
    dist, w0 = sphere_distance(reduced, r, return_witness=True)
    w = multiply(w0, cc)
    return dist, w
