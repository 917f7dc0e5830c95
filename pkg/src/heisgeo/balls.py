"""Exact counting and enumeration of lattice balls B_k and their boundaries.

Counting is fiberwise: fix the horizontal coordinate y of a lattice point
and the remaining central values form an interval of integers in a single
parity class (m = <ya, yb> mod 2).  For a ball of radius u/v centred at the
origin the fiber over y with X = |y|^2 is

    { m : v^4 m^2 <= 4 u^2 (u^2 - v^2 X), m in the parity class },

so cardinalities, product sets B_k B_k, symmetric differences B triangle
sigma*B and thickened spheres all reduce to unions and intersections of
integer intervals, merged and counted per parity class.  No floating point
enters any count except through the certified minimizer used for the
ambiguous band of t-boundary membership.

The t-boundary d_t B_r(x) is the set of points within distance t of the
metric sphere S_r(x).  Membership is decided by a three-state protocol:
an exact integer quick-out (triangle inequality: |d(y,x) - r| > t), an
exact integer quick-in (the dilation witness gives dist <= sqrt|d^2 - r^2|),
and for the remaining thin shell the certified global minimum of the sphere
gauge from the spherequad module with a fixed 1e-9 acceptance band, so
counts are deterministic and reproducible.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    ContinuousPoint,
    LatticePoint,
    Point,
    Radius,
    as_continuous,
    dist_eq_exact,
    inverse,
    isometry_flip,
    lattice_identity,
    lattice_rotate_quarter,
    metric_d,
    multiply,
    radius_parts,
)
from .errors import ResourceCapError
from .spherequad import gauge_min, gauge_min_batched, point_to_flat

DEFAULT_CAP = 10 ** 8


# --- integer helpers --------------------------------------------------------

def _isqrt_vec(x: np.ndarray) -> np.ndarray:
    """Elementwise floor(sqrt(x)) for nonnegative int64, exactly."""
    r = np.floor(np.sqrt(x.astype(np.float64))).astype(np.int64)
    r = np.where((r + 1) * (r + 1) <= x, r + 1, r)
    r = np.where(r * r > x, r - 1, r)
    return r


def _count_parity(lo, hi, p):
    """#{ m in [lo, hi] : m = p (mod 2) }, elementwise; 0 when lo > hi."""
    return np.maximum((hi - p) // 2 - (lo - 1 - p) // 2, 0)


def _parity_hull(m_max, p):
    """Largest |m| <= m_max in parity class p, or -1 if the class is empty."""
    adj = m_max - ((m_max - p) % 2)
    return adj


def _fiber_halfwidth(u: int, v: int, x: np.ndarray) -> np.ndarray:
    """Largest |m| allowed over a fiber with X = x inside B_{u/v}(0).

    Clamped at 0 for X outside the horizontal disk so callers may evaluate
    on full grids and mask afterwards.
    """
    return _isqrt_vec(np.maximum(4 * u * u * (u * u - v * v * x), 0)) // (v * v)


def _grid_coords(bounds: Sequence[tuple[int, int]], cap: int) -> np.ndarray:
    """All integer tuples within the per-coordinate bounds, as an (N, d) array."""
    sizes = [hi - lo + 1 for lo, hi in bounds]
    total = math.prod(sizes)
    if total > cap:
        raise ResourceCapError(
            f"fiber grid of {total} cells exceeds cap {cap}", predicted=total, cap=cap
        )
    axes = np.indices(sizes).reshape(len(sizes), -1).T.astype(np.int64)
    offsets = np.array([lo for lo, _ in bounds], dtype=np.int64)
    return axes + offsets


def _merged_parity_count(lo: np.ndarray, hi: np.ndarray, parity: int) -> int:
    """Count integers of the given parity in the union of [lo_i, hi_i]."""
    if lo.size == 0:
        return 0
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    run = np.maximum.accumulate(hi)
    new_seg = np.empty(lo.shape, dtype=bool)
    new_seg[0] = True
    # touching intervals may be merged: they cover the same integers
    new_seg[1:] = lo[1:] > run[:-1] + 1
    starts = np.flatnonzero(new_seg)
    ends = np.r_[starts[1:] - 1, lo.size - 1]
    return int(np.sum(_count_parity(lo[starts], run[ends], parity)))


# --- ball tables ------------------------------------------------------------

@dataclass(frozen=True)
class BallSpec:
    """A metric ball with an optional boundary thickening t."""

    center: Point
    radius: Union[int, float, Fraction]
    thickening: Union[int, float, Fraction] = 0

    def __post_init__(self) -> None:
        if not float(self.radius) > 0:
            raise ValueError("radius must be positive")
        if float(self.thickening) < 0:
            raise ValueError("thickening must be nonnegative")


@dataclass(frozen=True)
class BallTable:
    """Enumerated lattice ball; coords rows are (a_1..a_n, b_1..b_n, m), lex-sorted."""

    n: int
    k: int
    center: LatticePoint
    coords: np.ndarray = field(repr=False)

    @property
    def cardinality(self) -> int:
        return self.coords.shape[0]

    def points(self, cap: int = 10 ** 6) -> list[LatticePoint]:
        if self.cardinality > cap:
            raise ResourceCapError(
                f"materializing {self.cardinality} points exceeds cap {cap}",
                predicted=self.cardinality, cap=cap,
            )
        n = self.n
        return [
            LatticePoint(tuple(row[:n]), tuple(row[n:2 * n]), int(row[2 * n]))
            for row in self.coords.tolist()
        ]

    def __contains__(self, p: LatticePoint) -> bool:
        if p.n != self.n:
            return False
        row = np.array(p.a + p.b + (p.m,), dtype=np.int64)
        return bool(np.any(np.all(self.coords == row, axis=1)))


def _lexsort_rows(coords: np.ndarray) -> np.ndarray:
    if coords.shape[0] == 0:
        return coords
    order = np.lexsort(tuple(coords[:, j] for j in range(coords.shape[1] - 1, -1, -1)))
    return coords[order]


def _pair_hist(u: int, v: int) -> np.ndarray:
    """h[s, p] = #{(a, b) in Z^2 : a^2 + b^2 = s <= (u/v)^2, ab = p (mod 2)}."""
    amax = u // v
    xs = np.arange(-amax, amax + 1, dtype=np.int64)
    a = xs[:, None]
    b = xs[None, :]
    s = a * a + b * b
    mask = v * v * s <= u * u
    s_flat = s[mask]
    p_flat = (a * b)[mask] % 2
    smax = (u * u) // (v * v)
    h = np.zeros((smax + 1, 2), dtype=np.int64)
    np.add.at(h, (s_flat, p_flat), 1)
    return h


def _horizontal_hist(n: int, u: int, v: int) -> np.ndarray:
    """H[S, p] over Z^{2n}: squared norm S and pairing parity sum(a_j b_j) mod 2.

    The (a_j, b_j) pairs are independent, so H is the n-fold convolution of
    the single-pair histogram, truncated at S <= (u/v)^2.
    """
    h = _pair_hist(u, v)
    smax = h.shape[0] - 1
    out = h
    for _ in range(n - 1):
        nxt = np.zeros_like(out)
        for p1 in (0, 1):
            for p2 in (0, 1):
                conv = np.convolve(out[:, p1], h[:, p2])[: smax + 1]
                nxt[:, (p1 + p2) % 2] += conv
        out = nxt
    return out


def ball_cardinality(n: int, r: Radius) -> int:
    """|B_r(0)| in H^n, exactly, without materializing points."""
    u, v = radius_parts(r)
    if u == 0:
        return 1
    H = _horizontal_hist(n, u, v)
    S = np.arange(H.shape[0], dtype=np.int64)
    M = _fiber_halfwidth(u, v, S)
    total = 0
    for p in (0, 1):
        total += int(np.sum(H[:, p] * _count_parity(-M, M, p)))
    return total


def enumerate_ball(
    n: int, k: int, center: Optional[LatticePoint] = None, cap: int = DEFAULT_CAP
) -> BallTable:
    """All lattice points within distance k of center, as a sorted table.

    B_k(c) = B_k(0) * c by right invariance, so enumeration always scans the
    centred candidate box |a_j|, |b_j| <= k and translates afterwards.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    card = ball_cardinality(n, k)
    if card > cap:
        raise ResourceCapError(
            f"ball of {card} points exceeds cap {cap}", predicted=card, cap=cap
        )
    rows = []
    for ab in itertools.product(range(-k, k + 1), repeat=2 * n):
        x = sum(c * c for c in ab)
        if x > k * k:
            continue
        m_max = math.isqrt(4 * k * k * (k * k - x))
        p = sum(ab[j] * ab[n + j] for j in range(n)) % 2
        hull = _parity_hull(m_max, p)
        if hull < 0:
            continue
        ms = np.arange(-hull, hull + 1, 2, dtype=np.int64)
        block = np.empty((ms.size, 2 * n + 1), dtype=np.int64)
        block[:, : 2 * n] = np.array(ab, dtype=np.int64)
        block[:, 2 * n] = ms
        rows.append(block)
    coords = np.concatenate(rows) if rows else np.empty((0, 2 * n + 1), dtype=np.int64)
    if coords.shape[0] != card:
        raise AssertionError(
            f"fiber enumeration ({coords.shape[0]}) disagrees with "
            f"histogram count ({card})"
        )
    if center is None:
        center = lattice_identity(n)
    if center != lattice_identity(n):
        ac = np.array(center.a, dtype=np.int64)
        bc = np.array(center.b, dtype=np.int64)
        # (a,b,m) * center: twist Im<z, z_c> = sum(a_j bc_j - b_j ac_j)
        twist = coords[:, :n] @ bc - coords[:, n:2 * n] @ ac
        coords = coords.copy()
        coords[:, :n] += ac
        coords[:, n:2 * n] += bc
        coords[:, 2 * n] += center.m + twist
    return BallTable(n=n, k=k, center=center, coords=_lexsort_rows(coords))


def product_set(
    A: Iterable[LatticePoint], B: Iterable[LatticePoint], cap: int = DEFAULT_CAP
) -> set[LatticePoint]:
    """{a * b : a in A, b in B}, deduplicated exactly."""
    A, B = list(A), list(B)
    if len(A) * len(B) > cap:
        raise ResourceCapError(
            f"{len(A)}*{len(B)} pairwise products exceed cap {cap}",
            predicted=len(A) * len(B), cap=cap,
        )
    return {multiply(a, b) for a in A for b in B}


def product_ball_cardinality(n: int, k: int, cap: int = DEFAULT_CAP) -> int:
    """|B_k * B_k| exactly, one fiber of the product set at a time.

    B_k B_k is the union of balls B_k(q) over centers q in B_k.  Over a fixed
    product fiber y, the centers with horizontal part w contribute central
    values filling the hull interval Im<z_y, z_w> +- (M*_w + W) where W is
    the fiber halfwidth of B_k(q) over y; for W >= 1 consecutive centers'
    intervals overlap, so the hull is fully covered, while W = 0 contributes
    a single parity class that must match the fiber's.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    # center fibers: horizontal part w, fiber hull M*_w, fiber parity p_w
    w = _grid_coords([(-k, k)] * (2 * n), cap)
    xw = np.sum(w * w, axis=1)
    keep = xw <= k * k
    w, xw = w[keep], xw[keep]
    mw = _isqrt_vec(4 * k * k * (k * k - xw))
    pw = np.sum(w[:, :n] * w[:, n:], axis=1) % 2
    hull = _parity_hull(mw, pw)
    keep = hull >= 0
    w, hull, pw = w[keep], hull[keep], pw[keep]
    y_grid = _grid_coords([(-2 * k, 2 * k)] * (2 * n), cap)
    y_grid = y_grid[np.sum(y_grid * y_grid, axis=1) <= 4 * k * k]
    if y_grid.shape[0] * w.shape[0] > 50 * cap:
        raise ResourceCapError(
            f"{y_grid.shape[0]}x{w.shape[0]} fiber pairs exceed budget",
            predicted=y_grid.shape[0] * w.shape[0], cap=50 * cap,
        )
    total = 0
    wa, wb = w[:, :n], w[:, n:]
    for y in y_grid:
        ya, yb = y[:n], y[n:]
        diff = w - y
        s2 = np.sum(diff * diff, axis=1)
        near = s2 <= k * k
        if not near.any():
            continue
        W = _isqrt_vec(4 * k * k * (k * k - s2[near]))
        im = wb[near] @ ya - wa[near] @ yb  # Im<z_y, z_w>
        parity_y = int(ya @ yb) % 2
        full = W >= 1
        lo = im - hull[near] - W
        hi = im + hull[near] + W
        if not full.all():
            ok0 = (im[~full] + pw[near][~full]) % 2 == parity_y
            keep_rows = full.copy()
            keep_rows[~full] = ok0
            lo, hi = lo[keep_rows], hi[keep_rows]
        total += _merged_parity_count(lo, hi, parity_y)
    return total


@dataclass(frozen=True)
class DoublingRow:
    k: int
    card: int
    card_sq: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.card_sq, self.card)


def doubling_table(n: int, k_max: int, cap: int = DEFAULT_CAP) -> list[DoublingRow]:
    """Rows (k, |B_k|, |B_k B_k|, ratio) for k = 1..k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    rows = []
    for k in range(1, k_max + 1):
        rows.append(DoublingRow(k, ball_cardinality(n, k), product_ball_cardinality(n, k, cap)))
    return rows


# --- symmetric differences and Folner ratios --------------------------------

def _sigma_shift_fiber(n: int, sigma: LatticePoint, grid: np.ndarray) -> np.ndarray:
    """Central offset c(y) with sigma^{-1} g in B iff |m_g - c| <= halfwidth."""
    sa = np.array(sigma.a, dtype=np.int64)
    sb = np.array(sigma.b, dtype=np.int64)
    # c = m_sigma + Im<z_sigma, z_y> = m_sigma + sum(sa_j yb_j - sb_j ya_j)
    return sigma.m + grid[:, n:] @ sa - grid[:, :n] @ sb


def symmetric_difference_cardinality(
    n: int, k: int, sigma: LatticePoint, cap: int = DEFAULT_CAP
) -> tuple[int, int]:
    """(|B_k triangle sigma B_k|, |B_k|), both exact."""
    u, v = radius_parts(k)
    grid = _grid_coords([(-k, k)] * (2 * n), cap)
    x = np.sum(grid * grid, axis=1)
    inside = x <= k * k
    grid, x = grid[inside], x[inside]
    m_half = _fiber_halfwidth(u, v, x)
    parity = np.sum(grid[:, :n] * grid[:, n:], axis=1) % 2
    card = int(np.sum(_count_parity(-m_half, m_half, parity)))
    c = _sigma_shift_fiber(n, sigma, grid)
    diff = grid - np.array(sigma.a + sigma.b, dtype=np.int64)
    x_shift = np.sum(diff * diff, axis=1)
    in_shift = x_shift <= k * k
    m_half_shift = np.zeros_like(m_half)
    m_half_shift[in_shift] = _fiber_halfwidth(u, v, x_shift[in_shift])
    lo = np.maximum(-m_half, c - m_half_shift)
    hi = np.minimum(m_half, c + m_half_shift)
    inter_counts = np.where(in_shift, _count_parity(lo, hi, parity), 0)
    inter = int(np.sum(inter_counts))
    return 2 * (card - inter), card


def folner_ratio(n: int, k: int, sigma: LatticePoint, cap: int = DEFAULT_CAP) -> Fraction:
    """|B_k triangle sigma B_k| / |B_k| as an exact rational."""
    sym, card = symmetric_difference_cardinality(n, k, sigma, cap)
    return Fraction(sym, card)


def symmetric_difference_coords(
    n: int, k: int, sigma: LatticePoint, cap: int = DEFAULT_CAP
) -> np.ndarray:
    """All points of B_k(0) triangle sigma B_k(0) as coordinate rows."""
    span_a = [(min(-k, s - k), max(k, s + k)) for s in sigma.a]
    span_b = [(min(-k, s - k), max(k, s + k)) for s in sigma.b]
    grid = _grid_coords(span_a + span_b, cap)
    u, v = radius_parts(k)
    x = np.sum(grid * grid, axis=1)
    in_ball = x <= k * k
    m_half = np.where(in_ball, _fiber_halfwidth(u, v, np.maximum(x, 0)), -1)
    diff = grid - np.array(sigma.a + sigma.b, dtype=np.int64)
    x_shift = np.sum(diff * diff, axis=1)
    in_shift = x_shift <= k * k
    m_shift = np.where(in_shift, _fiber_halfwidth(u, v, np.maximum(x_shift, 0)), -1)
    c = _sigma_shift_fiber(n, sigma, grid)
    parity = np.sum(grid[:, :n] * grid[:, n:], axis=1) % 2
    rows = []
    for i in range(grid.shape[0]):
        p = int(parity[i])
        segs = []
        if in_ball[i] and in_shift[i]:
            a_lo, a_hi = -int(m_half[i]), int(m_half[i])
            b_lo, b_hi = int(c[i] - m_shift[i]), int(c[i] + m_shift[i])
            i_lo, i_hi = max(a_lo, b_lo), min(a_hi, b_hi)
            if i_lo > i_hi:
                segs = [(a_lo, a_hi), (b_lo, b_hi)]
            else:
                segs = [(a_lo, i_lo - 1), (i_hi + 1, a_hi),
                        (b_lo, i_lo - 1), (i_hi + 1, b_hi)]
        elif in_ball[i]:
            segs = [(-int(m_half[i]), int(m_half[i]))]
        elif in_shift[i]:
            segs = [(int(c[i] - m_shift[i]), int(c[i] + m_shift[i]))]
        for lo, hi in segs:
            lo += (p - lo) % 2
            if lo > hi:
                continue
            ms = np.arange(lo, hi + 1, 2, dtype=np.int64)
            block = np.empty((ms.size, 2 * n + 1), dtype=np.int64)
            block[:, : 2 * n] = grid[i]
            block[:, 2 * n] = ms
            rows.append(block)
    out = np.concatenate(rows) if rows else np.empty((0, 2 * n + 1), dtype=np.int64)
    return _lexsort_rows(out)


# --- thickened boundaries ---------------------------------------------------

@dataclass(frozen=True)
class BoundaryResult:
    """Outcome of the three-state boundary test; truthiness is membership."""

    inside: bool
    route: str  # exact-out | exact-in | minimizer-in | minimizer-out

    def __bool__(self) -> bool:
        return self.inside


def _lam_sq_cmp(x: int, m: int, rho: Fraction) -> int:
    """sign(d(y,0)^2 - rho) for a lattice offset with X = x, doubled tau = m."""
    # d^2 = (X + sqrt(X^2 + m^2)) / 2, so compare sqrt(X^2+m^2) with 2 rho - X
    rhs = 2 * rho - x
    lhs_sq = x * x + m * m
    if rhs < 0:
        return 1
    diff = lhs_sq - rhs * rhs
    return (diff > 0) - (diff < 0)


def boundary_contains(y: Point, spec: BallSpec) -> BoundaryResult:
    """Is y within spec.thickening of the sphere of radius spec.radius?

    Exact integer screens settle almost every query; only points whose
    distance to the sphere is sandwiched between the triangle lower bound
    and the dilation-witness upper bound go to the certified minimizer.
    """
    r, t = spec.radius, spec.thickening
    exact = (
        isinstance(y, LatticePoint)
        and isinstance(spec.center, LatticePoint)
        and not isinstance(r, float)
        and not isinstance(t, float)
    )
    if exact:
        reduced = multiply(y, inverse(spec.center))
        x = sum(a * a + b * b for a, b in zip(reduced.a, reduced.b))
        m = reduced.m
        rf, tf = Fraction(r), Fraction(t)
        # quick-out: |lam - r| > t, i.e. lam^2 outside [(r-t)^2, (r+t)^2]
        if _lam_sq_cmp(x, m, (rf + tf) ** 2) > 0:
            return BoundaryResult(False, "exact-out")
        if rf > tf and _lam_sq_cmp(x, m, (rf - tf) ** 2) < 0:
            return BoundaryResult(False, "exact-out")
        # horizontal offsets realize the triangle bound, dist = |lam - r|,
        # so surviving the quick-out screens already certifies membership
        if m == 0:
            return BoundaryResult(True, "exact-in")
        # quick-in: dilation witness sqrt|lam^2 - r^2| <= t
        if (_lam_sq_cmp(x, m, rf * rf - tf * tf) >= 0
                and _lam_sq_cmp(x, m, rf * rf + tf * tf) <= 0):
            return BoundaryResult(True, "exact-in")
        z_flat, tau = point_to_flat(reduced)
        val = gauge_min(z_flat, tau, float(rf), float(tf))
        return BoundaryResult(bool(val <= 1.0 + 1e-9), "minimizer-in" if val <= 1.0 + 1e-9 else "minimizer-out")
    cy = as_continuous(y)
    cc = as_continuous(spec.center)
    reduced = multiply(cy, inverse(cc))
    lam = metric_d(reduced, ContinuousPoint((0j,) * cy.n, 0.0))
    rf, tf = float(r), float(t)
    if abs(lam - rf) > tf:
        return BoundaryResult(False, "exact-out")
    if reduced.tau == 0.0:
        return BoundaryResult(True, "exact-in")
    if math.sqrt(abs(lam * lam - rf * rf)) <= tf:
        return BoundaryResult(True, "exact-in")
    z_flat, tau = point_to_flat(reduced)
    val = gauge_min(z_flat, tau, rf, tf)
    inside = bool(val <= 1.0 + 1e-9)
    return BoundaryResult(inside, "minimizer-in" if inside else "minimizer-out")


def _annulus_coords(n: int, k: int, t: Radius, cap: int) -> np.ndarray:
    """Lattice points with k - t <= d(y, 0) <= k + t, the boundary superset."""
    u, v = radius_parts(t)
    U2 = (k * v + u) ** 2  # rho_outer = U2 / V
    V = v * v
    U1 = (k * v - u) ** 2 if k * v > u else 0
    amax = (k * v + u) // v
    grid = _grid_coords([(-amax, amax)] * (2 * n), cap)
    x = np.sum(grid * grid, axis=1)
    keep = V * x <= U2
    grid, x = grid[keep], x[keep]
    if int(grid.shape[0]) and 4 * U2 * U2 > 2 ** 62:
        raise ResourceCapError("annulus bounds overflow int64; reduce k or t")
    m_outer = _isqrt_vec(4 * U2 * (U2 - V * x)) // V
    inner_gap = U1 - V * x
    t_inner = np.where(inner_gap > 0, 4 * U1 * np.maximum(inner_gap, 0), 0)
    c = _isqrt_vec(t_inner)
    ceil_sqrt = np.where(c * c < t_inner, c + 1, c)
    m_inner = (ceil_sqrt + V - 1) // V  # smallest |m| with lam >= k - t
    parity = np.sum(grid[:, :n] * grid[:, n:], axis=1) % 2
    est = int(np.sum(np.maximum(m_outer - m_inner + 1, 0))) + int(grid.shape[0])
    if est > cap:
        raise ResourceCapError(
            f"annulus of ~{est} points exceeds cap {cap}", predicted=est, cap=cap
        )
    rows = []
    for i in range(grid.shape[0]):
        p = int(parity[i])
        hi = _parity_hull(int(m_outer[i]), p)
        if hi < 0:
            continue
        lo_mag = int(m_inner[i])
        lo_mag += (p - lo_mag) % 2
        if lo_mag > hi:
            continue
        mags = np.arange(lo_mag, hi + 1, 2, dtype=np.int64)
        ms = np.unique(np.concatenate([mags, -mags]))
        block = np.empty((ms.size, 2 * n + 1), dtype=np.int64)
        block[:, : 2 * n] = grid[i]
        block[:, 2 * n] = ms
        rows.append(block)
    return np.concatenate(rows) if rows else np.empty((0, 2 * n + 1), dtype=np.int64)


def _within_sphere_band(
    coords: np.ndarray, n: int, k: int, t: Radius, chunk: int = 200_000
) -> np.ndarray:
    """Vectorized three-state test: within t of S_k(0), per coordinate row.

    Quick screens run in int64; only the ambiguous band hits the batched
    certified minimizer, in chunks.
    """
    u, v = radius_parts(t)
    V = v * v
    x_worst = int(np.max(np.abs(coords), initial=0)) ** 2 * 2 * n
    m_worst = int(np.max(np.abs(coords[:, 2 * n]), initial=0)) if coords.size else 0
    worst = x_worst * x_worst + m_worst * m_worst
    if worst * V * V > 2 ** 62 or (2 * (k * k * V + u * u)) ** 2 > 2 ** 62:
        raise ResourceCapError("sphere band bounds overflow int64; reduce k or t")
    x = np.sum(coords[:, : 2 * n] * coords[:, : 2 * n], axis=1)
    m = coords[:, 2 * n]
    norm_sq = x * x + m * m
    # quick-out: lam^2 outside [(k-t)^2, (k+t)^2]
    U2 = (k * v + u) ** 2
    out_hi = (2 * U2 - V * x < 0) | (V * V * norm_sq > (2 * U2 - V * x) ** 2)
    if k * v > u:
        U1 = (k * v - u) ** 2
        out_lo = (2 * U1 - V * x > 0) & (V * V * norm_sq < (2 * U1 - V * x) ** 2)
    else:
        out_lo = np.zeros(coords.shape[0], dtype=bool)
    result = np.zeros(coords.shape[0], dtype=bool)
    alive = ~(out_hi | out_lo)
    # horizontal rows realize the triangle bound, so alive means member
    horizontal = m == 0
    result[alive & horizontal] = True
    # quick-in: (k^2 - t^2) <= lam^2 <= (k^2 + t^2), the dilation witness band
    A = 2 * (k * k * V - u * u) - V * x
    B = 2 * (k * k * V + u * u) - V * x
    quick_in = ((A <= 0) | (A * A <= V * V * norm_sq)) & (B >= 0) & (V * V * norm_sq <= B * B)
    result[alive & quick_in] = True
    ambiguous = np.flatnonzero(alive & ~quick_in & ~horizontal)
    if ambiguous.size and u == 0:
        raise AssertionError("t = 0 must be settled exactly by the screens")
    for start in range(0, ambiguous.size, chunk):
        idx = ambiguous[start: start + chunk]
        z_flat = coords[idx, : 2 * n].astype(float)
        tau = coords[idx, 2 * n].astype(float) / 2.0
        vals = gauge_min_batched(z_flat, tau, float(k), u / v)
        result[idx] = vals <= 1.0 + 1e-9
    return result


def t_boundary_coords(
    n: int, k: int, t: Radius, cap: int = DEFAULT_CAP, chunk: int = 200_000
) -> np.ndarray:
    """Coordinate rows of all lattice points within t of the sphere S_k(0)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    coords = _annulus_coords(n, k, t, cap)
    if coords.shape[0] == 0:
        return coords
    member = _within_sphere_band(coords, n, k, t, chunk)
    return _lexsort_rows(coords[member])


def t_boundary_count(
    n: int, k: int, t: Radius, cap: int = DEFAULT_CAP, chunk: int = 200_000
) -> int:
    """# lattice points within t of the sphere S_k(0), certified per point."""
    return int(t_boundary_coords(n, k, t, cap, chunk).shape[0])


def sphere_cardinality(n: int, k: int) -> int:
    """# lattice points with d(p, 0) = k exactly (the t = 0 boundary)."""
    return t_boundary_count(n, k, 0)


# --- symmetry checks --------------------------------------------------------

def table_closed_under_symmetries(table: BallTable) -> bool:
    """Flip and quarter-turn closure of an origin-centred table."""
    if table.center != lattice_identity(table.n):
        raise ValueError("symmetry closure applies to origin-centred tables")
    n = table.n
    ref = table.coords
    flip = ref.copy()
    flip[:, n:2 * n] *= -1
    flip[:, 2 * n] *= -1
    if not np.array_equal(_lexsort_rows(flip), ref):
        return False
    for j in range(n):
        rot = ref.copy()
        rot[:, j], rot[:, n + j] = -ref[:, n + j], ref[:, j]
        if not np.array_equal(_lexsort_rows(rot), ref):
            return False
    return True


# --- tabular output ---------------------------------------------------------

def doubling_csv(rows: Sequence[DoublingRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "card", "card_sq", "ratio"])
    for row in sorted(rows, key=lambda r: r.k):
        writer.writerow([row.k, row.card, row.card_sq, repr(float(row.ratio))])
    return buf.getvalue()


def doubling_json(rows: Sequence[DoublingRow]) -> str:
    payload = [
        {"k": r.k, "card": r.card, "card_sq": r.card_sq, "ratio": float(r.ratio)}
        for r in sorted(rows, key=lambda r: r.k)
    ]
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class FolnerRow:
    k: int
    sym_diff: int
    card: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.sym_diff, self.card)


def folner_csv(rows: Sequence[FolnerRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "sym_diff", "card", "ratio"])
    for row in sorted(rows, key=lambda r: r.k):
        writer.writerow([row.k, row.sym_diff, row.card, repr(float(row.ratio))])
    return buf.getvalue()


def folner_json(rows: Sequence[FolnerRow]) -> str:
    payload = [
        {"k": r.k, "sym_diff": r.sym_diff, "card": r.card, "ratio": float(r.ratio)}
        for r in sorted(rows, key=lambda r: r.k)
    ]
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
