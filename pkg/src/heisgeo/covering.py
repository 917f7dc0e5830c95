"""Carpets, stacks, and selection machinery over balls and thickened spheres.

The pieces fit together in two staged recursions: a single-scale one that
extracts a well-separated sphere family capturing more than half of a
discrete measure, and a multi-scale one that chains such families across
kappa rounds until it either certifies a mass bound or emits a candidate
chain for the intersection-dimension test.  All hypothesis checks run in
exact rational arithmetic whenever the inputs are lattice points with
rational radii; only sphere-to-sphere distances fall back to a certified
numeric minimization.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np

from .balls import BallSpec, boundary_contains
from .core import (
    ContinuousPoint,
    LatticePoint,
    Point,
    as_continuous,
    dist_eq_exact,
    dist_le_exact,
    metric_d,
    multiply,
    point_to_json,
)
from .errors import HypothesisViolation
from .spherequad import project_to_sphere, sphere_point

Num = Union[int, float, Fraction]

_SPHERE_SEP_TOL = 1e-6


# --- point and number plumbing -----------------------------------------------

def point_key(p: Point):
    """Total order on points used for deterministic tie-breaking."""
    if isinstance(p, LatticePoint):
        return (0, p.a, p.b, p.m)
    return (
        1,
        tuple(z.real for z in p.z),
        tuple(z.imag for z in p.z),
        p.tau,
    )


def _exact_pair(p: Point, q: Point, w: Num) -> bool:
    return (
        isinstance(p, LatticePoint)
        and isinstance(q, LatticePoint)
        and not isinstance(w, float)
    )


def _dist_le(p: Point, q: Point, w: Num) -> bool:
    """d(p, q) <= w; exact on rational lattice data, float otherwise."""
    if w < 0:
        return False
    if _exact_pair(p, q, w):
        if w == 0:
            return p == q
        return dist_le_exact(p, q, Fraction(w))
    return metric_d(p, q) <= float(w)


def _dist_lt(p: Point, q: Point, w: Num) -> bool:
    if w <= 0:
        return False
    if _exact_pair(p, q, w):
        return dist_le_exact(p, q, Fraction(w)) and not dist_eq_exact(p, q, Fraction(w))
    return metric_d(p, q) < float(w)


def _num_doc(x: Num):
    """JSON-stable scalar: ints stay ints, rationals become 'p/q' strings."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a radius")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return str(x)
    return float(x)


def _point_doc(p: Point) -> dict:
    return json.loads(point_to_json(p))


def _ball_doc(b: BallSpec) -> dict:
    doc = {"center": _point_doc(b.center), "radius": _num_doc(b.radius)}
    if b.thickening:
        doc["thickening"] = _num_doc(b.thickening)
    return doc


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --- domain types -------------------------------------------------------------

@dataclass(frozen=True)
class Carpet:
    """One ball per point of a finite base set, centred at that point."""

    balls: tuple[BallSpec, ...]

    def __post_init__(self) -> None:
        if not self.balls:
            raise ValueError("carpet must cover a nonempty base")
        seen = set()
        for b in self.balls:
            k = point_key(b.center)
            if k in seen:
                raise ValueError("carpet has two balls at one center")
            seen.add(k)

    @property
    def base(self) -> tuple[Point, ...]:
        return tuple(b.center for b in self.balls)

    @property
    def rmin(self) -> Num:
        return min(b.radius for b in self.balls)

    @property
    def rmax(self) -> Num:
        return max(b.radius for b in self.balls)

    def restrict(self, points: Iterable[Point]) -> "Carpet":
        keys = {point_key(p) for p in points}
        kept = tuple(b for b in self.balls if point_key(b.center) in keys)
        return Carpet(kept)


@dataclass(frozen=True)
class Stack:
    """Ordered carpets U_1..U_p over one shared base."""

    carpets: tuple[Carpet, ...]

    def __post_init__(self) -> None:
        if not self.carpets:
            raise ValueError("stack must have positive height")
        base = {point_key(p) for p in self.carpets[0].base}
        for c in self.carpets[1:]:
            if {point_key(p) for p in c.base} != base:
                raise ValueError("stack carpets must share one base")

    @property
    def height(self) -> int:
        return len(self.carpets)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported measure with exact nonnegative rational weights."""

    weights: Mapping[Point, Fraction]

    def __post_init__(self) -> None:
        cleaned = {}
        for p, v in self.weights.items():
            fv = Fraction(v)
            if fv < 0:
                raise ValueError("weights must be nonnegative")
            if fv:
                cleaned[p] = fv
        object.__setattr__(self, "weights", cleaned)

    @property
    def total(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    @property
    def support(self) -> tuple[Point, ...]:
        return tuple(sorted(self.weights, key=point_key))

    def mass(self, points: Iterable[Point]) -> Fraction:
        return sum((self.weights.get(p, Fraction(0)) for p in points), Fraction(0))


@dataclass(frozen=True)
class HeightParams:
    """chi, kappa, eps, delta, R driving the staged selection recursions."""

    chi: int
    kappa: int
    eps: Fraction
    delta: Fraction
    R: float = 2.0

    def __post_init__(self) -> None:
        if not isinstance(self.chi, int) or self.chi < 1:
            raise ValueError("chi must be a positive integer")
        if not isinstance(self.kappa, int) or self.kappa < 0:
            raise ValueError("kappa must be a nonnegative integer")
        eps, delta = Fraction(self.eps), Fraction(self.delta)
        if not 0 < eps < 1 or not 0 < delta < 1:
            raise ValueError("eps and delta must lie in (0, 1)")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "delta", delta)
        if not self.R > 1:
            raise ValueError("R must exceed 1")


# --- separation predicates -----------------------------------------------------

def _gap_at_least(b1: BallSpec, b2: BallSpec, w: Num) -> bool:
    """max(0, d(centers) - r1 - r2) >= w, exact where possible."""
    if w <= 0:
        return True
    thresh = w + b1.radius + b2.radius
    return not _dist_lt(b1.center, b2.center, thresh)


def _gap_at_most(b1: BallSpec, b2: BallSpec, w: Num) -> bool:
    if w < 0:
        return False
    return _dist_le(b1.center, b2.center, w + b1.radius + b2.radius)


def is_well_separated(balls: Sequence[BallSpec]) -> bool:
    """Pairwise ball gaps all reach the smallest radius in the family.

    The gap is the conservative lower bound d(centers) - r1 - r2, so a
    True answer never admits a violating family.
    """
    if not balls:
        raise ValueError("empty ball collection")
    rmin = min(b.radius for b in balls)
    return all(
        _gap_at_least(balls[i], balls[j], rmin)
        for i in range(len(balls))
        for j in range(i + 1, len(balls))
    )


def _sphere_gap_certified(b1: BallSpec, b2: BallSpec, w: Num) -> bool:
    """Triangle-inequality lower bounds alone prove sphere distance >= w."""
    r1, r2 = b1.radius, b2.radius
    if not _dist_lt(b1.center, b2.center, w + r1 + r2):
        return True
    # one sphere deep inside the other: d(x, y) >= r_big - D - r_small
    if r1 - r2 - w >= 0 and _dist_le(b1.center, b2.center, r1 - r2 - w):
        return True
    if r2 - r1 - w >= 0 and _dist_le(b1.center, b2.center, r2 - r1 - w):
        return True
    return False


def sphere_pair_distance(b1: BallSpec, b2: BallSpec, rounds: int = 80) -> float:
    """Alternating-projection estimate of dist(S(c1,r1), S(c2,r2)).

    Each iterate projects the current witness onto the opposite sphere, so
    the value decreases monotonically; the result is an upper bound on the
    true distance realized by an explicit witness pair.
    """
    c1, c2 = b1.center, b2.center
    r1, r2 = float(b1.radius), float(b2.radius)
    if as_continuous(c1) == as_continuous(c2):
        return abs(r1 - r2)
    n = as_continuous(c1).n
    rng = np.random.default_rng(7)
    _, nearest = project_to_sphere(as_continuous(c1), c2, r2)
    starts = [nearest]
    for _ in range(3):
        xi = rng.normal(size=2 * n + 1)
        xi /= np.linalg.norm(xi)
        starts.append(multiply(sphere_point(r2, xi), as_continuous(c2)))
    best = math.inf
    for y in starts:
        prev = math.inf
        for _ in range(rounds):
            _, x = project_to_sphere(y, c1, r1)
            dy, y = project_to_sphere(x, c2, r2)
            best = min(best, metric_d(x, y))
            if abs(prev - dy) < 1e-12:
                break
            prev = dy
    return best


def is_sphere_separated(balls: Sequence[BallSpec], tol: float = _SPHERE_SEP_TOL) -> bool:
    """Pairwise sphere-to-sphere distances all reach the smallest radius."""
    if not balls:
        raise ValueError("empty ball collection")
    rmin = min(b.radius for b in balls)
    for i in range(len(balls)):
        for j in range(i + 1, len(balls)):
            bi, bj = balls[i], balls[j]
            if bi.center == bj.center:
                if abs(Fraction(bi.radius) - Fraction(bj.radius)) < Fraction(rmin):
                    return False
                continue
            if _sphere_gap_certified(bi, bj, rmin):
                continue
            if sphere_pair_distance(bi, bj) < float(rmin) - tol:
                return False
    return True


# --- Besicovitch selection and colouring ---------------------------------------

def besicovitch_select(carpet: Carpet) -> list[BallSpec]:
    """Greedy largest-first subcover with pairwise-uncovered centers.

    Ties on the radius break on the center key, so the output is a
    deterministic incremental sequence covering the base.
    """
    order = sorted(carpet.balls, key=lambda b: point_key(b.center))
    order.sort(key=lambda b: b.radius, reverse=True)
    chosen: list[BallSpec] = []
    for ball in order:
        if not any(_dist_le(ball.center, s.center, s.radius) for s in chosen):
            chosen.append(ball)
    return chosen


def is_incremental(seq: Sequence[BallSpec]) -> bool:
    """Radii nonincreasing and no center inside an earlier ball."""
    for i, b in enumerate(seq):
        if i and seq[i - 1].radius < b.radius:
            return False
        if any(_dist_le(b.center, e.center, e.radius) for e in seq[:i]):
            return False
    return True


def selection_multiplicity(balls: Sequence[BallSpec], points: Iterable[Point]) -> int:
    """max over the sample of how many balls contain each point."""
    best = 0
    for y in points:
        best = max(best, sum(1 for b in balls if _dist_le(y, b.center, b.radius)))
    return best


class ColourPartition(NamedTuple):
    classes: list[list[BallSpec]]
    chi_requested: int
    chi_used: int

    @property
    def overflowed(self) -> bool:
        return self.chi_used > self.chi_requested


def colour_partition(seq: Sequence[BallSpec], chi: int) -> ColourPartition:
    """Greedy colouring over the predecessor-radius window.

    Ball i must differ from every earlier ball within gap r(i-1); since the
    radii are nonincreasing, same-coloured pairs end up with gaps strictly
    above the later radius, which makes every class well-separated.  When
    chi colours do not suffice the palette grows and the overflow is
    reported rather than raised.
    """
    if chi < 1:
        raise ValueError("chi must be a positive integer")
    if not is_incremental(seq):
        raise ValueError("colour_partition needs an incremental sequence")
    colours: list[int] = []
    for i, ball in enumerate(seq):
        if i == 0:
            colours.append(0)
            continue
        window = seq[i - 1].radius
        clash = {colours[j] for j in range(i) if _gap_at_most(seq[j], ball, window)}
        c = 0
        while c in clash:
            c += 1
        colours.append(c)
    used = (max(colours) + 1) if colours else 0
    classes = [
        [seq[j] for j in range(len(seq)) if colours[j] == c] for c in range(used)
    ]
    return ColourPartition(classes, chi, used)


# --- greedy nets ----------------------------------------------------------------

def _metric_d_rows(rows: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
    """d(row, q) for flat coordinate rows (Re z | Im z | tau)."""
    dz = rows[:, : 2 * n] - q[: 2 * n]
    x = np.einsum("ij,ij->i", dz, dz)
    twist = rows[:, :n] @ q[n : 2 * n] - rows[:, n : 2 * n] @ q[:n]
    two_delta = 2.0 * (rows[:, 2 * n] - q[2 * n]) - twist
    return np.sqrt(0.5 * (x + np.hypot(x, two_delta)))


def covering_net(n: int, rho: float) -> tuple[int, list[ContinuousPoint]]:
    """Greedy rho/2-net of the unit ball, sampled on a grid of step rho/8.

    The unit ball of the metric is the Euclidean unit ball, so the sample
    is every grid point of step rho/8 inside it; sweeping origin-first and
    keeping any point not yet within rho/2 of a center guarantees every
    sample point is covered.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    h = float(rho) / 8.0
    span = int(math.floor(1.0 / h))
    axis = np.arange(-span, span + 1, dtype=float) * h
    grid = np.stack(np.meshgrid(*([axis] * (2 * n + 1)), indexing="ij"), axis=-1)
    grid = grid.reshape(-1, 2 * n + 1)
    grid = grid[np.einsum("ij,ij->i", grid, grid) <= 1.0 + 1e-12]
    order = np.lexsort(grid.T[::-1])
    grid = grid[order]
    at_origin = int(np.flatnonzero(np.all(grid == 0.0, axis=1))[0])
    grid = np.concatenate([grid[at_origin : at_origin + 1], np.delete(grid, at_origin, axis=0)])
    half = float(rho) / 2.0
    centers = np.empty((0, 2 * n + 1))
    for row in grid:
        if centers.shape[0] == 0 or float(np.min(_metric_d_rows(centers, row, n))) > half:
            centers = np.vstack([centers, row])
    uncovered = [
        row for row in grid if float(np.min(_metric_d_rows(centers, row, n))) > half
    ]
    if uncovered:
        raise RuntimeError("net left a grid point uncovered; grid resolution bug")
    points = [
        ContinuousPoint(
            tuple(complex(row[j], row[n + j]) for j in range(n)), float(row[2 * n])
        )
        for row in centers
    ]
    return len(points), points


# --- the selection recursion over thickened spheres -----------------------------

class BoundgenResult(NamedTuple):
    k: int
    selection: list[BallSpec]
    captured: tuple[Point, ...]
    report: dict


def _shell_contains(y: Point, ball: BallSpec, thick: Num, cache: dict) -> bool:
    key = (point_key(y), point_key(ball.center), ball.radius, thick)
    hit = cache.get(key)
    if hit is None:
        hit = bool(boundary_contains(y, BallSpec(ball.center, ball.radius, thick)))
        cache[key] = hit
    return hit


def _shell_mass_checklist(
    nu: DiscreteMeasure, stack: Stack, eps: Fraction, t: Num, cache: dict
) -> tuple[bool, str]:
    """Hypothesis: nu(boundary_t B) > eps * nu(B) for every stack ball."""
    support = nu.support
    for level, carpet in enumerate(stack.carpets, start=1):
        for ball in carpet.balls:
            ball_mass = nu.mass(
                y for y in support if _dist_le(y, ball.center, ball.radius)
            )
            shell_mass = nu.mass(
                y for y in support if _shell_contains(y, ball, t, cache)
            )
            if not shell_mass > eps * ball_mass:
                detail = (
                    f"level {level} ball at {point_key(ball.center)}: "
                    f"shell mass {shell_mass} <= eps * ball mass {eps * ball_mass}"
                )
                return False, detail
    return True, ""


def _radii_growth_checklist(stack: Stack, t: Num) -> tuple[bool, str]:
    if not Fraction(stack.carpets[0].rmin) > 2 * Fraction(t):
        return False, f"rmin U_1 = {stack.carpets[0].rmin} is not > 2t = {2 * Fraction(t)}"
    for i in range(1, stack.height):
        lo, hi = stack.carpets[i].rmin, stack.carpets[i - 1].rmax
        if not Fraction(lo) > 2 * Fraction(hi):
            return False, f"rmin U_{i + 1} = {lo} is not > 2 rmax U_{i} = {hi}"
    return True, ""


def boundgen_select(
    nu: DiscreteMeasure,
    F: Sequence[Point],
    stack: Stack,
    eps: Num,
    delta: Num,
    t: Num,
    chi: int,
    _verify: bool = True,
) -> BoundgenResult:
    """Stagewise selection of a well-separated sphere family capturing
    more than half the mass of F.

    Each stage takes the best colour class of a Besicovitch selection over
    the current uncaptured set, working down the stack; the exit check asks
    whether the thickened boundaries of the family collected so far already
    hold a strict majority of nu(F).  Hypotheses (finite measure, strict
    mass fraction, radii growth, shell mass) are verified exactly and any
    failure raises with the violated clause; the height identity
    p = ceil(2 chi / (eps delta)) is reported in the checklist but not
    enforced, since the shell-mass hypothesis caps the usable height of any
    finite instance far below that p (see the package notes).
    """
    eps, delta = Fraction(eps), Fraction(delta)
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError("eps and delta must lie in (0, 1)")
    if chi < 1:
        raise ValueError("chi must be a positive integer")
    if Fraction(t) < 0:
        raise ValueError("t must be nonnegative")
    F_pts = sorted({point_key(p): p for p in F}.values(), key=point_key)
    p = stack.height
    p_required = math.ceil(Fraction(2 * chi) / (eps * delta))
    cache: dict = {}

    total = nu.total
    nu_F = nu.mass(F_pts)
    if nu_F <= 0:
        raise HypothesisViolation("mass_fraction", "F carries no mass")
    growth_ok, growth_detail = _radii_growth_checklist(stack, t)
    shells_ok, shells_detail = (True, "")
    if _verify:
        shells_ok, shells_detail = _shell_mass_checklist(nu, stack, eps, t, cache)
    checklist = {
        "finite_measure": total > 0,
        "mass_fraction": nu_F > delta * total,
        "radii_growth": growth_ok,
        "shell_mass": shells_ok,
        "height_matches_p": p == p_required,
    }
    if _verify:
        if not checklist["finite_measure"]:
            raise HypothesisViolation("finite_measure", "nu has no mass")
        if not checklist["mass_fraction"]:
            raise HypothesisViolation(
                "mass_fraction", f"nu(F) = {nu_F} is not > delta nu(M) = {delta * total}"
            )
        if not growth_ok:
            raise HypothesisViolation("radii_growth", growth_detail)
        if not shells_ok:
            raise HypothesisViolation("shell_mass", shells_detail)

    V: list[BallSpec] = []
    stages: list[dict] = []
    for l in range(p):
        r_l = stack.carpets[p - l - 1].rmax
        captured: tuple[Point, ...] = ()
        if l >= 1:
            thick = 2 * Fraction(r_l)
            captured = tuple(
                y
                for y in F_pts
                if any(_shell_contains(y, B, thick, cache) for B in V)
            )
            cap_mass = nu.mass(captured)
            if 2 * cap_mass > nu_F:
                k = p - l + 1
                separated = is_sphere_separated(V)
                if not separated:
                    raise RuntimeError(
                        "postcondition (i) failed: selected sphere family "
                        "is not well-separated"
                    )
                report = {
                    "input_digest": _boundgen_digest(nu, F_pts, stack, eps, delta, t, chi),
                    "hypotheses": checklist,
                    "height": p,
                    "p_required": p_required,
                    "stages": stages,
                    "k": k,
                    "capture_thickening": _num_doc(thick),
                    "selection": [_ball_doc(b) for b in V],
                    "postconditions": {
                        "sphere_separated": separated,
                        "capture_fraction": str(cap_mass / nu_F),
                        "exceeds_half": True,
                    },
                }
                return BoundgenResult(k, V, captured, report)
        if l == p - 1:
            raise HypothesisViolation(
                "termination",
                "stack exhausted before any family captured half the mass; "
                "the hypotheses cannot all hold",
            )
        captured_keys = {point_key(y) for y in captured}
        E = [y for y in F_pts if point_key(y) not in captured_keys]
        sub = stack.carpets[p - l - 1].restrict(E)
        chosen = besicovitch_select(sub)
        partition = colour_partition(chosen, chi)
        best_cls, best_mass = None, Fraction(-1)
        for cls in partition.classes:
            mass = nu.mass(
                y for y in E if any(_dist_le(y, b.center, b.radius) for b in cls)
            )
            if mass > best_mass:
                best_cls, best_mass = cls, mass
        e_mass = nu.mass(E)
        if best_mass * partition.chi_used < e_mass:
            raise RuntimeError("pigeonhole failed: no colour class holds nu(E)/chi")
        stages.append(
            {
                "l": l,
                "carpet_level": p - l,
                "selected": len(chosen),
                "classes_used": partition.chi_used,
                "class_mass": str(best_mass),
                "uncaptured_mass": str(e_mass),
            }
        )
        V.extend(best_cls)
    raise AssertionError("unreachable: loop exits via capture or termination")


def _boundgen_digest(nu, F_pts, stack, eps, delta, t, chi) -> str:
    return _digest(
        {
            "nu": [[_point_doc(p), str(w)] for p, w in sorted(nu.weights.items(), key=lambda kv: point_key(kv[0]))],
            "F": [_point_doc(p) for p in F_pts],
            "stack": [[_ball_doc(b) for b in c.balls] for c in stack.carpets],
            "eps": str(eps),
            "delta": str(delta),
            "t": _num_doc(t),
            "chi": chi,
        }
    )


# --- stack heights ---------------------------------------------------------------

class HeightResult(NamedTuple):
    q: int
    q_list: tuple[int, ...]
    p_list: tuple[int, ...]
    stated_bound_holds: bool
    proof_end_bound_holds: bool


def stack_height(params: HeightParams) -> HeightResult:
    """q_i = p_i (1 + q_{i+1}) with p_i = ceil(2^{i+1} chi / (eps delta)).

    Also verifies the stated closed-form bound with exponents kappa and
    kappa^2, and evaluates the proof-end variant with kappa-1 exponents;
    the two disagree, so both flags are reported rather than resolved.
    """
    chi, kappa = params.chi, params.kappa
    ed = params.eps * params.delta
    p_list = tuple(math.ceil(Fraction(2 ** (i + 1) * chi) / ed) for i in range(kappa))
    q = [0] * (kappa + 1)
    for i in range(kappa - 1, -1, -1):
        q[i] = p_list[i] * (1 + q[i + 1])

    def bound_sq(a: int, b: int) -> Fraction:
        # (kappa (2 sqrt2 chi/(eps delta))^a sqrt2^b)^2 is rational
        return Fraction(kappa * kappa) * (Fraction(8 * chi * chi) / (ed * ed)) ** a * 2 ** b

    stated = Fraction(q[0]) ** 2 <= bound_sq(kappa, kappa * kappa)
    if kappa == 0:
        proof_end = True
    else:
        proof_end = Fraction(q[0]) ** 2 <= bound_sq(kappa - 1, (kappa - 1) ** 2)
    return HeightResult(q[0], tuple(q), p_list, bool(stated), bool(proof_end))


# --- the chain construction -------------------------------------------------------

@dataclass(frozen=True)
class MassBound:
    """The theorem's conclusion branch: nu(F) <= delta nu(M)."""

    nu_F: Fraction
    bound: Fraction
    report: dict


@dataclass(frozen=True)
class Chain:
    """Candidate chain for the intersection-dimension test.

    x sits in every thickened sphere; points[i] is the i-th sphere's
    center, drawn from F_{i-1}.  conditions records the (a), (b), (c)
    clauses of the intersection-dimension definition, re-certified with
    the exact boundary test.
    """

    x: Point
    points: tuple[Point, ...]
    radii: tuple[Num, ...]
    thicks: tuple[Num, ...]
    conditions: dict
    report: dict


def maintech_chain(
    nu: DiscreteMeasure,
    F: Sequence[Point],
    stack: Stack,
    params: HeightParams,
    t: Num,
    force: bool = False,
) -> Union[MassBound, Chain]:
    """Either certify nu(F) <= delta nu(M) or emit a kappa-chain candidate.

    The contradiction path runs kappa staged selections, each over the
    strided substack the height recursion dictates, halving the tracked
    mass fraction per stage; a point of the final set yields the chain.
    force=True skips the hypothesis checks (growth, shell mass, height) so
    the staged machinery can be exercised on instances small enough to
    build; the emitted chain's conditions are still re-certified honestly.
    """
    heights = stack_height(params)
    cache: dict = {}
    F_pts = sorted({point_key(p): p for p in F}.values(), key=point_key)
    if not force:
        for i in range(1, stack.height):
            lo = Fraction(stack.carpets[i].rmin)
            hi = Fraction(stack.carpets[i - 1].rmax)
            if not lo > 2 * hi * hi:
                raise HypothesisViolation(
                    "radii_growth_squared",
                    f"rmin U_{i + 1} = {lo} is not > 2 (rmax U_{i})^2",
                )
        floor = 7 * max(Fraction(t), Fraction(params.R))
        if not Fraction(stack.carpets[0].rmin) > floor:
            raise HypothesisViolation(
                "radii_floor", f"rmin U_1 = {stack.carpets[0].rmin} is not > 7 max(t, R)"
            )
        shells_ok, detail = _shell_mass_checklist(nu, stack, params.eps, t, cache)
        if not shells_ok:
            raise HypothesisViolation("shell_mass", detail)
        if stack.height < heights.q:
            raise HypothesisViolation(
                "height", f"stack height {stack.height} is below q = {heights.q}"
            )

    base_report = {
        "q": heights.q,
        "q_list": list(heights.q_list),
        "p_list": list(heights.p_list),
        "forced": force,
    }
    nu_F = nu.mass(F_pts)
    if nu_F <= params.delta * nu.total:
        report = dict(base_report, outcome="mass_bound")
        return MassBound(nu_F, params.delta * nu.total, report)

    N = 0
    F_i = F_pts
    selections: list[list[BallSpec]] = []
    thicks: list[Num] = []
    stage_reports: list[dict] = []
    prev_mass = nu_F
    for i in range(params.kappa):
        stride = 1 + heights.q_list[i + 1]
        levels = [N + j * stride for j in range(1, heights.p_list[i] + 1)]
        if levels[-1] > stack.height:
            raise HypothesisViolation(
                "height", f"stage {i + 1} needs stack level {levels[-1]}"
            )
        sub = Stack(tuple(stack.carpets[lv - 1].restrict(F_i) for lv in levels))
        delta_i = params.delta / 2 ** i
        res = boundgen_select(
            nu, F_i, sub, params.eps, delta_i, t, params.chi, _verify=not force
        )
        n_next = res.k - 1
        N = N + n_next * stride
        t_i = 2 * Fraction(stack.carpets[N - 1].rmax)
        new_mass = nu.mass(res.captured)
        if 2 * new_mass <= prev_mass:
            raise RuntimeError(f"stage {i + 1} lost the half-mass invariant")
        stage_reports.append(
            {
                "stage": i + 1,
                "n": n_next,
                "N": N,
                "t": _num_doc(t_i),
                "mass": str(new_mass),
                "spheres": len(res.selection),
            }
        )
        selections.append(res.selection)
        thicks.append(t_i)
        F_i = list(res.captured)
        prev_mass = new_mass

    ranked = sorted(F_i, key=lambda y: (-nu.weights.get(y, Fraction(0)), point_key(y)))
    x = ranked[0]
    centers: list[Point] = []
    radii: list[Num] = []
    for i in range(params.kappa):
        ball = next(
            b for b in selections[i] if _shell_contains(x, b, thicks[i], cache)
        )
        centers.append(ball.center)
        radii.append(ball.radius)
    cond_a = all(Fraction(ti) >= 1 for ti in thicks)
    scale = Fraction(params.R)
    cond_b = True
    for i in range(params.kappa):
        scale *= Fraction(thicks[i])
        if Fraction(radii[i]) < scale:
            cond_b = False
    cond_chain = all(
        _shell_contains(centers[i], BallSpec(centers[j], radii[j]), thicks[j], cache)
        for i in range(params.kappa)
        for j in range(i)
    )
    cond_common = all(
        _shell_contains(x, BallSpec(centers[i], radii[i]), thicks[i], cache)
        for i in range(params.kappa)
    )
    report = dict(
        base_report,
        outcome="chain",
        stages=stage_reports,
        chain=[
            {"center": _point_doc(c), "radius": _num_doc(r), "t": _num_doc(ti)}
            for c, r, ti in zip(centers, radii, thicks)
        ],
    )
    return Chain(
        x,
        tuple(centers),
        tuple(radii),
        tuple(thicks),
        {
            "t_at_least_one": cond_a,
            "radii_scale": cond_b,
            "chain_memberships": cond_chain,
            "common_point_in_all": cond_common,
        },
        report,
    )


# --- synthetic instances -----------------------------------------------------------

def _axis_point(j: int) -> LatticePoint:
    return LatticePoint((j,), (0,), 0)


def synthetic_boundgen_instance(
    f: int, t: int, height: int, clusters: int = 1, seed: int = 0
):
    """Axis-cluster instance satisfying every selection hypothesis.

    Each cluster holds f consecutive axis points with near-uniform masses;
    carpet i uses one shared radius R_i with R_1 = 2t+1 and R_{i+1} = 2R_i+1,
    and one shell atom per cluster and level carries doubled mass, which
    keeps nu(boundary_t B) > nu(B)/4 for every stack ball.  The top-level
    shells then capture everything but the selected centers, so the
    recursion exits at its first check with k = height.

    Returns (nu, F, stack, eps, delta, t).
    """
    if t < 2:
        raise ValueError("t must be at least 2")
    if not 3 <= f <= t + 1:
        raise ValueError("need 3 <= f <= t + 1")
    if height < 2:
        raise ValueError("height must be at least 2")
    if clusters not in (1, 2):
        raise ValueError("clusters must be 1 or 2")
    rng = np.random.default_rng(seed)
    radii = []
    r = 2 * t + 1
    for _ in range(height):
        radii.append(r)
        r = 2 * r + 1
    spacing = 4 * radii[-1] + 4 * f
    pts: list[LatticePoint] = []
    weights: dict[Point, Fraction] = {}
    for c in range(clusters):
        for j in range(f):
            p = _axis_point(c * spacing + j)
            pts.append(p)
            weights[p] = 1 + Fraction(int(rng.integers(0, 10)), 100)
    nu_F = sum(weights.values(), Fraction(0))
    shift = (f - 1) // 2  # keeps every atom strictly inside all f shells
    acc = Fraction(0)
    atom_masses = []
    for _ in range(height):
        a = nu_F + acc
        atom_masses.append(a)
        acc += a
    for c in range(clusters):
        for i, R in enumerate(radii):
            weights[_axis_point(c * spacing + R + shift)] = atom_masses[i]
    nu = DiscreteMeasure(weights)
    carpets = tuple(
        Carpet(tuple(BallSpec(p, R) for p in pts)) for R in radii
    )
    delta = Fraction(9, 10) * nu_F / nu.total
    return nu, tuple(pts), Stack(carpets), Fraction(1, 4), delta, t


def synthetic_massbound_instance(t: int = 2):
    """Fully hypothesis-satisfying squared-growth instance.

    Shell atoms hold almost all the mass, so nu(F) <= delta nu(M) and the
    chain construction certifies the mass bound outright.  Radii square
    per level (top coordinate near 1e188), which keeps every membership on
    the exact integer path.

    Returns (nu, F, stack, params, t).
    """
    params = HeightParams(
        chi=1, kappa=1, eps=Fraction(1, 2), delta=Fraction(1, 2), R=2.0
    )
    q = stack_height(params).q
    pts = [_axis_point(0), _axis_point(1)]
    weights: dict[Point, Fraction] = {p: Fraction(1) for p in pts}
    nu_F = Fraction(len(pts))
    radii = []
    r = 7 * max(t, 2) + 1
    for _ in range(q):
        radii.append(r)
        r = 2 * r * r + 1
    acc = Fraction(0)
    for i, R in enumerate(radii):
        a = nu_F + acc + 1  # strict majority of the ball it sits on
        weights[_axis_point(R)] = a
        acc += a
    nu = DiscreteMeasure(weights)
    carpets = tuple(Carpet(tuple(BallSpec(p, R) for p in pts)) for R in radii)
    return nu, tuple(pts), Stack(carpets), params, t


def synthetic_maintech_instance(t: int = 2, shell_points: int = 5):
    """Small kappa=1 instance for the forced chain path.

    Radii double rather than square, so the squared-growth hypothesis
    fails by design and the instance only runs under force=True; the
    geometry still drives each staged selection to a clean exit and the
    emitted chain satisfies the re-certified conditions.

    Returns (nu, F, stack, params, t).
    """
    params = HeightParams(
        chi=1, kappa=1, eps=Fraction(1, 2), delta=Fraction(1, 2), R=1.0001
    )
    q = stack_height(params).q
    radii = []
    r = 7 * max(t, 2) + 1
    for _ in range(q):
        radii.append(r)
        r = 2 * r + 1
    top = radii[-1]
    pts = [_axis_point(0)] + [_axis_point(top - s) for s in range(1, shell_points + 1)]
    weights: dict[Point, Fraction] = {p: Fraction(1) for p in pts}
    nu = DiscreteMeasure(weights)
    carpets = tuple(Carpet(tuple(BallSpec(p, R) for p in pts)) for R in radii)
    return nu, tuple(pts), Stack(carpets), params, t


# --- reports ------------------------------------------------------------------------

def covering_report_json(report: dict) -> str:
    """Deterministic JSON for a covering run report."""

    def fallback(x):
        if isinstance(x, Fraction):
            return str(x)
        raise TypeError(f"unserializable {type(x)!r}")

    return json.dumps(report, sort_keys=True, indent=2, default=fallback)
