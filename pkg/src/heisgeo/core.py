"""Exact arithmetic and metric geometry for discrete Heisenberg groups.

The ambient group is H^n = C^n x R with multiplication

    (z, tau) * (w, sigma) = (z + w, tau + sigma + Im<z, w>/2),

where <z, w> = sum_j conj(z_j) w_j.  The integer lattice consists of the
points with z in Z^n + iZ^n and tau in <Re z, Im z>/2 + Z; a lattice point
is stored as (a, b, m) with z = a + ib and m = 2*tau, so every operation on
lattice points is exact integer arithmetic.  The invariant m = <a, b> (mod 2)
is what makes tau land in the right coset, and it is preserved by products.

The metric is the homogeneous distance whose unit ball centred at the
identity is the Euclidean unit ball of R^(2n+1).  It is right invariant,
one-homogeneous under the dilations delta_lambda(z, tau) = (lambda z,
lambda^2 tau), and satisfies the closed form

    d(p, q)^2 = (|z-w|^2 + sqrt(|z-w|^4 + 4 D^2)) / 2,
    D = tau - sigma - Im<z, w>/2.

Ball membership for lattice points and rational radii reduces to an integer
comparison, so counting never touches floating point.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

Radius = Union[int, Fraction]


def _as_int_tuple(xs: Iterable[int]) -> tuple[int, ...]:
    out = tuple(int(x) for x in xs)
    return out


@dataclass(frozen=True)
class LatticePoint:
    """Lattice element (a + ib, m/2) with the parity invariant m = <a,b> mod 2."""

    a: tuple[int, ...]
    b: tuple[int, ...]
    m: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _as_int_tuple(self.a))
        object.__setattr__(self, "b", _as_int_tuple(self.b))
        object.__setattr__(self, "m", int(self.m))
        if len(self.a) != len(self.b):
            raise ValueError("a and b must have the same length")
        if (self.m - sum(x * y for x, y in zip(self.a, self.b))) % 2 != 0:
            raise ValueError(f"parity violated: m={self.m} vs <a,b>={sum(x*y for x, y in zip(self.a, self.b))}")

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def tau(self) -> Fraction:
        return Fraction(self.m, 2)

    def z(self) -> tuple[complex, ...]:
        return tuple(complex(x, y) for x, y in zip(self.a, self.b))

    def __mul__(self, other: "LatticePoint") -> "LatticePoint":
        return multiply(self, other)

    def inv(self) -> "LatticePoint":
        return inverse(self)


@dataclass(frozen=True)
class ContinuousPoint:
    """Point of the ambient group, z in C^n and real central coordinate."""

    z: tuple[complex, ...]
    tau: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", tuple(complex(w) for w in self.z))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n(self) -> int:
        return len(self.z)

    def __mul__(self, other: "ContinuousPoint") -> "ContinuousPoint":
        return multiply(self, other)

    def inv(self) -> "ContinuousPoint":
        return inverse(self)


Point = Union[LatticePoint, ContinuousPoint]


@dataclass(frozen=True)
class SphereCoords:
    """Dilation-normalised coordinates: p = delta_lambda(p_hat), d(p_hat, 0) = 1.

    rho holds the moduli |z_hat_j| (not renormalised to the unit sphere of
    C^n), phi the phases in (-pi, pi] with phi_j = 0 whenever rho_j = 0.
    """

    lam: float
    z_hat: tuple[complex, ...]
    tau_hat: float
    rho: tuple[float, ...]
    phi: tuple[float, ...]


def lattice_identity(n: int) -> LatticePoint:
    return LatticePoint((0,) * n, (0,) * n, 0)


def continuous_identity(n: int) -> ContinuousPoint:
    return ContinuousPoint((0j,) * n, 0.0)


def as_continuous(p: Point) -> ContinuousPoint:
    if isinstance(p, ContinuousPoint):
        return p
    return ContinuousPoint(p.z(), float(p.m) / 2.0)


def imag_inner(p: Point, q: Point) -> float:
    """Im<z_p, z_q>; exact int when both arguments are lattice points."""
    if isinstance(p, LatticePoint) and isinstance(q, LatticePoint):
        return sum(x * v - y * u for x, y, u, v in zip(p.a, p.b, q.a, q.b))
    zp = p.z() if isinstance(p, LatticePoint) else p.z
    zq = q.z() if isinstance(q, LatticePoint) else q.z
    return sum((w.conjugate() * u).imag for w, u in zip(zp, zq))


def multiply(p: Point, q: Point) -> Point:
    """Group product; stays on the lattice when both factors do."""
    if isinstance(p, LatticePoint) and isinstance(q, LatticePoint):
        if p.n != q.n:
            raise ValueError("rank mismatch")
        a = tuple(x + u for x, u in zip(p.a, q.a))
        b = tuple(y + v for y, v in zip(p.b, q.b))
        # 2*(tau_p + tau_q + Im<z_p, z_q>/2) keeps the doubled coordinate integral.
        m = p.m + q.m + sum(x * v - y * u for x, y, u, v in zip(p.a, p.b, q.a, q.b))
        return LatticePoint(a, b, m)
    cp, cq = as_continuous(p), as_continuous(q)
    if cp.n != cq.n:
        raise ValueError("rank mismatch")
    z = tuple(w + u for w, u in zip(cp.z, cq.z))
    tau = cp.tau + cq.tau + 0.5 * sum((w.conjugate() * u).imag for w, u in zip(cp.z, cq.z))
    return ContinuousPoint(z, tau)


def inverse(p: Point) -> Point:
    if isinstance(p, LatticePoint):
        return LatticePoint(tuple(-x for x in p.a), tuple(-y for y in p.b), -p.m)
    return ContinuousPoint(tuple(-w for w in p.z), -p.tau)


def dilate(lam: float, p: Point) -> ContinuousPoint:
    """delta_lambda(z, tau) = (lambda z, lambda^2 tau), an automorphism for lam > 0."""
    cp = as_continuous(p)
    return ContinuousPoint(tuple(lam * w for w in cp.z), lam * lam * cp.tau)


def _norm_sq(z: Sequence[complex]) -> float:
    return sum(w.real * w.real + w.imag * w.imag for w in z)


def metric_d(p: Point, q: Point) -> float:
    """Homogeneous distance.  Fused evaluation: the inner square root goes
    through hypot so |z-w|^4 + 4D^2 never cancels badly."""
    cp, cq = as_continuous(p), as_continuous(q)
    if cp.n != cq.n:
        raise ValueError("rank mismatch")
    x2 = _norm_sq([w - u for w, u in zip(cp.z, cq.z)])
    delta = cp.tau - cq.tau - 0.5 * sum((w.conjugate() * u).imag for w, u in zip(cp.z, cq.z))
    inner = math.hypot(x2, 2.0 * delta)
    return math.sqrt(0.5 * (x2 + inner))


def homogeneous_norm(p: Point) -> float:
    """d(p, 0)."""
    cp = as_continuous(p)
    return metric_d(cp, continuous_identity(cp.n))


def _ball_lhs_scaled(p: LatticePoint, q: LatticePoint) -> tuple[int, int]:
    """Return (X, t2) with X = |z_p - z_q|^2 and t2 = 2*Delta, both integers."""
    x = sum((xa - ua) ** 2 + (yb - vb) ** 2 for xa, yb, ua, vb in zip(p.a, p.b, q.a, q.b))
    two_delta = p.m - q.m - sum(xa * vb - yb * ua for xa, yb, ua, vb in zip(p.a, p.b, q.a, q.b))
    return x, two_delta


def radius_parts(r: Radius) -> tuple[int, int]:
    """Numerator/denominator of a nonnegative int or Fraction radius."""
    if isinstance(r, int):
        if r < 0:
            raise ValueError("radius must be nonnegative")
        return r, 1
    frac = Fraction(r)
    if frac < 0:
        raise ValueError("radius must be nonnegative")
    return frac.numerator, frac.denominator


def dist_le_exact(p: LatticePoint, q: LatticePoint, r: Radius) -> bool:
    """d(p, q) <= r decided in integers.

    Membership in the closed ball of radius u/v is
    4 u^2 v^2 |z-w|^2 + v^4 (2 Delta)^2 <= 4 u^4.
    """
    u, v = radius_parts(r)
    if u == 0:
        raise ValueError("radius must be positive")
    x, two_delta = _ball_lhs_scaled(p, q)
    return 4 * u * u * v * v * x + v ** 4 * two_delta * two_delta <= 4 * u ** 4


def dist_eq_exact(p: LatticePoint, q: LatticePoint, r: Radius) -> bool:
    """d(p, q) == r decided in integers (sphere membership)."""
    u, v = radius_parts(r)
    if u == 0:
        raise ValueError("radius must be positive")
    x, two_delta = _ball_lhs_scaled(p, q)
    return 4 * u * u * v * v * x + v ** 4 * two_delta * two_delta == 4 * u ** 4


def norm_sq_exact(p: LatticePoint) -> tuple[int, int]:
    """(|z|^2, m) for d(p,0): d^2 = (|z|^2 + sqrt(|z|^4 + m^2)) / 2."""
    return sum(x * x + y * y for x, y in zip(p.a, p.b)), p.m


def project_unit_sphere(p: Point) -> SphereCoords:
    """Normalise p to the unit sphere along its dilation orbit."""
    cp = as_continuous(p)
    lam = homogeneous_norm(cp)
    if lam == 0.0:
        raise ValueError("identity has no spherical projection")
    z_hat = tuple(w / lam for w in cp.z)
    tau_hat = cp.tau / (lam * lam)
    rho = tuple(abs(w) for w in z_hat)
    phi = []
    for w, r in zip(z_hat, rho):
        if r == 0.0:
            phi.append(0.0)
        else:
            ph = cmath.phase(w)
            phi.append(math.pi if ph == -math.pi else ph)
    return SphereCoords(lam, z_hat, tau_hat, rho, tuple(phi))


def angular_gap(p: Point, q: Point, j: int) -> float:
    """Absolute angle between the j-th horizontal phases of p and q.

    Phases are dilation invariant, so this reads them off the raw
    coordinates; a vanishing modulus on either side gives 0 by convention.
    """
    zp = (p.z() if isinstance(p, LatticePoint) else p.z)[j]
    zq = (q.z() if isinstance(q, LatticePoint) else q.z)[j]
    if zp == 0 or zq == 0:
        return 0.0
    return abs(cmath.phase(zq / zp))


def isometry_flip(p: Point) -> Point:
    """(z, tau) -> (conj z, -tau); a metric-preserving automorphism."""
    if isinstance(p, LatticePoint):
        return LatticePoint(p.a, tuple(-y for y in p.b), -p.m)
    return ContinuousPoint(tuple(w.conjugate() for w in p.z), -p.tau)


def isometry_rotate(theta: Sequence[float], p: Point) -> ContinuousPoint:
    """Coordinatewise rotation (z_j) -> (e^{i theta_j} z_j), tau fixed."""
    cp = as_continuous(p)
    if len(theta) != cp.n:
        raise ValueError("need one angle per coordinate")
    return ContinuousPoint(tuple(cmath.exp(1j * t) * w for t, w in zip(theta, cp.z)), cp.tau)


def lattice_rotate_quarter(p: LatticePoint, counts: Sequence[int]) -> LatticePoint:
    """Quarter-turn rotations z_j -> i^{c_j} z_j, the lattice-preserving case."""
    if len(counts) != p.n:
        raise ValueError("need one count per coordinate")
    a, b = list(p.a), list(p.b)
    for j, c in enumerate(counts):
        for _ in range(c % 4):
            a[j], b[j] = -b[j], a[j]
    return LatticePoint(tuple(a), tuple(b), p.m)


# --- serialisation ---------------------------------------------------------

def point_to_json(p: Point) -> str:
    if isinstance(p, LatticePoint):
        return json.dumps({"a": list(p.a), "b": list(p.b), "m": p.m}, sort_keys=True)
    return json.dumps(
        {"z_re": [w.real for w in p.z], "z_im": [w.imag for w in p.z], "tau": p.tau},
        sort_keys=True,
    )


def point_from_json(s: str) -> Point:
    obj = json.loads(s)
    if "m" in obj:
        return LatticePoint(tuple(obj["a"]), tuple(obj["b"]), obj["m"])
    z = tuple(complex(re, im) for re, im in zip(obj["z_re"], obj["z_im"]))
    return ContinuousPoint(z, obj["tau"])


def generator(n: int, j: int, imaginary: bool = False) -> LatticePoint:
    """Standard generator e_j (or i e_j) with trivial central part."""
    a = [0] * n
    b = [0] * n
    if imaginary:
        b[j] = 1
    else:
        a[j] = 1
    return LatticePoint(tuple(a), tuple(b), 0)
