"""Finite Blaschke products on the upper half-plane with real symmetry.

Points of the upper half-plane are plain ``complex`` numbers with
``im >= 0`` (zeros must have ``im > 0``).  A product is *real symmetric*
when its zero multiset is invariant under ``a -> -conj(a)``; such a
product takes real values on the positive imaginary axis and satisfies
``B(-conj(z)) == conj(B(z))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateInputError,
    GeometryError,
    NotUnimodularError,
    SignConditionError,
)

AXIS_SNAP = 1e-12        # relative tolerance for snapping zeros onto the axis
PAIR_TOL = 1e-9          # relative tolerance for matching reflected partners


def reflect(z):
    """Reflection across the imaginary axis, the symmetry of the algebra."""
    return -np.conj(z)


def elementary_factor(a: complex, z):
    """The factor (z - a) / (z - conj(a)), modulus <= 1 on the closed half-plane."""
    return (z - a) / (z - np.conj(a))


@dataclass(frozen=True)
class BlaschkeProduct:
    """Finite Blaschke product with simple zeros in the open upper half-plane.

    The zero tuple is canonically ordered and exactly reflection-closed:
    every off-axis zero is stored together with its mirror ``-conj(a)``.
    The empty product is the constant 1.
    """

    zeros: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for a in self.zeros:
            if a.imag <= 0:
                raise GeometryError(f"zero {a} is not in the open upper half-plane")

    @classmethod
    def from_zeros(cls, zeros, strict: bool = True) -> "BlaschkeProduct":
        """Build a product from a zero list, snapping and validating symmetry.

        Zeros with ``|re| <= AXIS_SNAP * |a|`` are snapped onto the axis.
        Off-axis zeros must come with their mirror partner (within
        ``PAIR_TOL``); the stored partner is made exactly ``-conj(a)``.
        With ``strict=False`` missing partners are added instead of
        raising, and the completed list is recorded on the instance via
        the return of :func:`load_zero_file`.
        """
        snapped = []
        for a in zeros:
            a = complex(a)
            scale = max(abs(a), 1.0)
            if abs(a.real) <= AXIS_SNAP * scale:
                a = complex(0.0, a.imag)
            if a.imag <= 0:
                raise GeometryError(f"zero {a} is not in the open upper half-plane")
            snapped.append(a)

        axis = [a for a in snapped if a.real == 0.0]
        right = [a for a in snapped if a.real > 0.0]
        left = [a for a in snapped if a.real < 0.0]

        completed = list(axis)
        used = [False] * len(left)
        added = []
        for a in right:
            mirror = -a.conjugate()
            best, best_d = -1, math.inf
            for i, b in enumerate(left):
                if used[i]:
                    continue
                d = abs(b - mirror)
                if d < best_d:
                    best, best_d = i, d
            if best >= 0 and best_d <= PAIR_TOL * max(abs(a), 1.0):
                used[best] = True
                completed.extend([a, mirror])
            elif strict:
                raise GeometryError(
                    f"zero {a} has no reflected partner {mirror} in the input"
                )
            else:
                completed.extend([a, mirror])
                added.append(mirror)
        for i, b in enumerate(left):
            if not used[i]:
                mirror = -b.conjugate()
                if strict:
                    raise GeometryError(
                        f"zero {b} has no reflected partner {mirror} in the input"
                    )
                completed.extend([mirror, b])
                added.append(mirror)

        completed.sort(key=lambda a: (a.imag, a.real))
        prod = cls(tuple(completed))
        prod._check_simple()
        if not strict:
            object.__setattr__(prod, "_autocompleted", tuple(added))
        return prod

    def _check_simple(self):
        zs = self.zeros
        for i in range(len(zs)):
            for j in range(i + 1, len(zs)):
                if abs(zs[i] - zs[j]) <= 1e-12 * max(1.0, abs(zs[i])):
                    raise GeometryError(f"repeated zero {zs[i]}")

    # -- structure ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.zeros)

    @property
    def is_empty(self) -> bool:
        return not self.zeros

    @property
    def axis_zeros(self):
        return tuple(a for a in self.zeros if a.real == 0.0)

    @property
    def offaxis_right(self):
        return tuple(a for a in self.zeros if a.real > 0.0)

    def is_symmetric(self) -> bool:
        """Exact multiset equality of the zeros with their reflection."""
        mirrored = sorted((-a.conjugate() for a in self.zeros),
                          key=lambda a: (a.imag, a.real))
        return list(self.zeros) == mirrored

    def extent(self) -> float:
        """max over zeros of |Re a| + Im a (0 for the empty product)."""
        if self.is_empty:
            return 0.0
        return max(abs(a.real) + a.imag for a in self.zeros)

    # -- evaluation --------------------------------------------------------

    def __call__(self, z):
        """Evaluate at a complex scalar or ndarray with im(z) >= 0."""
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for a in self.zeros:
            out = out * ((z - a) / (z - np.conj(a)))
        if out.ndim == 0:
            return complex(out)
        return out

    def log_derivative(self, z):
        """B'(z)/B(z) away from the zeros."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for a in self.zeros:
            out = out + 1.0 / (z - a) - 1.0 / (z - np.conj(a))
        return out

    def axis_values(self, y):
        """Values at the axis points iy; real up to rounding for symmetric data."""
        vals = self(1j * np.asarray(y, dtype=float))
        return np.real(vals)


# ---------------------------------------------------------------------------
# symmetrization of sampled data


def symmetrize_samples(points, values, tol: float = 1e-9):
    """Project sampled data onto the real-symmetric class.

    ``points`` must be reflection-closed (each ``z`` has ``-conj(z)`` in the
    set, axis points are their own partner).  Returns the array
    ``(f(z) + conj(f(-conj z))) / 2`` in the input order.
    """
    pts = np.asarray(points, dtype=complex)
    vals = np.asarray(values, dtype=complex)
    if pts.shape != vals.shape:
        raise GeometryError("points and values must have matching shapes")
    scale = max(1.0, float(np.max(np.abs(pts))) if pts.size else 1.0)
    index = {}
    for i, p in enumerate(pts):
        index[(round(p.real / (tol * scale)), round(p.imag / (tol * scale)))] = i
    partner = np.empty(len(pts), dtype=int)
    for i, p in enumerate(pts):
        q = -np.conj(p)
        key = (round(q.real / (tol * scale)), round(q.imag / (tol * scale)))
        j = index.get(key, -1)
        if j < 0:
            raise GeometryError(f"sample set is not reflection-closed at {p}")
        partner[i] = j
    return 0.5 * (vals + np.conj(vals[partner]))


# ---------------------------------------------------------------------------
# conformal transfer between the disc and the half-plane


def to_disc(z):
    """Half-plane to disc, w = (i - z)/(i + z); sends the axis to (-1, 1)."""
    z = np.asarray(z, dtype=complex)
    denom = 1j + z
    if np.any(np.abs(denom) < 1e-300):
        raise GeometryError("point at the pole -i of the half-plane-to-disc map")
    w = (1j - z) / denom
    return complex(w) if w.ndim == 0 else w


def to_halfplane(w):
    """Disc to half-plane, z = i (1 - w)/(1 + w); inverse of :func:`to_disc`."""
    w = np.asarray(w, dtype=complex)
    denom = 1.0 + w
    if np.any(np.abs(denom) < 1e-300):
        raise GeometryError("point at the pole -1 of the disc-to-half-plane map")
    z = 1j * (1.0 - w) / denom
    return complex(z) if z.ndim == 0 else z


def transfer(obj, direction: str):
    """Conformally transfer a product or a point array between models.

    ``direction`` is ``"to_disc"`` or ``"to_halfplane"``.  Blaschke
    products are transferred by mapping their zero sets; arrays of points
    are mapped pointwise.  Disc symmetry ``f(z)=conj(f(conj z))``
    corresponds to half-plane symmetry ``f(z)=conj(f(-conj z))``.
    """
    if direction not in ("to_disc", "to_halfplane"):
        raise ValueError(f"unknown direction {direction!r}")
    mapping = to_disc if direction == "to_disc" else to_halfplane
    if isinstance(obj, BlaschkeProduct):
        if direction == "to_disc":
            return tuple(mapping(a) for a in obj.zeros)
        return BlaschkeProduct.from_zeros([mapping(w) for w in obj])
    return mapping(np.asarray(obj, dtype=complex))


# ---------------------------------------------------------------------------
# corona quantity delta = inf |f1| + |f2|


def _modulus_sum(f1, f2, z):
    return np.abs(f1(z)) + np.abs(f2(z))


def corona_delta_details(f1, f2, resolution: int = 256, refine_rounds: int = 3):
    """Measured infimum of |f1| + |f2| over the upper half-plane.

    The search grid covers a box containing all zeros with margin, with
    geometrically spaced heights so shallow zeros are resolved, followed
    by ``refine_rounds`` rounds of 10x local zoom around the running
    minima.  Outside a computed radius R the bound
    ``|B(z)| >= 1 - sum_a 2 Im a / (|z| - max|a|)`` certifies that the
    value exceeds the box minimum; the enclosure is recorded in the
    returned dictionary.
    """
    # common zero scan
    for a in f1.zeros:
        for b in f2.zeros:
            if abs(a - b) < 1e-12 * max(1.0, abs(a)):
                return {"delta": 0.0, "not_unimodular": True, "argmin": a,
                        "enclosure_radius": None}

    zs = f1.zeros + f2.zeros
    if not zs:
        return {"delta": 2.0, "not_unimodular": False, "argmin": 1j,
                "enclosure_radius": 0.0}

    max_mod = max(abs(a) for a in zs)
    min_im = min(a.imag for a in zs)
    box = 2.0 * max(max_mod, 1e-6)

    def grid_min(x_lo, x_hi, y_lo, y_hi, nx, ny, geom_y):
        xs = np.linspace(x_lo, x_hi, nx)
        if geom_y:
            ys = np.geomspace(max(y_lo, 1e-12), y_hi, ny)
        else:
            ys = np.linspace(max(y_lo, 1e-12), y_hi, ny)
        Z = xs[None, :] + 1j * ys[:, None]
        vals = _modulus_sum(f1, f2, Z)
        k = int(np.argmin(vals))
        iy, ix = divmod(k, nx)
        return float(vals[iy, ix]), complex(Z[iy, ix]), float(xs[1] - xs[0] if nx > 1 else x_hi - x_lo), ys

    history = []
    while True:
        y_lo = min(min_im / 8.0, box / resolution)
        best, argmin, hx, ys = grid_min(-box, box, y_lo, box, resolution,
                                        resolution, True)
        # rounds of 10x local zoom around the running minimum
        span = 3.0 * hx
        for _ in range(refine_rounds):
            v, zm, _, _ = grid_min(argmin.real - span, argmin.real + span,
                                   max(argmin.imag - span, 1e-12),
                                   argmin.imag + span, 61, 61, False)
            if v < best:
                best, argmin = v, zm
            span /= 10.0
        history.append({"box": box, "min": best})
        if best <= 1e-12:
            return {"delta": 0.0, "not_unimodular": True, "argmin": argmin,
                    "enclosure_radius": None, "history": history}
        if best >= 1.0 - 1e-9:
            # a modulus sum this large cannot dip lower at infinity
            return {"delta": best, "not_unimodular": False, "argmin": argmin,
                    "enclosure_radius": box, "history": history}
        mass1 = sum(2.0 * a.imag for a in f1.zeros)
        mass2 = sum(2.0 * a.imag for a in f2.zeros)
        mass = min(mass1, mass2) if not (f1.is_empty or f2.is_empty) else 0.0
        radius = max_mod + mass / (1.0 - best)
        if radius <= box:
            return {"delta": best, "not_unimodular": False, "argmin": argmin,
                    "enclosure_radius": radius, "history": history}
        box = 2.0 * radius


def corona_delta(f1, f2, resolution: int = 256, refine_rounds: int = 3) -> float:
    """inf over the half-plane of |f1| + |f2| (0 signals a common zero)."""
    return corona_delta_details(f1, f2, resolution, refine_rounds)["delta"]


# ---------------------------------------------------------------------------
# axis sublevel sets and the single-sign condition


@dataclass(frozen=True)
class AxisIntervalSet:
    """Finitely many disjoint open intervals on the positive imaginary axis."""

    intervals: tuple = field(default_factory=tuple)

    def __post_init__(self):
        prev_hi = 0.0
        for lo, hi in self.intervals:
            if not (0.0 <= lo < hi):
                raise GeometryError(f"bad axis interval ({lo}, {hi})")
            if lo < prev_hi:
                raise GeometryError("axis intervals overlap")
            prev_hi = hi

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def contains(self, y: float) -> bool:
        return any(lo < y < hi for lo, hi in self.intervals)


def _axis_modulus_sq_poly(f2: BlaschkeProduct):
    """|f2(iy)|^2 as a ratio N(y)/D(y) of real polynomials (coeff arrays)."""
    num = np.array([1.0])
    den = np.array([1.0])
    for a in f2.zeros:
        al, be = a.real, a.imag
        # |iy - a|^2 = al^2 + (y - be)^2, |iy - conj a|^2 = al^2 + (y + be)^2
        num = np.polymul(num, np.array([1.0, -2.0 * be, al * al + be * be]))
        den = np.polymul(den, np.array([1.0, 2.0 * be, al * al + be * be]))
    return num, den


def axis_sublevel_intervals(f2: BlaschkeProduct, threshold: float) -> AxisIntervalSet:
    """The set {y > 0 : |f2(iy)| < threshold} as disjoint open intervals.

    |f2(iy)|^2 is a rational function of y, so the boundary points are
    real roots of a polynomial; roots are located with ``numpy.roots``
    and polished by bisection to 1e-10.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0, 1)")
    if f2.is_empty:
        return AxisIntervalSet(())
    num, den = _axis_modulus_sq_poly(f2)
    poly = np.polysub(num, threshold * threshold * den)
    roots = np.roots(poly)
    ys = sorted(
        float(r.real)
        for r in roots
        if abs(r.imag) < 1e-7 * max(1.0, abs(r)) and r.real > 0.0
    )

    def g(y):
        return abs(f2(1j * y)) - threshold

    polished = []
    for y in ys:
        lo, hi = y * (1 - 1e-4) - 1e-12, y * (1 + 1e-4) + 1e-12
        try:
            if g(lo) * g(hi) < 0:
                y = brentq(g, lo, hi, xtol=1e-10)
        except ValueError:
            pass
        polished.append(y)

    # assemble intervals by testing midpoints between consecutive crossings
    pts = [0.0] + polished + [2.0 * polished[-1] + 1.0] if polished else []
    intervals = []
    for i in range(len(pts) - 1):
        lo, hi = pts[i], pts[i + 1]
        if hi - lo < 1e-14:
            continue
        mid = math.sqrt(max(lo, 1e-14) * hi) if lo > 0 else hi / 2.0
        if g(mid) < 0:
            intervals.append((lo, hi))
    # merge adjacent intervals sharing an endpoint (tangency guard)
    merged = []
    for lo, hi in intervals:
        if merged and lo - merged[-1][1] < 1e-12:
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return AxisIntervalSet(tuple(merged))


@dataclass(frozen=True)
class SignConditionResult:
    """Outcome of the single-sign test for f1 on {y : |f2(iy)| < threshold}."""

    ok: bool
    sign: int
    intervals: AxisIntervalSet
    witnesses: tuple = ()   # on violation: ((y1, f1(iy1)), (y2, f1(iy2)))


def axis_sign_condition(f1: BlaschkeProduct, f2: BlaschkeProduct,
                        threshold: float) -> SignConditionResult:
    """Check that f1 keeps one sign on the axis sublevel set of f2.

    Witness points are the interval midpoints, the axis zeros of f2, and
    near-edge points of every interval; a sign change inside one interval
    (an axis zero of f1 in the sublevel set) is a violation as well.
    Returns the interval set and the common sign, or the two witnesses of
    opposite sign.
    """
    intervals = axis_sublevel_intervals(f2, threshold)
    if len(intervals) == 0:
        return SignConditionResult(True, +1, intervals)

    samples = []
    for lo, hi in intervals:
        width = hi - lo
        for y in (lo + 1e-3 * width, 0.5 * (lo + hi), hi - 1e-3 * width):
            samples.append(y)
    for a in f2.axis_zeros:
        samples.append(a.imag)
    samples = sorted(set(samples))

    signed = []
    for y in samples:
        v = float(np.real(f1(1j * y)))
        if abs(v) < 1e-13:
            # witness fell on a zero of f1: nudge both ways
            for dy in (1e-7 * max(y, 1.0), -1e-7 * max(y, 1.0)):
                w = float(np.real(f1(1j * (y + dy))))
                if abs(w) >= 1e-13:
                    signed.append((y + dy, w))
            if all(abs(float(np.real(f1(1j * (y + d))))) < 1e-13
                   for d in (1e-7 * max(y, 1.0), -1e-7 * max(y, 1.0))):
                raise DegenerateInputError(
                    f"f1 vanishes on a neighborhood of iy={y} in the sublevel set")
        else:
            signed.append((y, v))

    signs = {1 if v > 0 else -1 for _, v in signed}
    if len(signs) == 1:
        return SignConditionResult(True, signs.pop(), intervals)
    pos = next((y, v) for y, v in signed if v > 0)
    neg = next((y, v) for y, v in signed if v < 0)
    return SignConditionResult(False, 0, intervals, (pos, neg))


# ---------------------------------------------------------------------------
# two-sided bound for log(1/|B|)


def log_modulus_bounds(B: BlaschkeProduct, z: complex, gamma: float):
    """Bounds sum 2 Im z Im a/|z - conj a|^2 <= log 1/|B(z)| <= (1/gamma) * sum.

    Requires |b_a(z)| >= gamma for every zero a; raises
    :class:`HypothesisError` naming the offending zero otherwise.
    Returns ``(lower, upper, actual)``.
    """
    from .errors import HypothesisError

    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must lie in (0, 1]")
    if B.is_empty:
        return 0.0, 0.0, 0.0
    z = complex(z)
    s = 0.0
    for a in B.zeros:
        if abs(elementary_factor(a, z)) < gamma:
            raise HypothesisError(
                f"|b_a(z)| < gamma for a={a} (z={z}, gamma={gamma})")
        s += 2.0 * z.imag * a.imag / abs(z - a.conjugate()) ** 2
    actual = -math.log(abs(B(z)))
    return s, s / gamma, actual


# ---------------------------------------------------------------------------
# zero-set text files


def load_zero_file(path):
    """Load a zero set from text: one "re im" pair per line, '#' comments.

    The symmetric partner of any off-axis zero is auto-completed when
    absent.  Returns ``(product, report)`` where ``report["completed"]``
    lists the zeros that were added.
    """
    zeros = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise GeometryError(
                    f"{path}:{lineno}: expected 're im', got {line.strip()!r}")
            try:
                re_part, im_part = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise GeometryError(f"{path}:{lineno}: {exc}") from exc
            zeros.append(complex(re_part, im_part))
    prod = BlaschkeProduct.from_zeros(zeros, strict=False)
    completed = list(getattr(prod, "_autocompleted", ()))
    return prod, {"completed": completed}


# ---------------------------------------------------------------------------
# validated corona pair


@dataclass(frozen=True)
class CoronaPair:
    """A validated pair: measured delta, the sign level, and delta_prime."""

    f1: BlaschkeProduct
    f2: BlaschkeProduct
    delta: float
    epsilon: float
    delta_prime: float
    sign: int = +1

    def __post_init__(self):
        if self.delta <= 0:
            raise NotUnimodularError("measured delta is zero")
        if not (0 < self.delta_prime < min(self.delta, self.epsilon)):
            raise ValueError("delta_prime must be below min(delta, epsilon)")


def make_corona_pair(f1: BlaschkeProduct, f2: BlaschkeProduct, epsilon: float,
                     delta_prime: float | None = None,
                     resolution: int = 256) -> CoronaPair:
    """Measure delta, verify the sign condition, and fix delta_prime.

    Raises :class:`NotUnimodularError` on a common zero and
    :class:`SignConditionError` on a sign violation.  The default
    delta_prime is min(delta, epsilon)/10.
    """
    if epsilon <= 0 or epsilon >= 1:
        raise ValueError("epsilon must lie in (0, 1)")
    details = corona_delta_details(f1, f2, resolution=resolution)
    if details["not_unimodular"] or details["delta"] <= 0:
        raise NotUnimodularError(f"common zero near {details['argmin']}")
    delta = details["delta"]
    result = axis_sign_condition(f1, f2, epsilon)
    if not result.ok:
        raise SignConditionError(f"opposite signs at witnesses {result.witnesses}")
    if delta_prime is None:
        delta_prime = min(delta, epsilon) / 10.0
    if not (0 < delta_prime < min(delta, epsilon)):
        raise ValueError("delta_prime must be below min(delta, epsilon)")
    return CoronaPair(f1, f2, delta, epsilon, delta_prime, result.sign)
