"""Slit systems: cuts that make branch-consistent logarithms possible.

Each Carleson region gets vertical slits at the centers of its removed
children plus L-shaped slits off its maximal vertical walls; residual
zeros get discs with slits to the real axis; objects with an odd number
of axis zeros are paired by axis connectors so every summand's product
has even axis parity.  All cuts run to the real line, so the complement
of (geometry + cuts) is simply connected and a single-valued branch of
the logarithm exists on it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import LineString, Point

from .blaschke import BlaschkeProduct, CoronaPair, axis_sublevel_intervals
from .carleson import CarlesonDecomposition, Component
from .errors import ConstructionError, SignConditionError


def rank_of(d: float) -> int:
    """Integer k with 2^k <= d < 2^(k+1)."""
    if d <= 0:
        raise ValueError("altitude must be positive")
    return int(math.floor(math.log2(d)))


@dataclass(frozen=True)
class Slit:
    """A cut: one or two straight segments with an altitude, rank, origin."""

    kind: str                 # "vertical" | "gamma" | "axis-connector"
    segments: tuple           # (((x0,y0),(x1,y1)), ...)
    altitude: float
    origin: complex
    owner: str

    @property
    def rank(self) -> int:
        return rank_of(self.altitude)

    def linestring(self) -> LineString:
        pts = [self.segments[0][0]]
        for seg in self.segments:
            pts.append(seg[1])
        return LineString(pts)

    def distance_to_point(self, z: complex) -> float:
        best = math.inf
        for (x0, y0), (x1, y1) in self.segments:
            best = min(best, _segment_distance(z.real, z.imag, x0, y0, x1, y1))
        return best

    def distance_to_points(self, X, Y):
        best = np.full(np.shape(X), np.inf)
        for (x0, y0), (x1, y1) in self.segments:
            best = np.minimum(best,
                              _segment_distance_arr(X, Y, x0, y0, x1, y1))
        return best


def _segment_distance(px, py, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    den = dx * dx + dy * dy
    if den == 0:
        return math.hypot(px - x0, py - y0)
    t = max(0.0, min(1.0, ((px - x0) * dx + (py - y0) * dy) / den))
    return math.hypot(px - (x0 + t * dx), py - (y0 + t * dy))


def _segment_distance_arr(X, Y, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    den = dx * dx + dy * dy
    if den == 0:
        return np.hypot(X - x0, Y - y0)
    t = np.clip(((X - x0) * dx + (Y - y0) * dy) / den, 0.0, 1.0)
    return np.hypot(X - (x0 + t * dx), Y - (y0 + t * dy))


# ---------------------------------------------------------------------------
# slits of a single component


def gamma_slits_for_wall(x: float, b: float, c: float, side: int, owner: str):
    """L-shaped slits for the maximal vertical wall [x+ib, x+ic].

    For every integer k >= 1 with c * 2^(-k-2) > b, a horizontal segment
    of length 2 * 2^(-k-1) leaves the wall at height c * 2^(-k) on the
    given side (+1 right, -1 left), followed by a vertical drop to the
    real axis.  Walls that reach the axis (b <= 0) get none.
    """
    slits = []
    if b <= 0:
        return slits
    k = 1
    while c * 2.0 ** (-k - 2) > b:
        h = c * 2.0 ** (-k)
        length = 2.0 * 2.0 ** (-k - 1)
        x_far = x + side * length
        slits.append(Slit(
            kind="gamma",
            segments=(((x, h), (x_far, h)), ((x_far, h), (x_far, 0.0))),
            altitude=h,
            origin=complex(x, h),
            owner=owner,
        ))
        k += 1
    return slits


def _vertical_walls(component: Component):
    """Maximal vertical segments of the component's union boundary.

    Walls shared by two touching regions are interior to the union and
    carry no slits.  Returns (x, y_lo, y_hi) triples.
    """
    poly = component.polygon()
    geoms = getattr(poly, "geoms", [poly])
    by_x = {}
    for geom in geoms:
        rings = [geom.exterior] + list(geom.interiors)
        for ring in rings:
            coords = list(ring.coords)
            for (x0, y0), (x1, y1) in zip(coords[:-1], coords[1:]):
                if x0 == x1 and y0 != y1:
                    lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
                    by_x.setdefault(round(x0, 12), []).append((lo, hi))
    walls = []
    for x, spans in by_x.items():
        spans.sort()
        merged = [list(spans[0])]
        for lo, hi in spans[1:]:
            if lo <= merged[-1][1] + 1e-12:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        walls.extend((x, lo, hi) for lo, hi in merged)
    return walls


def build_slits(component: Component, deco: CarlesonDecomposition,
                delta_prime: float):
    """Vertical and L-shaped slits of one component, geometrically checked.

    Vertical slits rise from the real axis to the top of each removed
    child square; L-shaped slits hang off maximal vertical walls, on the
    side away from the component.  Before returning, pairwise
    disjointness of the delta'/100 neighborhoods and origin-only contact
    with the component are verified; failure raises
    :class:`ConstructionError` naming the offending pair.
    """
    owner = f"component:{component.index}"
    slits = []
    for r in component.regions:
        for (lo, hi) in r.children:
            c = 0.5 * (lo + hi)
            h = hi - lo
            slits.append(Slit("vertical", (((c, 0.0), (c, h)),), h,
                              complex(c, h), owner))
    poly = component.polygon()
    for x, b, cc in _vertical_walls(component):
        eps = 1e-6 * max(1.0, cc)
        probe_y = 0.5 * (b + cc)
        right_inside = poly.covers(Point(x + eps, probe_y))
        side = -1 if right_inside else +1
        slits.extend(gamma_slits_for_wall(x, b, cc, side, owner))

    check_slit_disjointness(slits, delta_prime)
    check_origin_contact(slits, component)
    return slits


def check_slit_disjointness(slits, delta_prime: float):
    """Pairwise distance of slits must exceed twice delta'/100."""
    r = delta_prime / 100.0
    lines = [s.linestring() for s in slits]
    for i in range(len(slits)):
        for j in range(i + 1, len(slits)):
            if lines[i].distance(lines[j]) <= 2.0 * r:
                raise ConstructionError(
                    f"slit neighborhoods intersect: {slits[i].kind} at "
                    f"{slits[i].origin} and {slits[j].kind} at {slits[j].origin}")


def check_origin_contact(slits, component: Component):
    """Each slit meets the component closure only at its origin."""
    for s in slits:
        for (x0, y0), (x1, y1) in s.segments:
            for t in np.linspace(0.0, 1.0, 33):
                z = complex(x0 + t * (x1 - x0), y0 + t * (y1 - y0))
                if abs(z - s.origin) < 1e-9 * max(1.0, abs(s.origin)):
                    continue
                if z.imag <= 0:
                    continue
                if any(r.contains(z) for r in component.regions):
                    raise ConstructionError(
                        f"slit at {s.origin} meets the component away from "
                        f"its origin (at {z})")


# ---------------------------------------------------------------------------
# pairing of odd objects and the full slit system


@dataclass(frozen=True)
class Pairing:
    """A summand plan: members, their discs, and the connecting cuts.

    Kinds: off-axis-pair, off-axis-merged-disc, region-mirror,
    region-solo-even, region-region, region-zero, zero-zero, zero-solo,
    region-solo-odd.  Members are ("zero", a) or ("component", index).
    """

    kind: str
    members: tuple
    slits: tuple = ()          # connector/base slits owned by the pairing
    discs: tuple = ()          # ((center, radius), ...)
    gap_index: int = -1

    def component_indices(self):
        return tuple(i for k, i in self.members if k == "component")

    def zero_members(self):
        return tuple(a for k, a in self.members if k == "zero")


def _axis_anchor(obj, deco):
    kind, val = obj
    if kind == "zero":
        return val.imag
    comp = deco.components[val]
    span = comp.axis_interval()
    return 0.5 * (span[0] + span[1])


def _gap_of(y: float, z_intervals) -> int:
    """Index of the gap (0 = below the first sublevel interval) holding y."""
    gap = 0
    for lo, hi in z_intervals:
        if y > hi:
            gap += 1
        elif y >= lo:
            return -1   # inside a sublevel interval: cannot happen for objects
    return gap


def _disc_slit(y_top: float, owner: str, origin: complex) -> Slit:
    """Base slit from the real axis up to a disc bottom."""
    return Slit("axis-connector", (((0.0, 0.0), (0.0, y_top)),), y_top,
                origin, f"base:{owner}")


def _axis_segment_slit(y_lo: float, y_hi: float, owner: str,
                       origin: complex) -> Slit:
    """Connector between two paired objects on the axis."""
    return Slit("axis-connector", (((0.0, y_lo), (0.0, y_hi)),), y_hi,
                origin, f"join:{owner}")


def classify_and_pair(deco: CarlesonDecomposition, q: BlaschkeProduct,
                      pair: CoronaPair):
    """Assign every residual zero and component to exactly one summand plan.

    Off-axis residual zeros pair with their mirrors (one disc each, or a
    merged disc when |Re a| < delta' Im a).  Mirror component pairs and
    even self-symmetric components stand alone.  Objects with an odd
    number of axis zeros are grouped by the gaps between consecutive
    axis sublevel intervals of q (level delta'), sorted by height, and
    paired consecutively; an odd count in an interior gap is the runtime
    trace of a sign-condition violation and raises
    :class:`SignConditionError`.  An odd count in an outer gap leaves a
    solo summand whose slit runs to the real axis.
    """
    dp = pair.delta_prime
    pairings = []

    # residual zeros off the axis: mirror pairs, one record per pair
    seen = set()
    for a in deco.sigma1:
        if a.real == 0.0 or a in seen:
            continue
        mirror = -a.conjugate()
        seen.add(a)
        seen.add(mirror)
        rep = a if a.real > 0 else mirror
        radius = dp * rep.imag
        if abs(rep.real) < dp * rep.imag:
            center = 1j * rep.imag
            base = _disc_slit((1.0 - dp) * rep.imag, f"merged:{rep}", center)
            pairings.append(Pairing(
                "off-axis-merged-disc",
                (("zero", rep), ("zero", -rep.conjugate())),
                (base,), ((center, radius),)))
        else:
            s_r = Slit("vertical",
                       (((rep.real, 0.0), (rep.real, (1.0 - dp) * rep.imag)),),
                       (1.0 - dp) * rep.imag, rep, f"zero:{rep}")
            mir = -rep.conjugate()
            s_l = Slit("vertical",
                       (((mir.real, 0.0), (mir.real, (1.0 - dp) * mir.imag)),),
                       (1.0 - dp) * mir.imag, mir, f"zero:{mir}")
            pairings.append(Pairing(
                "off-axis-pair",
                (("zero", rep), ("zero", mir)),
                (s_r, s_l), ((rep, radius), (mir, radius))))

    # components: mirror pairs and even self-symmetric ones stand alone
    odd_pool = []
    done = set()
    for comp in deco.components:
        if comp.index in done:
            continue
        if not comp.self_symmetric:
            done.add(comp.index)
            done.add(comp.mirror_index)
            pairings.append(Pairing(
                "region-mirror",
                (("component", comp.index), ("component", comp.mirror_index))))
        elif comp.axis_zero_count % 2 == 0:
            done.add(comp.index)
            pairings.append(Pairing(
                "region-solo-even", (("component", comp.index),)))
        else:
            done.add(comp.index)
            odd_pool.append(("component", comp.index))

    for a in deco.sigma1:
        if a.real == 0.0:
            odd_pool.append(("zero", a))

    z_intervals = list(axis_sublevel_intervals(q, dp))
    p_sign_bottom = _axis_sign_above(pair, 0.0)

    by_gap = {}
    for obj in odd_pool:
        y = _axis_anchor(obj, deco)
        g = _gap_of(y, z_intervals)
        if g < 0:
            raise ConstructionError(
                f"odd object anchored inside a sublevel interval at y={y}")
        by_gap.setdefault(g, []).append(obj)

    n_gaps = len(z_intervals) + 1
    for g, objs in sorted(by_gap.items()):
        objs.sort(key=lambda o: _axis_anchor(o, deco))
        interior = 0 < g < n_gaps - 1 and len(z_intervals) >= 2
        if len(objs) % 2 == 1:
            if interior:
                raise SignConditionError(
                    f"odd number of odd objects in the gap between sublevel "
                    f"intervals {g - 1} and {g}")
            gap_bottom = 0.0 if g == 0 else z_intervals[g - 1][1]
            sign_here = _axis_sign_above(pair, gap_bottom)
            if sign_here < 0:
                solo, rest = objs[0], objs[1:]
            else:
                solo, rest = objs[-1], objs[:-1]
            pairings.append(_solo_pairing(solo, deco, dp, g))
            objs = rest
        for k in range(0, len(objs), 2):
            pairings.append(_joint_pairing(objs[k], objs[k + 1], deco, dp, g))

    _check_connector_collisions(pairings, deco)
    _check_pairing_totality(pairings, deco, odd_pool)
    return pairings


def _axis_sign_above(pair: CoronaPair, y: float) -> int:
    """Sign of (sign-normalized) f1 on the axis just above height y."""
    p_val = 0.0
    yy = y
    for _ in range(40):
        yy = yy + max(yy, 1e-6) * 1e-3
        p_val = float(np.real(pair.f1(1j * yy))) * pair.sign
        if abs(p_val) > 1e-13:
            break
    return 1 if p_val >= 0 else -1


def _solo_pairing(obj, deco, dp, gap) -> Pairing:
    kind, val = obj
    if kind == "zero":
        a = val
        base = _disc_slit((1.0 - dp) * a.imag, f"zero:{a}", a)
        return Pairing("zero-solo", (obj,), (base,), ((a, dp * a.imag),), gap)
    comp = deco.components[val]
    y_lo = comp.axis_interval()[0]
    base = _axis_segment_slit(0.0, y_lo, f"component:{val}", complex(0, y_lo))
    return Pairing("region-solo-odd", (obj,), (base,), (), gap)


def _joint_pairing(lower, upper, deco, dp, gap) -> Pairing:
    lk, lv = lower
    uk, uv = upper
    if lk == "zero" and uk == "zero":
        a, ap = lv, uv
        base = _disc_slit((1.0 - dp) * a.imag, f"zeros:{a},{ap}", a)
        conn = _axis_segment_slit((1.0 + dp) * a.imag, (1.0 - dp) * ap.imag,
                                  f"zeros:{a},{ap}", ap)
        return Pairing("zero-zero", (lower, upper), (base, conn),
                       ((a, dp * a.imag), (ap, dp * ap.imag)), gap)
    if lk == "zero" and uk == "component":
        a = lv
        comp = deco.components[uv]
        y_lo = comp.axis_interval()[0]
        base = _disc_slit((1.0 - dp) * a.imag, f"pair:{a},{uv}", a)
        conn = _axis_segment_slit((1.0 + dp) * a.imag, y_lo,
                                  f"pair:{a},{uv}", complex(0, y_lo))
        return Pairing("region-zero", (lower, upper), (base, conn),
                       ((a, dp * a.imag),), gap)
    if lk == "component" and uk == "zero":
        comp = deco.components[lv]
        a = uv
        y_hi = comp.axis_interval()[1]
        conn = _axis_segment_slit(y_hi, (1.0 - dp) * a.imag,
                                  f"pair:{lv},{a}", complex(0, y_hi))
        return Pairing("region-zero", (lower, upper), (conn,),
                       ((a, dp * a.imag),), gap)
    comp_l = deco.components[lv]
    comp_u = deco.components[uv]
    y_hi_l = comp_l.axis_interval()[1]
    y_lo_u = comp_u.axis_interval()[0]
    conn = _axis_segment_slit(y_hi_l, y_lo_u, f"pair:{lv},{uv}",
                              complex(0, y_hi_l))
    return Pairing("region-region", (lower, upper), (conn,), (), gap)


def _check_connector_collisions(pairings, deco):
    """Member-to-member connectors must not thread a third component.

    Base slits are exempt: a cut to the real axis inevitably crosses
    whatever sits below its object, and the crossed component is not
    part of the summand whose branch the slit serves.
    """
    for p in pairings:
        member_comps = set(p.component_indices())
        for s in p.slits:
            if not s.owner.startswith("join:"):
                continue
            line = s.linestring()
            for comp in deco.components:
                if comp.index in member_comps:
                    continue
                poly = comp.polygon()
                if poly.intersects(line):
                    raise ConstructionError(
                        f"connector of pairing {p.kind} crosses component "
                        f"{comp.index}")


def _check_pairing_totality(pairings, deco, odd_pool):
    covered = set()
    for p in pairings:
        for m in p.members:
            covered.add(m)
    for obj in odd_pool:
        if obj not in covered:
            raise ConstructionError(f"odd object {obj} left unpaired")
    for a in deco.sigma1:
        rep = ("zero", a if (a.real > 0 or a.real == 0.0) else -a.conjugate())
        if rep not in covered and ("zero", a) not in covered:
            raise ConstructionError(f"residual zero {a} not covered")


# ---------------------------------------------------------------------------
# the assembled system and neighborhood census


@dataclass(frozen=True)
class SlitSystem:
    """All pairings, component slits, and the neighborhood radii."""

    pairings: tuple
    component_slits: dict          # component index -> tuple of Slit
    decomposition: CarlesonDecomposition
    delta_prime: float

    @property
    def radius(self) -> float:
        return self.delta_prime / 100.0

    def all_slits(self):
        out = []
        for slits in self.component_slits.values():
            out.extend(slits)
        for p in self.pairings:
            out.extend(p.slits)
        return out

    def all_discs(self):
        out = []
        for p in self.pairings:
            out.extend(p.discs)
        return out

    def origins_measure(self):
        from .carleson import PointMassMeasure
        atoms = []
        for s in self.all_slits():
            y = max(s.origin.imag, 1e-300)
            atoms.append((complex(s.origin.real, y), y))
        return PointMassMeasure(tuple(a for a in atoms if a[1] > 0))

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "delta_prime": self.delta_prime,
            "pairings": [
                {"kind": p.kind,
                 "members": [[k, [v.real, v.imag]] if k == "zero" else [k, v]
                             for k, v in p.members],
                 "discs": [[[c.real, c.imag], r] for c, r in p.discs],
                 "slits": [_slit_dict(s) for s in p.slits],
                 "gap_index": p.gap_index}
                for p in self.pairings
            ],
            "component_slits": {
                str(idx): [_slit_dict(s) for s in slits]
                for idx, slits in self.component_slits.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _slit_dict(s: Slit) -> dict:
    return {"kind": s.kind, "segments": [list(map(list, seg))
                                         for seg in s.segments],
            "altitude": s.altitude, "rank": s.rank,
            "origin": [s.origin.real, s.origin.imag], "owner": s.owner}


def build_slit_system(deco: CarlesonDecomposition, q: BlaschkeProduct,
                      pair: CoronaPair) -> SlitSystem:
    """Pair all objects and construct every slit, with geometric checks."""
    pairings = classify_and_pair(deco, q, pair)
    component_slits = {}
    for comp in deco.components:
        component_slits[comp.index] = tuple(
            build_slits(comp, deco, pair.delta_prime))
    return SlitSystem(tuple(pairings), component_slits, deco,
                      pair.delta_prime)


def _pseudo_hyperbolic_to_samples(z: complex, samples) -> float:
    """min over sample points w of |z - w| / |z - conj(w)|."""
    if not len(samples):
        return math.inf
    w = np.asarray(samples, dtype=complex)
    return float(np.min(np.abs(z - w) / np.abs(z - np.conj(w))))


def component_boundary_samples(comp: Component, n_per_segment: int = 24):
    pts = []
    for (x0, y0), (x1, y1) in comp.boundary_segments():
        ts = np.linspace(0.0, 1.0, n_per_segment)
        pts.extend((x0 + ts * (x1 - x0)) + 1j * np.maximum(
            y0 + ts * (y1 - y0), 1e-12))
    return np.array(pts)


def neighborhood_census(z: complex, system: SlitSystem) -> dict:
    """Counts of cut neighborhoods containing z, per family.

    Returns per-rank counts of slits with dist(z, S) < delta'/100, the
    number of components whose pseudo-hyperbolic boundary neighborhood
    contains z, and the number of discs whose annular neighborhood
    (|z - center| < 2 * radius) contains z.
    """
    z = complex(z)
    r = system.radius
    per_rank = {}
    for s in system.all_slits():
        if s.distance_to_point(z) < r:
            per_rank[s.rank] = per_rank.get(s.rank, 0) + 1
    comp_count = 0
    for comp in system.decomposition.components:
        samples = component_boundary_samples(comp)
        if _pseudo_hyperbolic_to_samples(z, samples) < 2.2 * r:
            comp_count += 1
    disc_count = 0
    for center, radius in system.all_discs():
        if abs(z - center) < 2.0 * radius:
            disc_count += 1
    return {"slits_per_rank": per_rank, "components": comp_count,
            "discs": disc_count}
