"""Grid fields, branch-tracked logarithms, mollification, Wirtinger calculus.

The correcting field is a finite sum of summands, one per pairing: each
is the branch-tracked logarithm of the pairing's Blaschke sub-product,
zeroed inside the pairing's discs and regions, smoothed in a small
neighborhood of the cut geometry.  Branches are chosen with zero
imaginary part on the axis above the geometry; symmetry is enforced
exactly by mirroring the right half-grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .blaschke import BlaschkeProduct
from .errors import ConsistencyError, GeometryError, GridError
from .slits import SlitSystem, _segment_distance_arr

TWO_PI = 2.0 * math.pi


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, TWO_PI)


# ---------------------------------------------------------------------------
# grids and fields


@dataclass(frozen=True)
class Grid:
    """Rectangular grid over [-X, X] x (0, Y], reflection-closed in x."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if not np.allclose(self.x, -self.x[::-1], rtol=0, atol=0):
            raise GeometryError("grid is not reflection-closed about the axis")

    @cached_property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @cached_property
    def hy(self) -> float:
        return float(self.y[1] - self.y[0])

    @cached_property
    def shape(self):
        return (len(self.y), len(self.x))

    @cached_property
    def X(self):
        return np.broadcast_to(self.x[None, :], self.shape)

    @cached_property
    def Y(self):
        return np.broadcast_to(self.y[:, None], self.shape)

    @cached_property
    def Z(self):
        return self.X + 1j * self.Y

    @cached_property
    def axis_column(self) -> int:
        return int(np.argmin(np.abs(self.x)))

    def cell_area(self) -> float:
        return self.hx * self.hy


def make_grid(half_width: float, resolution: int, height: float | None = None) -> Grid:
    """Grid with resolution+1 columns over [-W, W] (axis column included)
    and resolution rows over (0, H]."""
    if height is None:
        height = half_width
    x = np.linspace(-half_width, half_width, resolution + 1)
    x = 0.5 * (x - x[::-1])          # exact reflection closure
    y = np.linspace(height / resolution, height, resolution)
    return Grid(x, y)


@dataclass
class GridField:
    """Complex samples on a grid, with an optional defined-mask."""

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None       # True where defined

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GeometryError("value array does not match the grid")
        if self.mask is None:
            finite = np.isfinite(self.values.real) & np.isfinite(self.values.imag)
            if not finite.all():
                raise GeometryError("non-finite values in an unmasked field")

    def reflected_values(self) -> np.ndarray:
        """conj(F(-conj z)) sampled on the same grid."""
        return np.conj(self.values[:, ::-1])

    def symmetrize(self) -> "GridField":
        return GridField(self.grid, 0.5 * (self.values + self.reflected_values()),
                         None if self.mask is None else
                         self.mask & self.mask[:, ::-1])

    def symmetry_defect(self) -> float:
        d = np.abs(self.values - self.reflected_values())
        if self.mask is not None:
            d = d[self.mask & self.mask[:, ::-1]]
        return float(d.max()) if d.size else 0.0

    def interp(self, z):
        """Bilinear interpolation at complex points (clamped to the grid)."""
        z = np.asarray(z, dtype=complex)
        g = self.grid
        fx = np.clip((z.real - g.x[0]) / g.hx, 0, len(g.x) - 1 - 1e-12)
        fy = np.clip((z.imag - g.y[0]) / g.hy, 0, len(g.y) - 1 - 1e-12)
        ix = fx.astype(int)
        iy = fy.astype(int)
        tx = fx - ix
        ty = fy - iy
        v = self.values
        out = ((1 - tx) * (1 - ty) * v[iy, ix] + tx * (1 - ty) * v[iy, ix + 1]
               + (1 - tx) * ty * v[iy + 1, ix] + tx * ty * v[iy + 1, ix + 1])
        return out if out.ndim else complex(out)

    def copy_with(self, values) -> "GridField":
        return GridField(self.grid, values, self.mask)


def assemble_v(summands, grid: Grid | None = None) -> GridField:
    """Nodewise sum of summand fields on one shared grid."""
    if not summands:
        if grid is None:
            raise ValueError("no summands and no grid to build a zero field on")
        return zero_field(grid)
    base = summands[0].grid
    total = np.zeros(base.shape, dtype=complex)
    for f in summands:
        if f.grid is not base and (f.grid.shape != base.shape
                                   or not np.array_equal(f.grid.x, base.x)
                                   or not np.array_equal(f.grid.y, base.y)):
            raise GeometryError("summand grids do not match")
        total = total + f.values
    return GridField(base, total)


def zero_field(grid: Grid) -> GridField:
    return GridField(grid, np.zeros(grid.shape, dtype=complex))


# ---------------------------------------------------------------------------
# Wirtinger calculus


def field_calculus(F: GridField) -> dict:
    """Central second-order d, dbar, and Laplacian of a smooth field.

    Boundary nodes use one-sided second-order differences.  Masked input
    nodes propagate to masked output (the full stencil must be defined).
    """
    g = F.grid
    v = F.values
    vx = np.gradient(v, g.x, axis=1, edge_order=2)
    vy = np.gradient(v, g.y, axis=0, edge_order=2)
    d = 0.5 * (vx - 1j * vy)
    dbar = 0.5 * (vx + 1j * vy)
    vxx = np.gradient(vx, g.x, axis=1, edge_order=2)
    vyy = np.gradient(vy, g.y, axis=0, edge_order=2)
    lap = vxx + vyy
    mask = None
    if F.mask is not None:
        mask = ndimage.binary_erosion(F.mask, iterations=2, border_value=1)
    return {
        "d": GridField(g, d, mask),
        "dbar": GridField(g, dbar, mask),
        "lap": GridField(g, lap, mask),
    }


def dagger(F: GridField) -> GridField:
    """The symmetry companion z -> conj(F(-conj z)).

    The chain rule gives dbar(dagger F) = -dagger(dbar F): unlike the
    disc reflection z -> conj z, the half-plane one z -> -conj z flips
    the orientation of dz, so symmetric fields have anti-symmetric dbar
    data (which is exactly why symmetrizing a solution of dbar v = dbar V
    preserves the equation when V is symmetric).
    """
    return GridField(F.grid, F.reflected_values(),
                     None if F.mask is None else F.mask[:, ::-1])


# ---------------------------------------------------------------------------
# branch unwrapping on a masked grid


def _segment_zero_rate(zeros, z0: complex, z1: complex) -> float:
    """Upper bound for |grad arg(prod)| on the segment.

    Each factor pair contributes |1/(z-a) - 1/(z-conj a)| =
    2 Im a / (|z-a| |z-conj a|) <= 2 Im a / dist(segment, a)^2.
    """
    if not len(zeros):
        return 0.0
    a = np.asarray(zeros)
    d = z1 - z0
    den = (d * np.conj(d)).real
    if den == 0.0:
        dist = np.abs(a - z0)
    else:
        t = np.clip(((a - z0) * np.conj(d)).real / den, 0.0, 1.0)
        dist = np.abs(a - (z0 + t * d))
    dist = np.maximum(dist, 1e-300)
    return float(np.sum(2.0 * a.imag / dist ** 2))


def _refined_delta(prod, zeros, z0: complex, z1: complex,
                   depth: int = 0) -> float:
    """Argument increment of prod from z0 to z1, alias-free.

    The step is accepted only when its length times the rigorous
    gradient bound stays below 0.9 (then the true increment is under pi
    and the wrapped difference is exact); otherwise it is bisected.
    """
    length = abs(z1 - z0)
    if depth >= 48 or length * _segment_zero_rate(zeros, z0, z1) <= 0.9:
        return float(wrap_angle(np.angle(prod(z1)) - np.angle(prod(z0))))
    zm = 0.5 * (z0 + z1)
    return (_refined_delta(prod, zeros, z0, zm, depth + 1)
            + _refined_delta(prod, zeros, zm, z1, depth + 1))


def _edge_segment_bounds(zeros, Z0, Z1):
    """Vectorized segment rate bound times length, per edge."""
    lengths = np.abs(Z1 - Z0)
    if not len(zeros):
        return np.zeros(Z0.shape)
    total = np.zeros(Z0.shape)
    d = Z1 - Z0
    den = (d * np.conj(d)).real
    den = np.where(den == 0.0, 1.0, den)
    with np.errstate(divide="ignore", over="ignore"):
        for a in zeros:
            t = np.clip(((a - Z0) * np.conj(d)).real / den, 0.0, 1.0)
            dist = np.abs(a - (Z0 + t * d))
            total += 2.0 * a.imag / dist ** 2
    return lengths * total


def edge_deltas(theta: np.ndarray, Z: np.ndarray, prod, zeros):
    """Alias-free argument increments along all grid edges.

    Returns (dh, dv): dh[iy, ix] is the increment from (iy, ix) to
    (iy, ix+1), dv from (iy, ix) to (iy+1, ix).  Edges where the length
    times the rigorous rate bound reaches pi are re-measured by uniform
    subdivision fine enough that every substep is below 0.9 radians.
    """
    out = []
    for axis in (1, 0):
        if axis == 1:
            Z0, Z1 = Z[:, :-1], Z[:, 1:]
            base = wrap_angle(theta[:, 1:] - theta[:, :-1])
        else:
            Z0, Z1 = Z[:-1, :], Z[1:, :]
            base = wrap_angle(theta[1:, :] - theta[:-1, :])
        if prod is not None and len(zeros):
            bounds = _edge_segment_bounds(zeros, Z0, Z1)
            flagged = bounds > 2.9
            if flagged.any():
                z0f = Z0[flagged]
                z1f = Z1[flagged]
                # edges through a zero give an infinite bound; they are
                # interior to the blocked raster and never consumed
                levels = np.clip(np.log2(np.clip(bounds[flagged] / 0.85,
                                                 2.0, 2.0 ** 14)), 1, 14)
                nsub = 2 ** np.ceil(levels).astype(int)
                refined = np.empty(z0f.shape)
                for n in np.unique(nsub):
                    sel = np.flatnonzero(nsub == n)
                    ts = np.arange(n + 1) / n
                    chunk = max(1, 200000 // (n + 1))
                    for k0 in range(0, len(sel), chunk):
                        idx = sel[k0: k0 + chunk]
                        pts = z0f[idx, None] + ts[None, :] * (
                            z1f[idx] - z0f[idx])[:, None]
                        ang = np.angle(prod(pts))
                        refined[idx] = wrap_angle(
                            np.diff(ang, axis=1)).sum(axis=1)
                vals = base.copy()
                vals[flagged] = refined
                out.append(vals)
                continue
        out.append(base)
    return out[0], out[1]


def unwrap_field(theta: np.ndarray, blocked: np.ndarray, anchor,
                 dh: np.ndarray | None = None, dv: np.ndarray | None = None,
                 max_passes: int = 64):
    """Continuous argument on the unblocked cells, seeded at the anchor.

    Rows are swept away from the anchor; each contiguous unblocked run is
    integrated from the per-edge increments (``dh`` horizontal, ``dv``
    vertical, from :func:`edge_deltas`; plain wrapped differences when
    omitted) and shifted to match its first seeded cell: a cell already
    done, or a vertical neighbor in a processed row.  Returns (U, done).
    """
    ny, nx = theta.shape
    U = np.zeros_like(theta)
    done = np.zeros(theta.shape, dtype=bool)
    open_ = ~blocked
    ai, aj = anchor
    if not open_[ai, aj]:
        raise GeometryError("anchor cell is blocked")
    if dh is None:
        dh = wrap_angle(theta[:, 1:] - theta[:, :-1])
    if dv is None:
        dv = wrap_angle(theta[1:, :] - theta[:-1, :])

    def unwrap_run(iy, a, b, j0, val0):
        if b - a == 1:
            U[iy, a] = val0
            done[iy, a] = True
            return
        u = np.concatenate(([0.0], np.cumsum(dh[iy, a:b - 1])))
        u += val0 - u[j0 - a]
        U[iy, a:b] = u
        done[iy, a:b] = True

    def runs(row_open):
        idx = np.flatnonzero(row_open)
        if idx.size == 0:
            return []
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [idx.size - 1]))
        return [(int(idx[s]), int(idx[e]) + 1) for s, e in zip(starts, ends)]

    row_runs = [runs(open_[iy]) for iy in range(ny)]

    def vertical_seed(iy, src, j):
        if iy == src + 1:
            return U[src, j] + dv[src, j]
        return U[src, j] - dv[iy, j]

    def row_pass(order):
        changed = False
        for iy in order:
            for a, b in row_runs[iy]:
                if done[iy, a:b].all():
                    continue
                own = np.flatnonzero(done[iy, a:b])
                if own.size:
                    j0 = a + int(own[0])
                    unwrap_run(iy, a, b, j0, U[iy, j0])
                    changed = True
                    continue
                seeded = False
                for src in (iy - 1, iy + 1):
                    if not (0 <= src < ny):
                        continue
                    cand = np.flatnonzero(done[src, a:b] & open_[src, a:b])
                    if cand.size:
                        j0 = a + int(cand[0])
                        unwrap_run(iy, a, b, j0, vertical_seed(iy, src, j0))
                        changed = True
                        seeded = True
                        break
                if seeded:
                    continue
        return changed

    # seed the anchor's own run first
    for a, b in row_runs[ai]:
        if a <= aj < b:
            unwrap_run(ai, a, b, aj, float(theta[ai, aj]))
            break

    for _ in range(max_passes):
        c1 = row_pass(range(ai, ny))
        c2 = row_pass(range(ai - 1, -1, -1))
        c3 = row_pass(range(ny - 1, -1, -1))
        if not (c1 or c2 or c3):
            break

    return U, done


def seam_defect(U, done, dh, dv) -> float:
    """Largest branch inconsistency across adjacent unwrapped cells.

    The sweep integrates the alias-free edge increments along a spanning
    tree; a genuine winding around an unblocked loop shows up as a 2 pi
    mismatch against the same increments across some non-tree edge.
    """
    both_h = done[:, :-1] & done[:, 1:]
    defect_h = np.where(both_h, np.abs(U[:, 1:] - U[:, :-1] - dh), 0.0)
    both_v = done[:-1, :] & done[1:, :]
    defect_v = np.where(both_v, np.abs(U[1:, :] - U[:-1, :] - dv), 0.0)
    return float(max(defect_h.max(initial=0.0), defect_v.max(initial=0.0)))


def fill_undefined(values: np.ndarray, defined: np.ndarray,
                   passes: int = 8) -> np.ndarray:
    """Fill undefined cells by repeated 4-neighbor averaging."""
    v = np.where(defined, values, 0.0 + 0.0j)
    filled = defined.copy()
    kernel = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    for _ in range(passes):
        if filled.all():
            break
        num = ndimage.convolve(v, kernel, mode="constant")
        den = ndimage.convolve(filled.astype(float), kernel, mode="constant")
        newly = (den > 0) & ~filled
        v[newly] = num[newly] / den[newly]
        filled |= newly
    return v


# ---------------------------------------------------------------------------
# summand specifications


@dataclass(frozen=True)
class SummandSpec:
    """Everything a correcting-field summand needs from the geometry.

    The interior set (discs and dilated regions) is where the field is
    zero; the cut set (circles, slits, connectors, region boundaries) is
    where branches jump and mollification happens.
    """

    kind: str
    product: BlaschkeProduct
    discs: tuple = ()            # ((center, radius), ...)
    components: tuple = ()       # Component instances
    slits: tuple = ()            # Slit instances (incl. connectors)
    delta_prime: float = 0.0

    def label(self) -> str:
        if self.components:
            ids = ",".join(str(c.index) for c in self.components)
            return f"{self.kind}[{ids}]"
        zs = ",".join(f"{a:.3g}" for a, _ in self.discs)
        return f"{self.kind}[{zs}]"


def summand_specs(system: SlitSystem) -> list:
    """One spec per pairing, with its product and full cut inventory."""
    deco = system.decomposition
    specs = []
    for p in system.pairings:
        zeros = list(p.zero_members())
        comps = tuple(deco.components[i] for i in p.component_indices())
        for c in comps:
            zeros.extend(c.zeros)
        slits = list(p.slits)
        for c in comps:
            slits.extend(system.component_slits.get(c.index, ()))
        product = BlaschkeProduct(tuple(sorted(zeros,
                                               key=lambda a: (a.imag, a.real))))
        if not product.is_symmetric():
            raise ConsistencyError(
                f"summand product for {p.kind} is not symmetric")
        specs.append(SummandSpec(p.kind, product, tuple(p.discs), comps,
                                 tuple(slits), system.delta_prime))
    return specs


def _raster_segments(grid: Grid, slits, pad: float):
    out = np.zeros(grid.shape, dtype=bool)
    for s in slits:
        out |= s.distance_to_points(grid.X, grid.Y) <= pad
    return out


def _raster_circles(grid: Grid, discs, pad: float, floor: float):
    # sub-cell discs are widened to the resolvable mollification scale so
    # the flat interior (and hence the measured field extrema) do not
    # depend on the grid step
    curve = np.zeros(grid.shape, dtype=bool)
    inside = np.zeros(grid.shape, dtype=bool)
    for center, radius in discs:
        r_eff = max(radius, 0.5 * floor, 1.2 * max(grid.hx, grid.hy))
        dist = np.abs(grid.Z - center)
        curve |= np.abs(dist - r_eff) <= pad
        inside |= dist <= r_eff
    return curve, inside


def _region_mask_effective(r, grid: Grid):
    """Comb raster with sub-cell slots absorbed into the region.

    Child slots narrower than two cells cannot be represented on the
    grid (nor can their slits); those columns are filled down to the
    real axis so the raster seals every winding path the true slits
    would block.
    """
    lo, hi = r.base
    ell = r.length
    inside = (grid.X >= lo) & (grid.X <= hi) & (grid.Y <= ell) & (grid.Y > 0)
    if not r.children:
        return inside
    min_width = 2.0 * max(grid.hx, grid.hy)
    edges = np.array([c[0] for c in r.children] + [r.children[-1][1]])
    heights = np.array([
        (c[1] - c[0]) if (c[1] - c[0]) >= min_width else 0.0
        for c in r.children])
    idx = np.clip(np.searchsorted(edges, grid.X, side="right") - 1, 0,
                  len(heights) - 1)
    return inside & (grid.Y >= heights[idx])


def _raster_regions(grid: Grid, components, delta_prime: float, pad: float,
                    floor: float):
    boundary = np.zeros(grid.shape, dtype=bool)
    inside = np.zeros(grid.shape, dtype=bool)
    for comp in components:
        for r in comp.regions:
            inside |= _region_mask_effective(r, grid)
        for (x0, y0), (x1, y1) in comp.boundary_segments():
            boundary |= _segment_distance_arr(grid.X, grid.Y, x0, y0, x1,
                                              y1) <= pad
    if components:
        # pseudo-hyperbolic dilation, approximated by 2 r Im z in euclid
        # terms, floored to the resolvable scale
        dist_b = ndimage.distance_transform_edt(
            ~boundary, sampling=(grid.hy, grid.hx))
        inside |= dist_b <= np.maximum((delta_prime / 50.0) * grid.Y,
                                       0.5 * floor)
        # the raster edge of the effective comb is cut geometry as well
        boundary |= inside & ~ndimage.binary_erosion(inside, border_value=1)
    return boundary, inside


def summand_masks(spec: SummandSpec, grid: Grid, floor: float | None = None):
    """Interior, blocked, and mollification-band masks for one summand."""
    dp = spec.delta_prime
    pad = 0.75 * max(grid.hx, grid.hy)
    if floor is None:
        floor = 4.0 * max(grid.hx, grid.hy)

    slit_raster = _raster_segments(grid, spec.slits, pad)
    circle_raster, disc_inside = _raster_circles(grid, spec.discs, pad, floor)
    region_boundary, region_inside = _raster_regions(
        grid, spec.components, dp, pad, floor)

    interior = disc_inside | region_inside
    blocked = interior | slit_raster | circle_raster | region_boundary

    sampling = (grid.hy, grid.hx)
    band = np.zeros(grid.shape, dtype=bool)
    if slit_raster.any():
        d = ndimage.distance_transform_edt(~slit_raster, sampling=sampling)
        band |= d <= max(dp / 100.0, floor)
    if circle_raster.any():
        d = ndimage.distance_transform_edt(~circle_raster, sampling=sampling)
        min_im = min((c.imag for c, _ in spec.discs), default=1.0)
        band |= d <= max(dp / 100.0 * min_im, floor)
    if region_boundary.any():
        d = ndimage.distance_transform_edt(~region_boundary, sampling=sampling)
        band |= d <= np.maximum((dp / 50.0) * grid.Y, floor)

    conv_radius = max(floor, dp / 100.0)
    return {"interior": interior, "blocked": blocked, "band": band,
            "conv_radius": conv_radius, "floor": floor}


def summand_phi(spec: SummandSpec, grid: Grid, floor: float | None = None):
    """Raw branch-tracked field of one summand: 0 inside, log(product) outside.

    The branch is anchored at the top of the axis column, where the
    product is close to 1, so the imaginary part vanishes on the axis
    above (and, for paired geometry, below) the cut set.  The field is
    made exactly symmetric by mirroring the right half.  Returns
    ``(field, info)`` where info carries the masks and branch record.

    Raises :class:`GeometryError` when a winding inconsistency is
    detected around the cut complement.
    """
    masks = summand_masks(spec, grid, floor)
    P = spec.product(grid.Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        logmod = np.log(np.abs(P))
    theta = np.angle(P)
    dh, dv = edge_deltas(theta, grid.Z, spec.product, spec.product.zeros)

    blocked = masks["blocked"]
    ai = len(grid.y) - 1
    aj = grid.axis_column
    if blocked[ai, aj]:
        raise GridError("grid too small: geometry reaches the top row")
    U, done = unwrap_field(theta, blocked, (ai, aj), dh, dv)
    # cut-off complement pockets (e.g. sealed under an L-slit) carry
    # their own branch, anchored at the principal argument
    pockets = (~blocked) & (~done)
    if pockets.any():
        labels, n_pockets = ndimage.label(
            pockets, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
        for pid in range(1, n_pockets + 1):
            cells = labels == pid
            ys, xs_ = np.nonzero(cells)
            order = np.lexsort((np.abs(xs_ - aj), -ys))
            anchor = (int(ys[order[0]]), int(xs_[order[0]]))
            U2, done2 = unwrap_field(theta, ~cells, anchor, dh, dv)
            U = np.where(done2, U2, U)
            done |= done2
    defect = seam_defect(U, done, dh, dv)
    if defect > 1e-6:
        raise GeometryError(
            f"branch continuity failure (winding defect {defect:.3g}) "
            f"for summand {spec.label()}")

    values = np.where(done, logmod + 1j * U, 0.0 + 0.0j)
    defined = done.copy()
    interior = masks["interior"]
    values = np.where(interior, 0.0 + 0.0j, values)
    defined |= interior
    values = fill_undefined(values, defined)
    values[~np.isfinite(values)] = 0.0

    # exact symmetry: mirror the right half onto the left, real axis column
    nx = len(grid.x)
    mid = grid.axis_column
    right = values[:, mid:]
    values = np.concatenate([np.conj(right[:, ::-1])[:, : nx - mid - 1],
                             right], axis=1)
    values[:, mid] = values[:, mid].real

    branch = {
        "anchor": (ai, aj),
        "anchor_value": complex(values[ai, aj]),
        "turns_span": (float((U - theta)[done].min() / TWO_PI)
                       if done.any() else 0.0,
                       float((U - theta)[done].max() / TWO_PI)
                       if done.any() else 0.0),
        "alignment": complex(np.exp(1j * float(values[ai, aj].imag))),
        "seam_defect": defect,
    }
    info = dict(masks)
    info["branch"] = branch
    info["spec"] = spec
    return GridField(grid, values), info


def _bump_kernel(grid: Grid, radius: float) -> np.ndarray:
    rx = max(radius / grid.hx, 1.51)
    ry = max(radius / grid.hy, 1.51)
    nx = int(math.ceil(rx))
    ny = int(math.ceil(ry))
    ox = np.arange(-nx, nx + 1)
    oy = np.arange(-ny, ny + 1)
    R2 = (ox[None, :] / rx) ** 2 + (oy[:, None] / ry) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        w = np.where(R2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - R2, 1e-12)), 0.0)
    return w / w.sum()


def mollify(phi: GridField, info: dict) -> GridField:
    """Smooth the raw field inside the cut band, leave it untouched outside.

    The kernel is a normalized radial bump; since log of the product is
    harmonic away from the cuts, convolution reproduces the field there
    and the output matches the raw field exactly off the band.
    """
    grid = phi.grid
    band = info["band"]
    if not band.any():
        return phi.copy_with(phi.values.copy())
    kernel = _bump_kernel(grid, info["conv_radius"])
    smooth = ndimage.convolve(phi.values.real, kernel, mode="nearest") \
        + 1j * ndimage.convolve(phi.values.imag, kernel, mode="nearest")
    out = np.where(band, smooth, phi.values)
    # exact symmetry again (convolution preserves it up to rounding)
    nx = len(grid.x)
    mid = grid.axis_column
    right = out[:, mid:]
    out = np.concatenate([np.conj(right[:, ::-1])[:, : nx - mid - 1], right],
                         axis=1)
    out[:, mid] = out[:, mid].real
    return GridField(grid, out)


def build_summand_field(spec: SummandSpec, grid: Grid,
                        floor: float | None = None):
    """phi -> mollified summand, with measured derivative certificates."""
    phi, info = summand_phi(spec, grid, floor)
    V = mollify(phi, info)
    calc = field_calculus(V)
    band = info["band"]
    scale = _family_scale(spec)
    cert = {}
    if band.any():
        dbar_max = float(np.abs(calc["dbar"].values[band]).max())
        lap_max = float(np.abs(calc["lap"].values[band]).max())
        cert = {
            "sup_dbar_scaled": dbar_max * scale,
            "sup_lap_scaled": lap_max * scale * scale,
            "scale": scale,
        }
    info["certificates"] = cert
    info["phi"] = phi
    return V, info


def _family_scale(spec: SummandSpec) -> float:
    if spec.discs:
        return min(c.imag for c, _ in spec.discs)
    spans = [r.length for comp in spec.components for r in comp.regions]
    return min(spans) if spans else 1.0


# ---------------------------------------------------------------------------
# branch-tracked log of the data product on the sublevel set


def sublevel_log_branch(pfun, p_zeros, q, delta_prime: float, grid: Grid):
    """Branch of log(p~) per connected component of {|q| < delta_prime}.

    Components touching the imaginary axis are anchored with zero
    imaginary part there (possible exactly when the sign condition
    holds); others are anchored at their highest cell with the principal
    argument.  Mirror components receive the reflected branch, so the
    result is exactly symmetric.  Returns (field, records).
    """
    Qv = np.abs(q(grid.Z))
    Qv = 0.5 * (Qv + Qv[:, ::-1])            # exactly symmetric sublevel mask
    mask = Qv < delta_prime
    Pv = pfun(grid.Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        logmod = np.log(np.abs(Pv))
    theta = np.angle(Pv)
    dh, dv = edge_deltas(theta, grid.Z, pfun, p_zeros)
    values = np.full(grid.shape, np.nan + 0j, dtype=complex)
    labels, n = ndimage.label(mask, structure=np.array([[0, 1, 0],
                                                        [1, 1, 1],
                                                        [0, 1, 0]]))
    records = []
    mid = grid.axis_column
    handled = np.zeros(n + 1, dtype=bool)
    for comp_id in range(1, n + 1):
        if handled[comp_id]:
            continue
        cells = labels == comp_id
        cols = np.any(cells, axis=0)
        touches_axis = bool(cols[mid])
        ys, xs = np.nonzero(cells)
        if touches_axis:
            rows_axis = np.nonzero(cells[:, mid])[0]
            anchor = (int(rows_axis[-1]), mid)
        else:
            k = int(np.argmax(ys))
            anchor = (int(ys[k]), int(xs[k]))
        U, done = unwrap_field(theta, ~cells, anchor, dh, dv)
        shift = TWO_PI * np.round(
            (U[anchor] - (0.0 if touches_axis else theta[anchor])) / TWO_PI)
        U = U - shift
        vals = logmod + 1j * U
        values[cells & done] = vals[cells & done]
        handled[comp_id] = True
        records.append({"component": comp_id, "anchor": anchor,
                        "touches_axis": touches_axis,
                        "turns": float(shift / TWO_PI),
                        "alignment": complex(np.exp(-1j * float(shift)))})
        # the mirror component gets the conjugate-reflected branch
        mirror_cells = cells[:, ::-1]
        mirror_ids = np.unique(labels[mirror_cells])
        mirror_ids = [int(m) for m in mirror_ids if m > 0 and m != comp_id]
        for m in mirror_ids:
            if not handled[m]:
                mcells = labels == m
                values[mcells] = np.conj(values[:, ::-1])[mcells]
                handled[m] = True
                records.append({"component": m, "anchor": None,
                                "touches_axis": False, "turns": None,
                                "alignment": None, "mirror_of": comp_id})
    out_mask = mask & np.isfinite(values.real)
    values[~out_mask] = 0.0
    return GridField(grid, values, out_mask), records


def pointwise_log(pfun, zeros, z: complex, step: float) -> complex:
    """Branch value of log(p~) at z, continued from the axis at height Im z.

    The walk runs horizontally from i Im z to z with adaptive argument
    tracking; the start value is real when p~ is positive there and
    +/- pi (matching the walk side) when negative.  If a zero of the
    product obstructs the path the whole walk is shifted upward by one
    step until clear.  Mirror points receive conjugate values.
    """
    z = complex(z)
    if z.real == 0.0:
        v = complex(pfun(z))
        if v.real <= 0:
            raise ConsistencyError(
                f"axis point {z} has non-positive product value {v}")
        return complex(math.log(abs(v)), 0.0)

    y0 = z.imag
    for attempt in range(64):
        yw = y0 + attempt * step
        clear = True
        for a in zeros:
            if abs(a.imag - yw) < 0.75 * step and (
                    min(0.0, z.real) - step <= a.real <= max(0.0, z.real) + step):
                clear = False
                break
            if abs(a.real - z.real) < 0.75 * step and (
                    min(yw, z.imag) - step <= a.imag <= max(yw, z.imag) + step):
                clear = False
                break
        if clear:
            break
    else:
        raise ConsistencyError(f"no clear walk path to {z}")

    start = 1j * yw
    v0 = complex(pfun(start))
    if v0.real > 0:
        arg = 0.0
    else:
        arg = math.pi if z.real > 0 else -math.pi

    def walk(z0, z1):
        n = max(1, int(math.ceil(abs(z1 - z0) / step)))
        total = 0.0
        for k in range(n):
            a0 = z0 + (z1 - z0) * k / n
            a1 = z0 + (z1 - z0) * (k + 1) / n
            total += _refined_delta(pfun, zeros, a0, a1)
        return total

    corner = complex(z.real, yw)
    arg += walk(start, corner)
    if yw != z.imag:
        arg += walk(corner, z)
    return complex(math.log(abs(complex(pfun(z)))), arg)
