"""End-to-end construction of the invertible corona solution.

Given validated data (f1, f2, epsilon), the pipeline measures delta,
screens the sign condition, builds the decomposition and slit system,
constructs the correcting field V, solves dbar v = dbar V, forms the
analytic correction kappa = V - v, interpolates the corrected logarithm
at the zeros of f2 by a Pick-matrix norm search, and assembles

    g1 = exp(-(kappa + h)),   g2 = (e^h - f1 e^(-kappa)) e^(-h) / f2,

so that f1 g1 + f2 g2 = 1 identically with g1 zero-free.  An
independent polynomial Bezout oracle certifies unimodularity.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import fields as flds
from .blaschke import (
    BlaschkeProduct,
    CoronaPair,
    SignConditionResult,
    axis_sign_condition,
    corona_delta_details,
    to_disc,
)
from .carleson import (
    PointMassMeasure,
    build_generations,
    carleson_intensity,
    grid_carleson_intensity,
    region_boundary_length,
    verify_stopping_properties,
)
from .dbar import make_kappa, solve_dbar, verify_dbar
from .errors import (
    ConsistencyError,
    ConstructionError,
    InterpolationError,
    NotUnimodularError,
    SignConditionError,
)
from .fields import (
    Grid,
    GridField,
    assemble_v,
    build_summand_field,
    field_calculus,
    make_grid,
    pointwise_log,
    sublevel_log_branch,
    summand_specs,
)
from .slits import build_slit_system

DEFAULT_TOLERANCES = {
    "residual": 1e-6,
    "dbar_residual": 1e-3,
    "analyticity": 1e-2,
    "interp_node": 1e-8,
    "numerator_vanish": 1e-6,
}


def check_necessity(f1: BlaschkeProduct, f2: BlaschkeProduct,
                    epsilon: float) -> SignConditionResult:
    """Screen the single-sign condition; a violation is a value, not an error."""
    return axis_sign_condition(f1, f2, epsilon)


# ---------------------------------------------------------------------------
# bounded symmetric interpolation at the zeros of f2


@dataclass(frozen=True)
class InterpolationProblem:
    """Nodes (zeros of f2, reflection-closed), symmetric targets, level gamma."""

    nodes: tuple
    targets: tuple
    gamma: float

    def __post_init__(self):
        if len(self.nodes) != len(self.targets):
            raise ValueError("nodes and targets must have equal length")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        idx = {z: k for k, z in enumerate(self.nodes)}
        for k, z in enumerate(self.nodes):
            for j in range(k + 1, len(self.nodes)):
                if abs(z - self.nodes[j]) < 1e-12 * max(1.0, abs(z)):
                    raise ValueError(f"repeated node {z}")
            m = -z.conjugate()
            if m not in idx:
                raise ValueError(f"node set is not reflection-closed at {z}")
            w = self.targets[k]
            wm = self.targets[idx[m]]
            if abs(wm - w.conjugate()) > 1e-9 * max(1.0, abs(w)):
                raise ValueError(f"target symmetry fails at node {z}")
            if z.real == 0.0 and abs(w.imag) > 1e-9 * max(1.0, abs(w)):
                raise ValueError(f"axis-node target at {z} is not real")


def _pick_matrix(nodes, targets, rho: float) -> np.ndarray:
    z = np.asarray(nodes)
    w = np.asarray(targets)
    denom = -1j * (z[:, None] - np.conj(z[None, :]))
    return (rho * rho - w[:, None] * np.conj(w[None, :])) / denom


def _is_psd(P: np.ndarray, tol: float = 1e-11) -> bool:
    ev = np.linalg.eigvalsh(0.5 * (P + P.conj().T))
    scale = max(1.0, float(np.abs(ev).max()))
    return bool(ev.min() >= -tol * scale)


@dataclass
class Interpolant:
    """A bounded symmetric interpolant with its measured norm data."""

    stages: tuple             # ((lambda_k, v_k), ...) Schur chain on the disc
    rho: float                # realized norm bound
    rho_star: float           # Pick-optimal norm from the bisection
    node_defect: float = 0.0

    def _eval_raw(self, z):
        lam = to_disc(np.asarray(z, dtype=complex))
        u = np.zeros_like(lam)
        for lk, vk in reversed(self.stages):
            b = (lam - lk) / (1.0 - np.conj(lk) * lam)
            bu = b * u
            u = (bu + vk) / (1.0 + np.conj(vk) * bu)
        return self.rho * u

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = 0.5 * (self._eval_raw(z) + np.conj(self._eval_raw(-np.conj(z))))
        return out if out.ndim else complex(out)


class _ZeroInterpolant:
    rho = 0.0
    rho_star = 0.0
    node_defect = 0.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        return out if out.ndim else 0.0


def interpolate_symmetric(problem: InterpolationProblem,
                          f2: BlaschkeProduct | None = None) -> Interpolant:
    """Minimal-norm bounded analytic interpolation, then symmetrization.

    The smallest rho with a positive semidefinite Pick matrix is located
    by bisection; the interpolant is realized at 1.01 rho by the
    classical recursive reduction on the disc (free tail parameter zero)
    and then symmetrized, which preserves the nodes because the targets
    are symmetric.  Raises :class:`InterpolationError` when no norm
    below 1e6 is feasible.
    """
    nodes = np.asarray(problem.nodes, dtype=complex)
    targets = np.asarray(problem.targets, dtype=complex)
    n = len(nodes)
    if n == 0 or float(np.abs(targets).max(initial=0.0)) == 0.0:
        return _ZeroInterpolant()

    lo = float(np.abs(targets).max())
    if _is_psd(_pick_matrix(nodes, targets, lo)):
        rho_star = lo
    else:
        hi = lo
        for _ in range(80):
            hi *= 2.0
            if hi > 1e6:
                raise InterpolationError(
                    "no feasible interpolation norm below 1e6")
            if _is_psd(_pick_matrix(nodes, targets, hi)):
                break
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _is_psd(_pick_matrix(nodes, targets, mid)):
                hi = mid
            else:
                lo = mid
        rho_star = hi
    if rho_star > 1e6:
        raise InterpolationError("interpolation norm above 1e6")

    for margin in (1.01, 1.05, 1.25, 2.0):
        rho = rho_star * margin
        try:
            stages = _schur_chain(nodes, targets / rho)
        except InterpolationError:
            continue
        interp = Interpolant(tuple(stages), rho, rho_star)
        defect = max(abs(complex(interp(z)) - complex(w))
                     for z, w in zip(nodes, targets))
        interp.node_defect = float(defect)
        if defect <= 1e-8 * max(1.0, float(np.abs(targets).max())):
            return interp
    raise InterpolationError(
        f"interpolation nodes not matched to tolerance (defect {defect:.3g})")


def _schur_chain(nodes, v):
    """Classical recursive reduction; requires strictly contractive data."""
    lam = to_disc(np.asarray(nodes, dtype=complex))
    cur_nodes = list(lam)
    cur_vals = list(np.asarray(v, dtype=complex))
    stages = []
    while cur_nodes:
        lk = cur_nodes[0]
        vk = cur_vals[0]
        if abs(vk) >= 1.0 - 1e-14:
            raise InterpolationError("reduction target reached the boundary")
        stages.append((lk, vk))
        nxt_nodes, nxt_vals = [], []
        for lj, vj in zip(cur_nodes[1:], cur_vals[1:]):
            b = (lj - lk) / (1.0 - np.conj(lk) * lj)
            t = (vj - vk) / (1.0 - np.conj(vk) * vj)
            nxt_nodes.append(lj)
            nxt_vals.append(t / b)
        cur_nodes, cur_vals = nxt_nodes, nxt_vals
    return stages


# ---------------------------------------------------------------------------
# independent polynomial certificate


def _poly_from_roots(roots):
    p = np.array([1.0 + 0.0j])
    for r in roots:
        p = np.convolve(p, np.array([1.0 + 0.0j, -r]))
    return p


class _LagrangePoly:
    """First-form barycentric interpolant through distinct nodes."""

    def __init__(self, nodes, values):
        self.nodes = np.asarray(nodes, dtype=np.clongdouble)
        self.values = np.asarray(values, dtype=np.clongdouble)
        n = len(self.nodes)
        w = np.ones(n, dtype=np.clongdouble)
        for j in range(n):
            diff = self.nodes[j] - np.delete(self.nodes, j)
            w[j] = 1.0 / np.prod(diff)
        self.weights = w

    def __call__(self, t):
        t = np.asarray(t, dtype=np.clongdouble)
        shape = t.shape
        t = t.ravel()[:, None]
        diff = t - self.nodes[None, :]
        exact = diff == 0
        diff = np.where(exact, 1.0, diff)
        ell = np.prod(diff, axis=1)
        out = ell * np.sum(self.weights * self.values / diff, axis=1)
        hit = exact.any(axis=1)
        if hit.any():
            idx = exact.argmax(axis=1)
            out[hit] = self.values[idx[hit]]
        return out.reshape(shape)


def _prod_eval(roots, t):
    out = np.ones_like(t)
    for r in roots:
        out = out * (t - r)
    return out


def bezout_oracle(f1: BlaschkeProduct, f2: BlaschkeProduct):
    """Rational (u1, u2) with f1 u1 + f2 u2 = 1, by polynomial elimination.

    Writing f_i = N_i / D_i (zero polynomial over reflected-zero
    polynomial), the cofactors A, B with A N1 D2 + B N2 D1 = 1 are the
    unique pair with deg < deg(N2 D1); they are computed by Lagrange
    interpolation of 1/(N1 D2) at the known roots of N2 D1 and vice
    versa (the numerically robust realization of the extended Euclidean
    elimination; coincident roots mean a vanishing resultant, i.e. a
    common zero).  Then u1 = A D1 D2 and u2 = B D1 D2.  Returns (u1, u2)
    as vectorized callables carrying ``certified_residual``, the maximum
    of |f1 u1 + f2 u2 - 1| over a deterministic box evaluated in
    extended precision.
    """
    for a in f1.zeros:
        for b in f2.zeros:
            if abs(a - b) < 1e-12 * max(1.0, abs(a)):
                raise NotUnimodularError(f"common zero at {a}")
    if f1.is_empty:
        return (lambda z: np.ones_like(np.asarray(z, dtype=complex)),
                lambda z: np.zeros_like(np.asarray(z, dtype=complex)))
    if f2.is_empty:
        return (lambda z: np.zeros_like(np.asarray(z, dtype=complex)),
                lambda z: np.ones_like(np.asarray(z, dtype=complex)))

    scale = max(1.0, max(abs(a) for a in f1.zeros + f2.zeros))
    r_n1 = np.array([a / scale for a in f1.zeros], dtype=np.clongdouble)
    r_d1 = np.conj(r_n1)
    r_n2 = np.array([a / scale for a in f2.zeros], dtype=np.clongdouble)
    r_d2 = np.conj(r_n2)
    roots_p1 = np.concatenate([r_n1, r_d2])     # N1 D2
    roots_p2 = np.concatenate([r_n2, r_d1])     # N2 D1

    # A interpolates 1/P1 at the roots of P2, B interpolates 1/P2 at the
    # roots of P1; then A P1 + B P2 - 1 vanishes at 2d points and has
    # degree < 2d, hence vanishes identically
    A = _LagrangePoly(roots_p2, 1.0 / _prod_eval(roots_p1, roots_p2))
    B = _LagrangePoly(roots_p1, 1.0 / _prod_eval(roots_p2, roots_p1))

    def u1(z):
        t = (np.asarray(z, dtype=complex) / scale).astype(np.clongdouble)
        vals = A(t) * _prod_eval(r_d1, t) * _prod_eval(r_d2, t)
        vals = vals.astype(complex)
        return vals if vals.ndim else complex(vals)

    def u2(z):
        t = (np.asarray(z, dtype=complex) / scale).astype(np.clongdouble)
        vals = B(t) * _prod_eval(r_d1, t) * _prod_eval(r_d2, t)
        vals = vals.astype(complex)
        return vals if vals.ndim else complex(vals)

    u1.variable_scale = scale
    u2.variable_scale = scale

    # certified residual of the identity over a deterministic box:
    # f1 u1 + f2 u2 - 1 = A P1 + B P2 - 1.  The true cofactors can swing
    # to 1e20+ between interpolation nodes, so the certificate is
    # evaluated in arbitrary precision; the cancellation is then real,
    # not a rounding artifact.
    ext = 2.0 * max(abs(a) for a in f1.zeros + f2.zeros)
    xs = np.linspace(-ext, ext, 21)
    ys = np.geomspace(ext / 200.0, ext, 20)
    T = ((xs[None, :] + 1j * ys[:, None]) / scale).ravel()
    certified = _certify_identity(roots_p1, roots_p2, T)
    u1.certified_residual = certified
    u2.certified_residual = certified
    return u1, u2


def _certify_identity(roots_p1, roots_p2, points, dps: int = 60) -> float:
    """max |A P1 + B P2 - 1| over the points, in dps-digit arithmetic."""
    import mpmath as mp

    with mp.workdps(dps):
        r1 = [mp.mpc(complex(r)) for r in roots_p1]
        r2 = [mp.mpc(complex(r)) for r in roots_p2]

        def prod_at(roots, t):
            out = mp.mpc(1)
            for r in roots:
                out *= (t - r)
            return out

        def lagrange(nodes, other):
            vals = [1 / prod_at(other, rho) for rho in nodes]
            weights = []
            for j, rho in enumerate(nodes):
                w = mp.mpc(1)
                for k, rk in enumerate(nodes):
                    if k != j:
                        w *= (rho - rk)
                weights.append(1 / w)
            return vals, weights

        v1, w1 = lagrange(r2, r1)      # A at roots of P2
        v2, w2 = lagrange(r1, r2)      # B at roots of P1

        def interp(t, nodes, vals, weights):
            ell = mp.mpc(1)
            acc = mp.mpc(0)
            for rho, v, w in zip(nodes, vals, weights):
                d = t - rho
                if d == 0:
                    return v
                ell *= d
                acc += w * v / d
            return ell * acc

        worst = mp.mpf(0)
        for t in points:
            t = mp.mpc(complex(t))
            r = interp(t, r2, v1, w1) * prod_at(r1, t) \
                + interp(t, r1, v2, w2) * prod_at(r2, t) - 1
            worst = max(worst, abs(r))
        return float(worst)


# ---------------------------------------------------------------------------
# assembly and verification


def _kappa_hat(kappa: GridField):
    def k(z):
        return kappa.interp(z)
    return k


def assemble_solution(f1: BlaschkeProduct, f2: BlaschkeProduct,
                      kappa: GridField, h, sign: int = +1,
                      numerator_tol: float = 1e-6):
    """Build the evaluators g1, g2 and their grid samples.

    g1 = sign * exp(-(kappa + h)) is zero-free by construction; g2 comes
    from the quotient (e^h - p e^(-kappa)) / f2, whose numerator vanishes
    at the zeros of f2 because h interpolates log(p e^(-kappa)) there.
    Grid cells adjacent to the zeros of f2 are filled with the mean of
    their neighbors.  Raises :class:`ConsistencyError` when the
    numerator fails to vanish at a node.
    """
    khat = _kappa_hat(kappa)

    def p_tilde(z):
        return sign * f1(z)

    def g1(z):
        return sign * np.exp(-(khat(z) + h(z)))

    def numerator(z):
        return np.exp(h(z)) - p_tilde(z) * np.exp(-khat(z))

    def g2(z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return numerator(z) * np.exp(-h(z)) / f2(z)

    for zj in f2.zeros:
        nv = abs(complex(numerator(np.asarray(zj))))
        if nv >= numerator_tol:
            raise ConsistencyError(
                f"numerator fails to vanish at zero {zj} of f2 (|num|={nv:.3g})")

    grid = kappa.grid
    Z = grid.Z
    g1_grid = g1(Z)
    if f2.is_empty:
        g2_grid = g2(Z)
        fill = np.zeros(grid.shape, dtype=bool)
    else:
        num_grid = numerator(Z)
        f2_grid = f2(Z)
        fill = np.zeros(grid.shape, dtype=bool)
        r_fill = 1.2 * max(grid.hx, grid.hy)
        for zj in f2.zeros:
            fill |= np.abs(Z - zj) < r_fill
        with np.errstate(divide="ignore", invalid="ignore"):
            G1 = np.where(fill, 0.0, num_grid / np.where(fill, 1.0, f2_grid))
        G1 = flds.fill_undefined(G1, ~fill)
        g2_grid = G1 * np.exp(-h(Z))
    return g1, g2, {"g1_grid": GridField(grid, g1_grid),
                    "g2_grid": GridField(grid, np.asarray(g2_grid)),
                    "fill_mask": fill}


def verify_solution(f1, f2, g1, g2, grid: Grid, rng=None,
                    n_random: int = 10000, exclusion_centers=(),
                    exclusion_radius: float = 0.0) -> dict:
    """Residual and norm report over the grid plus random off-grid points."""
    if rng is None:
        rng = np.random.default_rng(42)
    Z = grid.Z
    pts = [Z.ravel()]
    if n_random:
        xr = rng.uniform(grid.x[0], grid.x[-1], n_random)
        yr = rng.uniform(grid.y[0], grid.y[-1], n_random)
        pts.append(xr + 1j * yr)
    z = np.concatenate(pts)

    keep = np.ones(z.shape, dtype=bool)
    for c in exclusion_centers:
        keep &= np.abs(z - c) > exclusion_radius
    with np.errstate(all="ignore"):
        g1v = np.asarray(g1(z))
        g2v = np.asarray(g2(z))
        res = np.abs(f1(z) * g1v + f2(z) * g2v - 1.0)
    residual = float(res[keep].max())

    sup_g1 = float(np.abs(g1v).max())
    inf_g1 = float(np.abs(g1v).min())
    sup_g2 = float(np.abs(g2v[keep]).max())

    m = len(z) // 2
    zs = z[:m]
    with np.errstate(all="ignore"):
        sym_g1 = float(np.abs(np.asarray(g1(-np.conj(zs)))
                              - np.conj(g1v[:m])).max())
        g2m = np.asarray(g2(-np.conj(zs)))
        pair_keep = keep[:m]
        for c in exclusion_centers:
            pair_keep = pair_keep & (np.abs(-np.conj(zs) - c)
                                     > exclusion_radius)
        diff_g2 = np.abs(g2m - np.conj(g2v[:m]))
    sym_g2 = float(diff_g2[pair_keep].max()) if pair_keep.any() else 0.0

    return {
        "residual": residual,
        "sup_g1": sup_g1,
        "inf_g1": inf_g1,
        "sup_g1_inv": (1.0 / inf_g1) if inf_g1 > 0 else math.inf,
        "sup_g2": sup_g2,
        "symmetry_g1": sym_g1,
        "symmetry_g2": sym_g2,
    }


# ---------------------------------------------------------------------------
# report and orchestration


@dataclass
class StabilizationReport:
    """Everything measured along one pipeline run."""

    delta: float
    epsilon: float
    delta_prime: float
    norms: dict
    residual: float
    diagnostics: dict
    status: str
    stages: list = field(default_factory=list)

    def __post_init__(self):
        if self.status == "success":
            if not (self.residual < self.diagnostics.get(
                    "tolerances", {}).get("residual", 1e-6)):
                raise ConsistencyError("success status with residual above "
                                       "tolerance")
            for k, v in self.norms.items():
                if not np.isfinite(v):
                    raise ConsistencyError(f"success status with non-finite "
                                           f"norm {k}")

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "status": self.status,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "delta_prime": self.delta_prime,
            "norms": self.norms,
            "residual": self.residual,
            "diagnostics": self.diagnostics,
            "stages": self.stages,
        }


def run_pipeline(f1: BlaschkeProduct, f2: BlaschkeProduct, epsilon: float,
                 delta_prime: float | None = None, resolution: int = 512,
                 seed: int = 42, tolerances: dict | None = None,
                 keep_fields: bool = False):
    """Run every stage and return (report, artifacts).

    Raises nothing for data problems: violations and failures are
    reported through the status field ("not_unimodular",
    "necessity_violated", "tolerance_failure", "success"), with the
    failing stage named in the stages list.
    """
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        tol.update(tolerances)
    rng = np.random.default_rng(seed)
    stages = []
    diags = {"tolerances": tol, "resolution": resolution}
    artifacts = {}
    t0 = time.time()

    def stage(name, **extra):
        stages.append({"stage": name, "elapsed": round(time.time() - t0, 3),
                       **extra})

    # 1: corona quantity
    details = corona_delta_details(f1, f2)
    delta = details["delta"]
    diags["delta_argmin"] = [details["argmin"].real, details["argmin"].imag] \
        if details.get("argmin") is not None else None
    diags["delta_enclosure_radius"] = details.get("enclosure_radius")
    stage("corona_delta", delta=delta)
    if details["not_unimodular"] or delta <= 0.0:
        report = StabilizationReport(0.0, epsilon, 0.0, {}, math.inf, diags,
                                     "not_unimodular", stages)
        return report, artifacts

    # 2: necessity screening
    sign_res = check_necessity(f1, f2, epsilon)
    stage("necessity", ok=sign_res.ok, sign=sign_res.sign)
    if not sign_res.ok:
        diags["violation_witnesses"] = [
            [y, v] for y, v in sign_res.witnesses]
        report = StabilizationReport(delta, epsilon, 0.0, {}, math.inf, diags,
                                     "necessity_violated", stages)
        return report, artifacts
    sign = sign_res.sign
    diags["axis_sign"] = sign
    diags["sublevel_intervals_epsilon"] = [list(t) for t in sign_res.intervals]

    if delta_prime is None:
        delta_prime = min(delta, epsilon) / 10.0
    pair = CoronaPair(f1, f2, delta, epsilon, delta_prime, sign)

    try:
        return _construct(pair, resolution, rng, tol, diags, stages, stage,
                          keep_fields, artifacts)
    except SignConditionError as exc:
        diags["failure"] = f"{type(exc).__name__}: {exc}"
        report = StabilizationReport(delta, epsilon, delta_prime, {},
                                     math.inf, diags, "necessity_violated",
                                     stages)
        return report, artifacts
    except (ConsistencyError, ConstructionError, InterpolationError) as exc:
        diags["failure"] = f"{type(exc).__name__}: {exc}"
        report = StabilizationReport(delta, epsilon, delta_prime, {},
                                     math.inf, diags, "tolerance_failure",
                                     stages)
        return report, artifacts


def _construct(pair, resolution, rng, tol, diags, stages, stage,
               keep_fields, artifacts):
    f1, f2 = pair.f1, pair.f2
    sign = pair.sign
    delta, epsilon = pair.delta, pair.epsilon

    def p_tilde(z):
        return sign * f1(z)

    # short circuit: f2 invertible (empty product)
    if f2.is_empty:
        extent = max(f1.extent(), 1.0)
        grid = make_grid(2.0 * extent, min(resolution, 256),
                         2.0 * extent)

        def g1(z):
            return np.ones_like(np.asarray(z, dtype=complex))

        def g2(z):
            return 1.0 - f1(z)

        ver = verify_solution(f1, f2, g1, g2, grid, rng)
        stage("short_circuit_f2_invertible")
        report = StabilizationReport(
            delta, epsilon, pair.delta_prime,
            {k: ver[k] for k in ("sup_g1", "sup_g2", "sup_g1_inv")},
            ver["residual"], diags, "success", stages)
        return report, artifacts

    # 3: decomposition, with the delta'-halving retry loop around geometry
    dp = pair.delta_prime
    last_exc = None
    for _ in range(8):
        work_pair = CoronaPair(f1, f2, delta, epsilon, dp, sign)
        try:
            deco = build_generations(f1, f2, work_pair)
            system = build_slit_system(deco, f2, work_pair)
            break
        except ConstructionError as exc:
            last_exc = exc
            dp *= 0.5
    else:
        raise ConstructionError(f"slit geometry failed after retries: "
                                f"{last_exc}")
    diags["delta_prime_used"] = dp
    artifacts["deco"] = deco
    artifacts["system"] = system
    artifacts["pair"] = work_pair
    stage("decomposition", generations=len(deco.generations),
          components=len(deco.components), sigma1=len(deco.sigma1))
    diags["stopping_checks"] = verify_stopping_properties(f1, work_pair, deco)
    arc_measure, per_comp = region_boundary_length(deco)
    diags["boundary_intensity"] = carleson_intensity(arc_measure) \
        if arc_measure.atoms else 0.0
    diags["boundary_length_per_component"] = per_comp
    sigma1_measure = PointMassMeasure.from_zeros(deco.sigma1)
    diags["sigma1_intensity"] = carleson_intensity(sigma1_measure) \
        if sigma1_measure.atoms else 0.0
    origins = system.origins_measure()
    diags["origins_intensity"] = carleson_intensity(origins) \
        if origins.atoms else 0.0
    stage("slits", pairings=[p.kind for p in system.pairings])

    # 4: the correcting field (grid sized from the actual cut geometry)
    ext = max(f1.extent(), f2.extent(), 0.5)
    for s in system.all_slits():
        for seg in s.segments:
            for xx, yy in seg:
                ext = max(ext, abs(xx), yy)
    for c, r in system.all_discs():
        ext = max(ext, abs(c) + r)
    for reg in deco.regions:
        ext = max(ext, abs(reg.base[0]), abs(reg.base[1]), reg.length)
    half_width = 2.0 ** math.ceil(math.log2(max(2.0 * ext, 1e-3)))
    grid = make_grid(half_width, resolution, half_width)
    floor = 4.0 * (2.0 * half_width / 512.0)
    specs = summand_specs(system)
    summands = []
    band_union = np.zeros(grid.shape, dtype=bool)
    cert_list = []
    treil = np.zeros(grid.shape)
    for spec in specs:
        Vf, info = build_summand_field(spec, grid, floor)
        summands.append(Vf)
        band_union |= info["band"]
        cert_list.append({"summand": spec.label(), **info["certificates"]})
        treil += 1.0 - np.abs(spec.product(grid.Z)) ** 2
    V = assemble_v(summands, grid)
    diags["summand_certificates"] = cert_list
    diags["treil_sum_max"] = float(treil.max()) if specs else 0.0
    diags["sup_re_v"] = float(np.abs(V.values.real).max())
    calc = field_calculus(V)
    area = grid.cell_area()
    lap_mass = np.abs(calc["lap"].values) * grid.Y * area
    d_mass = np.abs(calc["d"].values) * area
    diags["intensity_lap"] = grid_carleson_intensity(lap_mass, grid.x, grid.y)
    diags["intensity_d"] = grid_carleson_intensity(d_mass, grid.x, grid.y)
    interior = np.zeros(grid.shape, dtype=bool)
    interior[2:-2, 2:-2] = True
    diags["sup_lap_im2"] = float(
        (np.abs(calc["lap"].values) * grid.Y ** 2)[interior].max())
    stage("correcting_field", summands=len(specs))

    # closeness of V to the tracked log of the data product
    branch, branch_records = sublevel_log_branch(p_tilde, f1.zeros, f2, dp,
                                                 grid)
    if branch.mask is not None and branch.mask.any():
        diff = (V.values - branch.values)[branch.mask]
        diags["closeness_sup"] = float(np.abs(diff).max())
        turns = np.round(np.median(diff.imag) / (2 * np.pi))
        diags["closeness_sup_aligned"] = float(
            np.abs(diff - 2j * np.pi * turns).max())
    else:
        diags["closeness_sup"] = 0.0
        diags["closeness_sup_aligned"] = 0.0
    diags["branch_components"] = sum(
        1 for r in branch_records if "mirror_of" not in r)

    # 5: dbar solve and kappa
    sol = solve_dbar(V, band_union if band_union.any() else None)
    ver_dbar = verify_dbar(sol, V, band_union if band_union.any() else None)
    diags["dbar"] = {"sup_v": sol.sup_v, **ver_dbar, **sol.diagnostics}
    stage("dbar_solve", sup_v=sol.sup_v, residual=ver_dbar["max"])
    kappa, kappa_report = make_kappa(V, sol, band_union,
                                     analyticity_tol=tol["analyticity"])
    if branch.mask is not None and branch.mask.any():
        # |log p - kappa| <= |log p - V| + sup|v| nodewise
        kdiff = (kappa.values - branch.values)[branch.mask]
        kappa_report["closeness_kappa"] = float(np.abs(kdiff).max())
    diags["kappa"] = kappa_report
    stage("kappa")

    # 6: interpolation targets and the bounded interpolant
    step = min(grid.hx, grid.hy)
    nodes = list(f2.zeros)
    targets = {}
    for zj in sorted(nodes, key=lambda a: (a.imag, a.real)):
        if zj.real < 0:
            continue
        w = pointwise_log(p_tilde, f1.zeros, zj, step) - complex(
            kappa.interp(zj))
        if zj.real == 0.0:
            w = complex(w.real, 0.0)
            targets[zj] = w
        else:
            targets[zj] = w
            targets[-zj.conjugate()] = w.conjugate()
    node_list = tuple(sorted(targets, key=lambda a: (a.imag, a.real)))
    problem = InterpolationProblem(node_list,
                                   tuple(targets[z] for z in node_list), dp)
    h = interpolate_symmetric(problem, f2)
    diags["interpolation"] = {"rho_star": h.rho_star, "rho": h.rho,
                              "node_defect": h.node_defect,
                              "n_nodes": len(node_list)}
    stage("interpolation", rho=h.rho)

    # 7: assembly and verification
    g1, g2, parts = assemble_solution(f1, f2, kappa, h, sign,
                                      tol["numerator_vanish"])
    excl_r = 2.5 * max(grid.hx, grid.hy)
    ver = verify_solution(f1, f2, g1, g2, grid, rng,
                          exclusion_centers=f2.zeros,
                          exclusion_radius=excl_r)
    diags["verification"] = ver
    diags["g2_fill_radius"] = excl_r
    stage("verify", residual=ver["residual"])

    if keep_fields:
        artifacts.update({"V": V, "kappa": kappa, "branch": branch,
                          "g1_grid": parts["g1_grid"],
                          "g2_grid": parts["g2_grid"],
                          "grid": grid, "h": h, "g1": g1, "g2": g2})

    ok = (ver["residual"] < tol["residual"] and ver["inf_g1"] > 0.0
          and np.isfinite(ver["sup_g2"]))
    status = "success" if ok else "tolerance_failure"
    norms = {"sup_g1": ver["sup_g1"], "sup_g2": ver["sup_g2"],
             "sup_g1_inv": ver["sup_g1_inv"]}
    report = StabilizationReport(delta, epsilon, dp, norms, ver["residual"],
                                 diags, status, stages)
    return report, artifacts
