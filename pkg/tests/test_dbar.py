"""Cauchy-transform dbar solves and the analytic correction kappa."""

import numpy as np
import pytest

from stabilize.dbar import (
    cauchy_kernel,
    make_kappa,
    pointwise_transform,
    solve_dbar,
    verify_dbar,
)
from stabilize.errors import ConsistencyError, GridError
from stabilize.fields import GridField, make_grid


def indicator_field(grid, x0=0.3, y0=1.0, half=0.2):
    """A field whose finite-difference dbar is (close to) a symmetric
    pair of square indicators: built by integrating the data exactly.

    conj(z) has dbar = 1, so the field conj(z) restricted smoothly is
    unnecessary: we instead return the data directly for transform-level
    tests."""
    sq = (np.abs(grid.X - x0) < half) & (np.abs(grid.Y - y0) < half)
    return (sq | sq[:, ::-1]).astype(complex)


def refined_transform_oracle(g_data, support, grid, points, sub=8):
    """Independent oracle: subcell midpoint quadrature of the transform."""
    cells = grid.Z[support]
    weights = g_data[support] * grid.cell_area() / np.pi / (sub * sub)
    t = (np.arange(sub) + 0.5) / sub - 0.5
    SX, SY = np.meshgrid(t * grid.hx, t * grid.hy)
    S = (SX + 1j * SY).ravel()
    out = []
    for z in points:
        total = 0.0 + 0.0j
        for c, w in zip(cells, weights):
            diff = z - (c + S)
            good = np.abs(diff) > 1e-12
            total += w * np.sum(1.0 / diff[good])
        out.append(total)
    return np.array(out)


class TestTransform:
    def test_zero_data_zero_solution(self):
        grid = make_grid(2.0, 64, 2.0)
        V = GridField(grid, (grid.Z ** 2 / 10).astype(complex))
        support = np.zeros(grid.shape, dtype=bool)
        sol = solve_dbar(V, support)
        assert sol.sup_v < 1e-12
        assert sol.residual == 0.0

    def test_indicator_matches_refined_oracle(self):
        grid = make_grid(2.0, 256, 2.0)
        data = indicator_field(grid)
        support = np.abs(data) > 0
        from scipy.signal import fftconvolve
        K = cauchy_kernel(grid)
        ny, nx = grid.shape
        v = fftconvolve(data, K, mode="full")[ny - 1:2 * ny - 1,
                                              nx - 1:2 * nx - 1]
        pts_idx = [(200, 128), (100, 40), (128, 200), (60, 160)]
        pts = [grid.Z[iy, ix] for iy, ix in pts_idx]
        oracle = refined_transform_oracle(data, support, grid, pts)
        got = np.array([v[iy, ix] for iy, ix in pts_idx])
        rel = np.abs(got - oracle) / np.abs(oracle)
        assert rel.max() < 1e-3

    def test_improves_under_doubling(self):
        errs = []
        for n in (128, 256):
            grid = make_grid(2.0, n, 2.0)
            data = indicator_field(grid)
            support = np.abs(data) > 0
            from scipy.signal import fftconvolve
            K = cauchy_kernel(grid)
            ny, nx = grid.shape
            v = fftconvolve(data, K, mode="full")[ny - 1:2 * ny - 1,
                                                  nx - 1:2 * nx - 1]
            z0 = 0.35 + 1.1j       # inside the support region
            iy = int(np.argmin(np.abs(grid.y - z0.imag)))
            ix = int(np.argmin(np.abs(grid.x - z0.real)))
            oracle = refined_transform_oracle(
                data, support, grid, [grid.Z[iy, ix]], sub=12)
            errs.append(abs(v[iy, ix] - oracle[0]) / abs(oracle[0]))
        assert errs[1] < errs[0] / 1.8     # observed order >= 1

    def test_symmetric_data_symmetric_solution(self, rng):
        grid = make_grid(2.0, 96, 2.0)
        raw = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        V = GridField(grid, raw).symmetrize()
        support = np.zeros(grid.shape, dtype=bool)
        support[30:60, 20:70] = True
        support |= support[:, ::-1]
        sol = solve_dbar(V, support)
        assert sol.v.symmetry_defect() < 1e-12

    def test_linearity(self, rng):
        grid = make_grid(2.0, 64, 2.0)
        f1 = GridField(grid, np.cos(grid.X) * np.exp(-grid.Y) + 0j)
        f2 = GridField(grid, np.sin(grid.X * grid.Y) + 0j)
        support = np.zeros(grid.shape, dtype=bool)
        support[10:50, 10:55] = True
        a, b = 2.0, -0.5
        comb = GridField(grid, a * f1.values + b * f2.values)
        v1 = solve_dbar(f1, support).v.values
        v2 = solve_dbar(f2, support).v.values
        vc = solve_dbar(comb, support).v.values
        assert np.abs(vc - (a * v1 + b * v2)).max() < 1e-10

    def test_support_at_top_boundary_raises(self):
        grid = make_grid(2.0, 64, 2.0)
        V = GridField(grid, np.zeros(grid.shape, dtype=complex))
        support = np.zeros(grid.shape, dtype=bool)
        support[-1, 30] = True
        with pytest.raises(GridError):
            solve_dbar(V, support)

    def test_pointwise_matches_grid_transform(self):
        grid = make_grid(2.0, 128, 2.0)
        data = indicator_field(grid)
        support = np.abs(data) > 0
        from scipy.signal import fftconvolve
        K = cauchy_kernel(grid)
        ny, nx = grid.shape
        v = fftconvolve(data, K, mode="full")[ny - 1:2 * ny - 1,
                                              nx - 1:2 * nx - 1]
        pts_idx = [(100, 30), (60, 110)]
        pts = np.array([grid.Z[iy, ix] for iy, ix in pts_idx])
        got = pointwise_transform(data, support, grid, pts)
        want = np.array([v[iy, ix] for iy, ix in pts_idx])
        assert np.abs(got - want).max() < 2e-3 * np.abs(want).min()


class TestVerify:
    def test_zero_case(self):
        grid = make_grid(2.0, 64, 2.0)
        V = GridField(grid, (1.0 / (grid.Z + 5j)).astype(complex))
        support = np.zeros(grid.shape, dtype=bool)
        sol = solve_dbar(V, support)
        out = verify_dbar(sol, V, support)
        assert out["max"] == 0.0

    def test_synthetic_residual_small(self):
        # smooth compactly supported dbar data: dbar(V) for
        # V = bump * conj(z)
        grid = make_grid(2.0, 256, 2.0)
        r2 = ((grid.X - 0.5) ** 2 + (grid.Y - 1.0) ** 2) / 0.5 ** 2
        with np.errstate(over="ignore"):
            bump = np.where(r2 < 1, np.exp(-1 / np.maximum(1 - r2, 1e-12)),
                            0.0)
        bump = bump + bump[:, ::-1]
        V = GridField(grid, bump * 1j * np.conj(grid.Z))  # symmetric field
        support = bump > 0
        sol = solve_dbar(V, support)
        out = verify_dbar(sol, V, support)
        assert out["p99"] < 5e-2
        assert out["max"] < 0.1

    def test_residual_decreases_under_doubling(self):
        maxes = []
        for n in (128, 256):
            grid = make_grid(2.0, n, 2.0)
            r2 = ((grid.X - 0.5) ** 2 + (grid.Y - 1.0) ** 2) / 0.5 ** 2
            with np.errstate(over="ignore"):
                bump = np.where(r2 < 1,
                                np.exp(-1 / np.maximum(1 - r2, 1e-12)), 0.0)
            bump = bump + bump[:, ::-1]
            V = GridField(grid, bump * 1j * np.conj(grid.Z))
            support = bump > 0
            sol = solve_dbar(V, support)
            maxes.append(verify_dbar(sol, V, support)["p99"])
        assert maxes[1] < maxes[0] / 1.9


class TestKappa:
    def test_zero_data_kappa_is_v(self):
        grid = make_grid(2.0, 64, 2.0)
        V = GridField(grid, (grid.Z / (grid.Z + 3j)).astype(complex))
        support = np.zeros(grid.shape, dtype=bool)
        sol = solve_dbar(V, support)
        kappa, report = make_kappa(V, sol, support)
        assert np.array_equal(kappa.values, V.values)
        assert report["sup_dbar_kappa"] < 1e-2

    def test_triangle_inequality_on_re(self):
        grid = make_grid(2.0, 96, 2.0)
        r2 = ((grid.X - 0.5) ** 2 + (grid.Y - 1.0) ** 2) / 0.4 ** 2
        with np.errstate(over="ignore"):
            bump = np.where(r2 < 1, np.exp(-1 / np.maximum(1 - r2, 1e-12)),
                            0.0)
        bump = bump + bump[:, ::-1]
        V = GridField(grid, bump * 1j * np.conj(grid.Z))  # symmetric field
        support = bump > 0
        sol = solve_dbar(V, support)
        kappa, report = make_kappa(V, sol, support, analyticity_tol=10.0)
        lhs = report["sup_re_kappa"]
        rhs = float(np.abs(V.values.real).max()) + sol.sup_v
        assert lhs <= rhs + 1e-12

    def test_exp_norms_consistent(self):
        grid = make_grid(2.0, 64, 2.0)
        V = GridField(grid, (0.3 * grid.Z / (grid.Z + 2j)).astype(complex))
        support = np.zeros(grid.shape, dtype=bool)
        sol = solve_dbar(V, support)
        kappa, report = make_kappa(V, sol, support)
        re = kappa.values.real
        assert abs(report["sup_exp_kappa"] - np.exp(re.max())) < 1e-12
        assert abs(report["sup_exp_minus_kappa"] - np.exp(-re.min())) < 1e-12

    def test_analyticity_gate(self):
        grid = make_grid(2.0, 64, 2.0)
        V = GridField(grid, np.conj(grid.Z).astype(complex))  # dbar = 1
        support = np.zeros(grid.shape, dtype=bool)             # ignored data
        sol = solve_dbar(V, support)
        with pytest.raises(ConsistencyError):
            make_kappa(V, sol, support, analyticity_tol=1e-2)
