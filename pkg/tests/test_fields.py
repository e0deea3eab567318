"""Grid fields: branch tracking, mollification, Wirtinger calculus."""

import math

import numpy as np
import pytest

from stabilize.blaschke import BlaschkeProduct, CoronaPair, corona_delta, \
    axis_sign_condition
from stabilize.carleson import build_generations
from stabilize.errors import GeometryError
from stabilize.fields import (
    GridField,
    assemble_v,
    build_summand_field,
    dagger,
    edge_deltas,
    field_calculus,
    make_grid,
    mollify,
    pointwise_log,
    sublevel_log_branch,
    summand_phi,
    summand_specs,
    unwrap_field,
    wrap_angle,
    zero_field,
)
from stabilize.slits import build_slit_system


def small_system(f1_zeros, f2_zeros, eps=0.2):
    f1 = BlaschkeProduct.from_zeros(f1_zeros)
    f2 = BlaschkeProduct.from_zeros(f2_zeros)
    d = corona_delta(f1, f2, resolution=128)
    res = axis_sign_condition(f1, f2, eps)
    pair = CoronaPair(f1, f2, d, eps, min(d, eps) / 10.0, res.sign)
    deco = build_generations(f1, f2, pair)
    system = build_slit_system(deco, f2, pair)
    return system, pair


class TestGrid:
    def test_axis_column_present(self):
        g = make_grid(2.0, 128, 2.0)
        assert g.x[g.axis_column] == 0.0
        assert len(g.x) == 129 and len(g.y) == 128

    def test_reflection_closed(self):
        g = make_grid(3.0, 64)
        assert np.array_equal(g.x, -g.x[::-1])

    def test_field_interp_on_nodes(self, rng):
        g = make_grid(2.0, 64, 2.0)
        vals = np.exp(1j * g.X) * g.Y
        f = GridField(g, vals)
        iy, ix = 10, 20
        assert abs(f.interp(g.Z[iy, ix]) - vals[iy, ix]) < 1e-14

    def test_symmetrize_projection(self, rng):
        g = make_grid(1.0, 32, 1.0)
        f = GridField(g, rng.normal(size=g.shape)
                      + 1j * rng.normal(size=g.shape))
        s = f.symmetrize()
        assert s.symmetry_defect() < 1e-14
        s2 = s.symmetrize()
        assert np.abs(s.values - s2.values).max() < 1e-14


class TestCalculus:
    def test_analytic_function(self):
        g = make_grid(1.0, 64, 1.0)
        F = GridField(g, g.Z.astype(complex))
        out = field_calculus(F)
        inner = (slice(2, -2), slice(2, -2))
        assert np.abs(out["dbar"].values[inner]).max() < 1e-10
        assert np.abs(out["d"].values[inner] - 1.0).max() < 1e-10

    def test_antianalytic_function(self):
        g = make_grid(1.0, 64, 1.0)
        F = GridField(g, np.conj(g.Z).astype(complex))
        out = field_calculus(F)
        inner = (slice(2, -2), slice(2, -2))
        assert np.abs(out["dbar"].values[inner] - 1.0).max() < 1e-10

    def test_laplacian_of_harmonic(self):
        g = make_grid(1.0, 96, 1.0)
        F = GridField(g, (g.X ** 2 - g.Y ** 2).astype(complex))
        out = field_calculus(F)
        inner = (slice(2, -2), slice(2, -2))
        assert np.abs(out["lap"].values[inner]).max() < 1e-8

    def test_chain_rule_identity(self, rng):
        # dbar commutes with the symmetry companion up to the sign of
        # the reflection: for f+(z) = conj(f(-conj z)) the chain rule
        # gives dbar(f+) = -(dbar f)+ (the disc reflection z -> conj z
        # has no sign; the half-plane one reverses orientation in z)
        g = make_grid(1.0, 64, 1.0)
        F = GridField(g, np.sin(g.X) * np.exp(-g.Y)
                      + 1j * np.cos(g.X * g.Y))
        lhs = field_calculus(dagger(F))["dbar"].values
        rhs = -dagger(field_calculus(F)["dbar"]).values
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_chain_rule_preserves_symmetric_dbar_data(self, rng):
        # the consequence that matters: for a symmetric field V the
        # symmetrization (v + v+)/2 keeps dbar v = dbar V, because
        # dbar V is anti-symmetric under the companion
        g = make_grid(1.0, 64, 1.0)
        raw = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        V = GridField(g, raw).symmetrize()
        gv = field_calculus(V)["dbar"]
        assert np.abs(gv.values + dagger(gv).values).max() < 1e-9


class TestUnwrap:
    def test_plane_wave(self):
        g = make_grid(1.0, 48, 1.0)
        true = 5.0 * g.X + 3.0 * g.Y
        theta = wrap_angle(true)
        blocked = np.zeros(g.shape, dtype=bool)
        U, done = unwrap_field(theta, blocked, (47, g.axis_column))
        assert done.all()
        off = U - true
        assert np.abs(off - off[0, 0]).max() < 1e-9

    def test_blocked_anchor_raises(self):
        g = make_grid(1.0, 16, 1.0)
        blocked = np.ones(g.shape, dtype=bool)
        with pytest.raises(GeometryError):
            unwrap_field(np.zeros(g.shape), blocked, (0, 0))

    def test_alias_free_edges_dense_product(self):
        # many zeros on one row make single-cell steps exceed 2 pi
        zeros = [complex(x, 0.3)
                 for x in np.linspace(-0.4, 0.4, 41)]
        B = BlaschkeProduct(tuple(zeros))
        g = make_grid(2.0, 96, 2.0)
        theta = np.angle(B(g.Z))
        dh, dv = edge_deltas(theta, g.Z, B, B.zeros)
        # integrating dh along the row just above the zeros and closing
        # far away must return to the start value (no net winding)
        iy = int(np.searchsorted(g.y, 0.5))
        loop = dh[iy, :].sum() - dh[-1, :].sum() \
            + dv[iy:, -1].sum() - dv[iy:, 0].sum()
        assert abs(loop) < 1e-9
        # a loop through the zero row picks up the winding of the
        # enclosed zeros; with the bottom edge below them the net count
        # equals 2 pi times the number enclosed horizontally
        iy0 = 1
        loop2 = dh[iy0, :].sum() - dh[-1, :].sum() \
            + dv[iy0:, -1].sum() - dv[iy0:, 0].sum()
        assert abs(loop2 - 2 * np.pi * 41) < 1e-6


class TestSummands:
    def test_offaxis_pair_values(self):
        system, pair = small_system([1 + 1j, -1 + 1j], [3j])
        (spec,) = summand_specs(system)
        g = make_grid(4.0, 128, 4.0)
        phi, info = summand_phi(spec, g)
        # at 10j (grid top is 4, use 3.9j): value = log of the product,
        # real on the axis
        mid = g.axis_column
        vals = phi.values[:, mid]
        prod_axis = spec.product(1j * g.y)
        outside = ~info["blocked"][:, mid]
        assert np.abs(vals[outside].imag).max() < 1e-10
        expect = np.log(np.abs(prod_axis[outside]))
        assert np.abs(vals[outside].real - expect).max() < 1e-10

    def test_interior_zero(self):
        system, pair = small_system([1 + 1j, -1 + 1j], [3j])
        (spec,) = summand_specs(system)
        g = make_grid(4.0, 128, 4.0)
        phi, info = summand_phi(spec, g)
        assert np.abs(phi.values[info["interior"]]).max() == 0.0

    def test_exact_symmetry(self):
        system, pair = small_system([1 + 1j, -1 + 1j, 1.2j], [3j])
        for spec in summand_specs(system):
            g = make_grid(4.0, 96, 4.0)
            V, info = build_summand_field(spec, g)
            assert V.symmetry_defect() == 0.0

    def test_mollify_identity_off_band(self):
        system, pair = small_system([1 + 1j, -1 + 1j], [3j])
        (spec,) = summand_specs(system)
        g = make_grid(4.0, 128, 4.0)
        phi, info = summand_phi(spec, g)
        V = mollify(phi, info)
        off = ~info["band"]
        assert np.array_equal(V.values[off], phi.values[off])

    def test_mollify_constant_preserved(self):
        g = make_grid(1.0, 32, 1.0)
        phi = GridField(g, np.full(g.shape, 2.5 + 0j))
        band = np.zeros(g.shape, dtype=bool)
        band[10:20, 10:20] = True
        out = mollify(phi, {"band": band, "conv_radius": 0.2})
        assert np.abs(out.values - 2.5).max() < 1e-12

    def test_derivative_certificate_stable_under_refinement(self):
        # the mollification floor is fixed in physical units (resolved
        # on the coarser grid), so the measured constant stabilizes
        system, pair = small_system([1 + 1j, -1 + 1j], [3j])
        (spec,) = summand_specs(system)
        floor = 4.0 * (2.0 * 4.0 / 128.0)
        sups = []
        for n in (128, 256):
            g = make_grid(4.0, n, 4.0)
            V, info = build_summand_field(spec, g, floor=floor)
            sups.append(info["certificates"]["sup_dbar_scaled"])
        assert abs(sups[1] - sups[0]) <= 0.2 * abs(sups[0])

    def test_re_v_bound_shape(self):
        # |Re V| <= log(1/|family product|) pointwise plus a mollifier
        # overshoot: equality off the cuts, zero inside, smoothing in
        # between (the capped leg of the bound lives on the interior,
        # where the field is identically zero)
        system, pair = small_system([1 + 1j, -1 + 1j], [3j])
        (spec,) = summand_specs(system)
        g = make_grid(4.0, 128, 4.0)
        V, info = build_summand_field(spec, g)
        with np.errstate(divide="ignore"):
            log_inv = -np.log(np.abs(spec.product(g.Z)))
        bound = np.maximum(log_inv, 0.0)
        overshoot = float((np.abs(V.values.real) - bound).max())
        off = ~info["band"] & ~info["interior"]
        assert np.all(np.abs(V.values.real[off]) <= bound[off] + 1e-12)
        assert overshoot < 1.0       # measured mollifier overshoot, small

    def test_branch_parity_real_on_axis(self):
        # paired axis zeros: the product has even parity, the branch is
        # real on the axis above and below the geometry
        system, pair = small_system([1j, 1.5j], [4j])
        (spec,) = summand_specs(system)
        assert spec.kind == "zero-zero"
        g = make_grid(4.0, 128, 4.0)
        phi, info = summand_phi(spec, g)
        mid = g.axis_column
        outside = ~info["blocked"][:, mid] & ~info["band"][:, mid]
        assert np.abs(phi.values[outside, mid].imag).max() < 1e-10


class TestAssemble:
    def test_zero_summands(self):
        g = make_grid(1.0, 16, 1.0)
        V = assemble_v([], g)
        assert np.abs(V.values).max() == 0.0

    def test_single_summand_identity(self):
        g = make_grid(1.0, 16, 1.0)
        f = GridField(g, np.ones(g.shape, dtype=complex))
        V = assemble_v([f])
        assert np.array_equal(V.values, f.values)

    def test_two_pairs_sum_matches_log_modulus(self):
        system, pair = small_system(
            [1 + 1j, -1 + 1j, 2 + 0.8j, -2 + 0.8j], [3j])
        specs = summand_specs(system)
        assert len(specs) == 2
        g = make_grid(8.0, 192, 8.0)
        fields = [build_summand_field(s, g)[0] for s in specs]
        V = assemble_v(fields, g)
        # far axis point: Re V equals log |f1| directly
        iy = len(g.y) - 1
        mid = g.axis_column
        want = math.log(abs(pair.f1(1j * g.y[iy])))
        assert abs(V.values[iy, mid].real - want) < 1e-9

    def test_grid_mismatch_raises(self):
        g1 = make_grid(1.0, 16, 1.0)
        g2 = make_grid(2.0, 16, 2.0)
        with pytest.raises(GeometryError):
            assemble_v([zero_field(g1), zero_field(g2)])


class TestRegionSummands:
    """The dense synthetic instance exercises the region machinery end
    to end: comb summands, slit cuts, pockets, and the dbar solve.
    Constants are huge (they scale like exp(M)) but finite and the
    structural invariants are exact."""

    def test_dense_cluster_fields_and_dbar(self):
        from test_carleson import dense_cluster_pair
        from stabilize.carleson import build_generations
        from stabilize.dbar import make_kappa, solve_dbar

        p, q, pair, M = dense_cluster_pair()
        deco = build_generations(p, q, pair, M=M)
        assert deco.components and deco.sigma1
        system = build_slit_system(deco, q, pair)
        specs = summand_specs(system)
        kinds = sorted(s.kind for s in specs)
        assert "region-solo-even" in kinds and "zero-solo" in kinds
        grid = make_grid(4.0, 160, 4.0)
        fields = []
        band = np.zeros(grid.shape, dtype=bool)
        for spec in specs:
            V, info = build_summand_field(spec, grid, floor=4 * 8.0 / 512)
            assert V.symmetry_defect() == 0.0
            assert info["branch"]["seam_defect"] < 1e-6
            fields.append(V)
            band |= info["band"]
        Vt = assemble_v(fields, grid)
        assert Vt.symmetry_defect() == 0.0
        mid = grid.axis_column
        assert np.abs(Vt.values[:, mid].imag).max() == 0.0
        sol = solve_dbar(Vt, band)
        assert np.isfinite(sol.sup_v)
        assert sol.v.symmetry_defect() < 1e-12
        kappa, rep = make_kappa(Vt, sol, band, analyticity_tol=np.inf)
        assert np.isfinite(rep["sup_re_kappa"])
        assert rep["symmetry_defect"] < 1e-12


class TestAdvancedPairings:
    """Mirror region pairs, region-zero connectors, and odd solos."""

    @staticmethod
    def _run_case(zeros, q_zeros, eps, max_fields: int = 4):
        import math
        from stabilize.blaschke import CoronaPair, corona_delta, \
            axis_sign_condition
        from stabilize.carleson import build_generations

        p = BlaschkeProduct.from_zeros(zeros)
        q = BlaschkeProduct.from_zeros(q_zeros)
        d = corona_delta(p, q, resolution=128)
        res = axis_sign_condition(p, q, eps)
        assert res.ok
        dp = min(d, eps) / 10
        pair = CoronaPair(p, q, d, eps, dp, res.sign)
        deco = build_generations(p, q, pair,
                                 M=28.5 * math.log(1.0 / dp))
        system = build_slit_system(deco, q, pair)
        specs = summand_specs(system)
        # build the region-bearing summands plus a sample of the rest
        grid = make_grid(4.0, 128, 4.0)
        chosen = [s for s in specs if s.components] \
            + [s for s in specs if not s.components][:max_fields]
        for spec in chosen:
            V, info = build_summand_field(spec, grid, floor=4 * 8.0 / 512)
            assert V.symmetry_defect() == 0.0
            assert info["branch"]["seam_defect"] < 1e-6
        return deco, system, specs

    def test_mirror_region_pair(self):
        xs = np.linspace(0.76, 1.24, 170)
        zeros = [complex(x, 0.5) for x in xs] \
            + [complex(-x, 0.5) for x in xs]
        deco, system, specs = self._run_case(zeros, [4096j], 0.5)
        assert len(deco.components) == 2
        assert not deco.components[0].self_symmetric
        assert deco.components[0].mirror_index == 1
        assert [p.kind for p in system.pairings] == ["region-mirror"]
        assert specs[0].product.degree == 340

    def test_region_zero_connector(self):
        xs = np.linspace(0.005, 0.495, 110)
        zeros = [complex(x, 0.5) for x in xs] \
            + [complex(-x, 0.5) for x in xs] + [1.5j, 0.48j]
        deco, system, specs = self._run_case(zeros, [256j], 0.2)
        (comp,) = deco.components
        assert comp.self_symmetric and comp.axis_zero_count == 1
        assert deco.sigma1 == (1.5j,)
        assert [p.kind for p in system.pairings] == ["region-zero"]
        # paired product has even axis parity
        assert specs[0].product.degree == 222

    def test_region_solo_odd(self):
        xs = np.linspace(0.005, 0.495, 110)
        zeros = [complex(x, 0.5) for x in xs] \
            + [complex(-x, 0.5) for x in xs] + [0.48j]
        deco, system, specs = self._run_case(zeros, [256j], 0.2)
        (comp,) = deco.components
        assert comp.axis_zero_count == 1
        kinds = [p.kind for p in system.pairings]
        assert "region-solo-odd" in kinds
        # the solo pairing carries the axis slit down to the real line
        (pairing,) = [p for p in system.pairings
                      if p.kind == "region-solo-odd"]
        (slit,) = pairing.slits
        assert slit.segments[0][0] == (0.0, 0.0)
        assert abs(slit.segments[0][1][1]
                   - comp.axis_interval()[0]) < 1e-12


class TestLogBranches:
    def test_sublevel_branch_real_on_axis_trace(self):
        f1 = BlaschkeProduct.from_zeros([1j, 3j])
        f2 = BlaschkeProduct.from_zeros([2j])
        g = make_grid(4.0, 192, 4.0)
        sign = axis_sign_condition(f1, f2, 0.1).sign

        def p_tilde(z):
            return sign * f1(z)

        branch, records = sublevel_log_branch(p_tilde, f1.zeros, f2, 0.05, g)
        assert branch.mask.any()
        mid = g.axis_column
        axis_cells = branch.mask[:, mid]
        assert np.abs(branch.values[axis_cells, mid].imag).max() < 1e-10
        # e^branch reproduces the product on the sublevel set
        diff = np.exp(branch.values[branch.mask]) - p_tilde(
            g.Z[branch.mask])
        assert np.abs(diff).max() < 1e-9

    def test_pointwise_log_exponentiates_back(self):
        f1 = BlaschkeProduct.from_zeros([1j, 3j, 1 + 1j, -1 + 1j])
        sign = -1

        def p_tilde(z):
            return sign * f1(z)

        for z in (0.5 + 2j, -0.5 + 2j, 2j, 0.2 + 0.5j):
            w = pointwise_log(p_tilde, f1.zeros, z, 0.02)
            assert abs(np.exp(w) - p_tilde(np.asarray(z))) < 1e-9

    def test_pointwise_log_mirror_conjugate(self):
        f1 = BlaschkeProduct.from_zeros([1j, 0.7 + 1.3j, -0.7 + 1.3j])

        def p(z):
            return f1(z)

        z = 0.8 + 2.2j
        w = pointwise_log(p, f1.zeros, z, 0.02)
        wm = pointwise_log(p, f1.zeros, -np.conj(z), 0.02)
        assert abs(wm - np.conj(w)) < 1e-10
