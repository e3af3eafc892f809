"""Forward/inverse transforms, Born hierarchy, linear oracles, SD2D format."""

import warnings

import numpy as np
import pytest

from dbarscat import (
    BoundaryContaminationWarning,
    ComplexField,
    ConvergenceError,
    FormatError,
    Grid2D,
    KGrid,
    ScatteringData,
    SolverConfig,
    born_transform,
    constant_field,
    dual_kgrid,
    forward_transform,
    gen_potential,
    inverse_transform,
    linear_fourier,
    linear_fourier_dual,
    lp_norm,
    read_sd2d,
    sd_l2_norm,
    write_sd2d,
)
from dbarscat.harness import PotentialSpec
from conftest import gaussian_field, loglog_slope

BENCH32 = Grid2D(32, 7.0)


def sd_diff_norm(a: ScatteringData, b: ScatteringData) -> float:
    return lp_norm(a.as_field() - b.as_field(), 2)


class TestKGrid:
    def test_layout_mirrors_grid(self):
        kg = KGrid(16, 4.0)
        assert kg.spacing == 0.5
        assert kg.weight == 0.25
        assert kg.node(0) == complex(-4.0, -4.0)
        assert kg.node(1) == complex(-3.5, -4.0)  # first coordinate fastest
        assert kg.node(16) == complex(-4.0, -3.5)

    def test_dual_kgrid_is_nyquist(self):
        g = Grid2D(128, 7.0)
        kg = dual_kgrid(g)
        assert kg.M == 128
        assert kg.K == pytest.approx(np.pi * 128 / 14.0)
        assert kg.spacing == pytest.approx(np.pi / 7.0)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            KGrid(20, 4.0)
        with pytest.raises(ValueError):
            KGrid(16, -1.0)

    def test_as_grid2d_round_trip(self):
        kg = KGrid(32, 9.0)
        g = kg.as_grid2d()
        assert (g.N, g.L) == (32, 9.0)
        np.testing.assert_array_equal(g.nodes, kg.nodes)


class TestForwardTransform:
    def test_zero_potential(self):
        q = constant_field(BENCH32, 0.0)
        sd = forward_transform(q, KGrid(8, 4.0))
        assert np.all(sd.values == 0.0)
        assert sd.meta.residual_max == 0.0
        assert sd.meta.iterations_max == 0

    def test_meta_provenance(self):
        q = gaussian_field(BENCH32)
        cfg = SolverConfig()
        sd = forward_transform(q, KGrid(8, 4.0), cfg)
        assert sd.meta.source_n == 32
        assert sd.meta.source_l == 7.0
        assert sd.meta.config_digest == cfg.digest()
        assert 0 < sd.meta.residual_max <= cfg.tol

    def test_aborts_on_failed_nodes(self):
        q = gaussian_field(BENCH32)
        with pytest.raises(ConvergenceError, match="failed"):
            forward_transform(q, KGrid(4, 2.0), SolverConfig(tol=1e-13, max_iter=2))

    def test_thread_count_bitwise_invariant(self):
        q = gaussian_field(BENCH32)
        kg = KGrid(8, 4.0)
        a = forward_transform(q, kg, threads=1)
        b = forward_transform(q, kg, threads=2)
        np.testing.assert_array_equal(a.values, b.values)

    def test_mini_plancherel(self):
        # the identity ||F[q]|| = ||q|| has defect well below 1e-4 at N=32
        q = gaussian_field(BENCH32)
        sd = forward_transform(q, dual_kgrid(BENCH32), threads=2)
        assert abs(sd_l2_norm(sd) / lp_norm(q, 2) - 1.0) <= 1e-4


class TestLinearOracles:
    def test_dual_paths_agree(self):
        # dense nudft and FFT-with-phases must agree on the dual lattice
        q = gaussian_field(BENCH32) * (0.6 - 1.1j)
        a = linear_fourier(q, dual_kgrid(BENCH32))
        b = linear_fourier_dual(q)
        assert np.max(np.abs(a.values - b.values)) <= 1e-12

    def test_gaussian_transform_closed_form(self):
        # exp(-|z|^2/2) is self dual under the 1/2pi convention
        g = Grid2D(64, 8.0)
        q = gaussian_field(g)
        sd = linear_fourier_dual(q)
        kg = sd.kgrid
        kz = kg.nodes[None, :] + 1j * kg.nodes[:, None]
        want = np.exp(-np.abs(kz) ** 2 / 2.0)
        assert np.max(np.abs(sd.values - want)) <= 1e-12


class TestBornTransform:
    def test_n0_equals_linear_fourier_times_i(self):
        q = gaussian_field(BENCH32) * (1.0 + 0.4j)
        kg = dual_kgrid(BENCH32)
        f0 = born_transform(q, 0, kg)
        ref = linear_fourier_dual(q)
        assert np.max(np.abs(f0.values - 1j * ref.values)) <= 1e-10

    def test_zero_potential_all_orders(self):
        q = constant_field(BENCH32, 0.0)
        for n in (1, 2):
            sd = born_transform(q, n, KGrid(8, 4.0))
            assert np.all(sd.values == 0.0)

    def test_partial_sums_converge_to_forward(self):
        # contractive regime: sum_{n=0}^{4} F_n = F to 1e-6
        q = gaussian_field(BENCH32) * 0.1
        kg = KGrid(16, 6.0)
        sd = forward_transform(q, kg, threads=2)
        total = np.zeros_like(sd.values)
        for n in range(5):
            total = total + born_transform(q, n, kg, threads=2).values
        assert sd_diff_norm(ScatteringData(kg, total), sd) <= 1e-6

    def test_hierarchy_slopes(self):
        # ||F_n[eps q]||_2 = O(eps^(2n+1)) with fitted slope 2n+1 +- 0.5
        kg = KGrid(8, 4.0)
        eps_list = (0.2, 0.1, 0.05)
        for n in (0, 1, 2):
            norms = []
            for eps in eps_list:
                q = gaussian_field(BENCH32) * eps
                norms.append(sd_l2_norm(born_transform(q, n, kg)))
            slope = loglog_slope(eps_list, norms)
            assert abs(slope - (2 * n + 1)) <= 0.5

    def test_rejects_negative_n(self):
        with pytest.raises(ValueError):
            born_transform(gaussian_field(BENCH32), -1, KGrid(8, 4.0))


class TestLinearisation:
    def test_forward_linearisation_cubic(self):
        # || F[eps q] - i eps qhat ||_2 = O(eps^3): slope 3 +- 0.5
        g = Grid2D(32, 7.0)
        kg = KGrid(16, 6.0)
        eps_list = (0.1, 0.05, 0.025)
        devs = []
        for eps in eps_list:
            q = gaussian_field(g) * eps
            sd = forward_transform(q, kg, threads=2)
            lin = linear_fourier(q, kg)
            devs.append(sd_diff_norm(sd, ScatteringData(kg, 1j * lin.values)))
        slope = loglog_slope(eps_list, devs)
        assert abs(slope - 3.0) <= 0.5


class TestInverseTransform:
    def test_zero_data(self):
        sd = ScatteringData(KGrid(8, 4.0), np.zeros((8, 8), dtype=complex))
        out = inverse_transform(sd, BENCH32)
        assert np.all(out.values == 0.0)

    def test_mini_round_trip(self):
        q = gaussian_field(BENCH32)
        sd = forward_transform(q, dual_kgrid(BENCH32), threads=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryContaminationWarning)
            back = inverse_transform(sd, BENCH32, threads=2)
        assert lp_norm(back - q, 2) / lp_norm(q, 2) <= 5e-3

    def test_inverse_linearisation_cubic(self):
        # inverting i eps qhat recovers eps q with O(eps^3) error
        g = BENCH32
        eps_list = (0.1, 0.05)
        devs = []
        for eps in eps_list:
            q = gaussian_field(g) * eps
            lin = linear_fourier_dual(q)
            sd = ScatteringData(lin.kgrid, 1j * lin.values)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundaryContaminationWarning)
                rec = inverse_transform(sd, g, threads=2)
            devs.append(lp_norm(rec - q, 2))
        ratio = devs[0] / devs[1]
        assert 2.0 ** 2.5 <= ratio <= 2.0 ** 3.5

    def test_unimodular_rescaling_invariance(self):
        # |F[exp(i theta) q]| = |F[q]| pointwise
        q = gaussian_field(BENCH32)
        kg = KGrid(8, 6.0)
        a = forward_transform(q, kg, threads=2)
        b = forward_transform(q * np.exp(0.7j), kg, threads=2)
        assert np.max(np.abs(np.abs(a.values) - np.abs(b.values))) <= 1e-12


class TestSD2D:
    def test_round_trip_bitwise(self, tmp_path):
        q = gaussian_field(BENCH32)
        sd = forward_transform(q, KGrid(8, 4.0))
        path = tmp_path / "d.sd2d"
        write_sd2d(sd, path)
        back = read_sd2d(path)
        assert back.kgrid == sd.kgrid
        assert back.meta.source_n == 32
        assert back.meta.source_l == 7.0
        np.testing.assert_array_equal(back.values, sd.values)

    def test_header_layout(self, tmp_path):
        sd = ScatteringData(KGrid(8, 4.0), np.zeros((8, 8), dtype=complex))
        path = tmp_path / "d.sd2d"
        write_sd2d(sd, path)
        raw = path.read_bytes()
        assert raw[:4] == b"SD2D"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 8
        assert len(raw) == 32 + 16 * 64

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "d.sd2d"
        write_sd2d(ScatteringData(KGrid(8, 4.0), np.zeros((8, 8), dtype=complex)), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_sd2d(path)


class TestGenPotentialSpec:
    def test_forward_of_generated_potential(self):
        spec = PotentialSpec(kind="gaussian", amplitude=1.0, width=1.0)
        q = gen_potential(spec, BENCH32)
        np.testing.assert_allclose(
            q.values, np.exp(-np.abs(BENCH32.z) ** 2 / 2.0), atol=1e-15
        )
