"""Potential generators, experiment reports, and the harness experiments."""

import numpy as np
import pytest

from dbarscat import (
    ConfigError,
    ExperimentReport,
    Grid2D,
    KGrid,
    SolverConfig,
    decay_experiment,
    dk_system_check,
    gen_potential,
    hss_norm,
    lipschitz_experiment,
    plancherel_check,
    read_report_csv,
    roundtrip_check,
    write_report_csv,
)
from dbarscat.harness import PotentialSpec

GRID = Grid2D(32, 7.0)


class TestGenPotential:
    def test_gaussian_exact_values(self):
        q = gen_potential(PotentialSpec(kind="gaussian"), GRID)
        np.testing.assert_allclose(q.values, np.exp(-np.abs(GRID.z) ** 2 / 2), rtol=1e-15)

    def test_gaussian_center_and_width(self):
        spec = PotentialSpec(kind="gaussian", amplitude=2.0, width=0.5, center=1 + 1j)
        q = gen_potential(spec, GRID)
        want = 2.0 * np.exp(-np.abs(GRID.z - (1 + 1j)) ** 2 / 0.5)
        np.testing.assert_allclose(q.values, want, rtol=1e-14)

    def test_poly_gaussian_is_complex_valued(self):
        q = gen_potential(PotentialSpec(kind="poly_gaussian"), GRID)
        assert np.max(np.abs(q.values.imag)) > 0.1

    def test_target_hss_exact(self):
        spec = PotentialSpec(
            kind="random_bandlimited", band=2.0, seed=11, target_hss=1.0, target_s=0.5
        )
        q = gen_potential(spec, GRID)
        assert hss_norm(q, 0.5) == pytest.approx(1.0, abs=1e-12)

    def test_deterministic_bitwise(self):
        spec = PotentialSpec(kind="random_bandlimited", band=2.0, seed=99)
        a = gen_potential(spec, GRID)
        b = gen_potential(spec, GRID)
        np.testing.assert_array_equal(a.values, b.values)

    def test_band_above_nyquist_rejected(self):
        spec = PotentialSpec(kind="random_bandlimited", band=1e4, seed=1)
        with pytest.raises(ConfigError, match="Nyquist"):
            gen_potential(spec, GRID)

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            PotentialSpec(kind="delta")
        with pytest.raises(ConfigError):
            PotentialSpec(width=0.0)
        with pytest.raises(ConfigError):
            PotentialSpec(band=-1.0)


class TestExperimentReport:
    def test_duplicate_keys_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            ExperimentReport("x", (("a", 1.0), ("a", 2.0)), (), "", 0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            ExperimentReport("x", (("a", np.nan),), (), "", 0)

    def test_csv_round_trip(self, tmp_path):
        rep = ExperimentReport(
            name="demo",
            scalars=(("alpha", 1.5), ("beta", -2.25e-7)),
            series=(("curve", ((1.0, 2.0), (2.0, 4.0))), ("other", ((0.5, 0.25),))),
            config_digest="abc123",
            seed=42,
        )
        path = write_report_csv(rep, tmp_path)
        assert path.endswith("demo-42.csv")
        back = read_report_csv(path)
        assert back == rep

    def test_csv_layout(self, tmp_path):
        rep = ExperimentReport("demo", (("a", 1.0),), (("s", ((1.0, 2.0),)),), "d", 7)
        path = write_report_csv(rep, tmp_path)
        lines = open(path).read().splitlines()
        assert lines[0] == "key,value"
        assert "a,1.0" in lines
        assert "series:s" in lines
        assert lines.index("series:s") > lines.index("a,1.0")


class TestPlancherelCheck:
    def test_zero_potential_degenerate(self):
        spec = PotentialSpec(kind="gaussian", amplitude=0.0)
        rep = plancherel_check(spec, [GRID])
        assert rep.scalar("defect") == 0.0
        assert rep.scalar("degenerate") == 1.0
        assert not rep.has_scalar("ratio")

    def test_gaussian_mini(self):
        rep = plancherel_check(PotentialSpec(), [GRID], threads=2)
        assert abs(rep.scalar("ratio") - 1.0) <= 1e-4
        assert rep.scalar("norm_q") == pytest.approx(np.sqrt(np.pi), abs=1e-6)

    def test_refinement_series(self):
        grids = [Grid2D(16, 7.0), Grid2D(32, 7.0)]
        rep = plancherel_check(PotentialSpec(), grids, threads=2)
        pts = rep.series_points("defect_vs_N")
        assert [x for x, _ in pts] == [16, 32]
        assert pts[1][1] < pts[0][1]

    def test_deterministic(self):
        a = plancherel_check(PotentialSpec(), [GRID], threads=1)
        b = plancherel_check(PotentialSpec(), [GRID], threads=2)
        assert a == b


class TestRoundtripCheck:
    def test_zero_potential_degenerate(self):
        rep = roundtrip_check(PotentialSpec(kind="gaussian", amplitude=0.0), [GRID])
        assert rep.scalar("rel_error") == 0.0
        assert rep.scalar("degenerate") == 1.0

    @pytest.mark.filterwarnings("ignore::dbarscat.BoundaryContaminationWarning")
    def test_gaussian_mini(self):
        rep = roundtrip_check(PotentialSpec(), [GRID], threads=2)
        assert rep.scalar("rel_error") <= 5e-3


class TestDecayExperiment:
    def test_zero_potential_flagged(self):
        spec = PotentialSpec(kind="gaussian", amplitude=0.0)
        rep = decay_experiment(spec, 0.5, 4.0, [1, 2, 4], 2, 3, Grid2D(64, 4.0))
        assert rep.scalar("degenerate") == 1.0
        assert not rep.has_scalar("fitted_exponent")

    def test_gaussian_decay_fit(self):
        # nyquist of (128, 4) is ~100; k up to 16 is resolved
        spec = PotentialSpec(kind="gaussian", width=0.7, target_hss=1.0, target_s=0.5)
        rep = decay_experiment(spec, 0.5, 4.0, [1, 2, 4, 8, 16], 4, 5, Grid2D(128, 4.0))
        assert rep.scalar("fitted_exponent") <= -0.3
        assert 0.0 < rep.scalar("r_squared") <= 1.0
        tail = rep.series_points("linf_tail_vs_k")
        assert all(np.isfinite(y) for _, y in tail)

    def test_aliasing_k_rejected(self):
        spec = PotentialSpec()
        with pytest.raises(ConfigError, match="Nyquist"):
            decay_experiment(spec, 0.5, 4.0, [1, 2, 1000], 2, 3, Grid2D(64, 4.0))

    def test_validates_p_and_klist(self):
        spec = PotentialSpec()
        with pytest.raises(ConfigError):
            decay_experiment(spec, 0.5, 2.0, [1, 2], 2, 3, Grid2D(64, 4.0))
        with pytest.raises(ConfigError):
            decay_experiment(spec, 0.5, 4.0, [2, 1], 2, 3, Grid2D(64, 4.0))
        with pytest.raises(ConfigError):
            decay_experiment(spec, 0.5, 4.0, [0.5, 1], 2, 3, Grid2D(64, 4.0))


class TestDkSystemCheck:
    def test_zero_potential_residuals_exactly_zero(self):
        spec = PotentialSpec(kind="gaussian", amplitude=0.0)
        rep = dk_system_check(spec, GRID, 1 + 0j, [0.1, 0.05])
        for key in ("res1_vs_delta", "res2_vs_delta"):
            assert all(y == 0.0 for _, y in rep.series_points(key))
        assert rep.scalar("degenerate") == 1.0

    def test_gaussian_slope_two(self):
        rep = dk_system_check(PotentialSpec(), Grid2D(64, 7.0), 1 + 0j, [0.1, 0.05, 0.025])
        assert abs(rep.scalar("slope_res1") - 2.0) <= 0.5
        assert abs(rep.scalar("slope_res2") - 2.0) <= 0.5

    def test_validates_deltas(self):
        with pytest.raises(ConfigError):
            dk_system_check(PotentialSpec(), GRID, 1j, [0.05, 0.1])
        with pytest.raises(ConfigError):
            dk_system_check(PotentialSpec(), GRID, 1j, [-0.1])


class TestLipschitzExperiment:
    def test_small_run_ratios_finite(self):
        grids = [Grid2D(16, 7.0), Grid2D(32, 7.0)]
        rep = lipschitz_experiment(
            0.5, 1.0, 4, 21, grids, KGrid(8, 6.0), SolverConfig(), threads=2
        )
        assert rep.scalar("max_ratio") > 0
        assert rep.scalar("median_ratio") <= rep.scalar("max_ratio")
        assert rep.has_scalar("max_ratio_N16") and rep.has_scalar("max_ratio_N32")
        # both sampling regimes are recorded separately
        assert len(rep.series_points("ratio_vs_sep_indep_N32")) == 2
        assert len(rep.series_points("ratio_vs_sep_pert_N32")) == 2

    def test_deterministic(self):
        rep1 = lipschitz_experiment(0.5, 1.0, 2, 5, [GRID], KGrid(8, 6.0), threads=1)
        rep2 = lipschitz_experiment(0.5, 1.0, 2, 5, [GRID], KGrid(8, 6.0), threads=2)
        assert rep1 == rep2

    def test_requires_interior_s(self):
        with pytest.raises(ConfigError):
            lipschitz_experiment(0.0, 1.0, 2, 5, [GRID], KGrid(8, 6.0))
        with pytest.raises(ConfigError):
            lipschitz_experiment(1.0, 1.0, 2, 5, [GRID], KGrid(8, 6.0))
