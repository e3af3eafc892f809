"""Reproducible experiments: Plancherel defect, inversion round trip,
operator decay, derivative-system residuals, local Lipschitz ratios.

Every experiment is a pure function of (spec, config, seed) and produces an
ExperimentReport of named scalars and series; repeated runs are bitwise
identical.  Degenerate inputs (zero potentials) yield a flagged report, not
a silent one.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .cgo import SolverConfig, apply_scattering_operator, solve_cgo
from .errors import ConfigError, ConvergenceError
from .fields import (
    ComplexField,
    Grid2D,
    check_sobolev_index,
    constant_field,
    hss_norm,
    lp_norm,
)
from .transform import KGrid, dual_kgrid, forward_transform, inverse_transform

POTENTIAL_KINDS = ("gaussian", "poly_gaussian", "random_bandlimited")

# Modes drawn for one random band-limited potential.
_RANDOM_MODES = 64


@dataclass(frozen=True)
class PotentialSpec:
    """Deterministic recipe for a test potential."""

    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: complex = 0j
    band: float = 0.0
    target_hss: float | None = None
    target_s: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"potential kind must be one of {POTENTIAL_KINDS}, got {self.kind!r}")
        if not (np.isfinite(self.width) and self.width > 0):
            raise ConfigError(f"potential width must be positive, got {self.width}")
        if not np.isfinite(self.amplitude):
            raise ConfigError("potential amplitude must be finite")
        if self.band < 0:
            raise ConfigError(f"potential band must be >= 0, got {self.band}")
        check_sobolev_index(self.target_s)


def _raw_potential(spec: PotentialSpec, grid: Grid2D) -> np.ndarray:
    z = grid.z - complex(spec.center)
    r2 = np.abs(z) ** 2
    envelope = np.exp(-r2 / (2.0 * spec.width ** 2))
    if spec.kind == "gaussian":
        return spec.amplitude * envelope
    if spec.kind == "poly_gaussian":
        return spec.amplitude * (z / spec.width) * envelope
    # random_bandlimited: a fixed number of plane-wave modes inside |xi| <= band
    # with a smooth radial envelope.  Mode draws depend only on the seed, so
    # the same spec evaluates to the same continuum field on every grid.
    if spec.band <= 0:
        raise ConfigError("random_bandlimited potential requires band > 0")
    if spec.band > grid.nyquist:
        raise ConfigError(
            f"potential band {spec.band:g} exceeds grid Nyquist {grid.nyquist:g}"
        )
    rng = np.random.default_rng(spec.seed)
    radii = spec.band * np.sqrt(rng.uniform(0.0, 1.0, _RANDOM_MODES))
    angles = rng.uniform(0.0, 2.0 * np.pi, _RANDOM_MODES)
    coeff = rng.normal(size=_RANDOM_MODES) + 1j * rng.normal(size=_RANDOM_MODES)
    coeff /= math.sqrt(_RANDOM_MODES)
    xi1 = radii * np.cos(angles)
    xi2 = radii * np.sin(angles)
    waves = np.zeros((grid.N, grid.N), dtype=np.complex128)
    for c, a1, a2 in zip(coeff, xi1, xi2):
        waves += c * np.exp(1j * (a1 * grid.z.real + a2 * grid.z.imag))
    return spec.amplitude * envelope * waves


def gen_potential(spec: PotentialSpec, grid: Grid2D) -> ComplexField:
    """Deterministic potential; rescaled exactly when target_hss is set."""
    values = _raw_potential(spec, grid)
    field = ComplexField(grid, values)
    if spec.target_hss is not None:
        current = hss_norm(field, spec.target_s)
        if current == 0.0:
            raise ConfigError("cannot rescale a zero potential to a target norm")
        field = field * (spec.target_hss / current)
    return field


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class ExperimentReport:
    """Named scalars and (x, y) series of one experiment run."""

    name: str
    scalars: tuple[tuple[str, float], ...]
    series: tuple[tuple[str, tuple[tuple[float, float], ...]], ...]
    config_digest: str
    seed: int

    def __post_init__(self):
        keys = [k for k, _ in self.scalars] + [k for k, _ in self.series]
        if len(keys) != len(set(keys)):
            raise ValueError(f"report {self.name}: duplicate keys")
        for key, val in self.scalars:
            if not np.isfinite(val):
                raise ValueError(f"report {self.name}: scalar {key} is not finite")
        for key, pts in self.series:
            for x, y in pts:
                if not (np.isfinite(x) and np.isfinite(y)):
                    raise ValueError(f"report {self.name}: series {key} has non-finite points")

    def scalar(self, key: str) -> float:
        for k, v in self.scalars:
            if k == key:
                return v
        raise KeyError(f"report {self.name}: no scalar {key!r}")

    def has_scalar(self, key: str) -> bool:
        return any(k == key for k, _ in self.scalars)

    def series_points(self, key: str) -> tuple[tuple[float, float], ...]:
        for k, pts in self.series:
            if k == key:
                return pts
        raise KeyError(f"report {self.name}: no series {key!r}")

    def csv_filename(self) -> str:
        return f"{self.name}-{self.seed}.csv"


def _freeze_report(name, scalars, series, digest, seed) -> ExperimentReport:
    return ExperimentReport(
        name=name,
        scalars=tuple((k, float(v)) for k, v in scalars),
        series=tuple((k, tuple((float(x), float(y)) for x, y in pts)) for k, pts in series),
        config_digest=digest,
        seed=int(seed),
    )


def write_report_csv(report: ExperimentReport, out_dir) -> str:
    """Serialize to <out_dir>/<name>-<seed>.csv.

    Layout: a scalar section headed `key,value`, then one block per series
    headed `series:<key>` with `x,y` rows.  The digest and seed ride along
    as scalar-section rows.
    """
    import os

    path = os.path.join(str(out_dir), report.csv_filename())
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["key", "value"])
        w.writerow(["seed", str(report.seed)])
        w.writerow(["config_digest", report.config_digest])
        for key, val in report.scalars:
            w.writerow([key, repr(val)])
        for key, pts in report.series:
            w.writerow([f"series:{key}"])
            for x, y in pts:
                w.writerow([repr(x), repr(y)])
    return path


def read_report_csv(path) -> ExperimentReport:
    import os

    name = os.path.basename(str(path)).rsplit("-", 1)[0]
    scalars: list[tuple[str, float]] = []
    series: list[tuple[str, list[tuple[float, float]]]] = []
    seed = 0
    digest = ""
    current: list[tuple[float, float]] | None = None
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row:
                continue
            if row[0] == "key":
                continue
            if row[0].startswith("series:"):
                current = []
                series.append((row[0][len("series:"):], current))
                continue
            if current is not None:
                current.append((float(row[0]), float(row[1])))
            elif row[0] == "seed":
                seed = int(row[1])
            elif row[0] == "config_digest":
                digest = row[1]
            else:
                scalars.append((row[0], float(row[1])))
    return _freeze_report(name, scalars, series, digest, seed)


def _digest(*parts) -> str:
    text = "|".join(str(p) for p in parts)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _ols_loglog(xs, ys) -> tuple[float, float]:
    """Least-squares slope and r^2 of log y against log x."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    fit = slope * lx + intercept
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


# ---------------------------------------------------------------------------
# Experiments


def plancherel_check(
    spec: PotentialSpec,
    grids: list[Grid2D],
    cfg: SolverConfig | None = None,
    threads: int = 1,
) -> ExperimentReport:
    """Compare ||F[q]||_2 with ||q||_2 on dual-Nyquist k-grids.

    With several grids the defect is recorded against the refinement level.
    """
    cfg = cfg or SolverConfig()
    scalars: list[tuple[str, float]] = []
    series_pts: list[tuple[float, float]] = []
    for grid in grids:
        q = gen_potential(spec, grid)
        norm_q = lp_norm(q, 2)
        if norm_q == 0.0:
            scalars = [("norm_q", 0.0), ("norm_Fq", 0.0), ("defect", 0.0), ("degenerate", 1.0)]
            series_pts = []
            break
        sd = forward_transform(q, dual_kgrid(grid), cfg, threads)
        norm_f = lp_norm(sd.as_field(), 2)
        ratio = norm_f / norm_q
        defect = abs(ratio - 1.0)
        scalars = [
            ("norm_q", norm_q),
            ("norm_Fq", norm_f),
            ("ratio", ratio),
            ("defect", defect),
            ("residual_max", sd.meta.residual_max),
        ]
        series_pts.append((grid.N, defect))
    series = [("defect_vs_N", series_pts)] if len(series_pts) > 1 else []
    digest = _digest("plancherel", spec, [g.N for g in grids], [g.L for g in grids], cfg.digest())
    return _freeze_report("plancherel", scalars, series, digest, spec.seed)


def roundtrip_check(
    spec: PotentialSpec,
    grids: list[Grid2D],
    cfg: SolverConfig | None = None,
    threads: int = 1,
) -> ExperimentReport:
    """Relative L2 error of inverse_transform(forward_transform(q)) vs q."""
    cfg = cfg or SolverConfig()
    scalars: list[tuple[str, float]] = []
    series_pts: list[tuple[float, float]] = []
    for grid in grids:
        q = gen_potential(spec, grid)
        norm_q = lp_norm(q, 2)
        if norm_q == 0.0:
            scalars = [("norm_q", 0.0), ("rel_error", 0.0), ("degenerate", 1.0)]
            series_pts = []
            break
        sd = forward_transform(q, dual_kgrid(grid), cfg, threads)
        q_rec = inverse_transform(sd, grid, cfg, threads)
        rel = lp_norm(q_rec - q, 2) / norm_q
        scalars = [("norm_q", norm_q), ("rel_error", rel)]
        series_pts.append((grid.N, rel))
    series = [("error_vs_N", series_pts)] if len(series_pts) > 1 else []
    digest = _digest("roundtrip", spec, [g.N for g in grids], [g.L for g in grids], cfg.digest())
    return _freeze_report("roundtrip", scalars, series, digest, spec.seed)


def _lipschitz_pair_specs(pairs: int, seed: int):
    """Half independent draws, half controlled perturbations; seeded.

    Perturbation scales are capped so q1 + bump stays inside the ball by the
    triangle inequality (0.85 + 0.15 <= 1 in units of the radius).
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(pairs):
        s1 = int(rng.integers(0, 2 ** 63 - 1))
        s2 = int(rng.integers(0, 2 ** 63 - 1))
        if i % 2 == 0:
            scale1 = float(rng.uniform(0.3, 1.0))
            scale2 = float(rng.uniform(0.3, 1.0))
            out.append(("indep", s1, scale1, s2, scale2))
        else:
            scale1 = float(rng.uniform(0.3, 0.85))
            eps = float(10.0 ** rng.uniform(-2.5, np.log10(0.15)))
            out.append(("pert", s1, scale1, s2, eps))
    return out


def lipschitz_experiment(
    s: float,
    ball_radius: float,
    pairs: int,
    seed: int,
    grids: list[Grid2D],
    kgrid: KGrid,
    cfg: SolverConfig | None = None,
    base_spec: PotentialSpec | None = None,
    threads: int = 1,
) -> ExperimentReport:
    """Ratios ||F[q2] - F[q1]||_2 / ||q2 - q1||_{H^{s,s}} over sampled pairs.

    Pairs live in the H^{s,s} ball of the given radius.  Rescaling factors
    are fixed on the first grid and reused on refinements, so every grid
    sees the same continuum pair.  The k quadrature is a fixed kgrid,
    keeping ratios comparable across spatial refinement.  Pairs closer than
    1e-6 in H^{s,s} are excluded by construction.
    """
    s = check_sobolev_index(s)
    if not (0.0 < s < 1.0):
        raise ConfigError(f"lipschitz experiment requires 0 < s < 1, got {s}")
    if pairs < 1:
        raise ConfigError("pairs must be >= 1")
    cfg = cfg or SolverConfig()
    base = base_spec or PotentialSpec(kind="random_bandlimited", width=1.5, band=3.0)
    base_grid = grids[0]

    pair_plans = _lipschitz_pair_specs(pairs, seed)
    # realise scale factors once, on the base grid
    realised = []
    for regime, s1, a1, s2, extra in pair_plans:
        spec1 = replace(base, seed=s1, target_hss=None)
        q1b = ComplexField(base_grid, _raw_potential(spec1, base_grid))
        f1 = ball_radius * a1 / hss_norm(q1b, s)
        if regime == "indep":
            spec2 = replace(base, seed=s2, target_hss=None)
            q2b = ComplexField(base_grid, _raw_potential(spec2, base_grid))
            f2 = ball_radius * extra / hss_norm(q2b, s)
            realised.append((regime, spec1, f1, spec2, f2))
        else:
            bump = replace(base, seed=s2, target_hss=None, width=base.width * 0.75)
            bump_b = ComplexField(base_grid, _raw_potential(bump, base_grid))
            f2 = ball_radius * extra / hss_norm(bump_b, s)
            realised.append((regime, spec1, f1, bump, f2))

    scalars: list[tuple[str, float]] = []
    series: list[tuple[str, list[tuple[float, float]]]] = []
    finest_ratios: list[float] = []
    for grid in grids:
        pts_indep: list[tuple[float, float]] = []
        pts_pert: list[tuple[float, float]] = []
        ratios: list[float] = []
        for regime, spec1, f1, spec2, f2 in realised:
            q1 = ComplexField(grid, f1 * _raw_potential(spec1, grid))
            if regime == "indep":
                q2 = ComplexField(grid, f2 * _raw_potential(spec2, grid))
            else:
                q2 = ComplexField(grid, q1.values + f2 * _raw_potential(spec2, grid))
            sep = hss_norm(q2 - q1, s)
            if sep < 1e-6:  # degenerate-pair policy
                continue
            sd1 = forward_transform(q1, kgrid, cfg, threads)
            sd2 = forward_transform(q2, kgrid, cfg, threads)
            ratio = lp_norm(sd2.as_field() - sd1.as_field(), 2) / sep
            ratios.append(ratio)
            (pts_indep if regime == "indep" else pts_pert).append((sep, ratio))
        series.append((f"ratio_vs_sep_indep_N{grid.N}", pts_indep))
        series.append((f"ratio_vs_sep_pert_N{grid.N}", pts_pert))
        scalars.append((f"max_ratio_N{grid.N}", max(ratios)))
        scalars.append((f"median_ratio_N{grid.N}", float(np.median(ratios))))
        finest_ratios = ratios
    scalars.append(("max_ratio", max(finest_ratios)))
    scalars.append(("median_ratio", float(np.median(finest_ratios))))
    scalars.append(("empirical_constant", max(finest_ratios)))
    digest = _digest(
        "lipschitz", s, ball_radius, pairs, base, [g.N for g in grids], kgrid, cfg.digest()
    )
    return _freeze_report("lipschitz", scalars, series, digest, seed)


def decay_experiment(
    spec: PotentialSpec,
    s: float,
    p: float,
    k_list: list[float],
    probes: int,
    seed: int,
    grid: Grid2D,
    cfg: SolverConfig | None = None,
) -> ExperimentReport:
    """Empirical operator norms of S over |k|, with a log-log decay fit.

    For each |k| the norm is the sup over seeded random unit-L^p probes of
    ||S[F]||_p (a reproducible lower bound; S is not self adjoint).  A
    parallel series records ||S[1]||_inf * |k| for the 1/|k| mechanism.
    """
    s = check_sobolev_index(s)
    if not p > 2:
        raise ConfigError(f"decay experiment requires p > 2, got {p}")
    ks = [float(k) for k in k_list]
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])) or ks[0] < 1.0:
        raise ConfigError("k_list must be increasing with min >= 1")
    if max(ks) > grid.nyquist:
        raise ConfigError(
            f"k_list max {max(ks):g} exceeds grid Nyquist {grid.nyquist:g}; "
            "modulations would alias"
        )
    q = gen_potential(spec, grid)
    digest = _digest("decay", spec, s, p, ks, probes, grid.N, grid.L, (cfg or SolverConfig()).digest())
    if lp_norm(q, np.inf) == 0.0:
        return _freeze_report("decay", [("degenerate", 1.0)], [], digest, seed)

    rng = np.random.default_rng(seed)
    probe_fields = []
    for _ in range(probes):
        w = rng.normal(size=(grid.N, grid.N)) + 1j * rng.normal(size=(grid.N, grid.N))
        f = ComplexField(grid, w)
        probe_fields.append(f * (1.0 / lp_norm(f, p)))

    sup_norms: list[tuple[float, float]] = []
    for kk in ks:
        k = complex(kk, 0.0)
        sup = max(lp_norm(apply_scattering_operator(q, k, f), p) for f in probe_fields)
        sup_norms.append((kk, sup))
    slope, r2 = _ols_loglog([1.0 + kk for kk, _ in sup_norms], [v for _, v in sup_norms])

    one = constant_field(grid, 1.0)
    linf_pts = [
        (kk, lp_norm(apply_scattering_operator(q, complex(kk, 0.0), one), np.inf) * kk)
        for kk in ks
        if kk >= 2.0
    ]
    scalars = [("fitted_exponent", slope), ("r_squared", r2)]
    series = [("lp_norm_vs_k", sup_norms), ("linf_tail_vs_k", linf_pts)]
    return _freeze_report("decay", scalars, series, digest, seed)


def dk_system_check(
    spec: PotentialSpec,
    grid: Grid2D,
    k: complex,
    deltas: list[float],
    cfg: SolverConfig | None = None,
) -> ExperimentReport:
    """Finite-difference residuals of the derivative system in k.

    With psi = exp(i conj(k) z / 2) (u1, u2) the derivative pair equals
    exp(i conj(k) z / 2) (d_k u1, (iz/2) u2 + d_kbar u2), the modulation
    factor being independent of k.  Central differences over four
    neighbouring solves approximate the u derivatives, and the residuals of

        d_k psi1 = conj(F[q]) psi2,      d_kbar psi2 = F[q] psi1

    are recorded in L^2 for each step delta.
    """
    ds = [float(d) for d in deltas]
    if not ds or any(d <= 0 for d in ds) or any(b >= a for a, b in zip(ds, ds[1:])):
        raise ConfigError("deltas must be positive and decreasing")
    cfg = cfg or SolverConfig()
    k = complex(k)
    q = gen_potential(spec, grid)
    digest = _digest("dksys", spec, k, ds, grid.N, grid.L, cfg.digest())

    def u_pair(kk: complex):
        sol = solve_cgo(q, kk, cfg)
        if not sol.converged:
            raise ConvergenceError(
                f"dk_system_check: solve at k={kk} failed (residual {sol.residual:.3e})"
            )
        return sol.u1.values, sol.u2.values

    u1_0, u2_0 = u_pair(k)
    mod = np.exp(0.5j * np.conj(k) * grid.z)
    psi1_0 = mod * u1_0
    psi2_0 = mod * u2_0
    h2 = grid.h ** 2
    emk = np.exp(-1j * (k.real * grid.z.real + k.imag * grid.z.imag))
    fq = complex((0.5j / np.pi) * h2 * np.sum(emk * q.values * np.conj(u1_0)))

    def norm(a) -> float:
        return float(np.sqrt(h2 * np.sum(np.abs(a) ** 2)))

    norm_psi1 = norm(psi1_0)
    norm_psi2 = norm(psi2_0)
    degenerate = lp_norm(q, np.inf) == 0.0

    res1_pts: list[tuple[float, float]] = []
    res2_pts: list[tuple[float, float]] = []
    for d in ds:
        u1_pr, u2_pr = u_pair(k + d)
        u1_mr, u2_mr = u_pair(k - d)
        u1_pi, u2_pi = u_pair(k + 1j * d)
        u1_mi, u2_mi = u_pair(k - 1j * d)
        dk_u1 = 0.5 * ((u1_pr - u1_mr) / (2 * d) - 1j * (u1_pi - u1_mi) / (2 * d))
        dkbar_u2 = 0.5 * ((u2_pr - u2_mr) / (2 * d) + 1j * (u2_pi - u2_mi) / (2 * d))
        dk_psi1 = mod * dk_u1
        dkbar_psi2 = mod * (0.5j * grid.z * u2_0 + dkbar_u2)
        res1_pts.append((d, norm(dk_psi1 - np.conj(fq) * psi2_0)))
        res2_pts.append((d, norm(dkbar_psi2 - fq * psi1_0)))

    scalars = [
        ("norm_psi1", norm_psi1),
        ("norm_psi2", norm_psi2),
        ("F_re", fq.real),
        ("F_im", fq.imag),
    ]
    if degenerate or any(r == 0.0 for _, r in res1_pts):
        scalars.append(("degenerate", 1.0))
    else:
        slope1, _ = _ols_loglog([d for d, _ in res1_pts], [r for _, r in res1_pts])
        slope2, _ = _ols_loglog([d for d, _ in res2_pts], [r for _, r in res2_pts])
        scalars.append(("slope_res1", slope1))
        scalars.append(("slope_res2", slope2))
    series = [("res1_vs_delta", res1_pts), ("res2_vs_delta", res2_pts)]
    return _freeze_report("dksys", scalars, series, digest, spec.seed)
