"""Command-line front end: config parsing, experiment dispatch, artifact I/O.

Configs are flat `key = value` files with `#` comments; unknown or duplicate
keys are hard errors and every key is validated before any computation.
Overrides arrive as repeatable `--set key=value` flags applied after the
file.  Exit codes: 0 success, 1 validation error, 2 solver non-convergence,
3 I/O error; every failure prints a single line `error: <category>: <detail>`
on standard error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from .cgo import SolverConfig
from .errors import ConfigError, ConvergenceError
from .fields import Grid2D, lp_norm, write_cf2d
from .harness import (
    ExperimentReport,
    PotentialSpec,
    POTENTIAL_KINDS,
    decay_experiment,
    dk_system_check,
    gen_potential,
    lipschitz_experiment,
    plancherel_check,
    roundtrip_check,
    write_report_csv,
)
from .transform import (
    KGrid,
    forward_transform,
    inverse_transform,
    read_sd2d,
    write_sd2d,
)

SUBCOMMANDS = ("forward", "inverse", "plancherel", "roundtrip", "lipschitz", "decay", "dksys", "gen")


@dataclass
class RunConfig:
    """Flat, fully-validated run configuration (all keys have defaults)."""

    grid_n: int = 128
    grid_l: float = 7.0
    grid_refine: tuple[int, ...] = ()
    kgrid_m: int = 0  # 0: use grid.N
    kgrid_k: float = 0.0  # 0: dual Nyquist extent
    solver_tol: float = 1e-10
    solver_max_iter: int = 200
    solver_method: str = "krylov"
    solver_restart: int = 30
    potential_kind: str = "gaussian"
    potential_amplitude: float = 1.0
    potential_width: float = 1.0
    potential_center: complex = 0j
    potential_band: float = 0.0
    potential_target_hss: float | None = None
    potential_target_s: float = 0.5
    s: float = 0.5
    p: float = 4.0
    ball_radius: float = 1.0
    pairs: int = 32
    probes: int = 8
    k_list: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    deltas: tuple[float, ...] = (0.1, 0.05, 0.025)
    k: complex = 1 + 0j
    out_dir: str = "."
    threads: int = 0  # 0: one worker per CPU
    seed: int = 0


# config-file key -> (attribute, parser, serializer)


def _parse_int(v: str) -> int:
    return int(v, 0)


def _parse_float(v: str) -> float:
    return float(v)


def _parse_complex(v: str) -> complex:
    return complex(v.replace(" ", ""))


def _parse_str(v: str) -> str:
    return v


def _parse_optional_float(v: str) -> float | None:
    return None if v.lower() in ("none", "") else float(v)


def _parse_int_list(v: str) -> tuple[int, ...]:
    return tuple(int(t.strip(), 0) for t in v.split(",") if t.strip())


def _parse_float_list(v: str) -> tuple[float, ...]:
    return tuple(float(t.strip()) for t in v.split(",") if t.strip())


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, float):
        return repr(value)
    return str(value)


_SCHEMA: dict[str, tuple[str, object]] = {
    "grid.N": ("grid_n", _parse_int),
    "grid.L": ("grid_l", _parse_float),
    "grid.refine": ("grid_refine", _parse_int_list),
    "kgrid.M": ("kgrid_m", _parse_int),
    "kgrid.K": ("kgrid_k", _parse_float),
    "solver.tol": ("solver_tol", _parse_float),
    "solver.max_iter": ("solver_max_iter", _parse_int),
    "solver.method": ("solver_method", _parse_str),
    "solver.restart": ("solver_restart", _parse_int),
    "potential.kind": ("potential_kind", _parse_str),
    "potential.amplitude": ("potential_amplitude", _parse_float),
    "potential.width": ("potential_width", _parse_float),
    "potential.center": ("potential_center", _parse_complex),
    "potential.band": ("potential_band", _parse_float),
    "potential.target_hss": ("potential_target_hss", _parse_optional_float),
    "potential.target_s": ("potential_target_s", _parse_float),
    "s": ("s", _parse_float),
    "p": ("p", _parse_float),
    "ball_radius": ("ball_radius", _parse_float),
    "pairs": ("pairs", _parse_int),
    "probes": ("probes", _parse_int),
    "k_list": ("k_list", _parse_float_list),
    "deltas": ("deltas", _parse_float_list),
    "k": ("k", _parse_complex),
    "out_dir": ("out_dir", _parse_str),
    "threads": ("threads", _parse_int),
    "seed": ("seed", _parse_int),
}


def _validate(cfg: RunConfig) -> RunConfig:
    Grid2D(cfg.grid_n, cfg.grid_l)  # validates N power of two, L > 0
    for n in cfg.grid_refine:
        Grid2D(n, cfg.grid_l)
    if cfg.kgrid_m != 0:
        KGrid(cfg.kgrid_m, cfg.kgrid_k if cfg.kgrid_k > 0 else 1.0)
    if cfg.kgrid_k < 0:
        raise ConfigError(f"kgrid.K must be >= 0, got {cfg.kgrid_k}")
    SolverConfig(cfg.solver_tol, cfg.solver_max_iter, cfg.solver_method, cfg.solver_restart)
    if cfg.potential_kind not in POTENTIAL_KINDS:
        raise ConfigError(f"potential.kind must be one of {POTENTIAL_KINDS}")
    PotentialSpec(
        kind=cfg.potential_kind,
        amplitude=cfg.potential_amplitude,
        width=cfg.potential_width,
        center=cfg.potential_center,
        band=cfg.potential_band,
        target_hss=cfg.potential_target_hss,
        target_s=cfg.potential_target_s,
        seed=cfg.seed,
    )
    if not 0.0 <= cfg.s <= 1.0:
        raise ConfigError(f"s must lie in [0, 1], got {cfg.s}")
    if cfg.p < 1.0:
        raise ConfigError(f"p must be >= 1, got {cfg.p}")
    if cfg.ball_radius <= 0:
        raise ConfigError(f"ball_radius must be positive, got {cfg.ball_radius}")
    if cfg.pairs < 1:
        raise ConfigError(f"pairs must be >= 1, got {cfg.pairs}")
    if cfg.probes < 1:
        raise ConfigError(f"probes must be >= 1, got {cfg.probes}")
    if cfg.threads < 0:
        raise ConfigError(f"threads must be >= 0, got {cfg.threads}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError(f"seed must be a u64, got {cfg.seed}")
    if not cfg.out_dir:
        raise ConfigError("out_dir must be non-empty")
    return cfg


def _apply_entry(cfg: RunConfig, key: str, value: str, where: str) -> None:
    if key not in _SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    attr, parser = _SCHEMA[key]
    try:
        setattr(cfg, attr, parser(value))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc


def parse_config(path) -> RunConfig:
    """Parse and validate a flat key = value config file."""
    cfg = RunConfig()
    seen: set[str] = set()
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
            key, value = (t.strip() for t in text.split("=", 1))
            if key in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            seen.add(key)
            _apply_entry(cfg, key, value, f"{path}:{lineno}")
    return _validate(cfg)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) reproduces cfg exactly."""
    lines = []
    for key, (attr, _) in _SCHEMA.items():
        lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def _solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(cfg.solver_tol, cfg.solver_max_iter, cfg.solver_method, cfg.solver_restart)


def _potential_spec(cfg: RunConfig) -> PotentialSpec:
    return PotentialSpec(
        kind=cfg.potential_kind,
        amplitude=cfg.potential_amplitude,
        width=cfg.potential_width,
        center=cfg.potential_center,
        band=cfg.potential_band,
        target_hss=cfg.potential_target_hss,
        target_s=cfg.potential_target_s,
        seed=cfg.seed,
    )


def _grid(cfg: RunConfig) -> Grid2D:
    return Grid2D(cfg.grid_n, cfg.grid_l)


def _kgrid(cfg: RunConfig, grid: Grid2D) -> KGrid:
    # auto K keeps the canonical dual lattice spacing pi/L for any M
    m = cfg.kgrid_m if cfg.kgrid_m > 0 else grid.N
    kk = cfg.kgrid_k if cfg.kgrid_k > 0 else np.pi * m / (2.0 * grid.L)
    return KGrid(m, kk)


def _grids_for_refinement(cfg: RunConfig) -> list[Grid2D]:
    ns = cfg.grid_refine if cfg.grid_refine else (cfg.grid_n,)
    return [Grid2D(n, cfg.grid_l) for n in ns]


def _cmd_gen(cfg: RunConfig) -> None:
    q = gen_potential(_potential_spec(cfg), _grid(cfg))
    write_cf2d(q, os.path.join(cfg.out_dir, "potential.cf2d"))


def _cmd_forward(cfg: RunConfig) -> None:
    grid = _grid(cfg)
    q = gen_potential(_potential_spec(cfg), grid)
    sd = forward_transform(q, _kgrid(cfg, grid), _solver_config(cfg), cfg.threads)
    write_cf2d(q, os.path.join(cfg.out_dir, "potential.cf2d"))
    write_sd2d(sd, os.path.join(cfg.out_dir, "scattering.sd2d"))


def _cmd_inverse(cfg: RunConfig) -> None:
    sd = read_sd2d(os.path.join(cfg.out_dir, "scattering.sd2d"))
    grid = _grid(cfg)
    q_rec = inverse_transform(sd, grid, _solver_config(cfg), cfg.threads)
    write_cf2d(q_rec, os.path.join(cfg.out_dir, "reconstruction.cf2d"))
    q = gen_potential(_potential_spec(cfg), grid)
    norm_q = lp_norm(q, 2)
    scalars = [("norm_q", norm_q)]
    if norm_q == 0.0:
        scalars += [("rel_error", 0.0), ("degenerate", 1.0)]
    else:
        scalars += [("rel_error", lp_norm(q_rec - q, 2) / norm_q)]
    report = ExperimentReport(
        name="roundtrip",
        scalars=tuple(scalars),
        series=(),
        config_digest="cli-inverse",
        seed=cfg.seed,
    )
    write_report_csv(report, cfg.out_dir)


def _cmd_plancherel(cfg: RunConfig) -> None:
    report = plancherel_check(
        _potential_spec(cfg), _grids_for_refinement(cfg), _solver_config(cfg), cfg.threads
    )
    write_report_csv(report, cfg.out_dir)


def _cmd_roundtrip(cfg: RunConfig) -> None:
    report = roundtrip_check(
        _potential_spec(cfg), _grids_for_refinement(cfg), _solver_config(cfg), cfg.threads
    )
    write_report_csv(report, cfg.out_dir)


def _cmd_lipschitz(cfg: RunConfig) -> None:
    m = cfg.kgrid_m if cfg.kgrid_m > 0 else 16
    kk = cfg.kgrid_k if cfg.kgrid_k > 0 else 8.0
    report = lipschitz_experiment(
        cfg.s,
        cfg.ball_radius,
        cfg.pairs,
        cfg.seed,
        _grids_for_refinement(cfg),
        KGrid(m, kk),
        _solver_config(cfg),
        threads=cfg.threads,
    )
    write_report_csv(report, cfg.out_dir)


def _cmd_decay(cfg: RunConfig) -> None:
    report = decay_experiment(
        _potential_spec(cfg),
        cfg.s,
        cfg.p,
        list(cfg.k_list),
        cfg.probes,
        cfg.seed,
        _grid(cfg),
        _solver_config(cfg),
    )
    write_report_csv(report, cfg.out_dir)


def _cmd_dksys(cfg: RunConfig) -> None:
    report = dk_system_check(
        _potential_spec(cfg), _grid(cfg), cfg.k, list(cfg.deltas), _solver_config(cfg)
    )
    write_report_csv(report, cfg.out_dir)


_DISPATCH = {
    "gen": _cmd_gen,
    "forward": _cmd_forward,
    "inverse": _cmd_inverse,
    "plancherel": _cmd_plancherel,
    "roundtrip": _cmd_roundtrip,
    "lipschitz": _cmd_lipschitz,
    "decay": _cmd_decay,
    "dksys": _cmd_dksys,
}


def run(
    subcommand: str,
    config_path: str | None = None,
    overrides: list[str] = (),
    out_dir: str | None = None,
    threads: int | None = None,
    seed: int | None = None,
) -> int:
    """Execute one subcommand; returns the process exit code."""
    try:
        if subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}; expected one of {SUBCOMMANDS}")
        cfg = parse_config(config_path) if config_path is not None else RunConfig()
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            key, value = (t.strip() for t in item.split("=", 1))
            _apply_entry(cfg, key, value, "--set")
        if out_dir is not None:
            cfg.out_dir = out_dir
        if threads is not None:
            cfg.threads = threads
        if seed is not None:
            cfg.seed = seed
        _validate(cfg)
        os.makedirs(cfg.out_dir, exist_ok=True)
        _DISPATCH[subcommand](cfg)
        return 0
    except ConvergenceError as exc:
        print(f"error: solver: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:  # includes FormatError
        print(f"error: io: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dbarscat",
        description="Two-dimensional d-bar scattering transform experiments",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="path to a key = value config file")
    parser.add_argument("--out", default=None, help="output directory for artifacts")
    parser.add_argument("--threads", type=int, default=None, help="worker count (0 = all CPUs)")
    parser.add_argument("--seed", type=int, default=None, help="experiment seed")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override a config key (repeatable, applied after the file)",
    )
    args = parser.parse_args(argv)
    return run(
        args.subcommand,
        config_path=args.config,
        overrides=args.overrides,
        out_dir=args.out,
        threads=args.threads,
        seed=args.seed,
    )


if __name__ == "__main__":
    sys.exit(main())
