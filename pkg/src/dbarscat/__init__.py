"""Two-dimensional d-bar scattering transform with a verification harness."""

from .cauchy import (
    CauchyKernel,
    beurling,
    d_inverse,
    dbar,
    dbar_inverse,
    dz,
    get_kernel,
    modulated_dbar_inverse,
)
from .cgo import (
    CGOSolution,
    SolverConfig,
    apply_scattering_operator,
    born_iterate,
    solve_cgo,
    solve_v,
)
from .errors import (
    BoundaryContaminationWarning,
    ConfigError,
    ConvergenceError,
    FieldError,
    FormatError,
    GridMismatchError,
)
from .fields import (
    ComplexField,
    Grid2D,
    SpectralGrid,
    constant_field,
    field_from_function,
    fractional_derivative,
    hss_norm,
    lp_norm,
    modulate,
    read_cf2d,
    write_cf2d,
)
from .harness import (
    ExperimentReport,
    PotentialSpec,
    decay_experiment,
    dk_system_check,
    gen_potential,
    lipschitz_experiment,
    plancherel_check,
    read_report_csv,
    roundtrip_check,
    write_report_csv,
)
from .transform import (
    KGrid,
    ScatteringData,
    SdMeta,
    born_transform,
    dual_kgrid,
    forward_transform,
    inverse_transform,
    linear_fourier,
    linear_fourier_dual,
    read_sd2d,
    sd_l2_norm,
    write_sd2d,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryContaminationWarning",
    "CGOSolution",
    "CauchyKernel",
    "ComplexField",
    "ConfigError",
    "ConvergenceError",
    "ExperimentReport",
    "FieldError",
    "FormatError",
    "Grid2D",
    "GridMismatchError",
    "KGrid",
    "PotentialSpec",
    "ScatteringData",
    "SdMeta",
    "SolverConfig",
    "SpectralGrid",
    "apply_scattering_operator",
    "beurling",
    "born_iterate",
    "born_transform",
    "constant_field",
    "d_inverse",
    "dbar",
    "dbar_inverse",
    "decay_experiment",
    "dk_system_check",
    "dual_kgrid",
    "dz",
    "field_from_function",
    "forward_transform",
    "fractional_derivative",
    "gen_potential",
    "get_kernel",
    "hss_norm",
    "inverse_transform",
    "linear_fourier",
    "linear_fourier_dual",
    "lipschitz_experiment",
    "lp_norm",
    "modulate",
    "modulated_dbar_inverse",
    "plancherel_check",
    "read_cf2d",
    "read_report_csv",
    "read_sd2d",
    "roundtrip_check",
    "sd_l2_norm",
    "solve_cgo",
    "solve_v",
    "write_cf2d",
    "write_report_csv",
    "write_sd2d",
]
