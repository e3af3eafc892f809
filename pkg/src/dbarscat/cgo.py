"""CGO solutions of the d-bar Dirac system.

The scattering operator is

    S[F] = dbar_inverse( e_{-k} q d_inverse( e_k conj(q) F ) ),

complex linear in F because both conjugations land on q factors.  The first
CGO component solves (I - S) u1 = 1; the second is recovered from u1 by a
single modulated Cauchy transform u2 = dbar_inverse(e_{-k} q conj(u1)).

The decoupled components v_pm = u1 +- u2 solve the genuinely real-linear
fixed point v = 1 +- dbar_inverse(e_{-k} q conj(v)) and are handled by the
same Krylov engine on stacked real/imaginary parts.

Solvers are matrix free; one application of S costs two padded FFT
convolutions.  Residuals reported in diagnostics are always recomputed from
the returned iterate, never taken from the Krylov recurrence.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .cauchy import CauchyKernel, _dbar_inverse_raw, _d_inverse_raw, get_kernel
from .errors import ConvergenceError, GridMismatchError
from .fields import ComplexField, Grid2D, constant_field, modulation_phase

SOLVER_METHODS = ("krylov", "neumann")


@dataclass(frozen=True)
class SolverConfig:
    """Targets and limits for the CGO solves."""

    tol: float = 1e-10
    max_iter: int = 200
    method: str = "krylov"
    restart: int = 30

    def __post_init__(self):
        if not (0.0 < self.tol < 1.0):
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.method not in SOLVER_METHODS:
            raise ValueError(f"method must be one of {SOLVER_METHODS}, got {self.method!r}")
        if self.restart < 1:
            raise ValueError(f"restart must be >= 1, got {self.restart}")

    def digest(self) -> str:
        text = f"tol={self.tol!r};max_iter={self.max_iter};method={self.method};restart={self.restart}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CGOSolution:
    """(u1, u2) for one spectral parameter k, with solver diagnostics."""

    k: complex
    u1: ComplexField
    u2: ComplexField
    residual: float
    iterations: int
    converged: bool


class _ScatteringApply:
    """Matrix-free application of S for fixed (q, k), on raw arrays."""

    def __init__(self, grid: Grid2D, q: np.ndarray, k: complex, kernel: CauchyKernel):
        self.grid = grid
        self.q = q
        self.qbar = np.conj(q)
        self.k = complex(k)
        self.kernel = kernel
        self.ek = modulation_phase(grid, k, +1)
        self.emk = np.conj(self.ek)

    def s_apply(self, u: np.ndarray) -> np.ndarray:
        inner = _d_inverse_raw(self.ek * self.qbar * u, self.kernel)
        return _dbar_inverse_raw(self.emk * self.q * inner, self.kernel)

    def u2_from_u1(self, u1: np.ndarray) -> np.ndarray:
        return _dbar_inverse_raw(self.emk * self.q * np.conj(u1), self.kernel)


def gmres(matvec, b: np.ndarray, x0: np.ndarray, tol: float, restart: int, max_steps: int):
    """Restarted GMRES with modified Gram-Schmidt on flat real or complex arrays.

    Returns (x, certified relative residual, Arnoldi steps taken).  The
    residual is recomputed from x after every restart cycle, so the value
    returned never relies on the Givens recurrence estimate.
    """
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0
    x = x0.copy()
    steps = 0
    relres = np.inf
    while True:
        r = b - matvec(x)
        relres = float(np.linalg.norm(r)) / bnorm
        if relres <= tol or steps >= max_steps:
            return x, relres, steps
        m = min(restart, max_steps - steps)
        basis = np.zeros((m + 1,) + b.shape, dtype=b.dtype)
        hess = np.zeros((m + 1, m), dtype=b.dtype)
        cs = np.zeros(m, dtype=b.dtype)
        sn = np.zeros(m, dtype=b.dtype)
        g = np.zeros(m + 1, dtype=b.dtype)
        beta = float(np.linalg.norm(r))
        basis[0] = r / beta
        g[0] = beta
        j_used = 0
        for j in range(m):
            w = matvec(basis[j])
            steps += 1
            for i in range(j + 1):
                hess[i, j] = np.vdot(basis[i], w)
                w = w - hess[i, j] * basis[i]
            hnorm = float(np.linalg.norm(w))
            hess[j + 1, j] = hnorm
            if hnorm > 0.0:
                basis[j + 1] = w / hnorm
            for i in range(j):
                t = cs[i] * hess[i, j] + sn[i] * hess[i + 1, j]
                hess[i + 1, j] = -np.conj(sn[i]) * hess[i, j] + np.conj(cs[i]) * hess[i + 1, j]
                hess[i, j] = t
            denom = np.sqrt(abs(hess[j, j]) ** 2 + abs(hess[j + 1, j]) ** 2)
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j] = np.conj(hess[j, j]) / denom
                sn[j] = np.conj(hess[j + 1, j]) / denom
            hess[j, j] = cs[j] * hess[j, j] + sn[j] * hess[j + 1, j]
            hess[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            j_used = j + 1
            if abs(g[j + 1]) <= tol * bnorm or hnorm == 0.0 or steps >= max_steps:
                break
        y = np.linalg.solve(hess[:j_used, :j_used], g[:j_used])
        x = x + np.tensordot(y, basis[:j_used], axes=(0, 0))


def _neumann_iterate(s_apply, b: np.ndarray, tol: float, max_terms: int):
    """Partial sums of sum_n S^n b with a divergent-series detector.

    Stops early (not converged) if the term norm grows for 3 consecutive
    terms.  Returns (x, terms_used, diverged).
    """
    x = b.copy()
    term = b
    prev_norm = float(np.linalg.norm(b))
    grow = 0
    bnorm = prev_norm
    for n in range(1, max_terms + 1):
        term = s_apply(term)
        x = x + term
        tnorm = float(np.linalg.norm(term))
        if tnorm <= tol * bnorm:
            return x, n, False
        if tnorm > prev_norm:
            grow += 1
            if grow >= 3:
                return x, n, True
        else:
            grow = 0
        prev_norm = tnorm
    return x, max_terms, False


def _solve_u1_raw(grid: Grid2D, q: np.ndarray, k: complex, cfg: SolverConfig, kernel=None):
    """Core solve of (I - S) u1 = 1.  Returns (u1, op, residual, iterations, converged)."""
    if kernel is None:
        kernel = get_kernel(grid)
    op = _ScatteringApply(grid, q, k, kernel)
    ones = np.ones((grid.N, grid.N), dtype=np.complex128)

    def matvec(u):
        return u - op.s_apply(u)

    if cfg.method == "krylov":
        x, relres, steps = gmres(matvec, ones, ones, cfg.tol, cfg.restart, cfg.max_iter)
        return x, op, relres, steps, relres <= cfg.tol
    x, terms, diverged = _neumann_iterate(op.s_apply, ones, cfg.tol, cfg.max_iter)
    relres = float(np.linalg.norm(ones - matvec(x))) / float(np.linalg.norm(ones))
    converged = (not diverged) and relres <= cfg.tol
    return x, op, relres, terms, converged


def solve_cgo(q: ComplexField, k: complex, cfg: SolverConfig | None = None) -> CGOSolution:
    """Solve the CGO system for one k; u2 is recovered from u1 directly.

    On non-convergence the solution is still returned with converged=False
    and the certified residual, so the caller decides how to proceed.
    """
    cfg = cfg or SolverConfig()
    u1, op, relres, iters, converged = _solve_u1_raw(q.grid, q.values, k, cfg)
    u2 = op.u2_from_u1(u1)
    return CGOSolution(
        k=complex(k),
        u1=ComplexField(q.grid, u1),
        u2=ComplexField(q.grid, u2),
        residual=relres,
        iterations=iters,
        converged=converged,
    )


def solve_v(q: ComplexField, k: complex, sign: int, cfg: SolverConfig | None = None) -> ComplexField:
    """Solve the decoupled equation v = 1 + sign * dbar_inverse(e_{-k} q conj v).

    The map is real linear only, so the Krylov solve runs on stacked
    real/imaginary parts.  Raises ConvergenceError on failure.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    cfg = cfg or SolverConfig()
    grid = q.grid
    kernel = get_kernel(grid)
    qv = q.values
    emk = modulation_phase(grid, k, -1)
    n2 = grid.N * grid.N

    def t_apply(v):
        return sign * _dbar_inverse_raw(emk * qv * np.conj(v), kernel)

    def matvec(x):
        v = (x[:n2] + 1j * x[n2:]).reshape(grid.N, grid.N)
        w = v - t_apply(v)
        return np.concatenate([w.real.ravel(), w.imag.ravel()])

    b = np.concatenate([np.ones(n2), np.zeros(n2)])
    if cfg.method == "krylov":
        x, relres, iters = gmres(matvec, b, b, cfg.tol, cfg.restart, cfg.max_iter)
    else:
        ones = np.ones((grid.N, grid.N), dtype=np.complex128)
        v, iters, diverged = _neumann_iterate(t_apply, ones, cfg.tol, cfg.max_iter)
        x = np.concatenate([v.real.ravel(), v.imag.ravel()])
        relres = float(np.linalg.norm(b - matvec(x))) / float(np.linalg.norm(b))
        if diverged:
            raise ConvergenceError(
                f"solve_v(k={k}, sign={sign:+d}): Neumann series diverging "
                f"after {iters} terms, residual {relres:.3e}"
            )
    if relres > cfg.tol:
        raise ConvergenceError(
            f"solve_v(k={k}, sign={sign:+d}): residual {relres:.3e} > tol {cfg.tol:g} "
            f"after {iters} iterations"
        )
    v = (x[:n2] + 1j * x[n2:]).reshape(grid.N, grid.N)
    return ComplexField(grid, v)


def apply_scattering_operator(q: ComplexField, k: complex, field: ComplexField) -> ComplexField:
    """One application of S to a field on the same grid as q."""
    if q.grid != field.grid:
        raise GridMismatchError(f"q grid {q.grid} != field grid {field.grid}")
    op = _ScatteringApply(q.grid, q.values, k, get_kernel(q.grid))
    return ComplexField(q.grid, op.s_apply(field.values))


def born_iterate(q: ComplexField, k: complex, n: int) -> ComplexField:
    """The n-th Neumann iterate (S)^n applied to the constant 1 field."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return constant_field(q.grid, 1.0)
    op = _ScatteringApply(q.grid, q.values, k, get_kernel(q.grid))
    u = np.ones((q.grid.N, q.grid.N), dtype=np.complex128)
    for _ in range(n):
        u = op.s_apply(u)
    return ComplexField(q.grid, u)
