"""Grids, complex fields, discrete Lp / weighted-Sobolev norms, multipliers.

The spatial grid is a uniform N x N lattice over [-L, L)^2 with spacing
h = 2L/N; node (m, n) sits at z = (-L + m h) + i (-L + n h).  Field arrays
are indexed values[n, m], so flat C order has the second coordinate varying
slowest.  The dual lattice carries frequencies xi = (pi/L) (j1, j2) with
j in {-N/2, ..., N/2 - 1}, stored in FFT ordering, and zeta = xi1 + i xi2.

Discrete norms use the midpoint rule h^2 sum.  The Fourier normalisation
assumed everywhere is  Fhat(xi) = (1/2pi) int F(z) exp(-i xi.z) dz, under
which the discrete Parseval identity  h^2 sum |F|^2 = (pi/L)^2 sum |Fhat|^2
holds exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import FieldError, FormatError, GridMismatchError

CF2D_MAGIC = b"CF2D"
CF2D_VERSION = 1


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def check_sobolev_index(s: float) -> float:
    """Validate a Sobolev index s in [0, 1] and return it as a float."""
    s = float(s)
    if not np.isfinite(s) or not 0.0 <= s <= 1.0:
        raise ValueError(f"Sobolev index must lie in [0, 1], got {s}")
    return s


@dataclass(frozen=True)
class Grid2D:
    """Uniform square grid on [-L, L)^2 with N points per axis (N a power of two)."""

    N: int
    L: float

    def __post_init__(self):
        if not isinstance(self.N, int) or not _is_power_of_two(self.N) or self.N < 2:
            raise ValueError(f"grid size N must be a power of two >= 2, got {self.N}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"grid half-width L must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        """1d node coordinates -L + m h, shared by both axes."""
        x = -self.L + self.h * np.arange(self.N)
        x.flags.writeable = False
        return x

    @cached_property
    def z(self) -> np.ndarray:
        """Complex node positions z = z1 + i z2, indexed [n, m]."""
        z = self.nodes[None, :] + 1j * self.nodes[:, None]
        z.flags.writeable = False
        return z

    @cached_property
    def zeta(self) -> np.ndarray:
        """Complex frequencies zeta = xi1 + i xi2 in FFT ordering, indexed [j2, j1]."""
        j = np.fft.fftfreq(self.N, d=1.0 / self.N)
        zeta = (np.pi / self.L) * (j[None, :] + 1j * j[:, None])
        zeta.flags.writeable = False
        return zeta

    @property
    def nyquist(self) -> float:
        """Largest resolvable frequency magnitude per axis, pi N / (2 L)."""
        return np.pi * self.N / (2.0 * self.L)

    def node(self, m: int, n: int) -> complex:
        return complex(self.nodes[m], self.nodes[n])


@dataclass(frozen=True)
class SpectralGrid:
    """Dual frequency lattice of a Grid2D: xi = (pi/L) j, j in {-N/2..N/2-1}."""

    grid: Grid2D

    @property
    def xi(self) -> np.ndarray:
        """1d frequencies in FFT ordering (0, ..., +max, -max, ..., -pi/L)."""
        return (np.pi / self.grid.L) * np.fft.fftfreq(self.grid.N, d=1.0 / self.grid.N)

    @property
    def zeta(self) -> np.ndarray:
        return self.grid.zeta

    @property
    def spacing(self) -> float:
        return np.pi / self.grid.L


def _coerce_values(grid: Grid2D, values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128, order="C", copy=True)
    if arr.shape == (grid.N * grid.N,):
        arr = arr.reshape(grid.N, grid.N)
    if arr.shape != (grid.N, grid.N):
        raise FieldError(f"values shape {arr.shape} does not match grid N={grid.N}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise FieldError("field contains non-finite values")
    return arr


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on a Grid2D.  Values are immutable once constructed."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        arr = _coerce_values(self.grid, self.values)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __add__(self, other: "ComplexField") -> "ComplexField":
        self._require_same_grid(other)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        self._require_same_grid(other)
        return ComplexField(self.grid, self.values - other.values)

    def __mul__(self, other) -> "ComplexField":
        if isinstance(other, ComplexField):
            self._require_same_grid(other)
            return ComplexField(self.grid, self.values * other.values)
        return ComplexField(self.grid, self.values * complex(other))

    __rmul__ = __mul__

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))

    def _require_same_grid(self, other: "ComplexField") -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")


def constant_field(grid: Grid2D, c: complex = 1.0) -> ComplexField:
    return ComplexField(grid, np.full((grid.N, grid.N), complex(c)))


def field_from_function(grid: Grid2D, fn) -> ComplexField:
    """Sample fn(z) at the grid nodes (fn takes the complex node array)."""
    return ComplexField(grid, np.asarray(fn(grid.z), dtype=np.complex128))


def lp_norm(field: ComplexField, p: float) -> float:
    """Discrete L^p norm (h^2 sum |F|^p)^(1/p); p = inf gives max |F|."""
    a = np.abs(field.values)
    if p == np.inf:
        return float(a.max())
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"p must satisfy p >= 1 or p = inf, got {p}")
    h2 = field.grid.h ** 2
    if p == 2.0:  # common case, avoid pow
        return float(np.sqrt(h2 * np.sum(a * a)))
    return float((h2 * np.sum(a ** p)) ** (1.0 / p))


def fractional_derivative(field: ComplexField, s: float) -> ComplexField:
    """Fourier multiplier |xi|^s.

    The zero frequency is multiplied by 0 for s > 0 (the mean is removed)
    and by 1 for s = 0, so that s = 0 is exactly the identity.
    """
    s = check_sobolev_index(s)
    if s == 0.0:
        return field
    mult = np.abs(field.grid.zeta) ** s  # entry at zeta=0 is 0
    out = np.fft.ifft2(mult * np.fft.fft2(field.values))
    return ComplexField(field.grid, out)


def sobolev_weight(grid: Grid2D, s: float) -> np.ndarray:
    """|z|^s evaluated at the grid nodes."""
    return np.abs(grid.z) ** check_sobolev_index(s)


def hss_norm(field: ComplexField, s: float) -> float:
    """Weighted Sobolev norm max{||F||_2, ||D^s F||_2, || |z|^s F ||_2}."""
    s = check_sobolev_index(s)
    n0 = lp_norm(field, 2)
    ns = lp_norm(fractional_derivative(field, s), 2)
    nw = lp_norm(ComplexField(field.grid, sobolev_weight(field.grid, s) * field.values), 2)
    return max(n0, ns, nw)


def modulation_phase(grid: Grid2D, k: complex, sign: int) -> np.ndarray:
    """The unimodular character e_{sign k}(z) = exp(i sign (k1 z1 + k2 z2))."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    k = complex(k)
    e1 = np.exp(1j * sign * k.real * grid.nodes)
    e2 = np.exp(1j * sign * k.imag * grid.nodes)
    return e2[:, None] * e1[None, :]


def modulate(field: ComplexField, k: complex, sign: int) -> ComplexField:
    """Pointwise multiplication by e_{sign k}(z) = exp(i sign k.z)."""
    return ComplexField(field.grid, modulation_phase(field.grid, k, sign) * field.values)


def write_cf2d(field: ComplexField, path) -> None:
    """Write the CF2D binary format (little endian, row-major, n slowest)."""
    g = field.grid
    header = struct.pack("<4sIId", CF2D_MAGIC, CF2D_VERSION, g.N, g.L)
    payload = np.ascontiguousarray(field.values).astype("<c16").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_cf2d(path) -> ComplexField:
    """Read a CF2D file; rejects wrong magic, version, or payload size."""
    with open(path, "rb") as f:
        raw = f.read()
    header_size = struct.calcsize("<4sIId")
    if len(raw) < header_size:
        raise FormatError(f"{path}: truncated CF2D header")
    magic, version, n, length = struct.unpack_from("<4sIId", raw)
    if magic != CF2D_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CF2D_MAGIC!r}")
    if version != CF2D_VERSION:
        raise FormatError(f"{path}: unsupported CF2D version {version}")
    grid = Grid2D(int(n), float(length))
    expect = header_size + 16 * grid.N * grid.N
    if len(raw) != expect:
        raise FormatError(f"{path}: payload size {len(raw)} != expected {expect}")
    values = np.frombuffer(raw, dtype="<c16", offset=header_size).reshape(grid.N, grid.N)
    return ComplexField(grid, values.astype(np.complex128))
