"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest

from dbarscat import ComplexField, Grid2D, field_from_function


@pytest.fixture(scope="session")
def grid64() -> Grid2D:
    return Grid2D(64, 8.0)


@pytest.fixture(scope="session")
def grid32() -> Grid2D:
    return Grid2D(32, 8.0)


def gaussian_field(grid: Grid2D, width: float = 1.0, amplitude: float = 1.0) -> ComplexField:
    return field_from_function(
        grid, lambda z: amplitude * np.exp(-np.abs(z) ** 2 / (2.0 * width ** 2))
    )


def radial_mean_zero_field(grid: Grid2D) -> ComplexField:
    """Radial field with vanishing integral (all complex moments vanish)."""
    return field_from_function(
        grid, lambda z: np.exp(-np.abs(z) ** 2 / 2) - 0.5 * np.exp(-np.abs(z) ** 2 / 4)
    )


def random_field(grid: Grid2D, seed: int) -> ComplexField:
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(grid.N, grid.N)) + 1j * rng.normal(size=(grid.N, grid.N))
    return ComplexField(grid, w)


def brute_cauchy_sum(values: np.ndarray, grid: Grid2D, nodes: list[tuple[int, int]]) -> np.ndarray:
    """O(N^2)-per-node direct kernel sum h^2 sum_j G(z_j) / (pi (z_i - z_j)).

    The origin sample of the kernel is 0, matching the operator's convention.
    Independent of any FFT machinery.
    """
    h2 = grid.h ** 2
    out = np.empty(len(nodes), dtype=complex)
    for i, (n, m) in enumerate(nodes):
        zi = grid.z[n, m]
        diff = zi - grid.z
        with np.errstate(divide="ignore", invalid="ignore"):
            ker = 1.0 / (np.pi * diff)
        ker[n, m] = 0.0
        out[i] = h2 * np.sum(ker * values)
    return out


def cell_correction(values: np.ndarray, grid: Grid2D) -> np.ndarray:
    """The singular-cell term -(h^2/pi) dz G, via the padded spectral derivative.

    Mirrors the operator's documented definition so that brute-force kernel
    sums can be compared against the public transforms.
    """
    n = grid.N
    padded = np.zeros((2 * n, 2 * n), dtype=complex)
    padded[:n, :n] = values
    j = np.fft.fftfreq(2 * n, d=1.0 / (2 * n))
    zeta_pad = (np.pi / (2 * grid.L)) * (j[None, :] + 1j * j[:, None])
    dzg = np.fft.ifft2((0.5j * np.conj(zeta_pad)) * np.fft.fft2(padded))[:n, :n]
    return -(grid.h ** 2 / np.pi) * dzg


def loglog_slope(xs, ys) -> float:
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])
