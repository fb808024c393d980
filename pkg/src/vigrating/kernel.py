"""Closed-form Fourier multipliers of the periodized quasi-periodic kernel.

The free kernel of the quasi-periodic Helmholtz equation,

    G(x) = (i / 4 pi) * sum_j (1 / beta_j) exp(i alpha_j x1 + i beta_j |x2|),
    alpha_j = j + alpha,   beta_j = sqrt(k^2 - alpha_j^2),  Im beta_j >= 0,

is restricted to the strip |x2| < rho and extended 2*rho-periodically.  Its
Fourier coefficients with respect to the orthonormal quasi-periodic basis

    phi_j(x) = exp(i alpha_{j1} x1 + i j2 pi x2 / rho) / sqrt(4 pi rho)

are available in closed form, which is what makes the FFT-convolution path
of the volume potential exact on trigonometric polynomials.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAtZeroJ2, RayleighAnomaly, SlowConvergence
from .problem import ANOMALY_RTOL, Grid, IncidentWave


def beta(j1, k: float, alpha: float) -> complex:
    """Vertical wavenumber of order j1: sqrt(k^2 - (j1 + alpha)^2).

    Principal branch with Im >= 0; real positive for propagating orders,
    positive imaginary for evanescent ones.  Raises RayleighAnomaly within
    relative tolerance 1e-10 of cutoff.
    """
    k2 = k**2
    aj = j1 + alpha
    if abs(k2 - aj**2) < ANOMALY_RTOL * max(1.0, abs(k2)):
        raise RayleighAnomaly(j1, k, alpha)
    return complex(np.sqrt(complex(k2 - aj**2)))


def _beta_many(j1, k_squared: float, alpha: float) -> np.ndarray:
    """Vectorized vertical wavenumbers from k^2 (no anomaly check)."""
    aj = np.asarray(j1, dtype=float) + alpha
    b = np.sqrt((k_squared - aj**2).astype(complex))
    return np.where(b.imag < 0, -b, b)


def helmholtz_symbol(j1, j2, k_squared: float, alpha: float, rho: float):
    """Symbol of (Laplace + k^2) on the basis mode (j1, j2):
    k^2 - (j1 + alpha)^2 - (j2 pi / rho)^2."""
    aj = np.asarray(j1, dtype=float) + alpha
    mu = np.asarray(j2, dtype=float) * np.pi / rho
    return k_squared - aj**2 - mu**2


def degenerate_coefficient(j2: int, rho: float) -> complex:
    """Kernel coefficient at a mode where the Helmholtz symbol vanishes.

    The limiting value of the generic formula is (i / (4 |j2|)) (rho/pi)^{3/2};
    it is even in j2 because the kernel itself is even in x2.
    """
    if j2 == 0:
        raise DegenerateAtZeroJ2(
            "symbol vanished at j2 == 0; non-resonance validation failed upstream"
        )
    return 0.25j / abs(j2) * (rho / np.pi) ** 1.5


def kernel_coefficient(
    j1: int,
    j2: int,
    k: float | None,
    alpha: float,
    rho: float,
    k_squared: float | None = None,
) -> complex:
    """Fourier coefficient of the periodized kernel at mode (j1, j2).

    Generic branch: (cos(j2 pi) e^{i beta_{j1} rho} - 1) / (sqrt(4 pi rho)
    lambda_j) with lambda_j the Helmholtz symbol; when |lambda_j| falls below
    1e-8 * max(1, |k^2|) the closed-form limit value is used instead (the
    generic branch loses about eight digits there in double precision).

    Pass ``k_squared=-1.0`` (with k=None) for the exponentially damped
    reference kernel used by the compactness diagnostics.
    """
    if k_squared is None:
        k_squared = float(k) ** 2
    lam = float(helmholtz_symbol(j1, j2, k_squared, alpha, rho))
    eps_lam = 1e-8 * max(1.0, abs(k_squared))
    if abs(lam) <= eps_lam:
        return degenerate_coefficient(j2, rho)
    b = complex(_beta_many(np.array([j1]), k_squared, alpha)[0])
    num = np.cos(j2 * np.pi) * np.exp(1j * b * rho) - 1.0
    return complex(num / (np.sqrt(4 * np.pi * rho) * lam))


@dataclass(frozen=True)
class KernelTable:
    """Precomputed multiplier array K_hat(j) on a grid's index set.

    ``coeffs`` is stored in FFT order, aligned with SpectralField layouts.
    ``degenerate_modes`` lists the (j1, j2) pairs where the limit branch
    was taken.
    """

    k_squared: float
    k: float
    alpha: float
    rho: float
    coeffs: np.ndarray = field(repr=False)
    degenerate_modes: tuple = ()

    @property
    def shape(self):
        return self.coeffs.shape


def _build_table(grid: Grid, alpha: float, k_squared: float, k: float) -> KernelTable:
    rho = grid.rho_box
    j1 = grid.j1_modes()[:, None]
    j2 = grid.j2_modes()[None, :]
    lam = helmholtz_symbol(j1, j2, k_squared, alpha, rho)
    b = _beta_many(j1, k_squared, alpha)

    eps_lam = 1e-8 * max(1.0, abs(k_squared))
    degenerate = np.abs(lam) <= eps_lam
    if np.any(degenerate & (j2 == 0)):
        raise DegenerateAtZeroJ2(
            "symbol vanished at a j2 == 0 mode; non-resonance validation "
            "failed upstream"
        )

    lam_safe = np.where(degenerate, 1.0, lam)
    num = np.cos(j2 * np.pi) * np.exp(1j * b * rho) - 1.0
    coeffs = num / (np.sqrt(4 * np.pi * rho) * lam_safe)
    if np.any(degenerate):
        jj2 = np.broadcast_to(j2, coeffs.shape)
        vals = 0.25j / np.abs(np.where(degenerate, jj2, 1)) * (rho / np.pi) ** 1.5
        coeffs = np.where(degenerate, vals, coeffs)
    coeffs = np.ascontiguousarray(coeffs)
    coeffs.setflags(write=False)

    jj1 = np.broadcast_to(j1, coeffs.shape)
    jj2 = np.broadcast_to(j2, coeffs.shape)
    degs = tuple(zip(jj1[degenerate].tolist(), jj2[degenerate].tolist()))
    return KernelTable(k_squared=k_squared, k=k, alpha=alpha, rho=rho,
                       coeffs=coeffs, degenerate_modes=degs)


def kernel_table(grid: Grid, wave: IncidentWave) -> KernelTable:
    """Tabulate all N1 x N2 kernel coefficients for a validated wave."""
    wave.check_nonresonance()
    return _build_table(grid, wave.alpha, wave.k**2, wave.k)


def reference_table(grid: Grid, alpha: float) -> KernelTable:
    """Kernel table with k^2 = -1 (purely damped reference operator).

    All vertical wavenumbers are i*sqrt(1 + alpha_j^2); no cutoff orders and
    no degenerate modes exist, so no validation is needed.
    """
    return _build_table(grid, alpha, -1.0, float("nan"))


def decay_shell_stat(table: KernelTable, grid: Grid, shell: int) -> float:
    """max over |j|_inf == shell of |K_hat(j)| * (1 + alpha_j^2 + (j2 pi/rho)^2).

    The kernel coefficients decay quadratically, so this quantity is bounded
    by a single table-wide constant; comparing shells checks the bound.
    """
    j1 = grid.j1_modes()[:, None]
    j2 = grid.j2_modes()[None, :]
    ring = np.maximum(np.abs(j1), np.abs(j2)) == shell
    aj = j1 + table.alpha
    mu = j2 * np.pi / table.rho
    weight = 1.0 + aj**2 + mu**2
    return float(np.max(np.abs(table.coeffs[ring]) * weight[ring]))


def dump_table(table: KernelTable, path):
    """Binary snapshot: header N1, N2 (int64 LE), k, alpha, rho (float64 LE),
    body row-major complex128 LE."""
    n1, n2 = table.coeffs.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", n1, n2))
        fh.write(struct.pack("<ddd", table.k, table.alpha, table.rho))
        fh.write(np.ascontiguousarray(table.coeffs).astype("<c16").tobytes())


def load_table(path) -> KernelTable:
    """Read a snapshot written by :func:`dump_table`."""
    with open(path, "rb") as fh:
        n1, n2 = struct.unpack("<qq", fh.read(16))
        k, alpha, rho = struct.unpack("<ddd", fh.read(24))
        coeffs = np.frombuffer(fh.read(n1 * n2 * 16), dtype="<c16")
    coeffs = coeffs.reshape(n1, n2).astype(np.complex128)
    coeffs.setflags(write=False)
    return KernelTable(k_squared=k**2, k=k, alpha=alpha, rho=rho, coeffs=coeffs)


# ----------------------------------------------------------------------------
# truncated series evaluation (oracle use only; the production path never
# sums the kernel series pointwise)


def series_tail_bound(j_max: int, x2_abs: float, k: float, alpha: float) -> float:
    """Magnitude estimate of the first omitted terms of the kernel series.

    Both orders +-(j_max + 1) must already be evanescent; the tail of the
    series is dominated by these first omitted terms because the decay
    exponent grows with |j|.
    """
    total = 0.0
    for j in (j_max + 1, -(j_max + 1)):
        b = complex(_beta_many(np.array([j]), k**2, alpha)[0])
        if b.imag <= 0:
            raise ValueError(
                f"order {j} is not evanescent; increase the truncation"
            )
        total += np.exp(-b.imag * x2_abs) / (4 * np.pi * abs(b))
    return float(total)


def greens_series(point, k: float, alpha: float, j_max: int):
    """Truncated kernel series at one point; returns (value, tail_bound).

    Not usable on the singular line x2 = 0: raises SlowConvergence for
    |x2| < 1e-3 where the exponential decay of the tail is too weak.
    """
    x1, x2 = float(point[0]), float(point[1])
    if abs(x2) < 1e-3:
        raise SlowConvergence(
            f"series evaluation at |x2| = {abs(x2):g} < 1e-3 is unreliable"
        )
    val = greens_series_many(np.array([x1]), np.array([x2]), k, alpha, j_max)
    return complex(val[0]), series_tail_bound(j_max, abs(x2), k, alpha)


def greens_series_many(z1, z2, k: float, alpha: float, j_max: int) -> np.ndarray:
    """Vectorized truncated kernel series over offset arrays z1, z2."""
    z1, z2 = np.broadcast_arrays(
        np.asarray(z1, dtype=float), np.asarray(z2, dtype=float)
    )
    orders = np.arange(-j_max, j_max + 1)
    b = _beta_many(orders, k**2, alpha)
    aj = orders + alpha
    flat1 = z1.reshape(-1)
    flat2 = np.abs(z2.reshape(-1))
    # accumulate in chunks of orders to bound the temporary size
    out = np.zeros(flat1.shape, dtype=complex)
    chunk = max(1, int(4e6 // max(flat1.size, 1)))
    for start in range(0, orders.size, chunk):
        sl = slice(start, start + chunk)
        phase = np.exp(
            1j * np.outer(aj[sl], flat1) + 1j * np.outer(b[sl], flat2)
        )
        out += (1.0 / b[sl]) @ phase
    return (0.25j / np.pi) * out.reshape(z1.shape)
