"""Matrix-free spectral application of the volume potential and the
strongly singular forward operator A: v -> v - div V(Q grad v).

All fields live on the quasi-periodic basis

    phi_j(x) = exp(i (j1 + alpha) x1 + i j2 pi x2 / rho) / sqrt(4 pi rho),

whose coefficients are reached from collocation samples by stripping the
exp(i alpha x1) phase and applying an FFT.  Convolution with the periodized
kernel is diagonal on this basis with multiplier sqrt(4 pi rho) * K_hat(j).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, SizeGuard
from .kernel import KernelTable
from .problem import Grid, Problem

DENSE_GUARD = 4096


@dataclass(frozen=True)
class SpectralField:
    """Complex coefficient array (FFT order) on the quasi-periodic basis."""

    coeffs: np.ndarray = field(repr=False)
    grid: Grid
    alpha: float

    def __post_init__(self):
        if self.coeffs.shape != (self.grid.n1, self.grid.n2):
            raise ShapeMismatch(
                f"coefficients {self.coeffs.shape} do not match grid "
                f"({self.grid.n1}, {self.grid.n2})"
            )

    def norm(self) -> float:
        """L2 norm over the period cell (basis is orthonormal)."""
        return float(np.linalg.norm(self.coeffs))

    def replace(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(coeffs=coeffs, grid=self.grid, alpha=self.alpha)


@dataclass(frozen=True)
class VectorSpectralField:
    """Pair of spectral fields forming a C^2-valued field."""

    g1: SpectralField
    g2: SpectralField

    def __post_init__(self):
        if self.g1.grid != self.g2.grid or self.g1.alpha != self.g2.alpha:
            raise ShapeMismatch("vector components live on different grids")


def _phase(grid: Grid, alpha: float) -> np.ndarray:
    return np.exp(1j * alpha * grid.x1_nodes())[:, None]


def _mode_signs(grid: Grid) -> np.ndarray:
    # (-1)^(j1 + j2); parity of the FFT storage index equals the parity of
    # the signed frequency because the mode counts are even
    s1 = 1.0 - 2.0 * (np.arange(grid.n1) % 2)
    s2 = 1.0 - 2.0 * (np.arange(grid.n2) % 2)
    return np.outer(s1, s2)


def to_spectral(values: np.ndarray, grid: Grid, alpha: float) -> SpectralField:
    """Collocation samples -> basis coefficients."""
    values = np.asarray(values)
    if values.shape != (grid.n1, grid.n2):
        raise ShapeMismatch(
            f"samples {values.shape} do not match grid ({grid.n1}, {grid.n2})"
        )
    work = values * np.conj(_phase(grid, alpha))
    f = np.fft.fft2(work) / (grid.n1 * grid.n2)
    coeffs = f * _mode_signs(grid) * np.sqrt(4 * np.pi * grid.rho_box)
    return SpectralField(coeffs=coeffs, grid=grid, alpha=alpha)


def to_physical(u: SpectralField) -> np.ndarray:
    """Basis coefficients -> collocation samples."""
    grid = u.grid
    f = u.coeffs * _mode_signs(grid) / np.sqrt(4 * np.pi * grid.rho_box)
    return np.fft.ifft2(f) * (grid.n1 * grid.n2) * _phase(grid, u.alpha)


def evaluate(u: SpectralField, points) -> np.ndarray:
    """Evaluate the trigonometric polynomial at arbitrary points (..., 2)."""
    pts = np.asarray(points, dtype=float)
    grid = u.grid
    aj = grid.j1_modes() + u.alpha
    mu = grid.j2_modes() * np.pi / grid.rho_box
    e1 = np.exp(1j * pts[..., 0, None] * aj)          # (..., N1)
    e2 = np.exp(1j * pts[..., 1, None] * mu)          # (..., N2)
    scale = 1.0 / np.sqrt(4 * np.pi * grid.rho_box)
    return scale * np.einsum("...i,ij,...j->...", e1, u.coeffs, e2)


def basis_field(grid: Grid, alpha: float, j1: int, j2: int) -> SpectralField:
    """Single basis function phi_(j1, j2) as a spectral field."""
    coeffs = np.zeros((grid.n1, grid.n2), dtype=complex)
    coeffs[j1 % grid.n1, j2 % grid.n2] = 1.0
    return SpectralField(coeffs=coeffs, grid=grid, alpha=alpha)


def _wavenumbers(grid: Grid, alpha: float):
    aj = (grid.j1_modes() + alpha)[:, None]
    mu = (grid.j2_modes() * np.pi / grid.rho_box)[None, :]
    return aj, mu


def grad_spectral(u: SpectralField) -> VectorSpectralField:
    """Exact gradient of the basis expansion (multipliers i*alpha_j, i*mu_j)."""
    aj, mu = _wavenumbers(u.grid, u.alpha)
    return VectorSpectralField(
        g1=u.replace(1j * aj * u.coeffs),
        g2=u.replace(1j * mu * u.coeffs),
    )


def _check_table(u: SpectralField, table: KernelTable):
    if table.coeffs.shape != u.coeffs.shape:
        raise ShapeMismatch("kernel table shape does not match the field")
    if abs(table.rho - u.grid.rho_box) > 1e-14:
        raise ShapeMismatch("kernel table was built for a different box height")


def volume_potential(g: SpectralField, table: KernelTable) -> SpectralField:
    """Convolution with the periodized kernel: out(j) = sqrt(4 pi rho)
    K_hat(j) g_hat(j).

    For sources supported in |x2| <= h this equals the free volume potential
    at every node with |x2| <= rho_box - h, up to spectral truncation.
    """
    _check_table(g, table)
    scale = np.sqrt(4 * np.pi * table.rho)
    return g.replace(scale * table.coeffs * g.coeffs)


def div_potential(g: VectorSpectralField, table: KernelTable) -> SpectralField:
    """Divergence of the volume potential of a vector density."""
    _check_table(g.g1, table)
    aj, mu = _wavenumbers(g.g1.grid, g.g1.alpha)
    scale = np.sqrt(4 * np.pi * table.rho)
    coeffs = scale * table.coeffs * (
        1j * aj * g.g1.coeffs + 1j * mu * g.g2.coeffs
    )
    return g.g1.replace(coeffs)


def _pad_coeffs(c: np.ndarray, grid: Grid, fine: Grid) -> np.ndarray:
    # negative mode numbers index the fine array from the end, which is
    # exactly their FFT storage slot
    out = np.zeros((fine.n1, fine.n2), dtype=complex)
    out[np.ix_(grid.j1_modes(), grid.j2_modes())] = c
    return out


def _truncate_coeffs(c: np.ndarray, grid: Grid) -> np.ndarray:
    return c[np.ix_(grid.j1_modes(), grid.j2_modes())]


def pointwise_matrix_product(
    q_grid: np.ndarray, g: VectorSpectralField, dealias: bool = False,
    q_sampler=None,
) -> VectorSpectralField:
    """Physical-space product Q(x) * grad(x), optionally dealiased.

    With ``dealias`` the gradient is zero-padded to a twice finer grid
    (covers the 3/2 rule; mode counts stay powers of two), the product is
    formed there with the contrast resampled by ``q_sampler``, and the
    result is truncated back; aliasing of the quadratic term then vanishes
    for band-limited factors.
    """
    grid = g.g1.grid
    alpha = g.g1.alpha
    if not dealias:
        p1 = to_physical(g.g1)
        p2 = to_physical(g.g2)
        h1 = q_grid[..., 0, 0] * p1 + q_grid[..., 0, 1] * p2
        h2 = q_grid[..., 1, 0] * p1 + q_grid[..., 1, 1] * p2
        return VectorSpectralField(
            g1=to_spectral(h1, grid, alpha), g2=to_spectral(h2, grid, alpha)
        )
    if q_sampler is None:
        raise ValueError("dealiasing requires the contrast sampler")
    fine = Grid(n1=2 * grid.n1, n2=2 * grid.n2, rho_box=grid.rho_box)
    qf = q_sampler(*fine.mesh())
    up1 = SpectralField(_pad_coeffs(g.g1.coeffs, grid, fine), fine, alpha)
    up2 = SpectralField(_pad_coeffs(g.g2.coeffs, grid, fine), fine, alpha)
    p1 = to_physical(up1)
    p2 = to_physical(up2)
    h1 = to_spectral(qf[..., 0, 0] * p1 + qf[..., 0, 1] * p2, fine, alpha)
    h2 = to_spectral(qf[..., 1, 0] * p1 + qf[..., 1, 1] * p2, fine, alpha)
    return VectorSpectralField(
        g1=SpectralField(_truncate_coeffs(h1.coeffs, grid), grid, alpha),
        g2=SpectralField(_truncate_coeffs(h2.coeffs, grid), grid, alpha),
    )


def apply_forward(
    u: SpectralField, problem: Problem, table: KernelTable,
    dealias: bool = False,
) -> SpectralField:
    """Forward operator u - div V(Q grad u) on the collocation grid."""
    qg = pointwise_matrix_product(
        problem.q_grid, grad_spectral(u), dealias=dealias,
        q_sampler=problem.contrast.sample if dealias else None,
    )
    lk = div_potential(qg, table)
    return u.replace(u.coeffs - lk.coeffs)


def contrast_gradient_potential(
    u: SpectralField, problem: Problem, table: KernelTable,
) -> SpectralField:
    """The compact-candidate part alone: div V(Q grad u)."""
    qg = pointwise_matrix_product(problem.q_grid, grad_spectral(u))
    return div_potential(qg, table)


def assemble_dense(problem: Problem, table: KernelTable,
                   operator=apply_forward) -> np.ndarray:
    """Dense matrix of the operator in the spectral basis (oracle sizes only).

    Column m is the operator applied to the m-th basis vector; the flattening
    order is row-major over the FFT-ordered coefficient array.
    """
    n = problem.grid.n1 * problem.grid.n2
    if n > DENSE_GUARD:
        raise SizeGuard(f"dense assembly of size {n} exceeds guard {DENSE_GUARD}")
    out = np.zeros((n, n), dtype=complex)
    shape = (problem.grid.n1, problem.grid.n2)
    for m in range(n):
        e = np.zeros(n, dtype=complex)
        e[m] = 1.0
        u = SpectralField(e.reshape(shape), problem.grid, problem.alpha)
        out[:, m] = operator(u, problem, table).coeffs.reshape(-1)
    return out
