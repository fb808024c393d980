"""Scattering-problem definition: period-cell geometry, incident wave,
material contrast and the collocation grid.

Conventions (fixed throughout the library):

* the structure is 2*pi-periodic in x1 and bounded in x2;
* the incident plane wave u^i(x) = exp(i k x.d) travels downward, d2 < 0;
* alpha = k*d1 is the quasi-periodicity parameter, alpha_j = j + alpha;
* the contrast Q(x) is a complex symmetric 2x2 matrix field vanishing for
  |x2| > h.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, NonSymmetric, RayleighAnomaly, ShapeMismatch

ANOMALY_RTOL = 1e-10


@dataclass(frozen=True)
class IncidentWave:
    """Downward plane wave exp(i k x.d) with |d| = 1 and d2 < 0."""

    k: float
    d: tuple[float, float]

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        d1, d2 = self.d
        if abs(np.hypot(d1, d2) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, got {self.d}")
        if d2 >= 0:
            raise ValueError("incidence is from above: d2 must be negative")

    @property
    def alpha(self) -> float:
        return self.k * self.d[0]

    def check_nonresonance(self):
        """Reject wavenumbers at a cutoff order (Wood anomaly).

        Checks k^2 != (j + alpha)^2 for every order that could possibly be
        anomalous, |j| <= k + |alpha| + 1.
        """
        k2 = self.k**2
        tol = ANOMALY_RTOL * max(1.0, k2)
        jmax = int(np.ceil(self.k + abs(self.alpha) + 1))
        for j in range(-jmax, jmax + 1):
            if abs(k2 - (j + self.alpha) ** 2) < tol:
                raise RayleighAnomaly(j, self.k, self.alpha)

    @classmethod
    def from_angle(cls, k: float, theta_deg: float) -> "IncidentWave":
        """Build from the incidence angle: d = (sin theta, -cos theta)."""
        th = np.deg2rad(theta_deg)
        return cls(k=k, d=(float(np.sin(th)), float(-np.cos(th))))


@dataclass(frozen=True)
class ContrastField:
    """Material contrast Q = eps_r^{-1} - I.

    ``sampler(x1, x2)`` returns the 2x2 complex matrix Q at a point and must
    accept numpy arrays broadcast to shape (..., 2, 2).  The sampler is
    2*pi-periodic in x1 and must return exactly zero for |x2| > h.
    """

    sampler: object
    h: float
    isotropic: bool = False

    def sample(self, x1, x2) -> np.ndarray:
        """Evaluate the sampler on broadcastable coordinate arrays."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        q = np.asarray(self.sampler(x1, x2), dtype=complex)
        want = np.broadcast_shapes(x1.shape, x2.shape) + (2, 2)
        if q.shape != want:
            raise ShapeMismatch(
                f"sampler returned shape {q.shape}, expected {want}"
            )
        return q


@dataclass(frozen=True)
class Grid:
    """Uniform collocation grid on the box (-pi, pi) x (-rho_box, rho_box).

    Mode counts must be even powers of two; physical nodes are
    x1 = -pi + 2*pi*m/N1 and x2 = -rho_box + 2*rho_box*m/N2, and the
    spectral index sets are j1 in [-N1/2, N1/2), j2 in [-N2/2, N2/2),
    stored in FFT-natural order.
    """

    n1: int
    n2: int
    rho_box: float

    def __post_init__(self):
        for n, name in ((self.n1, "n1"), (self.n2, "n2")):
            if n < 2 or (n & (n - 1)) != 0:
                raise ValueError(f"{name} must be a power of two >= 2, got {n}")
        if self.rho_box <= 0:
            raise GeometryError(f"rho_box must be positive, got {self.rho_box}")

    @property
    def cell_area(self) -> float:
        return (2 * np.pi / self.n1) * (2 * self.rho_box / self.n2)

    def x1_nodes(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.n1) / self.n1

    def x2_nodes(self) -> np.ndarray:
        return -self.rho_box + 2 * self.rho_box * np.arange(self.n2) / self.n2

    def j1_modes(self) -> np.ndarray:
        """Integer x1 frequencies in FFT storage order."""
        return np.fft.fftfreq(self.n1, 1.0 / self.n1).astype(int)

    def j2_modes(self) -> np.ndarray:
        """Integer x2 frequencies in FFT storage order."""
        return np.fft.fftfreq(self.n2, 1.0 / self.n2).astype(int)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (N1, N2) arrays (x1 varies along axis 0)."""
        return np.meshgrid(self.x1_nodes(), self.x2_nodes(), indexing="ij")


@dataclass(frozen=True)
class Problem:
    """Immutable solver input: wave, contrast, grid and the sampled contrast.

    ``q_grid`` has shape (N1, N2, 2, 2); ``rho_ref`` is the reference height
    of the Rayleigh expansion (h < rho_ref <= rho_box).
    """

    wave: IncidentWave
    contrast: ContrastField
    grid: Grid
    q_grid: np.ndarray = field(repr=False)
    rho_ref: float

    @property
    def alpha(self) -> float:
        return self.wave.alpha

    @property
    def k(self) -> float:
        return self.wave.k

    def is_lossless(self, tol: float = 0.0) -> bool:
        return float(np.max(np.abs(self.q_grid.imag))) <= tol

    def support_mask(self) -> np.ndarray:
        """Boolean (N1, N2) mask of nodes carrying nonzero contrast."""
        return np.any(self.q_grid != 0, axis=(2, 3))


def build_problem(
    wave: IncidentWave,
    contrast: ContrastField,
    grid: Grid,
    rho_ref: float | None = None,
) -> Problem:
    """Validate the inputs and sample the contrast on the grid.

    Raises RayleighAnomaly at a cutoff order and GeometryError when the box
    is too small (rho_box >= 2h is required so that the periodized kernel
    agrees with the free quasi-periodic kernel on the support slab).
    Sampling is pointwise at the nodes, in a fixed deterministic order.
    """
    wave.check_nonresonance()
    if grid.rho_box < 2 * contrast.h - 1e-14:
        raise GeometryError(
            f"rho_box = {grid.rho_box} violates rho_box >= 2h = {2 * contrast.h}"
        )
    if rho_ref is None:
        rho_ref = contrast.h + 0.1 * (grid.rho_box - contrast.h)
    if not (contrast.h < rho_ref <= grid.rho_box):
        raise GeometryError(
            f"rho_ref = {rho_ref} must satisfy h < rho_ref <= rho_box"
        )

    xx1, xx2 = grid.mesh()
    q_grid = contrast.sample(xx1, xx2)
    # tolerance admits interface nodes that land on |x2| = h through rounding
    outside = np.abs(grid.x2_nodes()) > contrast.h * (1 + 1e-10) + 1e-300
    if np.any(q_grid[:, outside, :, :] != 0):
        raise GeometryError(
            "sampler returned nonzero contrast beyond its declared half-height h"
        )
    asym = np.max(np.abs(q_grid[..., 0, 1] - q_grid[..., 1, 0]))
    if asym > 1e-12 * max(1.0, float(np.max(np.abs(q_grid)))):
        raise NonSymmetric(f"Q12 != Q21 on the grid (max deviation {asym:g})")
    q_grid.setflags(write=False)
    return Problem(wave=wave, contrast=contrast, grid=grid, q_grid=q_grid,
                   rho_ref=float(rho_ref))


def incident_field(wave: IncidentWave, points) -> tuple[np.ndarray, np.ndarray]:
    """Incident wave values and gradients at the given points.

    ``points`` is array-like of shape (..., 2).  Returns (u, grad) with
    grad[..., :] = i*k*d * u; u is alpha-quasi-periodic in x1.
    """
    pts = np.asarray(points, dtype=float)
    kd = wave.k * np.asarray(wave.d)
    u = np.exp(1j * (pts[..., 0] * kd[0] + pts[..., 1] * kd[1]))
    grad = 1j * kd * u[..., None]
    return u, grad


def incident_on_grid(problem: Problem) -> tuple[np.ndarray, np.ndarray]:
    """Incident values and gradient components on the grid nodes.

    Returns (u, g) with u of shape (N1, N2) and g of shape (2, N1, N2).
    """
    xx1, xx2 = problem.grid.mesh()
    kd = problem.k * np.asarray(problem.wave.d)
    u = np.exp(1j * (kd[0] * xx1 + kd[1] * xx2))
    return u, np.stack((1j * kd[0] * u, 1j * kd[1] * u))


# ----------------------------------------------------------------------------
# contrast constructors


def _as_matrix(q) -> np.ndarray:
    """Accept a scalar or a 2x2 matrix and return the 2x2 contrast value."""
    q = np.asarray(q, dtype=complex)
    if q.ndim == 0:
        return q * np.eye(2)
    if q.shape != (2, 2):
        raise ValueError(f"contrast entry must be scalar or 2x2, got {q.shape}")
    if abs(q[0, 1] - q[1, 0]) > 1e-12 * max(1.0, float(np.max(np.abs(q)))):
        raise NonSymmetric("contrast matrix must be symmetric (Q12 == Q21)")
    return q


def _is_scalar_matrix(m: np.ndarray) -> bool:
    return bool(
        abs(m[0, 1]) == 0
        and abs(m[1, 0]) == 0
        and m[0, 0] == m[1, 1]
        and abs(m[0, 0].imag) == 0
    )


def _indicator_sampler(mat: np.ndarray, inside):
    """Pointwise sampler q(x) = mat * chi(x), half value on the boundary.

    ``inside(x1, x2)`` returns +1 inside, 0 outside, 0.5 on the interface;
    this keeps pointwise sampling while giving the jump its symmetric value
    when a node lands exactly on the interface.
    """

    def sampler(x1, x2):
        w = inside(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return w[..., None, None] * mat

    return sampler


def _interval_weight(t, lo, hi):
    """1 inside (lo, hi), 0 outside, 1/2 on the endpoints.

    Endpoint detection uses a relative tolerance so that grid nodes placed
    on an interface by construction are recognized through rounding; the
    midpoint value is what the trigonometric interpolant of a jump converges
    to, and sampling it keeps the collocation error second order.
    """
    t = np.asarray(t, dtype=float)
    scale = max(abs(lo), abs(hi), 1e-300)
    on_edge = (np.abs(t - lo) <= 1e-12 * scale) | (np.abs(t - hi) <= 1e-12 * scale)
    w = np.zeros(t.shape)
    w[(t > lo) & (t < hi)] = 1.0
    w[on_edge] = 0.5
    return w


def slab_contrast(q, thickness: float) -> ContrastField:
    """Homogeneous slab |x2| < thickness/2 with contrast matrix (or scalar) q."""
    mat = _as_matrix(q)
    h = thickness / 2.0

    def inside(x1, x2):
        return _interval_weight(x2, -h, h) * np.ones_like(np.asarray(x1, float))

    return ContrastField(
        sampler=_indicator_sampler(mat, inside), h=h,
        isotropic=_is_scalar_matrix(mat),
    )


def circle_contrast(q, radius: float, center_x2: float = 0.0) -> ContrastField:
    """Disk of given radius centered at (0, center_x2), repeated per period."""
    mat = _as_matrix(q)
    if radius <= 0 or radius >= np.pi:
        raise GeometryError("circle radius must lie in (0, pi)")
    h = abs(center_x2) + radius

    def inside(x1, x2):
        dx1 = (np.asarray(x1, float) + np.pi) % (2 * np.pi) - np.pi
        r = np.hypot(dx1, np.asarray(x2, float) - center_x2)
        w = np.zeros(r.shape)
        w[r < radius] = 1.0
        w[np.abs(r - radius) <= 1e-12 * radius] = 0.5
        return w

    return ContrastField(
        sampler=_indicator_sampler(mat, inside), h=h,
        isotropic=_is_scalar_matrix(mat),
    )


def rectangle_contrast(q, width: float, height: float) -> ContrastField:
    """Centered rectangle |x1| < width/2 (periodized), |x2| < height/2."""
    mat = _as_matrix(q)
    if width <= 0 or width > 2 * np.pi:
        raise GeometryError("rectangle width must lie in (0, 2*pi]")
    h = height / 2.0

    def inside(x1, x2):
        dx1 = (np.asarray(x1, float) + np.pi) % (2 * np.pi) - np.pi
        return _interval_weight(dx1, -width / 2, width / 2) * _interval_weight(
            x2, -h, h
        )

    return ContrastField(
        sampler=_indicator_sampler(mat, inside), h=h,
        isotropic=_is_scalar_matrix(mat),
    )


def two_layer_contrast(q_lower, q_upper, thickness_lower: float,
                       thickness_upper: float) -> ContrastField:
    """Two stacked homogeneous layers, centered so the stack spans |x2| < h."""
    m_lo = _as_matrix(q_lower)
    m_up = _as_matrix(q_upper)
    h = (thickness_lower + thickness_upper) / 2.0
    split = -h + thickness_lower

    def sampler(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        w_lo = _interval_weight(x2, -h, split)
        w_up = _interval_weight(x2, split, h)
        ones = np.ones(np.broadcast_shapes(x1.shape, x2.shape))
        return (w_lo * ones)[..., None, None] * m_lo + (
            (w_up * ones)[..., None, None] * m_up
        )

    iso = _is_scalar_matrix(m_lo) and _is_scalar_matrix(m_up)
    return ContrastField(sampler=sampler, h=h, isotropic=iso)


def contrast_from_permittivity(eps_r_inv, scan_grid: Grid) -> ContrastField:
    """Build the contrast Q = eps_r_inv - I from an inverse-permittivity field.

    ``eps_r_inv(x1, x2)`` must return symmetric 2x2 complex matrices equal to
    the identity outside the grating.  The support half-height is found by
    scanning the sampler on ``scan_grid``.
    """

    def sampler(x1, x2):
        e = np.asarray(eps_r_inv(x1, x2), dtype=complex)
        return e - np.eye(2)

    xx1, xx2 = scan_grid.mesh()
    q = np.asarray(eps_r_inv(xx1, xx2), dtype=complex) - np.eye(2)
    asym = np.max(np.abs(q[..., 0, 1] - q[..., 1, 0]))
    if asym > 1e-12 * max(1.0, float(np.max(np.abs(q)))):
        raise NonSymmetric("eps_r_inv must be symmetric-valued")
    nonzero = np.any(q != 0, axis=(2, 3))
    if nonzero.any():
        h = float(np.max(np.abs(xx2[nonzero])))
    else:
        h = 0.0
    offdiag = max(float(np.max(np.abs(q[..., 0, 1]))),
                  float(np.max(np.abs(q[..., 1, 0]))))
    diagdiff = float(np.max(np.abs(q[..., 0, 0] - q[..., 1, 1])))
    imagpart = float(np.max(np.abs(q[..., 0, 0].imag)))
    iso = offdiag == 0 and diagdiff == 0 and imagpart == 0
    return ContrastField(sampler=sampler, h=h, isotropic=iso)


# ----------------------------------------------------------------------------
# raster ingestion

_RASTER_MAGIC = b"VIGR"


def write_raster(path, q_cells: np.ndarray, h: float, rho: float):
    """Write a contrast raster: per-cell 2x2 complex matrices, row-major.

    Header: magic, N1, N2 (little-endian int64), h, rho (little-endian
    float64); body: N1*N2*4 complex entries as little-endian float64 pairs.
    The raster covers (-pi, pi) x (-rho, rho) with N1 x N2 cells.
    """
    q = np.ascontiguousarray(q_cells, dtype=np.complex128)
    if q.ndim != 4 or q.shape[2:] != (2, 2):
        raise ShapeMismatch(f"raster array must be (N1, N2, 2, 2), got {q.shape}")
    with open(path, "wb") as fh:
        fh.write(_RASTER_MAGIC)
        fh.write(struct.pack("<qq", q.shape[0], q.shape[1]))
        fh.write(struct.pack("<dd", h, rho))
        fh.write(q.astype("<c16").tobytes())


def raster_contrast(path) -> ContrastField:
    """Load a contrast raster written by :func:`write_raster`.

    Sampling is nearest-cell lookup (pointwise, no smoothing).
    """
    with open(path, "rb") as fh:
        if fh.read(4) != _RASTER_MAGIC:
            raise GeometryError(f"{path}: not a contrast raster file")
        n1, n2 = struct.unpack("<qq", fh.read(16))
        h, rho = struct.unpack("<dd", fh.read(16))
        data = np.frombuffer(fh.read(n1 * n2 * 4 * 16), dtype="<c16")
    if data.size != n1 * n2 * 4:
        raise GeometryError(f"{path}: truncated raster body")
    cells = data.reshape(n1, n2, 2, 2).astype(np.complex128)
    if rho < h:
        raise GeometryError(f"{path}: raster extent rho={rho} smaller than h={h}")

    def sampler(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        i1 = np.floor((x1 + np.pi) / (2 * np.pi) * n1).astype(int) % n1
        i2 = np.floor((x2 + rho) / (2 * rho) * n2).astype(int)
        out = np.zeros(np.broadcast_shapes(x1.shape, x2.shape) + (2, 2),
                       dtype=complex)
        ok = (i2 >= 0) & (i2 < n2) & (np.abs(x2) <= h)
        i1b, i2b, _ = np.broadcast_arrays(i1, i2, x1 + x2)
        out[ok] = cells[i1b[ok], np.clip(i2b[ok], 0, n2 - 1)]
        return out

    return ContrastField(sampler=sampler, h=h, isotropic=False)
