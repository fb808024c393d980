"""Rayleigh coefficients, far-field evaluation, diffraction efficiencies and
the energy-balance diagnostic.

Normalization (fixed; the single most bug-prone convention in the scheme):
the scattered field is expanded as

    u^s(x) = sum_j  c_j^+ exp(i alpha_j x1 + i beta_j (x2 - rho_ref)),  x2 >  rho_ref,
    u^s(x) = sum_j  c_j^- exp(i alpha_j x1 - i beta_j (x2 + rho_ref)),  x2 < -rho_ref,

so c_j^{+-} is the j-th Fourier coefficient of u^s on the line x2 = +-rho_ref.
In this normalization the incident wave exp(i alpha x1 - i beta_0 x2)
contributes exp(+i beta_0 rho_ref) to the zeroth below-side coefficient of
the total field.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged
from .kernel import KernelTable, _beta_many
from .operators import (
    SpectralField,
    evaluate,
    grad_spectral,
    pointwise_matrix_product,
    to_physical,
)
from .problem import Problem
from .solver import Solution, incident_density, incident_density_spectral

EVANESCENT_DROP = 40.0


@dataclass(frozen=True)
class RayleighData:
    """One-sided Rayleigh coefficients of the scattered field.

    ``coefficients[j]`` maps the order to its amplitude; orders whose decay
    exponent Im(beta_j) * rho_ref exceeds the drop threshold are stored as
    exact zeros and listed in ``truncated``.
    """

    side: str                       # "+" above, "-" below
    coefficients: dict = field(repr=False)
    propagating: tuple
    rho_ref: float
    truncated: tuple = ()

    def order(self, j: int) -> complex:
        return self.coefficients[j]


def scattered_density(problem: Problem, table: KernelTable,
                      u: SpectralField,
                      dealias: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Physical samples of w = Q grad(u^s + u^i), the solved density.

    Uses the same product rule as the solve: mixing the plain and the
    dealiased products would desynchronize the density from the field and
    corrupt the energy balance at aliasing level.
    """
    if not dealias:
        g = grad_spectral(u)
        p1 = to_physical(g.g1)
        p2 = to_physical(g.g2)
        f1, f2 = incident_density(problem)
        q = problem.q_grid
        w1 = q[..., 0, 0] * p1 + q[..., 0, 1] * p2 + f1
        w2 = q[..., 1, 0] * p1 + q[..., 1, 1] * p2 + f2
        return w1, w2
    qg = pointwise_matrix_product(problem.q_grid, grad_spectral(u),
                                  dealias=True,
                                  q_sampler=problem.contrast.sample)
    f = incident_density_spectral(problem, dealias=True)
    w1 = to_physical(u.replace(qg.g1.coeffs + f.g1.coeffs))
    w2 = to_physical(u.replace(qg.g2.coeffs + f.g2.coeffs))
    return w1, w2


def rayleigh_coefficients(
    solution: Solution,
    problem: Problem,
    table: KernelTable,
    side: str,
    j_max: int | None = None,
) -> RayleighData:
    """Rayleigh coefficients from moments of the solved density.

    For a density w supported in the grating slab the scattered field above
    (below) is grad G * w summed over orders, which gives

        c_j^{+-} = -(e^{i beta_j rho_ref} / (4 pi beta_j))
                   integral_D e^{-i alpha_j y1 -+ i beta_j y2}
                              (alpha_j w_1 +- beta_j w_2) dy,

    evaluated by the trapezoidal rule on the grid (spectrally accurate in
    the periodic direction).
    """
    if not solution.converged:
        raise NotConverged("rayleigh_coefficients requires a converged solve")
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    sgn = 1.0 if side == "+" else -1.0
    if j_max is None:
        j_max = problem.grid.n1 // 2 - 1

    w1, w2 = scattered_density(problem, table, solution.u,
                               dealias=solution.dealias)
    xx1, xx2 = problem.grid.mesh()
    cell = problem.grid.cell_area
    k, alpha, rho_ref = problem.k, problem.alpha, problem.rho_ref

    orders = np.arange(-j_max, j_max + 1)
    betas = _beta_many(orders, k**2, alpha)
    coeffs: dict[int, complex] = {}
    truncated = []
    propagating = []
    for j, bj in zip(orders.tolist(), betas):
        if bj.imag == 0.0:
            propagating.append(j)
        if bj.imag * rho_ref > EVANESCENT_DROP:
            coeffs[j] = 0.0
            truncated.append(j)
            continue
        aj = j + alpha
        phase = np.exp(-1j * aj * xx1 - sgn * 1j * bj * xx2)
        moment = cell * np.sum(phase * (aj * w1 + sgn * bj * w2))
        coeffs[j] = complex(
            -np.exp(1j * bj * rho_ref) / (4 * np.pi * bj) * moment
        )
    return RayleighData(
        side=side,
        coefficients=coeffs,
        propagating=tuple(propagating),
        rho_ref=rho_ref,
        truncated=tuple(truncated),
    )


def rayleigh_line_integral(
    solution: Solution, problem: Problem, side: str, orders,
) -> dict[int, complex]:
    """Rayleigh coefficients from the line-integral definition.

    (1/2pi) * integral of u^s(x1, +-rho_ref) e^{-i alpha_j x1} dx1, with the
    box field reconstructed spectrally on the line.  Independent route used
    to pin the kernel and multiplier conventions.
    """
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    x2 = problem.rho_ref if side == "+" else -problem.rho_ref
    grid = problem.grid
    c = solution.u.coeffs
    mu = grid.j2_modes() * np.pi / grid.rho_box
    line = c @ np.exp(1j * mu * x2)         # per-j1 coefficient on the line
    line /= np.sqrt(4 * np.pi * grid.rho_box)
    out = {}
    j1 = grid.j1_modes()
    lookup = {int(j): i for i, j in enumerate(j1)}
    for j in orders:
        out[int(j)] = complex(line[lookup[int(j)]])
    return out


def scattered_field_at(
    solution: Solution,
    problem: Problem,
    table: KernelTable,
    points,
    rayleigh_above: RayleighData | None = None,
    rayleigh_below: RayleighData | None = None,
) -> np.ndarray:
    """Scattered field anywhere: box evaluation inside |x2| <= rho_ref,
    Rayleigh series outside."""
    if not solution.converged:
        raise NotConverged("scattered_field_at requires a converged solve")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.zeros(pts.shape[0], dtype=complex)
    inside = np.abs(pts[:, 1]) <= problem.rho_ref
    if inside.any():
        out[inside] = evaluate(solution.u, pts[inside])
    for upper in (True, False):
        mask = (~inside) & (pts[:, 1] > 0 if upper else pts[:, 1] < 0)
        if not mask.any():
            continue
        data = rayleigh_above if upper else rayleigh_below
        if data is None:
            data = rayleigh_coefficients(
                solution, problem, table, "+" if upper else "-"
            )
        sgn = 1.0 if upper else -1.0
        for j, cj in data.coefficients.items():
            if cj == 0.0:
                continue
            bj = complex(_beta_many(np.array([j]), problem.k**2,
                                    problem.alpha)[0])
            arg = (j + problem.alpha) * pts[mask, 0] + sgn * bj * (
                pts[mask, 1] - sgn * data.rho_ref
            )
            out[mask] += cj * np.exp(1j * arg)
    return out


@dataclass(frozen=True)
class EfficiencyTable:
    """Per-order power budget of the solved problem.

    Efficiencies are normalized to unit incident flux (division by beta_0),
    so for a lossless grating reflected plus transmitted totals equal one.
    """

    orders: tuple
    alphas: tuple
    betas: tuple
    reflected: tuple
    transmitted: tuple

    @property
    def total_reflected(self) -> float:
        return float(sum(self.reflected))

    @property
    def total_transmitted(self) -> float:
        return float(sum(self.transmitted))

    @property
    def absorbed(self) -> float:
        return 1.0 - self.total_reflected - self.total_transmitted


def efficiencies(
    rayleigh_above: RayleighData,
    rayleigh_below: RayleighData,
    problem: Problem,
) -> EfficiencyTable:
    """Diffraction efficiencies over the propagating set.

    The zeroth transmitted amplitude carries the incident contribution
    exp(+i beta_0 rho_ref) of this normalization (see the module docstring);
    getting this phase wrong is the classic energy-balance bug.
    """
    k, alpha = problem.k, problem.alpha
    rho_ref = rayleigh_below.rho_ref
    orders = rayleigh_above.propagating
    beta0 = complex(_beta_many(np.array([0]), k**2, alpha)[0])
    rows_r, rows_t, alphas, betas = [], [], [], []
    for j in orders:
        bj = complex(_beta_many(np.array([j]), k**2, alpha)[0])
        flux = bj.real / beta0.real
        up = rayleigh_above.order(j)
        down = rayleigh_below.order(j)
        if j == 0:
            down = down + np.exp(1j * beta0 * rho_ref)
        rows_r.append(max(flux * abs(up) ** 2, 0.0))
        rows_t.append(max(flux * abs(down) ** 2, 0.0))
        alphas.append(j + alpha)
        betas.append(bj)
    return EfficiencyTable(
        orders=tuple(int(j) for j in orders),
        alphas=tuple(alphas),
        betas=tuple(betas),
        reflected=tuple(rows_r),
        transmitted=tuple(rows_t),
    )


def energy_balance(table: EfficiencyTable, problem: Problem,
                   passivity_tol: float = 1e-8) -> float:
    """Energy-conservation defect (lossless) or absorbed fraction (lossy).

    For a lossless contrast returns |1 - sum of efficiencies|.  Otherwise
    returns the absorbed fraction, which must be nonnegative for passive
    media: in the radiating convention of this library a dissipative
    contrast has Im Q negative semidefinite.
    """
    absorbed = table.absorbed
    if problem.is_lossless():
        return abs(absorbed)
    if absorbed < -passivity_tol:
        raise ValueError(
            f"negative absorption {absorbed:.3e}: medium is active "
            "(passive contrast requires Im Q <= 0 in this convention)"
        )
    return absorbed


# ----------------------------------------------------------------------------
# serialization


def efficiency_csv(table: EfficiencyTable) -> str:
    """RFC-4180 CSV with one row per propagating order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["j", "alpha_j", "beta_j_re", "beta_j_im",
                     "e_refl", "e_trans"])
    for i, j in enumerate(table.orders):
        writer.writerow([
            j,
            repr(float(table.alphas[i])),
            repr(float(table.betas[i].real)),
            repr(float(table.betas[i].imag)),
            repr(float(table.reflected[i])),
            repr(float(table.transmitted[i])),
        ])
    return buf.getvalue()


def efficiency_json(table: EfficiencyTable, problem: Problem,
                    metadata: dict | None = None) -> str:
    """JSON document with per-order rows plus run metadata (stable key order)."""
    doc = {
        "orders": [
            {
                "j": int(j),
                "alpha_j": float(table.alphas[i]),
                "beta_j_re": float(table.betas[i].real),
                "beta_j_im": float(table.betas[i].imag),
                "e_refl": float(table.reflected[i]),
                "e_trans": float(table.transmitted[i]),
            }
            for i, j in enumerate(table.orders)
        ],
        "totals": {
            "reflected": table.total_reflected,
            "transmitted": table.total_transmitted,
            "absorbed": table.absorbed,
        },
        "metadata": {
            "k": problem.k,
            "alpha": problem.alpha,
            "n1": problem.grid.n1,
            "n2": problem.grid.n2,
            "rho_box": problem.grid.rho_box,
            "rho_ref": problem.rho_ref,
            **(metadata or {}),
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
