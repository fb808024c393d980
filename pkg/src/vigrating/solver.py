"""Right-hand-side assembly and the restarted-GMRES solve of the discrete
volume integral equation  u - div V(Q grad u) = div V(Q grad u^i).

The unknown is the scattered field on the whole computational box; since the
contrast vanishes off its support slab, the restriction to the slab solves
the same equation there and the exterior values are the potential extension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import BreakdownDetected, NotConverged
from .kernel import KernelTable
from .operators import (
    SpectralField,
    VectorSpectralField,
    apply_forward,
    div_potential,
    to_spectral,
)
from .problem import Grid, Problem, incident_on_grid


@dataclass(frozen=True)
class SolveOptions:
    rel_tol: float = 1e-8
    max_iterations: int = 500
    restart: int = 50
    record_residuals: bool = True
    dealias: bool = False

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.restart < 1:
            raise ValueError("restart must be at least 1")


@dataclass(frozen=True)
class Solution:
    """Converged (or best-effort) scattered field with its residual history.

    ``dealias`` records the product rule the solve used, so post-processing
    reconstructs the density with the same discretization.
    """

    u: SpectralField
    residual_history: tuple = field(repr=False)
    converged: bool = False
    iterations: int = 0
    dealias: bool = False


def incident_density(problem: Problem, grid=None) -> tuple[np.ndarray, np.ndarray]:
    """Physical samples of f = Q grad u^i (componentwise, zero off support).

    With an explicit finer ``grid`` the contrast and the incident gradient
    are resampled there (used by the dealiased product rule).
    """
    if grid is None or grid == problem.grid:
        _, grad = incident_on_grid(problem)
        q = problem.q_grid
    else:
        xx1, xx2 = grid.mesh()
        kd = problem.k * np.asarray(problem.wave.d)
        u = np.exp(1j * (kd[0] * xx1 + kd[1] * xx2))
        grad = np.stack((1j * kd[0] * u, 1j * kd[1] * u))
        q = problem.contrast.sample(xx1, xx2)
    f1 = q[..., 0, 0] * grad[0] + q[..., 0, 1] * grad[1]
    f2 = q[..., 1, 0] * grad[0] + q[..., 1, 1] * grad[1]
    return f1, f2


def incident_density_spectral(problem: Problem,
                              dealias: bool = False) -> VectorSpectralField:
    """Spectral components of f = Q grad u^i under the chosen product rule.

    The dealiased variant forms the product on a twice finer grid and keeps
    the coarse modes, matching the operator's dealiased application.
    """
    grid = problem.grid
    alpha = problem.alpha
    if not dealias:
        f1, f2 = incident_density(problem)
        return VectorSpectralField(
            g1=to_spectral(f1, grid, alpha),
            g2=to_spectral(f2, grid, alpha),
        )
    fine = Grid(n1=2 * grid.n1, n2=2 * grid.n2, rho_box=grid.rho_box)
    f1, f2 = incident_density(problem, grid=fine)
    c1 = to_spectral(f1, fine, alpha).coeffs[
        np.ix_(grid.j1_modes(), grid.j2_modes())
    ]
    c2 = to_spectral(f2, fine, alpha).coeffs[
        np.ix_(grid.j1_modes(), grid.j2_modes())
    ]
    return VectorSpectralField(
        g1=SpectralField(c1, grid, alpha),
        g2=SpectralField(c2, grid, alpha),
    )


def assemble_rhs(problem: Problem, table: KernelTable,
                 dealias: bool = False) -> SpectralField:
    """div V(Q grad u^i) under the same product rule as the operator."""
    return div_potential(incident_density_spectral(problem, dealias), table)


def gmres(
    matvec,
    b: np.ndarray,
    rel_tol: float = 1e-8,
    restart: int = 50,
    max_iterations: int = 500,
    breakdown_rtol: float = 1e-14,
):
    """Restarted GMRES for complex systems, zero initial guess.

    Returns (x, history, converged, iterations).  ``history`` holds the
    relative residual estimate after every inner iteration (monotone within
    and across cycles).  A vanishing Hessenberg subdiagonal before reaching
    the tolerance raises BreakdownDetected: with a trivial null space the
    Krylov space can only stagnate this way if the operator is singular on
    it, which violates the unique-solvability hypothesis.
    """
    n = b.size
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n, dtype=complex), [], True, 0

    x = np.zeros(n, dtype=complex)
    history: list[float] = []
    iterations = 0
    converged = False

    while iterations < max_iterations and not converged:
        r = b - matvec(x)
        beta0 = float(np.linalg.norm(r))
        if beta0 / bnorm <= rel_tol:
            converged = True
            break
        m = min(restart, max_iterations - iterations)
        v = np.empty((m + 1, n), dtype=complex)
        h = np.zeros((m + 1, m), dtype=complex)
        cs = np.zeros(m, dtype=complex)
        sn = np.zeros(m, dtype=complex)
        g = np.zeros(m + 1, dtype=complex)
        g[0] = beta0
        v[0] = r / beta0

        j_used = 0
        for j in range(m):
            # fresh array: matvec may hand back its argument (e.g. identity)
            w = np.array(matvec(v[j]), dtype=complex)
            for i in range(j + 1):          # modified Gram-Schmidt
                h[i, j] = np.vdot(v[i], w)
                w -= h[i, j] * v[i]
            hsub = float(np.linalg.norm(w))
            iterations += 1
            for i in range(j):              # stored rotations on the new column
                t = np.conj(cs[i]) * h[i, j] + np.conj(sn[i]) * h[i + 1, j]
                h[i + 1, j] = -sn[i] * h[i, j] + cs[i] * h[i + 1, j]
                h[i, j] = t
            h[j + 1, j] = hsub

            if hsub <= breakdown_rtol * bnorm:
                # invariant Krylov space: exact solve if the pivot survives
                if abs(h[j, j]) <= breakdown_rtol * bnorm:
                    est = float(abs(g[j])) / bnorm
                    if est <= rel_tol:
                        j_used = j
                        converged = True
                        break
                    raise BreakdownDetected(
                        f"Krylov breakdown at iteration {iterations} with "
                        f"relative residual {est:.3e}; the discrete operator "
                        "may be singular (non-uniqueness)"
                    )
                cs[j] = h[j, j] / abs(h[j, j])
                sn[j] = 0.0
                h[j, j] = abs(h[j, j])
                g[j] = np.conj(cs[j]) * g[j]
                g[j + 1] = 0.0
                history.append(0.0)
                j_used = j + 1
                converged = True
                break

            v[j + 1] = w / hsub
            denom = float(np.hypot(abs(h[j, j]), hsub))
            cs[j] = h[j, j] / denom
            sn[j] = h[j + 1, j] / denom
            h[j, j] = denom
            h[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = np.conj(cs[j]) * g[j]
            history.append(float(abs(g[j + 1])) / bnorm)
            j_used = j + 1
            if history[-1] <= rel_tol or iterations >= max_iterations:
                break

        if j_used:
            y = solve_triangular(h[:j_used, :j_used], g[:j_used])
            x = x + v[:j_used].T @ y
        if history and history[-1] <= rel_tol:
            converged = True
    return x, history, converged, iterations


def solve(problem: Problem, table: KernelTable,
          opts: SolveOptions | None = None) -> Solution:
    """Solve the discrete scattering equation; returns the scattered field.

    Always starts from the zero iterate for reproducibility.  On stall the
    best iterate and its history are attached to the NotConverged error.
    """
    opts = opts or SolveOptions()
    rhs = assemble_rhs(problem, table, dealias=opts.dealias)
    shape = rhs.coeffs.shape

    def matvec(vec: np.ndarray) -> np.ndarray:
        u = SpectralField(vec.reshape(shape), problem.grid, problem.alpha)
        return apply_forward(u, problem, table, dealias=opts.dealias).coeffs.reshape(-1)

    x, history, converged, iters = gmres(
        matvec,
        rhs.coeffs.reshape(-1),
        rel_tol=opts.rel_tol,
        restart=opts.restart,
        max_iterations=opts.max_iterations,
    )
    sol = Solution(
        u=SpectralField(x.reshape(shape), problem.grid, problem.alpha),
        residual_history=tuple(history) if opts.record_residuals else (),
        converged=converged,
        iterations=iters,
        dealias=opts.dealias,
    )
    if not converged:
        raise NotConverged(
            f"GMRES stalled at relative residual "
            f"{history[-1] if history else float('nan'):.3e} after "
            f"{iters} iterations",
            solution=sol,
        )
    return sol


def residual(problem: Problem, table: KernelTable, u: SpectralField,
             dealias: bool = False) -> float:
    """Relative residual ||A u - rhs|| / ||rhs||, recomputed from scratch.

    Falls back to the absolute norm when the right-hand side vanishes.
    """
    rhs = assemble_rhs(problem, table, dealias=dealias)
    au = apply_forward(u, problem, table, dealias=dealias)
    num = float(np.linalg.norm(au.coeffs - rhs.coeffs))
    den = float(np.linalg.norm(rhs.coeffs))
    return num / den if den > 0 else num
