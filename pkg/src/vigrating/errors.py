"""Exception types raised by the solver library."""


class VigratingError(Exception):
    """Base class for all library errors."""


class ConfigError(VigratingError):
    """Invalid or incomplete run configuration."""


class GeometryError(VigratingError):
    """Inconsistent period-cell geometry (box too small, bad support, ...)."""


class RayleighAnomaly(VigratingError):
    """A diffraction order sits exactly at cutoff (k^2 == alpha_j^2).

    The quasi-periodic Green's function degenerates there, so the problem
    is rejected rather than silently perturbed.
    """

    def __init__(self, order, k, alpha):
        self.order = order
        self.k = k
        self.alpha = alpha
        super().__init__(
            f"Rayleigh anomaly at order j={order}: k^2 == (j + alpha)^2 "
            f"for k={k!r}, alpha={alpha!r}"
        )


class DegenerateAtZeroJ2(VigratingError):
    """Kernel symbol vanished at a mode with j2 == 0.

    Cannot happen when the non-resonance check passed; signals an upstream
    validation bug.
    """


class NonSymmetric(VigratingError):
    """Contrast matrix is not (complex) symmetric."""


class ShapeMismatch(VigratingError):
    """Array shape does not match the discretization grid."""


class SizeGuard(VigratingError):
    """Requested dense assembly exceeds the oracle size limit."""


class SlowConvergence(VigratingError):
    """Green's function series cannot reach the requested tail bound."""


class NotConverged(VigratingError):
    """Krylov solve stopped without reaching the target residual."""

    def __init__(self, message, solution=None):
        self.solution = solution
        super().__init__(message)


class BreakdownDetected(VigratingError):
    """Krylov breakdown before convergence; possible non-uniqueness."""


class SingularReQ(VigratingError):
    """Re(Q) numerically singular at one or more grid nodes."""

    def __init__(self, nodes):
        self.nodes = list(nodes)
        shown = ", ".join(str(n) for n in self.nodes[:8])
        more = "" if len(self.nodes) <= 8 else f" (+{len(self.nodes) - 8} more)"
        super().__init__(f"Re(Q) singular at nodes: {shown}{more}")


class GeometryNotGraph(VigratingError):
    """Scatterer support is not a vertical graph region; extension-operator
    diagnostics are not applicable."""


class EvaluationGap(VigratingError):
    """Field evaluation requested in a region covered by neither the box
    representation nor the Rayleigh series."""
