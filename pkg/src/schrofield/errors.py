"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


class StabilityError(ValueError):
    """Time step outside an integrator's stability region."""

    def __init__(self, dt, bound, scheme):
        self.dt = float(dt)
        self.bound = float(bound)
        self.scheme = scheme
        super().__init__(
            f"{scheme}: dt={dt!r} violates the stability bound |dt| < {bound!r}"
        )


class EllipticObstructionError(ValueError):
    """Right-hand side has zero-mode content, so K c = rhs has no solution."""

    def __init__(self, magnitude, tol):
        self.magnitude = float(magnitude)
        self.tol = float(tol)
        super().__init__(
            f"relative zero-mode content {self.magnitude:.3e} exceeds "
            f"tolerance {self.tol:.3e}; the elliptic system is unsolvable"
        )


class OffShellError(ValueError):
    """State violates the constraint surface beyond the reduction tolerance."""
