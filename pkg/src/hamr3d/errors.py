"""Exception hierarchy shared across the package."""


class Hamr3dError(Exception):
    """Base class for all package errors."""


class ConfigError(Hamr3dError):
    """Invalid configuration or parameter set."""


class InvalidGeometryError(Hamr3dError):
    """Track region cannot host a valid tessellation."""


class EraseAboveCurieError(Hamr3dError):
    """DC erase requested at a temperature at or above some grain's Tc."""


class IntegratorInstabilityError(Hamr3dError):
    """A grain magnetization left the allowed magnitude window."""

    def __init__(self, grain_id, magnitude, dt):
        self.grain_id = grain_id
        self.magnitude = magnitude
        self.dt = dt
        super().__init__(
            f"|m| = {magnitude:.4g} on grain {grain_id} left the stable window; "
            f"reduce the time step (dt = {dt:g} ns)"
        )


class InsufficientTransitionsError(Hamr3dError):
    """Fewer than two usable transitions found in a track profile."""


class SimulationError(Hamr3dError):
    """Generic failure while running a recording simulation."""
