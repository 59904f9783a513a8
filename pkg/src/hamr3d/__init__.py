"""hamr3d: granular LLB simulation of hierarchical multi-head heat-assisted
recording on multilayer media."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    EraseAboveCurieError,
    Hamr3dError,
    InsufficientTransitionsError,
    IntegratorInstabilityError,
    InvalidGeometryError,
)
