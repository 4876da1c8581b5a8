"""Pyramid-adapted 3D shearlet frames with hybrid anisotropic scaling."""

__version__ = "0.1.0"

from .errors import ConvergenceError, OutputError, PreconditionError, ShearletError  # noqa: E402
from .geometry import LatticeConstants, as_alpha  # noqa: E402
from .generators import FeasibilityProfile, filter_generator, verify_feasibility  # noqa: E402
from .transform import ShearletSystem, Volume  # noqa: E402

__all__ = ["ConvergenceError", "OutputError", "PreconditionError", "ShearletError", "LatticeConstants",
           "as_alpha", "FeasibilityProfile", "filter_generator", "verify_feasibility", "ShearletSystem",
           "Volume", "__version__"]
