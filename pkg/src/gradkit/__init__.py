"""Design and analysis tools for magnetic-field-gradient addressing of trapped ions."""

from .addressing import QubitConstants, crosstalk_at_pi, required_gradient, splitting
from .coherence import NoiseModel, PulseSchedule, calibrate_sigma
from .ionchain import Species, equilibrium_positions, spacings
from .magnetostatics import CurrentPath, field_at, gradient_at, site_report
from .optimizer import SGeometryParams, build_geometry, evaluate, optimize

__version__ = "0.1.0"
