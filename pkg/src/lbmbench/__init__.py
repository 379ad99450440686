"""D3Q19 TRT lattice Boltzmann benchmark kernels, Roofline model and verification."""

from .d3q19 import BodyForce, TrtParams
from .errors import (ConfigurationError, DomainError, InvalidStateError, LbmBenchError,
                     NumericalFailure, ParityError)
from .geometry import FlagField, GeometrySpec, build_geometry
from .kernels import KERNEL_NAMES, advance, build_lattice, get_kernel

__version__ = "0.1.0"
