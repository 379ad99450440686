"""D3Q19 stencil, moments, equilibrium and TRT collision with a constant body force.

Direction order (fixed for every layout and adjacency list in the package)::

    0  C   ( 0, 0, 0)
    1  E   (+1, 0, 0)    2  W   (-1, 0, 0)
    3  N   ( 0,+1, 0)    4  S   ( 0,-1, 0)
    5  T   ( 0, 0,+1)    6  B   ( 0, 0,-1)
    7  NE  (+1,+1, 0)    8  SW  (-1,-1, 0)
    9  SE  (+1,-1, 0)   10  NW  (-1,+1, 0)
   11  TE  (+1, 0,+1)   12  BW  (-1, 0,-1)
   13  BE  (+1, 0,-1)   14  TW  (-1, 0,+1)
   15  TN  ( 0,+1,+1)   16  BS  ( 0,-1,-1)
   17  BN  ( 0,+1,-1)   18  TS  ( 0,-1,+1)

Opposite directions are adjacent pairs, so ``OPP[i] == i + 1`` for odd ``i``.
All functions accept a single node (shape ``(19,)``) or a batch (``(..., 19)``).
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, InvalidStateError

Q = 19

NAMES = (
    "C", "E", "W", "N", "S", "T", "B",
    "NE", "SW", "SE", "NW", "TE", "BW", "BE", "TW", "TN", "BS", "BN", "TS",
)

C = np.array(
    [
        (0, 0, 0),
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
        (1, 1, 0), (-1, -1, 0), (1, -1, 0), (-1, 1, 0),
        (1, 0, 1), (-1, 0, -1), (1, 0, -1), (-1, 0, 1),
        (0, 1, 1), (0, -1, -1), (0, 1, -1), (0, -1, 1),
    ],
    dtype=np.int64,
)

WEIGHTS_EXACT = (Fraction(1, 3),) + (Fraction(1, 18),) * 6 + (Fraction(1, 36),) * 12
W = np.array([float(w) for w in WEIGHTS_EXACT])

OPP = np.array([0] + [i + 1 if i % 2 else i - 1 for i in range(1, Q)], dtype=np.int64)

# first member of each (i, opp(i)) pair
PAIRS = np.arange(1, Q, 2)


@dataclass(frozen=True)
class TrtParams:
    """Two-relaxation-time parameters.

    ``omega_minus`` follows from ``omega_plus`` and the magic parameter
    ``magic_lambda`` via (1/w+ - 1/2)(1/w- - 1/2) = magic_lambda.
    """

    omega_plus: float
    magic_lambda: float = 3.0 / 16.0

    def __post_init__(self):
        if not (0.0 < self.omega_plus < 2.0):
            raise DomainError(f"omega_plus must lie in (0, 2), got {self.omega_plus}")
        if not self.magic_lambda > 0.0:
            raise DomainError(f"magic_lambda must be positive, got {self.magic_lambda}")

    @classmethod
    def from_tau(cls, tau_plus, magic_lambda=3.0 / 16.0):
        return cls(1.0 / tau_plus, magic_lambda)

    @classmethod
    def from_viscosity(cls, nu, magic_lambda=3.0 / 16.0):
        return cls(1.0 / (3.0 * nu + 0.5), magic_lambda)

    @property
    def omega_minus(self):
        return 1.0 / (self.magic_lambda / (1.0 / self.omega_plus - 0.5) + 0.5)

    @property
    def nu(self):
        return (1.0 / self.omega_plus - 0.5) / 3.0


@dataclass(frozen=True)
class BodyForce:
    """Constant acceleration in lattice units."""

    g: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        g = tuple(float(v) for v in self.g)
        if len(g) != 3 or not all(np.isfinite(g)):
            raise DomainError(f"body force must be three finite numbers, got {self.g!r}")
        object.__setattr__(self, "g", g)

    def as_array(self):
        return np.asarray(self.g, dtype=np.float64)


def as_force(g):
    """Accept a BodyForce, a 3-sequence or None and return a BodyForce."""
    if g is None:
        return BodyForce()
    if isinstance(g, BodyForce):
        return g
    return BodyForce(tuple(g))


def macroscopic(f):
    """Density and velocity ``u = sum(c f) / rho`` (no half-force correction)."""
    f = np.asarray(f, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise InvalidStateError("PDFs contain non-finite values")
    rho = f.sum(axis=-1)
    u = (f @ C.astype(np.float64)) / rho[..., None]
    return rho, u


def equilibrium(rho, u):
    """Second-order D3Q19 equilibrium for density ``rho`` and velocity ``u``."""
    rho = np.asarray(rho, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if np.any(rho <= 0.0):
        raise DomainError("equilibrium requires rho > 0")
    cu = u @ C.T.astype(np.float64)
    usq = np.sum(u * u, axis=-1)[..., None]
    return W * rho[..., None] * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq)


def trt_collide(f, params, force=None):
    """Post-collision PDFs of the TRT operator with the simple forcing term.

    The equilibrium is built from the local moments of ``f``; the force adds
    ``3 w_i rho (c_i . g)`` to each population.
    """
    f = np.asarray(f, dtype=np.float64)
    g = as_force(force).as_array()
    rho, u = macroscopic(f)
    feq = equilibrium(rho, u)
    f_opp = f[..., OPP]
    e_opp = feq[..., OPP]
    f_sym, f_asym = 0.5 * (f + f_opp), 0.5 * (f - f_opp)
    e_sym, e_asym = 0.5 * (feq + e_opp), 0.5 * (feq - e_opp)
    forcing = 3.0 * W * rho[..., None] * (C.astype(np.float64) @ g)
    return (
        f
        - params.omega_plus * (f_sym - e_sym)
        - params.omega_minus * (f_asym - e_asym)
        + forcing
    )
