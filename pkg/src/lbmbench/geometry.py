"""Synthetic geometries (channel, slit, pipe, blocks) as flag fields."""

import enum
from dataclasses import dataclass, field

import numpy as np

from .d3q19 import C
from .errors import ConfigurationError

FLUID = 0
SOLID = 1

KINDS = ("channel", "slit", "pipe", "blocks")


class Hit(enum.Enum):
    SOLID_HIT = "solid"
    OUTSIDE = "outside"


SOLID_HIT = Hit.SOLID_HIT
OUTSIDE = Hit.OUTSIDE


@dataclass(frozen=True, eq=False)
class FlagField:
    """Per-node FLUID/SOLID flags on an ``nx x ny x nz`` box.

    ``flags`` is a read-only uint8 array indexed ``[x, y, z]``.
    """

    flags: np.ndarray
    periodic: tuple = (False, False, False)
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        flags = np.array(self.flags, dtype=np.uint8, copy=True)
        if flags.ndim != 3 or min(flags.shape) < 1:
            raise ConfigurationError(f"flag field must be a non-empty 3-D array, got shape {flags.shape}")
        if not np.all((flags == FLUID) | (flags == SOLID)):
            raise ConfigurationError("flags must be FLUID (0) or SOLID (1)")
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))

    @property
    def dims(self):
        return self.flags.shape

    @property
    def n_nodes(self):
        return self.flags.size

    @property
    def fluid_mask(self):
        return self.flags == FLUID

    def stats(self):
        n = fluid_count(self)
        out = {
            "kind": self.kind,
            "dims": list(self.dims),
            "periodic": list(self.periodic),
            "n_nodes": int(self.n_nodes),
            "fluid_count": int(n),
            "fluid_fraction": n / self.n_nodes,
        }
        out.update(self.params)
        return out


@dataclass(frozen=True)
class GeometrySpec:
    kind: str = "channel"
    dims: tuple = (500, 100, 100)
    block: int = 4
    spacing: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown geometry kind {self.kind!r} (--geometry/--kind); valid: {', '.join(KINDS)}, e.g. channel")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ConfigurationError(f"--dims must be three positive integers, e.g. --dims 500x100x100; got {self.dims!r}")
        object.__setattr__(self, "dims", dims)


def build_geometry(spec):
    """Build the flag field described by ``spec``."""
    nx, ny, nz = spec.dims
    x, y, z = np.ogrid[0:nx, 0:ny, 0:nz]
    params = {}
    if spec.kind == "channel":
        if ny < 3 or nz < 3:
            raise ConfigurationError(f"channel needs ny, nz >= 3 (--dims), e.g. --dims 500x100x100; got {spec.dims}")
        solid = (y == 0) | (y == ny - 1) | (z == 0) | (z == nz - 1)
        periodic = (True, False, False)
    elif spec.kind == "slit":
        if nz < 3:
            raise ConfigurationError(f"slit needs nz >= 3 (--dims), e.g. --dims 8x8x34; got {spec.dims}")
        solid = (z == 0) | (z == nz - 1)
        periodic = (True, True, False)
    elif spec.kind == "pipe":
        if min(ny, nz) < 3:
            raise ConfigurationError(f"pipe needs ny, nz >= 3 (--dims), e.g. --dims 200x60x60; got {spec.dims}")
        cy, cz = (ny - 1) / 2.0, (nz - 1) / 2.0
        r = (min(ny, nz) - 2) / 2.0
        solid = (y - cy) ** 2 + (z - cz) ** 2 > r * r
        periodic = (True, False, False)
        params = {"radius": r}
    else:
        b, s = int(spec.block), int(spec.spacing)
        if b < 1 or s < 0:
            raise ConfigurationError(f"blocks need --block >= 1 and --spacing >= 0, e.g. --block 4 --spacing 4; got block={b} spacing={s}")
        if b + s > min(spec.dims):
            raise ConfigurationError(
                f"blocks need --block + --spacing <= min(dims) = {min(spec.dims)}, e.g. --block 4 --spacing 4; got {b + s}"
            )
        p = b + s
        solid = (x % p >= s) & (y % p >= s) & (z % p >= s)
        periodic = (True, True, True)
        params = {"block": b, "spacing": s}
    flags = np.broadcast_to(solid, (nx, ny, nz)).astype(np.uint8)
    ff = FlagField(flags, periodic, kind=spec.kind, params=params)
    if fluid_count(ff) == 0:
        raise ConfigurationError(f"geometry {spec} contains no fluid nodes; enlarge --dims or --spacing, e.g. --spacing 4")
    return ff


def fluid_count(ff):
    return int(np.count_nonzero(ff.flags == FLUID))


def neighbor(ff, coord, d):
    """Neighbour of ``coord`` along direction ``d``.

    Returns the (wrapped) coordinate, ``SOLID_HIT`` if that node is solid, or
    ``OUTSIDE`` when leaving the box along a non-periodic axis.
    """
    out = []
    for axis in range(3):
        n = ff.dims[axis]
        v = coord[axis] + int(C[d, axis])
        if not 0 <= v < n:
            if not ff.periodic[axis]:
                return OUTSIDE
            v %= n
        out.append(v)
    out = tuple(out)
    if ff.flags[out] == SOLID:
        return SOLID_HIT
    return out


def neighbor_indices(ff, d):
    """Vectorised ``neighbor`` for every node: flat index or -1 (solid/outside)."""
    nx, ny, nz = ff.dims
    x, y, z = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    valid = np.ones(ff.dims, dtype=bool)
    coords = []
    for axis, (v, n) in enumerate(zip((x, y, z), ff.dims)):
        v = v + int(C[d, axis])
        if ff.periodic[axis]:
            v = v % n
        else:
            valid &= (v >= 0) & (v < n)
            v = np.clip(v, 0, n - 1)
        coords.append(v)
    flat = (coords[0] * ny + coords[1]) * nz + coords[2]
    valid &= ff.flags.reshape(-1)[flat] == FLUID
    return np.where(valid, flat, -1).reshape(-1)
