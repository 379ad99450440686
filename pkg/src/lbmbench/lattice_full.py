"""Dense ("full array") PDF storage over the whole box, fluid and solid nodes.

Node id ``n = (x * ny + y) * nz + z``; the PDF of direction ``d`` lives at

* AoS: ``n * 19 + d``
* SoA: ``d * (N + pad) + n``   (``pad`` = manual per-direction padding, default 0)

Bounce-back is full-way: solid nodes stream like fluid nodes but do not
collide, and ``correction_step`` swaps opposite populations on every solid
node after each sweep.  Periodicity is folded into the index arithmetic
(every axis wraps; boundary layers of non-periodic axes must be solid).
"""

from dataclasses import dataclass, field

import numpy as np

from . import d3q19
from .d3q19 import C, OPP, Q
from .errors import ConfigurationError
from .geometry import FLUID, SOLID
from . import _sweeps
from .parallel import alloc_doubles, default_pool, even_ranges

LAYOUTS = ("aos", "soa")


def direction_offsets(layout, n_nodes, pad=0):
    """(off, stride) such that slot(n, d) = off[d] + n * stride."""
    if layout == "aos":
        return np.arange(Q, dtype=np.int64), Q
    if layout == "soa":
        return np.arange(Q, dtype=np.int64) * (n_nodes + pad), 1
    raise ConfigurationError(f"layout must be 'aos' or 'soa', got {layout!r}")


@dataclass(eq=False)
class FullLattice:
    flags: object
    layout: str
    pdfs: list
    off: np.ndarray
    stride: int
    pad: int = 0
    pool: object = None
    partitions: list = field(default_factory=list)
    convention: str = "standard"
    hugepages_advised: bool = False

    def __post_init__(self):
        self.solid = np.ascontiguousarray(self.flags.flags.reshape(-1))
        self.solid_nodes = np.flatnonzero(self.solid == SOLID).astype(np.int64)
        if self.pool is None:
            self.pool = default_pool()
        self._solid_parts = even_ranges(len(self.solid_nodes), self.pool.n_workers)

    @property
    def dims(self):
        return self.flags.dims

    @property
    def n_nodes(self):
        return self.flags.n_nodes

    @property
    def n_fluid(self):
        return int(self.n_nodes - len(self.solid_nodes))

    @property
    def buffers(self):
        return len(self.pdfs)

    def index(self, x, y, z, d):
        nx, ny, nz = self.dims
        return int(self.off[d] + ((x * ny + y) * nz + z) * self.stride)

    def coords(self, idx):
        """Inverse of ``index``: (x, y, z, d)."""
        nx, ny, nz = self.dims
        if self.layout == "aos":
            n, d = divmod(int(idx), Q)
        else:
            d, n = divmod(int(idx), self.n_nodes + self.pad)
        x, r = divmod(n, ny * nz)
        y, z = divmod(r, nz)
        return x, y, z, d

    def _gather_slots(self):
        n = np.arange(self.n_nodes, dtype=np.int64)
        return self.off[None, :] + n[:, None] * self.stride

    def raw(self, buffer=0):
        """Current storage as an (N, 19) array, no convention conversion."""
        return self.pdfs[buffer][self._gather_slots()]

    def get_pdfs(self):
        """(N, 19) populations of every node in the standard convention
        (post-streaming, pre-collision)."""
        arr = self.raw()
        if self.convention == "pull":
            arr = _swap_solid(self, _stream(self, arr, +1))
        return arr

    def set_pdfs(self, arr):
        arr = np.asarray(arr, dtype=np.float64).reshape(self.n_nodes, Q)
        if self.convention == "pull":
            arr = _stream(self, _swap_solid(self, arr), -1)
        self.pdfs[0][self._gather_slots()] = arr

    def set_convention(self, convention):
        if convention == self.convention:
            return
        arr = self.get_pdfs()
        self.convention = convention
        self.set_pdfs(arr)

    def fields(self):
        """Density and velocity on the (nx, ny, nz) grid; NaN on solid nodes."""
        rho, u = d3q19.macroscopic(self.get_pdfs())
        rho = rho.reshape(self.dims)
        u = u.reshape(self.dims + (3,))
        mask = self.flags.flags == SOLID
        rho[mask] = np.nan
        u[mask] = np.nan
        return rho, u

    def total_mass(self):
        """Mass over fluid and solid nodes (what full-way bounce-back conserves)."""
        return float(self.raw().sum())


def _stream(lat, arr, sign):
    """Periodic shift of every direction by ``sign * c``."""
    grid = arr.reshape(lat.dims + (Q,))
    out = np.empty_like(grid)
    for d in range(Q):
        out[..., d] = np.roll(grid[..., d], tuple(sign * C[d]), axis=(0, 1, 2))
    return out.reshape(-1, Q)


def _swap_solid(lat, arr):
    arr = arr.copy()
    s = lat.solid_nodes
    arr[s] = arr[s][:, OPP]
    return arr


def _check_boundaries(ff):
    fluid = ff.flags == FLUID
    for axis in range(3):
        if ff.periodic[axis]:
            continue
        lo = np.take(fluid, 0, axis=axis)
        hi = np.take(fluid, ff.dims[axis] - 1, axis=axis)
        if lo.any() or hi.any():
            raise ConfigurationError(
                f"full-array lattices need solid boundary layers on non-periodic axis {'xyz'[axis]}"
            )


def init_full(ff, layout="soa", buffers=2, pad=0, pool=None, partitions=None, hugepages=True):
    """Allocate and initialise a full-array lattice to the rest equilibrium.

    ``partitions`` are node-id ranges, one per worker; each worker writes its
    own range of every buffer (first touch) with the same split the sweeps use.
    """
    if buffers not in (1, 2):
        raise ConfigurationError(f"buffers must be 1 or 2, got {buffers}")
    if pad < 0 or (pad and layout != "soa"):
        raise ConfigurationError("pad is a non-negative element count and only applies to SoA")
    _check_boundaries(ff)
    pool = pool or default_pool()
    n = ff.n_nodes
    off, stride = direction_offsets(layout, n, pad)
    size = int(off[-1] + (n - 1) * stride + 1)
    if partitions is None:
        partitions = even_ranges(n, pool.n_workers)
    pdfs, advised = [], True
    for _ in range(buffers):
        buf, ok = alloc_doubles(size, hugepages)
        advised &= ok
        pdfs.append(buf)
    weights = d3q19.W.copy()

    def touch(wid):
        n0, n1 = partitions[wid]
        for buf in pdfs:
            _sweeps.fill_range(buf, off, stride, n0, n1, weights)

    pool.run(touch)
    return FullLattice(ff, layout, pdfs, off, stride, pad=pad, pool=pool,
                       partitions=list(partitions), hugepages_advised=advised)


def correction_step(lat, buffer=0):
    """Full-way bounce-back: swap f[i] <-> f[opp(i)] on every solid node."""
    f = lat.pdfs[buffer]

    def work(wid):
        i0, i1 = lat._solid_parts[wid]
        _sweeps.full_correction(f, lat.solid_nodes, lat.off, lat.stride, i0, i1)

    lat.pool.run(work)
