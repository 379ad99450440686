"""Fluid-only ("list") lattice with an adjacency list and optional RIA coding.

Fluid nodes are stored in a 1-D vector in traversal order (x outermost, z
innermost, optionally tiled in the y-z plane).  The adjacency list holds, for
every node and direction 1..18, the 4-byte PDF slot index to read from
(GATHER) or write to (SCATTER).  Links that hit a solid node or leave the box
on a non-periodic axis point back at the node's own opposite slot, which is
half-way bounce-back.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _sweeps
from . import d3q19
from .d3q19 import OPP, Q
from .errors import ConfigurationError
from .geometry import FLUID, fluid_count
from .parallel import alloc_doubles, default_pool, even_ranges

GATHER = "gather"
SCATTER = "scatter"

PADDING_MODES = ("auto", "none", "thrash")


@dataclass(frozen=True)
class PaddingPolicy:
    """Where the 19 direction arrays of an SoA list lattice start.

    The cache model is ``cache_sets`` sets of ``line_bytes`` lines, the TLB
    model ``tlb_sets`` sets of ``page_bytes`` pages.
    """

    mode: str = "auto"
    pads: tuple = ()
    line_bytes: int = 64
    cache_sets: int = 512
    page_bytes: int = 2 * 1024 * 1024
    tlb_sets: int = 4

    def __post_init__(self):
        if self.mode == "explicit":
            pads = tuple(int(p) for p in self.pads)
            if len(pads) != Q or min(pads) < 0:
                raise ConfigurationError(
                    "--padding needs 19 non-negative pad counts, e.g. --padding 0,8,8,...,8"
                )
            object.__setattr__(self, "pads", pads)
        elif self.mode not in PADDING_MODES:
            raise ConfigurationError(
                f"--padding must be auto, none, thrash or o0,...,o18, e.g. --padding auto; got {self.mode!r}"
            )

    @classmethod
    def parse(cls, text):
        text = str(text).strip()
        if text in PADDING_MODES:
            return cls(text)
        try:
            pads = tuple(int(v) for v in text.split(","))
        except ValueError:
            raise ConfigurationError(
                f"--padding must be auto, none, thrash or o0,...,o18, e.g. --padding auto; got {text!r}"
            )
        return cls("explicit", pads)

    def describe(self):
        return self.mode if self.mode != "explicit" else ",".join(map(str, self.pads))

    def cache_set(self, offset):
        """Cache set of element ``offset`` (8-byte doubles from an aligned base)."""
        return (offset * 8 // self.line_bytes) % self.cache_sets

    def tlb_set(self, offset):
        return (offset * 8 // self.page_bytes) % self.tlb_sets


def padding_offsets(n_fluid, policy):
    """Start offset (in elements) of each SoA direction array."""
    starts = np.zeros(Q, dtype=np.int64)
    if policy.mode == "none":
        return np.arange(Q, dtype=np.int64) * n_fluid
    if policy.mode == "explicit":
        end = 0
        for d in range(Q):
            starts[d] = end + policy.pads[d]
            end = starts[d] + n_fluid
        return starts
    per_line = policy.line_bytes // 8
    per_page = policy.page_bytes // 8
    if policy.mode == "thrash":
        period = math.lcm(per_line * policy.cache_sets, per_page * policy.tlb_sets)
        end = 0
        for d in range(Q):
            starts[d] = -(-end // period) * period
            end = starts[d] + n_fluid
        return starts
    step = policy.cache_sets // Q
    end = 0
    for d in range(Q):
        want_set = (d * step) % policy.cache_sets
        want_page = d % policy.tlb_sets
        line = -(-end // per_line)
        while True:
            line += (want_set - line) % policy.cache_sets
            s = line * per_line
            page = s // per_page
            if page % policy.tlb_sets == want_page:
                break
            line = (page + 1) * (per_page // per_line)
        starts[d] = s
        end = s + n_fluid
    return starts


def order_nodes(ff, blk=0):
    """Fluid node coordinates in traversal order.

    ``blk == 0``: x outermost, then y, z innermost.  ``blk > 0``: the y-z plane
    is cut into ``blk x blk`` tiles; for each tile, x then y then z.
    """
    if blk < 0:
        raise ConfigurationError(f"--blk must be >= 0, e.g. --blk 50; got {blk}")
    coords = np.argwhere(ff.flags == FLUID).astype(np.int64)
    if blk == 0:
        return coords
    x, y, z = coords.T
    order = np.lexsort((z, y, x, z // blk, y // blk))
    return coords[order]


def layer_condition(cache_bytes, workers, layers=4, bytes_per_node=19 * 8 + 18 * 4):
    """Largest layer (in nodes) such that ``layers`` layers per worker fit in cache,
    and the edge of the matching square y-z tile."""
    nodes = int(cache_bytes // (workers * layers * bytes_per_node))
    return nodes, int(math.isqrt(nodes))


@dataclass(eq=False)
class AdjacencyList:
    """``index[n, d - 1]`` = PDF slot for direction ``d`` of node ``n``."""

    index: np.ndarray
    orientation: str

    def entry(self, n, d):
        return int(self.index[n, d - 1])


@dataclass(eq=False)
class RiaCoding:
    """Run-length coded adjacency.

    Run ``r`` covers nodes ``start[r] .. start[r] + length[r] - 1``; for each of
    them ``adjacency[n, :] == n * stride + pattern[r, :]``.
    """

    start: np.ndarray
    length: np.ndarray
    pattern: np.ndarray
    n_fluid: int
    stride: int
    orientation: str

    @property
    def total_runs(self):
        return int(len(self.start))

    def expand(self):
        """Rebuild the full adjacency index array from the runs."""
        nodes = np.arange(self.n_fluid, dtype=np.int64)
        run_of = np.repeat(np.arange(self.total_runs), self.length)
        return (nodes[:, None] * self.stride + self.pattern[run_of]).astype(np.int32)


@dataclass(eq=False)
class ListLattice:
    flags: object
    layout: str
    blk: int
    nodes: np.ndarray
    off: np.ndarray
    stride: int
    size: int
    padding: PaddingPolicy
    adjacency: AdjacencyList
    pdfs: list = field(default_factory=list)
    pool: object = None
    partitions: list = field(default_factory=list)
    convention: str = "standard"
    hugepages_advised: bool = False
    ria: object = None

    def __post_init__(self):
        if self.pool is None:
            self.pool = default_pool()
        nx, ny, nz = self.flags.dims
        cell = (self.nodes[:, 0] * ny + self.nodes[:, 1]) * nz + self.nodes[:, 2]
        # list index of each fluid node in canonical (x, y, z) order
        self.canonical = np.argsort(cell, kind="stable")

    @property
    def n_fluid(self):
        return int(len(self.nodes))

    @property
    def dims(self):
        return self.flags.dims

    @property
    def buffers(self):
        return len(self.pdfs)

    def slot(self, n, d):
        return int(self.off[d] + n * self.stride)

    def _slots(self):
        n = np.arange(self.n_fluid, dtype=np.int64)
        return self.off[None, :] + n[:, None] * self.stride

    def _stream_pairs(self):
        """Slot permutation of one streaming step: value at ``src`` moves to ``dst``."""
        own = self._slots()
        adj = np.empty_like(own)
        adj[:, 0] = own[:, 0]
        adj[:, 1:] = self.adjacency.index
        if self.adjacency.orientation == SCATTER:
            return own.ravel(), adj.ravel()
        return adj.ravel(), own.ravel()

    def raw(self, buffer=0):
        """(n_fluid, 19) storage in list order, no convention conversion."""
        return self.pdfs[buffer][self._slots()]

    def get_pdfs(self):
        """(n_fluid, 19) populations in canonical node order, standard convention."""
        buf = self.pdfs[0]
        if self.convention == "pull":
            src, dst = self._stream_pairs()
            tmp = np.empty_like(buf)
            tmp[dst] = buf[src]
            buf = tmp
        return buf[self._slots()][self.canonical]

    def set_pdfs(self, arr):
        arr = np.asarray(arr, dtype=np.float64).reshape(self.n_fluid, Q)
        listed = np.empty_like(arr)
        listed[self.canonical] = arr
        buf = self.pdfs[0]
        if self.convention == "pull":
            tmp = np.zeros_like(buf)
            tmp[self._slots()] = listed
            src, dst = self._stream_pairs()
            buf[src] = tmp[dst]
        else:
            buf[self._slots()] = listed

    def set_convention(self, convention):
        if convention == self.convention:
            return
        arr = self.get_pdfs()
        self.convention = convention
        self.set_pdfs(arr)

    def fields(self):
        """Density and velocity on the (nx, ny, nz) grid; NaN on solid nodes."""
        rho_f, u_f = d3q19.macroscopic(self.get_pdfs())
        rho = np.full(self.dims, np.nan)
        u = np.full(self.dims + (3,), np.nan)
        fluid = self.flags.flags == FLUID
        rho[fluid] = rho_f
        u[fluid] = u_f
        return rho, u

    def total_mass(self):
        return float(self.raw().sum())


def _node_of_cell(ff, nodes):
    nx, ny, nz = ff.dims
    lookup = np.full(ff.n_nodes, -1, dtype=np.int64)
    lookup[(nodes[:, 0] * ny + nodes[:, 1]) * nz + nodes[:, 2]] = np.arange(len(nodes))
    return lookup


def build_list(ff, layout="soa", blk=0, padding=None, orientation=SCATTER, pool=None,
               partitions=None, buffers=2, allocate=True, hugepages=True):
    """Order fluid nodes, lay out PDF storage and build the adjacency list.

    ``partitions`` (node ranges, one per worker) fix which worker initialises
    which part of the adjacency list and of every PDF buffer.
    """
    if fluid_count(ff) < 1:
        raise ConfigurationError("list lattice needs at least one fluid node")
    if orientation not in (GATHER, SCATTER):
        raise ConfigurationError(f"orientation must be gather or scatter, got {orientation!r}")
    if layout not in ("aos", "soa"):
        raise ConfigurationError(f"layout must be 'aos' or 'soa', got {layout!r}")
    pool = pool or default_pool()
    if padding is None:
        padding = PaddingPolicy("auto" if layout == "soa" else "none")
    if layout == "aos" and padding.mode != "none":
        # no padding for AoS list storage
        padding = PaddingPolicy("none")
    nodes = order_nodes(ff, blk)
    n = len(nodes)
    if layout == "soa":
        off, stride = padding_offsets(n, padding), 1
    else:
        off, stride = np.arange(Q, dtype=np.int64), Q
    size = int(off[-1] + (n - 1) * stride + 1)
    if size >= 2**31:
        raise ConfigurationError(f"{size} PDF slots exceed the 4-byte adjacency index range; reduce --dims, e.g. --dims 500x100x100")
    if partitions is None:
        partitions = even_ranges(n, pool.n_workers)

    lookup = _node_of_cell(ff, nodes)
    adj = np.empty((n, Q - 1), dtype=np.int32)
    nx, ny, nz = ff.dims
    px, py, pz = ff.periodic
    scatter = orientation == SCATTER

    def fill_adj(wid):
        n0, n1 = partitions[wid]
        _sweeps.build_adjacency(nodes, lookup, nx, ny, nz, px, py, pz, off, stride, scatter, adj, n0, n1)

    pool.run(fill_adj)
    lat = ListLattice(ff, layout, blk, nodes, off, stride, size, padding,
                      AdjacencyList(adj, orientation), pool=pool, partitions=list(partitions))
    if allocate:
        allocate_pdfs(lat, buffers, hugepages)
    return lat


def allocate_pdfs(lat, buffers=2, hugepages=True):
    """Allocate and first-touch ``buffers`` PDF arrays at the rest equilibrium."""
    pdfs, advised = [], True
    for _ in range(buffers):
        buf, ok = alloc_doubles(lat.size, hugepages)
        advised &= ok
        pdfs.append(buf)
    weights = d3q19.W.copy()

    def touch(wid):
        n0, n1 = lat.partitions[wid]
        for buf in pdfs:
            _sweeps.fill_range(buf, lat.off, lat.stride, n0, n1, weights)

    lat.pool.run(touch)
    lat.pdfs = pdfs
    lat.hugepages_advised = advised
    return lat


def build_ria(lat):
    """Run-length code the adjacency list into maximal runs of consecutive
    nodes sharing one relative access pattern."""
    adj = lat.adjacency.index
    n = lat.n_fluid
    starts = np.empty(n, dtype=np.int64)
    lengths = np.empty(n, dtype=np.int64)
    r = _sweeps.ria_runs(adj, lat.stride, starts, lengths)
    starts, lengths = starts[:r].copy(), lengths[:r].copy()
    pattern = adj[starts].astype(np.int64) - starts[:, None] * lat.stride
    return RiaCoding(starts, lengths, pattern, n, lat.stride, lat.adjacency.orientation)


def vectorizable_fraction(ria, width=4):
    """Fraction of nodes covered by full ``width``-lane chunks of their run."""
    if width < 1:
        raise ConfigurationError(f"vector width must be >= 1, got {width}")
    return float(np.sum(ria.length // width * width) / ria.n_fluid)
