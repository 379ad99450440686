"""The 17 benchmark kernels: descriptors, lattice construction and time stepping.

Every lattice exposes its populations in one *standard* convention
(post-streaming, pre-collision).  Push and AA kernels store that convention
directly (AA only after an even number of sub-steps).  Pull kernels store the
state one streaming permutation earlier; ``get_pdfs``/``set_pdfs`` convert
exactly, so push and pull runs compare bitwise.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import _sweeps
from .d3q19 import as_force
from .errors import ConfigurationError, ParityError
from .lattice_full import FullLattice, correction_step, init_full
from .lattice_list import GATHER, SCATTER, allocate_pdfs, build_list, build_ria
from .parallel import default_pool, even_ranges, split_weighted

OS_PUSH = "os-push"
OS_PULL = "os-pull"
AA = "aa"

DIRECT = "direct"
INDIRECT = "indirect"

KERNEL_NAMES = (
    "blk-push-aos", "blk-push-soa", "blk-pull-aos", "blk-pull-soa",
    "aa-aos", "aa-soa", "aa-vec-soa",
    "list-push-aos", "list-push-soa", "list-pull-aos", "list-pull-soa",
    "list-pull-split-nt-1s-soa", "list-pull-split-nt-2s-soa",
    "list-aa-aos", "list-aa-soa", "list-aa-ria-soa", "list-aa-pv-soa",
)

DEFAULT_STRIP = 64


def streaming_stores_available():
    """Whether cache-bypassing stores can be emitted from the compiled sweeps.

    Numba exposes no non-temporal store primitive, so the split kernels always
    fall back to plain stores; results carry that in their metadata.
    """
    return False


@dataclass(frozen=True)
class KernelDescriptor:
    name: str
    propagation: str
    layout: str
    addressing: str
    blk: int = 0
    nt_streams: int = 0
    ria: bool = False
    pv: bool = False
    vec: bool = False
    width: int = 4
    strip: int = DEFAULT_STRIP

    def __post_init__(self):
        if self.propagation not in (OS_PUSH, OS_PULL, AA):
            raise ConfigurationError(f"unknown propagation {self.propagation!r}")
        if self.layout not in ("aos", "soa"):
            raise ConfigurationError(f"unknown layout {self.layout!r}")
        if self.addressing not in (DIRECT, INDIRECT):
            raise ConfigurationError(f"unknown addressing {self.addressing!r}")
        if self.blk < 0:
            raise ConfigurationError(f"--blk must be >= 0, e.g. --blk 50; got {self.blk}")
        if self.width < 1 or self.strip < 1:
            raise ConfigurationError("vector width and strip length must be >= 1")
        if self.nt_streams not in (0, 1, 2):
            raise ConfigurationError(f"nt_streams must be 0, 1 or 2, got {self.nt_streams}")
        if self.nt_streams and not (self.propagation == OS_PULL and self.addressing == INDIRECT
                                    and self.layout == "soa"):
            raise ConfigurationError("non-temporal split stores need OS pull, indirect addressing and SoA")
        if (self.ria or self.pv) and not (self.propagation == AA and self.addressing == INDIRECT
                                          and self.layout == "soa"):
            raise ConfigurationError("RIA/PV need AA propagation, indirect addressing and SoA")
        if self.vec and not (self.propagation == AA and self.layout == "soa"):
            raise ConfigurationError("vectorised sweeps need AA propagation and SoA")
        if self.vec and self.blk:
            raise ConfigurationError(f"{self.name} has no blocked variant (--blk), e.g. --blk 0; got {self.blk}")

    @property
    def is_aa(self):
        return self.propagation == AA

    @property
    def is_list(self):
        return self.addressing == INDIRECT

    @property
    def uses_ria(self):
        return self.ria or self.pv

    @property
    def buffers(self):
        return 1 if self.is_aa else 2

    @property
    def family(self):
        """Kernels of one family share bounce-back handling and agree bitwise."""
        return "list" if self.is_list else "full"

    def with_options(self, **options):
        return dataclasses.replace(self, **options)


def _registry():
    reg = {}
    for prop, tag in ((OS_PUSH, "push"), (OS_PULL, "pull")):
        for layout in ("aos", "soa"):
            reg[f"blk-{tag}-{layout}"] = KernelDescriptor(f"blk-{tag}-{layout}", prop, layout, DIRECT)
            reg[f"list-{tag}-{layout}"] = KernelDescriptor(f"list-{tag}-{layout}", prop, layout, INDIRECT)
    for layout in ("aos", "soa"):
        reg[f"aa-{layout}"] = KernelDescriptor(f"aa-{layout}", AA, layout, DIRECT)
        reg[f"list-aa-{layout}"] = KernelDescriptor(f"list-aa-{layout}", AA, layout, INDIRECT)
    reg["aa-vec-soa"] = KernelDescriptor("aa-vec-soa", AA, "soa", DIRECT, vec=True)
    for s in (1, 2):
        name = f"list-pull-split-nt-{s}s-soa"
        reg[name] = KernelDescriptor(name, OS_PULL, "soa", INDIRECT, nt_streams=s)
    reg["list-aa-ria-soa"] = KernelDescriptor("list-aa-ria-soa", AA, "soa", INDIRECT, ria=True)
    reg["list-aa-pv-soa"] = KernelDescriptor("list-aa-pv-soa", AA, "soa", INDIRECT, pv=True)
    return {name: reg[name] for name in KERNEL_NAMES}


KERNELS = _registry()


def get_kernel(name, **options):
    """Descriptor for ``name`` (a Fig. 7 legend identifier) with options applied."""
    try:
        k = KERNELS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown kernel {name!r} (--kernel); valid names: {', '.join(KERNEL_NAMES)}"
        ) from None
    options = {key: v for key, v in options.items() if v is not None}
    return k.with_options(**options) if options else k


@dataclass
class SweepState:
    """AA parity and step counter; ``parity`` names the sub-step due next."""

    parity: str = "even"
    steps: int = 0


def _aligned_ranges(n, parts, align):
    ranges = []
    for a, b in even_ranges(n, parts):
        ranges.append(a)
    bounds = [min(n, -(-a // align) * align) for a in ranges] + [n]
    bounds[0] = 0
    return [(bounds[i], bounds[i + 1]) for i in range(parts)]


def build_lattice(ff, k, pool=None, padding=None, pad=0, hugepages=True):
    """Build the lattice ``k`` runs on, partitioned for ``pool``'s workers.

    The partition used for first-touch initialisation is the one the sweeps
    use; it is fixed here and never reordered.
    """
    pool = pool or default_pool()
    workers = pool.n_workers
    if not k.is_list:
        nx, ny, nz = ff.dims
        slabs = None
        if k.blk > 0 or k.vec:
            slabs = even_ranges(nx, workers)
            parts = [(a * ny * nz, b * ny * nz) for a, b in slabs]
        else:
            parts = even_ranges(ff.n_nodes, workers)
        lat = init_full(ff, k.layout, k.buffers, pad=pad, pool=pool, partitions=parts, hugepages=hugepages)
        lat.slabs = slabs
    else:
        orientation = GATHER if k.propagation == OS_PULL else SCATTER
        lat = build_list(ff, k.layout, k.blk, padding, orientation, pool=pool, allocate=False)
        if k.uses_ria:
            lat.ria = build_ria(lat)
            run_parts = split_weighted(lat.ria.length, workers)
            lat.run_partitions = run_parts
            starts = list(lat.ria.start) + [lat.n_fluid]
            lat.partitions = [(int(starts[a]), int(starts[b])) for a, b in run_parts]
        elif k.nt_streams:
            lat.partitions = _aligned_ranges(lat.n_fluid, workers, 8)
        allocate_pdfs(lat, k.buffers, hugepages)
    lat.kernel = k
    lat.scratch = [_sweeps.Scratch(k.width, k.strip) for _ in range(workers)]
    if not k.is_list:
        lat.delta = _sweeps.node_deltas(ff.dims[1], ff.dims[2])
    lat.state = SweepState()
    lat.pv_chunked = 0
    return lat


def _args(p, g):
    gx, gy, gz = as_force(g).g
    return p.omega_plus, p.omega_minus, gx, gy, gz


def _check(lat, k):
    if lat.buffers != k.buffers:
        raise ConfigurationError(
            f"kernel {k.name} needs {k.buffers} PDF buffer(s), lattice has {lat.buffers}"
        )
    if isinstance(lat, FullLattice) == k.is_list:
        raise ConfigurationError(f"kernel {k.name} does not match the lattice representation")
    if k.uses_ria and getattr(lat, "ria", None) is None:
        raise ConfigurationError(f"kernel {k.name} needs a lattice with RIA coding")


def step_os(lat, k, p, g=None):
    """One fused collide-stream step from ``pdfs[0]`` into ``pdfs[1]``, then swap."""
    if k.is_aa:
        raise ConfigurationError(f"step_os called with AA kernel {k.name}")
    _check(lat, k)
    lat.set_convention("pull" if k.propagation == OS_PULL else "standard")
    args = _args(p, g)
    src, dst = lat.pdfs
    if isinstance(lat, FullLattice):
        op = _sweeps.NODE_UPDATES[_sweeps.OP_PUSH if k.propagation == OS_PUSH else _sweeps.OP_PULL]
        nx, ny, nz = lat.dims
        if k.blk > 0:
            def work(wid):
                x0, x1 = lat.slabs[wid]
                w = lat.scratch[wid]
                _sweeps.full_sweep_blocked(op, src, dst, lat.solid, nx, ny, nz, lat.off, lat.stride, lat.delta,
                                           x0, x1, k.blk, w.q, w.out, *args)
        else:
            def work(wid):
                n0, n1 = lat.partitions[wid]
                w = lat.scratch[wid]
                _sweeps.full_sweep_range(op, src, dst, lat.solid, nx, ny, nz, lat.off, lat.stride, lat.delta,
                                         n0, n1, w.q, w.out, *args)
        lat.pool.run(work)
        lat.pdfs.reverse()
        correction_step(lat)
    else:
        adj = lat.adjacency.index
        if k.propagation == OS_PUSH:
            def work(wid):
                n0, n1 = lat.partitions[wid]
                w = lat.scratch[wid]
                _sweeps.list_push(src, dst, adj, lat.off, lat.stride, n0, n1, w.q, w.out, *args)
        elif k.nt_streams:
            def work(wid):
                n0, n1 = lat.partitions[wid]
                w = lat.scratch[wid]
                _sweeps.list_pull_split(src, dst, adj, lat.off, n0, n1, k.strip, k.nt_streams,
                                        w.q, w.out, w.stage, *args)
        else:
            def work(wid):
                n0, n1 = lat.partitions[wid]
                w = lat.scratch[wid]
                _sweeps.list_pull(src, dst, adj, lat.off, lat.stride, n0, n1, w.q, w.out, *args)
        lat.pool.run(work)
        lat.pdfs.reverse()
    lat.state.steps += 1


def step_aa(lat, k, p, g=None, state=None, which=None):
    """Run the AA sub-step that is due (or ``which`` = "even"/"odd", checked)."""
    if not k.is_aa:
        raise ConfigurationError(f"step_aa called with non-AA kernel {k.name}")
    _check(lat, k)
    state = state or lat.state
    if which is not None and which != state.parity:
        raise ParityError(f"AA {which} step requested but the {state.parity} step is due")
    odd = state.parity == "odd"
    args = _args(p, g)
    f = lat.pdfs[0]
    if isinstance(lat, FullLattice):
        nx, ny, nz = lat.dims
        op = _sweeps.NODE_UPDATES[_sweeps.OP_AA_ODD if odd else _sweeps.OP_AA_EVEN]
        if k.vec:
            def work(wid):
                x0, x1 = lat.slabs[wid]
                w = lat.scratch[wid]
                _sweeps.full_aa_vec(odd, f, lat.solid, nx, ny, nz, lat.off, lat.delta, x0, x1, k.width,
                                    w.q, w.out, w.lanes_q, w.lanes_o, w.index, *args)
        elif k.blk > 0:
            def work(wid):
                x0, x1 = lat.slabs[wid]
                w = lat.scratch[wid]
                _sweeps.full_sweep_blocked(op, f, f, lat.solid, nx, ny, nz, lat.off, lat.stride, lat.delta,
                                           x0, x1, k.blk, w.q, w.out, *args)
        else:
            def work(wid):
                n0, n1 = lat.partitions[wid]
                w = lat.scratch[wid]
                _sweeps.full_sweep_range(op, f, f, lat.solid, nx, ny, nz, lat.off, lat.stride, lat.delta,
                                         n0, n1, w.q, w.out, *args)
        lat.pool.run(work)
        if odd:
            correction_step(lat)
    elif not odd:
        if k.pv:
            def work(wid):
                n0, n1 = lat.partitions[wid]
                w = lat.scratch[wid]
                _sweeps.list_aa_even_vec(f, lat.off, n0, n1, k.width, w.q, w.out, w.lanes_q, w.lanes_o, *args)
        else:
            def work(wid):
                n0, n1 = lat.partitions[wid]
                w = lat.scratch[wid]
                _sweeps.list_aa_even(f, lat.off, lat.stride, n0, n1, w.q, w.out, *args)
        lat.pool.run(work)
    else:
        ria = lat.ria
        off0 = int(lat.off[0])
        if k.pv:
            def work(wid):
                r0, r1 = lat.run_partitions[wid]
                w = lat.scratch[wid]
                return _sweeps.list_aa_odd_pv(f, ria.start, ria.length, ria.pattern, off0, r0, r1, k.width,
                                              w.q, w.out, w.lanes_q, w.lanes_o, w.index, *args)
            lat.pv_chunked = int(sum(lat.pool.run(work)))
        else:
            if k.ria:
                def work(wid):
                    r0, r1 = lat.run_partitions[wid]
                    w = lat.scratch[wid]
                    _sweeps.list_aa_odd_ria(f, ria.start, ria.length, ria.pattern, off0, r0, r1,
                                            w.q, w.out, w.index, *args)
            else:
                adj = lat.adjacency.index

                def work(wid):
                    n0, n1 = lat.partitions[wid]
                    w = lat.scratch[wid]
                    _sweeps.list_aa_odd(f, adj, lat.off, lat.stride, n0, n1, w.q, w.out, *args)
            lat.pool.run(work)
    state.parity = "even" if odd else "odd"
    state.steps += 1


def advance(lat, k, p, g=None, steps=1):
    """Apply ``steps`` time steps; storage ends in the standard convention for AA."""
    if steps < 0:
        raise ConfigurationError(f"steps must be >= 0, got {steps}")
    if k.is_aa:
        if steps % 2:
            raise ConfigurationError(f"AA kernels advance in even step counts (--iterations), got {steps}")
        if lat.state.parity != "even":
            raise ParityError("lattice is between AA sub-steps")
        for _ in range(steps):
            step_aa(lat, k, p, g)
    else:
        for _ in range(steps):
            step_os(lat, k, p, g)


def perturb(lat, seed, amplitude=1e-3):
    """Multiply every population by ``1 + amplitude * U(-1, 1)`` (reproducible)."""
    rng = np.random.default_rng(seed)
    f = lat.get_pdfs()
    lat.set_pdfs(f * (1.0 + amplitude * rng.uniform(-1.0, 1.0, size=f.shape)))
