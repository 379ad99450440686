"""Benchmark execution: configuration, warm-up, timing and result records.

Timing covers only the measured iterations: geometry and lattice
construction, first-touch initialisation and warm-up happen before the clock
starts.  CPU frequency pinning and background-noise control are left to the
user.
"""

import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone

import numpy as np

from .d3q19 import BodyForce, TrtParams, as_force
from .errors import ConfigurationError, DomainError, InvalidStateError, NumericalFailure
from .geometry import GeometrySpec, build_geometry
from .kernels import KernelDescriptor, advance, build_lattice, get_kernel, perturb, streaming_stores_available
from .lattice_list import PaddingPolicy, build_list, build_ria, vectorizable_fraction
from .parallel import WorkerPool, set_affinity  # noqa: F401  (re-exported)
from .perfmodel import loop_balance, microbench_for, roofline

SCHEMA_VERSION = 1
DEFAULT_WARMUP = 10
# velocity changes this small are rounding noise of O(1) populations, not flow
ROUNDOFF = np.finfo(np.float64).eps / 2


def mflups(n_fluid, iterations, seconds):
    """Million fluid lattice node updates per second."""
    if seconds <= 0:
        raise ConfigurationError(f"elapsed time must be positive, got {seconds}")
    return n_fluid * iterations / seconds / 1e6


@dataclass
class BenchConfig:
    kernel: str = "list-aa-pv-soa"
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    iterations: int = 100
    warmup: int = DEFAULT_WARMUP
    workers: int = 1
    affinity: list = None
    padding: str = "auto"
    blk: int = 0
    pad: int = 0
    seed: int = None
    tau: float = 0.9
    g: tuple = (0.0, 0.0, 0.0)
    hugepages: bool = True
    # micro-benchmark name -> GB/s, used for P_max
    bandwidths: dict = None

    def descriptor(self):
        return get_kernel(self.kernel, blk=self.blk)

    def validate(self):
        """Check everything that can be checked before allocating memory."""
        k = self.descriptor()
        if self.iterations < 1:
            raise ConfigurationError(f"--iterations must be >= 1, e.g. --iterations 100; got {self.iterations}")
        if self.warmup < 0:
            raise ConfigurationError(f"--warmup must be >= 0, e.g. --warmup 10; got {self.warmup}")
        if k.is_aa and (self.iterations % 2 or self.warmup % 2):
            raise ConfigurationError(
                f"AA kernels need even --iterations (e.g. --iterations 100); got {self.iterations}"
                f" with warmup {self.warmup}"
            )
        if self.workers < 1:
            raise ConfigurationError(f"--threads must be >= 1, e.g. --threads 4; got {self.workers}")
        PaddingPolicy.parse(self.padding)
        if self.pad and (k.is_list or k.layout != "soa"):
            raise ConfigurationError(f"--pad only applies to full-array SoA kernels, e.g. --kernel aa-soa --pad 8; got {k.name}")
        try:
            TrtParams.from_tau(self.tau)
        except DomainError:
            raise ConfigurationError(f"--tau must lie above 0.5, e.g. --tau 0.9; got {self.tau}") from None
        as_force(self.g)
        return k


@dataclass
class BenchResult:
    schema_version: int
    timestamp: str
    host: str
    kernel: str
    geometry: str
    nx: int
    ny: int
    nz: int
    blk: int
    padding_mode: str
    threads: int
    iterations: int
    warmup: int
    n_fluid: int
    seconds: float
    mflups: float
    bl_theoretical: float
    bl_effective: float
    microbench: str
    bandwidth_gbs: float
    pmax_mflups: float
    v_fraction: float
    ria_runs: int
    nt_streams_requested: int
    nt_streams_effective: int
    affinity: list
    affinity_applied: list
    hugepages_advised: bool

    @property
    def roofline_fraction(self):
        return None if self.pmax_mflups is None else self.mflups / self.pmax_mflups

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        missing = names - set(d)
        if missing:
            raise ConfigurationError(f"result record misses fields {sorted(missing)}")
        return cls(**{k: d[k] for k in names})

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _padding_mode(k, cfg):
    if not k.is_list:
        return f"pad={cfg.pad}" if cfg.pad else "none"
    if k.layout == "aos":
        return "none"
    return PaddingPolicy.parse(cfg.padding).describe()


def prepare(cfg, pool):
    """Build geometry and lattice for ``cfg`` on ``pool`` (not timed)."""
    k = cfg.validate()
    ff = build_geometry(cfg.geometry)
    padding = PaddingPolicy.parse(cfg.padding) if k.is_list else None
    lat = build_lattice(ff, k, pool=pool, padding=padding, pad=cfg.pad, hugepages=cfg.hugepages)
    if cfg.seed is not None:
        perturb(lat, cfg.seed)
    return k, lat


def execute(cfg):
    """Run ``cfg``; returns ``(BenchResult, lattice)``."""
    k = cfg.validate()
    params = TrtParams.from_tau(cfg.tau)
    g = BodyForce(tuple(cfg.g))
    pool = WorkerPool(cfg.workers, cfg.affinity)
    try:
        k, lat = prepare(cfg, pool)
        advance(lat, k, params, g, cfg.warmup)
        t0 = time.perf_counter()
        advance(lat, k, params, g, cfg.iterations)
        seconds = time.perf_counter() - t0
    finally:
        pool.close()
    return _result(cfg, k, lat, pool, seconds), lat


def run_benchmark(cfg):
    return execute(cfg)[0]


def _result(cfg, k, lat, pool, seconds):
    ria = getattr(lat, "ria", None)
    stats = (ria.total_runs, lat.n_fluid) if ria is not None else None
    bl = loop_balance(k, stats)
    nt_effective = k.nt_streams if streaming_stores_available() else 0
    bl_eff = loop_balance(k, stats, streaming_stores=bool(nt_effective) or not k.nt_streams)
    mb = microbench_for(k)
    bw = (cfg.bandwidths or {}).get(mb)
    pmax = roofline(bw, bl_eff).pmax if bw is not None else None
    spec = cfg.geometry
    host = f"{platform.node()} {platform.machine()} {platform.processor()}".strip()
    return BenchResult(
        schema_version=SCHEMA_VERSION,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        host=host,
        kernel=k.name,
        geometry=spec.kind,
        nx=spec.dims[0], ny=spec.dims[1], nz=spec.dims[2],
        blk=k.blk,
        padding_mode=_padding_mode(k, cfg),
        threads=pool.n_workers,
        iterations=cfg.iterations,
        warmup=cfg.warmup,
        n_fluid=lat.n_fluid,
        seconds=seconds,
        mflups=mflups(lat.n_fluid, cfg.iterations, seconds),
        bl_theoretical=bl.low,
        bl_effective=bl_eff.low,
        microbench=mb,
        bandwidth_gbs=bw,
        pmax_mflups=pmax,
        v_fraction=vectorizable_fraction(ria, k.width) if ria is not None else None,
        ria_runs=stats[0] if stats else None,
        nt_streams_requested=k.nt_streams,
        nt_streams_effective=nt_effective,
        affinity=list(cfg.affinity or []),
        affinity_applied=list(pool.affinity_applied) if cfg.affinity else [],
        hugepages_advised=bool(lat.hugepages_advised),
    )


def ria_stats(ff, blk=0, pool=None):
    """(R, n_fluid) of the run-length coded adjacency of ``ff`` (no PDFs allocated)."""
    lat = build_list(ff, "soa", blk, pool=pool, allocate=False)
    return build_ria(lat).total_runs, lat.n_fluid


@dataclass
class Convergence:
    steps: int
    converged: bool
    change: float


def _velocity(lat, step):
    try:
        _, u = lat.fields()
    except InvalidStateError:
        raise NumericalFailure(f"simulation diverged by step {step}", step=step) from None
    return u[lat.flags.flags == 0]


def steady_state_run(kernel, lattice, params, g, check_interval, rel_tol, max_steps):
    """Advance in ``check_interval`` chunks until the velocity settles.

    Stops when ``max|u - u_prev| / max|u| < rel_tol`` over fluid nodes or when
    ``max_steps`` is reached; the returned ``Convergence`` tells which.  A
    change of at most ``ROUNDOFF`` counts as none, so fields at rest (where
    the relative change is 0/0 plus rounding noise) settle too.
    """
    if isinstance(kernel, str):
        kernel = get_kernel(kernel)
    if not rel_tol > 0:
        raise ConfigurationError(f"rel_tol must be positive, got {rel_tol}")
    if check_interval < 1 or (kernel.is_aa and check_interval % 2):
        raise ConfigurationError(f"check_interval must be >= 1 (even for AA), got {check_interval}")
    steps = 0
    prev = _velocity(lattice, 0)
    change = math.inf
    while steps < max_steps:
        n = min(check_interval, max_steps - steps)
        if kernel.is_aa and n % 2:
            n -= 1
        if n <= 0:
            break
        advance(lattice, kernel, params, g, n)
        steps += n
        u = _velocity(lattice, steps)
        scale = np.max(np.abs(u))
        diff = np.max(np.abs(u - prev))
        change = 0.0 if diff <= ROUNDOFF else (diff / scale if scale > 0 else math.inf)
        prev = u
        if change < rel_tol:
            return Convergence(steps, True, change)
    return Convergence(steps, False, change)
