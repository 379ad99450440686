"""Loop balance, Roofline ceiling and the bandwidth micro-benchmarks.

Loop balance is counted in bytes of main-memory traffic per fluid lattice
node update (B/FLUP): 8 B per PDF read, write and write-allocate plus 4 B per
adjacency entry.  The Roofline ceiling is ``P_max = B / B_l``.
"""

import glob
import json
import os
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import _sweeps
from .errors import ConfigurationError, DomainError
from .kernels import AA, INDIRECT, KERNEL_NAMES, KernelDescriptor, get_kernel, streaming_stores_available
from .parallel import WorkerPool, even_ranges

PDF_BYTES = 8
INDEX_BYTES = 4
Q_LINKS = 18
# 18 relative offsets plus the run length, 4 B each
RUN_BYTES = 18 * INDEX_BYTES + INDEX_BYTES

MICROBENCHMARKS = ("copy", "copy-19", "copy-19-nt-sl", "update-19")

DEFAULT_WORKING_SET = 1 << 30
MIN_SECONDS = 0.5
MIN_REPETITIONS = 5


@dataclass(frozen=True)
class LoopBalance:
    """B/FLUP, either a point value or (for RIA kernels without geometry) a range."""

    low: float
    high: float
    reads: int = 19
    writes: int = 19
    write_allocates: int = 0
    adjacency_bytes: float = 0.0
    ria_bytes: float = 0.0

    @property
    def is_range(self):
        return self.low != self.high

    @property
    def value(self):
        if self.is_range:
            raise ValueError("loop balance is a range; use low/high")
        return self.low

    def __str__(self):
        if self.is_range:
            return f"{self.low:g}-{self.high:g}"
        return f"{self.low:.1f}" if self.low != int(self.low) else f"{int(self.low)}"


def _balance(reads, writes, wa, adjacency=0.0, ria=0.0):
    v = PDF_BYTES * (reads + writes + wa) + adjacency + ria
    return LoopBalance(v, v, reads, writes, wa, adjacency, ria)


def loop_balance(k, geom_stats=None, streaming_stores=True):
    """Loop balance of kernel ``k``.

    ``geom_stats`` is ``(R, n_fluid)`` (total RIA runs, fluid nodes) and is
    only used by RIA/PV kernels; without it those return the range 304-342.
    ``streaming_stores=False`` gives the effective value of the split kernels
    when they fall back to plain stores (write-allocate comes back).
    """
    if isinstance(k, str):
        k = get_kernel(k)
    adjacency = (Q_LINKS * INDEX_BYTES) if k.addressing == INDIRECT else 0
    if k.propagation != AA:
        if k.nt_streams:
            return _balance(19, 19, 0 if streaming_stores else 19, adjacency)
        return _balance(19, 19, 19, adjacency)
    if not k.uses_ria:
        # one adjacency lookup per EVEN/ODD pair
        return _balance(19, 19, 0, adjacency / 2)
    lo = 8 * 38
    if geom_stats is None:
        return LoopBalance(lo, lo + RUN_BYTES / 2, 19, 19, 0, 0.0, RUN_BYTES / 2)
    runs, n_fluid = geom_stats
    if n_fluid <= 0 or runs < 0 or runs > n_fluid:
        raise DomainError(f"geometry stats need 0 <= R <= n_fluid and n_fluid > 0, got {geom_stats}")
    return _balance(19, 19, 0, 0.0, RUN_BYTES * runs / (2 * n_fluid))


def microbench_for(k):
    """Micro-benchmark whose bandwidth bounds kernel ``k``."""
    if isinstance(k, str):
        k = get_kernel(k)
    if k.nt_streams:
        return "copy-19-nt-sl"
    return "update-19" if k.propagation == AA else "copy-19"


@dataclass(frozen=True)
class BandwidthMeasurement:
    which: str
    bytes: int
    seconds: float
    working_set_bytes: int = 0
    workers: int = 1
    repetitions: tuple = ()
    streaming_stores: bool = True

    @property
    def gbs(self):
        return self.bytes / self.seconds / 1e9

    def to_dict(self):
        d = asdict(self)
        d["gbs"] = self.gbs
        return d


@dataclass(frozen=True)
class RooflinePrediction:
    bandwidth_gbs: float
    bl_low: float
    bl_high: float
    # MFLUP/s; a range when B_l is a range (high B_l -> low ceiling)
    pmax_low: float
    pmax_high: float

    @property
    def pmax(self):
        if self.pmax_low != self.pmax_high:
            raise ValueError("P_max is a range; use pmax_low/pmax_high")
        return self.pmax_low


def _gbs(b):
    return b.gbs if isinstance(b, BandwidthMeasurement) else float(b)


def roofline(b, bl):
    """Performance ceiling ``P_max [MFLUP/s] = B [GB/s] * 1000 / B_l [B/FLUP]``."""
    bw = _gbs(b)
    lo, hi = (bl.low, bl.high) if isinstance(bl, LoopBalance) else (float(bl), float(bl))
    if not bw > 0 or not lo > 0:
        raise DomainError(f"bandwidth and loop balance must be positive, got B={bw}, B_l={lo}")
    return RooflinePrediction(bw, lo, hi, bw * 1000.0 / hi, bw * 1000.0 / lo)


# --- micro-benchmarks ---------------------------------------------------------

def _parse_size(text):
    text = text.strip().upper()
    for suffix, scale in (("K", 1 << 10), ("M", 1 << 20), ("G", 1 << 30)):
        if text.endswith(suffix):
            return int(float(text[:-1]) * scale)
    return int(text)


def last_level_cache_bytes():
    """Size of the largest cache of cpu0 from sysfs, or None if unknown."""
    best = None
    for path in glob.glob("/sys/devices/system/cpu/cpu0/cache/index*"):
        try:
            with open(os.path.join(path, "type")) as fh:
                if fh.read().strip() == "Instruction":
                    continue
            with open(os.path.join(path, "size")) as fh:
                size = _parse_size(fh.read())
        except (OSError, ValueError):
            continue
        best = size if best is None else max(best, size)
    return best


def minimum_working_set(llc_bytes=None):
    llc = llc_bytes if llc_bytes is not None else last_level_cache_bytes()
    return 4 * llc if llc else DEFAULT_WORKING_SET


def _layout(which, working_set):
    """(arrays, elements per array, accounted bytes per element per sweep)."""
    if which == "copy":
        n = working_set // 16
        return 1, n, 24
    if which in ("copy-19", "copy-19-nt-sl"):
        n = working_set // (16 * 19)
        return 19, n, 24
    if which == "update-19":
        n = working_set // (8 * 19)
        return 19, n, 16
    raise ConfigurationError(f"--which must be one of {', '.join(MICROBENCHMARKS)}; got {which!r}")


def microbench(which, working_set_bytes=None, workers=1, pool=None, min_seconds=MIN_SECONDS,
               repetitions=MIN_REPETITIONS, llc_bytes=None, strip=64):
    """Measure sustained bandwidth of one micro-benchmark.

    Each repetition runs whole sweeps until ``min_seconds`` have passed; the
    reported figure is the median repetition.  copy-19-nt-sl stages a strip of
    all 19 arrays and writes it back as a single store stream; without
    cache-bypassing stores it is accounted at 24 B/element and flagged.
    """
    _layout(which, 0)
    floor = minimum_working_set(llc_bytes)
    size = int(working_set_bytes) if working_set_bytes is not None else max(DEFAULT_WORKING_SET, floor)
    if size < floor:
        raise ConfigurationError(
            f"--size must be at least 4x the last-level cache ({floor} bytes), e.g. --size {floor}"
        )
    if repetitions < MIN_REPETITIONS or min_seconds < MIN_SECONDS:
        raise ConfigurationError(
            f"need >= {MIN_REPETITIONS} repetitions of >= {MIN_SECONDS} s each"
        )
    own = pool is None
    pool = pool or WorkerPool(workers)
    try:
        return _measure(which, size, pool, min_seconds, repetitions, strip)
    finally:
        if own:
            pool.close()


def _measure(which, size, pool, min_seconds, repetitions, strip):
    arrays, n, per_elem = _layout(which, size)
    streaming = True
    if which == "copy-19-nt-sl":
        streaming = streaming_stores_available()
        per_elem = 16 if streaming else 24
    parts = even_ranges(n, pool.n_workers)
    a = np.empty((arrays, n))
    b = np.empty((arrays, n)) if which != "update-19" else None
    stages = [np.empty((19, strip)) for _ in range(pool.n_workers)]

    def touch(wid):
        i0, i1 = parts[wid]
        a[:, i0:i1] = 1.0
        if b is not None:
            b[:, i0:i1] = 0.0

    pool.run(touch)
    block = 512

    def sweep(wid):
        i0, i1 = parts[wid]
        if which == "copy":
            _sweeps.mb_copy(a[0], b[0], i0, i1)
        elif which == "copy-19":
            _sweeps.mb_copy19(a, b, i0, i1, block)
        elif which == "copy-19-nt-sl":
            _sweeps.mb_copy19_strip(a, b, i0, i1, strip, stages[wid])
        else:
            _sweeps.mb_update19(a, i0, i1, block, 1.0)

    pool.run(sweep)  # compile and warm up
    sweep_bytes = per_elem * arrays * n
    reps = []
    for _ in range(repetitions):
        sweeps = 0
        t0 = time.perf_counter()
        while True:
            pool.run(sweep)
            sweeps += 1
            dt = time.perf_counter() - t0
            if dt >= min_seconds:
                break
        reps.append((sweep_bytes * sweeps / dt / 1e9, sweep_bytes * sweeps, dt))
    med = statistics.median_low([r[0] for r in reps])
    _, nbytes, secs = next(r for r in reps if r[0] == med)
    return BandwidthMeasurement(which, nbytes, secs, arrays * n * (8 if b is None else 16),
                                pool.n_workers, tuple(r[0] for r in reps), streaming)


# --- bandwidth sets and the model report --------------------------------------

def save_bandwidths(path, bandwidths):
    """Write ``{micro-benchmark: GB/s}`` as JSON."""
    data = {k: _gbs(v) for k, v in sorted(bandwidths.items())}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bandwidths(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"--bandwidths: cannot read {path}: {exc}; e.g. write one with `microbench --save bw.json`") from None
    if not isinstance(data, dict):
        raise ConfigurationError('--bandwidths file must map names to GB/s, e.g. {"copy-19": 48.0}')
    out = {}
    for name, value in data.items():
        if name not in MICROBENCHMARKS:
            raise ConfigurationError(f"--bandwidths: unknown micro-benchmark {name!r}; valid: {', '.join(MICROBENCHMARKS)}")
        if not isinstance(value, (int, float)) or not value > 0:
            raise ConfigurationError(f'--bandwidths: {name} needs a positive GB/s value, e.g. "{name}": 48.0')
        out[name] = float(value)
    return out


@dataclass(frozen=True)
class ReportRow:
    kernel: str
    bl: LoopBalance
    microbench: str
    bandwidth_gbs: float = None
    prediction: RooflinePrediction = None

    @property
    def available(self):
        return self.prediction is not None

    def as_dict(self):
        p = self.prediction
        return {
            "kernel": self.kernel,
            "bl_low": self.bl.low,
            "bl_high": self.bl.high,
            "microbench": self.microbench,
            "bandwidth_gbs": self.bandwidth_gbs,
            "pmax_low": None if p is None else p.pmax_low,
            "pmax_high": None if p is None else p.pmax_high,
            "available": self.available,
        }


def model_report(bandwidths, kernels=None, geom_stats=None):
    """One row per kernel: B_l, bounding micro-benchmark and P_max.

    ``geom_stats`` (R, n_fluid) pins the RIA/PV loop balance to a point value.
    Rows whose micro-benchmark has no bandwidth are marked unavailable.
    """
    rows = []
    bandwidths = bandwidths or {}
    for k in kernels or KERNEL_NAMES:
        if not isinstance(k, KernelDescriptor):
            k = get_kernel(k)
        bl = loop_balance(k, geom_stats if k.uses_ria else None)
        mb = microbench_for(k)
        bw = bandwidths.get(mb)
        pred = roofline(bw, bl) if bw is not None else None
        rows.append(ReportRow(k.name, bl, mb, None if bw is None else _gbs(bw), pred))
    return rows


def format_report(rows):
    lines = [f"{'kernel':<28}{'B_l [B/FLUP]':>14}  {'micro-benchmark':<16}{'B [GB/s]':>10}{'P_max [MFLUP/s]':>18}"]
    for r in rows:
        if r.available:
            p = r.prediction
            pm = f"{p.pmax_low:.1f}" if p.pmax_low == p.pmax_high else f"{p.pmax_low:.1f}-{p.pmax_high:.1f}"
            bw = f"{r.bandwidth_gbs:.1f}"
        else:
            pm, bw = "unavailable", "-"
        lines.append(f"{r.kernel:<28}{str(r.bl):>14}  {r.microbench:<16}{bw:>10}{pm:>18}")
    return "\n".join(lines)


def report_json(rows):
    return json.dumps([r.as_dict() for r in rows], indent=2, sort_keys=True)
