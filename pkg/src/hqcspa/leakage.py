"""Synthetic power traces of the table-scan multiplication kernel.

The simulator replays the window kernel's scan loop (16 windows of 4 bits,
16 table entries touched per window) and emits one peak per scan iteration.
The model is Hamming weight of the accumulator plus a spike on the selected
iteration:

    height(i) = base_amp
              + select_amp          if i == nibble
              + state_amp * HW(g)   g = table entry after iteration i
              + N(0, noise_sigma)   per sample

Because the accumulator is zero until the selected iteration and holds the
selected table entry afterwards, the trace steps up right after the tall
selected peak, which reads as a drop from that peak to its successor.

From the second window on, each main peak carries a smaller secondary peak
whose side encodes the scan state: left of the main peak before the
selection, right of it from the selected iteration onward. The first window
gets no secondary peaks, so it can only be attacked through the drop and
tallest-edge-peak features.

Traces are float32 sample vectors with acquisition metadata, written to a
small binary format (magic "GFT1") with a trailing JSON metadata blob.
"""

import json
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gf2x import M64, make_lookup_table

WINDOWS = 16
ITERS = 16

# secondary peaks sit at this multiple of select_amp: well above the noise
# floor at useful noise levels, well below any main peak
SECONDARY_RATIO = 1.5
# bump neighbours get this fraction of the bump height
SHOULDER_RATIO = 0.35


@dataclass(frozen=True)
class LeakageParams:
    """Amplitudes and geometry of the synthetic traces (arbitrary power units)."""

    samples_per_iter: int = 28
    base_amp: float = 6.0
    select_amp: float = 1.0
    state_amp: float = 0.01
    noise_sigma: float = 0.0
    trace_len: int = 7500

    def __post_init__(self):
        if self.samples_per_iter < 2:
            raise ValueError("samples_per_iter must be at least 2")
        if min(self.base_amp, self.select_amp, self.state_amp) < 0:
            raise ValueError("amplitudes must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.trace_len < WINDOWS * ITERS * self.samples_per_iter:
            raise ValueError("trace_len too small for 16x16 scan iterations")

    @property
    def scan_len(self) -> int:
        return WINDOWS * ITERS * self.samples_per_iter


@dataclass(frozen=True)
class TraceMeta:
    """Acquisition metadata carried with every trace."""

    kernel: str
    windows: int
    samples_per_iter: int
    noise_sigma: float
    seed: int
    truth: Optional[int] = None


@dataclass
class Trace:
    """Power samples plus metadata; samples are float32."""

    samples: np.ndarray
    meta: TraceMeta

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)


@dataclass(frozen=True)
class TraceLayout:
    """Where the scan region sits inside a trace.

    The simulator centres the scan region, so the layout is recoverable
    from the metadata alone; cropping with an explicit layout covers the
    case of traces captured with a different lead-in.
    """

    scan_start: int
    samples_per_iter: int
    windows: int = WINDOWS

    @classmethod
    def for_trace(cls, trace: Trace) -> "TraceLayout":
        spi = trace.meta.samples_per_iter
        scan = trace.meta.windows * ITERS * spi
        lead = (len(trace.samples) - scan) // 2
        if lead < 0:
            raise ValueError("trace shorter than its declared scan region")
        return cls(lead, spi, trace.meta.windows)

    @property
    def window_len(self) -> int:
        return ITERS * self.samples_per_iter


def scan_states(a: int, b: int):
    """Replay the scan loop, yielding (window, iteration, nibble, acc_after).

    Mirrors the constant-pattern scan: the accumulator picks up the selected
    table entry at iteration == nibble and keeps it for the rest of the
    window.
    """
    table = make_lookup_table(b & M64)
    for k in range(WINDOWS):
        t = (a >> (4 * k)) & 15
        g = 0
        for i in range(ITERS):
            if i == t:
                g ^= table[t]
            yield k, i, t, g


def _add_bump(samples, pos, height):
    samples[pos] += height
    if pos - 1 >= 0:
        samples[pos - 1] += SHOULDER_RATIO * height
    if pos + 1 < len(samples):
        samples[pos + 1] += SHOULDER_RATIO * height


def derive_seed(*parts) -> int:
    """Fold a master seed and indices into one reproducible integer seed."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def simulate_trace(a: int, b: int, params: LeakageParams = None, seed: int = 0,
                   record_truth: bool = True) -> Trace:
    """One synthetic capture of the window kernel multiplying a and b.

    Deterministic for fixed (a, b, params, seed). Noise is drawn once for
    the whole trace and scaled by noise_sigma, so runs that share a seed
    see the same noise shape at different amplitudes.
    """
    if params is None:
        params = LeakageParams()
    rng = np.random.default_rng(seed)
    samples = params.noise_sigma * rng.standard_normal(params.trace_len)

    spi = params.samples_per_iter
    start = (params.trace_len - params.scan_len) // 2
    main_off = spi // 2
    sub_off = max(1, spi // 4)
    sub_amp = SECONDARY_RATIO * params.select_amp

    for k, i, t, g in scan_states(a, b):
        block = start + (k * ITERS + i) * spi
        height = params.base_amp + params.state_amp * g.bit_count()
        if i == t:
            height += params.select_amp
        _add_bump(samples, block + main_off, height)
        if k >= 1:
            side = sub_off if i >= t else -sub_off
            _add_bump(samples, block + main_off + side, sub_amp)

    meta = TraceMeta(
        kernel="win",
        windows=WINDOWS,
        samples_per_iter=spi,
        noise_sigma=params.noise_sigma,
        seed=int(seed),
        truth=(a & M64) if record_truth else None,
    )
    return Trace(samples.astype(np.float32), meta)


# ---------------------------------------------------------------------------
# trace files: "GFT1" | u32 sample count | f32 samples | JSON metadata

MAGIC = b"GFT1"


class TraceFormatError(ValueError):
    """Raised for malformed trace files."""


def write_trace(trace: Trace, path) -> None:
    """Write a trace; bit-exact round trip with read_trace."""
    if len(trace.samples) == 0:
        raise ValueError("refusing to write an empty trace")
    meta = {
        "kernel": trace.meta.kernel,
        "windows": trace.meta.windows,
        "samples_per_iter": trace.meta.samples_per_iter,
        "noise_sigma": trace.meta.noise_sigma,
        "seed": trace.meta.seed,
    }
    if trace.meta.truth is not None:
        meta["truth"] = f"{trace.meta.truth:016x}"
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(trace.samples)))
        f.write(np.asarray(trace.samples, dtype="<f4").tobytes())
        f.write(json.dumps(meta).encode("utf-8"))


def read_trace(path) -> Trace:
    """Read a trace written by write_trace."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise TraceFormatError("bad magic, not a trace file")
    if len(blob) < 8:
        raise TraceFormatError("truncated header")
    (count,) = struct.unpack("<I", blob[4:8])
    end = 8 + 4 * count
    if len(blob) < end:
        raise TraceFormatError("truncated sample payload")
    samples = np.frombuffer(blob[8:end], dtype="<f4").copy()
    try:
        meta = json.loads(blob[end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TraceFormatError("bad metadata blob") from exc
    truth = meta.get("truth")
    return Trace(
        samples,
        TraceMeta(
            kernel=meta["kernel"],
            windows=int(meta["windows"]),
            samples_per_iter=int(meta["samples_per_iter"]),
            noise_sigma=float(meta["noise_sigma"]),
            seed=int(meta["seed"]),
            truth=int(truth, 16) if truth is not None else None,
        ),
    )


# ---------------------------------------------------------------------------
# trace sets for whole-key recovery

def key_recovery_traces(sk, ct, params: LeakageParams = None, master_seed=0):
    """Simulate captures for every base call that multiplies a raw key limb.

    Walks the Karatsuba schedule of y * u with the key on the scanned-operand
    side. Only leaves whose scanned operand is an original key limb are
    simulated; leaves under middle branches see xor-sums of limbs and are
    skipped. Returns (traces, mapping) with mapping call-index -> key limb
    index, the shape recover_key expects.
    """
    from .gf2x import karatsuba_base_calls

    if params is None:
        params = LeakageParams()
    calls = karatsuba_base_calls(sk.y, ct.u)
    traces = {}
    mapping = {}
    for call in calls:
        if call.a_index is None:
            continue
        traces[call.index] = simulate_trace(
            call.a, call.b, params, seed=derive_seed(master_seed, call.index)
        )
        mapping[call.index] = call.a_index
    return traces, mapping
