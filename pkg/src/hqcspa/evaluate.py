"""Experiment runner, timing harness, and report/figure export.

run_evaluation reproduces the bulk attack experiment: many random limb
multiplications, one synthetic trace each, single-trace recovery, and
actual-vs-recovered bookkeeping split into a first-window confusion matrix
and one for the remaining fifteen windows.

run_bench times the batch kernels over pre-generated operand streams,
xor-folding every product into a checksum so the work cannot be optimized
away and different kernels can be cross-checked on the same stream.

calibrate_sigma finds the noise level at which the first-window error rate
lands in a target band; the shipped operating point was frozen with it.
"""

import csv
import json
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .attack import AttackConfig, find_peaks, recover_limb
from .gf2x import BATCH_KERNELS, masked_mul_batch
from .leakage import LeakageParams, Trace, TraceLayout, derive_seed, simulate_trace

# Operating point frozen by calibrate_sigma against the default amplitudes:
# first-window error rate in [0.2%, 0.5%] over 10^4 trials, errors confined
# to nibble values 0 and 15. The drop threshold fraction is lowered from the
# 0.5 default because the flat-interior windows (values 0 and 15) are
# classified through the tallest-edge-peak rule and their error rate is set
# by how often noise fakes an above-threshold interior drop.
CALIBRATED_NOISE_SIGMA = 0.0825
CALIBRATED_DROP_FRACTION = 0.35


def calibrated_leakage(**overrides) -> LeakageParams:
    """Leakage parameters at the calibrated noise level."""
    return LeakageParams(noise_sigma=CALIBRATED_NOISE_SIGMA, **overrides)


def calibrated_attack(**overrides) -> AttackConfig:
    """Attack thresholds matching the calibrated operating point."""
    overrides.setdefault("drop_fraction", CALIBRATED_DROP_FRACTION)
    return AttackConfig(**overrides)


class ConfusionMatrix:
    """16x16 actual-vs-recovered nibble counts."""

    def __init__(self, counts=None):
        self.counts = (
            np.zeros((16, 16), dtype=np.int64)
            if counts is None
            else np.asarray(counts, dtype=np.int64)
        )
        if self.counts.shape != (16, 16) or (self.counts < 0).any():
            raise ValueError("counts must be a non-negative 16x16 matrix")

    def add(self, actual: int, recovered: int) -> None:
        self.counts[actual, recovered] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def normalized(self) -> np.ndarray:
        """Row-normalized counts; all-zero rows stay zero."""
        sums = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(sums > 0, self.counts / sums, 0.0)
        return out

    def diagonal_fraction(self) -> float:
        return float(np.trace(self.counts)) / max(1, self.total)

    def is_diagonal(self) -> bool:
        return int(np.trace(self.counts)) == self.total

    def off_diagonal_rows(self) -> list:
        off = self.counts.copy()
        np.fill_diagonal(off, 0)
        return sorted(int(r) for r in np.unique(np.nonzero(off)[0]))

    def write_csv(self, path) -> None:
        norm = self.normalized
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["actual"] + [f"recovered_{j}" for j in range(16)])
            for i in range(16):
                w.writerow([i] + [f"{v:.8f}" for v in norm[i]])


@dataclass
class EvaluationResult:
    """Aggregate outcome of a bulk single-trace attack run."""

    trials: int
    success_rate: float
    cm_first_window: ConfusionMatrix
    cm_rest: ConfusionMatrix
    failures: list
    noise_sigma: float
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def failed_trials(self) -> int:
        return round(self.trials * (1.0 - self.success_rate))

    def failures_only_in_window(self, window: int) -> bool:
        return all(f["window"] == window for f in self.failures)

    def to_json(self) -> str:
        return json.dumps(
            {
                "trials": self.trials,
                "success_rate": self.success_rate,
                "noise_sigma": self.noise_sigma,
                "seed": self.seed,
                "failures": self.failures,
                "cm_first_window": self.cm_first_window.counts.tolist(),
                "cm_rest": self.cm_rest.counts.tolist(),
                "config": self.config,
            },
            indent=2,
        )


def run_evaluation(trials: int, noise_sigma: float, seed: int,
                   leakage: LeakageParams = None,
                   attack_cfg: AttackConfig = None) -> EvaluationResult:
    """Attack `trials` random (a, b) multiplications at the given noise level.

    Per-trial seeds derive from the master seed by trial index, so runs are
    reproducible and runs differing only in noise level see the same
    operands and the same underlying noise shape.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if leakage is None:
        leakage = LeakageParams()
    params = replace(leakage, noise_sigma=noise_sigma)
    if attack_cfg is None:
        attack_cfg = calibrated_attack()

    cm_first = ConfusionMatrix()
    cm_rest = ConfusionMatrix()
    failures = []
    good = 0
    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(seed, trial))
        a = int(rng.integers(0, 1 << 64, dtype=np.uint64))
        b = int(rng.integers(0, 1 << 64, dtype=np.uint64))
        trace = simulate_trace(a, b, params, seed=derive_seed(seed, trial, 1))
        rep = recover_limb(trace, attack_cfg)
        good += rep.limb_success
        for w, (got, want, ok, classified) in enumerate(
            zip(rep.recovered, rep.truth, rep.per_window_success, rep.classified)
        ):
            if classified:
                (cm_first if w == 0 else cm_rest).add(want, got)
            if not ok:
                failures.append(
                    {"trial": trial, "window": w, "actual": want,
                     "recovered": got if classified else None}
                )
    return EvaluationResult(
        trials=trials,
        success_rate=good / trials,
        cm_first_window=cm_first,
        cm_rest=cm_rest,
        failures=failures,
        noise_sigma=noise_sigma,
        seed=seed,
        config=attack_cfg.to_dict(),
    )


def calibrate_sigma(target_low: float = 0.002, target_high: float = 0.005,
                    trials: int = 10_000, seed: int = 0,
                    leakage: LeakageParams = None,
                    attack_cfg: AttackConfig = None,
                    lo: float = 0.01, hi: float = 0.30,
                    max_steps: int = 12) -> float:
    """Binary-search the noise level for a first-window error rate in band.

    The error rate grows monotonically with noise, so bisection converges;
    the returned sigma is the one frozen into the calibrated operating
    point.
    """

    def window0_error_rate(sigma):
        res = run_evaluation(trials, sigma, seed, leakage, attack_cfg)
        bad = sum(1 for f in res.failures if f["window"] == 0)
        return bad / trials

    for _ in range(max_steps):
        mid = (lo + hi) / 2
        rate = window0_error_rate(mid)
        if rate < target_low:
            lo = mid
        elif rate > target_high:
            hi = mid
        else:
            return mid
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# timing

@dataclass
class BenchResult:
    """Timing of one kernel over a fixed operand stream."""

    kernel: str
    calls: int
    elapsed: float
    per_call_ns: float
    checksum: int

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "calls": self.calls,
            "elapsed_s": self.elapsed,
            "per_call_ns": self.per_call_ns,
            "checksum": f"{self.checksum:032x}",
        }


def run_bench(kernel: str, calls: int, seed: int = 0, repetitions: int = 5,
              chunk: int = 1 << 13) -> BenchResult:
    """Time `calls` kernel evaluations; median wall time of `repetitions` passes.

    Operands are pre-generated outside the timed region and processed in
    cache-sized chunks. Every product is xor-folded into a checksum that is
    identical across kernels for the same seed.
    """
    if calls < 1:
        raise ValueError("need at least one call")
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 1 << 64, size=calls, dtype=np.uint64)
    b = rng.integers(0, 1 << 64, size=calls, dtype=np.uint64)
    masks = rng.integers(0, 1 << 64, size=calls, dtype=np.uint64) if kernel == "masked" else None

    if kernel == "masked":
        def run_chunk(sl):
            return masked_mul_batch(a[sl], b[sl], masks[sl])
    elif kernel in BATCH_KERNELS:
        fn = BATCH_KERNELS[kernel]

        def run_chunk(sl):
            return fn(a[sl], b[sl])
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    times = []
    checksum_lo = checksum_hi = np.uint64(0)
    for rep in range(repetitions):
        cs_lo = cs_hi = np.uint64(0)
        t0 = time.perf_counter()
        for start in range(0, calls, chunk):
            p = run_chunk(slice(start, min(start + chunk, calls)))
            cs_lo ^= np.bitwise_xor.reduce(p.lo)
            cs_hi ^= np.bitwise_xor.reduce(p.hi)
        times.append(time.perf_counter() - t0)
        checksum_lo, checksum_hi = cs_lo, cs_hi

    elapsed = float(np.median(times))
    return BenchResult(
        kernel=kernel,
        calls=calls,
        elapsed=elapsed,
        per_call_ns=elapsed / calls * 1e9,
        checksum=(int(checksum_hi) << 64) | int(checksum_lo),
    )


# ---------------------------------------------------------------------------
# export

def trace_peak_indices(trace: Trace, cfg: AttackConfig = None) -> np.ndarray:
    """Absolute sample indices of all peaks the attack pipeline would use."""
    if cfg is None:
        cfg = calibrated_attack()
    layout = cfg.layout if cfg.layout is not None else TraceLayout.for_trace(trace)
    out = []
    for w in range(layout.windows):
        start = layout.scan_start + w * layout.window_len
        seg = trace.samples[start:start + layout.window_len]
        prominence = cfg.main_prominence if w == 0 else cfg.sub_prominence
        ps = find_peaks(seg, cfg.min_distance, prominence)
        out.extend(int(p) + start for p in ps.indices)
    return np.array(sorted(out), dtype=np.intp)


def export_plot_data(obj, path, cfg: AttackConfig = None, render: bool = True) -> None:
    """Write a trace or confusion matrix as CSV, with a figure alongside.

    Traces become (index, value, peak) rows, the peak column flagging
    detected peak positions; matrices become row-normalized 16x16 CSV.
    The figure lands next to the CSV with a .png suffix.
    """
    path = str(path)
    png = path[: path.rfind(".")] + ".png" if "." in path else path + ".png"
    if isinstance(obj, Trace):
        peaks = trace_peak_indices(obj, cfg)
        flags = np.zeros(len(obj.samples), dtype=int)
        flags[peaks] = 1
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "value", "peak"])
            for i, (v, fl) in enumerate(zip(obj.samples, flags)):
                w.writerow([i, f"{float(v):.8f}", int(fl)])
        if render:
            from .plots import plot_trace

            plot_trace(obj.samples, peaks, png, title="simulated power trace")
    elif isinstance(obj, ConfusionMatrix):
        obj.write_csv(path)
        if render:
            from .plots import plot_confusion

            plot_confusion(obj.normalized, png, title="actual vs recovered")
    else:
        raise TypeError("can export Trace or ConfusionMatrix only")
