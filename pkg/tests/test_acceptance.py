"""Acceptance suite: one test per release criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS/FAIL line
per criterion. Criteria 4 and 5 share one 10^4-trial evaluation run.
"""

import time

import numpy as np
import pytest

from hqcspa.attack import recover_key, recover_limb
from hqcspa.evaluate import calibrated_attack, calibrated_leakage, run_bench, run_evaluation
from hqcspa.gf2x import (
    GF2Poly,
    base_mul_batch,
    base_mul2_batch,
    base_mul3_batch,
    karatsuba_mul,
    masked_mul_batch,
    schoolbook_oracle_batch,
)
from hqcspa.hqc import RingParams, random_ciphertext, sample_secret
from hqcspa.leakage import LeakageParams, derive_seed, key_recovery_traces, simulate_trace

EVALUATION_SEED = 20260809
BATCH_KERNELS = [
    ("base_mul", base_mul_batch),
    ("base_mul2", base_mul2_batch),
    ("base_mul3", base_mul3_batch),
]


def announce(number, name, detail):
    print(f"ACCEPTANCE {number} ({name}): PASS  [{detail}]")


def fail(number, name, detail):
    print(f"ACCEPTANCE {number} ({name}): FAIL  [{detail}]")
    pytest.fail(f"criterion {number} ({name}): {detail}")


def equal_products(p, q):
    return np.array_equal(p.lo, q.lo) and np.array_equal(p.hi, q.hi)


def multi_limb_schoolbook(a: GF2Poly, b: GF2Poly) -> GF2Poly:
    """Limb-wise schoolbook product on the batch bit-double-loop oracle."""
    nl = len(a.limbs)
    ai = np.repeat(np.array(a.limbs, dtype=np.uint64), nl)
    bi = np.tile(np.array(b.limbs, dtype=np.uint64), nl)
    p = schoolbook_oracle_batch(ai, bi)
    out = np.zeros(2 * nl + 1, dtype=np.uint64)
    pos = np.repeat(np.arange(nl), nl) + np.tile(np.arange(nl), nl)
    np.bitwise_xor.at(out, pos, p.lo)
    np.bitwise_xor.at(out, pos + 1, p.hi)
    nbits = 2 * a.nbits
    return GF2Poly([int(x) for x in out[: (nbits + 63) // 64]], nbits)


@pytest.fixture(scope="module")
def calibrated_run():
    params = calibrated_leakage()
    return run_evaluation(
        trials=10_000,
        noise_sigma=params.noise_sigma,
        seed=EVALUATION_SEED,
        leakage=params,
        attack_cfg=calibrated_attack(),
    )


def test_criterion_1_kernel_correctness():
    t0 = time.perf_counter()
    a8 = np.repeat(np.arange(256, dtype=np.uint64), 256)
    b8 = np.tile(np.arange(256, dtype=np.uint64), 256)
    rng = np.random.default_rng(1)
    a64 = rng.integers(0, 1 << 64, size=100_000, dtype=np.uint64)
    b64 = rng.integers(0, 1 << 64, size=100_000, dtype=np.uint64)
    for a, b in ((a8, b8), (a64, b64)):
        ref = schoolbook_oracle_batch(a, b)
        for name, kern in BATCH_KERNELS:
            if not equal_products(kern(a, b), ref):
                fail(1, "kernel correctness", f"{name} disagrees with the oracle")
        masks = rng.integers(0, 1 << 64, size=len(a), dtype=np.uint64)
        if not equal_products(masked_mul_batch(a, b, masks), ref):
            fail(1, "kernel correctness", "masked_mul disagrees with the oracle")
    announce(1, "kernel correctness",
             f"exhaustive 8-bit sweep + 100000 random pairs, bit-exact, "
             f"{time.perf_counter() - t0:.1f}s")


def test_criterion_2_karatsuba_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    for nlimb in (1, 2, 3, 4, 17, 277):
        a = GF2Poly.random(64 * nlimb, rng)
        b = GF2Poly.random(64 * nlimb, rng)
        kernels = ("win", "serial", "direct") if nlimb <= 17 else ("win",)
        want = multi_limb_schoolbook(a, b)
        for kernel in kernels:
            if karatsuba_mul(a, b, kernel) != want:
                fail(2, "karatsuba correctness",
                     f"{nlimb}-limb product differs from schoolbook ({kernel})")
    announce(2, "karatsuba correctness",
             f"1-4, 17, 277 limbs, bit-exact, {time.perf_counter() - t0:.1f}s")


def test_criterion_3_zero_noise_completeness():
    t0 = time.perf_counter()
    params = LeakageParams(noise_sigma=0.0)
    cfg = calibrated_attack()
    trials = 10_000
    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(3, trial))
        a = int(rng.integers(0, 1 << 64, dtype=np.uint64))
        b = int(rng.integers(0, 1 << 64, dtype=np.uint64))
        rep = recover_limb(simulate_trace(a, b, params, seed=trial), cfg)
        if not rep.limb_success:
            fail(3, "zero-noise completeness",
                 f"trial {trial}: a={a:#018x} recovered {rep.recovered_limb:#018x}")
    announce(3, "zero-noise completeness",
             f"{trials} random limbs at sigma=0, 100% limb success, "
             f"{time.perf_counter() - t0:.0f}s")


def test_criterion_4_calibrated_success_rate(calibrated_run):
    rate = calibrated_run.success_rate
    if not (0.99 <= rate < 1.0):
        fail(4, "calibrated success rate",
             f"success rate {rate:.4f} outside [0.99, 1.0)")
    announce(4, "calibrated success rate",
             f"10000 trials at sigma={calibrated_run.noise_sigma}: "
             f"{rate:.2%} success")


def test_criterion_5_failure_localization(calibrated_run):
    res = calibrated_run
    if not res.failures_only_in_window(0):
        bad = sorted({f["window"] for f in res.failures} - {0})
        fail(5, "failure localization", f"failures seen in windows {bad}")
    rows = set(res.cm_first_window.off_diagonal_rows())
    if not rows <= {0, 15}:
        fail(5, "failure localization",
             f"first-window confusion rows {sorted(rows)} not within {{0, 15}}")
    if not res.cm_rest.is_diagonal():
        fail(5, "failure localization", "rest-window matrix is not diagonal")
    announce(5, "failure localization",
             f"{len(res.failures)} failures, all window 0, rows {sorted(rows)}, "
             f"rest diagonal")


def test_criterion_6_benchmark_ordering():
    t0 = time.perf_counter()
    calls = 10_000_000
    results = {name: run_bench(kern, calls=calls, seed=6)
               for name, kern in (("base_mul", "win"),
                                  ("base_mul2", "serial"),
                                  ("base_mul3", "direct"))}
    t = {k: r.per_call_ns for k, r in results.items()}
    if not (t["base_mul3"] < t["base_mul2"] < t["base_mul"]):
        fail(6, "benchmark ordering",
             f"per-call ns {t} violates base_mul3 < base_mul2 < base_mul")
    r2 = t["base_mul"] / t["base_mul2"]
    r3 = t["base_mul"] / t["base_mul3"]
    if not (r2 > 1.0 and r3 > 1.0):
        fail(6, "benchmark ordering", f"speedup ratios not above 1: {r2:.2f}, {r3:.2f}")
    checksums = {r.checksum for r in results.values()}
    if len(checksums) != 1:
        fail(6, "benchmark ordering", "kernel checksums differ on the same stream")
    announce(6, "benchmark ordering",
             f"10^7 calls each: base_mul={t['base_mul']:.0f}ns "
             f"base_mul2={t['base_mul2']:.0f}ns base_mul3={t['base_mul3']:.0f}ns; "
             f"base_mul2 {r2:.1f}x and base_mul3 {r3:.1f}x faster, "
             f"{time.perf_counter() - t0:.0f}s")


def test_criterion_7_full_key_recovery():
    t0 = time.perf_counter()
    params = RingParams(n=17669, w=75)
    sk = sample_secret(params, seed=7)
    ct = random_ciphertext(params.n, seed=8)
    traces, mapping = key_recovery_traces(sk, ct, LeakageParams(noise_sigma=0.0),
                                          master_seed=9)
    out = recover_key(traces, mapping, params, calibrated_attack())
    if len(mapping) != params.nlimbs:
        fail(7, "full key recovery",
             f"schedule exposed {len(mapping)} raw limbs, expected {params.nlimbs}")
    if not out.exact_match or out.recovered_key != sk.y:
        fail(7, "full key recovery",
             f"unrecovered={out.unrecovered} "
             f"wrong={[i for i, ok in (out.per_limb_success or {}).items() if not ok]}")
    announce(7, "full key recovery",
             f"n=17669 w=75 sigma=0: all {params.nlimbs} limbs exact, "
             f"{time.perf_counter() - t0:.0f}s")


def test_criterion_8_masking_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    a = rng.integers(0, 1 << 64, size=10_000, dtype=np.uint64)
    b = rng.integers(0, 1 << 64, size=10_000, dtype=np.uint64)
    m = rng.integers(0, 1 << 64, size=10_000, dtype=np.uint64)
    ref = schoolbook_oracle_batch(a, b)
    for name, kern in BATCH_KERNELS:
        if not equal_products(masked_mul_batch(a, b, m, kern), ref):
            fail(8, "masking round trip", f"masked {name} disagrees with the oracle")
    announce(8, "masking round trip",
             f"10000 random (a, b, mask) triples x 3 inner kernels, bit-exact, "
             f"{time.perf_counter() - t0:.1f}s")
