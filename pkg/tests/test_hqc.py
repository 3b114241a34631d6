"""Ring model tests: sampling, serialization, and the decryption product."""

import numpy as np
import pytest

from hqcspa.gf2x import GF2Poly
from hqcspa.hqc import (
    Ciphertext,
    RingParams,
    SecretKey,
    decrypt_mul,
    random_ciphertext,
    sample_secret,
)


def cyclic_convolution_oracle(u: GF2Poly, y: GF2Poly, n: int) -> GF2Poly:
    """Per-bit convolution mod x^n - 1, independent of the limb pipeline."""
    out = 0
    for i in u.support():
        for j in y.support():
            out ^= 1 << ((i + j) % n)
    return GF2Poly.from_int(out, n)


def test_ring_params_validation():
    with pytest.raises(ValueError):
        RingParams(n=10, w=10)
    with pytest.raises(ValueError):
        RingParams(n=10, w=0)
    assert RingParams().nlimbs == 277


def test_sample_secret_weight_one():
    sk = sample_secret(RingParams(n=64, w=1), seed=0)
    assert sk.y.weight() == 1
    assert len(sk.support) == 1


def test_sample_secret_deterministic():
    params = RingParams(n=1024, w=66)
    assert sample_secret(params, seed=42) == sample_secret(params, seed=42)
    assert sample_secret(params, seed=42) != sample_secret(params, seed=43)


def test_sample_secret_rejects_bad_weight():
    with pytest.raises(ValueError):
        sample_secret(RingParams(n=64, w=64), seed=0)


def test_sample_secret_per_bit_frequency():
    # 1000 keys at n=1024, w=66: per-bit set counts should look binomial
    # around 1000*w/n. A few bits straying past 3 sigma is expected; none
    # should stray past 5.
    params = RingParams(n=1024, w=66)
    trials = 1000
    counts = np.zeros(params.n)
    for seed in range(trials):
        sk = sample_secret(params, seed=seed)
        counts[sk.support] += 1
    p = params.w / params.n
    sigma = np.sqrt(trials * p * (1 - p))
    dev = np.abs(counts - trials * p)
    assert np.mean(dev <= 3 * sigma) > 0.99
    assert dev.max() <= 5 * sigma


def test_secret_key_json_round_trip():
    sk = sample_secret(RingParams(n=300, w=9), seed=1)
    back = SecretKey.from_json(sk.to_json())
    assert back == sk
    with pytest.raises(ValueError):
        SecretKey.from_json('{"n": 300, "w": 2, "support": [5]}')


def test_secret_key_support_checked():
    with pytest.raises(ValueError):
        SecretKey(GF2Poly.from_support([1, 2], 64), [1, 3])


def test_ciphertext_dimension_check():
    with pytest.raises(ValueError):
        Ciphertext(GF2Poly.zero(64), GF2Poly.zero(128))


def test_decrypt_mul_zero_u_returns_v():
    n = 256
    rng = np.random.default_rng(0)
    v = GF2Poly.random(n, rng)
    ct = Ciphertext(GF2Poly.zero(n), v)
    sk = sample_secret(RingParams(n=n, w=5), seed=0)
    assert decrypt_mul(ct, sk) == v


def test_decrypt_mul_identity_multiplier():
    n = 256
    rng = np.random.default_rng(1)
    u = GF2Poly.random(n, rng)
    ct = Ciphertext(u, GF2Poly.zero(n))
    sk = SecretKey(GF2Poly.from_support([0], n), [0])
    assert decrypt_mul(ct, sk) == u


def test_decrypt_mul_matches_convolution_oracle():
    n = 256
    ct = random_ciphertext(n, seed=7)
    sk = sample_secret(RingParams(n=n, w=11), seed=7)
    expect = ct.v ^ cyclic_convolution_oracle(ct.u, sk.y, n)
    assert decrypt_mul(ct, sk) == expect


def test_decrypt_mul_kernel_independent():
    n = 192
    ct = random_ciphertext(n, seed=9)
    sk = sample_secret(RingParams(n=n, w=7), seed=9)
    ref = decrypt_mul(ct, sk, "win")
    assert decrypt_mul(ct, sk, "serial") == ref
    assert decrypt_mul(ct, sk, "direct") == ref


def test_decrypt_mul_linear_in_v():
    n = 192
    ct = random_ciphertext(n, seed=10)
    sk = sample_secret(RingParams(n=n, w=7), seed=10)
    rng = np.random.default_rng(11)
    dv = GF2Poly.random(n, rng)
    shifted = Ciphertext(ct.u, ct.v ^ dv)
    assert decrypt_mul(shifted, sk) == decrypt_mul(ct, sk) ^ dv


def test_decrypt_mul_dimension_mismatch():
    ct = random_ciphertext(128, seed=0)
    sk = sample_secret(RingParams(n=192, w=5), seed=0)
    with pytest.raises(ValueError):
        decrypt_mul(ct, sk)
