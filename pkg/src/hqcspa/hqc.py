"""Minimal model of the decryption-side ring arithmetic that the attack observes.

Covers only what the trace analysis needs: sparse secret polynomials over
the cyclic ring mod x^n - 1, and the decryption step that multiplies the
ciphertext component u by the secret y and xors in v. Everything after that
product (decoding, shared-secret derivation) is out of scope.

Default parameters follow the HQC-128 parameter set (n = 17669, w = 75);
both are plain constructor arguments and can be set freely.
"""

import json
from dataclasses import dataclass

import numpy as np

from .gf2x import GF2Poly, KernelLike, cyclic_reduce, karatsuba_mul

HQC128_N = 17669
HQC128_W = 75


@dataclass(frozen=True)
class RingParams:
    """Ring dimension n (modulus x^n - 1) and secret Hamming weight w."""

    n: int = HQC128_N
    w: int = HQC128_W

    def __post_init__(self):
        if not 0 < self.w < self.n:
            raise ValueError("need 0 < w < n")

    @property
    def nlimbs(self) -> int:
        return (self.n + 63) // 64


@dataclass
class SecretKey:
    """Sparse secret polynomial y plus its sorted support."""

    y: GF2Poly
    support: list

    def __post_init__(self):
        if self.y.support() != sorted(self.support):
            raise ValueError("support does not match polynomial")

    @property
    def n(self) -> int:
        return self.y.nbits

    @property
    def w(self) -> int:
        return len(self.support)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "w": self.w, "support": list(self.support)})

    @classmethod
    def from_json(cls, text: str) -> "SecretKey":
        obj = json.loads(text)
        support = sorted(int(p) for p in obj["support"])
        if len(support) != obj["w"]:
            raise ValueError("weight field disagrees with support")
        return cls(GF2Poly.from_support(support, int(obj["n"])), support)


@dataclass
class Ciphertext:
    """Ciphertext pair (u, v), both reduced to ring length."""

    u: GF2Poly
    v: GF2Poly

    def __post_init__(self):
        if self.u.nbits != self.v.nbits:
            raise ValueError("u and v must share the ring dimension")

    @property
    def n(self) -> int:
        return self.u.nbits


def sample_secret(params: RingParams, seed) -> SecretKey:
    """Draw a secret with exactly w distinct set positions, uniformly.

    Deterministic for a given seed; positions come from numpy's
    permutation-free choice without replacement.
    """
    rng = np.random.default_rng(seed)
    support = sorted(int(p) for p in rng.choice(params.n, size=params.w, replace=False))
    return SecretKey(GF2Poly.from_support(support, params.n), support)


def random_ciphertext(n: int, seed) -> Ciphertext:
    """Uniform (u, v) pair for experiments; not a real encryption."""
    rng = np.random.default_rng(seed)
    return Ciphertext(GF2Poly.random(n, rng), GF2Poly.random(n, rng))


def decrypt_mul(ct: Ciphertext, sk: SecretKey, kernel: KernelLike = "win") -> GF2Poly:
    """The observed decryption step: v xor (u * y mod x^n - 1).

    Over GF(2) subtraction is xor, so this equals v - u*y. The result is
    what would feed the decoder; decoding itself is not modeled.
    """
    if ct.n != sk.n:
        raise ValueError("ciphertext and key dimensions differ")
    prod = karatsuba_mul(ct.u, sk.y, kernel)
    return ct.v ^ cyclic_reduce(prod, ct.n)
