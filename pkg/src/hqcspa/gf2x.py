"""Carry-less 64-bit multiplication kernels and polynomial arithmetic over GF(2)[x].

A 64-bit limb is a plain Python int in [0, 2**64) whose bit i is the
coefficient of x^i. Products of two limbs are 128 bits wide and are returned
as a WideProduct(lo, hi) pair, lo holding x^0..x^63 and hi x^64..x^127.

Four base kernels are provided:

  base_mul            window method with a 16-entry table of multiples of b;
                      every table entry is touched on every lookup so the
                      memory access pattern does not depend on the scanned
                      operand (the cache-timing countermeasure).
  base_mul2           bit-serial shift/xor with arithmetic masking, no table.
  base_mul3           window method with direct table indexing (no scan).
  masked_mul          Boolean masking wrapper around any of the above.

schoolbook_oracle computes the same product by the textbook double loop over
individual bits and is deliberately structured unlike all three kernels, so
it can serve as an independent correctness reference.

Each kernel also has a *_batch variant operating element-wise on numpy
uint64 arrays. The batch forms follow the same algorithm steps and exist for
large sweeps and timing runs; they are cross-checked against the scalar
forms in the test suite.

Longer polynomials (GF2Poly) are little-endian limb vectors; multiplication
is recursive Karatsuba down to single limbs, and cyclic_reduce folds a
product back into the ring mod x^n - 1.
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

M64 = (1 << 64) - 1
LOW60 = (1 << 60) - 1


class WideProduct(NamedTuple):
    """128-bit carry-less product split into two 64-bit halves."""

    lo: int
    hi: int


def make_lookup_table(b: int) -> list:
    """Build the 16-entry table of small multiples of b (top 4 bits cleared).

    entries[k] is the carry-less product of k and (b & LOW60); masking the
    four highest bits of b keeps every entry inside one limb. Built with the
    same shift/xor chain the window kernel uses, one table per call.
    """
    u = [0] * 16
    u[1] = b & LOW60
    u[2] = (u[1] << 1) & M64
    u[3] = u[2] ^ u[1]
    u[4] = (u[2] << 1) & M64
    u[5] = u[4] ^ u[1]
    u[6] = (u[3] << 1) & M64
    u[7] = u[6] ^ u[1]
    u[8] = (u[4] << 1) & M64
    u[9] = u[8] ^ u[1]
    u[10] = (u[5] << 1) & M64
    u[11] = u[10] ^ u[1]
    u[12] = (u[6] << 1) & M64
    u[13] = u[12] ^ u[1]
    u[14] = (u[7] << 1) & M64
    u[15] = u[14] ^ u[1]
    return u


def _scan_select(table, nib):
    """Constant-pattern table scan: touch all 16 entries, keep entry `nib`.

    The selection mask is derived arithmetically from (nib - j): it is
    all-ones exactly when j == nib, so the sequence of loads and xors is
    identical whatever the nibble value is.
    """
    acc = 0
    for j in range(16):
        d = (nib - j) & M64
        nonzero = ((d | ((-d) & M64)) >> 63) & 1
        acc ^= table[j] & ((-(1 - nonzero)) & M64)
    return acc


def _top_bits_fixup(a: int, b: int, lo: int, hi: int):
    """Fold the four masked-out top bits of b back into the product."""
    for j in range(4):
        mask = (-((b >> (60 + j)) & 1)) & M64
        lo ^= (a << (60 + j)) & mask & M64
        hi ^= (a >> (4 - j)) & mask
    return lo, hi


def base_mul(a: int, b: int) -> WideProduct:
    """Window-method product of two limbs with the full-table-scan lookup.

    Step 1 builds the 16-entry table of multiples of b with the top four
    bits of b masked off. Step 2 consumes a in sixteen 4-bit windows; each
    window scans the whole table and keeps only the selected entry. Step 3
    multiplies the four masked bits of b by a and folds them in.
    """
    table = make_lookup_table(b)

    nib = a & 15
    lo = _scan_select(table, nib)
    hi = 0

    for i in range(4, 64, 4):
        g = _scan_select(table, (a >> i) & 15)
        lo ^= (g << i) & M64
        hi ^= g >> (64 - i)

    lo, hi = _top_bits_fixup(a, b, lo, hi)
    return WideProduct(lo, hi)


def base_mul2(a: int, b: int) -> WideProduct:
    """Bit-serial product: 64 masked shift/xor steps, no lookup table.

    The mask -(bit of a) selects or suppresses each shifted copy of b
    without branching. Iteration 0 is peeled off because shifting by 64
    is not a valid limb operation.
    """
    mask = (-(a & 1)) & M64
    lo = b & mask
    hi = 0
    for i in range(1, 64):
        mask = (-((a >> i) & 1)) & M64
        lo ^= (b << i) & mask & M64
        hi ^= (b >> (64 - i)) & mask
    return WideProduct(lo, hi)


def base_mul3(a: int, b: int) -> WideProduct:
    """Window-method product with direct table indexing (no scan).

    Steps 1 and 3 match base_mul; step 2 reads exactly one table entry per
    window, so the access pattern depends on the scanned operand.
    """
    table = make_lookup_table(b)

    lo = table[a & 15]
    hi = 0
    for i in range(4, 64, 4):
        g = table[(a >> i) & 15]
        lo ^= (g << i) & M64
        hi ^= g >> (64 - i)

    lo, hi = _top_bits_fixup(a, b, lo, hi)
    return WideProduct(lo, hi)


def masked_mul(a: int, b: int, mask: int, inner=base_mul) -> WideProduct:
    """Boolean-masked product: inner(a ^ mask, b) xor inner(mask, b).

    Multiplication distributes over xor, so the two share products combine
    to a*b while the inner kernel never sees a itself. Both product halves
    come out unmasked.
    """
    inner = resolve_kernel(inner)
    c = inner(a ^ mask, b)
    unmask = inner(mask, b)
    return WideProduct(c.lo ^ unmask.lo, c.hi ^ unmask.hi)


def schoolbook_oracle(a: int, b: int) -> WideProduct:
    """Bit-by-bit reference product, structured unlike the kernels.

    Tests bit i of a against bit j of b and xors into result bit i+j.
    Slow on purpose; used only as an independent oracle.
    """
    lo = 0
    hi = 0
    for i in range(64):
        if not (a >> i) & 1:
            continue
        for j in range(64):
            if not (b >> j) & 1:
                continue
            k = i + j
            if k < 64:
                lo ^= 1 << k
            else:
                hi ^= 1 << (k - 64)
    return WideProduct(lo, hi)


# ---------------------------------------------------------------------------
# batch forms (numpy uint64, element-wise)

_U0 = np.uint64(0)
_U1 = np.uint64(1)
_U63 = np.uint64(63)


def _as_u64(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.uint64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


def _make_lookup_table_batch(b: np.ndarray) -> list:
    u = [None] * 16
    u[0] = np.zeros_like(b)
    u[1] = b & np.uint64(LOW60)
    for k in range(2, 16):
        u[k] = (u[k >> 1] << _U1) ^ u[1] if k & 1 else u[k >> 1] << _U1
    return u


def _scan_select_batch(table, nib):
    acc = np.zeros_like(nib)
    for j in range(16):
        d = nib - np.uint64(j)
        # (d | -d) >> 63 is 1 unless d == 0, so this is all-ones iff j == nib
        sel = ((d | (_U0 - d)) >> _U63) - _U1
        acc ^= table[j] & sel
    return acc


def _top_bits_fixup_batch(a, b, lo, hi):
    for j in range(4):
        mask = _U0 - ((b >> np.uint64(60 + j)) & _U1)
        lo ^= (a << np.uint64(60 + j)) & mask
        hi ^= (a >> np.uint64(4 - j)) & mask
    return lo, hi


def base_mul_batch(a, b) -> WideProduct:
    """Element-wise base_mul over uint64 arrays (same three steps)."""
    a = _as_u64(a)
    b = _as_u64(b)
    table = _make_lookup_table_batch(b)

    lo = _scan_select_batch(table, a & np.uint64(15))
    hi = np.zeros_like(a)
    for i in range(4, 64, 4):
        g = _scan_select_batch(table, (a >> np.uint64(i)) & np.uint64(15))
        lo = lo ^ (g << np.uint64(i))
        hi = hi ^ (g >> np.uint64(64 - i))
    return WideProduct(*_top_bits_fixup_batch(a, b, lo, hi))


def base_mul2_batch(a, b) -> WideProduct:
    """Element-wise base_mul2 over uint64 arrays."""
    a = _as_u64(a)
    b = _as_u64(b)
    mask = _U0 - (a & _U1)
    lo = b & mask
    hi = np.zeros_like(a)
    for i in range(1, 64):
        mask = _U0 - ((a >> np.uint64(i)) & _U1)
        lo = lo ^ ((b << np.uint64(i)) & mask)
        hi = hi ^ ((b >> np.uint64(64 - i)) & mask)
    return WideProduct(lo, hi)


_COLS_CACHE = {}


def _flat_cols(n: int) -> np.ndarray:
    cols = _COLS_CACHE.get(n)
    if cols is None:
        cols = np.arange(n, dtype=np.uint64)
        _COLS_CACHE[n] = cols
    return cols


def base_mul3_batch(a, b) -> WideProduct:
    """Element-wise base_mul3 over uint64 arrays.

    The table rows live in one flat block so each window costs a single
    gather; entry k of element c sits at k*n + c.
    """
    a = _as_u64(a)
    b = _as_u64(b)
    n = a.shape[0]
    tab = np.empty((16, n), dtype=np.uint64)
    tab[0] = 0
    np.bitwise_and(b, np.uint64(LOW60), out=tab[1])
    for k in range(2, 16, 2):
        np.left_shift(tab[k >> 1], _U1, out=tab[k])
        np.bitwise_xor(tab[k], tab[1], out=tab[k + 1])
    flat = tab.reshape(-1)
    cols = _flat_cols(n)
    un = np.uint64(n)
    nib_mask = np.uint64(15)

    idx = np.empty(n, dtype=np.uint64)
    np.bitwise_and(a, nib_mask, out=idx)
    idx *= un
    idx += cols
    lo = flat[idx]
    hi = np.zeros_like(a)
    scratch = np.empty_like(a)
    for w in range(1, 16):
        i = np.uint64(4 * w)
        np.right_shift(a, i, out=idx)
        idx &= nib_mask
        idx *= un
        idx += cols
        g = flat[idx]
        lo ^= np.left_shift(g, i, out=scratch)
        hi ^= np.right_shift(g, np.uint64(64) - i, out=scratch)
    return WideProduct(*_top_bits_fixup_batch(a, b, lo, hi))


def masked_mul_batch(a, b, mask, inner=base_mul_batch) -> WideProduct:
    """Element-wise Boolean-masked product."""
    a = _as_u64(a)
    b = _as_u64(b)
    mask = _as_u64(mask)
    c = inner(a ^ mask, b)
    unmask = inner(mask, b)
    return WideProduct(c.lo ^ unmask.lo, c.hi ^ unmask.hi)


def schoolbook_oracle_batch(a, b) -> WideProduct:
    """Element-wise bit-double-loop oracle over uint64 arrays."""
    a = _as_u64(a)
    b = _as_u64(b)
    lo = np.zeros_like(a)
    hi = np.zeros_like(a)
    for i in range(64):
        ai = (a >> np.uint64(i)) & _U1
        for j in range(64):
            bit = ai & ((b >> np.uint64(j)) & _U1)
            k = i + j
            if k < 64:
                lo = lo ^ (bit << np.uint64(k))
            else:
                hi = hi ^ (bit << np.uint64(k - 64))
    return WideProduct(lo, hi)


# ---------------------------------------------------------------------------
# kernel selection

KERNELS = {
    "win": base_mul,
    "serial": base_mul2,
    "direct": base_mul3,
}

BATCH_KERNELS = {
    "win": base_mul_batch,
    "serial": base_mul2_batch,
    "direct": base_mul3_batch,
}

KernelLike = Union[str, Callable[[int, int], WideProduct]]


def resolve_kernel(kernel: KernelLike, rng=None) -> Callable[[int, int], WideProduct]:
    """Map a kernel name or callable to a (a, b) -> WideProduct callable.

    "masked" wraps the window kernel with a fresh random mask per call,
    drawn from `rng` (a seeded numpy Generator; required for "masked").
    """
    if callable(kernel):
        return kernel
    if kernel in KERNELS:
        return KERNELS[kernel]
    if kernel == "masked":
        if rng is None:
            rng = np.random.default_rng()

        def _masked(a, b):
            m = int(rng.integers(0, 1 << 64, dtype=np.uint64))
            return masked_mul(a, b, m, base_mul)

        return _masked
    raise ValueError(f"unknown kernel {kernel!r}")


# ---------------------------------------------------------------------------
# limb-vector polynomials

@dataclass
class GF2Poly:
    """Dense GF(2)[x] polynomial as little-endian 64-bit limbs.

    limbs[0] holds coefficients x^0..x^63. nbits is the declared length;
    bits at positions >= nbits are kept at zero.
    """

    limbs: list
    nbits: int

    def __post_init__(self):
        expect = (self.nbits + 63) // 64
        if len(self.limbs) != expect:
            raise ValueError(f"need {expect} limbs for {self.nbits} bits, got {len(self.limbs)}")
        top = self.nbits % 64
        if top and (self.limbs[-1] >> top):
            raise ValueError("set bits beyond declared length")

    @classmethod
    def zero(cls, nbits: int) -> "GF2Poly":
        return cls([0] * ((nbits + 63) // 64), nbits)

    @classmethod
    def from_int(cls, value: int, nbits: int) -> "GF2Poly":
        if value >> nbits:
            raise ValueError("value does not fit in nbits")
        nl = (nbits + 63) // 64
        return cls([(value >> (64 * i)) & M64 for i in range(nl)], nbits)

    @classmethod
    def from_support(cls, positions: Sequence[int], nbits: int) -> "GF2Poly":
        v = 0
        for p in positions:
            if not 0 <= p < nbits:
                raise ValueError(f"position {p} outside [0, {nbits})")
            v |= 1 << p
        return cls.from_int(v, nbits)

    @classmethod
    def random(cls, nbits: int, rng) -> "GF2Poly":
        nl = (nbits + 63) // 64
        limbs = [int(x) for x in rng.integers(0, 1 << 64, size=nl, dtype=np.uint64)]
        top = nbits % 64
        if top:
            limbs[-1] &= (1 << top) - 1
        return cls(limbs, nbits)

    def to_int(self) -> int:
        v = 0
        for i, limb in enumerate(self.limbs):
            v |= limb << (64 * i)
        return v

    def support(self) -> list:
        out = []
        for i, limb in enumerate(self.limbs):
            base = 64 * i
            while limb:
                low = limb & -limb
                out.append(base + low.bit_length() - 1)
                limb ^= low
        return out

    def weight(self) -> int:
        return sum(limb.bit_count() for limb in self.limbs)

    def __xor__(self, other: "GF2Poly") -> "GF2Poly":
        if self.nbits != other.nbits:
            raise ValueError("length mismatch")
        return GF2Poly([x ^ y for x, y in zip(self.limbs, other.limbs)], self.nbits)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GF2Poly)
            and self.nbits == other.nbits
            and self.limbs == other.limbs
        )


def _split(limbs, m):
    """Low m limbs and high part zero-padded to m limbs."""
    lo = list(limbs[:m])
    hi = list(limbs[m:]) + [0] * (2 * m - len(limbs))
    return lo, hi


def _kara(al, bl, kern):
    """Recursive Karatsuba on equal-length limb lists; returns 2*len limbs."""
    n = len(al)
    if n == 1:
        p = kern(al[0], bl[0])
        return [p.lo, p.hi]

    m = (n + 1) // 2
    a0, a1 = _split(al, m)
    b0, b1 = _split(bl, m)

    p0 = _kara(a0, b0, kern)
    p1 = _kara(a1, b1, kern)
    pm = _kara([x ^ y for x, y in zip(a0, a1)], [x ^ y for x, y in zip(b0, b1)], kern)

    out = [0] * (2 * n)
    for i in range(2 * m):
        out[i] ^= p0[i]
        out[m + i] ^= pm[i] ^ p0[i] ^ p1[i]
    for i in range(2 * (n - m)):
        out[2 * m + i] ^= p1[i]
    # the padded top limbs of p1 carry no data when the split was uneven
    assert all(x == 0 for x in p1[2 * (n - m):])
    return out


def karatsuba_mul(a: GF2Poly, b: GF2Poly, kernel: KernelLike = "win") -> GF2Poly:
    """Full product of two equal-length polynomials, 2*nbits long.

    Operands split at ceil(len/2) limbs per level, the shorter high half
    zero-padded, until single limbs reach the selected base kernel.
    """
    if a.nbits == 0 or b.nbits == 0:
        raise ValueError("zero-length operand")
    if a.nbits != b.nbits:
        raise ValueError("operands must be padded to equal length first")
    kern = resolve_kernel(kernel)
    out = _kara(a.limbs, b.limbs, kern)
    nbits = 2 * a.nbits
    return GF2Poly(out[: (nbits + 63) // 64], nbits)


@dataclass
class BaseCall:
    """One leaf multiplication of the Karatsuba recursion.

    a/b are the leaf operand limbs; a_index/b_index give the original limb
    index when the operand is a raw (unsummed) limb of the input, or None
    when the leaf sits below a middle (a0+a1)(b0+b1) branch or is a padding
    limb introduced by an uneven split.
    """

    index: int
    a: int
    b: int
    a_index: Optional[int]
    b_index: Optional[int]


def karatsuba_base_calls(a: GF2Poly, b: GF2Poly) -> list:
    """Enumerate the base-kernel calls karatsuba_mul makes, in call order.

    Every original limb of each operand shows up in exactly one leaf as a
    raw value; those leaves carry its index. Leaves under middle branches
    multiply xor-sums of limbs and are marked None.
    """
    if a.nbits == 0 or b.nbits == 0:
        raise ValueError("zero-length operand")
    if a.nbits != b.nbits:
        raise ValueError("operands must be padded to equal length first")

    calls = []

    def rec(al, bl, start, areal, breal):
        # start/areal/breal track where this subtree's limbs came from:
        # raw subtrees cover original limbs [start, start+areal) plus padding.
        n = len(al)
        if n == 1:
            idx = len(calls)
            a_idx = start if (start is not None and areal >= 1) else None
            b_idx = start if (start is not None and breal >= 1) else None
            calls.append(BaseCall(idx, al[0], bl[0], a_idx, b_idx))
            return
        m = (n + 1) // 2
        a0, a1 = _split(al, m)
        b0, b1 = _split(bl, m)
        if start is None:
            rec(a0, b0, None, 0, 0)
            rec(a1, b1, None, 0, 0)
        else:
            rec(a0, b0, start, min(m, areal), min(m, breal))
            rec(a1, b1, start + m, max(0, areal - m), max(0, breal - m))
        rec([x ^ y for x, y in zip(a0, a1)], [x ^ y for x, y in zip(b0, b1)], None, 0, 0)

    rec(a.limbs, b.limbs, 0, len(a.limbs), len(b.limbs))
    return calls


def cyclic_reduce(p: GF2Poly, n: int) -> GF2Poly:
    """Reduce p mod x^n - 1: fold every bit at k >= n onto k mod n."""
    if n <= 0:
        raise ValueError("modulus length must be positive")
    if p.nbits < n:
        raise ValueError("polynomial shorter than the modulus")
    v = p.to_int()
    low = (1 << n) - 1
    r = 0
    while v:
        r ^= v & low
        v >>= n
    return GF2Poly.from_int(r, n)
