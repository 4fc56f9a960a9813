"""Binary-field arithmetic for privacy amplification.

Field elements are Python ints holding polynomial coefficients over
GF(2).  Multiplication is carry-less (schoolbook for small operands, a
numpy-assisted integer-multiplication embedding for large ones) followed
by reduction modulo the field polynomial.

Reduction polynomials come from three sources, in order of preference:

* a fixed table for the common degrees,
* a deterministic least-first search over trinomials then pentanomials
  for any degree up to ``SEARCH_LIMIT`` (cached, since the search is the
  expensive part),
* for larger degrees, the all-ones polynomial of the smallest eligible
  degree at or above the request.  Its irreducibility is certified by
  number theory alone (degree+1 prime with 2 a primitive root), so no
  search over an infeasibly large candidate space is needed; hash inputs
  are zero-padded up to the field width, which preserves the pairwise
  collision guarantee.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParamRangeError, ZeroSeedError

SEARCH_LIMIT = 4096

# degree -> least-first low-weight irreducible; fixed table for the common
# degrees, re-derivable by the same search that serves arbitrary degrees
_PUBLISHED_TABLE: dict[int, int] = {
    8: 0x11B,                                      # x^8+x^4+x^3+x+1
    12: 0x1009,                                    # x^12+x^3+1
    16: 0x1002B,                                   # x^16+x^5+x^3+x+1
    32: 0x10000008D,                               # x^32+x^7+x^3+x^2+1
    64: 0x1000000000000001B,                       # x^64+x^4+x^3+x+1
    128: 0x100000000000000000000000000000087,      # x^128+x^7+x^2+x+1
}

_SPREAD2 = None  # byte -> 16-bit squaring spread table


def _spread_table():
    global _SPREAD2
    if _SPREAD2 is None:
        tbl = np.zeros(256, dtype=">u2")
        for b in range(256):
            out = 0
            for i in range(8):
                if b & (1 << i):
                    out |= 1 << (2 * i)
            tbl[b] = out
        _SPREAD2 = tbl
    return _SPREAD2


def poly_square(a: int) -> int:
    """Square in GF(2)[x]: interleave a zero after every coefficient."""
    if a < (1 << 16):
        out = 0
        i = 0
        while a:
            if a & 1:
                out |= 1 << (2 * i)
            a >>= 1
            i += 1
        return out
    raw = a.to_bytes((a.bit_length() + 7) // 8, "big")
    spread = _spread_table()[np.frombuffer(raw, dtype=np.uint8)]
    return int.from_bytes(spread.tobytes(), "big")


def clmul(a: int, b: int) -> int:
    """Carry-less product of two coefficient ints."""
    if a == 0 or b == 0:
        return 0
    if a.bit_length() < b.bit_length():
        a, b = b, a
    if b.bit_length() <= 2048:
        acc = 0
        while b:
            low = b & -b
            acc ^= a << (low.bit_length() - 1)
            b ^= low
        return acc
    return _clmul_wide(a, b)


def _embed(a: int, bytes_per_coeff: int) -> int:
    """Place each coefficient of ``a`` in its own little-endian field."""
    bits = a.bit_length()
    nbytes = (bits + 7) // 8
    raw = a.to_bytes(nbytes, "little")
    arr = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return int.from_bytes(arr.astype(f"<u{bytes_per_coeff}").tobytes(), "little")


def _clmul_wide(a: int, b: int) -> int:
    """Carry-less multiply via one integer multiplication.

    With coefficients spaced ``s`` bits apart, column sums in the integer
    product stay below 2^s whenever the shorter operand has fewer than
    2^s coefficients, so the GF(2) product is the parity of each field.
    """
    width = 2 if min(a.bit_length(), b.bit_length()) < (1 << 16) else 4
    prod = _embed(a, width) * _embed(b, width)
    out_fields = a.bit_length() + b.bit_length() - 1
    raw = prod.to_bytes(width * out_fields, "little")
    fields = np.frombuffer(raw, dtype=f"<u{width}") & 1
    packed = np.packbits(fields.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


@dataclass(frozen=True)
class FieldSpec:
    """A concrete GF(2^degree) with its reduction polynomial."""

    degree: int
    poly: int
    kind: str  # "table" | "searched" | "all-ones"

    def __post_init__(self):
        if self.poly.bit_length() - 1 != self.degree:
            raise ParamRangeError("reduction polynomial degree mismatch")

    @property
    def low_exponents(self) -> tuple[int, ...]:
        low = self.poly ^ (1 << self.degree)
        exps = []
        while low:
            e = low.bit_length() - 1
            exps.append(e)
            low ^= 1 << e
        return tuple(exps)

    def reduce(self, z: int) -> int:
        m = self.degree
        if self.kind == "all-ones":
            e = m + 1
            mask = (1 << e) - 1
            while z.bit_length() > e:
                z = (z & mask) ^ (z >> e)
            if z >> m:
                z ^= (1 << (m + 1)) - 1
            return z
        exps = self.low_exponents
        if len(exps) <= 5 and (not exps or max(exps) <= m // 2):
            mask = (1 << m) - 1
            while z.bit_length() > m:
                hi = z >> m
                z &= mask
                for e in exps:
                    z ^= hi << e
            return z
        return poly_mod(z, self.poly)

    def mul(self, a: int, b: int) -> int:
        if not (0 <= a < 1 << self.degree and 0 <= b < 1 << self.degree):
            raise ParamRangeError("operands must be reduced field elements")
        return self.reduce(clmul(a, b))


def gf_mul(a: int, b: int, field: FieldSpec) -> int:
    """Product of two elements of GF(2^m)."""
    return field.mul(a, b)


def vector_mul_scalar(field: FieldSpec, scalar: int, elements: np.ndarray) -> np.ndarray:
    """Products ``scalar * e`` for an int64 array of field elements.

    Vectorized bit-serial multiply-and-reduce; restricted to degrees
    small enough that intermediate products fit in 63 bits.
    """
    m = field.degree
    if m > 24:
        raise ParamRangeError("vectorized products limited to degree <= 24")
    elems = np.asarray(elements, dtype=np.int64)
    acc = np.zeros_like(elems)
    s = scalar
    while s:
        low = s & -s
        acc ^= elems << (low.bit_length() - 1)
        s ^= low
    poly = field.poly
    for bit in range(2 * m - 2, m - 1, -1):
        hit = (acc >> bit) & 1
        acc ^= hit * (poly << (bit - m))
    return acc


def poly_mod(z: int, f: int) -> int:
    """Remainder of z modulo f in GF(2)[x] (generic shift-and-subtract)."""
    df = f.bit_length()
    while z.bit_length() >= df:
        z ^= f << (z.bit_length() - df)
    return z


def poly_gcd(a: int, b: int) -> int:
    while b:
        db = b.bit_length()
        while a.bit_length() >= db:
            a ^= b << (a.bit_length() - db)
        a, b = b, a
    return a


@lru_cache(maxsize=None)
def _prime_factors(n: int) -> tuple[int, ...]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return tuple(out)


def is_irreducible(f: int) -> bool:
    """Rabin irreducibility test over GF(2)."""
    m = f.bit_length() - 1
    if m <= 0:
        return False
    if m == 1:
        return True
    if not f & 1:
        return False
    # fast sparse reduction when the low part is shallow
    low = f ^ (1 << m)
    exps = []
    t = low
    while t:
        e = t.bit_length() - 1
        exps.append(e)
        t ^= 1 << e
    sparse = len(exps) <= 5 and (not exps or max(exps) <= m // 2)
    mask = (1 << m) - 1

    def red(z: int) -> int:
        if sparse:
            while z.bit_length() > m:
                hi = z >> m
                z &= mask
                for e in exps:
                    z ^= hi << e
            return z
        return poly_mod(z, f)

    need = {m // q for q in _prime_factors(m)}
    milestones = {}
    h = 2
    for i in range(1, m + 1):
        h = red(poly_square(h))
        if i in need:
            milestones[i] = h
    if h != 2:
        return False
    for g in milestones.values():
        if poly_gcd(f, g ^ 2) != 1:
            return False
    return True


def _search_sparse(m: int) -> int | None:
    """Least-first irreducible trinomial, then pentanomial, of degree m."""
    if m % 8 != 0:
        # trinomials x^m + x^a + 1; none exist when 8 | m
        for a in range(1, m):
            f = (1 << m) | (1 << a) | 1
            if is_irreducible(f):
                return f
    for c in range(3, m):
        for b in range(2, c):
            for a in range(1, b):
                f = (1 << m) | (1 << c) | (1 << b) | (1 << a) | 1
                if is_irreducible(f):
                    return f
    return None


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _two_is_primitive(p: int) -> bool:
    """True when 2 generates the multiplicative group mod prime p."""
    for q in _prime_factors(p - 1):
        if pow(2, (p - 1) // q, p) == 1:
            return False
    return True


def all_ones_degree_ok(m: int) -> bool:
    """All-ones polynomial of degree m is irreducible iff m+1 is prime
    with 2 primitive mod m+1."""
    return is_prime(m + 1) and _two_is_primitive(m + 1)


class PolyCache:
    """Disk-backed cache of found reduction polynomials."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.data: dict[str, dict] = {}
        if path and os.path.exists(path):
            with open(path) as fh:
                self.data = json.load(fh)

    def get(self, m: int):
        rec = self.data.get(str(m))
        if rec:
            return FieldSpec(rec["degree"], int(rec["poly"], 16), rec["kind"])
        return None

    def put(self, m: int, spec: FieldSpec) -> None:
        self.data[str(m)] = {
            "degree": spec.degree,
            "poly": format(spec.poly, "x"),
            "kind": spec.kind,
        }
        if self.path:
            tmp = self.path + ".tmp"
            with open(tmp, "w") as fh:
                json.dump(self.data, fh, indent=0, sort_keys=True)
            os.replace(tmp, self.path)


_DEFAULT_CACHE = PolyCache()


def field_for(m: int, cache: PolyCache | None = None) -> FieldSpec:
    """Field of degree >= m suitable for hashing m-bit inputs.

    Exact degree via the table or the deterministic sparse search when
    feasible; otherwise the smallest certified all-ones degree at or
    above m (inputs are zero-padded to the field width).
    """
    if m < 1:
        raise ParamRangeError("field degree must be positive")
    cache = cache or _DEFAULT_CACHE
    hit = cache.get(m)
    if hit:
        return hit
    if m in _PUBLISHED_TABLE:
        spec = FieldSpec(m, _PUBLISHED_TABLE[m], "table")
        cache.put(m, spec)
        return spec
    if m <= SEARCH_LIMIT:
        poly = _search_sparse(m)
        if poly is not None:
            spec = FieldSpec(m, poly, "searched")
            cache.put(m, spec)
            return spec
    deg = m
    while not all_ones_degree_ok(deg):
        deg += 1
    spec = FieldSpec(deg, (1 << (deg + 1)) - 1, "all-ones")
    cache.put(m, spec)
    return spec


def hash_to_bits(seed: int, value: int, out_bits: int, field: FieldSpec) -> int:
    """Top ``out_bits`` bits of seed (*) value in the field.

    ``value`` may be shorter than the field degree (zero-padded inputs);
    the seed must be a nonzero field element.
    """
    if not 1 <= seed < (1 << field.degree):
        raise ZeroSeedError("hash seed must be a nonzero field element")
    if not 0 <= out_bits <= field.degree:
        raise ParamRangeError("output width exceeds field degree")
    if value >> field.degree:
        raise ParamRangeError("input wider than the field degree")
    prod = field.mul(seed, value)
    return prod >> (field.degree - out_bits) if out_bits else 0
