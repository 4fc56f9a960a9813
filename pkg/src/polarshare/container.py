"""Length-prefixed binary container for codec artifacts.

Layout (all integers little-endian):

    magic   4 bytes  b"PSHR"
    version u8       currently 1
    rtype   u8       record type tag
    body    type-specific, see below

Bit arrays are stored as a u64 bit count followed by the bits packed
most-significant-bit first (the final byte is zero-padded on the right).
Index arrays are a u32 count followed by u32 indices.  Participant sets
travel as u32 bitmasks (participant j -> bit j-1).

Record bodies:

    INDEX_SETS (1): u8 n, f64 beta, three index arrays (very-high set,
        high set, encoder dither set), u16 decoder count, then per
        decoder: u32 member mask + index array of its frozen set.
    CHAIN_FRAME (2): u16 decoder count + u32 member masks; plan (u32
        base_k, u16 level count, u32 levels, f64 epsilon, f64 delta,
        u8 n, f64 beta); u16 message widths; r1 bit array; payload bit
        array.
    QUANT_BLOCKS (3): u32 k, u32 N, bit array of the transformed blocks
        (row-major); the symbol-domain image is recomputed on load.
    SECRET_BUNDLE (4): u32 secret bit width, secret bit array, seed bit
        array, f64 secret rate, f64 public rate, u16 estimate count,
        then per estimate: u32 member mask + bit array.
    PROFILE (5): u8 method tag (0 exact / 1 monte-carlo), u64 sample
        count (0 if absent), u32 N, f64 entries, then u8 flag + f64
        standard errors when present.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .chain import BlockPlan, ChainFrame
from .errors import ConfigError
from .polar import EntropyProfile, IndexSets, PolarParams, transform
from .quantize import QuantizedBlocks

MAGIC = b"PSHR"
VERSION = 1

INDEX_SETS = 1
CHAIN_FRAME = 2
QUANT_BLOCKS = 3
SECRET_BUNDLE = 4
PROFILE = 5


def _w_bits(out, bits: np.ndarray) -> None:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    out.write(struct.pack("<Q", bits.size))
    if bits.size:
        out.write(np.packbits(bits).tobytes())


def _r_bits(buf) -> np.ndarray:
    (count,) = struct.unpack("<Q", buf.read(8))
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    raw = buf.read((count + 7) // 8)
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:count]


def _w_indices(out, idx: np.ndarray) -> None:
    idx = np.asarray(idx, dtype=np.uint32)
    out.write(struct.pack("<I", idx.size))
    out.write(idx.tobytes())


def _r_indices(buf) -> np.ndarray:
    (count,) = struct.unpack("<I", buf.read(4))
    return np.frombuffer(buf.read(4 * count), dtype=np.uint32).astype(np.intp)


def _mask_of(members) -> int:
    mask = 0
    for m in members:
        mask |= 1 << (m - 1)
    return mask


def _members_of(mask: int) -> frozenset:
    return frozenset(i + 1 for i in range(32) if mask >> i & 1)


def _header(rtype: int) -> bytes:
    return MAGIC + bytes([VERSION, rtype])


def _check_header(buf, expect: int | None = None) -> int:
    head = buf.read(6)
    if len(head) != 6 or head[:4] != MAGIC:
        raise ConfigError("not a container record")
    if head[4] != VERSION:
        raise ConfigError(f"unsupported container version {head[4]}")
    rtype = head[5]
    if expect is not None and rtype != expect:
        raise ConfigError(f"expected record type {expect}, found {rtype}")
    return rtype


def dump_index_sets(sets: IndexSets) -> bytes:
    out = io.BytesIO()
    out.write(_header(INDEX_SETS))
    out.write(struct.pack("<Bd", sets.params.n, sets.params.beta))
    _w_indices(out, sets.v_u)
    _w_indices(out, sets.h_u)
    _w_indices(out, sets.v_u_given_x)
    out.write(struct.pack("<H", len(sets.h_u_given_y)))
    for dec in sorted(sets.h_u_given_y, key=_mask_of):
        out.write(struct.pack("<I", _mask_of(dec)))
        _w_indices(out, sets.h_u_given_y[dec])
    return out.getvalue()


def load_index_sets(raw: bytes) -> IndexSets:
    buf = io.BytesIO(raw)
    _check_header(buf, INDEX_SETS)
    n, beta = struct.unpack("<Bd", buf.read(9))
    v_u = _r_indices(buf)
    h_u = _r_indices(buf)
    v_ux = _r_indices(buf)
    (count,) = struct.unpack("<H", buf.read(2))
    h_y = {}
    for _ in range(count):
        (mask,) = struct.unpack("<I", buf.read(4))
        h_y[_members_of(mask)] = _r_indices(buf)
    return IndexSets(PolarParams(n, beta), v_u, h_u, v_ux, h_y)


def dump_profile(profile: EntropyProfile) -> bytes:
    out = io.BytesIO()
    out.write(_header(PROFILE))
    tag = 0 if profile.method == "exact" else 1
    out.write(struct.pack("<BQI", tag, profile.sample_count or 0, profile.block_len))
    out.write(np.asarray(profile.entries, dtype="<f8").tobytes())
    if profile.std_errors is not None:
        out.write(b"\x01")
        out.write(np.asarray(profile.std_errors, dtype="<f8").tobytes())
    else:
        out.write(b"\x00")
    return out.getvalue()


def load_profile(raw: bytes) -> EntropyProfile:
    buf = io.BytesIO(raw)
    _check_header(buf, PROFILE)
    tag, samples, n_len = struct.unpack("<BQI", buf.read(13))
    entries = np.frombuffer(buf.read(8 * n_len), dtype="<f8").copy()
    has_se = buf.read(1) == b"\x01"
    se = np.frombuffer(buf.read(8 * n_len), dtype="<f8").copy() if has_se else None
    return EntropyProfile(entries, "exact" if tag == 0 else "monte-carlo",
                          samples or None, se)


def dump_chain_frame(frame: ChainFrame) -> bytes:
    if np.asarray(frame.payload).ndim != 1:
        raise ConfigError("only single-instance frames are serializable")
    out = io.BytesIO()
    out.write(_header(CHAIN_FRAME))
    out.write(struct.pack("<H", len(frame.order)))
    for dec in frame.order:
        out.write(struct.pack("<I", _mask_of(dec)))
    plan = frame.plan
    out.write(struct.pack("<IH", plan.base_k, len(plan.level_ks)))
    for k in plan.level_ks:
        out.write(struct.pack("<I", k))
    out.write(struct.pack("<ddBd", plan.epsilon, plan.delta,
                          plan.params.n, plan.params.beta))
    for w in frame.msg_widths:
        out.write(struct.pack("<H", w))
    _w_bits(out, frame.r1)
    _w_bits(out, frame.payload)
    return out.getvalue()


def load_chain_frame(raw: bytes) -> ChainFrame:
    buf = io.BytesIO(raw)
    _check_header(buf, CHAIN_FRAME)
    (dec_count,) = struct.unpack("<H", buf.read(2))
    order = tuple(
        _members_of(struct.unpack("<I", buf.read(4))[0]) for _ in range(dec_count)
    )
    base_k, lvl_count = struct.unpack("<IH", buf.read(6))
    levels = tuple(struct.unpack("<I", buf.read(4))[0] for _ in range(lvl_count))
    eps, delta, n, beta = struct.unpack("<ddBd", buf.read(25))
    plan = BlockPlan(PolarParams(n, beta), base_k, levels, eps, delta)
    widths = tuple(struct.unpack("<H", buf.read(2))[0] for _ in range(dec_count))
    r1 = _r_bits(buf)
    payload = _r_bits(buf)
    return ChainFrame(order, plan, widths, r1, payload)


def dump_quantized(blocks: QuantizedBlocks) -> bytes:
    v = np.asarray(blocks.v)
    if v.ndim != 2:
        raise ConfigError("only single-instance blocks are serializable")
    out = io.BytesIO()
    out.write(_header(QUANT_BLOCKS))
    out.write(struct.pack("<II", v.shape[0], v.shape[1]))
    _w_bits(out, v)
    return out.getvalue()


def load_quantized(raw: bytes) -> QuantizedBlocks:
    buf = io.BytesIO(raw)
    _check_header(buf, QUANT_BLOCKS)
    k, n_len = struct.unpack("<II", buf.read(8))
    v = _r_bits(buf).reshape(k, n_len)
    return QuantizedBlocks(v, transform(v), provenance={"loaded": True})


def dump_secret_bundle(bundle) -> bytes:
    out = io.BytesIO()
    out.write(_header(SECRET_BUNDLE))
    out.write(struct.pack("<I", bundle.secret_bits))
    from .util import int_to_bits

    _w_bits(out, int_to_bits(bundle.secret, bundle.secret_bits))
    seed_bits = max(1, bundle.hash_seed.bit_length())
    out.write(struct.pack("<I", seed_bits))
    _w_bits(out, int_to_bits(bundle.hash_seed, seed_bits))
    out.write(struct.pack("<dd", bundle.rate_secret, bundle.rate_public))
    out.write(struct.pack("<H", len(bundle.estimates)))
    for dec in sorted(bundle.estimates, key=_mask_of):
        out.write(struct.pack("<I", _mask_of(dec)))
        _w_bits(out, int_to_bits(bundle.estimates[dec], bundle.secret_bits))
    return out.getvalue()


def load_secret_bundle(raw: bytes):
    from .amplify import SecretBundle
    from .util import bits_to_int

    buf = io.BytesIO(raw)
    _check_header(buf, SECRET_BUNDLE)
    (r,) = struct.unpack("<I", buf.read(4))
    secret = bits_to_int(_r_bits(buf))
    (seed_bits,) = struct.unpack("<I", buf.read(4))
    seed = bits_to_int(_r_bits(buf))
    rate_s, rate_p = struct.unpack("<dd", buf.read(16))
    (count,) = struct.unpack("<H", buf.read(2))
    estimates = {}
    for _ in range(count):
        (mask,) = struct.unpack("<I", buf.read(4))
        estimates[_members_of(mask)] = bits_to_int(_r_bits(buf))
    return SecretBundle(secret, r, seed, estimates, rate_s, rate_p,
                        {"loaded": True})
