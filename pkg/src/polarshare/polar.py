"""Source polarization: transform, successive-cancellation recursion,
entropy profiles, polarized index sets, and SC decoding.

The engine works on batches.  A batch row carries one length-N problem:
per-position priors P(symbol = 1 | observed side) fully describe the
conditional law of the symbol vector, because positions are independent
given the side observations.  One recursive pass serves probability
evaluation, decoding, and randomized quantization; the per-index decision
rule is the only thing that changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FrozenSetMismatchError,
    IndexRangeError,
    InclusionUnrepairableError,
    LengthNotPow2Error,
    ParamRangeError,
    TooLargeForExactError,
)
from .sources import ObservationModel
from .util import labeled_rng

_TINY = 1e-300


@dataclass(frozen=True)
class PolarParams:
    """Blocklength and polarization-threshold parameters."""

    n: int
    beta: float = 0.25

    def __post_init__(self):
        if self.n < 0:
            raise ParamRangeError("n must be nonnegative")
        if not 0.0 < self.beta < 0.5:
            raise ParamRangeError("beta must lie in (0, 1/2)")

    @property
    def block_len(self) -> int:
        return 1 << self.n

    @property
    def delta_n(self) -> float:
        return 2.0 ** (-(self.block_len ** self.beta))

    @property
    def delta1(self) -> float:
        return math.sqrt(2 * math.log(2)) * math.sqrt(self.block_len * self.delta_n)

    @property
    def delta2(self) -> float:
        d1 = self.delta1
        inner = self.delta_n + 2 * d1 * (self.block_len - math.log2(d1))
        return self.block_len * math.sqrt(inner)


def transform(bits: np.ndarray) -> np.ndarray:
    """Apply the polarization transform along the last axis.

    The transform is its own inverse over GF(2); cost O(N log N).
    """
    v = np.array(bits, dtype=np.uint8, copy=True)
    n_len = v.shape[-1]
    if n_len == 0 or n_len & (n_len - 1):
        raise LengthNotPow2Error(f"length {n_len} is not a power of two")
    flat = v.reshape(-1, n_len)
    size = n_len
    while size > 1:
        half = size // 2
        view = flat.reshape(-1, size)
        view[:, :half] ^= view[:, half:]
        size = half
        flat = view.reshape(-1, n_len)
    return flat.reshape(np.shape(bits)).astype(np.uint8)


def _combine_minus(p: np.ndarray) -> np.ndarray:
    half = p.shape[1] // 2
    p1, p2 = p[:, :half], p[:, half:]
    return p1 * (1.0 - p2) + (1.0 - p1) * p2


def _combine_plus(p: np.ndarray, pm: np.ndarray, known: np.ndarray) -> np.ndarray:
    half = p.shape[1] // 2
    p1, p2 = p[:, :half], p[:, half:]
    hit = known == 1
    num = np.where(hit, (1.0 - p1) * p2, p1 * p2)
    den = np.where(hit, pm, 1.0 - pm)
    out = num / np.maximum(den, _TINY)
    return np.clip(out, 0.0, 1.0)


def sc_process(priors, decide, collect_probs: bool = False):
    """Run one successive-cancellation pass over a batch.

    Parameters
    ----------
    priors : list of (B, N) arrays
        P(symbol = 1 | side) per tracked model.  All models see the same
        decided bit sequence; extra models supply alternative conditional
        laws to the decision rule (e.g. the no-side-information law).
    decide : callable
        ``decide(j, probs_list) -> (B,) bits`` with ``probs_list[m]`` the
        per-row P(bit j = 1 | decided prefix) under model ``m``.
    collect_probs : bool
        Also return the per-model P(bit = 1 | prefix) along the realized
        path, one (B, N) array per model.

    Returns
    -------
    (v, u, probs): decided transformed bits, their transform (the symbol
    domain), and the collected probabilities (or None).
    """
    batch, n_len = priors[0].shape
    if n_len & (n_len - 1):
        raise LengthNotPow2Error(f"length {n_len} is not a power of two")
    probs_out = [np.empty((batch, n_len)) for _ in priors] if collect_probs else None

    def rec(ps, offset, length):
        if length == 1:
            p1s = [p[:, 0] for p in ps]
            if collect_probs:
                for m, val in enumerate(p1s):
                    probs_out[m][:, offset] = val
            bit = np.asarray(decide(offset, p1s), dtype=np.uint8).reshape(batch, 1)
            return bit, bit
        half = length // 2
        left = [_combine_minus(p) for p in ps]
        v_left, a = rec(left, offset, half)
        right = [_combine_plus(p, pm, a) for p, pm in zip(ps, left)]
        v_right, b = rec(right, offset + half, half)
        return (
            np.concatenate([v_left, v_right], axis=1),
            np.concatenate([a ^ b, b], axis=1),
        )

    v, u = rec([np.asarray(p, dtype=float) for p in priors], 0, n_len)
    return v, u, probs_out


def decide_forced(v_known: np.ndarray):
    """Decision rule that replays known transformed bits (probability pass)."""
    def decide(j, p1s):
        return v_known[:, j]
    return decide


def sc_forced_probabilities(priors: np.ndarray, v: np.ndarray) -> np.ndarray:
    """P(bit j = 1 | decided prefix v[:, :j]) for every j, per batch row.

    Equivalent to a probability pass of :func:`sc_process` with forced
    decisions, but computed level-synchronously: when the decided bits are
    known in advance, no decision feedback is needed and each recursion
    level collapses into a handful of whole-array operations.
    """
    rows, n_len = priors.shape
    if n_len & (n_len - 1):
        raise LengthNotPow2Error(f"length {n_len} is not a power of two")
    v = np.asarray(v, dtype=np.uint8)

    # Butterfly stages commute, so running them bottom-up makes every
    # intermediate state the blockwise transform of v at that block size.
    blockwise = {1: v}
    state = v.copy()
    size = 2
    while size <= n_len:
        view = state.reshape(rows, n_len // size, size)
        view[:, :, : size // 2] ^= view[:, :, size // 2 :]
        blockwise[size] = state.copy()
        size *= 2

    dtype = np.asarray(priors).dtype
    if dtype not in (np.float32, np.float64):
        dtype = np.float64
    tiny = _TINY if dtype == np.float64 else 1e-38
    p = np.ascontiguousarray(priors, dtype=dtype)[:, None, :]  # (rows, nodes, len)
    while p.shape[2] > 1:
        nodes, length = p.shape[1], p.shape[2]
        half = length // 2
        p1, p2 = p[:, :, :half], p[:, :, half:]
        prod = p1 * p2
        pm = p1 + p2 - 2.0 * prod
        # decided symbol-domain bits of each node's left child, as 0/1 floats
        af = blockwise[half].reshape(rows, nodes, 2, half)[:, :, 0, :].astype(dtype)
        num = prod + af * (p2 - 2.0 * prod)        # P(right sym = 1, left sym = a)
        den = 1.0 - pm + af * (2.0 * pm - 1.0)     # P(left sym = a)
        np.maximum(den, tiny, out=den)
        pp = np.divide(num, den, out=num)
        np.clip(pp, 0.0, 1.0, out=pp)
        nxt = np.empty((rows, nodes * 2, half), dtype=dtype)
        nxt[:, 0::2, :] = pm
        nxt[:, 1::2, :] = pp
        p = nxt
    return p[:, :, 0]


def decide_frozen_ml(frozen_mask: np.ndarray, frozen_values: np.ndarray):
    """Frozen bits where masked, max-likelihood decisions elsewhere.

    Ties at probability 1/2 resolve to bit 0 for reproducibility.
    """
    def decide(j, p1s):
        if frozen_mask[j]:
            return frozen_values[:, j]
        return (p1s[0] > 0.5).astype(np.uint8)
    return decide


def sc_probability(model: ObservationModel, side_block, prefix, index: int) -> float:
    """P(V^index = 0 | V^(prefix) , side observations), exactly.

    ``index`` is 0-based and ``prefix`` holds the first ``index`` decided
    bits.  ``side_block`` is a length-N array of flat side indices (ignored
    for a trivial side alphabet).
    """
    if model.side_cardinality == 1:
        side_idx = np.zeros(int(side_block) if np.isscalar(side_block) else len(side_block), dtype=np.intp)
    else:
        side_idx = np.asarray(side_block, dtype=np.intp)
    n_len = side_idx.size
    if not 0 <= index < n_len:
        raise IndexRangeError(f"index {index} outside [0, {n_len})")
    prefix = np.asarray(prefix, dtype=np.uint8)
    if prefix.size != index:
        raise IndexRangeError(f"prefix length {prefix.size} != index {index}")
    v = np.zeros((1, n_len), dtype=np.uint8)
    v[0, :index] = prefix
    priors = model.priors(side_idx)[None, :]
    _, _, probs = sc_process([priors], decide_forced(v), collect_probs=True)
    return float(1.0 - probs[0][0, index])


@dataclass(frozen=True)
class EntropyProfile:
    """Per-index conditional entropies H(V^i | V^(1:i-1), side)."""

    entries: np.ndarray
    method: str                      # "exact" | "monte-carlo"
    sample_count: int | None = None
    std_errors: np.ndarray | None = None

    @property
    def block_len(self) -> int:
        return self.entries.size


def _enumerate_codes(count: int, base: int, width: int) -> np.ndarray:
    """All base-`base` strings of the given width, one row each."""
    idx = np.arange(count)
    digits = (idx[:, None] // base ** np.arange(width - 1, -1, -1)) % base
    return digits


def entropy_profile_exact(model: ObservationModel, block_len: int) -> EntropyProfile:
    """Exact profile by full enumeration over (symbols, side observations).

    Feasible only at desk scale: enumeration costs (2*S)^N atoms.
    """
    n_len = block_len
    if n_len & (n_len - 1):
        raise LengthNotPow2Error(f"length {n_len} is not a power of two")
    s_card = model.side_cardinality
    if s_card == 1 and n_len > 256:
        raise TooLargeForExactError("no-side exact profile limited to N <= 256")
    if s_card > 1 and n_len > 16:
        raise TooLargeForExactError("side-conditioned exact profile limited to N <= 16")
    atoms = (2 * s_card) ** n_len
    if atoms > 1 << 26:
        raise TooLargeForExactError(f"enumeration of {atoms} atoms is too large")

    u = _enumerate_codes(2 ** n_len, 2, n_len).astype(np.uint8)
    sides = _enumerate_codes(s_card ** n_len, s_card, n_len).astype(np.intp)
    # P(u, s) as an outer product over the two enumerations
    w = np.ones((u.shape[0], sides.shape[0]))
    for i in range(n_len):
        w *= model.joint[u[:, i][:, None], sides[:, i][None, :]]
    v = transform(u)

    u_rows, s_rows = np.nonzero(w > 0)
    weights = w[u_rows, s_rows]
    v_rows = v[u_rows]
    side_code = (
        sides[s_rows] @ (s_card ** np.arange(n_len - 1, -1, -1))
        if s_card > 1
        else np.zeros(u_rows.size, dtype=np.int64)
    )

    entries = np.zeros(n_len)
    side_span = int(s_card) ** n_len
    prefix_code = np.zeros(u_rows.size, dtype=np.int64)
    for i in range(n_len):
        # a group is one (prefix, side) realization; cells split it by the bit
        key = (prefix_code * side_span + side_code) * 2 + v_rows[:, i]
        uniq, inv = np.unique(key, return_inverse=True)
        p_cell = np.bincount(inv, weights=weights)
        _, grp_inv = np.unique(uniq // 2, return_inverse=True)
        p_grp = np.bincount(grp_inv, weights=p_cell)
        cond = p_cell / p_grp[grp_inv]
        entries[i] = float(-(p_cell * np.log2(cond)).sum())
        prefix_code = prefix_code * 2 + v_rows[:, i]
    return EntropyProfile(entries, "exact")


def entropy_profile_mc(
    model: ObservationModel,
    block_len: int,
    sample_count: int,
    seed: int,
    chunk: int = 4096,
) -> EntropyProfile:
    """Monte-Carlo profile: empirical mean of the per-index surprisal.

    For each sampled (symbol block, side block), one probability pass
    yields P(V^i = v^i | v^(1:i-1), side) at every index; the surprisal
    -log2 of it is an unbiased estimate of the conditional entropy.
    """
    if sample_count < 1000:
        raise ParamRangeError("sample_count must be at least 10^3")
    rng = labeled_rng(seed, "profile-mc", model.label, block_len)
    total = np.zeros(block_len)
    total_sq = np.zeros(block_len)
    done = 0
    while done < sample_count:
        b = min(chunk, sample_count - done)
        sym, side = model.sample(rng, (b, block_len))
        v = transform(sym)
        priors = model.priors(side).astype(np.float32)
        probs = sc_forced_probabilities(priors, v)
        p_obs = np.where(v == 1, probs, 1.0 - probs)
        surprise = -np.log2(np.maximum(p_obs, np.finfo(p_obs.dtype).tiny))
        total += surprise.sum(axis=0)
        total_sq += (surprise ** 2).sum(axis=0)
        done += b
    mean = total / sample_count
    var = np.maximum(total_sq / sample_count - mean ** 2, 0.0)
    std_err = np.sqrt(var / sample_count)
    return EntropyProfile(np.maximum(mean, 0.0), "monte-carlo", sample_count, std_err)


@dataclass(frozen=True)
class IndexSets:
    """Thresholded polarized index sets for one (source, channel, N, beta)."""

    params: PolarParams
    v_u: np.ndarray
    h_u: np.ndarray
    v_u_given_x: np.ndarray
    h_u_given_y: dict
    repairs: dict = field(default_factory=dict)

    @property
    def block_len(self) -> int:
        return self.params.block_len

    def mask(self, indices: np.ndarray) -> np.ndarray:
        m = np.zeros(self.block_len, dtype=bool)
        m[indices] = True
        return m

    def frozen_for(self, decoder_set: frozenset) -> np.ndarray:
        return self.h_u_given_y[frozenset(decoder_set)]

    def message_indices(self, decoder_set: frozenset) -> np.ndarray:
        """Indices of the per-block public message: H_(U|Y_A) minus V_(U|X)."""
        h_set = set(self.frozen_for(decoder_set).tolist())
        v_set = set(self.v_u_given_x.tolist())
        return np.array(sorted(h_set - v_set), dtype=np.intp)


def build_index_sets(profiles: dict, params: PolarParams) -> IndexSets:
    """Threshold entropy profiles into the four polarized index families.

    ``profiles`` maps ``"none"`` and ``"x"`` to profiles, and each decoder
    set (a frozenset of participants) to its side-conditioned profile.
    Estimation noise can break the encoder-set inclusions; the repair
    shrinks V_(U|X) (never grows a decoder's frozen set) because decoding
    correctness depends on freezing all of H_(U|Y_A) while the rate only
    degrades gracefully as V_(U|X) shrinks.
    """
    n_len = params.block_len
    delta = params.delta_n
    prof_none = profiles["none"]
    prof_x = profiles["x"]
    for key in ("none", "x"):
        if profiles[key].block_len != n_len:
            raise ParamRangeError(f"profile {key!r} length mismatch")

    v_u = np.flatnonzero(prof_none.entries >= 1.0 - delta)
    h_u = np.flatnonzero(prof_none.entries >= delta)
    v_ux = np.flatnonzero(prof_x.entries >= 1.0 - delta)

    repairs = {}
    # V_(U|X) subset of V_U can fail only through estimation noise.
    bad = np.setdiff1d(v_ux, v_u)
    if bad.size:
        repairs["v_u"] = bad
        v_ux = np.setdiff1d(v_ux, bad)

    h_y = {}
    for key, prof in profiles.items():
        if key in ("none", "x"):
            continue
        dec = frozenset(key)
        h_y[dec] = np.flatnonzero(prof.entries >= delta)

    had_any = v_ux.size > 0
    for dec, h_set in h_y.items():
        bad = np.setdiff1d(v_ux, h_set)
        if bad.size:
            repairs[dec] = bad
            v_ux = np.setdiff1d(v_ux, bad)
    if had_any and v_ux.size == 0 and repairs:
        raise InclusionUnrepairableError(
            "inclusion repair emptied V_(U|X); profiles need more samples"
        )
    return IndexSets(params, v_u, h_u, v_ux, h_y, repairs)


def sc_decode(
    frozen: dict,
    model: ObservationModel,
    side_block: np.ndarray,
    index_sets: IndexSets,
    decoder_set,
) -> np.ndarray:
    """Decode one block: frozen bits on H_(U|Y_A), ML decisions elsewhere.

    ``frozen`` maps index -> bit and must cover exactly H_(U|Y_A).
    Returns the symbol-domain estimate (the transform of the decided bits).
    """
    want = index_sets.frozen_for(frozenset(decoder_set))
    if sorted(frozen.keys()) != sorted(want.tolist()):
        raise FrozenSetMismatchError("frozen map does not cover exactly H_(U|Y_A)")
    n_len = index_sets.block_len
    side_idx = (
        np.zeros(n_len, dtype=np.intp)
        if model.side_cardinality == 1
        else np.asarray(side_block, dtype=np.intp)
    )
    if side_idx.size != n_len:
        raise FrozenSetMismatchError("side block length mismatch")
    mask = np.zeros(n_len, dtype=bool)
    values = np.zeros((1, n_len), dtype=np.uint8)
    for idx, bit in frozen.items():
        mask[idx] = True
        values[0, idx] = bit
    priors = model.priors(side_idx)[None, :]
    _, u_hat, _ = sc_process([priors], decide_frozen_ml(mask, values))
    return u_hat[0]


def batch_sc_decode(
    priors: np.ndarray,
    frozen_mask: np.ndarray,
    frozen_values: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched frozen+ML decode; returns (v_hat, u_hat), each (B, N)."""
    v_hat, u_hat, _ = sc_process([priors], decide_frozen_ml(frozen_mask, frozen_values))
    return v_hat, u_hat
