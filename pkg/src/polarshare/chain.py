"""Recursive block-Markov chaining across decoders.

With several decoders, per-run messages tailored to each decoder are
XOR-combined across adjacent runs so that one public transcript serves
all of them: every decoder but the last unwraps the chain front to back,
recomputing the other role's message from its own decoded blocks; the
last decoder unwraps back to front.  The construction composes one level
per decoder beyond the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InclusionViolationError,
    InfeasibleDeltaError,
    LengthMismatchError,
    PlanMismatchError,
)
from .polar import IndexSets, PolarParams, batch_sc_decode, transform
from .quantize import (
    FILL_CONDITIONAL,
    QuantizedBlocks,
    RandomBudget,
    assemble_frozen,
    quantize,
)
from .sources import ObservationModel


@dataclass(frozen=True)
class BlockPlan:
    """Per-level block counts for a chained code.

    ``base_k`` blocks form the innermost run; each composition level
    multiplies the total by its count.  ``total_k`` is the number of
    length-N blocks one codec instance consumes.
    """

    params: PolarParams
    base_k: int
    level_ks: tuple[int, ...]
    epsilon: float
    delta: float

    @property
    def total_k(self) -> int:
        return self.base_k * int(np.prod(self.level_ks, dtype=np.int64)) if self.level_ks else self.base_k

    def blocks_at(self, level: int) -> int:
        """Blocks covered by one level-``level`` run (level 1 = base)."""
        out = self.base_k
        for k in self.level_ks[: level - 1]:
            out *= k
        return out

    @property
    def depth(self) -> int:
        return 1 + len(self.level_ks)


def _footnote_holds(k: int, max_rate: float, h_u_given_x: float, delta: float) -> bool:
    lhs = (1.0 + 1.0 / k) * (max_rate + delta / 2.0) + h_u_given_x / k
    return lhs <= max_rate + delta


def plan_blocks(
    num_decoders: int,
    rates,
    h_u_given_x: float,
    delta: float,
    epsilon: float,
    params: PolarParams,
    max_k: int = 1_000_000,
) -> BlockPlan:
    """Choose per-level block counts from the rate-overhead inequalities.

    ``rates`` lists I(U;X|Y_A) in decoder order.  Each composition level
    gets an equal share of ``delta`` and uses the smallest count for which
    the level's overhead inequality holds; the base count caps the
    once-per-instance dither overhead H(U|X)/k at half its share.
    """
    if delta <= 0:
        raise InfeasibleDeltaError("delta must be positive")
    rates = [float(r) for r in rates]
    if len(rates) != num_decoders or num_decoders < 1:
        raise InfeasibleDeltaError("need one rate per decoder")

    shares = delta if num_decoders == 1 else delta / (num_decoders - 1)

    base_target = shares / 2.0
    k1 = 1
    while h_u_given_x / k1 > base_target:
        k1 += 1
        if k1 > max_k:
            raise InfeasibleDeltaError("no feasible base block count")

    level_ks = []
    for level in range(2, num_decoders + 1):
        max_rate = max(rates[:level])
        k = 1
        while not _footnote_holds(k, max_rate, h_u_given_x, shares):
            k += 1
            if k > max_k:
                raise InfeasibleDeltaError(f"no feasible count at level {level}")
        level_ks.append(k)
    return BlockPlan(params, k1, tuple(level_ks), epsilon, delta)


def _pad_xor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Bitwise XOR with trailing-zero padding of the shorter operand."""
    la, lb = a.shape[-1], b.shape[-1]
    width = max(la, lb)
    lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.zeros(lead + (width,), dtype=np.uint8)
    out[..., :la] ^= a
    out[..., :lb] ^= b
    return out


@dataclass(frozen=True)
class ChainFrame:
    """Public transcript of one chained encoding.

    ``payload`` is the fully framed message; every entry boundary and
    every pre-padding sub-message length is derivable from the plan and
    the per-decoder message widths, so no lengths travel in the payload.
    """

    order: tuple[frozenset, ...]
    plan: BlockPlan
    msg_widths: tuple[int, ...]
    r1: np.ndarray
    payload: np.ndarray

    def single_len(self, level: int) -> int:
        """Bits of the level-``level`` single-decoder message over one run."""
        return self.plan.blocks_at(level - 1) * self.msg_widths[level - 1]

    def chain_len(self, level: int) -> int:
        """Bits of the composed level-``level`` message over one run."""
        length = self.plan.base_k * self.msg_widths[0]
        for lvl in range(2, level + 1):
            k_l = self.plan.level_ks[lvl - 2]
            single = self.single_len(lvl)
            length = length + (k_l - 1) * max(length, single) + single
        return length

    def entry_lengths(self, level: int) -> list[int]:
        inner = self.chain_len(level - 1)
        single = self.single_len(level)
        k_l = self.plan.level_ks[level - 2]
        return [inner] + [max(inner, single)] * (k_l - 1) + [single]

    @property
    def payload_bits(self) -> int:
        return self.payload.shape[-1]

    @property
    def rate(self) -> float:
        """(payload + public dither) bits per source symbol."""
        kn = self.plan.total_k * self.plan.params.block_len
        return (self.payload_bits + self.r1.shape[-1]) / kn


class ChainCodec:
    """Encoder and per-decoder decoders for one access-structure chain."""

    def __init__(self, index_sets: IndexSets, order, plan: BlockPlan):
        self.index_sets = index_sets
        self.order = tuple(frozenset(a) for a in order)
        self.plan = plan
        if plan.depth != len(self.order):
            raise PlanMismatchError(
                f"plan has {plan.depth} levels for {len(self.order)} decoders"
            )
        vux = set(index_sets.v_u_given_x.tolist())
        for dec in self.order:
            if not vux <= set(index_sets.frozen_for(dec).tolist()):
                raise InclusionViolationError(
                    f"V_(U|X) not inside the frozen set of decoder {sorted(dec)}"
                )
        self.msg_idx = [index_sets.message_indices(dec) for dec in self.order]
        self.msg_widths = tuple(idx.size for idx in self.msg_idx)

    # -- message extraction -------------------------------------------------

    def _single_msg(self, level: int, lo: int, hi: int, v_blocks: np.ndarray) -> np.ndarray:
        idx = self.msg_idx[level - 1]
        part = v_blocks[..., lo:hi, :][..., idx]
        return part.reshape(part.shape[:-2] + (-1,))

    def _chain_msg(self, level: int, lo: int, hi: int, v_blocks: np.ndarray) -> np.ndarray:
        if level == 1:
            return self._single_msg(1, lo, hi, v_blocks)
        k_l = self.plan.level_ks[level - 2]
        sub = self.plan.blocks_at(level - 1)
        parts = [self._chain_msg(level - 1, lo, lo + sub, v_blocks)]
        for i in range(1, k_l):
            a = self._chain_msg(level - 1, lo + i * sub, lo + (i + 1) * sub, v_blocks)
            b = self._single_msg(level, lo + (i - 1) * sub, lo + i * sub, v_blocks)
            parts.append(_pad_xor(a, b))
        parts.append(self._single_msg(level, lo + (k_l - 1) * sub, hi, v_blocks))
        return np.concatenate(parts, axis=-1)

    # -- encoding -----------------------------------------------------------

    def encode(
        self,
        x_blocks: np.ndarray,
        budget: RandomBudget,
        model_x: ObservationModel,
        seed: int,
    ) -> tuple[QuantizedBlocks, ChainFrame]:
        x = np.asarray(x_blocks)
        if x.shape[-2] != self.plan.total_k:
            raise PlanMismatchError(
                f"expected {self.plan.total_k} blocks, got {x.shape[-2]}"
            )
        q = quantize(x, self.index_sets, budget, model_x, seed,
                     informative_fill=FILL_CONDITIONAL)
        payload = self._chain_msg(len(self.order), 0, self.plan.total_k, q.v)
        frame = ChainFrame(self.order, self.plan, self.msg_widths,
                           np.asarray(budget.r1, dtype=np.uint8), payload)
        return q, frame

    # -- decoding -----------------------------------------------------------

    def _base_decode(
        self,
        decoder_pos: int,
        msg: np.ndarray,
        lo: int,
        hi: int,
        side_blocks: np.ndarray,
        model: ObservationModel,
        r1: np.ndarray,
        u_out: np.ndarray,
    ) -> None:
        blocks = hi - lo
        width = self.msg_widths[decoder_pos]
        msgs = msg.reshape(msg.shape[:-1] + (blocks, width))
        mask, values = assemble_frozen(
            self.index_sets, self.order[decoder_pos], msgs, r1
        )
        n_len = self.index_sets.block_len
        side = side_blocks[..., lo:hi, :]
        rows = int(np.prod(side.shape[:-1]))
        priors = model.priors(side.reshape(rows, n_len))
        _, u_hat = batch_sc_decode(priors, mask, values.reshape(rows, n_len))
        u_out[..., lo:hi, :] = u_hat.reshape(side.shape)

    def _split_entries(self, level: int, msg: np.ndarray, frame: ChainFrame) -> list[np.ndarray]:
        lengths = frame.entry_lengths(level)
        if msg.shape[-1] != sum(lengths):
            raise LengthMismatchError("chain message length mismatch")
        parts, off = [], 0
        for ln in lengths:
            parts.append(msg[..., off : off + ln])
            off += ln
        return parts

    def _decode_level(
        self,
        decoder_pos: int,
        level: int,
        msg: np.ndarray,
        lo: int,
        hi: int,
        frame: ChainFrame,
        side_blocks: np.ndarray,
        model: ObservationModel,
        u_out: np.ndarray,
    ) -> None:
        if level == 1:
            self._base_decode(decoder_pos, msg, lo, hi, side_blocks, model,
                              frame.r1, u_out)
            return
        k_l = self.plan.level_ks[level - 2]
        sub = self.plan.blocks_at(level - 1)
        entries = self._split_entries(level, msg, frame)
        inner_len = frame.chain_len(level - 1)
        single_len = frame.single_len(level)

        if decoder_pos == level - 1:
            # final decoder of this level: unwrap back to front
            self._base_decode(decoder_pos, entries[k_l], lo + (k_l - 1) * sub, hi,
                              side_blocks, model, frame.r1, u_out)
            for i in range(k_l - 1, 0, -1):
                v_hat = transform(u_out[..., lo + i * sub : lo + (i + 1) * sub, :])
                inner_hat = self._chain_msg(level - 1, 0, sub, v_hat)
                exposed = _pad_xor(entries[i], inner_hat)[..., :single_len]
                self._base_decode(decoder_pos, exposed, lo + (i - 1) * sub,
                                  lo + i * sub, side_blocks, model, frame.r1, u_out)
            return

        # any earlier decoder: unwrap front to back
        self._decode_level(decoder_pos, level - 1, entries[0][..., :inner_len],
                           lo, lo + sub, frame, side_blocks, model, u_out)
        for i in range(1, k_l):
            v_hat = transform(u_out[..., lo + (i - 1) * sub : lo + i * sub, :])
            single_hat = self._single_msg(level, 0, sub, v_hat)
            exposed = _pad_xor(entries[i], single_hat)[..., :inner_len]
            self._decode_level(decoder_pos, level - 1, exposed, lo + i * sub,
                               lo + (i + 1) * sub, frame, side_blocks, model, u_out)

    def decode(
        self,
        frame: ChainFrame,
        decoder_pos: int,
        side_blocks: np.ndarray,
        model: ObservationModel,
    ) -> np.ndarray:
        """Reconstruct all quantized blocks from the transcript.

        ``side_blocks`` holds the decoder's flat side indices, shaped
        (..., total_k, N).  Decoding failures are silent: a wrong block
        propagates into wrong recomputed messages downstream, exactly as
        the transcript framing dictates.
        """
        side = np.asarray(side_blocks, dtype=np.intp)
        if side.shape[-2] != self.plan.total_k:
            raise PlanMismatchError("side blocks do not match the plan")
        if not 0 <= decoder_pos < len(self.order):
            raise PlanMismatchError("decoder position out of range")
        u_out = np.zeros(side.shape, dtype=np.uint8)
        self._decode_level(decoder_pos, len(self.order),
                           np.asarray(frame.payload, dtype=np.uint8),
                           0, self.plan.total_k, frame, side, model, u_out)
        return u_out


def encode_chain(
    x_blocks: np.ndarray,
    order,
    index_sets: IndexSets,
    plan: BlockPlan,
    budget: RandomBudget,
    model_x: ObservationModel,
    seed: int,
) -> tuple[QuantizedBlocks, ChainFrame]:
    """Encode blocks for every decoder of the ordered access structure."""
    return ChainCodec(index_sets, order, plan).encode(x_blocks, budget, model_x, seed)


def decode_forward(
    frame: ChainFrame,
    decoder_pos: int,
    side_blocks: np.ndarray,
    index_sets: IndexSets,
    model: ObservationModel,
) -> np.ndarray:
    """Decode as one of the front-to-back decoders (any but the last)."""
    if decoder_pos >= len(frame.order) - 1:
        raise PlanMismatchError("the last decoder must decode backward")
    codec = ChainCodec(index_sets, frame.order, frame.plan)
    return codec.decode(frame, decoder_pos, side_blocks, model)


def decode_backward(
    frame: ChainFrame,
    side_blocks: np.ndarray,
    index_sets: IndexSets,
    model: ObservationModel,
) -> np.ndarray:
    """Decode as the final decoder, unwrapping the chain back to front."""
    codec = ChainCodec(index_sets, frame.order, frame.plan)
    return codec.decode(frame, len(frame.order) - 1, side_blocks, model)
