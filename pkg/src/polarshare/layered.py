"""Two-layer coding: a coarse first pass and a refinement pass.

The coarse layer quantizes the source blocks given X alone.  The fine
layer then draws against (coarse blocks, X), so the joint law of the two
layers matches the chain parameterization of the test channel; decoders
reconstruct the coarse layer from their own observations and treat it as
extra side information for the fine one.  Secrets for the two-auxiliary
scheme are hashed from the fine-layer blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import BlockPlan, ChainCodec, ChainFrame
from .errors import ParamRangeError
from .polar import IndexSets
from .quantize import QuantizedBlocks, RandomBudget
from .sources import (
    JointSource,
    TestChannel,
    layer2_model_side_ux,
    layer2_model_side_uy,
    model_side_x,
    model_side_y,
)


@dataclass(frozen=True)
class LayeredEncodeResult:
    quantized_coarse: QuantizedBlocks
    quantized_fine: QuantizedBlocks
    frame_coarse: ChainFrame
    frame_fine: ChainFrame

    @property
    def rate_total(self) -> float:
        return self.frame_coarse.rate + self.frame_fine.rate


def layered_encode(
    x_blocks: np.ndarray,
    order,
    source: JointSource,
    channel: TestChannel,
    sets_coarse: IndexSets,
    sets_fine: IndexSets,
    plan: BlockPlan,
    budget_coarse: RandomBudget,
    budget_fine: RandomBudget,
    seed: int,
) -> LayeredEncodeResult:
    """Encode both layers over the same blocks and block plan."""
    if not channel.layered:
        raise ParamRangeError("layered encoding needs a two-layer channel")
    codec_u = ChainCodec(sets_coarse, order, plan)
    codec_w = ChainCodec(sets_fine, order, plan)
    q_u, frame_u = codec_u.encode(x_blocks, budget_coarse,
                                  model_side_x(source, channel), seed)
    model_ux = layer2_model_side_ux(source, channel)
    side_enc = model_ux.flatten_side(q_u.u, np.asarray(x_blocks, dtype=np.uint8))
    q_w, frame_w = codec_w.encode(side_enc, budget_fine, model_ux, seed + 1)
    return LayeredEncodeResult(q_u, q_w, frame_u, frame_w)


def layered_decode(
    result_frames: tuple[ChainFrame, ChainFrame],
    decoder_pos: int,
    decoder_set,
    y_by_participant: np.ndarray,
    source: JointSource,
    channel: TestChannel,
    sets_coarse: IndexSets,
    sets_fine: IndexSets,
) -> tuple[np.ndarray, np.ndarray]:
    """Decode the coarse layer, then the fine layer given it.

    ``y_by_participant`` has shape (J, ..., k, N).  Returns the coarse
    and fine symbol-domain estimates.
    """
    frame_u, frame_w = result_frames
    dec = frozenset(decoder_set)
    members = sorted(dec)

    model_y = model_side_y(source, channel, dec)
    side1 = model_y.flatten_side(*[y_by_participant[m - 1] for m in members])
    codec_u = ChainCodec(sets_coarse, frame_u.order, frame_u.plan)
    u_hat = codec_u.decode(frame_u, decoder_pos, side1, model_y)

    model_uy = layer2_model_side_uy(source, channel, dec)
    side2 = model_uy.flatten_side(u_hat, *[y_by_participant[m - 1] for m in members])
    codec_w = ChainCodec(sets_fine, frame_w.order, frame_w.plan)
    w_hat = codec_w.decode(frame_w, decoder_pos, side2, model_uy)
    return u_hat, w_hat
