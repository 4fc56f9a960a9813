"""Randomized vector quantization and the single-decoder codec.

The quantizer fills the dither positions of the transformed block from a
random budget and draws every other position successively from the exact
conditional given the block's source realization.  Two fill policies are
provided for the informative positions (high unconditional entropy, low
entropy given X):

``"random"``
    Fill them from the fresh per-block budget.  This is the fill rule the
    distribution-shaping identities are stated for, and what the identity
    and entropy oracles in the test suite enumerate.

``"conditional"``
    Draw them from the conditional given X like the rest of the block.
    This couples the quantized block to the source at those positions,
    which is what reconstruction from side information requires; the
    transmission pipeline always uses it.  See the decisions ledger for
    the numeric evidence behind the split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetMismatchError, InclusionViolationError, LengthMismatchError
from .polar import IndexSets, batch_sc_decode, sc_process
from .sources import ObservationModel
from .util import labeled_rng

FILL_RANDOM = "random"
FILL_CONDITIONAL = "conditional"


@dataclass(frozen=True)
class RandomBudget:
    """Uniform bits feeding the quantizer.

    ``r1`` is reused across the blocks of one codec instance and is part
    of the public transcript; ``rbar`` is fresh per block.  ``rcheck``
    replaces ``r1`` per block in the decoupled variant used as a test
    oracle.
    """

    r1: np.ndarray                 # (..., |V_(U|X)|)
    rbar: np.ndarray               # (..., k, |V_U \ V_(U|X)|)
    rcheck: np.ndarray | None = None   # (..., k, |V_(U|X)|)


def make_budget(index_sets: IndexSets, blocks: int, seed: int, batch: tuple = (),
                with_rcheck: bool = False) -> RandomBudget:
    """Draw a budget from labeled sub-streams of ``seed``."""
    n_vux = index_sets.v_u_given_x.size
    n_bar = index_sets.v_u.size - np.intersect1d(index_sets.v_u, index_sets.v_u_given_x).size
    rng1 = labeled_rng(seed, "budget-r1")
    rngb = labeled_rng(seed, "budget-rbar")
    r1 = rng1.integers(0, 2, size=batch + (n_vux,), dtype=np.uint8)
    rbar = rngb.integers(0, 2, size=batch + (blocks, n_bar), dtype=np.uint8)
    rcheck = None
    if with_rcheck:
        rngc = labeled_rng(seed, "budget-rcheck")
        rcheck = rngc.integers(0, 2, size=batch + (blocks, n_vux), dtype=np.uint8)
    return RandomBudget(r1, rbar, rcheck)


@dataclass(frozen=True)
class QuantizedBlocks:
    """Quantizer output: transformed bits and their symbol-domain image."""

    v: np.ndarray          # (..., k, N)
    u: np.ndarray          # (..., k, N), u = transform(v) blockwise
    provenance: dict = field(default_factory=dict)


def _as_batched(x_blocks: np.ndarray) -> tuple[np.ndarray, tuple, int, int]:
    arr = np.asarray(x_blocks)
    if arr.ndim < 2:
        raise LengthMismatchError("x blocks must have shape (..., k, N)")
    lead = arr.shape[:-2]
    k, n_len = arr.shape[-2], arr.shape[-1]
    return arr.reshape((-1, k, n_len)), lead, k, n_len


def _check_budget(budget: RandomBudget, lead: tuple, k: int, n_vux: int, n_bar: int,
                  need_rcheck: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    r1 = np.asarray(budget.r1, dtype=np.uint8)
    rbar = np.asarray(budget.rbar, dtype=np.uint8)
    if r1.shape[-1:] != (n_vux,):
        raise BudgetMismatchError(f"r1 must supply {n_vux} bits per instance")
    if rbar.shape[-2:] != (k, n_bar):
        raise BudgetMismatchError(f"rbar must supply ({k}, {n_bar}) bits per instance")
    batch = int(np.prod(lead)) if lead else 1
    r1 = np.broadcast_to(r1, lead + (n_vux,)).reshape(batch, n_vux)
    rbar = np.broadcast_to(rbar, lead + (k, n_bar)).reshape(batch, k, n_bar)
    rcheck = None
    if need_rcheck:
        if budget.rcheck is None:
            raise BudgetMismatchError("rcheck bits required for the decoupled variant")
        rcheck = np.asarray(budget.rcheck, dtype=np.uint8)
        if rcheck.shape[-2:] != (k, n_vux):
            raise BudgetMismatchError(f"rcheck must supply ({k}, {n_vux}) bits per instance")
        rcheck = np.broadcast_to(rcheck, lead + (k, n_vux)).reshape(batch, k, n_vux)
    return r1, rbar, rcheck


def quantize(
    x_blocks: np.ndarray,
    index_sets: IndexSets,
    budget: RandomBudget,
    model: ObservationModel,
    seed: int,
    informative_fill: str = FILL_RANDOM,
) -> QuantizedBlocks:
    """Quantize source blocks into transformed blocks sharing ``r1``.

    ``model`` is the symbol-vs-X observation model; draws condition on the
    whole observed block through the successive-cancellation recursion.
    """
    x, lead, k, n_len = _as_batched(x_blocks)
    if n_len != index_sets.block_len:
        raise LengthMismatchError("block length does not match index sets")
    vux = index_sets.v_u_given_x
    vu_extra = np.setdiff1d(index_sets.v_u, vux)
    r1, rbar, _ = _check_budget(budget, lead, k, vux.size, vu_extra.size, False)
    if informative_fill not in (FILL_RANDOM, FILL_CONDITIONAL):
        raise ValueError(f"unknown fill policy {informative_fill!r}")

    rows = x.shape[0] * k
    fill_mask = np.zeros(n_len, dtype=bool)
    fill_values = np.zeros((rows, n_len), dtype=np.uint8)
    fill_mask[vux] = True
    fill_values[:, vux] = np.repeat(r1, k, axis=0)
    if informative_fill == FILL_RANDOM:
        fill_mask[vu_extra] = True
        fill_values[:, vu_extra] = rbar.reshape(rows, vu_extra.size)

    rng = labeled_rng(seed, "quantize-draws")
    priors = model.priors(x.reshape(rows, n_len))

    def decide(j, p1s):
        if fill_mask[j]:
            return fill_values[:, j]
        return (rng.random(rows) < p1s[0]).astype(np.uint8)

    v, u, _ = sc_process([priors], decide)
    shape = lead + (k, n_len)
    return QuantizedBlocks(
        v.reshape(shape),
        u.reshape(shape),
        provenance={
            "seed_label": (seed, "quantize-draws"),
            "informative_fill": informative_fill,
            "n": index_sets.params.n,
            "beta": index_sets.params.beta,
            "set_sizes": {
                "v_u": int(index_sets.v_u.size),
                "v_u_given_x": int(vux.size),
                "h_u": int(index_sets.h_u.size),
            },
        },
    )


def quantize_decoupled(
    x_blocks: np.ndarray,
    index_sets: IndexSets,
    budget: RandomBudget,
    model_x: ObservationModel,
    model_marginal: ObservationModel,
    seed: int,
) -> QuantizedBlocks:
    """Per-block decoupled variant used as a test oracle.

    Differs from :func:`quantize` in two ways: the shared ``r1`` is
    replaced by fresh per-block ``rcheck`` bits, and the almost-determined
    positions (outside the high-entropy set) are set deterministically to
    the most likely bit under the *unconditioned* law, ties to 0.  Only
    the remaining positions are drawn from the conditional given X.
    """
    x, lead, k, n_len = _as_batched(x_blocks)
    if n_len != index_sets.block_len:
        raise LengthMismatchError("block length does not match index sets")
    vux = index_sets.v_u_given_x
    vu_extra = np.setdiff1d(index_sets.v_u, vux)
    _, rbar, rcheck = _check_budget(budget, lead, k, vux.size, vu_extra.size, True)

    rows = x.shape[0] * k
    fill_mask = np.zeros(n_len, dtype=bool)
    fill_values = np.zeros((rows, n_len), dtype=np.uint8)
    fill_mask[vux] = True
    fill_values[:, vux] = rcheck.reshape(rows, vux.size)
    fill_mask[vu_extra] = True
    fill_values[:, vu_extra] = rbar.reshape(rows, vu_extra.size)
    hu_mask = index_sets.mask(index_sets.h_u)

    rng = labeled_rng(seed, "quantize-oracle-draws")
    priors_x = model_x.priors(x.reshape(rows, n_len))
    priors_m = np.broadcast_to(
        model_marginal.priors(np.zeros(n_len, dtype=np.intp))[None, :], (rows, n_len)
    )

    def decide(j, p1s):
        if fill_mask[j]:
            return fill_values[:, j]
        if hu_mask[j]:
            return (rng.random(rows) < p1s[0]).astype(np.uint8)
        # most likely bit under the unconditioned law; reads no X
        return (p1s[1] > 0.5).astype(np.uint8)

    v, u, _ = sc_process([priors_x, priors_m], decide)
    shape = lead + (k, n_len)
    return QuantizedBlocks(
        v.reshape(shape), u.reshape(shape),
        provenance={"seed_label": (seed, "quantize-oracle-draws"), "variant": "decoupled"},
    )


@dataclass(frozen=True)
class SingleEncodeResult:
    quantized: QuantizedBlocks
    messages: np.ndarray       # (..., k, W) message bits per block
    r1: np.ndarray             # public dither
    rate: float                # (k W + |V_(U|X)|) / (k N)


def encode_single(
    x_blocks: np.ndarray,
    index_sets: IndexSets,
    decoder_set,
    budget: RandomBudget,
    model: ObservationModel,
    seed: int,
) -> SingleEncodeResult:
    """Quantize and extract the public message for one decoder."""
    dec = frozenset(decoder_set)
    h_set = set(index_sets.frozen_for(dec).tolist())
    if not set(index_sets.v_u_given_x.tolist()) <= h_set:
        raise InclusionViolationError("V_(U|X) must be contained in the decoder's frozen set")
    q = quantize(x_blocks, index_sets, budget, model, seed, informative_fill=FILL_CONDITIONAL)
    msg_idx = index_sets.message_indices(dec)
    messages = q.v[..., msg_idx]
    k = q.v.shape[-2]
    n_len = q.v.shape[-1]
    rate = (k * msg_idx.size + index_sets.v_u_given_x.size) / (k * n_len)
    return SingleEncodeResult(q, messages, np.asarray(budget.r1), rate)


def assemble_frozen(
    index_sets: IndexSets,
    decoder_set,
    messages: np.ndarray,
    r1: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Interleave ``r1`` and message bits onto the decoder's frozen set.

    Returns (frozen_mask, frozen_values) with ``frozen_values`` shaped
    like ``messages`` broadcast onto the full block length.
    """
    dec = frozenset(decoder_set)
    frozen_idx = index_sets.frozen_for(dec)
    msg_idx = index_sets.message_indices(dec)
    vux = index_sets.v_u_given_x
    n_len = index_sets.block_len
    msgs = np.asarray(messages, dtype=np.uint8)
    if msgs.shape[-1] != msg_idx.size:
        raise LengthMismatchError(
            f"message carries {msgs.shape[-1]} bits, expected {msg_idx.size}"
        )
    lead = msgs.shape[:-1]
    r1a = np.asarray(r1, dtype=np.uint8)
    if r1a.ndim > 1:
        # r1 is per codec instance; insert the block axis before broadcasting
        r1a = r1a[..., None, :]
    r1b = np.broadcast_to(r1a, lead + (vux.size,))
    values = np.zeros(lead + (n_len,), dtype=np.uint8)
    values[..., msg_idx] = msgs
    values[..., vux] = r1b
    mask = np.zeros(n_len, dtype=bool)
    mask[frozen_idx] = True
    return mask, values


def decode_single(
    messages: np.ndarray,
    r1: np.ndarray,
    side_blocks: np.ndarray,
    index_sets: IndexSets,
    decoder_set,
    model: ObservationModel,
) -> np.ndarray:
    """Reconstruct the quantized blocks from (messages, r1, side info).

    ``side_blocks`` holds flat side indices shaped (..., k, N) and
    ``messages`` the per-block message bits shaped (..., k, W).
    """
    side = np.asarray(side_blocks, dtype=np.intp)
    msgs = np.asarray(messages, dtype=np.uint8)
    if side.shape[:-1] != msgs.shape[:-1]:
        raise LengthMismatchError("side blocks and messages disagree on batch shape")
    n_len = index_sets.block_len
    if side.shape[-1] != n_len:
        raise LengthMismatchError("side block length mismatch")
    mask, values = assemble_frozen(index_sets, decoder_set, msgs, r1)
    rows = int(np.prod(side.shape[:-1])) if side.ndim > 1 else 1
    priors = model.priors(side.reshape(rows, n_len))
    _, u_hat = batch_sc_decode(priors, mask, values.reshape(rows, n_len))
    return u_hat.reshape(side.shape)
