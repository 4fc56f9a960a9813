"""Dealer/participant source models.

A :class:`JointSource` is the exact pmf of (X, Y_1..Y_J) with binary X and
finite per-participant alphabets.  A :class:`TestChannel` attaches the
binary auxiliary kernel p(u|x), and optionally a second layer p(v|u,x) for
the two-auxiliary scheme.  Observation models bind a source, a channel and
one conditioning side (nothing, X, or Y_A) into the per-position joint law
the polarization engine works with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .access import AccessStructure
from .errors import LengthNotPow2Error, ParamRangeError
from .util import labeled_rng

PMF_TOL = 1e-12


@dataclass(frozen=True)
class JointSource:
    """Exact pmf of (X, Y_1..Y_J); axis 0 is X, axis j is participant j."""

    pmf: np.ndarray
    y_sizes: tuple[int, ...]

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        object.__setattr__(self, "pmf", pmf)
        if pmf.shape[0] != 2:
            raise ParamRangeError("X alphabet must be {0,1}")
        if pmf.shape[1:] != self.y_sizes:
            raise ParamRangeError("pmf shape does not match participant alphabets")
        if np.any(pmf < 0):
            raise ParamRangeError("pmf has negative entries")
        if abs(pmf.sum() - 1.0) > PMF_TOL:
            raise ParamRangeError(f"pmf sums to {pmf.sum()!r}, not 1")
        pmf.setflags(write=False)

    @property
    def participants(self) -> int:
        return len(self.y_sizes)

    def marginal(self, axes_keep: tuple[int, ...]) -> np.ndarray:
        """Marginal pmf over the given axes (0 = X, j = participant j)."""
        drop = tuple(a for a in range(self.pmf.ndim) if a not in axes_keep)
        return self.pmf.sum(axis=drop)

    def fingerprint(self) -> bytes:
        return np.ascontiguousarray(self.pmf).tobytes()


@dataclass(frozen=True)
class TestChannel:
    """Binary auxiliary kernel(s) attached to a source.

    ``p_u_given_x[x, u]`` is row-stochastic.  For the layered scheme
    ``p_v_given_ux[u, x, v]`` is present and is induced from a chain
    U - V - X when built via :func:`make_layered_channel`.
    """

    p_u_given_x: np.ndarray
    p_v_given_ux: np.ndarray | None = None
    p_v_given_x: np.ndarray | None = None

    def __post_init__(self):
        k = np.asarray(self.p_u_given_x, dtype=float)
        object.__setattr__(self, "p_u_given_x", k)
        if k.shape != (2, 2) or np.any(k < 0) or np.any(k > 1):
            raise ParamRangeError("p(u|x) must be a 2x2 matrix with entries in [0,1]")
        if np.max(np.abs(k.sum(axis=1) - 1.0)) > PMF_TOL:
            raise ParamRangeError("p(u|x) rows must sum to 1")
        if self.p_v_given_ux is not None:
            kv = np.asarray(self.p_v_given_ux, dtype=float)
            object.__setattr__(self, "p_v_given_ux", kv)
            if kv.shape != (2, 2, 2) or np.any(kv < 0):
                raise ParamRangeError("p(v|u,x) must be 2x2x2 and nonnegative")
            if np.max(np.abs(kv.sum(axis=2) - 1.0)) > PMF_TOL:
                raise ParamRangeError("p(v|u,x) rows must sum to 1")

    @property
    def layered(self) -> bool:
        return self.p_v_given_ux is not None

    def fingerprint(self) -> bytes:
        parts = [np.ascontiguousarray(self.p_u_given_x).tobytes()]
        if self.p_v_given_ux is not None:
            parts.append(np.ascontiguousarray(self.p_v_given_ux).tobytes())
        return b"|".join(parts)


def bsc_channel(flip_prob: float) -> TestChannel:
    """U = X xor Bernoulli(flip_prob) noise."""
    if not 0.0 <= flip_prob <= 0.5:
        raise ParamRangeError(f"flip probability {flip_prob} outside [0, 1/2]")
    q = flip_prob
    return TestChannel(np.array([[1 - q, q], [q, 1 - q]]))


def identity_channel() -> TestChannel:
    """U = X."""
    return TestChannel(np.eye(2))


def independent_channel() -> TestChannel:
    """U independent of X (uniform)."""
    return TestChannel(np.full((2, 2), 0.5))


def make_layered_channel(p_v_given_x: np.ndarray, p_u_given_v: np.ndarray) -> TestChannel:
    """Two-layer kernel from a chain U - V - X.

    Given p(v|x) and p(u|v), the induced p(u|x) and p(v|u,x) are stored so
    the single-layer machinery applies to the U layer unchanged.
    """
    pv = np.asarray(p_v_given_x, dtype=float)
    pu = np.asarray(p_u_given_v, dtype=float)
    if pv.shape != (2, 2) or pu.shape != (2, 2):
        raise ParamRangeError("layer kernels must be 2x2")
    # p(u|x) = sum_v p(u|v) p(v|x)
    p_u_x = np.einsum("vu,xv->xu", pu, pv)
    # p(v|u,x) = p(u|v) p(v|x) / p(u|x)
    joint_uvx = np.einsum("vu,xv->uxv", pu, pv)  # p(u, v | x) indexed (u, x, v)
    denom = np.where(p_u_x.T[:, :, None] > 0, p_u_x.T[:, :, None], 1.0)
    p_v_ux = joint_uvx / denom
    # u values with zero probability get an arbitrary valid row
    p_v_ux = np.where(p_u_x.T[:, :, None] > 0, p_v_ux, 0.5)
    return TestChannel(p_u_x, p_v_ux, pv)


def make_bss_source(participants: int, flip_probs) -> JointSource:
    """Binary symmetric source: X ~ Bernoulli(1/2), Y_j = X xor N_j.

    The pmf atoms are exact products of the dyadic 1/2 and the (binary
    rational) flip probabilities, accumulated in exact rational arithmetic
    before the final float conversion.
    """
    probs = list(flip_probs)
    if len(probs) != participants:
        raise ParamRangeError("need one flip probability per participant")
    for p in probs:
        if not 0.0 <= p <= 0.5:
            raise ParamRangeError(f"flip probability {p} outside [0, 1/2]")
    fr = [Fraction(p) for p in probs]
    shape = (2,) + (2,) * participants
    pmf = np.zeros(shape, dtype=float)
    for idx in np.ndindex(*shape):
        x, ys = idx[0], idx[1:]
        atom = Fraction(1, 2)
        for j, y in enumerate(ys):
            atom *= fr[j] if y != x else (1 - fr[j])
        pmf[idx] = float(atom)
    return JointSource(pmf, (2,) * participants)


@dataclass(frozen=True)
class SampleBlock:
    """One length-N i.i.d. draw from the source."""

    x: np.ndarray            # (N,) uint8
    y: np.ndarray            # (J, N) int64
    index: int
    seed_label: tuple


def sample(source: JointSource, block_len: int, blocks: int, seed: int) -> list[SampleBlock]:
    """Draw ``blocks`` i.i.d. blocks of ``block_len`` symbols each."""
    if block_len < 1 or block_len & (block_len - 1):
        raise LengthNotPow2Error(f"block length {block_len} is not a power of two")
    rng = labeled_rng(seed, "source-sample")
    flat = source.pmf.ravel()
    draws = rng.choice(flat.size, size=blocks * block_len, p=flat)
    coords = np.unravel_index(draws, source.pmf.shape)
    x = coords[0].astype(np.uint8).reshape(blocks, block_len)
    y = np.stack(coords[1:], axis=0).reshape(source.participants, blocks, block_len)
    return [
        SampleBlock(x[i], y[:, i, :], i, ("source-sample", seed))
        for i in range(blocks)
    ]


# ---------------------------------------------------------------------------
# Observation models: per-position joint law of (binary symbol, side info)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservationModel:
    """Joint law of one binary symbol and one finite side observation.

    ``joint[sym, side]`` sums to 1.  ``side_shape`` records how a raw side
    observation tuple maps onto the flat side index.
    """

    joint: np.ndarray
    side_shape: tuple[int, ...]
    label: str = ""
    _prior1: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        joint = np.asarray(self.joint, dtype=float)
        object.__setattr__(self, "joint", joint)
        if joint.ndim != 2 or joint.shape[0] != 2:
            raise ParamRangeError("observation joint must have shape (2, S)")
        if abs(joint.sum() - 1.0) > 1e-9:
            raise ParamRangeError("observation joint must sum to 1")
        side = joint.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            prior1 = np.where(side > 0, joint[1] / np.where(side > 0, side, 1.0), 0.5)
        object.__setattr__(self, "_prior1", prior1)

    @property
    def side_cardinality(self) -> int:
        return self.joint.shape[1]

    def priors(self, side_idx: np.ndarray) -> np.ndarray:
        """P(symbol = 1 | side) for an array of flat side indices."""
        return self._prior1[np.asarray(side_idx, dtype=np.intp)]

    def sample(self, rng: np.random.Generator, shape) -> tuple[np.ndarray, np.ndarray]:
        """Sample (symbol, side index) arrays of the given shape."""
        flat = self.joint.ravel()
        draws = rng.choice(flat.size, size=int(np.prod(shape)), p=flat)
        sym = (draws // self.joint.shape[1]).astype(np.uint8).reshape(shape)
        side = (draws % self.joint.shape[1]).astype(np.intp).reshape(shape)
        return sym, side

    def flatten_side(self, *side_coords: np.ndarray) -> np.ndarray:
        """Flat side index from raw per-coordinate observations."""
        if len(side_coords) != len(self.side_shape):
            raise ParamRangeError("side coordinate count mismatch")
        if not side_coords:
            return np.zeros(0, dtype=np.intp)
        return np.ravel_multi_index(tuple(np.asarray(c) for c in side_coords), self.side_shape)


def _joint_xu(source: JointSource, channel: TestChannel) -> np.ndarray:
    px = source.marginal((0,))
    return px[:, None] * channel.p_u_given_x  # (x, u)


def model_no_side(source: JointSource, channel: TestChannel) -> ObservationModel:
    """U against a trivial side alphabet."""
    pu = _joint_xu(source, channel).sum(axis=0)
    return ObservationModel(pu[:, None], (), label="u")


def model_side_x(source: JointSource, channel: TestChannel) -> ObservationModel:
    """U with the dealer's X observed."""
    joint = _joint_xu(source, channel).T  # (u, x)
    return ObservationModel(joint, (2,), label="u|x")


def model_side_y(source: JointSource, channel: TestChannel, members) -> ObservationModel:
    """U with the observations of participant set ``members`` as side info."""
    members = sorted(members)
    axes = (0,) + tuple(members)
    p_x_y = source.marginal(axes)  # (x, y_members...)
    joint = np.einsum("x...,xu->u...", p_x_y, channel.p_u_given_x)
    side_shape = tuple(source.y_sizes[m - 1] for m in members)
    flat = joint.reshape(2, -1) if members else joint.reshape(2, 1)
    return ObservationModel(flat, side_shape, label=f"u|y{members}")


def layer2_model_side_x(source: JointSource, channel: TestChannel) -> ObservationModel:
    """Second-layer symbol V with X observed (encoder side)."""
    if not channel.layered:
        raise ParamRangeError("channel has no second layer")
    px = source.marginal((0,))
    # p(v|x) marginalizes the first layer out of p(v|u,x)
    p_v_x = np.einsum("xu,uxv->xv", channel.p_u_given_x, channel.p_v_given_ux)
    joint = (px[:, None] * p_v_x).T  # (v, x)
    return ObservationModel(joint, (2,), label="v|x")


def layer2_model_side_ux(source: JointSource, channel: TestChannel) -> ObservationModel:
    """Second-layer symbol V with side (U, X), the encoder side.

    Drawing against this model couples the fine layer to the coarse
    blocks through p(v|u,x), which is what keeps the overall joint equal
    to the chain parameterization.
    """
    if not channel.layered:
        raise ParamRangeError("channel has no second layer")
    px = source.marginal((0,))
    # joint over (v, u, x) = p(x) p(u|x) p(v|u,x)
    joint = np.einsum("x,xu,uxv->vux", px, channel.p_u_given_x, channel.p_v_given_ux)
    return ObservationModel(joint.reshape(2, -1), (2, 2), label="v|u,x")


def layer2_model_side_uy(source: JointSource, channel: TestChannel, members) -> ObservationModel:
    """Second-layer symbol V with side (U, Y_members), the decoder side."""
    if not channel.layered:
        raise ParamRangeError("channel has no second layer")
    members = sorted(members)
    axes = (0,) + tuple(members)
    p_x_y = source.marginal(axes)  # (x, y...)
    # joint over (v, u, y...) = sum_x p(x, y) p(u|x) p(v|u,x)
    joint = np.einsum("x...,xu,uxv->vu...", p_x_y, channel.p_u_given_x, channel.p_v_given_ux)
    side_shape = (2,) + tuple(source.y_sizes[m - 1] for m in members)
    return ObservationModel(joint.reshape(2, -1), side_shape, label=f"v|u,y{members}")
