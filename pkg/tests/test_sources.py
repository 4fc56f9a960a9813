import numpy as np
import pytest

from polarshare import (
    JointSource,
    bsc_channel,
    identity_channel,
    independent_channel,
    make_bss_source,
    make_layered_channel,
    sample,
)
from polarshare.errors import LengthNotPow2Error, ParamRangeError
from polarshare.sources import (
    layer2_model_side_ux,
    layer2_model_side_uy,
    model_no_side,
    model_side_x,
    model_side_y,
)


def test_bss_atom_is_exact_product():
    src = make_bss_source(2, [0.15, 0.15])
    # P(X=0, Y1=0, Y2=0) = 0.5 * 0.85 * 0.85
    assert src.pmf[0, 0, 0] == pytest.approx(0.36125, abs=1e-15)


def test_bss_noiseless_copy():
    src = make_bss_source(1, [0.0])
    assert src.pmf[0, 0] == 0.5 and src.pmf[1, 1] == 0.5
    assert src.pmf[0, 1] == 0.0 and src.pmf[1, 0] == 0.0


def test_bss_param_range():
    with pytest.raises(ParamRangeError):
        make_bss_source(1, [0.7])
    with pytest.raises(ParamRangeError):
        make_bss_source(2, [0.1])


def test_pmf_must_normalize():
    with pytest.raises(ParamRangeError):
        JointSource(np.array([[0.5, 0.4], [0.05, 0.0]]), (2,))


def test_marginals_sum_to_one():
    src = make_bss_source(3, [0.1, 0.2, 0.3])
    for axes in [(0,), (1,), (0, 2), (1, 2, 3)]:
        assert src.marginal(axes).sum() == pytest.approx(1.0, abs=1e-12)


def test_sampling_deterministic_given_seed():
    src = make_bss_source(2, [0.15, 0.15])
    a = sample(src, 8, 3, seed=7)
    b = sample(src, 8, 3, seed=7)
    for ba, bb in zip(a, b):
        assert np.array_equal(ba.x, bb.x) and np.array_equal(ba.y, bb.y)


def test_sampling_noiseless_copies_x():
    src = make_bss_source(1, [0.0])
    blocks = sample(src, 8, 4, seed=3)
    for b in blocks:
        assert np.array_equal(b.y[0], b.x)


def test_sampling_block_len_power_of_two():
    src = make_bss_source(1, [0.1])
    with pytest.raises(LengthNotPow2Error):
        sample(src, 12, 1, seed=0)


def test_sampling_frequency_matches_atom():
    # binomial three-sigma check on the (0,0,0) atom of the two-factor source
    src = make_bss_source(2, [0.15, 0.15])
    n = 1_000_000
    blocks = sample(src, 16, n // 16, seed=11)
    x = np.stack([b.x for b in blocks]).ravel()
    y1 = np.stack([b.y[0] for b in blocks]).ravel()
    y2 = np.stack([b.y[1] for b in blocks]).ravel()
    hits = ((x == 0) & (y1 == 0) & (y2 == 0)).mean()
    p = 0.36125
    sigma = np.sqrt(p * (1 - p) / x.size)
    assert abs(hits - p) <= 3 * sigma


def test_channel_row_stochastic_checked():
    with pytest.raises(ParamRangeError):
        from polarshare.sources import TestChannel
        TestChannel(np.array([[0.9, 0.2], [0.1, 0.9]]))


def test_observation_model_priors():
    src = make_bss_source(1, [0.15])
    m = model_side_x(src, identity_channel())
    # U = X: P(U=1 | x) is x itself
    pr = m.priors(np.array([0, 1, 1, 0]))
    assert np.allclose(pr, [0, 1, 1, 0])


def test_no_side_model_uniform_for_bsc():
    src = make_bss_source(1, [0.15])
    m = model_no_side(src, bsc_channel(0.3))
    assert m.priors(np.zeros(4, dtype=np.intp)) == pytest.approx(0.5)


def test_independent_channel_priors_flat():
    src = make_bss_source(1, [0.15])
    m = model_side_y(src, independent_channel(), [1])
    assert np.allclose(m.priors(np.array([0, 1])), 0.5)


def test_layered_models_consistent():
    src = make_bss_source(2, [0.1, 0.2])
    ch = make_layered_channel(np.array([[0.9, 0.1], [0.1, 0.9]]),
                              np.array([[0.8, 0.2], [0.2, 0.8]]))
    m_ux = layer2_model_side_ux(src, ch)
    m_uy = layer2_model_side_uy(src, ch, [1])
    assert m_ux.joint.sum() == pytest.approx(1.0, abs=1e-12)
    assert m_uy.joint.sum() == pytest.approx(1.0, abs=1e-12)
    # marginal of V agrees between the two side decompositions
    assert np.allclose(m_ux.joint.sum(axis=1), m_uy.joint.sum(axis=1), atol=1e-12)
