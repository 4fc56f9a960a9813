import itertools

import numpy as np
import pytest

from conftest import binary_entropy
from polarshare import exact_info, joint_model, y_group
from polarshare import (
    bsc_channel,
    identity_channel,
    independent_channel,
    make_bss_source,
    make_layered_channel,
)
from polarshare.errors import UnknownExpressionError
from polarshare.sources import JointSource


def test_identity_channel_conditional_info():
    # U = X: I(U;X|Y1) = H(X|Y1) = h_b(0.15)
    src = make_bss_source(1, [0.15])
    val = exact_info(src, identity_channel(), ["I(U;X|Y{1})"])["I(U;X|Y{1})"]
    assert val == pytest.approx(binary_entropy(0.15), abs=1e-12)


def test_independent_channel_zero_info():
    src = make_bss_source(2, [0.15, 0.2])
    out = exact_info(src, independent_channel(),
                     ["I(U;Y{1})", "I(U;Y{1,2})", "I(U;X|Y{1})"])
    for v in out.values():
        assert v == pytest.approx(0.0, abs=1e-12)


def test_full_noise_channel_independence():
    src = make_bss_source(1, [0.5])
    val = exact_info(src, identity_channel(), ["I(U;Y{1})"])["I(U;Y{1})"]
    assert val == pytest.approx(0.0, abs=1e-12)


def test_two_factor_min_formula_brute_force():
    # min(I(X;Y12|Y1), I(X;Y12|Y2)) collapses by symmetry to
    # H(X|Y1) - H(X|Y1Y2), checked against an eight-atom enumeration
    src = make_bss_source(2, [0.15, 0.15])
    model = joint_model(src, None)
    lhs = min(
        model.mutual_information(["X"], ["Y1", "Y2"], ["Y1"]),
        model.mutual_information(["X"], ["Y1", "Y2"], ["Y2"]),
    )
    # direct enumeration oracle
    pmf = src.pmf
    def h(dist):
        dist = dist[dist > 0]
        return float(-(dist * np.log2(dist)).sum())
    p_y1 = pmf.sum(axis=(0, 2))
    h_x_y1 = h(pmf.sum(axis=2).ravel()) - h(p_y1)
    h_x_y12 = h(pmf.ravel()) - h(pmf.sum(axis=0).ravel())
    assert lhs == pytest.approx(h_x_y1 - h_x_y12, abs=1e-12)


def test_markov_chain_identity():
    # I(U;X|Y_A) = H(U|Y_A) - H(U|X) whenever U - X - Y_A
    rng = np.random.default_rng(5)
    for _ in range(20):
        probs = rng.uniform(0.05, 0.45, size=2)
        q = rng.uniform(0.0, 0.5)
        src = make_bss_source(2, probs.tolist())
        ch = bsc_channel(q)
        for members in ([1], [2], [1, 2]):
            g = y_group(members)
            out = exact_info(src, ch, [f"I(U;X|{g})", f"H(U|{g})", "H(U|X)"])
            assert out[f"I(U;X|{g})"] == pytest.approx(
                out[f"H(U|{g})"] - out["H(U|X)"], abs=1e-10)


def test_product_source_zero_mi():
    # X independent of Y: exact_info returns I(U;Y)=0 for every U
    pmf = np.outer([0.4, 0.6], [0.3, 0.7]).reshape(2, 2)
    src = JointSource(pmf, (2,))
    for q in (0.0, 0.2, 0.5):
        val = exact_info(src, bsc_channel(q), ["I(U;Y{1})"])["I(U;Y{1})"]
        assert val == pytest.approx(0.0, abs=1e-12)


def test_v_layer_expressions():
    src = make_bss_source(2, [0.1, 0.2])
    ch = make_layered_channel(np.array([[0.9, 0.1], [0.1, 0.9]]),
                              np.array([[0.85, 0.15], [0.15, 0.85]]))
    out = exact_info(src, ch, ["I(V;Y{1}|U)", "I(V;X|U,Y{1})", "H(V|U,Y{1})", "H(V|U,X)"])
    assert out["I(V;X|U,Y{1})"] == pytest.approx(
        out["H(V|U,Y{1})"] - out["H(V|U,X)"], abs=1e-10)


def test_unknown_expression():
    src = make_bss_source(1, [0.1])
    with pytest.raises(UnknownExpressionError):
        exact_info(src, identity_channel(), ["I(U,X)"])
    with pytest.raises(UnknownExpressionError):
        exact_info(src, identity_channel(), ["H(W|X)"])
    with pytest.raises(UnknownExpressionError):
        exact_info(src, identity_channel(), ["H(V|X)"])  # no second layer


def test_empty_group_means_unconditional():
    src = make_bss_source(1, [0.15])
    out = exact_info(src, identity_channel(), ["H(U|Y{})", "H(U|Y{1})"])
    assert out["H(U|Y{})"] == pytest.approx(1.0, abs=1e-12)
    assert out["H(U|Y{1})"] == pytest.approx(binary_entropy(0.15), abs=1e-12)
