"""Shared fixtures; the expensive constructions are session-scoped."""

import numpy as np
import pytest

from polarshare import (
    PolarParams,
    build_index_sets,
    entropy_profile_mc,
    identity_channel,
    make_bss_source,
)
from polarshare.sources import model_no_side, model_side_x, model_side_y


def binary_entropy(p: float) -> float:
    """Independent oracle used throughout the suite."""
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


@pytest.fixture(scope="session")
def example1_construction():
    """U = X over the p = 0.15 single-participant source at N = 1024."""
    src = make_bss_source(1, [0.15])
    ch = identity_channel()
    params = PolarParams(10, 0.3)
    n_len = params.block_len
    profiles = {
        "none": entropy_profile_mc(model_no_side(src, ch), n_len, 40000, 101),
        "x": entropy_profile_mc(model_side_x(src, ch), n_len, 40000, 102),
        frozenset([1]): entropy_profile_mc(model_side_y(src, ch, [1]), n_len, 40000, 103),
    }
    sets = build_index_sets(profiles, params)
    return src, ch, params, sets, profiles
