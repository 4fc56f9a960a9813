"""Construction cache: profiles and index sets keyed by their inputs.

A cache entry is invalidated by any change to the source, the channel,
the blocklength parameters, the profiling method, the sample count, or
the profiling seed; hits are byte-identical to recomputation.
"""

from __future__ import annotations

import hashlib
import os
import struct

from . import container
from .polar import (
    EntropyProfile,
    IndexSets,
    PolarParams,
    build_index_sets,
    entropy_profile_exact,
    entropy_profile_mc,
)
from .sources import (
    JointSource,
    TestChannel,
    model_no_side,
    model_side_x,
    model_side_y,
)


def construction_key(
    source: JointSource,
    channel: TestChannel,
    params: PolarParams,
    method: str,
    samples: int,
    seed: int,
) -> str:
    h = hashlib.sha256()
    h.update(source.fingerprint())
    h.update(b"|")
    h.update(channel.fingerprint())
    h.update(struct.pack("<BdQq", params.n, params.beta, samples, seed))
    h.update(method.encode())
    return h.hexdigest()


class ConstructionCache:
    """Directory of serialized (index sets, profiles) records."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)

    def _path(self, key: str) -> str:
        return os.path.join(self.root, key + ".bin")

    def load(self, key: str):
        path = self._path(key)
        if not os.path.exists(path):
            return None
        with open(path, "rb") as fh:
            raw = fh.read()
        off = 0
        (n_records,) = struct.unpack_from("<I", raw, off)
        off += 4
        records = []
        for _ in range(n_records):
            (ln,) = struct.unpack_from("<Q", raw, off)
            off += 8
            records.append(raw[off : off + ln])
            off += ln
        sets = container.load_index_sets(records[0])
        profiles = [container.load_profile(r) for r in records[1:]]
        return sets, profiles

    def store(self, key: str, sets: IndexSets, profiles) -> None:
        blobs = [container.dump_index_sets(sets)]
        blobs += [container.dump_profile(p) for p in profiles]
        path = self._path(key)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(struct.pack("<I", len(blobs)))
            for b in blobs:
                fh.write(struct.pack("<Q", len(b)))
                fh.write(b)
        os.replace(tmp, path)


def build_profiles(
    source: JointSource,
    channel: TestChannel,
    decoder_sets,
    params: PolarParams,
    method: str,
    samples: int,
    seed: int,
) -> dict:
    """Profiles for the no-side, encoder-side and each decoder side."""
    n_len = params.block_len
    models = {"none": model_no_side(source, channel),
              "x": model_side_x(source, channel)}
    for dec in decoder_sets:
        models[frozenset(dec)] = model_side_y(source, channel, dec)
    profiles = {}
    for i, (key, model) in enumerate(sorted(models.items(), key=lambda kv: str(kv[0]))):
        if method == "exact":
            profiles[key] = entropy_profile_exact(model, n_len)
        else:
            profiles[key] = entropy_profile_mc(model, n_len, samples, seed + i)
    return profiles


def construct_index_sets(
    source: JointSource,
    channel: TestChannel,
    decoder_sets,
    params: PolarParams,
    method: str,
    samples: int,
    seed: int,
    cache: ConstructionCache | None = None,
):
    """Build (or load) index sets and their profiles; returns
    (index_sets, profiles dict, cache_hit)."""
    decoder_sets = [frozenset(d) for d in decoder_sets]
    key = construction_key(source, channel, params, method, samples, seed)
    if cache is not None:
        hit = cache.load(key)
        if hit is not None:
            sets, stored = hit
            ordered = sorted(["none", "x"] + decoder_sets, key=str)
            profiles = dict(zip(ordered, stored))
            return sets, profiles, True
    profiles = build_profiles(source, channel, decoder_sets, params, method,
                              samples, seed)
    sets = build_index_sets(profiles, params)
    if cache is not None:
        ordered = sorted(profiles.keys(), key=str)
        cache.store(key, sets, [profiles[k] for k in ordered])
    return sets, profiles, False
