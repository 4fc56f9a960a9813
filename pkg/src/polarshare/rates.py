"""Exact achievable-rate formulas and the binary-symmetric sweep.

Every quantity is a closed-form function of exact single-letter
information measures; nothing here touches the codec.  The sweep walks
the scalar binary-symmetric auxiliary family only, so reported curves
are lower envelopes of the full auxiliary optimization.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .access import AccessStructure, validate_access_structure
from .errors import ParamRangeError
from .info import joint_model, y_group
from .sources import JointSource, TestChannel, bsc_channel, make_bss_source

CSV_SCHEMA_VERSION = "rates.v1"


@dataclass(frozen=True)
class RatePoint:
    """One achievable (public rate, secret rate) pair."""

    rate_public: float
    rate_secret: float
    params: dict

    def __post_init__(self):
        if self.rate_secret < -1e-12 or self.rate_public < -1e-12:
            raise ParamRangeError("rates must be nonnegative")


def _groups(structure: AccessStructure):
    qual = structure.qualified_ordered()
    unq = structure.unqualified_ordered()
    return qual, unq


def rate_prop1(source: JointSource, structure: AccessStructure,
               channel: TestChannel) -> RatePoint:
    """Single-auxiliary rate pair.

    Secret rate: worst qualified advantage over the best unqualified
    set, clamped at zero; public rate: the largest conditional
    description rate over qualified sets.  An empty unqualified family
    contributes zero to the subtrahend.
    """
    model = joint_model(source, channel)
    qual, unq = _groups(structure)
    i_qual = min(model.mutual_information(["U"], [f"Y{j}" for j in sorted(a)]) for a in qual)
    i_unq = max(
        (model.mutual_information(["U"], [f"Y{j}" for j in sorted(u)]) for u in unq if u),
        default=0.0,
    )
    r_s = max(0.0, i_qual - i_unq)
    r_p = max(
        model.mutual_information(["U"], ["X"], [f"Y{j}" for j in sorted(a)]) for a in qual
    )
    return RatePoint(r_p, r_s, {"formula": "single-auxiliary"})


def rate_two_layer(source: JointSource, structure: AccessStructure,
                   channel: TestChannel) -> RatePoint:
    """Two-auxiliary rate pair for a chain-parameterized layered channel.

    With a degenerate first layer this reduces exactly to
    :func:`rate_prop1` of the second-layer kernel.
    """
    if not channel.layered:
        raise ParamRangeError("two-layer rates need a layered channel")
    model = joint_model(source, channel)
    qual, unq = _groups(structure)
    i_qual = min(
        model.mutual_information(["V"], [f"Y{j}" for j in sorted(a)], ["U"]) for a in qual
    )
    i_unq = max(
        (model.mutual_information(["V"], [f"Y{j}" for j in sorted(u)], ["U"])
         for u in unq if u),
        default=0.0,
    )
    r_s = max(0.0, i_qual - i_unq)
    r_p = max(
        model.mutual_information(["U"], ["X"], [f"Y{j}" for j in sorted(a)]) for a in qual
    ) + max(
        model.mutual_information(["V"], ["X"], ["U"] + [f"Y{j}" for j in sorted(a)])
        for a in qual
    )
    return RatePoint(r_p, r_s, {"formula": "two-auxiliary"})


def capacity_all_participants(source: JointSource) -> float:
    """Secret capacity with unlimited public rate when every participant
    is needed: the smallest I(X ; Y_all | Y_S) over strict subsets S."""
    j = source.participants
    structure = validate_access_structure(j, [set(range(1, j + 1))])
    model = joint_model(source, None)
    all_y = [f"Y{i}" for i in range(1, j + 1)]
    best = None
    for u in structure.unqualified_ordered():
        val = model.mutual_information(["X"], all_y, [f"Y{i}" for i in sorted(u)])
        best = val if best is None else min(best, val)
    return float(best)


def skc_no_eavesdropper(source: JointSource, channel: TestChannel) -> RatePoint:
    """One-way key rate, single participant, nobody listening."""
    if source.participants != 1:
        raise ParamRangeError("this setting has exactly one participant")
    model = joint_model(source, channel)
    r_s = model.mutual_information(["Y1"], ["U"])
    r_p = model.mutual_information(["U"], ["X"]) - model.mutual_information(["U"], ["Y1"])
    return RatePoint(max(0.0, r_p), max(0.0, r_s), {"formula": "skc-no-eve"})


def skc_with_eavesdropper(source: JointSource, channel: TestChannel) -> RatePoint:
    """One-way key rate with participant 1 legitimate and participant 2
    eavesdropping; needs the layered (two-auxiliary) kernel."""
    if source.participants != 2:
        raise ParamRangeError("this setting has exactly two participants")
    if not channel.layered:
        raise ParamRangeError("eavesdropper setting needs a layered channel")
    model = joint_model(source, channel)
    r_s = max(0.0, model.mutual_information(["Y1"], ["V"], ["U"])
              - model.mutual_information(["Y2"], ["V"], ["U"]))
    r_p = model.mutual_information(["V"], ["X"]) - model.mutual_information(["V"], ["Y1"])
    return RatePoint(max(0.0, r_p), r_s, {"formula": "skc-eve"})


def sweep_binary_auxiliary(p1: float, p2: float, grid) -> list[RatePoint]:
    """Rate trade-off for the two-factor structure over the scalar
    binary-symmetric auxiliary family.

    Each grid point q attaches the kernel U = X xor Bernoulli(q); the
    no-first-layer two-auxiliary formula then coincides with the
    single-auxiliary one, which is what the sweep tabulates, together
    with the unlimited-rate capacity as the saturation reference.
    """
    source = make_bss_source(2, [p1, p2])
    structure = validate_access_structure(2, [{1, 2}], [{1}, {2}])
    asymptote = capacity_all_participants(source)
    points = []
    for q in grid:
        if not 0.0 <= q <= 0.5:
            raise ParamRangeError(f"grid value {q} outside [0, 1/2]")
        pt = rate_prop1(source, structure, bsc_channel(q))
        points.append(RatePoint(pt.rate_public, pt.rate_secret,
                                {"q": float(q), "asymptote": asymptote}))
    return points


def upper_envelope(points: list[RatePoint]) -> list[RatePoint]:
    """Nondecreasing secret-rate envelope in order of public rate."""
    ordered = sorted(points, key=lambda p: (p.rate_public, p.rate_secret))
    best = -1.0
    out = []
    for p in ordered:
        if p.rate_secret > best:
            best = p.rate_secret
        out.append(RatePoint(p.rate_public, best, p.params))
    return out


def sweep_to_csv(points: list[RatePoint], stream=None) -> str:
    """Write sweep points as CSV (schema version in the header row)."""
    own = stream is None
    stream = stream or io.StringIO()
    writer = csv.writer(stream)
    writer.writerow([f"schema={CSV_SCHEMA_VERSION}", "param", "R_p", "R_s", "asymptote"])
    for i, p in enumerate(points):
        writer.writerow([
            i,
            "%.12g" % p.params.get("q", float("nan")),
            "%.12g" % p.rate_public,
            "%.12g" % p.rate_secret,
            "%.12g" % p.params.get("asymptote", float("nan")),
        ])
    return stream.getvalue() if own else ""
