"""Monotone access structures over a finite set of participants.

Participants are numbered 1..J.  A family of qualified subsets is kept
monotone (every superset of a qualified set is qualified); the unqualified
family defaults to the full complement of the qualified family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations

from .errors import EmptyQualifiedError, OverlapError


def _all_subsets(j: int):
    members = range(1, j + 1)
    return chain.from_iterable(combinations(members, r) for r in range(j + 1))


def monotone_closure(j: int, family: set[frozenset[int]]) -> set[frozenset[int]]:
    """Smallest monotone family over [1..j] containing ``family``."""
    closed = set()
    for subset in _all_subsets(j):
        fs = frozenset(subset)
        if any(base <= fs for base in family):
            closed.add(fs)
    return closed


@dataclass(frozen=True)
class AccessStructure:
    """Qualified and unqualified participant subsets.

    Immutable after construction; safe to share across threads.
    """

    participants: int
    qualified: frozenset[frozenset[int]]
    unqualified: frozenset[frozenset[int]]
    minimal_qualified: frozenset[frozenset[int]] = field(default=frozenset())

    def qualified_ordered(self) -> list[frozenset[int]]:
        """Qualified sets in a stable (sorted) order, used as decoder order."""
        return sorted(self.qualified, key=lambda s: (len(s), sorted(s)))

    def unqualified_ordered(self) -> list[frozenset[int]]:
        return sorted(self.unqualified, key=lambda s: (len(s), sorted(s)))


def validate_access_structure(
    participants: int,
    qualified,
    unqualified=None,
) -> AccessStructure:
    """Build an :class:`AccessStructure`, applying monotone closure.

    ``qualified`` is any iterable of participant collections.  When
    ``unqualified`` is omitted it defaults to every subset not in the
    (closed) qualified family.  An explicit unqualified set that is
    qualified raises :class:`OverlapError`.
    """
    if participants < 1:
        raise ValueError(f"participant count must be >= 1, got {participants}")
    raw = {frozenset(int(m) for m in s) for s in qualified}
    if not raw:
        raise EmptyQualifiedError("qualified family must be nonempty")
    for s in raw:
        if not s or max(s) > participants or min(s) < 1:
            raise ValueError(f"qualified set {sorted(s)} outside participants 1..{participants}")

    closed = monotone_closure(participants, raw)

    if unqualified is None:
        unq = {frozenset(s) for s in _all_subsets(participants)} - closed
    else:
        unq = {frozenset(int(m) for m in s) for s in unqualified}
        overlap = unq & closed
        if overlap:
            bad = sorted(sorted(s) for s in overlap)
            raise OverlapError(f"sets both qualified and unqualified: {bad}")

    minimal = frozenset(
        s for s in closed if not any(o < s for o in closed)
    )
    return AccessStructure(
        participants=participants,
        qualified=frozenset(closed),
        unqualified=frozenset(unq),
        minimal_qualified=minimal,
    )
