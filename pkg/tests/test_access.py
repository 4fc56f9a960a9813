import pytest

from polarshare import validate_access_structure
from polarshare.access import monotone_closure
from polarshare.errors import EmptyQualifiedError, OverlapError


def test_closure_adds_supersets():
    st = validate_access_structure(3, [{1, 2}, {2, 3}])
    assert frozenset({1, 2, 3}) in st.qualified
    assert st.qualified == {frozenset({1, 2}), frozenset({2, 3}), frozenset({1, 2, 3})}


def test_default_unqualified_is_complement():
    st = validate_access_structure(3, [{1, 2}, {2, 3}])
    expected = {frozenset(), frozenset({1}), frozenset({2}), frozenset({3}),
                frozenset({1, 3})}
    assert st.unqualified == expected


def test_single_participant():
    st = validate_access_structure(1, [{1}])
    assert st.unqualified == {frozenset()}


def test_explicit_unqualified_accepted_unchanged():
    st = validate_access_structure(2, [{1, 2}], [{1}, {2}])
    assert st.qualified == {frozenset({1, 2})}
    assert st.unqualified == {frozenset({1}), frozenset({2})}


def test_overlap_rejected():
    with pytest.raises(OverlapError):
        validate_access_structure(2, [{1}], [{1, 2}])


def test_empty_qualified_rejected():
    with pytest.raises(EmptyQualifiedError):
        validate_access_structure(2, [])


def test_closure_idempotent():
    base = {frozenset({1, 2}), frozenset({3})}
    once = monotone_closure(4, base)
    assert monotone_closure(4, once) == once


def test_minimal_sets():
    st = validate_access_structure(3, [{1, 2}, {2, 3}])
    assert st.minimal_qualified == {frozenset({1, 2}), frozenset({2, 3})}


def test_participant_range_checked():
    with pytest.raises(ValueError):
        validate_access_structure(2, [{3}])
