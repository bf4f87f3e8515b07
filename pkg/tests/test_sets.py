import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellhv.sets import IntervalSet, PointSet

TWO_PI = 2 * math.pi


def test_canonical_merges_and_sorts():
    s = IntervalSet(((0.5, 0.7), (0.1, 0.3), (0.3, 0.4), (0.65, 0.9)))
    assert s.intervals == ((0.1, 0.4), (0.5, 0.9))


def test_zero_length_pieces_dropped():
    assert IntervalSet(((0.0, 0.0), (0.2, 0.2))).is_empty
    assert IntervalSet(((0.0, 0.0), (0.0, 0.5))).intervals == ((0.0, 0.5),)


def test_clipped_to_domain():
    assert IntervalSet(((-1.0, 0.5),)).intervals == ((0.0, 0.5),)


def test_complement_and_measure():
    s = IntervalSet(((0.0, 0.25), (0.5, 0.75)))
    assert s.complement().intervals == ((0.25, 0.5), (0.75, 1.0))
    assert s.measure() + s.complement().measure() == pytest.approx(1.0, abs=1e-15)


def test_intersection():
    a = IntervalSet(((0.0, 0.25), (0.5, 0.75)))
    b = IntervalSet(((0.0, 0.5),))
    assert (a & b).intervals == ((0.0, 0.25),)
    assert (a - b).intervals == ((0.5, 0.75),)


def test_arc_wraps():
    arc = IntervalSet.arc(-math.pi / 2, math.pi / 2)
    assert arc.isclose(IntervalSet(((0.0, math.pi / 2), (1.5 * math.pi, TWO_PI)), (0.0, TWO_PI)))
    assert arc.measure() == pytest.approx(math.pi)


def test_arc_full_turn():
    assert IntervalSet.arc(1.0, 1.0 + TWO_PI) == IntervalSet.full((0.0, TWO_PI))


def test_domain_mismatch():
    with pytest.raises(ValueError):
        IntervalSet.full((0, 1)) & IntervalSet.full((0, TWO_PI))


def test_pointset_ops():
    u = ("a", "b", "c", "d")
    s = PointSet(frozenset({"a", "b"}), u)
    t = PointSet(frozenset({"b", "c"}), u)
    assert (s & t).points == {"b"}
    assert (s | t).points == {"a", "b", "c"}
    assert (~s).points == {"c", "d"}
    assert s.measure() == 2.0
    with pytest.raises(ValueError):
        PointSet(frozenset({"z"}), u)


boundaries = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=0, max_size=10)


def _from_cuts(cuts):
    cuts = sorted(cuts)
    return IntervalSet(tuple(zip(cuts[0::2], cuts[1::2])))


@settings(max_examples=200)
@given(boundaries, boundaries)
def test_partition_identities(c1, c2):
    # (S- & S'+) | (S+ & S'+) = S'+  and  (S+ & S'-) | (S+ & S'+) = S+
    sp = _from_cuts(c1)
    sm = sp.complement()
    sp2 = _from_cuts(c2)
    sm2 = sp2.complement()
    assert ((sm & sp2) | (sp & sp2)).isclose(sp2, 1e-12)
    assert ((sp & sm2) | (sp & sp2)).isclose(sp, 1e-12)
    assert (sp & sm).is_empty
    assert (sp | sm) == IntervalSet.full()


@settings(max_examples=200)
@given(boundaries, boundaries)
def test_measure_inclusion_exclusion(c1, c2):
    a, b = _from_cuts(c1), _from_cuts(c2)
    lhs = (a | b).measure()
    rhs = a.measure() + b.measure() - (a & b).measure()
    assert lhs == pytest.approx(rhs, abs=1e-12)
