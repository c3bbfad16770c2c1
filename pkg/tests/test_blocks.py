import math

import pytest
from hypothesis import given, strategies as st

from hiercubes.blocks import (Block, Geometry, IndexRangeError, ancestor_at,
                              ancestors, block, children, contains,
                              covering_block, descendants, format_block,
                              hierarchical_distance, lcs, overlaps, parent,
                              parse_block)

GEOS = st.sampled_from([Geometry(1), Geometry(2), Geometry(1, 3), Geometry(3)])


@st.composite
def geo_and_block(draw, max_scale=6, min_scale=-6):
    geo = draw(GEOS)
    scale = draw(st.integers(min_scale, max_scale))
    index = tuple(draw(st.integers(0, 2 ** 10)) for _ in range(geo.d))
    return geo, Block(scale, index)


@st.composite
def geo_and_two_blocks(draw):
    geo = draw(GEOS)
    def blk():
        scale = draw(st.integers(-5, 5))
        return Block(scale, tuple(draw(st.integers(0, 64)) for _ in range(geo.d)))
    return geo, blk(), blk()


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry(0)
    with pytest.raises(ValueError):
        Geometry(1, 1)
    assert Geometry(2, 3).branching == 9


def test_block_validation():
    with pytest.raises(ValueError):
        Block(0, (-1,))
    with pytest.raises(IndexRangeError):
        Block(0, (1 << 200,))


def test_format_parse_examples():
    b = block(-2, 3)
    assert format_block(b) == "-2:(3)"
    assert parse_block("-2:(3)") == b
    assert parse_block("1:(2,5)") == block(1, 2, 5)
    with pytest.raises(ValueError):
        parse_block("nonsense")


@given(geo_and_block())
def test_format_parse_roundtrip(gb):
    _, b = gb
    assert parse_block(format_block(b)) == b


@given(geo_and_block())
def test_parent_children_roundtrip(gb):
    geo, b = gb
    kids = children(b, geo)
    assert len(kids) == geo.branching
    assert len(set(kids)) == geo.branching
    for c in kids:
        assert parent(c, geo) == b
        assert contains(b, c, geo)


@given(geo_and_block())
def test_ancestor_at_is_iterated_parent(gb):
    geo, b = gb
    up = b
    for s in range(b.scale + 1, b.scale + 4):
        up = parent(up, geo)
        assert ancestor_at(b, s, geo) == up


@given(geo_and_two_blocks())
def test_contains_is_partial_order(gbb):
    geo, b1, b2 = gbb
    assert contains(b1, b1, geo)
    if contains(b1, b2, geo) and contains(b2, b1, geo):
        assert b1 == b2
    if contains(b1, b2, geo):
        assert b1.scale >= b2.scale


@given(geo_and_two_blocks())
def test_overlap_iff_nested(gbb):
    geo, b1, b2 = gbb
    assert overlaps(b1, b2, geo) == (contains(b1, b2, geo) or contains(b2, b1, geo))


@given(geo_and_two_blocks())
def test_lcs_symmetric_and_covering(gbb):
    geo, b1, b2 = gbb
    s = lcs(b1, b2, geo)
    assert s == lcs(b2, b1, geo)
    cover = covering_block(b1, b2, geo)
    assert cover.scale == s
    assert contains(cover, b1, geo) and contains(cover, b2, geo)
    if s > max(b1.scale, b2.scale):
        # minimality: one scale lower no longer covers both
        assert ancestor_at(b1, s - 1, geo) != ancestor_at(b2, s - 1, geo)


@given(geo_and_two_blocks())
def test_distance_ultrametric(gbb):
    geo, b1, b2 = gbb
    d12 = hierarchical_distance(b1, b2, geo)
    assert d12 == hierarchical_distance(b2, b1, geo)
    assert hierarchical_distance(b1, b1, geo) == 0.0
    if b1 != b2:
        assert d12 >= float(geo.M) ** (geo.d * max(b1.scale, b2.scale))


@st.composite
def geo_and_three_blocks(draw):
    geo = draw(GEOS)
    def blk():
        scale = draw(st.integers(-5, 5))
        return Block(scale, tuple(draw(st.integers(0, 64)) for _ in range(geo.d)))
    return geo, blk(), blk(), blk()


@given(geo_and_three_blocks())
def test_distance_ultrametric_triangle(gbbb):
    geo, b1, b2, b3 = gbbb
    d = hierarchical_distance
    if b1 != b2:
        assert d(b1, b2, geo) <= max(d(b1, b3, geo), d(b3, b2, geo))


def test_distance_dominates_euclidean_gap():
    # hierarchical distance of adjacent-but-separated unit cells across the
    # half split is the full window volume
    geo = Geometry(1)
    assert hierarchical_distance(block(-2, 1), block(-2, 2), geo) == 1.0
    assert hierarchical_distance(block(-2, 0), block(-2, 1), geo) == 0.5


def test_ancestors_strict_chain():
    geo = Geometry(1)
    chain = ancestors(block(-2, 3), 0, geo)
    assert chain == [block(-1, 1), block(0, 0)]


def test_descendants_count():
    geo = Geometry(2)
    desc = descendants(block(0, 0, 0), -2, geo)
    assert len(desc) == 1 + 4 + 16


def test_ordering_sorts_by_scale_then_index():
    bs = sorted([block(0, 0), block(-1, 1), block(-1, 0)])
    assert bs == [block(-1, 0), block(-1, 1), block(0, 0)]
