"""Address arithmetic on the hierarchical cube tree.

A block of scale j is the cube m * M**j + [0, M**j)**d with m a d-tuple of
non-negative integers.  Drawing edges from each block to the M**d blocks one
scale below turns the block set into a regular M**d-ary tree on the
non-negative orthant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import total_ordering

# Index components are kept exact but bounded; anything larger is almost
# certainly a bug in the caller (135+ scales of refinement).
INDEX_LIMIT = 1 << 128


class IndexRangeError(ValueError):
    """An index component left the representable [0, 2**128) range."""


@dataclass(frozen=True)
class Geometry:
    """Dimension d and subdivision parameter M of the cube hierarchy."""

    d: int
    M: int = 2

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.M < 2:
            raise ValueError(f"subdivision parameter must be >= 2, got {self.M}")

    @property
    def branching(self) -> int:
        """Number of children per block, M**d."""
        return self.M**self.d


@total_ordering
@dataclass(frozen=True)
class Block:
    """A cube of sidelength M**scale with corner index * M**scale."""

    scale: int
    index: tuple[int, ...]

    def __post_init__(self):
        if any(m < 0 for m in self.index):
            raise ValueError(f"index components must be >= 0: {self.index}")
        if any(m >= INDEX_LIMIT for m in self.index):
            raise IndexRangeError(f"index component exceeds 2**128: {self.index}")

    @property
    def d(self) -> int:
        return len(self.index)

    def __lt__(self, other: "Block") -> bool:
        return (self.scale, self.index) < (other.scale, other.index)

    def __str__(self) -> str:
        return format_block(self)


def block(scale: int, *index: int) -> Block:
    """Shorthand constructor."""
    return Block(scale, tuple(index))


def format_block(b: Block) -> str:
    """Canonical textual notation "j:(m1,...,md)"."""
    return f"{b.scale}:({','.join(str(m) for m in b.index)})"


def parse_block(text: str) -> Block:
    """Inverse of :func:`format_block`."""
    try:
        scale_part, index_part = text.split(":", 1)
        index_part = index_part.strip()
        if not (index_part.startswith("(") and index_part.endswith(")")):
            raise ValueError
        index = tuple(int(m) for m in index_part[1:-1].split(","))
        return Block(int(scale_part), index)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"not a block literal {text!r}; expected 'j:(m1,...,md)'") from exc


def parent(b: Block, geo: Geometry) -> Block:
    """The unique block one scale up containing b."""
    return Block(b.scale + 1, tuple(m // geo.M for m in b.index))


def ancestor_at(b: Block, scale: int, geo: Geometry) -> Block:
    """The unique block of the given scale >= b.scale containing b."""
    if scale < b.scale:
        raise ValueError(f"scale {scale} below block scale {b.scale}")
    shift = geo.M ** (scale - b.scale)
    return Block(scale, tuple(m // shift for m in b.index))


def children(b: Block, geo: Geometry) -> list[Block]:
    """The M**d blocks one scale below b, in lexicographic order."""
    base = tuple(m * geo.M for m in b.index)
    if any(m + geo.M - 1 >= INDEX_LIMIT for m in base):
        raise IndexRangeError(f"child index of {b} exceeds 2**128")
    return [
        Block(b.scale - 1, tuple(bm + off for bm, off in zip(base, offs)))
        for offs in itertools.product(range(geo.M), repeat=geo.d)
    ]


def contains(outer: Block, inner: Block, geo: Geometry) -> bool:
    """Whether outer contains inner (every block contains itself)."""
    if outer.scale < inner.scale:
        return False
    return ancestor_at(inner, outer.scale, geo) == outer


def overlaps(b1: Block, b2: Block, geo: Geometry) -> bool:
    """Two blocks intersect iff one contains the other."""
    return contains(b1, b2, geo) or contains(b2, b1, geo)


def lcs(b1: Block, b2: Block, geo: Geometry) -> int:
    """Lowest scale at which a single block covers both b1 and b2."""
    j = max(b1.scale, b2.scale)
    a1, a2 = ancestor_at(b1, j, geo), ancestor_at(b2, j, geo)
    while a1 != a2:
        j += 1
        a1, a2 = parent(a1, geo), parent(a2, geo)
    return j


def covering_block(b1: Block, b2: Block, geo: Geometry) -> Block:
    """The smallest block containing both b1 and b2."""
    return ancestor_at(b1, lcs(b1, b2, geo), geo)


def hierarchical_distance(b1: Block, b2: Block, geo: Geometry) -> float:
    """Ultrametric D(b1,b2) = M**(d*lcs), zero on the diagonal."""
    if b1 == b2:
        return 0.0
    try:
        return float(geo.M ** (geo.d * lcs(b1, b2, geo)))
    except OverflowError:
        return math.inf


def ancestors(b: Block, up_to_scale: int, geo: Geometry) -> list[Block]:
    """The chain of blocks strictly above b, up to and including the given scale."""
    chain = []
    cur = b
    while cur.scale < up_to_scale:
        cur = parent(cur, geo)
        chain.append(cur)
    return chain


def descendants(b: Block, down_to_scale: int, geo: Geometry) -> list[Block]:
    """All blocks contained in b with scale >= down_to_scale, b included."""
    out = [b]
    frontier = [b]
    while frontier and frontier[0].scale > down_to_scale:
        frontier = [c for f in frontier for c in children(f, geo)]
        out.extend(frontier)
    return out
