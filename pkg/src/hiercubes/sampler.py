"""Exact samplers for the hierarchical measure and fractal percolation.

All randomness comes from a counter-based generator: a keyed blake2b hash of
(seed, sample index, block) mapped to a uniform in [0,1).  Draws are therefore
a pure function of their coordinates, so serial and parallel runs, and any
chunking of a batch, produce bit-identical results.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .blocks import Block, Geometry, children, contains, format_block, overlaps
from .activities import ActivityModel
from .analytics import (TruncatedSystem, UncertifiedComputation,
                        check_condition_ii, scale_profile)
from .logreal import log1p_exp

CHAIN_TAIL_CUT = 1e-14


class InvalidConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class Configuration:
    """A sampled configuration: pairwise disjoint blocks inside a window.

    `covered_by_ancestor` is set (to the covering scale) only in
    infinite-volume mode, when an ancestor of the window is occupied; the
    block list is then empty.
    """

    blocks: tuple
    window: Block
    depth: int
    seed: int
    covered_by_ancestor: Optional[int] = None

    def validate(self, geo: Geometry) -> None:
        bs = list(self.blocks)
        if self.covered_by_ancestor is not None and bs:
            raise InvalidConfiguration("covered configurations carry no blocks")
        for i, b1 in enumerate(bs):
            if b1.scale < -self.depth or not contains(self.window, b1, geo):
                raise InvalidConfiguration(f"block {b1} outside the truncated system")
            for b2 in bs[i + 1:]:
                if overlaps(b1, b2, geo):
                    raise InvalidConfiguration(f"blocks {b1} and {b2} overlap")

    def to_json_obj(self) -> dict:
        obj = {"window": format_block(self.window), "depth": self.depth,
               "seed": self.seed,
               "blocks": [format_block(b) for b in self.blocks]}
        if self.covered_by_ancestor is not None:
            obj["covered_by_ancestor"] = self.covered_by_ancestor
        return obj


def _make_config(blocks: Iterable[Block], window: Block, depth: int, seed: int,
                 geo: Geometry, covered: Optional[int] = None) -> Configuration:
    cfg = Configuration(tuple(sorted(blocks)), window, depth, seed, covered)
    cfg.validate(geo)
    return cfg


# ---------------------------------------------------------------------------
# counter-based uniforms
# ---------------------------------------------------------------------------

def _uniform(seed: int, index: int, *tokens) -> float:
    """Deterministic uniform in [0,1) keyed by (seed, sample index, tokens)."""
    h = hashlib.blake2b(digest_size=8,
                        key=(seed & (2**64 - 1)).to_bytes(8, "little"))
    h.update(index.to_bytes(8, "little", signed=True))
    for t in tokens:
        h.update(repr(t).encode())
        h.update(b"\x1f")
    return (int.from_bytes(h.digest(), "little") >> 11) * 2.0**-53


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _sample_topdown(ratio: Callable[[Block], float], geo: Geometry,
                    window: Block, depth: int, seed: int, index: int) -> list[Block]:
    out: list[Block] = []
    stack = [window]
    while stack:
        b = stack.pop()
        if _uniform(seed, index, "occ", b.scale, b.index) < ratio(b):
            out.append(b)                      # occupied: prune the subtree
        elif b.scale > -depth:
            stack.extend(children(b, geo))
    return out


def sample_gibbs(model: ActivityModel, window: Block, depth: int, seed: int,
                 index: int = 0) -> Configuration:
    """One draw from the law of the doubly truncated system.

    Top-down: occupy each visited block with its occupation ratio (computed
    from the truncated activity, so the sampled law is exactly the truncated
    one); recurse into the children otherwise.
    """
    sys = TruncatedSystem(model, window, depth)
    blocks = _sample_topdown(sys.rho, model.geometry, window, depth, seed, index)
    return _make_config(blocks, window, depth, seed, model.geometry)


def sample_mandelbrot(p: float, geo: Geometry, window: Block, depth: int,
                      seed: int, index: int = 0) -> Configuration:
    """Truncated fractal percolation: constant retention probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be a probability, got {p}")
    blocks = _sample_topdown(lambda b: p, geo, window, depth, seed, index)
    return _make_config(blocks, window, depth, seed, geo)


def sample_bernoulli_max(ratios: dict[Block, float], geo: Geometry,
                         window: Block, depth: int, seed: int,
                         index: int = 0) -> Configuration:
    """Cross-validation sampler: independent Bernoulli draws on every block,
    keeping only the maximal occupied ones.  Distributionally identical to
    the pruned top-down sampler for the same ratios."""
    occupied = [b for b, r in ratios.items()
                if _uniform(seed, index, "occ", b.scale, b.index) < r]
    occ = set(occupied)
    maximal = [b for b in occupied
               if not any(o != b and contains(o, b, geo) for o in occ)]
    return _make_config(maximal, window, depth, seed, geo)


def ancestor_chain_cdf(model: ActivityModel, window: Block,
                       depth: int, tail_cut: float = CHAIN_TAIL_CUT
                       ) -> tuple[list[tuple[int, float]], float]:
    """Law of the lowest occupied strict ancestor of the window.

    Returns ([(scale, prob)], p_none) with p(k) = rho_k * prod_{l>k}(1-rho_l)
    and p_none the convergent product of (1-rho_l); the scan stops when the
    remaining tail mass is below `tail_cut`.
    """
    geo = model.geometry
    j0 = window.scale
    j_hi = j0 + 1
    # extend until the remaining zhat tail (which bounds the remaining chain
    # mass) drops below the cut
    prof = scale_profile(model, j0 + 200, depth=depth)
    j_hi = prof.j_hi
    while j_hi > j0 + 1 and (prof.log_zhat[j_hi] == -math.inf
                             or prof.log_zhat[j_hi] < math.log(tail_cut) - 1):
        j_hi -= 1
    j_hi = min(j_hi + 1, prof.j_hi)
    log_none_above = 0.0
    rows = []
    for k in range(j_hi, j0, -1):
        lzh = prof.log_zhat[k]
        if lzh == -math.inf:
            rows.append((k, 0.0))
            continue
        log_rho = lzh - log1p_exp(lzh)
        rows.append((k, math.exp(log_rho + log_none_above)))
        log_none_above += -log1p_exp(lzh)
    p_none = math.exp(log_none_above)
    rows.reverse()
    return rows, p_none


def sample_gibbs_infinite(model: ActivityModel, window: Block, depth: int,
                          seed: int, index: int = 0) -> Configuration:
    """One draw from the infinite-volume measure, seen through a window.

    First inverts the CDF of the lowest occupied strict ancestor of the
    window; when an ancestor is occupied the draw reports only the covering
    scale, otherwise the finite sampler runs inside the window.
    """
    cii = check_condition_ii(model)
    if not cii.holds:
        raise UncertifiedComputation(
            f"infinite-volume sampling refused: condition (ii) is "
            f"'{cii.status}' ({cii.detail})")
    geo = model.geometry
    rows, p_none = ancestor_chain_cdf(model, window, depth)
    u = _uniform(seed, index, "chain", window.scale, window.index)
    acc = p_none
    if u < acc:
        sys = TruncatedSystem(model, window, depth)
        blocks = _sample_topdown(sys.rho, geo, window, depth, seed, index)
        return _make_config(blocks, window, depth, seed, geo)
    for k, pk in rows:
        acc += pk
        if u < acc:
            return _make_config([], window, depth, seed, geo, covered=k)
    return _make_config([], window, depth, seed, geo, covered=rows[-1][0])


# ---------------------------------------------------------------------------
# batch estimation
# ---------------------------------------------------------------------------

@dataclass
class SampleBatch:
    """Aggregated hit counts over N independent configurations."""

    count: int
    probe_hits: dict[str, int]
    empty_count: int
    probes: dict[str, tuple] = field(default_factory=dict)

    def estimate(self, probe_id: str) -> tuple[float, float]:
        """(frequency, binomial standard error) for a probe."""
        k, n = self.probe_hits[probe_id], self.count
        p = k / n
        return p, math.sqrt(p * (1 - p) / n)

    def merge(self, other: "SampleBatch") -> "SampleBatch":
        hits = {k: v + other.probe_hits[k] for k, v in self.probe_hits.items()}
        return SampleBatch(self.count + other.count, hits,
                           self.empty_count + other.empty_count, self.probes)

    def to_csv_rows(self) -> list[dict]:
        rows = []
        for pid in sorted(self.probe_hits):
            est, err = self.estimate(pid)
            rows.append({"probe": pid, "hits": self.probe_hits[pid],
                         "N": self.count, "estimate": est, "stderr": err})
        rows.append({"probe": "__empty__", "hits": self.empty_count,
                     "N": self.count, "estimate": self.empty_count / self.count,
                     "stderr": math.sqrt(max(self.empty_count / self.count
                                             * (1 - self.empty_count / self.count), 0.0)
                                         / self.count)})
        return rows


def estimate(model: ActivityModel, window: Block, depth: int, N: int,
             probes: dict[str, Iterable[Block]], seed: int,
             start_index: int = 0) -> SampleBatch:
    """N independent draws with per-probe hit counts and an emptiness counter.

    Each draw is keyed by its absolute sample index, so splitting [0, N) into
    chunks (via `start_index`) and merging reproduces the serial result
    exactly.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    probes = {pid: tuple(sorted(bs)) for pid, bs in probes.items()}
    sys = TruncatedSystem(model, window, depth)
    geo = model.geometry
    hits = {pid: 0 for pid in probes}
    empty = 0
    for i in range(start_index, start_index + N):
        blocks = _sample_topdown(sys.rho, geo, window, depth, seed, i)
        got = set(blocks)
        if not got:
            empty += 1
        for pid, bs in probes.items():
            if all(b in got for b in bs):
                hits[pid] += 1
    return SampleBatch(N, hits, empty, probes)


def estimate_chunked(model: ActivityModel, window: Block, depth: int, N: int,
                     probes: dict[str, Iterable[Block]], seed: int,
                     chunks: int = 1) -> SampleBatch:
    """Chunked batch estimation; the aggregate is independent of `chunks`."""
    sizes = [N // chunks + (1 if i < N % chunks else 0) for i in range(chunks)]
    out: Optional[SampleBatch] = None
    start = 0
    for size in sizes:
        if size == 0:
            continue
        b = estimate(model, window, depth, size, probes, seed, start_index=start)
        out = b if out is None else out.merge(b)
        start += size
    assert out is not None
    return out
