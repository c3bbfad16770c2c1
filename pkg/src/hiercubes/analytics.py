"""Exact log-space analytics for the hierarchical hard-core gas.

Everything extensive lives in log domain.  Two computation lanes exist:

* a scale lane for scale-wise constant activities, where partition functions
  and effective activities depend on the scale only and the tree recursion
  collapses to a scalar iteration;
* a block lane with per-block memoization for explicit/inhomogeneous models
  at small truncation depth.

Key per-scale quantities (homogeneous activity z_j):

    log Xi_j   = logaddexp(log z_j, M**d * log Xi_{j-1})
    zhat_j     = z_j * exp(-M**(d j) * p_{j-1})
    p_j        = p_{j-1} + M**(-d j) * log(1 + zhat_j)
    rho_j      = zhat_j / (1 + zhat_j) = z_j / Xi_j
    R_j        = prod_{k >= j} (1 + zhat_k) - 1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .blocks import (Block, Geometry, ancestors, children, contains,
                     covering_block, lcs, overlaps)
from .activities import (ActivityModel, EffectiveDesign, Explicit, Formula,
                         Homogeneous, Parametric, ScaleTruncated,
                         VolumeTruncated)
from .logreal import LogReal, log1p_exp, log_expm1, logsumexp_iter

# log Xi above this is certified as divergent by the depth-doubling probe
DIVERGENCE_LOG_THRESHOLD = 1.0e6
DEFAULT_TOL = 1e-12


class UncertifiedComputation(RuntimeError):
    """An infinite-volume quantity was requested without the needed certificate."""


# ---------------------------------------------------------------------------
# truncated finite systems (volume window + downward depth)
# ---------------------------------------------------------------------------

class TruncatedSystem:
    """The finite system of blocks inside `window` at scales >= -depth.

    Provides partition functions, effective activities and occupation ratios
    of the doubly truncated activity z_window^(depth).  Memoized per block, or
    per scale when the model is scale-wise constant inside the window.
    """

    def __init__(self, model: ActivityModel, window: Block, depth: int):
        if depth < 0:
            raise ValueError(f"depth must be >= 0, got {depth}")
        if -depth > window.scale:
            raise ValueError(f"depth {depth} does not reach below window scale "
                             f"{window.scale}")
        self.model = model
        self.window = window
        self.depth = depth
        self.geo = model.geometry
        self._scalewise = model.homogeneous_within(window)
        self._xi_memo: dict = {}
        self._rho_memo: dict = {}

    def in_system(self, b: Block) -> bool:
        return b.scale >= -self.depth and contains(self.window, b, self.geo)

    def log_activity(self, b: Block) -> float:
        if not self.in_system(b):
            return -math.inf
        return self.model.log_activity(b)

    def _key(self, b: Block):
        return b.scale if self._scalewise else b

    def log_xi(self, b: Block) -> float:
        """log of the partition function of the subtree below b."""
        if b.scale < -self.depth:
            return 0.0
        key = self._key(b)
        cached = self._xi_memo.get(key)
        if cached is not None:
            return cached
        if self._scalewise:
            # scalar iteration from the bottom scale up
            branching = self.geo.branching
            val = 0.0
            for j in range(-self.depth, b.scale + 1):
                lz = self.model.log_activity_at_scale(j)
                val = _logaddexp(lz, branching * val)
                self._xi_memo[j] = val
            return self._xi_memo[b.scale]
        lz = self.log_activity(b)
        children_sum = sum(self.log_xi(c) for c in children(b, self.geo))
        val = _logaddexp(lz, children_sum)
        self._xi_memo[key] = val
        return val

    def log_zhat(self, b: Block) -> float:
        """log effective activity: z(b) minus the children's log Xi."""
        lz = self.log_activity(b)
        if lz == -math.inf:
            return -math.inf
        if b.scale <= -self.depth:
            return lz
        if self._scalewise:
            self.log_xi(b)  # fill the scale memo
            return lz - self.geo.branching * self._xi_memo[b.scale - 1]
        return lz - sum(self.log_xi(c) for c in children(b, self.geo))

    def log_rho(self, b: Block) -> float:
        """log occupation ratio, log(zhat / (1 + zhat)) = log(z / Xi_b)."""
        lzh = self.log_zhat(b)
        if lzh == -math.inf:
            return -math.inf
        return lzh - log1p_exp(lzh)

    def rho(self, b: Block) -> float:
        if not self.in_system(b):
            return 0.0
        key = self._key(b)
        cached = self._rho_memo.get(key)
        if cached is None:
            cached = self._rho_memo[key] = math.exp(self.log_rho(b))
        return cached

    def log_one_minus_rho(self, b: Block) -> float:
        """log(1 - rho) = -log(1 + zhat)."""
        lzh = self.log_zhat(b)
        if lzh == -math.inf:
            return 0.0
        return -log1p_exp(lzh)

    def blocks(self) -> list[Block]:
        """All blocks of the system, sorted top scale first."""
        out = [self.window]
        frontier = [self.window]
        while frontier and frontier[0].scale > -self.depth:
            frontier = [c for f in frontier for c in children(f, self.geo)]
            out.extend(frontier)
        return out


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def partition_function(model: ActivityModel, window: Block, depth: int) -> LogReal:
    """Xi of `window` for the doubly truncated activity, as a LogReal."""
    return LogReal.from_log(TruncatedSystem(model, window, depth).log_xi(window))


def effective_activity(model: ActivityModel, b: Block, depth: int) -> LogReal:
    """zhat(b) = z(b) / prod of the children's partition functions."""
    sys = TruncatedSystem(model, b, depth) if depth >= -b.scale else None
    if sys is None:
        raise ValueError(f"depth {depth} does not reach block scale {b.scale}")
    return LogReal.from_log(sys.log_zhat(b))


def occupation_ratio(model: ActivityModel, b: Block, depth: int) -> float:
    """rho(b) in [0,1]; cross-checks the two defining formulas."""
    sys = TruncatedSystem(model, b, depth)
    via_zhat = math.exp(sys.log_rho(b))
    lz = sys.log_activity(b)
    via_xi = 0.0 if lz == -math.inf else math.exp(lz - sys.log_xi(b))
    if abs(via_zhat - via_xi) > 1e-12:
        raise AssertionError(
            f"occupation-ratio formulas disagree for {b}: {via_zhat} vs {via_xi}")
    return via_zhat


# ---------------------------------------------------------------------------
# the depth-doubling partition function limit
# ---------------------------------------------------------------------------

@dataclass
class LimitResult:
    value: LogReal
    converged: bool
    depth_used: int
    certificate: str = ""


def partition_function_limit(model: ActivityModel, window: Block,
                             tol: float = DEFAULT_TOL,
                             max_depth: int = 4096) -> LimitResult:
    """Xi of `window` without downward truncation.

    Doubles the truncation depth until the log increments fall below `tol`
    (finite), the log exceeds the divergence threshold (infinite), or a
    closed-form tail certificate settles the question.  Otherwise undecided.
    """
    cert = _downward_mass_certificate(model, window)
    if cert == "divergent":
        return LimitResult(LogReal.infinite(), True, 0,
                           "closed-form tail: sum of activities below window diverges")
    scalewise = model.homogeneous_within(window)
    if not scalewise:
        max_depth = min(max_depth, 16)  # block lane is exponential in depth

    start = max(window.scale, 0) - window.scale  # reach at least the window scale
    prev = None
    depth = max(1, start)
    while depth <= max_depth:
        cur = TruncatedSystem(model, window, depth).log_xi(window)
        if cur > DIVERGENCE_LOG_THRESHOLD:
            return LimitResult(LogReal.infinite(), True, depth,
                               "log partition function exceeded divergence threshold")
        if prev is not None and abs(cur - prev) < tol:
            return LimitResult(LogReal.from_log(cur), True, depth,
                               "depth-doubling increments below tolerance")
        prev = cur
        depth *= 2
    return LimitResult(LogReal.from_log(prev if prev is not None else 0.0),
                       False, depth // 2, "undecided: max depth exhausted")


def _downward_mass_certificate(model: ActivityModel, window: Block) -> str:
    """Closed-form status of sum of z(B) over B inside `window`, if available."""
    inner = model
    while isinstance(inner, (VolumeTruncated,)):
        inner = inner.inner
    if isinstance(inner, ScaleTruncated):
        return "convergent"  # finitely many active scales below
    if isinstance(inner, Homogeneous) and inner.homogeneous_within(window):
        rule = inner.tail_down
        if rule.kind == "geometric" and inner.log_table:
            lo = min(inner.log_table)
            if inner.log_table[lo] > -math.inf and lo <= window.scale:
                step = inner.geometry.branching * rule.ratio
                if step >= 1.0:
                    return "divergent"
        return ""
    return ""


# ---------------------------------------------------------------------------
# homogeneous scale profiles (untruncated volume)
# ---------------------------------------------------------------------------

@dataclass
class ScaleProfile:
    """Per-scale quantities of an untruncated scale-wise constant activity.

    Arrays are indexed by scale j in [j_lo, j_hi].  `log_zhat[j]` is -inf when
    the activity vanishes at that scale; `finite_xi` is False when the
    downward activity mass diverges (then every partition function is infinite
    and all effective activities vanish).
    """

    geometry: Geometry
    j_lo: int
    j_hi: int
    log_z: dict[int, float]
    log_zhat: dict[int, float]
    log1p_zhat: dict[int, float]
    pressure_partial: dict[int, float]   # p_j, accumulated through scale j
    finite_xi: bool = True


def scale_profile(model: ActivityModel, j_hi: int,
                  depth: Optional[int] = None) -> ScaleProfile:
    """Build the scalar recursion for a scale-wise constant model.

    `depth` bounds the scales from below at -depth (downward truncation);
    without it the profile starts at the model's lowest active scale, or deep
    enough that the neglected geometric tail is below 1e-18.
    """
    if not model.is_homogeneous:
        raise ValueError("scale profiles need a scale-wise constant activity")
    geo = model.geometry
    if depth is not None:
        j_lo = -depth
    else:
        j_lo = _profile_start_scale(model)
    p = 0.0
    log_z, log_zhat, log1p_zhat, p_partial = {}, {}, {}, {}
    vol = float(geo.M) ** (geo.d * j_lo)  # M**(d j), updated multiplicatively
    for j in range(j_lo, j_hi + 1):
        lz = model.log_activity_at_scale(j)
        if lz == -math.inf:
            lzh = -math.inf
            l1p = 0.0
        else:
            lzh = lz - vol * p
            l1p = log1p_exp(lzh)
            p += l1p / vol
        log_z[j] = lz
        log_zhat[j] = lzh
        log1p_zhat[j] = l1p
        p_partial[j] = p
        vol *= geo.branching
    return ScaleProfile(geo, j_lo, j_hi, log_z, log_zhat, log1p_zhat, p_partial)


def _profile_start_scale(model: ActivityModel) -> int:
    lo = model.min_active_scale()
    if lo is not None:
        return lo
    # unbounded below: walk down until the per-scale pressure contribution
    # M**(-d j) z_j drops under 1e-18; diverges if the downward mass does
    geo = model.geometry
    j = 0
    log_branch = geo.d * math.log(geo.M)
    for _ in range(2000):
        contrib = model.log_activity_at_scale(j) - geo.d * j * math.log(geo.M)
        if contrib < math.log(1e-18):
            return j
        nxt = model.log_activity_at_scale(j - 1) - geo.d * (j - 1) * math.log(geo.M)
        if nxt >= contrib - 1e-15 and contrib > math.log(1e-18):
            raise UncertifiedComputation(
                "downward activity mass does not decay; partition functions "
                "are infinite (condition (i) fails for this model)")
        j -= 1
    raise UncertifiedComputation("could not locate a negligible downward tail")


# ---------------------------------------------------------------------------
# existence conditions
# ---------------------------------------------------------------------------

@dataclass
class ConditionVerdict:
    status: str                    # "holds" | "fails" | "undecided"
    witness: Optional[Block] = None
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def to_json_obj(self) -> dict:
        obj = {"status": self.status, "detail": self.detail}
        if self.witness is not None:
            obj["witness"] = str(self.witness)
        return obj


@dataclass
class ExistenceReport:
    condition_i: ConditionVerdict
    condition_ii: ConditionVerdict
    verdict: str                   # unique Gibbs measure | fragmentation | condensation | undecided

    def to_json_obj(self) -> dict:
        return {"condition_i": self.condition_i.to_json_obj(),
                "condition_ii": self.condition_ii.to_json_obj(),
                "verdict": self.verdict}


def check_condition_i(model: ActivityModel, max_depth: int = 24) -> ConditionVerdict:
    """Finiteness structure of partition functions.

    For scale-wise constant activities this is the summability of the
    downward mass sum M**(d j) z_{-j}; inhomogeneous models are scanned per
    the finite-partition-function subcube test.
    """
    inner = model
    while isinstance(inner, VolumeTruncated):
        inner = inner.inner
    if isinstance(inner, ScaleTruncated) or isinstance(inner, (Parametric, EffectiveDesign)):
        return ConditionVerdict("holds", detail="no downward activity tail")
    if isinstance(inner, Homogeneous):
        return _condition_i_homogeneous(inner)
    if isinstance(inner, Explicit):
        if inner.log_default == -math.inf:
            return ConditionVerdict("holds",
                                    detail="finitely many active blocks; all partition functions finite")
        return ConditionVerdict(
            "fails", witness=Block(0, (0,) * inner.geometry.d),
            detail="positive default activity: every block has infinite partition "
                   "function and no finite-Xi subcube exists")
    if isinstance(inner, Formula):
        return _condition_i_scan(inner, max_depth)
    return ConditionVerdict("undecided", detail=f"no checker for {type(inner).__name__}")


def _condition_i_homogeneous(model: Homogeneous) -> ConditionVerdict:
    geo = model.geometry
    active = [j for j, lv in model.log_table.items() if lv > -math.inf]
    if not active and model.tail_down.kind == "zero":
        return ConditionVerdict("holds", detail="zero activity")
    if model.tail_down.kind == "zero":
        return ConditionVerdict("holds", detail="downward mass sum is finite (zero tail)")
    lo = min(model.log_table)
    if model.log_table[lo] == -math.inf:
        # geometric tail continues a zero boundary value: still zero
        return ConditionVerdict("holds", detail="zero boundary value under the tail")
    step = geo.branching * model.tail_down.ratio
    if step < 1.0:
        return ConditionVerdict(
            "holds", detail=f"geometric downward mass sum converges (step {step:.6g} < 1)")
    return ConditionVerdict(
        "fails", witness=Block(max(lo, 0), (0,) * geo.d),
        detail=f"downward mass sum diverges (step {step:.6g} >= 1); every block has "
               "infinite partition function and the finite-Xi subcube set is empty")


def _condition_i_scan(model: Formula, max_depth: int = 24,
                      roots: Optional[list[Block]] = None,
                      node_budget: int = 2_000_000,
                      levels: int = 10) -> ConditionVerdict:
    """Per-window test for inhomogeneous activities.

    A window with infinite partition function satisfies the condition iff its
    maximal finite-Xi subcubes carry divergent activity mass.  Subtree
    finiteness is judged from per-level mass partial sums; inherently
    best-effort, reports undecided when the work budget runs out.
    """
    geo = model.geometry
    if roots is None:
        roots = [Block(j, (0,) * geo.d) for j in range(0, 3)]
    budget = [node_budget]

    def subtree_masses(b: Block, nlev: int) -> Optional[list[float]]:
        masses = []
        frontier = [b]
        for _ in range(nlev):
            budget[0] -= len(frontier)
            if budget[0] < 0:
                return None
            masses.append(sum(math.exp(lv) for blk in frontier
                              if (lv := model.log_activity(blk)) > -math.inf))
            frontier = [c for f in frontier for c in children(f, geo)]
        return masses

    def xi_status(b: Block) -> str:
        masses = subtree_masses(b, levels)
        if masses is None:
            return "undecided"
        tail = masses[-4:]
        if all(m <= 1e-12 for m in tail) or all(
                masses[k + 1] <= 0.7 * masses[k] + 1e-15
                for k in range(len(masses) - 4, len(masses) - 1)):
            return "finite"
        if sum(masses) > 1e10 or min(tail) >= 1e-6:
            return "infinite"
        return "undecided"

    def all_infinite_nearby(b: Block, nlev: int) -> bool:
        frontier = [b]
        for _ in range(nlev):
            frontier = [c for f in frontier for c in children(f, geo)]
            if any(xi_status(c) != "infinite" for c in frontier):
                return False
        return True

    def finite_mass_below(b: Block, depth: int, by_depth: list[float]) -> str:
        # per-spine-depth activity mass over maximal finite-Xi subcubes of b
        if depth >= max_depth or budget[0] < 0:
            return "exhausted"
        for c in children(b, geo):
            st = xi_status(c)
            if st == "finite":
                m = subtree_masses(c, levels)
                if m is None:
                    return "exhausted"
                by_depth[depth] += sum(m)
            elif st == "infinite":
                r = finite_mass_below(c, depth + 1, by_depth)
                if r == "undecided":
                    return r
            else:
                return "undecided"
        return "scanned"

    for root in roots:
        st = xi_status(root)
        if st == "finite":
            continue
        if st == "undecided":
            return ConditionVerdict("undecided", witness=root,
                                    detail="partition-function status of the window unresolved")
        if all_infinite_nearby(root, 3):
            return ConditionVerdict(
                "fails", witness=root,
                detail="every scanned subcube has infinite partition function; "
                       "the finite-Xi subcube set appears empty")
        by_depth = [0.0] * max_depth
        out = finite_mass_below(root, 0, by_depth)
        if out == "undecided":
            return ConditionVerdict("undecided", witness=root,
                                    detail="subtree finiteness unresolved during the scan")
        reached = max((i for i, m in enumerate(by_depth) if m > 0), default=-1) + 1
        tail = by_depth[max(reached - 8, 0):reached]
        if len(tail) >= 8 and min(tail) >= 1e-6:
            continue  # per-depth finite-Xi mass does not decay: divergent, holds
        if sum(by_depth) > 1e10:
            continue
        if len(tail) >= 6 and all(tail[k + 1] <= 0.7 * tail[k] + 1e-15
                                  for k in range(len(tail) - 1)):
            return ConditionVerdict(
                "fails", witness=root,
                detail=f"finite-Xi subcube mass decays geometrically along the "
                       f"infinite spine (sum {sum(by_depth):.6g})")
        return ConditionVerdict("undecided", witness=root,
                                detail="scan budget or depth exhausted")
    return ConditionVerdict("holds", detail="every scanned infinite-Xi window has "
                                            "divergent finite-Xi subcube mass")


def check_condition_ii(model: ActivityModel, anchor: Optional[Block] = None,
                       tol: float = DEFAULT_TOL, j_max: int = 64,
                       j_max_cap: int = 512) -> ConditionVerdict:
    """Summability of effective activities along an ancestor chain."""
    geo = model.geometry
    if anchor is None:
        anchor = Block(0, (0,) * geo.d)

    cond_i = check_condition_i(model)
    if cond_i.status == "fails":
        return ConditionVerdict(
            "holds", detail="automatic: some partition function is infinite, so "
                            "effective activities vanish along the chain")

    inner = model
    while isinstance(inner, VolumeTruncated):
        # zhat vanishes above the window: finite sum
        return ConditionVerdict("holds", detail="volume-truncated activity: "
                                                "finitely many ancestors carry weight")
    if isinstance(inner, ScaleTruncated):
        inner2 = inner.inner
        if isinstance(inner2, (Explicit,)) and inner2.log_default == -math.inf:
            return ConditionVerdict("holds", detail="finitely many active blocks")
    if isinstance(inner, Explicit) and inner.log_default == -math.inf:
        return ConditionVerdict("holds", detail="finitely many active blocks")

    if isinstance(inner, EffectiveDesign):
        return _condition_ii_design(inner)

    if not model.is_homogeneous:
        return ConditionVerdict("undecided",
                                detail=f"no chain summation for {type(inner).__name__}")

    anchor_scale = anchor.scale
    while j_max <= j_max_cap:
        prof = scale_profile(model, j_max)
        verdict = _classify_zhat_tail(prof, anchor_scale, tol)
        if verdict is not None:
            return verdict
        j_max *= 2
    return ConditionVerdict("undecided",
                            detail=f"no decision after j_max = {j_max_cap}")


def _condition_ii_design(model: EffectiveDesign) -> ConditionVerdict:
    vals = [math.exp(lv) for lv in model.log_zhat_table.values() if lv > -math.inf]
    rule = model.zhat_tail_up
    if rule.kind == "zero" or not model.log_zhat_table:
        return ConditionVerdict("holds",
                                detail=f"finite designed sum {sum(vals):.6g}")
    hi = max(model.log_zhat_table)
    top = math.exp(model.log_zhat_table[hi]) if model.log_zhat_table[hi] > -math.inf else 0.0
    if top == 0.0 or rule.ratio < 1.0:
        tail = top * rule.ratio / (1 - rule.ratio) if top > 0 else 0.0
        return ConditionVerdict("holds",
                                detail=f"geometric designed tail converges "
                                       f"(sum {sum(vals) + tail:.6g})")
    return ConditionVerdict("fails",
                            detail="designed effective activities do not decay "
                                   f"(tail ratio {rule.ratio} >= 1)")


def _classify_zhat_tail(prof: ScaleProfile, anchor_scale: int,
                        tol: float) -> Optional[ConditionVerdict]:
    lzh = [prof.log_zhat[j] for j in range(anchor_scale, prof.j_hi + 1)]
    tail = lzh[-10:]
    # divergence is about the behaviour of the terms, never their magnitude:
    # a huge leading term with a collapsing tail still sums to a finite value
    if tail[-1] > -math.inf and tail[-1] >= tail[0] and tail[-1] > math.log(1e6):
        return ConditionVerdict("fails",
                                detail="zhat terms grow without bound along the chain")
    if all(v > math.log(1e-6) for v in tail) and tail[-1] >= tail[0] - 1e-9:
        return ConditionVerdict("fails",
                                detail="zhat terms do not decay over the last 10 scales")
    # certified convergent: strongly decaying recent terms with a geometric
    # envelope bounding the remainder
    diffs = [tail[k + 1] - tail[k] for k in range(len(tail) - 1)
             if tail[k] > -math.inf and tail[k + 1] > -math.inf]
    if tail[-1] == -math.inf or (tail[-1] < -46 and all(d <= -0.5 for d in diffs)):
        bound = 0.0 if tail[-1] == -math.inf else math.exp(tail[-1]) / (1 - math.exp(-0.5))
        return ConditionVerdict("holds",
                                detail=f"zhat tail under a geometric envelope; "
                                       f"remainder <= {bound:.3g}")
    return None


def existence_report(model: ActivityModel) -> ExistenceReport:
    ci = check_condition_i(model)
    cii = check_condition_ii(model)
    if ci.status == "fails":
        verdict = "fragmentation"
    elif ci.status == "holds" and cii.status == "fails":
        verdict = "condensation"
    elif ci.status == "holds" and cii.status == "holds":
        verdict = "unique Gibbs measure"
    else:
        verdict = "undecided"
    return ExistenceReport(ci, cii, verdict)


# ---------------------------------------------------------------------------
# marginals and covariances of hierarchical measures
# ---------------------------------------------------------------------------

def _validate_disjoint(blocks, geo: Geometry) -> bool:
    blocks = list(blocks)
    for i, b1 in enumerate(blocks):
        for b2 in blocks[i + 1:]:
            if overlaps(b1, b2, geo):
                return False
    return True


def exact_marginal(model: ActivityModel, blocks, window: Optional[Block],
                   depth: int, tol: float = DEFAULT_TOL) -> float:
    """P(omega contains all of `blocks`) under the hierarchical measure.

    With a `window`, the law of the doubly truncated activity; with
    window=None, the infinite-volume measure (scale-wise constant models only,
    refused unless condition (ii) is certified).
    """
    blocks = sorted(set(blocks))
    if not blocks:
        return 1.0
    geo = model.geometry
    if not _validate_disjoint(blocks, geo):
        return 0.0
    if window is not None:
        sys = TruncatedSystem(model, window, depth)
        for b in blocks:
            if not sys.in_system(b):
                return 0.0
        log_p = sum(sys.log_rho(b) for b in blocks)
        for a in _strict_ancestor_set(blocks, window.scale, geo):
            log_p += sys.log_one_minus_rho(a)
        return math.exp(log_p)
    return _exact_marginal_infinite(model, blocks, depth, tol)


def _strict_ancestor_set(blocks, up_to_scale: int, geo: Geometry) -> set:
    anc = set()
    for b in blocks:
        anc.update(ancestors(b, up_to_scale, geo))
    return anc - set(blocks)


def _exact_marginal_infinite(model: ActivityModel, blocks, depth: int,
                             tol: float) -> float:
    geo = model.geometry
    cii = check_condition_ii(model)
    if not cii.holds:
        raise UncertifiedComputation(
            f"infinite-volume marginal refused: condition (ii) is "
            f"'{cii.status}' ({cii.detail})")
    top_scale = max(b.scale for b in blocks)
    j_hi = _chain_cut_scale(model, top_scale)
    prof = scale_profile(model, j_hi, depth=depth)
    cover = covering_block(blocks[0], blocks[0], geo)
    for b in blocks[1:]:
        cover = covering_block(cover, b, geo)
    sys = TruncatedSystem(model, cover, depth) if cover.scale >= -depth else None
    log_p = 0.0
    for b in blocks:
        log_p += sys.log_rho(b)
    for a in _strict_ancestor_set(blocks, cover.scale, geo):
        log_p += sys.log_one_minus_rho(a)
    # ancestors of the covering block out to infinity, scale-wise
    for j in range(cover.scale + 1, j_hi + 1):
        lzh = prof.log_zhat[j]
        if lzh > -math.inf:
            log_p += -log1p_exp(lzh)
    return math.exp(log_p)


def _chain_cut_scale(model: ActivityModel, from_scale: int, cut: float = 1e-15,
                     j_cap: int = 512) -> int:
    """Scale beyond which the remaining ancestor zhat mass is below `cut`."""
    prof = scale_profile(model, min(from_scale + 80, from_scale + j_cap))
    j = prof.j_hi
    # the tail envelope is doubly exponential once terms are tiny; the last
    # computed term bounds the remainder up to a factor ~2
    while j > from_scale + 1:
        lzh = prof.log_zhat[j]
        if lzh > math.log(cut) - math.log(2):
            break
        j -= 1
    return min(j + 2, prof.j_hi)


def pair_covariance(model: ActivityModel, b1: Block, b2: Block,
                    window: Optional[Block], depth: int) -> dict:
    """Covariance of the occurrence events of two blocks, two ways.

    Returns both the direct value (from exact marginals) and the factorised
    value P1 * P2 * R over the common strict-ancestor chain; for overlapping
    pairs the joint probability is zero and the covariance is -P1*P2.
    Identical blocks get the variance P(1-P).
    """
    geo = model.geometry
    p1 = exact_marginal(model, [b1], window, depth)
    if b1 == b2:
        return {"cov": p1 * (1 - p1), "factored_cov": p1 * (1 - p1),
                "joint": p1, "p1": p1, "p2": p1, "mode": "variance"}
    p2 = exact_marginal(model, [b2], window, depth)
    joint = exact_marginal(model, [b1, b2], window, depth)
    cov = joint - p1 * p2
    if overlaps(b1, b2, geo):
        factored = -p1 * p2
    else:
        factored = p1 * p2 * _common_chain_R(model, [b1], [b2], window, depth)
    return {"cov": cov, "factored_cov": factored, "joint": joint,
            "p1": p1, "p2": p2, "mode": "pair"}


def _common_chain_R(model: ActivityModel, set1, set2,
                    window: Optional[Block], depth: int) -> float:
    """R over the common strict-ancestor set of two disjoint block sets."""
    geo = model.geometry
    lcs_scale = min(lcs(a, b, geo) for a in set1 for b in set2)
    cover = covering_block(set1[0], set2[0], geo)
    for a in set1:
        for b in set2:
            c = covering_block(a, b, geo)
            if c.scale == lcs_scale:
                cover = c
    anc1 = {a for b in set1 for a in ancestors(b, max(window.scale if window else lcs_scale + 200, b.scale), geo)}
    if window is not None:
        sys = TruncatedSystem(model, window, depth)
        anc2 = {a for b in set2 for a in ancestors(b, window.scale, geo)}
        anc1 = {a for b in set1 for a in ancestors(b, window.scale, geo)}
        common = (anc1 & anc2) - set(set1) - set(set2)
        s = sum(log1p_exp(sys.log_zhat(a)) for a in common)
        return math.expm1(s)
    # infinite volume: common strict ancestors are the chain above (and
    # including) the covering block; R equals the homogeneous tail ratio
    return tail_ratio_R(model, lcs_scale)


def config_covariance(model: ActivityModel, set1, set2,
                      window: Optional[Block], depth: int) -> dict:
    """Covariance of two finite sub-configurations, with factorisation check."""
    set1, set2 = sorted(set(set1)), sorted(set(set2))
    if set(set1) & set(set2):
        raise ValueError("configuration sets must be disjoint as sets")
    geo = model.geometry
    p1 = exact_marginal(model, set1, window, depth)
    p2 = exact_marginal(model, set2, window, depth)
    joint = exact_marginal(model, set1 + set2, window, depth)
    cov = joint - p1 * p2
    if not _validate_disjoint(set1 + set2, geo):
        factored_joint = 0.0
    else:
        factored_joint = p1 * p2 * (1 + _common_chain_R(model, set1, set2, window, depth))
    n_min = min(len(set1), len(set2))
    return {"cov": cov, "joint": joint, "factored_joint": factored_joint,
            "p1": p1, "p2": p2, "min_size": n_min}


# ---------------------------------------------------------------------------
# pressure, stability threshold, tail ratios, decay
# ---------------------------------------------------------------------------

@dataclass
class PressureProfile:
    partial: dict[int, float]          # p_j per scale
    pressure: float                    # extrapolated limit (may be inf)
    theta_star: float                  # stability threshold (may be -inf)
    theta_star_exact: bool             # closed form vs finite-data estimate
    j_window: tuple[int, int]

    def to_json_obj(self) -> dict:
        return {"partial": {str(j): v for j, v in self.partial.items()},
                "pressure": self.pressure,
                "theta_star": self.theta_star,
                "theta_star_exact": self.theta_star_exact,
                "j_window": list(self.j_window)}


def pressure_profile(model: ActivityModel, tol: float = DEFAULT_TOL,
                     j_max: int = 64) -> PressureProfile:
    """Pressure p = sum M**(-d j) log(1 + zhat_j) and stability threshold."""
    prof = scale_profile(model, j_max)
    geo = model.geometry
    partial = dict(prof.pressure_partial)
    p_end = partial[prof.j_hi]
    # remainder bound: sum_{k > j_max} M**(-d k) zhat_k, under the tail envelope
    tail_term = prof.log_zhat[prof.j_hi]
    p = p_end  # increments decay doubly exponentially once zhat does
    inner = model
    while isinstance(inner, ScaleTruncated):
        inner = inner.inner
    if isinstance(inner, Parametric):
        theta, exact = inner.mu, True
    else:
        vols = [(j, prof.log_z[j]) for j in range(max(prof.j_lo, 0), prof.j_hi + 1)
                if prof.log_z[j] > -math.inf]
        if not vols:
            theta, exact = -math.inf, True
        else:
            theta = max(lv / float(geo.M) ** (geo.d * j) for j, lv in vols[-20:])
            exact = False
    return PressureProfile(partial, p, theta, exact, (prof.j_lo, prof.j_hi))


def _log_R_terms(prof: ScaleProfile, j: int) -> list[float]:
    """log of log(1+zhat_k) for k >= j, stable for tiny zhat."""
    terms = []
    for k in range(j, prof.j_hi + 1):
        lzh = prof.log_zhat[k]
        if lzh == -math.inf:
            continue
        if lzh < -30:
            terms.append(lzh)  # log(log1p(zhat)) = log zhat + O(zhat)
        else:
            terms.append(math.log(log1p_exp(lzh)))
    return terms


def log_tail_ratio(model: ActivityModel, j: int, j_hi: Optional[int] = None) -> float:
    """log R_j with R_j = prod_{k >= j}(1 + zhat_k) - 1, stable far below
    double underflow."""
    prof = scale_profile(model, j_hi if j_hi is not None else max(j + 80, 80))
    terms = _log_R_terms(prof, j)
    if not terms:
        return -math.inf
    log_S = logsumexp_iter(terms)       # S = sum log(1+zhat_k) = log prod
    if log_S > -30:
        return log_expm1(math.exp(min(log_S, 700.0))) if log_S < 700 else math.exp(min(log_S, 700.0))
    return log_S                        # R = expm1(S) = S (1 + O(S))


def tail_ratio_R(model: ActivityModel, j: int, tol: float = DEFAULT_TOL) -> float:
    """R_j as a float (0.0 when it underflows; use log_tail_ratio then)."""
    cii = check_condition_ii(model)
    if not cii.holds:
        raise UncertifiedComputation(
            f"tail ratio refused: condition (ii) is '{cii.status}'")
    lr = log_tail_ratio(model, j)
    return math.exp(lr) if lr > -700 else 0.0


def decay_profile(model: ActivityModel, j_max: int) -> list[dict]:
    """Per-scale decay table: M**(-d j) log R_j and the parametric residual.

    The residual log R_j + M**(d j)(p - theta*) + M**(alpha d j) J is
    evaluated as (log R_j - log zhat_j) + M**(d j) * tail_p(j), where
    tail_p(j) = sum_{k >= j} M**(-d k) log(1 + zhat_k) is summed directly so
    no catastrophic cancellation against the pressure limit occurs.
    """
    cii = check_condition_ii(model)
    if not cii.holds:
        raise UncertifiedComputation(
            f"decay profile refused: condition (ii) is '{cii.status}'")
    geo = model.geometry
    prof = scale_profile(model, j_max + 90)
    inner = model
    while isinstance(inner, ScaleTruncated):
        inner = inner.inner
    parametric = isinstance(inner, Parametric)
    rows = []
    for j in range(0, j_max + 1):
        vol = float(geo.M) ** (geo.d * j)
        terms = _log_R_terms(prof, j)
        if not terms:
            rows.append({"j": j, "log_R": -math.inf, "scaled_log_R": -math.inf,
                         "residual": None})
            continue
        lead = max(terms)
        rel = sum(math.exp(t - lead) for t in terms) - 1.0
        log_S = lead + math.log1p(rel)
        if log_S > -30:
            S = math.exp(min(log_S, 700.0))
            log_R = log_expm1(S) if S < 700 else S
        else:
            log_R = log_S
        row = {"j": j, "log_R": log_R, "scaled_log_R": log_R / vol, "residual": None}
        if parametric and prof.log_zhat[j] > -math.inf:
            # delta = log R_j - log zhat_j, computed without cancellation
            corr = 0.0
            if log_S > -30:
                S = math.exp(min(log_S, 700.0))
                corr = (log_expm1(S) - log_S) if S < 700 else 0.0
            delta = (lead - prof.log_zhat[j]) + math.log1p(rel) + corr
            log_tail_terms = [math.log(prof.log1p_zhat[k]) - geo.d * k * math.log(geo.M)
                              if prof.log1p_zhat[k] > 0 and prof.log_zhat[k] >= -30
                              else prof.log_zhat[k] - geo.d * k * math.log(geo.M)
                              for k in range(j, prof.j_hi + 1)
                              if prof.log_zhat[k] > -math.inf]
            log_tail_p = logsumexp_iter(log_tail_terms)
            tail_contrib = math.exp(geo.d * j * math.log(geo.M) + log_tail_p) \
                if log_tail_p > -math.inf else 0.0
            row["residual"] = delta + tail_contrib
        rows.append(row)
    return rows


def series_summand_bounds(r: float, b: float, j: int,
                          k_max: int = 2000) -> dict:
    """The tail sum sum_{k >= j} exp(-r b**k) and its sandwich bounds.

    lower = exp(-r b**j), upper = lower * (1 + 1/(r log(b) b**j)); all three
    are also reported in log domain for deep-tail use.
    """
    if r <= 0 or b <= 1:
        raise ValueError(f"need r > 0 and b > 1, got r={r}, b={b}")
    log_lower = -r * b**j
    terms = []
    for k in range(j, j + k_max):
        t = -r * b**k
        terms.append(t)
        if t < log_lower - 60:
            break
    log_sum = logsumexp_iter(terms)
    log_upper = log_lower + math.log1p(1.0 / (r * math.log(b) * b**j))
    return {"lower": math.exp(log_lower) if log_lower > -700 else 0.0,
            "sum": math.exp(log_sum) if log_sum > -700 else 0.0,
            "upper": math.exp(log_upper) if log_upper > -700 else 0.0,
            "log_lower": log_lower, "log_sum": log_sum, "log_upper": log_upper}


# ---------------------------------------------------------------------------
# critical chemical potential
# ---------------------------------------------------------------------------

def _gibbs_predicate(geo: Geometry, mu: float, J: float, alpha: float) -> str:
    model = Parametric(geo, mu, J, alpha)
    return check_condition_ii(model).status


def critical_mu(J: float, alpha: float, tol: float,
                geometry: Optional[Geometry] = None,
                bracket: tuple[float, float] = (-50.0, 50.0)) -> dict:
    """Bisection on mu over the summability of the effective activities.

    Returns mu_c (math.inf when the predicate holds up to the bracket cap),
    the bisection trace, and whether a Gibbs measure appears to survive at
    mu_c (True/False/"undecided").
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    geo = geometry or Geometry(1)
    lo, hi = bracket
    trace = []

    def pred(mu: float) -> str:
        status = _gibbs_predicate(geo, mu, J, alpha)
        trace.append({"mu": mu, "gibbs": status})
        return status

    if pred(hi) == "holds":
        return {"mu_c": math.inf, "gibbs_at_mu_c": True, "trace": trace,
                "note": f"predicate holds up to the bracket cap mu = {hi}"}
    if pred(lo) != "holds":
        raise RuntimeError(
            f"bisection bracket failure: predicate not satisfied at mu = {lo}; "
            f"trace: {trace}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid) == "holds":
            lo = mid
        else:
            hi = mid
    mu_c = 0.5 * (lo + hi)
    at_mu_c = _gibbs_predicate(geo, mu_c, J, alpha)
    gibbs_at: object
    if at_mu_c == "holds":
        gibbs_at = True
    elif at_mu_c == "fails":
        gibbs_at = False
    else:
        gibbs_at = "undecided"
    return {"mu_c": mu_c, "gibbs_at_mu_c": gibbs_at, "trace": trace, "note": ""}
