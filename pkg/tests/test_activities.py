import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from hiercubes.blocks import Block, Geometry, block
from hiercubes.activities import (EffectiveDesign, Explicit, Formula,
                                  Homogeneous, Parametric, TailRule,
                                  activity_from_effective, load_model,
                                  model_from_json_obj, truncate_scale,
                                  truncate_volume)

GEO = Geometry(1)
W = block(0, 0)


def rand_blocks(seed=0, n=1000, d=1):
    import random
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        scale = rng.randint(-8, 8)
        out.append(Block(scale, tuple(rng.randint(0, 500) for _ in range(d))))
    return out


# -- homogeneous tables and tails -------------------------------------------

def test_homogeneous_table_and_tails():
    m = Homogeneous.from_values(GEO, {0: 1.0, -1: 0.5},
                                tail_down=TailRule("geometric", 0.25),
                                tail_up=TailRule("geometric", 0.5))
    assert m.log_activity_at_scale(0) == 0.0
    assert m.log_activity_at_scale(-1) == pytest.approx(math.log(0.5))
    assert m.log_activity_at_scale(-3) == pytest.approx(math.log(0.5 * 0.25 ** 2))
    assert m.log_activity_at_scale(2) == pytest.approx(math.log(0.25))
    assert m.min_active_scale() is None          # geometric tail is unbounded below


def test_homogeneous_zero_tail_min_scale():
    m = Homogeneous.constant(GEO, 1.0, range(-2, 1))
    assert m.min_active_scale() == -2
    assert m.log_activity_at_scale(-3) == -math.inf
    assert m.log_activity_at_scale(1) == -math.inf


def test_negative_activity_rejected():
    with pytest.raises(ValueError):
        Homogeneous.from_values(GEO, {0: -1.0})
    with pytest.raises(ValueError):
        TailRule("geometric", -0.5)
    with pytest.raises(ValueError):
        TailRule("nonsense")


# -- parametric --------------------------------------------------------------

def test_parametric_formula():
    m = Parametric(GEO, mu=-1.0, J=1.0, alpha=0.5)
    for j in range(0, 12):
        expect = 2.0 ** j * -1.0 - 2.0 ** (0.5 * j) * 1.0
        assert m.log_activity_at_scale(j) == pytest.approx(expect)
    assert m.log_activity_at_scale(-1) == -math.inf
    assert m.min_active_scale() == 0


def test_parametric_threshold_identity():
    # M**(-d j) log z_j = mu - M**((alpha-1) d j) J -> mu as j grows
    m = Parametric(GEO, mu=0.3, J=2.0, alpha=0.5)
    vals = [m.log_activity_at_scale(j) * 2.0 ** -j for j in range(40, 50)]
    assert vals[-1] == pytest.approx(0.3, abs=1e-6)
    assert all(vals[k] < vals[k + 1] for k in range(len(vals) - 1))


def test_parametric_alpha_validation():
    with pytest.raises(ValueError):
        Parametric(GEO, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Parametric(GEO, 0.0, 1.0, 0.0)


# -- explicit and formula -----------------------------------------------------

def test_explicit_entries_and_default():
    m = Explicit.from_values(GEO, {block(0, 0): 2.0}, default=0.0)
    assert m.log_activity(block(0, 0)) == pytest.approx(math.log(2.0))
    assert m.log_activity(block(0, 1)) == -math.inf
    assert not m.is_homogeneous


def test_formula_wraps_callable():
    m = Formula(GEO, lambda b: 1.0 if b.scale == -1 else 0.0)
    assert m.log_activity(block(-1, 3)) == 0.0
    assert m.log_activity(block(0, 0)) == -math.inf
    with pytest.raises(TypeError):
        m.to_json_obj()


# -- truncations --------------------------------------------------------------

def test_truncation_composition_oracle():
    base = Homogeneous.from_values(GEO, {0: 1.0},
                                   tail_down=TailRule("geometric", 0.5),
                                   tail_up=TailRule("geometric", 0.5))
    t = truncate_scale(truncate_volume(base, W), 3)
    for b in rand_blocks(seed=7):
        lz = t.log_activity(b)
        inside = (b.scale >= -3 and b.scale <= 0
                  and 0 <= b.index[0] * 2.0 ** b.scale < 1.0)
        if inside:
            assert lz == base.log_activity(b)
        else:
            assert lz == -math.inf


def test_truncation_homogeneity_flags():
    base = Homogeneous.constant(GEO, 1.0, range(-3, 1))
    assert truncate_scale(base, 2).is_homogeneous
    vt = truncate_volume(base, W)
    assert vt.homogeneous_within(W)
    assert vt.homogeneous_within(block(-1, 0))
    assert not vt.homogeneous_within(block(1, 0))   # window boundary cuts scales


# -- effective design ----------------------------------------------------------

def test_effective_design_lowest_scale_is_plain():
    m = EffectiveDesign.from_values(GEO, {0: 1.0})
    # single designed scale: zhat = z there
    assert m.log_activity_at_scale(0) == pytest.approx(0.0)


def test_effective_design_inversion():
    # derived activity must reproduce the designed zhat through the recursion
    from hiercubes.analytics import effective_activity
    target = {-2: 0.25, -1: 0.5, 0: 1.0, 1: 0.125}
    m = EffectiveDesign.from_values(GEO, target)
    for j, want in target.items():
        got = effective_activity(m, block(j, 0), depth=2)
        assert math.exp(got.log) == pytest.approx(want, abs=1e-12)


def test_activity_from_effective_matches_design():
    m1 = activity_from_effective({0: 1.0, 1: 0.5}, GEO)
    m2 = EffectiveDesign.from_values(GEO, {0: 1.0, 1: 0.5})
    for j in (0, 1):
        assert m1.log_activity_at_scale(j) == pytest.approx(m2.log_activity_at_scale(j))


# -- serialization -------------------------------------------------------------

@pytest.mark.parametrize("model", [
    Homogeneous.from_values(GEO, {0: 1.0, -2: 0.3},
                            tail_down=TailRule("geometric", 0.25)),
    Parametric(GEO, -1.0, 1.0, 0.5),
    Explicit.from_values(Geometry(2), {block(0, 0, 0): 2.0, block(-1, 1, 1): 0.5}),
    EffectiveDesign.from_values(GEO, {0: 1.0, 3: 0.25},
                                zhat_tail_up=TailRule("geometric", 0.5)),
])
def test_json_roundtrip(model):
    clone = model_from_json_obj(model.to_json_obj())
    assert type(clone) is type(model)
    assert clone.geometry == model.geometry
    for b in rand_blocks(seed=3, n=300, d=model.geometry.d):
        a, c = model.log_activity(b), clone.log_activity(b)
        if a == -math.inf:
            assert c == -math.inf
        else:
            assert c == pytest.approx(a, abs=1e-12)


def test_load_model_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"kind": "homogeneous", "d": 1, "M": 2,
                                "table": {"0": 1.0, "-1": 0.5}}))
    m = load_model(str(path))
    assert isinstance(m, Homogeneous)
    assert m.log_activity_at_scale(-1) == pytest.approx(math.log(0.5))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        model_from_json_obj({"kind": "mystery", "d": 1, "M": 2})


# -- monotonicity property ------------------------------------------------------

@settings(max_examples=50)
@given(st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_homogeneous_scaling_monotone(v1, v2):
    lo, hi = min(v1, v2), max(v1, v2)
    m_lo = Homogeneous.constant(GEO, lo, range(-3, 1))
    m_hi = Homogeneous.constant(GEO, hi, range(-3, 1))
    for j in range(-3, 1):
        assert m_lo.log_activity_at_scale(j) <= m_hi.log_activity_at_scale(j)
