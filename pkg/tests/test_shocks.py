from __future__ import annotations

import random
import statistics
from fractions import Fraction as F

import pytest

from entrench.core import IncentiveParams, ModeError, degree
from entrench.dynamics import SimConfig
from entrench.shocks import (
    ShockSpec,
    run_condition,
    run_conditions,
    run_one_layer_shock,
    run_single_layer,
)

SINGLE = SimConfig(mode="single")
MULTI = SimConfig()


def test_shock_spec_costs():
    s = ShockSpec("LH")
    assert (s.pre_cost, s.post_cost, s.post_costs) == (F(1, 5), F(3, 5), (F(3, 5), F(3, 5)))
    one = ShockSpec("HL", shocked_layers="layer1")
    assert one.post_costs == (F(1, 5), F(3, 5))
    assert ShockSpec("LL", c_high=0.3).post_cost == F(1, 5)


@pytest.mark.parametrize("kw", [{"condition": "LX"}, {"shocked_layers": "layer2"},
                                {"c_low": 0.6, "c_high": 0.2}])
def test_shock_spec_rejects(kw):
    with pytest.raises(ValueError):
        ShockSpec(**kw)


def ensemble(cond, inc, cfg=SINGLE, reps=10, layer=1, phase="post", base=0, **kw):
    out = []
    for s in range(reps):
        r = run_condition(cfg, inc, ShockSpec(cond, **kw), random.Random(base + s))
        m = r.post_metrics if phase == "post" else r.pre_metrics
        out.append(m.degree(layer))
    return statistics.fmean(out)


def test_hh_degree_one_both_phases():
    inc = IncentiveParams.make()
    pre = ensemble("HH", inc, MULTI, phase="pre", reps=30)
    post = ensemble("HH", inc, MULTI, phase="post", reps=30)
    assert pre == pytest.approx(1.0, abs=0.05) and post == pytest.approx(1.0, abs=0.05)


def test_strong_triangles_keep_low_cost_degree():
    inc = IncentiveParams.make(d=1.6)
    lh, ll = ensemble("LH", inc), ensemble("LL", inc)
    assert lh == pytest.approx(ll, rel=0.05)


def test_weak_triangles_track_high_cost():
    inc = IncentiveParams.make(d=0.4)
    lh, hh = ensemble("LH", inc), ensemble("HH", inc)
    assert lh == pytest.approx(hh, abs=0.1)


def test_single_layer_low_cost_no_bonus_mostly_degree_two():
    degs = []
    for s in range(10):
        r = run_single_layer(SINGLE, IncentiveParams.make(), ShockSpec("LL"), random.Random(s))
        degs += [degree(r.post_network, i, 1) for i in range(40)]
    assert set(degs) <= {0, 1, 2, 3}
    assert sum(d in (2, 3) for d in degs) / len(degs) > 0.9
    assert statistics.mode(degs) == 2


def test_single_layer_high_cost_degree_one():
    r = run_single_layer(SINGLE, IncentiveParams.make(), ShockSpec("HH"), random.Random(0))
    assert max(degree(r.post_network, i, 1) for i in range(40)) == 1


def test_single_layer_rejects_spillover():
    with pytest.raises(ValueError):
        run_single_layer(SINGLE, IncentiveParams.make(e=0.5), ShockSpec("LH"), random.Random(0))
    with pytest.raises(ValueError):
        run_condition(SINGLE, IncentiveParams.make(e=0.5), ShockSpec("LH"), random.Random(0))


def test_single_layer_keeps_layer_two_empty():
    r = run_condition(SINGLE, IncentiveParams.make(d=1), ShockSpec("LH"), random.Random(0))
    assert r.post_network.edge_count(2) == 0 and r.post_metrics.spillover_frac is None


def test_one_layer_shock_needs_multiplex():
    with pytest.raises(ModeError):
        run_one_layer_shock(SINGLE, IncentiveParams.make(), ShockSpec("LH"), random.Random(0))


def test_one_layer_control_identical_to_both():
    inc = IncentiveParams.make(d=0.8, e=0.4)
    a = run_condition(MULTI, inc, ShockSpec("LL"), random.Random(4))
    b = run_one_layer_shock(MULTI, inc, ShockSpec("LL"), random.Random(4))
    assert a.post_network == b.post_network and a.rounds_post == b.rounds_post


def test_one_layer_lh_unshocked_layer_stays_low_cost():
    inc = IncentiveParams.make(e=0.4)
    layer2 = ensemble("LH", inc, MULTI, layer=2, shocked_layers="layer1")
    ll = ensemble("LL", inc, MULTI)
    hh = ensemble("HH", inc, MULTI)
    assert abs(layer2 - ll) < 0.1 * (ll - hh)


def test_one_layer_hl_layers_converge_under_spillover():
    inc = IncentiveParams.make(e=1.2)
    shocked = ensemble("HL", inc, MULTI, layer=1, shocked_layers="layer1")
    unshocked = ensemble("HL", inc, MULTI, layer=2, shocked_layers="layer1")
    hl_both = ensemble("HL", inc, MULTI)
    hh = ensemble("HH", inc, MULTI)
    # the freed layer stays below the both-layer HL level; its partner rises above HH
    assert shocked < hl_both - 0.2
    assert unshocked > hh + 0.2
    assert abs(shocked - unshocked) < hl_both - hh


def test_paired_phase_one_shared():
    inc = IncentiveParams.make(d=1.2, e=0.4)
    res = run_conditions(MULTI, inc, [ShockSpec(c) for c in ("LL", "HH", "LH", "HL")], random.Random(9))
    by = {r.condition: r for r in res}
    assert by["LL"].pre_network == by["LH"].pre_network
    assert by["HH"].pre_network == by["HL"].pre_network
    assert by["LL"].pre_network != by["HH"].pre_network


def test_run_conditions_matches_run_condition():
    inc = IncentiveParams.make(d=0.8)
    shocks = [ShockSpec(c) for c in ("LL", "HH", "LH", "HL")]
    paired = run_conditions(SINGLE, inc, shocks, random.Random(21))
    for shock, r in zip(shocks, paired):
        alone = run_condition(SINGLE, inc, shock, random.Random(21))
        assert alone.post_network == r.post_network and alone.rounds_post == r.rounds_post


def test_controls_statistically_unchanged():
    inc = IncentiveParams.make(d=1.2, e=0.4)
    for cond in ("LL", "HH"):
        pre = ensemble(cond, inc, MULTI, phase="pre", reps=8)
        post = ensemble(cond, inc, MULTI, reps=8)
        assert post == pytest.approx(pre, rel=0.05)


def test_layers_statistically_identical():
    inc = IncentiveParams.make(d=0.8, e=0.8)
    l1 = ensemble("LH", inc, MULTI, layer=1, reps=12)
    l2 = ensemble("LH", inc, MULTI, layer=2, reps=12)
    assert l1 == pytest.approx(l2, rel=0.1)


def test_result_metadata():
    r = run_condition(MULTI, IncentiveParams.make(), ShockSpec("LH"), random.Random(0))
    assert r.condition == "LH" and r.converged_pre and r.converged_post
    assert r.network("pre") is r.pre_network
    with pytest.raises(ValueError):
        r.network("mid")
