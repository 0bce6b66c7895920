"""Acceptance suite: one PASS/FAIL line per exit criterion.

Desk scale throughout: N=40, p=10, nu=0 unless a criterion says otherwise.
Seeds are fixed per criterion and were not tuned.
"""

from __future__ import annotations

import math
import random
import statistics
import subprocess
import sys
from fractions import Fraction as F

import pytest

from entrench.core import (
    IncentiveParams,
    MultiplexNetwork,
    marginal_add,
    marginal_drop,
    marginal_rewire,
)
from entrench.dynamics import SimConfig, run_to_equilibrium
from entrench.harness import SweepSpec, default_grid, run_noise_study, noise_slope, run_sweep
from entrench.metrics import UndefinedResilience, resilience
from entrench.oracle import (
    brute_force_stability,
    enumerate_ego_states,
    favored_transitions,
    random_spillover_baseline,
    reference_utility,
    resilience_onset_threshold,
    transition_witness,
)

pytestmark = pytest.mark.acceptance

LH_ONLY = ("LL", "HH", "LH")


def sweep(**kw):
    return run_sweep(SweepSpec(**kw))


def cell_delta(res, d, e=0, cond="LH", layer=1, n=None):
    return res.resilience(res.cell_index(d, e, n=n), cond, layer)


def point_sweeps(cells, base, reps, conditions=LH_ONLY, **kw):
    """One single-cell sweep per (d, e), keyed by the cell."""
    out = {}
    for k, (d, e) in enumerate(cells):
        res = sweep(d_values=(d,), e_values=(e,), conditions=conditions, replicates=reps,
                    base_seed=base + k, **kw)
        out[(d, e)] = res
    return out


# --- shared sweeps ---

@pytest.fixture(scope="module")
def hh_baseline():
    return sweep(d_values=(F(0),), e_values=(F(0),), conditions=("HH",), replicates=100, base_seed=1000)


@pytest.fixture(scope="module")
def triangle_curve():
    grid = tuple(F(k, 5) for k in range(11))  # 0, 0.2, ..., 2.0
    return sweep(mode="single", d_values=grid, e_values=(F(0),), conditions=LH_ONLY,
                 replicates=50, base_seed=2000)


@pytest.fixture(scope="module")
def spillover_curve():
    return sweep(d_values=(F(0),), e_values=(F(2, 5), F(6, 5), F(2)), conditions=LH_ONLY,
                 replicates=50, base_seed=3000)


# --- criteria ---

def test_c01_hh_baseline_degree(hh_baseline, report):
    res = hh_baseline
    k = statistics.fmean(res.values(0, "HH", phase="pre"))
    rows = [r for r in res.rows if r.phase == "pre" and r.layer == 1]
    fast = sum(r.converged and r.rounds <= 500 for r in rows) / len(rows)
    ok = abs(k - 1.0) <= 0.05 and fast >= 0.95
    report("1", ok, f"HH d=e=0 layer-1 degree {k:.4f} (1.00 +/- 0.05); "
                    f"converged within 500 rounds: {fast:.0%} (>= 95%)")
    assert ok


def test_c02_triangle_resilience_curve(triangle_curve, report):
    res = triangle_curve
    grid = [F(k, 5) for k in range(11)]
    delta = {d: cell_delta(res, d) for d in grid}
    onset = next((d for d in grid if delta[d] >= 0.1), None)
    target = resilience_onset_threshold(F(3, 5))
    ok = (delta[F(2, 5)] < 0.1 and 0.1 < delta[F(1)] < 0.9 and delta[F(8, 5)] > 0.9
          and onset is not None and abs(onset - target) <= F(1, 5))
    curve = " ".join(f"{float(d):g}:{delta[d]:.2f}" for d in grid)
    report("2", ok, f"single-layer delta_LH d=0.4 {delta[F(2, 5)]:.3f} (<0.1), d=1.0 {delta[F(1)]:.3f} "
                    f"(0.1..0.9), d=1.6 {delta[F(8, 5)]:.3f} (>0.9); onset d={float(onset):g} "
                    f"vs oracle {float(target):g} +/- 0.2 [{curve}]")
    assert ok


def test_c03_spillover_resilience(spillover_curve, report):
    res = spillover_curve
    lo, mid, hi = (cell_delta(res, 0, e) for e in (F(2, 5), F(6, 5), F(2)))
    ok = lo < 0.1 and 0.1 < mid < 0.9 and hi > 0.9
    report("3", ok, f"spillover-only delta_LH e=0.4 {lo:.3f} (<0.1), e=1.2 {mid:.3f} (partial), "
                    f"e=2.0 {hi:.3f} (>0.9)")
    assert ok


def test_c04_additive_mixed_onset(report):
    below = [(F(0), F(3, 5)), (F(1, 5), F(2, 5)), (F(2, 5), F(1, 5)), (F(3, 5), F(0))]
    above = [(F(1, 5), F(4, 5)), (F(2, 5), F(3, 5)), (F(3, 5), F(2, 5)), (F(4, 5), F(1, 5))]
    runs = point_sweeps(below + above, 4000, 50)
    delta = {c: cell_delta(r, *c) for c, r in runs.items()}
    ok = all(delta[c] < 0.1 for c in below) and all(delta[c] > 0.1 for c in above)
    fmt = lambda cells: " ".join(f"({float(d):g},{float(e):g}):{delta[(d, e)]:.3f}" for d, e in cells)
    report("4", ok, f"d+e=0.6 -> {fmt(below)} (all <0.1); d+e=1.0 -> {fmt(above)} (all >0.1)")
    assert ok


def test_c05_spillover_fraction(hh_baseline, spillover_curve, report):
    hh_cons = sweep(d_values=(F(0), F(6, 5), F(2)), e_values=(F(6, 5),), conditions=("HH",),
                    replicates=20, base_seed=5000)
    cons = [hh_cons.mean(c, "HH", "spillover_frac") for c in range(3)]
    base = hh_baseline.mean(0, "HH", "spillover_frac")
    target = float(random_spillover_baseline(40))
    ll = spillover_curve.mean(spillover_curve.cell_index(0, 2), "LL", "spillover_frac")
    ok = all(x > 0.95 for x in cons) and abs(base - target) <= 0.03 and ll > 0.9
    report("5", ok, f"HH e=1.2 d in {{0,1.2,2}} -> {', '.join(f'{x:.3f}' for x in cons)} (>0.95); "
                    f"HH e=d=0 -> {base:.4f} (1/39={target:.4f} +/- 0.03); LL e=2 d=0 -> {ll:.3f} (>0.9)")
    assert ok


def _delta_and_se(res, cell, cond, layer=1):
    samples = res.resilience_samples(cell, cond, layer)
    return statistics.fmean(samples), statistics.stdev(samples) / math.sqrt(len(samples))


def test_c06_hl_dip(report):
    runs = point_sweeps([(F(2, 5), F(2, 5)), (F(2), F(2))], 6000, 100, conditions=("LL", "HH", "HL"))
    small, se_small = _delta_and_se(runs[(F(2, 5), F(2, 5))], 0, "HL")
    big, se_big = _delta_and_se(runs[(F(2), F(2))], 0, "HL")
    pooled = math.hypot(se_small, se_big)
    ok = small - big > 2 * pooled
    report("6", ok, f"delta_HL (0.4,0.4) {small:.3f} vs (2,2) {big:.3f}; gap {small - big:.3f} "
                    f"> 2 x pooled SE {2 * pooled:.3f}")
    assert ok


def test_c07_one_layer_shock(report):
    # min over 36 ratio-of-means estimates; 20 reps leaves SE ~0.09 in the high-degree corner
    res = sweep(conditions=LH_ONLY, shocked_layers="layer1", replicates=100, base_seed=7000)
    vals, clear_misses, own = {}, 0, []
    for idx, (_, _, d, e) in enumerate(res.spec.cells()):
        try:
            vals[(d, e)] = res.resilience(idx, "LH", layer=2)
        except UndefinedResilience:
            continue
        _, se = _delta_and_se(res, idx, "LH", layer=2)
        clear_misses += vals[(d, e)] + 2 * se < 0.9
        # diagnostic only: the same layer normalised by its own (layer-2) controls
        own.append(resilience(res.mean(idx, "LH", layer=2), res.mean(idx, "LL", layer=2),
                              res.mean(idx, "HH", layer=2)))
    worst = min(vals, key=vals.get)
    ok = len(vals) == 36 and vals[worst] > 0.9
    report("7", ok, f"layer-1-only LH: unshocked layer-2 delta over {len(vals)} grid cells, "
                    f"min {vals[worst]:.3f} at (d,e)=({float(worst[0]):g},{float(worst[1]):g}) (>0.9); "
                    f"cells more than 2 SE below 0.9: {clear_misses}; "
                    f"min against layer-2 controls {min(own):.3f}")
    assert ok


def _band(res):
    out = {}
    for idx, (_, _, d, e) in enumerate(res.spec.cells()):
        try:
            out[(d, e)] = res.resilience(idx, "LH")
        except UndefinedResilience:
            out[(d, e)] = None
    return out


def test_c08_lower_cost(report):
    low = _band(sweep(conditions=LH_ONLY, replicates=10, c_high=F(3, 10), base_seed=8000))
    ref = _band(sweep(conditions=LH_ONLY, replicates=10, c_high=F(3, 5), base_seed=8100))
    mid = lambda tab: sum(v is not None and 0.1 < v < 0.9 for v in tab.values())
    small = {c: v for c, v in low.items() if c[0] <= F(2, 5) and c[1] <= F(2, 5) and v is not None}
    large = {c: v for c, v in low.items() if c[0] >= F(8, 5) and c[1] >= F(8, 5)}
    zero_zone = [c for c, v in small.items() if abs(v) < 0.1]
    ok = bool(zero_zone) and all(v is not None and v > 0.9 for v in large.values()) and mid(low) < mid(ref)
    fmt = lambda tab: " ".join(f"({float(d):g},{float(e):g}):{v:.2f}" for (d, e), v in sorted(tab.items()))
    report("8", ok, f"c_high=0.3: small cells {fmt(small)} (a zero zone exists: {len(zero_zone)} cell(s)); "
                    f"large cells min {min(large.values()):.3f} (>0.9); intermediate cells "
                    f"{mid(low)} vs {mid(ref)} at c_high=0.6 (fewer)")
    assert ok


def test_c09_noise_reversion(report):
    cfg = SimConfig(mode="single", max_rounds=20000)
    rows = run_noise_study(cfg, IncentiveParams.make(d=1), [1e-3, 1e-2], replicates=10, base_seed=9000)
    ratios = [r.median_rounds * r.nu if r.median_rounds else math.inf for r in rows]
    slope = noise_slope(rows) if all(r.median_rounds for r in rows) else math.nan
    ok = all(1 / 3 <= x <= 3 for x in ratios) and -1.3 <= slope <= -0.7
    desc = "; ".join(f"nu={r.nu:g} median {r.median_rounds} rounds (x nu = {x:.2f}, censored {r.censored})"
                     for r, x in zip(rows, ratios))
    report("9", ok, f"single-layer d=1.0 LH: {desc}; log-log slope {slope:.3f} (-1.3..-0.7)")
    assert ok


def test_c10_size_insensitivity(triangle_curve, report):
    grid = default_grid()
    other = sweep(mode="single", d_values=tuple(grid), e_values=(F(0),), n_values=(20, 80),
                  conditions=LH_ONLY, replicates=50, base_seed=10000)
    curves = {40: [cell_delta(triangle_curve, d) for d in grid]}
    for n in (20, 80):
        curves[n] = [cell_delta(other, d, n=n) for d in grid]
    dev = max(abs(curves[n][k] - curves[40][k]) for n in (20, 80) for k in range(len(grid)))
    spread = max(max(c[k] for c in curves.values()) - min(c[k] for c in curves.values())
                 for k in range(len(grid)))
    ok = dev <= 0.15
    text = "; ".join(f"N={n}: " + " ".join(f"{v:.2f}" for v in curves[n]) for n in (20, 40, 80))
    report("10", ok, f"max |delta_N - delta_40| {dev:.3f} (<= 0.15), max spread {spread:.3f} "
                     f"over d={[float(d) for d in grid]} [{text}]")
    assert ok


def _random_state(rng):
    n = rng.randrange(2, 10)
    net = MultiplexNetwork(n)
    dens = rng.random()
    for layer in (1, 2):
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < dens:
                    net.add_edge(u, v, layer)
    frac = lambda: F(rng.randrange(0, 31), 10)
    params = IncentiveParams(c=(frac(), frac()), d=frac(), e=frac())
    return net, params


def test_c11a_incremental_equals_recount(report):
    rng = random.Random(11000)
    checked = mismatches = 0
    while checked < 10_000:
        net, p = _random_state(rng)
        i = rng.randrange(net.n)
        held = net.ties(i)
        absent = [(j, l) for l in (1, 2) for j in range(net.n) if j != i and not net.has_edge(i, j, l)]
        kind = rng.choice(("add", "drop", "rewire"))
        after = net.copy()
        if kind == "add" and absent:
            j, l = rng.choice(absent)
            got = marginal_add(net, p, i, j, l)
            after.add_edge(i, j, l)
        elif kind == "drop" and held:
            h, l = rng.choice(held)
            got = marginal_drop(net, p, i, h, l)
            after.remove_edge(i, h, l)
        elif kind == "rewire" and held and absent:
            (h, lh), (j, lj) = rng.choice(held), rng.choice(absent)
            got = marginal_rewire(net, p, i, drop=(h, lh), add=(j, lj))
            after.add_edge(i, j, lj)
            after.remove_edge(i, h, lh)
        else:
            continue
        checked += 1
        mismatches += got != reference_utility(after, p, i) - reference_utility(net, p, i)
    ok = mismatches == 0
    report("11a", ok, f"{checked} random states/moves, {mismatches} exact mismatches against recount")
    assert ok


def test_c11b_converged_small_networks_are_stable(report):
    rng = random.Random(11100)
    costs, benefits = (F(1, 5), F(3, 10), F(3, 5)), (F(0), F(2, 5), F(4, 5), F(6, 5), F(2))
    runs = converged = unstable = 0
    examples = []
    for run in range(400):
        n = rng.randrange(3, 9)
        p = IncentiveParams.make(rng.choice(costs), d=rng.choice(benefits), e=rng.choice(benefits))
        cfg = SimConfig(n=n, p=n - 1, max_rounds=2000)
        net = cfg.empty_network()
        _, ok_run = run_to_equilibrium(net, p, cfg, rng)
        runs += 1
        if not ok_run:
            continue
        converged += 1
        if not brute_force_stability(net, p):
            unstable += 1
            if len(examples) < 3:
                examples.append(f"n={n} c={float(p.c[0]):g} d={float(p.d):g} e={float(p.e):g}")
    ok = unstable == 0
    report("11b", ok, f"{converged}/{runs} runs converged (n<=8, p=n-1); {unstable} fail the exhaustive "
                      f"stability check" + (f", e.g. {'; '.join(examples)}" if examples else ""))
    assert ok


def test_c11c_transition_signs_match_engine(report):
    checked = mismatches = 0
    sign = lambda x: (x > 0) - (x < 0)
    for kind, max_t in (("spillover", 4), ("triangle", 5), ("full", 3)):
        rows = enumerate_ego_states(max_t, kind)
        for d in (F(0), F(2, 5), F(4, 5), F(6, 5), F(2)):
            for e in (F(0), F(4, 5), F(2)):
                lo = IncentiveParams.make(F(1, 5), d=d, e=e)
                hi = IncentiveParams.make(F(3, 5), d=d, e=e)
                for t in favored_transitions(rows, lo, hi, kind=kind):
                    net, (node, layer) = transition_witness(t)
                    fn = marginal_add if t.kind == "add" else marginal_drop
                    for params, form in ((lo, t.gain_low), (hi, t.gain_high)):
                        checked += 1
                        mismatches += sign(fn(net, params, 0, node, layer)) != sign(form(d, e))
    ok = mismatches == 0 and checked > 0
    report("11c", ok, f"{checked} transition/cost/(d,e) combinations, {mismatches} sign mismatches")
    assert ok


def test_c12_byte_identical_csv(tmp_path, report):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cmd = [sys.executable, "-m", "entrench.cli", "sweep", "--d-values", "0,1.2", "--e-values", "0,1.2",
               "--replicates", "3", "--seed", "12000", "--out-dir", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        outs.append({name: (out / name).read_bytes() for name in ("rows.csv", "aggregate.csv", "seeds.csv")})
    same = outs[0] == outs[1]
    size = sum(len(b) for b in outs[0].values())
    report("12", same, f"two separate executions, {size} bytes of CSV, identical: {same}")
    assert same
