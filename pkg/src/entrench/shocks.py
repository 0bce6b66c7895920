"""Two-phase shock experiments.

Phase 1 grows a network from empty at the pre-shock cost until equilibrium;
phase 2 switches the cost (in both layers, or layer 1 only) and continues
from the phase-1 network to a new equilibrium.  Control conditions (LL, HH)
run phase 2 too, with an unchanged cost, so every condition shares one code
path.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from .core import IncentiveParams, ModeError, MultiplexNetwork, Number, exact
from .dynamics import SimConfig, run_to_equilibrium
from .metrics import MetricsRecord, measure

CONDITIONS = ("LL", "HH", "LH", "HL")
SHOCKED_LAYERS = ("both", "layer1")


@dataclass(frozen=True)
class ShockSpec:
    condition: str = "LH"
    c_low: Fraction = Fraction(1, 5)
    c_high: Fraction = Fraction(3, 5)
    shocked_layers: str = "both"

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}")
        if self.shocked_layers not in SHOCKED_LAYERS:
            raise ValueError(f"shocked_layers must be one of {SHOCKED_LAYERS}")
        lo, hi = exact(self.c_low), exact(self.c_high)
        if not lo < hi:
            raise ValueError("c_low must be below c_high")
        object.__setattr__(self, "c_low", lo)
        object.__setattr__(self, "c_high", hi)

    def _level(self, letter: str) -> Fraction:
        return self.c_low if letter == "L" else self.c_high

    @property
    def pre_cost(self) -> Fraction:
        return self._level(self.condition[0])

    @property
    def post_cost(self) -> Fraction:
        return self._level(self.condition[1])

    @property
    def post_costs(self) -> Tuple[Fraction, Fraction]:
        if self.shocked_layers == "layer1":
            return (self.post_cost, self.pre_cost)
        return (self.post_cost, self.post_cost)

    def with_condition(self, condition: str) -> "ShockSpec":
        return replace(self, condition=condition)


@dataclass
class ExperimentResult:
    shock: ShockSpec
    config: SimConfig
    incentives: IncentiveParams
    pre_metrics: MetricsRecord
    post_metrics: MetricsRecord
    pre_network: MultiplexNetwork
    post_network: MultiplexNetwork
    rounds_pre: int
    rounds_post: int
    converged_pre: bool
    converged_post: bool

    @property
    def condition(self) -> str:
        return self.shock.condition

    def network(self, phase: str) -> MultiplexNetwork:
        if phase not in ("pre", "post"):
            raise ValueError("phase must be 'pre' or 'post'")
        return self.pre_network if phase == "pre" else self.post_network


def _hook(on_round, phase):
    if on_round is None:
        return None
    return lambda log, net: on_round(phase, log, net)


def _phase1(config, incentives, shock, rng, on_round=None):
    params = incentives.with_costs(shock.pre_cost)
    net = config.empty_network()
    rounds, ok = run_to_equilibrium(net, params, config, rng, _hook(on_round, "pre"))
    return net, rounds, ok, measure(net, params, rounds)


def _phase2(config, incentives, shock, rng, pre_net, on_round=None):
    params = incentives.with_costs(*shock.post_costs)
    net = pre_net.copy()
    rounds, ok = run_to_equilibrium(net, params, config, rng, _hook(on_round, "post"))
    return net, rounds, ok, measure(net, params, rounds)


def _validate(config: SimConfig, incentives: IncentiveParams) -> None:
    if config.single_layer and incentives.e != 0:
        raise ValueError("spillover benefit e must be 0 in single-layer mode")


def run_condition(config: SimConfig, incentives: IncentiveParams, shock: ShockSpec,
                  rng: random.Random, on_round=None) -> ExperimentResult:
    """Both phases for one condition.  Costs in ``incentives`` are ignored.

    ``on_round(phase, log, net)`` is called after every round, with phase
    "pre" or "post".
    """
    _validate(config, incentives)
    if shock.shocked_layers == "layer1" and config.single_layer:
        raise ModeError("one-layer shocks need a multiplex network")
    pre = _phase1(config, incentives, shock, rng, on_round)
    post = _phase2(config, incentives, shock, rng, pre[0], on_round)
    return _result(config, incentives, shock, pre, post)


def _result(config, incentives, shock, pre, post) -> ExperimentResult:
    return ExperimentResult(
        shock=shock, config=config, incentives=incentives,
        pre_metrics=pre[3], post_metrics=post[3],
        pre_network=pre[0], post_network=post[0],
        rounds_pre=pre[1], rounds_post=post[1],
        converged_pre=pre[2], converged_post=post[2],
    )


def run_one_layer_shock(config: SimConfig, incentives: IncentiveParams, shock: ShockSpec,
                        rng: random.Random) -> ExperimentResult:
    if config.single_layer:
        raise ModeError("one-layer shocks need a multiplex network")
    return run_condition(config, incentives, replace(shock, shocked_layers="layer1"), rng)


def run_single_layer(config: SimConfig, incentives: IncentiveParams, shock: ShockSpec,
                     rng: random.Random) -> ExperimentResult:
    if incentives.e != 0:
        raise ValueError("spillover benefit e must be 0 in single-layer mode")
    return run_condition(replace(config, mode="single"), incentives, shock, rng)


def run_conditions(config: SimConfig, incentives: IncentiveParams, shocks: Sequence[ShockSpec],
                   rng: random.Random) -> List[ExperimentResult]:
    """Run several conditions from one shared rng state (paired seeding).

    Conditions with the same pre-shock cost share one phase-1 run; each
    result is identical to ``run_condition`` with a fresh rng in that state.
    """
    _validate(config, incentives)
    state0 = rng.getstate()
    cache: Dict[Fraction, Tuple[tuple, object]] = {}
    out = []
    for shock in shocks:
        if shock.shocked_layers == "layer1" and config.single_layer:
            raise ModeError("one-layer shocks need a multiplex network")
        if shock.pre_cost not in cache:
            r = random.Random()
            r.setstate(state0)
            pre = _phase1(config, incentives, shock, r)
            cache[shock.pre_cost] = (pre, r.getstate())
        pre, state1 = cache[shock.pre_cost]
        r = random.Random()
        r.setstate(state1)
        post = _phase2(config, incentives, shock, r, pre[0])
        out.append(_result(config, incentives, shock, pre, post))
    return out
