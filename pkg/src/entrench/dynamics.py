"""Round-based tie formation: sample, best add, rewire fallback, drop.

Each agent, in a fresh random order every round, samples ``p`` others and
then, in order:

1. proposes its best strictly-improving add among the sampled nodes and both
   layers (or, under noise, a random absent tie).  The partner accepts only
   if the tie strictly improves its own utility (or by noise).
2. if no add improves utility, looks for the best atomic rewire (drop one
   held tie, add one sampled tie) and proposes the add leg.  The drop only
   happens once the partner accepts.
3. if nothing was dropped this turn, drops the held tie (except one added
   this turn) whose removal most improves utility.

Only strict improvements are acted on and at most one proposal is made per
turn.  With ``nu > 0`` the quiet-round stopping rule is disabled.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, List, Optional, TextIO, Tuple

from .core import (
    IncentiveParams,
    Move,
    MoveKind,
    MultiplexNetwork,
    _bits,
    add_gain,
    drop_gain,
)

MODES = ("single", "multiplex")
NOISE_STAGES = ("add", "accept", "drop")


@dataclass(frozen=True)
class SimConfig:
    n: int = 40
    p: int = 10
    nu: float = 0.0
    mode: str = "multiplex"
    quiet_rounds: int = 5
    max_rounds: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError("nu must lie in [0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.quiet_rounds < 1 or self.max_rounds < 1:
            raise ValueError("quiet_rounds and max_rounds must be positive")

    @property
    def single_layer(self) -> bool:
        return self.mode == "single"

    def empty_network(self) -> MultiplexNetwork:
        return MultiplexNetwork(self.n, single_layer=self.single_layer)


@dataclass
class RoundLog:
    index: int
    moves: List[Move] = field(default_factory=list)
    adds: int = 0
    drops: int = 0
    rewires: int = 0
    rejected: int = 0

    @property
    def edges_added(self) -> int:
        return self.adds + self.rewires

    @property
    def edges_dropped(self) -> int:
        return self.drops + self.rewires

    @property
    def quiet(self) -> bool:
        return self.adds == 0 and self.drops == 0 and self.rewires == 0


def sample_candidates(rng: random.Random, n: int, self_node: int, p: int) -> List[int]:
    """``min(p, n-1)`` distinct nodes other than ``self_node``, uniformly."""
    k = min(p, n - 1)
    if k == n - 1:
        return [j for j in range(n) if j != self_node]
    return [x if x < self_node else x + 1 for x in rng.sample(range(n - 1), k)]


def noisy_override(rng: random.Random, nu: float, stage: str) -> bool:
    """True with probability ``nu``; no random draw is consumed when nu == 0."""
    if stage not in NOISE_STAGES:
        raise ValueError(f"unknown noise stage {stage!r}")
    return nu > 0 and rng.random() < nu


def _pick(rng: random.Random, options: list):
    return options[0] if len(options) == 1 else options[rng.randrange(len(options))]


def _frac(x: int, scale: int) -> Fraction:
    return Fraction(x, scale)


def agent_turn(net: MultiplexNetwork, params: IncentiveParams, config: SimConfig,
               rng: random.Random, i: int) -> Move:
    """Run one agent's decision procedure, mutating ``net``; returns the Move."""
    sp = params.scaled
    adj = net.adj
    layers = net.layers
    nu = config.nu
    sample = sample_candidates(rng, net.n, i, config.p)
    noise = []
    added = dropped = proposal = None
    accepted = acc_gain = d_gain = None
    via_rewire = False
    rewire_drop = None

    # (1) add
    if noisy_override(rng, nu, "add"):
        noise.append("add")
        options = [(j, la) for la in layers for j in range(net.n)
                   if j != i and not adj[la][i] >> j & 1]
        if options:
            proposal = _pick(rng, options)
    else:
        best, cands = 0, []
        for j in sample:
            for la in layers:
                if adj[la][i] >> j & 1:
                    continue
                g = add_gain(adj, sp, i, j, la)
                if g > best:
                    best, cands = g, [(j, la)]
                elif g == best and cands:
                    cands.append((j, la))
        if cands:
            proposal = _pick(rng, cands)

    # (2) rewire, only when no add was worth proposing
    if proposal is None:
        held = [(h, ld, drop_gain(adj, sp, i, h, ld)) for ld in layers for h in _bits(adj[ld][i])]
        if held:
            adds = [(j, la, add_gain(adj, sp, i, j, la))
                    for j in sample for la in layers if not adj[la][i] >> j & 1]
            best, cands = 0, []
            for h, ld, gd in held:
                for j, la, ga in adds:
                    if ld == la:
                        g = gd + ga + 2 * sp.c[la]
                        if adj[la][j] >> h & 1:
                            g -= sp.d
                    else:
                        g = gd + ga - sp.e if j == h else gd + ga
                    if g > best:
                        best, cands = g, [((h, ld), (j, la))]
                    elif g == best and cands:
                        cands.append(((h, ld), (j, la)))
            if cands:
                rewire_drop, proposal = _pick(rng, cands)
                via_rewire = True

    if proposal is not None:
        j, la = proposal
        acc = add_gain(adj, sp, j, i, la)
        acc_gain = _frac(acc, sp.scale)
        if noisy_override(rng, nu, "accept"):
            noise.append("accept")
            accepted = True
        else:
            accepted = acc > 0
        if accepted:
            net.add_edge(i, j, la)
            added = proposal
            if rewire_drop is not None:
                h, ld = rewire_drop
                # exact atomic gain, recomputed after the add leg
                d_gain = _frac(drop_gain(adj, sp, i, h, ld), sp.scale)
                net.remove_edge(i, h, ld)
                dropped = rewire_drop

    # (3) drop, unless a tie was already dropped this turn
    if dropped is None:
        exclude = added
        if noisy_override(rng, nu, "drop"):
            noise.append("drop")
            held = [(h, ld) for ld in layers for h in _bits(adj[ld][i]) if (h, ld) != exclude]
            if held:
                h, ld = _pick(rng, held)
                d_gain = _frac(drop_gain(adj, sp, i, h, ld), sp.scale)
                net.remove_edge(i, h, ld)
                dropped = (h, ld)
        else:
            best, cands = 0, []
            for ld in layers:
                for h in _bits(adj[ld][i]):
                    if (h, ld) == exclude:
                        continue
                    g = drop_gain(adj, sp, i, h, ld)
                    if g > best:
                        best, cands = g, [(h, ld)]
                    elif g == best and cands:
                        cands.append((h, ld))
            if cands:
                h, ld = _pick(rng, cands)
                d_gain = _frac(best, sp.scale)
                net.remove_edge(i, h, ld)
                dropped = (h, ld)

    if proposal is None and added is None and dropped is None and not noise:
        return Move(MoveKind.NOOP, i)
    return Move.from_legs(
        i, added, dropped, proposal=proposal, accepted=accepted, acceptor_gain=acc_gain,
        drop_gain=d_gain, noise=tuple(noise), via_rewire=via_rewire and dropped is not None,
    )


def run_round(net: MultiplexNetwork, params: IncentiveParams, config: SimConfig,
              rng: random.Random, index: int = 0) -> RoundLog:
    order = list(range(net.n))
    rng.shuffle(order)
    log = RoundLog(index)
    for i in order:
        move = agent_turn(net, params, config, rng, i)
        log.moves.append(move)
        kind = move.kind
        if kind is MoveKind.ADD:
            log.adds += 1
        elif kind is MoveKind.DROP:
            log.drops += 1
        elif kind is MoveKind.REWIRE:
            log.rewires += 1
        if move.accepted is False:
            log.rejected += 1
    return log


def run_to_equilibrium(net: MultiplexNetwork, params: IncentiveParams, config: SimConfig,
                       rng: random.Random,
                       on_round: Optional[Callable[[RoundLog, MultiplexNetwork], Optional[bool]]] = None,
                       ) -> Tuple[int, bool]:
    """Run until ``quiet_rounds`` consecutive quiet rounds or ``max_rounds``.

    ``on_round`` sees every log; returning True stops the run early (the run
    is then reported as not converged).
    """
    quiet = 0
    noisy = config.nu > 0
    for r in range(1, config.max_rounds + 1):
        log = run_round(net, params, config, rng, r)
        if on_round is not None and on_round(log, net):
            return r, False
        if noisy:
            continue
        quiet = quiet + 1 if log.quiet else 0
        if quiet >= config.quiet_rounds:
            return r, True
    return config.max_rounds, False


EVENT_COLUMNS = ("round", "actor", "kind", "add_node", "add_layer", "drop_node", "drop_layer")


def write_event_log(logs: Iterable[RoundLog], fh: TextIO) -> None:
    """CSV of every realized (non-NoOp) move."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for log in logs:
        for m in log.moves:
            if m.kind is MoveKind.NOOP:
                continue
            a = m.added or ("", "")
            d = m.dropped or ("", "")
            w.writerow((log.index, m.actor, m.kind.value, a[0], a[1], d[0], d[1]))
