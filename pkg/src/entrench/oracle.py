"""Analytical thresholds, ego-network utility tables and exhaustive checks.

Everything here is evaluated over exact rationals and is kept independent of
the incremental marginal-utility code in ``core``: utilities are rebuilt
from explicit neighbour sets rather than bitset popcounts.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

from .core import IncentiveParams, MultiplexNetwork, Number, exact

C_LOW = Fraction(1, 5)
C_HIGH = Fraction(3, 5)


# --- closed-form thresholds -------------------------------------------------

def resilience_onset_threshold(c_high: Number) -> Fraction:
    """Smallest triangle benefit for which a closed-triangle node keeps both ties.

    A degree-2 node in a triangle gains ``-1 + 3c - d`` by dropping a tie.
    """
    c = exact(c_high)
    if c <= 0:
        raise ValueError("c_high must be positive")
    return 3 * c - 1


def cost_regime_check(c_low: Number, c_high: Number) -> bool:
    """True when a second tie is worth adding de novo at c_low but not at c_high."""
    lo, hi = exact(c_low), exact(c_high)
    if not lo < hi:
        raise ValueError("c_low must be below c_high")

    def second_tie_pays(c):
        return 1 - c < 2 - 4 * c

    return second_tie_pays(lo) and not second_tie_pays(hi)


def _keep_kth_tie(c: Fraction, k: int) -> Fraction:
    # spillover benefit at which dropping one of k all-spillover ties stops paying
    return (2 * k - 1) * c - 1


def spillover_thresholds(c_high: Number = C_HIGH, low_cost_degree: int = 3
                         ) -> Tuple[Fraction, Fraction, Fraction]:
    """(partial-resilience onset, perfect resilience, HH consolidation) in e.

    Perfect resilience means the typical low-cost degree (3) survives; the
    consolidation threshold is where completing a spillover pays for a
    second tie in one layer.
    """
    c = exact(c_high)
    partial = _keep_kth_tie(c, 2)
    perfect = _keep_kth_tie(c, low_cost_degree)
    # a second layer-1 tie to a layer-2 partner gains 1 - 3c + e
    consolidation = 3 * c - 1
    return partial, perfect, consolidation


def mixed_onset_threshold(c_high: Number = C_HIGH) -> Fraction:
    """Resilience onset for the combined benefit d + e."""
    return resilience_onset_threshold(c_high)


def random_spillover_baseline(n: int) -> Fraction:
    """Expected spillover fraction when both layers are random perfect matchings."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return Fraction(1, n - 1)


# --- symbolic utilities -----------------------------------------------------

@dataclass(frozen=True)
class LinearForm:
    """``const + cd*d + ce*e`` with exact coefficients."""

    const: Fraction
    cd: Fraction = Fraction(0)
    ce: Fraction = Fraction(0)

    def __add__(self, other: "LinearForm") -> "LinearForm":
        return LinearForm(self.const + other.const, self.cd + other.cd, self.ce + other.ce)

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return LinearForm(self.const - other.const, self.cd - other.cd, self.ce - other.ce)

    def __call__(self, d: Number, e: Number) -> Fraction:
        return self.const + self.cd * exact(d) + self.ce * exact(e)

    def positive(self, d: Number, e: Number) -> bool:
        return self(d, e) > 0

    @property
    def always_positive(self) -> bool:
        """Positive for every d, e >= 0."""
        return self.const > 0 and self.cd >= 0 and self.ce >= 0

    @property
    def never_positive(self) -> bool:
        return self.const <= 0 and self.cd <= 0 and self.ce <= 0

    def condition(self) -> str:
        """The strict inequality under which this form is positive."""
        if self.always_positive:
            return "always"
        if self.never_positive:
            return "never"
        if self.cd <= 0 and self.ce <= 0:
            return f"{_terms(-self.cd, -self.ce)} < {_num(self.const)}"
        return f"{_terms(self.cd, self.ce)} > {_num(-self.const)}"

    def __str__(self) -> str:
        terms = _terms(self.cd, self.ce)
        if not terms:
            return _num(self.const)
        if not self.const:
            return terms
        return f"{_num(self.const)} {'-' if terms.startswith('-') else '+'} {terms.lstrip('-')}"


def _num(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{float(x):g}"


def _terms(cd: Fraction, ce: Fraction) -> str:
    bits = []
    for coef, sym in ((cd, "d"), (ce, "e")):
        if not coef:
            continue
        mag = "" if abs(coef) == 1 else f"{_num(abs(coef))}*"
        if not bits:
            bits.append(("-" if coef < 0 else "") + mag + sym)
        else:
            bits.append(("- " if coef < 0 else "+ ") + mag + sym)
    return " ".join(bits)


@dataclass(frozen=True, order=True)
class EgoState:
    t1: int
    t2: int = 0
    v: int = 0
    z1: int = 0
    z2: int = 0

    def __post_init__(self):
        if min(self.t1, self.t2, self.v, self.z1, self.z2) < 0:
            raise ValueError("ego counts must be non-negative")
        if self.v > min(self.t1, self.t2):
            raise ValueError("spillover count exceeds a layer degree")
        if self.z1 > comb(self.t1, 2) or self.z2 > comb(self.t2, 2):
            raise ValueError("more triangles than neighbour pairs")

    def t(self, layer: int) -> int:
        return self.t1 if layer == 1 else self.t2

    def z(self, layer: int) -> int:
        return self.z1 if layer == 1 else self.z2

    def swapped(self) -> "EgoState":
        return EgoState(self.t2, self.t1, self.v, self.z2, self.z1)

    def canonical(self) -> "EgoState":
        return min(self, self.swapped())

    def with_layer(self, layer: int, t: int, z: int, v: int) -> "EgoState":
        if layer == 1:
            return EgoState(t, self.t2, v, z, self.z2)
        return EgoState(self.t1, t, v, self.z1, z)


def ego_utility(state: EgoState, c: Number | Tuple[Number, Number]) -> LinearForm:
    """Symbolic utility of an ego configuration at cost ``c`` (per layer)."""
    c1, c2 = (c, c) if not isinstance(c, tuple) else c
    c1, c2 = exact(c1), exact(c2)
    const = state.t1 - c1 * state.t1 ** 2 + state.t2 - c2 * state.t2 ** 2
    return LinearForm(Fraction(const), Fraction(state.z1 + state.z2), Fraction(state.v))


@dataclass(frozen=True)
class EgoRow:
    state: EgoState
    u_low: LinearForm
    u_high: LinearForm


KINDS = ("spillover", "triangle", "full")


def enumerate_ego_states(max_t: int, kind: str = "spillover", unordered: Optional[bool] = None,
                         include_empty: bool = False, c_low: Number = C_LOW,
                         c_high: Number = C_HIGH) -> List[EgoRow]:
    """All ego configurations with per-layer degree at most ``max_t``.

    ``spillover``: two layers, no triangles.  With the defaults (layers
    unordered, isolated ego excluded) ``max_t=4`` yields 34 states.
    ``triangle``: layer 1 only, any triangle count.  ``full``: both.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if not 0 <= max_t <= 6:
        raise ValueError("max_t must be small (0..6)")
    if unordered is None:
        unordered = kind != "triangle"
    states = set()
    t2_range = range(1) if kind == "triangle" else range(max_t + 1)
    for t1 in range(max_t + 1):
        for t2 in t2_range:
            for v in range(min(t1, t2) + 1):
                zr1 = range(1) if kind == "spillover" else range(comb(t1, 2) + 1)
                zr2 = range(1) if kind != "full" else range(comb(t2, 2) + 1)
                for z1 in zr1:
                    for z2 in zr2:
                        s = EgoState(t1, t2, v, z1, z2)
                        if not include_empty and t1 + t2 == 0:
                            continue
                        states.add(s.canonical() if unordered else s)
    rows = [EgoRow(s, ego_utility(s, c_low), ego_utility(s, c_high)) for s in sorted(states)]
    return rows


EGO_COLUMNS = ("t1", "t2", "v", "z1", "z2", "u_low", "u_high", "u_low_at", "u_high_at")


def write_ego_table(rows: Sequence[EgoRow], fh: TextIO, d: Number = 0, e: Number = 0) -> None:
    """CSV with symbolic utilities and their values at the given (d, e)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EGO_COLUMNS)
    for r in rows:
        s = r.state
        w.writerow((s.t1, s.t2, s.v, s.z1, s.z2, str(r.u_low), str(r.u_high),
                    float(r.u_low(d, e)), float(r.u_high(d, e))))


# --- favoured transitions ---------------------------------------------------

@dataclass(frozen=True)
class TransitionEdge:
    source: EgoState
    target: EgoState
    kind: str          # "add" | "drop"
    layer: int
    triangles: int     # triangles closed (add) or lost (drop)
    spillover: int     # 1 if the moved tie is (or becomes) a spillover pair
    gain_low: LinearForm
    gain_high: LinearForm
    favored_under: str  # "both" | "low" | "high" | "neither" at the given d, e

    @property
    def style(self) -> str:
        """solid when favoured under some cost for all d, e; dashed if conditional."""
        forms = (self.gain_low, self.gain_high)
        if any(f.always_positive for f in forms):
            return "solid"
        if all(f.never_positive for f in forms):
            return "none"
        return "dashed"


def _classify(low: bool, high: bool) -> str:
    return {(True, True): "both", (True, False): "low", (False, True): "high",
            (False, False): "neither"}[(low, high)]


def _drop_triangle_range(t: int, z: int) -> range:
    # triangles a single neighbour can sit in, given t neighbours and z closed pairs
    return range(max(0, z - comb(t - 1, 2)), min(z, t - 1) + 1)


def _moves(state: EgoState, kind: str):
    layers = (1,) if kind == "triangle" else (1, 2)
    for layer in layers:
        other = 3 - layer
        t, z, v = state.t(layer), state.z(layer), state.v
        spills = [0] if kind == "triangle" else [0, 1]
        ks_add = [0] if kind == "spillover" else range(t + 1)
        for s in spills:
            if s and state.t(other) - v < 1:
                continue
            for k in ks_add:
                yield "add", layer, k, s, state.with_layer(layer, t + 1, z + k, v + s)
        if t == 0:
            continue
        for s in spills:
            if (s and v < 1) or (not s and t - v < 1):
                continue
            ks = [0] if kind == "spillover" else _drop_triangle_range(t, z)
            for k in ks:
                yield "drop", layer, k, s, state.with_layer(layer, t - 1, z - k, v - s)


def favored_transitions(states: Sequence, params_low: IncentiveParams,
                        params_high: IncentiveParams, kind: Optional[str] = None
                        ) -> List[TransitionEdge]:
    """Single-tie moves between enumerated ego states, with exact favourability.

    ``states`` may be EgoRows or EgoStates.  Moves leaving the enumeration are
    omitted.  ``favored_under`` is evaluated at the d, e of ``params_low``.
    """
    states = [s.state if isinstance(s, EgoRow) else s for s in states]
    if kind is None:
        if all(s.t2 == 0 for s in states):
            kind = "triangle"
        elif all(s.z1 == 0 and s.z2 == 0 for s in states):
            kind = "spillover"
        else:
            kind = "full"
    known = set(states)
    # an enumeration holding only canonical states treats layers as unordered
    unordered = kind != "triangle" and all(s == s.canonical() for s in states)
    d, e = params_low.d, params_low.e
    out = []
    for src in states:
        for mkind, layer, k, s, dst in _moves(src, kind):
            tgt = dst.canonical() if unordered else dst
            if tgt not in known:
                continue
            g_lo = ego_utility(dst, params_low.c) - ego_utility(src, params_low.c)
            g_hi = ego_utility(dst, params_high.c) - ego_utility(src, params_high.c)
            out.append(TransitionEdge(src, tgt, mkind, layer, k, s, g_lo, g_hi,
                                      _classify(g_lo.positive(d, e), g_hi.positive(d, e))))
    return out


def transitions_dot(edges: Iterable[TransitionEdge], name: str = "transitions") -> str:
    """Solid arrows: always favoured under some cost; dashed: parameter-dependent."""
    lines = [f"digraph {name} {{", "  node [shape=box];"]
    seen = set()
    for t in edges:
        for s in (t.source, t.target):
            if s not in seen:
                seen.add(s)
                lines.append(f'  "{_label(s)}";')
    for t in edges:
        if t.style == "none":
            continue
        label = f"{t.kind} L{t.layer} lo:{t.gain_low.condition()} hi:{t.gain_high.condition()}"
        lines.append(f'  "{_label(t.source)}" -> "{_label(t.target)}" '
                     f'[style={t.style}, label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _label(s: EgoState) -> str:
    return f"t=({s.t1},{s.t2}) v={s.v} z=({s.z1},{s.z2})"


# --- witness networks -------------------------------------------------------

def _witness(state: EgoState, move: Optional[Tuple[str, int, int, int]] = None
             ) -> Tuple[MultiplexNetwork, Optional[Tuple[int, int]]]:
    """Minimal host graph with node 0 in ``state``; optionally a move target.

    ``move`` is (kind, layer, triangles, spillover).  Returns the network and
    the (node, layer) the move acts on.
    """
    spill = list(range(1, state.v + 1))
    nxt = state.v + 1
    only = {}
    for layer in (1, 2):
        cnt = state.t(layer) - state.v
        only[layer] = list(range(nxt, nxt + cnt))
        nxt += cnt
    fresh = nxt
    nbrs = {layer: spill + only[layer] for layer in (1, 2)}
    edges = {1: set(), 2: set()}
    target = None
    focus = None
    if move is not None:
        mkind, layer, k, s = move
        if mkind == "drop":
            focus = spill[0] if s else only[layer][0]
        elif s:
            target = only[3 - layer][0]
        else:
            target = fresh
            nxt += 1
    for layer in (1, 2):
        for j in nbrs[layer]:
            edges[layer].add((0, j))
        z = state.z(layer)
        members = nbrs[layer]
        if move is not None and move[0] == "drop" and move[1] == layer:
            k = move[2]
            rest = [m for m in members if m != focus]
            pairs = [tuple(sorted((focus, m))) for m in rest[:k]]
            pairs += list(itertools.combinations(rest, 2))[: z - k]
        else:
            pairs = list(itertools.combinations(members, 2))[:z]
        edges[layer].update(pairs)
    if move is not None and move[0] == "add":
        _, layer, k, _ = move
        for m in nbrs[layer][:k]:
            edges[layer].add(tuple(sorted((target, m))))
    net = MultiplexNetwork(max(nxt, 2), single_layer=False)
    for layer in (1, 2):
        for u, w in sorted(edges[layer]):
            net.add_edge(u, w, layer)
    if move is None:
        return net, None
    return net, ((focus if move[0] == "drop" else target), move[1])


def witness_network(state: EgoState) -> MultiplexNetwork:
    return _witness(state)[0]


def transition_witness(edge: TransitionEdge) -> Tuple[MultiplexNetwork, Tuple[int, int]]:
    """Network and (node, layer) so that moving ego 0 there realizes ``edge``."""
    return _witness(edge.source, (edge.kind, edge.layer, edge.triangles, edge.spillover))


# --- exhaustive stability ---------------------------------------------------

def _nbr_sets(net: MultiplexNetwork):
    return {layer: [set(net.neighbors(i, layer)) for i in range(net.n)] for layer in (1, 2)}


def reference_utility(net: MultiplexNetwork, params: IncentiveParams, i: int) -> Fraction:
    """Utility rebuilt from explicit neighbour sets (independent of ``core``)."""
    sets = _nbr_sets(net)
    return _u(sets, params, i)


def _u(sets, params: IncentiveParams, i: int) -> Fraction:
    total = Fraction(0)
    for layer in (1, 2):
        nb = sets[layer][i]
        t = len(nb)
        z = sum(1 for j, k in itertools.combinations(sorted(nb), 2) if k in sets[layer][j])
        total += params.b * t - params.cost(layer) * t * t + params.d * z
    total += params.e * len(sets[1][i] & sets[2][i])
    return total


def _toggle(sets, i, j, layer, on):
    if on:
        sets[layer][i].add(j)
        sets[layer][j].add(i)
    else:
        sets[layer][i].discard(j)
        sets[layer][j].discard(i)


def _gain(sets, params, who, changes) -> Fraction:
    """Utility change for ``who`` after applying (i, j, layer, on) changes."""
    before = _u(sets, params, who)
    for c in changes:
        _toggle(sets, *c)
    after = _u(sets, params, who)
    for i, j, layer, on in reversed(changes):
        _toggle(sets, i, j, layer, not on)
    return after - before


RULES = ("decision", "pairwise")


def brute_force_stability(net: MultiplexNetwork, params: IncentiveParams,
                          rule: str = "decision") -> bool:
    """Exhaustive check that no agent would change anything with full visibility.

    ``decision`` mirrors the turn procedure: only maximal adds (rewires) are
    proposed, so the state is unstable iff some maximizer is acceptable, or
    some drop improves.  ``pairwise`` flags any improving, acceptable add or
    rewire and any improving drop.
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    if net.n > 8:
        raise ValueError("exhaustive check limited to n <= 8")
    sets = _nbr_sets(net)
    layers = net.layers
    for i in range(net.n):
        held = [(h, layer) for layer in layers for h in sorted(sets[layer][i])]
        absent = [(j, layer) for layer in layers for j in range(net.n)
                  if j != i and j not in sets[layer][i]]
        adds = {(j, la): _gain(sets, params, i, [(i, j, la, True)]) for j, la in absent}
        accept = {(j, la): _gain(sets, params, j, [(i, j, la, True)]) > 0 for j, la in absent}
        improving = {k: g for k, g in adds.items() if g > 0}
        if rule == "pairwise":
            if any(accept[k] for k in improving):
                return False
        elif improving:
            top = max(improving.values())
            if any(accept[k] for k, g in improving.items() if g == top):
                return False
        if rule == "pairwise" or not improving:
            rew = {}
            for h, ld in held:
                for j, la in absent:
                    g = _gain(sets, params, i, [(i, j, la, True), (i, h, ld, False)])
                    if g > 0:
                        rew[(h, ld, j, la)] = g
            if rew:
                top = max(rew.values())
                for (h, ld, j, la), g in rew.items():
                    if (rule == "pairwise" or g == top) and accept[(j, la)]:
                        return False
        for h, ld in held:
            if _gain(sets, params, i, [(i, h, ld, False)]) > 0:
                return False
    return True
