"""Two-layer network state and the tie/triangle/spillover utility engine.

Adjacency rows are stored as Python ints used as bitsets, so degrees are
popcounts and common-neighbour counts are ``popcount(row_i & row_j)``.
Layers are numbered 1 and 2 everywhere in the public API.

Incentive coefficients are held as exact fractions and rescaled to a shared
integer denominator; every utility difference the dynamics compare against
zero is therefore an exact integer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Tuple, Union

Number = Union[int, float, str, Fraction]
Tie = Tuple[int, int]  # (node, layer)

LAYERS = (1, 2)


class ModeError(RuntimeError):
    """Operation not defined for the network's layer mode."""


class IllegalMoveError(RuntimeError):
    """A move was applied against a state that does not permit it."""


def exact(x: Number) -> Fraction:
    """Convert a user-facing number to an exact fraction.

    Floats go through their shortest repr so ``0.6`` becomes ``3/5`` rather
    than its binary expansion.
    """
    if isinstance(x, bool):
        raise TypeError("boolean is not a valid incentive value")
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    return Fraction(x)


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class MultiplexNetwork:
    """Undirected, unweighted two-layer graph on nodes ``0..n-1``.

    In single-layer mode layer 2 exists but may never hold an edge.
    """

    __slots__ = ("n", "single_layer", "adj")

    def __init__(self, n: int, single_layer: bool = False):
        if n < 2:
            raise ValueError(f"node count must be >= 2, got {n}")
        self.n = n
        self.single_layer = single_layer
        # adj[0] is unused so that adj[layer] works with layer in {1, 2}
        self.adj = [None, [0] * n, [0] * n]

    @property
    def layers(self) -> Tuple[int, ...]:
        return (1,) if self.single_layer else LAYERS

    def _check(self, i: int, layer: int) -> None:
        if not (0 <= i < self.n):
            raise ValueError(f"node {i} out of range for n={self.n}")
        if layer not in LAYERS:
            raise ValueError(f"layer must be 1 or 2, got {layer}")

    def has_edge(self, i: int, j: int, layer: int) -> bool:
        self._check(i, layer)
        self._check(j, layer)
        return bool(self.adj[layer][i] >> j & 1)

    def add_edge(self, i: int, j: int, layer: int) -> None:
        self._check(i, layer)
        self._check(j, layer)
        if i == j:
            raise IllegalMoveError(f"self-loop on node {i}")
        if layer == 2 and self.single_layer:
            raise ModeError("layer 2 is disabled in single-layer mode")
        row = self.adj[layer]
        if row[i] >> j & 1:
            raise IllegalMoveError(f"edge ({i},{j}) already present in layer {layer}")
        row[i] |= 1 << j
        row[j] |= 1 << i

    def remove_edge(self, i: int, j: int, layer: int) -> None:
        self._check(i, layer)
        self._check(j, layer)
        row = self.adj[layer]
        if not row[i] >> j & 1:
            raise IllegalMoveError(f"edge ({i},{j}) absent from layer {layer}")
        row[i] &= ~(1 << j)
        row[j] &= ~(1 << i)

    def neighbors(self, i: int, layer: int) -> list:
        self._check(i, layer)
        return list(_bits(self.adj[layer][i]))

    def edges(self, layer: int) -> list:
        """Sorted ``(u, v)`` pairs with ``u < v``."""
        if layer not in LAYERS:
            raise ValueError(f"layer must be 1 or 2, got {layer}")
        row = self.adj[layer]
        return [(u, v) for u in range(self.n) for v in _bits(row[u] >> (u + 1) << (u + 1))]

    def edge_count(self, layer: int) -> int:
        if layer not in LAYERS:
            raise ValueError(f"layer must be 1 or 2, got {layer}")
        return sum(r.bit_count() for r in self.adj[layer]) // 2

    def ties(self, i: int) -> list:
        """All ``(neighbor, layer)`` ties held by ``i``."""
        return [(j, layer) for layer in LAYERS for j in _bits(self.adj[layer][i])]

    def copy(self) -> "MultiplexNetwork":
        other = MultiplexNetwork(self.n, self.single_layer)
        other.adj = [None, list(self.adj[1]), list(self.adj[2])]
        return other

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiplexNetwork):
            return NotImplemented
        return (
            self.n == other.n
            and self.single_layer == other.single_layer
            and self.adj[1] == other.adj[1]
            and self.adj[2] == other.adj[2]
        )

    def __repr__(self) -> str:
        mode = "single" if self.single_layer else "multiplex"
        return (
            f"MultiplexNetwork(n={self.n}, mode={mode}, "
            f"|E1|={self.edge_count(1)}, |E2|={self.edge_count(2)})"
        )


@dataclass(frozen=True)
class ScaledParams:
    """Integer coefficients: every real coefficient multiplied by ``scale``."""

    scale: int
    b: int
    c: Tuple[None, int, int]
    d: int
    e: int


@dataclass(frozen=True)
class IncentiveParams:
    """Utility coefficients. ``c`` holds one cost per layer."""

    c: Tuple[Fraction, Fraction] = (Fraction(1, 5), Fraction(1, 5))
    d: Fraction = Fraction(0)
    e: Fraction = Fraction(0)
    b: Fraction = Fraction(1)
    scaled: ScaledParams = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = self.c
        if not isinstance(c, (tuple, list)):
            c = (c, c)
        if len(c) != 2:
            raise ValueError("c must give one cost per layer")
        c = (exact(c[0]), exact(c[1]))
        b, d, e = exact(self.b), exact(self.d), exact(self.e)
        if min(c) < 0 or d < 0 or e < 0:
            raise ValueError("c, d and e must be non-negative")
        if b <= 0:
            raise ValueError("tie benefit b must be positive")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "e", e)
        scale = math.lcm(*(x.denominator for x in (b, c[0], c[1], d, e)))
        sc = lambda x: int(x * scale)  # noqa: E731
        object.__setattr__(
            self, "scaled", ScaledParams(scale, sc(b), (None, sc(c[0]), sc(c[1])), sc(d), sc(e))
        )

    @classmethod
    def make(cls, c: Number = Fraction(1, 5), d: Number = 0, e: Number = 0,
             c2: Optional[Number] = None, b: Number = 1) -> "IncentiveParams":
        return cls(c=(c, c if c2 is None else c2), d=d, e=e, b=b)

    def with_costs(self, c1: Number, c2: Optional[Number] = None) -> "IncentiveParams":
        return IncentiveParams(c=(c1, c1 if c2 is None else c2), d=self.d, e=self.e, b=self.b)

    def cost(self, layer: int) -> Fraction:
        return self.c[layer - 1]


class MoveKind(enum.Enum):
    ADD = "add"
    DROP = "drop"
    REWIRE = "rewire"
    NOOP = "noop"


@dataclass(frozen=True)
class Move:
    """One agent's realized action plus the bookkeeping needed to audit it.

    ``acceptor_gain`` and ``drop_gain`` are exact utility changes at the moment
    of decision; ``noise`` names the stages where a random override fired.
    ``via_rewire`` separates an atomic rewire from an add followed by a
    separate drop in the same turn (both carry kind REWIRE).
    """

    kind: MoveKind
    actor: int
    added: Optional[Tie] = None
    dropped: Optional[Tie] = None
    proposal: Optional[Tie] = None
    accepted: Optional[bool] = None
    acceptor_gain: Optional[Fraction] = None
    drop_gain: Optional[Fraction] = None
    noise: Tuple[str, ...] = ()
    via_rewire: bool = False

    def __post_init__(self):
        want = {
            MoveKind.ADD: (True, False),
            MoveKind.DROP: (False, True),
            MoveKind.REWIRE: (True, True),
            MoveKind.NOOP: (False, False),
        }[self.kind]
        if (self.added is not None, self.dropped is not None) != want:
            raise ValueError(f"{self.kind} move has inconsistent legs")

    @classmethod
    def from_legs(cls, actor: int, added: Optional[Tie], dropped: Optional[Tie], **kw) -> "Move":
        kind = {
            (True, True): MoveKind.REWIRE,
            (True, False): MoveKind.ADD,
            (False, True): MoveKind.DROP,
            (False, False): MoveKind.NOOP,
        }[(added is not None, dropped is not None)]
        return cls(kind, actor, added, dropped, **kw)


# --- observables -----------------------------------------------------------

def degree(net: MultiplexNetwork, i: int, layer: int) -> int:
    net._check(i, layer)
    return net.adj[layer][i].bit_count()


def triangle_count(net: MultiplexNetwork, i: int, layer: int) -> int:
    net._check(i, layer)
    row = net.adj[layer]
    ri = row[i]
    return sum((row[j] & ri).bit_count() for j in _bits(ri)) // 2


def spillover_count(net: MultiplexNetwork, i: int) -> int:
    if net.single_layer:
        raise ModeError("spillover is undefined in single-layer mode")
    net._check(i, 1)
    return (net.adj[1][i] & net.adj[2][i]).bit_count()


def _v(net: MultiplexNetwork, i: int) -> int:
    return (net.adj[1][i] & net.adj[2][i]).bit_count()


def scaled_utility(net: MultiplexNetwork, sp: ScaledParams, i: int) -> int:
    """Utility of ``i`` multiplied by ``sp.scale`` (exact integer)."""
    total = sp.e * _v(net, i)
    for layer in LAYERS:
        t = net.adj[layer][i].bit_count()
        total += sp.b * t - sp.c[layer] * t * t + sp.d * triangle_count(net, i, layer)
    return total


def utility(net: MultiplexNetwork, params: IncentiveParams, i: int) -> Fraction:
    net._check(i, 1)
    sp = params.scaled
    return Fraction(scaled_utility(net, sp, i), sp.scale)


# --- exact marginal utilities (scaled ints, no mutation) ---------------------

def add_gain(adj, sp: ScaledParams, i: int, j: int, layer: int) -> int:
    """Scaled utility change for ``i`` if edge (i, j, layer) is added."""
    row = adj[layer]
    ri = row[i]
    t = ri.bit_count()
    g = sp.b - sp.c[layer] * (2 * t + 1) + sp.d * (ri & row[j]).bit_count()
    if adj[3 - layer][i] >> j & 1:
        g += sp.e
    return g


def drop_gain(adj, sp: ScaledParams, i: int, h: int, layer: int) -> int:
    """Scaled utility change for ``i`` if edge (i, h, layer) is removed."""
    row = adj[layer]
    ri = row[i]
    t = ri.bit_count()
    g = -sp.b + sp.c[layer] * (2 * t - 1) - sp.d * (ri & row[h]).bit_count()
    if adj[3 - layer][i] >> h & 1:
        g -= sp.e
    return g


def rewire_correction(adj, sp: ScaledParams, i: int, h: int, ld: int, j: int, la: int) -> int:
    """Interaction term so that drop_gain + add_gain + correction is exact.

    Both component gains are taken on the current network; the correction
    accounts for the add leg seeing the post-drop state.
    """
    if ld == la:
        # degree seen by the add leg is one lower; h no longer a common neighbour
        corr = 2 * sp.c[la]
        if adj[la][j] >> h & 1:
            corr -= sp.d
        return corr
    # cross-layer: re-tying a just-dropped partner yields no spillover
    return -sp.e if j == h else 0


def _require_absent(net, i, j, layer):
    if i == j:
        raise ValueError("cannot tie a node to itself")
    if net.has_edge(i, j, layer):
        raise ValueError(f"edge ({i},{j}) already present in layer {layer}")
    if layer == 2 and net.single_layer:
        raise ModeError("layer 2 is disabled in single-layer mode")


def _require_present(net, i, h, layer):
    if not net.has_edge(i, h, layer):
        raise ValueError(f"edge ({i},{h}) absent from layer {layer}")


def marginal_add(net: MultiplexNetwork, params: IncentiveParams, i: int, j: int, layer: int) -> Fraction:
    _require_absent(net, i, j, layer)
    sp = params.scaled
    return Fraction(add_gain(net.adj, sp, i, j, layer), sp.scale)


def marginal_drop(net: MultiplexNetwork, params: IncentiveParams, i: int, h: int, layer: int) -> Fraction:
    _require_present(net, i, h, layer)
    sp = params.scaled
    return Fraction(drop_gain(net.adj, sp, i, h, layer), sp.scale)


def marginal_rewire(net: MultiplexNetwork, params: IncentiveParams, i: int,
                    drop: Tie, add: Tie) -> Fraction:
    h, ld = drop
    j, la = add
    _require_present(net, i, h, ld)
    _require_absent(net, i, j, la)
    sp = params.scaled
    adj = net.adj
    g = (drop_gain(adj, sp, i, h, ld) + add_gain(adj, sp, i, j, la)
         + rewire_correction(adj, sp, i, h, ld, j, la))
    return Fraction(g, sp.scale)


def apply_move(net: MultiplexNetwork, move: Move) -> MultiplexNetwork:
    """Mutate ``net`` by ``move``; for a rewire the add leg goes first."""
    i = move.actor
    try:
        if move.added is not None:
            net.add_edge(i, move.added[0], move.added[1])
        if move.dropped is not None:
            net.remove_edge(i, move.dropped[0], move.dropped[1])
    except (ValueError, ModeError) as exc:
        raise IllegalMoveError(str(exc)) from exc
    return net
