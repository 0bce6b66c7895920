"""Network observables and the normalised resilience statistic."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .core import LAYERS, IncentiveParams, MultiplexNetwork, _bits, scaled_utility


class UndefinedResilience(ValueError):
    """LL and HH control degrees coincide, so resilience has no scale."""


@dataclass(frozen=True)
class MetricsRecord:
    avg_degree: Tuple[float, float]
    avg_clustering: Tuple[float, float]
    mean_utility: float
    spillover_frac: Optional[float]  # None in single-layer mode
    n: int
    round: int = 0

    def degree(self, layer: int) -> float:
        return self.avg_degree[layer - 1]

    def clustering(self, layer: int) -> float:
        return self.avg_clustering[layer - 1]


def avg_degree(net: MultiplexNetwork, layer: int) -> float:
    return 2 * net.edge_count(layer) / net.n


def local_clustering(net: MultiplexNetwork, i: int, layer: int) -> float:
    row = net.adj[layer]
    ri = row[i]
    t = ri.bit_count()
    if t < 2:
        return 0.0
    closed = sum((row[j] & ri).bit_count() for j in _bits(ri)) // 2
    return closed / (t * (t - 1) / 2)


def avg_clustering(net: MultiplexNetwork, layer: int) -> float:
    """Mean local clustering; nodes with fewer than two ties count as 0."""
    return sum(local_clustering(net, i, layer) for i in range(net.n)) / net.n


def spillover_fraction(net: MultiplexNetwork) -> float:
    """``2 * |pairs tied in both layers| / (|E1| + |E2|)``, 0 for no edges."""
    if net.single_layer:
        raise ValueError("spillover fraction is undefined in single-layer mode")
    total = net.edge_count(1) + net.edge_count(2)
    if total == 0:
        return 0.0
    both = sum((a & b).bit_count() for a, b in zip(net.adj[1], net.adj[2])) // 2
    return 2 * both / total


def mean_utility(net: MultiplexNetwork, params: IncentiveParams) -> float:
    sp = params.scaled
    return sum(scaled_utility(net, sp, i) for i in range(net.n)) / (sp.scale * net.n)


def measure(net: MultiplexNetwork, params: IncentiveParams, round: int = 0) -> MetricsRecord:
    return MetricsRecord(
        avg_degree=tuple(avg_degree(net, layer) for layer in LAYERS),
        avg_clustering=tuple(avg_clustering(net, layer) for layer in LAYERS),
        mean_utility=mean_utility(net, params),
        spillover_frac=None if net.single_layer else spillover_fraction(net),
        n=net.n,
        round=round,
    )


def resilience(k_s: float, k_ll: float, k_hh: float) -> float:
    """``(k_s - k_HH) / (k_LL - k_HH)``; works for any scalar metric."""
    span = k_ll - k_hh
    if abs(span) < 1e-9:
        raise UndefinedResilience(f"k_LL={k_ll} and k_HH={k_hh} are indistinguishable")
    return (k_s - k_hh) / span


def mean_sd_se(values: Sequence[float]) -> Tuple[float, float, float]:
    """Sample mean, SD and standard error (SD and SE are 0 for one value)."""
    vals = list(values)
    if not vals:
        return math.nan, math.nan, math.nan
    m = statistics.fmean(vals)
    if len(vals) < 2:
        return m, 0.0, 0.0
    sd = statistics.stdev(vals)
    return m, sd, sd / math.sqrt(len(vals))
