"""Configuration parsing, seeded replicate sweeps, CSV output, noise study.

Replicate seeds are ``mix_seed(base_seed, cell, replicate)`` (paired: every
condition of a replicate shares one stream) or ``mix_seed(base_seed, cell,
condition, replicate)`` (unpaired), where ``mix_seed`` chains splitmix64
over the index tuple.  The seeds CSV header records this.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import random
import statistics
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

from .core import IncentiveParams, exact
from .dynamics import MODES, SimConfig, run_round, run_to_equilibrium
from .graphio import edgelist_text, to_dot
from .metrics import UndefinedResilience, avg_degree, mean_sd_se, resilience
from .shocks import CONDITIONS, SHOCKED_LAYERS, ExperimentResult, ShockSpec, run_conditions

MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix_seed(base: int, *indices: int) -> int:
    h = splitmix64(base & MASK64)
    for i in indices:
        h = splitmix64(h ^ (i & MASK64))
    return h


SEED_HEADER = "# seed = splitmix64 chain: h=splitmix64(base); h=splitmix64(h ^ idx) for idx in index tuple"


# --- config -----------------------------------------------------------------

def default_grid() -> List[Fraction]:
    return [Fraction(2 * k, 5) for k in range(6)]  # 0, 0.4, ..., 2.0


@dataclass(frozen=True)
class SweepSpec:
    d_values: Tuple[Fraction, ...] = tuple(default_grid())
    e_values: Tuple[Fraction, ...] = tuple(default_grid())
    conditions: Tuple[str, ...] = CONDITIONS
    shocked_layers: str = "both"
    mode: str = "multiplex"
    n_values: Tuple[int, ...] = (40,)
    nu_values: Tuple[float, ...] = (0.0,)
    replicates: int = 100
    base_seed: int = 0
    paired: bool = True
    c_low: Fraction = Fraction(1, 5)
    c_high: Fraction = Fraction(3, 5)
    p: int = 10
    quiet_rounds: int = 5
    max_rounds: int = 5000
    b: Fraction = Fraction(1)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.mode == "single" and any(exact(e) != 0 for e in self.e_values):
            raise ValueError("e must be 0 in single-layer mode")
        for c in self.conditions:
            if c not in CONDITIONS:
                raise ValueError(f"unknown condition {c!r}")

    def cells(self) -> List[Tuple[int, float, Fraction, Fraction]]:
        """(n, nu, d, e) in sweep order; the list index is the cell index."""
        return list(itertools.product(self.n_values, self.nu_values,
                                      [exact(x) for x in self.d_values],
                                      [exact(x) for x in self.e_values]))


def _int(v: str) -> int:
    return int(v)


def _num(v: str) -> Fraction:
    return Fraction(v)


def _nums(v: str) -> Tuple[Fraction, ...]:
    if ":" in v:
        lo, hi, step = (Fraction(x) for x in v.split(":"))
        if step <= 0:
            raise ValueError("range step must be positive")
        k = int((hi - lo) / step)
        return tuple(lo + i * step for i in range(k + 1))
    return tuple(Fraction(x) for x in v.split(",") if x)


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _choice(options):
    def conv(v: str) -> str:
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v
    return conv


def _conditions(v: str) -> Tuple[str, ...]:
    out = tuple(x.strip().upper() for x in v.split(",") if x.strip())
    for c in out:
        if c not in CONDITIONS:
            raise ValueError(f"unknown condition {c!r}")
    return out


KEYS = {
    "n": _int, "p": _int, "b": _num, "c_low": _num, "c_high": _num, "d": _num, "e": _num,
    "nu": float, "quiet_rounds": _int, "max_rounds": _int, "replicates": _int, "seed": _int,
    "mode": _choice(MODES), "condition": _choice(CONDITIONS),
    "shocked_layers": _choice(SHOCKED_LAYERS), "conditions": _conditions,
    "d_values": _nums, "e_values": _nums,
    "n_values": lambda v: tuple(int(x) for x in v.split(",") if x),
    "nu_values": lambda v: tuple(float(x) for x in v.split(",") if x),
    "paired": _bool, "band": float,
}

DEFAULTS = {
    "n": 40, "p": 10, "b": Fraction(1), "c_low": Fraction(1, 5), "c_high": Fraction(3, 5),
    "d": Fraction(0), "e": Fraction(0), "nu": 0.0, "quiet_rounds": 5, "max_rounds": 5000,
    "replicates": 100, "seed": 0, "mode": "multiplex", "condition": "LH",
    "shocked_layers": "both", "conditions": CONDITIONS, "paired": True, "band": 0.1,
}


def parse_values(text: str) -> Tuple[Dict[str, object], Dict[str, int]]:
    """Raw key/value pairs and the line each key was last set on."""
    values: Dict[str, object] = {}
    where: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for tok in line.split():
            if "=" not in tok:
                raise ConfigError(f"expected key=value, got {tok!r}", lineno)
            key, val = tok.split("=", 1)
            key = key.strip().replace("-", "_")
            if key not in KEYS:
                raise ConfigError(f"unknown key {key!r}", lineno)
            try:
                values[key] = KEYS[key](val.strip())
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
            where[key] = lineno
    return values, where


def parse_config(text: str) -> Tuple[SimConfig, IncentiveParams, ShockSpec, SweepSpec]:
    values, where = parse_values(text)
    cfg = dict(DEFAULTS)
    cfg.update(values)

    def fail(msg, *keys):
        lines = [where[k] for k in keys if k in where]
        raise ConfigError(msg, max(lines) if lines else None)

    if cfg["n"] < 2:
        fail("n must be >= 2", "n")
    if cfg["p"] < 1:
        fail("p must be >= 1", "p")
    if not 0 <= cfg["nu"] <= 1:
        fail("nu must lie in [0, 1]", "nu")
    for k in ("quiet_rounds", "max_rounds", "replicates"):
        if cfg[k] < 1:
            fail(f"{k} must be >= 1", k)
    for k in ("c_low", "c_high", "d", "e"):
        if cfg[k] < 0:
            fail(f"{k} must be non-negative", k)
    if cfg["b"] <= 0:
        fail("b must be positive", "b")
    if not cfg["c_low"] < cfg["c_high"]:
        fail("c_low must be below c_high", "c_low", "c_high")
    if cfg["seed"] < 0:
        fail("seed must be non-negative", "seed")
    if not 0 < cfg["band"] < 1:
        fail("band must lie in (0, 1)", "band")
    single = cfg["mode"] == "single"
    if single and cfg["e"] != 0:
        fail("e must be 0 in single-layer mode", "mode", "e")
    if single and cfg["shocked_layers"] != "both":
        fail("one-layer shocks need mode=multiplex", "mode", "shocked_layers")
    d_values = cfg.get("d_values") or tuple(default_grid())
    e_values = cfg.get("e_values") or ((Fraction(0),) if single else tuple(default_grid()))
    if single and any(e != 0 for e in e_values):
        fail("e_values must be 0 in single-layer mode", "mode", "e_values")
    if any(x < 0 for x in d_values + e_values):
        fail("grid values must be non-negative", "d_values", "e_values")
    n_values = cfg.get("n_values") or (cfg["n"],)
    nu_values = cfg.get("nu_values") or (cfg["nu"],)
    if any(n < 2 for n in n_values):
        fail("n_values must be >= 2", "n_values")
    if any(not 0 <= x <= 1 for x in nu_values):
        fail("nu_values must lie in [0, 1]", "nu_values")

    sim = SimConfig(n=cfg["n"], p=cfg["p"], nu=cfg["nu"], mode=cfg["mode"],
                    quiet_rounds=cfg["quiet_rounds"], max_rounds=cfg["max_rounds"], seed=cfg["seed"])
    shock = ShockSpec(cfg["condition"], cfg["c_low"], cfg["c_high"], cfg["shocked_layers"])
    inc = IncentiveParams(c=(shock.pre_cost, shock.pre_cost), d=cfg["d"], e=cfg["e"], b=cfg["b"])
    sweep = SweepSpec(
        d_values=tuple(d_values), e_values=tuple(e_values), conditions=tuple(cfg["conditions"]),
        shocked_layers=cfg["shocked_layers"], mode=cfg["mode"], n_values=tuple(n_values),
        nu_values=tuple(nu_values), replicates=cfg["replicates"], base_seed=cfg["seed"],
        paired=cfg["paired"], c_low=cfg["c_low"], c_high=cfg["c_high"], p=cfg["p"],
        quiet_rounds=cfg["quiet_rounds"], max_rounds=cfg["max_rounds"], b=cfg["b"],
    )
    return sim, inc, shock, sweep


# --- sweeps -----------------------------------------------------------------

ROW_COLUMNS = ("condition", "seed", "phase", "layer", "n", "avg_degree", "avg_clustering",
               "mean_utility", "spillover_frac", "rounds", "converged")

STATS = ("avg_degree", "avg_clustering", "mean_utility", "spillover_frac")
AGG_COLUMNS = (("cell", "n", "nu", "d", "e", "condition", "phase", "layer", "replicates",
                "converged_frac")
               + tuple(f"{s}_{k}" for s in STATS for k in ("mean", "sd", "se"))
               + ("resilience", "resilience_se"))

SEED_COLUMNS = ("cell", "n", "nu", "d", "e", "condition", "replicate", "seed")


@dataclass(frozen=True)
class SweepRow:
    cell: int
    replicate: int
    condition: str
    seed: int
    phase: str
    layer: int
    n: int
    avg_degree: float
    avg_clustering: float
    mean_utility: float
    spillover_frac: Optional[float]
    rounds: int
    converged: bool

    def csv_fields(self) -> tuple:
        return (self.condition, self.seed, self.phase, self.layer, self.n, _f(self.avg_degree),
                _f(self.avg_clustering), _f(self.mean_utility), _f(self.spillover_frac),
                self.rounds, "true" if self.converged else "false")


def _f(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def _rows_for(cell: int, rep: int, seed: int, res: ExperimentResult) -> List[SweepRow]:
    out = []
    for phase in ("pre", "post"):
        m = res.pre_metrics if phase == "pre" else res.post_metrics
        rounds = res.rounds_pre if phase == "pre" else res.rounds_post
        ok = res.converged_pre if phase == "pre" else res.converged_post
        for layer in res.pre_network.layers:
            out.append(SweepRow(cell, rep, res.condition, seed, phase, layer, m.n,
                                m.degree(layer), m.clustering(layer), m.mean_utility,
                                m.spillover_frac, rounds, ok))
    return out


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: List[SweepRow]
    seeds: List[tuple] = field(default_factory=list)
    aggregates: List[dict] = field(default_factory=list)

    def cell_index(self, d: float, e: float = 0, n: Optional[int] = None,
                   nu: Optional[float] = None) -> int:
        d, e = exact(d), exact(e)
        for idx, (cn, cnu, cd, ce) in enumerate(self.spec.cells()):
            if cd == d and ce == e and (n is None or cn == n) and (nu is None or cnu == nu):
                return idx
        raise KeyError(f"no cell with d={d}, e={e}, n={n}, nu={nu}")

    def values(self, cell: int, condition: str, field_name: str = "avg_degree",
               phase: str = "post", layer: int = 1) -> List[float]:
        rows = [r for r in self.rows if r.cell == cell and r.condition == condition
                and r.phase == phase and r.layer == layer]
        rows.sort(key=lambda r: r.replicate)
        return [getattr(r, field_name) for r in rows]

    def mean(self, cell: int, condition: str, field_name: str = "avg_degree",
             phase: str = "post", layer: int = 1) -> float:
        return statistics.fmean(self.values(cell, condition, field_name, phase, layer))

    def resilience(self, cell: int, condition: str = "LH", layer: int = 1) -> float:
        """Ensemble resilience of ``layer``, against layer 1 of the controls."""
        return resilience(self.mean(cell, condition, layer=layer),
                          self.mean(cell, "LL"), self.mean(cell, "HH"))

    def resilience_samples(self, cell: int, condition: str = "LH", layer: int = 1) -> List[float]:
        """Per-replicate resilience, normalised by the cell's control means."""
        k_ll, k_hh = self.mean(cell, "LL"), self.mean(cell, "HH")
        return [resilience(k, k_ll, k_hh) for k in self.values(cell, condition, layer=layer)]

    def write_rows(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_fields())

    def write_seeds(self, fh: TextIO) -> None:
        fh.write(SEED_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEED_COLUMNS)
        for s in self.seeds:
            w.writerow(s)

    def write_aggregates(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_COLUMNS)
        for a in self.aggregates:
            w.writerow(tuple(_cellfmt(a[k]) for k in AGG_COLUMNS))

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_rows(buf)
        return buf.getvalue()


def _cellfmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x) if x.denominator == 1 else repr(float(x))
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _aggregate(spec: SweepSpec, rows: List[SweepRow]) -> List[dict]:
    cells = spec.cells()
    groups: Dict[tuple, List[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.cell, r.condition, r.phase, r.layer), []).append(r)
    cond_order = {c: i for i, c in enumerate(spec.conditions)}
    out = []
    for key in sorted(groups, key=lambda k: (k[0], cond_order[k[1]], k[2] != "pre", k[3])):
        cell, cond, phase, layer = key
        g = groups[key]
        n, nu, d, e = cells[cell]
        a = {"cell": cell, "n": n, "nu": nu, "d": d, "e": e, "condition": cond, "phase": phase,
             "layer": layer, "replicates": len(g),
             "converged_frac": sum(r.converged for r in g) / len(g)}
        for s in STATS:
            vals = [getattr(r, s) for r in g]
            if any(v is None for v in vals):
                a.update({f"{s}_mean": None, f"{s}_sd": None, f"{s}_se": None})
                continue
            m, sd, se = mean_sd_se(vals)
            a.update({f"{s}_mean": m, f"{s}_sd": sd, f"{s}_se": se})
        a["resilience"] = a["resilience_se"] = None
        out.append(a)
    # resilience against layer 1 of the cell's post-phase controls
    index = {(a["cell"], a["condition"], a["phase"], a["layer"]): a for a in out}
    for a in out:
        if a["phase"] != "post" or a["condition"] not in ("LH", "HL"):
            continue
        ll = index.get((a["cell"], "LL", "post", 1))
        hh = index.get((a["cell"], "HH", "post", 1))
        if ll is None or hh is None:
            continue
        try:
            a["resilience"] = resilience(a["avg_degree_mean"], ll["avg_degree_mean"],
                                         hh["avg_degree_mean"])
            a["resilience_se"] = a["avg_degree_se"] / abs(ll["avg_degree_mean"] - hh["avg_degree_mean"])
        except UndefinedResilience:
            pass
    return out


def run_sweep(spec: SweepSpec, progress=None) -> SweepResult:
    """Every cell x condition x replicate; rows sorted by index tuple."""
    rows: List[SweepRow] = []
    seeds: List[tuple] = []
    shocks = [ShockSpec(c, spec.c_low, spec.c_high, spec.shocked_layers) for c in spec.conditions]
    for cell, (n, nu, d, e) in enumerate(spec.cells()):
        cfg = SimConfig(n=n, p=spec.p, nu=nu, mode=spec.mode, quiet_rounds=spec.quiet_rounds,
                        max_rounds=spec.max_rounds, seed=spec.base_seed)
        inc = IncentiveParams(c=(spec.c_low, spec.c_low), d=d, e=e, b=spec.b)
        for rep in range(spec.replicates):
            if spec.paired:
                seed = mix_seed(spec.base_seed, cell, rep)
                results = run_conditions(cfg, inc, shocks, random.Random(seed))
                per = [(seed, r) for r in results]
            else:
                per = []
                for ci, shock in enumerate(shocks):
                    seed = mix_seed(spec.base_seed, cell, ci, rep)
                    per.append((seed, run_conditions(cfg, inc, [shock], random.Random(seed))[0]))
            for seed, res in per:
                rows.extend(_rows_for(cell, rep, seed, res))
                seeds.append((cell, n, nu, _cellfmt(d), _cellfmt(e), res.condition, rep, seed))
            if progress is not None:
                progress(cell, rep)
    cond_order = {c: i for i, c in enumerate(spec.conditions)}
    rows.sort(key=lambda r: (r.cell, r.replicate, cond_order[r.condition], r.phase != "pre", r.layer))
    result = SweepResult(spec, rows, seeds)
    result.aggregates = _aggregate(spec, rows)
    return result


# --- export -----------------------------------------------------------------

FORMATS = ("edgelist", "dot")


def export_network(result: ExperimentResult, phase: str, format: str = "edgelist") -> str:
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    net = result.network(phase)
    if format == "edgelist":
        return edgelist_text(net, phase=f"{result.condition}:{phase}")
    return to_dot(net, name=f"{result.condition}_{phase}")


# --- noise study ------------------------------------------------------------

@dataclass(frozen=True)
class NoiseRow:
    nu: float
    median_rounds: Optional[float]  # None when the median is censored
    times: Tuple[Optional[int], ...]  # per replicate; None = never reverted
    hh_mean: float
    band: float

    @property
    def censored(self) -> int:
        return sum(t is None for t in self.times)


def _noisy_degree_path(net, params, cfg, rng, rounds, stop=None):
    path = []
    for r in range(1, rounds + 1):
        run_round(net, params, cfg, rng, r)
        k = avg_degree(net, 1)
        path.append(k)
        if stop is not None and stop(k):
            break
    return path


def run_noise_study(config: SimConfig, incentives: IncentiveParams, nu_values: Sequence[float],
                    replicates: int = 10, c_low=Fraction(1, 5), c_high=Fraction(3, 5),
                    band: float = 0.1, base_seed: int = 0,
                    control_rounds: Optional[int] = None) -> List[NoiseRow]:
    """Median post-shock rounds for an LH network to fall into the HH band.

    Both phase-1 networks are grown noiselessly.  The HH reference is the
    time-averaged layer-1 degree of HH networks run under the same noise for
    ``control_rounds`` (default ``max(100, 1/nu)``, capped at max_rounds).
    A replicate reverts at the first round where layer-1 degree lies within
    ``band`` (relative) of that reference.
    """
    quiet_cfg = replace(config, nu=0.0)
    lo, hi = exact(c_low), exact(c_high)
    high = incentives.with_costs(hi)
    out = []
    for vi, nu in enumerate(nu_values):
        if nu < 0 or nu > 1:
            raise ValueError("nu must lie in [0, 1]")
        noisy_cfg = replace(config, nu=nu)
        pre_low, pre_high, rngs = [], [], []
        for rep in range(replicates):
            seed = mix_seed(base_seed, vi, rep)
            res = run_conditions(quiet_cfg, incentives,
                                 [ShockSpec("LL", lo, hi), ShockSpec("HH", lo, hi)],
                                 random.Random(seed))
            pre_low.append(res[0].pre_network)
            pre_high.append(res[1].pre_network)
            rngs.append(seed)
        if nu > 0:
            ctrl = control_rounds or min(config.max_rounds, max(100, math.ceil(1 / nu)))
        else:
            ctrl = 1
        hh_levels = []
        for rep in range(replicates):
            net = pre_high[rep].copy()
            rng = random.Random(mix_seed(rngs[rep], 1))
            hh_levels.append(statistics.fmean(_noisy_degree_path(net, high, noisy_cfg, rng, ctrl)))
        hh = statistics.fmean(hh_levels)
        tol = band * hh
        times: List[Optional[int]] = []
        for rep in range(replicates):
            net = pre_low[rep].copy()
            rng = random.Random(mix_seed(rngs[rep], 2))
            path = _noisy_degree_path(net, high, noisy_cfg, rng, config.max_rounds,
                                      stop=lambda k: abs(k - hh) <= tol)
            hit = abs(path[-1] - hh) <= tol if path else False
            times.append(len(path) if hit else None)
        ranked = sorted(math.inf if t is None else t for t in times)
        med = statistics.median(ranked)
        out.append(NoiseRow(nu, None if math.isinf(med) else float(med), tuple(times), hh, band))
    return out


def noise_slope(rows: Sequence[NoiseRow]) -> float:
    """Least-squares slope of log(median time) against log(nu)."""
    pts = [(math.log(r.nu), math.log(r.median_rounds)) for r in rows
           if r.nu > 0 and r.median_rounds]
    if len(pts) < 2:
        raise ValueError("need at least two uncensored noise levels")
    mx = statistics.fmean(p[0] for p in pts)
    my = statistics.fmean(p[1] for p in pts)
    return sum((x - mx) * (y - my) for x, y in pts) / sum((x - mx) ** 2 for x, _ in pts)
