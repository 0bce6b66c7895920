"""Edge-list and DOT serialisation of two-layer networks.

Edge list: optional ``#`` header lines, then one ``u v layer`` triple per
line with 0-indexed nodes.  The header carries ``n`` and ``mode`` so a file
round-trips to an identical network.
"""

from __future__ import annotations

import io
from typing import Optional, TextIO

from .core import LAYERS, MultiplexNetwork


def write_edgelist(net: MultiplexNetwork, fh: TextIO, phase: Optional[str] = None) -> None:
    mode = "single" if net.single_layer else "multiplex"
    fh.write(f"# n={net.n} mode={mode}")
    if phase is not None:
        fh.write(f" phase={phase}")
    fh.write("\n")
    for layer in LAYERS:
        for u, v in net.edges(layer):
            fh.write(f"{u} {v} {layer}\n")


def edgelist_text(net: MultiplexNetwork, phase: Optional[str] = None) -> str:
    buf = io.StringIO()
    write_edgelist(net, buf, phase)
    return buf.getvalue()


def read_edgelist(fh: TextIO, n: Optional[int] = None) -> MultiplexNetwork:
    """Load a network; ``n`` is required if the file has no header."""
    meta = {}
    triples = []
    for lineno, raw in enumerate(fh, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'u v layer', got {line!r}")
        triples.append(tuple(int(p) for p in parts))
    if n is None:
        if "n" not in meta:
            raise ValueError("node count missing: no header and no n given")
        n = int(meta["n"])
    net = MultiplexNetwork(n, single_layer=meta.get("mode") == "single")
    for u, v, layer in triples:
        net.add_edge(u, v, layer)
    return net


def to_dot(net: MultiplexNetwork, name: str = "multiplex") -> str:
    """Layer 1 solid blue, layer 2 dashed red, spillover pairs drawn bold."""
    both = set(net.edges(1)) & set(net.edges(2))
    out = [f"graph {name} {{", "  node [shape=circle];"]
    for i in range(net.n):
        out.append(f"  {i};")
    styles = {1: ("solid", "blue"), 2: ("dashed", "red")}
    for layer in net.layers:
        style, color = styles[layer]
        for u, v in net.edges(layer):
            attrs = f'style="{style},bold", penwidth=3' if (u, v) in both else f"style={style}"
            out.append(f"  {u} -- {v} [layer={layer}, color={color}, {attrs}];")
    out.append("}")
    return "\n".join(out) + "\n"
