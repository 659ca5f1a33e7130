"""Path selection: static route matrices and admission-pruned shortest path.

Both flavors use unit hop cost; equal-length candidates resolve to the
lexicographically smallest node sequence so route choice is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bam import GbamConfig, LinkState, greedy_plan
from .domain import SimError, link_id
from .topology import Topology, TopologyValidationError, _validate_path


@dataclass
class RouteMatrix:
    entries: dict[tuple[int, int], tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def from_topology(cls, topo: Topology) -> "RouteMatrix":
        matrix = cls()
        for src, dst, path in topo.route_entries:
            matrix.entries[(src, dst)] = path
        return matrix

    def set(self, topo: Topology, src: int, dst: int, path: tuple[int, ...]) -> None:
        _validate_path(topo, src, dst, path)
        self.entries[(src, dst)] = path


def static_route(matrix: RouteMatrix, src: int, dst: int) -> tuple[int, ...] | None:
    """Configured path, or None for missing pairs and self-routing."""
    if src == dst:
        return None
    return matrix.entries.get((src, dst))


def _lex_shortest(nodes: tuple[int, ...], edges: set[tuple[int, int]],
                  src: int, dst: int) -> tuple[int, ...] | None:
    """Minimum-hop path with lexicographic tie-break, via reverse BFS distance
    labels and a smallest-next-node walk."""
    if src == dst:
        return None
    radj: dict[int, list[int]] = {n: [] for n in nodes}
    fadj: dict[int, list[int]] = {n: [] for n in nodes}
    for a, b in edges:
        fadj[a].append(b)
        radj[b].append(a)
    dist = {dst: 0}
    frontier = [dst]
    while frontier:
        nxt = []
        for node in frontier:
            for prev in radj[node]:
                if prev not in dist:
                    dist[prev] = dist[node] + 1
                    nxt.append(prev)
        frontier = nxt
    if src not in dist:
        return None
    path = [src]
    node = src
    while node != dst:
        node = min(n for n in fadj[node] if dist.get(n, -1) == dist[node] - 1)
        path.append(node)
    return tuple(path)


def default_matrix(topo: Topology) -> RouteMatrix:
    """All-pairs minimum-hop matrix (the `ROUTE STATIC DEFAULT` expansion)."""
    edges = {(l.src, l.dst) for l in topo.links}
    matrix = RouteMatrix()
    for src in topo.nodes:
        for dst in topo.nodes:
            if src == dst:
                continue
            path = _lex_shortest(topo.nodes, edges, src, dst)
            if path is not None:
                matrix.entries[(src, dst)] = path
    return matrix


def cspf(topo: Topology, link_states: dict[str, LinkState], src: int, dst: int,
         tc: int, bw_millis: int, cfg: GbamConfig) -> tuple[int, ...] | None:
    """Constrained shortest path: drop every link that cannot admit the request
    from free space right now (preemption is never considered while pruning),
    then run minimum-hop with the lexicographic tie-break."""
    feasible = set()
    for l in topo.links:
        state = link_states[link_id(l.src, l.dst)]
        if greedy_plan(state, tc, bw_millis, cfg) is not None:
            feasible.add((l.src, l.dst))
    return _lex_shortest(topo.nodes, feasible, src, dst)
