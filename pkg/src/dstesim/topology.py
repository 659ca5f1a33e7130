"""Topology representation, the line-oriented file grammar, and builtin presets.

Grammar (UTF-8, `#` starts a comment, blank lines ignored):

    TOPOLOGY <name>
    CLASSES <C>
    NODE <id> [<label>]
    LINK <src> <dst> CAP <Mb/s> BC <v0> <v1> ... <vC-1>
    ROUTE <src> <dst> PATH <n0> <n1> ... <nk>

LINK lines are undirected and expand to two directed links with independent
reservation states (full-duplex assumption). ROUTE lines are optional static
routing-matrix entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .domain import Bandwidth, LinkSpec, SimError, link_id


class TopologyParseError(SimError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TopologyValidationError(SimError):
    pass


class UnknownTopologyError(SimError):
    pass


@dataclass(frozen=True)
class Topology:
    name: str
    nodes: tuple[int, ...]
    links: tuple[LinkSpec, ...]                                   # directed
    route_entries: tuple[tuple[int, int, tuple[int, ...]], ...] = ()

    @property
    def class_count(self) -> int:
        return self.links[0].class_count if self.links else 0

    def link(self, src: int, dst: int) -> LinkSpec | None:
        return self._by_pair().get((src, dst))

    def _by_pair(self) -> dict[tuple[int, int], LinkSpec]:
        return {(l.src, l.dst): l for l in self.links}

    def neighbors(self, node: int) -> list[int]:
        return sorted(l.dst for l in self.links if l.src == node)


def parse_topology(text: str) -> Topology:
    name = "unnamed"
    classes: int | None = None
    nodes: list[int] = []
    node_set: set[int] = set()
    raw_links: list[tuple[int, int, int, Bandwidth, tuple[Bandwidth, ...]]] = []
    routes: list[tuple[int, int, tuple[int, ...]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        verb = tokens[0].upper()
        try:
            if verb == "TOPOLOGY":
                if len(tokens) != 2:
                    raise TopologyParseError(lineno, "TOPOLOGY takes exactly one name")
                name = tokens[1]
            elif verb == "CLASSES":
                classes = int(tokens[1])
                if classes < 1:
                    raise TopologyParseError(lineno, "CLASSES must be >= 1")
            elif verb == "NODE":
                node = int(tokens[1])
                if node in node_set:
                    raise TopologyParseError(lineno, f"duplicate node {node}")
                node_set.add(node)
                nodes.append(node)
            elif verb == "LINK":
                if classes is None:
                    raise TopologyParseError(lineno, "LINK before CLASSES")
                src, dst = int(tokens[1]), int(tokens[2])
                if tokens[3].upper() != "CAP":
                    raise TopologyParseError(lineno, "expected CAP")
                cap = Bandwidth.from_mbps(tokens[4])
                if tokens[5].upper() != "BC":
                    raise TopologyParseError(lineno, "expected BC")
                bc_tokens = tokens[6:6 + classes]
                if len(bc_tokens) != classes:
                    raise TopologyParseError(lineno, f"BC needs {classes} values")
                bc = tuple(Bandwidth.from_mbps(v) for v in bc_tokens)
                raw_links.append((lineno, src, dst, cap, bc))
            elif verb == "ROUTE":
                if tokens[3].upper() != "PATH":
                    raise TopologyParseError(lineno, "expected PATH")
                routes.append((int(tokens[1]), int(tokens[2]), tuple(int(t) for t in tokens[4:])))
            else:
                raise TopologyParseError(lineno, f"unknown verb {tokens[0]}")
        except TopologyParseError:
            raise
        except (ValueError, IndexError) as exc:
            raise TopologyParseError(lineno, str(exc)) from exc

    directed: list[LinkSpec] = []
    seen_pairs: set[tuple[int, int]] = set()
    for lineno, src, dst, cap, bc in raw_links:
        for a, b in ((src, dst), (dst, src)):
            if a not in node_set or b not in node_set:
                raise TopologyValidationError(f"line {lineno}: link endpoint {a if a not in node_set else b} not declared")
            if (a, b) in seen_pairs:
                raise TopologyValidationError(f"line {lineno}: duplicate link {a}->{b}")
            seen_pairs.add((a, b))
            directed.append(LinkSpec(link_id(a, b), a, b, cap, bc))

    ordered = tuple(sorted(nodes))
    if ordered != tuple(range(len(ordered))):
        raise TopologyValidationError("node ids must be dense integers starting at 0")

    topo = Topology(name, ordered, tuple(directed), tuple(routes))
    for src, dst, path in routes:
        _validate_path(topo, src, dst, path)
    return topo


def _validate_path(topo: Topology, src: int, dst: int, path: tuple[int, ...]) -> None:
    if len(path) < 2 or path[0] != src or path[-1] != dst:
        raise TopologyValidationError(f"route {src}->{dst}: path must run src..dst")
    if len(set(path)) != len(path):
        raise TopologyValidationError(f"route {src}->{dst}: path has a loop")
    pairs = {(l.src, l.dst) for l in topo.links}
    for a, b in zip(path, path[1:]):
        if (a, b) not in pairs:
            raise TopologyValidationError(f"route {src}->{dst}: no link {a}->{b}")


def serialize_topology(topo: Topology) -> str:
    """Canonical text form; parse_topology(serialize_topology(t)) == t."""
    out = [f"TOPOLOGY {topo.name}", f"CLASSES {topo.class_count}"]
    for n in topo.nodes:
        out.append(f"NODE {n}")
    emitted: set[tuple[int, int]] = set()
    for l in topo.links:
        if (l.dst, l.src) in emitted:
            continue
        emitted.add((l.src, l.dst))
        bc = " ".join(_fmt(b) for b in l.bc)
        out.append(f"LINK {l.src} {l.dst} CAP {_fmt(l.capacity)} BC {bc}")
    for src, dst, path in topo.route_entries:
        out.append(f"ROUTE {src} {dst} PATH {' '.join(str(n) for n in path)}")
    return "\n".join(out) + "\n"


def _fmt(bw: Bandwidth) -> str:
    if bw.millis % 1000 == 0:
        return str(bw.millis // 1000)
    return f"{bw.millis / 1000:.3f}".rstrip("0")


PTP_2N_1E = """\
TOPOLOGY PTP-2n-1e
CLASSES 3
NODE 0
NODE 1
LINK 0 1 CAP 100 BC 40 30 30
"""

BUILTIN_FILES = {"NSFNET": "nsfnet.topo", "NTT": "ntt.topo"}


def builtin(name: str) -> Topology:
    """Named preset topologies: PTP-2n-1e, NSFNET, NTT."""
    key = name.upper()
    if key == "PTP-2N-1E":
        return parse_topology(PTP_2N_1E)
    if key in BUILTIN_FILES:
        text = resources.files("dstesim.data").joinpath(BUILTIN_FILES[key]).read_text("utf-8")
        return parse_topology(text)
    raise UnknownTopologyError(f"unknown builtin topology {name!r}")


def with_bc(topo: Topology, bc: tuple[Bandwidth, ...]) -> Topology:
    """Broadcast one BC vector to every link (scenario convenience)."""
    links = tuple(LinkSpec(l.link_id, l.src, l.dst, l.capacity, bc) for l in topo.links)
    return Topology(topo.name, topo.nodes, links, topo.route_entries)
