"""Line-oriented scenario scripts: parse, execute, serialize.

A script fully parses before anything runs; syntax problems abort with the
offending line. Semantic problems (statement order, constraint violations)
surface after parsing, also with a line number. Verbs:

    TOPOLOGY BUILTIN <name> | TOPOLOGY FILE <path>
    CLASSES <C>
    BAM <MAM|RDM|ATCS|GBAM> [HTL ON|OFF] [LTH ON|OFF] [PREEMPT ON|OFF] [OVERSUB ON|OFF]
    BC ALL <v0> ... <vC-1>
    BC LINK <src> <dst> <v0> ... <vC-1>
    TRAFFIC TC <c> POISSON <rate>|UNIFORM <lo> <hi>|DET <period>
                   HOLD EXP <mean>|UNIFORM <lo> <hi>|DET <s>
                   BW DET <mbps>|CHOICE <v,v,...> [SRC <node> DST <node>]
    TRAFFIC TRACE <path>
    PROFILE TABLE1 [HOLD <mean_s>] [BW <v,v,...>] [SRC <node> DST <node>]
    ROUTE STATIC DEFAULT | ROUTE CSPF | ROUTE PATH <src> <dst> <n0> ... <nk>
    SWITCH MODEL <model> AT <seconds> [BC <v,v,...>] [POLICY GRANDFATHER|PREEMPT]
    STOP TIME <seconds> | STOP LSPS <count>
    SEEDS <s1> <s2> ...
    TICK <seconds>
    NAME <label>
    RUN
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .bam import GbamConfig, SwitchPolicy
from .domain import BamModel, Bandwidth, InvalidFieldError, SimError, bc_vector, validate_constraints
from .engine import (
    ModelSwitchSpec,
    RoutingMode,
    RunReport,
    Scenario,
    StopCondition,
    run,
    trace_to_jsonl,
)
from .routing import RouteMatrix, default_matrix
from .topology import Topology, builtin, parse_topology, UnknownTopologyError
from .traffic import (
    BandwidthChoice,
    ClassTrafficSpec,
    Deterministic,
    Exponential,
    FixedBandwidth,
    FixedEndpoints,
    UniformEndpoints,
    Uniform,
    build_table1_schedule,
    load_trace,
)


class ScriptParseError(SimError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ScriptSemanticError(SimError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class _Stmt:
    line: int
    verb: str
    tokens: list[str]


_VERBS = {"TOPOLOGY", "CLASSES", "BAM", "BC", "TRAFFIC", "PROFILE", "ROUTE",
          "SWITCH", "STOP", "SEEDS", "TICK", "NAME", "RUN"}


def _tokenize(text: str) -> list[_Stmt]:
    stmts = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        verb = tokens[0].upper()
        if verb not in _VERBS:
            raise ScriptParseError(lineno, f"unknown verb {tokens[0]!r}")
        stmts.append(_Stmt(lineno, verb, tokens[1:]))
    return stmts


def _mbps_list(tokens: list[str], line: int) -> tuple[Bandwidth, ...]:
    try:
        return bc_vector(tokens)
    except (InvalidFieldError, ValueError) as exc:
        raise ScriptParseError(line, str(exc)) from exc


def _float(tok: str, line: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError as exc:
        raise ScriptParseError(line, f"bad {what} {tok!r}") from exc


def _int(tok: str, line: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError as exc:
        raise ScriptParseError(line, f"bad {what} {tok!r}") from exc


def _parse_time_dist(tokens: list[str], i: int, line: int, arrival: bool):
    kind = tokens[i].upper()
    if kind in ("POISSON", "EXP"):
        return Exponential(_float(tokens[i + 1], line, "rate" if arrival else "mean")
                           if arrival else 1.0 / _float(tokens[i + 1], line, "mean")), i + 2
    if kind == "UNIFORM":
        return Uniform(_float(tokens[i + 1], line, "lo"), _float(tokens[i + 2], line, "hi")), i + 3
    if kind == "DET":
        return Deterministic(_float(tokens[i + 1], line, "value")), i + 2
    raise ScriptParseError(line, f"unknown distribution {tokens[i]!r}")


def _parse_traffic(tokens: list[str], line: int) -> ClassTrafficSpec:
    if len(tokens) < 2 or tokens[0].upper() != "TC":
        raise ScriptParseError(line, "expected TRAFFIC TC <class> ...")
    tc = _int(tokens[1], line, "class index")
    i = 2
    interarrival, i = _parse_time_dist(tokens, i, line, arrival=True)
    if tokens[i].upper() != "HOLD":
        raise ScriptParseError(line, "expected HOLD")
    holding, i = _parse_time_dist(tokens, i + 1, line, arrival=False)
    if tokens[i].upper() != "BW":
        raise ScriptParseError(line, "expected BW")
    bw_kind = tokens[i + 1].upper()
    if bw_kind == "DET":
        bandwidth = FixedBandwidth(Bandwidth.from_mbps(tokens[i + 2]))
        i += 3
    elif bw_kind == "CHOICE":
        values = tuple(Bandwidth.from_mbps(v) for v in tokens[i + 2].split(","))
        bandwidth = BandwidthChoice(values)
        i += 3
    else:
        raise ScriptParseError(line, f"unknown bandwidth form {tokens[i + 1]!r}")
    endpoints = UniformEndpoints()
    if i < len(tokens):
        if len(tokens) - i != 4 or tokens[i].upper() != "SRC" or tokens[i + 2].upper() != "DST":
            raise ScriptParseError(line, "expected SRC <node> DST <node>")
        endpoints = FixedEndpoints(_int(tokens[i + 1], line, "src"), _int(tokens[i + 3], line, "dst"))
    return ClassTrafficSpec(tc, interarrival, holding, bandwidth, endpoints)


_MODEL_FLAGS = {"HTL": "htl", "LTH": "lth", "PREEMPT": "preemption", "OVERSUB": "oversubscription"}


def _parse_bam(tokens: list[str], classes: int, line: int) -> GbamConfig:
    try:
        model = BamModel(tokens[0].upper())
    except ValueError as exc:
        raise ScriptParseError(line, f"unknown model {tokens[0]!r}") from exc
    flags = {"preemption": True, "oversubscription": False, "htl": False, "lth": False}
    i = 1
    while i < len(tokens):
        key = tokens[i].upper()
        if key not in _MODEL_FLAGS or i + 1 >= len(tokens):
            raise ScriptParseError(line, f"bad model flag {tokens[i]!r}")
        flags[_MODEL_FLAGS[key]] = tokens[i + 1].upper() == "ON"
        i += 2
    if model is BamModel.MAM:
        return GbamConfig.mam(classes, preemption=flags["preemption"],
                              oversubscription=flags["oversubscription"])
    if model is BamModel.RDM:
        return GbamConfig.rdm(classes, preemption=flags["preemption"])
    if model is BamModel.ATCS:
        return GbamConfig.atcs(classes, preemption=flags["preemption"])
    return GbamConfig.gbam(classes, htl=flags["htl"], lth=flags["lth"],
                           preemption=flags["preemption"],
                           oversubscription=flags["oversubscription"])


def parse_script(text: str, base_dir: Path | None = None) -> Scenario:
    """Parse and semantically check a script, producing a runnable Scenario."""
    stmts = _tokenize(text)
    base_dir = base_dir or Path.cwd()

    name = "scenario"
    topology: Topology | None = None
    classes: int | None = None
    cfg: GbamConfig | None = None
    bc_all: tuple[Bandwidth, ...] | None = None
    bc_links: list[tuple[int, int, tuple[Bandwidth, ...]]] = []
    specs: dict[int, ClassTrafficSpec] = {}
    profile = None            # (hold, bw_values, src, dst)
    trace_path: str | None = None
    routing: RoutingMode | None = None
    route_paths: list[tuple[int, int, tuple[int, ...]]] = []
    switches: list[tuple[int, ModelSwitchSpec]] = []
    raw_switches: list[tuple[int, list[str]]] = []
    stop_time: float | None = None
    stop_lsps: int | None = None
    seeds: tuple[int, ...] = ()
    tick = 60.0
    saw_run = False

    for stmt in stmts:
        line, verb, tokens = stmt.line, stmt.verb, stmt.tokens
        if saw_run:
            raise ScriptSemanticError(line, "statements after RUN")
        if verb == "NAME":
            name = " ".join(tokens) or name
        elif verb == "TOPOLOGY":
            kind = tokens[0].upper() if tokens else ""
            if kind == "BUILTIN" and len(tokens) == 2:
                try:
                    topology = builtin(tokens[1])
                except UnknownTopologyError as exc:
                    raise ScriptSemanticError(line, str(exc)) from exc
            elif kind == "FILE" and len(tokens) == 2:
                path = (base_dir / tokens[1]).resolve()
                try:
                    topology = parse_topology(path.read_text("utf-8"))
                except OSError as exc:
                    raise ScriptSemanticError(line, f"cannot read {path}: {exc}") from exc
            else:
                raise ScriptParseError(line, "expected TOPOLOGY BUILTIN <name> or TOPOLOGY FILE <path>")
        elif verb == "CLASSES":
            classes = _int(tokens[0], line, "class count")
            if classes < 1:
                raise ScriptSemanticError(line, "CLASSES must be >= 1")
        elif verb == "BAM":
            if classes is None:
                raise ScriptSemanticError(line, "BAM before CLASSES")
            if not tokens:
                raise ScriptParseError(line, "BAM needs a model")
            cfg = _parse_bam(tokens, classes, line)
        elif verb == "BC":
            if topology is None:
                raise ScriptSemanticError(line, "BC before TOPOLOGY")
            if classes is None:
                raise ScriptSemanticError(line, "BC before CLASSES")
            kind = tokens[0].upper() if tokens else ""
            if kind == "ALL":
                if len(tokens) - 1 != classes:
                    raise ScriptSemanticError(line, f"BC ALL needs {classes} values")
                bc_all = _mbps_list(tokens[1:], line)
            elif kind == "LINK":
                if len(tokens) - 3 != classes:
                    raise ScriptSemanticError(line, f"BC LINK needs {classes} values")
                bc_links.append((_int(tokens[1], line, "src"), _int(tokens[2], line, "dst"),
                                 _mbps_list(tokens[3:], line)))
            else:
                raise ScriptParseError(line, "expected BC ALL or BC LINK")
        elif verb == "TRAFFIC":
            if tokens and tokens[0].upper() == "TRACE":
                trace_path = tokens[1]
            else:
                spec = _parse_traffic(tokens, line)
                if classes is not None and spec.tc >= classes:
                    raise ScriptSemanticError(line, f"traffic class {spec.tc} out of range")
                specs[spec.tc] = spec
        elif verb == "PROFILE":
            if not tokens or tokens[0].upper() != "TABLE1":
                raise ScriptParseError(line, "expected PROFILE TABLE1")
            hold, bws, src, dst = 90.0, (1.0, 2.0), 0, 1
            i = 1
            while i < len(tokens):
                key = tokens[i].upper()
                if key == "HOLD":
                    hold = _float(tokens[i + 1], line, "hold mean")
                elif key == "BW":
                    bws = tuple(_float(v, line, "bandwidth") for v in tokens[i + 1].split(","))
                elif key == "SRC":
                    src = _int(tokens[i + 1], line, "src")
                elif key == "DST":
                    dst = _int(tokens[i + 1], line, "dst")
                else:
                    raise ScriptParseError(line, f"bad PROFILE option {tokens[i]!r}")
                i += 2
            profile = (hold, bws, src, dst)
        elif verb == "ROUTE":
            kind = tokens[0].upper() if tokens else ""
            if kind == "STATIC" and len(tokens) == 2 and tokens[1].upper() == "DEFAULT":
                routing = RoutingMode.STATIC
            elif kind == "CSPF":
                routing = RoutingMode.CSPF
            elif kind == "PATH":
                routing = RoutingMode.STATIC
                route_paths.append((_int(tokens[1], line, "src"), _int(tokens[2], line, "dst"),
                                    tuple(_int(t, line, "node") for t in tokens[3:])))
            else:
                raise ScriptParseError(line, "expected ROUTE STATIC DEFAULT | ROUTE CSPF | ROUTE PATH ...")
        elif verb == "SWITCH":
            raw_switches.append((line, tokens))
        elif verb == "STOP":
            kind = tokens[0].upper() if tokens else ""
            if kind == "TIME":
                stop_time = _float(tokens[1], line, "stop time")
            elif kind == "LSPS":
                stop_lsps = _int(tokens[1], line, "lsp count")
            else:
                raise ScriptParseError(line, "expected STOP TIME or STOP LSPS")
        elif verb == "SEEDS":
            if not tokens:
                raise ScriptParseError(line, "SEEDS needs at least one value")
            seeds = tuple(_int(t, line, "seed") for t in tokens)
        elif verb == "TICK":
            tick = _float(tokens[0], line, "tick")
        elif verb == "RUN":
            saw_run = True

    if not saw_run:
        raise ScriptSemanticError(stmts[-1].line if stmts else 1, "missing RUN")
    last = stmts[-1].line
    for what, value in (("TOPOLOGY", topology), ("CLASSES", classes), ("BAM", cfg),
                        ("ROUTE", routing), ("SEEDS", seeds or None)):
        if value is None:
            raise ScriptSemanticError(last, f"missing {what}")
    if stop_time is None and stop_lsps is None:
        raise ScriptSemanticError(last, "missing STOP condition")
    if topology.class_count != classes and bc_all is None:
        raise ScriptSemanticError(last, f"topology declares {topology.class_count} classes, "
                                        f"script says {classes}; add BC ALL to retarget")

    from .topology import with_bc  # local import to avoid a cycle at module load
    if bc_all is not None:
        topology = with_bc(topology, bc_all)
    if bc_links:
        by_pair = {(l.src, l.dst): l for l in topology.links}
        for src, dst, bc in bc_links:
            for pair in ((src, dst), (dst, src)):
                if pair not in by_pair:
                    raise ScriptSemanticError(last, f"BC LINK {src} {dst}: no such link")
                by_pair[pair] = replace(by_pair[pair], bc=bc)
        topology = Topology(topology.name, topology.nodes,
                            tuple(by_pair[(l.src, l.dst)] for l in topology.links),
                            topology.route_entries)

    for lineno, tokens in raw_switches:
        if tokens[0].upper() != "MODEL":
            raise ScriptParseError(lineno, "expected SWITCH MODEL <model> AT <t>")
        i_at = [t.upper() for t in tokens].index("AT") if "AT" in [t.upper() for t in tokens] else -1
        if i_at < 0:
            raise ScriptParseError(lineno, "SWITCH needs AT <seconds>")
        sw_cfg = _parse_bam(tokens[1:i_at], classes, lineno)
        at = _float(tokens[i_at + 1], lineno, "switch time")
        bc = None
        policy = SwitchPolicy.GRANDFATHER
        i = i_at + 2
        while i < len(tokens):
            key = tokens[i].upper()
            if key == "BC":
                bc = tuple(Bandwidth.from_mbps(v) for v in tokens[i + 1].split(","))
            elif key == "POLICY":
                policy = SwitchPolicy(tokens[i + 1].upper())
            else:
                raise ScriptParseError(lineno, f"bad SWITCH option {tokens[i]!r}")
            i += 2
        switches.append((lineno, ModelSwitchSpec(at, sw_cfg, bc, policy)))

    schedule = None
    final_specs: tuple[ClassTrafficSpec, ...] = tuple(specs[tc] for tc in sorted(specs))
    if profile is not None:
        hold, bws, src, dst = profile
        capacity = topology.links[0].capacity
        schedule, final_specs = build_table1_schedule(
            capacity, classes, hold_mean=hold, bw_values=bws,
            endpoints=FixedEndpoints(src, dst))
    trace_requests = None
    if trace_path is not None:
        path = (base_dir / trace_path).resolve()
        try:
            trace_requests = load_trace(path.read_text("utf-8"))
        except OSError as exc:
            raise ScriptSemanticError(last, f"cannot read trace {path}: {exc}") from exc

    matrix = None
    if routing is RoutingMode.STATIC:
        matrix = default_matrix(topology)
        for src, dst, path in route_paths:
            matrix.set(topology, src, dst, path)

    scenario = Scenario(
        name=name,
        topology=topology,
        class_count=classes,
        bam=cfg,
        routing=routing,
        static_routes=matrix,
        traffic_specs=final_specs,
        schedule=schedule,
        trace_requests=trace_requests,
        stop=StopCondition(stop_time, stop_lsps),
        seeds=seeds,
        model_switches=tuple(sw for _, sw in switches),
        stats_step=tick,
    )
    for link in scenario.topology.links:
        result = validate_constraints(scenario.bam, link)
        if not result.ok:
            raise ScriptSemanticError(last, f"link {link.link_id}: " + "; ".join(result.violations))
    try:
        scenario.validate()
    except SimError as exc:
        raise ScriptSemanticError(last, str(exc)) from exc
    return scenario


def execute_script(text: str, export_dir: Path | str | None = None,
                   trace: bool = False, base_dir: Path | None = None) -> list[RunReport]:
    """Parse, run, and export. Returns the per-run reports."""
    scenario = parse_script(text, base_dir)
    reports = run(scenario)
    if export_dir is not None:
        write_exports(reports, Path(export_dir), trace)
    return reports


class ExportIoError(SimError):
    pass


def write_exports(reports: list[RunReport], export_dir: Path, trace: bool) -> list[Path]:
    written = []
    try:
        export_dir.mkdir(parents=True, exist_ok=True)
        for report in reports:
            stem = f"run{report.run_index}"
            csv_path = export_dir / f"{stem}_metrics.csv"
            csv_path.write_text(report.stats.export_csv(), encoding="utf-8")
            summary_path = export_dir / f"{stem}_summary.json"
            summary = report.stats.summary_dict(report.end_time)
            summary["report"] = report.canonical_dict()
            summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2), encoding="utf-8")
            written += [csv_path, summary_path]
            if trace:
                trace_path = export_dir / f"{stem}_trace.jsonl"
                trace_path.write_text(trace_to_jsonl(report.trace), encoding="utf-8")
                written.append(trace_path)
    except OSError as exc:
        raise ExportIoError(f"cannot write exports under {export_dir}: {exc}") from exc
    return written


def summarize(reports: list[RunReport]) -> str:
    lines = []
    for r in reports:
        blocking = "n/a" if r.requests == 0 else f"{r.blocked_total / r.requests:.3f}"
        lines.append(
            f"run {r.run_index} seed {r.seed}: {r.requests} requests, {r.grants} grants "
            f"({r.grants_with_preemption} with preemption), {r.blocked_total} blocked "
            f"(p={blocking}), {r.preemptions} preemptions, {r.devolutions} devolutions, "
            f"{r.event_count} events in {r.wall_time_s:.2f}s")
    return "\n".join(lines)


# --- serialization --------------------------------------------------------------


def serialize_scenario(scenario: Scenario) -> str:
    """Canonical script text; parse_script(serialize_scenario(s)) == s.

    Limited to builtin-named topologies and stream traffic (trace scenarios
    carry external files and are not round-trippable from text alone).
    """
    from .topology import builtin as load_builtin

    if scenario.trace_requests is not None:
        raise SimError("trace-based scenarios cannot be serialized to a script")
    try:
        base = load_builtin(scenario.topology.name)
    except UnknownTopologyError as exc:
        raise SimError(f"topology {scenario.topology.name!r} is not a builtin") from exc

    out = [f"NAME {scenario.name}", f"TOPOLOGY BUILTIN {scenario.topology.name}",
           f"CLASSES {scenario.class_count}"]
    out.append(_bam_line("BAM", scenario.bam))
    bcs = {l.bc for l in scenario.topology.links}
    if len(bcs) == 1:
        out.append("BC ALL " + " ".join(_fmt_bw(b) for b in next(iter(bcs))))
    else:
        base_pairs = {(l.src, l.dst): l.bc for l in base.links}
        emitted = set()
        for l in scenario.topology.links:
            key = (min(l.src, l.dst), max(l.src, l.dst))
            if key in emitted or l.bc == base_pairs.get((l.src, l.dst)):
                continue
            emitted.add(key)
            out.append(f"BC LINK {key[0]} {key[1]} " + " ".join(_fmt_bw(b) for b in l.bc))
    if scenario.schedule is not None:
        spec = scenario.traffic_specs[0]
        hold = 1.0 / spec.holding.rate
        bws = ",".join(_fmt_bw(v) for v in spec.bandwidth.values)
        src, dst = spec.endpoints.src, spec.endpoints.dst
        out.append(f"PROFILE TABLE1 HOLD {_fmt_num(hold)} BW {bws} SRC {src} DST {dst}")
    else:
        for spec in scenario.traffic_specs:
            out.append(_traffic_line(spec))
    if scenario.routing is RoutingMode.CSPF:
        out.append("ROUTE CSPF")
    else:
        out.append("ROUTE STATIC DEFAULT")
        default = default_matrix(scenario.topology)
        for (src, dst), path in sorted(scenario.static_routes.entries.items()):
            if default.entries.get((src, dst)) != path:
                out.append(f"ROUTE PATH {src} {dst} " + " ".join(str(n) for n in path))
    for sw in scenario.model_switches:
        line = _bam_line("SWITCH MODEL", sw.cfg) + f" AT {_fmt_num(sw.time)}"
        if sw.bc is not None:
            line += " BC " + ",".join(_fmt_bw(b) for b in sw.bc)
        if sw.policy is not SwitchPolicy.GRANDFATHER:
            line += f" POLICY {sw.policy.value}"
        out.append(line)
    if scenario.stop.max_time is not None:
        out.append(f"STOP TIME {_fmt_num(scenario.stop.max_time)}")
    if scenario.stop.max_lsps is not None:
        out.append(f"STOP LSPS {scenario.stop.max_lsps}")
    out.append("SEEDS " + " ".join(str(s) for s in scenario.seeds))
    out.append(f"TICK {_fmt_num(scenario.stats_step)}")
    out.append("RUN")
    return "\n".join(out) + "\n"


def _bam_line(prefix: str, cfg: GbamConfig) -> str:
    parts = [prefix, cfg.model.value]
    if cfg.model is BamModel.GBAM:
        parts += ["HTL", "ON" if cfg.htl_enabled else "OFF",
                  "LTH", "ON" if cfg.lth_enabled else "OFF"]
    if not cfg.preemption_enabled:
        parts += ["PREEMPT", "OFF"]
    if cfg.mam_oversubscription:
        parts += ["OVERSUB", "ON"]
    return " ".join(parts)


def _traffic_line(spec: ClassTrafficSpec) -> str:
    parts = [f"TRAFFIC TC {spec.tc}"]
    ia = spec.interarrival
    if isinstance(ia, Exponential):
        parts.append(f"POISSON {_fmt_num(ia.rate)}")
    elif isinstance(ia, Uniform):
        parts.append(f"UNIFORM {_fmt_num(ia.lo)} {_fmt_num(ia.hi)}")
    else:
        parts.append(f"DET {_fmt_num(ia.value)}")
    hold = spec.holding
    if isinstance(hold, Exponential):
        parts.append(f"HOLD EXP {_fmt_num(1.0 / hold.rate)}")
    elif isinstance(hold, Uniform):
        parts.append(f"HOLD UNIFORM {_fmt_num(hold.lo)} {_fmt_num(hold.hi)}")
    else:
        parts.append(f"HOLD DET {_fmt_num(hold.value)}")
    bw = spec.bandwidth
    if isinstance(bw, FixedBandwidth):
        parts.append(f"BW DET {_fmt_bw(bw.value)}")
    else:
        parts.append("BW CHOICE " + ",".join(_fmt_bw(v) for v in bw.values))
    if isinstance(spec.endpoints, FixedEndpoints):
        parts.append(f"SRC {spec.endpoints.src} DST {spec.endpoints.dst}")
    return " ".join(parts)


def _fmt_bw(b: Bandwidth) -> str:
    if b.millis % 1000 == 0:
        return str(b.millis // 1000)
    return f"{b.millis / 1000:.3f}".rstrip("0")


def _fmt_num(x: float) -> str:
    return repr(x) if isinstance(x, float) and not x.is_integer() else str(int(x))
