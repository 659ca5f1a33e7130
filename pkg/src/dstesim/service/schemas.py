"""Pydantic request/response models and their mapping onto core scenario types."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

from ..advisor import Case, CaseBase, Recommendation
from ..bam import GbamConfig, SwitchPolicy
from ..domain import BamModel, Bandwidth, bc_vector
from ..engine import ModelSwitchSpec, RoutingMode, Scenario, StopCondition
from ..routing import default_matrix
from ..topology import Topology, builtin, parse_topology, with_bc
from ..traffic import (
    BandwidthChoice,
    ClassTrafficSpec,
    Deterministic,
    Exponential,
    FixedBandwidth,
    FixedEndpoints,
    Uniform,
    UniformEndpoints,
    build_table1_schedule,
    load_trace,
)


class TopologyIn(BaseModel):
    builtin: str | None = None
    text: str | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.builtin is None) == (self.text is None):
            raise ValueError("provide exactly one of builtin or text")
        return self

    def resolve(self) -> Topology:
        return builtin(self.builtin) if self.builtin else parse_topology(self.text)


class BamIn(BaseModel):
    model: Literal["MAM", "RDM", "ATCS", "GBAM"]
    htl: bool = False
    lth: bool = False
    preemption: bool = True
    oversubscription: bool = False

    def resolve(self, classes: int) -> GbamConfig:
        m = BamModel(self.model)
        if m is BamModel.MAM:
            return GbamConfig.mam(classes, preemption=self.preemption,
                                  oversubscription=self.oversubscription)
        if m is BamModel.RDM:
            return GbamConfig.rdm(classes, preemption=self.preemption)
        if m is BamModel.ATCS:
            return GbamConfig.atcs(classes, preemption=self.preemption)
        return GbamConfig.gbam(classes, htl=self.htl, lth=self.lth,
                               preemption=self.preemption,
                               oversubscription=self.oversubscription)


class TimeDistIn(BaseModel):
    kind: Literal["poisson", "exponential", "uniform", "deterministic"]
    rate: float | None = None        # poisson arrivals
    mean: float | None = None        # exponential holding
    lo: float | None = None
    hi: float | None = None
    value: float | None = None

    def resolve(self):
        if self.kind == "poisson":
            return Exponential(self.rate)
        if self.kind == "exponential":
            return Exponential(1.0 / self.mean)
        if self.kind == "uniform":
            return Uniform(self.lo, self.hi)
        return Deterministic(self.value)


class BandwidthDistIn(BaseModel):
    kind: Literal["deterministic", "choice"]
    value: float | None = None
    values: list[float] | None = None

    def resolve(self):
        if self.kind == "deterministic":
            return FixedBandwidth(Bandwidth.from_mbps(self.value))
        return BandwidthChoice(tuple(Bandwidth.from_mbps(v) for v in self.values))


class TrafficSpecIn(BaseModel):
    tc: int
    arrival: TimeDistIn
    holding: TimeDistIn
    bandwidth: BandwidthDistIn
    src: int | None = None
    dst: int | None = None

    def resolve(self) -> ClassTrafficSpec:
        endpoints = (FixedEndpoints(self.src, self.dst)
                     if self.src is not None and self.dst is not None else UniformEndpoints())
        return ClassTrafficSpec(self.tc, self.arrival.resolve(), self.holding.resolve(),
                                self.bandwidth.resolve(), endpoints)


class Table1In(BaseModel):
    hold_mean: float = 90.0
    bw_values: list[float] = Field(default_factory=lambda: [1.0, 2.0])
    src: int = 0
    dst: int = 1


class TrafficIn(BaseModel):
    specs: list[TrafficSpecIn] | None = None
    table1: Table1In | None = None
    trace_csv: str | None = None

    @model_validator(mode="after")
    def _one_source(self):
        given = sum(x is not None for x in (self.specs, self.table1, self.trace_csv))
        if given != 1:
            raise ValueError("provide exactly one of specs, table1, trace_csv")
        return self


class BcLinkIn(BaseModel):
    src: int
    dst: int
    bc: list[float]


class SwitchIn(BaseModel):
    time: float
    bam: BamIn
    bc: list[float] | None = None
    policy: Literal["GRANDFATHER", "PREEMPT"] = "GRANDFATHER"


class StopIn(BaseModel):
    max_time: float | None = None
    max_lsps: int | None = None


class ScenarioIn(BaseModel):
    name: str = "session"
    topology: TopologyIn
    classes: int = Field(ge=1)
    bam: BamIn
    bc_all: list[float] | None = None
    bc_links: list[BcLinkIn] = Field(default_factory=list)
    traffic: TrafficIn
    routing: Literal["STATIC", "CSPF"] = "STATIC"
    stop: StopIn
    seeds: list[int] = Field(min_length=1)
    stats_step: float = 60.0
    switches: list[SwitchIn] = Field(default_factory=list)

    def to_scenario(self) -> Scenario:
        topo = self.topology.resolve()
        if self.bc_all is not None:
            topo = with_bc(topo, bc_vector(self.bc_all))
        if self.bc_links:
            from dataclasses import replace
            by_pair = {(l.src, l.dst): l for l in topo.links}
            for item in self.bc_links:
                bc = bc_vector(item.bc)
                for pair in ((item.src, item.dst), (item.dst, item.src)):
                    if pair not in by_pair:
                        raise ValueError(f"no link {pair[0]}->{pair[1]}")
                    by_pair[pair] = replace(by_pair[pair], bc=bc)
            topo = Topology(topo.name, topo.nodes,
                            tuple(by_pair[(l.src, l.dst)] for l in topo.links),
                            topo.route_entries)

        schedule = None
        trace_requests = None
        specs: tuple[ClassTrafficSpec, ...] = ()
        if self.traffic.table1 is not None:
            t1 = self.traffic.table1
            schedule, specs = build_table1_schedule(
                topo.links[0].capacity, self.classes, hold_mean=t1.hold_mean,
                bw_values=tuple(t1.bw_values), endpoints=FixedEndpoints(t1.src, t1.dst))
        elif self.traffic.trace_csv is not None:
            trace_requests = load_trace(self.traffic.trace_csv)
        else:
            specs = tuple(s.resolve() for s in self.traffic.specs)

        cfg = self.bam.resolve(self.classes)
        routing = RoutingMode(self.routing)
        switches = tuple(
            ModelSwitchSpec(sw.time, sw.bam.resolve(self.classes),
                            None if sw.bc is None else bc_vector(sw.bc),
                            SwitchPolicy(sw.policy))
            for sw in self.switches
        )
        scenario = Scenario(
            name=self.name,
            topology=topo,
            class_count=self.classes,
            bam=cfg,
            routing=routing,
            static_routes=default_matrix(topo) if routing is RoutingMode.STATIC else None,
            traffic_specs=specs,
            schedule=schedule,
            trace_requests=trace_requests,
            stop=StopCondition(self.stop.max_time, self.stop.max_lsps),
            seeds=tuple(self.seeds),
            model_switches=switches,
            stats_step=self.stats_step,
        )
        scenario.validate()
        return scenario


class ModelSwitchIn(BaseModel):
    bam: BamIn
    bc: list[float] | None = None
    policy: Literal["GRANDFATHER", "PREEMPT"] = "GRANDFATHER"
    at_time: float | None = None


class BcLinkTarget(BaseModel):
    src: int
    dst: int


class BcRetuneIn(BaseModel):
    bc: list[float]
    link: BcLinkTarget | None = None
    at_time: float | None = None


class RecommendIn(BaseModel):
    features: list[float]


class RecommendOut(BaseModel):
    model: str
    bc_fractions: list[float]
    confidence: float

    @classmethod
    def from_recommendation(cls, rec: Recommendation) -> "RecommendOut":
        return cls(model=rec.model.value, bc_fractions=list(rec.bc_fractions),
                   confidence=rec.confidence)


class RetainIn(BaseModel):
    features: list[float]
    model: Literal["MAM", "RDM", "ATCS", "GBAM"]
    bc_fractions: list[float]
    score: float = Field(ge=0.0, le=1.0)

    def resolve(self) -> Case:
        return Case(tuple(self.features), BamModel(self.model),
                    tuple(self.bc_fractions), self.score)
