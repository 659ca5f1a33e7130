"""Generalized per-class admission kernel.

One charging matrix realizes every supported allocation model. A link keeps C
pools; `charge[c][p]` is how much class-c traffic is charged against pool p.
MAM and ATCS use the BC vector directly as pool sizes; RDM telescopes the
nested constraints into disjoint pools (q[p] = bc[p] - bc[p+1]) so that the
pools reachable by class c sum exactly to bc[c].

Which pools a class may charge is an index interval derived from the sharing
flags: the class's own pool, extended left when low-priority pools lend to
higher classes (LTH) and right when high-priority pools lend to lower classes
(HTL). Admission, devolution (relocating loaned charges instead of tearing
them down) and preemption all reduce to feasibility questions over those
intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .domain import (
    BamModel,
    Bandwidth,
    LinkSpec,
    NegativeValueError,
    SimError,
    check_tc,
)


class StalePlanError(SimError):
    """An admit was attempted with a plan that no longer fits the state."""


class UnknownLspError(SimError):
    pass


class InvalidConfigError(SimError):
    pass


@dataclass(frozen=True, slots=True)
class GbamConfig:
    """Model selector plus the sharing/preemption flags that instantiate it.

    Canonical instantiations: MAM has no sharing, RDM lends high-to-low only,
    ATCS lends both ways. GBAM leaves the flags free.
    """

    model: BamModel
    class_count: int
    htl_enabled: bool
    lth_enabled: bool
    preemption_enabled: bool = True
    mam_oversubscription: bool = False

    def __post_init__(self) -> None:
        if self.class_count < 1:
            raise InvalidConfigError("class_count must be >= 1")
        canonical = {
            BamModel.MAM: (False, False),
            BamModel.RDM: (True, False),
            BamModel.ATCS: (True, True),
        }
        expect = canonical.get(self.model)
        if expect is not None and (self.htl_enabled, self.lth_enabled) != expect:
            raise InvalidConfigError(
                f"{self.model.value} requires (htl, lth) == {expect}, "
                f"got ({self.htl_enabled}, {self.lth_enabled})")

    @classmethod
    def mam(cls, class_count: int, *, preemption: bool = True, oversubscription: bool = False) -> "GbamConfig":
        return cls(BamModel.MAM, class_count, False, False, preemption, oversubscription)

    @classmethod
    def rdm(cls, class_count: int, *, preemption: bool = True) -> "GbamConfig":
        return cls(BamModel.RDM, class_count, True, False, preemption)

    @classmethod
    def atcs(cls, class_count: int, *, preemption: bool = True) -> "GbamConfig":
        return cls(BamModel.ATCS, class_count, True, True, preemption)

    @classmethod
    def gbam(cls, class_count: int, *, htl: bool, lth: bool,
             preemption: bool = True, oversubscription: bool = False) -> "GbamConfig":
        return cls(BamModel.GBAM, class_count, htl, lth, preemption, oversubscription)


def pool_layout(cfg: GbamConfig, spec: LinkSpec) -> tuple[int, ...]:
    """Pool sizes in milli-Mb/s. RDM telescopes bc into disjoint nested pools."""
    bc = [b.millis for b in spec.bc]
    if cfg.model is BamModel.RDM:
        sizes = []
        for p in range(len(bc)):
            nxt = bc[p + 1] if p + 1 < len(bc) else 0
            if bc[p] < nxt:
                raise InvalidConfigError(f"RDM bc must be nonincreasing, bc[{p}]={bc[p]} < bc[{p+1}]={nxt}")
            sizes.append(bc[p] - nxt)
        return tuple(sizes)
    return tuple(bc)


def admissible_pools(cfg: GbamConfig, tc: int) -> tuple[int, ...]:
    """Pools class tc may charge, in canonical fill order: own pool first,
    then lendable lower-priority pools ascending from 0, then lendable
    higher-priority pools ascending from tc+1."""
    check_tc(tc, cfg.class_count)
    order = [tc]
    if cfg.lth_enabled:
        order.extend(range(0, tc))
    if cfg.htl_enabled:
        order.extend(range(tc + 1, cfg.class_count))
    return tuple(order)


def admissible_interval(cfg: GbamConfig, tc: int) -> tuple[int, int]:
    lo = 0 if cfg.lth_enabled else tc
    hi = cfg.class_count - 1 if cfg.htl_enabled else tc
    return lo, hi


# ---------------------------------------------------------------------------
# Link state


@dataclass(slots=True)
class LinkState:
    """Per-link charging state: the C x C charge matrix plus per-LSP breakdowns.

    `grandfathered` holds LSPs kept alive across a model switch whose charges
    could not be re-expressed under the new pools; they count against aggregate
    capacity but live outside the pool matrix.
    """

    spec: LinkSpec
    class_count: int
    capacity: int                     # milli-Mb/s
    pool_size: list[int]
    charge: list[list[int]]           # charge[c][p]
    pool_used: list[int]
    lsp_tc: dict[int, int]
    lsp_bw: dict[int, int]
    lsp_order: dict[int, int]         # establishment order, monotone per link
    lsp_charges: dict[int, dict[int, int]]
    grandfathered: dict[int, int]     # lsp_id -> milli-Mb/s
    total_used: int                   # pool charges + grandfathered
    order_counter: int = 0

    @classmethod
    def from_spec(cls, spec: LinkSpec, cfg: GbamConfig) -> "LinkState":
        c = spec.class_count
        return cls(
            spec=spec,
            class_count=c,
            capacity=spec.capacity.millis,
            pool_size=list(pool_layout(cfg, spec)),
            charge=[[0] * c for _ in range(c)],
            pool_used=[0] * c,
            lsp_tc={},
            lsp_bw={},
            lsp_order={},
            lsp_charges={},
            grandfathered={},
            total_used=0,
        )

    def clone(self) -> "LinkState":
        return LinkState(
            spec=self.spec,
            class_count=self.class_count,
            capacity=self.capacity,
            pool_size=list(self.pool_size),
            charge=[row[:] for row in self.charge],
            pool_used=list(self.pool_used),
            lsp_tc=dict(self.lsp_tc),
            lsp_bw=dict(self.lsp_bw),
            lsp_order=dict(self.lsp_order),
            lsp_charges={k: dict(v) for k, v in self.lsp_charges.items()},
            grandfathered=dict(self.grandfathered),
            total_used=self.total_used,
            order_counter=self.order_counter,
        )

    def reserved_millis(self) -> int:
        return self.total_used

    def free_aggregate(self) -> int:
        return self.capacity - self.total_used

    def active_ids(self) -> list[int]:
        return sorted(self.lsp_order, key=self.lsp_order.get)


def check_state_invariants(state: LinkState) -> None:
    """Pool safety, aggregate bound, and double-entry consistency. Test hook."""
    c = state.class_count
    for p in range(c):
        col = sum(state.charge[k][p] for k in range(c))
        if col != state.pool_used[p]:
            raise AssertionError(f"pool_used[{p}]={state.pool_used[p]} != column sum {col}")
        if col > state.pool_size[p]:
            raise AssertionError(f"pool {p} overfull: {col} > {state.pool_size[p]}")
    matrix_total = sum(state.pool_used)
    if matrix_total + sum(state.grandfathered.values()) != state.total_used:
        raise AssertionError("total_used out of sync with matrix + grandfathered")
    if state.total_used > state.capacity:
        raise AssertionError(f"aggregate over capacity: {state.total_used} > {state.capacity}")
    per_cell: dict[tuple[int, int], int] = {}
    for lsp, pools in state.lsp_charges.items():
        tc = state.lsp_tc[lsp]
        if sum(pools.values()) != state.lsp_bw[lsp]:
            raise AssertionError(f"lsp {lsp} charges do not sum to its bandwidth")
        for p, amt in pools.items():
            if amt <= 0:
                raise AssertionError(f"lsp {lsp} has non-positive charge in pool {p}")
            per_cell[(tc, p)] = per_cell.get((tc, p), 0) + amt
    for k in range(c):
        for p in range(c):
            if per_cell.get((k, p), 0) != state.charge[k][p]:
                raise AssertionError(f"charge[{k}][{p}] != sum of per-LSP charges")
    for lsp in state.grandfathered:
        if lsp in state.lsp_charges:
            raise AssertionError(f"lsp {lsp} both charged and grandfathered")


# ---------------------------------------------------------------------------
# Admission


class AdmissionKind(str, Enum):
    FIT = "FIT"
    NEEDS_PREEMPTION = "NEEDS_PREEMPTION"
    REJECT = "REJECT"


class RejectReason(str, Enum):
    CONSTRAINT = "CONSTRAINT"
    CAPACITY = "CAPACITY"


ChargePlan = tuple[tuple[int, int], ...]          # ((pool, milli-Mb/s), ...)
Move = tuple[int, int, int, int]                  # (lsp_id, from_pool, to_pool, amount)


@dataclass(frozen=True, slots=True)
class AdmissionResult:
    kind: AdmissionKind
    plan: ChargePlan = ()
    deficits: tuple[tuple[int, int], ...] = ()    # (pool, missing amount)
    reason: RejectReason | None = None


def greedy_plan(state: LinkState, tc: int, bw: int, cfg: GbamConfig,
                pool_order: tuple[int, ...] | None = None) -> ChargePlan | None:
    """Fill the admissible pools in canonical order with free space; None if
    the request cannot be covered without touching existing charges."""
    if bw <= 0:
        raise NegativeValueError("request bandwidth must be > 0")
    if state.total_used + bw > state.capacity:
        return None
    pools = pool_order if pool_order is not None else admissible_pools(cfg, tc)
    need = bw
    plan: list[tuple[int, int]] = []
    for p in pools:
        free = state.pool_size[p] - state.pool_used[p]
        if free <= 0:
            continue
        take = free if free < need else need
        plan.append((p, take))
        need -= take
        if need == 0:
            return tuple(plan)
    return None


def _interval_loads(state: LinkState, cfg: GbamConfig) -> list[tuple[int, int, int, int]]:
    """(lo, hi, amount, lsp_id) for every charged LSP, in establishment order."""
    loads = []
    for lsp in state.active_ids():
        if lsp in state.grandfathered:
            continue
        lo, hi = admissible_interval(cfg, state.lsp_tc[lsp])
        loads.append((lo, hi, state.lsp_bw[lsp], lsp))
    return loads


def _feasible(loads: list[tuple[int, int, int, int]], pool_size: list[int]) -> bool:
    """Hall condition for interval-restricted placement: within every pool
    interval [i, j], the loads confined to it must fit its total size."""
    c = len(pool_size)
    for i in range(c):
        space = 0
        for j in range(i, c):
            space += pool_size[j]
            demand = sum(amt for lo, hi, amt, _ in loads if lo >= i and hi <= j)
            if demand > space:
                return False
    return True


def _assign(loads: list[tuple[int, int, int, int]], pool_size: list[int]) -> dict[int, dict[int, int]] | None:
    """Earliest-deadline placement: walk pools left to right, serving the loads
    whose interval closes soonest. Exact for interval-restricted placement."""
    c = len(pool_size)
    remaining = {key: amt for lo, hi, amt, key in loads if amt > 0}
    meta = {key: (lo, hi) for lo, hi, _, key in loads}
    placed: dict[int, dict[int, int]] = {key: {} for key in remaining}
    for p in range(c):
        space = pool_size[p]
        if space <= 0:
            continue
        eligible = sorted(
            (key for key, amt in remaining.items() if amt > 0 and meta[key][0] <= p <= meta[key][1]),
            key=lambda key: (meta[key][1], meta[key][0], key),
        )
        for key in eligible:
            if space == 0:
                break
            take = min(space, remaining[key])
            remaining[key] -= take
            space -= take
            placed[key][p] = placed[key].get(p, 0) + take
    if any(amt > 0 for amt in remaining.values()):
        return None
    return placed


_REQUEST_KEY = -1


def rearrangement_plan(state: LinkState, tc: int, bw: int, cfg: GbamConfig
                       ) -> tuple[list[Move], ChargePlan] | None:
    """Fit the request by also relocating existing charges within their own
    admissible pools (devolution). Returns the relocation moves plus the
    request's charge plan, or None when no rearrangement can help."""
    if state.total_used + bw > state.capacity:
        return None
    lo, hi = admissible_interval(cfg, tc)
    loads = _interval_loads(state, cfg)
    loads.append((lo, hi, bw, _REQUEST_KEY))
    if not _feasible(loads, state.pool_size):
        return None
    placed = _assign(loads, state.pool_size)
    if placed is None:  # defensive: _feasible and _assign agree by construction
        return None
    moves: list[Move] = []
    for lsp in state.active_ids():
        if lsp in state.grandfathered:
            continue
        current = dict(state.lsp_charges[lsp])
        target = placed[lsp]
        outs = [(p, current.get(p, 0) - target.get(p, 0)) for p in range(state.class_count)
                if current.get(p, 0) > target.get(p, 0)]
        ins = [(p, target.get(p, 0) - current.get(p, 0)) for p in range(state.class_count)
               if target.get(p, 0) > current.get(p, 0)]
        oi = 0
        for p_in, need in ins:
            while need > 0:
                p_out, avail = outs[oi]
                take = min(avail, need)
                moves.append((lsp, p_out, p_in, take))
                need -= take
                avail -= take
                if avail == 0:
                    oi += 1
                else:
                    outs[oi] = (p_out, avail)
    plan = tuple(sorted(placed[_REQUEST_KEY].items()))
    return moves, plan


def fits_without_preemption(state: LinkState, tc: int, bw: int, cfg: GbamConfig) -> bool:
    """Would this request be granted without tearing anything down?"""
    if greedy_plan(state, tc, bw, cfg) is not None:
        return True
    return rearrangement_plan(state, tc, bw, cfg) is not None


def _preemption_candidates(state: LinkState, requester_tc: int) -> list[int]:
    """LSPs holding at least one high-to-low loan (charge in a pool above the
    LSP's own class) owned by a class below the requester's priority. Sorted
    lowest priority first, newest first."""
    cands = []
    for lsp, pools in state.lsp_charges.items():
        c = state.lsp_tc[lsp]
        if c >= requester_tc:
            continue
        if any(p > c and amt > 0 for p, amt in pools.items()):
            cands.append(lsp)
    return sorted(cands, key=lambda lsp: (state.lsp_tc[lsp], -state.lsp_order[lsp]))


def _free_in_interval(state: LinkState, cfg: GbamConfig, tc: int) -> int:
    lo, hi = admissible_interval(cfg, tc)
    pool_free = sum(state.pool_size[p] - state.pool_used[p] for p in range(lo, hi + 1))
    return min(pool_free, state.free_aggregate())


def check_admission(state: LinkState, tc: int, bw: int | Bandwidth, cfg: GbamConfig) -> AdmissionResult:
    """Classify a request against the current state without mutating it.

    FIT: the greedy plan covers it from free pool space. NEEDS_PREEMPTION: not
    immediately coverable, but devolution (and, when enabled, preemption of
    lower-priority loans) can make room. REJECT otherwise, CAPACITY when the
    aggregate link capacity is the binding limit.
    """
    check_tc(tc, cfg.class_count)
    bw_m = bw.millis if isinstance(bw, Bandwidth) else bw
    plan = greedy_plan(state, tc, bw_m, cfg)
    if plan is not None:
        return AdmissionResult(AdmissionKind.FIT, plan=plan)

    deficit = bw_m - _free_in_interval(state, cfg, tc)
    deficits = ((tc, max(deficit, 0)),)

    if rearrangement_plan(state, tc, bw_m, cfg) is not None:
        return AdmissionResult(AdmissionKind.NEEDS_PREEMPTION, deficits=deficits)

    if cfg.preemption_enabled:
        # Preemption can relieve both pool and aggregate pressure, so the
        # capacity check happens only after the victim option is ruled out.
        scratch = state.clone()
        for lsp in _preemption_candidates(state, tc):
            _remove(scratch, lsp)
        if fits_without_preemption(scratch, tc, bw_m, cfg):
            return AdmissionResult(AdmissionKind.NEEDS_PREEMPTION, deficits=deficits)

    if state.total_used + bw_m > state.capacity:
        return AdmissionResult(AdmissionKind.REJECT, reason=RejectReason.CAPACITY)
    return AdmissionResult(AdmissionKind.REJECT, reason=RejectReason.CONSTRAINT)


def admit(state: LinkState, lsp_id: int, tc: int, bw: int | Bandwidth, plan: ChargePlan) -> None:
    """Apply a charge plan. Raises StalePlanError if the plan no longer fits,
    which signals an engine logic error rather than a blockable condition."""
    bw_m = bw.millis if isinstance(bw, Bandwidth) else bw
    if lsp_id in state.lsp_charges or lsp_id in state.grandfathered:
        raise StalePlanError(f"lsp {lsp_id} already active on {state.spec.link_id}")
    if sum(amt for _, amt in plan) != bw_m:
        raise StalePlanError("plan does not cover the request bandwidth")
    if state.total_used + bw_m > state.capacity:
        raise StalePlanError("aggregate capacity exceeded")
    for p, amt in plan:
        if amt <= 0 or state.pool_used[p] + amt > state.pool_size[p]:
            raise StalePlanError(f"pool {p} cannot take {amt}")
    breakdown: dict[int, int] = {}
    for p, amt in plan:
        state.charge[tc][p] += amt
        state.pool_used[p] += amt
        breakdown[p] = breakdown.get(p, 0) + amt
    state.lsp_tc[lsp_id] = tc
    state.lsp_bw[lsp_id] = bw_m
    state.lsp_charges[lsp_id] = breakdown
    state.lsp_order[lsp_id] = state.order_counter
    state.order_counter += 1
    state.total_used += bw_m


def _remove(state: LinkState, lsp_id: int) -> int:
    """Drop an LSP's charges (or grandfathered reservation); returns its bandwidth."""
    if lsp_id in state.lsp_charges:
        tc = state.lsp_tc[lsp_id]
        for p, amt in state.lsp_charges.pop(lsp_id).items():
            state.charge[tc][p] -= amt
            state.pool_used[p] -= amt
        bw = state.lsp_bw.pop(lsp_id)
    elif lsp_id in state.grandfathered:
        bw = state.grandfathered.pop(lsp_id)
        state.lsp_bw.pop(lsp_id)
    else:
        raise UnknownLspError(f"lsp {lsp_id} not active on {state.spec.link_id}")
    state.lsp_tc.pop(lsp_id)
    state.lsp_order.pop(lsp_id)
    state.total_used -= bw
    return bw


def release(state: LinkState, lsp_id: int) -> int:
    """Exact inverse of admit; returns the released bandwidth in milli-Mb/s."""
    return _remove(state, lsp_id)


def apply_moves(state: LinkState, moves: list[Move]) -> None:
    """Re-charge existing LSPs per the given relocation moves.

    Applied as one atomic rearrangement (all removals, then all additions) so
    that cyclic relocations between full pools are expressible; pool bounds are
    validated on the end state.
    """
    for lsp, p_from, _, amt in moves:
        pools = state.lsp_charges[lsp]
        if pools.get(p_from, 0) < amt:
            raise StalePlanError(f"lsp {lsp} holds less than {amt} in pool {p_from}")
        tc = state.lsp_tc[lsp]
        pools[p_from] -= amt
        if pools[p_from] == 0:
            del pools[p_from]
        state.charge[tc][p_from] -= amt
        state.pool_used[p_from] -= amt
    for lsp, _, p_to, amt in moves:
        pools = state.lsp_charges[lsp]
        tc = state.lsp_tc[lsp]
        pools[p_to] = pools.get(p_to, 0) + amt
        state.charge[tc][p_to] += amt
        state.pool_used[p_to] += amt
    for p in range(state.class_count):
        if state.pool_used[p] > state.pool_size[p]:
            raise StalePlanError(f"pool {p} overfull after rearrangement")


def devolve(state: LinkState, pool: int, deficit: int, cfg: GbamConfig) -> list[Move] | None:
    """Free `deficit` space in `pool` by re-charging foreign LSPs elsewhere.

    Returns the relocation moves, or None (fall through to preemption) when no
    rearrangement of existing charges can make the room.
    """
    has_foreign = any(state.charge[c][pool] > 0 for c in range(state.class_count) if c != pool)
    if not has_foreign or deficit <= 0:
        return None
    loads = _interval_loads(state, cfg)
    loads.append((pool, pool, deficit, _REQUEST_KEY))  # phantom reservation pinned to `pool`
    if not _feasible(loads, state.pool_size):
        return None
    placed = _assign(loads, state.pool_size)
    if placed is None:
        return None
    scratch = state.clone()
    moves: list[Move] = []
    for lsp in state.active_ids():
        if lsp in state.grandfathered:
            continue
        current = dict(state.lsp_charges[lsp])
        target = placed[lsp]
        outs = [(p, current.get(p, 0) - target.get(p, 0)) for p in range(state.class_count)
                if current.get(p, 0) > target.get(p, 0)]
        ins = [(p, target.get(p, 0) - current.get(p, 0)) for p in range(state.class_count)
               if target.get(p, 0) > current.get(p, 0)]
        oi = 0
        for p_in, need in ins:
            while need > 0:
                p_out, avail = outs[oi]
                take = min(avail, need)
                moves.append((lsp, p_out, p_in, take))
                need -= take
                avail -= take
                if avail == 0:
                    oi += 1
                else:
                    outs[oi] = (p_out, avail)
    apply_moves(scratch, moves)  # sanity: the move set must be applicable
    return moves


def select_preemption_victims(state: LinkState, needed: tuple[tuple[int, int], ...],
                              requester_tc: int, cfg: GbamConfig) -> tuple[int, ...] | None:
    """Choose LSPs whose teardown covers the deficit: lowest priority first,
    newest first, greedily until the requester would fit. None on failure."""
    if not cfg.preemption_enabled:
        return None
    total_needed = sum(amt for _, amt in needed)
    bw_equiv = _free_in_interval(state, cfg, requester_tc) + total_needed
    if bw_equiv <= 0:
        return ()
    scratch = state.clone()
    victims: list[int] = []
    if fits_without_preemption(scratch, requester_tc, bw_equiv, cfg):
        return ()
    for lsp in _preemption_candidates(state, requester_tc):
        _remove(scratch, lsp)
        victims.append(lsp)
        if fits_without_preemption(scratch, requester_tc, bw_equiv, cfg):
            return tuple(victims)
    return None


# ---------------------------------------------------------------------------
# Model switching


class SwitchPolicy(str, Enum):
    GRANDFATHER = "GRANDFATHER"
    PREEMPT = "PREEMPT"


@dataclass(frozen=True, slots=True)
class SwitchReport:
    recharged: int
    non_conformant: tuple[int, ...] = ()
    preempted: tuple[int, ...] = ()


def switch_model(state: LinkState, new_cfg: GbamConfig, new_bc: tuple[Bandwidth, ...] | None = None,
                 policy: SwitchPolicy = SwitchPolicy.GRANDFATHER) -> SwitchReport:
    """Re-express every active LSP under a new model (and optionally new BCs).

    LSPs are re-charged greedily in establishment order; the ones that no
    longer fit are grandfathered (kept, charged against aggregate capacity
    only) or preempted, per policy.
    """
    if new_cfg.class_count != state.class_count:
        raise InvalidConfigError("class count cannot change across a model switch")
    same_bc = new_bc is None or tuple(new_bc) == state.spec.bc
    new_layout = pool_layout(new_cfg, state.spec if same_bc else replace(state.spec, bc=tuple(new_bc)))
    if same_bc and list(new_layout) == state.pool_size and not state.grandfathered:
        current_ok = all(
            _charges_conform(state, lsp, new_cfg) for lsp in state.lsp_charges)
        if current_ok:
            return SwitchReport(recharged=len(state.lsp_order))

    if not same_bc:
        state.spec = replace(state.spec, bc=tuple(new_bc))
        state.capacity = state.spec.capacity.millis
    state.pool_size = list(new_layout)

    actives = state.active_ids()
    saved = {lsp: (state.lsp_tc[lsp], state.lsp_bw[lsp], state.lsp_order[lsp]) for lsp in actives}
    state.charge = [[0] * state.class_count for _ in range(state.class_count)]
    state.pool_used = [0] * state.class_count
    state.lsp_charges.clear()
    state.grandfathered.clear()

    recharged = 0
    non_conformant: list[int] = []
    preempted: list[int] = []
    for lsp in actives:
        tc, bw, _ = saved[lsp]
        need = bw
        breakdown: dict[int, int] = {}
        for p in admissible_pools(new_cfg, tc):
            free = state.pool_size[p] - state.pool_used[p]
            if free <= 0:
                continue
            take = free if free < need else need
            breakdown[p] = take
            need -= take
            if need == 0:
                break
        if need == 0:
            for p, amt in breakdown.items():
                state.charge[tc][p] += amt
                state.pool_used[p] += amt
            state.lsp_charges[lsp] = breakdown
            recharged += 1
        else:
            non_conformant.append(lsp)
            if policy is SwitchPolicy.GRANDFATHER:
                state.grandfathered[lsp] = bw
            else:
                preempted.append(lsp)
                state.lsp_tc.pop(lsp)
                state.lsp_bw.pop(lsp)
                state.lsp_order.pop(lsp)
                state.total_used -= bw
    return SwitchReport(recharged=recharged, non_conformant=tuple(non_conformant),
                        preempted=tuple(preempted))


def _charges_conform(state: LinkState, lsp_id: int, cfg: GbamConfig) -> bool:
    lo, hi = admissible_interval(cfg, state.lsp_tc[lsp_id])
    return all(lo <= p <= hi for p in state.lsp_charges[lsp_id])
