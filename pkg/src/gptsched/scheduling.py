"""Greedy allocation heuristics for batches of inference requests.

Three schedulers share the same skeleton: resolve every request's demand
through the profiler, order requests by descending compute demand (ties by
ascending id), then place them one at a time. They differ in how candidate
nodes are ordered and judged:

``schedule_max_util``
    First fit over nodes sorted by descending compute utilization, so work
    consolidates onto the fullest nodes that still have room under the
    per-axis threshold.

``schedule_load_balance``
    First fit over nodes sorted by ascending compute utilization, spreading
    work onto the emptiest nodes first, same threshold rule.

``schedule_power_efficient``
    Scans every node in ascending id order, keeps the one with the strictly
    smallest power delta among nodes with enough remaining capacity
    (full capacity, not the threshold), ties keeping the first seen.

Determinism pins, identical in the naive reference oracle used by tests:
all sorts are stable with ascending-id tie breaks; the node ordering for
the first-fit schedulers is computed once up front (created nodes append
to the end of the scan order) unless resort_after_each_allocation is set;
feasibility allows TOLERANCE slack per axis.

When no node fits, a node is created from the configured autoscale
template when one is set and the request fits a fresh node; otherwise the
request is rejected with a reason string. The passed node list is updated
in place (entries replaced with their post-allocation values, created
nodes appended) so callers observe the resulting cluster state.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .model import (
    TOLERANCE,
    GptRequest,
    Node,
    NodeTemplate,
    ResourceVector,
    Threshold,
    UtilizationVector,
    ValidationError,
    validate_unique_ids,
)
from .power import DEFAULT_POWER_POLICY, PowerMode, PowerPolicy
from .profiler import DEFAULT_COEFFICIENTS, ProfilerCoefficients, estimate_demand

# Rejection reasons recorded in decision records.
REASON_NO_FEASIBLE_NODE = "no-feasible-node"
REASON_INFEASIBLE_ON_ANY_NODE = "infeasible-on-any-node"


@dataclass(frozen=True)
class SchedulerConfig:
    """Knobs shared by the three schedulers.

    autoscale_template enables node creation when nothing fits.
    resort_after_each_allocation makes the first-fit schedulers recompute
    their node ordering before each request whenever an allocation happened
    since the last sort; the default sorts once up front.
    """

    threshold: Threshold = Threshold(0.8)
    autoscale_template: Optional[NodeTemplate] = None
    resort_after_each_allocation: bool = False
    power_policy: PowerPolicy = DEFAULT_POWER_POLICY


@dataclass(frozen=True)
class DecisionRecord:
    """Why one request landed where it did.

    scanned lists node ids in the order they were examined. For the power
    scheduler, power_estimates holds (node_id, delta_watts) for every
    capacity-feasible candidate in scan order. A created node carries
    created_node=True; a rejection carries a reason and no chosen node.
    """

    request_id: str
    demand: ResourceVector
    scanned: Tuple[str, ...]
    chosen_node_id: Optional[str]
    pct: Optional[UtilizationVector]
    created_node: bool = False
    reason: Optional[str] = None
    power_estimates: Tuple[Tuple[str, float], ...] = ()


@dataclass(frozen=True)
class AllocationOutcome:
    """Result of one scheduling run.

    allocation maps request id to node id in decision order; unallocated
    lists rejected request ids in decision order; trace has one
    DecisionRecord per request in the same order.
    """

    allocation: Dict[str, str]
    unallocated: Tuple[str, ...]
    created_node_ids: Tuple[str, ...]
    trace: Tuple[DecisionRecord, ...]


class NodeIdSequence:
    """Source of created-node ids: auto-1, auto-2, ... skipping used ids.

    The timeline simulator shares one sequence across many scheduling calls
    so ids stay unique even after nodes are scaled down.
    """

    def __init__(self, used: Iterable[str] = ()) -> None:
        self._used: Set[str] = set(used)
        self._counter = 1

    def reserve(self, ids: Iterable[str]) -> None:
        self._used.update(ids)

    def next_id(self) -> str:
        while True:
            candidate = f"auto-{self._counter}"
            self._counter += 1
            if candidate not in self._used:
                self._used.add(candidate)
                return candidate


def fits(node: Node, pct: UtilizationVector, threshold: Threshold) -> bool:
    """True when adding pct keeps every axis within threshold + TOLERANCE."""

    limit = threshold.value + TOLERANCE
    util = node.utilization
    return (
        util.compute + pct.compute <= limit
        and util.memory + pct.memory <= limit
        and util.storage + pct.storage <= limit
    )


def create_new_node(template: NodeTemplate, id_sequence: NodeIdSequence) -> Node:
    """A fresh empty node with the next id from the sequence."""

    return Node(id=id_sequence.next_id(), template=template)


class _Cluster:
    """Parallel-array view of a node list for the hot allocation loops."""

    __slots__ = ("ids", "templates", "uc", "um", "us", "cc", "cm", "cs", "pidle", "pmax", "alloc")

    def __init__(self, nodes: Sequence[Node]) -> None:
        self.ids = [n.id for n in nodes]
        self.templates = [n.template for n in nodes]
        self.uc = [n.utilization.compute for n in nodes]
        self.um = [n.utilization.memory for n in nodes]
        self.us = [n.utilization.storage for n in nodes]
        self.cc = [n.capacity.compute for n in nodes]
        self.cm = [n.capacity.memory_gib for n in nodes]
        self.cs = [n.capacity.storage_gib for n in nodes]
        self.pidle = [n.template.p_idle_w for n in nodes]
        self.pmax = [n.template.p_max_w for n in nodes]
        self.alloc = [set(n.allocated) for n in nodes]

    def add_node(self, node_id: str, template: NodeTemplate) -> int:
        cap = template.capacity
        self.ids.append(node_id)
        self.templates.append(template)
        self.uc.append(0.0)
        self.um.append(0.0)
        self.us.append(0.0)
        self.cc.append(cap.compute)
        self.cm.append(cap.memory_gib)
        self.cs.append(cap.storage_gib)
        self.pidle.append(template.p_idle_w)
        self.pmax.append(template.p_max_w)
        self.alloc.append(set())
        return len(self.ids) - 1

    def write_back(self, nodes: List[Node]) -> None:
        nodes[:] = [
            Node(
                id=self.ids[i],
                template=self.templates[i],
                utilization=UtilizationVector(self.uc[i], self.um[i], self.us[i]),
                allocated=frozenset(self.alloc[i]),
            )
            for i in range(len(self.ids))
        ]


def _validate_inputs(queue: Sequence[GptRequest], nodes: Sequence[Node]) -> None:
    validate_unique_ids((n.id for n in nodes), "node")
    validate_unique_ids((r.id for r in queue), "request")
    existing: Set[str] = set()
    for node in nodes:
        existing |= node.allocated
    for request in queue:
        if request.id in existing:
            raise ValidationError(f"request {request.id!r} is already allocated on a node")


def _resolve_and_order(
    queue: Sequence[GptRequest], coeffs: ProfilerCoefficients
) -> Tuple[Dict[str, ResourceVector], List[GptRequest]]:
    demands = {r.id: estimate_demand(r, coeffs) for r in queue}
    ordered = sorted(queue, key=lambda r: (-demands[r.id].compute, r.id))
    return demands, ordered


def _schedule_threshold(
    queue: Sequence[GptRequest],
    nodes: List[Node],
    config: SchedulerConfig,
    coeffs: ProfilerCoefficients,
    id_sequence: Optional[NodeIdSequence],
    descending: bool,
) -> AllocationOutcome:
    _validate_inputs(queue, nodes)
    demands, ordered = _resolve_and_order(queue, coeffs)
    cl = _Cluster(nodes)
    seq = id_sequence if id_sequence is not None else NodeIdSequence()
    seq.reserve(cl.ids)

    ids, uc, um, us = cl.ids, cl.uc, cl.um, cl.us
    cc, cm, cs = cl.cc, cl.cm, cl.cs
    limit = config.threshold.value + TOLERANCE
    template = config.autoscale_template
    resort = config.resort_after_each_allocation

    if descending:
        key = lambda i: (-uc[i], ids[i])
    else:
        key = lambda i: (uc[i], ids[i])
    order = sorted(range(len(ids)), key=key)

    allocation: Dict[str, str] = {}
    unallocated: List[str] = []
    created: List[str] = []
    trace: List[DecisionRecord] = []
    dirty = False

    for request in ordered:
        if resort and dirty:
            order.sort(key=key)
            dirty = False
        demand = demands[request.id]
        dc, dm, ds = demand.compute, demand.memory_gib, demand.storage_gib
        chosen = -1
        pos = -1
        for pos, i in enumerate(order):
            if (
                uc[i] + dc / cc[i] <= limit
                and um[i] + dm / cm[i] <= limit
                and us[i] + ds / cs[i] <= limit
            ):
                chosen = i
                break
        if chosen >= 0:
            scanned = tuple(ids[j] for j in order[: pos + 1])
            pct = UtilizationVector(dc / cc[chosen], dm / cm[chosen], ds / cs[chosen])
            uc[chosen] += pct.compute
            um[chosen] += pct.memory
            us[chosen] += pct.storage
            cl.alloc[chosen].add(request.id)
            allocation[request.id] = ids[chosen]
            dirty = True
            trace.append(DecisionRecord(request.id, demand, scanned, ids[chosen], pct))
            continue

        scanned = tuple(ids[j] for j in order)
        if template is None:
            unallocated.append(request.id)
            trace.append(
                DecisionRecord(request.id, demand, scanned, None, None, False, REASON_NO_FEASIBLE_NODE)
            )
            continue
        cap = template.capacity
        pc, pm, ps = dc / cap.compute, dm / cap.memory_gib, ds / cap.storage_gib
        if pc <= limit and pm <= limit and ps <= limit:
            new_id = seq.next_id()
            i = cl.add_node(new_id, template)
            order.append(i)
            pct = UtilizationVector(pc, pm, ps)
            uc[i] = pct.compute
            um[i] = pct.memory
            us[i] = pct.storage
            cl.alloc[i].add(request.id)
            created.append(new_id)
            allocation[request.id] = new_id
            dirty = True
            trace.append(DecisionRecord(request.id, demand, scanned, new_id, pct, True))
        else:
            unallocated.append(request.id)
            trace.append(
                DecisionRecord(
                    request.id, demand, scanned, None, None, False, REASON_INFEASIBLE_ON_ANY_NODE
                )
            )

    cl.write_back(nodes)
    return AllocationOutcome(allocation, tuple(unallocated), tuple(created), tuple(trace))


def schedule_max_util(
    queue: Sequence[GptRequest],
    nodes: List[Node],
    config: SchedulerConfig,
    *,
    coeffs: ProfilerCoefficients = DEFAULT_COEFFICIENTS,
    id_sequence: Optional[NodeIdSequence] = None,
) -> AllocationOutcome:
    """Consolidating first fit: fullest feasible node wins.

    Nodes are scanned in descending compute utilization order (ties by
    ascending id) and each request lands on the first node that stays
    within the threshold on all three axes. Raises ValidationError on
    duplicate ids and UnprofilableRequestError when a request has neither
    an explicit demand nor a model size. Mutates nodes in place.
    """

    return _schedule_threshold(queue, nodes, config, coeffs, id_sequence, descending=True)


def schedule_load_balance(
    queue: Sequence[GptRequest],
    nodes: List[Node],
    config: SchedulerConfig,
    *,
    coeffs: ProfilerCoefficients = DEFAULT_COEFFICIENTS,
    id_sequence: Optional[NodeIdSequence] = None,
) -> AllocationOutcome:
    """Spreading first fit: emptiest feasible node wins.

    Same contract as schedule_max_util with the node ordering reversed
    (ascending compute utilization, ties by ascending id).
    """

    return _schedule_threshold(queue, nodes, config, coeffs, id_sequence, descending=False)


def schedule_power_efficient(
    queue: Sequence[GptRequest],
    nodes: List[Node],
    config: SchedulerConfig,
    *,
    coeffs: ProfilerCoefficients = DEFAULT_COEFFICIENTS,
    id_sequence: Optional[NodeIdSequence] = None,
) -> AllocationOutcome:
    """Minimum-power-delta placement.

    Every request scans all nodes in ascending id order. Nodes whose
    remaining full capacity cannot hold the request are skipped; among the
    rest, the node with the strictly smallest power delta wins (ties keep
    the first, i.e. smallest id). The threshold is not consulted. The
    power delta is priced by config.power_policy: by default waking an
    empty node costs its idle draw, so warm nodes are preferred.

    Autoscaling is an opt-in extension: with no autoscale_template a
    request that fits no node is rejected. Decision records include the
    per-candidate power estimates. Mutates nodes in place.
    """

    _validate_inputs(queue, nodes)
    demands, ordered = _resolve_and_order(queue, coeffs)
    cl = _Cluster(nodes)
    seq = id_sequence if id_sequence is not None else NodeIdSequence()
    seq.reserve(cl.ids)

    ids, uc, um, us = cl.ids, cl.uc, cl.um, cl.us
    cc, cm, cs = cl.cc, cl.cm, cl.cs
    pidle, pmax, alloc = cl.pidle, cl.pmax, cl.alloc
    policy = config.power_policy
    absolute = policy.mode is PowerMode.ABSOLUTE_AFTER
    off_empty = policy.off_when_empty
    cap_limit = 1.0 + TOLERANCE
    template = config.autoscale_template

    id_order: List[Tuple[str, int]] = sorted((ids[i], i) for i in range(len(ids)))
    # The scan covers every node, so the scanned tuple only changes when a
    # node is created; share one tuple between creations.
    scanned_cache: Optional[Tuple[str, ...]] = None

    allocation: Dict[str, str] = {}
    unallocated: List[str] = []
    created: List[str] = []
    trace: List[DecisionRecord] = []

    for request in ordered:
        demand = demands[request.id]
        dc, dm, ds = demand.compute, demand.memory_gib, demand.storage_gib
        best = -1
        best_delta = float("inf")
        estimates: List[Tuple[str, float]] = []
        for node_id, i in id_order:
            if (
                uc[i] + dc / cc[i] > cap_limit
                or um[i] + dm / cm[i] > cap_limit
                or us[i] + ds / cs[i] > cap_limit
            ):
                continue
            slope = pmax[i] - pidle[i]
            after = pidle[i] + slope * (uc[i] + dc / cc[i])
            if absolute:
                delta = after
            elif off_empty and not alloc[i]:
                delta = after
            else:
                delta = after - (pidle[i] + slope * uc[i])
            estimates.append((node_id, delta))
            if delta < best_delta:
                best_delta = delta
                best = i
        if scanned_cache is None:
            scanned_cache = tuple(entry[0] for entry in id_order)
        scanned = scanned_cache
        if best >= 0:
            pct = UtilizationVector(dc / cc[best], dm / cm[best], ds / cs[best])
            uc[best] += pct.compute
            um[best] += pct.memory
            us[best] += pct.storage
            alloc[best].add(request.id)
            allocation[request.id] = ids[best]
            trace.append(
                DecisionRecord(
                    request.id, demand, scanned, ids[best], pct, False, None, tuple(estimates)
                )
            )
            continue
        if template is None:
            unallocated.append(request.id)
            trace.append(
                DecisionRecord(request.id, demand, scanned, None, None, False, REASON_NO_FEASIBLE_NODE)
            )
            continue
        cap = template.capacity
        pc, pm, ps = dc / cap.compute, dm / cap.memory_gib, ds / cap.storage_gib
        if pc <= cap_limit and pm <= cap_limit and ps <= cap_limit:
            new_id = seq.next_id()
            i = cl.add_node(new_id, template)
            bisect.insort(id_order, (new_id, i))
            scanned_cache = None
            pct = UtilizationVector(pc, pm, ps)
            uc[i] = pct.compute
            um[i] = pct.memory
            us[i] = pct.storage
            alloc[i].add(request.id)
            created.append(new_id)
            allocation[request.id] = new_id
            trace.append(DecisionRecord(request.id, demand, scanned, new_id, pct, True))
        else:
            unallocated.append(request.id)
            trace.append(
                DecisionRecord(
                    request.id, demand, scanned, None, None, False, REASON_INFEASIBLE_ON_ANY_NODE
                )
            )

    cl.write_back(nodes)
    return AllocationOutcome(allocation, tuple(unallocated), tuple(created), tuple(trace))


ALGORITHMS: Dict[str, Callable[..., AllocationOutcome]] = {
    "max-util": schedule_max_util,
    "load-balance": schedule_load_balance,
    "power": schedule_power_efficient,
}
