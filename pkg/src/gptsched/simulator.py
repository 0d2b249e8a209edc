"""Batch and discrete-event timeline execution of the schedulers.

run_batch feeds a whole workload to one scheduler and reports on the
resulting cluster. run_timeline replays a timed workload event by event:
each arrival schedules that single request against the current cluster
state, each departure releases its percentages, a resource adaptor retires
nodes that stay empty past a grace period, and snapshots record per-node
utilization and power on a fixed grid. Total power is integrated exactly
over the piecewise-constant segments between events and reported as
energy_wh.

Event ordering at equal times is departure, then arrival, then snapshot,
then scale-down check, with ties inside a kind broken by ascending
request or node id. The simulation horizon is the time of the last
arrival, departure or executed node removal; snapshots and the energy
integral stop there.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .metrics import Report, build_report
from .model import (
    ConfigError,
    GptRequest,
    Node,
    UtilizationVector,
    ValidationError,
    release_from_node,
    validate_unique_ids,
)
from .power import node_power, total_power
from .profiler import DEFAULT_COEFFICIENTS, ProfilerCoefficients
from .scheduling import ALGORITHMS, AllocationOutcome, DecisionRecord, NodeIdSequence, SchedulerConfig

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    """Timeline event kinds, in their ordering rank at equal times.

    SCALE_CHECK is internal housekeeping (the adaptor revisiting an empty
    node after the grace period); it sorts after snapshots.
    """

    DEPARTURE = "departure"
    ARRIVAL = "arrival"
    SNAPSHOT = "snapshot"
    SCALE_CHECK = "scale-check"


_RANK = {
    EventKind.DEPARTURE: 0,
    EventKind.ARRIVAL: 1,
    EventKind.SNAPSHOT: 2,
    EventKind.SCALE_CHECK: 3,
}


@dataclass(frozen=True)
class SimEvent:
    """One processed timeline event."""

    time_s: float
    kind: EventKind
    request_id: Optional[str] = None
    node_id: Optional[str] = None


@dataclass(frozen=True)
class AdaptorPolicy:
    """Scale-down behavior: grace period and a floor on cluster size.

    A node is retired once it has been continuously empty for
    scale_down_grace_s seconds, unless removal would drop the cluster
    below retain_min_nodes. A node whose removal was blocked stays until
    it becomes non-empty and empty again.
    """

    scale_down_grace_s: float = 300.0
    retain_min_nodes: int = 0

    def __post_init__(self) -> None:
        if not self.scale_down_grace_s >= 0.0:
            raise ValidationError(f"scale_down_grace_s must be >= 0, got {self.scale_down_grace_s!r}")
        if not isinstance(self.retain_min_nodes, int) or self.retain_min_nodes < 0:
            raise ValidationError(f"retain_min_nodes must be an int >= 0, got {self.retain_min_nodes!r}")


@dataclass(frozen=True)
class SnapshotRow:
    """Per-node utilization and power at one snapshot instant."""

    time_s: float
    node_id: str
    compute_util: float
    memory_util: float
    storage_util: float
    power_w: float


@dataclass(frozen=True)
class TimelineResult:
    """Everything a timeline run produced.

    power_steps is the piecewise-constant total-power trajectory as
    (time_s, watts) change points; energy_wh in the report integrates it
    over [0, horizon].
    """

    report: Report
    snapshots: Tuple[SnapshotRow, ...]
    outcome: AllocationOutcome
    events: Tuple[SimEvent, ...]
    power_steps: Tuple[Tuple[float, float], ...]


def run_batch(
    workload: Sequence[GptRequest],
    nodes: List[Node],
    algorithm_id: str,
    config: SchedulerConfig,
    *,
    coeffs: ProfilerCoefficients = DEFAULT_COEFFICIENTS,
) -> Tuple[AllocationOutcome, Report]:
    """Run one scheduler over the whole workload and report.

    nodes is mutated in place to the post-run cluster state. Raises
    ConfigError for an unknown algorithm_id.
    """

    scheduler = ALGORITHMS.get(algorithm_id)
    if scheduler is None:
        raise ConfigError(f"unknown algorithm {algorithm_id!r}; choose from {sorted(ALGORITHMS)}")
    outcome = scheduler(workload, nodes, config, coeffs=coeffs)
    report = build_report(outcome, nodes, config.power_policy)
    logger.info(
        "batch %s: %d requests, %d unallocated, %d nodes",
        algorithm_id,
        report.request_count,
        report.unallocated_count,
        report.node_count,
    )
    return outcome, report


def _deadline_misses(workload: Sequence[GptRequest], unallocated: Sequence[str]) -> int:
    """Allocated requests miss when duration exceeds deadline; rejected
    requests with a deadline never complete and always miss."""

    rejected = set(unallocated)
    misses = 0
    for request in workload:
        if request.deadline_s is None:
            continue
        if request.id in rejected or request.duration_s > request.deadline_s:
            misses += 1
    return misses


class _Timeline:
    """Mutable state of one timeline run."""

    def __init__(
        self,
        workload: Sequence[GptRequest],
        nodes: Sequence[Node],
        algorithm_id: str,
        config: SchedulerConfig,
        adaptor: AdaptorPolicy,
        snapshot_interval_s: float,
        coeffs: ProfilerCoefficients,
        on_event: Optional[Callable[[SimEvent, Sequence[Node]], None]],
    ) -> None:
        scheduler = ALGORITHMS.get(algorithm_id)
        if scheduler is None:
            raise ConfigError(f"unknown algorithm {algorithm_id!r}; choose from {sorted(ALGORITHMS)}")
        if not snapshot_interval_s > 0.0:
            raise ValidationError(f"snapshot_interval_s must be > 0, got {snapshot_interval_s!r}")
        validate_unique_ids((r.id for r in workload), "request")
        for request in workload:
            if request.arrival_s is None or request.duration_s is None:
                raise ValidationError(f"request {request.id!r} lacks arrival_s/duration_s")
        for node in nodes:
            if node.allocated:
                raise ValidationError(
                    f"timeline initial node {node.id!r} must start empty; "
                    "pre-existing allocations have no departure times"
                )
        self.scheduler = scheduler
        self.requests = {r.id: r for r in workload}
        self.nodes: List[Node] = list(nodes)
        self.config = config
        self.adaptor = adaptor
        self.interval = snapshot_interval_s
        self.coeffs = coeffs
        self.on_event = on_event
        self.id_sequence = NodeIdSequence(n.id for n in nodes)

        self.allocation: Dict[str, str] = {}
        self.unallocated: List[str] = []
        self.created: List[str] = []
        self.trace: List[DecisionRecord] = []
        self.pct_of: Dict[str, UtilizationVector] = {}
        self.node_of: Dict[str, str] = {}
        self.empty_since: Dict[str, float] = {}
        self.snapshots: List[SnapshotRow] = []
        self.events: List[SimEvent] = []
        self.horizon: Optional[float] = None
        self.power_steps: List[Tuple[float, float]] = []

        # Heap entries: (time, kind rank, tiebreak id, payload).
        self.heap: List[Tuple[float, int, str, object]] = []
        for request in workload:
            heapq.heappush(
                self.heap, (request.arrival_s, _RANK[EventKind.ARRIVAL], request.id, request.id)
            )

    def _node_index(self, node_id: str) -> int:
        for index, node in enumerate(self.nodes):
            if node.id == node_id:
                return index
        raise KeyError(node_id)

    def _record_power(self, time_s: float) -> None:
        watts = total_power(self.nodes, self.config.power_policy)
        if not self.power_steps or self.power_steps[-1][1] != watts:
            self.power_steps.append((time_s, watts))

    def _emit(self, event: SimEvent) -> None:
        self.events.append(event)
        if self.on_event is not None:
            self.on_event(event, self.nodes)

    def _arrive(self, time_s: float, request_id: str) -> None:
        request = self.requests[request_id]
        outcome = self.scheduler(
            [request], self.nodes, self.config, coeffs=self.coeffs, id_sequence=self.id_sequence
        )
        self.trace.extend(outcome.trace)
        self.created.extend(outcome.created_node_ids)
        if request_id in outcome.allocation:
            node_id = outcome.allocation[request_id]
            self.allocation[request_id] = node_id
            self.node_of[request_id] = node_id
            record = outcome.trace[0]
            assert record.pct is not None
            self.pct_of[request_id] = record.pct
            self.empty_since.pop(node_id, None)
            heapq.heappush(
                self.heap,
                (time_s + request.duration_s, _RANK[EventKind.DEPARTURE], request_id, request_id),
            )
        else:
            self.unallocated.append(request_id)
        self.horizon = time_s
        self._record_power(time_s)
        self._emit(SimEvent(time_s, EventKind.ARRIVAL, request_id=request_id))

    def _depart(self, time_s: float, request_id: str) -> None:
        node_id = self.node_of.pop(request_id)
        index = self._node_index(node_id)
        node = release_from_node(self.nodes[index], request_id, self.pct_of[request_id])
        self.nodes[index] = node
        if node.is_empty:
            self.empty_since[node_id] = time_s
            heapq.heappush(
                self.heap,
                (
                    time_s + self.adaptor.scale_down_grace_s,
                    _RANK[EventKind.SCALE_CHECK],
                    node_id,
                    (node_id, time_s),
                ),
            )
        self.horizon = time_s
        self._record_power(time_s)
        self._emit(SimEvent(time_s, EventKind.DEPARTURE, request_id=request_id))

    def _scale_check_effective(self, node_id: str, armed_at: float) -> bool:
        """Whether a due scale check will actually remove its node.

        Decidable as soon as the check reaches the heap top: every earlier
        mutation has been applied by then. Stale when the node was reused
        or already removed since arming; blocked by retain_min_nodes.
        """

        if self.empty_since.get(node_id) != armed_at:
            return False
        if len(self.nodes) - 1 < self.adaptor.retain_min_nodes:
            logger.debug("scale-down of %s blocked by retain_min_nodes", node_id)
            return False
        return True

    def _scale_down(self, time_s: float, node_id: str) -> None:
        del self.empty_since[node_id]
        del self.nodes[self._node_index(node_id)]
        self.horizon = time_s
        self._record_power(time_s)
        self._emit(SimEvent(time_s, EventKind.SCALE_CHECK, node_id=node_id))
        logger.info("scaled down node %s at t=%.3f", node_id, time_s)

    def _snapshot(self, time_s: float) -> None:
        for node in sorted(self.nodes, key=lambda n: n.id):
            util = node.utilization
            self.snapshots.append(
                SnapshotRow(
                    time_s=time_s,
                    node_id=node.id,
                    compute_util=util.compute,
                    memory_util=util.memory,
                    storage_util=util.storage,
                    power_w=node_power(node, self.config.power_policy),
                )
            )
        self._emit(SimEvent(time_s, EventKind.SNAPSHOT))

    def run(self) -> TimelineResult:
        self._record_power(0.0)
        snap_index = 0  # next grid point is snap_index * interval

        while self.heap:
            time_s, rank, _, payload = self.heap[0]
            if rank == _RANK[EventKind.SCALE_CHECK]:
                node_id, armed_at = payload  # type: ignore[misc]
                if not self._scale_check_effective(node_id, armed_at):
                    # A no-op check is not activity: drop it before the
                    # snapshot grid runs ahead of the real horizon.
                    heapq.heappop(self.heap)
                    continue
            snap_time = snap_index * self.interval
            if snap_time < time_s or (snap_time == time_s and rank > _RANK[EventKind.SNAPSHOT]):
                self._snapshot(snap_time)
                snap_index += 1
                continue
            heapq.heappop(self.heap)
            if rank == _RANK[EventKind.ARRIVAL]:
                self._arrive(time_s, payload)  # type: ignore[arg-type]
            elif rank == _RANK[EventKind.DEPARTURE]:
                self._depart(time_s, payload)  # type: ignore[arg-type]
            else:
                node_id, _ = payload  # type: ignore[misc]
                self._scale_down(time_s, node_id)

        # Trailing grid points up to the horizon; state no longer changes.
        if self.horizon is not None:
            while snap_index * self.interval <= self.horizon:
                self._snapshot(snap_index * self.interval)
                snap_index += 1

        energy_wh = self._integrate_energy()
        outcome = AllocationOutcome(
            allocation=self.allocation,
            unallocated=tuple(self.unallocated),
            created_node_ids=tuple(self.created),
            trace=tuple(self.trace),
        )
        report = build_report(
            outcome,
            self.nodes,
            self.config.power_policy,
            deadline_misses=_deadline_misses(list(self.requests.values()), self.unallocated),
            energy_wh=energy_wh,
            require_allocation_targets=False,
        )
        return TimelineResult(
            report=report,
            snapshots=tuple(self.snapshots),
            outcome=outcome,
            events=tuple(self.events),
            power_steps=tuple(self.power_steps),
        )

    def _integrate_energy(self) -> float:
        if self.horizon is None or not self.power_steps:
            return 0.0
        watt_seconds = 0.0
        for index, (start, watts) in enumerate(self.power_steps):
            if start >= self.horizon:
                break
            end = (
                self.power_steps[index + 1][0]
                if index + 1 < len(self.power_steps)
                else self.horizon
            )
            watt_seconds += watts * (min(end, self.horizon) - start)
        return watt_seconds / 3600.0


def run_timeline(
    workload: Sequence[GptRequest],
    initial_nodes: Sequence[Node],
    algorithm_id: str,
    config: SchedulerConfig,
    adaptor: AdaptorPolicy,
    snapshot_interval_s: float,
    *,
    coeffs: ProfilerCoefficients = DEFAULT_COEFFICIENTS,
    on_event: Optional[Callable[[SimEvent, Sequence[Node]], None]] = None,
) -> TimelineResult:
    """Replay a timed workload as a discrete-event simulation.

    Every request needs arrival_s and duration_s (validated before the run
    starts); initial nodes must start empty. Arrivals invoke the selected
    scheduler for the single arriving request against the current cluster.
    The returned report carries final-state utilization metrics plus run
    aggregates: deadline_misses and the exact energy integral energy_wh.

    on_event, when given, is called after each processed event with the
    event and the current node list (read-only view for callers).
    """

    sim = _Timeline(
        workload, initial_nodes, algorithm_id, config, adaptor, snapshot_interval_s, coeffs, on_event
    )
    return sim.run()
