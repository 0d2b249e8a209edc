"""Core domain types for GPT inference scheduling.

A cluster is a list of nodes. Each node has a fixed capacity along three
resource axes (compute units, memory GiB, storage GiB), a linear power
envelope, a fractional utilization vector, and the set of request ids
currently allocated to it. Requests describe an inference task either by
an explicit resource demand or by model/token attributes that a profiler
can turn into one.

All value types are frozen dataclasses so they can be compared, hashed
where needed, and shared safely. Mutation happens by replacement:
``allocate_to_node`` and ``release_from_node`` return new Node values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Tuple

# Absolute slack used by every feasibility comparison in the package.
TOLERANCE = 1e-9


class GptSchedError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GptSchedError):
    """A value violates a documented invariant or precondition."""


class InvalidCapacityError(ValidationError):
    """A node capacity axis is zero or negative."""


class ConfigError(GptSchedError):
    """A configuration document or selector is invalid."""


class DuplicateAllocationError(GptSchedError):
    """A request id is already allocated on the target node."""


class NotAllocatedError(GptSchedError):
    """A request id is not allocated on the node it is being released from."""


def _require_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return float(value)


def _require_non_negative(name: str, value: float) -> float:
    value = _require_finite(name, value)
    if value < 0.0:
        raise ValidationError(f"{name} must be >= 0, got {value!r}")
    return value


class TaskKind(str, Enum):
    """Coarse category of an inference request."""

    TRANSLATION = "translation"
    SUMMARIZATION = "summarization"
    QA = "qa"
    CHAT = "chat"
    OTHER = "other"


@dataclass(frozen=True)
class ResourceVector:
    """Absolute amounts along the three resource axes.

    compute is in abstract compute units, memory_gib and storage_gib in GiB.
    Components must be finite and non-negative.
    """

    compute: float
    memory_gib: float
    storage_gib: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "compute", _require_non_negative("compute", self.compute))
        object.__setattr__(self, "memory_gib", _require_non_negative("memory_gib", self.memory_gib))
        object.__setattr__(self, "storage_gib", _require_non_negative("storage_gib", self.storage_gib))

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.compute, self.memory_gib, self.storage_gib)


@dataclass(frozen=True)
class UtilizationVector:
    """Fractions of a node's capacity along the three resource axes.

    Node utilizations stay in [0, 1] by construction of the schedulers, but
    the same type carries demand percentages, which may exceed 1 when a
    request is larger than a node. Components must be finite and >= 0.
    """

    compute: float = 0.0
    memory: float = 0.0
    storage: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "compute", _require_non_negative("compute", self.compute))
        object.__setattr__(self, "memory", _require_non_negative("memory", self.memory))
        object.__setattr__(self, "storage", _require_non_negative("storage", self.storage))

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.compute, self.memory, self.storage)

    def is_zero(self, tol: float = TOLERANCE) -> bool:
        return self.compute <= tol and self.memory <= tol and self.storage <= tol


ZERO_UTILIZATION = UtilizationVector(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class NodeTemplate:
    """Immutable description of a node type: capacity plus power envelope.

    p_idle_w is drawn whenever the node is powered on, p_max_w at full
    compute utilization. Requires positive capacities and
    0 <= p_idle_w <= p_max_w.
    """

    capacity: ResourceVector
    p_idle_w: float
    p_max_w: float

    def __post_init__(self) -> None:
        cap = self.capacity
        if cap.compute <= 0.0 or cap.memory_gib <= 0.0 or cap.storage_gib <= 0.0:
            raise InvalidCapacityError(f"capacity axes must be > 0, got {cap.as_tuple()}")
        object.__setattr__(self, "p_idle_w", _require_non_negative("p_idle_w", self.p_idle_w))
        object.__setattr__(self, "p_max_w", _require_finite("p_max_w", self.p_max_w))
        if self.p_max_w < self.p_idle_w:
            raise ValidationError(
                f"p_max_w ({self.p_max_w!r}) must be >= p_idle_w ({self.p_idle_w!r})"
            )


@dataclass(frozen=True)
class Node:
    """A provisioned node: identity, template, utilization, allocated set."""

    id: str
    template: NodeTemplate
    utilization: UtilizationVector = ZERO_UTILIZATION
    allocated: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("node id must be a non-empty string")
        object.__setattr__(self, "allocated", frozenset(self.allocated))

    @property
    def capacity(self) -> ResourceVector:
        return self.template.capacity

    @property
    def is_empty(self) -> bool:
        return not self.allocated


@dataclass(frozen=True)
class GptRequest:
    """One GPT inference request.

    Either explicit_demand is given, or model_params_b must be positive so
    a profiler can estimate the demand. The timing fields are optional and
    only needed by the timeline simulator.
    """

    id: str
    task_kind: TaskKind
    model_params_b: float = 0.0
    prompt_tokens: int = 0
    output_tokens: int = 0
    explicit_demand: Optional[ResourceVector] = None
    arrival_s: Optional[float] = None
    duration_s: Optional[float] = None
    deadline_s: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("request id must be a non-empty string")
        if not isinstance(self.task_kind, TaskKind):
            raise ValidationError(f"task_kind must be a TaskKind, got {self.task_kind!r}")
        object.__setattr__(
            self, "model_params_b", _require_non_negative("model_params_b", self.model_params_b)
        )
        for name in ("prompt_tokens", "output_tokens"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValidationError(f"{name} must be a non-negative int, got {value!r}")
        if self.arrival_s is not None:
            object.__setattr__(self, "arrival_s", _require_non_negative("arrival_s", self.arrival_s))
        if self.duration_s is not None:
            duration = _require_finite("duration_s", self.duration_s)
            if duration <= 0.0:
                raise ValidationError(f"duration_s must be > 0, got {duration!r}")
            object.__setattr__(self, "duration_s", duration)
        if self.deadline_s is not None:
            deadline = _require_finite("deadline_s", self.deadline_s)
            if deadline <= 0.0:
                raise ValidationError(f"deadline_s must be > 0, got {deadline!r}")
            object.__setattr__(self, "deadline_s", deadline)


@dataclass(frozen=True)
class Threshold:
    """Per-axis utilization cap used by the threshold-based schedulers.

    value must lie in (0, 1]. Feasibility checks allow TOLERANCE slack, so
    a request landing exactly on the threshold is accepted.
    """

    value: float

    def __post_init__(self) -> None:
        value = _require_finite("threshold", self.value)
        if not 0.0 < value <= 1.0:
            raise ValidationError(f"threshold must be in (0, 1], got {value!r}")
        object.__setattr__(self, "value", value)


def demand_percentages(demand: ResourceVector, capacity: ResourceVector) -> UtilizationVector:
    """Demand expressed as a fraction of capacity per axis.

    Components may exceed 1; the caller decides feasibility. Raises
    InvalidCapacityError if any capacity axis is zero or negative.
    """

    if capacity.compute <= 0.0 or capacity.memory_gib <= 0.0 or capacity.storage_gib <= 0.0:
        raise InvalidCapacityError(f"capacity axes must be > 0, got {capacity.as_tuple()}")
    return UtilizationVector(
        compute=demand.compute / capacity.compute,
        memory=demand.memory_gib / capacity.memory_gib,
        storage=demand.storage_gib / capacity.storage_gib,
    )


def allocate_to_node(node: Node, request_id: str, pct: UtilizationVector) -> Node:
    """Return a copy of node with request_id allocated at the given percentages.

    Raises DuplicateAllocationError if the id is already on the node.
    """

    if request_id in node.allocated:
        raise DuplicateAllocationError(f"request {request_id!r} already allocated on {node.id!r}")
    util = UtilizationVector(
        compute=node.utilization.compute + pct.compute,
        memory=node.utilization.memory + pct.memory,
        storage=node.utilization.storage + pct.storage,
    )
    return replace(node, utilization=util, allocated=node.allocated | {request_id})


def release_from_node(node: Node, request_id: str, pct: UtilizationVector) -> Node:
    """Return a copy of node with request_id released.

    pct must be the percentages the request was allocated with. When the
    last request leaves, utilization snaps to exact zeros so float residue
    never accumulates. Raises NotAllocatedError if the id is not on the node.
    """

    if request_id not in node.allocated:
        raise NotAllocatedError(f"request {request_id!r} not allocated on {node.id!r}")
    remaining = node.allocated - {request_id}
    if not remaining:
        util = ZERO_UTILIZATION
    else:
        util = UtilizationVector(
            compute=max(0.0, node.utilization.compute - pct.compute),
            memory=max(0.0, node.utilization.memory - pct.memory),
            storage=max(0.0, node.utilization.storage - pct.storage),
        )
    return replace(node, utilization=util, allocated=remaining)


def utilization_gap(node: Node, pct_by_request: Mapping[str, UtilizationVector]) -> float:
    """Largest per-axis gap between node.utilization and the sum of its parts.

    pct_by_request must cover every id in node.allocated. Used to check the
    bookkeeping invariant that utilization equals the sum of allocated
    percentages within float tolerance.
    """

    sums = [0.0, 0.0, 0.0]
    for request_id in node.allocated:
        pct = pct_by_request[request_id]
        sums[0] += pct.compute
        sums[1] += pct.memory
        sums[2] += pct.storage
    recorded = node.utilization.as_tuple()
    return max(abs(recorded[i] - sums[i]) for i in range(3))


def validate_unique_ids(items: Iterable[str], what: str) -> None:
    """Raise ValidationError if the iterable yields a repeated id."""

    seen: Dict[str, None] = {}
    for item in items:
        if item in seen:
            raise ValidationError(f"duplicate {what} id {item!r}")
        seen[item] = None
