"""Shared builders for the test suite."""

from __future__ import annotations

import random
from typing import List, Optional, Tuple

from gptsched import (
    GptRequest,
    Node,
    NodeTemplate,
    PowerMode,
    PowerPolicy,
    ResourceVector,
    TaskKind,
    UtilizationVector,
)


def template(
    compute: float = 100.0,
    memory: float = 100.0,
    storage: float = 100.0,
    p_idle: float = 100.0,
    p_max: float = 200.0,
) -> NodeTemplate:
    return NodeTemplate(
        capacity=ResourceVector(compute=compute, memory_gib=memory, storage_gib=storage),
        p_idle_w=p_idle,
        p_max_w=p_max,
    )


def node(
    node_id: str = "node-1",
    tpl: Optional[NodeTemplate] = None,
    util: Optional[Tuple[float, float, float]] = None,
) -> Node:
    """A node, optionally pre-loaded with one resident allocation."""

    tpl = tpl or template()
    if util is None or util == (0.0, 0.0, 0.0):
        return Node(id=node_id, template=tpl)
    return Node(
        id=node_id,
        template=tpl,
        utilization=UtilizationVector(*util),
        allocated=frozenset({f"resident-{node_id}"}),
    )


def request(
    rid: str,
    compute: float,
    memory: float = 0.0,
    storage: float = 0.0,
    **kwargs: object,
) -> GptRequest:
    """A request with an explicit absolute demand."""

    return GptRequest(
        id=rid,
        task_kind=TaskKind.CHAT,
        explicit_demand=ResourceVector(compute=compute, memory_gib=memory, storage_gib=storage),
        **kwargs,
    )


def profiled_request(
    rid: str, params_b: float, prompt: int = 0, output: int = 0, **kwargs: object
) -> GptRequest:
    """A request whose demand comes from the profiler."""

    return GptRequest(
        id=rid,
        task_kind=TaskKind.QA,
        model_params_b=params_b,
        prompt_tokens=prompt,
        output_tokens=output,
        **kwargs,
    )


def random_instance(
    rng: random.Random,
) -> Tuple[List[GptRequest], List[Node], float, Optional[NodeTemplate], PowerPolicy]:
    """A small random scheduling instance for oracle comparisons.

    Up to 3 nodes (possibly pre-loaded, mixed capacities) and up to 4
    requests (explicit or profiled demands, frequent exact ties), plus a
    random threshold, optional autoscale template and power policy.
    """

    nodes: List[Node] = []
    for i in range(rng.randint(0, 3)):
        cap = rng.choice([50.0, 100.0, 200.0])
        tpl = template(
            compute=cap,
            memory=rng.choice([50.0, 100.0]),
            storage=100.0,
            p_idle=rng.choice([50.0, 100.0]),
            p_max=rng.choice([150.0, 200.0, 300.0]),
        )
        util = (
            rng.choice([0.0, 0.1, 0.25, 0.4, 0.6]),
            rng.choice([0.0, 0.2, 0.5]),
            rng.choice([0.0, 0.3]),
        )
        nodes.append(node(f"n{i + 1}", tpl, util))

    requests: List[GptRequest] = []
    for j in range(rng.randint(0, 4)):
        if rng.random() < 0.7:
            requests.append(
                request(
                    f"r{j + 1}",
                    compute=rng.choice([0.0, 5.0, 10.0, 20.0, 40.0, 60.0, 120.0]),
                    memory=rng.choice([0.0, 5.0, 10.0, 30.0, 60.0]),
                    storage=rng.choice([0.0, 10.0, 40.0]),
                )
            )
        else:
            requests.append(
                profiled_request(
                    f"r{j + 1}",
                    params_b=rng.choice([7.0, 13.0]),
                    prompt=rng.randrange(0, 1000),
                    output=rng.randrange(0, 1000),
                )
            )

    threshold = rng.choice([0.5, 0.8, 1.0])
    autoscale = template(compute=100.0, memory=100.0, storage=100.0) if rng.random() < 0.5 else None
    policy = PowerPolicy(
        mode=rng.choice([PowerMode.INCREMENTAL, PowerMode.ABSOLUTE_AFTER]),
        off_when_empty=rng.random() < 0.7,
    )
    return requests, nodes, threshold, autoscale, policy
