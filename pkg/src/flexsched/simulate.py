"""Latency model for scheduled trees and the arrival/departure event loop.

Store-and-forward discipline at every tree node, for both procedures: a
node forwards (or merges) a payload only once it has fully received it.
Transmission time of one model copy over one link is
model_size_gbit / demand_rate_gbps * 1000 ms, the reserved rate being what
the allocation actually guarantees.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

from .errors import Blocked
from .scheduling import Schedule, ScheduledTree, SchedulerParams, SCHEDULERS
from .topology import MBPS_PER_GBPS, Network
from .workload import AITask, GeneratorConfig, Workload, generate_workload, validate_workload

_ARRIVAL, _DEPARTURE, _LINK_FAILURE = 0, 1, 2
_KIND_NAMES = {_ARRIVAL: "arrival", _DEPARTURE: "departure", _LINK_FAILURE: "link_failure"}


@dataclass(frozen=True)
class SimEvent:
    """One event: arrival(task), departure(task) or link_failure(link).

    Events are processed in nondecreasing time; ties break arrival before
    departure before failure, then by task id.
    """

    time_ms: float
    kind: str
    task_id: str | None = None
    link: tuple[str, str] | None = None


@dataclass(frozen=True)
class TaskRecord:
    """Outcome of one task under one policy; latency fields absent if blocked."""

    task_id: str
    scheduler: str
    n_locals: int
    rounds: int
    blocked: bool
    round_latency_ms: float | None = None
    total_latency_ms: float | None = None
    consumed_bw_gbps: float | None = None
    tree_edges: int | None = None


@dataclass(frozen=True)
class SimReport:
    """All task records of one run plus ready-made aggregates."""

    scheduler: str
    records: tuple[TaskRecord, ...]
    n_tasks: int
    blocked_count: int
    mean_round_latency_ms: float | None
    mean_total_latency_ms: float | None
    max_total_latency_ms: float | None
    total_consumed_bw_gbps: float


def transmission_ms(task: AITask) -> float:
    """Time to push one model copy at the task's reserved rate."""
    return task.model_size_gbit / task.demand_rate_gbps * 1000.0


def broadcast_latency(tree: ScheduledTree, task: AITask) -> float:
    """Time until the last local node holds the model.

    arrival(root) = 0; arrival(v) = arrival(parent) + multiplicity * tx
    + link latency, store-and-forward down the tree. With a path overlay
    (fixed policy) a node may have several incoming edges; the latest
    delivery wins.
    """
    tx = transmission_ms(task)
    incoming: dict[str, list] = {}
    outgoing: dict[str, list] = {}
    indeg: dict[str, int] = {tree.root: 0}
    for e in tree.edges:
        incoming.setdefault(e.dst, []).append(e)
        outgoing.setdefault(e.src, []).append(e)
        indeg[e.dst] = indeg.get(e.dst, 0) + 1
        indeg.setdefault(e.src, 0)
    arrival = {tree.root: 0.0}
    ready = [v for v, d in indeg.items() if d == 0]
    done = 0
    while ready:
        v = ready.pop()
        done += 1
        if v != tree.root:
            arrival[v] = max(
                arrival[e.src] + e.multiplicity * tx + e.latency_ms
                for e in incoming[v]
            )
        for e in outgoing.get(v, ()):
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                ready.append(e.dst)
    if done != len(indeg):
        raise RuntimeError("broadcast structure contains a directed cycle")
    return max((arrival[t] for t in tree.locals_), default=0.0)


def upload_latency(tree: ScheduledTree, task: AITask) -> float:
    """Time until the root has merged every local update.

    ready(leaf) = 0; an interior node waits for its slowest child branch
    (each crossing costs multiplicity * tx plus latency), then pays its
    aggregation time if it is an aggregation point.
    """
    tx = transmission_ms(task)
    incoming: dict[str, list] = {}
    outgoing: dict[str, list] = {}
    pending: dict[str, int] = {}
    nodes = {tree.root}
    for e in tree.edges:
        incoming.setdefault(e.dst, []).append(e)
        outgoing.setdefault(e.src, []).append(e)
        pending[e.dst] = pending.get(e.dst, 0) + 1
        nodes.update((e.src, e.dst))
    ready: dict[str, float] = {}
    frontier = [v for v in nodes if v not in pending]
    done = 0
    while frontier:
        v = frontier.pop()
        done += 1
        if v in incoming:
            value = max(
                ready[e.src] + e.multiplicity * tx + e.latency_ms
                for e in incoming[v]
            )
            if v in tree.aggregation_points:
                value += tree.agg_time(v)
            ready[v] = value
        else:
            ready[v] = 0.0
        for e in outgoing.get(v, ()):
            pending[e.dst] -= 1
            if pending[e.dst] == 0:
                frontier.append(e.dst)
    if done != len(nodes):
        raise RuntimeError("upload structure contains a directed cycle")
    return ready[tree.root]


def _overlay_broadcast(schedule: Schedule, task: AITask) -> float:
    """Per-path broadcast time for path overlays (fixed policy).

    Each copy travels its own path; shared directed links serialize copies
    (multiplicity). Equals the tree recursion whenever the overlay is a tree.
    """
    tx = transmission_ms(task)
    attrs = {(e.src, e.dst): e for e in schedule.broadcast_tree.edges}
    worst = 0.0
    for nodes in schedule.local_paths:
        total = 0.0
        for u, v in zip(nodes[:-1], nodes[1:]):
            e = attrs[(u, v)]
            total = total + e.multiplicity * tx + e.latency_ms
        worst = max(worst, total)
    return worst


def _overlay_upload(schedule: Schedule, task: AITask) -> float:
    """Per-path upload time for path overlays; aggregation at the root only."""
    tx = transmission_ms(task)
    tree = schedule.upload_tree
    attrs = {(e.src, e.dst): e for e in tree.edges}
    worst = 0.0
    for nodes in schedule.local_paths:
        total = 0.0
        # Leaf-to-root accumulation, matching the tree recursion exactly.
        for u, v in reversed(list(zip(nodes[:-1], nodes[1:]))):
            e = attrs[(v, u)]
            total = total + e.multiplicity * tx + e.latency_ms
        worst = max(worst, total)
    return worst + tree.agg_time(tree.root)


def round_latency(schedule: Schedule, task: AITask | None = None) -> float:
    """Broadcast, local training, then aggregation-aware upload."""
    task = task or schedule.task
    if schedule.local_paths:
        return (
            _overlay_broadcast(schedule, task)
            + task.local_train_ms
            + _overlay_upload(schedule, task)
        )
    return (
        broadcast_latency(schedule.broadcast_tree, task)
        + task.local_train_ms
        + upload_latency(schedule.upload_tree, task)
    )


def consumed_bandwidth(schedule: Schedule) -> float:
    """Total reserved rate over the schedule's directed links, in Gbps.

    Each directed-link reservation counts once; payload multiplicity
    stretches time, not the reservation.
    """
    return sum(rate for _, rate in schedule.reserved) / MBPS_PER_GBPS


def run_simulation(
    net: Network,
    workload: Workload,
    scheduler: str,
    params: SchedulerParams = SchedulerParams(),
) -> SimReport:
    """Process arrivals and departures in time order on the given network.

    Arrivals schedule the task (a blocked task is data, not an error) and
    enqueue its departure at arrival + rounds * round_latency; departures
    release the task's reservations. The network ends in its initial state.
    """
    if scheduler not in SCHEDULERS:
        raise ValueError(f"unknown scheduler '{scheduler}'")
    validate_workload(net, workload)
    schedule_fn = SCHEDULERS[scheduler]
    tasks = {t.id: t for t in workload.tasks}

    queue: list[tuple[float, int, str]] = [
        (t.arrival_ms, _ARRIVAL, t.id) for t in workload.tasks
    ]
    heapq.heapify(queue)
    live: dict[str, Schedule] = {}
    records: list[TaskRecord] = []

    while queue:
        time_ms, kind, task_id = heapq.heappop(queue)
        event = SimEvent(time_ms, _KIND_NAMES[kind], task_id=task_id)
        task = tasks[event.task_id]
        if kind == _ARRIVAL:
            try:
                schedule = schedule_fn(net, task, params)
            except Blocked:
                records.append(
                    TaskRecord(task.id, scheduler, task.n_locals, task.rounds, True)
                )
                continue
            per_round = round_latency(schedule, task)
            total = task.rounds * per_round
            records.append(
                TaskRecord(
                    task_id=task.id,
                    scheduler=scheduler,
                    n_locals=task.n_locals,
                    rounds=task.rounds,
                    blocked=False,
                    round_latency_ms=per_round,
                    total_latency_ms=total,
                    consumed_bw_gbps=consumed_bandwidth(schedule),
                    tree_edges=schedule.tree_edge_count(),
                )
            )
            live[task.id] = schedule
            heapq.heappush(queue, (time_ms + total, _DEPARTURE, task.id))
        else:
            schedule = live.pop(event.task_id)
            for alloc_id in schedule.allocation_ids:
                net.release(alloc_id)

    return _make_report(scheduler, records)


def _make_report(scheduler: str, records: list[TaskRecord]) -> SimReport:
    ok = [r for r in records if not r.blocked]
    return SimReport(
        scheduler=scheduler,
        records=tuple(records),
        n_tasks=len(records),
        blocked_count=len(records) - len(ok),
        mean_round_latency_ms=(
            sum(r.round_latency_ms for r in ok) / len(ok) if ok else None
        ),
        mean_total_latency_ms=(
            sum(r.total_latency_ms for r in ok) / len(ok) if ok else None
        ),
        max_total_latency_ms=(max(r.total_latency_ms for r in ok) if ok else None),
        total_consumed_bw_gbps=sum(r.consumed_bw_gbps for r in ok),
    )


def run_sweep(
    net: Network,
    base_config: GeneratorConfig,
    sweep: list[int],
    seed: int,
    schedulers: list[str],
    params: SchedulerParams = SchedulerParams(),
    jobs: int = 1,
) -> list[TaskRecord]:
    """Fresh workload per local-count, identical across policies.

    Each sweep value gets its own seeded workload (seed + n_locals) so the
    points are independent but reproducible; every scheduler then runs the
    same workloads on fresh network copies. Cells may run in parallel; the
    returned record order does not depend on the job count.
    """
    cells = []
    for n_locals in sweep:
        config = replace(base_config, n_locals=n_locals, id_prefix=f"n{n_locals:02d}-")
        workload = generate_workload(net, config, seed + n_locals)
        for scheduler in schedulers:
            cells.append((scheduler, n_locals, workload))

    def run_cell(cell):
        scheduler, n_locals, workload = cell
        report = run_simulation(net.copy(), workload, scheduler, params)
        return (scheduler, n_locals), report.records

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(run_cell, cells))
    else:
        results = dict(map(run_cell, cells))

    records: list[TaskRecord] = []
    for scheduler, n_locals, _ in cells:
        records.extend(results[(scheduler, n_locals)])
    return records
