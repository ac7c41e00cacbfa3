"""AI-task workloads: task model, seeded generation, document load/dump."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, fields

import yaml

from .errors import InfeasibleConfig, ParseError, ValidationError
from .topology import Network


@dataclass(frozen=True)
class AITask:
    """One training job: a global node plus N local nodes exchanging weights.

    Each round broadcasts `model_size_gbit` from the global node to every
    local node, trains for `local_train_ms`, and uploads the updates back.
    Network reservations are held at `demand_rate_gbps` per directed link
    from admission until the last round completes.
    """

    id: str
    global_node: str
    local_nodes: tuple[str, ...]
    model_size_gbit: float
    demand_rate_gbps: float
    rounds: int
    local_train_ms: float = 0.0
    arrival_ms: float = 0.0

    @property
    def n_locals(self) -> int:
        return len(self.local_nodes)


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for the seeded workload generator.

    Defaults keep per-round latencies in the low-millisecond range on
    10 Gbps-class topologies (1 Mbit transfers at 1 Gbps take 1 ms).
    """

    n_tasks: int
    n_locals: int
    model_size_gbit: float = 0.001
    demand_rate_gbps: float = 1.0
    rounds: int = 10
    local_train_ms: float = 1.0
    arrival_window_ms: float = 1000.0
    id_prefix: str = "t"


@dataclass(frozen=True)
class Workload:
    """Tasks ordered by arrival time, plus the generator echo when generated."""

    tasks: tuple[AITask, ...]
    seed: int | None = None
    config: GeneratorConfig | None = None


def validate_task(task: AITask) -> None:
    """Check task-local invariants; raises ValidationError naming the task."""
    who = f"task '{task.id}'"
    if not task.local_nodes:
        raise ValidationError(f"{who}: needs at least one local node")
    if len(set(task.local_nodes)) != len(task.local_nodes):
        dup = next(n for n in task.local_nodes if task.local_nodes.count(n) > 1)
        raise ValidationError(f"{who}: duplicate local node '{dup}'")
    if task.global_node in task.local_nodes:
        raise ValidationError(
            f"{who}: global node '{task.global_node}' also listed as local"
        )
    if task.model_size_gbit <= 0:
        raise ValidationError(f"{who}: model_size_gbit must be positive")
    if task.demand_rate_gbps <= 0:
        raise ValidationError(f"{who}: demand_rate_gbps must be positive")
    if task.rounds <= 0:
        raise ValidationError(f"{who}: rounds must be positive")
    if task.local_train_ms < 0:
        raise ValidationError(f"{who}: local_train_ms must be >= 0")
    if task.arrival_ms < 0:
        raise ValidationError(f"{who}: arrival_ms must be >= 0")


def validate_task_against(net: Network, task: AITask) -> None:
    """Task-local invariants plus node references against a network."""
    validate_task(task)
    for node_id in (task.global_node, *task.local_nodes):
        node = net.nodes.get(node_id)
        if node is None:
            raise ValidationError(f"task '{task.id}': unknown node '{node_id}'")
        if not node.can_compute:
            raise ValidationError(
                f"task '{task.id}': node '{node_id}' cannot host a model"
            )


def validate_workload(net: Network, workload: Workload) -> None:
    if not workload.tasks:
        raise ValidationError("workload has no tasks")
    seen: set[str] = set()
    prev_arrival = 0.0
    for task in workload.tasks:
        if task.id in seen:
            raise ValidationError(f"duplicate task id '{task.id}'")
        seen.add(task.id)
        if task.arrival_ms < prev_arrival:
            raise ValidationError(
                f"task '{task.id}': arrival times must be nondecreasing"
            )
        prev_arrival = task.arrival_ms
        validate_task_against(net, task)


def generate_workload(net: Network, config: GeneratorConfig, seed: int) -> Workload:
    """Draw n_tasks tasks with nodes sampled uniformly from compute nodes.

    Deterministic for a fixed (net, config, seed): sampling order is fixed
    and node candidates are sorted before sampling.
    """
    if config.n_tasks < 1:
        raise InfeasibleConfig("n_tasks must be >= 1")
    if config.n_locals < 1:
        raise InfeasibleConfig("n_locals must be >= 1")
    candidates = net.compute_nodes()
    if config.n_locals + 1 > len(candidates):
        raise InfeasibleConfig(
            f"n_locals={config.n_locals} needs {config.n_locals + 1} compute nodes, "
            f"network has {len(candidates)}"
        )
    rng = random.Random(seed)
    drafts = []
    for _ in range(config.n_tasks):
        picked = rng.sample(candidates, config.n_locals + 1)
        arrival = rng.uniform(0.0, config.arrival_window_ms)
        drafts.append((arrival, picked[0], tuple(picked[1:])))
    drafts.sort(key=lambda d: d[0])
    width = max(3, len(str(config.n_tasks - 1)))
    tasks = tuple(
        AITask(
            id=f"{config.id_prefix}{i:0{width}d}",
            global_node=global_node,
            local_nodes=locals_,
            model_size_gbit=config.model_size_gbit,
            demand_rate_gbps=config.demand_rate_gbps,
            rounds=config.rounds,
            local_train_ms=config.local_train_ms,
            arrival_ms=arrival,
        )
        for i, (arrival, global_node, locals_) in enumerate(drafts)
    )
    return Workload(tasks=tasks, seed=seed, config=config)


# -- workload document ---------------------------------------------------

_TASK_FIELDS = {
    "id",
    "global",
    "locals",
    "model_size_gbit",
    "demand_rate_gbps",
    "rounds",
    "local_train_ms",
    "arrival_ms",
}


def _num(item: dict, name: str, where: str) -> float:
    value = item.get(name)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}.{name}: expected a number, got {value!r}")
    return float(value)


def load_workload(text: str) -> Workload:
    """Parse a workload document; task invariants are checked on load.

    Node references are cross-validated against a Network separately, at
    the point of use (see validate_workload).
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed workload document: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("workload document must be a mapping")
    for key in doc:
        if key not in {"tasks", "seed", "config"}:
            raise ParseError(f"workload: unknown field '{key}'")
    raw_tasks = doc.get("tasks")
    if not isinstance(raw_tasks, list):
        raise ParseError("workload: 'tasks' must be a list")
    if not raw_tasks:
        raise ValidationError("workload has no tasks")

    tasks = []
    for idx, item in enumerate(raw_tasks):
        where = f"tasks[{idx}]"
        if not isinstance(item, dict):
            raise ParseError(f"{where}: expected a mapping")
        for field_name in item:
            if field_name not in _TASK_FIELDS:
                raise ParseError(f"{where}: unknown field '{field_name}'")
        for required in sorted(_TASK_FIELDS):
            if required not in item:
                raise ParseError(f"{where}: missing field '{required}'")
        locals_ = item["locals"]
        if not isinstance(locals_, list) or not all(isinstance(x, str) for x in locals_):
            raise ParseError(f"{where}.locals: expected a list of node ids")
        rounds = item["rounds"]
        if isinstance(rounds, bool) or not isinstance(rounds, int):
            raise ParseError(f"{where}.rounds: expected an integer, got {rounds!r}")
        task = AITask(
            id=str(item["id"]),
            global_node=str(item["global"]),
            local_nodes=tuple(locals_),
            model_size_gbit=_num(item, "model_size_gbit", where),
            demand_rate_gbps=_num(item, "demand_rate_gbps", where),
            rounds=rounds,
            local_train_ms=_num(item, "local_train_ms", where),
            arrival_ms=_num(item, "arrival_ms", where),
        )
        validate_task(task)
        tasks.append(task)

    seen: set[str] = set()
    prev = 0.0
    for task in tasks:
        if task.id in seen:
            raise ValidationError(f"duplicate task id '{task.id}'")
        seen.add(task.id)
        if task.arrival_ms < prev:
            raise ValidationError(
                f"task '{task.id}': arrival times must be nondecreasing"
            )
        prev = task.arrival_ms

    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ParseError(f"workload.seed: expected an integer, got {seed!r}")
    config = None
    if "config" in doc:
        raw = doc["config"]
        if not isinstance(raw, dict):
            raise ParseError("workload.config: expected a mapping")
        known = {f.name for f in fields(GeneratorConfig)}
        for key in raw:
            if key not in known:
                raise ParseError(f"workload.config: unknown field '{key}'")
        try:
            config = GeneratorConfig(**raw)
        except TypeError as exc:
            raise ParseError(f"workload.config: {exc}") from None
    return Workload(tasks=tuple(tasks), seed=seed, config=config)


def _scalar(value) -> str:
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_workload(workload: Workload) -> str:
    """Deterministic (byte-stable) document for a workload.

    Key order is fixed and floats use repr, so load(dump(w)) == w and
    dump is byte-identical for equal workloads.
    """
    lines = []
    if workload.seed is not None:
        lines.append(f"seed: {workload.seed}")
    if workload.config is not None:
        pairs = ", ".join(
            f"{f.name}: {_scalar(getattr(workload.config, f.name))}"
            for f in fields(GeneratorConfig)
        )
        lines.append(f"config: {{{pairs}}}")
    lines.append("tasks:")
    for t in workload.tasks:
        locals_ = ", ".join(_scalar(n) for n in t.local_nodes)
        lines.append(
            "- {"
            f"id: {_scalar(t.id)}, global: {_scalar(t.global_node)}, "
            f"locals: [{locals_}], "
            f"model_size_gbit: {_scalar(t.model_size_gbit)}, "
            f"demand_rate_gbps: {_scalar(t.demand_rate_gbps)}, "
            f"rounds: {t.rounds}, "
            f"local_train_ms: {_scalar(t.local_train_ms)}, "
            f"arrival_ms: {_scalar(t.arrival_ms)}"
            "}"
        )
    return "\n".join(lines) + "\n"
