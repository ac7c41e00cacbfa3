"""Deterministic scheduling and simulation of distributed-AI traffic.

Compares a fixed shortest-path-first-fit policy against a flexible
multicast-tree policy on capacitated network topologies, reporting
per-task latency and consumed bandwidth.
"""

from .errors import (
    Blocked,
    DisconnectedClosure,
    DisconnectedTerminals,
    FlexschedError,
    InfeasibleConfig,
    InsufficientCapacity,
    NegativeWeight,
    NoPath,
    ParseError,
    UnknownAllocation,
    UnknownLink,
    ValidationError,
)
from .report import (
    RunMeta,
    SweepCell,
    SweepReport,
    emit_plot_data,
    parse_records_csv,
    summarize,
    to_csv,
)
from .scheduling import (
    SCHEDULERS,
    AuxiliaryGraph,
    ClosureEdge,
    RescheduleResult,
    Schedule,
    ScheduledTree,
    SchedulerParams,
    TreeEdge,
    build_metric_closure,
    expand_and_prune,
    flexible_weight_fn,
    latency_weight_fn,
    link_weight,
    mark_aggregation_points,
    minimum_spanning_tree,
    reschedule,
    schedule_fixed,
    schedule_flexible,
)
from .simulate import (
    SimEvent,
    SimReport,
    TaskRecord,
    broadcast_latency,
    consumed_bandwidth,
    round_latency,
    run_simulation,
    run_sweep,
    upload_latency,
)
from .topology import (
    Link,
    Network,
    Node,
    Path,
    k_shortest_paths,
    link_key,
    load_topology,
    shortest_path,
)
from .workload import (
    AITask,
    GeneratorConfig,
    Workload,
    dump_workload,
    generate_workload,
    load_workload,
    validate_workload,
)

__version__ = "0.1.0"
