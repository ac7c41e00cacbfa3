"""The two scheduling policies behind one interface.

Fixed policy: an independent shortest path (latency metric) from the global
node to every local node, admitted first-fit over k loopless candidates.
Every local keeps its own end-to-end reservation, so copies of the model
pile up on shared links (payload multiplicity adds) and updates are only
aggregated at the global node.

Flexible policy: one shared multicast tree per task, built like the classic
metric-closure Steiner approximation (closure over the terminals, MST of
the closure, expansion into physical paths, re-spanning, pruning). The tree
is used in both directions: away from the root for broadcast, toward the
root for upload, with every capable interior node merging upload payloads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (
    Blocked,
    DisconnectedClosure,
    DisconnectedTerminals,
    InsufficientCapacity,
    NoPath,
    UnknownLink,
)
from .topology import (
    Link,
    Network,
    Path,
    WeightFn,
    k_shortest_paths,
    link_key,
    shortest_path,
    to_mbps,
)
from .workload import AITask, validate_task_against


@dataclass(frozen=True)
class SchedulerParams:
    """Weight coefficients and the first-fit candidate count.

    alpha scales the bandwidth share term (demand / capacity, dimensionless),
    beta scales latency in ms. k_candidates bounds the fixed policy's
    first-fit search.
    """

    alpha: float = 1.0
    beta: float = 1.0
    k_candidates: int = 4


def link_weight(
    link: Link,
    direction: tuple[str, str],
    task: AITask,
    params: SchedulerParams,
    already_used: bool = False,
) -> float:
    """Cost of carrying one task flow over a directed link.

    The bandwidth share term is waived when the task already holds this
    directed link; latency is always paid. Capacity admission is the
    caller's job (an inadmissible link is simply absent from the search).
    """
    bandwidth = 0.0 if already_used else task.demand_rate_gbps / link.capacity_gbps
    return params.alpha * bandwidth + params.beta * link.latency_ms


def flexible_weight_fn(
    task: AITask,
    params: SchedulerParams,
    held: frozenset[tuple[str, str]] = frozenset(),
    excluded: frozenset[tuple[str, str]] = frozenset(),
) -> WeightFn:
    """Weight function for the flexible pipeline.

    Directed links without residual for the task's demand, and links in
    `excluded`, are out of the admissible set. `held` marks directed links
    the task already reserves, which waives their bandwidth term.
    """
    rate = to_mbps(task.demand_rate_gbps)

    def weight(link: Link, u: str, v: str) -> float:
        if (u, v) in excluded:
            return math.inf
        if link.residual[(u, v)] < rate:
            return math.inf
        return link_weight(link, (u, v), task, params, already_used=(u, v) in held)

    return weight


def latency_weight_fn(params: SchedulerParams) -> WeightFn:
    """Latency-only metric used by the fixed policy's path search."""

    def weight(link: Link, u: str, v: str) -> float:
        return params.beta * link.latency_ms

    return weight


# -- auxiliary graph (metric closure) ------------------------------------


@dataclass(frozen=True)
class ClosureEdge:
    """One terminal pair: closure weight plus the physical path realizing it."""

    u: str
    v: str
    weight: float
    path: Path


@dataclass(frozen=True)
class AuxiliaryGraph:
    """Metric closure over the terminal set; terminals[0] is the root."""

    terminals: tuple[str, ...]
    edges: tuple[ClosureEdge, ...]

    def edge(self, a: str, b: str) -> ClosureEdge | None:
        key = link_key(a, b)
        for e in self.edges:
            if (e.u, e.v) == key:
                return e
        return None


def build_metric_closure(
    net: Network, terminals: tuple[str, ...], weight_fn: WeightFn
) -> AuxiliaryGraph:
    """Shortest-path weight and path for every reachable terminal pair.

    terminals[0] is the root; if any other terminal is unreachable from it,
    DisconnectedTerminals is raised. Pairs with no path are omitted.
    """
    root = terminals[0]
    terms = (root, *sorted(set(terminals) - {root}))
    if len(terms) < 2:
        raise DisconnectedClosure("need at least two distinct terminals")
    edges = []
    reachable_from_root = set()
    for i, u in enumerate(terms):
        for v in terms[i + 1 :]:
            a, b = link_key(u, v)
            try:
                p = shortest_path(net, a, b, weight_fn)
            except NoPath:
                continue
            edges.append(ClosureEdge(a, b, p.weight, p))
            if root in (a, b):
                reachable_from_root.add(b if a == root else a)
    unreachable = [t for t in terms[1:] if t not in reachable_from_root]
    if unreachable:
        raise DisconnectedTerminals(
            f"terminals unreachable from {root}: {', '.join(unreachable)}"
        )
    return AuxiliaryGraph(terms, tuple(edges))


def minimum_spanning_tree(aux: AuxiliaryGraph) -> tuple[ClosureEdge, ...]:
    """Kruskal MST of the closure, tie-broken by sorted endpoint pair."""
    parent = {t: t for t in aux.terminals}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    picked = []
    for e in sorted(aux.edges, key=lambda e: (e.weight, e.u, e.v)):
        ru, rv = find(e.u), find(e.v)
        if ru != rv:
            parent[ru] = rv
            picked.append(e)
    if len(picked) != len(aux.terminals) - 1:
        raise DisconnectedClosure(
            f"closure spans only {len(picked) + 1} of {len(aux.terminals)} terminals"
        )
    return tuple(picked)


def expand_and_prune(
    net: Network, mst_edges: tuple[ClosureEdge, ...], weight_fn: WeightFn
) -> frozenset[tuple[str, str]]:
    """Turn closure MST edges into a physical tree spanning the terminals.

    Stored paths are expanded and unioned (shared physical links collapse),
    the union subgraph is re-spanned by an MST under weight_fn, and
    non-terminal leaves are pruned away. Returns undirected link keys.
    """
    terminals = {t for e in mst_edges for t in (e.u, e.v)}
    union: set[tuple[str, str]] = set()
    for e in mst_edges:
        for u, v in e.path.links:
            union.add(link_key(u, v))
    nodes = {n for key in union for n in key}

    def edge_weight(key: tuple[str, str]) -> float:
        link = net.links[key]
        a, b = key
        return min(weight_fn(link, a, b), weight_fn(link, b, a))

    parent = {n: n for n in nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree: set[tuple[str, str]] = set()
    for key in sorted(union, key=lambda k: (edge_weight(k), k)):
        ra, rb = find(key[0]), find(key[1])
        if ra != rb:
            parent[ra] = rb
            tree.add(key)

    degree: dict[str, int] = {n: 0 for n in nodes}
    for a, b in tree:
        degree[a] += 1
        degree[b] += 1
    leaves = [n for n in nodes if degree[n] == 1 and n not in terminals]
    while leaves:
        leaf = leaves.pop()
        incident = next((k for k in tree if leaf in k), None)
        if incident is None:
            continue
        tree.remove(incident)
        other = incident[0] if incident[1] == leaf else incident[1]
        degree[leaf] -= 1
        degree[other] -= 1
        if degree[other] == 1 and other not in terminals:
            leaves.append(other)
    return frozenset(tree)


# -- scheduled trees -----------------------------------------------------


@dataclass(frozen=True)
class TreeEdge:
    """Directed physical link in a scheduled tree.

    multiplicity counts the separate model copies crossing the link in one
    round, which stretches transmission time, not the reserved rate.
    """

    src: str
    dst: str
    multiplicity: int
    latency_ms: float


@dataclass(frozen=True, eq=True)
class ScheduledTree:
    """Oriented routing structure for one procedure of one task.

    Broadcast trees point away from the root, upload trees toward it.
    aggregation_points and agg_time_ms are only populated for upload trees.
    """

    root: str
    terminals: tuple[str, ...]
    edges: tuple[TreeEdge, ...]
    aggregation_points: frozenset[str] = frozenset()
    agg_time_ms: tuple[tuple[str, float], ...] = ()

    def agg_time(self, node: str) -> float:
        for n, t in self.agg_time_ms:
            if n == node:
                return t
        return 0.0

    @property
    def locals_(self) -> tuple[str, ...]:
        return tuple(t for t in self.terminals if t != self.root)


def _orient(edges: frozenset[tuple[str, str]], root: str) -> dict[str, str]:
    """Parent map of the undirected tree, children discovered in id order."""
    adj: dict[str, list[str]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for neighbors in adj.values():
        neighbors.sort()
    parent: dict[str, str] = {}
    seen = {root}
    frontier = [root]
    while frontier:
        v = frontier.pop(0)
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                parent[w] = v
                frontier.append(w)
    missing = set(adj) - seen
    if missing:
        raise DisconnectedClosure(
            f"tree does not reach nodes: {', '.join(sorted(missing))}"
        )
    return parent


def broadcast_tree(
    net: Network, tree_edges: frozenset[tuple[str, str]], task: AITask
) -> ScheduledTree:
    """Orient the physical tree away from the global node, one copy per edge."""
    parent = _orient(tree_edges, task.global_node)
    edges = tuple(
        sorted(
            (
                TreeEdge(p, child, 1, net.link(p, child).latency_ms)
                for child, p in parent.items()
            ),
            key=lambda e: (e.src, e.dst),
        )
    )
    terminals = tuple(sorted({task.global_node, *task.local_nodes}))
    return ScheduledTree(root=task.global_node, terminals=terminals, edges=edges)


def mark_aggregation_points(
    net: Network, tree_edges: frozenset[tuple[str, str]], task: AITask
) -> ScheduledTree:
    """Orient the tree toward the global node and mark where payloads merge.

    Every interior node able to aggregate merges its subtree into a single
    payload; the root always aggregates. A non-aggregating node forwards
    all incoming copies plus its own when it hosts a local model:
    multiplicity(v -> parent) = 1 if v aggregates, else
    own(v) + sum of children's multiplicities.
    """
    root = task.global_node
    parent = _orient(tree_edges, root)
    children: dict[str, list[str]] = {}
    for child, p in parent.items():
        children.setdefault(p, []).append(child)
    terminals = {root, *task.local_nodes}
    agg_points = {
        v for v in children if v != root and net.nodes[v].can_aggregate
    } | {root}

    multiplicity: dict[str, int] = {}

    def out_mult(v: str) -> int:
        if v in multiplicity:
            return multiplicity[v]
        incoming = sum(out_mult(c) for c in children.get(v, ()))
        if v in agg_points:
            m = 1
        else:
            m = incoming + (1 if v in terminals else 0)
        multiplicity[v] = m
        return m

    edges = tuple(
        sorted(
            (
                TreeEdge(child, p, out_mult(child), net.link(child, p).latency_ms)
                for child, p in parent.items()
            ),
            key=lambda e: (e.src, e.dst),
        )
    )
    return ScheduledTree(
        root=root,
        terminals=tuple(sorted(terminals)),
        edges=edges,
        aggregation_points=frozenset(agg_points),
        agg_time_ms=tuple(
            (v, net.nodes[v].agg_time_ms) for v in sorted(agg_points)
        ),
    )


# -- schedules -----------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """A task pinned to the network: both trees plus the live reservations.

    local_paths is populated by the fixed policy only (the per-local node
    sequences whose overlay forms the trees); latency evaluation follows
    each copy along its own path there.
    """

    task: AITask
    policy: str
    params: SchedulerParams
    broadcast_tree: ScheduledTree
    upload_tree: ScheduledTree
    allocation_ids: tuple[int, ...]
    reserved: tuple[tuple[tuple[str, str], int], ...] = field(repr=False)
    local_paths: tuple[tuple[str, ...], ...] = ()

    @property
    def task_id(self) -> str:
        return self.task.id

    def tree_edge_count(self) -> int:
        """Distinct physical links carrying the schedule."""
        return len({link_key(e.src, e.dst) for e in self.broadcast_tree.edges})


def _both_directions(edges: frozenset[tuple[str, str]]) -> list[tuple[str, str]]:
    directed = []
    for a, b in sorted(edges):
        directed.append((a, b))
        directed.append((b, a))
    return directed


def schedule_flexible(
    net: Network, task: AITask, params: SchedulerParams = SchedulerParams()
) -> Schedule:
    """Build and reserve one shared multicast tree for the task.

    Pipeline: metric closure over {global} + locals, MST of the closure,
    expansion into a pruned physical tree, then one atomic reservation of
    the task's demand on both directions of every tree edge. If that
    reservation fails, links saturated in either direction are dropped from
    the admissible set and the pipeline retries once before blocking.
    """
    validate_task_against(net, task)
    terminals = (task.global_node, *task.local_nodes)
    rate = to_mbps(task.demand_rate_gbps)

    def build(excluded: frozenset[tuple[str, str]]) -> frozenset[tuple[str, str]]:
        weight = flexible_weight_fn(task, params, excluded=excluded)
        aux = build_metric_closure(net, terminals, weight)
        mst = minimum_spanning_tree(aux)
        return expand_and_prune(net, mst, weight)

    try:
        edges = build(frozenset())
    except (NoPath, DisconnectedTerminals, DisconnectedClosure):
        raise Blocked(task.id, "no feasible tree") from None

    directed = _both_directions(edges)
    try:
        alloc_id = net.allocate(directed, task.demand_rate_gbps)
    except InsufficientCapacity:
        saturated = frozenset(
            d
            for link in net.links.values()
            if min(link.residual.values()) < rate
            for d in ((link.a, link.b), (link.b, link.a))
        )
        try:
            edges = build(saturated)
            directed = _both_directions(edges)
            alloc_id = net.allocate(directed, task.demand_rate_gbps)
        except (
            NoPath,
            DisconnectedTerminals,
            DisconnectedClosure,
            InsufficientCapacity,
        ):
            raise Blocked(task.id, "no feasible tree after pruning") from None

    return Schedule(
        task=task,
        policy="flexible",
        params=params,
        broadcast_tree=broadcast_tree(net, edges, task),
        upload_tree=mark_aggregation_points(net, edges, task),
        allocation_ids=(alloc_id,),
        reserved=tuple((d, rate) for d in directed),
    )


def _union_trees(
    net: Network, task: AITask, paths: list[Path]
) -> tuple[ScheduledTree, ScheduledTree]:
    """Fixed-policy structures: per-local paths overlaid, multiplicities add.

    Under first-fit fallback the overlay is not always a tree; each copy
    still follows its own path, so multiplicity is counted per directed
    link as traversed.
    """
    down_mult: dict[tuple[str, str], int] = {}
    for p in paths:
        for u, v in p.links:
            down_mult[(u, v)] = down_mult.get((u, v), 0) + 1
    terminals = tuple(sorted({task.global_node, *task.local_nodes}))
    down = tuple(
        sorted(
            (
                TreeEdge(u, v, m, net.link(u, v).latency_ms)
                for (u, v), m in down_mult.items()
            ),
            key=lambda e: (e.src, e.dst),
        )
    )
    up = tuple(
        sorted(
            (
                TreeEdge(v, u, m, net.link(u, v).latency_ms)
                for (u, v), m in down_mult.items()
            ),
            key=lambda e: (e.src, e.dst),
        )
    )
    root = task.global_node
    bcast = ScheduledTree(root=root, terminals=terminals, edges=down)
    upload = ScheduledTree(
        root=root,
        terminals=terminals,
        edges=up,
        aggregation_points=frozenset({root}),
        agg_time_ms=((root, net.nodes[root].agg_time_ms),),
    )
    return bcast, upload


def schedule_fixed(
    net: Network, task: AITask, params: SchedulerParams = SchedulerParams()
) -> Schedule:
    """Reserve an independent direct path per local node, first fit.

    For each local in task order, take the k shortest latency-metric
    candidates and admit the first whose links (both directions) still fit
    the demand. All-or-nothing per task: on any local failing, reservations
    made for the task so far are rolled back and the task blocks.
    """
    validate_task_against(net, task)
    weight = latency_weight_fn(params)
    allocated: list[int] = []
    reserved: list[tuple[tuple[str, str], int]] = []
    rate = to_mbps(task.demand_rate_gbps)
    paths: list[Path] = []
    try:
        for local in task.local_nodes:
            candidates = k_shortest_paths(
                net, task.global_node, local, params.k_candidates, weight
            )
            for candidate in candidates:
                directed = [d for uv in candidate.links for d in (uv, uv[::-1])]
                try:
                    alloc_id = net.allocate(directed, task.demand_rate_gbps)
                except InsufficientCapacity:
                    continue
                allocated.append(alloc_id)
                reserved.extend((d, rate) for d in directed)
                paths.append(candidate)
                break
            else:
                raise Blocked(task.id, f"no fitting path to local '{local}'")
    except (NoPath, Blocked) as exc:
        for alloc_id in allocated:
            net.release(alloc_id)
        if isinstance(exc, Blocked):
            raise
        raise Blocked(task.id, str(exc)) from None

    bcast, upload = _union_trees(net, task, paths)
    return Schedule(
        task=task,
        policy="fixed",
        params=params,
        broadcast_tree=bcast,
        upload_tree=upload,
        allocation_ids=tuple(allocated),
        reserved=tuple(reserved),
        local_paths=tuple(p.nodes for p in paths),
    )


SCHEDULERS = {"fixed": schedule_fixed, "flexible": schedule_flexible}


@dataclass(frozen=True)
class RescheduleResult:
    schedules: tuple[Schedule, ...]
    rescheduled: tuple[str, ...]
    blocked: tuple[str, ...]


def reschedule(
    net: Network, schedules: list[Schedule], event
) -> RescheduleResult:
    """Remove a failed link, then re-run the owning policy for every schedule
    that was using it, in task arrival order. Unaffected schedules are kept
    as they are; tasks that no longer fit are reported blocked.

    `event` is either a link-failure event carrying a `.link` pair or the
    link pair itself.
    """
    failed_link = getattr(event, "link", event)
    kind = getattr(event, "kind", "link_failure")
    if kind != "link_failure" or failed_link is None:
        raise ValueError(f"reschedule expects a link failure, got {event!r}")
    key = link_key(*failed_link)
    if key not in net.links:
        raise UnknownLink(f"no link {failed_link[0]}-{failed_link[1]}")
    affected = [
        s for s in schedules if any(link_key(*d) == key for d, _ in s.reserved)
    ]
    affected_ids = {id(s) for s in affected}
    for s in affected:
        for alloc_id in s.allocation_ids:
            net.release(alloc_id)
    net.remove_link(*key)

    kept = [s for s in schedules if id(s) not in affected_ids]
    rescheduled: list[str] = []
    blocked: list[str] = []
    for s in sorted(affected, key=lambda s: (s.task.arrival_ms, s.task.id)):
        policy = SCHEDULERS[s.policy]
        try:
            kept.append(policy(net, s.task, s.params))
            rescheduled.append(s.task.id)
        except Blocked:
            blocked.append(s.task.id)
    return RescheduleResult(tuple(kept), tuple(rescheduled), tuple(blocked))
