"""Capacitated network model: topology loading, shortest paths, bandwidth ledger.

Rates are scaled to integer Mbps internally so the allocation ledger stays
exact under any sequence of allocate/release calls. Path search uses a
composite label (weight, hops, node sequence) so results are fully
deterministic, including tie-breaks.
"""

from __future__ import annotations

import heapq
import math
from bisect import insort
from dataclasses import dataclass, field
from typing import Callable, Iterable

import yaml

from .errors import (
    InsufficientCapacity,
    NegativeWeight,
    NoPath,
    ParseError,
    UnknownAllocation,
    UnknownLink,
    ValidationError,
)

MBPS_PER_GBPS = 1000

#: Per-directed-link cost callback: (link, tail, head) -> weight.
#: Returning math.inf excludes the directed link from the search.
WeightFn = Callable[["Link", str, str], float]


def to_mbps(rate_gbps: float) -> int:
    """Scale a Gbps rate to integer Mbps (the ledger's exact unit)."""
    return int(round(rate_gbps * MBPS_PER_GBPS))


@dataclass(frozen=True)
class Node:
    id: str
    can_compute: bool = False
    can_aggregate: bool = False
    agg_time_ms: float = 0.0


@dataclass
class Link:
    """Bidirectional link with independent per-direction residual capacity."""

    a: str
    b: str
    capacity_mbps: int
    latency_ms: float
    residual: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.residual:
            self.residual = {
                (self.a, self.b): self.capacity_mbps,
                (self.b, self.a): self.capacity_mbps,
            }

    @property
    def capacity_gbps(self) -> float:
        return self.capacity_mbps / MBPS_PER_GBPS

    def residual_mbps(self, u: str, v: str) -> int:
        return self.residual[(u, v)]

    def residual_gbps(self, u: str, v: str) -> float:
        return self.residual[(u, v)] / MBPS_PER_GBPS


@dataclass(frozen=True)
class Path:
    """Loopless directed path; empty (single node, no links) iff src == dst."""

    nodes: tuple[str, ...]
    weight: float

    @property
    def src(self) -> str:
        return self.nodes[0]

    @property
    def dst(self) -> str:
        return self.nodes[-1]

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    @property
    def links(self) -> tuple[tuple[str, str], ...]:
        """Directed (tail, head) pairs from src to dst."""
        return tuple(zip(self.nodes[:-1], self.nodes[1:]))


def link_key(a: str, b: str) -> tuple[str, str]:
    """Canonical id of an undirected link."""
    return (a, b) if a <= b else (b, a)


class Network:
    """Simple graph of nodes and capacitated links plus an allocation ledger.

    Mutation (allocate/release/remove_link) is single-writer; queries are
    pure. Residual invariant: for every direction of every link,
    residual = capacity - sum of outstanding allocation rates on it.
    """

    def __init__(self) -> None:
        self.nodes: dict[str, Node] = {}
        self.links: dict[tuple[str, str], Link] = {}
        self.allocations: dict[int, tuple[tuple[tuple[str, str], int], ...]] = {}
        self._adj: dict[str, list[str]] = {}
        self._next_allocation_id = 1

    # -- construction -------------------------------------------------

    def add_node(self, node: Node) -> None:
        if node.id in self.nodes:
            raise ValidationError(f"duplicate node id '{node.id}'")
        if node.agg_time_ms < 0:
            raise ValidationError(f"node '{node.id}': agg_time_ms must be >= 0")
        if node.can_aggregate and not node.can_compute:
            raise ValidationError(
                f"node '{node.id}': can_aggregate requires can_compute"
            )
        self.nodes[node.id] = node
        self._adj[node.id] = []

    def add_link(self, a: str, b: str, capacity_gbps: float, latency_ms: float = 0.0) -> None:
        for end in (a, b):
            if end not in self.nodes:
                raise ValidationError(f"link {a}-{b} references unknown node '{end}'")
        if a == b:
            raise ValidationError(f"link {a}-{b}: self-loops are not allowed")
        key = link_key(a, b)
        if key in self.links:
            raise ValidationError(f"duplicate link {key[0]}-{key[1]}")
        capacity_mbps = to_mbps(capacity_gbps)
        if capacity_mbps <= 0:
            raise ValidationError(f"link {a}-{b}: capacity must be positive")
        if latency_ms < 0:
            raise ValidationError(f"link {a}-{b}: latency_ms must be >= 0")
        self.links[key] = Link(key[0], key[1], capacity_mbps, float(latency_ms))
        insort(self._adj[a], b)
        insort(self._adj[b], a)

    def remove_link(self, a: str, b: str) -> None:
        key = link_key(a, b)
        if key not in self.links:
            raise UnknownLink(f"no link {a}-{b}")
        for alloc_id, entries in self.allocations.items():
            if any(link_key(*d) == key for d, _ in entries):
                raise ValidationError(
                    f"cannot remove link {key[0]}-{key[1]}: "
                    f"allocation {alloc_id} still holds it"
                )
        del self.links[key]
        self._adj[a].remove(b)
        self._adj[b].remove(a)

    # -- queries ------------------------------------------------------

    def has_link(self, a: str, b: str) -> bool:
        return link_key(a, b) in self.links

    def link(self, a: str, b: str) -> Link:
        try:
            return self.links[link_key(a, b)]
        except KeyError:
            raise UnknownLink(f"no link {a}-{b}") from None

    def neighbors(self, v: str) -> tuple[str, ...]:
        """Adjacent node ids in lexicographic order."""
        return tuple(self._adj[v])

    def residual_mbps(self, u: str, v: str) -> int:
        return self.link(u, v).residual[(u, v)]

    def residual_snapshot(self) -> dict[tuple[str, str], int]:
        """All per-direction residuals, for exact before/after comparisons."""
        snap: dict[tuple[str, str], int] = {}
        for link in self.links.values():
            snap.update(link.residual)
        return snap

    def compute_nodes(self) -> tuple[str, ...]:
        return tuple(sorted(n.id for n in self.nodes.values() if n.can_compute))

    def copy(self) -> Network:
        """Independent copy sharing immutable nodes but not residual state."""
        dup = Network()
        dup.nodes = dict(self.nodes)
        dup._adj = {v: list(adj) for v, adj in self._adj.items()}
        dup.links = {
            key: Link(l.a, l.b, l.capacity_mbps, l.latency_ms, dict(l.residual))
            for key, l in self.links.items()
        }
        dup.allocations = dict(self.allocations)
        dup._next_allocation_id = self._next_allocation_id
        return dup

    # -- allocation ledger --------------------------------------------

    def allocate(self, directed_links: Iterable[tuple[str, str]], rate_gbps: float) -> int:
        """Debit `rate_gbps` on every listed directed link, atomically.

        Either all links have sufficient residual and all are debited, or
        InsufficientCapacity is raised (naming the first saturated directed
        link in list order) and nothing changes.
        """
        rate = to_mbps(rate_gbps)
        if rate <= 0:
            raise ValidationError("allocation rate must be positive")
        directed = list(directed_links)
        needed: dict[tuple[str, str], int] = {}
        for u, v in directed:
            link = self.link(u, v)
            needed[(u, v)] = needed.get((u, v), 0) + rate
            if needed[(u, v)] > link.residual[(u, v)]:
                raise InsufficientCapacity(
                    f"directed link {u}->{v}: residual "
                    f"{link.residual[(u, v)]} Mbps < required {needed[(u, v)]} Mbps",
                    link=(u, v),
                )
        for u, v in directed:
            self.link(u, v).residual[(u, v)] -= rate
        alloc_id = self._next_allocation_id
        self._next_allocation_id += 1
        self.allocations[alloc_id] = tuple(((u, v), rate) for u, v in directed)
        return alloc_id

    def release(self, alloc_id: int) -> None:
        """Credit back all debits of `alloc_id`; a second release is an error."""
        if alloc_id not in self.allocations:
            raise UnknownAllocation(f"unknown allocation id {alloc_id}")
        for (u, v), rate in self.allocations.pop(alloc_id):
            self.link(u, v).residual[(u, v)] += rate


# -- path search -------------------------------------------------------


def _check_endpoint(net: Network, v: str) -> None:
    if v not in net.nodes:
        raise ValidationError(f"unknown node '{v}'")


def _dijkstra(
    net: Network,
    src: str,
    dst: str,
    weight_fn: WeightFn,
    banned_nodes: frozenset[str] = frozenset(),
    banned_edges: frozenset[tuple[str, str]] = frozenset(),
) -> Path:
    """Minimum (weight, hops, lexicographic node sequence) path src -> dst.

    The composite label is extension-monotone, so settling each node on
    first pop yields the unique minimum under the full tie-break order.
    """
    heap: list[tuple[float, int, tuple[str, ...]]] = [(0.0, 0, (src,))]
    settled: set[str] = set()
    while heap:
        cost, hops, nodes = heapq.heappop(heap)
        tail = nodes[-1]
        if tail in settled:
            continue
        settled.add(tail)
        if tail == dst:
            return Path(nodes, cost)
        for head in net.neighbors(tail):
            if head in settled or head in banned_nodes or (tail, head) in banned_edges:
                continue
            w = weight_fn(net.link(tail, head), tail, head)
            if w == math.inf:
                continue
            if w < 0:
                raise NegativeWeight(
                    f"weight of directed link {tail}->{head} is negative ({w})"
                )
            heapq.heappush(heap, (cost + w, hops + 1, nodes + (head,)))
    raise NoPath(f"no path from {src} to {dst}")


def path_weight(net: Network, nodes: tuple[str, ...], weight_fn: WeightFn) -> float:
    """Left-to-right sum of directed link weights along a node sequence."""
    total = 0.0
    for u, v in zip(nodes[:-1], nodes[1:]):
        total += weight_fn(net.link(u, v), u, v)
    return total


def shortest_path(net: Network, src: str, dst: str, weight_fn: WeightFn) -> Path:
    """Minimum-weight loopless path; ties broken by hops, then node sequence."""
    _check_endpoint(net, src)
    _check_endpoint(net, dst)
    if src == dst:
        return Path((src,), 0.0)
    return _dijkstra(net, src, dst, weight_fn)


def k_shortest_paths(
    net: Network, src: str, dst: str, k: int, weight_fn: WeightFn
) -> list[Path]:
    """Up to k loopless paths in nondecreasing (weight, hops, sequence) order.

    Yen's algorithm over the deterministic shortest-path search. The result
    for k is always a prefix of the result for k + 1.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    first = shortest_path(net, src, dst, weight_fn)
    if src == dst:
        return [first]
    found = [first]
    # Candidate pool keyed by node sequence; persists across iterations.
    candidates: dict[tuple[str, ...], tuple[float, int, tuple[str, ...]]] = {}
    while len(found) < k:
        prev = found[-1].nodes
        for i in range(len(prev) - 1):
            spur = prev[i]
            root = prev[: i + 1]
            banned_edges = frozenset(
                (p.nodes[i], p.nodes[i + 1])
                for p in found
                if len(p.nodes) > i + 1 and p.nodes[: i + 1] == root
            )
            banned_nodes = frozenset(root[:-1])
            try:
                spur_path = _dijkstra(net, spur, dst, weight_fn, banned_nodes, banned_edges)
            except NoPath:
                continue
            total = root[:-1] + spur_path.nodes
            if total in candidates or any(p.nodes == total for p in found):
                continue
            # Recompute left to right so equal sequences get equal weights.
            cost = path_weight(net, total, weight_fn)
            candidates[total] = (cost, len(total) - 1, total)
        if not candidates:
            break
        best = min(candidates.values())
        del candidates[best[2]]
        found.append(Path(best[2], best[0]))
    return found


# -- topology document --------------------------------------------------

_NODE_FIELDS = {"id", "can_compute", "can_aggregate", "agg_time_ms"}
_LINK_FIELDS = {"a", "b", "capacity_gbps", "latency_ms"}


def _as_bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ParseError(f"{where}: expected a boolean, got {value!r}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_str(value, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError(f"{where}: expected a non-empty string, got {value!r}")
    return value


def _check_fields(item: dict, allowed: set[str], where: str) -> None:
    if not isinstance(item, dict):
        raise ParseError(f"{where}: expected a mapping, got {item!r}")
    for field_name in item:
        if field_name not in allowed:
            raise ParseError(f"{where}: unknown field '{field_name}'")


def load_topology(text: str) -> Network:
    """Parse a topology document into a fresh Network (all residuals full).

    Document shape: one mapping with a `nodes` list and a `links` list.
    Unknown fields are rejected with the offending location in the message.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed topology document: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("topology document must be a mapping")
    _check_fields(doc, {"nodes", "links"}, "topology")
    nodes = doc.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise ParseError("topology: 'nodes' must be a non-empty list")
    links = doc.get("links") or []
    if not isinstance(links, list):
        raise ParseError("topology: 'links' must be a list")

    net = Network()
    for idx, item in enumerate(nodes):
        where = f"nodes[{idx}]"
        _check_fields(item, _NODE_FIELDS, where)
        if "id" not in item:
            raise ParseError(f"{where}: missing field 'id'")
        net.add_node(
            Node(
                id=_as_str(item["id"], f"{where}.id"),
                can_compute=_as_bool(item.get("can_compute", False), f"{where}.can_compute"),
                can_aggregate=_as_bool(item.get("can_aggregate", False), f"{where}.can_aggregate"),
                agg_time_ms=_as_number(item.get("agg_time_ms", 0.0), f"{where}.agg_time_ms"),
            )
        )
    for idx, item in enumerate(links):
        where = f"links[{idx}]"
        _check_fields(item, _LINK_FIELDS, where)
        for required in ("a", "b", "capacity_gbps"):
            if required not in item:
                raise ParseError(f"{where}: missing field '{required}'")
        net.add_link(
            _as_str(item["a"], f"{where}.a"),
            _as_str(item["b"], f"{where}.b"),
            _as_number(item["capacity_gbps"], f"{where}.capacity_gbps"),
            _as_number(item.get("latency_ms", 0.0), f"{where}.latency_ms"),
        )
    return net
