"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import random

import pytest

from flexsched.cli import main as cli_main
from flexsched.errors import Blocked, InsufficientCapacity
from flexsched.scheduling import (
    SchedulerParams,
    build_metric_closure,
    expand_and_prune,
    minimum_spanning_tree,
    schedule_fixed,
    schedule_flexible,
)
from flexsched.simulate import (
    broadcast_latency,
    consumed_bandwidth,
    run_simulation,
    run_sweep,
    upload_latency,
)
from flexsched.report import summarize
from flexsched.topology import k_shortest_paths, link_key
from flexsched.workload import GeneratorConfig, generate_workload

from conftest import RING10_PATH
from oracles import (
    brute_force_steiner_cost,
    build_net,
    enumerate_simple_paths,
    ledger_residuals,
    make_task,
    random_connected_net,
    random_scheduled_trees,
    replay_broadcast,
    replay_upload,
    weight_fn_from,
)

SWEEP = [3, 5, 7, 9]
PARAMS = SchedulerParams()


@pytest.fixture(scope="module")
def sweep_cells(ring10_text):
    from flexsched.topology import load_topology

    net = load_topology(ring10_text)
    records = run_sweep(
        net,
        GeneratorConfig(n_tasks=30, n_locals=1),
        SWEEP,
        seed=42,
        schedulers=["fixed", "flexible"],
        params=PARAMS,
    )
    return summarize(records)


def test_criterion_1_latency_direction(sweep_cells):
    """Flexible mean total latency <= fixed at every sweep point, strict at half."""
    strict = 0
    for n in SWEEP:
        fixed = sweep_cells.cell("fixed", n)
        flexible = sweep_cells.cell("flexible", n)
        assert fixed.mean_total_latency_ms is not None
        assert flexible.mean_total_latency_ms is not None
        assert flexible.mean_total_latency_ms <= fixed.mean_total_latency_ms, (
            f"n_locals={n}: flexible {flexible.mean_total_latency_ms} > "
            f"fixed {fixed.mean_total_latency_ms}"
        )
        if flexible.mean_total_latency_ms < fixed.mean_total_latency_ms:
            strict += 1
    assert strict >= len(SWEEP) / 2
    print(
        f"\n[criterion 1] PASS latency direction: flexible <= fixed at all "
        f"{len(SWEEP)} points, strict at {strict}"
    )


def test_criterion_2_bandwidth_direction_and_linearity(sweep_cells):
    """Flexible consumes strictly less bandwidth; star bandwidth is 2*N*rate."""
    for n in SWEEP:
        fixed = sweep_cells.cell("fixed", n)
        flexible = sweep_cells.cell("flexible", n)
        assert flexible.total_consumed_bw_gbps < fixed.total_consumed_bw_gbps, (
            f"n_locals={n}: flexible bw {flexible.total_consumed_bw_gbps} >= "
            f"fixed bw {fixed.total_consumed_bw_gbps}"
        )
    leaves = [f"x{i:02d}" for i in range(16)]
    star = build_net([("hub", leaf) for leaf in leaves])
    for n in range(1, 17):
        task = make_task("hub", leaves[:n], rate=1.0)
        schedule = schedule_fixed(star.copy(), task, PARAMS)
        assert consumed_bandwidth(schedule) == 2.0 * n * 1.0
    print(
        f"\n[criterion 2] PASS bandwidth direction at all {len(SWEEP)} points; "
        f"star bandwidth exactly 2*N*rate for N=1..16"
    )


def test_criterion_3_steiner_quality():
    """Tree cost stays within twice the exact Steiner optimum."""
    rng = random.Random(1009)
    checked = 0
    while checked < 500:
        n = rng.randrange(3, 8)
        net, _ = random_connected_net(rng, n, extra_edges=rng.randrange(0, 4))
        weights = {key: round(rng.uniform(0.1, 4.0), 3) for key in net.links}
        wfn = weight_fn_from(weights)
        names = sorted(net.nodes)
        n_terms = rng.randrange(2, min(4, len(names)) + 1)
        terminals = tuple(rng.sample(names, n_terms))
        aux = build_metric_closure(net, terminals, wfn)
        tree = expand_and_prune(net, minimum_spanning_tree(aux), wfn)
        cost = sum(weights[key] for key in tree)
        optimum = brute_force_steiner_cost(net, weights, terminals)
        assert cost <= 2.0 * optimum + 1e-9, (
            f"tree cost {cost} exceeds twice the optimum {optimum} "
            f"(terminals {terminals})"
        )
        checked += 1
    print(f"\n[criterion 3] PASS Steiner quality: {checked} instances within 2x optimum")


def test_criterion_4_path_oracle():
    """Search results equal exhaustive enumeration, tie-break order included."""
    rng = random.Random(4242)
    instances = 0
    while instances < 1000:
        net, weights = random_connected_net(rng, rng.randrange(3, 8), extra_edges=rng.randrange(0, 4))
        wfn = weight_fn_from(weights)
        names = sorted(net.nodes)
        src, dst = rng.sample(names, 2)
        expected = enumerate_simple_paths(net, src, dst, wfn)
        got = k_shortest_paths(net, src, dst, len(expected) + 1, wfn)
        assert [(p.weight, p.hops, p.nodes) for p in got] == expected
        instances += 1
    print(f"\n[criterion 4] PASS path oracle: {instances} instances, zero mismatches")


def test_criterion_5_latency_oracle():
    """Latency recursions equal the event-by-event replay exactly."""
    rng = random.Random(55)
    for _ in range(500):
        bcast, upload, task = random_scheduled_trees(rng, rng.randrange(2, 11))
        assert broadcast_latency(bcast, task) == replay_broadcast(bcast, task)
        assert upload_latency(upload, task) == replay_upload(upload, task)
    print("\n[criterion 5] PASS latency oracle: 500 trees, bitwise equal")


def test_criterion_6_conservation_fuzz(ring10):
    """Ledger replay matches residuals through 10^4 random events."""
    rng = random.Random(66)
    names = sorted(ring10.nodes)
    directed = [(l.a, l.b) for l in ring10.links.values()]
    directed += [(b, a) for a, b in directed]
    raw_allocs: list[int] = []
    schedules: list = []
    events = 0
    checked = 0
    while events < 10_000:
        roll = rng.random()
        if roll < 0.30:
            links = rng.sample(directed, rng.randrange(1, 6))
            try:
                raw_allocs.append(ring10.allocate(links, rng.choice([0.5, 1.0, 2.0])))
            except InsufficientCapacity:
                pass
        elif roll < 0.50 and raw_allocs:
            ring10.release(raw_allocs.pop(rng.randrange(len(raw_allocs))))
        elif roll < 0.80:
            picked = rng.sample(names, rng.randrange(2, 6))
            task = make_task(picked[0], picked[1:], rate=rng.choice([0.5, 1.0]),
                             task_id=f"f{events}")
            policy = schedule_fixed if rng.random() < 0.5 else schedule_flexible
            try:
                schedules.append(policy(ring10, task, PARAMS))
            except Blocked:
                pass  # counts as an event, must leave state intact
        elif schedules:
            schedule = schedules.pop(rng.randrange(len(schedules)))
            for alloc in schedule.allocation_ids:
                ring10.release(alloc)
        events += 1
        if events % 500 == 0:
            assert ring10.residual_snapshot() == ledger_residuals(ring10)
            checked += 1
    for alloc in raw_allocs:
        ring10.release(alloc)
    for schedule in schedules:
        for alloc in schedule.allocation_ids:
            ring10.release(alloc)
    assert all(
        link.residual[d] == link.capacity_mbps
        for link in ring10.links.values()
        for d in link.residual
    )
    # End-of-simulation residuals equal capacities too.
    fresh = ring10.copy()
    wl = generate_workload(fresh, GeneratorConfig(n_tasks=30, n_locals=5), seed=66)
    run_simulation(fresh, wl, "flexible", PARAMS)
    assert fresh.residual_snapshot() == ledger_residuals(fresh)
    assert all(
        link.residual[d] == link.capacity_mbps
        for link in fresh.links.values()
        for d in link.residual
    )
    print(
        f"\n[criterion 6] PASS conservation: {events} events, "
        f"{checked} replay checks, clean end state"
    )


def test_criterion_7_relay_scenario():
    """Flexible chains the third local through the second; fixed goes direct."""
    net = build_net(
        [
            ("g", "l1", 10.0, 0.05),
            ("g", "l2", 10.0, 0.05),
            ("l2", "l3", 10.0, 0.05),
            ("g", "l3", 1.25, 0.09),
        ]
    )
    task = make_task("g", ["l1", "l2", "l3"])
    flex = schedule_flexible(net.copy(), task, PARAMS)
    down = {(e.src, e.dst) for e in flex.broadcast_tree.edges}
    assert down == {("g", "l1"), ("g", "l2"), ("l2", "l3")}
    fixed = schedule_fixed(net.copy(), task, PARAMS)
    assert fixed.local_paths == (("g", "l1"), ("g", "l2"), ("g", "l3"))
    assert {link_key(*d) for d, _ in fixed.reserved} == {
        ("g", "l1"),
        ("g", "l2"),
        ("g", "l3"),
    }
    print(
        "\n[criterion 7] PASS relay scenario: flexible uses g->l1 and g->l2->l3, "
        "fixed uses three direct paths"
    )


def test_criterion_8_determinism_golden(tmp_path):
    """The integration run is byte-identical across executions and jobs."""
    def run_into(name: str, jobs: int) -> dict[str, bytes]:
        out = tmp_path / name
        code = cli_main(
            [
                "run",
                "--topology", str(RING10_PATH),
                "--generate", "n_tasks=30", "sweep=3,5,7,9",
                "--scheduler", "fixed,flexible",
                "--seed", "42",
                "--jobs", str(jobs),
                "--out", str(out),
            ]
        )
        assert code == 0
        return {p.name: p.read_bytes() for p in out.iterdir()}

    first = run_into("run1", 1)
    second = run_into("run2", 1)
    threaded = run_into("run3", 4)
    assert set(first) == {
        "records_fixed.csv",
        "records_flexible.csv",
        "sweep.csv",
        "latency.dat",
        "bandwidth.dat",
        "manifest.json",
    }
    assert first == second, "reruns must be byte-identical"
    assert first == threaded, "thread count must not change outputs"
    print(
        "\n[criterion 8] PASS determinism golden: 6 files byte-identical "
        "across two runs and jobs=4"
    )
