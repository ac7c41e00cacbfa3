import random

import pytest

from flexsched.errors import InfeasibleConfig, ParseError, ValidationError
from flexsched.topology import Network, Node
from flexsched.workload import (
    GeneratorConfig,
    dump_workload,
    generate_workload,
    load_workload,
    validate_workload,
)

from oracles import build_net


def sixteen_compute_net() -> Network:
    net = Network()
    for i in range(16):
        net.add_node(Node(f"c{i:02d}", can_compute=True))
    for i in range(15):
        net.add_link(f"c{i:02d}", f"c{i + 1:02d}", 10.0, 0.05)
    return net


def test_generate_thirty_tasks_fifteen_locals():
    net = sixteen_compute_net()
    wl = generate_workload(net, GeneratorConfig(n_tasks=30, n_locals=15), seed=1)
    assert len(wl.tasks) == 30
    for task in wl.tasks:
        assert len(task.local_nodes) == 15
        assert len(set(task.local_nodes)) == 15
        assert task.global_node not in task.local_nodes


def test_generate_infeasible_when_locals_equal_compute_nodes():
    net = sixteen_compute_net()
    with pytest.raises(InfeasibleConfig):
        generate_workload(net, GeneratorConfig(n_tasks=1, n_locals=16), seed=1)


def test_generate_deterministic_field_for_field(ring10):
    cfg = GeneratorConfig(n_tasks=10, n_locals=4)
    a = generate_workload(ring10, cfg, seed=5)
    b = generate_workload(ring10, cfg, seed=5)
    assert a == b
    assert dump_workload(a) == dump_workload(b)
    c = generate_workload(ring10, cfg, seed=6)
    assert c != a


def test_generate_arrivals_sorted_ids_unique(ring10):
    wl = generate_workload(ring10, GeneratorConfig(n_tasks=25, n_locals=3), seed=9)
    arrivals = [t.arrival_ms for t in wl.tasks]
    assert arrivals == sorted(arrivals)
    assert len({t.id for t in wl.tasks}) == 25


def test_generated_tasks_valid_against_network_many_seeds(ring10):
    for seed in range(25):
        wl = generate_workload(ring10, GeneratorConfig(n_tasks=8, n_locals=5), seed=seed)
        validate_workload(ring10, wl)


def test_load_empty_task_list_rejected():
    with pytest.raises(ValidationError, match="no tasks"):
        load_workload("tasks: []")


def test_load_duplicate_local_named():
    with pytest.raises(ValidationError, match="n1"):
        load_workload(
            """
tasks:
- {id: t0, global: n0, locals: [n1, n1], model_size_gbit: 0.001,
   demand_rate_gbps: 1.0, rounds: 10, local_train_ms: 1.0, arrival_ms: 0.0}
"""
        )


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ("tasks: [{id: t0}]", "missing field"),
        (
            "tasks:\n- {id: t0, global: n0, locals: [n0], model_size_gbit: 0.001,\n"
            "   demand_rate_gbps: 1.0, rounds: 10, local_train_ms: 1.0, arrival_ms: 0.0}",
            "also listed as local",
        ),
        (
            "tasks:\n- {id: t0, global: n0, locals: [n1], model_size_gbit: 0,\n"
            "   demand_rate_gbps: 1.0, rounds: 10, local_train_ms: 1.0, arrival_ms: 0.0}",
            "model_size_gbit",
        ),
        ("tasks: [1, 2]", "expected a mapping"),
        ("nope: 1", "unknown field"),
    ],
)
def test_load_rejections(doc, fragment):
    with pytest.raises((ParseError, ValidationError), match=fragment):
        load_workload(doc)


def test_load_rejects_unsorted_arrivals():
    doc = """
tasks:
- {id: t0, global: n0, locals: [n1], model_size_gbit: 0.001,
   demand_rate_gbps: 1.0, rounds: 10, local_train_ms: 1.0, arrival_ms: 5.0}
- {id: t1, global: n0, locals: [n1], model_size_gbit: 0.001,
   demand_rate_gbps: 1.0, rounds: 10, local_train_ms: 1.0, arrival_ms: 1.0}
"""
    with pytest.raises(ValidationError, match="nondecreasing"):
        load_workload(doc)


def test_round_trip_generate_dump_load(ring10):
    wl = generate_workload(ring10, GeneratorConfig(n_tasks=12, n_locals=3), seed=42)
    text = dump_workload(wl)
    again = load_workload(text)
    assert again == wl
    assert dump_workload(again) == text


def test_cross_validation_against_network():
    net = build_net([("a", "b")], compute=False)
    doc = """
tasks:
- {id: t0, global: a, locals: [b], model_size_gbit: 0.001,
   demand_rate_gbps: 1.0, rounds: 10, local_train_ms: 1.0, arrival_ms: 0.0}
"""
    wl = load_workload(doc)
    with pytest.raises(ValidationError, match="cannot host"):
        validate_workload(net, wl)


def test_cross_validation_unknown_node(ring10):
    doc = """
tasks:
- {id: t0, global: n0, locals: [nowhere], model_size_gbit: 0.001,
   demand_rate_gbps: 1.0, rounds: 10, local_train_ms: 1.0, arrival_ms: 0.0}
"""
    wl = load_workload(doc)
    with pytest.raises(ValidationError, match="nowhere"):
        validate_workload(ring10, wl)


def test_generator_uses_only_compute_nodes():
    net = Network()
    for node_id in "abcde":
        net.add_node(Node(node_id, can_compute=node_id in "ace"))
    for a, b in (("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")):
        net.add_link(a, b, 10.0, 0.05)
    wl = generate_workload(net, GeneratorConfig(n_tasks=20, n_locals=2), seed=0)
    used = {n for t in wl.tasks for n in (t.global_node, *t.local_nodes)}
    assert used <= {"a", "c", "e"}
