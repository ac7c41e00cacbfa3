from fractions import Fraction

import pytest

from flexsched.errors import ParseError
from flexsched.report import (
    RECORD_HEADER,
    RunMeta,
    emit_plot_data,
    parse_records_csv,
    summarize,
    to_csv,
)
from flexsched.scheduling import SchedulerParams
from flexsched.simulate import TaskRecord, run_sweep
from flexsched.workload import GeneratorConfig


def rec(task_id, scheduler="fixed", n_locals=3, blocked=False, rl=2.0, tl=20.0, bw=6.0, edges=3):
    if blocked:
        return TaskRecord(task_id, scheduler, n_locals, 10, True)
    return TaskRecord(task_id, scheduler, n_locals, 10, False, rl, tl, bw, edges)


def test_empty_records_header_only():
    assert to_csv([]) == RECORD_HEADER + "\n"


def test_single_record_two_lines():
    text = to_csv([rec("t000")])
    lines = text.splitlines()
    assert len(lines) == 2
    assert lines[1] == "fixed,t000,3,10,false,2.000000,20.000000,6.000000,3"
    assert text.endswith("\n")


def test_blocked_record_renders_empty_fields():
    text = to_csv([rec("t000", blocked=True)])
    assert text.splitlines()[1] == "fixed,t000,3,10,true,,,,"


def test_rows_sorted_by_scheduler_then_task_id():
    records = [rec("t001", "flexible"), rec("t000", "flexible"), rec("t000", "fixed")]
    lines = to_csv(records).splitlines()[1:]
    assert [l.split(",")[:2] for l in lines] == [
        ["fixed", "t000"],
        ["flexible", "t000"],
        ["flexible", "t001"],
    ]


def test_byte_identical_across_calls():
    records = [rec(f"t{i:03d}", rl=1.234567 + i) for i in range(5)]
    assert to_csv(records) == to_csv(records)


def test_round_trip_parse_reemit():
    records = [rec("t000"), rec("t001", blocked=True), rec("t002", "flexible", rl=1.5)]
    text = to_csv(records)
    again = to_csv(parse_records_csv(text))
    assert again == text


def test_parse_rejects_bad_header():
    with pytest.raises(ParseError):
        parse_records_csv("nope\n")


def test_summarize_means_and_blocked():
    records = [
        rec("t000", rl=1.0, tl=1.0),
        rec("t001", rl=3.0, tl=3.0),
        rec("t002", blocked=True),
    ]
    sweep = summarize(records)
    cell = sweep.cell("fixed", 3)
    assert cell.task_count == 3
    assert cell.blocked_count == 1
    assert cell.mean_total_latency_ms == pytest.approx(2.0)
    assert cell.max_total_latency_ms == pytest.approx(3.0)


def test_summarize_all_blocked_cell_empty():
    sweep = summarize([rec("t000", blocked=True), rec("t001", blocked=True)])
    cell = sweep.cell("fixed", 3)
    assert cell.mean_total_latency_ms is None
    assert cell.blocked_count == 2
    line = to_csv(sweep).splitlines()[1]
    assert line == "fixed,3,2,2,,,,,0.000000"


def test_sweep_csv_shape():
    records = [rec("t000"), rec("t001", "flexible", n_locals=5)]
    text = to_csv(summarize(records))
    lines = text.splitlines()
    assert lines[0].startswith("scheduler,n_locals,tasks,blocked")
    assert len(lines) == 3


def test_plot_data_matches_summary_exactly():
    records = [
        rec("t000", "fixed", n_locals=3, tl=10.0, bw=4.0),
        rec("t001", "flexible", n_locals=3, tl=8.0, bw=3.0),
        rec("t002", "fixed", n_locals=5, tl=12.0, bw=6.0),
        rec("t003", "flexible", n_locals=5, tl=9.0, bw=5.0),
    ]
    sweep = summarize(records)
    latency, bandwidth = emit_plot_data(sweep)
    assert latency.splitlines() == [
        "# n_locals fixed flexible",
        "3 10.000000 8.000000",
        "5 12.000000 9.000000",
    ]
    assert bandwidth.splitlines() == [
        "# n_locals fixed flexible",
        "3 4.000000 3.000000",
        "5 6.000000 5.000000",
    ]


def test_plot_single_cell():
    latency, bandwidth = emit_plot_data(summarize([rec("t000")]))
    assert latency.splitlines() == ["# n_locals fixed", "3 20.000000"]
    assert bandwidth.splitlines()[1] == "3 6.000000"


def test_sweep_cells_recomputable_from_csv(ring10):
    records = run_sweep(
        ring10,
        GeneratorConfig(n_tasks=10, n_locals=1),
        [3, 5],
        seed=42,
        schedulers=["fixed", "flexible"],
        params=SchedulerParams(),
    )
    sweep = summarize(records, meta=RunMeta(42, "x", "ring10"))
    parsed = parse_records_csv(to_csv(records))
    for cell in sweep.cells:
        rows = [
            r
            for r in parsed
            if r.scheduler == cell.scheduler and r.n_locals == cell.group and not r.blocked
        ]
        assert len(rows) + cell.blocked_count == cell.task_count
        if rows:
            exact_mean = sum(Fraction(str(r.total_latency_ms)) for r in rows) / len(rows)
            assert abs(float(exact_mean) - cell.mean_total_latency_ms) < 1.5e-6
            exact_bw = sum(Fraction(str(r.consumed_bw_gbps)) for r in rows)
            assert abs(float(exact_bw) - cell.total_consumed_bw_gbps) < 1.5e-6


def test_summarize_carries_meta():
    meta = RunMeta(seed=7, config_hash="abc", topology="ring10")
    sweep = summarize([rec("t000")], meta=meta)
    assert sweep.meta == meta
