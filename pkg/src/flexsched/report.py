"""CSV emission, sweep aggregation, and plot-ready series."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError
from .simulate import TaskRecord

RECORD_HEADER = (
    "scheduler,task_id,n_locals,rounds,blocked,"
    "round_latency_ms,total_latency_ms,consumed_bw_gbps,tree_edges"
)
SWEEP_HEADER = (
    "scheduler,n_locals,tasks,blocked,"
    "mean_round_latency_ms,max_round_latency_ms,"
    "mean_total_latency_ms,max_total_latency_ms,total_consumed_bw_gbps"
)

_PREFERRED_ORDER = ("fixed", "flexible")


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


@dataclass(frozen=True)
class RunMeta:
    seed: int | None
    config_hash: str
    topology: str


@dataclass(frozen=True)
class SweepCell:
    """Aggregates for one (scheduler, group value) bucket.

    Latency statistics cover unblocked tasks only; blocked tasks are
    counted but contribute no latency or bandwidth.
    """

    scheduler: str
    group: int
    task_count: int
    blocked_count: int
    mean_round_latency_ms: float | None
    max_round_latency_ms: float | None
    mean_total_latency_ms: float | None
    max_total_latency_ms: float | None
    total_consumed_bw_gbps: float


@dataclass(frozen=True)
class SweepReport:
    cells: tuple[SweepCell, ...]
    group_by: str = "n_locals"
    meta: RunMeta | None = None

    def cell(self, scheduler: str, group: int) -> SweepCell | None:
        for c in self.cells:
            if c.scheduler == scheduler and c.group == group:
                return c
        return None


def summarize(
    records: list[TaskRecord] | tuple[TaskRecord, ...],
    group_by: str = "n_locals",
    meta: RunMeta | None = None,
) -> SweepReport:
    """Group records by (scheduler, group_by attribute) and aggregate."""
    buckets: dict[tuple[str, int], list[TaskRecord]] = {}
    for r in records:
        buckets.setdefault((r.scheduler, getattr(r, group_by)), []).append(r)
    cells = []
    for (scheduler, group), rs in sorted(buckets.items()):
        ok = [r for r in rs if not r.blocked]
        cells.append(
            SweepCell(
                scheduler=scheduler,
                group=group,
                task_count=len(rs),
                blocked_count=len(rs) - len(ok),
                mean_round_latency_ms=(
                    sum(r.round_latency_ms for r in ok) / len(ok) if ok else None
                ),
                max_round_latency_ms=(
                    max(r.round_latency_ms for r in ok) if ok else None
                ),
                mean_total_latency_ms=(
                    sum(r.total_latency_ms for r in ok) / len(ok) if ok else None
                ),
                max_total_latency_ms=(
                    max(r.total_latency_ms for r in ok) if ok else None
                ),
                total_consumed_bw_gbps=sum(r.consumed_bw_gbps for r in ok),
            )
        )
    return SweepReport(cells=tuple(cells), group_by=group_by, meta=meta)


def to_csv(data) -> str:
    """Byte-deterministic CSV for a record list or a SweepReport.

    Records sort by (scheduler, task_id); floats use fixed 6-decimal
    formatting; blocked rows leave latency and bandwidth cells empty.
    """
    if isinstance(data, SweepReport):
        lines = [SWEEP_HEADER]
        for c in data.cells:
            lines.append(
                f"{c.scheduler},{c.group},{c.task_count},{c.blocked_count},"
                f"{_fmt(c.mean_round_latency_ms)},{_fmt(c.max_round_latency_ms)},"
                f"{_fmt(c.mean_total_latency_ms)},{_fmt(c.max_total_latency_ms)},"
                f"{_fmt(c.total_consumed_bw_gbps)}"
            )
        return "\n".join(lines) + "\n"
    lines = [RECORD_HEADER]
    for r in sorted(data, key=lambda r: (r.scheduler, r.task_id)):
        tree_edges = "" if r.tree_edges is None else str(r.tree_edges)
        lines.append(
            f"{r.scheduler},{r.task_id},{r.n_locals},{r.rounds},"
            f"{'true' if r.blocked else 'false'},"
            f"{_fmt(r.round_latency_ms)},{_fmt(r.total_latency_ms)},"
            f"{_fmt(r.consumed_bw_gbps)},{tree_edges}"
        )
    return "\n".join(lines) + "\n"


def parse_records_csv(text: str) -> tuple[TaskRecord, ...]:
    """Inverse of to_csv for record lists; re-emitting is byte-identical."""
    lines = text.splitlines()
    if not lines or lines[0] != RECORD_HEADER:
        raise ParseError("records CSV: unexpected or missing header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 9:
            raise ParseError(f"records CSV line {lineno}: expected 9 fields")
        blocked = parts[4] == "true"
        records.append(
            TaskRecord(
                task_id=parts[1],
                scheduler=parts[0],
                n_locals=int(parts[2]),
                rounds=int(parts[3]),
                blocked=blocked,
                round_latency_ms=None if parts[5] == "" else float(parts[5]),
                total_latency_ms=None if parts[6] == "" else float(parts[6]),
                consumed_bw_gbps=None if parts[7] == "" else float(parts[7]),
                tree_edges=None if parts[8] == "" else int(parts[8]),
            )
        )
    return tuple(records)


def _scheduler_columns(sweep: SweepReport) -> list[str]:
    present = {c.scheduler for c in sweep.cells}
    ordered = [s for s in _PREFERRED_ORDER if s in present]
    ordered.extend(sorted(present - set(_PREFERRED_ORDER)))
    return ordered


def emit_plot_data(sweep: SweepReport) -> tuple[str, str]:
    """Whitespace-delimited series: (latency text, bandwidth text).

    One row per group value, one column per scheduler (fixed first), values
    straight from the sweep cells: mean total latency and total consumed
    bandwidth. Plottable as-is by gnuplot-style tools.
    """
    schedulers = _scheduler_columns(sweep)
    groups = sorted({c.group for c in sweep.cells})
    header = "# " + sweep.group_by + " " + " ".join(schedulers)

    def series(value_of) -> str:
        lines = [header]
        for g in groups:
            row = [str(g)]
            for s in schedulers:
                cell = sweep.cell(s, g)
                value = value_of(cell) if cell else None
                row.append("nan" if value is None else f"{value:.6f}")
            lines.append(" ".join(row))
        return "\n".join(lines) + "\n"

    latency = series(lambda c: c.mean_total_latency_ms)
    bandwidth = series(lambda c: c.total_consumed_bw_gbps)
    return latency, bandwidth
