"""Command line driver: single runs, local-count sweeps, input validation.

Exit codes: 0 success, 1 validation problem, 2 I/O problem. Identical
command lines on identical input files produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .errors import FlexschedError, InfeasibleConfig, ParseError
from .report import RunMeta, emit_plot_data, summarize, to_csv
from .scheduling import SCHEDULERS, SchedulerParams
from .simulate import run_simulation, run_sweep
from .topology import Network, load_topology
from .workload import GeneratorConfig, load_workload, validate_workload

_GENERATE_KEYS = {
    "n_tasks": int,
    "n_locals": int,
    "model_size_gbit": float,
    "demand_rate_gbps": float,
    "rounds": int,
    "local_train_ms": float,
    "arrival_window_ms": float,
    "sweep": None,
}


class UsageError(FlexschedError):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 (argparse hook)
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="flexsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run scheduler(s) and write CSV/plot outputs"),
        ("validate", "check inputs without running"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--topology", required=True, help="topology document path")
        p.add_argument("--workload", help="workload document path")
        p.add_argument(
            "--generate",
            nargs="+",
            metavar="KEY=VALUE",
            help="generator settings, e.g. n_tasks=30 sweep=3,5,7,9",
        )
        p.add_argument(
            "--scheduler",
            default="fixed,flexible",
            help="comma list of scheduler names (fixed, flexible)",
        )
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--k", type=int, default=4, help="first-fit candidate count")
        p.add_argument("--seed", type=int, help="required when generating")
        p.add_argument("--out", default="out", help="output directory (run only)")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    return parser


def _parse_generate(tokens: list[str]) -> dict:
    settings: dict = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise UsageError(f"--generate expects KEY=VALUE, got '{token}'")
        if key not in _GENERATE_KEYS:
            raise UsageError(f"--generate: unknown key '{key}'")
        if key == "sweep":
            try:
                sweep = [int(x) for x in value.split(",") if x]
            except ValueError:
                raise UsageError(f"--generate sweep: bad list '{value}'") from None
            if not sweep:
                raise UsageError("--generate sweep: list must be nonempty")
            if any(b <= a for a, b in zip(sweep, sweep[1:])):
                raise UsageError("--generate sweep: list must be strictly increasing")
            settings["sweep"] = sweep
        else:
            try:
                settings[key] = _GENERATE_KEYS[key](value)
            except ValueError:
                raise UsageError(f"--generate {key}: bad value '{value}'") from None
    return settings


def _check_args(args) -> tuple[list[str], SchedulerParams, dict | None]:
    schedulers = [s for s in args.scheduler.split(",") if s]
    if not schedulers:
        raise UsageError("--scheduler: need at least one scheduler name")
    for s in schedulers:
        if s not in SCHEDULERS:
            raise UsageError(f"--scheduler: unknown scheduler '{s}'")
    if bool(args.workload) == bool(args.generate):
        raise UsageError("exactly one of --workload or --generate is required")
    generate = None
    if args.generate:
        generate = _parse_generate(args.generate)
        if args.seed is None:
            raise UsageError("--seed is required with --generate")
        if "n_tasks" not in generate:
            raise UsageError("--generate: n_tasks is required")
        if ("n_locals" in generate) == ("sweep" in generate):
            raise UsageError("--generate: exactly one of n_locals or sweep")
    params = SchedulerParams(alpha=args.alpha, beta=args.beta, k_candidates=args.k)
    return schedulers, params, generate


def _base_config(generate: dict) -> GeneratorConfig:
    overrides = {
        k: v for k, v in generate.items() if k not in ("sweep", "n_locals", "n_tasks")
    }
    return GeneratorConfig(
        n_tasks=generate["n_tasks"],
        n_locals=generate.get("n_locals", 1),
        **overrides,
    )


def _load_net(path: str) -> Network:
    return load_topology(Path(path).read_text())


def _config_hash(args, schedulers: list[str]) -> str:
    payload = {
        "topology_sha256": hashlib.sha256(
            Path(args.topology).read_bytes()
        ).hexdigest(),
        "workload": args.workload,
        "generate": args.generate,
        "schedulers": schedulers,
        "alpha": args.alpha,
        "beta": args.beta,
        "k": args.k,
        "seed": args.seed,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _print_summary(sweep_report) -> None:
    print(f"{'scheduler':<10} {'n_locals':>8} {'tasks':>6} {'blocked':>8} "
          f"{'mean_total_ms':>14} {'total_bw_gbps':>14}")
    for c in sweep_report.cells:
        mean = "-" if c.mean_total_latency_ms is None else f"{c.mean_total_latency_ms:.3f}"
        print(f"{c.scheduler:<10} {c.group:>8} {c.task_count:>6} "
              f"{c.blocked_count:>8} {mean:>14} {c.total_consumed_bw_gbps:>14.3f}")


def _cmd_run(args) -> int:
    schedulers, params, generate = _check_args(args)
    net = _load_net(args.topology)

    if generate:
        config = _base_config(generate)
        sweep = generate.get("sweep", [config.n_locals])
        records = run_sweep(
            net, config, sweep, args.seed, schedulers, params, jobs=args.jobs
        )
    else:
        workload = load_workload(Path(args.workload).read_text())
        validate_workload(net, workload)
        records = []
        for scheduler in schedulers:
            records.extend(
                run_simulation(net.copy(), workload, scheduler, params).records
            )

    meta = RunMeta(
        seed=args.seed,
        config_hash=_config_hash(args, schedulers),
        topology=Path(args.topology).stem,
    )
    sweep_report = summarize(records, meta=meta)
    latency_text, bandwidth_text = emit_plot_data(sweep_report)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for scheduler in schedulers:
        outputs[f"records_{scheduler}.csv"] = to_csv(
            [r for r in records if r.scheduler == scheduler]
        )
    outputs["sweep.csv"] = to_csv(sweep_report)
    outputs["latency.dat"] = latency_text
    outputs["bandwidth.dat"] = bandwidth_text
    manifest = {
        "topology": args.topology,
        "topology_name": meta.topology,
        "workload": args.workload,
        "generate": args.generate,
        "schedulers": schedulers,
        "params": {"alpha": args.alpha, "beta": args.beta, "k_candidates": args.k},
        "seed": args.seed,
        "config_hash": meta.config_hash,
        "outputs": sorted([*outputs, "manifest.json"]),
    }
    outputs["manifest.json"] = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    for name, text in sorted(outputs.items()):
        (out / name).write_text(text)

    _print_summary(sweep_report)
    print(f"wrote {len(outputs)} files to {out}")
    return 0


def _cmd_validate(args) -> int:
    schedulers, _, generate = _check_args(args)
    net = _load_net(args.topology)
    print(
        f"topology OK: {len(net.nodes)} nodes, {len(net.links)} links, "
        f"{len(net.compute_nodes())} compute-capable"
    )
    if args.workload:
        workload = load_workload(Path(args.workload).read_text())
        validate_workload(net, workload)
        print(f"workload OK: {len(workload.tasks)} tasks")
    else:
        config = _base_config(generate)
        sweep = generate.get("sweep", [config.n_locals])
        available = len(net.compute_nodes())
        for n_locals in sweep:
            if n_locals + 1 > available:
                raise InfeasibleConfig(
                    f"n_locals={n_locals} needs {n_locals + 1} compute nodes, "
                    f"network has {available}"
                )
        print(f"generator OK: n_tasks={config.n_tasks}, sweep={sweep}")
    print(f"schedulers: {', '.join(schedulers)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_validate(args)
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"i/o error: {exc}" + (f" ({name})" if name else ""), file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    except FlexschedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
