from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .config import RunConfig, apply_overrides, load_run_config, parse_dims
from .data import Dataset, load_split, split_available, subsample
from .encoders import ENCODERS, build_encoder, encoder_memory_bytes
from .errors import ConfigError, UhdError
from .model import (
    SWEEP_CHECKPOINTS,
    OpCounters,
    SweepResult,
    evaluate,
    iteration_sweep,
    load_model,
    save_model,
    summarize_counters,
    train,
)
from .selftest import run_all
from .sobol import SobolConfig, balance_summary, build_sobol_table, load_direction_numbers, write_direction_numbers, write_table
from .storage import write_csv, write_json, write_txt
from .unary import build_ust, dump_ust

logger = logging.getLogger("unary_hdc")

EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_RESOURCE = 3


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 (argparse's default is 2, which is reserved for format errors)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"ERROR: {message}\n")


def dim_label(d: int) -> str:
    return f"{d // 1024}K" if d % 1024 == 0 else str(d)


def _report_base(cfg: RunConfig, command: str) -> Dict[str, Any]:
    return {
        "command": command,
        "version": __version__,
        "workers": cfg.run.workers,
        "config_ini": cfg.to_ini(),
    }


def _load(cfg: RunConfig, split: str) -> Dataset:
    if not cfg.dataset.path:
        raise ConfigError("no dataset given (use --dataset or [dataset] path)")
    ds = load_split(Path(cfg.dataset.path), split, cfg.dataset.format)
    limit = cfg.dataset.train_limit if split == "train" else cfg.dataset.test_limit
    if limit:
        ds = subsample(ds, limit, seed=cfg.dataset.subsample_seed)
    return ds


def cmd_train(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    train_ds = _load(cfg, "train")
    encoder = build_encoder(cfg.encoder, train_ds.features)
    counters = OpCounters()
    model = train(train_ds, encoder, cfg.model_config(), counters)

    out_dir = Path(cfg.out_dir)
    model_path = out_dir / f"model_{encoder.kind}_{dim_label(encoder.dimension)}.uhd"
    save_model(model_path, model)

    report = _report_base(cfg, "train")
    report.update(
        {
            "model": str(model_path),
            "dataset": train_ds.name,
            "n_train": len(train_ds),
            "seed": encoder.config.seed,
            "train_counters": counters.to_dict(),
            "memory_bytes": encoder_memory_bytes(encoder),
        }
    )
    summary = f"train encoder={encoder.kind} D={encoder.dimension} n={len(train_ds)} model={model_path}"
    if split_available(Path(cfg.dataset.path), "test", cfg.dataset.format):
        # a single CSV file serves as both splits
        eval_split = "train" if Path(cfg.dataset.path).is_file() else "test"
        test_ds = train_ds if eval_split == "train" else _load(cfg, "test")
        ev = evaluate(model, test_ds, encoder, cfg.model_config())
        report["eval"] = ev.to_dict()
        report["eval_split"] = eval_split
        summary += f" accuracy={ev.accuracy:.2f} eval_split={eval_split}"
    report["wall_clock_seconds"] = round(time.perf_counter() - t0, 3)
    write_json(out_dir / "train_report.json", report)
    print(summary)
    return 0


def cmd_eval(cfg: RunConfig, model_path: Path, split: str) -> int:
    t0 = time.perf_counter()
    model = load_model(model_path)
    ds = _load(cfg, split)
    ev = evaluate(model, ds, config=cfg.model_config())
    report = _report_base(cfg, "eval")
    report.update(
        {
            "model": str(model_path),
            "dataset": ds.name,
            "seed": model.encoder_config.seed,
            "model_config": dict(model.encoder_config.to_items()),
            "eval": ev.to_dict(),
            "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        }
    )
    write_json(Path(cfg.out_dir) / "eval_report.json", report)
    print(f"eval accuracy={ev.accuracy:.2f} correct={ev.correct} total={ev.total}")
    return 0


def _per_iteration(counters: OpCounters, iterations: int) -> OpCounters:
    return OpCounters(**{k: v // iterations for k, v in counters.to_dict().items()})


def cmd_compare(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    train_ds = _load(cfg, "train")
    test_ds = _load(cfg, "test")
    i_max = cfg.run.iterations
    checkpoints = [k for k in SWEEP_CHECKPOINTS if k <= i_max]
    mcfg = cfg.model_config()

    headers = ["D"] + [f"baseline_i{k}" for k in checkpoints] + ["baseline_best", "baseline_stddev", "uhd_i1", "bind_ops_ratio", "comparisons_ratio", "baseline_bytes", "uhd_bytes"]
    rows: List[List[str]] = []
    details: List[Dict[str, Any]] = []
    for d in cfg.run.dims:
        base_cfg = replace(cfg.encoder, encoder="baseline", dim=d)
        uhd_cfg = replace(cfg.encoder, encoder="uhd", dim=d)
        base = iteration_sweep(train_ds, test_ds, base_cfg, i_max, mcfg)
        uhd = iteration_sweep(train_ds, test_ds, uhd_cfg, 1, mcfg)
        ratios = summarize_counters(_per_iteration(base.counters, i_max), uhd.counters)
        base_mem = encoder_memory_bytes(build_encoder(base_cfg, train_ds.features))
        uhd_mem = encoder_memory_bytes(build_encoder(uhd_cfg, train_ds.features))
        avgs = base.averages()
        rows.append(
            [dim_label(d)]
            + [f"{avgs[k]:.2f}" for k in checkpoints]
            + [
                f"{base.best()[2]:.2f}",
                f"{base.stddev():.3f}",
                f"{uhd.accuracies[0]:.2f}",
                _ratio(ratios["bind_ops"]),
                _ratio(ratios["comparisons"]),
                str(base_mem["total"]),
                str(uhd_mem["total"]),
            ]
        )
        details.append(
            {
                "D": d,
                "baseline": base.to_dict(),
                "uhd": uhd.to_dict(),
                "counter_ratios_uhd_over_baseline": ratios,
                "memory_bytes": {"baseline": base_mem, "uhd": uhd_mem},
            }
        )

    out_dir = Path(cfg.out_dir)
    write_csv(out_dir / "compare.csv", headers, rows)
    write_txt(out_dir / "compare.txt", headers, rows)
    report = _report_base(cfg, "compare")
    report.update(
        {
            "train": train_ds.name,
            "test": test_ds.name,
            "iterations": i_max,
            "rows": details,
            "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        }
    )
    write_json(out_dir / "compare.json", report)
    cells = " ".join(f"{r[0]}:baseline_i1={r[1]},uhd={r[len(checkpoints) + 3]}" for r in rows)
    print(f"compare iters={i_max} {cells}")
    return 0


def _ratio(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def cmd_sweep(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    train_ds = _load(cfg, "train")
    test_ds = _load(cfg, "test")
    result: SweepResult = iteration_sweep(train_ds, test_ds, cfg.encoder, cfg.run.iterations, cfg.model_config())
    out_dir = Path(cfg.out_dir)
    write_csv(
        out_dir / "sweep_trace.csv",
        ["iteration", "seed", "accuracy"],
        [[str(i), str(s), f"{a:.4f}"] for i, s, a in result.trace],
    )
    report = _report_base(cfg, "sweep")
    report.update(result.to_dict())
    report["wall_clock_seconds"] = round(time.perf_counter() - t0, 3)
    write_json(out_dir / "sweep.json", report)
    avg = sum(result.accuracies) / len(result.accuracies)
    it, seed, best = result.best()
    print(
        f"sweep encoder={result.encoder} D={result.dimension} iters={len(result.trace)} "
        f"avg={avg:.2f} best={best:.2f}@{it} seed={seed} stddev={result.stddev():.3f}"
    )
    return 0


def cmd_sobol_dump(cfg: RunConfig, features: int, emit_directions: Optional[Path]) -> int:
    enc = cfg.encoder
    directions = load_direction_numbers(enc.directions_path or None)
    table = build_sobol_table(
        SobolConfig(
            dimensions=features,
            points_per_dimension=enc.dim,
            quantization_bits=enc.quantization_bits,
            skip_initial_zero=enc.skip_initial_zero,
        ),
        directions,
    )
    out_dir = Path(cfg.out_dir)
    nbytes = write_table(out_dir / "sobol_table.bin", table)
    stats = balance_summary(table)
    stats["bytes"] = nbytes
    stats["skip_initial_zero"] = enc.skip_initial_zero
    stats["directions"] = directions.source
    write_json(out_dir / "sobol_stats.json", stats)
    dump_ust(build_ust(enc.quantization_bits), out_dir / "ust.txt")
    if emit_directions is not None:
        write_direction_numbers(emit_directions, directions, features)
    totals = ",".join(str(x) for x in stats["level_totals"])
    print(
        f"sobol-dump H={stats['H']} D={stats['D']} M={stats['M']} bytes={nbytes} "
        f"per_level={stats['expected_per_level']:g} min={stats['min_count']} max={stats['max_count']} totals={totals}"
    )
    return 0


def cmd_selftest() -> int:
    results = run_all()
    cases = sum(r.cases for r in results)
    bad = sum(r.mismatches for r in results)
    for r in results:
        if not r.ok:
            logger.error("%s: %d of %d cases mismatched", r.name, r.mismatches, r.cases)
    print(f"selftest {'ok' if bad == 0 else 'FAILED'} suites={len(results)} cases={cases} mismatches={bad}")
    return 0 if bad == 0 else EXIT_FORMAT


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="Run config (INI with [dataset]/[encoder]/[model]/[run]/[output])")
    p.add_argument("--dataset", help="MNIST IDX directory, directory with train.csv/test.csv, or a single CSV file")
    p.add_argument("--encoder", choices=ENCODERS)
    p.add_argument("--dim", help="Hypervector dimension(s), e.g. 1024 or 1K,2K,8K")
    p.add_argument("--iters", type=int, help="Training iterations (sweep/compare)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--train-limit", type=int, help="Per-class training subsample size")
    p.add_argument("--test-limit", type=int, help="Per-class test subsample size")
    p.add_argument("--out", help="Output folder for models and reports")
    p.add_argument("--emit-config", action="store_true", help="Print the resolved config and exit")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="unary-hdc", add_help=True)
    ap.add_argument("--version", action="version", version=f"unary-hdc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_text in (
        ("train", "Train class hypervectors and write a model file"),
        ("compare", "Baseline vs uHD accuracy table over dimensions"),
        ("sweep", "Per-iteration accuracy trace"),
        ("selftest", "Exhaustive unary comparator / masking equivalence suites"),
    ):
        _common(sub.add_parser(name, help=help_text))

    p_eval = sub.add_parser("eval", help="Evaluate a model file")
    _common(p_eval)
    p_eval.add_argument("--model", type=Path, required=True)
    p_eval.add_argument("--split", choices=["train", "test"], default="test")

    p_dump = sub.add_parser("sobol-dump", help="Write the quantized Sobol table, its balance stats and the UST")
    _common(p_dump)
    p_dump.add_argument("--features", type=int, default=784, help="Feature positions H (default: 784)")
    p_dump.add_argument("--emit-directions", type=Path, help="Also export the direction numbers used")
    return ap


def _resolve(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config)
    return apply_overrides(
        cfg,
        dataset=args.dataset,
        encoder=args.encoder,
        dims=parse_dims(args.dim) if args.dim else None,
        iters=args.iters,
        seed=args.seed,
        workers=args.workers,
        train_limit=args.train_limit,
        test_limit=args.test_limit,
        out=args.out,
    )


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )

    try:
        cfg = _resolve(args)
        if args.emit_config:
            sys.stdout.write(cfg.to_ini())
            return 0
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.model, args.split)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "sobol-dump":
            return cmd_sobol_dump(cfg, args.features, args.emit_directions)
        return cmd_selftest()
    except UhdError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return e.exit_code
    except MemoryError as e:
        print(f"ERROR: out of memory: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    raise SystemExit(main())
