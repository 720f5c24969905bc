"""Command-line interface: single-pair segmentation, manifest evaluation,
and the full strategy comparison matrix.

Exit codes are a stable scripting contract: 0 success, 1 runtime failure,
2 usage error. Every run echoes its fully resolved configuration as one
``run-config:`` JSON line so any output can be reproduced from the log.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from .backends import HttpSegmenter, MockSegmenter, SegmenterBackend
from .ensemble import EnsembleConfig, ensemble_bundles
from .evaluation import (
    evaluate_manifest,
    format_matrix,
    mock_backend_factory,
    read_manifest,
    write_report_csv,
    write_summary_csv,
)
from .overlay import render_overlay
from .pipeline import Aggregator, PredictionConfig, predict_scene
from .prompts import PromptConfig, PromptStrategy
from .raster import load_image, load_mask, save_image, save_mask

__all__ = ["main", "entrypoint", "RunConfig"]

ENDPOINT_ENV = "STITCHSEG_ENDPOINT"

_STRATEGY_ALIASES = {str(s.ordinal): s for s in PromptStrategy}
_STRATEGY_ALIASES.update({s.value: s for s in PromptStrategy})
_STRATEGY_CHOICES = ", ".join(
    f"{s.ordinal}|{s.value}" for s in PromptStrategy
)


class UsageError(Exception):
    """Bad invocation detected after argument parsing; exits with code 2."""


def parse_strategy(token: str) -> PromptStrategy:
    try:
        return _STRATEGY_ALIASES[token.strip().lower()]
    except KeyError:
        raise UsageError(
            f"unknown strategy {token!r}; choose from {_STRATEGY_CHOICES}"
        ) from None


def parse_aggregator(token: str) -> Aggregator:
    try:
        return Aggregator(token.strip().lower())
    except ValueError:
        raise UsageError(f"unknown aggregator {token!r}; choose best or cwmv") from None


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run options; serializable to/from a JSON config file."""

    strategy: str = "key-and-query"
    strategies: str = ""  # comma-separated; empty = all (evaluate/compare)
    aggregator: str = "cwmv"
    aggregators: str = ""  # comma-separated; empty = both (evaluate/compare)
    runs: int = 16
    seed: int = 0
    n_pos_key: int = 3
    n_neg_key: int = 3
    n_pos_query: int = 1
    m: float = 4.0
    close_side: int = 5
    close_after_split: bool = False
    backend: str = "mock"
    endpoint: str = ""
    timeout: float = 30.0
    jobs: int = 1
    allow_width_mismatch: bool = False
    pooled: bool = False

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(cls.__dataclass_fields__)


def _resolve(args: argparse.Namespace) -> RunConfig:
    """defaults < config file < explicit flags."""
    merged = asdict(RunConfig())
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(loaded) - set(merged)
        if unknown:
            raise UsageError(
                f"unknown keys in config file: {', '.join(sorted(unknown))}"
            )
        merged.update(loaded)
    for key in merged:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return RunConfig(**merged)


def _prediction_config(
    run: RunConfig, strategies: tuple[PromptStrategy, ...], aggregators: tuple[Aggregator, ...]
) -> PredictionConfig:
    try:
        return PredictionConfig(
            strategies=strategies,
            aggregators=aggregators,
            runs=run.runs,
            master_seed=run.seed,
            prompts=PromptConfig(
                n_pos_key=run.n_pos_key,
                n_neg_key=run.n_neg_key,
                n_pos_query=run.n_pos_query,
            ),
            cwmv_m=run.m,
            close_side=run.close_side,
            close_after_split=run.close_after_split,
            jobs=run.jobs,
            allow_width_mismatch=run.allow_width_mismatch,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _echo_config(run: RunConfig, extra: dict[str, object]) -> None:
    payload = {**asdict(run), **extra}
    print("run-config: " + json.dumps(payload, sort_keys=True))


def _http_endpoint(run: RunConfig) -> str:
    endpoint = run.endpoint or os.environ.get(ENDPOINT_ENV, "")
    if not endpoint:
        raise UsageError(
            f"http backend requires --endpoint or the {ENDPOINT_ENV} environment variable"
        )
    return endpoint


def _build_backend(run: RunConfig, args: argparse.Namespace) -> SegmenterBackend:
    if run.backend == "mock":
        truth_path = getattr(args, "mock_truth", None)
        if not truth_path:
            raise UsageError("--backend mock requires --mock-truth (stitched-frame mask)")
        return MockSegmenter(load_mask(truth_path))
    if run.backend == "http":
        return HttpSegmenter(_http_endpoint(run), timeout=run.timeout)
    raise UsageError(f"unknown backend {run.backend!r}; choose mock or http")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_segment(args: argparse.Namespace) -> int:
    run = _resolve(args)
    strategy = parse_strategy(run.strategy)
    aggregator = parse_aggregator(run.aggregator)
    config = _prediction_config(run, (strategy,), (aggregator,))
    backend = _build_backend(run, args)

    key_image = load_image(args.key)
    key_mask = load_mask(args.key_mask)
    query_image = load_image(args.query)
    _echo_config(
        run,
        {
            "command": "segment",
            "key": str(args.key),
            "key_mask": str(args.key_mask),
            "query": str(args.query),
            "out": str(args.out),
        },
    )
    prediction = predict_scene(backend, key_image, key_mask, query_image, config)
    cell = prediction.cells[(strategy, aggregator)]
    save_mask(cell.query_processed, args.out)
    if args.overlay:
        bundles = ensemble_bundles(
            key_mask,
            prediction.layout,
            EnsembleConfig(
                runs=run.runs,
                master_seed=run.seed,
                strategy=strategy,
                prompt_config=config.prompts,
            ),
        )
        save_image(
            render_overlay(prediction.stitched, cell.stitched_processed, bundles),
            args.overlay,
        )
    print(f"wrote {args.out}")
    return 0


def _selected_strategies(run: RunConfig) -> tuple[PromptStrategy, ...]:
    if not run.strategies:
        return tuple(PromptStrategy)
    picked = tuple(parse_strategy(tok) for tok in run.strategies.split(","))
    if len(set(picked)) != len(picked):
        raise UsageError("duplicate strategies selected")
    return picked


def _selected_aggregators(run: RunConfig) -> tuple[Aggregator, ...]:
    if not run.aggregators:
        return (Aggregator.BEST, Aggregator.CWMV)
    picked = tuple(parse_aggregator(tok) for tok in run.aggregators.split(","))
    if len(set(picked)) != len(picked):
        raise UsageError("duplicate aggregators selected")
    return picked


def _run_matrix(args: argparse.Namespace, *, compare_all: bool) -> int:
    run = _resolve(args)
    if compare_all:
        strategies: tuple[PromptStrategy, ...] = tuple(PromptStrategy)
        aggregators: tuple[Aggregator, ...] = (Aggregator.BEST, Aggregator.CWMV)
    else:
        strategies = _selected_strategies(run)
        aggregators = _selected_aggregators(run)
    config = _prediction_config(run, strategies, aggregators)

    records = read_manifest(args.manifest)
    shared_key = None
    if bool(args.shared_key) != bool(args.shared_key_mask):
        raise UsageError("--shared-key and --shared-key-mask must be given together")
    if args.shared_key:
        shared_key = (Path(args.shared_key), Path(args.shared_key_mask))

    if run.backend == "mock":
        backend: SegmenterBackend | object = mock_backend_factory
        backend_label = "mock"
    else:
        endpoint = _http_endpoint(run)
        backend = HttpSegmenter(endpoint, timeout=run.timeout)
        backend_label = f"http:{endpoint}"

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(
        run,
        {
            "command": "compare" if compare_all else "evaluate",
            "manifest": str(args.manifest),
            "out_dir": str(out_dir),
            "shared_key": str(shared_key[0]) if shared_key else "",
        },
    )
    report = evaluate_manifest(
        backend,  # type: ignore[arg-type]
        records,
        config,
        shared_key=shared_key,
        pooled=run.pooled,
        backend_label=backend_label,
    )
    write_report_csv(report, out_dir / "report.csv")
    write_summary_csv(report, out_dir / "summary.csv")
    echo = {**asdict(run), "backend_label": backend_label}
    (out_dir / "run_config.json").write_text(json.dumps(echo, sort_keys=True, indent=2))
    print(format_matrix(report))
    print(f"scenes: {report.n_scenes} ok, {report.n_failures} failed")
    if report.failures:
        for scene_id, message in report.failures.items():
            print(f"scene {scene_id} failed: {message}", file=sys.stderr)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    return _run_matrix(args, compare_all=False)


def cmd_compare(args: argparse.Namespace) -> int:
    return _run_matrix(args, compare_all=True)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags win over file values)")
    parser.add_argument("--runs", type=int, help="ensemble size K (default 16)")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--n-pos-key", dest="n_pos_key", type=int)
    parser.add_argument("--n-neg-key", dest="n_neg_key", type=int)
    parser.add_argument("--n-pos-query", dest="n_pos_query", type=int)
    parser.add_argument("--m", type=float, help="voting threshold divisor (default 4)")
    parser.add_argument(
        "--close-side", dest="close_side", type=int, help="closing window side, odd (default 5)"
    )
    parser.add_argument(
        "--close-after-split",
        dest="close_after_split",
        action="store_const",
        const=True,
        default=None,
        help="run closing on each half separately instead of the stitched mask",
    )
    parser.add_argument("--backend", choices=["mock", "http"])
    parser.add_argument("--endpoint", help=f"segmenter URL (or set {ENDPOINT_ENV})")
    parser.add_argument("--timeout", type=float, help="http timeout in seconds")
    parser.add_argument("--jobs", type=int, help="max in-flight backend requests")
    parser.add_argument(
        "--allow-width-mismatch",
        dest="allow_width_mismatch",
        action="store_const",
        const=True,
        default=None,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stitchseg",
        description="One-shot segmentation by stitching a labeled key image to a query image",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment one query image")
    seg.add_argument("--key", required=True, help="key image PNG")
    seg.add_argument("--key-mask", dest="key_mask", required=True, help="key mask PNG")
    seg.add_argument("--query", required=True, help="query image PNG")
    seg.add_argument("--out", required=True, help="output query-half mask PNG")
    seg.add_argument("--overlay", help="also write a stitched overlay PNG")
    seg.add_argument("--strategy", help=f"prompt strategy: {_STRATEGY_CHOICES}")
    seg.add_argument("--aggregator", help="best or cwmv")
    seg.add_argument("--mock-truth", dest="mock_truth", help="stitched-frame truth for --backend mock")
    _add_common(seg)
    seg.set_defaults(func=cmd_segment)

    for name, func, help_text in (
        ("evaluate", cmd_evaluate, "evaluate selected cells over a manifest"),
        ("compare", cmd_compare, "run all strategies x aggregators x variants"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--manifest", required=True, help="scene manifest CSV")
        cmd.add_argument("--out-dir", dest="out_dir", required=True)
        cmd.add_argument("--shared-key", dest="shared_key", help="key image used for every scene")
        cmd.add_argument("--shared-key-mask", dest="shared_key_mask")
        cmd.add_argument(
            "--pooled",
            action="store_const",
            const=True,
            default=None,
            help="additionally report pixel-pooled IoU across scenes",
        )
        if name == "evaluate":
            cmd.add_argument("--strategies", help="comma-separated subset (default: all)")
            cmd.add_argument("--aggregators", help="comma-separated subset (default: both)")
        _add_common(cmd)
        cmd.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
