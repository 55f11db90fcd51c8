"""Command-line entry point.

Subcommands: ``import-graph``, ``build-dataset``, ``train``, ``eval``,
``grid-search``, ``segment``, ``adapt-tp``. Options can come from a JSON
config file (``--config``) with per-command sections; explicit flags win
over the file. Every run writes a ``run_manifest.json`` capturing the
tool version, the resolved configuration, the seed, and digests of the
inputs, which is enough to reproduce the outputs of the deterministic
commands bit for bit.

Exit codes: 0 success, 1 usage, 2 input/parse, 3 pipeline/validation,
4 scorer/protocol.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .dataset_builder import (
    BuildConfig,
    DatasetSplit,
    adapt_turning_points,
    build_dataset,
    read_dataset,
    read_examples,
    read_synopses,
    write_dataset,
    write_examples,
)
from .errors import (
    BuildError,
    ChadpodError,
    DatasetSchemaError,
    GraphFormatError,
    ScorerError,
)
from .evaluation import evaluate, grid_search_threshold
from .game_graph import IMPORTERS, parse_graph, serialize_graph
from .scorer import (
    BaselineScorer,
    ConstantScorer,
    ExternalScorer,
    OracleScorer,
    Scorer,
    ScoreRequest,
    TrainConfig,
    load_model,
    save_model,
    train_baseline,
)
from .segmenter import (
    SegmenterConfig,
    segment,
    write_plot_csv,
    write_report,
    write_svg,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_PIPELINE = 3
EXIT_SCORER = 4


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    input problems and use 1 for usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    tool_version: str
    subcommand: str
    config_snapshot: dict
    input_digests: dict[str, str]
    seed: int | None

    def write(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
            "config_snapshot": self.config_snapshot,
            "input_digests": self.input_digests,
            "seed": self.seed,
        }
        with (out_dir / "run_manifest.json").open("w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _digests(paths: Sequence[Path]) -> dict[str, str]:
    return {str(p): _digest(p) for p in sorted(paths)}


def _load_config_section(config_path: str | None, section: str) -> dict:
    if not config_path:
        return {}
    path = Path(config_path)
    if not path.exists():
        raise GraphFormatError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise GraphFormatError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise GraphFormatError(f"config file {path} must hold a JSON object")
    sect = obj.get(section, {})
    if not isinstance(sect, dict):
        raise GraphFormatError(f"config section {section!r} must be an object")
    return sect


def _resolve(section: dict, overrides: dict) -> dict:
    merged = dict(section)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


@dataclass
class _ParallelScorer:
    """Chunked fan-out for pure in-process scorers; preserves order."""

    inner: Scorer
    jobs: int

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        if self.jobs <= 1 or len(requests) < 2 * self.jobs:
            return self.inner.score_batch(requests)
        chunk = (len(requests) + self.jobs - 1) // self.jobs
        parts = [requests[i : i + chunk] for i in range(0, len(requests), chunk)]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            scored = list(pool.map(self.inner.score_batch, parts))
        return [p for part in scored for p in part]


def make_scorer(
    spec: str,
    jobs: int = 1,
    timeout: float = 30.0,
    oracle_examples=None,
) -> Scorer:
    """Build a scorer from a CLI spec: ``baseline:<model-file>``,
    ``external:<endpoint>``, ``constant:<p>``, or ``oracle`` (evaluation
    aid reading the gold labels)."""
    if spec.startswith("baseline:"):
        scorer: Scorer = BaselineScorer(load_model(spec[len("baseline:"):]))
    elif spec.startswith("external:"):
        return ExternalScorer(endpoint=spec[len("external:"):], timeout=timeout)
    elif spec.startswith("constant:"):
        try:
            p = float(spec[len("constant:"):])
        except ValueError as e:
            raise ScorerError(f"bad constant scorer spec {spec!r}") from e
        if not 0.0 <= p <= 1.0:
            raise ScorerError(f"constant probability {p} outside [0, 1]")
        scorer = ConstantScorer(p)
    elif spec == "oracle":
        if oracle_examples is None:
            raise ScorerError("the oracle scorer is only available for eval/grid-search")
        scorer = OracleScorer.for_examples(oracle_examples)
    else:
        raise ScorerError(
            f"unknown scorer spec {spec!r} (use baseline:, external:, constant:, oracle)"
        )
    return _ParallelScorer(scorer, jobs) if jobs > 1 else scorer


def _read_eval_examples(data: str, split_name: str):
    path = Path(data)
    if path.is_dir():
        ds = read_dataset(path)
        parts = ds.parts()
        if split_name not in parts:
            raise DatasetSchemaError(f"unknown split {split_name!r}")
        return parts[split_name], [path / f"{n}.jsonl" for n in parts]
    return read_examples(path), [path]


def _print_split_summary(split: DatasetSplit) -> None:
    counts = split.counts()
    header = f"{'split':<8}{'total':>7}{'branch':>8}{'no_branch':>11}{'positive':>10}{'hard_neg':>10}{'easy_neg':>10}"
    print(header)
    for name in ("train", "dev", "test"):
        c = counts[name]
        print(
            f"{name:<8}{c['total']:>7}{c['branch']:>8}{c['no_branch']:>11}"
            f"{c['positive']:>10}{c['hard_neg']:>10}{c['easy_neg']:>10}"
        )


# ---------------------------------------------------------------------------
# Subcommands.


def _cmd_import_graph(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    importer = IMPORTERS.get(args.format)
    if importer is None:
        raise GraphFormatError(
            f"unknown graph format {args.format!r}; known: {sorted(IMPORTERS)}"
        )
    inputs = [Path(p) for p in args.paths]
    failures: list[tuple[Path, str]] = []
    imported = 0
    for path in inputs:
        try:
            graph = importer(path.read_bytes(), path.stem)
            (out_dir / f"{graph.game_id}.json").write_text(
                serialize_graph(graph), encoding="utf-8"
            )
            imported += 1
        except (OSError, GraphFormatError) as e:
            failures.append((path, str(e)))
    RunManifest(
        tool_version=__version__,
        subcommand="import-graph",
        config_snapshot={"format": args.format},
        input_digests=_digests([p for p in inputs if p.exists()]),
        seed=None,
    ).write(out_dir)
    print(f"imported {imported} graph(s), {len(failures)} failed")
    for path, message in failures:
        print(f"  {path}: {message}", file=sys.stderr)
    return EXIT_INPUT if failures else EXIT_OK


def _cmd_build_dataset(args) -> int:
    graph_dir = Path(args.graphs)
    paths = sorted(graph_dir.glob("*.json"))
    if not paths:
        raise GraphFormatError(f"no graph files (*.json) in {graph_dir}")
    graphs = [parse_graph(p.read_bytes(), p.stem) for p in paths]

    section = _load_config_section(args.config, "build")
    ratios = None
    if args.ratios:
        try:
            ratios = tuple(float(x) for x in args.ratios.split(","))
        except ValueError as e:
            raise BuildError(f"bad --ratios {args.ratios!r}") from e
    resolved = _resolve(
        section,
        {
            "min_sentences": args.min_sentences,
            "min_chars": args.min_chars,
            "split_ratios": ratios,
            "seed": args.seed,
            "hard_easy_target": args.hard_easy_target,
        },
    )
    if "split_ratios" in resolved:
        resolved["split_ratios"] = tuple(resolved["split_ratios"])
    cfg = BuildConfig(**resolved)

    split, stats = build_dataset(graphs, cfg)
    out_dir = Path(args.out)
    write_dataset(split, out_dir, cfg=cfg, stats=stats)
    RunManifest(
        tool_version=__version__,
        subcommand="build-dataset",
        config_snapshot=asdict(cfg),
        input_digests=_digests(paths),
        seed=cfg.seed,
    ).write(out_dir)
    _print_split_summary(split)
    return EXIT_OK


def _cmd_train(args) -> int:
    data_dir = Path(args.data)
    ds = read_dataset(data_dir)
    section = _load_config_section(args.config, "train")
    resolved = _resolve(
        section,
        {
            "learning_rate": args.learning_rate,
            "epochs": args.epochs,
            "l2": args.l2,
            "seed": args.seed,
            "ngram_lo": args.ngram_lo,
            "ngram_hi": args.ngram_hi,
            "boundary_sentences": args.boundary_sentences,
            "feature_dim": args.feature_dim,
        },
    )
    cfg = TrainConfig(**resolved)
    history: list[dict] = []
    model = train_baseline(ds.train, ds.dev, cfg, history_out=history)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, out_dir / "model.json")
    with (out_dir / "train_log.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump({"config": asdict(cfg), "epochs": history}, fh, indent=2)
        fh.write("\n")
    RunManifest(
        tool_version=__version__,
        subcommand="train",
        config_snapshot=asdict(cfg),
        input_digests=_digests([data_dir / f"{n}.jsonl" for n in ("train", "dev", "test")]),
        seed=cfg.seed,
    ).write(out_dir)
    last = history[-1] if history else {}
    print(
        f"trained {cfg.epochs} epoch(s); final train loss "
        f"{last.get('train_loss', float('nan')):.4f}, dev accuracy {last.get('dev_accuracy')}"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    examples, input_paths = _read_eval_examples(args.data, args.split)
    scorer = make_scorer(
        args.scorer, jobs=args.jobs, timeout=args.scorer_timeout, oracle_examples=examples
    )
    report = evaluate(scorer, examples, threshold=args.threshold)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "eval_report.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.as_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    if args.csv:
        import csv as _csv

        with (out_dir / "eval_records.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "gold", "p", "pred"])
            for rec in report.records:
                writer.writerow([rec["id"], rec["gold"], repr(rec["p"]), rec["pred"]])
    RunManifest(
        tool_version=__version__,
        subcommand="eval",
        config_snapshot={"threshold": args.threshold, "scorer": args.scorer, "split": args.split},
        input_digests=_digests(input_paths),
        seed=None,
    ).write(out_dir)
    m = report.metrics
    print(
        f"accuracy {m.accuracy:.4f}  balanced_accuracy {m.balanced_accuracy:.4f}  f1 {m.f1:.4f}"
        f"  (n={report.matrix.total()})"
    )
    return EXIT_OK


def _cmd_grid_search(args) -> int:
    examples, input_paths = _read_eval_examples(args.data, args.split)
    try:
        grid = [float(x) for x in args.grid.split(",") if x.strip()]
    except ValueError as e:
        raise ChadpodError(f"bad --grid {args.grid!r}") from e
    scorer = make_scorer(
        args.scorer, jobs=args.jobs, timeout=args.scorer_timeout, oracle_examples=examples
    )
    best_threshold, metrics = grid_search_threshold(scorer, examples, grid)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "grid_report.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "grid": sorted(grid),
                "best_threshold": best_threshold,
                "metrics": metrics.as_dict(),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    RunManifest(
        tool_version=__version__,
        subcommand="grid-search",
        config_snapshot={"grid": sorted(grid), "scorer": args.scorer, "split": args.split},
        input_digests=_digests(input_paths),
        seed=None,
    ).write(out_dir)
    print(f"best threshold {best_threshold} with dev accuracy {metrics.accuracy:.4f}")
    return EXIT_OK


def _cmd_segment(args) -> int:
    text_path = Path(args.text)
    if not text_path.exists():
        raise GraphFormatError(f"text file not found: {text_path}")
    text = text_path.read_text("utf-8")
    section = _load_config_section(args.config, "segment")
    resolved = _resolve(
        section,
        {
            "window_sentences": args.window_sentences,
            "step": args.step,
            "kernel_width": args.kernel_width,
            "th1": args.th1,
            "th2": args.th2,
            "kernel": args.kernel,
        },
    )
    cfg = SegmenterConfig(**resolved)
    scorer = make_scorer(args.scorer, jobs=args.jobs, timeout=args.scorer_timeout)
    result = segment(text, scorer, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(result, cfg, out_dir / "segment_report.json")
    write_plot_csv(result, out_dir / "segment_plot.csv")
    if args.svg:
        write_svg(result, cfg, out_dir / "segment_chart.svg")
    RunManifest(
        tool_version=__version__,
        subcommand="segment",
        config_snapshot={**resolved, "scorer": args.scorer},
        input_digests=_digests([text_path]),
        seed=None,
    ).write(out_dir)
    print(f"{len(result.peaks)} peak(s), {len(result.segments)} segment(s)")
    return EXIT_OK


def _cmd_adapt_tp(args) -> int:
    synopses = read_synopses(Path(args.synopses))
    rng = random.Random(args.seed if args.seed is not None else 0)
    examples = adapt_turning_points(
        synopses, min_context=args.min_context, max_context=args.max_context, rng=rng
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_examples(examples, out_dir / "adapted.jsonl")
    RunManifest(
        tool_version=__version__,
        subcommand="adapt-tp",
        config_snapshot={"min_context": args.min_context, "max_context": args.max_context},
        input_digests=_digests([Path(args.synopses)]),
        seed=args.seed if args.seed is not None else 0,
    ).write(out_dir)
    n_pos = sum(1 for e in examples if e.label == "branch")
    print(f"adapted {len(examples)} example(s): {n_pos} positive, {len(examples) - n_pos} negative")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly.


def build_parser() -> _Parser:
    parser = _Parser(prog="chadpod", description=__doc__)
    parser.add_argument("--version", action="version", version=f"chadpod {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: _Parser):
        p.add_argument("--config", help="JSON config file with per-command sections")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("import-graph", help="normalize game files to the interchange format")
    p.add_argument("paths", nargs="+")
    p.add_argument("--format", default="interchange")
    common(p)
    p.set_defaults(func=_cmd_import_graph)

    p = sub.add_parser("build-dataset", help="build a balanced game-wise-split dataset")
    p.add_argument("--graphs", required=True, help="directory of interchange graph files")
    p.add_argument("--min-sentences", type=int, default=None)
    p.add_argument("--min-chars", type=int, default=None)
    p.add_argument("--ratios", default=None, help="train,dev,test fractions")
    p.add_argument("--hard-easy-target", type=float, default=None)
    common(p)
    p.set_defaults(func=_cmd_build_dataset)

    p = sub.add_parser("train", help="train the hashed-n-gram logistic baseline")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--l2", type=float, default=None)
    p.add_argument("--ngram-lo", type=int, default=None)
    p.add_argument("--ngram-hi", type=int, default=None)
    p.add_argument("--boundary-sentences", type=int, default=None)
    p.add_argument("--feature-dim", type=int, default=None)
    common(p)
    p.set_defaults(func=_cmd_train)

    def scorer_flags(p: _Parser):
        p.add_argument("--scorer", required=True)
        p.add_argument("--scorer-timeout", type=float, default=30.0)

    p = sub.add_parser("eval", help="evaluate a scorer on a dataset")
    p.add_argument("--data", required=True, help="dataset directory or JSONL file")
    p.add_argument("--split", default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--csv", action="store_true", help="also write per-example CSV")
    scorer_flags(p)
    common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("grid-search", help="search the decision threshold on a dev set")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="dev")
    p.add_argument("--grid", required=True, help="comma-separated thresholds in (0,1)")
    scorer_flags(p)
    common(p)
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("segment", help="segment a long text at detected branching points")
    p.add_argument("--text", required=True, help="UTF-8 text file")
    p.add_argument("--window-sentences", type=int, default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--kernel-width", type=int, default=None)
    p.add_argument("--th1", type=float, default=None)
    p.add_argument("--th2", type=float, default=None)
    p.add_argument("--kernel", choices=["triangular", "uniform"], default=None)
    p.add_argument("--svg", action="store_true", help="also write an SVG chart")
    scorer_flags(p)
    common(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("adapt-tp", help="adapt turning-point synopses to labeled examples")
    p.add_argument("--synopses", required=True, help="synopsis JSONL file")
    p.add_argument("--min-context", type=int, default=3)
    p.add_argument("--max-context", type=int, default=10)
    common(p)
    p.set_defaults(func=_cmd_adapt_tp)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GraphFormatError, DatasetSchemaError) as e:
        print(f"chadpod: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ScorerError as e:
        print(f"chadpod: scorer error: {e}", file=sys.stderr)
        return EXIT_SCORER
    except (BuildError, ChadpodError) as e:
        print(f"chadpod: pipeline error: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    except FileNotFoundError as e:
        print(f"chadpod: input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
