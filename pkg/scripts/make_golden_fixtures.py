#!/usr/bin/env python3
"""Regenerate the frozen test fixtures.

Trains the small frozen baseline model on the procedural corpus and
re-runs the segmentation golden report. Only run this deliberately: the
committed fixtures are the reviewed reference output, and regenerating
them changes what the golden tests compare against.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from corpus_gen import make_corpus

from chadpod.cli import main as cli_main
from chadpod.dataset_builder import BuildConfig, build_dataset
from chadpod.scorer import TrainConfig, save_model, train_baseline

FIXTURES = ROOT / "tests" / "fixtures"


def build_frozen_model() -> Path:
    graphs = make_corpus(n_games=15, seed=0xC0FFEE)
    split, _ = build_dataset(graphs, BuildConfig(seed=11))
    cfg = TrainConfig(
        learning_rate=0.05, epochs=3, l2=1e-3, seed=3,
        ngram_lo=3, ngram_hi=5, boundary_sentences=3, feature_dim=2**12,
    )
    model = train_baseline(split.train, split.dev, cfg)
    path = FIXTURES / "baseline_model.json"
    save_model(model, path)
    print(f"wrote {path}")
    return path


def build_golden_segment(model_path: Path) -> None:
    out = FIXTURES / "golden_segment"
    code = cli_main(
        [
            "segment",
            "--text", str(FIXTURES / "long_story.txt"),
            "--scorer", f"baseline:{model_path}",
            "--out", str(out),
            "--svg",
        ]
    )
    if code != 0:
        raise SystemExit(f"segment failed with exit code {code}")
    (out / "run_manifest.json").unlink()  # path-dependent, not part of the golden set
    print(f"wrote {out}")


if __name__ == "__main__":
    build_golden_segment(build_frozen_model())
