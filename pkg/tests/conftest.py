from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for corpus_gen

from chadpod.dataset_builder import BuildConfig, build_dataset
from chadpod.game_graph import parse_graph

FIXTURES = Path(__file__).parent / "fixtures"
GAMES_DIR = FIXTURES / "games"


def stub_endpoint(*args: str) -> str:
    """Endpoint spec for the bundled stub scorer with extra arguments."""
    extra = " ".join(args)
    return f"cmd:{sys.executable} -m chadpod.stub_scorer {extra}".rstrip()


@pytest.fixture(scope="session")
def fixture_graphs():
    return [parse_graph(p.read_bytes(), p.stem) for p in sorted(GAMES_DIR.glob("*.json"))]


@pytest.fixture(scope="session")
def fixture_split(fixture_graphs):
    split, stats = build_dataset(fixture_graphs, BuildConfig(seed=42))
    return split, stats


@pytest.fixture(scope="session")
def corpus_split():
    from corpus_gen import make_corpus

    graphs = make_corpus(n_games=15, seed=0xC0FFEE)
    split, stats = build_dataset(graphs, BuildConfig(seed=11))
    return split, stats
