"""Build balanced, leakage-free decision-point datasets from triplets.

Pipeline order is fixed and documented: deduplicate triplets, apply the
text filters, label by source out-degree, generate easy negatives from
single-node splits, balance the classes, then assign whole games to
train/dev/test. All randomness flows through one seeded generator, so a
build is byte-identical given the same inputs and config.

Texts stored in examples are whitespace-normalized (single spaces); the
filters and all downstream consumers operate on that normal form.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BuildError, DatasetSchemaError
from .game_graph import GameGraph, StoryNode, Triplet, extract_triplets
from .text import (
    SentenceSeq,
    has_unusual_chars,
    is_dialogue,
    normalize_text,
    split_sentences,
)

LABEL_BRANCH = "branch"
LABEL_NO_BRANCH = "no_branch"
LABELS = (LABEL_BRANCH, LABEL_NO_BRANCH)

KIND_POSITIVE = "positive"
KIND_EASY_NEG = "easy_neg"
KIND_HARD_NEG = "hard_neg"
KINDS = (KIND_POSITIVE, KIND_EASY_NEG, KIND_HARD_NEG)

SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class BuildConfig:
    min_sentences: int = 4
    min_chars: int = 50
    split_ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0
    hard_easy_target: float = 0.5

    def __post_init__(self):
        if self.min_sentences < 1:
            raise BuildError("min_sentences must be >= 1")
        if self.min_chars < 1:
            raise BuildError("min_chars must be >= 1")
        if len(self.split_ratios) != 3 or any(r <= 0 for r in self.split_ratios):
            raise BuildError("split_ratios must be three positive fractions")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise BuildError("split_ratios must sum to 1")
        if not 0.0 <= self.hard_easy_target <= 1.0:
            raise BuildError("hard_easy_target must be in [0, 1]")


@dataclass(frozen=True)
class LabeledExample:
    id: str
    game_id: str
    prefix: str
    postfix: str
    label: str
    kind: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise DatasetSchemaError(f"bad label {self.label!r}")
        if self.kind not in KINDS:
            raise DatasetSchemaError(f"bad kind {self.kind!r}")
        if (self.kind == KIND_POSITIVE) != (self.label == LABEL_BRANCH):
            raise DatasetSchemaError(
                f"kind {self.kind!r} inconsistent with label {self.label!r}"
            )


@dataclass
class DatasetSplit:
    train: list[LabeledExample] = field(default_factory=list)
    dev: list[LabeledExample] = field(default_factory=list)
    test: list[LabeledExample] = field(default_factory=list)

    def parts(self) -> dict[str, list[LabeledExample]]:
        return {"train": self.train, "dev": self.dev, "test": self.test}

    def all_examples(self) -> list[LabeledExample]:
        return self.train + self.dev + self.test

    def counts(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for name, examples in self.parts().items():
            c = {"total": len(examples)}
            for label in LABELS:
                c[label] = sum(1 for e in examples if e.label == label)
            for kind in KINDS:
                c[kind] = sum(1 for e in examples if e.kind == kind)
            out[name] = c
        return out


@dataclass(frozen=True)
class TurningPointSynopsis:
    synopsis_id: str
    sentences: SentenceSeq
    tp_boundaries: frozenset[int]

    def __post_init__(self):
        n = len(self.sentences)
        for b in self.tp_boundaries:
            if not 1 <= b <= n - 1:
                raise DatasetSchemaError(
                    f"synopsis {self.synopsis_id!r}: boundary {b} outside 1..{n - 1}"
                )


def _example_id(kind: str, game_id: str, prefix: str, postfix: str, disambiguator: str) -> str:
    payload = json.dumps([kind, game_id, prefix, postfix, disambiguator], ensure_ascii=False)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]


def passes_side_filters(side_text: str, cfg: BuildConfig) -> bool:
    """The per-side retention predicate: long enough in sentences and
    characters, not dialogue, no unusual characters."""
    normalized = normalize_text(side_text)
    if len(normalized) < cfg.min_chars:
        return False
    if len(split_sentences(normalized)) < cfg.min_sentences:
        return False
    if is_dialogue(normalized):
        return False
    if has_unusual_chars(normalized):
        return False
    return True


def filter_triplets(triplets: Sequence[Triplet], cfg: BuildConfig) -> list[Triplet]:
    """Drop exact duplicates (first occurrence wins, order preserved) and
    every triplet whose prefix or postfix fails the side filters.

    Duplicate detection compares whitespace-normalized
    (prefix, action, postfix) tuples.
    """
    seen: set[tuple[str, str, str]] = set()
    kept: list[Triplet] = []
    for t in triplets:
        key = (normalize_text(t.prefix), normalize_text(t.action), normalize_text(t.postfix))
        if key in seen:
            continue
        seen.add(key)
        if passes_side_filters(t.prefix, cfg) and passes_side_filters(t.postfix, cfg):
            kept.append(t)
    return kept


def label_examples(
    triplets: Sequence[Triplet],
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Split filtered triplets into positives (source out-degree > 1) and
    hard negatives (out-degree exactly 1).

    The action text is deliberately excluded from both segments: the
    classifier never sees the explicit choice.
    """
    positives: list[LabeledExample] = []
    hard: list[LabeledExample] = []
    for t in triplets:
        prefix = normalize_text(t.prefix)
        postfix = normalize_text(t.postfix)
        if t.source_out_degree > 1:
            kind, label, bucket = KIND_POSITIVE, LABEL_BRANCH, positives
        else:
            kind, label, bucket = KIND_HARD_NEG, LABEL_NO_BRANCH, hard
        bucket.append(
            LabeledExample(
                id=_example_id(kind, t.game_id, prefix, postfix, normalize_text(t.action)),
                game_id=t.game_id,
                prefix=prefix,
                postfix=postfix,
                label=label,
                kind=kind,
            )
        )
    return positives, hard


def _eligible_node_splits(
    nodes: Sequence[tuple[str, StoryNode]], cfg: BuildConfig
) -> list[tuple[str, str, int, str, str]]:
    """All (game_id, node_id, boundary, prefix, postfix) splits where both
    sides pass the side filters. Deduplicated on the resulting texts."""
    pool: list[tuple[str, str, int, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    for game_id, node in nodes:
        seq = split_sentences(node.text)
        n = len(seq)
        for b in range(cfg.min_sentences, n - cfg.min_sentences + 1):
            prefix = seq.join_range(0, b)
            postfix = seq.join_range(b, n)
            if not (passes_side_filters(prefix, cfg) and passes_side_filters(postfix, cfg)):
                continue
            key = (game_id, prefix, postfix)
            if key in seen:
                continue
            seen.add(key)
            pool.append((game_id, node.id, b, prefix, postfix))
    pool.sort(key=lambda item: (item[0], item[1], item[2]))
    return pool


def make_easy_negatives(
    nodes: Sequence[tuple[str, StoryNode]],
    cfg: BuildConfig,
    n: int,
    rng: random.Random,
) -> list[LabeledExample]:
    """Sample ``n`` single-node splits uniformly (without replacement)
    from all eligible (node, boundary) pairs.

    ``nodes`` pairs each story node with its game id so the resulting
    examples stay attributable for game-wise splitting.
    """
    if n < 0:
        raise BuildError("n must be >= 0")
    if n == 0:
        return []
    pool = _eligible_node_splits(nodes, cfg)
    if len(pool) < n:
        raise BuildError(
            f"cannot make {n} easy negatives: only {len(pool)} eligible node splits"
        )
    chosen_idx = sorted(rng.sample(range(len(pool)), n))
    out: list[LabeledExample] = []
    for i in chosen_idx:
        game_id, node_id, boundary, prefix, postfix = pool[i]
        out.append(
            LabeledExample(
                id=_example_id(KIND_EASY_NEG, game_id, prefix, postfix, f"{node_id}@{boundary}"),
                game_id=game_id,
                prefix=prefix,
                postfix=postfix,
                label=LABEL_NO_BRANCH,
                kind=KIND_EASY_NEG,
            )
        )
    return out


def hard_negative_quota(n_positives: int, cfg: BuildConfig) -> int:
    """How many negatives should be hard, before availability caps it."""
    return round(cfg.hard_easy_target * n_positives)


def balance_classes(
    positives: Sequence[LabeledExample],
    hard_negs: Sequence[LabeledExample],
    easy_pool: Sequence[LabeledExample],
    cfg: BuildConfig,
    rng: random.Random,
) -> list[LabeledExample]:
    """Assemble a class-balanced dataset: all positives, then hard
    negatives up to the configured share (seeded subsample when over),
    then easy negatives filling the remainder."""
    n_pos = len(positives)
    quota = hard_negative_quota(n_pos, cfg)
    if len(hard_negs) > quota:
        idx = sorted(rng.sample(range(len(hard_negs)), quota))
        hard_used = [hard_negs[i] for i in idx]
    else:
        hard_used = list(hard_negs)
    easy_needed = n_pos - len(hard_used)
    if len(easy_pool) < easy_needed:
        raise BuildError(
            f"cannot balance classes: need {easy_needed} easy negatives, "
            f"pool has {len(easy_pool)}"
        )
    if len(easy_pool) > easy_needed:
        idx = sorted(rng.sample(range(len(easy_pool)), easy_needed))
        easy_used = [easy_pool[i] for i in idx]
    else:
        easy_used = list(easy_pool)
    return list(positives) + hard_used + easy_used


def split_by_game(
    examples: Sequence[LabeledExample],
    cfg: BuildConfig,
    rng: random.Random,
) -> DatasetSplit:
    """Assign whole games to train/dev/test greedily, largest game first,
    so per-split example counts approach the configured ratios.

    Each game goes to the split with the largest remaining deficit
    (target minus assigned); ties fall to train, then dev, then test.
    Equal-sized games are ordered by a seeded tie-break. When the number
    of unassigned games drops to the number of still-empty splits, the
    remaining games are forced into the empty splits so no split ends up
    with nothing in it.
    """
    sizes: dict[str, int] = {}
    order_seen: dict[str, int] = {}
    for e in examples:
        sizes[e.game_id] = sizes.get(e.game_id, 0) + 1
        order_seen.setdefault(e.game_id, len(order_seen))
    if len(sizes) < 3:
        raise BuildError(f"need at least 3 distinct games, got {len(sizes)}")

    tiebreak = {g: rng.random() for g in sorted(sizes)}
    ordered = sorted(sizes, key=lambda g: (-sizes[g], tiebreak[g]))

    total = len(examples)
    targets = [r * total for r in cfg.split_ratios]
    assigned = [0, 0, 0]
    games_in: list[int] = [0, 0, 0]
    assignment: dict[str, int] = {}
    for pos, game in enumerate(ordered):
        remaining = len(ordered) - pos
        empties = [i for i in range(3) if games_in[i] == 0]
        if empties and remaining <= len(empties):
            dest = max(empties, key=lambda i: (targets[i], -i))
        else:
            deficits = [targets[i] - assigned[i] for i in range(3)]
            dest = max(range(3), key=lambda i: (deficits[i], -i))
        assignment[game] = dest
        assigned[dest] += sizes[game]
        games_in[dest] += 1

    split = DatasetSplit()
    buckets = (split.train, split.dev, split.test)
    for e in examples:
        buckets[assignment[e.game_id]].append(e)
    return split


def adapt_turning_points(
    synopses: Sequence[TurningPointSynopsis],
    min_context: int = 3,
    max_context: int = 10,
    rng: random.Random | None = None,
) -> list[LabeledExample]:
    """Turn turning-point-annotated synopses into labeled examples.

    Every annotated boundary with at least ``min_context`` sentences on
    both sides becomes a positive whose sides carry up to ``max_context``
    sentences. Negatives are sampled from the remaining eligible
    boundaries of the same synopsis, one per emitted positive when enough
    boundaries are free; no two examples from one synopsis share a
    boundary.
    """
    rng = rng if rng is not None else random.Random(0)
    out: list[LabeledExample] = []
    for syn in synopses:
        n = len(syn.sentences)
        eligible = [b for b in range(1, n) if b >= min_context and n - b >= min_context]
        pos_bounds = [b for b in eligible if b in syn.tp_boundaries]
        neg_candidates = [b for b in eligible if b not in syn.tp_boundaries]
        k = min(len(pos_bounds), len(neg_candidates))
        neg_idx = sorted(rng.sample(range(len(neg_candidates)), k)) if k else []
        neg_bounds = [neg_candidates[i] for i in neg_idx]

        for b, label, kind in (
            [(b, LABEL_BRANCH, KIND_POSITIVE) for b in pos_bounds]
            + [(b, LABEL_NO_BRANCH, KIND_EASY_NEG) for b in neg_bounds]
        ):
            prefix = syn.sentences.join_range(max(0, b - max_context), b)
            postfix = syn.sentences.join_range(b, min(n, b + max_context))
            out.append(
                LabeledExample(
                    id=_example_id(kind, syn.synopsis_id, prefix, postfix, f"tp@{b}"),
                    game_id=syn.synopsis_id,
                    prefix=prefix,
                    postfix=postfix,
                    label=label,
                    kind=kind,
                )
            )
    return out


def build_dataset(
    graphs: Sequence[GameGraph], cfg: BuildConfig
) -> tuple[DatasetSplit, dict]:
    """Run the full pipeline over parsed graphs and return the split plus
    a stats dict suitable for the manifest and the CLI summary."""
    rng = random.Random(cfg.seed)
    triplets: list[Triplet] = []
    node_pool: list[tuple[str, StoryNode]] = []
    for g in graphs:
        triplets.extend(extract_triplets(g))
        node_pool.extend((g.game_id, node) for node in g.nodes)

    filtered = filter_triplets(triplets, cfg)
    positives, hard = label_examples(filtered)
    if not positives:
        raise BuildError("no positive examples survive filtering")

    quota = hard_negative_quota(len(positives), cfg)
    easy_needed = len(positives) - min(len(hard), quota)
    easy = make_easy_negatives(node_pool, cfg, easy_needed, rng)
    balanced = balance_classes(positives, hard, easy, cfg, rng)
    split = split_by_game(balanced, cfg, rng)

    stats = {
        "triplets_extracted": len(triplets),
        "triplets_after_filters": len(filtered),
        "positives": len(positives),
        "hard_negatives_available": len(hard),
        "hard_negatives_used": min(len(hard), quota),
        "easy_negatives_used": easy_needed,
        "counts": split.counts(),
    }
    return split, stats


# ---------------------------------------------------------------------------
# Serialization: JSON-lines files with a fixed field order, one example per
# line, plus a manifest carrying config, seed, and counts.

_EXAMPLE_FIELDS = ("id", "game", "prefix", "postfix", "label", "kind")


def example_to_record(e: LabeledExample) -> dict:
    return {
        "id": e.id,
        "game": e.game_id,
        "prefix": e.prefix,
        "postfix": e.postfix,
        "label": e.label,
        "kind": e.kind,
    }


def record_to_example(rec: dict, where: str = "") -> LabeledExample:
    loc = f"{where}: " if where else ""
    if not isinstance(rec, dict):
        raise DatasetSchemaError(f"{loc}example record must be an object")
    for name in _EXAMPLE_FIELDS:
        if name not in rec:
            raise DatasetSchemaError(f"{loc}missing field {name!r}")
        if not isinstance(rec[name], str):
            raise DatasetSchemaError(f"{loc}field {name!r} must be a string")
    try:
        return LabeledExample(
            id=rec["id"],
            game_id=rec["game"],
            prefix=rec["prefix"],
            postfix=rec["postfix"],
            label=rec["label"],
            kind=rec["kind"],
        )
    except DatasetSchemaError as e:
        raise DatasetSchemaError(f"{loc}{e}") from e


def write_examples(examples: Iterable[LabeledExample], path: Path | str) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for e in examples:
            fh.write(json.dumps(example_to_record(e), ensure_ascii=False))
            fh.write("\n")


def read_examples(path: Path | str) -> list[LabeledExample]:
    path = Path(path)
    out: list[LabeledExample] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetSchemaError(f"{path.name}:{lineno}: invalid JSON: {e}") from e
            out.append(record_to_example(rec, where=f"{path.name}:{lineno}"))
    return out


def write_dataset(
    split: DatasetSplit,
    out_dir: Path | str,
    cfg: BuildConfig | None = None,
    stats: dict | None = None,
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, examples in split.parts().items():
        write_examples(examples, out_dir / f"{name}.jsonl")
    manifest = {
        "config": asdict(cfg) if cfg is not None else None,
        "seed": cfg.seed if cfg is not None else None,
        "counts": split.counts(),
    }
    if stats:
        manifest["stats"] = stats
    with (out_dir / "manifest.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def read_dataset(in_dir: Path | str) -> DatasetSplit:
    in_dir = Path(in_dir)
    split = DatasetSplit()
    for name, bucket in (("train", split.train), ("dev", split.dev), ("test", split.test)):
        path = in_dir / f"{name}.jsonl"
        if not path.exists():
            raise DatasetSchemaError(f"missing split file {path}")
        bucket.extend(read_examples(path))
    return split


def read_synopses(path: Path | str) -> list[TurningPointSynopsis]:
    """Read turning-point-annotated synopses from JSON lines of the form
    ``{"synopsis_id": str, "sentences": [...], "tp_boundaries": [...]}``."""
    path = Path(path)
    out: list[TurningPointSynopsis] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetSchemaError(f"{where}: invalid JSON: {e}") from e
            if not isinstance(rec, dict):
                raise DatasetSchemaError(f"{where}: record must be an object")
            sid = rec.get("synopsis_id")
            sentences = rec.get("sentences")
            bounds = rec.get("tp_boundaries")
            if not isinstance(sid, str) or not sid:
                raise DatasetSchemaError(f"{where}: synopsis_id must be a non-empty string")
            if not isinstance(sentences, list) or not all(
                isinstance(s, str) and s for s in sentences
            ):
                raise DatasetSchemaError(f"{where}: sentences must be non-empty strings")
            if not isinstance(bounds, list) or not all(isinstance(b, int) for b in bounds):
                raise DatasetSchemaError(f"{where}: tp_boundaries must be integers")
            try:
                syn = TurningPointSynopsis(
                    synopsis_id=sid,
                    sentences=SentenceSeq(tuple(normalize_text(s) for s in sentences)),
                    tp_boundaries=frozenset(bounds),
                )
            except DatasetSchemaError as e:
                raise DatasetSchemaError(f"{where}: {e}") from e
            out.append(syn)
    return out
