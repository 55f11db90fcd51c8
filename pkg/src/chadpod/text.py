"""Deterministic text heuristics: sentence splitting, dialogue detection,
unusual-character detection.

The sentence splitter is rule-based on purpose: it splits at terminal
punctuation (``. ! ?`` plus any closing quotes that follow) and refuses to
split after entries in the shipped abbreviation list or inside ellipses
(runs of two or more dots, or the single-character ellipsis). All rules
operate on whitespace-normalized text, so joining the resulting sentences
with single spaces reproduces the normalized input exactly.

The abbreviation list and the character allow-list live in
``chadpod/data/`` as plain-text files, one entry per line, so the filter
behavior is reproducible bit for bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

_WS_RE = re.compile(r"\s+")

# Terminal punctuation run, optional closing quotes/brackets, then the
# space a sentence boundary would sit on.
_BOUNDARY_RE = re.compile(r"([.!?]+)([\"'”’»)\]]*) ")

_OPENING_CHARS = "\"'‘“«([{"

_QUOTE_INITIAL = frozenset(
    "\"'"
    "‘’‚‛"  # single curly quotes
    "“”„‟"  # double curly quotes
    "«»‹›"  # guillemets
)


def normalize_text(text: str) -> str:
    """Collapse all whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class SentenceSeq:
    """An ordered sequence of sentences.

    Boundary ``i`` (1-based) sits between sentences ``i`` and ``i + 1``,
    so a sequence of ``n`` sentences has boundaries ``1 .. n - 1``.
    """

    sentences: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    def boundaries(self) -> range:
        return range(1, len(self.sentences))

    def join_range(self, start: int, stop: int) -> str:
        """Text of sentences ``start .. stop - 1`` (0-based slice)."""
        return " ".join(self.sentences[start:stop])

    def text(self) -> str:
        return " ".join(self.sentences)


@lru_cache(maxsize=1)
def abbreviations() -> tuple[str, ...]:
    """Entries of the shipped abbreviation list, longest first."""
    raw = resources.files("chadpod.data").joinpath("abbreviations.txt").read_text("utf-8")
    entries = [ln for ln in (l.strip() for l in raw.splitlines()) if ln and not ln.startswith("#")]
    return tuple(sorted(entries, key=len, reverse=True))


def _parse_allowed_line(line: str) -> range:
    if ".." in line:
        lo, hi = line.split("..")
        return range(int(lo.removeprefix("U+"), 16), int(hi.removeprefix("U+"), 16) + 1)
    cp = int(line.removeprefix("U+"), 16)
    return range(cp, cp + 1)


@lru_cache(maxsize=1)
def allowed_chars() -> frozenset[str]:
    """Characters admitted by the unusual-character filter."""
    raw = resources.files("chadpod.data").joinpath("allowed_chars.txt").read_text("utf-8")
    chars: set[str] = set()
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        chars.update(chr(cp) for cp in _parse_allowed_line(line))
    return frozenset(chars)


def _is_abbreviation(normalized: str, dot_end: int) -> bool:
    """True when the token ending at ``dot_end`` matches the list.

    A match must start at the beginning of a word: start of text, after a
    space, or after an opening quote/bracket.
    """
    head = normalized[:dot_end]
    for entry in abbreviations():
        if not head.endswith(entry):
            continue
        start = len(head) - len(entry)
        if start == 0:
            return True
        prev = head[start - 1]
        if prev == " " or prev in _OPENING_CHARS:
            return True
    return False


def split_sentences(text: str) -> SentenceSeq:
    """Split text into sentences. Empty or whitespace input yields an
    empty sequence; input with no admissible boundary yields one sentence.
    """
    normalized = normalize_text(text)
    if not normalized:
        return SentenceSeq(())

    sentences: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(normalized):
        punct = m.group(1)
        if ".." in punct:
            continue  # ellipsis, never a boundary
        if punct == "." and _is_abbreviation(normalized, m.end(1)):
            continue
        cut = m.end(2)  # after punctuation and closing quotes
        sentences.append(normalized[start:cut])
        start = cut + 1  # skip the single boundary space
    if start < len(normalized):
        sentences.append(normalized[start:])
    return SentenceSeq(tuple(sentences))


def count_sentences(text: str) -> int:
    return len(split_sentences(text))


def is_dialogue(text: str) -> bool:
    """True iff at least half of the sentences start with a quote
    character. Empty text is not dialogue."""
    seq = split_sentences(text)
    if len(seq) == 0:
        return False
    quoted = sum(1 for s in seq if s[0] in _QUOTE_INITIAL)
    return quoted / len(seq) >= 0.5


def has_unusual_chars(text: str) -> bool:
    """True iff any character falls outside the shipped allow-list."""
    allowed = allowed_chars()
    return any(c not in allowed for c in text)
