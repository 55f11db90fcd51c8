"""Segment long texts at detected branching points.

The pipeline slides a fixed window over the sentence sequence, scores
every boundary that has a full half-window on each side, smooths the
probability series with a normalized kernel, and keeps one peak per
contiguous run exceeding the lower threshold, provided the peak clears
the upper one. The sentence runs between consecutive peaks become the
output segments.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ChadpodError
from .scorer import Scorer, ScoreRequest
from .text import SentenceSeq, split_sentences

KERNEL_TRIANGULAR = "triangular"
KERNEL_UNIFORM = "uniform"


@dataclass(frozen=True)
class SegmenterConfig:
    window_sentences: int = 10
    step: int = 1
    kernel_width: int = 25
    th1: float = 0.5
    th2: float = 0.6
    kernel: str = KERNEL_TRIANGULAR

    def __post_init__(self):
        if self.window_sentences < 2 or self.window_sentences % 2:
            raise ChadpodError("window_sentences must be even and >= 2")
        if self.step < 1:
            raise ChadpodError("step must be >= 1")
        if self.kernel_width < 1 or self.kernel_width % 2 == 0:
            raise ChadpodError("kernel_width must be odd and >= 1")
        if not 0.0 < self.th1 <= self.th2 < 1.0:
            raise ChadpodError("need 0 < th1 <= th2 < 1")
        if self.kernel not in (KERNEL_TRIANGULAR, KERNEL_UNIFORM):
            raise ChadpodError(f"unknown kernel {self.kernel!r}")


@dataclass(frozen=True)
class ProbabilitySeries:
    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        prev = None
        for idx, p in self.entries:
            if prev is not None and idx <= prev:
                raise ChadpodError("boundary indices must be strictly increasing")
            if not 0.0 <= p <= 1.0:
                raise ChadpodError(f"probability {p} at boundary {idx} outside [0, 1]")
            prev = idx

    def __len__(self) -> int:
        return len(self.entries)

    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]

    def values(self) -> list[float]:
        return [p for _, p in self.entries]


@dataclass(frozen=True)
class Peak:
    boundary_index: int
    value: float


@dataclass
class SegmentationResult:
    sentences: SentenceSeq
    raw: ProbabilitySeries
    smoothed: ProbabilitySeries
    peaks: list[Peak]
    segments: list[str]
    segment_ranges: list[tuple[int, int]]  # 1-based inclusive sentence ranges


def score_boundaries(
    sentences: SentenceSeq, scorer: Scorer, cfg: SegmenterConfig
) -> ProbabilitySeries:
    """Score every boundary with a full half-window of sentences on each
    side, stepping by ``cfg.step``. Texts shorter than the window yield
    an empty series. Scorer failures are re-raised tagged with the
    boundary they belong to."""
    half = cfg.window_sentences // 2
    n = len(sentences)
    boundaries = list(range(half, n - half + 1, cfg.step))
    if not boundaries:
        return ProbabilitySeries(())
    requests = [
        ScoreRequest(
            id=f"b{i}",
            prefix=sentences.join_range(i - half, i),
            postfix=sentences.join_range(i, i + half),
        )
        for i in boundaries
    ]
    try:
        probs = scorer.score_batch(requests)
    except ChadpodError as e:
        raise type(e)(f"scoring boundaries {boundaries[0]}..{boundaries[-1]}: {e}") from e
    return ProbabilitySeries(tuple(zip(boundaries, probs)))


def _kernel(width: int, shape: str) -> np.ndarray:
    if shape == KERNEL_UNIFORM:
        return np.ones(width, dtype=np.float64)
    half = (width - 1) // 2
    return np.array([half + 1 - abs(j) for j in range(-half, half + 1)], dtype=np.float64)


def smooth(
    series: ProbabilitySeries, kernel_width: int, kernel: str = KERNEL_TRIANGULAR
) -> ProbabilitySeries:
    """Convolve the series values with a normalized kernel (triangular by
    default). At the edges the kernel is truncated to the available
    entries and renormalized, so constants pass through unchanged."""
    if kernel_width < 1 or kernel_width % 2 == 0:
        raise ChadpodError("kernel_width must be odd and >= 1")
    if len(series) == 0 or kernel_width == 1:
        return series
    values = np.array(series.values(), dtype=np.float64)
    weights = _kernel(kernel_width, kernel)
    half = (kernel_width - 1) // 2
    n = len(values)
    num = np.zeros(n)
    den = np.zeros(n)
    for j in range(-half, half + 1):
        w = weights[j + half]
        a, b = max(0, -j), min(n, n - j)
        if a < b:
            num[a:b] += w * values[a + j : b + j]
            den[a:b] += w
    smoothed = num / den
    return ProbabilitySeries(tuple(zip(series.indices(), (float(v) for v in smoothed))))


def find_peaks(smoothed: ProbabilitySeries, th1: float, th2: float) -> list[Peak]:
    """One peak per maximal run of values strictly above ``th1``: the
    run's maximum (leftmost on ties), kept only when strictly above
    ``th2``."""
    if th1 > th2:
        raise ChadpodError("need th1 <= th2")
    peaks: list[Peak] = []
    run: list[tuple[int, float]] = []

    def close_run():
        if not run:
            return
        best_idx, best_val = run[0]
        for idx, val in run[1:]:
            if val > best_val:
                best_idx, best_val = idx, val
        if best_val > th2:
            peaks.append(Peak(boundary_index=best_idx, value=best_val))
        run.clear()

    for idx, val in smoothed.entries:
        if val > th1:
            run.append((idx, val))
        else:
            close_run()
    close_run()
    return peaks


def segment(text: str, scorer: Scorer, cfg: SegmenterConfig) -> SegmentationResult:
    """Full pipeline: sentences -> boundary scores -> smoothing -> peaks
    -> segments. Always returns len(peaks) + 1 segments."""
    sentences = split_sentences(text)
    raw = score_boundaries(sentences, scorer, cfg)
    smoothed = smooth(raw, cfg.kernel_width, cfg.kernel)
    peaks = find_peaks(smoothed, cfg.th1, cfg.th2)

    n = len(sentences)
    cuts = [p.boundary_index for p in peaks]
    starts = [0] + cuts
    stops = cuts + [n]
    segments = [sentences.join_range(a, b) for a, b in zip(starts, stops)]
    ranges = [(a + 1, b) for a, b in zip(starts, stops)]
    return SegmentationResult(
        sentences=sentences,
        raw=raw,
        smoothed=smoothed,
        peaks=peaks,
        segments=segments,
        segment_ranges=ranges,
    )


# ---------------------------------------------------------------------------
# Reports.


def segmentation_report(result: SegmentationResult, cfg: SegmenterConfig) -> dict:
    return {
        "config": {
            "window_sentences": cfg.window_sentences,
            "step": cfg.step,
            "kernel_width": cfg.kernel_width,
            "th1": cfg.th1,
            "th2": cfg.th2,
            "kernel": cfg.kernel,
        },
        "sentence_count": len(result.sentences),
        "raw": [[i, p] for i, p in result.raw.entries],
        "smoothed": [[i, p] for i, p in result.smoothed.entries],
        "peaks": [{"boundary_index": p.boundary_index, "value": p.value} for p in result.peaks],
        "segment_ranges": [[a, b] for a, b in result.segment_ranges],
        "segments": result.segments,
    }


def write_report(result: SegmentationResult, cfg: SegmenterConfig, path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(segmentation_report(result, cfg), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def write_plot_csv(result: SegmentationResult, path: Path | str) -> None:
    """Plot data with one row per scored boundary: raw and smoothed
    probability plus a peak marker."""
    peak_set = {p.boundary_index for p in result.peaks}
    smoothed_by_idx = dict(result.smoothed.entries)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["boundary_index", "raw_p", "smoothed_p", "is_peak"])
        for idx, p in result.raw.entries:
            writer.writerow([idx, repr(p), repr(smoothed_by_idx[idx]), int(idx in peak_set)])


def write_svg(result: SegmentationResult, cfg: SegmenterConfig, path: Path | str) -> None:
    """Standalone SVG line chart of the smoothed series with the raw
    series, both thresholds, and peak markers. Deterministic output."""
    width, height, margin = 800.0, 300.0, 40.0
    entries = result.smoothed.entries
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]
    if entries:
        lo, hi = entries[0][0], entries[-1][0]
        span = max(hi - lo, 1)

        def x(i: int) -> float:
            return margin + (width - 2 * margin) * (i - lo) / span

        def y(p: float) -> float:
            return height - margin - (height - 2 * margin) * p

        for th, dash in ((cfg.th1, "4 3"), (cfg.th2, "1 3")):
            lines.append(
                f'<line x1="{margin:.1f}" y1="{y(th):.2f}" x2="{width - margin:.1f}" '
                f'y2="{y(th):.2f}" stroke="gray" stroke-dasharray="{dash}"/>'
            )
        raw_pts = " ".join(f"{x(i):.2f},{y(p):.2f}" for i, p in result.raw.entries)
        lines.append(f'<polyline points="{raw_pts}" fill="none" stroke="#bbccee"/>')
        pts = " ".join(f"{x(i):.2f},{y(p):.2f}" for i, p in entries)
        lines.append(f'<polyline points="{pts}" fill="none" stroke="#224488" stroke-width="2"/>')
        for p in result.peaks:
            lines.append(
                f'<circle cx="{x(p.boundary_index):.2f}" cy="{y(p.value):.2f}" r="4" fill="#cc3333"/>'
            )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
