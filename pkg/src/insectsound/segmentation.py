"""Fixed-length instance extraction from annotated segments.

A segment is a manually annotated span of one sound within a source clip.
Segments are cut into back-to-back windows of exactly ``window_samples``
samples; when the segment length is not a multiple of the window, the final
window is anchored to the segment end and overlaps its predecessor. Segments
shorter than one window are discarded (the caller counts discards).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioClip, Augmentation

# Canonical class ids used throughout the pipeline.
CLASS_NAMES = {
    "C1": "cricket",
    "C2": "cicada",
    "C3": "termite",
    "C4": "beetle",
}
_NAME_TO_ID = {name: cid for cid, name in CLASS_NAMES.items()}
_NAME_TO_ID["bark beetle"] = "C4"


def normalize_class_label(label: str) -> str:
    """Map a species name to its class id; pass other labels through."""
    if label in CLASS_NAMES:
        return label
    return _NAME_TO_ID.get(label.strip().lower(), label)


@dataclass(frozen=True)
class SegmentSpan:
    """One annotated segment: [start_s, end_s) within clip clip_id."""

    clip_id: str
    class_label: str
    segment_number: int
    start_s: float
    end_s: float

    def __post_init__(self):
        if self.start_s < 0:
            raise ValueError(f"segment start must be >= 0, got {self.start_s}")
        if self.end_s <= self.start_s:
            raise ValueError(
                f"segment end {self.end_s} must exceed start {self.start_s} "
                f"(clip {self.clip_id}, segment {self.segment_number})"
            )
        if self.segment_number < 0:
            raise ValueError("segment_number must be non-negative")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class Instance:
    """One fixed-length window cut from a segment, with full provenance."""

    samples: np.ndarray
    class_label: str
    clip_id: str
    segment_number: int
    window_number: int
    augmentation: Augmentation | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))


@dataclass
class DurationStats:
    """Box-plot statistics of segment durations for one class."""

    class_label: str
    count: int
    min_s: float
    q1_s: float
    median_s: float
    q3_s: float
    max_s: float
    outliers: list = field(default_factory=list)


def duration_to_samples(w: float, rate: float) -> int:
    """Samples covering w seconds at the given rate: ceil(w * rate).

    The product is rounded at the ninth decimal before the ceiling so that
    exact products (0.1 * 22050 = 2205) are not bumped up by float noise.
    """
    if w <= 0:
        raise ValueError(f"window duration must be positive, got {w}")
    if rate <= 0:
        raise ValueError(f"sample rate must be positive, got {rate}")
    return math.ceil(round(w * rate, 9))


def window_starts(length: int, window_samples: int) -> list[int]:
    """Start offsets of the emitted windows for a segment of `length` samples.

    Windows start at 0, w, 2w, ...; if the length is not a multiple of w the
    final window starts at length - w so it ends exactly at the segment end.
    Segments shorter than one window yield no starts.
    """
    if window_samples <= 0:
        raise ValueError(f"window_samples must be positive, got {window_samples}")
    if length < window_samples:
        return []
    starts = [i * window_samples for i in range(length // window_samples)]
    if length % window_samples != 0:
        starts.append(length - window_samples)
    return starts


def window_segment(segment: np.ndarray, window_samples: int) -> list[np.ndarray]:
    """Cut a segment into windows of exactly window_samples samples each."""
    segment = np.asarray(segment, dtype=np.float64)
    return [segment[s : s + window_samples] for s in window_starts(len(segment), window_samples)]


def min_segment_duration(spans) -> float:
    """Shortest segment duration over all spans of all classes."""
    spans = list(spans)
    if not spans:
        raise ValueError("min_segment_duration requires at least one span")
    return min(s.duration_s for s in spans)


def duration_stats(spans) -> dict[str, DurationStats]:
    """Per-class box-plot statistics of segment durations.

    Quartiles use linear interpolation between order statistics; outliers
    are durations beyond 1.5 * IQR from the quartiles. Classes with no
    spans are simply absent from the result.
    """
    by_class: dict[str, list[float]] = {}
    for s in spans:
        by_class.setdefault(s.class_label, []).append(s.duration_s)
    stats = {}
    for label in sorted(by_class):
        d = np.asarray(by_class[label], dtype=np.float64)
        q1, med, q3 = np.percentile(d, [25, 50, 75], method="linear")
        iqr = q3 - q1
        lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        outliers = sorted(float(x) for x in d[(d < lo) | (d > hi)])
        stats[label] = DurationStats(
            class_label=label,
            count=len(d),
            min_s=float(d.min()),
            q1_s=float(q1),
            median_s=float(med),
            q3_s=float(q3),
            max_s=float(d.max()),
            outliers=outliers,
        )
    return stats


def extract_instances(
    clip: AudioClip, spans, window_samples: int
) -> tuple[list[Instance], int]:
    """Window every span of one clip into instances.

    Returns (instances, discarded_count) where discarded counts the spans
    shorter than one window. Instances are ordered by (segment_number,
    window_number); spans must all belong to `clip`.
    """
    instances = []
    discarded = 0
    for span in sorted(spans, key=lambda s: s.segment_number):
        if span.clip_id != clip.source_id:
            raise ValueError(
                f"span clip_id {span.clip_id!r} does not match clip {clip.source_id!r}"
            )
        a = int(round(span.start_s * clip.sample_rate))
        b = int(round(span.end_s * clip.sample_rate))
        if b > len(clip):
            raise ValueError(
                f"segment {span.segment_number} of {span.clip_id} ends at "
                f"{span.end_s}s, beyond the clip duration {clip.duration_s:.4f}s"
            )
        windows = window_segment(clip.samples[a:b], window_samples)
        if not windows:
            discarded += 1
            continue
        for w_num, w in enumerate(windows):
            instances.append(
                Instance(
                    samples=w,
                    class_label=span.class_label,
                    clip_id=span.clip_id,
                    segment_number=span.segment_number,
                    window_number=w_num,
                )
            )
    return instances, discarded
