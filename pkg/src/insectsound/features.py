"""MFCC feature extraction, dataset assembly, and importance-based selection.

The MFCC recipe: centered reflect-padded frames (periodic Hann, n_fft=1024,
hop=512), power spectrum, projection onto triangular mel filters (HTK mel
scale, 2595*log10(1+f/700)), log with a floor, then an orthonormal type-II
DCT keeping the first n_mfcc rows. A signal of length L yields
T = 1 + L//hop frames.

Per-instance coefficient matrices are aggregated either by a per-coefficient
mean over time ("mean", length n_mfcc) or by concatenating frames
("flatten", length n_mfcc*T; flat index i is frame i//n_mfcc,
coefficient i%n_mfcc).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.fft


@dataclass(frozen=True)
class MfccConfig:
    n_mfcc: int = 40
    n_fft: int = 1024
    hop: int = 512
    n_mels: int = 64
    fmin: float = 0.0
    fmax: float | None = None  # defaults to rate/2
    log_floor: float = 1e-10
    aggregation: str = "flatten"

    def __post_init__(self):
        if self.n_mfcc > self.n_mels:
            raise ValueError(f"n_mfcc ({self.n_mfcc}) must not exceed n_mels ({self.n_mels})")
        if self.n_fft < self.hop:
            raise ValueError("n_fft must be at least the hop size")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")
        if self.aggregation not in ("mean", "flatten"):
            raise ValueError(f"aggregation must be 'mean' or 'flatten', got {self.aggregation!r}")

    def effective_fmax(self, rate: float) -> float:
        fmax = rate / 2.0 if self.fmax is None else self.fmax
        if not (self.fmin < fmax <= rate / 2.0):
            raise ValueError(f"need fmin < fmax <= rate/2, got fmin={self.fmin}, fmax={fmax}")
        return fmax


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MfccConfig, rate: float) -> np.ndarray:
    """Triangular mel filters as an (n_mels, n_fft//2 + 1) matrix.

    Filter m rises linearly from mel edge m to its center at edge m+1 and
    falls to edge m+2, evaluated at the FFT bin frequencies.
    """
    fmax = config.effective_fmax(rate)
    n_bins = config.n_fft // 2 + 1
    bin_freqs = np.arange(n_bins) * rate / config.n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(fmax), config.n_mels + 2))

    left = edges[:-2][:, None]
    center = edges[1:-1][:, None]
    right = edges[2:][:, None]
    up = (bin_freqs[None, :] - left) / (center - left)
    down = (right - bin_freqs[None, :]) / (right - center)
    fb = np.maximum(0.0, np.minimum(up, down))

    empty = np.flatnonzero(fb.max(axis=1) <= 0.0)
    if empty.size:
        raise ValueError(
            f"mel filter {int(empty[0])} covers no FFT bin; "
            "reduce n_mels or increase n_fft"
        )
    return fb


def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def mfcc(samples: np.ndarray, config: MfccConfig, rate: float) -> np.ndarray:
    """MFCC matrix of shape (n_mfcc, T) for one signal."""
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < 1:
        raise ValueError("mfcc requires a non-empty signal")
    pad = config.n_fft // 2
    xp = np.pad(x, pad, mode="reflect" if len(x) > 1 else "edge")
    n_frames = 1 + len(x) // config.hop
    idx = np.arange(config.n_fft)[None, :] + config.hop * np.arange(n_frames)[:, None]
    frames = xp[idx] * _hann(config.n_fft)

    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2  # (T, n_bins)
    mel_energy = power @ mel_filterbank(config, rate).T  # (T, n_mels)
    log_mel = np.log(np.maximum(mel_energy, config.log_floor))
    coeffs = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, : config.n_mfcc]
    return coeffs.T  # (n_mfcc, T)


def aggregate(matrix: np.ndarray, mode: str) -> np.ndarray:
    """Collapse an (n_mfcc, T) matrix to a feature vector.

    mean: per-coefficient mean over frames. flatten: frame 0's coefficients
    first, then frame 1's, and so on (column-major).
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size == 0:
        raise ValueError("cannot aggregate an empty coefficient matrix")
    if mode == "mean":
        return matrix.mean(axis=1)
    if mode == "flatten":
        return matrix.flatten(order="F")
    raise ValueError(f"unknown aggregation mode {mode!r}")


def feature_names_for(n_mfcc: int, n_frames: int, mode: str) -> list[str]:
    if mode == "mean":
        return [f"mfcc{c}" for c in range(n_mfcc)]
    if mode == "flatten":
        return [f"mfcc{i % n_mfcc}_f{i // n_mfcc}" for i in range(n_mfcc * n_frames)]
    raise ValueError(f"unknown aggregation mode {mode!r}")


@dataclass
class Dataset:
    """Feature matrix with per-row labels, clip ids, and named columns."""

    features: np.ndarray
    labels: list
    clip_ids: list
    feature_names: list

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n, d = self.features.shape
        if len(self.labels) != n or len(self.clip_ids) != n:
            raise ValueError("labels/clip_ids length must match the row count")
        if len(self.feature_names) != d:
            raise ValueError(
                f"feature width {d} does not match {len(self.feature_names)} feature names"
            )
        if n and not np.all(np.isfinite(self.features)):
            raise ValueError("dataset contains non-finite feature values")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def subset(self, row_indices) -> "Dataset":
        rows = list(row_indices)
        return Dataset(
            features=self.features[rows],
            labels=[self.labels[i] for i in rows],
            clip_ids=[self.clip_ids[i] for i in rows],
            feature_names=list(self.feature_names),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(list(self.feature_names) + ["label", "clip_id"])
            for row, label, clip in zip(self.features, self.labels, self.clip_ids):
                writer.writerow([repr(float(v)) for v in row] + [label, clip])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            if header[-2:] != ["label", "clip_id"]:
                raise ValueError("dataset CSV must end with 'label' and 'clip_id' columns")
            names = header[:-2]
            rows, labels, clips = [], [], []
            for rec in reader:
                rows.append([float(v) for v in rec[: len(names)]])
                labels.append(rec[-2])
                clips.append(rec[-1])
        features = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
        return cls(features=features, labels=labels, clip_ids=clips, feature_names=names)


def build_dataset(instances, config: MfccConfig, rate: float) -> Dataset:
    """Extract and aggregate MFCCs for a list of instances.

    All instances must have the same sample count so every row has the
    same width.
    """
    instances = list(instances)
    if not instances:
        raise ValueError("cannot build a dataset from zero instances")
    lengths = {len(inst.samples) for inst in instances}
    if len(lengths) != 1:
        raise ValueError(f"instances have mixed lengths {sorted(lengths)}; window them first")
    rows = []
    n_frames = None
    for inst in instances:
        m = mfcc(inst.samples, config, rate)
        n_frames = m.shape[1]
        rows.append(aggregate(m, config.aggregation))
    return Dataset(
        features=np.vstack(rows),
        labels=[inst.class_label for inst in instances],
        clip_ids=[inst.clip_id for inst in instances],
        feature_names=feature_names_for(config.n_mfcc, n_frames, config.aggregation),
    )


@dataclass(frozen=True)
class FeatureRanking:
    """Normalized importances plus feature indices sorted by descending weight."""

    importance: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "importance", np.asarray(self.importance, dtype=np.float64))
        object.__setattr__(self, "order", np.asarray(self.order, dtype=np.intp))


def rank_features(importance) -> FeatureRanking:
    """Normalize importances to sum 1 and sort descending (ties: lower index)."""
    imp = np.asarray(importance, dtype=np.float64)
    if imp.ndim != 1:
        raise ValueError("importance must be a vector")
    if np.any(imp < 0):
        raise ValueError("importances must be non-negative")
    total = imp.sum()
    if total <= 0:
        raise ValueError("all-zero importances cannot be ranked")
    imp = imp / total
    order = np.argsort(-imp, kind="stable")
    return FeatureRanking(importance=imp, order=order)


def importance_sum(ranking: FeatureRanking, k: int) -> float:
    """Total normalized importance captured by the top-k features."""
    d = len(ranking.importance)
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    return float(ranking.importance[ranking.order[:k]].sum())


def select_top_k(dataset: Dataset, ranking: FeatureRanking, k: int) -> Dataset:
    """Restrict a dataset to its top-k features (original column order kept)."""
    if not 1 <= k <= dataset.width:
        raise ValueError(f"k must be in [1, {dataset.width}], got {k}")
    if len(ranking.importance) != dataset.width:
        raise ValueError("ranking width does not match the dataset")
    keep = np.sort(ranking.order[:k])
    return Dataset(
        features=dataset.features[:, keep],
        labels=list(dataset.labels),
        clip_ids=list(dataset.clip_ids),
        feature_names=[dataset.feature_names[i] for i in keep],
    )
