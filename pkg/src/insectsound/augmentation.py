"""Pitch-shift and time-stretch augmentation.

Time stretching uses a phase vocoder (Hann analysis window of 1024 samples,
hop 256), which changes duration while preserving pitch. Pitch shifting is a
time stretch by 2^(semitones/12) followed by linear-interpolation resampling
back to the original duration; the residual one-sample drift is fixed by
padding/trimming at the tail, so pitch variants keep the exact input length.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .audio_io import Augmentation, resample_samples
from .segmentation import Instance

VOCODER_N_FFT = 1024
VOCODER_HOP = 256


@dataclass(frozen=True)
class AugmentationSpec:
    """Set of pitch/stretch variants to generate per instance.

    The expansion factor counts the original (when kept) plus one output per
    pitch offset and per stretch rate.
    """

    pitch_semitones: tuple
    stretch_rates: tuple
    include_original: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pitch_semitones", tuple(float(s) for s in self.pitch_semitones))
        object.__setattr__(self, "stretch_rates", tuple(float(r) for r in self.stretch_rates))
        if 0.0 in self.pitch_semitones:
            raise ValueError("pitch offset 0 is the original; remove it from pitch_semitones")
        if 1.0 in self.stretch_rates:
            raise ValueError("stretch rate 1.0 is the original; remove it from stretch_rates")
        if any(r <= 0 for r in self.stretch_rates):
            raise ValueError("stretch rates must be positive")

    @property
    def expansion_factor(self) -> int:
        return int(self.include_original) + len(self.pitch_semitones) + len(self.stretch_rates)


def preset_wide() -> AugmentationSpec:
    """Wide preset: pitch -3.5..3.5 in 0.5 steps, speeds 0.25x..2x in 0.25 steps.

    14 pitch variants + 7 speed variants + the original = factor 22.
    """
    pitch = [s * 0.5 for s in range(-7, 8) if s != 0]
    rates = [k * 0.25 for k in range(1, 9) if k != 4]
    return AugmentationSpec(pitch_semitones=pitch, stretch_rates=rates)


def preset_narrow() -> AugmentationSpec:
    """Narrow preset: pitch -2..2 in whole steps, speeds 0.5x and 2x; factor 7."""
    return AugmentationSpec(pitch_semitones=[-2.0, -1.0, 1.0, 2.0], stretch_rates=[0.5, 2.0])


def get_preset(name: str) -> AugmentationSpec | None:
    if name == "wide":
        return preset_wide()
    if name == "narrow":
        return preset_narrow()
    if name == "none":
        return None
    raise ValueError(f"unknown augmentation preset {name!r} (expected wide/narrow/none)")


def _hann(n: int) -> np.ndarray:
    # periodic Hann, matching FFT frame conventions
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _frame(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Centered frames: reflect-pad by n_fft//2 and slice every hop samples."""
    pad = n_fft // 2
    mode = "reflect" if len(x) > 1 else "edge"
    xp = np.pad(x, pad, mode=mode)
    n_frames = 1 + len(x) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    return xp[idx]


def _stft(x: np.ndarray, n_fft: int = VOCODER_N_FFT, hop: int = VOCODER_HOP) -> np.ndarray:
    frames = _frame(np.asarray(x, dtype=np.float64), n_fft, hop)
    return np.fft.rfft(frames * _hann(n_fft), axis=1).T  # (n_bins, n_frames)


def _istft(S: np.ndarray, length: int, n_fft: int = VOCODER_N_FFT, hop: int = VOCODER_HOP) -> np.ndarray:
    """Overlap-add inverse STFT, trimmed/padded to exactly `length` samples."""
    window = _hann(n_fft)
    frames = np.fft.irfft(S.T, n=n_fft, axis=1) * window
    n_frames = frames.shape[0]
    total = (n_frames - 1) * hop + n_fft
    y = np.zeros(total)
    norm = np.zeros(total)
    wsq = window * window
    for t in range(n_frames):
        y[t * hop : t * hop + n_fft] += frames[t]
        norm[t * hop : t * hop + n_fft] += wsq
    y = y / np.maximum(norm, 1e-12)
    y = y[n_fft // 2 :]  # drop the centering pad
    if len(y) < length:
        y = np.concatenate([y, np.zeros(length - len(y))])
    return y[:length]


def _phase_vocoder(D: np.ndarray, rate: float, n_fft: int = VOCODER_N_FFT, hop: int = VOCODER_HOP) -> np.ndarray:
    """Resample an STFT along time by `rate`, accumulating phase coherently."""
    n_bins, n_frames = D.shape
    steps = np.arange(0.0, n_frames, rate)
    idx = steps.astype(int)
    frac = steps - idx

    Dp = np.concatenate([D, np.zeros((n_bins, 2), dtype=D.dtype)], axis=1)
    cur = Dp[:, idx]
    nxt = Dp[:, idx + 1]

    mag = (1.0 - frac)[None, :] * np.abs(cur) + frac[None, :] * np.abs(nxt)

    phi_advance = 2.0 * np.pi * hop * np.arange(n_bins) / n_fft
    dphi = np.angle(nxt) - np.angle(cur) - phi_advance[:, None]
    dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
    increment = phi_advance[:, None] + dphi

    phase = np.empty_like(mag)
    phase[:, 0] = np.angle(D[:, 0])
    if phase.shape[1] > 1:
        phase[:, 1:] = phase[:, [0]] + np.cumsum(increment[:, :-1], axis=1)
    return mag * np.exp(1j * phase)


def time_stretch(samples: np.ndarray, rate: float) -> np.ndarray:
    """Stretch duration by 1/rate at constant pitch (rate 2.0 halves length)."""
    if rate <= 0:
        raise ValueError(f"stretch rate must be positive, got {rate}")
    x = np.asarray(samples, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("time_stretch requires a non-empty signal")
    if rate == 1.0:
        return x.copy()
    D = _stft(x)
    S = _phase_vocoder(D, rate)
    return _istft(S, length=int(round(len(x) / rate)))


def pitch_shift(samples: np.ndarray, semitones: float, rate: float) -> np.ndarray:
    """Scale pitch by 2^(semitones/12) at constant duration and sample count."""
    x = np.asarray(samples, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("pitch_shift requires a non-empty signal")
    if semitones == 0:
        return x.copy()
    factor = 2.0 ** (semitones / 12.0)
    stretched = time_stretch(x, 1.0 / factor)
    shifted = resample_samples(stretched, source_rate=rate * factor, target_rate=rate)
    if len(shifted) < len(x):
        shifted = np.concatenate([shifted, np.zeros(len(x) - len(shifted))])
    return shifted[: len(x)]


def _fit_length(x: np.ndarray, n: int) -> np.ndarray:
    """Zero-pad short outputs at the tail; trim long ones from the tail."""
    if len(x) < n:
        return np.concatenate([x, np.zeros(n - len(x))])
    return x[:n]


def augment(instance: Instance, spec: AugmentationSpec, sample_rate: float) -> list[Instance]:
    """Expand one unaugmented instance into its spec'd variants.

    Every output keeps the instance's provenance and exact sample count;
    the output count equals spec.expansion_factor.
    """
    if instance.augmentation is not None:
        raise ValueError(
            f"instance {instance.clip_id}#{instance.segment_number}#{instance.window_number} "
            "is already augmented"
        )
    n = len(instance.samples)
    out = []
    if spec.include_original:
        out.append(instance)
    for s in spec.pitch_semitones:
        y = pitch_shift(instance.samples, s, sample_rate)
        out.append(replace(instance, samples=_fit_length(y, n), augmentation=Augmentation("P", s)))
    for r in spec.stretch_rates:
        y = time_stretch(instance.samples, r)
        out.append(replace(instance, samples=_fit_length(y, n), augmentation=Augmentation("T", r)))
    return out
