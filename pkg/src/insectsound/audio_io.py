"""Audio ingestion, resampling, padding, and the instance filename grammar.

All clips are mono float arrays with amplitudes in [-1, 1]. Stereo input is
mixed down as (L+R)/2. 16-bit PCM is scaled by 1/32768 so that -32768 maps
to exactly -1.0.
"""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

DEFAULT_SAMPLE_RATE = 22050

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

_FORMAT_NAMES = {
    0: "unknown",
    1: "PCM",
    2: "ADPCM",
    3: "IEEE float",
    6: "A-law",
    7: "mu-law",
    0xFFFE: "extensible",
}


@dataclass(frozen=True)
class AudioClip:
    """Decoded mono signal: samples in [-1, 1], sample rate in Hz, source id."""

    samples: np.ndarray
    sample_rate: int
    source_id: str

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.size == 0:
            raise ValueError("AudioClip requires at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path) -> AudioClip:
    """Decode a RIFF/WAVE file (PCM16 or float32, mono or stereo).

    Stereo is averaged to mono. 16-bit samples are scaled by 1/32768.
    The clip's source_id is the file stem.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"audio file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise ValueError(f"truncated fmt chunk in {path}")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise ValueError(f"missing fmt/data chunk in {path}")
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format == _WAVE_FORMAT_EXTENSIBLE:
        # sub-format GUID starts with the effective format code
        raise ValueError(
            f"unsupported WAV encoding 'extensible' in {path}; "
            "only PCM 16-bit and IEEE float 32-bit are supported"
        )
    if n_channels not in (1, 2):
        raise ValueError(f"unsupported channel count {n_channels} in {path} (need 1 or 2)")

    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        ints = np.frombuffer(data, dtype="<i2")
        samples = ints.astype(np.float64) / 32768.0
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        found = _FORMAT_NAMES.get(audio_format, f"format code {audio_format}")
        raise ValueError(
            f"unsupported WAV encoding in {path}: {found} {bits}-bit; "
            "only PCM 16-bit and IEEE float 32-bit are supported"
        )

    if samples.size == 0:
        raise ValueError(f"zero-length audio in {path}")
    if n_channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=samples, sample_rate=sample_rate, source_id=path.stem)


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write a mono PCM16 WAV file (values clipped to [-1, 1])."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


def resample_samples(x: np.ndarray, source_rate: float, target_rate: float) -> np.ndarray:
    """Linear-interpolation resampling of a raw sample array.

    Output length = round(len(x) * target_rate / source_rate). Rates only
    enter through their ratio, so fractional rates are fine.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if target_rate == source_rate:
        return x.copy()
    m = int(round(n * target_rate / source_rate))
    if m <= 0:
        raise ValueError("resampling would produce an empty signal")
    positions = np.arange(m) * (source_rate / target_rate)
    return np.interp(positions, np.arange(n), x)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample a clip to target_rate by linear interpolation."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    samples = resample_samples(clip.samples, clip.sample_rate, target_rate)
    return replace(clip, samples=samples, sample_rate=int(target_rate))


def pad_to_length(clip: AudioClip, n: int) -> AudioClip:
    """Append zeros so the clip has exactly n samples. Never truncates."""
    if n < len(clip):
        raise ValueError(
            f"pad_to_length target {n} is shorter than clip length {len(clip)}; "
            "truncation is not performed silently"
        )
    if n == len(clip):
        return clip
    samples = np.concatenate([clip.samples, np.zeros(n - len(clip))])
    return replace(clip, samples=samples)


# --- instance filename grammar ------------------------------------------
#
# {original}#{segment}#{window}#{augmentation}#1.wav   (augmented)
# {original}#{segment}#{window}#1.wav                  (unaugmented)
#
# The augmentation field is "P<semitones>" for pitch shifts or "T<rate>"
# for time stretches; a bare "P"/"T" parses with amount=None.


@dataclass(frozen=True)
class Augmentation:
    """Tag for one augmentation variant: kind 'P' (pitch) or 'T' (stretch)."""

    kind: str
    amount: float | None

    def __post_init__(self):
        if self.kind not in ("P", "T"):
            raise ValueError(f"augmentation kind must be 'P' or 'T', got {self.kind!r}")
        if self.amount is not None:
            amount = float(self.amount)
            if self.kind == "T" and amount <= 0:
                raise ValueError(f"time-stretch rate must be positive, got {amount}")
            object.__setattr__(self, "amount", amount)


@dataclass(frozen=True)
class InstanceName:
    original_file: str
    segment_number: int
    window_number: int
    augmentation: Augmentation | None = None

    def __post_init__(self):
        if "#" in self.original_file:
            raise ValueError(f"original file name may not contain '#': {self.original_file!r}")
        if self.segment_number < 0 or self.window_number < 0:
            raise ValueError("segment/window numbers must be non-negative")


def _format_amount(v: float) -> str:
    s = f"{v:g}"
    if float(s) != v:  # %g shortened too far; fall back to exact repr
        s = repr(v)
    return s


def format_instance_name(name: InstanceName) -> str:
    fields = [name.original_file, str(name.segment_number), str(name.window_number)]
    if name.augmentation is not None:
        tag = name.augmentation.kind
        if name.augmentation.amount is not None:
            tag += _format_amount(name.augmentation.amount)
        fields.append(tag)
    fields.append("1.wav")
    return "#".join(fields)


def parse_instance_name(text: str) -> InstanceName:
    """Inverse of format_instance_name; raises ValueError on malformed names."""
    if not text.endswith(".wav"):
        raise ValueError(f"instance name must end with '.wav': {text!r}")
    fields = text.split("#")
    if len(fields) not in (4, 5):
        raise ValueError(
            f"instance name must have 4 or 5 '#'-separated fields, got {len(fields)}: {text!r}"
        )
    if fields[-1] != "1.wav":
        raise ValueError(f"instance name must end with the literal '#1.wav': {text!r}")
    original, seg, win = fields[0], fields[1], fields[2]
    if not seg.isdigit() or not win.isdigit():
        raise ValueError(f"segment/window fields must be non-negative integers: {text!r}")
    augmentation = None
    if len(fields) == 5:
        tag = fields[3]
        if not tag or tag[0] not in ("P", "T"):
            raise ValueError(f"unknown augmentation letter in {text!r} (expected 'P' or 'T')")
        kind, rest = tag[0], tag[1:]
        if rest:
            try:
                amount = float(rest)
            except ValueError:
                raise ValueError(f"bad augmentation parameter {rest!r} in {text!r}") from None
        else:
            amount = None
        augmentation = Augmentation(kind=kind, amount=amount)
    return InstanceName(
        original_file=original,
        segment_number=int(seg),
        window_number=int(win),
        augmentation=augmentation,
    )
