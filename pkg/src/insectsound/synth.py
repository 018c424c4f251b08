"""Synthetic four-species fixture for hermetic end-to-end runs.

Each species is a carrier tone an octave apart from its neighbors with a
species-specific amplitude-modulation rate; every clip jitters the carrier
by a few percent so clips within a class differ. Clips carry a low noise
floor throughout and several annotated "call" segments. The same seed
always produces byte-identical WAV files and manifest.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio_io import write_wav
from .manifest import ManifestEntry, write_manifest

SPECIES = {
    "C1": {"carrier": 600.0, "am_rate": 8.0},
    "C2": {"carrier": 1200.0, "am_rate": 20.0},
    "C3": {"carrier": 2400.0, "am_rate": 45.0},
    "C4": {"carrier": 4800.0, "am_rate": 90.0},
}
NOISE_FLOOR = 0.01


def _render_clip(rng, carrier: float, am_rate: float, rate: int, n_segments: int):
    """One clip's samples plus its annotated (start_s, end_s) spans."""
    jitter = rng.uniform(-0.03, 0.03)
    f = carrier * (1.0 + jitter)
    am_phase = rng.uniform(0.0, 2.0 * np.pi)

    spans = []
    cursor = rng.uniform(0.2, 0.5)
    for _ in range(n_segments):
        dur = rng.uniform(0.6, 1.2)
        spans.append((cursor, cursor + dur))
        cursor += dur + rng.uniform(0.2, 0.5)
    total = int(np.ceil((cursor + 0.2) * rate))

    samples = NOISE_FLOOR * rng.standard_normal(total)
    t = np.arange(total) / rate
    for start, end in spans:
        a, b = int(round(start * rate)), int(round(end * rate))
        seg_t = t[a:b]
        am = 0.55 + 0.45 * np.sin(2.0 * np.pi * am_rate * seg_t + am_phase)
        tone = np.sin(2.0 * np.pi * f * seg_t) + 0.3 * np.sin(2.0 * np.pi * 2.0 * f * seg_t)
        samples[a:b] += 0.5 * am * tone
    return np.clip(samples, -1.0, 1.0), spans


def generate_fixture(
    out_dir,
    seed: int = 0,
    sample_rate: int = 22050,
    clips_per_class: int = 5,
    segments_per_clip: int = 5,
) -> Path:
    """Write the fixture WAVs and manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for class_idx, (label, species) in enumerate(sorted(SPECIES.items())):
        for clip_ordinal in range(1, clips_per_class + 1):
            rng = np.random.default_rng(
                np.random.SeedSequence([int(seed), class_idx, clip_ordinal])
            )
            samples, spans = _render_clip(
                rng, species["carrier"], species["am_rate"], sample_rate, segments_per_clip
            )
            name = f"{label}_clip{clip_ordinal}.wav"
            write_wav(out_dir / name, samples, sample_rate)
            entries.append(
                ManifestEntry(
                    path=Path(name),
                    class_label=label,
                    clip_ordinal=clip_ordinal,
                    segments=tuple(spans),
                )
            )
    manifest_path = out_dir / "manifest.json"
    write_manifest(entries, manifest_path)
    return manifest_path
