"""Instance store: windowed instances persisted as WAV files plus an index.

The WAV filenames carry segment/window/augmentation provenance through the
instance naming grammar; the index maps each clip id to its class and clip
ordinal and lists the instance files in order. Loading reconstructs
provenance by parsing the filenames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .audio_io import (
    InstanceName,
    format_instance_name,
    load_wav,
    parse_instance_name,
    resample,
    write_wav,
)
from .manifest import Manifest
from .segmentation import Instance, duration_to_samples, extract_instances

STORE_FORMAT = "insectsound-instances"
STORE_VERSION = 1
INDEX_NAME = "index.json"


@dataclass
class InstanceStore:
    instances: list
    clip_info: dict  # clip_id -> (class_label, clip_ordinal)
    sample_rate: int
    window_samples: int
    w_seconds: float
    discarded_segments: int = 0
    spans: list = field(default_factory=list)  # segment spans seen at build time

    def class_registry(self) -> list:
        return sorted({label for label, _ in self.clip_info.values()})


def build_store(manifest: Manifest, w_seconds: float, sample_rate: int) -> InstanceStore:
    """Load, resample, and window every manifest entry into instances."""
    window_samples = duration_to_samples(w_seconds, sample_rate)
    instances: list[Instance] = []
    clip_info: dict = {}
    spans_all = []
    discarded = 0
    for entry in sorted(manifest.entries, key=lambda e: (e.class_label, e.clip_ordinal)):
        clip = resample(load_wav(entry.path), sample_rate)
        spans = entry.spans()
        spans_all.extend(spans)
        got, n_short = extract_instances(clip, spans, window_samples)
        instances.extend(got)
        discarded += n_short
        clip_info[entry.clip_id] = (entry.class_label, entry.clip_ordinal)
    return InstanceStore(
        instances=instances,
        clip_info=clip_info,
        sample_rate=sample_rate,
        window_samples=window_samples,
        w_seconds=w_seconds,
        discarded_segments=discarded,
        spans=spans_all,
    )


def instance_filename(inst: Instance) -> str:
    return format_instance_name(
        InstanceName(
            original_file=inst.clip_id,
            segment_number=inst.segment_number,
            window_number=inst.window_number,
            augmentation=inst.augmentation,
        )
    )


def save_store(store: InstanceStore, out_dir, config_echo: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for inst in store.instances:
        name = instance_filename(inst)
        write_wav(out_dir / name, inst.samples, store.sample_rate)
        files.append(name)
    index = {
        "format": STORE_FORMAT,
        "version": STORE_VERSION,
        "sample_rate": store.sample_rate,
        "window_samples": store.window_samples,
        "w_seconds": store.w_seconds,
        "discarded_segments": store.discarded_segments,
        "config_echo": config_echo or {},
        "clips": {
            clip_id: {"class_label": label, "ordinal": ordinal}
            for clip_id, (label, ordinal) in sorted(store.clip_info.items())
        },
        "files": files,
    }
    (out_dir / INDEX_NAME).write_text(json.dumps(index, indent=1))
    return out_dir


def load_store(store_dir) -> InstanceStore:
    store_dir = Path(store_dir)
    index_path = store_dir / INDEX_NAME
    if not index_path.is_file():
        raise FileNotFoundError(f"no instance store at {store_dir} (missing {INDEX_NAME})")
    index = json.loads(index_path.read_text())
    if index.get("format") != STORE_FORMAT or index.get("version") != STORE_VERSION:
        raise ValueError(f"unrecognized instance store index at {index_path}")
    clip_info = {
        clip_id: (meta["class_label"], int(meta["ordinal"]))
        for clip_id, meta in index["clips"].items()
    }
    instances = []
    for name in index["files"]:
        parsed = parse_instance_name(name)
        if parsed.original_file not in clip_info:
            raise ValueError(f"instance {name} references unknown clip {parsed.original_file!r}")
        label, _ = clip_info[parsed.original_file]
        clip = load_wav(store_dir / name)
        instances.append(
            Instance(
                samples=clip.samples,
                class_label=label,
                clip_id=parsed.original_file,
                segment_number=parsed.segment_number,
                window_number=parsed.window_number,
                augmentation=parsed.augmentation,
            )
        )
    return InstanceStore(
        instances=instances,
        clip_info=clip_info,
        sample_rate=int(index["sample_rate"]),
        window_samples=int(index["window_samples"]),
        w_seconds=float(index["w_seconds"]),
        discarded_segments=int(index.get("discarded_segments", 0)),
    )
