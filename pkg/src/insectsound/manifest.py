"""Dataset manifest: which audio files exist, their class and clip ordinal,
and the annotated segment spans inside each.

Validation is exhaustive: every problem in the manifest is collected and
reported in one error rather than aborting at the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .segmentation import SegmentSpan, normalize_class_label

MANIFEST_FORMAT = "insectsound-manifest"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    class_label: str
    clip_ordinal: int
    segments: tuple  # of (start_s, end_s)

    @property
    def clip_id(self) -> str:
        return self.path.stem

    def spans(self) -> list[SegmentSpan]:
        return [
            SegmentSpan(
                clip_id=self.clip_id,
                class_label=self.class_label,
                segment_number=n,
                start_s=float(a),
                end_s=float(b),
            )
            for n, (a, b) in enumerate(self.segments)
        ]


@dataclass
class Manifest:
    entries: list

    def clips_per_class(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out.setdefault(e.class_label, []).append(e.clip_ordinal)
        return out


def load_manifest(path) -> Manifest:
    path = Path(path)
    data = json.loads(path.read_text())
    problems: list[str] = []
    if data.get("format") != MANIFEST_FORMAT:
        problems.append(f"format field must be {MANIFEST_FORMAT!r}, got {data.get('format')!r}")
    if data.get("version") != MANIFEST_VERSION:
        problems.append(f"unsupported manifest version {data.get('version')!r}")
    raw_entries = data.get("entries")
    if not isinstance(raw_entries, list) or not raw_entries:
        raise ValueError(f"manifest {path} has no entries")

    entries = []
    base = path.parent
    seen_ids: set[str] = set()
    for n, raw in enumerate(raw_entries):
        where = f"entry {n}"
        rel = raw.get("path")
        if not rel:
            problems.append(f"{where}: missing 'path'")
            continue
        audio = base / rel
        if not audio.is_file():
            problems.append(f"{where}: audio file not found: {audio}")
        label = raw.get("class_label")
        if not label:
            problems.append(f"{where}: missing 'class_label'")
            label = "?"
        label = normalize_class_label(str(label))
        try:
            ordinal = int(raw.get("clip"))
        except (TypeError, ValueError):
            problems.append(f"{where}: 'clip' must be an integer ordinal")
            ordinal = 0
        segments = raw.get("segments") or []
        if not segments:
            problems.append(f"{where}: no segments listed")
        clean = []
        for m, seg in enumerate(segments):
            try:
                a, b = float(seg[0]), float(seg[1])
            except (TypeError, ValueError, IndexError):
                problems.append(f"{where}: segment {m} must be a [start, end] pair")
                continue
            if a < 0 or b <= a:
                problems.append(
                    f"{where}: segment {m} has invalid span [{a}, {b}] (need 0 <= start < end)"
                )
                continue
            clean.append((a, b))
        entry = ManifestEntry(path=audio, class_label=label, clip_ordinal=ordinal,
                              segments=tuple(clean))
        if entry.clip_id in seen_ids:
            problems.append(f"{where}: duplicate clip id {entry.clip_id!r}")
        seen_ids.add(entry.clip_id)
        entries.append(entry)

    per_class: dict = {}
    for e in entries:
        per_class.setdefault(e.class_label, []).append(e.clip_ordinal)
    for label, ordinals in sorted(per_class.items()):
        expect = list(range(1, len(ordinals) + 1))
        if sorted(ordinals) != expect:
            problems.append(
                f"class {label}: clip ordinals must be unique and contiguous from 1, "
                f"got {sorted(ordinals)}"
            )

    if problems:
        listing = "\n  - ".join(problems)
        raise ValueError(f"manifest {path} failed validation:\n  - {listing}")
    return Manifest(entries=entries)


def write_manifest(entries, path) -> None:
    """Serialize manifest entries with paths relative to the manifest file."""
    path = Path(path)
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "entries": [
            {
                "path": str(e.path.relative_to(path.parent)) if e.path.is_absolute() else str(e.path),
                "class_label": e.class_label,
                "clip": e.clip_ordinal,
                "segments": [[a, b] for a, b in e.segments],
            }
            for e in entries
        ],
    }
    path.write_text(json.dumps(doc, indent=1))
