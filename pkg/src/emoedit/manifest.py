"""Pair records and the line-delimited manifest format.

A manifest is JSON-lines: one record per line with fields source_path,
target_path, source_emotion, target_emotion, instruction, subset_tag,
provenance. Image paths are relative to the manifest's directory unless
absolute.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

from emoedit.taxonomy import emotion_index

SUBSET_TAGS = ("EPAS", "EPGS")

_FIELDS = (
    "source_path",
    "target_path",
    "source_emotion",
    "target_emotion",
    "instruction",
    "subset_tag",
    "provenance",
)


class ManifestError(Exception):
    """Raised for malformed manifest lines or unresolvable image references."""


@dataclass(frozen=True)
class PairRecord:
    """One curated training pair: source/target images, emotions, instruction."""

    source_path: str
    target_path: str
    source_emotion: str
    target_emotion: str
    instruction: str
    subset_tag: str
    provenance: str = ""

    def __post_init__(self):
        emotion_index(self.source_emotion)
        emotion_index(self.target_emotion)
        if not self.instruction:
            raise ValueError("instruction must be non-empty")
        if self.subset_tag not in SUBSET_TAGS:
            raise ValueError(f"subset_tag must be one of {SUBSET_TAGS}")


def manifest_write(records: list[PairRecord], path: str | Path) -> int:
    """Write records one JSON object per line; returns the count written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")
    tmp.replace(path)
    return len(records)


def manifest_read(path: str | Path, check_images: bool = False) -> list[PairRecord]:
    """Read a manifest; raises ManifestError naming the offending line on parse failure."""
    path = Path(path)
    records: list[PairRecord] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = PairRecord(**{k: obj[k] for k in _FIELDS})
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}: malformed record on line {lineno}: {exc}") from exc
            records.append(rec)
    if check_images:
        base = path.parent
        for rec in records:
            for p in (rec.source_path, rec.target_path):
                full = Path(p) if Path(p).is_absolute() else base / p
                if not full.is_file():
                    raise ManifestError(f"missing image file {p} referenced by record {rec}")
    return records


def resolve_path(manifest_path: str | Path, image_path: str) -> Path:
    """Resolve a record's image path relative to its manifest."""
    p = Path(image_path)
    return p if p.is_absolute() else Path(manifest_path).parent / p
