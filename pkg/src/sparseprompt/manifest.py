"""Episode manifest loading.

Manifest JSON shape::

    {"episodes": [
        {"id": "ep000",
         "class": "lesion",
         "references": [{"image": "ep000/ref0.png", "mask": "ep000/ref0_mask.png"}],
         "target": {"image": "ep000/target.png", "mask": "ep000/target_mask.png"}}
    ]}

Paths are resolved relative to the manifest file's directory; the
target mask may be null when no ground truth exists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .core import Episode
from .pngio import load_image, load_mask

__all__ = ["ManifestError", "EpisodeRecord", "load_manifest"]


class ManifestError(ValueError):
    """The manifest file is missing, malformed, or references bad data."""


@dataclass(frozen=True, eq=False)
class EpisodeRecord:
    """An episode plus the identity metadata the manifest carries."""

    episode_id: str
    class_label: str
    episode: Episode


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise ManifestError(f"{where}: missing key {key!r}")
    return entry[key]


def load_manifest(path: Union[str, Path]) -> list[EpisodeRecord]:
    """Read a manifest JSON and load every referenced image and mask."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict) or not isinstance(raw.get("episodes"), list):
        raise ManifestError(f"manifest {path} must be an object with an 'episodes' list")
    root = path.parent

    def load(rel: str, kind: str, where: str):
        p = root / rel
        try:
            return load_image(p) if kind == "image" else load_mask(p)
        except (OSError, ValueError) as e:
            raise ManifestError(f"{where}: cannot load {kind} {p}: {e}") from e

    records: list[EpisodeRecord] = []
    seen_ids: set[str] = set()
    for n, entry in enumerate(raw["episodes"]):
        where = f"{path} episode[{n}]"
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: must be an object")
        ep_id = str(_require(entry, "id", where))
        if ep_id in seen_ids:
            raise ManifestError(f"{where}: duplicate episode id {ep_id!r}")
        seen_ids.add(ep_id)
        class_label = str(_require(entry, "class", where))
        refs_raw = _require(entry, "references", where)
        if not isinstance(refs_raw, list) or len(refs_raw) < 1:
            raise ManifestError(f"{where}: 'references' must be a non-empty list")
        references = []
        for i, ref in enumerate(refs_raw):
            rwhere = f"{where} reference[{i}]"
            img = load(str(_require(ref, "image", rwhere)), "image", rwhere)
            mask = load(str(_require(ref, "mask", rwhere)), "mask", rwhere)
            references.append((img, mask))
        tgt_raw = _require(entry, "target", where)
        target = load(str(_require(tgt_raw, "image", where + " target")), "image", where)
        gt = None
        if tgt_raw.get("mask") is not None:
            gt = load(str(tgt_raw["mask"]), "mask", where + " target")
        try:
            episode = Episode(references=tuple(references), target=target, target_gt=gt)
        except (ValueError, TypeError) as e:
            raise ManifestError(f"{where}: {e}") from e
        records.append(EpisodeRecord(episode_id=ep_id, class_label=class_label, episode=episode))
    return records
