"""Dataset manifests: class names plus items carrying an image path, a raw
feature vector, or both. Class labels are 1-based everywhere in the JSON
schema and in Python objects; arrays convert at the point of use."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import IngestionError


@dataclass
class ManifestItem:
    item_id: str
    label: int
    path: Optional[str] = None
    features: Optional[list] = None


@dataclass
class DatasetManifest:
    name: str
    classes: list
    items: list
    image_geometry: Optional[dict] = None  # {"height", "width", "channels"}
    feature_names: Optional[list] = None
    root: Optional[Path] = None
    _by_id: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_id = {it.item_id: it for it in self.items}

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def feature_dim(self) -> Optional[int]:
        return len(self.feature_names) if self.feature_names else None

    def item(self, item_id: str) -> ManifestItem:
        try:
            return self._by_id[item_id]
        except KeyError:
            raise IngestionError(f"unknown item id {item_id!r} in dataset {self.name!r}") from None

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._by_id

    def item_path(self, item_id: str) -> Path:
        it = self.item(item_id)
        if it.path is None:
            raise IngestionError(f"item {item_id!r} has no image path")
        p = Path(it.path)
        return p if p.is_absolute() else (self.root or Path(".")) / p

    def features_array(self) -> np.ndarray:
        """(num_items, feature_dim) array in item order."""
        if not self.feature_names:
            raise IngestionError(f"dataset {self.name!r} records no feature vectors")
        return np.asarray([it.features for it in self.items], dtype=np.float64)


def load_manifest(path) -> DatasetManifest:
    """Load and validate a manifest; referenced image files must exist."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read manifest {path}: {exc}") from exc

    problems = []
    classes = raw.get("classes") or []
    if not classes:
        problems.append("no classes declared")
    items = []
    seen = set()
    for entry in raw.get("items", []):
        item = ManifestItem(
            item_id=str(entry["item_id"]),
            label=int(entry["label"]),
            path=entry.get("path"),
            features=entry.get("features"),
        )
        if item.item_id in seen:
            problems.append(f"duplicate item id {item.item_id!r}")
        seen.add(item.item_id)
        if not 1 <= item.label <= len(classes):
            problems.append(f"item {item.item_id!r} label {item.label} outside [1, {len(classes)}]")
        if item.path is not None:
            full = Path(item.path)
            if not full.is_absolute():
                full = path.parent / full
            if not full.is_file():
                problems.append(f"item {item.item_id!r} missing file {full}")
        if item.path is None and item.features is None:
            problems.append(f"item {item.item_id!r} has neither path nor features")
        items.append(item)
    feature_names = raw.get("feature_names")
    if feature_names:
        bad = [it.item_id for it in items if it.features is None or len(it.features) != len(feature_names)]
        if bad:
            problems.append(f"items with malformed feature vectors: {bad[:5]}")
    if problems:
        raise IngestionError(
            f"manifest {path} invalid: " + "; ".join(problems[:20])
            + (f" (+{len(problems) - 20} more)" if len(problems) > 20 else "")
        )
    return DatasetManifest(
        name=raw.get("name", path.stem),
        classes=list(classes),
        items=items,
        image_geometry=raw.get("image_geometry"),
        feature_names=feature_names,
        root=path.parent,
    )


def save_manifest(path, manifest: DatasetManifest) -> None:
    payload = {
        "name": manifest.name,
        "classes": manifest.classes,
        "image_geometry": manifest.image_geometry,
        "feature_names": manifest.feature_names,
        "items": [
            {
                "item_id": it.item_id,
                "label": it.label,
                **({"path": it.path} if it.path else {}),
                **({"features": it.features} if it.features is not None else {}),
            }
            for it in manifest.items
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1))
