"""Tracer variant descriptors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import ConfigError

KINDS = ("static", "static_time", "direct", "cls_pred", "dkt", "prototype", "exemplar")
RECURRENT_KINDS = ("direct", "cls_pred", "dkt")
CONDITIONINGS = ("base", "y", "y_z")

# which current-step information the recurrent input carries, per main form
DEFAULT_CONDITIONING = {"direct": "y_z", "cls_pred": "y"}

META_CAPABLE = ("static", "direct", "cls_pred")


@dataclass(frozen=True)
class TracerVariant:
    kind: str
    conditioning: Optional[str] = None
    meta_per_class_acc: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown tracer kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("direct", "cls_pred"):
            cond = self.conditioning or DEFAULT_CONDITIONING[self.kind]
            if cond not in CONDITIONINGS:
                raise ConfigError(f"unknown conditioning {cond!r}; expected one of {CONDITIONINGS}")
            object.__setattr__(self, "conditioning", cond)
        elif self.conditioning is not None:
            raise ConfigError(f"conditioning applies only to direct/cls_pred, not {self.kind!r}")
        if self.meta_per_class_acc and self.kind not in META_CAPABLE:
            raise ConfigError(f"per-class-accuracy input is not supported for {self.kind!r}")

    @property
    def is_recurrent(self) -> bool:
        return self.kind in RECURRENT_KINDS

    @property
    def uses_embeddings(self) -> bool:
        return self.kind != "dkt"

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "conditioning": self.conditioning,
            "meta_per_class_acc": self.meta_per_class_acc,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TracerVariant":
        return cls(
            kind=raw["kind"],
            conditioning=raw.get("conditioning"),
            meta_per_class_acc=bool(raw.get("meta_per_class_acc", False)),
        )
