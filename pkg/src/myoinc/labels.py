from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class MotionLabel:
    """A motion class. Ordering (and tie-breaking) follows ``id``."""

    id: int
    name: str

    def __str__(self) -> str:
        return self.name


_DEFAULT_NAMES = (
    "rest",
    "hand_open",
    "hand_close",
    "wrist_flexion",
    "wrist_extension",
    "wrist_pronation",
    "wrist_supination",
    "radial_deviation",
    "ulnar_deviation",
    "pinch_grip",
    "key_grip",
    "index_point",
)

#: 11 motions plus rest.
DEFAULT_LABELS: tuple[MotionLabel, ...] = tuple(
    MotionLabel(i, name) for i, name in enumerate(_DEFAULT_NAMES)
)


def resolve_label(token: str, labels) -> MotionLabel:
    """Look a label up by name or numeric id."""
    for lab in labels:
        if lab.name == token or str(lab.id) == token:
            return lab
    raise KeyError(token)
