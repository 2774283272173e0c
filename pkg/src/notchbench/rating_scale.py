"""Ordered rating scales and notch arithmetic.

Ratings are indexed best-first: the top label (``AAA`` on the S&P scale) has
index 1, so a positive notch distance means the prediction is a worse rating
than the truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .errors import BadSpec, ScaleMismatch, UnknownLabel

SP_LABELS: tuple[str, ...] = (
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-",
    "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-",
    "B+", "B", "B-", "CCC+", "CCC", "CCC-", "CC",
)


@dataclass(frozen=True)
class RatingScale:
    labels: tuple[str, ...]
    name: str = "custom"
    _positions: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise BadSpec("rating scale needs at least one label")
        if any(not isinstance(lab, str) or not lab.strip() for lab in labels):
            raise BadSpec("rating labels must be non-empty strings")
        if len(set(labels)) != len(labels):
            raise BadSpec("rating labels must be unique")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_positions", {lab: i + 1 for i, lab in enumerate(labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self._positions

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._positions[label]
        except KeyError:
            raise UnknownLabel(f"{label!r} is not on scale {self.name!r}") from None

    def label(self, index: int) -> str:
        if not 1 <= index <= len(self.labels):
            raise UnknownLabel(f"index {index} outside 1..{len(self.labels)}")
        return self.labels[index - 1]

    def rating(self, index: int) -> Rating:
        return Rating(self.label(index), int(index), self)


@dataclass(frozen=True)
class Rating:
    label: str
    index: int
    scale: RatingScale = field(repr=False)

    def __str__(self) -> str:
        return self.label


def default_sp_scale() -> RatingScale:
    """The 20-label S&P long-term scale, AAA down to CC."""
    return RatingScale(SP_LABELS, name="sp")


def make_scale(labels: Iterable[str], name: str = "custom") -> RatingScale:
    return RatingScale(tuple(lab.strip() for lab in labels), name=name)


def parse_rating(label: str, scale: RatingScale) -> Rating:
    """Look up ``label`` (surrounding whitespace ignored, case-sensitive)."""
    token = label.strip()
    return Rating(token, scale.index(token), scale)


def notch_between(pred: Rating, truth: Rating) -> int:
    if pred.scale != truth.scale:
        raise ScaleMismatch(f"{pred.scale.name!r} vs {truth.scale.name!r}")
    return pred.index - truth.index
