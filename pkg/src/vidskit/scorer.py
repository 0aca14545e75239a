"""Compliance scoring over the 22 dimensions from a human-judged scorecard.

satisfied counts 1, partial 0.5, absent 0. Percentages round half up. All
arithmetic is done in fractions so x.5 boundaries never drift.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

from .model import DIMENSIONS, SCORE_CATEGORIES, Scorecard, VidsError

WEIGHTS = {"satisfied": Fraction(1), "partial": Fraction(1, 2), "absent": Fraction(0)}
CATEGORY_MAX = {cat: len(dims) for cat, dims in DIMENSIONS.items()}
TOTAL_DIMENSIONS = sum(CATEGORY_MAX.values())
BUNDLED_CARDS = ("LIDC-IDRI", "BraTS", "CheXpert", "MSD")


class EmptyInput(VidsError, ValueError):
    pass


def round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


@dataclass(frozen=True)
class Score:
    name: str
    per_category: dict[str, Fraction]
    total: Fraction
    percent: int

    def to_dict(self) -> dict:
        return {
            "Name": self.name,
            "Categories": {c: float(v) for c, v in self.per_category.items()},
            "Total": float(self.total),
            "Max": TOTAL_DIMENSIONS,
            "Percent": self.percent,
        }


def _category_sums(card: Scorecard) -> dict[str, Fraction]:
    sums = {c: Fraction(0) for c in SCORE_CATEGORIES}
    for e in card.entries:
        sums[e.category] += WEIGHTS[e.status]
    return sums


def score(card: Scorecard) -> Score:
    per_category = _category_sums(card)
    total = sum(per_category.values(), Fraction(0))
    return Score(card.name, per_category, total, round_half_up(100 * total / TOTAL_DIMENSIONS))


def category_averages(cards: Sequence[Scorecard]) -> dict[str, int]:
    """Mean category sum across cards as a whole percent of that category's maximum."""
    if not cards:
        raise EmptyInput("category_averages needs at least one scorecard")
    sums = [_category_sums(c) for c in cards]
    return {
        cat: round_half_up(100 * sum((s[cat] for s in sums), Fraction(0)) / len(cards) / CATEGORY_MAX[cat])
        for cat in SCORE_CATEGORIES
    }


def load_scorecard(path: str | os.PathLike) -> Scorecard:
    path = Path(path)
    return Scorecard.from_json(json.loads(path.read_text(encoding="utf-8")), name=path.stem)


def bundled_scorecard(name: str) -> Scorecard:
    """One of the four published public-dataset scorecards shipped with the package."""
    text = resources.files("vidskit.data.scorecards").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return Scorecard.from_json(json.loads(text), name=name)


def render_row(s: Score) -> str:
    lines = [f"{s.name or 'scorecard'}"]
    for cat in SCORE_CATEGORIES:
        lines.append(f"  {cat + f' ({CATEGORY_MAX[cat]})':<18}{float(s.per_category[cat]):.1f}")
    lines.append(f"  {'Total (22)':<18}{float(s.total):.1f}")
    lines.append(f"  {'Percentage':<18}{s.percent}%")
    return "\n".join(lines)
