"""Reader agreement: Dice overlap, majority-vote consensus, quality tiers and the
``quality/`` artifacts."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from statistics import fmean
from typing import Mapping, Sequence

import numpy as np

from .model import VIDS_VERSION, QualitySummary, SubjectQuality
from .volume import DimsMismatch, LabelVolume, read_volume

TIER_THRESHOLDS = (("excellent", 0.90), ("good", 0.85), ("acceptable", 0.75))


def _array(m) -> np.ndarray:
    return m.data if isinstance(m, LabelVolume) else np.asarray(m)


def _check_same_dims(arrays: Sequence[np.ndarray]) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise DimsMismatch(f"masks have differing dims: {sorted(shapes)}")


def dice(a, b) -> float:
    """Dice overlap of two binary masks: 2|A&B| / (|A|+|B|).

    Two empty masks score 1.0; one empty mask against a non-empty one scores 0.0.
    """
    a, b = _array(a) != 0, _array(b) != 0
    _check_same_dims((a, b))
    size = int(np.count_nonzero(a)) + int(np.count_nonzero(b))
    if size == 0:
        return 1.0
    return 2 * int(np.count_nonzero(a & b)) / size


@dataclass(frozen=True)
class ReaderMaskSet:
    unit_id: str
    masks: tuple[LabelVolume, ...]

    def __post_init__(self) -> None:
        masks = tuple(self.masks)
        if len(masks) < 2:
            raise ValueError(f"{self.unit_id}: agreement needs at least 2 readers, got {len(masks)}")
        _check_same_dims([m.data for m in masks])
        spacings = {m.spacing for m in masks}
        if len(spacings) > 1:
            raise DimsMismatch(f"{self.unit_id}: masks have differing spacing {sorted(spacings)}")
        if not all(m.is_binary() for m in masks):
            raise ValueError(f"{self.unit_id}: reader masks must be binary")
        object.__setattr__(self, "masks", masks)

    @property
    def readers(self) -> int:
        return len(self.masks)


def pairwise_dice(s: ReaderMaskSet) -> list[tuple[int, int, float]]:
    return [(i, j, dice(s.masks[i], s.masks[j])) for i, j in combinations(range(s.readers), 2)]


def consensus_mask(s: ReaderMaskSet, threshold: float | Fraction = 0.5) -> LabelVolume:
    """Voxels marked by at least ``threshold`` of the readers.

    The comparison is done on integers (votes * den >= num * readers) so a
    2-of-4 vote sits exactly on the 0.5 boundary instead of near it.
    """
    frac = Fraction(threshold).limit_denominator(10**9) if isinstance(threshold, float) else Fraction(threshold)
    if not 0 < frac <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    votes = np.zeros(s.masks[0].dims, dtype=np.int64)
    for m in s.masks:
        votes += m.data != 0
    keep = votes * frac.denominator >= frac.numerator * s.readers
    return LabelVolume(keep.astype(np.uint8), s.masks[0].spacing)


def quality_tier(mean_dice: float | None) -> str:
    if mean_dice is None:
        return "unrated"
    if not 0.0 <= mean_dice <= 1.0:
        raise ValueError(f"mean Dice {mean_dice} outside [0, 1]")
    for tier, floor in TIER_THRESHOLDS:
        if mean_dice >= floor:
            return tier
    return "poor"


PairRecords = Sequence[tuple[int, int, float]]


def build_quality_artifacts(
    per_subject: Mapping[str, Mapping[str, PairRecords]],
    subjects: Sequence[str] | None = None,
) -> tuple[QualitySummary, dict]:
    """Roll pair records up into the summary and agreement documents.

    ``per_subject`` maps subject id -> unit id -> pair records. Subjects listed
    in ``subjects`` without any units are reported as unrated.
    """
    all_ids = sorted(set(per_subject) | set(subjects or ()))
    rows, records, rollups, all_dice = [], [], [], []
    for sid in all_ids:
        units = per_subject.get(sid, {})
        values = []
        for uid in sorted(units):
            for i, j, d in units[uid]:
                records.append({"SubjectID": sid, "UnitID": uid, "ReaderPair": [i, j], "Dice": d})
                values.append(d)
        mean = fmean(values) if values else None
        all_dice.extend(values)
        rows.append(SubjectQuality(sid, len(units), mean, quality_tier(mean)))
        if units:
            rollups.append({"SubjectID": sid, "Units": len(units), "PairCount": len(values), "MeanDice": mean})

    tier_counts = {t: 0 for t in ("excellent", "good", "acceptable", "poor", "unrated")}
    for r in rows:
        tier_counts[r.tier] += 1
    rated = [r.mean_pairwise_dice for r in rows if r.mean_pairwise_dice is not None]
    summary = QualitySummary(
        subjects=tuple(rows),
        mean_dice=fmean(all_dice) if all_dice else None,
        min_dice=min(all_dice) if all_dice else None,
        max_dice=max(all_dice) if all_dice else None,
        subject_mean_of_means=fmean(rated) if rated else None,
        pair_count=len(all_dice),
        tier_counts=tier_counts,
    )
    agreement = {
        "VIDSVersion": VIDS_VERSION,
        "Metric": "Dice",
        "Method": "pairwise Dice over every reader pair of each annotated unit",
        "Records": records,
        "Subjects": rollups,
    }
    return summary, agreement


def write_quality_artifacts(root: str | os.PathLike, summary: QualitySummary, agreement: dict) -> None:
    qdir = Path(root) / "quality"
    qdir.mkdir(parents=True, exist_ok=True)
    dump_json(summary.to_dict(), qdir / "quality_summary.json")
    dump_json(agreement, qdir / "annotation_agreement.json")


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


# Per-reader masks live in a custom derivatives tree the validator ignores:
# derivatives/readers/sub-X/ses-Y/<modality>/<unit>/reader-NN.nii.gz
READERS_DIR = ("derivatives", "readers")


def reader_mask_path(root, subject: str, session: str, modality: str, unit: str, reader: int) -> Path:
    return Path(root).joinpath(*READERS_DIR, f"sub-{subject}", f"ses-{session}", modality, unit, f"reader-{reader:02d}.nii.gz")


def load_reader_masks(root: str | os.PathLike) -> dict[str, dict[str, ReaderMaskSet]]:
    """Collect reader mask sets keyed by subject id then unit id."""
    base = Path(root).joinpath(*READERS_DIR)
    out: dict[str, dict[str, ReaderMaskSet]] = {}
    if not base.is_dir():
        return out
    for unit_dir in sorted(p for p in base.glob("sub-*/ses-*/*/*") if p.is_dir()):
        files = sorted(unit_dir.glob("reader-*.nii.gz"))
        if len(files) < 2:
            continue
        subject = unit_dir.parts[-4][len("sub-") :]
        unit_id = "/".join(unit_dir.parts[-3:])
        out.setdefault(subject, {})[unit_id] = ReaderMaskSet(unit_id, tuple(read_volume(f) for f in files))
    return out


def recompute_quality(root: str | os.PathLike, subjects: Sequence[str] | None = None) -> QualitySummary:
    """Recompute agreement from the stored reader masks and rewrite ``quality/``."""
    sets = load_reader_masks(root)
    per_subject = {sid: {uid: pairwise_dice(s) for uid, s in units.items()} for sid, units in sets.items()}
    summary, agreement = build_quality_artifacts(per_subject, subjects)
    write_quality_artifacts(root, summary, agreement)
    return summary
