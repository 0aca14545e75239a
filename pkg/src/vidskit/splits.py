"""Deterministic subject-level train/val/test splits and leakage checks."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .model import SplitsSpec, VidsError

MASK64 = (1 << 64) - 1
METHOD = "fisher-yates/splitmix64/largest-remainder"
DEFAULT_RATIOS = (0.70, 0.15, 0.15)


class BadRatios(VidsError, ValueError):
    pass


class DuplicateSubjects(VidsError, ValueError):
    pass


class SplitMix64:
    """The splitmix64 generator; pinned so memberships are reproducible anywhere."""

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.state = seed

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def shuffle(items: Sequence[str], seed: int) -> list[str]:
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def _exact(r: float | Fraction | str) -> Fraction:
    # Fraction(repr(0.15)) is 3/20; Fraction(0.15) would be the binary approximation
    return r if isinstance(r, Fraction) else Fraction(repr(r) if isinstance(r, float) else str(r))


def apportion(n: int, ratios: Sequence) -> tuple[int, ...]:
    """Largest-remainder seat counts; equal remainders go to the earlier split."""
    quotas = [n * _exact(r) for r in ratios]
    counts = [q.numerator // q.denominator for q in quotas]
    left = n - sum(counts)
    order = sorted(range(len(quotas)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[:left]:
        counts[k] += 1
    return tuple(counts)


def _check_ratios(ratios) -> tuple[float, float, float]:
    if len(ratios) != 3:
        raise BadRatios(f"need three ratios, got {len(ratios)}")
    vals = tuple(float(r) for r in ratios)
    if any(not r > 0 for r in vals):
        raise BadRatios(f"ratios must be positive, got {vals}")
    if abs(sum(vals) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must sum to 1, got {sum(vals)!r}")
    return vals


def generate_splits(
    subject_ids: Iterable[str],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 42,
    rationale: str = "",
) -> SplitsSpec:
    ids = list(subject_ids)
    vals = _check_ratios(ratios)
    if not ids:
        raise DuplicateSubjects("no subjects to split")
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise DuplicateSubjects(f"duplicate subject ids: {', '.join(dupes)}")
    order = shuffle(sorted(ids), seed)
    n_train, n_val, _ = apportion(len(order), ratios)
    if not rationale:
        pct = "/".join(f"{round(r * 100):g}" for r in vals)
        rationale = (
            f"Subject-level {pct} split: every subject's images and annotations sit in exactly one split, "
            f"so no subject leaks between training and evaluation. Seed {seed}."
        )
    return SplitsSpec(
        train=tuple(order[:n_train]),
        val=tuple(order[n_train : n_train + n_val]),
        test=tuple(order[n_train + n_val :]),
        seed=seed,
        ratios=vals,
        method=METHOD,
        rationale=rationale,
    )


@dataclass(frozen=True)
class Violation:
    kind: str  # duplicate-assignment | unknown-subject | unassigned-subject
    subject_id: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.subject_id} ({self.detail})"


def check_leakage(s: SplitsSpec, population: Iterable[str]) -> list[Violation]:
    population = set(population)
    seen: dict[str, list[str]] = {}
    for name, members in (("train", s.train), ("val", s.val), ("test", s.test)):
        for sid in members:
            seen.setdefault(sid, []).append(name)
    out = []
    for sid in sorted(seen):
        where = seen[sid]
        if len(where) > 1:
            out.append(Violation("duplicate-assignment", sid, "listed in " + ", ".join(where)))
        if sid not in population:
            out.append(Violation("unknown-subject", sid, "not a subject of the dataset"))
    for sid in sorted(population - set(seen)):
        out.append(Violation("unassigned-subject", sid, "in no split"))
    return out


def write_splits(root: str | os.PathLike, spec: SplitsSpec) -> Path:
    path = Path(root) / "ml" / "splits.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def read_splits(path: str | os.PathLike) -> SplitsSpec:
    return SplitsSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
