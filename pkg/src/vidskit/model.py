"""Shared domain types: profiles, the rule catalog, sidecar schemas and reports.

Every JSON-facing type offers ``from_dict``/``to_dict``. Keys the schema does
not know about are kept in ``extra`` and written back untouched, so
domain extensions survive a round trip.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

VIDS_VERSION = "1.0"


class VidsError(Exception):
    """Base class for all toolkit errors."""


class UnknownRule(VidsError, ValueError):
    pass


class SchemaError(VidsError, ValueError):
    """A JSON document does not have the shape its schema requires."""


class Profile(str, enum.Enum):
    POC = "poc"
    FULL = "full"

    @classmethod
    def parse(cls, value: str | Profile) -> Profile:
        if isinstance(value, Profile):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown profile {value!r} (expected 'poc' or 'full')") from None


class Outcome(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    WARN = "WARN"
    SKIP = "SKIP"


CATEGORY_ORDER = ("S", "I", "A", "Q", "M", "D")
CATEGORY_LABELS = {
    "S": "Structure",
    "I": "Imaging",
    "A": "Annotation",
    "Q": "Quality",
    "M": "ML",
    "D": "Metadata",
}
_CATEGORY_SIZES = {"S": 6, "I": 4, "A": 5, "Q": 3, "M": 2, "D": 1}


@dataclass(frozen=True, order=False)
class RuleId:
    category: str
    number: int

    def __post_init__(self) -> None:
        size = _CATEGORY_SIZES.get(self.category)
        if size is None or not isinstance(self.number, int) or not 1 <= self.number <= size:
            raise UnknownRule(f"{self.category}{self.number!r} is not a catalog rule")

    @classmethod
    def parse(cls, text: str) -> RuleId:
        m = re.fullmatch(r"([A-Z])(\d{3})", text.strip().upper())
        if not m:
            raise UnknownRule(f"{text!r} is not a rule id")
        return cls(m.group(1), int(m.group(2)))

    @property
    def sort_key(self) -> tuple[int, int]:
        return CATEGORY_ORDER.index(self.category), self.number

    def __lt__(self, other: RuleId) -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return f"{self.category}{self.number:03d}"


@dataclass(frozen=True)
class RuleSpec:
    id: RuleId
    category_label: str
    check: str
    full_only: bool = False
    advisory: bool = False

    def applies_to(self, profile: Profile) -> bool:
        return profile is Profile.FULL or not self.full_only


def _spec(rid: str, check: str, *, full_only: bool = False, advisory: bool = False) -> RuleSpec:
    r = RuleId.parse(rid)
    return RuleSpec(r, CATEGORY_LABELS[r.category], check, full_only, advisory)


RULE_CATALOG: tuple[RuleSpec, ...] = (
    _spec("S001", ".vids marker exists"),
    _spec("S002", "dataset_description.json valid (6 fields)"),
    _spec("S003", "participants.json or .tsv exists"),
    _spec("S004", "README.md exists"),
    _spec("S005", "Subject directories (sub-*) exist"),
    _spec("S006", "Session directories (ses-*) exist"),
    _spec("I001", "NIfTI files present per subject"),
    _spec("I002", "Imaging sidecar JSONs present"),
    _spec("I003", "Imaging sidecar JSONs are valid"),
    _spec("I004", "VIDS naming convention", advisory=True),
    _spec("A001", "derivatives/annotations/ exists"),
    _spec("A002", "Segmentation files exist"),
    _spec("A003", "Annotation sidecar JSONs exist"),
    _spec("A004", "Annotation JSONs valid + VIDSVersion"),
    _spec("A005", "Provenance fields populated"),
    _spec("Q001", "quality/ directory exists", full_only=True),
    _spec("Q002", "quality_summary.json present", full_only=True),
    _spec("Q003", "annotation_agreement.json present", full_only=True),
    _spec("M001", "ml/ directory exists", full_only=True),
    _spec("M002", "ml/splits.json present", full_only=True),
    _spec("D001", "CHANGES.md exists", advisory=True),
)

_CATALOG_BY_ID = {spec.id: spec for spec in RULE_CATALOG}


def rule_catalog() -> list[RuleSpec]:
    """Return the 21 rules in canonical order (S, I, A, Q, M, D, then number)."""
    return list(RULE_CATALOG)


def rule_spec(rule: RuleId | str) -> RuleSpec:
    rid = RuleId.parse(rule) if isinstance(rule, str) else rule
    return _CATALOG_BY_ID[rid]


@dataclass(frozen=True)
class RuleResult:
    id: RuleId
    outcome: Outcome
    message: str
    evidence: tuple[str, ...] = ()

    @property
    def category_label(self) -> str:
        return CATEGORY_LABELS[self.id.category]

    def to_dict(self) -> dict[str, Any]:
        return {
            "Rule": str(self.id),
            "Category": self.category_label,
            "Status": self.outcome.value,
            "Message": self.message,
            "Evidence": list(self.evidence),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> RuleResult:
        return cls(
            RuleId.parse(d["Rule"]),
            Outcome(d["Status"]),
            d.get("Message", ""),
            tuple(d.get("Evidence", ())),
        )


@dataclass(frozen=True)
class ValidationReport:
    profile: Profile
    results: tuple[RuleResult, ...]
    dataset: str = ""
    profile_source: str = "override"
    notes: tuple[str, ...] = ()
    # one-line detail per category letter, shown next to an all-PASS group
    details: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        ids = [r.id for r in self.results]
        if ids != [s.id for s in RULE_CATALOG]:
            raise ValueError("a report must hold exactly one result per catalog rule, in order")

    @property
    def counts(self) -> dict[str, int]:
        tally = {o.value: 0 for o in Outcome}
        for r in self.results:
            tally[r.outcome.value] += 1
        return tally

    @property
    def status(self) -> Outcome:
        return Outcome.FAIL if any(r.outcome is Outcome.FAIL for r in self.results) else Outcome.PASS

    @property
    def passed(self) -> bool:
        return self.status is Outcome.PASS

    def result(self, rule: RuleId | str) -> RuleResult:
        rid = RuleId.parse(rule) if isinstance(rule, str) else rule
        for r in self.results:
            if r.id == rid:
                return r
        raise KeyError(str(rid))

    def outcomes(self) -> dict[str, Outcome]:
        return {str(r.id): r.outcome for r in self.results}

    def to_dict(self) -> dict[str, Any]:
        return {
            "VIDSVersion": VIDS_VERSION,
            "Dataset": self.dataset,
            "Profile": self.profile.value,
            "ProfileSource": self.profile_source,
            "Results": [r.to_dict() for r in self.results],
            "Notes": list(self.notes),
            "CategoryDetails": dict(self.details),
            "Summary": {
                "Status": self.status.value,
                "Total": len(self.results),
                "Counts": self.counts,
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ValidationReport:
        return cls(
            Profile.parse(d["Profile"]),
            tuple(RuleResult.from_dict(r) for r in d["Results"]),
            d.get("Dataset", ""),
            d.get("ProfileSource", "override"),
            tuple(d.get("Notes", ())),
            dict(d.get("CategoryDetails", {})),
        )


def _require_object(d: Any, what: str) -> Mapping[str, Any]:
    if not isinstance(d, Mapping):
        raise SchemaError(f"{what} must be a JSON object, got {type(d).__name__}")
    return d


def _present(value: Any) -> bool:
    """True for values that count as populated: not null, not blank text, not empty containers."""
    if value is None:
        return False
    if isinstance(value, str):
        return bool(value.strip())
    if isinstance(value, (list, tuple, dict)):
        return len(value) > 0
    return True


def _split_known(d: Mapping[str, Any], known: Iterable[str]) -> dict[str, Any]:
    known = set(known)
    return {k: v for k, v in d.items() if k not in known}


@dataclass(frozen=True)
class VidsMarker:
    vids_version: str
    profile: Profile

    @classmethod
    def from_dict(cls, d: Any) -> VidsMarker:
        d = _require_object(d, ".vids marker")
        version = d.get("VIDSVersion")
        if not _present(version):
            raise SchemaError(".vids marker lacks VIDSVersion")
        try:
            profile = Profile.parse(d.get("Profile", ""))
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
        return cls(str(version), profile)

    def to_dict(self) -> dict[str, Any]:
        return {"VIDSVersion": self.vids_version, "Profile": self.profile.value}


DESCRIPTION_REQUIRED_FIELDS = ("Name", "VIDSVersion", "DatasetType", "License", "Authors", "Modalities")


@dataclass(frozen=True)
class DatasetDescription:
    name: Any = None
    vids_version: Any = None
    dataset_type: Any = None
    license: Any = None
    authors: Any = None
    modalities: Any = None
    compliance: Any = None
    custom_modalities: Any = None
    extra: dict[str, Any] = field(default_factory=dict)

    _KEYS = {
        "Name": "name",
        "VIDSVersion": "vids_version",
        "DatasetType": "dataset_type",
        "License": "license",
        "Authors": "authors",
        "Modalities": "modalities",
        "Compliance": "compliance",
        "CustomModalities": "custom_modalities",
    }

    @classmethod
    def from_dict(cls, d: Any) -> DatasetDescription:
        d = _require_object(d, "dataset_description.json")
        kwargs = {attr: d.get(key) for key, attr in cls._KEYS.items()}
        return cls(**kwargs, extra=_split_known(d, cls._KEYS))

    def to_dict(self) -> dict[str, Any]:
        out = {key: getattr(self, attr) for key, attr in self._KEYS.items() if getattr(self, attr) is not None}
        out.update(self.extra)
        return out

    def missing_fields(self) -> list[str]:
        return [k for k in DESCRIPTION_REQUIRED_FIELDS if not _present(getattr(self, self._KEYS[k]))]


@dataclass(frozen=True)
class Annotator:
    id: Any = None
    name: Any = None
    credentials: Any = None
    specialty: Any = None
    institution: Any = None
    extra: dict[str, Any] = field(default_factory=dict)

    _KEYS = {"ID": "id", "Name": "name", "Credentials": "credentials", "Specialty": "specialty", "Institution": "institution"}


@dataclass(frozen=True)
class AnnotationProcess:
    tool: Any = None
    version: Any = None
    date: Any = None
    time_spent_minutes: Any = None
    method: Any = None
    extra: dict[str, Any] = field(default_factory=dict)

    _KEYS = {"Tool": "tool", "Version": "version", "Date": "date", "TimeSpent_minutes": "time_spent_minutes", "Method": "method"}


@dataclass(frozen=True)
class QualityControl:
    reviewed_by: Any = None
    review_date: Any = None
    review_outcome: Any = None
    confidence: Any = None
    extra: dict[str, Any] = field(default_factory=dict)

    _KEYS = {"ReviewedBy": "reviewed_by", "ReviewDate": "review_date", "ReviewOutcome": "review_outcome", "Confidence": "confidence"}


def _record_from(cls, d: Any):
    # Lenient on purpose: a non-object sub-record reads as empty so the
    # provenance check can report it instead of the parser crashing.
    if not isinstance(d, Mapping):
        return cls()
    return cls(**{attr: d.get(key) for key, attr in cls._KEYS.items()}, extra=_split_known(d, cls._KEYS))


def _record_to(rec) -> dict[str, Any]:
    out = {key: getattr(rec, attr) for key, attr in rec._KEYS.items() if getattr(rec, attr) is not None}
    out.update(rec.extra)
    return out


@dataclass(frozen=True)
class Provenance:
    annotator: Annotator = field(default_factory=Annotator)
    annotation_process: AnnotationProcess = field(default_factory=AnnotationProcess)
    quality_control: QualityControl | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Any) -> Provenance:
        if not isinstance(d, Mapping):
            return cls()
        qc = d.get("QualityControl")
        return cls(
            _record_from(Annotator, d.get("Annotator")),
            _record_from(AnnotationProcess, d.get("AnnotationProcess")),
            _record_from(QualityControl, qc) if qc is not None else None,
            _split_known(d, ("Annotator", "AnnotationProcess", "QualityControl")),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "Annotator": _record_to(self.annotator),
            "AnnotationProcess": _record_to(self.annotation_process),
        }
        if self.quality_control is not None:
            out["QualityControl"] = _record_to(self.quality_control)
        out.update(self.extra)
        return out


def provenance_minimum_ok(p: Provenance) -> bool:
    """Annotator identity (ID or Name) plus either the annotation date or the tool."""
    who = _present(p.annotator.id) or _present(p.annotator.name)
    how = _present(p.annotation_process.date) or _present(p.annotation_process.tool)
    return who and how


@dataclass(frozen=True)
class LabelMap:
    entries: dict[str, str]

    def __post_init__(self) -> None:
        seen = set()
        for key in self.entries:
            if not re.fullmatch(r"\d+", str(key)):
                raise SchemaError(f"label key {key!r} is not a non-negative integer")
            if int(key) in seen:
                raise SchemaError(f"label key {key!r} duplicates another key")
            seen.add(int(key))
        if "0" not in self.entries:
            raise SchemaError('label map must map "0" to a background label')

    @classmethod
    def from_dict(cls, d: Any) -> LabelMap:
        return cls({str(k): v for k, v in _require_object(d, "LabelMap").items()})

    def to_dict(self) -> dict[str, str]:
        return dict(self.entries)


@dataclass(frozen=True)
class AnnotationSidecar:
    vids_version: Any = None
    annotation_type: Any = None
    source_image: Any = None
    label_map: LabelMap | None = None
    provenance: Provenance = field(default_factory=Provenance)
    annotations: Any = None
    extra: dict[str, Any] = field(default_factory=dict)

    _KNOWN = ("VIDSVersion", "AnnotationType", "SourceImage", "LabelMap", "Provenance", "Annotations")

    @classmethod
    def from_dict(cls, d: Any) -> AnnotationSidecar:
        d = _require_object(d, "annotation sidecar")
        lm = d.get("LabelMap")
        return cls(
            d.get("VIDSVersion"),
            d.get("AnnotationType"),
            d.get("SourceImage"),
            LabelMap.from_dict(lm) if lm is not None else None,
            Provenance.from_dict(d.get("Provenance")),
            d.get("Annotations"),
            _split_known(d, cls._KNOWN),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for key, value in (
            ("VIDSVersion", self.vids_version),
            ("AnnotationType", self.annotation_type),
            ("SourceImage", self.source_image),
            ("LabelMap", self.label_map.to_dict() if self.label_map else None),
        ):
            if value is not None:
                out[key] = value
        out["Provenance"] = self.provenance.to_dict()
        if self.annotations is not None:
            out["Annotations"] = self.annotations
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class SplitsSpec:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float]
    method: str = "fisher-yates/splitmix64/largest-remainder"
    rationale: str = ""

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def split_of(self, subject_id: str) -> str | None:
        for name, members in (("train", self.train), ("val", self.val), ("test", self.test)):
            if subject_id in members:
                return name
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "Seed": self.seed,
            "Ratios": list(self.ratios),
            "Method": self.method,
            "Rationale": self.rationale,
            "Train": list(self.train),
            "Val": list(self.val),
            "Test": list(self.test),
        }

    @classmethod
    def from_dict(cls, d: Any) -> SplitsSpec:
        d = _require_object(d, "splits.json")
        lists = []
        for key in ("Train", "Val", "Test"):
            members = d.get(key)
            if not isinstance(members, list) or not all(isinstance(m, str) for m in members):
                raise SchemaError(f"splits.json field {key} must be a list of subject ids")
            lists.append(tuple(members))
        ratios = d.get("Ratios", [])
        if not isinstance(ratios, list) or len(ratios) != 3:
            raise SchemaError("splits.json field Ratios must hold three fractions")
        seed = d.get("Seed")
        if not isinstance(seed, int) or seed < 0:
            raise SchemaError("splits.json field Seed must be a non-negative integer")
        return cls(*lists, seed, tuple(float(r) for r in ratios), d.get("Method", ""), d.get("Rationale", ""))


TIERS = ("excellent", "good", "acceptable", "poor", "unrated")


@dataclass(frozen=True)
class SubjectQuality:
    subject_id: str
    nodule_count: int
    mean_pairwise_dice: float | None
    tier: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "SubjectID": self.subject_id,
            "NoduleCount": self.nodule_count,
            "MeanPairwiseDice": self.mean_pairwise_dice,
            "Tier": self.tier,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> SubjectQuality:
        return cls(d["SubjectID"], d["NoduleCount"], d.get("MeanPairwiseDice"), d["Tier"])


@dataclass(frozen=True)
class QualitySummary:
    subjects: tuple[SubjectQuality, ...]
    mean_dice: float | None
    min_dice: float | None
    max_dice: float | None
    subject_mean_of_means: float | None
    pair_count: int
    tier_counts: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "VIDSVersion": VIDS_VERSION,
            "Aggregation": "subject mean = flat mean over every reader-pair record of the subject's units",
            "TierThresholds": {"excellent": 0.90, "good": 0.85, "acceptable": 0.75},
            "Dataset": {
                "MeanDice": self.mean_dice,
                "MinDice": self.min_dice,
                "MaxDice": self.max_dice,
                "SubjectMeanOfMeans": self.subject_mean_of_means,
                "PairCount": self.pair_count,
                "TierCounts": dict(self.tier_counts),
            },
            "Subjects": [s.to_dict() for s in self.subjects],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> QualitySummary:
        ds = d["Dataset"]
        return cls(
            tuple(SubjectQuality.from_dict(s) for s in d["Subjects"]),
            ds.get("MeanDice"),
            ds.get("MinDice"),
            ds.get("MaxDice"),
            ds.get("SubjectMeanOfMeans"),
            ds.get("PairCount", 0),
            dict(ds.get("TierCounts", {})),
        )


SCORE_CATEGORIES = ("Structure", "Imaging", "Annotation", "Provenance", "Quality", "MLReadiness")

# Dimension slugs by category; the order within a category follows the published table.
DIMENSIONS: dict[str, tuple[str, ...]] = {
    "Structure": (
        "dataset-marker",
        "dataset-description",
        "participant-registry",
        "readme",
        "subject-hierarchy",
        "session-hierarchy",
    ),
    "Imaging": ("standardized-format", "image-metadata-sidecar", "consistent-file-naming"),
    "Annotation": (
        "annotation-directory",
        "segmentation-masks",
        "annotation-metadata-sidecar",
        "label-map",
    ),
    "Provenance": (
        "annotator-identity",
        "annotator-credentials",
        "annotation-tool",
        "annotation-date",
        "qc-review",
    ),
    "Quality": ("inter-annotator-agreement", "quality-summary"),
    "MLReadiness": ("documented-splits", "split-rationale"),
}

STATUS_VALUES = ("satisfied", "partial", "absent")


class WrongDimensionCount(SchemaError):
    pass


class UnknownCategory(SchemaError):
    pass


@dataclass(frozen=True)
class ScoreEntry:
    dimension: str
    category: str
    status: str

    def to_dict(self) -> dict[str, str]:
        return {"Dimension": self.dimension, "Category": self.category, "Status": self.status}


@dataclass(frozen=True)
class Scorecard:
    entries: tuple[ScoreEntry, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if len(self.entries) != 22:
            raise WrongDimensionCount(f"a scorecard has 22 dimensions, got {len(self.entries)}")
        counts = {c: 0 for c in SCORE_CATEGORIES}
        for e in self.entries:
            if e.category not in counts:
                raise UnknownCategory(f"unknown category {e.category!r}")
            if e.status not in STATUS_VALUES:
                raise SchemaError(f"unknown status {e.status!r} for {e.dimension}")
            counts[e.category] += 1
        for cat, dims in DIMENSIONS.items():
            if counts[cat] != len(dims):
                raise WrongDimensionCount(f"{cat} needs {len(dims)} dimensions, got {counts[cat]}")

    @classmethod
    def from_json(cls, data: Any, name: str = "") -> Scorecard:
        # Either a bare list of entries or {"Name": ..., "Dimensions": [...]}.
        if isinstance(data, Mapping):
            name = data.get("Name", name)
            data = data.get("Dimensions")
        if not isinstance(data, list):
            raise SchemaError("scorecard must be a list of {Dimension, Category, Status}")
        entries = []
        for item in data:
            item = _require_object(item, "scorecard entry")
            entries.append(ScoreEntry(str(item.get("Dimension", "")), item.get("Category"), item.get("Status")))
        return cls(tuple(entries), name)

    def to_json(self) -> dict[str, Any]:
        return {"Name": self.name, "Dimensions": [e.to_dict() for e in self.entries]}

    @classmethod
    def uniform(cls, status: str, name: str = "") -> Scorecard:
        return cls(tuple(ScoreEntry(d, c, status) for c, dims in DIMENSIONS.items() for d in dims), name)
