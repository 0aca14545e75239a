"""Export a VIDS dataset to flat or training-framework layouts.

Every export carries ``mapping.json`` (case id -> subject/session/modality and
source paths) and ``vids-provenance/`` with byte-for-byte copies of the
annotation sidecars, named by case id.
"""

from __future__ import annotations

import json
import os
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from .model import Profile, SplitsSpec, VidsError
from .naming import sidecar_name
from .validator import SEG_SUFFIX, validate

LAYOUTS = ("flat", "training-framework")


class ValidationRequired(VidsError):
    pass


class MissingSplits(VidsError):
    pass


class DestinationNotEmpty(VidsError, FileExistsError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    case_id: str
    subject_id: str
    session_id: str
    modality: str
    image_source: str
    label_source: str | None
    split: str | None = None
    provenance_source: str | None = None

    def to_dict(self) -> dict:
        d = {
            "CaseID": self.case_id,
            "SubjectID": self.subject_id,
            "SessionID": self.session_id,
            "Modality": self.modality,
            "ImageSource": self.image_source,
            "LabelSource": self.label_source,
            "ProvenanceSource": self.provenance_source,
        }
        if self.split is not None:
            d["Split"] = self.split
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ManifestEntry:
        return cls(
            d["CaseID"],
            d["SubjectID"],
            d["SessionID"],
            d["Modality"],
            d["ImageSource"],
            d.get("LabelSource"),
            d.get("Split"),
            d.get("ProvenanceSource"),
        )


@dataclass(frozen=True)
class ExportManifest:
    layout: str
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)
    task_name: str | None = None

    def __post_init__(self) -> None:
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        ids = [e.case_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("case ids must be unique")
        keys = [(e.subject_id, e.session_id, e.modality) for e in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("two cases map to the same subject/session/modality")

    def lookup(self, case_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.case_id == case_id:
                return e
        raise KeyError(case_id)

    def to_dict(self) -> dict:
        d = {"Layout": self.layout, "Cases": [e.to_dict() for e in self.entries]}
        if self.task_name:
            d["TaskName"] = self.task_name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExportManifest:
        return cls(d["Layout"], tuple(ManifestEntry.from_dict(e) for e in d["Cases"]), d.get("TaskName"))


@dataclass(frozen=True)
class _Case:
    subject_id: str
    session_id: str
    modality: str
    image: Path
    label: Path | None
    sidecar: Path | None


def _collect_cases(root: Path) -> list[_Case]:
    """One case per subject/session, using the first modality and image in name order."""
    cases = []
    for subj in sorted(p for p in root.glob("sub-*") if p.is_dir()):
        for ses in sorted(p for p in subj.glob("ses-*") if p.is_dir()):
            mods = sorted(p for p in ses.iterdir() if p.is_dir() and not p.name.startswith(".") and any(p.glob("*.nii.gz")))
            if not mods:
                continue
            mod = mods[0]
            image = sorted(mod.glob("*.nii.gz"))[0]
            adir = root / "derivatives" / "annotations" / subj.name / ses.name / mod.name
            segs = sorted(adir.glob(f"*{SEG_SUFFIX}")) if adir.is_dir() else []
            label = segs[0] if segs else None
            sidecar = label.with_name(sidecar_name(label.name)) if label else None
            if sidecar is not None and not sidecar.is_file():
                sidecar = None
            cases.append(_Case(subj.name[4:], ses.name[4:], mod.name, image, label, sidecar))
    return cases


def _require_valid(root: Path, profile: Profile) -> None:
    report = validate(root, profile)
    if not report.passed:
        failed = ", ".join(str(r.id) for r in report.results if r.outcome.value == "FAIL")
        raise ValidationRequired(f"{root} fails {profile.value} validation ({failed})")


def _prepare_out(out: Path) -> None:
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        raise DestinationNotEmpty(f"{out} exists and is not empty")
    out.mkdir(parents=True, exist_ok=True)


def _rel(p: Path | None, root: Path) -> str | None:
    return p.relative_to(root).as_posix() if p is not None else None


def _copy_provenance(case: _Case, case_id: str, out: Path) -> None:
    if case.sidecar is not None:
        dest = out / "vids-provenance" / f"{case_id}.json"
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(case.sidecar, dest)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def export_flat(dataset_root: str | os.PathLike, out_root: str | os.PathLike) -> ExportManifest:
    root, out = Path(dataset_root), Path(out_root)
    _require_valid(root, Profile.POC)
    _prepare_out(out)
    (out / "images").mkdir()
    entries = []
    for n, case in enumerate(_collect_cases(root), start=1):
        case_id = f"case_{n:04d}"
        shutil.copyfile(case.image, out / "images" / f"{case_id}.nii.gz")
        if case.label is not None:
            (out / "labels").mkdir(exist_ok=True)
            shutil.copyfile(case.label, out / "labels" / f"{case_id}.nii.gz")
        _copy_provenance(case, case_id, out)
        entries.append(
            ManifestEntry(case_id, case.subject_id, case.session_id, case.modality,
                          _rel(case.image, root), _rel(case.label, root), None, _rel(case.sidecar, root))
        )
    manifest = ExportManifest("flat", tuple(entries))
    _write_json(out / "mapping.json", manifest.to_dict())
    return manifest


def export_training_layout(dataset_root: str | os.PathLike, out_root: str | os.PathLike, task_name: str) -> ExportManifest:
    """imagesTr/labelsTr/imagesTs layout. Train and val subjects go to Tr (split kept in
    the manifest), test subjects to Ts."""
    if not re.fullmatch(r"[A-Za-z0-9][A-Za-z0-9_-]*", task_name or ""):
        raise ValueError(f"task name {task_name!r} must be alphanumeric with - or _")
    root, out = Path(dataset_root), Path(out_root)
    splits_path = root / "ml" / "splits.json"
    if not splits_path.is_file():
        raise MissingSplits(f"{splits_path} not found")
    _require_valid(root, Profile.FULL)
    splits = SplitsSpec.from_dict(json.loads(splits_path.read_text(encoding="utf-8")))
    _prepare_out(out)
    for d in ("imagesTr", "labelsTr", "imagesTs"):
        (out / d).mkdir()

    entries, training, test = [], [], []
    label_map = None
    modality = None
    for n, case in enumerate(_collect_cases(root), start=1):
        split = splits.split_of(case.subject_id)
        if split is None:
            raise MissingSplits(f"subject {case.subject_id} is in no split")
        case_id = f"{task_name}_{n:04d}"
        folder = "Ts" if split == "test" else "Tr"
        shutil.copyfile(case.image, out / f"images{folder}" / f"{case_id}_0000.nii.gz")
        label_out = None
        if case.label is not None and folder == "Tr":
            label_out = f"labelsTr/{case_id}.nii.gz"
            shutil.copyfile(case.label, out / label_out)
        if folder == "Tr":
            training.append({"image": f"imagesTr/{case_id}_0000.nii.gz", "label": label_out})
        else:
            test.append(f"imagesTs/{case_id}_0000.nii.gz")
        _copy_provenance(case, case_id, out)
        if label_map is None and case.sidecar is not None:
            side = json.loads(case.sidecar.read_text(encoding="utf-8"))
            label_map = side.get("LabelMap")
        modality = modality or case.modality
        entries.append(
            ManifestEntry(case_id, case.subject_id, case.session_id, case.modality,
                          _rel(case.image, root), _rel(case.label, root), split, _rel(case.sidecar, root))
        )

    descriptor = {
        "name": task_name,
        "description": f"Exported from VIDS dataset {root.name}",
        "modality": {"0": (modality or "").upper()},
        "labels": label_map or {"0": "background"},
        "numTraining": len(training),
        "numTest": len(test),
        "file_ending": ".nii.gz",
        "training": training,
        "test": test,
    }
    _write_json(out / "dataset.json", descriptor)
    manifest = ExportManifest("training-framework", tuple(entries), task_name)
    _write_json(out / "mapping.json", manifest.to_dict())
    return manifest


def read_manifest(path: str | os.PathLike) -> ExportManifest:
    return ExportManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
