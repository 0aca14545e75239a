"""Synthetic VIDS datasets: compliant skeletons, multi-reader fixtures, and
single-rule mutants for exercising the validator."""

from __future__ import annotations

import datetime as dt
import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .model import (
    VIDS_VERSION,
    Profile,
    RuleId,
    UnknownRule,
    VidsError,
    VidsMarker,
)
from .naming import EntityName
from .quality import (
    ReaderMaskSet,
    build_quality_artifacts,
    consensus_mask,
    dump_json,
    pairwise_dice,
    reader_mask_path,
    write_quality_artifacts,
)
from .splits import generate_splits, write_splits
from .volume import LabelVolume, write_volume

SESSION = "baseline"
TOOL = "vids-kit-synth"
MANUFACTURERS = ("Siemens", "Philips", "GE")
LABEL_MAP = {"0": "background", "1": "nodule"}
_EPOCH = dt.date(2026, 1, 1)


class DestinationNotEmpty(VidsError, FileExistsError):
    pass


@dataclass(frozen=True)
class FixtureConfig:
    n_subjects: int = 10
    readers_per_subject: int = 4
    volume_dims: tuple[int, int, int] = (16, 16, 16)
    profile: Profile = Profile.POC
    seed: int = 0
    modality: str = "ct"
    nodules_per_subject: int = 1
    # the last N subjects (by id) get imaging only, like single-reader cases
    unannotated_subjects: int = 0
    jitter: float = 0.6
    spacing: tuple[float, float, float] = (0.8, 0.8, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "profile", Profile.parse(self.profile))
        object.__setattr__(self, "volume_dims", tuple(int(d) for d in self.volume_dims))
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be at least 1 (no subject directories would exist)")
        if self.readers_per_subject < 2:
            raise ValueError("readers_per_subject must be at least 2; use unannotated_subjects for imaging-only subjects")
        if len(self.volume_dims) != 3 or min(self.volume_dims) < 4:
            raise ValueError("volume_dims must be three sizes of at least 4")
        if not 0 <= self.unannotated_subjects <= self.n_subjects:
            raise ValueError("unannotated_subjects must be between 0 and n_subjects")
        if self.nodules_per_subject < 1:
            raise ValueError("nodules_per_subject must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")
        if not self.modality.isalnum() or self.modality != self.modality.lower():
            raise ValueError("modality must be a lowercase alphanumeric token")

    @property
    def subject_ids(self) -> list[str]:
        width = max(3, len(str(self.n_subjects)))
        return [f"{i:0{width}d}" for i in range(1, self.n_subjects + 1)]

    @property
    def annotated_ids(self) -> list[str]:
        ids = self.subject_ids
        return ids[: len(ids) - self.unannotated_subjects]


@dataclass
class FixtureStats:
    n_subjects: int
    n_images: int
    n_annotated: int = 0
    n_units: int = 0
    n_segmentations: int = 0
    mean_dice: float | None = None
    min_dice: float | None = None
    max_dice: float | None = None
    tier_counts: dict[str, int] = field(default_factory=dict)
    split_sizes: tuple[int, int, int] | None = None
    foreground_voxels: dict[str, int] = field(default_factory=dict)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    dump_json(obj, path)


def _prepare_root(root: Path) -> None:
    if root.exists():
        if not root.is_dir() or any(root.iterdir()):
            raise DestinationNotEmpty(f"{root} exists and is not an empty directory")
    root.mkdir(parents=True, exist_ok=True)


def _rng(cfg: FixtureConfig, *stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *stream])


def _date(cfg: FixtureConfig, offset: int = 0) -> str:
    base = int(_rng(cfg, 0).integers(0, 365))
    return (_EPOCH + dt.timedelta(days=base + offset)).isoformat()


def sphere(dims, center, radius) -> np.ndarray:
    """Binary ball; a voxel is inside when its centre lies within ``radius``."""
    grid = np.indices(dims, dtype=float)
    dist2 = sum((g - c) ** 2 for g, c in zip(grid, center))
    return (dist2 <= radius**2).astype(np.uint8)


def _synthetic_image(cfg: FixtureConfig, index: int) -> LabelVolume:
    rng = _rng(cfg, 1, index)
    dims = cfg.volume_dims
    noise = rng.integers(0, 60, size=dims, dtype=np.uint8)
    ball = sphere(dims, [d / 2 for d in dims], min(dims) / 3)
    return LabelVolume((noise + ball * 120).astype(np.uint8), cfg.spacing)


def _entity(cfg: FixtureConfig, sid: str, suffix: str, ext: str) -> str:
    return str(EntityName(sid, SESSION, cfg.modality, suffix, ext))


def _write_skeleton(root: Path, config: FixtureConfig) -> FixtureStats:
    """Root metadata files plus one synthetic image and sidecar per subject."""
    _prepare_root(root)
    cfg = config
    _write_json(root / ".vids", VidsMarker(VIDS_VERSION, Profile.POC).to_dict())
    _write_json(
        root / "dataset_description.json",
        {
            "Name": f"Synthetic VIDS fixture (seed {cfg.seed})",
            "VIDSVersion": VIDS_VERSION,
            "DatasetType": "synthetic",
            "License": "CC-BY-4.0",
            "Authors": ["vidskit synthetic generator"],
            "Modalities": [cfg.modality.upper()],
            "Compliance": {"IRBApproval": "not applicable (synthetic data)", "DeidentificationMethod": "none required"},
        },
    )
    rng = _rng(cfg, 2)
    participants = [
        {"SubjectID": f"sub-{sid}", "Age": int(rng.integers(40, 85)), "Sex": str(rng.choice(["F", "M"]))}
        for sid in cfg.subject_ids
    ]
    _write_json(root / "participants.json", participants)
    (root / "README.md").write_text(
        "# Synthetic VIDS dataset\n\n"
        f"{cfg.n_subjects} subjects with synthetic {cfg.modality.upper()} volumes. "
        "Generated for validator and pipeline testing; contains no patient data.\n",
        encoding="utf-8",
    )
    (root / "CHANGES.md").write_text(f"# Changes\n\n## 1.0.0 ({_date(cfg)})\n\n- Initial synthetic release.\n", encoding="utf-8")

    for k, sid in enumerate(cfg.subject_ids):
        mdir = root / f"sub-{sid}" / f"ses-{SESSION}" / cfg.modality
        mdir.mkdir(parents=True)
        write_volume(_synthetic_image(cfg, k), mdir / _entity(cfg, sid, "img", "nii.gz"))
        _write_json(
            mdir / _entity(cfg, sid, "img", "json"),
            {
                "Modality": cfg.modality.upper(),
                "Manufacturer": MANUFACTURERS[int(_rng(cfg, 3, k).integers(0, len(MANUFACTURERS)))],
                "SliceThickness_mm": cfg.spacing[2],
                "PixelSpacing_mm": list(cfg.spacing[:2]),
                "Synthetic": True,
            },
        )
    return FixtureStats(n_subjects=cfg.n_subjects, n_images=cfg.n_subjects)


def _annotation_dir(root: Path, cfg: FixtureConfig, sid: str) -> Path:
    adir = root / "derivatives" / "annotations" / f"sub-{sid}" / f"ses-{SESSION}" / cfg.modality
    adir.mkdir(parents=True, exist_ok=True)
    return adir


def scaffold_dataset(root: str | os.PathLike, config: FixtureConfig) -> FixtureStats:
    """Write a POC-valid dataset: metadata, imaging, and one automated
    threshold segmentation per subject (the bright ball of its image)."""
    root = Path(root)
    cfg = config
    stats = _write_skeleton(root, cfg)
    for k, sid in enumerate(cfg.subject_ids):
        seg = LabelVolume((_synthetic_image(cfg, k).data >= 120).astype(np.uint8), cfg.spacing)
        adir = _annotation_dir(root, cfg, sid)
        write_volume(seg, adir / _entity(cfg, sid, "seg", "nii.gz"))
        _write_json(
            adir / _entity(cfg, sid, "seg", "json"),
            {
                "VIDSVersion": VIDS_VERSION,
                "AnnotationType": "segmentation",
                "SourceImage": _entity(cfg, sid, "img", "nii.gz"),
                "LabelMap": LABEL_MAP,
                "Provenance": {
                    "Annotator": {"ID": "vidskit-threshold", "Name": "Automated intensity threshold"},
                    "AnnotationProcess": {
                        "Tool": TOOL,
                        "Version": __version__,
                        "Date": _date(cfg, 1 + k),
                        "Method": "automated",
                    },
                },
            },
        )
        stats.foreground_voxels[sid] = seg.count()
        stats.n_segmentations += 1
        stats.n_annotated += 1
    return stats


def _reader_masks(cfg: FixtureConfig, subject_index: int, unit: int) -> list[LabelVolume]:
    rng = _rng(cfg, 4, subject_index, unit)
    dims = np.array(cfg.volume_dims, dtype=float)
    radius = rng.uniform(min(dims) / 5, min(dims) / 3.5)
    lo, hi = radius + 1, dims - radius - 2
    center = rng.uniform(lo, np.maximum(hi, lo))
    masks = []
    for _ in range(cfg.readers_per_subject):
        c = center + rng.uniform(-cfg.jitter, cfg.jitter, size=3)
        r = max(1.0, radius + rng.uniform(-0.75, 0.75) * cfg.jitter)
        masks.append(LabelVolume(sphere(cfg.volume_dims, c, r), cfg.spacing))
    return masks


def generate_fixture(root: str | os.PathLike, config: FixtureConfig) -> FixtureStats:
    """Scaffold, then add reader masks, consensus segmentations with provenance,
    and (Full profile) the quality and ML artifacts."""
    root = Path(root)
    cfg = config
    stats = _write_skeleton(root, cfg)
    per_subject: dict[str, dict[str, list]] = {}
    index_of = {sid: k for k, sid in enumerate(cfg.subject_ids)}

    for sid in cfg.annotated_ids:
        k = index_of[sid]
        units, consensus = {}, None
        for u in range(1, cfg.nodules_per_subject + 1):
            unit_id = f"nodule-{u:02d}"
            masks = _reader_masks(cfg, k, u)
            for r, m in enumerate(masks, start=1):
                path = reader_mask_path(root, sid, SESSION, cfg.modality, unit_id, r)
                path.parent.mkdir(parents=True, exist_ok=True)
                write_volume(m, path)
            rs = ReaderMaskSet(f"sub-{sid}/{unit_id}", tuple(masks))
            units[unit_id] = pairwise_dice(rs)
            c = consensus_mask(rs, 0.5).data
            consensus = c if consensus is None else np.maximum(consensus, c)
        per_subject[sid] = units
        values = [d for pairs in units.values() for _, _, d in pairs]
        subject_mean = float(np.mean(values))

        adir = _annotation_dir(root, cfg, sid)
        seg = LabelVolume(consensus, cfg.spacing)
        write_volume(seg, adir / _entity(cfg, sid, "seg", "nii.gz"))
        stats.foreground_voxels[sid] = seg.count()
        readers = [f"reader_{r:02d}" for r in range(1, cfg.readers_per_subject + 1)]
        _write_json(
            adir / _entity(cfg, sid, "seg", "json"),
            {
                "VIDSVersion": VIDS_VERSION,
                "AnnotationType": "segmentation",
                "SourceImage": _entity(cfg, sid, "img", "nii.gz"),
                "LabelMap": LABEL_MAP,
                "Provenance": {
                    "Annotator": {
                        "ID": "reader_panel",
                        "Name": f"Synthetic reader panel ({len(readers)} readers)",
                        "Credentials": "synthetic",
                        "Readers": readers,
                    },
                    "AnnotationProcess": {
                        "Tool": TOOL,
                        "Version": __version__,
                        "Date": _date(cfg, 1 + k),
                        "Method": "automated",
                        "Consensus": {"Method": "majority vote", "Threshold": 0.5},
                    },
                    "QualityControl": {
                        "ReviewedBy": "vidskit-qc",
                        "ReviewDate": _date(cfg, 2 + k),
                        "ReviewOutcome": "approved",
                        "Confidence": round(subject_mean, 4),
                    },
                },
                "Annotations": [
                    {"UnitID": uid, "Readers": len(readers), "Characteristics": {"Shape": "sphere"}}
                    for uid in sorted(units)
                ],
            },
        )
        stats.n_units += len(units)
        stats.n_segmentations += 1
    stats.n_annotated = len(per_subject)

    summary, agreement = build_quality_artifacts(per_subject, cfg.subject_ids)
    stats.mean_dice, stats.min_dice, stats.max_dice = summary.mean_dice, summary.min_dice, summary.max_dice
    stats.tier_counts = dict(summary.tier_counts)
    if cfg.profile is Profile.FULL:
        write_quality_artifacts(root, summary, agreement)
        spec = generate_splits(cfg.subject_ids, seed=cfg.seed)
        write_splits(root, spec)
        stats.split_sizes = spec.sizes
        _write_json(root / ".vids", VidsMarker(VIDS_VERSION, Profile.FULL).to_dict())
    return stats


# -- mutants -------------------------------------------------------------------


def _first(paths) -> Path:
    found = sorted(paths)
    if not found:
        raise VidsError("source fixture lacks the file this mutation edits")
    return found[0]


def _edit_json(path: Path, fn) -> None:
    data = json.loads(path.read_text(encoding="utf-8"))
    fn(data)
    dump_json(data, path)


def _img_dirs(dst: Path) -> list[Path]:
    return sorted(p for p in dst.glob("sub-*/ses-*/*") if p.is_dir())


def _mut_s001(dst: Path) -> str:
    (dst / ".vids").unlink()
    return "deleted .vids"


def _mut_s002(dst: Path) -> str:
    _edit_json(dst / "dataset_description.json", lambda d: d.update(License=""))
    return "blanked License in dataset_description.json"


def _mut_s003(dst: Path) -> str:
    for name in ("participants.json", "participants.tsv"):
        (dst / name).unlink(missing_ok=True)
    return "deleted participants.json"


def _mut_s004(dst: Path) -> str:
    (dst / "README.md").unlink()
    return "deleted README.md"


def _mut_s005(dst: Path) -> str:
    (dst / "sub-bad_id").mkdir()
    return "added subject directory sub-bad_id (underscore in id)"


def _mut_s006(dst: Path) -> str:
    subj = _first(dst.glob("sub-*"))
    (subj / "ses-bad_id").mkdir()
    return f"added session directory {subj.name}/ses-bad_id (underscore in id)"


def _mut_i001(dst: Path) -> str:
    mdir = _img_dirs(dst)[0]
    for f in list(mdir.iterdir()):
        f.unlink()
    return f"removed every file from {mdir.relative_to(dst).as_posix()}"


def _mut_i002(dst: Path) -> str:
    side = _first(dst.glob("sub-*/ses-*/*/*_img.json"))
    side.unlink()
    return f"deleted imaging sidecar {side.relative_to(dst).as_posix()}"


def _mut_i003(dst: Path) -> str:
    side = _first(dst.glob("sub-*/ses-*/*/*_img.json"))
    side.write_text('{"Modality": "CT",', encoding="utf-8")
    return f"truncated imaging sidecar {side.relative_to(dst).as_posix()} into invalid JSON"


def _mut_i004(dst: Path) -> str:
    img = _first(dst.glob("sub-*/ses-*/*/*_img.nii.gz"))
    stem = img.name[: -len(".nii.gz")]
    new_stem = stem.replace("_ses-", "_ses-x", 1)
    img.rename(img.with_name(new_stem + ".nii.gz"))
    side = img.with_name(stem + ".json")
    side.rename(img.with_name(new_stem + ".json"))
    for ann in dst.glob("derivatives/annotations/sub-*/ses-*/*/*_seg.json"):
        data = json.loads(ann.read_text(encoding="utf-8"))
        if isinstance(data, dict) and data.get("SourceImage") == img.name:
            data["SourceImage"] = new_stem + ".nii.gz"
            dump_json(data, ann)
    return f"renamed {img.name} to {new_stem}.nii.gz (session entity disagrees with its directory)"


def _mut_a001(dst: Path) -> str:
    shutil.rmtree(dst / "derivatives" / "annotations")
    return "deleted derivatives/annotations/"


def _mut_a002(dst: Path) -> str:
    base = dst / "derivatives" / "annotations"
    for child in list(base.iterdir()):
        shutil.rmtree(child) if child.is_dir() else child.unlink()
    return "emptied derivatives/annotations/"


def _mut_a003(dst: Path) -> str:
    side = _first(dst.glob("derivatives/annotations/sub-*/ses-*/*/*_seg.json"))
    side.unlink()
    return f"deleted annotation sidecar {side.relative_to(dst).as_posix()}"


def _mut_a004(dst: Path) -> str:
    side = _first(dst.glob("derivatives/annotations/sub-*/ses-*/*/*_seg.json"))
    _edit_json(side, lambda d: d.pop("VIDSVersion", None))
    return f"removed VIDSVersion from {side.relative_to(dst).as_posix()}"


def _mut_a005(dst: Path) -> str:
    side = _first(dst.glob("derivatives/annotations/sub-*/ses-*/*/*_seg.json"))

    def strip(d):
        ann = d["Provenance"]["Annotator"]
        ann.pop("ID", None)
        ann.pop("Name", None)

    _edit_json(side, strip)
    return f"removed annotator ID and Name from {side.relative_to(dst).as_posix()}"


def _mut_q001(dst: Path) -> str:
    shutil.rmtree(dst / "quality")
    return "deleted quality/"


def _mut_q002(dst: Path) -> str:
    (dst / "quality" / "quality_summary.json").unlink()
    return "deleted quality/quality_summary.json"


def _mut_q003(dst: Path) -> str:
    (dst / "quality" / "annotation_agreement.json").unlink()
    return "deleted quality/annotation_agreement.json"


def _mut_m001(dst: Path) -> str:
    shutil.rmtree(dst / "ml")
    return "deleted ml/"


def _mut_m002(dst: Path) -> str:
    path = dst / "ml" / "splits.json"
    moved = []

    def dup(d):
        moved.append(d["Train"][0])
        d["Test"].append(d["Train"][0])

    _edit_json(path, dup)
    return f"listed subject {moved[0]} in both Train and Test"


def _mut_d001(dst: Path) -> str:
    (dst / "CHANGES.md").unlink()
    return "deleted CHANGES.md"


MUTATIONS = {
    "S001": _mut_s001,
    "S002": _mut_s002,
    "S003": _mut_s003,
    "S004": _mut_s004,
    "S005": _mut_s005,
    "S006": _mut_s006,
    "I001": _mut_i001,
    "I002": _mut_i002,
    "I003": _mut_i003,
    "I004": _mut_i004,
    "A001": _mut_a001,
    "A002": _mut_a002,
    "A003": _mut_a003,
    "A004": _mut_a004,
    "A005": _mut_a005,
    "Q001": _mut_q001,
    "Q002": _mut_q002,
    "Q003": _mut_q003,
    "M001": _mut_m001,
    "M002": _mut_m002,
    "D001": _mut_d001,
}


def mutate_fixture(src: str | os.PathLike, rule: RuleId | str, dst: str | os.PathLike) -> str:
    """Copy ``src`` to ``dst`` and apply the smallest edit that breaks ``rule``."""
    rid = str(rule if isinstance(rule, RuleId) else RuleId.parse(rule))
    if rid not in MUTATIONS:
        raise UnknownRule(rid)
    dst = Path(dst)
    if dst.exists() and (not dst.is_dir() or any(dst.iterdir())):
        raise DestinationNotEmpty(f"{dst} exists and is not an empty directory")
    if dst.exists():
        dst.rmdir()
    shutil.copytree(src, dst, symlinks=True)
    return f"{rid}: {MUTATIONS[rid](dst)}"
