"""Scan a dataset tree into a :class:`DatasetIndex` and run the 21-rule catalog over it."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .model import (
    CATEGORY_ORDER,
    RULE_CATALOG,
    AnnotationSidecar,
    DatasetDescription,
    Outcome,
    Profile,
    Provenance,
    RuleId,
    RuleResult,
    SchemaError,
    SplitsSpec,
    ValidationReport,
    VidsError,
    VidsMarker,
    provenance_minimum_ok,
)
from .naming import MalformedName, entity_mismatches, is_valid_id, parse_entity_name, sidecar_name
from .splits import check_leakage

IMAGE_EXT = ".nii.gz"
SEG_SUFFIX = "_seg.nii.gz"


class RootNotFound(VidsError, FileNotFoundError):
    pass


class RootNotDirectory(VidsError, NotADirectoryError):
    pass


@dataclass
class JsonFile:
    path: str
    exists: bool = False
    data: Any = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.exists and self.error is None

    @property
    def is_object(self) -> bool:
        return self.ok and isinstance(self.data, dict)


@dataclass
class ImageEntry:
    path: str
    sidecar: JsonFile


@dataclass
class ModalityEntry:
    modality: str
    images: list[ImageEntry] = field(default_factory=list)


@dataclass
class SessionEntry:
    session_id: str
    modalities: list[ModalityEntry] = field(default_factory=list)


@dataclass
class SubjectEntry:
    subject_id: str
    sessions: list[SessionEntry] = field(default_factory=list)
    invalid_sessions: list[str] = field(default_factory=list)

    @property
    def images(self) -> list[ImageEntry]:
        return [img for ses in self.sessions for mod in ses.modalities for img in mod.images]


@dataclass
class AnnotationEntry:
    path: str
    sidecar: JsonFile


@dataclass
class DatasetIndex:
    root: Path
    marker_file: JsonFile
    marker: VidsMarker | None
    marker_error: str | None
    description: JsonFile
    participants: JsonFile
    has_readme: bool
    readme_nonempty: bool
    has_changes: bool
    subjects: list[SubjectEntry]
    invalid_subjects: list[str]
    naming_violations: list[tuple[str, str]]
    has_annotations_dir: bool
    annotations: list[AnnotationEntry]
    has_quality_dir: bool
    quality_summary: JsonFile
    agreement: JsonFile
    has_ml_dir: bool
    splits: JsonFile

    @property
    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]

    @property
    def images(self) -> list[ImageEntry]:
        return [img for s in self.subjects for img in s.images]


class _Scanner:
    def __init__(self, root: Path):
        self.root = root
        self.real_root = root.resolve()

    def rel(self, p: Path) -> str:
        return p.relative_to(self.root).as_posix()

    def inside(self, p: Path) -> bool:
        if not p.is_symlink():
            return True
        try:
            p.resolve().relative_to(self.real_root)
            return True
        except ValueError:
            return False

    def is_dir(self, p: Path) -> bool:
        return p.is_dir() and self.inside(p)

    def is_file(self, p: Path) -> bool:
        return p.is_file() and self.inside(p)

    def entries(self, d: Path) -> list[Path]:
        """Visible children of ``d`` in name order."""
        try:
            names = sorted(os.listdir(d))
        except OSError:
            return []
        return [d / n for n in names if not n.startswith(".")]

    def load_json(self, p: Path) -> JsonFile:
        jf = JsonFile(self.rel(p))
        if not self.is_file(p):
            return jf
        jf.exists = True
        try:
            jf.data = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            jf.error = f"{type(exc).__name__}: {exc}"
        return jf

    def load_participants(self) -> JsonFile:
        pj = self.root / "participants.json"
        if self.is_file(pj):
            jf = self.load_json(pj)
            if jf.ok and not isinstance(jf.data, (dict, list)):
                jf.error = "participants.json must hold an object or an array"
            return jf
        pt = self.root / "participants.tsv"
        jf = JsonFile(self.rel(pt))
        if not self.is_file(pt):
            jf.path = "participants.json"
            return jf
        jf.exists = True
        try:
            rows = list(csv.reader(io.StringIO(pt.read_text(encoding="utf-8")), delimiter="\t"))
        except (OSError, UnicodeDecodeError, csv.Error) as exc:
            jf.error = f"{type(exc).__name__}: {exc}"
            return jf
        rows = [r for r in rows if any(cell.strip() for cell in r)]
        if not rows:
            jf.error = "participants.tsv has no header row"
        elif any(len(r) != len(rows[0]) for r in rows):
            jf.error = "participants.tsv rows have differing column counts"
        else:
            jf.data = rows
        return jf

    def check_name(self, f: Path, subject: str, session: str, modality: str, suffix: str, out: list) -> None:
        try:
            e = parse_entity_name(f.name)
        except MalformedName as exc:
            out.append((self.rel(f), exc.reason))
            return
        bad = entity_mismatches(e, subject, session, modality)
        if bad:
            out.append((self.rel(f), f"{', '.join(bad)} entity disagrees with enclosing directories"))
        elif e.suffix != suffix:
            out.append((self.rel(f), f"suffix '{e.suffix}' does not belong in this tree (expected '{suffix}')"))

    def scan_subject(self, d: Path, sid: str, naming: list) -> SubjectEntry:
        subject = SubjectEntry(sid)
        for sd in self.entries(d):
            if not (sd.name.startswith("ses-") and self.is_dir(sd)):
                continue
            ses_id = sd.name[4:]
            if not is_valid_id(ses_id):
                subject.invalid_sessions.append(self.rel(sd))
                continue
            session = SessionEntry(ses_id)
            for md in self.entries(sd):
                if not self.is_dir(md):
                    continue
                mod = ModalityEntry(md.name)
                for f in self.entries(md):
                    if not self.is_file(f):
                        continue
                    self.check_name(f, sid, ses_id, md.name, "img", naming)
                    if f.name.endswith(IMAGE_EXT):
                        mod.images.append(ImageEntry(self.rel(f), self.load_json(md / sidecar_name(f.name))))
                session.modalities.append(mod)
            subject.sessions.append(session)
        return subject

    def scan_annotations(self, base: Path, naming: list) -> list[AnnotationEntry]:
        out = []
        for dirpath, dirnames, filenames in os.walk(base, followlinks=False):
            dpath = Path(dirpath)
            dirnames[:] = sorted(n for n in dirnames if not n.startswith("."))
            parts = dpath.relative_to(base).parts
            for name in sorted(filenames):
                f = dpath / name
                if name.startswith(".") or not self.is_file(f):
                    continue
                if (
                    len(parts) == 3
                    and parts[0].startswith("sub-")
                    and parts[1].startswith("ses-")
                ):
                    self.check_name(f, parts[0][4:], parts[1][4:], parts[2], "seg", naming)
                else:
                    naming.append((self.rel(f), "outside the sub-*/ses-*/<modality>/ layout"))
                if name.endswith(SEG_SUFFIX):
                    out.append(AnnotationEntry(self.rel(f), self.load_json(dpath / sidecar_name(name))))
        return out

    def scan(self) -> DatasetIndex:
        root = self.root
        marker_file = self.load_json(root / ".vids")
        marker, marker_error = None, None
        if not marker_file.exists:
            marker_error = ".vids marker is missing"
        elif marker_file.error:
            marker_error = f".vids marker does not parse: {marker_file.error}"
        else:
            try:
                marker = VidsMarker.from_dict(marker_file.data)
            except SchemaError as exc:
                marker_error = f".vids marker is invalid: {exc}"

        readme = root / "README.md"
        has_readme = self.is_file(readme)
        readme_nonempty = False
        if has_readme:
            try:
                readme_nonempty = bool(readme.read_text(encoding="utf-8", errors="replace").strip())
            except OSError:
                pass

        naming: list[tuple[str, str]] = []
        subjects, invalid_subjects = [], []
        for d in self.entries(root):
            if not (d.name.startswith("sub-") and self.is_dir(d)):
                continue
            sid = d.name[4:]
            if not is_valid_id(sid):
                invalid_subjects.append(self.rel(d))
                continue
            subjects.append(self.scan_subject(d, sid, naming))

        ann_base = root / "derivatives" / "annotations"
        has_ann = self.is_dir(root / "derivatives") and self.is_dir(ann_base)
        annotations = self.scan_annotations(ann_base, naming) if has_ann else []

        qdir, mdir = root / "quality", root / "ml"
        has_q, has_m = self.is_dir(qdir), self.is_dir(mdir)
        return DatasetIndex(
            root=root,
            marker_file=marker_file,
            marker=marker,
            marker_error=marker_error,
            description=self.load_json(root / "dataset_description.json"),
            participants=self.load_participants(),
            has_readme=has_readme,
            readme_nonempty=readme_nonempty,
            has_changes=self.is_file(root / "CHANGES.md"),
            subjects=subjects,
            invalid_subjects=invalid_subjects,
            naming_violations=naming,
            has_annotations_dir=has_ann,
            annotations=annotations,
            has_quality_dir=has_q,
            quality_summary=self.load_json(qdir / "quality_summary.json") if has_q else JsonFile("quality/quality_summary.json"),
            agreement=self.load_json(qdir / "annotation_agreement.json") if has_q else JsonFile("quality/annotation_agreement.json"),
            has_ml_dir=has_m,
            splits=self.load_json(mdir / "splits.json") if has_m else JsonFile("ml/splits.json"),
        )


def scan_dataset(root: str | os.PathLike) -> DatasetIndex:
    root = Path(root)
    if not root.exists():
        raise RootNotFound(f"{root} does not exist")
    if not root.is_dir():
        raise RootNotDirectory(f"{root} is not a directory")
    return _Scanner(root).scan()


# -- rules -------------------------------------------------------------------

Check = tuple[Outcome, str, list[str]]
_RULES: dict[str, Callable[[DatasetIndex], Check]] = {}


def _rule(rid: str):
    def register(fn):
        _RULES[rid] = fn
        return fn

    return register


def _ok(msg: str) -> Check:
    return Outcome.PASS, msg, []


def _fail(msg: str, evidence) -> Check:
    return Outcome.FAIL, msg, list(evidence)


def _plural(n: int, word: str) -> str:
    return f"{n} {word}" + ("" if n == 1 else "s")


@_rule("S001")
def _s001(ix: DatasetIndex) -> Check:
    if ix.marker is None:
        return _fail(ix.marker_error, [".vids"])
    return _ok(f"VIDS {ix.marker.vids_version}, profile {ix.marker.profile.value}")


@_rule("S002")
def _s002(ix: DatasetIndex) -> Check:
    d = ix.description
    if not d.exists:
        return _fail("dataset_description.json is missing", [d.path])
    if d.error:
        return _fail(f"dataset_description.json does not parse: {d.error}", [d.path])
    if not isinstance(d.data, dict):
        return _fail("dataset_description.json is not a JSON object", [d.path])
    missing = DatasetDescription.from_dict(d.data).missing_fields()
    if missing:
        return _fail(f"required fields missing or empty: {', '.join(missing)}", [d.path])
    return _ok("all 6 required fields present")


@_rule("S003")
def _s003(ix: DatasetIndex) -> Check:
    p = ix.participants
    if not p.exists:
        return _fail("neither participants.json nor participants.tsv exists", ["participants.json"])
    if p.error:
        return _fail(f"{p.path} does not parse: {p.error}", [p.path])
    return _ok(f"{p.path} present")


@_rule("S004")
def _s004(ix: DatasetIndex) -> Check:
    if not ix.has_readme:
        return _fail("README.md is missing", ["README.md"])
    if not ix.readme_nonempty:
        return _fail("README.md is empty", ["README.md"])
    return _ok("README.md present")


@_rule("S005")
def _s005(ix: DatasetIndex) -> Check:
    if ix.invalid_subjects:
        return _fail("subject directories with malformed ids", ix.invalid_subjects)
    if not ix.subjects:
        return _fail("no sub-* directories found", ["sub-*"])
    return _ok(_plural(len(ix.subjects), "subject"))


@_rule("S006")
def _s006(ix: DatasetIndex) -> Check:
    bad = [f"sub-{s.subject_id}" for s in ix.subjects if not s.sessions]
    malformed = [p for s in ix.subjects for p in s.invalid_sessions]
    if bad or malformed:
        parts = []
        if bad:
            parts.append(f"{_plural(len(bad), 'subject')} without a session")
        if malformed:
            parts.append("session directories with malformed ids")
        return _fail("; ".join(parts), bad + malformed)
    return _ok("all subjects have sessions")


@_rule("I001")
def _i001(ix: DatasetIndex) -> Check:
    bad = [f"sub-{s.subject_id}" for s in ix.subjects if not s.images]
    if bad:
        return _fail(f"{_plural(len(bad), 'subject')} without a {IMAGE_EXT} image", bad)
    return _ok(_plural(len(ix.images), "imaging file"))


@_rule("I002")
def _i002(ix: DatasetIndex) -> Check:
    bad = [img.sidecar.path for img in ix.images if not img.sidecar.exists]
    if bad:
        return _fail(f"{_plural(len(bad), 'imaging sidecar')} missing", bad)
    return _ok(_plural(len(ix.images), "sidecar"))


@_rule("I003")
def _i003(ix: DatasetIndex) -> Check:
    bad = [img.sidecar.path for img in ix.images if img.sidecar.exists and not img.sidecar.is_object]
    if bad:
        return _fail(f"{_plural(len(bad), 'imaging sidecar')} not a valid JSON object", bad)
    return _ok("imaging sidecars parse")


@_rule("I004")
def _i004(ix: DatasetIndex) -> Check:
    if ix.naming_violations:
        shown = "; ".join(f"{p}: {why}" for p, why in ix.naming_violations[:3])
        more = "" if len(ix.naming_violations) <= 3 else f" (+{len(ix.naming_violations) - 3} more)"
        msg = f"{_plural(len(ix.naming_violations), 'file')} break the naming convention: {shown}{more}"
        return Outcome.WARN, msg, [p for p, _ in ix.naming_violations]
    return _ok("all file names follow the convention")


@_rule("A001")
def _a001(ix: DatasetIndex) -> Check:
    if not ix.has_annotations_dir:
        return _fail("derivatives/annotations/ is missing", ["derivatives/annotations"])
    return _ok("derivatives/annotations/ present")


@_rule("A002")
def _a002(ix: DatasetIndex) -> Check:
    if not ix.annotations:
        return _fail(f"no *{SEG_SUFFIX} files under derivatives/annotations/", ["derivatives/annotations"])
    return _ok(_plural(len(ix.annotations), "segmentation file"))


@_rule("A003")
def _a003(ix: DatasetIndex) -> Check:
    bad = [a.sidecar.path for a in ix.annotations if not a.sidecar.exists]
    if bad:
        return _fail(f"{_plural(len(bad), 'annotation sidecar')} missing", bad)
    return _ok("every segmentation has a sidecar")


def _annotation_problem(jf: JsonFile) -> str | None:
    if jf.error:
        return "does not parse"
    if not isinstance(jf.data, dict):
        return "is not a JSON object"
    try:
        sidecar = AnnotationSidecar.from_dict(jf.data)
    except SchemaError as exc:
        return str(exc)
    if sidecar.vids_version is None or not str(sidecar.vids_version).strip():
        return "lacks VIDSVersion"
    return None


@_rule("A004")
def _a004(ix: DatasetIndex) -> Check:
    problems = [(a.sidecar.path, _annotation_problem(a.sidecar)) for a in ix.annotations if a.sidecar.exists]
    bad = [(p, why) for p, why in problems if why]
    if bad:
        return _fail("; ".join(f"{p} {why}" for p, why in bad), [p for p, _ in bad])
    return _ok("annotation sidecars valid")


@_rule("A005")
def _a005(ix: DatasetIndex) -> Check:
    bad = []
    for a in ix.annotations:
        if a.sidecar.is_object and not provenance_minimum_ok(Provenance.from_dict(a.sidecar.data.get("Provenance"))):
            bad.append(a.sidecar.path)
    if bad:
        return _fail(
            f"{_plural(len(bad), 'sidecar')} lack annotator identity (ID or Name) plus date or tool",
            bad,
        )
    return _ok("provenance complete")


@_rule("Q001")
def _q001(ix: DatasetIndex) -> Check:
    return _ok("quality/ present") if ix.has_quality_dir else _fail("quality/ is missing", ["quality"])


def _json_doc(jf: JsonFile, kinds=(dict,)) -> Check:
    if not jf.exists:
        return _fail(f"{jf.path} is missing", [jf.path])
    if jf.error:
        return _fail(f"{jf.path} does not parse: {jf.error}", [jf.path])
    if not isinstance(jf.data, kinds):
        return _fail(f"{jf.path} has the wrong top-level type", [jf.path])
    return _ok(f"{jf.path} present")


@_rule("Q002")
def _q002(ix: DatasetIndex) -> Check:
    return _json_doc(ix.quality_summary)


@_rule("Q003")
def _q003(ix: DatasetIndex) -> Check:
    return _json_doc(ix.agreement, (dict, list))


@_rule("M001")
def _m001(ix: DatasetIndex) -> Check:
    return _ok("ml/ present") if ix.has_ml_dir else _fail("ml/ is missing", ["ml"])


@_rule("M002")
def _m002(ix: DatasetIndex) -> Check:
    base = _json_doc(ix.splits)
    if base[0] is not Outcome.PASS:
        return base
    try:
        spec = SplitsSpec.from_dict(ix.splits.data)
    except SchemaError as exc:
        return _fail(f"ml/splits.json is malformed: {exc}", [ix.splits.path])
    violations = check_leakage(spec, ix.subject_ids)
    if violations:
        return _fail("split leakage: " + "; ".join(str(v) for v in violations), [ix.splits.path] + sorted({v.subject_id for v in violations}))
    return _ok("splits disjoint and complete")


@_rule("D001")
def _d001(ix: DatasetIndex) -> Check:
    if not ix.has_changes:
        return Outcome.WARN, "CHANGES.md is missing", ["CHANGES.md"]
    return _ok("CHANGES.md present")


def _details(ix: DatasetIndex) -> dict[str, str]:
    return {
        "S": f"{_plural(len(ix.subjects), 'subject')}, all with sessions",
        "I": f"{_plural(len(ix.images), 'imaging file')}, {_plural(sum(i.sidecar.exists for i in ix.images), 'sidecar')}",
        "A": f"{_plural(len(ix.annotations), 'segmentation file')}, provenance complete",
        "Q": "quality summary + agreement",
        "M": "splits.json",
        "D": "CHANGES.md present",
    }


def evaluate(ix: DatasetIndex, profile: Profile) -> list[RuleResult]:
    results = []
    for spec in RULE_CATALOG:
        if not spec.applies_to(profile):
            results.append(RuleResult(spec.id, Outcome.SKIP, "Full profile only"))
            continue
        outcome, msg, evidence = _RULES[str(spec.id)](ix)
        assert not (outcome is Outcome.FAIL and spec.advisory)
        results.append(RuleResult(spec.id, outcome, msg, tuple(evidence)))
    return results


def validate(root: str | os.PathLike, profile: Profile | str | None = None) -> ValidationReport:
    """Validate the dataset at ``root``.

    The profile comes from ``profile`` if given, else from the ``.vids``
    marker, else POC (with a note on S001).
    """
    ix = scan_dataset(root)
    notes = []
    if profile is not None:
        prof, source = Profile.parse(profile), "override"
    elif ix.marker is not None:
        prof, source = ix.marker.profile, "marker"
    else:
        prof, source = Profile.POC, "default"
        notes.append("WARN: no valid .vids marker; validating under the POC profile")
    results = evaluate(ix, prof)
    if source == "default":
        s001 = results[0]
        results[0] = RuleResult(s001.id, s001.outcome, f"{s001.message} (WARN: profile defaulted to poc)", s001.evidence)
    return ValidationReport(prof, tuple(results), str(root), source, tuple(notes), _details(ix))


# -- rendering ----------------------------------------------------------------


def _group_label(ids: list[RuleId]) -> str:
    label = f"{ids[0]}-{ids[-1]}:" if len(ids) > 1 else f"{ids[0]}:"
    return label.ljust(10)


_SEVERITY = [Outcome.FAIL, Outcome.WARN, Outcome.SKIP, Outcome.PASS]


def render_report(r: ValidationReport, format: str = "human") -> str:
    if format == "json":
        return json.dumps(r.to_dict(), indent=2)
    if format != "human":
        raise ValueError(f"unknown report format {format!r}")
    lines = [f"VIDS validation of {r.dataset or '.'} (profile: {r.profile.value}, {r.profile_source})"]
    lines += [f"  {n}" for n in r.notes]
    for cat in CATEGORY_ORDER:
        group = [x for x in r.results if x.id.category == cat]
        outcomes = {x.outcome for x in group}
        if outcomes == {Outcome.PASS}:
            lines.append(f"  {_group_label([x.id for x in group])} PASS ({r.details.get(cat, 'ok')})")
        elif outcomes == {Outcome.SKIP}:
            lines.append(f"  {_group_label([x.id for x in group])} SKIP (Full profile only)")
        else:
            worst = next(o for o in _SEVERITY if o in outcomes)
            lines.append(f"  {_group_label([x.id for x in group])} {worst.value}")
            for x in group:
                if x.outcome is not Outcome.PASS:
                    lines.append(f"    {x.id} {x.outcome.value}: {x.message}")
    counts = r.counts
    applicable = len(r.results) - counts["SKIP"]
    if r.passed:
        extra = []
        if counts["SKIP"]:
            extra.append(f"{counts['SKIP']} skipped")
        if counts["WARN"]:
            extra.append(_plural(counts["WARN"], "warning"))
        tail = "".join(f", {e}" for e in extra)
        lines.append(f"  VALIDATION PASSED ({applicable}/{applicable} rules{tail})")
    else:
        failed = [str(x.id) for x in r.results if x.outcome is Outcome.FAIL]
        lines.append(f"  VALIDATION FAILED ({len(failed)} of {applicable} rules failed: {', '.join(failed)})")
    return "\n".join(lines)
