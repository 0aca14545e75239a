"""Filename grammar ``sub-<ID>_ses-<ID>_<modality>_<suffix>.<ext>`` and directory names."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import VidsError

SUFFIXES = ("img", "seg")
_ID = re.compile(r"[A-Za-z0-9]+")
_PREFIX = {"subject": "sub-", "session": "ses-"}


class MalformedName(VidsError, ValueError):
    """Raised with the character offset of the first grammar violation."""

    def __init__(self, name: str, position: int, reason: str):
        super().__init__(f"{name!r}: {reason} (at position {position})")
        self.name = name
        self.position = position
        self.reason = reason


def is_valid_id(text: str) -> bool:
    return bool(_ID.fullmatch(text))


@dataclass(frozen=True)
class EntityName:
    subject_id: str
    session_id: str
    modality: str
    suffix: str
    extension: str

    def __post_init__(self) -> None:
        for label, value in (("subject", self.subject_id), ("session", self.session_id)):
            if not is_valid_id(value):
                raise ValueError(f"{label} id {value!r} must be non-empty alphanumeric")
        if not (is_valid_id(self.modality) and self.modality == self.modality.lower()):
            raise ValueError(f"modality {self.modality!r} must be lowercase alphanumeric")
        if self.suffix not in SUFFIXES:
            raise ValueError(f"suffix {self.suffix!r} not in {SUFFIXES}")
        if not self.extension or self.extension.startswith(".") or self.extension.endswith("."):
            raise ValueError(f"bad extension {self.extension!r}")

    @property
    def stem(self) -> str:
        return f"sub-{self.subject_id}_ses-{self.session_id}_{self.modality}_{self.suffix}"

    def with_(self, **changes) -> EntityName:
        values = {**self.__dict__, **changes}
        return EntityName(**values)

    def __str__(self) -> str:
        return render_entity_name(self)


def parse_entity_name(filename: str) -> EntityName:
    """Split a bare VIDS filename into its entities.

    Raises MalformedName naming the first offending token. The modality is
    lowercased; the extension is everything after the first dot.
    """
    if "/" in filename or "\\" in filename:
        raise MalformedName(filename, 0, "expected a bare file name, not a path")
    dot = filename.find(".")
    if dot < 0:
        raise MalformedName(filename, len(filename), "missing extension")
    stem, ext = filename[:dot], filename[dot + 1 :]

    tokens = stem.split("_")
    offsets = []
    pos = 0
    for tok in tokens:
        offsets.append(pos)
        pos += len(tok) + 1

    def token(i: int) -> str:
        return tokens[i] if i < len(tokens) else ""

    def where(i: int) -> int:
        return offsets[i] if i < len(offsets) else dot

    ids = []
    for i, (prefix, what) in enumerate((("sub-", "subject"), ("ses-", "session"))):
        tok = token(i)
        if not tok.startswith(prefix):
            raise MalformedName(filename, where(i), f"expected '{prefix}<ID>' {what} token")
        ident = tok[len(prefix) :]
        if not ident:
            raise MalformedName(filename, where(i) + len(prefix), f"empty {what} id")
        if not is_valid_id(ident):
            raise MalformedName(filename, where(i) + len(prefix), f"{what} id {ident!r} is not alphanumeric")
        ids.append(ident)

    modality = token(2)
    if not modality:
        raise MalformedName(filename, where(2), "missing modality token")
    if not is_valid_id(modality):
        raise MalformedName(filename, where(2), f"bad modality token {modality!r}")
    suffix = token(3)
    if suffix not in SUFFIXES:
        raise MalformedName(filename, where(3), f"suffix must be one of {', '.join(SUFFIXES)}")
    if len(tokens) > 4:
        raise MalformedName(filename, where(4), "unexpected token after suffix")
    if not ext or ext.endswith(".") or ".." in ext:
        raise MalformedName(filename, dot + 1, "bad extension")
    return EntityName(ids[0], ids[1], modality.lower(), suffix, ext)


def render_entity_name(e: EntityName) -> str:
    return f"{e.stem}.{e.extension}"


def parse_dir_component(name: str, kind: str) -> str:
    """Return the id of a ``sub-<ID>`` or ``ses-<ID>`` directory name."""
    try:
        prefix = _PREFIX[kind]
    except KeyError:
        raise ValueError(f"kind must be 'subject' or 'session', not {kind!r}") from None
    if not name.startswith(prefix):
        raise MalformedName(name, 0, f"expected '{prefix}' prefix")
    ident = name[len(prefix) :]
    if not is_valid_id(ident):
        raise MalformedName(name, len(prefix), f"{kind} id {ident!r} must be non-empty alphanumeric")
    return ident


def entity_mismatches(e: EntityName, subject_id: str, session_id: str, modality: str) -> list[str]:
    """Names of entities that disagree with the enclosing directories."""
    out = []
    if e.subject_id != subject_id:
        out.append("subject")
    if e.session_id != session_id:
        out.append("session")
    if e.modality != modality.lower():
        out.append("modality")
    return out


def split_extension(filename: str) -> tuple[str, str]:
    """``("x_img", "nii.gz")`` for ``"x_img.nii.gz"``; the extension starts at the first dot."""
    dot = filename.find(".")
    if dot < 0:
        return filename, ""
    return filename[:dot], filename[dot + 1 :]


def sidecar_name(filename: str) -> str:
    return split_extension(filename)[0] + ".json"
