import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vidskit.model import (
    DESCRIPTION_REQUIRED_FIELDS,
    AnnotationSidecar,
    DatasetDescription,
    LabelMap,
    Outcome,
    Profile,
    Provenance,
    RuleId,
    RuleResult,
    SchemaError,
    Scorecard,
    SplitsSpec,
    UnknownRule,
    ValidationReport,
    VidsMarker,
    WrongDimensionCount,
    provenance_minimum_ok,
    rule_catalog,
)

RULE_IDS = (
    "S001 S002 S003 S004 S005 S006 I001 I002 I003 I004 "
    "A001 A002 A003 A004 A005 Q001 Q002 Q003 M001 M002 D001"
).split()

EXAMPLE_SIDECAR = {
    "VIDSVersion": "1.0",
    "AnnotationType": "segmentation",
    "SourceImage": "sub-001_ses-baseline_ct_img.nii.gz",
    "LabelMap": {"0": "background", "1": "nodule"},
    "Provenance": {
        "Annotator": {"ID": "radiologist_001", "Credentials": "MD, Board-certified, 8yr"},
        "AnnotationProcess": {"Tool": "3D Slicer 5.6.2", "Date": "2026-03-15", "TimeSpent_minutes": 18},
        "QualityControl": {"ReviewedBy": "senior_radiologist_001", "ReviewOutcome": "approved", "Confidence": 0.93},
    },
}


def test_catalog_golden():
    cat = rule_catalog()
    assert [str(r.id) for r in cat] == RULE_IDS
    assert str(cat[0].id) == "S001" and str(cat[-1].id) == "D001"


def test_catalog_flags():
    cat = {str(r.id): r for r in rule_catalog()}
    assert {k for k, r in cat.items() if r.full_only} == {"Q001", "Q002", "Q003", "M001", "M002"}
    assert {k for k, r in cat.items() if r.advisory} == {"I004", "D001"}
    assert cat["Q002"].full_only and not cat["Q002"].applies_to(Profile.POC)
    assert sum(r.applies_to(Profile.POC) for r in cat.values()) == 16


@pytest.mark.parametrize("bad", ["S007", "I005", "A000", "X001", "Q4", "M003", "D002", ""])
def test_rule_ids_are_closed(bad):
    with pytest.raises(UnknownRule):
        RuleId.parse(bad)


def test_rule_id_rendering_and_order():
    ids = [RuleId.parse(t) for t in RULE_IDS]
    assert [str(i) for i in ids] == RULE_IDS
    assert sorted(reversed(ids)) == ids
    with pytest.raises(UnknownRule):
        RuleId("S", 7)


def test_provenance_minimum_examples():
    example = Provenance.from_dict(EXAMPLE_SIDECAR["Provenance"])
    assert provenance_minimum_ok(example)
    name_date = Provenance.from_dict({"Annotator": {"Name": "A"}, "AnnotationProcess": {"Date": "2026-03-15"}})
    assert provenance_minimum_ok(name_date)
    no_identity = Provenance.from_dict({"Annotator": {"Credentials": "MD"}, "AnnotationProcess": {"Tool": "x"}})
    assert not provenance_minimum_ok(no_identity)


@pytest.mark.parametrize(
    "prov",
    [
        {},
        {"Annotator": {"ID": "r1"}},
        {"AnnotationProcess": {"Tool": "x"}},
        {"Annotator": {"ID": "  "}, "AnnotationProcess": {"Tool": "x"}},
        {"Annotator": {"ID": "r1"}, "AnnotationProcess": {"Tool": "", "Date": None}},
        {"Annotator": "r1", "AnnotationProcess": {"Tool": "x"}},
    ],
)
def test_provenance_minimum_rejects(prov):
    assert not provenance_minimum_ok(Provenance.from_dict(prov))


def test_annotation_sidecar_round_trip_keeps_extensions():
    doc = json.loads(json.dumps(EXAMPLE_SIDECAR))
    doc["Annotations"] = [{"Characteristics": {"Malignancy": 3, "Texture": "solid"}}]
    doc["Provenance"]["Annotator"]["Institution"] = "X"
    doc["Provenance"]["Annotator"]["Custom"] = {"shift": "night"}
    doc["SiteExtension"] = {"a": 1}
    side = AnnotationSidecar.from_dict(doc)
    assert side.to_dict() == doc
    assert AnnotationSidecar.from_dict(side.to_dict()) == side


def test_label_map_invariants():
    assert LabelMap.from_dict({"0": "background", "1": "nodule"}).entries["1"] == "nodule"
    with pytest.raises(SchemaError):
        LabelMap.from_dict({"1": "nodule"})
    with pytest.raises(SchemaError):
        LabelMap.from_dict({"0": "bg", "x": "nodule"})
    with pytest.raises(SchemaError):
        LabelMap.from_dict({"0": "bg", "01": "a", "1": "b"})


def test_description_missing_fields():
    full = {k: "x" for k in DESCRIPTION_REQUIRED_FIELDS}
    assert DatasetDescription.from_dict(full).missing_fields() == []
    full["Authors"] = []
    full["License"] = " "
    assert DatasetDescription.from_dict(full).missing_fields() == ["License", "Authors"]
    assert len(DESCRIPTION_REQUIRED_FIELDS) == 6


def test_marker_parsing():
    m = VidsMarker.from_dict({"VIDSVersion": "1.0", "Profile": "FULL"})
    assert m.profile is Profile.FULL and m.to_dict() == {"VIDSVersion": "1.0", "Profile": "full"}
    for bad in ({"VIDSVersion": "1.0", "Profile": "gold"}, {"Profile": "poc"}, ["poc"]):
        with pytest.raises(SchemaError):
            VidsMarker.from_dict(bad)


def test_profile_serialization():
    assert Profile.parse("poc").value == "poc" and Profile.parse(" Full ") is Profile.FULL
    with pytest.raises(ValueError):
        Profile.parse("bogus")


def _report(outcomes):
    results = tuple(RuleResult(RuleId.parse(r), o, "m", ("e",)) for r, o in zip(RULE_IDS, outcomes))
    return ValidationReport(Profile.FULL, results, "ds")


@given(st.lists(st.sampled_from(list(Outcome)), min_size=21, max_size=21))
def test_report_status_recomputable(outcomes):
    rep = _report(outcomes)
    assert rep.passed == (Outcome.FAIL not in outcomes)
    assert sum(rep.counts.values()) == 21
    again = ValidationReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert again == rep and again.status == rep.status


def test_report_requires_all_rules():
    with pytest.raises(ValueError):
        ValidationReport(Profile.POC, ())


ids = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=6)


@given(st.lists(ids, unique=True, min_size=3, max_size=12), st.integers(0, 2**64 - 1))
def test_splits_spec_round_trip(members, seed):
    a, b = len(members) // 3, 2 * len(members) // 3
    spec = SplitsSpec(tuple(members[:a]), tuple(members[a:b]), tuple(members[b:]), seed, (0.7, 0.15, 0.15), "m", "r")
    assert SplitsSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_scorecard_cardinality():
    card = Scorecard.uniform("partial")
    assert len(card.entries) == 22
    data = card.to_json()
    assert Scorecard.from_json(json.loads(json.dumps(data))) == Scorecard.uniform("partial")
    with pytest.raises(WrongDimensionCount):
        Scorecard.from_json(data["Dimensions"][:21])
    moved = [dict(e) for e in data["Dimensions"]]
    moved[0]["Category"] = "Imaging"
    with pytest.raises(WrongDimensionCount):
        Scorecard.from_json(moved)
