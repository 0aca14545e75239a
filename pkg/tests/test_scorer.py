import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vidskit.model import DIMENSIONS, SCORE_CATEGORIES, Scorecard, UnknownCategory
from vidskit.scorer import (
    BUNDLED_CARDS,
    EmptyInput,
    bundled_scorecard,
    category_averages,
    load_scorecard,
    render_row,
    round_half_up,
    score,
)

# category sums per published scorecard, in SCORE_CATEGORIES order
PUBLISHED = {
    "LIDC-IDRI": ((1.5, 1.0, 1.5, 1.0, 1.0, 0.0), 6.0, 27),
    "BraTS": ((2.0, 2.0, 2.0, 0.5, 1.0, 1.0), 8.5, 39),
    "CheXpert": ((1.5, 1.0, 1.0, 0.0, 0.0, 1.0), 4.5, 20),
    "MSD": ((1.5, 2.0, 2.0, 0.0, 0.0, 1.0), 6.5, 30),
}


def test_dimension_layout():
    assert [len(DIMENSIONS[c]) for c in SCORE_CATEGORIES] == [6, 3, 4, 5, 2, 2]


@pytest.mark.parametrize("name", BUNDLED_CARDS)
def test_published_rows(name):
    cats, total, pct = PUBLISHED[name]
    s = score(bundled_scorecard(name))
    assert tuple(float(s.per_category[c]) for c in SCORE_CATEGORIES) == cats
    assert s.total == Fraction(total).limit_denominator(2) and s.percent == pct


def test_native_card_is_perfect():
    s = score(bundled_scorecard("VIDS-native"))
    assert s.total == 22 and s.percent == 100


def test_category_averages():
    avg = category_averages([bundled_scorecard(n) for n in BUNDLED_CARDS])
    assert [avg[c] for c in SCORE_CATEGORIES] == [27, 50, 41, 8, 25, 38]


def test_round_half_up():
    assert round_half_up(Fraction(1, 2)) == 1
    assert round_half_up(Fraction(5, 2)) == 3  # banker's rounding would give 2
    assert round_half_up(Fraction(49, 100)) == 0
    assert round_half_up(Fraction(300, 11)) == 27


def test_uniform_cards():
    assert score(Scorecard.uniform("absent")).percent == 0
    half = score(Scorecard.uniform("partial"))
    assert half.total == 11 and half.percent == 50


@given(st.lists(st.sampled_from(["satisfied", "partial", "absent"]), min_size=22, max_size=22))
def test_score_bounds_and_monotone(statuses):
    dims = Scorecard.uniform("absent").to_json()["Dimensions"]
    for d, s in zip(dims, statuses):
        d["Status"] = s
    card = Scorecard.from_json(dims)
    base = score(card)
    assert 0 <= base.total <= 22 and 0 <= base.percent <= 100
    assert base.total == sum(Fraction({"satisfied": 2, "partial": 1, "absent": 0}[s], 2) for s in statuses)
    # raising any single status never lowers the score
    for k, s in enumerate(statuses):
        if s != "satisfied":
            up = [dict(d) for d in dims]
            up[k]["Status"] = "satisfied"
            assert score(Scorecard.from_json(up)).total > base.total


def test_bad_inputs():
    dims = Scorecard.uniform("absent").to_json()["Dimensions"]
    with pytest.raises(EmptyInput):
        category_averages([])
    bad = [dict(d) for d in dims]
    bad[0]["Category"] = "Vibes"
    with pytest.raises(UnknownCategory):
        Scorecard.from_json(bad)
    bad = [dict(d) for d in dims]
    bad[0]["Status"] = "mostly"
    with pytest.raises(ValueError):
        Scorecard.from_json(bad)


def test_load_and_render(tmp_path):
    p = tmp_path / "mine.json"
    p.write_text(json.dumps(bundled_scorecard("BraTS").to_json()))
    s = score(load_scorecard(p))
    text = render_row(s)
    assert "Total (22)" in text and text.splitlines()[-1].split()[-1] == "39%"
    assert json.loads(json.dumps(s.to_dict()))["Percent"] == 39
