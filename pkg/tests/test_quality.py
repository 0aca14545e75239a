import itertools
import json
import shutil
from fractions import Fraction

import numpy as np
import pytest

from vidskit.quality import (
    ReaderMaskSet,
    build_quality_artifacts,
    consensus_mask,
    dice,
    load_reader_masks,
    pairwise_dice,
    quality_tier,
    recompute_quality,
)
from vidskit.volume import DimsMismatch, LabelVolume


def naive_dice(a, b):
    """Voxel-by-voxel loop, no numpy reductions."""
    inter = na = nb = 0
    for x, y, z in itertools.product(*(range(n) for n in a.shape)):
        pa, pb = bool(a[x, y, z]), bool(b[x, y, z])
        na += pa
        nb += pb
        inter += pa and pb
    if na + nb == 0:
        return 1.0
    return 2 * inter / (na + nb)


def _vol(arr):
    return LabelVolume(np.asarray(arr, dtype=np.uint8))


def test_dice_matches_naive_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        p, q = rng.uniform(0, 0.6, size=2)
        a = (rng.random((8, 8, 8)) < p).astype(np.uint8)
        b = (rng.random((8, 8, 8)) < q).astype(np.uint8)
        d = dice(_vol(a), _vol(b))
        assert abs(d - naive_dice(a, b)) <= 1e-12
        assert d == dice(_vol(b), _vol(a))
        assert dice(_vol(a), _vol(a)) == 1.0


def test_dice_handcrafted():
    # |A| = 8, |B| = 6, overlap 4 -> 8/14
    a = np.zeros((4, 4, 4), np.uint8)
    b = np.zeros_like(a)
    a[0, 0, :4] = 1
    a[1, 0, :4] = 1
    b[1, 0, :4] = 1
    b[2, 0, :2] = 1
    assert dice(a, b) == pytest.approx(0.5714285714285714, abs=1e-15)


def test_dice_empty_conventions():
    z = np.zeros((2, 2, 2), np.uint8)
    o = z.copy()
    o[0, 0, 0] = 1
    assert dice(z, z) == 1.0
    assert dice(z, o) == 0.0 and dice(o, z) == 0.0


def test_dice_dims_mismatch():
    with pytest.raises(DimsMismatch):
        dice(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))


def test_mask_set_invariants():
    m = _vol(np.ones((2, 2, 2)))
    with pytest.raises(ValueError):
        ReaderMaskSet("u", (m,))
    with pytest.raises(DimsMismatch):
        ReaderMaskSet("u", (m, _vol(np.ones((2, 2, 3)))))
    with pytest.raises(DimsMismatch):
        ReaderMaskSet("u", (m, LabelVolume(m.data, (2.0, 1.0, 1.0))))
    with pytest.raises(ValueError):
        ReaderMaskSet("u", (m, _vol(np.full((2, 2, 2), 2))))


def test_pairwise_enumerates_all_pairs():
    rng = np.random.default_rng(5)
    masks = tuple(_vol(rng.random((4, 4, 4)) < 0.4) for _ in range(4))
    pairs = pairwise_dice(ReaderMaskSet("u", masks))
    assert [(i, j) for i, j, _ in pairs] == list(itertools.combinations(range(4), 2))
    for i, j, d in pairs:
        assert d == naive_dice(masks[i].data, masks[j].data)


def _voting_set(votes, readers):
    """One voxel per entry of ``votes``; entry k is marked by the first votes[k] readers."""
    masks = []
    for r in range(readers):
        masks.append(_vol(np.array([[[1 if v > r else 0 for v in votes]]])))
    return ReaderMaskSet("u", tuple(masks))


def test_consensus_two_of_four_included():
    out = consensus_mask(_voting_set([0, 1, 2, 3, 4], 4), 0.5)
    assert out.data[0, 0].tolist() == [0, 0, 1, 1, 1]


def test_consensus_one_of_three_excluded():
    out = consensus_mask(_voting_set([0, 1, 2, 3], 3), 0.5)
    assert out.data[0, 0].tolist() == [0, 0, 1, 1]


def test_consensus_two_readers_is_union():
    rng = np.random.default_rng(9)
    a, b = (_vol(rng.random((6, 6, 6)) < 0.3) for _ in range(2))
    out = consensus_mask(ReaderMaskSet("u", (a, b)), 0.5)
    assert np.array_equal(out.data, (a.data | b.data))


def test_consensus_threshold_monotone():
    rng = np.random.default_rng(11)
    thresholds = [Fraction(k, 12) for k in range(1, 13)]
    for _ in range(25):
        n = int(rng.integers(2, 7))
        s = ReaderMaskSet("u", tuple(_vol(rng.random((5, 5, 5)) < 0.5) for _ in range(n)))
        prev = None
        for t in thresholds:
            cur = consensus_mask(s, t).data.astype(bool)
            if prev is not None:
                assert not np.any(cur & ~prev)
            prev = cur


def test_consensus_rejects_bad_threshold():
    s = _voting_set([1, 2], 2)
    for t in (0, 1.5, -0.1):
        with pytest.raises(ValueError):
            consensus_mask(s, t)


@pytest.mark.parametrize(
    "value, tier",
    [
        (0.7765, "acceptable"),
        (0.90, "excellent"),
        (0.85, "good"),
        (0.75, "acceptable"),
        (0.3639, "poor"),
        (0.8999999, "good"),
        (0.7499999, "poor"),
        (1.0, "excellent"),
        (0.0, "poor"),
        (None, "unrated"),
    ],
)
def test_tiers(value, tier):
    assert quality_tier(value) == tier


def test_tier_rejects_out_of_range():
    with pytest.raises(ValueError):
        quality_tier(1.01)


def test_build_artifacts():
    per_subject = {
        "001": {"n1": [(0, 1, 0.9), (0, 2, 0.8), (1, 2, 1.0)]},
        "002": {"n1": [(0, 1, 0.5)], "n2": [(0, 1, 0.7)]},
    }
    summary, agreement = build_quality_artifacts(per_subject, ["001", "002", "003"])
    rows = {r.subject_id: r for r in summary.subjects}
    assert rows["001"].mean_pairwise_dice == pytest.approx(0.9) and rows["001"].tier == "excellent"
    assert rows["002"].mean_pairwise_dice == pytest.approx(0.6) and rows["002"].tier == "poor"
    assert rows["003"].tier == "unrated" and rows["003"].mean_pairwise_dice is None
    assert summary.pair_count == 5
    # pooled mean over pairs and mean over subject means differ here; both are recorded
    assert summary.mean_dice == pytest.approx(3.9 / 5)
    assert summary.subject_mean_of_means == pytest.approx(0.75)
    assert (summary.min_dice, summary.max_dice) == (0.5, 1.0)
    assert summary.tier_counts == {"excellent": 1, "good": 0, "acceptable": 0, "poor": 1, "unrated": 1}
    assert len(agreement["Records"]) == 5
    json.dumps(summary.to_dict())


def test_recompute_matches_generated(full_fixture, tmp_path):
    root, stats = full_fixture
    dst = tmp_path / "ds"
    shutil.copytree(root, dst)
    before = json.loads((dst / "quality" / "quality_summary.json").read_text())
    summary = recompute_quality(dst, [f"{i:03d}" for i in range(1, 11)])
    assert summary.to_dict() == before
    assert summary.mean_dice == stats.mean_dice
    sets = load_reader_masks(dst)
    assert len(sets) == 10 and all(s.readers == 4 for u in sets.values() for s in u.values())
