from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vidskit.model import SplitsSpec
from vidskit.splits import (
    BadRatios,
    DuplicateSubjects,
    SplitMix64,
    apportion,
    check_leakage,
    generate_splits,
    read_splits,
    shuffle,
    write_splits,
)


def test_splitmix64_reference_vector():
    # widely published reference output for seed 1234567
    rng = SplitMix64(1234567)
    assert [rng.next() for _ in range(5)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]


def _hundredths(r):
    """Ratio as an integer count of hundredths, parsed from its decimal text."""
    whole, _, frac = f"{r:.2f}".partition(".")
    return int(whole) * 100 + int(frac)


def oracle_apportion(n, ratios):
    """Largest remainder in integer hundredths; ties to the earlier split."""
    parts = [_hundredths(r) for r in ratios]
    quotas = [n * p for p in parts]  # in units of 1/100
    base = [q // 100 for q in quotas]
    rem = [q % 100 for q in quotas]
    left = n - sum(base)
    for k in sorted(range(3), key=lambda k: (-rem[k], k))[:left]:
        base[k] += 1
    return tuple(base)


@pytest.mark.parametrize(
    "n, ratios, sizes",
    [
        (100, (0.70, 0.15, 0.15), (70, 15, 15)),
        (10, (0.70, 0.15, 0.15), (7, 2, 1)),
        (1, (0.70, 0.15, 0.15), (1, 0, 0)),
        (3, (0.34, 0.33, 0.33), (1, 1, 1)),
        (20, (0.80, 0.10, 0.10), (16, 2, 2)),
    ],
)
def test_sizes(n, ratios, sizes):
    assert apportion(n, ratios) == sizes
    assert generate_splits([f"s{i}" for i in range(n)], ratios, seed=1).sizes == sizes


def test_apportion_matches_integer_oracle():
    grid = [(a / 100, b / 100, (100 - a - b) / 100) for a in range(5, 91, 5) for b in range(5, 96 - a, 5)]
    for ratios in grid:
        for n in range(0, 60):
            assert apportion(n, ratios) == oracle_apportion(n, ratios), (n, ratios)


def test_exact_ratio_arithmetic():
    # 0.15 as a binary float is slightly above 3/20; ties must still go to val over test
    assert apportion(10, (0.7, 0.15, 0.15)) == (7, 2, 1)
    assert apportion(10, (Fraction(7, 10), Fraction(3, 20), Fraction(3, 20))) == (7, 2, 1)


id_lists = st.lists(st.text(alphabet="abcdef0123456789", min_size=1, max_size=5), unique=True, min_size=1, max_size=60)


@given(id_lists, st.integers(0, 2**64 - 1))
def test_partition_property(ids, seed):
    spec = generate_splits(ids, seed=seed)
    members = spec.train + spec.val + spec.test
    assert sorted(members) == sorted(ids)
    assert check_leakage(spec, ids) == []
    assert spec.sizes == apportion(len(ids), (0.7, 0.15, 0.15))


@given(id_lists, st.integers(0, 2**64 - 1))
def test_input_order_does_not_matter(ids, seed):
    assert generate_splits(ids, seed=seed) == generate_splits(list(reversed(ids)), seed=seed)


@given(st.lists(st.integers(), max_size=30), st.integers(0, 2**64 - 1))
def test_shuffle_is_permutation(items, seed):
    assert sorted(shuffle(items, seed)) == sorted(items)


def test_seed_sensitivity_golden():
    ids = [f"{i:03d}" for i in range(1, 21)]
    s42 = generate_splits(ids, seed=42)
    s43 = generate_splits(ids, seed=43)
    assert s42.test == ("001", "016", "014")
    assert s42.val == ("013", "003", "006")
    assert s43.test == ("016", "019", "001")
    assert s42.train != s43.train


def test_repeated_runs_byte_identical(tmp_path):
    ids = [f"{i:03d}" for i in range(1, 101)]
    a = write_splits(tmp_path / "a", generate_splits(ids, seed=42)).read_bytes()
    b = write_splits(tmp_path / "b", generate_splits(ids, seed=42)).read_bytes()
    assert a == b
    assert read_splits(tmp_path / "a" / "ml" / "splits.json") == generate_splits(ids, seed=42)


def test_leakage_violations():
    spec = SplitsSpec(("a", "b"), ("c",), ("a", "z"), 0, (0.7, 0.15, 0.15), "m", "r")
    kinds = {(v.kind, v.subject_id) for v in check_leakage(spec, ["a", "b", "c", "d"])}
    assert kinds == {
        ("duplicate-assignment", "a"),
        ("unknown-subject", "z"),
        ("unassigned-subject", "d"),
    }


@pytest.mark.parametrize("ratios", [(0.5, 0.5), (0.7, 0.2, 0.2), (1.0, 0.0, 0.0), (0.8, 0.3, -0.1)])
def test_bad_ratios(ratios):
    with pytest.raises(BadRatios):
        generate_splits(["a", "b"], ratios)


def test_bad_subjects():
    with pytest.raises(DuplicateSubjects):
        generate_splits(["a", "a", "b"])
    with pytest.raises(DuplicateSubjects):
        generate_splits([])
    with pytest.raises(ValueError):
        SplitMix64(-1)
