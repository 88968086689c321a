import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from sievelab.core.config import DEFAULT_CATALOG
from sievelab.core.errors import ConfigurationError, DomainError, ResourceError
from sievelab.services.catalog import dump_catalog, load_catalog
from sievelab.services.region_algebra import (
    AffineForm,
    AllOf,
    AlphaVector,
    AnyOf,
    Descending,
    Each,
    Inequality,
    Interval,
    IntervalUnion,
    NotOf,
    Region,
    Toggle,
    bounding_box,
    contains,
    interval_contains,
    merge_intervals,
    partitions_into,
    sum_range,
)


def _region(name, dimension, *items):
    nodes = [Inequality.parse(i) if isinstance(i, str) else i for i in items]
    return Region(name, dimension, AllOf(nodes))


# ---- affine forms ---- #
def test_affine_form_is_exact_rational():
    form = AffineForm.parse("(5 - 8*theta)/6")
    assert form.constant == Fraction(5, 6)
    assert dict(form.params) == {"theta": Fraction(-4, 3)}
    assert form.param_value({"theta": 0.52}) == pytest.approx(0.14)


def test_affine_form_rejects_nonlinear_and_unknown_names():
    with pytest.raises(ConfigurationError):
        AffineForm.parse("theta**2")
    with pytest.raises(ConfigurationError):
        AffineForm.parse("2*foo + 1")


def test_missing_parameter_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        AffineForm.parse("kappa + 1").param_value({"theta": 0.45})


# ---- membership ---- #
def test_inequality_chain():
    region = _region("band", 2, "2*theta - 1 < s < (5 - 8*theta)/6", "t <= s")
    scope = {"theta": 0.52}
    assert contains(region, (0.1, 0.05), scope)
    assert not contains(region, (0.2, 0.05), scope)
    assert not contains(region, (0.1, 0.15), scope)


def test_each_descending_and_sigma():
    region = Region(
        "desc3",
        3,
        AllOf(
            [
                Descending(strict=True),
                Each(Inequality.parse("x > kappa")),
                Inequality.parse("sigma < 1"),
            ]
        ),
    )
    scope = {"kappa": 0.1}
    assert contains(region, AlphaVector.of([0.3, 0.2, 0.15]), scope)
    assert not contains(region, (0.2, 0.3, 0.15), scope)
    assert not contains(region, (0.5, 0.3, 0.05), scope)


def test_boolean_nodes_and_toggle():
    inner = Inequality.parse("s > 1/2")
    floor = Toggle("floor", Inequality.parse("t > 1/10"))
    region = Region("mixed", 2, AnyOf([NotOf(inner), floor]))
    assert contains(region, (0.2, 0.0), {})
    assert not contains(region, (0.6, 0.05), {})
    assert contains(region, (0.6, 0.05), {}, toggles={"floor": False})
    assert region.toggles == {"floor"}


def test_dimension_mismatch():
    region = _region("pair", 2, "s > t")
    with pytest.raises(DomainError):
        contains(region, (0.1, 0.2, 0.3), {})


def test_alpha_vector_validation():
    with pytest.raises(DomainError):
        AlphaVector((0.2, 0.3))
    with pytest.raises(DomainError):
        AlphaVector((0.6, 0.5))
    assert AlphaVector.of([0.1, 0.3]).alphas == (0.3, 0.1)


# ---- partitions ---- #
def test_partition_finds_a_split():
    target = _region("window", 2, "3/10 < s < 2/5")
    assert partitions_into((0.25, 0.2, 0.15), target, {})  # 0.15 + 0.2 = 0.35
    assert not partitions_into((0.5, 0.45), target, {})


def test_partition_allows_an_empty_side():
    target = _region("whole", 2, "s > 9/10", "t < 1/100")
    assert partitions_into((0.5, 0.45), target, {})


def test_partition_size_bound():
    target = _region("any", 2, "s >= 0")
    with pytest.raises(ResourceError):
        partitions_into([0.01] * 25, target, {})


def test_partition_with_parameters():
    scope = {"theta": 0.52, "eps": 0.0}
    # (2 theta - 1, (5 - 8 theta)/6) = (0.04, 0.14) at theta = 0.52
    window = _region("w", 2, "2*theta - 1 < s < (5 - 8*theta)/6")
    assert partitions_into((0.3, 0.1), window, scope)
    assert not partitions_into((0.3, 0.2), window, scope)


# ---- intervals ---- #
def _iv(lo, hi, lo_open=True, hi_open=True):
    return Interval(AffineForm.parse(lo), AffineForm.parse(hi), lo_open, hi_open)


def test_merge_overlapping_and_touching():
    union = IntervalUnion((_iv("0", "1/10"), _iv("1/20", "1/5"), _iv("1/5", "3/10", lo_open=False)))
    merged = merge_intervals(union, {})
    assert [(lo, hi) for lo, hi, _, _ in merged.numeric({})] == [(0.0, pytest.approx(0.3))]


def test_open_touching_pieces_stay_apart():
    merged = merge_intervals(IntervalUnion((_iv("0", "1/10"), _iv("1/10", "1/5"))), {})
    assert len(merged) == 2
    assert not interval_contains(merged, 0.1, {})
    assert interval_contains(merged, 0.15, {})


def test_empty_pieces_are_dropped_and_order_is_canonical():
    union = IntervalUnion((_iv("theta2", "1/4"), _iv("1/2", "1/3"), _iv("0", "1/10")))
    merged = merge_intervals(union, {"theta2": 0.2})
    assert [round(lo, 12) for lo, _, _, _ in merged.numeric({"theta2": 0.2})] == [0.0, 0.2]


def test_render():
    union = IntervalUnion((_iv("0", "(5 - 8*theta)/6"),))
    assert union.render({"theta": 0.501}) == "(0, 0.165333)"
    assert IntervalUnion().render({}) == "empty"


# ---- boxes ---- #
def test_bounding_box_of_simplex_corner():
    tree = AllOf(
        [
            Descending(strict=True),
            Each(Inequality.parse("x > 1/10")),
            Inequality.parse("t1 + sigma < 1"),
        ]
    )
    region = Region("corner", 3, tree)
    box = bounding_box(region, 3, {})
    assert not box.empty
    assert np.allclose(box.lower, [0.1, 0.1, 0.1])
    assert box.upper[0] == pytest.approx(0.4)
    lo, hi = sum_range(region, 3, {})
    assert lo == pytest.approx(0.3)
    assert hi < 1


def test_bounding_box_detects_emptiness():
    region = Region("none", 2, AllOf([Each(Inequality.parse("x > 3/5"))]))
    assert bounding_box(region, 2, {}).empty
    assert sum_range(region, 2, {}) is None
    falsified = _region("param", 2, "theta < 1/2", "s > t")
    assert bounding_box(falsified, 2, {"theta": 0.6}).empty


# ---- catalog ---- #
def test_catalog_round_trip():
    parsed = json.loads(DEFAULT_CATALOG.read_text(encoding="utf-8"))
    assert dump_catalog(load_catalog(DEFAULT_CATALOG)) == parsed


def test_catalog_groups(catalog):
    master = {r.name for r in catalog.group("master")}
    assert {"U", "I", "A", "B", "C", "J", "E"} <= master
    assert catalog.region("A0101").dimension == 0
    assert catalog.region("G").dimension is None
    assert catalog.integral("S235").region == "U235"


def test_catalog_toggles_reach_through_members(catalog):
    assert "v_floor" in catalog.region("G").toggles
    assert "v_floor" in catalog.region("D1").toggles


def test_dangling_reference_is_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps({"regions": [{"name": "R", "dimension": 2, "where": {"member": "missing"}}]}),
        encoding="utf-8",
    )
    with pytest.raises(ConfigurationError, match="missing"):
        load_catalog(path)


def test_malformed_catalog_is_rejected(tmp_path):
    path = tmp_path / "bad.json"
    doc = {"regions": [{"name": "R", "where": {"every": "x > 0"}}]}
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_catalog(path)


def _random_union(rng, pieces=6):
    """Pieces on a 1/20 grid so that touching and nested endpoints come up often."""
    out = []
    for _ in range(pieces):
        lo, hi = sorted(rng.choice(21, size=2, replace=False))
        out.append(_iv(f"{lo}/20", f"{hi}/20", bool(rng.integers(2)), bool(rng.integers(2))))
    return IntervalUnion(tuple(out))


def test_merge_is_idempotent_and_ignores_piece_order():
    rng = np.random.default_rng(21)
    for _ in range(200):
        union = _random_union(rng)
        merged = merge_intervals(union, {})
        assert merge_intervals(merged, {}).numeric({}) == merged.numeric({})
        shuffled = IntervalUnion(tuple(union.pieces[i] for i in rng.permutation(len(union))))
        assert merge_intervals(shuffled, {}).numeric({}) == merged.numeric({})


def test_merged_pieces_are_sorted_and_disjoint():
    rng = np.random.default_rng(22)
    for _ in range(200):
        pieces = merge_intervals(_random_union(rng), {}).numeric({})
        for (_, hi, _, hi_open), (lo, _, lo_open, _) in zip(pieces, pieces[1:]):
            assert hi <= lo
            if hi == lo:
                assert hi_open and lo_open


def test_merge_keeps_the_points_of_the_union():
    rng = np.random.default_rng(23)
    grid = np.linspace(-0.05, 1.05, 1_001).tolist() + [k / 20 for k in range(21)]
    for _ in range(50):
        union = _random_union(rng)
        merged = merge_intervals(union, {})
        for x in grid:
            expected = any(piece.contains(x, {}) for piece in union)
            assert interval_contains(merged, x, {}) == expected


def test_zero_width_pieces():
    closed_point = _iv("1/10", "1/10", lo_open=False, hi_open=False)
    kept = merge_intervals(IntervalUnion((closed_point,)), {})
    assert len(kept) == 1 and interval_contains(kept, 0.1, {})
    assert len(merge_intervals(IntervalUnion((_iv("1/10", "1/10"),)), {})) == 0
    glued = merge_intervals(IntervalUnion((_iv("0", "1/10"), closed_point, _iv("1/10", "1/5"))), {})
    assert len(glued) == 1 and interval_contains(glued, 0.1, {})


def _split_oracle(alphas, inside):
    """Brute force over every nonempty I: is (sum_I, sum_rest) inside?"""
    total = sum(alphas)
    for size in range(1, len(alphas) + 1):
        for subset in itertools.combinations(alphas, size):
            s = sum(subset)
            if inside(s, total - s):
                return True
    return False


def test_partition_matches_brute_force_and_ignores_order():
    target = _region("window", 2, "3/10 < s < 2/5", "t > 1/10")
    rng = np.random.default_rng(24)
    for _ in range(300):
        k = int(rng.integers(1, 7))
        alphas = rng.uniform(0.01, 0.3, size=k).tolist()
        verdict = partitions_into(alphas, target, {})
        assert verdict == _split_oracle(alphas, lambda s, t: 0.3 < s < 0.4 and t > 0.1)
        assert partitions_into(rng.permutation(alphas).tolist(), target, {}) == verdict


def test_contains_matches_direct_evaluation():
    region = Region(
        "wedge3",
        3,
        AllOf(
            [
                Each(Inequality.parse("x > kappa")),
                Inequality.parse("sigma < 1"),
                Inequality.parse("t1 + 2*t2 > 1/2"),
                Inequality.parse("t3 <= theta - t1"),
            ]
        ),
    )
    scope = {"kappa": 0.1, "theta": 0.52}
    points = np.random.default_rng(25).uniform(0.0, 0.6, size=(2_000, 3))
    expected = (
        np.all(points > 0.1, axis=1)
        & (points.sum(axis=1) < 1)
        & (points[:, 0] + 2 * points[:, 1] > 0.5)
        & (points[:, 2] <= 0.52 - points[:, 0])
    )
    assert region.mask(points, scope).tolist() == expected.tolist()
    assert [contains(region, p, scope) for p in points[:200]] == expected[:200].tolist()
