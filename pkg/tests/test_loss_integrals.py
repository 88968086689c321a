import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from sievelab.core.config import Settings
from sievelab.core.errors import DomainError, SpecificationError
from sievelab.services import loss_integrals
from sievelab.services.loss_integrals import IntegralSpec, QuadratureResult
from sievelab.services.region_algebra import AllOf, Inequality, Region
from sievelab.services.sieve_params import ThetaParams


def _spec(name, dimension, *conditions, weight="unit"):
    tree = AllOf([Inequality.parse(c) for c in conditions])
    return IntegralSpec(name, dimension, Region(name, dimension, tree), weight)


# ---- calibration ---- #
def test_simplex_volume(quick_settings):
    result = loss_integrals.simplex_calibration(3, settings=quick_settings)
    assert abs(result.value - 1 / 6) <= 3 * result.est_error + 1e-3
    assert result.samples <= quick_settings.budget
    assert result.strata >= 8


def test_same_seed_same_bits(quick_settings):
    first = loss_integrals.simplex_calibration(4, settings=quick_settings)
    again = loss_integrals.simplex_calibration(4, settings=quick_settings)
    assert first.value == again.value
    assert first.est_error == again.est_error


def test_seeds_agree_within_error(quick_settings):
    a = loss_integrals.simplex_calibration(3, seed=1, settings=quick_settings)
    b = loss_integrals.simplex_calibration(3, seed=2, settings=quick_settings)
    assert a.value != b.value
    assert abs(a.value - b.value) <= 3 * (a.est_error + b.est_error) + 1e-4


def test_thread_pool_does_not_change_the_result():
    serial = Settings(budget=2**16, rtol=5e-3)
    pooled = Settings(budget=2**16, rtol=5e-3, workers=2)
    assert (
        loss_integrals.simplex_calibration(5, settings=serial).value
        == loss_integrals.simplex_calibration(5, settings=pooled).value
    )


def test_calibration_dimension_bounds():
    with pytest.raises(DomainError):
        loss_integrals.simplex_calibration(7)


# ---- results and specs ---- #
def test_result_rejects_negative_error():
    with pytest.raises(ValueError):
        QuadratureResult(1.0, -1e-3, 10, 0)


def test_spec_dimension_bounds():
    with pytest.raises(SpecificationError):
        _spec("flat", 7, "t1 > 0")


def test_inclusion_is_monotone(quick_settings):
    triangle = _spec("tri", 2, "s > t", "s + t < 1")
    wedge = _spec("wedge", 2, "s > t", "s + t < 1", "s < 1/2")
    whole = loss_integrals.integrate(triangle, {}, settings=quick_settings)
    part = loss_integrals.integrate(wedge, {}, settings=quick_settings)
    assert whole.value == pytest.approx(0.25, rel=1e-2)
    assert part.value == pytest.approx(0.125, rel=1e-2)
    assert part.value <= whole.value


def test_empty_region_is_exactly_zero(quick_settings):
    none = _spec("none", 2, "s > 3/5", "t > 3/5", "s + t < 1")
    result = loss_integrals.integrate(none, {}, settings=quick_settings)
    assert result.empty
    assert result.value == 0.0 and result.est_error == 0.0 and result.samples == 0


def test_region_no_sample_hits(quick_settings):
    sliver = _spec("sliver", 2, "s > t", "s - t < 1/1000000000000")
    result = loss_integrals.integrate(sliver, {}, settings=quick_settings)
    assert result.zero_hits and result.flagged
    assert result.value == 0.0
    assert result.est_error > 0
    assert result.samples == quick_settings.budget


def test_zero_hit_bound_shrinks_with_the_budget():
    sliver = _spec("sliver", 2, "s > t", "s - t < 1/1000000000000")
    small = loss_integrals.integrate(sliver, {}, settings=Settings(budget=2**13, rtol=5e-3))
    large = loss_integrals.integrate(sliver, {}, settings=Settings(budget=2**15, rtol=5e-3))
    assert (small.samples, large.samples) == (2**13, 2**15)
    assert large.est_error == pytest.approx(small.est_error / 4)


def test_budget_exhaustion_is_flagged(caplog):
    settings = Settings(budget=2**10, rtol=1e-9)
    with caplog.at_level(logging.WARNING):
        result = loss_integrals.simplex_calibration(2, settings=settings)
    assert result.budget_exhausted
    assert "budget" in caplog.text


# ---- weights ---- #
def test_weight_values():
    points = np.array([[0.3, 0.2], [0.4, 0.1]])
    reciprocal = _spec("r", 2, "s > t", weight="reciprocal")
    expected = 1 / (points.prod(axis=1) * (1 - points.sum(axis=1)))
    assert np.allclose(loss_integrals.weight_values(reciprocal, points, {}), expected)

    buchstab_spec = _spec("b", 2, "s > t", weight="buchstab")
    values = loss_integrals.weight_values(buchstab_spec, points, {"kappa": 0.1})
    # u = (1 - 0.5)/0.1 = 5 for both rows
    assert values[0] * 0.1 * 0.06 == pytest.approx(0.56146, abs=1e-3)
    assert values[0] * 0.06 == pytest.approx(values[1] * 0.04)

    short = loss_integrals.weight_values(buchstab_spec, np.array([[0.5, 0.45]]), {"kappa": 0.1})
    assert short[0] == 0.0  # u = 0.5 < 1


def test_reciprocal_weight_must_stay_bounded(quick_settings):
    spec = _spec("open", 2, "s > 0", "t > 0", "s + t < 1", weight="reciprocal")
    with pytest.raises(SpecificationError):
        loss_integrals.integrate(spec, {}, settings=quick_settings)


def test_omega_envelopes_bracket_the_buchstab_weight(quick_settings):
    # u = (1 - s - t)/kappa runs over (2, 4) on this band
    spec = _spec("band", 2, "s > 1/10", "t > 1/10", "s + t < 3/5", weight="buchstab")
    scope = {"kappa": 0.2}
    variants = ("lower", "exact", "upper")

    points = np.random.default_rng(5).uniform(0.1, 0.3, size=(10_000, 2))
    low, mid, high = (
        loss_integrals.weight_values(replace(spec, omega=v), points, scope) for v in variants
    )
    assert np.all(low <= mid * (1 + 1e-5))
    assert np.all(mid <= high * (1 + 1e-5))

    lower, exact, upper = (
        loss_integrals.integrate(replace(spec, omega=v), scope, settings=quick_settings)
        for v in variants
    )
    assert lower.value <= exact.value + 3 * (lower.est_error + exact.est_error)
    assert exact.value <= upper.value + 3 * (exact.est_error + upper.est_error)


# ---- named integrals ---- #
def test_empty_lower_bound_region(quick_settings):
    result = loss_integrals.named_integral(
        "U234", ThetaParams.single(0.51), settings=quick_settings
    )
    assert result.empty
    assert result.value == 0.0
    assert set(result.variants.values()) == {0.0}


def test_arity_is_checked(quick_settings):
    with pytest.raises(DomainError):
        loss_integrals.named_integral(
            "S235", ThetaParams.pair(0.36, 0.141), settings=quick_settings
        )
    with pytest.raises(DomainError):
        loss_integrals.named_integral("L7_1", ThetaParams.single(0.52), settings=quick_settings)
    with pytest.raises(DomainError):
        loss_integrals.named_integral("I5", 0.1, settings=quick_settings)


@pytest.mark.parametrize("kappa", [0.0, -0.1, 0.13])
def test_l7_domain(kappa):
    with pytest.raises(DomainError):
        loss_integrals.eval_L7(kappa)


def _l7_third_piece_at_an_eighth(n=400_000, seed=11):
    """Plain Monte Carlo for 20 * int_U73 1/(t1...t5 (1 - sum t)) at kappa = 1/8.

    With t = 1/8 + u the region is the ordered part of 2 u1 + u2 + ... + u5 < 1/4, drawn
    uniformly from a scaled Dirichlet simplex.
    """
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(6), size=n)[:, :5]
    t = 1 / 8 + w / np.array([8, 4, 4, 4, 4])
    inside = np.all(np.diff(t, axis=1) < 0, axis=1)
    values = np.where(inside, 20 / (t.prod(axis=1) * (1 - t.sum(axis=1))), 0.0)
    volume = 1 / (math.factorial(5) * 8 * 4**4)
    return volume * values.mean()


def test_l7_parts_at_an_eighth(quick_settings):
    result = loss_integrals.eval_L7(1 / 8, settings=quick_settings)
    assert set(result.variants) == set(loss_integrals.L7_PARTS)
    # 2 t1 + t2 + ... + t5 can still be 3/4 here, so the third piece is not empty
    third = result.variants["L7_3"]
    assert third > 0
    reference = _l7_third_piece_at_an_eighth()
    assert reference == pytest.approx(0.012, rel=0.1)
    assert third == pytest.approx(reference, rel=0.2)
    assert result.value == pytest.approx(sum(result.variants.values()))


def test_pair_window_warning(caplog):
    settings = Settings(budget=2**12, rtol=0.5)
    with caplog.at_level(logging.WARNING, logger="sievelab"):
        loss_integrals.named_integral("I5", ThetaParams.pair(0.36, 0.141), settings=settings)
    assert "outside the window" in caplog.text


def test_variants_report_both_floor_states(quick_settings):
    result = loss_integrals.named_integral(
        "U233", ThetaParams.single(0.52), settings=quick_settings
    )
    assert result.value == pytest.approx(0.356, rel=0.1)
    assert list(result.variants) == ["v_floor=off"]


def test_s235_does_not_drop_as_theta_grows():
    settings = Settings(budget=2**16, rtol=1e-2)
    low, high = (
        loss_integrals.named_integral(
            "S235", ThetaParams.single(t), compare_toggles=False, settings=settings
        )
        for t in (0.51, 0.53)
    )
    assert low.value > 0
    assert high.value >= low.value - 3 * (low.est_error + high.est_error)


def test_l7_falls_as_kappa_grows():
    settings = Settings(budget=2**14, rtol=1e-2)
    values = [loss_integrals.eval_L7(k, settings=settings) for k in (1 / 12, 1 / 10, 1 / 8)]
    for a, b in zip(values, values[1:]):
        assert b.value <= a.value + 3 * (a.est_error + b.est_error)
    assert values[-1].value < values[0].value


# ---- acceptance runs at the default budget ---- #
@pytest.mark.slow
@pytest.mark.parametrize("k", range(2, 7))
def test_calibration_at_default_budget(k):
    result = loss_integrals.simplex_calibration(k, settings=Settings())
    exact = 1 / math.factorial(k)
    assert abs(result.value - exact) / exact <= 3e-3


@pytest.mark.slow
def test_l7_thresholds():
    settings = Settings()
    low = loss_integrals.eval_L7(1 / 11, settings=settings)
    high = loss_integrals.eval_L7(1 / 12, settings=settings)
    assert low.value < 0.84 and low.est_error < 0.01
    assert high.value > 1.2 and high.est_error < 0.01


@pytest.mark.slow
@pytest.mark.parametrize("point", [(0.32, 0.20), (0.33, 0.19)])
def test_pair_loss_is_tiny(point):
    result = loss_integrals.pair_loss(ThetaParams.pair(*point), settings=Settings())
    assert result.value <= 1e-5 + 3 * result.est_error


@pytest.mark.slow
def test_s235_grows_with_theta():
    settings = Settings()
    values = [
        loss_integrals.named_integral("S235", ThetaParams.single(t), settings=settings)
        for t in (0.51, 0.52, 0.53)
    ]
    assert values[0].value == pytest.approx(0.037, rel=0.1)
    for a, b in zip(values, values[1:]):
        assert b.value >= a.value - (a.est_error + b.est_error)
