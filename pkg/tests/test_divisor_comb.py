import itertools
from fractions import Fraction

import numpy as np
import pytest

from sievelab.core.errors import DegeneracyError, DomainError
from sievelab.services import divisor_comb
from sievelab.services.divisor_comb import FactorizationPattern


def _p(*values):
    return FactorizationPattern.of(values)


def test_single_prime():
    assert divisor_comb.mobius_half_sum(_p(1.0)) == 1


def test_three_primes_below_half():
    pattern = _p(0.40, 0.35, 0.25)
    assert divisor_comb.mobius_half_sum(pattern) == -2
    assert divisor_comb.mobius_case_table(pattern) == -2


def test_large_prime_kills_the_sum():
    pattern = _p(0.6, 0.25, 0.15)
    assert divisor_comb.mobius_half_sum(pattern) == 0
    assert divisor_comb.mobius_case_table(pattern) == 0


def test_tie_at_square_root():
    with pytest.raises(DegeneracyError):
        divisor_comb.mobius_half_sum(_p(0.5, 0.3, 0.2))


def test_pattern_validation():
    with pytest.raises(DomainError):
        _p(0.5, 0.4)
    with pytest.raises(DomainError):
        _p(0.4, 0.4, 0.2)
    assert FactorizationPattern.of([2, 1, 1.5], normalize=True).alphas == pytest.approx(
        (2 / 4.5, 1.5 / 4.5, 1 / 4.5)
    )


def test_midrange_count():
    assert divisor_comb.omega3_midrange_count(_p(0.45, 0.2, 0.19, 0.16)) == 2
    assert divisor_comb.omega3_midrange_count(_p(0.45, 0.35, 0.2)) == 0
    assert divisor_comb.omega3_midrange_count(_p(0.7, 0.3)) == 0


def test_five_prime_gap():
    pattern = _p(0.30, 0.22, 0.18, 0.16, 0.14)
    assert divisor_comb.mobius_half_sum(pattern) == 4
    assert divisor_comb.omega3_midrange_count(pattern) == 6
    assert divisor_comb.midrange_gap(pattern) == 2
    assert divisor_comb.midrange_gap_bound(pattern) == 2


def test_gap_needs_five_primes():
    with pytest.raises(DomainError):
        divisor_comb.midrange_gap(_p(0.40, 0.35, 0.25))


def test_full_sum_vanishes():
    rng = np.random.default_rng(7)
    for k in range(2, 9):
        assert divisor_comb.mobius_full_sum(divisor_comb.random_pattern(rng, k)) == 0


def test_random_sweep_matches_case_table_and_parity():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        pattern = divisor_comb.random_pattern(rng, int(rng.integers(1, 9)))
        expected = divisor_comb.mobius_case_table(pattern)
        if expected is not None:
            assert divisor_comb.mobius_half_sum(pattern) == expected
        assert divisor_comb.omega3_midrange_count(pattern) % 2 == 0


def test_seven_primes_above_an_eighth():
    rng = np.random.default_rng(11)
    for _ in range(50):
        pattern = divisor_comb.random_pattern(rng, 7, floor=1 / 8)
        assert divisor_comb.mobius_half_sum(pattern) == -20


def test_random_gap_stays_in_bracket():
    rng = np.random.default_rng(5)
    for _ in range(500):
        pattern = divisor_comb.random_pattern(rng, 5)
        gap = divisor_comb.midrange_gap(pattern)
        assert 0 <= gap <= 2
        if divisor_comb.midrange_gap_bound(pattern) == 0:
            assert gap == 0


def test_random_pattern_rejects_impossible_floor():
    with pytest.raises(DomainError):
        divisor_comb.random_pattern(np.random.default_rng(0), 8, floor=1 / 8)


# ---- six-prime triples ---- #
def test_triple_verdict_is_exact():
    alphas = ("0.295", "0.143", "0.142", "0.141", "0.140", "0.139")
    assert not divisor_comb.triple_verdict((1, 2, 3), alphas)
    # 0.143 + 0.142 + 0.141 < 1/2
    assert not divisor_comb.triple_verdict((2, 3, 4), alphas)
    # sum equal to the upper end: counted only with the inclusive bound
    tight = (Fraction(1, 5), Fraction(1, 5), Fraction(1, 5), Fraction(1, 5), Fraction(1, 10),
             Fraction(1, 10))
    assert divisor_comb.triple_verdict((1, 2, 6), tight) is False
    edge = ("0.25", "0.2", "0.1", "0.2", "0.15", "0.1")
    assert divisor_comb.triple_verdict((1, 2, 3), edge)
    assert not divisor_comb.triple_verdict((1, 2, 3), edge, strict_upper=True)


def test_triple_index_validation():
    alphas = ("0.3", "0.2", "0.15", "0.15", "0.1", "0.1")
    with pytest.raises(DomainError):
        divisor_comb.triple_verdict((1, 1, 2), alphas)
    with pytest.raises(DomainError):
        divisor_comb.triple_verdict((1, 2, 7), alphas)


def test_trivially_impossible_triples():
    triples = itertools.combinations(range(1, 7), 3)
    found = [t for t in triples if divisor_comb.trivially_impossible(t)]
    assert found == [(2, 4, 6), (2, 5, 6), (3, 4, 6), (3, 5, 6), (4, 5, 6)]


def test_uncounted_witness_depends_on_floor():
    assert divisor_comb.uncounted_witness((2, 3, 4)) is None
    witness = divisor_comb.uncounted_witness((2, 3, 4), floor=Fraction(0))
    assert witness is not None
    assert witness.sum() == pytest.approx(1.0)
    assert witness[1] + witness[2] + witness[3] >= (1 + witness[3]) / 2 - 1e-9


def test_printed_rows_reproduce():
    rows = divisor_comb.load_table_rows()
    assert len(rows) == 30
    assert all(divisor_comb.row_reproduces(row) for row in rows)
