"""Divisor sums of squarefree n over symbolic factorization patterns.

A squarefree n = p1 p2 ... pk with p_i ~ n^{alpha_i} is modelled by its exponent vector alpha
(descending, summing to 1). Every divisor condition used here (d < sqrt(n),
sqrt(n) < d < sqrt(n P^-(d))) is a linear inequality between subset sums of alpha, so
the sums are evaluated by enumerating index subsets rather than integers.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from sievelab.core.config import DIVISOR_TABLES
from sievelab.core.errors import ConfigurationError, DegeneracyError, DomainError
from sievelab.services.region_algebra import MAX_PARTITION_SIZE, AlphaVector, subset_chunks

logger = logging.getLogger(__name__)

TIE_TOL: float = 1e-12
DISTINCT_GAP: float = 1e-9
SUM_TOL: float = 1e-9
HALF = 0.5

# floor on P^-(n): below x^kappa with kappa(theta) > 1/8 for 1/2 < theta < 17/32
SIX_PRIME_FLOOR = Fraction(1, 8)


# --------------------------------------------------------------------------- #
# Patterns
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class FactorizationPattern:
    """Exponents of the prime factors of a squarefree n, largest first, summing to 1."""

    alpha: AlphaVector

    def __post_init__(self):
        a = self.alpha.alphas
        if not a:
            raise DomainError("a factorization pattern needs at least one prime")
        if len(a) > MAX_PARTITION_SIZE:
            raise DomainError(f"{len(a)} primes exceed the enumeration bound {MAX_PARTITION_SIZE}")
        if abs(sum(a) - 1.0) > SUM_TOL:
            raise DomainError(f"pattern exponents must sum to 1, got {sum(a)!r}")
        gaps = [x - y for x, y in zip(a, a[1:])]
        if gaps and min(gaps) < DISTINCT_GAP:
            raise DomainError(f"pattern exponents must be distinct (gap >= {DISTINCT_GAP}): {a}")

    @classmethod
    def of(cls, values: Sequence[float], normalize: bool = False) -> "FactorizationPattern":
        values = [float(v) for v in values]
        if normalize:
            total = sum(values)
            if total <= 0:
                raise DomainError("cannot normalise a pattern with non-positive total")
            values = [v / total for v in values]
        return cls(AlphaVector.of(values))

    @property
    def k(self) -> int:
        return len(self.alpha)

    @property
    def alphas(self) -> tuple[float, ...]:
        return self.alpha.alphas

    def as_array(self) -> np.ndarray:
        return self.alpha.as_array()


def _subset_sums(pattern: FactorizationPattern) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """(subset sums, subset sizes) block by block; the empty subset is not included."""
    a = pattern.as_array()
    for bits in subset_chunks(pattern.k):
        yield bits @ a, bits.sum(axis=1).astype(int)


def _check_tie(values: np.ndarray, target, what: str) -> None:
    close = np.abs(values - target) <= TIE_TOL
    if np.any(close):
        raise DegeneracyError(f"a divisor lands on the {what} boundary (sum {values[close][0]!r})")


# --------------------------------------------------------------------------- #
# Mobius sums
# --------------------------------------------------------------------------- #
def mobius_half_sum(pattern: FactorizationPattern) -> int:
    """sum over d | n, d < sqrt(n) of mu(d), by enumerating every index subset.

    Raises:
        DegeneracyError: some divisor equals sqrt(n).
    """
    total = 1  # d = 1
    for sums, sizes in _subset_sums(pattern):
        _check_tie(sums, HALF, "sqrt(n)")
        below = sums < HALF
        total += int(np.sum(np.where(sizes[below] % 2 == 0, 1, -1)))
    return total


def mobius_full_sum(pattern: FactorizationPattern) -> int:
    """sum over all d | n of mu(d); zero for every n > 1."""
    total = 1
    for _, sizes in _subset_sums(pattern):
        total += int(np.sum(np.where(sizes % 2 == 0, 1, -1)))
    return total


def mobius_case_table(pattern: FactorizationPattern) -> int | None:
    """Closed-form value of ``mobius_half_sum`` for the structural cases; None when none applies."""
    a = pattern.alphas
    k = pattern.k
    if k == 1:
        return 1
    if a[0] > HALF:
        return 0
    if k % 2 == 0:
        return 0
    if k == 3:
        return -2
    if k == 7 and a[-1] > 1 / 8:
        return -20
    return None


# --------------------------------------------------------------------------- #
# Three-prime divisors between sqrt(n) and sqrt(n P^-(d))
# --------------------------------------------------------------------------- #
def _triple_counted(s: float, smallest: float) -> bool:
    return HALF < s < (1.0 + smallest) / 2.0


def omega3_midrange_count(pattern: FactorizationPattern) -> int:
    """2 * #{d = p_i p_j p_l : sqrt(n) < d < sqrt(n * min(p_i, p_j, p_l))}.

    Raises:
        DegeneracyError: a triple sits on either boundary.
    """
    a = pattern.alphas
    if pattern.k < 3:
        return 0
    count = 0
    for triple in itertools.combinations(range(pattern.k), 3):
        s = a[triple[0]] + a[triple[1]] + a[triple[2]]
        smallest = a[triple[2]]
        upper = (1.0 + smallest) / 2.0
        if abs(s - HALF) <= TIE_TOL or abs(s - upper) <= TIE_TOL:
            raise DegeneracyError(f"triple {tuple(i + 1 for i in triple)} sits on a boundary")
        if _triple_counted(s, smallest):
            count += 1
    return 2 * count


def midrange_gap(pattern: FactorizationPattern) -> int:
    """omega3_midrange_count - mobius_half_sum for five primes; lies in [0, 2], and is 0
    unless alpha2 + alpha3 < alpha1 + alpha5."""
    if pattern.k != 5:
        raise DomainError(f"the midrange gap is defined for five primes, got {pattern.k}")
    return omega3_midrange_count(pattern) - mobius_half_sum(pattern)


def midrange_gap_bound(pattern: FactorizationPattern) -> int:
    a = pattern.alphas
    return 2 if a[1] + a[2] < a[0] + a[4] else 0


# --------------------------------------------------------------------------- #
# Six-prime triples
# --------------------------------------------------------------------------- #
def _check_triple(ijk: Sequence[int], k: int) -> tuple[int, int, int]:
    triple = tuple(int(i) for i in ijk)
    if len(triple) != 3 or len(set(triple)) != 3:
        raise DomainError(f"need three distinct indices, got {ijk!r}")
    if any(not 1 <= i <= k for i in triple):
        raise DomainError(f"indices must lie in 1..{k}, got {ijk!r}")
    return tuple(sorted(triple))


def triple_verdict(
    ijk: Sequence[int],
    alphas: Sequence[str | Fraction | float],
    strict_upper: bool = False,
) -> bool:
    """Whether d = p_i p_j p_l is counted, i.e. 1/2 < a_i + a_j + a_l < (1 + a_l)/2.

    Evaluated in exact rationals on the digits given. The upper comparison is
    inclusive unless ``strict_upper``.

    Args:
        ijk: 1-based prime indices.
        alphas: the six exponents, largest first.
        strict_upper: use ``<`` instead of ``<=`` on the upper end.
    """
    exact = [Fraction(str(a)) if isinstance(a, float) else Fraction(a) for a in alphas]
    i, j, l = _check_triple(ijk, len(exact))
    s = exact[i - 1] + exact[j - 1] + exact[l - 1]
    upper = (1 + min(exact[i - 1], exact[j - 1], exact[l - 1])) / 2
    below_upper = s < upper if strict_upper else s <= upper
    return Fraction(1, 2) < s and below_upper


def trivially_impossible(ijk: Sequence[int], k: int = 6) -> bool:
    """Triples whose product is always below sqrt(n): each index beats a distinct smaller one."""
    chosen = set(_check_triple(ijk, k))
    rest = sorted(set(range(1, k + 1)) - chosen)
    return len(rest) == len(chosen) and all(r < c for r, c in zip(rest, sorted(chosen)))


def uncounted_witness(
    ijk: Sequence[int], k: int = 6, floor: Fraction = SIX_PRIME_FLOOR
) -> np.ndarray | None:
    """A k-prime pattern with every exponent above ``floor`` in which d = p_i p_j p_l exceeds
    sqrt(n P^-(d)), or None when the linear program shows none exists."""
    i, j, l = _check_triple(ijk, k)
    # variables: alpha_1 .. alpha_k, margin
    n_var = k + 1
    rows, rhs = [], []

    for m in range(k - 1):
        # alpha_{m+1} - alpha_m + margin <= 0
        r = np.zeros(n_var)
        r[m + 1], r[m], r[k] = 1.0, -1.0, 1.0
        rows.append(r)
        rhs.append(0.0)
    r = np.zeros(n_var)
    r[k - 1], r[k] = -1.0, 1.0
    rows.append(r)
    rhs.append(-float(floor))

    chosen = np.zeros(n_var)
    for idx in (i, j, l):
        chosen[idx - 1] = 1.0
    # sum > 1/2
    r = -chosen.copy()
    r[k] = 1.0
    rows.append(r)
    rhs.append(-HALF)
    # sum >= (1 + alpha_l)/2
    r = -chosen.copy()
    r[l - 1] += 0.5
    r[k] = 1.0
    rows.append(r)
    rhs.append(-HALF)

    equality = np.zeros((1, n_var))
    equality[0, :k] = 1.0
    result = linprog(
        -np.eye(n_var)[k],
        A_ub=np.vstack(rows),
        b_ub=np.asarray(rhs),
        A_eq=equality,
        b_eq=np.ones(1),
        bounds=[(0.0, 1.0)] * k + [(None, 1.0)],
        method="highs",
    )
    if result.status != 0:
        return None
    if -result.fun <= DISTINCT_GAP:
        return None
    return result.x[:k]


# --------------------------------------------------------------------------- #
# Printed rows
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class TableRow:
    table: str
    ijk: tuple[int, int, int]
    alphas: tuple[str, ...] | None
    counted: bool

    @property
    def label(self) -> str:
        return f"{self.table}{self.ijk}"


@lru_cache(maxsize=2)
def load_table_rows(path: str | None = None) -> tuple[TableRow, ...]:
    source = Path(path or DIVISOR_TABLES)
    try:
        raw = json.loads(source.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read divisor tables {source}: {exc}") from exc
    rows = tuple(
        TableRow(
            table=r["table"],
            ijk=tuple(r["ijk"]),
            alphas=tuple(r["alphas"]) if r.get("alphas") else None,
            counted=bool(r["counted"]),
        )
        for r in raw["rows"]
    )
    logger.debug("loaded %d divisor table rows from %s", len(rows), source.name)
    return rows


def row_reproduces(row: TableRow) -> bool:
    """A row with exponents must give its printed verdict; a row without claims no
    floor-respecting pattern leaves the triple uncounted."""
    if row.alphas is not None:
        return triple_verdict(row.ijk, row.alphas) == row.counted
    return uncounted_witness(row.ijk) is None


# --------------------------------------------------------------------------- #
# Random patterns
# --------------------------------------------------------------------------- #
def random_pattern(
    rng: np.random.Generator, k: int, floor: float = 0.0, max_tries: int = 1000
) -> FactorizationPattern:
    """Dirichlet-distributed exponents above ``floor``, redrawn until no subset sum ties."""
    if k * floor >= 1.0:
        raise DomainError(f"{k} exponents cannot all exceed {floor}")
    for _ in range(max_tries):
        raw = floor + (1.0 - k * floor) * rng.dirichlet(np.ones(k))
        try:
            pattern = FactorizationPattern.of(raw, normalize=True)
            mobius_half_sum(pattern)
            omega3_midrange_count(pattern)
        except DomainError:
            continue
        return pattern
    raise DomainError(f"no admissible {k}-prime pattern after {max_tries} draws")
