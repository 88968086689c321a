"""Parameter points, piecewise parameter functions, region classification and Type-II ranges."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from sievelab.core.errors import AmbiguityError, DomainError
from sievelab.services.catalog import Catalog, TypeIIEntry, load_catalog
from sievelab.services.region_algebra import (
    AffineForm,
    EvalContext,
    Interval,
    IntervalUnion,
    contains,
    merge_intervals,
)

logger = logging.getLogger(__name__)

ASYMPTOTIC_MESSAGE = "asymptotic (exponent of distribution) regime"

KAPPA_DOMAIN = (0.5, 4 / 7)
NU_DOMAIN = (0.5, 9 / 17)

CatalogName = Literal["A", "E", "master"]
Family = Literal["A", "E"]


# --------------------------------------------------------------------------- #
# Piecewise parameter functions
# --------------------------------------------------------------------------- #
def _check_kappa_domain(theta: float, name: str) -> None:
    lo, hi = KAPPA_DOMAIN
    if not lo <= theta < hi:
        raise DomainError(f"{name}(theta) needs 1/2 <= theta < 4/7, got theta={theta}")


def kappa(theta: float, epsilon: float = 0.0) -> float:
    _check_kappa_domain(theta, "kappa")
    if theta <= 17 / 32 - epsilon:
        return (5 - 8 * theta) / 6 - epsilon
    if theta <= 7 / 13 - epsilon:
        return (5 - 8 * theta) / 12 - 3 * epsilon
    return (3 - 5 * theta) / 7 - 2 * epsilon


def kappa_prime(theta: float, epsilon: float = 0.0) -> float:
    _check_kappa_domain(theta, "kappa_prime")
    if 7 / 13 - epsilon < theta <= 11 / 20 - epsilon:
        return (11 - 20 * theta) / 6 - 2 * epsilon
    return kappa(theta, epsilon)


def tau(theta: float, epsilon: float = 0.0) -> float:
    _check_kappa_domain(theta, "tau")
    if theta <= 11 / 21:
        return 3 * (1 - theta) / 5 - epsilon
    if theta <= 6 / 11 - epsilon:
        return 2 / 7 - epsilon
    return (5 - 6 * theta) / 7 - epsilon


def tau_prime(theta: float, epsilon: float = 0.0) -> float:
    _check_kappa_domain(theta, "tau_prime")
    if 7 / 13 - epsilon < theta <= 11 / 20 - epsilon:
        return (5 - 6 * theta) / 7
    return tau(theta, epsilon)


def _check_nu_domain(theta: float, name: str) -> None:
    lo, hi = NU_DOMAIN
    if not lo < theta < hi:
        raise DomainError(f"{name}(theta) needs 1/2 < theta < 9/17, got theta={theta}")


def nu(theta: float) -> float:
    _check_nu_domain(theta, "nu")
    return 1 - 2 * max(6 * theta - 11 / 4, 16 * theta - 8)


def nu_prime(theta: float) -> float:
    _check_nu_domain(theta, "nu_prime")
    return 1 - 2 * max(120 / 17 * theta - 56 / 17, 16 * theta - 8)


PARAMETER_FUNCTIONS = {
    "kappa": kappa,
    "kappa_prime": kappa_prime,
    "tau": tau,
    "tau_prime": tau_prime,
}


# --------------------------------------------------------------------------- #
# ThetaParams
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class ThetaParams:
    """One, two or three modulus exponents; theta is their sum."""

    components: tuple[float, ...]
    epsilon: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not 1 <= len(comps) <= 3:
            raise DomainError(f"need 1 to 3 theta components, got {len(comps)}")
        for i, c in enumerate(comps, start=1):
            if not 0 < c < 1:
                raise DomainError(f"theta{i}={c} must lie in (0, 1)")
        if not 0 < self.theta < 1:
            raise DomainError(f"theta = {self.theta} must lie in (0, 1)")
        if len(comps) == 2 and comps[0] < comps[1]:
            raise DomainError(f"two-parameter mode assumes theta1 >= theta2, got {comps}")
        if self.epsilon < 0 or self.delta < 0:
            raise DomainError("epsilon and delta must be >= 0")

    @classmethod
    def single(cls, theta: float, epsilon: float = 0.0) -> "ThetaParams":
        return cls((theta,), epsilon)

    @classmethod
    def pair(cls, theta1: float, theta2: float, epsilon: float = 0.0) -> "ThetaParams":
        return cls((theta1, theta2), epsilon)

    @property
    def theta(self) -> float:
        return float(sum(self.components))

    @property
    def mode(self) -> int:
        return len(self.components)

    def derived(self) -> dict[str, float]:
        """kappa, tau, nu and their primes at theta, where theta is in their domain."""
        out: dict[str, float] = {}
        for name, fn in PARAMETER_FUNCTIONS.items():
            try:
                out[name] = fn(self.theta, self.epsilon)
            except DomainError:
                pass
        for name, fn in (("nu", nu), ("nu_prime", nu_prime)):
            try:
                out[name] = fn(self.theta)
            except DomainError:
                pass
        return out

    def scope(self) -> dict[str, float]:
        values = {
            "theta": self.theta,
            "eps": self.epsilon,
            "delta": self.delta,
            "eps_sq": self.epsilon**2,
        }
        if self.mode > 1:
            for i, c in enumerate(self.components, start=1):
                values[f"theta{i}"] = c
        values.update(self.derived())
        return values

    def label(self) -> str:
        if self.mode == 1:
            return f"theta={self.theta:g}"
        return ", ".join(f"theta{i}={c:g}" for i, c in enumerate(self.components, start=1))


def pair_scope(theta1: np.ndarray, theta2: np.ndarray, epsilon: float = 0.0) -> dict:
    """Vectorised scope for parameter-space regions over many (theta1, theta2) points."""
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    return {
        "theta1": theta1,
        "theta2": theta2,
        "theta": theta1 + theta2,
        "eps": epsilon,
        "delta": 0.0,
        "eps_sq": epsilon**2,
    }


# --------------------------------------------------------------------------- #
# Classification
# --------------------------------------------------------------------------- #
def _require_pair(params: ThetaParams, what: str) -> None:
    if params.mode != 2:
        raise DomainError(f"{what} needs two-parameter mode (theta1, theta2), got {params.label()}")


def classify(
    params: ThetaParams, catalog: CatalogName = "master", source: Catalog | None = None
) -> list[str]:
    """Names of the regions of one catalog group that contain the parameter point."""
    _require_pair(params, "classify")
    source = source or load_catalog()
    empty = ()
    return [
        region.name
        for region in source.group(catalog)
        if contains(region, empty, params)
    ]


def classify_masks(
    theta1: np.ndarray,
    theta2: np.ndarray,
    catalog: CatalogName,
    epsilon: float = 0.0,
    source: Catalog | None = None,
) -> dict[str, np.ndarray]:
    """Membership masks of every region in a group over arrays of parameter points."""
    source = source or load_catalog()
    scope = pair_scope(theta1, theta2, epsilon)
    n = np.asarray(theta1).shape[0]
    points = np.empty((n, 0))
    return {
        region.name: region.mask(points, scope, EvalContext())
        for region in source.group(catalog)
    }


# --------------------------------------------------------------------------- #
# Type-II ranges
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class TypeIIRangeReport:
    point: ThetaParams
    matched_region: str
    raw_ranges: tuple[Interval, ...] = ()
    merged: IntervalUnion = field(default_factory=IntervalUnion)
    kappa_start: float | None = None
    kappa_provenance: str = "reference"
    printed: IntervalUnion | None = None
    decomposition: str | None = None
    message: str = ""
    note: str = ""

    @property
    def asymptotic(self) -> bool:
        return not self.raw_ranges and self.message == ASYMPTOTIC_MESSAGE


ZERO = AffineForm.const(0)


def clip_nonnegative(pieces, params: ThetaParams) -> tuple[Interval, ...]:
    """Exponents below 0 carry no information: pull lo up to 0 and drop empty pieces."""
    scope = params.scope()
    out = []
    for piece in pieces:
        lo, hi = piece.bounds(scope)
        if hi <= 0:
            continue
        if lo < 0:
            piece = Interval(ZERO, piece.hi, True, piece.hi_open, piece.provenance)
        out.append(piece)
    return tuple(out)


def _kappa_start(
    entry: TypeIIEntry, merged: IntervalUnion, params: ThetaParams
) -> tuple[float | None, str]:
    scope = params.scope()
    for rule in entry.kappa_start:
        if rule.when is not None and not rule.when.mask(np.empty((1, 0)), scope, EvalContext())[0]:
            continue
        if rule.value is None:
            return scope.get("kappa"), "reference"
        return float(rule.value.param_value(scope)), "reference"

    if entry.family == "E":
        for lo, hi, _, _ in merged.numeric(scope):
            if abs(lo) <= 1e-12:
                return hi - params.epsilon, "derived"
    return scope.get("kappa"), "derived"


def _matching_entries(params: ThetaParams, family: str, source: Catalog) -> list[TypeIIEntry]:
    hits: dict[str, TypeIIEntry] = {}
    for entry in source.type_ii:
        if entry.family != family or entry.region in hits:
            continue
        if contains(source.region(entry.region), (), params):
            hits[entry.region] = entry
    return list(hits.values())


def single_modulus_range(params: ThetaParams) -> TypeIIRangeReport:
    """theta-only mode: the single piece (2 theta - 1, (5 - 8 theta)/6)."""
    piece = Interval(
        AffineForm.parse("2*theta - 1"),
        AffineForm.parse("(5 - 8*theta)/6"),
        provenance="single_modulus",
    )
    raw = clip_nonnegative((piece,), params)
    merged = merge_intervals(IntervalUnion(raw), params)
    return TypeIIRangeReport(
        point=params,
        matched_region="theta",
        raw_ranges=raw,
        merged=merged,
        kappa_start=params.scope().get("kappa"),
    )


def type_ii_range(
    params: ThetaParams, family: Family = "A", source: Catalog | None = None
) -> TypeIIRangeReport:
    """Assemble, clip and merge the Type-II ranges recorded for the point's finest subregion.

    Args:
        params: theta-only, pair or triple point.
        family: which subregion catalog to consult in pair mode ("A" or "E").
        source: catalog override.

    Returns:
        TypeIIRangeReport; in the asymptotic region it carries only a message.

    Raises:
        AmbiguityError: more than one finest subregion contains the point.
        DomainError: no record covers the point.
    """
    if params.mode == 1:
        return single_modulus_range(params)

    source = source or load_catalog()
    if params.mode == 3:
        family_key = "W"
    else:
        family_key = family
        asymptotic = "I" if family == "A" else "J"
        if contains(source.region(asymptotic), (), params):
            return TypeIIRangeReport(
                point=params, matched_region=asymptotic, message=ASYMPTOTIC_MESSAGE
            )

    matches = _matching_entries(params, family_key, source)
    if len(matches) > 1:
        names = sorted(m.region for m in matches)
        logger.info("point %s lies on a subregion boundary: %s", params.label(), names)
        raise AmbiguityError(f"{params.label()} matches several subregions", names)
    if not matches:
        raise DomainError(f"no {family_key}-family Type-II record covers {params.label()}")

    entry = matches[0]
    raw = clip_nonnegative(entry.ranges, params)
    merged = merge_intervals(IntervalUnion(raw), params)
    start, provenance = _kappa_start(entry, merged, params)
    printed = IntervalUnion(entry.printed) if entry.printed else None
    return TypeIIRangeReport(
        point=params,
        matched_region=entry.region,
        raw_ranges=raw,
        merged=merged,
        kappa_start=start,
        kappa_provenance=provenance,
        printed=printed,
        decomposition=entry.decomposition,
        note=entry.note,
    )

