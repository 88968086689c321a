"""Multidimensional loss integrals over catalog regions.

An integral is ``multiplier * int_region weight(t) dt`` where the region is an indicator tree
from the catalog and the weight is one of

    reciprocal:  1 / (t1 ... tk * (1 - sum t))
    buchstab:    omega((1 - sum t) / kappa) / (kappa * t1 ... tk)
    unit:        1

The engine is stratified quasi-Monte Carlo on the region's LP bounding box: the box is cut
in two along every axis, each stratum owns a scrambled Sobol engine seeded from one
``SeedSequence``, and rounds of greedy refinement bisect (or, past the size limits, resample)
the strata that carry the most variance until the stop rule holds or the budget is spent.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Literal, Mapping

import numpy as np
from scipy.stats import qmc

from sievelab.core.config import Settings, get_settings
from sievelab.core.errors import DomainError, SpecificationError
from sievelab.services import buchstab
from sievelab.services.catalog import Catalog, IntegralRecord, load_catalog
from sievelab.services.region_algebra import (
    AffineForm,
    AllOf,
    Box,
    Each,
    EvalContext,
    Inequality,
    Region,
    Scope,
    bounding_box,
    sum_range,
)
from sievelab.services.sieve_params import ThetaParams

logger = logging.getLogger(__name__)

Weight = Literal["reciprocal", "buchstab", "unit"]
OmegaVariant = Literal["exact", "lower", "upper"]

PILOT_POINTS: int = 256
MIN_PILOT_POINTS: int = 16
MAX_DEPTH: int = 48
ZERO_HIT_FACTOR: float = 3.0

L7_DOMAIN = (0.0, 1 / 8)
L7_PARTS = ("L7_1", "L7_2", "L7_3")

# I5 / I6 are stated for this window of two-modulus points
PAIR_WINDOW = "theta1 < 1/3, theta2 < 1/5, 29/56 <= theta < 11/21"


# --------------------------------------------------------------------------- #
# Specs and results
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class IntegralSpec:
    name: str
    dimension: int
    region: Region
    weight: Weight
    multiplier: Fraction = Fraction(1)
    kappa: AffineForm = field(default_factory=lambda: AffineForm.parse("kappa"))
    omega: OmegaVariant = "exact"
    arity: str = "theta"

    def __post_init__(self):
        if not 1 <= self.dimension <= 6:
            raise SpecificationError(f"{self.name}: dimension {self.dimension} outside 1..6")
        if self.region.dimension not in (None, self.dimension):
            raise SpecificationError(
                f"{self.name}: region {self.region.name} has dimension {self.region.dimension}"
            )

    @classmethod
    def from_record(cls, record: IntegralRecord, catalog: Catalog) -> "IntegralSpec":
        return cls(
            name=record.name,
            dimension=record.dimension,
            region=catalog.region(record.region),
            weight=record.weight,
            multiplier=Fraction(record.multiplier),
            kappa=AffineForm.parse(record.kappa),
            omega=record.omega,
            arity=record.arity,
        )


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    est_error: float
    samples: int
    seed: int
    strata: int = 0
    name: str = ""
    empty: bool = False
    zero_hits: bool = False
    budget_exhausted: bool = False
    variants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.est_error < 0:
            raise ValueError("est_error must be non-negative")

    @property
    def flagged(self) -> bool:
        return self.zero_hits or self.budget_exhausted


# --------------------------------------------------------------------------- #
# Weights
# --------------------------------------------------------------------------- #
def _omega_function(variant: OmegaVariant, settings: Settings | None = None):
    if variant == "lower":
        return buchstab.omega_lower
    if variant == "upper":
        return buchstab.omega_upper
    if settings is None:
        return buchstab.omega
    return buchstab.get_table(settings.grid_step, settings.u_max).omega


def weight_values(
    spec: IntegralSpec, points: np.ndarray, scope: Scope, settings: Settings | None = None
) -> np.ndarray:
    """Weight at each row of ``points``; callers pass only points inside the region."""
    if spec.weight == "unit":
        return np.ones(points.shape[0])
    product = np.prod(points, axis=1)
    rest = 1.0 - points.sum(axis=1)
    if spec.weight == "reciprocal":
        return 1.0 / (product * rest)
    kappa = float(spec.kappa.param_value(scope))
    u = rest / kappa
    out = np.zeros(points.shape[0])
    live = u >= 1.0
    if live.any():
        omega = _omega_function(spec.omega, settings)
        out[live] = np.asarray(omega(u[live])) / (kappa * product[live])
    return out


def _check_bounded(spec: IntegralSpec, box: Box, scope: Scope) -> float:
    """Reject weights that blow up on the box; returns a bound for the weight on it."""
    if spec.weight == "unit":
        return 1.0
    low = float(np.min(box.lower))
    if low <= 0:
        raise SpecificationError(
            f"{spec.name}: region {spec.region.name} does not keep every t_i away from 0"
        )
    reciprocal = 1.0 / float(np.prod(box.lower))
    if spec.weight == "buchstab":
        kappa = float(spec.kappa.param_value(scope))
        if kappa <= 0:
            raise SpecificationError(f"{spec.name}: kappa = {kappa} must be positive")
        return reciprocal / kappa
    bounds = sum_range(spec.region, spec.dimension, scope)
    top = bounds[1] if bounds else 0.0
    if top >= 1.0:
        raise SpecificationError(
            f"{spec.name}: region {spec.region.name} lets sum t reach 1 (weight unbounded)"
        )
    return reciprocal / (1.0 - top)


# --------------------------------------------------------------------------- #
# Strata
# --------------------------------------------------------------------------- #
@dataclass
class _Stratum:
    lower: np.ndarray
    upper: np.ndarray
    seq: np.random.SeedSequence
    depth: int = 0
    n: int = 0
    s1: float = 0.0
    s2: float = 0.0
    hits: int = 0
    engine: qmc.Sobol | None = None

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def mean(self) -> float:
        return self.s1 / self.n if self.n else 0.0

    @property
    def variance_of_mean(self) -> float:
        if self.n < 2:
            return 0.0
        var = max(0.0, (self.s2 - self.s1 * self.s1 / self.n) / (self.n - 1))
        return self.volume**2 * var / self.n

    @property
    def mixed(self) -> bool:
        return 0 < self.hits < self.n

    def draw(self, count: int) -> np.ndarray:
        if self.engine is None:
            rng = np.random.default_rng(self.seq)
            self.engine = qmc.Sobol(d=len(self.lower), scramble=True, seed=rng)
        unit = self.engine.random(count)
        return qmc.scale(unit, self.lower, self.upper) if count else unit

    def absorb(self, values: np.ndarray, hits: int) -> None:
        self.n += values.shape[0]
        self.s1 += float(np.sum(values))
        self.s2 += float(np.sum(values * values))
        self.hits += hits

    def split(self) -> tuple["_Stratum", "_Stratum"]:
        axis = int(np.argmax(self.upper - self.lower))
        mid = 0.5 * (self.lower[axis] + self.upper[axis])
        left_upper = self.upper.copy()
        left_upper[axis] = mid
        right_lower = self.lower.copy()
        right_lower[axis] = mid
        left_seq, right_seq = self.seq.spawn(2)
        return (
            _Stratum(self.lower.copy(), left_upper, left_seq, self.depth + 1),
            _Stratum(right_lower, self.upper.copy(), right_seq, self.depth + 1),
        )


def _initial_strata(box: Box, seed: int) -> list[_Stratum]:
    k = len(box.lower)
    children = np.random.SeedSequence(seed).spawn(1 << k)
    mid = 0.5 * (box.lower + box.upper)
    strata = []
    for code, seq in enumerate(children):
        bits = (code >> np.arange(k)) & 1
        lower = np.where(bits == 1, mid, box.lower)
        upper = np.where(bits == 1, box.upper, mid)
        strata.append(_Stratum(lower, upper, seq))
    return strata


def _pilot_size(k: int, budget: int) -> int:
    n = PILOT_POINTS
    while n > MIN_PILOT_POINTS and (n << k) * 4 > budget:
        n >>= 1
    return n


def _evaluate(
    spec: IntegralSpec, points: np.ndarray, scope: Scope, ctx: EvalContext, settings: Settings
) -> tuple[np.ndarray, np.ndarray]:
    inside = spec.region.mask(points, scope, ctx)
    values = np.zeros(points.shape[0])
    if inside.any():
        values[inside] = weight_values(spec, points[inside], scope, settings)
    return values, inside


def _run_round(
    spec: IntegralSpec,
    work: list[tuple[_Stratum, int]],
    scope: Scope,
    ctx: EvalContext,
    settings: Settings,
) -> None:
    """Draw for every (stratum, count) pair, evaluate in bulk, fold back in list order."""
    batches = [stratum.draw(count) for stratum, count in work]
    sizes = [b.shape[0] for b in batches]
    points = np.vstack(batches)

    workers = settings.workers
    if workers > 1 and points.shape[0] > 4096:
        chunks = np.array_split(points, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _evaluate(spec, c, scope, ctx, settings), chunks))
        values = np.concatenate([p[0] for p in parts])
        inside = np.concatenate([p[1] for p in parts])
    else:
        values, inside = _evaluate(spec, points, scope, ctx, settings)

    offset = 0
    for (stratum, _), size in zip(work, sizes):
        stratum.absorb(values[offset : offset + size], int(inside[offset : offset + size].sum()))
        offset += size


# --------------------------------------------------------------------------- #
# integrate
# --------------------------------------------------------------------------- #
def _scope_of(params: ThetaParams | Scope) -> Scope:
    if isinstance(params, ThetaParams):
        return params.scope()
    return dict(params)


def integrate(
    spec: IntegralSpec,
    params: ThetaParams | Scope,
    rtol: float | None = None,
    *,
    atol: float | None = None,
    seed: int | None = None,
    budget: int | None = None,
    toggles: Mapping[str, bool] | None = None,
    settings: Settings | None = None,
) -> QuadratureResult:
    """Estimate ``multiplier * int_region weight`` to ``max(atol, rtol * |value|)``.

    Args:
        spec: integral to evaluate.
        params: ThetaParams or an explicit parameter scope (for example ``{"kappa": 1/11}``).
        rtol, atol: stop rule; default to the settings.
        seed: root of the per-stratum seed tree.
        budget: maximum number of integrand evaluations.
        toggles: catalog switches such as ``v_floor``.

    Returns:
        QuadratureResult. An empty LP hull gives value 0 exactly; a region that no sample
        hits in the whole budget gives value 0 with ``zero_hits`` set and a budget-limited
        ``est_error``.

    Raises:
        SpecificationError: weight unbounded on the region, or unbounded box.
        ConfigurationError: the region needs a parameter the scope lacks.
    """
    settings = settings or get_settings()
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol
    seed = settings.seed if seed is None else seed
    budget = settings.budget if budget is None else budget
    if rtol <= 0 and atol <= 0:
        raise DomainError("need rtol > 0 or atol > 0")
    if budget <= 0:
        raise DomainError(f"budget must be positive, got {budget}")

    scope = _scope_of(params)
    toggle_state = {"v_floor": settings.v_floor}
    toggle_state.update(toggles or {})
    ctx = EvalContext(toggle_state)
    k = spec.dimension
    multiplier = float(spec.multiplier)

    box = bounding_box(spec.region, k, scope)
    if box.empty:
        logger.info("%s: region %s is empty at this point", spec.name, spec.region.name)
        return QuadratureResult(0.0, 0.0, 0, seed, name=spec.name, empty=True)
    weight_bound = _check_bounded(spec, box, scope)

    strata = _initial_strata(box, seed)
    pilot = _pilot_size(k, budget)
    max_strata = max(len(strata), budget // pilot)
    _run_round(spec, [(s, pilot) for s in strata], scope, ctx, settings)
    used = pilot * len(strata)

    exhausted = False
    rounds = 0
    while True:
        contributions = np.array([s.variance_of_mean for s in strata])
        value = float(sum(s.volume * s.mean for s in strata))
        error = math.sqrt(float(contributions.sum()))
        target = max(atol / multiplier, rtol * abs(value))
        logger.debug(
            "%s round %d: value=%.8g err=%.3g samples=%d strata=%d",
            spec.name, rounds, value * multiplier, error * multiplier, used, len(strata),
        )
        if used < budget and not any(s.hits for s in strata):
            # nothing inside yet: resample every stratum until a hit or the budget runs out
            work: list[tuple[_Stratum, int]] = []
            spend = 0
            for stratum in strata:
                count = min(stratum.n, budget - used - spend)
                if count <= 0:
                    break
                work.append((stratum, count))
                spend += count
            _run_round(spec, work, scope, ctx, settings)
            used += spend
            rounds += 1
            continue
        if error <= target:
            break
        if used >= budget:
            exhausted = True
            break

        order = np.argsort(-contributions, kind="stable")
        cumulative = np.cumsum(contributions[order])
        cut = int(np.searchsorted(cumulative, 0.5 * cumulative[-1])) + 1
        selected = sorted(order[:cut].tolist())

        work = []
        next_strata: list[_Stratum] = []
        chosen = set(selected)
        spend = 0
        for index, stratum in enumerate(strata):
            if index not in chosen or used + spend >= budget:
                next_strata.append(stratum)
                continue
            can_split = (
                stratum.depth < MAX_DEPTH
                and len(strata) + len(work) < max_strata
            )
            if can_split:
                left, right = stratum.split()
                next_strata.extend((left, right))
                work.extend(((left, pilot), (right, pilot)))
                spend += 2 * pilot
            else:
                next_strata.append(stratum)
                work.append((stratum, stratum.n))
                spend += stratum.n
        if not work:
            exhausted = True
            break
        _run_round(spec, work, scope, ctx, settings)
        strata = next_strata
        used += spend
        rounds += 1

    hits = sum(s.hits for s in strata)
    if hits == 0:
        bound = ZERO_HIT_FACTOR * box.volume * weight_bound * multiplier / used
        logger.warning(
            "%s: no sample hit region %s in %d draws; reporting 0 +- %.3g",
            spec.name, spec.region.name, used, bound,
        )
        return QuadratureResult(
            0.0, bound, used, seed, strata=len(strata), name=spec.name, zero_hits=True
        )
    if exhausted:
        logger.warning(
            "%s: budget of %d samples spent with est_error %.3g above target",
            spec.name, budget, error * multiplier,
        )
    return QuadratureResult(
        value=value * multiplier,
        est_error=error * multiplier,
        samples=used,
        seed=seed,
        strata=len(strata),
        name=spec.name,
        budget_exhausted=exhausted,
    )


# --------------------------------------------------------------------------- #
# Named integrals
# --------------------------------------------------------------------------- #
def _warn_outside_pair_window(params: ThetaParams) -> None:
    t1, t2 = params.components[:2]
    theta = params.theta
    if not (t1 < 1 / 3 and t2 < 1 / 5 and 29 / 56 <= theta < 11 / 21):
        logger.warning("%s lies outside the window %s", params.label(), PAIR_WINDOW)


def _check_arity(record: IntegralRecord, params: ThetaParams | float) -> Scope:
    if record.arity == "kappa":
        if isinstance(params, ThetaParams):
            raise DomainError(f"{record.name} takes kappa directly, not {params.label()}")
        return {"kappa": float(params)}
    if not isinstance(params, ThetaParams):
        raise DomainError(f"{record.name} takes theta parameters, got {params!r}")
    if record.arity == "theta" and params.mode != 1:
        raise DomainError(f"{record.name} takes a single theta, got {params.label()}")
    if record.arity == "pair":
        if params.mode != 2:
            raise DomainError(f"{record.name} takes (theta1, theta2), got {params.label()}")
        _warn_outside_pair_window(params)
    return params.scope()


def named_integral(
    name: str,
    params: ThetaParams | float,
    rtol: float | None = None,
    *,
    catalog: Catalog | None = None,
    omega: OmegaVariant | None = None,
    compare_toggles: bool = True,
    **options,
) -> QuadratureResult:
    """Integral ``name`` from the catalog at ``params``.

    Regions whose tree carries a switch (the V_j floor) are integrated both ways when
    ``compare_toggles``; the settings' state gives ``value``, and a WARNING is logged when
    the two differ by more than the combined error.
    """
    settings = options.get("settings") or get_settings()
    catalog = catalog or load_catalog(settings.catalog)
    record = catalog.integral(name)
    scope = _check_arity(record, params)
    spec = IntegralSpec.from_record(record, catalog)
    if omega is not None:
        spec = replace(spec, omega=omega)

    result = integrate(spec, scope, rtol, **options)
    switches = sorted(spec.region.toggles)
    if not compare_toggles or not switches:
        return result

    base_state = dict(options.pop("toggles", None) or {})
    variants = {}
    for switch in switches:
        flipped = dict(base_state)
        flipped[switch] = not base_state.get(switch, getattr(settings, switch, True))
        other = integrate(spec, scope, rtol, toggles=flipped, **options)
        variants[f"{switch}={'on' if flipped[switch] else 'off'}"] = other.value
        gap = abs(other.value - result.value)
        if gap > result.est_error + other.est_error:
            logger.warning(
                "%s: switching %s changes the value by %.3g (%.8g vs %.8g)",
                name, switch, gap, result.value, other.value,
            )
    return replace(result, variants=variants)


def eval_L7(kappa: float, rtol: float | None = None, **options) -> QuadratureResult:
    """Sum of the three kappa-indexed pieces; errors add in quadrature.

    Raises:
        DomainError: kappa outside (0, 1/8].
    """
    lo, hi = L7_DOMAIN
    if not lo < kappa <= hi:
        raise DomainError(f"L7 needs 0 < kappa <= 1/8, got {kappa}")
    parts = [
        named_integral(part, kappa, rtol, compare_toggles=False, **options) for part in L7_PARTS
    ]
    return QuadratureResult(
        value=float(sum(p.value for p in parts)),
        est_error=math.sqrt(sum(p.est_error**2 for p in parts)),
        samples=sum(p.samples for p in parts),
        seed=parts[0].seed,
        strata=sum(p.strata for p in parts),
        name=f"L7({kappa:g})",
        budget_exhausted=any(p.budget_exhausted for p in parts),
        variants={p.name: p.value for p in parts},
    )


def pair_loss(params: ThetaParams, **options) -> QuadratureResult:
    """I5 + I6 at a two-modulus point, at the escalated budget unless overridden."""
    settings = options.get("settings") or get_settings()
    options.setdefault("budget", settings.escalated_budget)
    options.setdefault("atol", settings.escalated_atol)
    parts = [named_integral(name, params, **options) for name in ("I5", "I6")]
    return QuadratureResult(
        value=parts[0].value + parts[1].value,
        est_error=parts[0].est_error + parts[1].est_error,
        samples=parts[0].samples + parts[1].samples,
        seed=parts[0].seed,
        strata=parts[0].strata + parts[1].strata,
        name="I5+I6",
        zero_hits=all(p.zero_hits or p.empty for p in parts),
        budget_exhausted=any(p.budget_exhausted for p in parts),
        variants={p.name: p.value for p in parts},
    )


# --------------------------------------------------------------------------- #
# Calibration
# --------------------------------------------------------------------------- #
def simplex_region(k: int) -> Region:
    """Open simplex t_i > 0, sum t < 1."""
    return Region(
        name=f"simplex{k}",
        dimension=k,
        tree=AllOf([Each(Inequality.parse("x > 0")), Inequality.parse("sigma < 1")]),
        description="open standard simplex",
    )


def simplex_calibration(k: int, rtol: float | None = None, **options) -> QuadratureResult:
    """Unit weight over the k-simplex; the exact value is 1/k!."""
    if not 1 <= k <= 6:
        raise DomainError(f"calibration dimension must lie in 1..6, got {k}")
    spec = IntegralSpec(name=f"simplex{k}", dimension=k, region=simplex_region(k), weight="unit")
    return integrate(spec, {}, rtol, **options)
