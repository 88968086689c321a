"""Parametric affine inequality regions, partition predicates and interval unions.

Every region in the catalog is a boolean tree whose leaves are chained affine inequalities
over the point coordinates (s, t or t1 ... tk) and the theta-parameters. Trees are compiled
once at catalog load; evaluation is vectorised over an (n, k) array of points so the same
code serves single membership checks and the quadrature engine.
"""
from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Any, Iterable, Iterator, Mapping, Protocol, Sequence

import numpy as np
import sympy
from scipy.optimize import linprog

from sievelab.core.errors import (
    ConfigurationError,
    DomainError,
    ResourceError,
    SpecificationError,
)

logger = logging.getLogger(__name__)

# --------------------------------------------------------------------------- #
# Names
# --------------------------------------------------------------------------- #
MAX_PARTITION_SIZE: int = 24
TOUCH_TOL: float = 1e-12
ALPHA_SUM_TOL: float = 1e-12

PARAMETER_NAMES: tuple[str, ...] = (
    "theta",
    "theta1",
    "theta2",
    "theta3",
    "eps",
    "delta",
    "eps_sq",
    "kappa",
    "kappa_prime",
    "tau",
    "tau_prime",
    "nu",
    "nu_prime",
)
VARIABLE_NAMES: tuple[str, ...] = (
    ("s", "t", "sigma", "x") + tuple(f"t{i}" for i in range(1, MAX_PARTITION_SIZE + 1))
)
SYMBOLS: dict[str, sympy.Symbol] = {
    name: sympy.Symbol(name) for name in PARAMETER_NAMES + VARIABLE_NAMES
}

Scope = Mapping[str, Any]


class ParamSource(Protocol):
    def scope(self) -> dict[str, float]: ...


def as_scope(params: ParamSource | Scope | None) -> Scope:
    if params is None:
        return {}
    if hasattr(params, "scope"):
        return params.scope()
    return params


def column_of(variable: str) -> int | None:
    """Column index of a coordinate name; None for sigma and x."""
    if variable == "s":
        return 0
    if variable == "t":
        return 1
    if variable.startswith("t") and variable[1:].isdigit():
        return int(variable[1:]) - 1
    return None


# --------------------------------------------------------------------------- #
# Affine forms
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class AffineForm:
    """constant + sum(params[p] * c_p) + sum(coords[v] * c_v), all coefficients rational."""

    constant: Fraction = Fraction(0)
    params: tuple[tuple[str, Fraction], ...] = ()
    variables: tuple[tuple[str, Fraction], ...] = ()
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "AffineForm":
        try:
            expr = sympy.expand(sympy.sympify(text, locals=SYMBOLS, rational=True))
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise ConfigurationError(f"cannot parse affine form {text!r}: {exc}") from exc

        constant = Fraction(0)
        params: dict[str, Fraction] = {}
        variables: dict[str, Fraction] = {}
        for term, coeff in expr.as_coefficients_dict().items():
            if not coeff.is_Rational:
                raise ConfigurationError(f"non-rational coefficient in {text!r}")
            value = Fraction(int(coeff.p), int(coeff.q))
            if term == 1:
                constant += value
            elif isinstance(term, sympy.Symbol) and term.name in PARAMETER_NAMES:
                params[term.name] = params.get(term.name, Fraction(0)) + value
            elif isinstance(term, sympy.Symbol) and term.name in VARIABLE_NAMES:
                variables[term.name] = variables.get(term.name, Fraction(0)) + value
            else:
                raise ConfigurationError(f"{text!r} is not affine in known names (term {term})")
        return cls(
            constant=constant,
            params=tuple(sorted((k, v) for k, v in params.items() if v)),
            variables=tuple(sorted((k, v) for k, v in variables.items() if v)),
            text=text.strip(),
        )

    @classmethod
    def const(cls, value: Fraction | int) -> "AffineForm":
        value = Fraction(value)
        return cls(constant=value, text=str(value))

    def __str__(self) -> str:
        return self.text or repr(self)

    def __add__(self, other: "AffineForm") -> "AffineForm":
        return self.combine(other, Fraction(1), Fraction(1))

    def scale(self, factor: Fraction) -> "AffineForm":
        return AffineForm(
            constant=self.constant * factor,
            params=tuple((k, v * factor) for k, v in self.params),
            variables=tuple((k, v * factor) for k, v in self.variables),
            text=f"{factor}*({self.text})",
        )

    def combine(self, other: "AffineForm", a: Fraction, b: Fraction) -> "AffineForm":
        """a*self + b*other."""

        def merged(x, y):
            out: dict[str, Fraction] = {}
            for k, v in x:
                out[k] = out.get(k, Fraction(0)) + a * v
            for k, v in y:
                out[k] = out.get(k, Fraction(0)) + b * v
            return tuple(sorted((k, v) for k, v in out.items() if v))

        return AffineForm(
            constant=a * self.constant + b * other.constant,
            params=merged(self.params, other.params),
            variables=merged(self.variables, other.variables),
            text=f"{a}*({self.text}) + {b}*({other.text})",
        )

    @property
    def parameter_names(self) -> set[str]:
        return {k for k, _ in self.params}

    @property
    def is_parametric_only(self) -> bool:
        return not self.variables

    def param_value(self, scope: Scope):
        value = float(self.constant)
        for name, coeff in self.params:
            try:
                value = value + float(coeff) * scope[name]
            except KeyError:
                raise ConfigurationError(
                    f"parameter {name!r} is not available at this point (needed by {self.text!r})"
                ) from None
        return value

    def evaluate(self, points: np.ndarray, scope: Scope, x: np.ndarray | None = None):
        """Value at each row of ``points`` (shape (n, k)); ``x`` feeds the per-coordinate name."""
        value = self.param_value(scope)
        k = points.shape[1]
        for name, coeff in self.variables:
            c = float(coeff)
            if name == "sigma":
                value = value + c * points.sum(axis=1)
            elif name == "x":
                if x is None:
                    raise ConfigurationError(f"'x' used outside an 'each' atom in {self.text!r}")
                value = value + c * x
            else:
                col = column_of(name)
                if col is None or col >= k:
                    raise DomainError(f"{name!r} is out of range for a {k}-dimensional point")
                value = value + c * points[:, col]
        return value

    def linear_part(self, k: int, x_column: int | None = None) -> np.ndarray:
        """Coefficient row over the k coordinates (sigma spread over all columns)."""
        row = np.zeros(k)
        for name, coeff in self.variables:
            c = float(coeff)
            if name == "sigma":
                row += c
            elif name == "x":
                row[x_column] += c
            else:
                col = column_of(name)
                if col is None or col >= k:
                    raise DomainError(f"{name!r} is out of range for a {k}-dimensional point")
                row[col] += c
        return row


# --------------------------------------------------------------------------- #
# Boolean trees
# --------------------------------------------------------------------------- #
_RELATION_SPLIT = re.compile(r"(<=|>=|<|>)")
_LESS = {"<", "<="}


def _full(n: int, value) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=bool), (n,)).copy()


def _compare(lhs, rel: str, rhs, n: int) -> np.ndarray:
    if rel == "<":
        out = lhs < rhs
    elif rel == "<=":
        out = lhs <= rhs
    elif rel == ">":
        out = lhs > rhs
    else:
        out = lhs >= rhs
    return _full(n, out)


@dataclass
class EvalContext:
    toggles: Mapping[str, bool] = field(default_factory=dict)


class Node:
    def mask(self, points: np.ndarray, scope: Scope, ctx: EvalContext) -> np.ndarray:
        raise NotImplementedError

    def children(self) -> Iterable["Node"]:
        return ()

    def toggles(self) -> set[str]:
        found: set[str] = set()
        for child in self.children():
            found |= child.toggles()
        return found


@dataclass
class Inequality(Node):
    """A chain such as ``2*theta - 1 < s < (5 - 8*theta)/6``."""

    terms: list[AffineForm]
    relations: list[str]
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "Inequality":
        parts = _RELATION_SPLIT.split(text)
        terms = [AffineForm.parse(p) for p in parts[0::2]]
        relations = parts[1::2]
        if not relations:
            raise ConfigurationError(f"no relation in inequality {text!r}")
        return cls(terms=terms, relations=relations, text=text)

    @property
    def uses_x(self) -> bool:
        return any(name == "x" for term in self.terms for name, _ in term.variables)

    def mask(self, points, scope, ctx, x=None):
        n = points.shape[0]
        out = np.ones(n, dtype=bool)
        values = [term.evaluate(points, scope, x) for term in self.terms]
        for lhs, rel, rhs in zip(values, self.relations, values[1:]):
            out &= _compare(lhs, rel, rhs, n)
        return out

    def pairs(self) -> Iterator[AffineForm]:
        """Each link as a form f with f <= 0 (strictness dropped)."""
        for lhs, rel, rhs in zip(self.terms, self.relations, self.terms[1:]):
            if rel in _LESS:
                yield lhs.combine(rhs, Fraction(1), Fraction(-1))
            else:
                yield rhs.combine(lhs, Fraction(1), Fraction(-1))


@dataclass
class AllOf(Node):
    items: list[Node]

    def mask(self, points, scope, ctx):
        out = np.ones(points.shape[0], dtype=bool)
        for item in self.items:
            if not out.any():
                break
            out &= item.mask(points, scope, ctx)
        return out

    def children(self):
        return self.items


@dataclass
class AnyOf(Node):
    items: list[Node]

    def mask(self, points, scope, ctx):
        out = np.zeros(points.shape[0], dtype=bool)
        for item in self.items:
            if out.all():
                break
            out |= item.mask(points, scope, ctx)
        return out

    def children(self):
        return self.items


@dataclass
class NotOf(Node):
    item: Node

    def mask(self, points, scope, ctx):
        return ~self.item.mask(points, scope, ctx)

    def children(self):
        return (self.item,)


@dataclass
class Each(Node):
    """The inequality must hold with x replaced by every coordinate."""

    atom: Inequality

    def mask(self, points, scope, ctx):
        out = np.ones(points.shape[0], dtype=bool)
        for j in range(points.shape[1]):
            out &= self.atom.mask(points, scope, ctx, x=points[:, j])
        return out


@dataclass
class Descending(Node):
    strict: bool

    def mask(self, points, scope, ctx):
        if points.shape[1] < 2:
            return np.ones(points.shape[0], dtype=bool)
        diffs = points[:, :-1] - points[:, 1:]
        return np.all(diffs > 0 if self.strict else diffs >= 0, axis=1)


def _tile_scope(scope: Scope, n: int, repeats: int) -> Scope:
    tiled = {}
    for name, value in scope.items():
        arr = np.asarray(value)
        tiled[name] = np.repeat(arr, repeats) if arr.ndim == 1 and arr.shape[0] == n else value
    return tiled


@dataclass
class PartitionInto(Node):
    """Some split of the coordinates (plus appended values) lands in a 2-d region."""

    target_name: str
    append: list[AffineForm] = field(default_factory=list)
    target: "Region | None" = None

    def mask(self, points, scope, ctx):
        n = points.shape[0]
        if self.append:
            extra = [np.broadcast_to(f.param_value(scope), (n,)) for f in self.append]
            points = np.column_stack([points, *extra])
        return partition_mask(points, self.target, scope, ctx)

    def toggles(self):
        return self.target.tree.toggles() if self.target else set()


@dataclass
class Member(Node):
    """Membership of an affine image of the point in another named region."""

    target_name: str
    mapping: list[AffineForm] | None = None
    target: "Region | None" = None

    def mask(self, points, scope, ctx):
        if self.mapping is not None:
            n = points.shape[0]
            cols = [np.broadcast_to(f.evaluate(points, scope), (n,)) for f in self.mapping]
            points = np.column_stack(cols) if cols else np.empty((n, 0))
        return self.target.mask(points, scope, ctx)

    def toggles(self):
        return self.target.tree.toggles() if self.target else set()


@dataclass
class Toggle(Node):
    """Constraint that only applies while the named switch is on."""

    name: str
    item: Node

    def mask(self, points, scope, ctx):
        if ctx.toggles.get(self.name, True):
            return self.item.mask(points, scope, ctx)
        return np.ones(points.shape[0], dtype=bool)

    def children(self):
        return (self.item,)

    def toggles(self):
        return {self.name} | self.item.toggles()


# --------------------------------------------------------------------------- #
# Regions and points
# --------------------------------------------------------------------------- #
@dataclass
class Region:
    """A named region: ``dimension`` 0 for parameter-space regions, None for k-families."""

    name: str
    dimension: int | None
    tree: Node
    description: str = ""

    def mask(self, points: np.ndarray, scope: Scope, ctx: EvalContext | None = None) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2:
            raise DomainError(f"points for {self.name} must be 2-d, got shape {points.shape}")
        if self.dimension is not None and points.shape[1] != self.dimension:
            raise DomainError(
                f"region {self.name} has dimension {self.dimension}, point has {points.shape[1]}"
            )
        return self.tree.mask(points, scope, ctx or EvalContext())

    @property
    def toggles(self) -> set[str]:
        return self.tree.toggles()


@dataclass(frozen=True)
class AlphaVector:
    """Exponents alpha_i, sorted descending, positive, summing to at most 1."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(v) for v in self.alphas)
        object.__setattr__(self, "alphas", a)
        if any(v <= 0 for v in a):
            raise DomainError(f"alphas must be positive: {a}")
        if any(x < y for x, y in zip(a, a[1:])):
            raise DomainError(f"alphas must be sorted descending: {a}")
        if sum(a) > 1.0 + ALPHA_SUM_TOL:
            raise DomainError(f"alphas sum to {sum(a)} > 1")

    @classmethod
    def of(cls, values: Iterable[float]) -> "AlphaVector":
        return cls(tuple(sorted((float(v) for v in values), reverse=True)))

    def __len__(self) -> int:
        return len(self.alphas)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alphas, dtype=float)


def _point_row(point: AlphaVector | Sequence[float]) -> np.ndarray:
    if isinstance(point, AlphaVector):
        return point.as_array()[None, :]
    return np.asarray(point, dtype=float).reshape(1, -1)


def contains(
    region: Region,
    point: AlphaVector | Sequence[float],
    params: ParamSource | Scope | None,
    toggles: Mapping[str, bool] | None = None,
) -> bool:
    """Whether the point satisfies the region's inequality tree as written.

    Raises:
        DomainError: dimension mismatch.
        ConfigurationError: the region references a parameter the point does not supply.
    """
    mask = region.mask(_point_row(point), as_scope(params), EvalContext(toggles or {}))
    return bool(mask[0])


# --------------------------------------------------------------------------- #
# Partition predicates
# --------------------------------------------------------------------------- #
SUBSET_CHUNK: int = 1 << 16


@lru_cache(maxsize=17)
def subset_matrix(k: int) -> np.ndarray:
    """0/1 matrix whose rows are the nonempty subsets of range(k), bit i = index i."""
    if k > 16:
        raise ResourceError(f"dense subset matrix over {k} elements; use subset_chunks")
    codes = np.arange(1, 1 << k, dtype=np.int64)
    return ((codes[:, None] >> np.arange(k)) & 1).astype(float)


def subset_chunks(k: int) -> Iterator[np.ndarray]:
    """Nonempty subsets of range(k) as 0/1 rows, at most SUBSET_CHUNK rows per block."""
    if k > MAX_PARTITION_SIZE:
        raise ResourceError(f"subset enumeration over {k} > {MAX_PARTITION_SIZE} elements")
    if k <= 16:
        yield subset_matrix(k)
        return
    for start in range(1, 1 << k, SUBSET_CHUNK):
        codes = np.arange(start, min(start + SUBSET_CHUNK, 1 << k), dtype=np.int64)
        yield ((codes[:, None] >> np.arange(k)) & 1).astype(float)


def partition_mask(
    points: np.ndarray, region2d: Region, scope: Scope, ctx: EvalContext
) -> np.ndarray:
    """Row-wise: does some split I | J give (sum_I, sum_J) in ``region2d``? J may be empty."""
    if region2d.dimension != 2:
        raise DomainError(f"partition target {region2d.name} must be 2-dimensional")
    n, k = points.shape
    out = np.zeros(n, dtype=bool)
    if k == 0:
        return out
    totals = points.sum(axis=1)[:, None]
    for bits in subset_chunks(k):
        m = bits.shape[0]
        s = points @ bits.T
        t = totals - s
        pairs = np.column_stack([s.ravel(), t.ravel()])
        hits = region2d.mask(pairs, _tile_scope(scope, n, m), ctx)
        out |= hits.reshape(n, m).any(axis=1)
        if out.all():
            break
    return out


def partitions_into(
    alpha: AlphaVector | Sequence[float],
    region2d: Region,
    params: ParamSource | Scope | None,
    toggles: Mapping[str, bool] | None = None,
) -> bool:
    """True iff the alphas split into I, J with (sum_I, sum_J) in ``region2d``.

    Raises:
        ResourceError: more than 24 alphas.
    """
    row = _point_row(alpha)
    if row.shape[1] == 0:
        raise DomainError("alpha must be nonempty")
    if row.shape[1] > MAX_PARTITION_SIZE:
        raise ResourceError(f"{row.shape[1]} alphas exceed the subset bound {MAX_PARTITION_SIZE}")
    return bool(partition_mask(row, region2d, as_scope(params), EvalContext(toggles or {}))[0])


# --------------------------------------------------------------------------- #
# Interval unions
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Interval:
    lo: AffineForm
    hi: AffineForm
    lo_open: bool = True
    hi_open: bool = True
    provenance: str = ""

    def bounds(self, scope: Scope) -> tuple[float, float]:
        return float(self.lo.param_value(scope)), float(self.hi.param_value(scope))

    def contains(self, x: float, scope: Scope) -> bool:
        lo, hi = self.bounds(scope)
        above = lo < x if self.lo_open else lo <= x
        below = x < hi if self.hi_open else x <= hi
        return above and below

    def render(self, scope: Scope | None = None, digits: int = 6) -> str:
        left = "(" if self.lo_open else "["
        right = ")" if self.hi_open else "]"
        if scope is None:
            return f"{left}{self.lo}, {self.hi}{right}"
        lo, hi = self.bounds(scope)
        return f"{left}{lo:.{digits}g}, {hi:.{digits}g}{right}"


@dataclass(frozen=True)
class IntervalUnion:
    pieces: tuple[Interval, ...] = ()

    def __iter__(self):
        return iter(self.pieces)

    def __len__(self) -> int:
        return len(self.pieces)

    def numeric(self, params: ParamSource | Scope) -> list[tuple[float, float, bool, bool]]:
        scope = as_scope(params)
        return [(*p.bounds(scope), p.lo_open, p.hi_open) for p in self.pieces]

    def measure(self, params: ParamSource | Scope) -> float:
        return sum(max(0.0, hi - lo) for lo, hi, _, _ in self.numeric(params))

    def render(self, params: ParamSource | Scope | None = None, digits: int = 6) -> str:
        scope = as_scope(params) if params is not None else None
        if not self.pieces:
            return "empty"
        return " ∪ ".join(p.render(scope, digits) for p in self.pieces)


def merge_intervals(u: IntervalUnion, params: ParamSource | Scope) -> IntervalUnion:
    """Canonical sorted disjoint union at ``params``.

    Overlapping pieces merge; pieces touching at a point merge only when at least one
    side of the junction is closed. Endpoints closer than TOUCH_TOL count as equal: pieces with
    hi < lo are dropped, and so is a zero-width piece unless both its ends are closed (a single
    point). Merged pieces keep the affine form of the endpoint that won, so the result stays
    valid near ``params``.
    """
    scope = as_scope(params)
    live = []
    for piece in u.pieces:
        lo, hi = piece.bounds(scope)
        width = hi - lo
        point = abs(width) <= TOUCH_TOL and not (piece.lo_open or piece.hi_open)
        if width > TOUCH_TOL or point:
            live.append((lo, hi, piece))
    live.sort(key=lambda item: (item[0], item[2].lo_open, -item[1]))

    merged: list[list] = []  # [lo, hi, lo_form, hi_form, lo_open, hi_open, provenance]
    for lo, hi, piece in live:
        if merged:
            cur = merged[-1]
            overlaps = lo < cur[1] - TOUCH_TOL
            touches = abs(lo - cur[1]) <= TOUCH_TOL and not (cur[5] and piece.lo_open)
            if overlaps or touches:
                if hi > cur[1] + TOUCH_TOL:
                    cur[1], cur[3], cur[5] = hi, piece.hi, piece.hi_open
                elif abs(hi - cur[1]) <= TOUCH_TOL:
                    cur[5] = cur[5] and piece.hi_open
                if abs(lo - cur[0]) <= TOUCH_TOL:
                    cur[4] = cur[4] and piece.lo_open
                if piece.provenance and piece.provenance not in cur[6].split("+"):
                    cur[6] = f"{cur[6]}+{piece.provenance}" if cur[6] else piece.provenance
                continue
        merged.append([lo, hi, piece.lo, piece.hi, piece.lo_open, piece.hi_open, piece.provenance])

    return IntervalUnion(
        tuple(
            Interval(lo=m[2], hi=m[3], lo_open=m[4], hi_open=m[5], provenance=m[6])
            for m in merged
        )
    )


def interval_contains(u: IntervalUnion, x: float, params: ParamSource | Scope) -> bool:
    scope = as_scope(params)
    return any(piece.contains(x, scope) for piece in u.pieces)


# --------------------------------------------------------------------------- #
# Bounding boxes by linear programming
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray
    empty: bool = False

    @property
    def volume(self) -> float:
        if self.empty:
            return 0.0
        return float(np.prod(self.upper - self.lower))


def linear_constraints(
    tree: Node, k: int, scope: Scope
) -> tuple[list[np.ndarray], list[float], bool]:
    """Top-level conjunctive linear atoms as rows of A t <= b.

    Returns (rows, rhs, infeasible) where ``infeasible`` flags a parameter-only atom that is
    already false at ``scope``.
    """
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    pending: list[Node] = [tree]
    while pending:
        node = pending.pop()
        if isinstance(node, AllOf):
            pending.extend(node.items)
        elif isinstance(node, Toggle):
            pass
        elif isinstance(node, Inequality) and not node.uses_x:
            if all(term.is_parametric_only for term in node.terms):
                empty_points = np.empty((1, 0))
                if not node.mask(empty_points, scope, EvalContext())[0]:
                    return rows, rhs, True
                continue
            for form in node.pairs():
                rows.append(form.linear_part(k))
                rhs.append(-float(form.param_value(scope)))
        elif isinstance(node, Each):
            for j in range(k):
                for form in node.atom.pairs():
                    rows.append(form.linear_part(k, x_column=j))
                    rhs.append(-float(form.param_value(scope)))
        elif isinstance(node, Descending):
            for j in range(k - 1):
                row = np.zeros(k)
                row[j + 1], row[j] = 1.0, -1.0
                rows.append(row)
                rhs.append(0.0)
    return rows, rhs, False


def _simplex_rows(k: int) -> tuple[list[np.ndarray], list[float]]:
    return [np.ones(k)], [1.0]


def lp_extreme(objective: np.ndarray, rows, rhs, k: int) -> float | None:
    """min objective . t over the constraint set intersected with t >= 0; None if infeasible."""
    result = linprog(
        objective,
        A_ub=np.vstack(rows) if rows else None,
        b_ub=np.asarray(rhs) if rows else None,
        bounds=[(0.0, None)] * k,
        method="highs",
    )
    if result.status == 2:
        return None
    if result.status == 3:
        raise SpecificationError("region is unbounded along a sampled direction")
    if result.status != 0:
        raise SpecificationError(f"bounding-box LP failed: {result.message}")
    return float(result.fun)


def bounding_box(region: Region, k: int, params: ParamSource | Scope) -> Box:
    """Axis box containing the region's linear hull inside the simplex t >= 0, sum t <= 1."""
    scope = as_scope(params)
    rows, rhs, infeasible = linear_constraints(region.tree, k, scope)
    if infeasible:
        return Box(np.zeros(k), np.zeros(k), empty=True)
    simplex_rows, simplex_rhs = _simplex_rows(k)
    rows, rhs = rows + simplex_rows, rhs + simplex_rhs

    lower, upper = np.zeros(k), np.zeros(k)
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        lo = lp_extreme(e, rows, rhs, k)
        if lo is None:
            logger.debug("region %s: linear hull empty at %s", region.name, dict(scope))
            return Box(np.zeros(k), np.zeros(k), empty=True)
        hi = -lp_extreme(-e, rows, rhs, k)
        lower[j], upper[j] = lo, hi
    if np.any(upper - lower <= 0):
        return Box(lower, upper, empty=True)
    logger.debug("region %s box lower=%s upper=%s", region.name, lower, upper)
    return Box(lower, upper)


def sum_range(region: Region, k: int, params: ParamSource | Scope) -> tuple[float, float] | None:
    """(min, max) of sum(t) over the linear hull, None when empty."""
    scope = as_scope(params)
    rows, rhs, infeasible = linear_constraints(region.tree, k, scope)
    if infeasible:
        return None
    simplex_rows, simplex_rhs = _simplex_rows(k)
    rows, rhs = rows + simplex_rows, rhs + simplex_rhs
    ones = np.ones(k)
    lo = lp_extreme(ones, rows, rhs, k)
    if lo is None:
        return None
    return lo, -lp_extreme(-ones, rows, rhs, k)


def grid_points(box: Box, per_axis: int) -> np.ndarray:
    """Dense grid of cell centres inside ``box``; used as an emptiness oracle in checks."""
    axes = [
        box.lower[j] + (np.arange(per_axis) + 0.5) * (box.upper[j] - box.lower[j]) / per_axis
        for j in range(len(box.lower))
    ]
    return np.array(list(itertools.product(*axes)))
