"""Region catalog: pydantic schema, loader, compiler and dumper.

The catalog is one JSON document holding every named region, the Type-II range records
attached to parameter subregions, and the named loss integrals. ``docs/catalog_format.md``
describes the grammar.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from sievelab.core.config import get_settings
from sievelab.core.errors import ConfigurationError
from sievelab.services.region_algebra import (
    AffineForm,
    AllOf,
    AnyOf,
    Descending,
    Each,
    Inequality,
    Interval,
    Member,
    Node,
    NotOf,
    PartitionInto,
    Region,
    Toggle,
)

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------- #
# Schema
# --------------------------------------------------------------------------- #
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class AllNode(_Strict):
    all_of: list["NodeSpec"] = Field(alias="all")


class AnyNode(_Strict):
    any_of: list["NodeSpec"] = Field(alias="any")


class NotNode(_Strict):
    negated: "NodeSpec" = Field(alias="not")


class EachNode(_Strict):
    each: str


class DescendingNode(_Strict):
    descending: Literal["strict", "weak"]


class PartitionNode(_Strict):
    partition_into: str
    append: list[str] = []


class MemberNode(_Strict):
    member: str
    mapping: Optional[list[str]] = Field(default=None, alias="map")


class ToggleNode(_Strict):
    toggle: str
    then: "NodeSpec"


NodeSpec = Union[
    str,
    AllNode,
    AnyNode,
    NotNode,
    EachNode,
    DescendingNode,
    PartitionNode,
    MemberNode,
    ToggleNode,
]

for _model in (AllNode, AnyNode, NotNode, ToggleNode):
    _model.model_rebuild()


class RegionSpec(_Strict):
    name: str
    dimension: Optional[int]
    group: str = "lemma"
    description: str = ""
    where: NodeSpec


class RangeSpec(_Strict):
    lo: str
    hi: str
    lo_open: bool = True
    hi_open: bool = True
    provenance: str = ""


class KappaRule(_Strict):
    when: Optional[str] = None
    value: str


class TypeIIRecord(_Strict):
    region: str
    family: Literal["A", "E", "W"]
    ranges: list[RangeSpec]
    printed: Optional[list[RangeSpec]] = None
    kappa_start: Union[str, list[KappaRule], None] = None
    decomposition: Optional[str] = None
    note: str = ""


class IntegralRecord(_Strict):
    name: str
    dimension: int = Field(ge=1, le=6)
    region: str
    weight: Literal["reciprocal", "buchstab", "unit"]
    omega: Literal["exact", "lower", "upper"] = "exact"
    multiplier: str = "1"
    arity: Literal["theta", "pair", "kappa"] = "theta"
    kappa: str = "kappa"
    description: str = ""


class CatalogFile(_Strict):
    version: int = 1
    regions: list[RegionSpec]
    type_ii: list[TypeIIRecord] = []
    integrals: list[IntegralRecord] = []


# --------------------------------------------------------------------------- #
# Compiled catalog
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class KappaStart:
    when: Inequality | None
    value: AffineForm | None  # None means "use kappa(theta)"


@dataclass(frozen=True)
class TypeIIEntry:
    region: str
    family: str
    ranges: tuple[Interval, ...]
    printed: tuple[Interval, ...] | None
    kappa_start: tuple[KappaStart, ...]
    decomposition: str | None
    note: str


@dataclass
class Catalog:
    source: Path
    spec: CatalogFile
    regions: dict[str, Region]
    type_ii: list[TypeIIEntry]
    integrals: dict[str, IntegralRecord]

    def region(self, name: str) -> Region:
        try:
            return self.regions[name]
        except KeyError:
            raise ConfigurationError(f"unknown region {name!r} in {self.source}") from None

    def group(self, group: str) -> list[Region]:
        return [self.regions[r.name] for r in self.spec.regions if r.group == group]

    def integral(self, name: str) -> IntegralRecord:
        try:
            return self.integrals[name]
        except KeyError:
            known = sorted(self.integrals)
            raise ConfigurationError(f"unknown integral {name!r}; known: {known}") from None


def compile_node(spec: NodeSpec) -> Node:
    if isinstance(spec, str):
        return Inequality.parse(spec)
    if isinstance(spec, AllNode):
        return AllOf([compile_node(s) for s in spec.all_of])
    if isinstance(spec, AnyNode):
        return AnyOf([compile_node(s) for s in spec.any_of])
    if isinstance(spec, NotNode):
        return NotOf(compile_node(spec.negated))
    if isinstance(spec, EachNode):
        return Each(Inequality.parse(spec.each))
    if isinstance(spec, DescendingNode):
        return Descending(strict=spec.descending == "strict")
    if isinstance(spec, PartitionNode):
        return PartitionInto(spec.partition_into, [AffineForm.parse(a) for a in spec.append])
    if isinstance(spec, MemberNode):
        mapping = [AffineForm.parse(m) for m in spec.mapping] if spec.mapping is not None else None
        return Member(spec.member, mapping)
    if isinstance(spec, ToggleNode):
        return Toggle(spec.toggle, compile_node(spec.then))
    raise ConfigurationError(f"unsupported node {spec!r}")


def _walk(node: Node):
    yield node
    for child in node.children():
        yield from _walk(child)


def link_regions(regions: dict[str, Region]) -> None:
    """Resolve member / partition references in place and reject cycles."""
    for region in regions.values():
        for node in _walk(region.tree):
            if isinstance(node, (Member, PartitionInto)):
                if node.target_name not in regions:
                    raise ConfigurationError(
                        f"region {region.name} references unknown region {node.target_name!r}"
                    )
                node.target = regions[node.target_name]

    state: dict[str, int] = {}

    def visit(name: str, trail: tuple[str, ...]):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise ConfigurationError(f"cyclic region reference: {' -> '.join(trail + (name,))}")
        state[name] = 1
        for node in _walk(regions[name].tree):
            if isinstance(node, (Member, PartitionInto)):
                visit(node.target_name, trail + (name,))
        state[name] = 2

    for name in regions:
        visit(name, ())


def _interval(spec: RangeSpec) -> Interval:
    return Interval(
        lo=AffineForm.parse(spec.lo),
        hi=AffineForm.parse(spec.hi),
        lo_open=spec.lo_open,
        hi_open=spec.hi_open,
        provenance=spec.provenance,
    )


def _kappa_rules(value: Union[str, list[KappaRule], None]) -> tuple[KappaStart, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        value = [KappaRule(value=value)]
    return tuple(
        KappaStart(
            when=Inequality.parse(rule.when) if rule.when else None,
            value=None if rule.value == "kappa" else AffineForm.parse(rule.value),
        )
        for rule in value
    )


def build_catalog(spec: CatalogFile, source: Path) -> Catalog:
    regions: dict[str, Region] = {}
    for record in spec.regions:
        if record.name in regions:
            raise ConfigurationError(f"duplicate region {record.name!r} in {source}")
        regions[record.name] = Region(
            name=record.name,
            dimension=record.dimension,
            tree=compile_node(record.where),
            description=record.description,
        )
    link_regions(regions)

    entries = []
    for record in spec.type_ii:
        if record.region not in regions:
            raise ConfigurationError(f"Type-II record for unknown region {record.region!r}")
        entries.append(
            TypeIIEntry(
                region=record.region,
                family=record.family,
                ranges=tuple(_interval(r) for r in record.ranges),
                printed=tuple(_interval(r) for r in record.printed) if record.printed else None,
                kappa_start=_kappa_rules(record.kappa_start),
                decomposition=record.decomposition,
                note=record.note,
            )
        )

    integrals = {}
    for record in spec.integrals:
        if record.region not in regions:
            raise ConfigurationError(
                f"integral {record.name} uses unknown region {record.region!r}"
            )
        integrals[record.name] = record

    logger.info(
        "catalog %s: %d regions, %d Type-II records, %d integrals",
        source.name,
        len(regions),
        len(entries),
        len(integrals),
    )
    return Catalog(source=source, spec=spec, regions=regions, type_ii=entries, integrals=integrals)


@lru_cache(maxsize=4)
def _load(path: str) -> Catalog:
    source = Path(path)
    try:
        raw = json.loads(source.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"catalog file not found: {source}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"catalog {source} is not valid JSON: {exc}") from exc
    try:
        spec = CatalogFile.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(f"catalog {source} failed validation:\n{exc}") from exc
    return build_catalog(spec, source)


def load_catalog(path: Path | str | None = None) -> Catalog:
    """Load (and cache) the catalog; defaults to ``Settings.catalog``."""
    return _load(str(Path(path or get_settings().catalog).resolve()))


def dump_catalog(catalog: Catalog) -> dict:
    """JSON-ready form of the catalog, equal to the parsed source document."""
    return catalog.spec.model_dump(mode="json", by_alias=True, exclude_unset=True)
