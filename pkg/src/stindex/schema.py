"""User-defined multidimensional extraction schemas.

A schema set declares the dimensions the pipeline extracts. Space and time
are mandatory anchors: every schema has exactly one normalized_temporal and
one geocoded_spatial dimension. Additional dimensions are categorical
(controlled vocabulary) or structured (typed attribute maps).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import SchemaSyntaxError, SchemaViolation

KINDS = ("normalized_temporal", "geocoded_spatial", "categorical", "structured")
ATTR_KINDS = ("text", "number", "category")

_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")


def _normalize_name(raw: str) -> str:
    return re.sub(r"[\s\-]+", "_", str(raw).strip().lower())


@dataclass(frozen=True)
class DimensionSchema:
    name: str
    kind: str
    description: str = ""
    vocabulary: tuple[str, ...] | None = None
    hierarchy: tuple[str, ...] | None = None
    attributes: tuple[tuple[str, str], ...] | None = None
    required: bool = False

    def validate(self) -> None:
        if not self.name or not _NAME_RE.match(self.name):
            raise SchemaViolation(f"dimension name {self.name!r} is not a valid identifier")
        if self.kind not in KINDS:
            raise SchemaViolation(f"dimension '{self.name}' has unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.vocabulary:
                raise SchemaViolation(f"categorical dimension '{self.name}' missing vocabulary")
            folded = [v.casefold() for v in self.vocabulary]
            if len(set(folded)) != len(folded):
                raise SchemaViolation(f"dimension '{self.name}' has duplicate vocabulary labels")
        elif self.vocabulary is not None:
            raise SchemaViolation(
                f"dimension '{self.name}' is not categorical but declares a vocabulary"
            )
        if self.kind == "structured":
            if not self.attributes:
                raise SchemaViolation(f"structured dimension '{self.name}' missing attributes")
            names = [a for a, _ in self.attributes]
            if len(set(names)) != len(names):
                raise SchemaViolation(f"dimension '{self.name}' has duplicate attribute names")
            for attr, attr_kind in self.attributes:
                if attr_kind not in ATTR_KINDS:
                    raise SchemaViolation(
                        f"dimension '{self.name}' attribute '{attr}' has unknown kind"
                        f" {attr_kind!r}"
                    )
        elif self.attributes is not None:
            raise SchemaViolation(
                f"dimension '{self.name}' is not structured but declares attributes"
            )
        if self.hierarchy is not None:
            if len(self.hierarchy) < 2 or len(set(self.hierarchy)) != len(self.hierarchy):
                raise SchemaViolation(
                    f"dimension '{self.name}' hierarchy needs >= 2 distinct level names"
                )

    def matches_label(self, label: str) -> str | None:
        """Return the vocabulary-cased label for a case-insensitive match."""
        if not self.vocabulary:
            return None
        folded = label.casefold()
        for entry in self.vocabulary:
            if entry.casefold() == folded:
                return entry
        return None


@dataclass(frozen=True)
class SchemaSet:
    dimensions: tuple[DimensionSchema, ...]
    version: str = "1"

    def validate(self) -> None:
        seen: set[str] = set()
        for dim in self.dimensions:
            dim.validate()
            if dim.name in seen:
                raise SchemaViolation(f"duplicate dimension name '{dim.name}'")
            seen.add(dim.name)
        temporal = [d for d in self.dimensions if d.kind == "normalized_temporal"]
        spatial = [d for d in self.dimensions if d.kind == "geocoded_spatial"]
        if not temporal:
            raise SchemaViolation("missing normalized_temporal anchor")
        if len(temporal) > 1:
            raise SchemaViolation(
                f"multiple normalized_temporal dimensions ('{temporal[1].name}')"
            )
        if not spatial:
            raise SchemaViolation("missing geocoded_spatial anchor")
        if len(spatial) > 1:
            raise SchemaViolation(f"multiple geocoded_spatial dimensions ('{spatial[1].name}')")

    @property
    def temporal(self) -> DimensionSchema:
        return next(d for d in self.dimensions if d.kind == "normalized_temporal")

    @property
    def spatial(self) -> DimensionSchema:
        return next(d for d in self.dimensions if d.kind == "geocoded_spatial")

    def dimension(self, name: str) -> DimensionSchema:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def sha256(self) -> str:
        return hashlib.sha256(serialize_schema(self).encode("utf-8")).hexdigest()


def _dimension_from_mapping(entry: object) -> DimensionSchema:
    if not isinstance(entry, dict):
        raise SchemaViolation(f"dimension entry must be a mapping, got {type(entry).__name__}")
    known = {"name", "kind", "description", "vocabulary", "hierarchy", "attributes", "required"}
    unknown = set(entry) - known
    if unknown:
        raise SchemaViolation(
            f"dimension '{entry.get('name', '?')}' has unknown keys: {sorted(unknown)}"
        )
    name = _normalize_name(entry.get("name", ""))
    vocabulary = entry.get("vocabulary")
    hierarchy = entry.get("hierarchy")
    attributes = entry.get("attributes")
    if attributes is not None:
        pairs = []
        for item in attributes:
            if isinstance(item, dict) and len(item) == 1:
                ((attr, attr_kind),) = item.items()
            elif isinstance(item, (list, tuple)) and len(item) == 2:
                attr, attr_kind = item
            else:
                raise SchemaViolation(
                    f"dimension '{name}' attribute entries must be name: kind pairs"
                )
            pairs.append((_normalize_name(attr), str(attr_kind)))
        attributes = tuple(pairs)
    return DimensionSchema(
        name=name,
        kind=str(entry.get("kind", "")),
        description=str(entry.get("description", "")),
        vocabulary=tuple(str(v) for v in vocabulary) if vocabulary is not None else None,
        hierarchy=tuple(str(h) for h in hierarchy) if hierarchy is not None else None,
        attributes=attributes,
        required=bool(entry.get("required", False)),
    )


def parse_schema(config_text: str, fmt: str = "yaml") -> SchemaSet:
    """Parse a schema config document (YAML or JSON) into a validated SchemaSet.

    Raises SchemaSyntaxError for malformed text and SchemaViolation naming
    the first violated invariant.
    """
    try:
        if fmt == "json":
            data = json.loads(config_text)
        else:
            data = yaml.safe_load(config_text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise SchemaSyntaxError(f"malformed schema config: {exc}") from exc
    if not isinstance(data, dict) or "dimensions" not in data:
        raise SchemaSyntaxError("schema config must be a mapping with a 'dimensions' list")
    entries = data["dimensions"]
    if not isinstance(entries, list):
        raise SchemaSyntaxError("'dimensions' must be a list")
    schema = SchemaSet(
        dimensions=tuple(_dimension_from_mapping(e) for e in entries),
        version=str(data.get("version", "1")),
    )
    schema.validate()
    return schema


def parse_schema_file(path: str | Path) -> SchemaSet:
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".json":
        fmt = "json"
    elif ext in (".yaml", ".yml"):
        fmt = "yaml"
    else:
        raise SchemaSyntaxError(f"unsupported schema config extension {ext!r}")
    return parse_schema(path.read_text(encoding="utf-8"), fmt=fmt)


def schema_to_dict(schema: SchemaSet) -> dict:
    dims = []
    for d in schema.dimensions:
        entry: dict = {"name": d.name, "kind": d.kind}
        if d.description:
            entry["description"] = d.description
        if d.vocabulary is not None:
            entry["vocabulary"] = list(d.vocabulary)
        if d.hierarchy is not None:
            entry["hierarchy"] = list(d.hierarchy)
        if d.attributes is not None:
            entry["attributes"] = [{a: k} for a, k in d.attributes]
        if d.required:
            entry["required"] = True
        dims.append(entry)
    return {"version": schema.version, "dimensions": dims}


def serialize_schema(schema: SchemaSet) -> str:
    """YAML serialization; parse_schema(serialize_schema(s)) == s."""
    return yaml.safe_dump(schema_to_dict(schema), sort_keys=False, allow_unicode=True)


def default_schema() -> SchemaSet:
    """The two-anchor schema used when no config is supplied."""
    schema = SchemaSet(
        dimensions=(
            DimensionSchema(
                name="temporal",
                kind="normalized_temporal",
                description="dates, times, and date ranges mentioned in the text",
                required=True,
            ),
            DimensionSchema(
                name="spatial",
                kind="geocoded_spatial",
                description="place names and locations mentioned in the text",
                hierarchy=("country", "admin", "locality"),
                required=True,
            ),
        ),
        version="default-1",
    )
    schema.validate()
    return schema


_KIND_CONTRACTS = {
    "normalized_temporal": (
        'set "value" to the ISO 8601 normalization (YYYY, YYYY-MM, YYYY-MM-DD, '
        'YYYY-MM-DDTHH:MM, or "start/end" for ranges); leave "value" null when '
        "the expression is relative and you cannot resolve it"
    ),
    "geocoded_spatial": (
        'set "value" to the place name; optionally add "qualifier" with the '
        "admin region or country that disambiguates it"
    ),
    "structured": 'set "value" to an object with exactly the attributes listed',
}


def render_schema_instructions(schema: SchemaSet) -> str:
    """Deterministic prompt fragment enumerating every dimension's contract."""
    lines = []
    for d in schema.dimensions:
        parts = [f"- {d.name} ({d.kind})"]
        if d.description:
            parts.append(f": {d.description}")
        parts.append(". ")
        if d.kind == "categorical":
            labels = ", ".join(f'"{v}"' for v in d.vocabulary or ())
            parts.append(f'Set "value" to exactly one of: {labels}.')
        else:
            parts.append(_KIND_CONTRACTS[d.kind].capitalize() + ".")
        if d.kind == "structured" and d.attributes:
            attrs = ", ".join(f"{a} ({k})" for a, k in d.attributes)
            parts.append(f" Attributes: {attrs}.")
        if d.hierarchy:
            parts.append(" Hierarchy levels: " + " > ".join(d.hierarchy) + ".")
        lines.append("".join(parts))
    return "\n".join(lines)
