"""Tool manifests, abstract-state patterns and contract checking.

A manifest declares what a tool expects (``pre``) and guarantees (``post``)
about a small abstract state, a map from state variable to value.  Pattern
text follows the manifest convention:

    "*"        any non-null value
    "a|b|c"    one of the listed values
    "$param"   equal to the named call parameter
    ""         null
    other      that exact value

Statically tracked states may hold values that are not known exactly:
:data:`UNKNOWN` (some non-null value), :data:`MAYBE_NULL` (anything,
possibly null) and :class:`Constrained` (one of a finite set).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import ManifestError, UnboundParam

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

TOOL_TYPES = ("observe", "listItems", "getFields", "setFilter", "setFields",
              "gotoItem", "gotoField", "other")


# -- patterns ---------------------------------------------------------------

@dataclass(frozen=True)
class Concrete:
    value: Any


@dataclass(frozen=True)
class AnyValue:
    pass


@dataclass(frozen=True)
class OneOf:
    values: tuple

    def __post_init__(self):
        if len(set(self.values)) < 2 or len(set(self.values)) != len(self.values):
            raise ValueError("OneOf needs at least two distinct values")


@dataclass(frozen=True)
class ParamRef:
    name: str

    def __post_init__(self):
        if not _IDENT.match(self.name):
            raise ValueError(f"invalid parameter name {self.name!r}")


@dataclass(frozen=True)
class Null:
    pass


ANY = AnyValue()
NULL = Null()

StatePattern = Concrete | AnyValue | OneOf | ParamRef | Null


def parse_pattern(text) -> StatePattern:
    if text is None:
        return NULL
    if not isinstance(text, str):
        return Concrete(text)
    if text == "*":
        return ANY
    if text == "":
        return NULL
    if text.startswith("$") and _IDENT.match(text[1:]):
        return ParamRef(text[1:])
    if "|" in text:
        parts = list(dict.fromkeys(p for p in text.split("|") if p))
        if len(parts) >= 2:
            return OneOf(tuple(parts))
        if len(parts) == 1:
            return Concrete(parts[0])
    return Concrete(text)


def render_pattern(pattern: StatePattern):
    if isinstance(pattern, AnyValue):
        return "*"
    if isinstance(pattern, Null):
        return ""
    if isinstance(pattern, ParamRef):
        return "$" + pattern.name
    if isinstance(pattern, OneOf):
        return "|".join(pattern.values)
    return pattern.value


def canonical_pattern_text(text):
    return render_pattern(parse_pattern(text))


# -- tracked values ---------------------------------------------------------

class _Marker:
    __slots__ = ("_name",)

    def __init__(self, name):
        self._name = name

    def __repr__(self):
        return self._name

    def __reduce__(self):
        return self._name


UNKNOWN = _Marker("UNKNOWN")          # some non-null value
MAYBE_NULL = _Marker("MAYBE_NULL")    # anything, including null
MISSING = _Marker("MISSING")          # key absent from the state


@dataclass(frozen=True)
class Constrained:
    """A value known to be one of ``values``."""
    values: frozenset


def is_known(value) -> bool:
    return not (value is UNKNOWN or value is MAYBE_NULL or value is MISSING
                or isinstance(value, Constrained))


def same_value(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    return a == b


def matches(pattern: StatePattern, value, args: Mapping[str, Any]) -> bool:
    """Whether a tracked ``value`` satisfies ``pattern``.

    Unknown values only satisfy patterns that cannot be refuted by any
    non-null value (``*`` and parameter references).
    """
    if isinstance(pattern, ParamRef):
        if pattern.name not in args:
            raise UnboundParam(pattern.name)
        arg = args[pattern.name]
        if value is MISSING or value is MAYBE_NULL:
            return False
        if value is UNKNOWN or isinstance(value, Constrained) or not is_known(arg):
            return True
        return same_value(value, arg)
    if isinstance(pattern, Null):
        return value is None or value is MISSING
    if isinstance(pattern, AnyValue):
        return not (value is None or value is MISSING or value is MAYBE_NULL)
    if isinstance(pattern, OneOf):
        if isinstance(value, Constrained):
            return all(any(same_value(v, p) for p in pattern.values) for v in value.values)
        if not is_known(value) or value is None:
            return False
        return any(same_value(value, p) for p in pattern.values)
    # Concrete
    if isinstance(value, Constrained):
        return len(value.values) == 1 and same_value(next(iter(value.values)), pattern.value)
    if not is_known(value):
        return False
    return same_value(value, pattern.value)


@dataclass(frozen=True)
class StateViolation:
    key: str
    expected: Any   # rendered pattern text
    actual: Any     # tracked value, MISSING when absent

    def describe(self) -> str:
        return (f"state[{self.key!r}] must match {json.dumps(self.expected)}, "
                f"found {format_value(self.actual)}")


def satisfies(state: Mapping[str, Any], requirement: Mapping[str, StatePattern],
              args: Mapping[str, Any] | None = None) -> list[StateViolation]:
    """Return every key of ``requirement`` that ``state`` fails; empty means ok."""
    args = args or {}
    out = []
    for key, pattern in requirement.items():
        value = state.get(key, MISSING)
        if not matches(pattern, value, args):
            out.append(StateViolation(key, render_pattern(pattern), value))
    return out


def apply_post(state: Mapping[str, Any], post: Mapping[str, StatePattern],
               args: Mapping[str, Any] | None = None) -> dict:
    args = args or {}
    new = dict(state)
    for key, pattern in post.items():
        if isinstance(pattern, Concrete):
            new[key] = pattern.value
        elif isinstance(pattern, ParamRef):
            if pattern.name not in args:
                raise UnboundParam(pattern.name)
            arg = args[pattern.name]
            if arg is MISSING or arg is MAYBE_NULL:
                new[key] = MAYBE_NULL
            else:
                new[key] = arg if is_known(arg) else UNKNOWN
        elif isinstance(pattern, AnyValue):
            new[key] = UNKNOWN
        elif isinstance(pattern, Null):
            new[key] = None
        else:
            new[key] = Constrained(frozenset(pattern.values))
    return new


def join_values(a, b):
    """Least upper bound of two tracked values (missing behaves like null)."""
    if a is MISSING and b is MISSING:
        return MISSING
    if (a is MISSING or a is None) and (b is MISSING or b is None):
        return None
    if not (a is MISSING or b is MISSING) and type(a) is type(b) and same_value(a, b):
        return a
    if a in (None, MISSING) or b in (None, MISSING) or a is MAYBE_NULL or b is MAYBE_NULL:
        return MAYBE_NULL
    return UNKNOWN


def join_states(a: Mapping[str, Any], b: Mapping[str, Any]) -> dict:
    out = {}
    for key in list(a) + [k for k in b if k not in a]:
        v = join_values(a.get(key, MISSING), b.get(key, MISSING))
        if v is not MISSING:
            out[key] = v
    return out


def format_value(value) -> str:
    if value is MISSING:
        return "<missing>"
    if value is UNKNOWN:
        return "<unknown>"
    if value is MAYBE_NULL:
        return "<unknown or null>"
    if isinstance(value, Constrained):
        return "<one of " + "|".join(sorted(map(str, value.values))) + ">"
    return json.dumps(value)


def encode_state(state: Mapping[str, Any]) -> dict:
    """JSON-safe form of a tracked state."""
    out = {}
    for key in sorted(state):
        v = state[key]
        if v is UNKNOWN:
            out[key] = {"$unknown": "non-null"}
        elif v is MAYBE_NULL:
            out[key] = {"$unknown": "nullable"}
        elif isinstance(v, Constrained):
            out[key] = {"$oneof": sorted(v.values, key=str)}
        else:
            out[key] = v
    return out


def decode_state(doc: Mapping[str, Any]) -> dict:
    out = {}
    for key, v in doc.items():
        if isinstance(v, dict) and v.get("$unknown") == "non-null":
            out[key] = UNKNOWN
        elif isinstance(v, dict) and v.get("$unknown") == "nullable":
            out[key] = MAYBE_NULL
        elif isinstance(v, dict) and "$oneof" in v:
            out[key] = Constrained(frozenset(v["$oneof"]))
        else:
            out[key] = v
    return out


# -- value schemas ----------------------------------------------------------

SCHEMA_KINDS = ("object", "array", "string", "number", "integer", "boolean")


@dataclass(frozen=True)
class ValueSchema:
    kind: str
    properties: Mapping[str, "ValueSchema"] = field(default_factory=dict)
    items: "ValueSchema | None" = None
    required: tuple = ()
    enum_values: tuple | None = None
    description: str = ""

    @classmethod
    def from_json(cls, doc, path="$") -> "ValueSchema":
        if isinstance(doc, str):
            doc = {"type": doc}
        if not isinstance(doc, dict):
            raise ManifestError(f"{path}: schema must be an object or a type name")
        if "type" not in doc:
            # shorthand: {"param": "string", ...} describes an object whose
            # listed fields are all required
            props = {k: cls.from_json(v, f"{path}.{k}") for k, v in doc.items()}
            return cls("object", props, required=tuple(props))
        kind = doc["type"]
        if kind not in SCHEMA_KINDS:
            raise ManifestError(f"{path}: unsupported schema type {kind!r}")
        enum = tuple(doc["enum"]) if "enum" in doc else None
        desc = doc.get("description", "")
        if kind == "object":
            raw = doc.get("properties", {})
            if not isinstance(raw, dict):
                raise ManifestError(f"{path}.properties: must be an object")
            props = {k: cls.from_json(v, f"{path}.properties.{k}") for k, v in raw.items()}
            required = tuple(doc.get("required", ()))
            extra = [r for r in required if r not in props]
            if extra:
                raise ManifestError(f"{path}.required: {extra} not declared in properties")
            return cls(kind, props, required=required, enum_values=enum, description=desc)
        if kind == "array":
            if "items" not in doc:
                raise ManifestError(f"{path}: array schema needs 'items'")
            return cls(kind, items=cls.from_json(doc["items"], f"{path}.items"),
                       enum_values=enum, description=desc)
        if "properties" in doc or "items" in doc:
            raise ManifestError(f"{path}: leaf schema {kind!r} cannot have properties/items")
        return cls(kind, enum_values=enum, description=desc)

    def to_json(self) -> dict:
        doc: dict = {"type": self.kind}
        if self.description:
            doc["description"] = self.description
        if self.kind == "object":
            doc["properties"] = {k: v.to_json() for k, v in self.properties.items()}
            doc["required"] = list(self.required)
        if self.kind == "array" and self.items is not None:
            doc["items"] = self.items.to_json()
        if self.enum_values is not None:
            doc["enum"] = list(self.enum_values)
        return doc


EMPTY_OBJECT = ValueSchema("object")


@dataclass(frozen=True)
class TypeViolation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def value_kind(value) -> str | None:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, (list, tuple)):
        return "array"
    if isinstance(value, dict):
        return "object"
    return None


def kind_accepts(expected: str, actual: str | None) -> bool:
    return actual == expected or (expected == "number" and actual == "integer")


def check_value(schema: ValueSchema, value, path="$") -> list[TypeViolation]:
    kind = value_kind(value)
    if not kind_accepts(schema.kind, kind):
        return [TypeViolation(path, f"expected {schema.kind}, got {kind or type(value).__name__}")]
    errors = []
    enum = schema.enum_values
    if enum is not None and not any(same_value(value, e) for e in enum):
        errors.append(TypeViolation(path, f"{value!r} not in enum {list(schema.enum_values)}"))
    if schema.kind == "object":
        for name in schema.required:
            if name not in value:
                errors.append(TypeViolation(f"{path}.{name}", "missing required property"))
        for name, sub in schema.properties.items():
            if name in value:
                errors.extend(check_value(sub, value[name], f"{path}.{name}"))
    elif schema.kind == "array" and schema.items is not None:
        for i, item in enumerate(value):
            errors.extend(check_value(schema.items, item, f"{path}[{i}]"))
    return errors


# -- manifests --------------------------------------------------------------

_KNOWN_FIELDS = ("name", "type", "description", "input_schema", "output_schema", "pre",
                 "post", "pre_check", "post_check", "execute", "pre_tools")


@dataclass(frozen=True)
class ToolManifest:
    name: str
    tool_type: str = "other"
    description: str = ""
    input_schema: ValueSchema = EMPTY_OBJECT
    output_schema: ValueSchema = EMPTY_OBJECT
    pre: Mapping[str, StatePattern] = field(default_factory=dict)
    post: Mapping[str, StatePattern] = field(default_factory=dict)
    pre_check: str | None = None
    post_check: str | None = None
    execute: str = ""
    pre_tools: Mapping[str, tuple] = field(default_factory=dict)
    extra: Mapping[str, Any] = field(default_factory=dict)

    @property
    def params(self) -> tuple:
        return tuple(self.input_schema.properties)

    @classmethod
    def from_json(cls, doc: Mapping[str, Any], source="<manifest>") -> "ToolManifest":
        if not isinstance(doc, Mapping):
            raise ManifestError(f"{source}: manifest must be a JSON object")
        name = doc.get("name")
        if not isinstance(name, str) or not _IDENT.match(name):
            raise ManifestError(f"{source}: 'name' must be an identifier, got {name!r}")
        tool_type = doc.get("type", "other")
        if tool_type not in TOOL_TYPES:
            raise ManifestError(f"{source}: unknown tool type {tool_type!r}")
        ins = ValueSchema.from_json(doc.get("input_schema", {}), f"{name}.input_schema")
        outs = ValueSchema.from_json(doc.get("output_schema", {}), f"{name}.output_schema")
        if ins.kind != "object":
            raise ManifestError(f"{source}: input_schema must describe an object")
        pre = _parse_state_block(doc.get("pre", {}), f"{name}.pre")
        post = _parse_state_block(doc.get("post", {}), f"{name}.post")
        declared = set(ins.properties) | set(outs.properties if outs.kind == "object" else ())
        for key, pat in post.items():
            if isinstance(pat, ParamRef) and pat.name not in declared:
                raise ManifestError(f"{source}: post[{key!r}] references undeclared "
                                    f"parameter ${pat.name}")
        pre_tools = doc.get("pre_tools") or {}
        if not isinstance(pre_tools, Mapping) or not all(
                isinstance(v, list) and all(isinstance(t, str) for t in v)
                for v in pre_tools.values()):
            raise ManifestError(f"{source}: pre_tools must map parameter -> list of tool names")
        return cls(
            name=name,
            tool_type=tool_type,
            description=doc.get("description", ""),
            input_schema=ins,
            output_schema=outs,
            pre=pre,
            post=post,
            pre_check=doc.get("pre_check"),
            post_check=doc.get("post_check"),
            execute=doc.get("execute", ""),
            pre_tools={k: tuple(v) for k, v in pre_tools.items()},
            extra={k: v for k, v in doc.items() if k not in _KNOWN_FIELDS},
        )

    def to_json(self) -> dict:
        doc = {
            "name": self.name,
            "type": self.tool_type,
            "description": self.description,
            "input_schema": self.input_schema.to_json(),
            "output_schema": self.output_schema.to_json(),
            "pre": {k: render_pattern(p) for k, p in self.pre.items()},
            "post": {k: render_pattern(p) for k, p in self.post.items()},
            "execute": self.execute,
        }
        if self.pre_check is not None:
            doc["pre_check"] = self.pre_check
        if self.post_check is not None:
            doc["post_check"] = self.post_check
        if self.pre_tools:
            doc["pre_tools"] = {k: list(v) for k, v in self.pre_tools.items()}
        doc.update(self.extra)
        return doc


def _parse_state_block(raw, where) -> dict:
    if not isinstance(raw, Mapping):
        raise ManifestError(f"{where}: must map state variables to patterns")
    return {str(k): parse_pattern(v) for k, v in raw.items()}


def manifest_lints(manifest: ToolManifest) -> list[str]:
    """Non-fatal remarks about a manifest."""
    notes = []
    for key, pat in manifest.pre.items():
        if isinstance(pat, ParamRef):
            notes.append(f"{manifest.name}: pre[{key!r}] uses parameter reference "
                         f"${pat.name}; matched symmetrically with post semantics")
    for param in manifest.pre_tools:
        if param not in manifest.input_schema.properties:
            notes.append(f"{manifest.name}: pre_tools names unknown parameter {param!r}")
    return notes


def build_manifest_set(manifests: Iterable[ToolManifest]) -> dict[str, ToolManifest]:
    out: dict[str, ToolManifest] = {}
    for m in manifests:
        if m.name in out:
            raise ManifestError(f"duplicate tool name {m.name!r}")
        out[m.name] = m
    return out


def load_manifests(path) -> dict[str, ToolManifest]:
    """Load every ``*.json`` manifest below ``path`` (a directory or one file).

    A file may hold a single manifest object or a list of them.
    """
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    found = []
    for f in files:
        try:
            doc = json.loads(f.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"{f}: {exc}") from exc
        docs = doc if isinstance(doc, list) else [doc]
        found.extend(ToolManifest.from_json(d, str(f)) for d in docs)
    try:
        return build_manifest_set(found)
    except ManifestError as exc:
        raise ManifestError(f"{path}: {exc}") from None
