import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentjit.errors import ManifestError, UnboundParam
from agentjit.protocol import (ANY, MAYBE_NULL, MISSING, NULL, UNKNOWN, Concrete, Constrained,
                               OneOf, ParamRef, ToolManifest, ValueSchema, apply_post,
                               build_manifest_set, canonical_pattern_text, check_value,
                               decode_state, encode_state, join_values, load_manifests,
                               manifest_lints, matches, parse_pattern, render_pattern,
                               satisfies)

from conftest import DASHDISH


@pytest.mark.parametrize("text,expected", [
    ("*", ANY),
    ("home|detail", OneOf(("home", "detail"))),
    ("", NULL),
    ("store", Concrete("store")),
    ("$rId", ParamRef("rId")),
])
def test_parse_pattern_forms(text, expected):
    assert parse_pattern(text) == expected


def test_matches_examples():
    assert matches(ANY, "home", {})
    assert not matches(OneOf(("a", "b")), "c", {})
    assert matches(ParamRef("rId"), "r42", {"rId": "r42"})
    with pytest.raises(UnboundParam):
        matches(ParamRef("rId"), "r42", {})


def _reference_match(kind, value):
    """Hand-written truth table for one pattern of each variant against 'x'."""
    table = {
        "concrete": {"equal": True, "unequal": False, "missing": False, "null": False},
        "any": {"equal": True, "unequal": True, "missing": False, "null": False},
        "oneof": {"equal": True, "unequal": False, "missing": False, "null": False},
        "param": {"equal": True, "unequal": False, "missing": False, "null": False},
        "null": {"equal": False, "unequal": False, "missing": True, "null": True},
    }
    return table[kind][value]


@pytest.mark.parametrize("kind", ["concrete", "any", "oneof", "param", "null"])
@pytest.mark.parametrize("case", ["equal", "unequal", "missing", "null"])
def test_satisfies_exhaustive_variants(kind, case):
    pattern = {"concrete": Concrete("x"), "any": ANY, "oneof": OneOf(("x", "y")),
               "param": ParamRef("p"), "null": NULL}[kind]
    state = {"equal": {"k": "x"}, "unequal": {"k": "z"}, "missing": {},
             "null": {"k": None}}[case]
    ok = not satisfies(state, {"k": pattern}, {"p": "x"})
    assert ok == _reference_match(kind, case)


def test_satisfies_reports_all_violations():
    bad = satisfies({"page": "home"}, {"page": Concrete("store"), "modal": Concrete("cart")})
    assert [v.key for v in bad] == ["page", "modal"]
    assert bad[1].actual is MISSING
    assert satisfies({"page_type": "store"}, {"page_type": Concrete("store")}) == []
    assert satisfies({"anything": 1}, {}) == []


def test_unknown_values_are_conservative():
    assert not matches(Concrete("store"), UNKNOWN, {})
    assert matches(ANY, UNKNOWN, {})
    assert not matches(ANY, MAYBE_NULL, {})
    assert matches(ParamRef("p"), UNKNOWN, {"p": "a"})
    assert matches(Concrete("a"), Constrained(frozenset({"a"})), {})
    assert not matches(Concrete("a"), Constrained(frozenset({"a", "b"})), {})
    assert matches(OneOf(("a", "b", "c")), Constrained(frozenset({"a", "b"})), {})


def test_apply_post_examples():
    post = {"page": Concrete("detail"), "selectedRestaurant": ParamRef("rId")}
    assert apply_post({"page": "home"}, post, {"rId": "r7"}) == \
        {"page": "detail", "selectedRestaurant": "r7"}
    assert apply_post({}, {}) == {}
    assert apply_post({"x": "1"}, {"x": ANY}) == {"x": UNKNOWN}
    assert apply_post({}, {"m": OneOf(("a", "b"))}) == {"m": Constrained(frozenset({"a", "b"}))}
    assert apply_post({"m": "a"}, {"m": NULL}) == {"m": None}


def test_join_values():
    assert join_values("a", "a") == "a"
    assert join_values("a", "b") is UNKNOWN
    assert join_values("a", None) is MAYBE_NULL
    assert join_values(None, MISSING) is None
    assert join_values(True, 1) is UNKNOWN


def test_check_value_examples():
    schema = ValueSchema.from_json({"type": "object",
                                    "properties": {"item_name": {"type": "string"}},
                                    "required": ["item_name"]})
    assert check_value(schema, {"item_name": "taco"}) == []
    errs = check_value(schema, {})
    assert len(errs) == 1 and "item_name" in errs[0].path
    flag = ValueSchema.from_json({"type": "object", "properties": {"success": "boolean"},
                                  "required": ["success"]})
    assert check_value(flag, {"success": 1})
    enum = ValueSchema.from_json({"type": "string", "enum": ["a", "b"]})
    assert check_value(enum, "c") and not check_value(enum, "a")
    assert check_value(ValueSchema("number"), 3) == []


def test_schema_structure_errors():
    with pytest.raises(ManifestError):
        ValueSchema.from_json({"type": "array"})
    with pytest.raises(ManifestError):
        ValueSchema.from_json({"type": "object", "properties": {}, "required": ["x"]})
    with pytest.raises(ManifestError):
        ValueSchema.from_json({"type": "string", "items": {"type": "string"}})


def test_manifest_roundtrip_and_unknown_fields():
    doc = json.loads((DASHDISH / "manifests" / "add_to_cart.json").read_text())
    doc["x-owner"] = "team"
    m = ToolManifest.from_json(doc)
    assert m.pre == {"page_type": Concrete("store")}
    assert m.pre_tools["item_name"] == ("list_menu_items",)
    assert m.extra == {"x-owner": "team"}
    again = ToolManifest.from_json(m.to_json())
    assert again == m


def test_manifest_rejects_undeclared_param_ref():
    with pytest.raises(ManifestError):
        ToolManifest.from_json({"name": "t", "post": {"sel": "$nope"}})


def test_manifest_lints_flag_pre_param_ref():
    m = ToolManifest.from_json({"name": "t", "input_schema": {"x": "string"},
                                "pre": {"sel": "$x"}})
    assert any("parameter reference" in n for n in manifest_lints(m))


def test_duplicate_manifest_names_rejected():
    m = ToolManifest("t")
    with pytest.raises(ManifestError):
        build_manifest_set([m, m])


def test_load_dashdish_manifests():
    ms = load_manifests(DASHDISH / "manifests")
    assert {"goto_home", "list_all_stores", "goto_store", "get_store_details",
            "add_to_cart"} <= set(ms)


def test_state_encoding_roundtrip():
    state = {"a": "x", "b": UNKNOWN, "c": MAYBE_NULL, "d": Constrained(frozenset({"p", "q"})),
             "e": None}
    assert decode_state(json.loads(json.dumps(encode_state(state)))) == state


pattern_texts = st.one_of(
    st.just("*"), st.just(""),
    st.from_regex(r"\$[a-z_][a-z0-9_]{0,6}", fullmatch=True),
    st.lists(st.from_regex(r"[a-z]{1,5}", fullmatch=True), min_size=2, max_size=4,
             unique=True).map("|".join),
    st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True),
)


@given(pattern_texts)
def test_pattern_render_roundtrip(text):
    assert render_pattern(parse_pattern(text)) == canonical_pattern_text(text)
    assert parse_pattern(render_pattern(parse_pattern(text))) == parse_pattern(text)


keys = st.sampled_from(["a", "b", "c", "d"])
vals = st.sampled_from(["x", "y", "z"])


@given(st.dictionaries(keys, vals), st.dictionaries(keys, vals), st.dictionaries(keys, vals))
def test_satisfies_monotone_under_unrelated_keys(state, req, extra):
    requirement = {k: Concrete(v) for k, v in req.items()}
    if not satisfies(state, requirement):
        bigger = dict(state)
        bigger.update({k: v for k, v in extra.items() if k not in requirement})
        assert not satisfies(bigger, requirement)


@given(st.dictionaries(keys, vals), st.dictionaries(keys, vals), st.dictionaries(keys, vals))
def test_composability_of_concrete_chains(state, post_a, pre_b_keys):
    post = {k: Concrete(v) for k, v in post_a.items()}
    pre_b = {k: Concrete(post_a[k]) for k in pre_b_keys if k in post_a}
    assert satisfies(apply_post(state, post), pre_b) == []


@given(st.dictionaries(keys, vals),
       st.dictionaries(keys, st.one_of(vals.map(Concrete), st.just(NULL),
                                       st.lists(vals, min_size=2, max_size=3, unique=True)
                                       .map(lambda v: OneOf(tuple(v))))))
def test_apply_post_idempotent_without_refs(state, post):
    once = apply_post(state, post)
    assert apply_post(once, post) == once
