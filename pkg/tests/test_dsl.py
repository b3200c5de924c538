"""Lexer, parser, renderer and evaluator for the rule language."""

from __future__ import annotations

import random
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bucketlens.dsl import (
    And,
    Compare,
    CompareOp,
    Exists,
    IsNull,
    LiteralBool,
    Not,
    Or,
    RuleAst,
    TokenKind,
    bind_record,
    eval_rule,
    like_match,
    parse_rule,
    render_rule,
    tokenize,
)
from bucketlens.errors import LexError, ParseError, SchemaError
from bucketlens.model import BucketConfig, Severity
from bucketlens.policy import derive
from bucketlens.unified import unified_dsl_source

from conftest import allusers_read_bucket, locked_bucket, public_policy_bucket, random_bucket_config


def _record(config: BucketConfig):
    return bind_record(config, derive(config))


def _parse_body(expr: str):
    return parse_rule(f"RULE probe SEVERITY Low WHEN {expr}").body


# ---------------------------------------------------------------------------
# tokenize
# ---------------------------------------------------------------------------

def test_tokenize_predicate():
    tokens = tokenize("Exposure = 'public_facing'")
    kinds = [t.kind for t in tokens]
    assert kinds == [TokenKind.IDENT, TokenKind.PUNCT, TokenKind.STRING, TokenKind.EOF]
    assert tokens[0].text == "Exposure"
    assert tokens[2].text == "public_facing"


def test_tokenize_empty_input():
    tokens = tokenize("")
    assert [t.kind for t in tokens] == [TokenKind.EOF]


def test_tokenize_unterminated_string():
    with pytest.raises(LexError) as exc:
        tokenize("'unclosed")
    assert exc.value.offset == 0


def test_tokenize_illegal_character():
    with pytest.raises(LexError) as exc:
        tokenize("a = #")
    assert exc.value.offset == 4


def test_tokenize_doubled_quote_escape():
    tokens = tokenize("'it''s'")
    assert tokens[0].text == "it's"


def test_tokenize_comments_and_keywords_case():
    tokens = tokenize("-- comment\nrule R severity high WHEN true")
    assert tokens[0].kind == TokenKind.KEYWORD and tokens[0].text == "RULE"
    assert tokens[2].kind == TokenKind.KEYWORD and tokens[2].text == "SEVERITY"


def test_tokenize_offsets_increase_and_are_bytes():
    source = "-- café comment\nExposure = 'x'"
    tokens = tokenize(source)
    offsets = [t.offset for t in tokens]
    assert offsets == sorted(set(offsets))
    # the first token starts after the comment; é is two bytes in UTF-8
    assert tokens[0].offset == len(source[: source.index("Exposure")].encode("utf-8"))


# ---------------------------------------------------------------------------
# parse_rule
# ---------------------------------------------------------------------------

def test_parse_minimal_rule():
    ast = parse_rule("RULE r SEVERITY High WHEN TRUE")
    assert ast == RuleAst(name="r", severity=Severity.HIGH, body=LiteralBool(True))


def test_parse_unknown_path_is_schema_error():
    with pytest.raises(SchemaError):
        parse_rule("RULE r SEVERITY High WHEN nosuchfield = 1")


def test_parse_error_reports_offset_and_expectations():
    with pytest.raises(ParseError) as exc:
        parse_rule("RULE r SEVERITY High WHEN Exposure =")
    assert exc.value.offset == len("RULE r SEVERITY High WHEN Exposure =")
    assert "string" in exc.value.expected


def test_or_binds_looser_than_and():
    body = _parse_body("SensitiveData = TRUE AND WebsiteEnabled = TRUE OR PolicyStatusPublic = TRUE")
    assert isinstance(body, Or)
    assert isinstance(body.children[0], And)


def test_not_binds_tightest():
    body = _parse_body("NOT SensitiveData = TRUE AND WebsiteEnabled = TRUE")
    assert isinstance(body, And)
    assert isinstance(body.children[0], Not)


def test_exists_requires_collection():
    with pytest.raises(SchemaError):
        _parse_body("EXISTS(Exposure WHERE SensitiveData = TRUE)")


def test_collection_cannot_be_compared():
    with pytest.raises(SchemaError):
        _parse_body("AclGrants = 'x'")


def test_element_fields_only_resolve_inside_their_exists():
    with pytest.raises(SchemaError):
        _parse_body("GranteeURI LIKE '%x%'")
    body = _parse_body("EXISTS(AclGrants WHERE GranteeURI LIKE '%x%')")
    assert isinstance(body, Exists)


def test_record_fields_visible_inside_exists():
    body = _parse_body("EXISTS(PolicyStatements WHERE Effect = 'Allow' AND RestrictPublicBuckets = FALSE)")
    assert isinstance(body, Exists)


def test_paths_resolve_case_insensitively_to_canonical():
    assert _parse_body("exposure = 'internal'") == Compare(("Exposure",), CompareOp.EQ, "internal")
    body = _parse_body("EXISTS(policystatements WHERE condition IS NULL)")
    assert body == Exists(("PolicyStatements",), IsNull(("Condition",)))


def test_unified_rule_parses_to_five_way_or():
    ast = parse_rule(unified_dsl_source())
    assert isinstance(ast.body, Or)
    assert len(ast.body.children) == 5
    assert ast.severity is Severity.HIGH


def test_unified_rule_text_contains_allusers_pattern():
    assert "%global/AllUsers%" in unified_dsl_source()


def test_shipped_rule_file_matches_embedded_source():
    from pathlib import Path

    repo_rule = Path(__file__).resolve().parent.parent / "rules" / "unified.rule"
    assert repo_rule.read_text(encoding="utf-8") == unified_dsl_source()


# ---------------------------------------------------------------------------
# like_match
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "pattern,text,expected",
    [
        ("%global/AllUsers%", "http://acs.amazonaws.com/groups/global/AllUsers", True),
        ("%", "", True),
        ("%*%", "arn:aws:iam::123:root", False),  # * is literal in LIKE
        ("%*%", "*", True),
        ("READ", "READ", True),
        ("READ", "READ_ACP", False),
        ("a%c", "abc", True),
        ("a%c", "ab", False),
        ("", "", True),
        ("abc", "ABC", False),  # case-sensitive
    ],
)
def test_like_match_cases(pattern, text, expected):
    assert like_match(pattern, text) is expected


def _like_oracle(pattern: str, text: str) -> bool:
    # fullmatch anchors exactly; a manual ^...$ would match before a trailing
    # newline and misreport pattern '' against text '\n'
    regex = ".*".join(re.escape(part) for part in pattern.split("%"))
    return re.fullmatch(regex, text, re.DOTALL) is not None


@given(
    st.text(alphabet="ab%*/U", min_size=0, max_size=14),
    st.text(alphabet="ab*/U\n", min_size=0, max_size=14),
)
def test_like_match_agrees_with_regex_oracle(pattern, text):
    assert like_match(pattern, text) == _like_oracle(pattern, text)


# ---------------------------------------------------------------------------
# eval_rule
# ---------------------------------------------------------------------------

def test_unified_rule_false_on_locked_bucket():
    ast = parse_rule(unified_dsl_source())
    assert eval_rule(ast, _record(locked_bucket())) is False


def test_unified_rule_true_on_allusers_read():
    ast = parse_rule(unified_dsl_source())
    assert eval_rule(ast, _record(allusers_read_bucket())) is True


def test_condition_is_null_inside_exists():
    ast = parse_rule(
        "RULE probe SEVERITY Low WHEN EXISTS(PolicyStatements WHERE Condition IS NULL)"
    )
    assert eval_rule(ast, _record(public_policy_bucket())) is True


def test_absent_policy_semantics():
    record = _record(locked_bucket())
    assert eval_rule(_parse_body_rule("PolicyStatements IS NULL"), record) is True
    assert eval_rule(_parse_body_rule("EXISTS(PolicyStatements WHERE Effect = 'Allow')"), record) is False
    assert eval_rule(_parse_body_rule("Name != 'locked-bucket'"), record) is False


def _parse_body_rule(expr: str) -> RuleAst:
    return parse_rule(f"RULE probe SEVERITY Low WHEN {expr}")


def test_absent_sid_is_null():
    import dataclasses

    bucket = public_policy_bucket()
    no_sid = dataclasses.replace(bucket.policy[0], sid=None)
    bucket = dataclasses.replace(bucket, policy=(no_sid,))
    assert (
        eval_rule(
            _parse_body_rule("EXISTS(PolicyStatements WHERE Sid IS NULL)"), _record(bucket)
        )
        is True
    )
    # and a None scalar compares unequal to every literal
    assert (
        eval_rule(
            _parse_body_rule("EXISTS(PolicyStatements WHERE Sid != 'anything')"), _record(bucket)
        )
        is True
    )
    assert (
        eval_rule(
            _parse_body_rule("EXISTS(PolicyStatements WHERE Sid = 'anything')"), _record(bucket)
        )
        is False
    )


def test_list_fields_match_existentially():
    record = _record(public_policy_bucket())
    assert eval_rule(
        _parse_body_rule("EXISTS(PolicyStatements WHERE Action LIKE '%s3:GetObject%')"), record
    )
    assert not eval_rule(
        _parse_body_rule("EXISTS(PolicyStatements WHERE Action LIKE '%s3:PutObject%')"), record
    )
    assert eval_rule(
        _parse_body_rule("EXISTS(PolicyStatements WHERE Principal_AWS = '*')"), record
    )


def test_bool_literal_never_equals_number():
    assert eval_rule(_parse_body_rule("WebsiteEnabled = 1"), _record(locked_bucket())) is False


def test_de_morgan_on_random_records():
    rng = random.Random(404)
    predicates = [
        "SensitiveData = TRUE",
        "Exposure = 'public_facing'",
        "RestrictPublicBuckets = FALSE",
        "EXISTS(AclGrants WHERE GranteeURI LIKE '%global/AllUsers%')",
        "EXISTS(PolicyStatements WHERE RestrictedAccessCondition IS NULL)",
        "PolicyStatements IS NULL",
    ]
    bodies = [_parse_body(p) for p in predicates]
    for _ in range(500):
        record = _record(random_bucket_config(rng))
        a, b = rng.choice(bodies), rng.choice(bodies)
        lhs = eval_rule(RuleAst("t", Severity.LOW, Not(And((a, b)))), record)
        rhs = eval_rule(RuleAst("t", Severity.LOW, Or((Not(a), Not(b)))), record)
        assert lhs == rhs


def test_eval_is_pure():
    ast = parse_rule(unified_dsl_source())
    record = _record(allusers_read_bucket())
    assert all(eval_rule(ast, record) for _ in range(50))


# ---------------------------------------------------------------------------
# render / parse round trip
# ---------------------------------------------------------------------------

HAND_RULES = [
    "RULE r SEVERITY High WHEN TRUE",
    "RULE r SEVERITY Low WHEN FALSE",
    "RULE 'spaced name' SEVERITY Medium WHEN SensitiveData = TRUE",
    "RULE q SEVERITY High WHEN NOT (SensitiveData = TRUE OR WebsiteEnabled = TRUE)",
    "RULE q SEVERITY High WHEN Exposure != 'internal'",
    "RULE q SEVERITY Low WHEN Name LIKE 'prod-%' AND Region = 'us-east-1'",
    "RULE q SEVERITY Low WHEN EXISTS(AclGrants WHERE Permission LIKE 'READ')",
    "RULE q SEVERITY Low WHEN EXISTS(PolicyStatements WHERE Effect = 'Deny' AND Sid IS NOT NULL)",
    "RULE q SEVERITY Medium WHEN PolicyStatements IS NULL OR NOT PolicyStatusPublic = TRUE",
    "RULE q SEVERITY Medium WHEN (BlockPublicAcls = FALSE AND IgnorePublicAcls = FALSE) OR BlockPublicPolicy = FALSE",
    "RULE 'it''s quoted' SEVERITY High WHEN Region != 'eu-west-1'",
    "RULE q SEVERITY High WHEN EXISTS(PolicyStatements WHERE EXISTS(AclGrants WHERE GranteeType = 'Group'))",
]


def _random_ast(rng: random.Random, depth: int = 0):
    scalar_preds = [
        Compare(("SensitiveData",), CompareOp.EQ, True),
        Compare(("Exposure",), CompareOp.NE, "internal"),
        Compare(("Name",), CompareOp.LIKE, "prod-%"),
        Compare(("Region",), CompareOp.EQ, "us-east-1"),
        IsNull(("PolicyStatements",)),
        LiteralBool(rng.random() < 0.5),
        Exists(
            ("AclGrants",),
            Compare(("GranteeURI",), CompareOp.LIKE, "%global/AllUsers%"),
        ),
        Exists(
            ("PolicyStatements",),
            And((Compare(("Effect",), CompareOp.EQ, "Allow"), IsNull(("RestrictedAccessCondition",)))),
        ),
    ]
    if depth >= 3 or rng.random() < 0.35:
        return rng.choice(scalar_preds)
    kind = rng.choice(("and", "or", "not"))
    if kind == "not":
        return Not(_random_ast(rng, depth + 1))
    children = tuple(_random_ast(rng, depth + 1) for _ in range(rng.randint(2, 3)))
    return And(children) if kind == "and" else Or(children)


def test_round_trip_corpus():
    corpus = list(HAND_RULES) + [unified_dsl_source()]
    rng = random.Random(777)
    for index in range(45):
        ast = RuleAst(f"gen-{index}", Severity.MEDIUM, _random_ast(rng))
        corpus.append(render_rule(ast))
    assert len(corpus) >= 50
    for source in corpus:
        first = parse_rule(source)
        rendered = render_rule(first)
        assert parse_rule(rendered) == first
