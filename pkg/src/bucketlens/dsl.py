"""A small SQL-flavored rule language: lexer, parser, renderer, evaluator.

Grammar (keywords case-insensitive, identifiers resolved case-insensitively):

    rule      := RULE name SEVERITY level WHEN expr
    expr      := and_expr (OR and_expr)*
    and_expr  := unary (AND unary)*
    unary     := NOT unary | primary
    primary   := '(' expr ')'
              | EXISTS '(' path WHERE expr ')'
              | TRUE | FALSE
              | predicate
    predicate := path ( ('=' | '!=' | LIKE) literal | IS [NOT] NULL )
    path      := IDENT ('.' IDENT)*
    literal   := STRING | NUMBER | TRUE | FALSE

OR binds looser than AND; NOT binds tightest. Strings are single-quoted with
doubled-quote escaping; ``--`` starts a line comment.

Rules range over one bucket record: the bucket configuration flattened
together with its derived properties. Paths are validated against that
schema at parse time. Inside EXISTS, bare identifiers resolve first against
the bound collection element, then against the outer record.

Evaluation is two-valued. A path holding an absent optional value compares
unequal to every literal, fails every LIKE, and satisfies IS NULL; EXISTS
over an absent or empty collection is false. Comparisons against list-valued
fields (Action, Principal_AWS, ...) hold if any element satisfies them.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Any, Mapping, Union

from .errors import LexError, ParseError, SchemaError
from .model import BucketConfig, Severity
from .policy import (
    RESTRICTIVE_CONDITION_KEYS,
    DerivedProperties,
    _runs_match,
)


def like_match(pattern: str, text: str) -> bool:
    """LIKE with ``%`` as the only wildcard; case-sensitive, all else literal."""
    return _runs_match(pattern.split("%"), text)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

class TokenKind(enum.Enum):
    KEYWORD = "Keyword"
    IDENT = "Ident"
    STRING = "String"
    NUMBER = "Number"
    PUNCT = "Punct"
    EOF = "Eof"


@dataclass(frozen=True, slots=True)
class Token:
    kind: TokenKind
    text: str
    offset: int  # byte position in the UTF-8 encoding of the source


KEYWORDS = frozenset(
    {
        "RULE", "SEVERITY", "WHEN", "AND", "OR", "NOT",
        "EXISTS", "WHERE", "LIKE", "IS", "NULL", "TRUE", "FALSE",
    }
)

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


def tokenize(source: str) -> list[Token]:
    """Tokenize rule source; raises LexError with a byte offset on failure."""
    if source.isascii():
        def off(i: int) -> int:
            return i
    else:
        offsets = [0] * (len(source) + 1)
        total = 0
        for idx, ch in enumerate(source):
            offsets[idx] = total
            total += len(ch.encode("utf-8"))
        offsets[len(source)] = total

        def off(i: int) -> int:
            return offsets[i]

    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if source.startswith("--", i):
            end = source.find("\n", i)
            i = n if end < 0 else end + 1
            continue
        if ch == "'":
            start = i
            j = i + 1
            content: list[str] = []
            while True:
                if j >= n:
                    raise LexError("unterminated string", off(start))
                c = source[j]
                if c == "'":
                    if j + 1 < n and source[j + 1] == "'":
                        content.append("'")
                        j += 2
                    else:
                        j += 1
                        break
                else:
                    content.append(c)
                    j += 1
            tokens.append(Token(TokenKind.STRING, "".join(content), off(start)))
            i = j
            continue
        match = _IDENT_RE.match(source, i)
        if match:
            text = match.group(0)
            upper = text.upper()
            kind = TokenKind.KEYWORD if upper in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, upper if kind is TokenKind.KEYWORD else text, off(i)))
            i = match.end()
            continue
        match = _NUMBER_RE.match(source, i)
        if match:
            tokens.append(Token(TokenKind.NUMBER, match.group(0), off(i)))
            i = match.end()
            continue
        if source.startswith("!=", i):
            tokens.append(Token(TokenKind.PUNCT, "!=", off(i)))
            i += 2
            continue
        if ch in "()=.":
            tokens.append(Token(TokenKind.PUNCT, ch, off(i)))
            i += 1
            continue
        raise LexError(f"illegal character {ch!r}", off(i))
    tokens.append(Token(TokenKind.EOF, "", off(n)))
    return tokens


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class CompareOp(enum.Enum):
    EQ = "="
    NE = "!="
    LIKE = "LIKE"


Literal = Union[str, bool, int, float]


@dataclass(frozen=True, slots=True)
class And:
    children: tuple["Node", ...]


@dataclass(frozen=True, slots=True)
class Or:
    children: tuple["Node", ...]


@dataclass(frozen=True, slots=True)
class Not:
    child: "Node"


@dataclass(frozen=True, slots=True)
class Exists:
    path: tuple[str, ...]
    inner: "Node"


@dataclass(frozen=True, slots=True)
class Compare:
    path: tuple[str, ...]
    op: CompareOp
    literal: Literal


@dataclass(frozen=True, slots=True)
class IsNull:
    path: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class IsNotNull:
    path: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class LiteralBool:
    value: bool


Node = Union[And, Or, Not, Exists, Compare, IsNull, IsNotNull, LiteralBool]


@dataclass(frozen=True, slots=True)
class RuleAst:
    name: str
    severity: Severity
    body: Node


# ---------------------------------------------------------------------------
# Record schema
# ---------------------------------------------------------------------------

# lowered name -> canonical spelling
_SCALARS = {
    "name": "Name",
    "region": "Region",
    "websiteenabled": "WebsiteEnabled",
    "blockpublicacls": "BlockPublicAcls",
    "ignorepublicacls": "IgnorePublicAcls",
    "blockpublicpolicy": "BlockPublicPolicy",
    "restrictpublicbuckets": "RestrictPublicBuckets",
    "policystatuspublic": "PolicyStatusPublic",
    "exposure": "Exposure",
    "sensitivedata": "SensitiveData",
}

_COLLECTIONS: dict[str, tuple[str, dict[str, str]]] = {
    "aclgrants": (
        "AclGrants",
        {"granteetype": "GranteeType", "granteeuri": "GranteeURI", "permission": "Permission"},
    ),
    "policystatements": (
        "PolicyStatements",
        {
            "sid": "Sid",
            "effect": "Effect",
            "principal_aws": "Principal_AWS",
            "action": "Action",
            "resource": "Resource",
            "condition": "Condition",
            "restrictedaccesscondition": "RestrictedAccessCondition",
        },
    ),
}

_SEVERITIES = {"low": Severity.LOW, "medium": Severity.MEDIUM, "high": Severity.HIGH}


def bind_record(
    config: BucketConfig,
    derived: DerivedProperties,
    restrictive_keys: frozenset[str] | None = None,
) -> Mapping[str, Any]:
    """Flatten a bucket and its derived properties into the DSL record shape."""
    keys = RESTRICTIVE_CONDITION_KEYS if restrictive_keys is None else restrictive_keys
    statements = None
    if config.policy is not None:
        statements = []
        for stmt in config.policy:
            matched = sorted(k for k in (stmt.condition or ()) if k in keys)
            statements.append(
                {
                    "sid": stmt.sid,
                    "effect": stmt.effect.value,
                    "principal_aws": list(stmt.principal_aws),
                    "action": list(stmt.actions),
                    "resource": list(stmt.resources),
                    "condition": dict(stmt.condition) if stmt.condition is not None else None,
                    "restrictedaccesscondition": matched or None,
                }
            )
    bpa = config.public_access_block
    return {
        "name": config.name,
        "region": config.region,
        "websiteenabled": config.website_enabled,
        "blockpublicacls": bpa.block_public_acls,
        "ignorepublicacls": bpa.ignore_public_acls,
        "blockpublicpolicy": bpa.block_public_policy,
        "restrictpublicbuckets": bpa.restrict_public_buckets,
        "policystatuspublic": derived.policy_status_public,
        "exposure": derived.exposure.value,
        "sensitivedata": derived.sensitive_data,
        "aclgrants": [
            {
                "granteetype": g.grantee_type.value,
                "granteeuri": g.grantee_uri,
                "permission": g.permission.value,
            }
            for g in config.acl_grants
        ],
        "policystatements": statements,
    }


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]) -> None:
        self._tokens = tokens
        self._pos = 0
        self._scopes: list[dict[str, str]] = []  # element-field scopes, innermost last

    def _peek(self) -> Token:
        return self._tokens[self._pos]

    def _advance(self) -> Token:
        token = self._tokens[self._pos]
        if token.kind is not TokenKind.EOF:
            self._pos += 1
        return token

    def _error(self, message: str, expected: set[str] = frozenset()) -> ParseError:
        return ParseError(message, self._peek().offset, frozenset(expected))

    def _expect_keyword(self, word: str) -> Token:
        token = self._peek()
        if token.kind is TokenKind.KEYWORD and token.text == word:
            return self._advance()
        raise self._error(f"expected {word}, found {token.text or '<eof>'!r}", {word})

    def _expect_punct(self, text: str) -> Token:
        token = self._peek()
        if token.kind is TokenKind.PUNCT and token.text == text:
            return self._advance()
        raise self._error(f"expected {text!r}, found {token.text or '<eof>'!r}", {text})

    def parse_rule(self) -> RuleAst:
        self._expect_keyword("RULE")
        name_token = self._peek()
        if name_token.kind in (TokenKind.IDENT, TokenKind.STRING):
            self._advance()
        else:
            raise self._error("expected rule name", {"identifier", "string"})
        self._expect_keyword("SEVERITY")
        level_token = self._peek()
        severity = _SEVERITIES.get(level_token.text.lower()) if level_token.kind is TokenKind.IDENT else None
        if severity is None:
            raise self._error("expected severity level", {"Low", "Medium", "High"})
        self._advance()
        self._expect_keyword("WHEN")
        body = self._expr()
        token = self._peek()
        if token.kind is not TokenKind.EOF:
            raise self._error(f"unexpected trailing input {token.text!r}", {"<eof>"})
        return RuleAst(name=name_token.text, severity=severity, body=body)

    def _expr(self) -> Node:
        children = [self._and_expr()]
        while self._peek().kind is TokenKind.KEYWORD and self._peek().text == "OR":
            self._advance()
            children.append(self._and_expr())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def _and_expr(self) -> Node:
        children = [self._unary()]
        while self._peek().kind is TokenKind.KEYWORD and self._peek().text == "AND":
            self._advance()
            children.append(self._unary())
        return children[0] if len(children) == 1 else And(tuple(children))

    def _unary(self) -> Node:
        token = self._peek()
        if token.kind is TokenKind.KEYWORD and token.text == "NOT":
            self._advance()
            return Not(self._unary())
        return self._primary()

    def _primary(self) -> Node:
        token = self._peek()
        if token.kind is TokenKind.PUNCT and token.text == "(":
            self._advance()
            inner = self._expr()
            self._expect_punct(")")
            return inner
        if token.kind is TokenKind.KEYWORD and token.text == "EXISTS":
            self._advance()
            self._expect_punct("(")
            path_token = self._peek()
            path = self._raw_path()
            canonical, element_fields = self._resolve_collection(path, path_token.offset)
            self._expect_keyword("WHERE")
            self._scopes.append(element_fields)
            try:
                inner = self._expr()
            finally:
                self._scopes.pop()
            self._expect_punct(")")
            return Exists((canonical,), inner)
        if token.kind is TokenKind.KEYWORD and token.text in ("TRUE", "FALSE"):
            self._advance()
            return LiteralBool(token.text == "TRUE")
        if token.kind is TokenKind.IDENT:
            return self._predicate()
        raise self._error(
            f"expected expression, found {token.text or '<eof>'!r}",
            {"(", "EXISTS", "NOT", "TRUE", "FALSE", "identifier"},
        )

    def _raw_path(self) -> tuple[str, ...]:
        token = self._peek()
        if token.kind is not TokenKind.IDENT:
            raise self._error("expected a field path", {"identifier"})
        segments = [self._advance().text]
        while self._peek().kind is TokenKind.PUNCT and self._peek().text == ".":
            self._advance()
            nxt = self._peek()
            if nxt.kind is not TokenKind.IDENT:
                raise self._error("expected identifier after '.'", {"identifier"})
            segments.append(self._advance().text)
        return tuple(segments)

    def _resolve_collection(self, path: tuple[str, ...], offset: int) -> tuple[str, dict[str, str]]:
        if len(path) == 1 and path[0].lower() in _COLLECTIONS:
            canonical, fields = _COLLECTIONS[path[0].lower()]
            return canonical, fields
        raise SchemaError(
            f"EXISTS requires a collection path, got {'.'.join(path)!r}", offset=offset
        )

    def _resolve_value_path(self, path: tuple[str, ...], offset: int, *, allow_collection: bool) -> tuple[str, ...]:
        if len(path) == 1:
            lowered = path[0].lower()
            for scope in reversed(self._scopes):
                if lowered in scope:
                    return (scope[lowered],)
            if lowered in _SCALARS:
                return (_SCALARS[lowered],)
            if lowered in _COLLECTIONS:
                if allow_collection:
                    return (_COLLECTIONS[lowered][0],)
                raise SchemaError(
                    f"collection {path[0]!r} cannot be compared to a literal", offset=offset
                )
        raise SchemaError(f"unknown path {'.'.join(path)!r}", offset=offset)

    def _predicate(self) -> Node:
        path_token = self._peek()
        raw = self._raw_path()
        token = self._peek()
        if token.kind is TokenKind.PUNCT and token.text in ("=", "!="):
            path = self._resolve_value_path(raw, path_token.offset, allow_collection=False)
            self._advance()
            literal = self._literal()
            return Compare(path, CompareOp.EQ if token.text == "=" else CompareOp.NE, literal)
        if token.kind is TokenKind.KEYWORD and token.text == "LIKE":
            path = self._resolve_value_path(raw, path_token.offset, allow_collection=False)
            self._advance()
            pattern_token = self._peek()
            literal = self._literal()
            if not isinstance(literal, str):
                raise ParseError("LIKE pattern must be a string", pattern_token.offset)
            return Compare(path, CompareOp.LIKE, literal)
        if token.kind is TokenKind.KEYWORD and token.text == "IS":
            path = self._resolve_value_path(raw, path_token.offset, allow_collection=True)
            self._advance()
            negated = False
            if self._peek().kind is TokenKind.KEYWORD and self._peek().text == "NOT":
                self._advance()
                negated = True
            self._expect_keyword("NULL")
            return IsNotNull(path) if negated else IsNull(path)
        raise self._error(
            f"expected a predicate operator after {'.'.join(raw)!r}",
            {"=", "!=", "LIKE", "IS"},
        )

    def _literal(self) -> Literal:
        token = self._peek()
        if token.kind is TokenKind.STRING:
            self._advance()
            return token.text
        if token.kind is TokenKind.NUMBER:
            self._advance()
            return float(token.text) if "." in token.text else int(token.text)
        if token.kind is TokenKind.KEYWORD and token.text in ("TRUE", "FALSE"):
            self._advance()
            return token.text == "TRUE"
        raise self._error("expected a literal", {"string", "number", "TRUE", "FALSE"})


def parse_rule(source: str) -> RuleAst:
    """Parse and schema-validate one rule; paths are stored canonically cased."""
    return _Parser(tokenize(source)).parse_rule()


# ---------------------------------------------------------------------------
# Renderer
# ---------------------------------------------------------------------------

def _quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def _render_literal(literal: Literal) -> str:
    if isinstance(literal, bool):
        return "TRUE" if literal else "FALSE"
    if isinstance(literal, str):
        return _quote(literal)
    return str(literal)


def _render(node: Node) -> str:
    if isinstance(node, Or):
        return " OR ".join(
            f"({_render(c)})" if isinstance(c, Or) else _render(c) for c in node.children
        )
    if isinstance(node, And):
        return " AND ".join(
            f"({_render(c)})" if isinstance(c, (Or, And)) else _render(c)
            for c in node.children
        )
    if isinstance(node, Not):
        child = node.child
        rendered = _render(child)
        if isinstance(child, (Or, And)):
            rendered = f"({rendered})"
        return f"NOT {rendered}"
    if isinstance(node, Exists):
        return f"EXISTS({'.'.join(node.path)} WHERE {_render(node.inner)})"
    if isinstance(node, Compare):
        op = "LIKE" if node.op is CompareOp.LIKE else node.op.value
        return f"{'.'.join(node.path)} {op} {_render_literal(node.literal)}"
    if isinstance(node, IsNull):
        return f"{'.'.join(node.path)} IS NULL"
    if isinstance(node, IsNotNull):
        return f"{'.'.join(node.path)} IS NOT NULL"
    if isinstance(node, LiteralBool):
        return "TRUE" if node.value else "FALSE"
    raise TypeError(f"unknown node type {type(node).__name__}")


def render_rule(ast: RuleAst) -> str:
    """Render an AST back to source; reparsing yields a structurally equal AST."""
    return f"RULE {_quote(ast.name)} SEVERITY {ast.severity.value} WHEN {_render(ast.body)}"


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------

def _lookup(env: list[Mapping[str, Any]], path: tuple[str, ...]) -> Any:
    key = path[0].lower()
    for frame in reversed(env):
        if key in frame:
            return frame[key]
    raise SchemaError(f"unresolvable path {'.'.join(path)!r}")  # unreachable post-parse


def _scalar_eq(value: Any, literal: Literal) -> bool:
    # bools only equal bools, so TRUE never equals the number 1
    if isinstance(value, bool) or isinstance(literal, bool):
        return isinstance(value, bool) and isinstance(literal, bool) and value == literal
    return bool(value == literal)


def _compare_scalar(value: Any, op: CompareOp, literal: Literal) -> bool:
    if op is CompareOp.LIKE:
        return isinstance(value, str) and like_match(str(literal), value)
    if value is None:
        return op is CompareOp.NE
    if op is CompareOp.EQ:
        return _scalar_eq(value, literal)
    return not _scalar_eq(value, literal)


def _eval(node: Node, env: list[Mapping[str, Any]]) -> bool:
    if isinstance(node, Or):
        return any(_eval(child, env) for child in node.children)
    if isinstance(node, And):
        return all(_eval(child, env) for child in node.children)
    if isinstance(node, Not):
        return not _eval(node.child, env)
    if isinstance(node, LiteralBool):
        return node.value
    if isinstance(node, Exists):
        collection = _lookup(env, node.path)
        if not collection:
            return False
        return any(_eval(node.inner, env + [element]) for element in collection)
    if isinstance(node, IsNull):
        return _lookup(env, node.path) is None
    if isinstance(node, IsNotNull):
        return _lookup(env, node.path) is not None
    if isinstance(node, Compare):
        value = _lookup(env, node.path)
        if isinstance(value, list):
            return any(_compare_scalar(v, node.op, node.literal) for v in value)
        return _compare_scalar(value, node.op, node.literal)
    raise TypeError(f"unknown node type {type(node).__name__}")


def eval_rule(ast: RuleAst, record: Mapping[str, Any]) -> bool:
    """Evaluate a parsed rule against one bound record (see ``bind_record``)."""
    return _eval(ast.body, [record])
