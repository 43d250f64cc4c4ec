"""Text format for tree definitions (.bt files).

Grammar:

    document := "tree" IDENT block
    block    := "{" node+ "}"
    node     := ("sequence" | "fallback") block
              | ("action" | "condition") IDENT params?
    params   := "(" IDENT "=" value ("," IDENT "=" value)* ")"
    value    := NUMBER | STRING | "true" | "false"

"#" starts a comment running to end of line. Identifiers match
[A-Za-z_][A-Za-z0-9_]*. Child order is textual order.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import NodeKind, NodeSpec, TreeSpec, validate_tree

KEYWORDS = {"tree", "sequence", "fallback", "action", "condition", "true", "false"}


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


@dataclass
class ParseResult:
    spec: TreeSpec | None
    diagnostics: list[Diagnostic]
    spans: dict[str, tuple[int, int]]

    @property
    def ok(self) -> bool:
        return self.spec is not None and not self.diagnostics


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, punct, eof
    text: str
    line: int
    column: int


class _ParseAbort(Exception):
    pass


def _tokenize(text: str, diags: list[Diagnostic]) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            i += 1
            col += 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif c.isalpha() or c == "_":
            start, scol = i, col
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
                col += 1
            tokens.append(Token("ident", text[start:i], line, scol))
        elif c.isdigit() or (c in "+-" and i + 1 < n and text[i + 1].isdigit()):
            start, scol = i, col
            i += 1
            col += 1
            while i < n and (text[i].isdigit() or text[i] == "."):
                i += 1
                col += 1
            tokens.append(Token("number", text[start:i], line, scol))
        elif c == '"':
            start, scol = i, col
            i += 1
            col += 1
            while i < n and text[i] not in '"\n':
                i += 1
                col += 1
            if i >= n or text[i] != '"':
                diags.append(Diagnostic(line, scol, "unterminated string literal"))
                tokens.append(Token("string", text[start + 1 : i], line, scol))
            else:
                tokens.append(Token("string", text[start + 1 : i], line, scol))
                i += 1
                col += 1
        elif c in "{}()=,":
            tokens.append(Token("punct", c, line, col))
            i += 1
            col += 1
        else:
            diags.append(Diagnostic(line, col, f"unexpected character {c!r}"))
            i += 1
            col += 1
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token], diags: list[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.diags = diags
        self.nodes: dict[str, NodeSpec] = {}
        self.spans: dict[str, tuple[int, int]] = {}
        self._control_counter = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, tok: Token, message: str) -> None:
        self.diags.append(Diagnostic(tok.line, tok.column, message))
        raise _ParseAbort()

    def expect_punct(self, text: str) -> Token:
        tok = self.next()
        if tok.kind != "punct" or tok.text != text:
            self.fail(tok, f"expected '{text}', found {tok.text or 'end of input'!r}")
        return tok

    def expect_ident(self, what: str) -> Token:
        tok = self.next()
        if tok.kind != "ident":
            self.fail(tok, f"expected {what}, found {tok.text or 'end of input'!r}")
        return tok

    def parse_document(self) -> TreeSpec:
        tok = self.expect_ident("keyword 'tree'")
        if tok.text != "tree":
            self.fail(tok, f"expected 'tree', found {tok.text!r}")
        name = self.expect_ident("tree name")
        children = self.parse_block()
        if len(children) != 1:
            tok = self.peek()
            self.fail(tok, "tree body must contain exactly one root node")
        trailing = self.peek()
        if trailing.kind != "eof":
            self.fail(trailing, f"unexpected trailing input {trailing.text!r}")
        return TreeSpec(name.text, self.nodes, children[0])

    def parse_block(self) -> list[str]:
        self.expect_punct("{")
        children: list[str] = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                return children
            if tok.kind == "eof":
                self.fail(tok, "expected node or '}', found end of input")
            children.append(self.parse_node())

    def parse_node(self) -> str:
        tok = self.expect_ident("node keyword")
        if tok.text in ("sequence", "fallback"):
            kind = NodeKind.SEQUENCE if tok.text == "sequence" else NodeKind.FALLBACK
            self._control_counter += 1
            nid = f"{tok.text}_{self._control_counter}"
            children = self.parse_block()
            if not children:
                self.fail(tok, "control node needs >=1 child")
            self.nodes[nid] = NodeSpec(nid, kind, tuple(children))
            self.spans[nid] = (tok.line, tok.column)
            return nid
        if tok.text in ("action", "condition"):
            kind = NodeKind.ACTION if tok.text == "action" else NodeKind.CONDITION
            name = self.expect_ident("leaf name")
            if name.text in KEYWORDS:
                self.fail(name, f"{name.text!r} is a reserved word")
            params: tuple[tuple[str, object], ...] = ()
            nxt = self.peek()
            if nxt.kind == "punct" and nxt.text == "(":
                params = self.parse_params()
            if name.text in self.nodes:
                self.fail(name, f"duplicate node id '{name.text}'")
            self.nodes[name.text] = NodeSpec(name.text, kind, (), name.text, params)
            self.spans[name.text] = (name.line, name.column)
            return name.text
        self.fail(tok, f"expected node keyword, found {tok.text!r}")
        raise AssertionError("unreachable")

    def parse_params(self) -> tuple[tuple[str, object], ...]:
        self.expect_punct("(")
        pairs: list[tuple[str, object]] = []
        while True:
            key = self.expect_ident("parameter name")
            self.expect_punct("=")
            pairs.append((key.text, self.parse_value()))
            tok = self.next()
            if tok.kind == "punct" and tok.text == ")":
                return tuple(pairs)
            if not (tok.kind == "punct" and tok.text == ","):
                self.fail(tok, f"expected ',' or ')', found {tok.text or 'end of input'!r}")

    def parse_value(self) -> object:
        tok = self.next()
        if tok.kind == "number":
            if "." in tok.text:
                try:
                    return float(tok.text)
                except ValueError:
                    self.fail(tok, f"malformed number {tok.text!r}")
            return int(tok.text)
        if tok.kind == "string":
            return tok.text
        if tok.kind == "ident" and tok.text in ("true", "false"):
            return tok.text == "true"
        self.fail(tok, f"expected value, found {tok.text or 'end of input'!r}")
        raise AssertionError("unreachable")


def parse(text: str) -> ParseResult:
    """Parse a .bt document. Never raises; problems come back as diagnostics."""
    diags: list[Diagnostic] = []
    tokens = _tokenize(text, diags)
    if diags:
        return ParseResult(None, diags, {})
    parser = _Parser(tokens, diags)
    try:
        spec = parser.parse_document()
    except _ParseAbort:
        return ParseResult(None, diags, parser.spans)
    except RecursionError:
        diags.append(Diagnostic(1, 1, "input nested too deeply"))
        return ParseResult(None, diags, parser.spans)
    for v in validate_tree(spec):
        line, col = parser.spans.get(v.node_id, (1, 1))
        diags.append(Diagnostic(line, col, f"{v.node_id}: {v.rule}"))
    if diags:
        return ParseResult(None, diags, parser.spans)
    return ParseResult(spec, [], parser.spans)


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return '"' + str(value) + '"'


def serialize(spec: TreeSpec) -> str:
    """Canonical text form: 2-space indent, one node per line, LF endings."""
    lines = [f"tree {spec.name} {{"]

    def emit(nid: str, depth: int) -> None:
        node = spec.node(nid)
        pad = "  " * depth
        if node.kind in (NodeKind.SEQUENCE, NodeKind.FALLBACK):
            lines.append(f"{pad}{node.kind.value} {{")
            for ch in node.children:
                emit(ch, depth + 1)
            lines.append(f"{pad}}}")
        else:
            params = ""
            if node.params:
                inner = ", ".join(f"{k}={_format_value(v)}" for k, v in node.params)
                params = f"({inner})"
            lines.append(f"{pad}{node.kind.value} {nid}{params}")

    emit(spec.root, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"
