"""Recursive-descent parser for the ASCII surface syntax.

Programs:   x := t | x := * | ?F | p; q | p ++ q | {p}* | {x'=t, ... & F}
Formulas:   t ~ t | F & G | F | G | F -> G | !F | forall x. F | exists x. F
            | [p] F | true | false
Terms:      decimal literals, variables, + - * unary-minus, ^k with integer
            exponent k >= 1. No division (terms are polynomials).

`;` binds tighter than `++`; both are left-associative. A trailing `;`
before `}`, `]`, `++`, or end of input is tolerated as a separator
artifact. `->` is right-associative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .syntax import (
    ODE,
    Add,
    And,
    Assign,
    AssignAny,
    Box,
    Choice,
    Cmp,
    Const,
    Exists,
    FalseF,
    Forall,
    Formula,
    HybridProgram,
    Implies,
    Loop,
    Mul,
    Neg,
    Not,
    Or,
    Pow,
    Seq,
    SourceSpan,
    Sub,
    Term,
    Test,
    TrueF,
    Var,
)


class ParseError(Exception):
    """Syntax error with the offending source span."""

    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} (at {span.start}..{span.end})")
        self.message = message
        self.span = span


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    start: int
    end: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end)


_KEYWORDS = {"forall", "exists", "true", "false"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<ident>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<op>\+\+|:=|<=|>=|->|[;*{}()\[\]?'&|!<>=^+\-,.])
    """,
    re.VERBOSE,
)


def _lex(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unknown token {text[pos]!r}", SourceSpan(pos, pos + 1))
        pos = m.end()
        if m.lastgroup in ("ws", "comment"):
            continue
        kind = m.lastgroup
        tok = m.group()
        if kind == "ident" and tok in _KEYWORDS:
            kind = tok
        elif kind == "op":
            kind = tok
        tokens.append(_Token(kind, tok, m.start(), m.end()))
    tokens.append(_Token("eof", "", n, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.pos = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self, ahead: int = 0) -> _Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def check(self, kind: str) -> bool:
        return self.peek().kind == kind

    def match(self, kind: str) -> bool:
        if self.check(kind):
            self.advance()
            return True
        return False

    def expect(self, kind: str, what: str) -> _Token:
        if not self.check(kind):
            tok = self.peek()
            raise ParseError(f"expected {what}, found {tok.text or 'end of input'!r}", tok.span)
        return self.advance()

    def fail(self, message: str) -> "ParseError":
        tok = self.peek()
        return ParseError(message, tok.span if tok.kind != "eof" else SourceSpan(tok.start, tok.end))

    # -- terms --------------------------------------------------------------

    def term(self) -> Term:
        node = self.term_mul()
        while True:
            if self.match("+"):
                node = Add(node, self.term_mul())
            elif self.match("-"):
                node = Sub(node, self.term_mul())
            else:
                return node

    def term_mul(self) -> Term:
        node = self.term_unary()
        while self.match("*"):
            node = Mul(node, self.term_unary())
        return node

    def term_unary(self) -> Term:
        if self.match("-"):
            return Neg(self.term_unary())
        return self.term_pow()

    def term_pow(self) -> Term:
        node = self.term_atom()
        while self.match("^"):
            tok = self.expect("num", "integer exponent")
            if not re.fullmatch(r"\d+", tok.text) or int(tok.text) < 1:
                raise ParseError(f"exponent must be an integer >= 1, got {tok.text!r}", tok.span)
            node = Pow(node, int(tok.text))
        return node

    def term_atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        if self.match("("):
            node = self.term()
            self.expect(")", "')'")
            return node
        raise self.fail("expected a term")

    # -- formulas -----------------------------------------------------------

    def formula(self) -> Formula:
        node = self.formula_or()
        if self.match("->"):
            return Implies(node, self.formula())  # right-associative
        return node

    def formula_or(self) -> Formula:
        node = self.formula_and()
        while self.match("|"):
            node = Or(node, self.formula_and())
        return node

    def formula_and(self) -> Formula:
        node = self.formula_not()
        while self.match("&"):
            node = And(node, self.formula_not())
        return node

    def formula_not(self) -> Formula:
        if self.match("!"):
            return Not(self.formula_not())
        return self.formula_atom()

    def formula_atom(self) -> Formula:
        tok = self.peek()
        if tok.kind == "true":
            self.advance()
            return TrueF()
        if tok.kind == "false":
            self.advance()
            return FalseF()
        if tok.kind in ("forall", "exists"):
            self.advance()
            var = self.expect("ident", "bound variable").text
            self.expect(".", "'.' after quantified variable")
            body = self.formula()
            return Forall(var, body) if tok.kind == "forall" else Exists(var, body)
        if tok.kind == "[":
            self.advance()
            prog = self.program()
            self.expect("]", "']' closing box program")
            return Box(prog, self.formula())
        if tok.kind == "(":
            # Either a parenthesized formula or a parenthesized term starting
            # a comparison; try the comparison first and backtrack.
            saved = self.pos
            try:
                return self.comparison()
            except ParseError:
                self.pos = saved
            self.advance()
            node = self.formula()
            self.expect(")", "')'")
            return node
        return self.comparison()

    def comparison(self) -> Formula:
        left = self.term()
        tok = self.peek()
        if tok.kind not in ("<=", "<", "=", ">", ">="):
            raise self.fail("expected a comparison operator")
        self.advance()
        right = self.term()
        return Cmp(left, tok.kind, right)

    # -- programs -----------------------------------------------------------

    def program(self) -> HybridProgram:
        node = self.program_seq()
        while self.match("++"):
            if self.peek().kind in ("++", "]", "}", "eof"):
                raise self.fail("empty choice branch")
            node = Choice(node, self.program_seq())
        return node

    def program_seq(self) -> HybridProgram:
        node = self.program_stmt()
        while self.match(";"):
            if self.peek().kind in ("}", "]", "++", "eof"):
                break  # trailing separator
            node = Seq(node, self.program_stmt())
        return node

    def program_stmt(self) -> HybridProgram:
        tok = self.peek()
        if tok.kind == "{":
            if self.peek(1).kind == "ident" and self.peek(2).kind == "'":
                return self.ode()
            self.advance()
            if self.check("}"):
                raise self.fail("empty braces")
            node = self.program()
            self.expect("}", "'}'")
            if self.match("*"):
                return Loop(node)
            return node
        if self.match("?"):
            return Test(self.formula())
        if tok.kind == "ident":
            self.advance()
            self.expect(":=", "':=' after variable")
            if self.match("*"):
                return AssignAny(tok.text)
            return Assign(tok.text, self.term())
        raise self.fail("expected a statement")

    def ode(self) -> HybridProgram:
        self.expect("{", "'{'")
        equations: List[Tuple[str, Term]] = []
        while True:
            name_tok = self.expect("ident", "ODE variable")
            self.expect("'", "prime after ODE variable")
            self.expect("=", "'=' in ODE equation")
            rhs = self.term()
            if any(v == name_tok.text for v, _ in equations):
                raise ParseError(f"duplicate ODE variable {name_tok.text!r}", name_tok.span)
            equations.append((name_tok.text, rhs))
            if not self.match(","):
                break
        domain: Formula = TrueF()
        if self.match("&"):
            domain = self.formula()
        self.expect("}", "'}' closing ODE")
        return ODE(tuple(equations), domain)


def parse_program(text: str) -> HybridProgram:
    """Parse a hybrid program; raises ParseError on malformed input."""
    p = _Parser(text)
    node = p.program()
    p.expect("eof", "end of input")
    return node


def parse_formula(text: str) -> Formula:
    """Parse a dL formula; raises ParseError on malformed input."""
    p = _Parser(text)
    node = p.formula()
    p.expect("eof", "end of input")
    return node


def parse_term(text: str) -> Term:
    """Parse a real-arithmetic term; raises ParseError on malformed input."""
    p = _Parser(text)
    node = p.term()
    p.expect("eof", "end of input")
    return node
