"""Abstract syntax for hybrid programs, formulas, and real-arithmetic terms.

All nodes are frozen dataclasses, so structural equality and hashing come
for free and trees can be shared safely across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Tuple, Union

IDENT_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*$")

RELATIONS = ("<=", "<", "=", ">", ">=")


@dataclass(frozen=True)
class SourceSpan:
    """Byte range [start, end) into the parsed input text."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not IDENT_RE.match(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True)
class Neg:
    arg: "Term"


@dataclass(frozen=True)
class Add:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Sub:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Mul:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Pow:
    base: "Term"
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 1:
            raise ValueError(f"exponent must be an integer >= 1, got {self.exponent!r}")


Term = Union[Const, Var, Neg, Add, Sub, Mul, Pow]


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Cmp:
    left: Term
    rel: str
    right: Term

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"

    def __post_init__(self):
        if not IDENT_RE.match(self.var):
            raise ValueError(f"invalid bound variable {self.var!r}")


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"

    def __post_init__(self):
        if not IDENT_RE.match(self.var):
            raise ValueError(f"invalid bound variable {self.var!r}")


@dataclass(frozen=True)
class Box:
    program: "HybridProgram"
    body: "Formula"


Formula = Union[TrueF, FalseF, Cmp, And, Or, Implies, Not, Forall, Exists, Box]


# ---------------------------------------------------------------------------
# Hybrid programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    var: str
    term: Term


@dataclass(frozen=True)
class AssignAny:
    var: str


@dataclass(frozen=True)
class Test:
    formula: Formula


@dataclass(frozen=True)
class Seq:
    first: "HybridProgram"
    second: "HybridProgram"


@dataclass(frozen=True)
class Choice:
    left: "HybridProgram"
    right: "HybridProgram"


@dataclass(frozen=True)
class Loop:
    body: "HybridProgram"


@dataclass(frozen=True)
class ODE:
    """Continuous evolution {x1'=e1, ..., xn'=en & domain}."""

    equations: Tuple[Tuple[str, Term], ...]
    domain: Formula = field(default_factory=TrueF)

    def __post_init__(self):
        if not self.equations:
            raise ValueError("ODE needs at least one equation")
        names = [v for v, _ in self.equations]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate ODE variable in {names}")


HybridProgram = Union[Assign, AssignAny, Test, Seq, Choice, Loop, ODE]


def term_variables(t: Term) -> set:
    """Free variables of a term."""
    if isinstance(t, Const):
        return set()
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Neg):
        return term_variables(t.arg)
    if isinstance(t, Pow):
        return term_variables(t.base)
    if isinstance(t, (Add, Sub, Mul)):
        return term_variables(t.left) | term_variables(t.right)
    raise TypeError(f"not a term: {t!r}")


def formula_variables(f: Formula) -> set:
    """All variables mentioned in a quantifier/Box-free formula."""
    if isinstance(f, (TrueF, FalseF)):
        return set()
    if isinstance(f, Cmp):
        return term_variables(f.left) | term_variables(f.right)
    if isinstance(f, Not):
        return formula_variables(f.arg)
    if isinstance(f, (And, Or, Implies)):
        return formula_variables(f.left) | formula_variables(f.right)
    if isinstance(f, (Forall, Exists)):
        return formula_variables(f.body) | {f.var}
    raise TypeError(f"unsupported formula node: {f!r}")


def program_variables(p: HybridProgram) -> set:
    """All variables read or written anywhere in a program."""
    if isinstance(p, Assign):
        return {p.var} | term_variables(p.term)
    if isinstance(p, AssignAny):
        return {p.var}
    if isinstance(p, Test):
        return formula_variables(p.formula)
    if isinstance(p, (Seq,)):
        return program_variables(p.first) | program_variables(p.second)
    if isinstance(p, Choice):
        return program_variables(p.left) | program_variables(p.right)
    if isinstance(p, Loop):
        return program_variables(p.body)
    if isinstance(p, ODE):
        out = formula_variables(p.domain)
        for v, rhs in p.equations:
            out |= {v} | term_variables(rhs)
        return out
    raise TypeError(f"not a program: {p!r}")
