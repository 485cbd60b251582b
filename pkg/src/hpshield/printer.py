"""Pretty-printers whose output reparses to a structurally equal tree.

Parentheses/braces are inserted exactly where the parser's precedence and
left-associativity would otherwise regroup the tree, so print/parse is the
identity on ASTs (for constants, provided values are non-negative; negative
values are represented as Neg nodes, which is what the parser produces).
"""

from __future__ import annotations

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
    Sub,
    Term,
    Test,
    TrueF,
    Var,
)

# Term precedence levels: additive < multiplicative < unary < power < atom.
_ADD, _MUL, _UNARY, _POW, _ATOM = range(5)


def _const_str(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"cannot print non-finite constant {value}")
    if value < 0:
        raise ValueError("negative constants are not printable; wrap in Neg")
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _term(t: Term, ctx: int) -> str:
    if isinstance(t, Const):
        return _const_str(t.value)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Neg):
        s = f"-{_term(t.arg, _UNARY)}"
        return f"({s})" if ctx > _UNARY else s
    if isinstance(t, Add):
        s = f"{_term(t.left, _ADD)} + {_term(t.right, _MUL)}"
        return f"({s})" if ctx > _ADD else s
    if isinstance(t, Sub):
        s = f"{_term(t.left, _ADD)} - {_term(t.right, _MUL)}"
        return f"({s})" if ctx > _ADD else s
    if isinstance(t, Mul):
        s = f"{_term(t.left, _MUL)} * {_term(t.right, _UNARY)}"
        return f"({s})" if ctx > _MUL else s
    if isinstance(t, Pow):
        # x^2^3 parses left-associatively, so a Pow base needs no parens,
        # while any other compound base does.
        base = _term(t.base, _ATOM if not isinstance(t.base, Pow) else _POW)
        return f"{base}^{t.exponent}"
    raise TypeError(f"not a term: {t!r}")


def print_term(t: Term) -> str:
    return _term(t, _ADD)


# Formula precedence: implies < or < and < not < atom.
_IMP, _OR, _AND, _NOT, _FATOM = range(5)


def _formula(f: Formula, ctx: int) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Cmp):
        return f"{print_term(f.left)} {f.rel} {print_term(f.right)}"
    if isinstance(f, Implies):
        s = f"{_formula(f.left, _OR)} -> {_formula(f.right, _IMP)}"
        return f"({s})" if ctx > _IMP else s
    if isinstance(f, Or):
        s = f"{_formula(f.left, _OR)} | {_formula(f.right, _AND)}"
        return f"({s})" if ctx > _OR else s
    if isinstance(f, And):
        s = f"{_formula(f.left, _AND)} & {_formula(f.right, _NOT)}"
        return f"({s})" if ctx > _AND else s
    if isinstance(f, Not):
        return f"!{_formula(f.arg, _NOT)}"
    if isinstance(f, (Forall, Exists)):
        kw = "forall" if isinstance(f, Forall) else "exists"
        s = f"{kw} {f.var}. {_formula(f.body, _IMP)}"
        return f"({s})" if ctx > _IMP else s
    if isinstance(f, Box):
        s = f"[{print_program(f.program)}] {_formula(f.body, _IMP)}"
        return f"({s})" if ctx > _IMP else s
    raise TypeError(f"not a formula: {f!r}")


def print_formula(f: Formula) -> str:
    return _formula(f, _IMP)


# Program precedence: choice < seq < statement.
_CHOICE, _SEQ, _STMT = range(3)


def _program(p: HybridProgram, ctx: int) -> str:
    if isinstance(p, Assign):
        return f"{p.var} := {print_term(p.term)}"
    if isinstance(p, AssignAny):
        return f"{p.var} := *"
    if isinstance(p, Test):
        return f"?{print_formula(p.formula)}"
    if isinstance(p, Seq):
        s = f"{_program(p.first, _SEQ)}; {_program(p.second, _STMT)}"
        return "{" + s + "}" if ctx > _SEQ else s
    if isinstance(p, Choice):
        s = f"{_program(p.left, _CHOICE)} ++ {_program(p.right, _SEQ)}"
        return "{" + s + "}" if ctx > _CHOICE else s
    if isinstance(p, Loop):
        return "{" + _program(p.body, _CHOICE) + "}*"
    if isinstance(p, ODE):
        eqs = ", ".join(f"{v}' = {print_term(rhs)}" for v, rhs in p.equations)
        if p.domain == TrueF():
            return "{" + eqs + "}"
        return "{" + eqs + " & " + print_formula(p.domain) + "}"
    raise TypeError(f"not a program: {p!r}")


def print_program(p: HybridProgram) -> str:
    return _program(p, _CHOICE)
