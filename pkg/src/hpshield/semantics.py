"""Term/formula evaluation over concrete states.

A State is a plain dict mapping variable names to finite floats. Evaluation
of an unbound variable raises UnboundVariable rather than defaulting to 0.
Comparisons are exact IEEE comparisons; conservatism belongs to the shield's
robustness margin, not here.

For hot loops (environment stepping, bounded falsification) terms and
formulas can be compiled to plain Python lambdas; the tree-walking
evaluators remain the reference semantics and the two are cross-checked in
the test suite.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, Mapping

from .syntax import (
    Add,
    And,
    Box,
    Cmp,
    Const,
    Exists,
    FalseF,
    Forall,
    Formula,
    Implies,
    Mul,
    Neg,
    Not,
    Or,
    Pow,
    Sub,
    Term,
    TrueF,
    Var,
)

State = Dict[str, float]


class EvalError(Exception):
    pass


class UnboundVariable(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class NonFiniteResult(EvalError):
    pass


class UnsupportedConnective(EvalError):
    pass


def eval_term(t: Term, s: Mapping[str, float]) -> float:
    """Standard real-arithmetic evaluation of t in state s."""
    v = _eval(t, s)
    if not math.isfinite(v):
        raise NonFiniteResult(f"term evaluated to {v}")
    return v


def _eval(t: Term, s: Mapping[str, float]) -> float:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        try:
            return s[t.name]
        except KeyError:
            raise UnboundVariable(t.name) from None
    if isinstance(t, Neg):
        return -_eval(t.arg, s)
    if isinstance(t, Add):
        return _eval(t.left, s) + _eval(t.right, s)
    if isinstance(t, Sub):
        return _eval(t.left, s) - _eval(t.right, s)
    if isinstance(t, Mul):
        return _eval(t.left, s) * _eval(t.right, s)
    if isinstance(t, Pow):
        return _eval(t.base, s) ** t.exponent
    raise TypeError(f"not a term: {t!r}")


_CMP = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "=": lambda a, b: a == b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_formula(f: Formula, s: Mapping[str, float]) -> bool:
    """Evaluate a quantifier- and Box-free formula in state s."""
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Cmp):
        return _CMP[f.rel](eval_term(f.left, s), eval_term(f.right, s))
    if isinstance(f, And):
        return eval_formula(f.left, s) and eval_formula(f.right, s)
    if isinstance(f, Or):
        return eval_formula(f.left, s) or eval_formula(f.right, s)
    if isinstance(f, Implies):
        return (not eval_formula(f.left, s)) or eval_formula(f.right, s)
    if isinstance(f, Not):
        return not eval_formula(f.arg, s)
    if isinstance(f, (Forall, Exists, Box)):
        raise UnsupportedConnective(f"cannot evaluate {type(f).__name__} in a single state")
    raise TypeError(f"not a formula: {f!r}")


_NEG_REL = {"<=": ">", "<": ">=", ">": "<=", ">=": "<", "=": "="}


def to_nnf(f: Formula) -> Formula:
    """Rewrite Implies away and push negations down to comparisons.

    A negated equality has no relational complement in the five-relation
    grammar; it is rewritten to (l < r) | (l > r).
    """
    if isinstance(f, (TrueF, FalseF, Cmp)):
        return f
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Implies):
        return Or(to_nnf(Not(f.left)), to_nnf(f.right))
    if isinstance(f, Not):
        g = f.arg
        if isinstance(g, TrueF):
            return FalseF()
        if isinstance(g, FalseF):
            return TrueF()
        if isinstance(g, Cmp):
            if g.rel == "=":
                return Or(Cmp(g.left, "<", g.right), Cmp(g.left, ">", g.right))
            return Cmp(g.left, _NEG_REL[g.rel], g.right)
        if isinstance(g, Not):
            return to_nnf(g.arg)
        if isinstance(g, And):
            return Or(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
        if isinstance(g, Or):
            return And(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
        if isinstance(g, Implies):
            return And(to_nnf(g.left), to_nnf(Not(g.right)))
        raise UnsupportedConnective(f"cannot normalize Not({type(g).__name__})")
    raise UnsupportedConnective(f"cannot normalize {type(f).__name__}")


def robustness(f: Formula, s: Mapping[str, float]) -> float:
    """Signed satisfaction margin of f in s.

    Atoms l <= r and l < r score r - l; l >= r and l > r score l - r;
    l = r scores -|l - r|. And takes the min over conjuncts, Or the max
    over disjuncts. Positive iff eval_formula holds, except on degenerate
    (boundary / equality) atoms where the margin is 0 or negative.
    """
    g = to_nnf(f)
    return _rob(g, s)


def _rob(f: Formula, s: Mapping[str, float]) -> float:
    if isinstance(f, TrueF):
        return math.inf
    if isinstance(f, FalseF):
        return -math.inf
    if isinstance(f, Cmp):
        l = eval_term(f.left, s)
        r = eval_term(f.right, s)
        if f.rel in ("<=", "<"):
            return r - l
        if f.rel in (">=", ">"):
            return l - r
        return -abs(l - r)
    if isinstance(f, And):
        return min(_rob(f.left, s), _rob(f.right, s))
    if isinstance(f, Or):
        return max(_rob(f.left, s), _rob(f.right, s))
    raise UnsupportedConnective(f"robustness undefined for {type(f).__name__}")


# ---------------------------------------------------------------------------
# Compilation to Python lambdas (fast path)
# ---------------------------------------------------------------------------


def _term_expr(t: Term) -> str:
    if isinstance(t, Const):
        return repr(t.value)
    if isinstance(t, Var):
        return f"s[{t.name!r}]"
    if isinstance(t, Neg):
        return f"(-{_term_expr(t.arg)})"
    if isinstance(t, Add):
        return f"({_term_expr(t.left)} + {_term_expr(t.right)})"
    if isinstance(t, Sub):
        return f"({_term_expr(t.left)} - {_term_expr(t.right)})"
    if isinstance(t, Mul):
        return f"({_term_expr(t.left)} * {_term_expr(t.right)})"
    if isinstance(t, Pow):
        return f"({_term_expr(t.base)} ** {t.exponent})"
    raise TypeError(f"not a term: {t!r}")


def _formula_expr(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "True"
    if isinstance(f, FalseF):
        return "False"
    if isinstance(f, Cmp):
        op = "==" if f.rel == "=" else f.rel
        return f"({_term_expr(f.left)} {op} {_term_expr(f.right)})"
    if isinstance(f, And):
        return f"({_formula_expr(f.left)} and {_formula_expr(f.right)})"
    if isinstance(f, Or):
        return f"({_formula_expr(f.left)} or {_formula_expr(f.right)})"
    if isinstance(f, Implies):
        return f"((not {_formula_expr(f.left)}) or {_formula_expr(f.right)})"
    if isinstance(f, Not):
        return f"(not {_formula_expr(f.arg)})"
    raise UnsupportedConnective(f"cannot compile {type(f).__name__}")


def _rob_expr(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "inf"
    if isinstance(f, FalseF):
        return "(-inf)"
    if isinstance(f, Cmp):
        l, r = _term_expr(f.left), _term_expr(f.right)
        if f.rel in ("<=", "<"):
            return f"({r} - {l})"
        if f.rel in (">=", ">"):
            return f"({l} - {r})"
        return f"(-abs({l} - {r}))"
    if isinstance(f, And):
        return f"min({_rob_expr(f.left)}, {_rob_expr(f.right)})"
    if isinstance(f, Or):
        return f"max({_rob_expr(f.left)}, {_rob_expr(f.right)})"
    raise UnsupportedConnective(f"robustness undefined for {type(f).__name__}")


_COMPILE_GLOBALS = {"abs": abs, "min": min, "max": max, "inf": math.inf, "__builtins__": {}}


def compile_term(t: Term) -> Callable[[Mapping[str, float]], float]:
    """Compile a term to a callable taking a state mapping."""
    return eval(f"lambda s: {_term_expr(t)}", dict(_COMPILE_GLOBALS))


def compile_formula(f: Formula) -> Callable[[Mapping[str, float]], bool]:
    """Compile a quantifier/Box-free formula to a boolean callable."""
    return eval(f"lambda s: {_formula_expr(f)}", dict(_COMPILE_GLOBALS))


def compile_robustness(f: Formula) -> Callable[[Mapping[str, float]], float]:
    """Compile the robustness margin of f to a callable."""
    return eval(f"lambda s: {_rob_expr(to_nnf(f))}", dict(_COMPILE_GLOBALS))


def check_state_finite(s: Mapping[str, float]) -> None:
    """Raise NonFiniteResult if any state value is NaN or infinite."""
    for k, v in s.items():
        if not math.isfinite(v):
            raise NonFiniteResult(f"state variable {k!r} is {v}")
