"""Runtime action shielding and online model adaptation.

A GuardTable is extracted from a guarded-choice controller (a Choice tree
whose branches are chains of Tests and Assigns). At runtime the shield
admits a proposed action iff its guard holds with at least the requested
robustness margin, otherwise it substitutes the designated fallback action,
whose guard must be True.

Adaptation closes the loop when reality drifts from the model: transition
records are compared against ODE predictions (detect_mismatch), per-action
accelerations are re-fit by least squares (estimate_params), and the fitted
parameters are substituted back into the guard templates
(resynthesize_guards) with a configurable safety factor on braking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .flow import flow
from .semantics import State, compile_robustness, eval_term
from .syntax import (
    ODE,
    Add,
    And,
    Assign,
    Choice,
    Cmp,
    Const,
    FalseF,
    Formula,
    HybridProgram,
    Implies,
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


class ShieldError(Exception):
    pass


class NotCanonicalForm(ShieldError):
    def __init__(self, node):
        super().__init__(f"controller branch contains a non-Test/Assign node: {type(node).__name__}")
        self.node = node


class UnknownAction(ShieldError):
    def __init__(self, action: str):
        super().__init__(f"unknown action {action!r}")
        self.action = action


class InvalidParams(ShieldError):
    pass


class InsufficientData(ShieldError):
    def __init__(self, action: str):
        super().__init__(f"not enough transition records for action {action!r}")
        self.action = action


@dataclass(frozen=True)
class GuardEntry:
    action: str
    assignments: Tuple[Tuple[str, Term], ...]
    guard: Formula


class GuardTable:
    """Immutable ordered table of (action, assignments, guard) entries."""

    def __init__(self, entries: Sequence[GuardEntry], fallback: str):
        actions = [e.action for e in entries]
        if len(set(actions)) != len(actions):
            raise ShieldError(f"duplicate action ids in {actions}")
        if fallback not in actions:
            raise ShieldError(f"fallback {fallback!r} not in table")
        fb = next(e for e in entries if e.action == fallback)
        if fb.guard != TrueF():
            raise ShieldError(f"fallback {fallback!r} guard must be True")
        self.entries: Tuple[GuardEntry, ...] = tuple(entries)
        self.fallback = fallback
        self._by_action = {e.action: e for e in self.entries}
        self._rob: Dict[str, Callable] = {
            e.action: compile_robustness(e.guard) for e in self.entries
        }

    @property
    def actions(self) -> Tuple[str, ...]:
        return tuple(e.action for e in self.entries)

    def entry(self, action: str) -> GuardEntry:
        try:
            return self._by_action[action]
        except KeyError:
            raise UnknownAction(action) from None

    def guard_margin(self, action: str, s: Mapping[str, float]) -> float:
        self.entry(action)
        return self._rob[action](s)


def extract_guards(
    ctrl: HybridProgram,
    fallback: str,
    labels: Optional[Sequence[str]] = None,
) -> GuardTable:
    """Build a GuardTable from a guarded-choice canonical-form controller.

    One entry per Choice branch; the guard is the conjunction of the
    branch's Tests (True if it has none) and the assignments are its
    Assigns in order. `labels` names the branches left to right; defaults
    to branch_0, branch_1, ...
    """
    branches = _choice_branches(ctrl)
    entries = []
    for i, branch in enumerate(branches):
        label = labels[i] if labels is not None else f"branch_{i}"
        tests: List[Formula] = []
        assigns: List[Tuple[str, Term]] = []
        for node in _seq_chain(branch):
            if isinstance(node, Test):
                tests.append(node.formula)
            elif isinstance(node, Assign):
                assigns.append((node.var, node.term))
            else:
                raise NotCanonicalForm(node)
        guard: Formula = TrueF()
        for t in tests:
            guard = t if guard == TrueF() else And(guard, t)
        entries.append(GuardEntry(label, tuple(assigns), guard))
    return GuardTable(entries, fallback)


def _choice_branches(p: HybridProgram) -> List[HybridProgram]:
    if isinstance(p, Choice):
        return _choice_branches(p.left) + _choice_branches(p.right)
    return [p]


def _seq_chain(p: HybridProgram) -> List[HybridProgram]:
    if isinstance(p, Seq):
        return _seq_chain(p.first) + _seq_chain(p.second)
    return [p]


def shield_action(
    gt: GuardTable, s: Mapping[str, float], proposed: str, margin: float = 0.0
) -> Tuple[str, bool]:
    """Admit `proposed` if its guard holds with the given margin, else fall back.

    Returns (chosen action, intervened flag).
    """
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    if gt.guard_margin(proposed, s) >= margin:
        return proposed, False
    return gt.fallback, True


def apply_action(gt: GuardTable, s: State, action: str) -> State:
    """Apply the entry's assignments to s, in order."""
    out = dict(s)
    for var, term in gt.entry(action).assignments:
        out[var] = eval_term(term, out)
    return out


# ---------------------------------------------------------------------------
# Model mismatch detection and re-estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Named dynamics parameters of the stop-sign model.

    accel_max: A, maximum acceleration (m/s^2); brake_max: b, maximum
    braking deceleration (m/s^2); latency: epsilon, maximum control
    latency (s).
    """

    accel_max: float
    brake_max: float
    latency: float

    def __post_init__(self):
        if self.accel_max < 0:
            raise InvalidParams(f"accel_max must be >= 0, got {self.accel_max}")
        if self.brake_max <= 0:
            raise InvalidParams(f"brake_max must be > 0, got {self.brake_max}")
        if self.latency <= 0:
            raise InvalidParams(f"latency must be > 0, got {self.latency}")

    def bindings(self) -> Dict[str, float]:
        return {"A": self.accel_max, "b": self.brake_max, "eps": self.latency}


@dataclass(frozen=True)
class TransitionRecord:
    before: Mapping[str, float]
    action: str
    after: Mapping[str, float]
    elapsed: float

    def __post_init__(self):
        if self.elapsed <= 0:
            raise ValueError(f"elapsed must be > 0, got {self.elapsed}")


@dataclass
class MismatchReport:
    flag: bool
    residuals: Dict[str, float]
    window_size: int
    threshold: float


# 3x the integrator accuracy floor; anything above it is model error,
# not numerics.
DEFAULT_MISMATCH_THRESHOLD = 3e-6


def detect_mismatch(
    records: Sequence[TransitionRecord],
    table: GuardTable,
    ode: ODE,
    params: ModelParams,
    threshold: float = DEFAULT_MISMATCH_THRESHOLD,
    ode_step: float = 0.01,
) -> MismatchReport:
    """Compare observed transitions against the modeled dynamics.

    Each record's after-state is predicted by applying the commanded
    action's assignments (under the modeled parameters) and flowing the
    ODE for the recorded elapsed time; the report flags iff any ODE
    variable's worst residual exceeds the threshold.
    """
    if not records:
        raise ValueError("mismatch window must be nonempty")
    ode_vars = [v for v, _ in ode.equations]
    residuals = {v: 0.0 for v in ode_vars}
    for rec in records:
        s = dict(rec.before)
        s.update(params.bindings())
        s = apply_action(table, s, rec.action)
        predicted = flow(ode, s, rec.elapsed, step=ode_step).state
        for v in ode_vars:
            residuals[v] = max(residuals[v], abs(predicted[v] - rec.after[v]))
    flag = any(r > threshold for r in residuals.values())
    return MismatchReport(flag, residuals, len(records), threshold)


def estimate_params(
    records: Sequence[TransitionRecord],
    brake_action: str = "brake",
    accel_action: str = "accel",
    velocity_var: str = "v",
) -> ModelParams:
    """Least-squares fit of per-action constant acceleration.

    For each action the model dv = a * dt is fit through the origin:
    a_hat = sum(dt_i * dv_i) / sum(dt_i^2). The braking estimate is
    -a_hat of the brake action, the acceleration estimate is a_hat of the
    accel action, and the latency estimate is the longest observed step.
    """
    sums: Dict[str, Tuple[float, float]] = {}
    for rec in records:
        dv = rec.after[velocity_var] - rec.before[velocity_var]
        num, den = sums.get(rec.action, (0.0, 0.0))
        sums[rec.action] = (num + rec.elapsed * dv, den + rec.elapsed**2)
    for action in (brake_action, accel_action):
        if action not in sums or sums[action][1] == 0.0:
            raise InsufficientData(action)
    a_brake = sums[brake_action][0] / sums[brake_action][1]
    a_accel = sums[accel_action][0] / sums[accel_action][1]
    return ModelParams(
        accel_max=a_accel,
        brake_max=-a_brake,
        latency=max(rec.elapsed for rec in records),
    )


def substitute_params(f: Formula, bindings: Mapping[str, float]) -> Formula:
    """Replace parameter variables by numeric constants throughout f."""

    def sub_t(t: Term) -> Term:
        if isinstance(t, Var) and t.name in bindings:
            value = float(bindings[t.name])
            return Const(value) if value >= 0 else Neg(Const(-value))
        if isinstance(t, (Const, Var)):
            return t
        if isinstance(t, Neg):
            return Neg(sub_t(t.arg))
        if isinstance(t, Add):
            return Add(sub_t(t.left), sub_t(t.right))
        if isinstance(t, Sub):
            return Sub(sub_t(t.left), sub_t(t.right))
        if isinstance(t, Mul):
            return Mul(sub_t(t.left), sub_t(t.right))
        if isinstance(t, Pow):
            return Pow(sub_t(t.base), t.exponent)
        raise TypeError(f"not a term: {t!r}")

    def sub_f(g: Formula) -> Formula:
        if isinstance(g, Cmp):
            return Cmp(sub_t(g.left), g.rel, sub_t(g.right))
        if isinstance(g, And):
            return And(sub_f(g.left), sub_f(g.right))
        if isinstance(g, Or):
            return Or(sub_f(g.left), sub_f(g.right))
        if isinstance(g, Implies):
            return Implies(sub_f(g.left), sub_f(g.right))
        if isinstance(g, Not):
            return Not(sub_f(g.arg))
        if isinstance(g, (TrueF, FalseF)):
            return g
        raise TypeError(f"cannot substitute into {type(g).__name__}")

    return sub_f(f)


def resynthesize_guards(
    template: GuardTable,
    new: ModelParams,
    safety_factor: float = 0.9,
) -> GuardTable:
    """Substitute re-estimated parameters into every guard as constants.

    Braking is scaled down by `safety_factor`, the conservative direction:
    assuming weaker brakes makes every guard harder to satisfy. Fallback
    and assignments are unchanged.
    """
    if not 0.0 < safety_factor <= 1.0:
        raise InvalidParams(f"safety_factor must be in (0, 1], got {safety_factor}")
    if new.brake_max <= 0 or new.accel_max < 0:
        raise InvalidParams(f"invalid re-estimated params {new}")
    bindings = {
        "A": new.accel_max,
        "b": safety_factor * new.brake_max,
        "eps": new.latency,
    }
    entries = [
        GuardEntry(e.action, e.assignments, substitute_params(e.guard, bindings))
        for e in template.entries
    ]
    return GuardTable(entries, template.fallback)
