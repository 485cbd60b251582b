"""Execution of hybrid programs with resolved nondeterminism.

A Resolver answers the three nondeterministic queries: which Choice branch
to take (a Loop is asked as a two-way choice before every iteration,
0 = stop, 1 = iterate), what value an x := * takes, and how long an ODE
may dwell (the flow is still clipped by its evolution domain).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .flow import DEFAULT_STEP, flow
from .semantics import State, eval_formula, eval_term
from .syntax import (
    ODE,
    Assign,
    AssignAny,
    Choice,
    Formula,
    HybridProgram,
    Loop,
    Seq,
    Test,
)


class Resolver:
    """Strategy interface for resolving nondeterminism during execution."""

    ode_step: float = DEFAULT_STEP

    def choose(self, count: int, context) -> int:
        raise NotImplementedError

    def sample_any(self, var: str, context) -> float:
        raise NotImplementedError

    def duration(self, context) -> float:
        raise NotImplementedError


class RandomResolver(Resolver):
    """Seeded random resolution; loops stop with probability `stop_prob`."""

    def __init__(self, seed: int, any_range=(-1.0, 1.0), max_dwell: float = 1.0,
                 stop_prob: float = 0.3, ode_step: float = DEFAULT_STEP):
        self.rng = np.random.default_rng(seed)
        self.any_range = any_range
        self.max_dwell = max_dwell
        self.stop_prob = stop_prob
        self.ode_step = ode_step

    def choose(self, count: int, context) -> int:
        if isinstance(context, Loop):
            return 0 if self.rng.random() < self.stop_prob else 1
        return int(self.rng.integers(count))

    def sample_any(self, var: str, context) -> float:
        lo, hi = self.any_range
        return float(self.rng.uniform(lo, hi))

    def duration(self, context) -> float:
        return float(self.rng.uniform(0.0, self.max_dwell))


class ScriptedResolver(Resolver):
    """Replays a recorded decision script, in consultation order.

    The script is a sequence of tagged decisions: ("choice", i),
    ("any", value), ("ode", dwell). Used to replay counterexample traces.
    """

    def __init__(self, script: Sequence[Tuple[str, float]], ode_step: float = DEFAULT_STEP):
        self.script = list(script)
        self.pos = 0
        self.ode_step = ode_step

    def _next(self, tag: str):
        if self.pos >= len(self.script):
            raise ValueError(f"script exhausted; wanted a {tag!r} decision")
        got_tag, value = self.script[self.pos]
        if got_tag != tag:
            raise ValueError(f"script mismatch at {self.pos}: wanted {tag!r}, have {got_tag!r}")
        self.pos += 1
        return value

    def choose(self, count: int, context) -> int:
        idx = int(self._next("choice"))
        if not 0 <= idx < count:
            raise ValueError(f"scripted branch {idx} out of range 0..{count - 1}")
        return idx

    def sample_any(self, var: str, context) -> float:
        return float(self._next("any"))

    def duration(self, context) -> float:
        return float(self._next("ode"))


# -- traces -----------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteStep:
    description: str
    state: State


@dataclass(frozen=True)
class ContinuousStep:
    duration: float
    state: State


@dataclass(frozen=True)
class TestFailure:
    formula: Formula
    state: State


TraceEvent = Union[DiscreteStep, ContinuousStep, TestFailure]


@dataclass
class Trace:
    events: List[TraceEvent] = field(default_factory=list)

    def total_time(self) -> float:
        return sum(e.duration for e in self.events if isinstance(e, ContinuousStep))


class OutcomeKind(Enum):
    COMPLETED = "completed"
    ABORTED = "aborted"


@dataclass
class Outcome:
    kind: OutcomeKind
    state: Optional[State] = None
    failure: Optional[TestFailure] = None


def run(p: HybridProgram, s: State, r: Resolver) -> Tuple[Outcome, Trace]:
    """Execute p from s with nondeterminism resolved by r."""
    trace = Trace()
    final = _run(p, dict(s), r, trace)
    if final is None:
        failure = trace.events[-1] if trace.events and isinstance(trace.events[-1], TestFailure) else None
        return Outcome(OutcomeKind.ABORTED, failure=failure), trace
    return Outcome(OutcomeKind.COMPLETED, state=final), trace


def _run(p: HybridProgram, s: State, r: Resolver, trace: Trace) -> Optional[State]:
    if isinstance(p, Assign):
        s = dict(s)
        s[p.var] = eval_term(p.term, s)
        trace.events.append(DiscreteStep(f"{p.var} := {s[p.var]}", dict(s)))
        return s
    if isinstance(p, AssignAny):
        v = float(r.sample_any(p.var, p))
        if not math.isfinite(v):
            raise ValueError(f"resolver sampled non-finite value for {p.var!r}")
        s = dict(s)
        s[p.var] = v
        trace.events.append(DiscreteStep(f"{p.var} := * ({v})", dict(s)))
        return s
    if isinstance(p, Test):
        if eval_formula(p.formula, s):
            return s
        trace.events.append(TestFailure(p.formula, dict(s)))
        return None
    if isinstance(p, Seq):
        mid = _run(p.first, s, r, trace)
        if mid is None:
            return None
        return _run(p.second, mid, r, trace)
    if isinstance(p, Choice):
        idx = r.choose(2, p)
        if not 0 <= idx < 2:
            raise ValueError(f"resolver chose branch {idx} of 2")
        return _run(p.left if idx == 0 else p.right, s, r, trace)
    if isinstance(p, Loop):
        while True:
            idx = r.choose(2, p)
            if idx == 0:
                return s
            if idx != 1:
                raise ValueError(f"resolver chose branch {idx} of 2")
            s2 = _run(p.body, s, r, trace)
            if s2 is None:
                return None
            s = s2
    if isinstance(p, ODE):
        dwell = float(r.duration(p))
        if dwell < 0 or not math.isfinite(dwell):
            raise ValueError(f"resolver returned invalid dwell {dwell}")
        res = flow(p, s, dwell, step=r.ode_step)
        trace.events.append(ContinuousStep(res.elapsed, dict(res.state)))
        return res.state
    raise TypeError(f"not a program: {p!r}")
