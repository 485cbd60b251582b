"""Bounded falsification of [program] postcondition claims.

All nondeterminism is resolved over finite, user-supplied sets: Choice
branches are enumerated exhaustively, x := * draws from an explicit sample
set, ODE dwell times come from a finite menu, and loops unroll up to a
depth bound. Within those bounds the search is exhaustive, so a
NoCounterexampleFound verdict means exactly "no counterexample at this
resolution", and every Counterexample replays through `run` to a state
falsifying the postcondition.

States reached more than once (compared after rounding to `memo_decimals`)
are expanded only once, which keeps the search finite on contracting
dynamics without affecting which terminal states get checked.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .flow import flow
from .interp import ScriptedResolver, Trace, run
from .semantics import State, compile_formula, eval_formula, eval_term
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

Decision = Tuple[str, float]


class BudgetExceeded(Exception):
    def __init__(self, budget: int):
        super().__init__(f"bounded check exceeded its node budget of {budget}")
        self.budget = budget


class CheckConfigError(Exception):
    pass


@dataclass
class BoundedCheckConfig:
    init_states: Sequence[State]
    loop_depth: int = 10
    dwell_times: Tuple[float, ...] = (1.0,)
    any_samples: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    budget: int = 10_000_000
    ode_step: float = 0.01
    memo_decimals: int = 9
    # Project memoization keys onto these variables (None: all). Only sound
    # when the omitted variables are dead across loop iterations (always
    # rewritten before being read), e.g. a clock that is reset every cycle.
    memo_vars: Optional[Tuple[str, ...]] = None


@dataclass
class NoCounterexampleFound:
    config: BoundedCheckConfig
    states_checked: int


@dataclass
class Counterexample:
    initial_state: State
    decisions: Tuple[Decision, ...]
    final_state: State
    trace: Trace


Verdict = Union[NoCounterexampleFound, Counterexample]


def _state_key(s: State, decimals: int, vars: Optional[Tuple[str, ...]] = None):
    if vars is not None:
        return tuple((k, round(s[k], decimals)) for k in vars)
    return tuple(sorted((k, round(v, decimals)) for k, v in s.items()))


class _Enumerator:
    def __init__(self, cfg: BoundedCheckConfig):
        self.cfg = cfg
        self.count = 0
        # per loop-occurrence visited state keys (id() is stable while the
        # program tree is alive)
        self.loop_visited: Dict[int, set] = {}

    def _tick(self):
        self.count += 1
        if self.count > self.cfg.budget:
            raise BudgetExceeded(self.cfg.budget)

    def enum(
        self, p: HybridProgram, s: State, decisions: Tuple[Decision, ...]
    ) -> Iterator[Tuple[State, Tuple[Decision, ...]]]:
        """Yield (terminal state, decision script) for every completed run."""
        self._tick()
        if isinstance(p, Assign):
            s2 = dict(s)
            s2[p.var] = eval_term(p.term, s)
            yield s2, decisions
        elif isinstance(p, AssignAny):
            samples = self.cfg.any_samples.get(p.var)
            if not samples:
                raise CheckConfigError(f"no sample set configured for {p.var!r} := *")
            for v in samples:
                s2 = dict(s)
                s2[p.var] = float(v)
                yield s2, decisions + (("any", float(v)),)
        elif isinstance(p, Test):
            if eval_formula(p.formula, s):
                yield s, decisions
        elif isinstance(p, Seq):
            for mid, d1 in self.enum(p.first, s, decisions):
                yield from self.enum(p.second, mid, d1)
        elif isinstance(p, Choice):
            for idx, branch in ((0, p.left), (1, p.right)):
                yield from self.enum(branch, s, decisions + (("choice", idx),))
        elif isinstance(p, ODE):
            for dwell in self.cfg.dwell_times:
                res = flow(p, s, dwell, step=self.cfg.ode_step)
                yield res.state, decisions + (("ode", dwell),)
        elif isinstance(p, Loop):
            yield from self._enum_loop(p, s, decisions)
        else:
            raise TypeError(f"not a program: {p!r}")

    def _enum_loop(self, p: Loop, s: State, decisions):
        visited = self.loop_visited.setdefault(id(p), set())
        key = _state_key(s, self.cfg.memo_decimals, self.cfg.memo_vars)
        if key in visited:
            return
        visited.add(key)
        # breadth-first over iteration count so shallow violations surface first
        frontier = deque([(s, decisions, 0)])
        while frontier:
            cur, d, depth = frontier.popleft()
            yield cur, d + (("choice", 0),)  # stop here
            if depth >= self.cfg.loop_depth:
                continue
            for nxt, d2 in self.enum(p.body, cur, d + (("choice", 1),)):
                k = _state_key(nxt, self.cfg.memo_decimals, self.cfg.memo_vars)
                if k in visited:
                    continue
                visited.add(k)
                frontier.append((nxt, d2, depth + 1))


def bounded_check(p: HybridProgram, post: Formula, cfg: BoundedCheckConfig) -> Verdict:
    """Search for an execution of p ending in a state falsifying post."""
    post_fn = compile_formula(post)
    en = _Enumerator(cfg)
    checked = set()
    for init in cfg.init_states:
        for terminal, decisions in en.enum(p, dict(init), ()):
            key = _state_key(terminal, cfg.memo_decimals, cfg.memo_vars)
            if key in checked:
                continue
            checked.add(key)
            if not post_fn(terminal):
                outcome, trace = run(
                    p, dict(init), ScriptedResolver(decisions, ode_step=cfg.ode_step)
                )
                final = outcome.state if outcome.state is not None else terminal
                return Counterexample(dict(init), decisions, final, trace)
    return NoCounterexampleFound(cfg, len(checked))
