"""Fixed-step RK4 integration of ODE nodes with evolution-domain handling.

The domain formula is checked after every step; on the first violation the
crossing is bracketed by bisection down to EVENT_TOL seconds and the flow
stops at the last domain-satisfying point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from .semantics import NonFiniteResult, State, compile_formula, compile_term
from .syntax import ODE

EVENT_TOL = 1e-9  # bisection tolerance on the domain-exit time, seconds
DEFAULT_STEP = 1e-3


class ExitReason(Enum):
    DURATION_REACHED = "duration_reached"
    DOMAIN_EXIT = "domain_exit"


@dataclass
class FlowResult:
    state: State
    elapsed: float
    reason: ExitReason
    trajectory: Optional[List[Tuple[float, State]]] = None


@dataclass
class _CompiledODE:
    names: Tuple[str, ...]
    derivs: Tuple[Callable, ...]
    domain: Callable


_cache: Dict[ODE, _CompiledODE] = {}


def _compiled(ode: ODE) -> _CompiledODE:
    c = _cache.get(ode)
    if c is None:
        c = _CompiledODE(
            names=tuple(v for v, _ in ode.equations),
            derivs=tuple(compile_term(rhs) for _, rhs in ode.equations),
            domain=compile_formula(ode.domain),
        )
        _cache[ode] = c
    return c


def _rk4_step(c: _CompiledODE, s: State, h: float) -> State:
    names = c.names
    y0 = [s[n] for n in names]

    k1 = [f(s) for f in c.derivs]
    mid = dict(s)
    for n, y, k in zip(names, y0, k1):
        mid[n] = y + 0.5 * h * k
    k2 = [f(mid) for f in c.derivs]
    for n, y, k in zip(names, y0, k2):
        mid[n] = y + 0.5 * h * k
    k3 = [f(mid) for f in c.derivs]
    for n, y, k in zip(names, y0, k3):
        mid[n] = y + h * k
    k4 = [f(mid) for f in c.derivs]

    out = dict(s)
    for i, n in enumerate(names):
        # (h * sum) / 6 rather than (h/6) * sum: keeps the update exact in
        # floating point for polynomial dynamics with dyadic step sizes
        out[n] = y0[i] + (h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])) / 6.0
        if not math.isfinite(out[n]):
            raise NonFiniteResult(f"integration produced {out[n]} for {n!r}")
    return out


def flow(
    ode: ODE,
    s: State,
    duration: float,
    step: float = DEFAULT_STEP,
    record: bool = False,
) -> FlowResult:
    """Flow `s` along `ode` for up to `duration` seconds.

    Returns a DOMAIN_EXIT result at the last domain-satisfying point if the
    evolution-domain constraint fails along the way (including immediately
    at t=0), otherwise a DURATION_REACHED result at `duration`.
    """
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")

    c = _compiled(ode)
    traj: Optional[List[Tuple[float, State]]] = [(0.0, dict(s))] if record else None

    if not c.domain(s):
        return FlowResult(dict(s), 0.0, ExitReason.DOMAIN_EXIT, traj)

    t = 0.0
    cur = dict(s)
    while t < duration - 1e-15:
        h = min(step, duration - t)
        nxt = _rk4_step(c, cur, h)
        if not c.domain(nxt):
            exit_state, dt = _bisect_exit(c, cur, h)
            t += dt
            if traj is not None:
                traj.append((t, dict(exit_state)))
            return FlowResult(exit_state, t, ExitReason.DOMAIN_EXIT, traj)
        cur = nxt
        t += h
        if traj is not None:
            traj.append((t, dict(cur)))
    return FlowResult(cur, min(t, duration), ExitReason.DURATION_REACHED, traj)


def _bisect_exit(c: _CompiledODE, good: State, h: float) -> Tuple[State, float]:
    """Bracket the domain crossing inside (0, h] from `good` to EVENT_TOL."""
    lo, hi = 0.0, h
    lo_state = good
    while hi - lo > EVENT_TOL:
        mid = 0.5 * (lo + hi)
        mid_state = _rk4_step(c, good, mid)
        if c.domain(mid_state):
            lo, lo_state = mid, mid_state
        else:
            hi = mid
    return lo_state, lo
