"""Built-in stop-sign car model: a car at position x with velocity v may
accelerate (at most A) or brake (at b), decides at most every eps seconds,
and must never pass the stop position m.

The controller is a guarded choice: braking is always allowed; accelerating
requires enough stopping distance to absorb the acceleration itself plus one
full reaction interval. The weak variant drops the reaction term from the
guard and is intentionally unsafe; it exists as a falsification target.
"""

from __future__ import annotations

from .parser import parse_formula, parse_program
from .shield import GuardTable, extract_guards
from .syntax import HybridProgram, ODE, Formula

GUARD_TEXT = "2*b*(m - x) >= v^2 + (A + b)*(A*eps^2 + 2*eps*v)"
WEAK_GUARD_TEXT = "2*b*(m - x) >= v^2"

CTRL_TEXT = "{a := -b ++ ?%s; a := A}" % GUARD_TEXT
WEAK_CTRL_TEXT = "{a := -b ++ ?%s; a := A}" % WEAK_GUARD_TEXT

ODE_TEXT = "{x' = v, v' = a, t' = 1 & v >= 0 & t <= eps}"
INIT_TEXT = "v^2 <= 2*b*(m - x) & v >= 0 & A >= 0 & b > 0"
SAFE_TEXT = "x <= m"

ACTIONS = ("brake", "accel")
FALLBACK = "brake"


def controller(weak: bool = False) -> HybridProgram:
    return parse_program(WEAK_CTRL_TEXT if weak else CTRL_TEXT)


def plant() -> ODE:
    ode = parse_program(ODE_TEXT)
    assert isinstance(ode, ODE)
    return ode


def loop_body(weak: bool = False) -> HybridProgram:
    """One control cycle: controller, clock reset, continuous evolution."""
    ctrl = WEAK_CTRL_TEXT if weak else CTRL_TEXT
    return parse_program(f"{ctrl}; t := 0; {ODE_TEXT}")


def init_formula() -> Formula:
    return parse_formula(INIT_TEXT)


def safe_formula() -> Formula:
    return parse_formula(SAFE_TEXT)


def guard_table(weak: bool = False) -> GuardTable:
    return extract_guards(controller(weak), FALLBACK, labels=ACTIONS)


def model_text(weak: bool = False) -> str:
    """The model in .hp file syntax (init / program / safe sections)."""
    ctrl = WEAK_CTRL_TEXT if weak else CTRL_TEXT
    return (
        "// car approaching a stop sign; the program section is one control\n"
        "// cycle and is implicitly iterated\n"
        f"init: {INIT_TEXT}\n"
        f"program: {ctrl}; t := 0; {ODE_TEXT}\n"
        f"safe: {SAFE_TEXT}\n"
    )
