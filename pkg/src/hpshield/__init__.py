"""hpshield: hybrid-program parsing/execution, runtime safety shielding,
bounded falsification, pixel-to-symbol perception, and online guard
adaptation, with a CLI for batch experiments."""

from .parser import ParseError, parse_formula, parse_program, parse_term
from .printer import print_formula, print_program, print_term
from .semantics import eval_formula, eval_term, robustness
from .flow import FlowResult, ExitReason, flow
from .interp import RandomResolver, Resolver, ScriptedResolver, run
from .check import BoundedCheckConfig, Counterexample, NoCounterexampleFound, bounded_check
from .shield import (
    GuardEntry,
    GuardTable,
    ModelParams,
    TransitionRecord,
    apply_action,
    detect_mismatch,
    estimate_params,
    extract_guards,
    resynthesize_guards,
    shield_action,
)

__version__ = "0.1.0"
