""".hp model files: three labeled sections

    init: <formula>        // states the run may start from
    program: <program>     // one control cycle, implicitly iterated
    safe: <formula>        // must hold after every cycle

Sections may span multiple lines; `//` comments anywhere. The overall
claim is init -> [program*] safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .parser import ParseError, parse_formula, parse_program
from .printer import print_formula, print_program
from .shield import GuardTable
from .syntax import Choice, Formula, HybridProgram, Seq, SourceSpan, Test, TrueF


class ModelFileError(Exception):
    pass


@dataclass
class HPModel:
    init: Formula
    program: HybridProgram  # one loop iteration (the body of program*)
    safe: Formula


_SECTION_RE = re.compile(r"^\s*(init|program|safe)\s*:", re.MULTILINE)


def parse_model(text: str) -> HPModel:
    """Parse the three sections; raises ModelFileError or ParseError."""
    matches = list(_SECTION_RE.finditer(text))
    sections: Dict[str, str] = {}
    for i, m in enumerate(matches):
        name = m.group(1)
        if name in sections:
            raise ModelFileError(f"duplicate section {name!r}")
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections[name] = text[m.end() : end]
    missing = [s for s in ("init", "program", "safe") if s not in sections]
    if missing:
        raise ModelFileError(f"missing section(s): {', '.join(missing)}")
    return HPModel(
        init=parse_formula(sections["init"]),
        program=parse_program(sections["program"]),
        safe=parse_formula(sections["safe"]),
    )


def load_model(path: str) -> HPModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


def model_to_text(model: HPModel) -> str:
    return (
        f"init: {print_formula(model.init)}\n"
        f"program: {print_program(model.program)}\n"
        f"safe: {print_formula(model.safe)}\n"
    )


def guard_table_to_program(gt: GuardTable) -> HybridProgram:
    """Render a guard table back to a guarded-choice controller program.

    Each entry becomes `?guard; assignments...` (the test is omitted for a
    True guard), so the result reparses and re-extracts to the same table.
    """
    from .syntax import Assign

    branches: List[HybridProgram] = []
    for e in gt.entries:
        stmts: List[HybridProgram] = []
        if e.guard != TrueF():
            stmts.append(Test(e.guard))
        for var, term in e.assignments:
            stmts.append(Assign(var, term))
        if not stmts:
            stmts.append(Test(TrueF()))
        node = stmts[0]
        for s in stmts[1:]:
            node = Seq(node, s)
        branches.append(node)
    out = branches[0]
    for b in branches[1:]:
        out = Choice(out, b)
    return out
