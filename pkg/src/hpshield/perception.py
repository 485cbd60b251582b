"""Template matching over intensity frames and pixel-to-symbol calibration.

Matching maximizes zero-normalized cross-correlation (ZNCC), which yields a
position plus a quality score in [-1, 1]; detections below a template's
quality threshold are dropped, and a missing *required* object is reported
as a PerceptionFailure value (never an exception) so the caller can fail
toward its fallback action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Frame = np.ndarray

_VAR_FLOOR = 1e-12


class PerceptionError(Exception):
    pass


class DegenerateWindow(PerceptionError):
    """Every frame window under the patch has zero variance (uniform frame)."""


@dataclass
class Template:
    label: str
    patch: np.ndarray
    quality: float = 0.8
    required: bool = True

    def __post_init__(self):
        self.patch = np.asarray(self.patch, dtype=float)
        if self.patch.ndim != 2 or min(self.patch.shape) < 1:
            raise ValueError("patch must be a 2-D array")
        if float(self.patch.var()) <= _VAR_FLOOR:
            raise ValueError(f"template {self.label!r} patch is constant")
        if not 0.0 < self.quality <= 1.0:
            raise ValueError(f"quality must be in (0, 1], got {self.quality}")


@dataclass(frozen=True)
class Match:
    label: str
    row: int
    col: int
    score: float


@dataclass(frozen=True)
class AffineCoord:
    """Symbolic variable derived from one pixel coordinate: var = scale*coord + offset."""

    var: str
    coord: str  # "row" or "col"
    scale: float
    offset: float = 0.0

    def __post_init__(self):
        if self.coord not in ("row", "col"):
            raise ValueError(f"coord must be 'row' or 'col', got {self.coord!r}")
        if self.scale == 0:
            raise ValueError("scale must be nonzero")


SymbolMap = Dict[str, Tuple[AffineCoord, ...]]


@dataclass(frozen=True)
class PerceptionFailure:
    label: str


def _score_map(f: Frame, patch: np.ndarray) -> np.ndarray:
    """ZNCC of patch against every window; zero-variance windows score -2."""
    f = np.asarray(f, dtype=float)
    if patch.shape[0] > f.shape[0] or patch.shape[1] > f.shape[1]:
        raise ValueError("template larger than frame")
    win = sliding_window_view(f, patch.shape)
    n = patch.size
    p0 = patch - patch.mean()
    pnorm = float(np.sqrt((p0**2).sum()))
    wsum = win.sum(axis=(2, 3))
    wsq = (win**2).sum(axis=(2, 3))
    wvar = wsq - wsum**2 / n
    num = np.tensordot(win, p0, axes=([2, 3], [0, 1]))
    valid = wvar > _VAR_FLOOR
    if not valid.any():
        raise DegenerateWindow("no frame window has nonzero variance")
    scores = np.full(wvar.shape, -2.0)
    scores[valid] = num[valid] / (np.sqrt(wvar[valid]) * pnorm)
    np.clip(scores, -2.0, 1.0, out=scores)
    return scores


def match_template(f: Frame, t: Template) -> Match:
    """Best-scoring position; ties break to the smallest (row, col)."""
    scores = _score_map(f, t.patch)
    idx = int(np.argmax(scores))  # row-major argmax = lexicographic tie-break
    r, c = divmod(idx, scores.shape[1])
    return Match(t.label, r, c, float(scores[r, c]))


def match_all(f: Frame, t: Template, quality: float = None) -> List[Match]:
    """All detections with score >= quality after greedy non-max suppression.

    Suppression radius equals the patch size: a candidate overlapping an
    already-accepted detection is dropped. Result is sorted by descending
    score (ties by position).
    """
    q = t.quality if quality is None else quality
    scores = _score_map(f, t.patch)
    rs, cs = np.nonzero(scores >= q)
    order = sorted(range(len(rs)), key=lambda i: (-scores[rs[i], cs[i]], rs[i], cs[i]))
    h, w = t.patch.shape
    accepted: List[Match] = []
    for i in order:
        r, c = int(rs[i]), int(cs[i])
        if any(abs(m.row - r) < h and abs(m.col - c) < w for m in accepted):
            continue
        accepted.append(Match(t.label, r, c, float(scores[r, c])))
    return accepted


def extract_symbols(
    f: Frame,
    templates: Sequence[Template],
    symbol_map: SymbolMap,
) -> Union[Dict[str, float], PerceptionFailure]:
    """Match every template and map the best detections to symbolic variables.

    Returns a state dict, or a PerceptionFailure naming the first required
    object class with no acceptable match (a uniform frame counts as a
    failure of every required class).
    """
    out: Dict[str, float] = {}
    for t in templates:
        try:
            matches = match_all(f, t)
        except DegenerateWindow:
            matches = []
        if not matches:
            if t.required:
                return PerceptionFailure(t.label)
            continue
        best = matches[0]
        for am in symbol_map.get(t.label, ()):
            coord = best.row if am.coord == "row" else best.col
            out[am.var] = am.scale * coord + am.offset
    return out
