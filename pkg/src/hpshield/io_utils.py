"""CSV / PGM output helpers. All files are written atomically
(temp file + rename) so interrupted runs never leave partial results.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from typing import Iterable, List, Sequence

import numpy as np

from .interp import ContinuousStep, DiscreteStep, TestFailure, Trace


def atomic_write_bytes(path: str, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def trace_to_csv(trace: Trace, path: str):
    """Columns: time, event_kind, then one column per state variable."""
    variables: List[str] = []
    for ev in trace.events:
        for name in ev.state:
            if name not in variables:
                variables.append(name)
    variables.sort()
    rows = []
    t = 0.0
    for ev in trace.events:
        if isinstance(ev, ContinuousStep):
            t += ev.duration
            kind = "continuous"
        elif isinstance(ev, DiscreteStep):
            kind = "discrete"
        elif isinstance(ev, TestFailure):
            kind = "test_failure"
        else:
            kind = type(ev).__name__
        rows.append([repr(t), kind] + [repr(ev.state.get(v, "")) for v in variables])
    write_csv(path, ["time", "event_kind"] + variables, rows)


def write_pgm(path: str, frame: np.ndarray):
    """Binary P5 portable graymap; intensities in [0,1] scale to 0..255."""
    arr = np.asarray(frame, dtype=float)
    if arr.ndim != 2:
        raise ValueError("frame must be 2-D")
    data = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + data.tobytes())


def read_pgm(path: str) -> np.ndarray:
    """Read a binary P5 graymap back to intensities in [0,1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields: List[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM: magic {fields[0]!r}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return raster.reshape(height, width).astype(float) / maxval
