"""Plain-text readers and writers for signals, RGB traces and key=value files.

Writers emit ``%.17g`` so every float round-trips bit-exactly and files are
byte-identical for identical inputs. Readers accept comma or whitespace
delimiters.
"""
from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .dsp import SampledSignal

_SPLIT = re.compile(r"[,\s]+")


def fmt(x):
    return "%.17g" % x


def atomic_write_text(path, text):
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_table(path):
    """Return (header, rows-as-string-lists). Comma or whitespace separated."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = [h for h in _SPLIT.split(lines[0]) if h]
    rows = [[c for c in _SPLIT.split(ln) if c != ""] for ln in lines[1:]]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise ValueError(f"{path}: row {i + 2} has {len(r)} fields, expected {len(header)}")
    return header, rows


def read_numeric_table(path, expected_header=None):
    header, rows = read_table(path)
    if expected_header is not None and header != list(expected_header):
        raise ValueError(f"{path}: header {header} != {list(expected_header)}")
    data = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    return header, data.reshape(len(rows), len(header))


def _rate_from_times(t):
    if t.size < 2:
        raise ValueError("need at least two samples to infer the sample rate")
    # rates are written as i/fs; rounding recovers the exact nominal rate
    return float(np.round((t.size - 1) / (t[-1] - t[0]), 6))


def write_signal_csv(path, s: SampledSignal):
    write_table(path, ["t_sec", "value"], zip(s.times, s.values))


def read_signal_csv(path) -> SampledSignal:
    _, data = read_numeric_table(path, ["t_sec", "value"])
    return SampledSignal(data[:, 1], _rate_from_times(data[:, 0]))


def write_rgb_csv(path, trace):
    t = np.arange(len(trace)) / trace.fps
    write_table(path, ["t_sec", "r", "g", "b"], zip(t, trace.r, trace.g, trace.b))


def read_rgb_csv(path):
    from .chrom import RgbTrace

    _, data = read_numeric_table(path, ["t_sec", "r", "g", "b"])
    return RgbTrace(data[:, 1], data[:, 2], data[:, 3], _rate_from_times(data[:, 0]))


def write_keyvalue(path, mapping):
    atomic_write_text(path, "".join(f"{k}={v}\n" for k, v in mapping.items()))


def read_keyvalue(path):
    out = {}
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            k, sep, v = ln.partition("=")
            if not sep:
                raise ValueError(f"{path}: malformed line {ln!r}")
            out[k.strip()] = v.strip()
    return out


WINDOW_KEYS = ["subject", "start_sample"]


def write_windows(path, subject_ids, starts, matrix):
    """One row per window: subject, start sample, then the samples."""
    matrix = np.asarray(matrix, dtype=np.float64)
    header = WINDOW_KEYS + [f"s{i:03d}" for i in range(matrix.shape[1])]
    rows = ([str(int(s)), str(int(st))] + [fmt(v) for v in row]
            for s, st, row in zip(subject_ids, starts, matrix))
    write_table(path, header, rows)


def read_windows(path):
    """Inverse of :func:`write_windows`: (subject_ids, starts, matrix)."""
    header, data = read_numeric_table(path)
    if header[:2] != WINDOW_KEYS:
        raise ValueError(f"{path}: not a window file")
    return data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2:]
