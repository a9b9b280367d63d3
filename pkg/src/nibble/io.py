"""Hypergraph export formats and CSV helpers."""

import csv
import io
import re
import struct
from math import comb

import numpy as np

from nibble.engine import export_binary, export_text
from nibble.triples import rank

__all__ = ["export_text", "export_binary", "read_export", "MalformedExport",
           "write_csv", "fmt"]

_HEADER = re.compile(r"#.*\bN=(\d+)")


class MalformedExport(ValueError):
    pass


def _min_n_for_rank(r):
    n = 3
    while comb(n, 3) <= r:
        n += 1
    return n


def read_text(text, N=None):
    header_n = None
    ranks = []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _HEADER.match(s)
            if m and header_n is None:
                header_n = int(m.group(1))
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MalformedExport(f"line {lineno}: expected 'a b c', got {s!r}")
        try:
            t = tuple(int(p) for p in parts)
            r = rank(t)
        except ValueError as exc:
            raise MalformedExport(f"line {lineno}: {exc}") from None
        if r in seen:
            raise MalformedExport(f"line {lineno}: duplicate triple {t} (first on line {seen[r]})")
        seen[r] = lineno
        ranks.append(r)
    N = N if N is not None else header_n
    return ranks, N


def read_binary(data, N=None):
    if len(data) < 4:
        raise MalformedExport("binary export shorter than its length prefix")
    (count,) = struct.unpack_from("<I", data, 0)
    if len(data) != 4 + 4 * count:
        raise MalformedExport(f"length prefix says {count} ranks, payload holds "
                              f"{(len(data) - 4) / 4:g}")
    ranks = np.frombuffer(data, "<u4", count, 4).astype(np.int64)
    d = np.diff(ranks)
    if (d == 0).any():
        k = int(np.flatnonzero(d == 0)[0]) + 1
        raise MalformedExport(f"entry {k}: duplicate rank {int(ranks[k])}")
    if (d < 0).any():
        k = int(np.flatnonzero(d < 0)[0]) + 1
        raise MalformedExport(f"entry {k}: ranks are not sorted")
    return ranks.tolist(), N


def read_export(path, N=None):
    """Read a text or binary export; returns (sorted ranks, N)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if path.endswith(".bin"):
        ranks, N = read_binary(data, N)
    else:
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError:
            raise MalformedExport("text export is not ASCII") from None
        ranks, N = read_text(text, N)
    ranks = sorted(ranks)
    need = _min_n_for_rank(ranks[-1]) if ranks else 4
    if N is None:
        N = max(need, 4)
    elif ranks and need > N:
        raise MalformedExport(f"rank {ranks[-1]} needs N >= {need}, but N = {N}")
    return ranks, N


def fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
