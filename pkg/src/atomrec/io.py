"""Reading and writing matrices, atomic-set descriptors and experiment configs.

Matrices are CSV with one row per line, 17 significant digits and no header.
Configs are flat ``key = value`` text files; ``#`` starts a comment.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .atoms import CanonicalBasis, FiniteFrame, RankOneManifold, ring_frame
from .errors import ConfigError

__all__ = [
    "FLOAT_FMT",
    "format_float",
    "write_matrix_csv",
    "read_matrix_csv",
    "parse_array",
    "parse_set_spec",
    "set_spec_string",
    "read_key_values",
    "write_key_values",
]

FLOAT_FMT = "%.17g"


def format_float(x):
    return FLOAT_FMT % x


def write_matrix_csv(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    try:
        np.savetxt(path, M, fmt=FLOAT_FMT, delimiter=",")
    except OSError as exc:
        raise OSError(f"cannot write matrix to {path}: {exc}") from exc


def read_matrix_csv(path):
    if not os.path.exists(path):
        raise ConfigError(f"matrix file not found: {path}")
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"malformed matrix file {path}: {exc}") from exc
    if not np.all(np.isfinite(M)):
        raise ConfigError(f"matrix file {path} has non-finite entries")
    return M


def parse_array(text):
    """Inline array (``"3,-4"`` or ``"3,0;0,1"`` for rows) or the path of a CSV file."""
    text = text.strip()
    if os.path.exists(text):
        M = read_matrix_csv(text)
        return M.ravel() if M.shape[0] == 1 else M
    try:
        rows = [[float(v) for v in row.split(",") if v.strip()] for row in text.split(";")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse array {text!r}") from exc
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"ragged array {text!r}")
    M = np.array(rows)
    return M.ravel() if M.shape[0] == 1 else M


def parse_set_spec(spec, base_dir=None):
    """Build an atomic set from ``canonical:D``, ``rank1:N1xN2``, ``frame:ringK`` or ``frame:PATH``."""
    kind, _, arg = spec.strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "canonical":
            return CanonicalBasis(int(arg))
        if kind in ("rank1", "rank_one"):
            n1, n2 = re.split(r"[xX,]", arg)
            return RankOneManifold(int(n1), int(n2))
    except ValueError as exc:
        raise ConfigError(f"bad atomic set descriptor {spec!r}: {exc}") from exc
    if kind == "frame":
        m = re.fullmatch(r"ring(\d+)", arg)
        if m:
            return ring_frame(int(m.group(1)))
        path = arg if base_dir is None or os.path.isabs(arg) else os.path.join(base_dir, arg)
        try:
            return FiniteFrame(read_matrix_csv(path), source=arg)
        except ValueError as exc:
            raise ConfigError(f"invalid frame in {path}: {exc}") from exc
    raise ConfigError(f"unknown atomic set descriptor {spec!r}")


def set_spec_string(aset):
    cfg = aset.to_config()
    if cfg["kind"] == "canonical":
        return f"canonical:{cfg['dim']}"
    if cfg["kind"] == "rank_one":
        return f"rank1:{cfg['n1']}x{cfg['n2']}"
    src = cfg.get("atoms")
    if not src:
        raise ValueError("frame has no source descriptor; save its atoms to a CSV file first")
    return f"frame:{src}"


def read_key_values(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


def write_key_values(path, items):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v}\n")
