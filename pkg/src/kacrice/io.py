"""Reading matrices and penalty configurations from text files.

Matrices are delimiter-separated text: one row per line, ``.`` as decimal
separator, no header.  Commas, semicolons, tabs and runs of spaces are all
accepted as delimiters.

Penalty configurations are JSON objects::

    {"kind": "group", "groups": [[0, 1], [2, 3, 4]], "weights": [1.4, 1.7]}
    {"kind": "nuclear", "op_kind": "mask", "shape": [4, 3],
     "mask": [[0, 0], [1, 2], [3, 1]]}
"""

from __future__ import annotations

import csv
import json
import re

import numpy as np

from .errors import InputError
from .model import GroupLasso, IdentityOp, Lasso, MaskOp, MatMulOp, Nuclear

_SPLIT = re.compile(r"[,;\t ]+")


def read_matrix(path, ndmin: int = 2) -> np.ndarray:
    """Load a numeric matrix from delimiter-separated text."""
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as err:
        raise InputError(f"{path}: {err.strerror or err}") from err
    rows = [_SPLIT.split(ln) for ln in lines if ln and not ln.startswith("#")]
    if not rows:
        raise InputError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InputError(f"{path}: rows have differing lengths {sorted(widths)}")
    try:
        out = np.array([[float(v) for v in r] for r in rows])
    except ValueError as err:
        raise InputError(f"{path}: {err}") from err
    if ndmin == 1:
        if 1 not in out.shape:
            raise InputError(f"{path}: expected a vector, got shape {out.shape}")
        return out.ravel()
    return out


def read_vector(path) -> np.ndarray:
    return read_matrix(path, ndmin=1)


def penalty_from_config(cfg: dict, p: int | None = None):
    """Build ``(penalty, operator)`` from a parsed configuration.

    ``operator`` is ``None`` for the vector penalties.
    """
    kind = str(cfg.get("kind", "")).lower()
    if kind == "lasso":
        return Lasso(), None
    if kind == "group":
        if "groups" not in cfg:
            raise InputError("groups: required for kind 'group'")
        groups = tuple(np.asarray(g, dtype=int) for g in cfg["groups"])
        w = cfg.get("weights")
        w = [np.sqrt(len(g)) for g in groups] if w is None else w
        return GroupLasso(groups, np.asarray(w, dtype=float)), None
    if kind == "nuclear":
        if "shape" not in cfg:
            raise InputError("shape: required for kind 'nuclear'")
        shape = tuple(int(s) for s in cfg["shape"])
        op_kind = str(cfg.get("op_kind", "identity")).lower()
        if op_kind == "identity":
            op = IdentityOp()
        elif op_kind == "mask":
            op = MaskOp.from_pairs([tuple(ij) for ij in cfg.get("mask", [])], shape)
        elif op_kind == "matmul":
            if "design" not in cfg:
                raise InputError("design: required for op_kind 'matmul'")
            op = MatMulOp(np.asarray(cfg["design"], dtype=float))
        else:
            raise InputError(f"op_kind: unknown value {op_kind!r}")
        return Nuclear(shape), op
    raise InputError(f"kind: expected 'lasso', 'group' or 'nuclear', got {kind!r}")


def read_penalty_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise InputError(f"{path}: {err.strerror or err}") from err
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: invalid JSON ({err})") from err
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: expected a JSON object")
    return penalty_from_config(cfg)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
