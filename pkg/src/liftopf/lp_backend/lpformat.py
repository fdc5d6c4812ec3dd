"""CPLEX LP-format text: writer and a reader for the same subset.

The writer always emits an explicit bound for every variable (LP format
defaults to ``[0, inf)`` otherwise), wraps long expressions and prints
floats with ``repr`` so that ``read_lp(write_lp(m))`` reproduces ``m``.
"""
from __future__ import annotations

import math
import re

import numpy as np

from .model import BINARY, CONTINUOUS, INTEGER, LPModel

_LINE = 200


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _expr(pairs, names) -> list[str]:
    toks = []
    for j, v in pairs:
        if v == 0:
            continue
        sign = "-" if v < 0 else "+"
        toks.append(f"{sign} {_num(abs(v))} {names[j]}")
    if not toks:
        toks = ["0 " + names[0]] if names else ["0"]
    return toks


def _wrap(head: str, toks: list[str], tail: str) -> list[str]:
    lines, cur = [], head
    for t in toks:
        if len(cur) + len(t) + 1 > _LINE:
            lines.append(cur)
            cur = "   "
        cur += " " + t
    if len(cur) + len(tail) + 1 > _LINE:
        lines.append(cur)
        cur = "   "
    lines.append(cur + (" " + tail if tail else ""))
    return lines


def _names(model: LPModel) -> list[str]:
    if model.names is not None:
        return list(model.names)
    return [f"x{j}" for j in range(model.num_vars)]


def write_lp(model: LPModel, path=None, comment: str = "") -> str:
    names = _names(model)
    rnames = model.row_names or [f"r{i}" for i in range(model.num_rows)]
    out = []
    if comment:
        out += [f"\\ {line}" for line in comment.splitlines()]
    out.append("Minimize")
    obj = [(j, v) for j, v in enumerate(model.c) if v != 0]
    toks = _expr(obj, names) if (obj or names) else ["0"]
    if model.obj_const:
        toks.append(f"{'-' if model.obj_const < 0 else '+'} {_num(abs(model.obj_const))}")
    out += _wrap(" obj:", toks, "")
    out.append("Subject To")
    A = model.A.tocsr()
    for i in range(model.num_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        pairs = list(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()))
        out += _wrap(f" {rnames[i]}:", _expr(pairs, names), f"{model.sense[i]} {_num(model.rhs[i])}")
    out.append("Bounds")
    for j, name in enumerate(names):
        lb, ub = model.lb[j], model.ub[j]
        if math.isinf(lb) and lb < 0 and math.isinf(ub) and ub > 0:
            out.append(f" {name} free")
        elif lb == ub:
            out.append(f" {name} = {_num(lb)}")
        else:
            out.append(f" {_num(lb)} <= {name} <= {_num(ub)}")
    gens = [names[j] for j in range(len(names)) if model.integrality[j] == INTEGER]
    bins = [names[j] for j in range(len(names)) if model.integrality[j] == BINARY]
    if gens:
        out.append("General")
        out += _wrap("", gens, "")
    if bins:
        out.append("Binary")
        out += _wrap("", bins, "")
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# ------------------------------------------------------------------ reader

_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "min": "obj", "minimum": "obj",
    "maximize": "max", "maximise": "max", "max": "max", "maximum": "max",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "general": "gen", "generals": "gen", "gen": "gen",
    "binary": "bin", "binaries": "bin", "bin": "bin",
    "end": "end",
}
_TOKEN = re.compile(
    r"(<=|>=|=<|=>|<|>|=|[+-]|:"
    r"|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?![\w.])"
    r"|[^\s<>=:+-]+)"
)


class LPFormatError(ValueError):
    pass


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _split_sections(text: str):
    sections = []
    current, buf = None, []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            if current is not None:
                sections.append((current, buf))
            current, buf = _SECTIONS[key], []
            if current == "end":
                break
            continue
        if current is None:
            raise LPFormatError(f"content before the objective section: {line!r}")
        buf.append(line)
    if current not in (None, "end"):
        sections.append((current, buf))
    return sections


def _parse_linear(tokens, i, var_index):
    """Parse ``[+-] [coef] name ...`` until a sense token or the end; return (terms, const, i)."""
    terms: dict[int, float] = {}
    const = 0.0
    sign, coef = 1.0, None
    while i < len(tokens) and tokens[i] not in ("<=", ">=", "=<", "=>", "<", ">", "="):
        t = tokens[i]
        if t in "+-":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = -1.0 if t == "-" else 1.0
        elif _is_number(t) and t.lower() not in ("inf", "infinity", "nan"):
            coef = float(t)
        else:
            j = var_index(t)
            terms[j] = terms.get(j, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
        i += 1
    if coef is not None:
        const += sign * coef
    return terms, const, i


def _bound_value(tok: str) -> float:
    low = tok.lower()
    if low in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if low in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


def read_lp(text: str) -> LPModel:
    names: list[str] = []
    index: dict[str, int] = {}

    def var_index(name):
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    c_terms, obj_const, maximize = {}, 0.0, False
    rows, row_names = [], []
    bounds: dict[str, list[float]] = {}
    kinds: dict[str, int] = {}

    for kind, lines in _split_sections(text):
        tokens = _TOKEN.findall(" ".join(lines))
        if kind in ("obj", "max"):
            maximize = kind == "max"
            if len(tokens) >= 2 and tokens[1] == ":":
                tokens = tokens[2:]
            c_terms, obj_const, _ = _parse_linear(tokens, 0, var_index)
        elif kind == "st":
            i = 0
            while i < len(tokens):
                name = None
                if i + 1 < len(tokens) and tokens[i + 1] == ":":
                    name, i = tokens[i], i + 2
                terms, const, i = _parse_linear(tokens, i, var_index)
                if i >= len(tokens):
                    raise LPFormatError(f"constraint {name!r} has no sense")
                sense = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(tokens[i], tokens[i])
                i += 1
                neg = 1.0
                if tokens[i] in "+-":
                    neg = -1.0 if tokens[i] == "-" else 1.0
                    i += 1
                rhs = neg * float(tokens[i]) - const
                i += 1
                rows.append((terms, sense, rhs))
                row_names.append(name or f"r{len(rows) - 1}")
        elif kind == "bounds":
            for line in lines:
                toks = _TOKEN.findall(line)
                toks = _merge_signs(toks)
                low = [t.lower() for t in toks]
                if len(toks) == 2 and low[1] == "free":
                    bounds[toks[0]] = [-math.inf, math.inf]
                    var_index(toks[0])
                elif len(toks) == 5:
                    lo, name, hi = _bound_value(toks[0]), toks[2], _bound_value(toks[4])
                    bounds[name] = [lo, hi]
                    var_index(name)
                elif len(toks) == 3:
                    if _is_number(toks[0]) or low[0] in ("-inf", "inf", "+inf"):
                        val, op, name = _bound_value(toks[0]), toks[1], toks[2]
                        op = {"<=": ">=", ">=": "<=", "=": "="}[op]
                    else:
                        name, op, val = toks[0], toks[1], _bound_value(toks[2])
                    var_index(name)
                    b = bounds.setdefault(name, [0.0, math.inf])
                    if op in ("<=", "=<", "<"):
                        b[1] = val
                    elif op in (">=", "=>", ">"):
                        b[0] = val
                    else:
                        b[0] = b[1] = val
                else:
                    raise LPFormatError(f"cannot parse bound line {line!r}")
        elif kind in ("gen", "bin"):
            for t in " ".join(lines).split():
                var_index(t)
                kinds[t] = INTEGER if kind == "gen" else BINARY

    # variable order follows the Bounds section when it lists every variable
    if bounds and set(bounds) == set(names):
        order = list(bounds)
        perm = [index[nm] for nm in order]
        remap = {old: new for new, old in enumerate(perm)}
        names = order
        index = {nm: j for j, nm in enumerate(names)}
        c_terms = {remap[j]: v for j, v in c_terms.items()}
        rows = [({remap[j]: v for j, v in t.items()}, s, r) for t, s, r in rows]
    n = len(names)
    c = np.zeros(n)
    for j, v in c_terms.items():
        c[j] = -v if maximize else v
    lb, ub = np.zeros(n), np.full(n, math.inf)
    integrality = np.zeros(n, dtype=int)
    for name, j in index.items():
        if kinds.get(name) == BINARY:
            lb[j], ub[j] = 0.0, 1.0
        if name in bounds:
            lb[j], ub[j] = bounds[name]
        integrality[j] = kinds.get(name, CONTINUOUS)
    return LPModel.from_rows(c, lb, ub, rows, names=names, row_names=row_names,
                             obj_const=-obj_const if maximize else obj_const,
                             integrality=integrality)


def _merge_signs(toks):
    """Join a leading sign with the following number (``- 5`` -> ``-5``, ``- inf`` -> ``-inf``)."""
    out, i = [], 0
    while i < len(toks):
        if toks[i] in "+-" and i + 1 < len(toks):
            out.append(toks[i] + toks[i + 1] if toks[i] == "-" else toks[i + 1])
            i += 2
        else:
            out.append(toks[i])
            i += 1
    return out
