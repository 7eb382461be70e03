"""CPLEX-style LP text export and a reader for the subset we write.

Coefficients are written with ``repr`` so that a round trip reproduces the
matrix bit for bit.  Output is deterministic for identical inputs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

LINE_WIDTH = 78


def _terms(coeffs, names) -> list[str]:
    out = []
    for k in np.flatnonzero(coeffs):
        v = float(coeffs[k])
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        out.append(f"{sign} {names[k]}" if mag == 1.0 else f"{sign} {mag!r} {names[k]}")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(head: str, tokens: list[str]) -> list[str]:
    lines, cur = [], head
    for tok in tokens:
        if len(cur) + 1 + len(tok) > LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def lp_text(lp) -> str:
    lines = [f"\\ factor-revealing LP, Q={lp.Q} M={lp.M}", "Maximize"]
    lines += _wrap(" obj:", _terms(lp.c, lp.var_names) or ["0"])
    lines.append("Subject To")
    for i, name in enumerate(lp.row_names):
        terms = _terms(lp.A[i], lp.var_names) or [f"0 {lp.var_names[0]}"]
        lines += _wrap(f" {name}:", terms + ["<=", repr(float(lp.b[i]))])
    lines.append("Bounds")
    for v in lp.var_names:
        lines.append(f" {v} >= 0")
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(lp, path) -> None:
    with open(path, "w") as fh:
        fh.write(lp_text(lp))


@dataclass
class ParsedLP:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    row_names: list[str]
    var_names: list[str]
    sense: str


class LPParseError(ValueError):
    pass


_TERM = re.compile(r"([+-])?\s*(\d[\d.eE+-]*)?\s*([A-Za-z_][\w]*)")


def _parse_expr(text: str, lineno: int) -> dict[str, float]:
    out: dict[str, float] = {}
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise LPParseError(f"line {lineno}: cannot parse {text[pos:pos + 20]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        out[m.group(3)] = out.get(m.group(3), 0.0) + sign * coef
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def read_lp(path) -> ParsedLP:
    with open(path) as fh:
        raw = fh.read().splitlines()
    section = None
    sense = None
    statements: list[tuple[str, int]] = []
    obj = None
    bounds: list[str] = []
    for lineno, line in enumerate(raw, 1):
        s = line.split("\\", 1)[0].rstrip()
        if not s.strip():
            continue
        key = s.strip().lower()
        if key in ("maximize", "minimize", "maximise", "minimise", "max", "min"):
            section, sense = "obj", "max" if key.startswith("max") else "min"
            continue
        if key in ("subject to", "such that", "st", "s.t."):
            section = "rows"
            continue
        if key == "bounds":
            section = "bounds"
            continue
        if key == "end":
            break
        if section == "bounds":
            bounds.append(s.strip())
        elif section in ("obj", "rows"):
            if line.startswith("   ") and statements:
                text, start = statements[-1]
                statements[-1] = (text + " " + s.strip(), start)
            else:
                statements.append((s.strip(), lineno))
            if section == "obj" and obj is None:
                obj = len(statements) - 1
        else:
            raise LPParseError(f"line {lineno}: text outside any section")
    if sense is None or obj is None:
        raise LPParseError("missing objective section")
    rows = []
    for text, lineno in statements:
        if ":" not in text:
            raise LPParseError(f"line {lineno}: statement without a name")
        name, body = text.split(":", 1)
        rows.append((name.strip(), body, lineno))
    _, obj_body, obj_line = rows[obj]
    c_map = _parse_expr(obj_body, obj_line) if obj_body.strip() != "0" else {}
    cons = []
    for name, body, lineno in rows[obj + 1:]:
        m = re.match(r"(.*)<=\s*(\S+)\s*$", body)
        if not m:
            raise LPParseError(f"line {lineno}: only '<=' rows are supported")
        cons.append((name, _parse_expr(m.group(1), lineno), float(m.group(2))))
    var_names = [b.split()[0] for b in bounds if b.endswith(">= 0")]
    seen = set(var_names)
    for _, expr, _ in cons:
        for v in expr:
            if v not in seen:
                seen.add(v)
                var_names.append(v)
    col = {v: k for k, v in enumerate(var_names)}
    c = np.zeros(len(var_names))
    for v, a in c_map.items():
        c[col[v]] = a
    A = np.zeros((len(cons), len(var_names)))
    b = np.zeros(len(cons))
    for i, (_, expr, rhs) in enumerate(cons):
        for v, a in expr.items():
            A[i, col[v]] = a
        b[i] = rhs
    return ParsedLP(c, A, b, [n for n, _, _ in cons], var_names, sense)
