"""CPLEX-LP-format export and import.

Sections are emitted in the fixed order Minimize / Subject To / Bounds /
Binaries / End; the importer accepts exactly that dialect (plus Maximize for
externally produced files) and round-trips everything export_lp writes.
Variable names are sanitized to [A-Za-z0-9_] with a leading letter.
"""

from __future__ import annotations

import re

import numpy as np

from ..errors import ModelMalformed, QuerySyntaxError
from .model import INF, MilpModel, SolverConfig, VarKind

_NAME_OK = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def sanitize_name(name: str, taken: set[str]) -> str:
    clean = re.sub(r"[^A-Za-z0-9_]", "_", name)
    if not clean or not re.match(r"^[A-Za-z_]", clean) or clean[0] in "eE":
        clean = "v_" + clean
    base = clean
    k = 2
    while clean in taken:
        clean = f"{base}_{k}"
        k += 1
    taken.add(clean)
    return clean


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    # positional notation only: the expression tokenizer splits on +/- signs,
    # so exponents like 1e-05 must never appear
    return np.format_float_positional(x, trim="-")


def export_lp(model: MilpModel) -> str:
    taken: set[str] = set()
    names = {v.id: sanitize_name(v.name, taken) for v in model.vars}
    used = {vid for _, vid in model.objective}
    for c in model.constraints:
        used |= {vid for _, vid in c.terms}

    out = ["\\ written by qfix", "Minimize"]
    out.append(" obj: " + (_terms_str(model.objective, names) or "0 " + _any_name(model, names)))
    out.append("Subject To")
    for i, c in enumerate(model.constraints):
        out.append(f" c{i}: {_terms_str(c.terms, names)} {c.op} {_num(c.rhs)}")
    out.append("Bounds")
    for v in model.vars:
        name = names[v.id]
        if v.lo == -INF and v.hi == INF:
            out.append(f" {name} free")
        elif v.hi == INF:
            out.append(f" {name} >= {_num(v.lo)}")
        elif v.lo == -INF:
            out.append(f" {name} <= {_num(v.hi)}")
        else:
            out.append(f" {_num(v.lo)} <= {name} <= {_num(v.hi)}")
    binaries = [names[v.id] for v in model.vars if v.kind is VarKind.BINARY]
    if binaries:
        out.append("Binaries")
        for i in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[i : i + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def _any_name(model, names) -> str:
    if not model.vars:
        raise ModelMalformed("cannot export a model with no variables")
    return names[model.vars[0].id]


def _terms_str(terms, names) -> str:
    parts = []
    for coeff, vid in terms:
        sign = "-" if coeff < 0 else "+"
        mag = abs(coeff)
        parts.append(f"{sign} {_num(mag)} {names[vid]}")
    if not parts:
        return ""
    joined = " ".join(parts)
    return joined[2:] if joined.startswith("+ ") else joined


_SECTIONS = ("minimize", "maximize", "subject to", "bounds", "binaries", "end")


def import_lp(text: str, config: SolverConfig | None = None) -> MilpModel:
    """Parse a CPLEX-LP file in the dialect written by export_lp."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if line.strip():
            lines.append(line.strip())

    sections: list[tuple[str, list[str]]] = []
    i = 0
    while i < len(lines):
        low = lines[i].lower()
        if low == "subject" and i + 1 < len(lines) and lines[i + 1].lower() == "to":
            low, skip = "subject to", 2
        else:
            skip = 1
        name = None
        for s in _SECTIONS:
            if low == s or low.startswith(s + " "):
                name = s
                break
        if name is None:
            if not sections:
                raise QuerySyntaxError(f"LP file must start with a section, found {lines[i]!r}")
            sections[-1][1].append(lines[i])
            i += 1
            continue
        rest = lines[i][len(name):].strip()
        sections.append((name, [rest] if rest else []))
        i += skip

    order = [s for s, _ in sections]
    expected_heads = ("minimize", "maximize")
    if not order or order[0] not in expected_heads or order[-1] != "end":
        raise QuerySyntaxError(f"bad LP section order: {order}")
    allowed = ["subject to", "bounds", "binaries", "end"]
    pos = 0
    for s in order[1:]:
        while pos < len(allowed) and allowed[pos] != s:
            pos += 1
        if pos >= len(allowed):
            raise QuerySyntaxError(f"bad LP section order: {order}")

    body = dict(sections)
    sense = 1.0 if order[0] == "minimize" else -1.0

    vars_seen: dict[str, dict] = {}

    def var(name: str):
        return vars_seen.setdefault(name, {"lo": 0.0, "hi": INF, "bin": False})

    obj_terms = _parse_expr(" ".join(body.get(order[0], [])), var, strip_label=True)
    constraints = []
    for ln in _joined_rows(body.get("subject to", [])):
        m = re.match(r"^(.*?)(<=|>=|=)\s*([-+]?[\d.eE+-]+)\s*$", ln)
        if not m:
            raise QuerySyntaxError(f"bad constraint row: {ln!r}")
        terms = _parse_expr(m.group(1), var, strip_label=True)
        constraints.append((terms, m.group(2), float(m.group(3))))

    for ln in body.get("bounds", []):
        _parse_bound(ln, var)
    for ln in body.get("binaries", []):
        for name in ln.split():
            v = var(name)
            v["bin"] = True
            v["lo"] = max(v["lo"], 0.0)
            v["hi"] = min(v["hi"], 1.0)

    model = MilpModel(config or SolverConfig())
    refs = {}
    for name, meta in vars_seen.items():
        refs[name] = model.add_var(
            name, VarKind.BINARY if meta["bin"] else VarKind.CONTINUOUS, meta["lo"], meta["hi"]
        )
    model.set_objective([(sense * c, refs[nm]) for c, nm in obj_terms])
    for terms, op, rhs in constraints:
        model.add_constraint([(c, refs[nm]) for c, nm in terms], op, rhs, "imported")
    return model


def _joined_rows(lines: list[str]) -> list[str]:
    """Constraint rows may wrap; a row ends where a comparison+rhs appears."""
    rows, acc = [], ""
    for ln in lines:
        acc = (acc + " " + ln).strip()
        if re.search(r"(<=|>=|=)\s*[-+]?[\d.eE+-]+\s*$", acc):
            rows.append(acc)
            acc = ""
    if acc:
        raise QuerySyntaxError(f"dangling constraint text: {acc!r}")
    return rows


def _parse_expr(text: str, var, strip_label=False):
    text = text.strip()
    if strip_label:
        m = re.match(r"^[A-Za-z_][A-Za-z0-9_]*\s*:", text)
        if m:
            text = text[m.end():].strip()
    tokens = text.replace("+", " + ").replace("-", " - ").split()
    terms = []
    sign = 1.0
    coeff = None
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            pass
        elif tok == "-":
            sign = -sign
        elif _is_number(tok):
            if coeff is not None:
                raise QuerySyntaxError(f"two consecutive numbers in expression: {text!r}")
            coeff = float(tok)
        elif _NAME_OK.match(tok):
            c = sign * (1.0 if coeff is None else coeff)
            terms.append((c, tok))
            var(tok)
            sign, coeff = 1.0, None
        else:
            raise QuerySyntaxError(f"bad token {tok!r} in expression {text!r}")
        i += 1
    if coeff is not None:
        raise QuerySyntaxError(f"dangling coefficient in expression {text!r}")
    return terms


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _parse_bound(line: str, var):
    m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s+free$", line, re.I)
    if m:
        v = var(m.group(1))
        v["lo"], v["hi"] = -INF, INF
        return
    m = re.match(r"^([-+]?[\d.eE+-]+)\s*<=\s*([A-Za-z_][A-Za-z0-9_]*)\s*<=\s*([-+]?[\d.eE+-]+)$", line)
    if m:
        v = var(m.group(2))
        v["lo"], v["hi"] = float(m.group(1)), float(m.group(3))
        return
    m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(<=|>=)\s*([-+]?[\d.eE+-]+)$", line)
    if m:
        v = var(m.group(1))
        if m.group(2) == "<=":
            v["hi"] = float(m.group(3))
            v["lo"] = -INF
        else:
            v["lo"] = float(m.group(3))
            v["hi"] = INF
        return
    raise QuerySyntaxError(f"bad bounds line: {line!r}")
