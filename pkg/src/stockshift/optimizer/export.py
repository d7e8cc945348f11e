"""
Model files for external solvers: MPS (fixed-format column layout) and CPLEX LP
"""

from enum import StrEnum

import numpy as np
import scipy.sparse as sp

from stockshift.model import MilpModel, RowSense


class ExportFormat(StrEnum):
    MPS = "mps"
    LP = "lp"


class MpsReadError(ValueError):
    pass


def _num(value: float) -> str:
    return f"{float(value):.15g}"


def _fields(*fields: str) -> str:
    """
    Lay out one free-format MPS data line, padded toward the classic column positions for
    readability. Names longer than eight characters push later fields right, so readers must
    split on whitespace.
    """
    code, name1, name2, value1 = (list(fields) + ["", "", "", ""])[:4]
    rest = fields[4:]
    line = f" {code:<2} {name1:<8}  {name2:<8}  {value1:>12}"
    if rest:
        line += f"   {rest[0]:<8}  {rest[1]:>12}"
    return line.rstrip()


def write_mps(model: MilpModel) -> str:
    lines = [f"NAME          {model.name}", "ROWS", " N  OBJ"]
    lines += [f" {sense.value}  {name}" for sense, name in zip(model.senses, model.row_names, strict=True)]

    lines.append("COLUMNS")
    A = sp.csc_matrix(model.A)
    in_integer_block = False
    for col, name in enumerate(model.column_names):
        if model.integer[col] != in_integer_block:
            marker = "'INTORG'" if model.integer[col] else "'INTEND'"
            lines.append(f"    MARKER                 'MARKER'                 {marker}")
            in_integer_block = bool(model.integer[col])
        # every column gets an objective entry so that it appears even without row coefficients
        lines.append(_fields("", name, "OBJ", _num(model.c[col])))
        start, end = A.indptr[col], A.indptr[col + 1]
        for row, value in zip(A.indices[start:end], A.data[start:end], strict=True):
            lines.append(_fields("", name, model.row_names[row], _num(value)))
    if in_integer_block:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")

    lines.append("RHS")
    if model.offset:
        lines.append(_fields("", "RHS", "OBJ", _num(-model.offset)))
    for name, value in zip(model.row_names, model.rhs, strict=True):
        if value != 0.0:
            lines.append(_fields("", "RHS", name, _num(value)))

    lines.append("BOUNDS")
    for col, name in enumerate(model.column_names):
        lo, up = model.lower[col], model.upper[col]
        if lo == up:
            lines.append(_fields("FX", "BND", name, _num(lo)))
            continue
        if lo != 0.0:
            lines.append(_fields("MI" if lo == -np.inf else "LO", "BND", name, "" if lo == -np.inf else _num(lo)))
        if np.isfinite(up):
            lines.append(_fields("UP", "BND", name, _num(up)))
        elif model.integer[col]:
            lines.append(_fields("PL", "BND", name))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def _lp_expression(terms: list[tuple[float, str]]) -> str:
    if not terms:
        return "0"
    parts = []
    for k, (value, name) in enumerate(terms):
        sign = "-" if value < 0 else "+"
        coef = abs(value)
        body = name if coef == 1.0 else f"{_num(coef)} {name}"
        if k == 0:
            parts.append(f"- {body}" if sign == "-" else body)
        else:
            parts.append(f"{sign} {body}")
        if k % 8 == 7:
            parts.append("\n  ")
    return " ".join(parts).replace(" \n  ", "\n  ")


def write_lp(model: MilpModel) -> str:
    lines = [f"\\ Problem: {model.name}", "Minimize"]
    objective = [(float(v), model.column_names[k]) for k, v in enumerate(model.c) if v != 0.0]
    if model.offset:
        objective.append((float(model.offset), "__offset"))
    lines.append(f" obj: {_lp_expression(objective)}")

    lines.append("Subject To")
    A = sp.csr_matrix(model.A)
    operators = {RowSense.LE: "<=", RowSense.EQ: "=", RowSense.GE: ">="}
    for row, name in enumerate(model.row_names):
        start, end = A.indptr[row], A.indptr[row + 1]
        terms = [(float(v), model.column_names[c]) for c, v in zip(A.indices[start:end], A.data[start:end], strict=True)]
        lines.append(f" {name}: {_lp_expression(terms)} {operators[model.senses[row]]} {_num(model.rhs[row])}")

    lines.append("Bounds")
    for col, name in enumerate(model.column_names):
        lo, up = model.lower[col], model.upper[col]
        if lo == up:
            lines.append(f" {name} = {_num(lo)}")
        else:
            upper = _num(up) if np.isfinite(up) else "+inf"
            lines.append(f" {_num(lo)} <= {name} <= {upper}")
    if model.offset:
        lines.append(" __offset = 1")

    integers = [model.column_names[k] for k in np.flatnonzero(model.integer)]
    if integers:
        lines.append("General")
        for k in range(0, len(integers), 8):
            lines.append(" " + " ".join(integers[k : k + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_model(model: MilpModel, fmt: ExportFormat | str = ExportFormat.MPS) -> bytes:
    match ExportFormat(fmt):
        case ExportFormat.MPS:
            text = write_mps(model)
        case ExportFormat.LP:
            text = write_lp(model)
    return text.encode("ascii")


def read_mps(data: bytes | str) -> MilpModel:
    """Parse an MPS file whose names contain no spaces (fixed or free layout)."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    name = ""
    section = None
    objective_row = None
    row_names: list[str] = []
    senses: list[RowSense] = []
    row_index: dict[str, int] = {}
    col_index: dict[str, int] = {}
    entries: list[tuple[int, int, float]] = []
    costs: dict[int, float] = {}
    integer: list[bool] = []
    rhs: dict[int, float] = {}
    offset = 0.0
    bounds: dict[int, list[float]] = {}
    in_integer_block = False

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            section = tokens[0].upper()
            if section == "NAME":
                name = tokens[1] if len(tokens) > 1 else ""
            if section == "ENDATA":
                break
            continue
        match section:
            case "ROWS":
                kind, row = tokens[0].upper(), tokens[1]
                if kind == "N":
                    objective_row = objective_row or row
                    continue
                row_index[row] = len(row_names)
                row_names.append(row)
                senses.append(RowSense(kind))
            case "COLUMNS":
                if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                    in_integer_block = tokens[2] == "'INTORG'"
                    continue
                column = tokens[0]
                if column not in col_index:
                    col_index[column] = len(col_index)
                    integer.append(in_integer_block)
                col = col_index[column]
                for row, value in zip(tokens[1::2], tokens[2::2], strict=True):
                    if row == objective_row:
                        costs[col] = float(value)
                    elif row in row_index:
                        entries.append((row_index[row], col, float(value)))
                    else:
                        msg = f"column {column} references unknown row {row}"
                        raise MpsReadError(msg)
            case "RHS":
                pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
                for row, value in zip(pairs[::2], pairs[1::2], strict=True):
                    if row == objective_row:
                        offset = -float(value)
                    else:
                        rhs[row_index[row]] = float(value)
            case "BOUNDS":
                kind, column = tokens[0].upper(), tokens[2]
                col = col_index[column]
                bound = bounds.setdefault(col, [0.0, np.inf])
                value = float(tokens[3]) if len(tokens) > 3 else 0.0
                match kind:
                    case "UP":
                        bound[1] = value
                    case "LO":
                        bound[0] = value
                    case "FX":
                        bound[0] = bound[1] = value
                    case "MI":
                        bound[0] = -np.inf
                    case "PL":
                        bound[1] = np.inf
                    case "BV":
                        bound[0], bound[1] = 0.0, 1.0
                    case _:
                        msg = f"unsupported bound type {kind}"
                        raise MpsReadError(msg)
            case _:
                msg = f"data line outside a known section: {raw!r}"
                raise MpsReadError(msg)

    n_cols, n_rows = len(col_index), len(row_names)
    lower = np.zeros(n_cols)
    upper = np.full(n_cols, np.inf)
    for col, (lo, up) in bounds.items():
        lower[col], upper[col] = lo, up
    c = np.zeros(n_cols)
    for col, value in costs.items():
        c[col] = value
    rows, cols, vals = zip(*entries, strict=True) if entries else ((), (), ())
    return MilpModel(
        name=name,
        c=c,
        lower=lower,
        upper=upper,
        integer=np.array(integer, dtype=bool),
        A=sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)),
        senses=tuple(senses),
        rhs=np.array([rhs.get(r, 0.0) for r in range(n_rows)]),
        column_names=tuple(col_index),
        row_names=tuple(row_names),
        offset=offset,
    )
