"""Portfolio CSV files, result tables and model parameter files.

A portfolio file has a header row with the required columns
``avg_claim_size`` and ``n_claims``, an optional ``exposure`` column, and
any number of covariate columns. A covariate whose values all parse as
numbers is used as is; otherwise it is treated as categorical and
dummy-encoded against its lexicographically first level. Both margins use
the same design, an intercept followed by the encoded covariates.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .copulas import CopulaFamily, CopulaSpec
from .joint import JointModel
from .margins import GammaParams, ZtpParams
from .regression import Dataset, FitResult

REQUIRED = ("avg_claim_size", "n_claims")
EXPOSURE = "exposure"
INTERCEPT = "intercept"
MODEL_FORMAT = "copulaloss-model"


class InputError(ValueError):
    """Malformed input file."""


class EncodingMismatchError(InputError):
    """Columns of a dataset do not match a model's encoding."""


def format_value(v) -> str:
    """Lossless text form: integers verbatim, floats at 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v.is_integer() and abs(v) < 1e15:
            return repr(v)
        return format(v, ".17g")
    return str(v)


# --------------------------------------------------------------------------
# Covariate encoding
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnEncoding:
    name: str
    kind: str               # "numeric" or "categorical"
    levels: tuple = ()      # categorical only; levels[0] is the reference

    @property
    def design_names(self) -> list:
        if self.kind == "numeric":
            return [self.name]
        return [f"{self.name}={lev}" for lev in self.levels[1:]]

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            out["levels"] = list(self.levels)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ColumnEncoding":
        return cls(raw["name"], raw["kind"], tuple(raw.get("levels", ())))


@dataclass(frozen=True)
class Encoding:
    columns: tuple = field(default_factory=tuple)
    has_exposure: bool = False

    @property
    def design_names(self) -> tuple:
        names = [INTERCEPT]
        for c in self.columns:
            names.extend(c.design_names)
        return tuple(names)

    def to_dict(self) -> dict:
        return {"has_exposure": self.has_exposure, "columns": [c.to_dict() for c in self.columns]}

    @classmethod
    def from_dict(cls, raw: dict) -> "Encoding":
        return cls(tuple(ColumnEncoding.from_dict(c) for c in raw["columns"]), bool(raw.get("has_exposure", False)))

    def encode(self, table: dict, lines: list) -> np.ndarray:
        """Design matrix for raw covariate columns ``table`` (name -> list of str)."""
        n = len(lines)
        cols = [np.ones(n)]
        for c in self.columns:
            if c.name not in table:
                raise EncodingMismatchError(f"column '{c.name}' required by the encoding is missing")
            raw = table[c.name]
            if c.kind == "numeric":
                vals = np.empty(n)
                for i, s in enumerate(raw):
                    vals[i] = _parse_float(s, c.name, lines[i])
                    if not math.isfinite(vals[i]):
                        raise InputError(f"line {lines[i]}: column '{c.name}' is not finite")
                cols.append(vals)
            else:
                known = set(c.levels)
                for i, s in enumerate(raw):
                    if s not in known:
                        raise EncodingMismatchError(
                            f"line {lines[i]}: level '{s}' of column '{c.name}' is not in the encoding {list(c.levels)}")
                for lev in c.levels[1:]:
                    cols.append(np.array([1.0 if s == lev else 0.0 for s in raw]))
        return np.column_stack(cols)


def _parse_float(s: str, col: str, line: int) -> float:
    try:
        return float(s)
    except ValueError:
        raise InputError(f"line {line}: column '{col}' has non-numeric value {s!r}") from None


def _is_numeric(values) -> bool:
    for s in values:
        try:
            float(s)
        except ValueError:
            return False
    return True


def infer_encoding(covariates: dict, has_exposure: bool) -> Encoding:
    cols = []
    for name, values in covariates.items():
        if _is_numeric(values):
            cols.append(ColumnEncoding(name, "numeric"))
        else:
            cols.append(ColumnEncoding(name, "categorical", tuple(sorted(set(values)))))
    return Encoding(tuple(cols), has_exposure)


# --------------------------------------------------------------------------
# Portfolio files
# --------------------------------------------------------------------------

def _read_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise InputError(f"{path}: duplicate column names in header")
        rows, lines = [], []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"line {reader.line_num}: expected {len(header)} fields, found {len(row)}")
            rows.append([c.strip() for c in row])
            lines.append(reader.line_num)
    if not rows:
        raise InputError(f"{path}: no data rows")
    table = {h: [r[j] for r in rows] for j, h in enumerate(header)}
    return header, table, lines


def read_portfolio(path, encoding: Encoding | None = None) -> Dataset:
    """Read a portfolio CSV into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
    encoding : Encoding, optional
        Apply an existing covariate encoding (for example one stored in a
        model file) instead of inferring it from the data.

    Raises
    ------
    InputError
        Missing columns, unparsable, missing, NaN or out-of-range values;
        messages carry the file line number.
    EncodingMismatchError
        When ``encoding`` does not fit the file's columns.
    """
    header, table, lines = _read_table(path)
    for col in REQUIRED:
        if col not in table:
            raise InputError(f"{path}: required column '{col}' is missing")
    n = len(lines)
    x = np.empty(n)
    y = np.empty(n, dtype=np.int64)
    e = np.ones(n)
    for i in range(n):
        xi = _parse_float(table["avg_claim_size"][i], "avg_claim_size", lines[i])
        if not (math.isfinite(xi) and xi > 0):
            raise InputError(f"line {lines[i]}: avg_claim_size must be a positive number, got {table['avg_claim_size'][i]!r}")
        x[i] = xi
        yi = _parse_float(table["n_claims"][i], "n_claims", lines[i])
        if not (math.isfinite(yi) and yi.is_integer()):
            raise InputError(f"line {lines[i]}: n_claims must be an integer, got {table['n_claims'][i]!r}")
        if yi < 1:
            raise InputError(f"line {lines[i]}: n_claims must be at least 1 (rows without claims are not modeled)")
        y[i] = int(yi)
        if EXPOSURE in table:
            ei = _parse_float(table[EXPOSURE][i], EXPOSURE, lines[i])
            if not (math.isfinite(ei) and ei > 0):
                raise InputError(f"line {lines[i]}: exposure must be a positive number, got {table[EXPOSURE][i]!r}")
            e[i] = ei
    covariates = {h: table[h] for h in header if h not in REQUIRED and h != EXPOSURE}
    for name, vals in covariates.items():
        for i, s in enumerate(vals):
            if s == "" or s.lower() in ("nan", "na"):
                raise InputError(f"line {lines[i]}: column '{name}' has a missing value")
    if encoding is None:
        encoding = infer_encoding(covariates, EXPOSURE in table)
    else:
        extra = sorted(set(covariates) - {c.name for c in encoding.columns})
        if extra:
            raise EncodingMismatchError(f"columns {extra} are not part of the model encoding")
    D = encoding.encode(covariates, lines)
    names = encoding.design_names
    return Dataset(x, y, D, D, e, names, names, encoding)


def write_portfolio(d: Dataset, path) -> None:
    """Write a dataset read by :func:`read_portfolio` back to CSV."""
    enc = d.encoding
    if enc is None:
        enc = Encoding(tuple(ColumnEncoding(nm, "numeric") for nm in d.severity_names[1:]), True)
    header = list(REQUIRED) + ([EXPOSURE] if enc.has_exposure else []) + [c.name for c in enc.columns]
    rows = []
    for i in range(d.n):
        row = {"avg_claim_size": float(d.x[i]), "n_claims": int(d.y[i])}
        if enc.has_exposure:
            row[EXPOSURE] = float(d.e[i])
        j = 1
        for c in enc.columns:
            if c.kind == "numeric":
                row[c.name] = float(d.R[i, j])
                j += 1
            else:
                k = len(c.levels) - 1
                hot = np.flatnonzero(d.R[i, j:j + k] == 1.0)
                row[c.name] = c.levels[1 + hot[0]] if hot.size else c.levels[0]
                j += k
        rows.append(row)
    write_csv(rows, path, header)


def write_csv(table, path=None, columns=None) -> None:
    """Write a list of row dicts as CSV; ``path`` of ``None`` or ``"-"`` means stdout."""
    table = list(table)
    if columns is None:
        columns = list(table[0].keys()) if table else []
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in table:
        w.writerow([format_value(row.get(c, "")) for c in columns])
    text = buf.getvalue()
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# Model files
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SavedModel:
    """Fitted parameters with the covariate encoding they were fitted on."""

    family: CopulaFamily
    theta: float | None
    rotated: bool
    alpha: dict
    beta: dict
    delta: float
    encoding: Encoding | None = None

    @property
    def copula(self) -> CopulaSpec:
        if self.family is CopulaFamily.INDEPENDENCE:
            return CopulaSpec.independence()
        return CopulaSpec(self.family, self.theta, self.rotated)

    @classmethod
    def from_fit(cls, fit: FitResult, encoding: Encoding | None = None) -> "SavedModel":
        return cls(
            fit.family, fit.theta, fit.rotated,
            dict(zip(fit.severity_names, map(float, fit.estimate.alpha))),
            dict(zip(fit.frequency_names, map(float, fit.estimate.beta))),
            float(fit.delta), encoding,
        )

    def joint_model(self, d: Dataset) -> JointModel:
        """Per-policy joint model for the rows of ``d``."""
        if tuple(self.alpha) != tuple(d.severity_names) or tuple(self.beta) != tuple(d.frequency_names):
            raise EncodingMismatchError(
                f"model columns {list(self.alpha)} do not match dataset columns {list(d.severity_names)}")
        a = np.array(list(self.alpha.values()))
        b = np.array(list(self.beta.values()))
        mu = np.exp(d.R @ a)
        lam = d.e * np.exp(d.S @ b)
        return JointModel(GammaParams(mu, self.delta), ZtpParams(lam), self.copula)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": 1,
            "family": self.family.value,
            "theta": self.theta,
            "rotated": self.rotated,
            "delta": self.delta,
            "alpha": self.alpha,
            "beta": self.beta,
            "encoding": None if self.encoding is None else self.encoding.to_dict(),
        }


def save_model(model, path, encoding: Encoding | None = None) -> None:
    """Write a :class:`SavedModel` (or a :class:`FitResult`) as JSON.

    Floats are written in their shortest round-trip form, so load then save
    reproduces the file byte for byte.
    """
    if isinstance(model, FitResult):
        model = SavedModel.from_fit(model, encoding)
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path) -> SavedModel:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict) or raw.get("format") != MODEL_FORMAT:
        raise InputError(f"{path}: not a model file")
    for key in ("family", "theta", "rotated", "delta", "alpha", "beta"):
        if key not in raw:
            raise InputError(f"{path}: missing field '{key}'")
    try:
        fam = CopulaFamily.parse(raw["family"])
        enc = None if raw.get("encoding") is None else Encoding.from_dict(raw["encoding"])
        model = SavedModel(
            fam, None if raw["theta"] is None else float(raw["theta"]), bool(raw["rotated"]),
            {k: float(v) for k, v in raw["alpha"].items()},
            {k: float(v) for k, v in raw["beta"].items()},
            float(raw["delta"]), enc,
        )
        model.copula  # validates theta against the family
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid model file: {exc}") from None
    return model
