"""Trade-file ingestion, model and fit documents, configuration and tables.

All files are written atomically: a temporary file in the target directory
is renamed over the destination.
"""

from __future__ import annotations

import configparser
import csv
import datetime as _dt
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import DomainError, ModelLoadError, OrderingError, ParseError
from .model import EventSequence, MtdgModel, StateSpace

MODEL_SCHEMA = "mtdg-model"
MODEL_VERSION = 1
FIT_SCHEMA = "mtdg-mle-fit"
FIT_VERSION = 1

_SIDES = {"+1": 1, "1": 1, "-1": -1}
_FLAGS = ("C", "NC")


# --- atomic writes -----------------------------------------------------------


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# --- trades ------------------------------------------------------------------


def _day_key(label: str):
    try:
        return _dt.date.fromisoformat(label)
    except ValueError:
        return None


def ingest_trades(path, delimiter: str = ",") -> EventSequence:
    """Read a trade file into a signed-event sequence.

    Required header columns are ``day``, ``side`` (``+1``/``1``/``-1``) and
    ``price_flag`` (``C``/``NC``); ``seq_no`` is optional and, when present,
    must increase strictly within a day. Rows of one day must be contiguous,
    and ISO-dated days must increase.
    """
    space = StateSpace.signed_events()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        missing = [c for c in ("day", "side", "price_flag") if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", 1)
        col = {name: header.index(name) for name in header}
        has_seq = "seq_no" in col
        states, seq_nos, labels, offsets = [], [], [], []
        seen = set()
        last_key = None
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
            day = row[col["day"]].strip()
            side_tok = row[col["side"]].strip()
            flag = row[col["price_flag"]].strip()
            if side_tok not in _SIDES:
                raise ParseError(f"unknown side {side_tok!r}", line)
            if flag not in _FLAGS:
                raise ParseError(f"unknown price_flag {flag!r}", line)
            if not day:
                raise ParseError("empty day", line)
            if not labels or day != labels[-1]:
                if day in seen:
                    raise OrderingError(f"line {line}: day {day} appears again after other days")
                key = _day_key(day)
                if key is not None and last_key is not None and key <= last_key:
                    raise OrderingError(f"line {line}: day {day} precedes {labels[-1]}")
                last_key = key if key is not None else last_key
                seen.add(day)
                labels.append(day)
                offsets.append(len(states))
            if has_seq:
                tok = row[col["seq_no"]].strip()
                try:
                    s = int(tok)
                except ValueError:
                    raise ParseError(f"seq_no {tok!r} is not an integer", line) from None
                if offsets[-1] < len(states) and s <= seq_nos[-1]:
                    raise OrderingError(f"line {line}: seq_no {s} does not increase within day {day}")
                seq_nos.append(s)
            states.append(space.state_of(_SIDES[side_tok], flag))
    if not states:
        raise ParseError("no trade rows", 2)
    return EventSequence(np.array(states), np.array(offsets), space, tuple(labels),
                         np.array(seq_nos) if has_seq else None)


def export_trades(seq: EventSequence, path, delimiter: str = ",") -> Path:
    """Inverse of :func:`ingest_trades` (``side`` written as ``+1``/``-1``)."""
    if seq.state_space.event_map is None:
        raise DomainError("export needs the signed-event state space")
    labels = seq.day_labels or tuple(str(d) for d in range(seq.n_days))
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    has_seq = seq.seq_no is not None
    w.writerow(["day", "seq_no", "side", "price_flag"] if has_seq else ["day", "side", "price_flag"])
    ids = seq.day_ids()
    for t, s in enumerate(seq.states):
        side, flag = seq.state_space.event_map[s]
        side_tok = "+1" if side > 0 else "-1"
        day = labels[ids[t]]
        w.writerow([day, int(seq.seq_no[t]), side_tok, flag] if has_seq else [day, side_tok, flag])
    return atomic_write_text(path, buf.getvalue())


# --- model documents ---------------------------------------------------------


def _arr(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def model_to_dict(model: MtdgModel, extra: dict | None = None) -> dict:
    d = {
        "schema": MODEL_SCHEMA, "version": MODEL_VERSION,
        "representation": model.representation, "m": model.m, "p": model.p,
        "state_space": model.state_space.to_dict(),
        "lam": _arr(model.lam), "eta": _arr(model.eta),
    }
    if model.representation == "deviation":
        d["a_stack"] = _arr(model.a_stack)
    else:
        d["q_stack"] = _arr(model.q_stack)
    if extra:
        d["extra"] = extra
    return d


def model_from_dict(d: dict) -> MtdgModel:
    if not isinstance(d, dict) or d.get("schema") != MODEL_SCHEMA:
        raise ModelLoadError(f"not a {MODEL_SCHEMA} document")
    if d.get("version") != MODEL_VERSION:
        raise ModelLoadError(f"unsupported {MODEL_SCHEMA} version {d.get('version')!r}; "
                             f"expected {MODEL_VERSION}")
    try:
        space = StateSpace.from_dict(d["state_space"])
        if d["representation"] == "deviation":
            model = MtdgModel.from_deviation(d["eta"], d["a_stack"], d["lam"], space)
        elif d["representation"] == "mixture":
            model = MtdgModel.from_mixture(d["lam"], d["q_stack"], d["eta"], space)
        else:
            raise ModelLoadError(f"unknown representation {d['representation']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelLoadError(f"malformed model document: {exc}") from exc
    if model.m != d.get("m") or model.p != d.get("p"):
        raise ModelLoadError("declared m/p do not match the stored arrays")
    return model


def save_model(model: MtdgModel, path, extra: dict | None = None) -> Path:
    """JSON with shortest round-trip float repr, so loading is bit-exact."""
    return atomic_write_text(path, json.dumps(model_to_dict(model, extra), indent=1) + "\n")


def _read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelLoadError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"{path} is not valid JSON (truncated?): {exc}") from exc


def load_model(path) -> MtdgModel:
    return model_from_dict(_read_json(path))


def save_fit_report(report_dict: dict, path) -> Path:
    return atomic_write_text(path, json.dumps(report_dict, indent=1, sort_keys=True) + "\n")


def load_fit_report(path) -> dict:
    d = _read_json(path)
    if not isinstance(d, dict) or d.get("schema") != FIT_SCHEMA:
        raise ModelLoadError(f"not a {FIT_SCHEMA} document")
    if d.get("version") != FIT_VERSION:
        raise ModelLoadError(f"unsupported {FIT_SCHEMA} version {d.get('version')!r}")
    return d


# --- configuration -----------------------------------------------------------

# key -> (type, default)
CONFIG_KEYS = {
    "input": (str, None),          # trade file (csv)
    "model": (str, None),          # model document (json)
    "p": (int, 5),
    "seed": (int, 0),
    "eps_feas": (float, 1e-6),
    "n_events": (int, 100_000),
    "day_length": (int, 0),        # 0: one day
    "max_lag": (int, 50),
    "symmetry": (bool, True),
    "n_boot": (int, 200),
    "block_days": (int, 1),
    "starts": (int, 8),
    "maxiter": (int, 5000),
    "n_mc": (int, 0),
    "g_c1": (float, 1.0),
    "d_lf": (str, "0"),            # a number, or "fit"
    "train_days": (int, 10),
    "test_days": (int, 1),
    "step_days": (int, 1),
    "predictors": (str, "unconditional,gmm"),
    "plots": (bool, True),
}


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; a repeated key keeps
    its last value. Unknown keys are errors."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), strict=False)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ParseError(f"config: {exc}") from exc
    out = {k: v for k, (_, v) in CONFIG_KEYS.items()}
    for key, raw in cp["run"].items():
        if key not in CONFIG_KEYS:
            raise ParseError(f"config: unknown key {key!r}")
        kind = CONFIG_KEYS[key][0]
        try:
            if kind is bool:
                val = cp["run"].getboolean(key)
            else:
                val = kind(raw)
        except ValueError:
            raise ParseError(f"config: {key} = {raw!r} is not a valid {kind.__name__}") from None
        out[key] = val
    return out


def load_config(path) -> dict:
    try:
        return parse_config(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc


# --- delimited tables --------------------------------------------------------


def format_table(schema: str, columns, rows, meta: dict | None = None) -> str:
    """``# schema=...`` line, optional ``# key=value`` lines, header, rows.

    Floats use ``repr`` so tables are exact and byte-stable.
    """
    lines = [f"# schema={schema}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={_cell(v)}")
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(_cell(v) for v in r))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, schema, columns, rows, meta=None) -> Path:
    return atomic_write_text(path, format_table(schema, columns, rows, meta))


def read_table(path):
    """``(meta, columns, rows)`` of a table written by :func:`write_table` (cells as strings)."""
    meta, rows, columns = {}, [], None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, columns, rows
