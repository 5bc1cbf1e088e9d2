"""File formats: RALN binary matrices, CSV matrices, canonical JSON reports and
synthetic-spec configuration files.

RALN layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"RALN"
    4       2     version (u16) = 1
    6       8     n (u64)
    14      8     d (u64)
    22      1     dtype code (u8), 0 = float64 little-endian
    23      4     label length L in bytes (u32)
    27      L     label, UTF-8
    27+L    8nd   payload, row-major
"""
from __future__ import annotations

import csv
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

from .core import RepresentationSet
from .errors import (
    BadMagic,
    FormatError,
    IoError,
    ParseError,
    RaggedRows,
    TrailingBytes,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedVersion,
    ValidationError,
)

MAGIC = b"RALN"
VERSION = 1
DTYPE_F64 = 0
SCHEMA_VERSION = 1
_HEADER = struct.Struct("<4sHQQBI")


# -------------------------------------------------------------------- RALN


def encode_repr(data, label: str | None = None) -> bytes:
    if isinstance(data, RepresentationSet):
        label = data.label if label is None else label
        data = data.data
    x = np.asarray(data, dtype="<f8")
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValidationError("RALN stores 2-D matrices")
    lab = (label or "").encode("utf-8")
    head = _HEADER.pack(MAGIC, VERSION, x.shape[0], x.shape[1], DTYPE_F64, len(lab))
    return head + lab + np.ascontiguousarray(x).tobytes()


def decode_matrix(buf: bytes) -> tuple[np.ndarray, str]:
    """Raw (matrix, label) from RALN bytes, without representation checks."""
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {bytes(buf[:4])!r}")
    if len(buf) < _HEADER.size:
        raise TruncatedPayload("header is truncated")
    _, version, n, d, dtype, lab_len = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} (supported: {VERSION})")
    if dtype != DTYPE_F64:
        raise UnsupportedDtype(f"dtype code {dtype} (supported: {DTYPE_F64})")
    start = _HEADER.size + lab_len
    if len(buf) < start:
        raise TruncatedPayload("label is truncated")
    try:
        label = bytes(buf[_HEADER.size : start]).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"label is not valid UTF-8: {exc}") from None
    need = n * d * 8
    have = len(buf) - start
    if have < need:
        raise TruncatedPayload(f"payload has {have} bytes, header promises {need}")
    if have > need:
        raise TrailingBytes(f"{have - need} bytes after the payload")
    x = np.frombuffer(buf, dtype="<f8", count=n * d, offset=start).reshape(n, d).astype(np.float64)
    return x, label


def decode_repr(buf: bytes) -> RepresentationSet:
    x, label = decode_matrix(buf)
    return RepresentationSet(x, label)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None


def read_repr(path) -> RepresentationSet:
    return decode_repr(_read_bytes(path))


def write_repr(data, path, label: str | None = None) -> None:
    _write_bytes(path, encode_repr(data, label))


# --------------------------------------------------------------------- CSV


def _parse_rows(text: str, has_header: bool) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise ParseError("no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(f"row {i + 1} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell.strip())  # float() ignores the locale
            except ValueError:
                raise ParseError(f"row {i + 1}, column {j + 1}: cannot parse {cell!r}") from None
    return out


def read_csv_matrix(path, has_header: bool = False) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise ParseError(f"{path} is not UTF-8 text") from None
    return _parse_rows(text, has_header)


def read_csv_repr(path, has_header: bool = False, label: str = "") -> RepresentationSet:
    return RepresentationSet(read_csv_matrix(path, has_header), label)


def format_csv(data) -> str:
    x = data.data if isinstance(data, RepresentationSet) else np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    # repr gives the shortest string that round-trips exactly
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in x)


def write_csv_repr(data, path) -> None:
    _write_bytes(path, format_csv(data).encode("utf-8"))


def read_matrix(path, has_header: bool = False) -> np.ndarray:
    """A matrix from either format, chosen by the file's leading bytes."""
    buf = _read_bytes(path)
    if buf[:4] == MAGIC:
        return decode_matrix(buf)[0]
    try:
        return _parse_rows(buf.decode("utf-8"), has_header)
    except UnicodeDecodeError:
        raise ParseError(f"{path} is neither RALN nor UTF-8 CSV") from None


def read_any_repr(path, has_header: bool = False) -> RepresentationSet:
    buf = _read_bytes(path)
    if buf[:4] == MAGIC:
        return decode_repr(buf)
    return RepresentationSet(read_matrix(path, has_header), Path(path).stem)


# ---------------------------------------------------------- canonical JSON


def _float_token(x: float) -> str:
    if not math.isfinite(x):
        raise ValidationError(f"non-finite value {x!r} cannot be serialised")
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _emit(obj, out: list) -> None:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float_token(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        items = sorted((str(k), v) for k, v in obj.items())
        for i, (k, v) in enumerate(items):
            if i:
                out.append(",")
            out.append(json.dumps(k, ensure_ascii=False))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    else:
        raise ValidationError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Sorted keys, no whitespace, floats at 17 significant digits."""
    out: list = []
    _emit(obj, out)
    return "".join(out) + "\n"


def report_dict(report, config: dict | None = None) -> dict:
    d = dict(report) if isinstance(report, dict) else report.to_dict()
    d["schema_version"] = SCHEMA_VERSION
    if config is not None:
        d["config"] = config
    return d


def write_report(report, path, config: dict | None = None) -> None:
    _write_bytes(path, canonical_json(report_dict(report, config)).encode("utf-8"))


# ------------------------------------------------------------ spec configs

_SPEC_KEYS = {"ambient_dim", "eta1", "eta2", "C", "noise_level", "seed"}


def _numbers(text: str, key: str) -> list:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise ParseError(f"{key}: cannot parse {text!r}") from None


def parse_key_value(text: str) -> dict:
    """``key = value`` lines; lists are comma separated, matrix rows separated by ``;``."""
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ParseError(f"line {lineno}: expected key = value")
        if key in ("ambient_dim", "seed"):
            try:
                cfg[key] = int(value)
            except ValueError:
                raise ParseError(f"line {lineno}: {key} must be an integer") from None
        elif key == "noise_level":
            cfg[key] = _numbers(value, key)[0] if value else 0.0
        elif key == "C":
            cfg[key] = [_numbers(row, key) for row in value.split(";") if row.strip()]
        else:
            cfg[key] = _numbers(value, key)
    return cfg


def parse_spec_config(text: str):
    """A :class:`~ralign.synth.SyntheticSpec` from JSON or key=value text."""
    from .synth import SyntheticSpec

    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            cfg = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ParseError("config must be a JSON object")
    else:
        cfg = parse_key_value(text)
    unknown = set(cfg) - _SPEC_KEYS
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}")
    missing = {"ambient_dim", "eta1", "eta2", "C"} - set(cfg)
    if missing:
        raise ParseError(f"missing config keys: {sorted(missing)}")
    try:
        C = np.asarray(cfg["C"], dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("C must be a rectangular numeric matrix") from None
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ParseError("seed must be an integer")
    return SyntheticSpec(
        int(cfg["ambient_dim"]),
        cfg["eta1"],
        cfg["eta2"],
        C,
        float(cfg.get("noise_level", 0.0)),
        seed,
    )


def read_spec_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_spec_config(text)
