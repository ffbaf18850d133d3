import csv
import io
import json
import math
from typing import Any, Iterable, Optional, Sequence

FORMATS = ("json", "csv", "text")
EXTENSIONS = {"json": "json", "csv": "csv", "text": "txt"}


def _finite(value: Any) -> Any:
    """Non-finite floats (an infinite z or a lost reply) become null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    return value


def to_json(value: Any, indent: Optional[int] = None) -> str:
    return json.dumps(_finite(value), indent=indent, allow_nan=False) + "\n"


def _ordered(row: dict[str, Any], fields: Sequence[str]) -> dict[str, Any]:
    extra = set(row) - set(fields)
    if extra:
        raise ValueError(f"fields outside the report schema: {sorted(extra)}")
    return {field: row[field] for field in fields}


def _csv(rows: Iterable[dict[str, Any]], fields: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    writer.writerows(_finite(row) for row in rows)
    return buffer.getvalue()


def _text(row: dict[str, Any]) -> str:
    return "".join(f"{key}: {value}\n" for key, value in row.items())


def render_report(row: dict[str, Any], fields: Sequence[str], output_format: str) -> str:
    """One report object, keys in schema order; a missing field is a KeyError."""
    ordered = _ordered(row, fields)
    if output_format == "json":
        return to_json(ordered)
    if output_format == "csv":
        return _csv([ordered], fields)
    return _text(ordered)


def render_table(
    rows: Sequence[dict[str, Any]], fields: Sequence[str], output_format: str
) -> str:
    if output_format == "json":
        return to_json(list(rows), indent=2)
    if output_format == "csv":
        return _csv(rows, fields)
    return "\n".join(_text(row) for row in rows)
