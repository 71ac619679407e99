from __future__ import annotations

import re
from typing import Any, List, Optional

LIST_SPLIT_RE = re.compile(r"[,\s]+")


def normalize_text(value: Any) -> str:
    if value is None:
        return ""
    return str(value).strip()


def parse_float(value: Any) -> float:
    """Strict float parsing; raises ValueError on anything that is not a number."""
    text = normalize_text(value)
    if not text:
        raise ValueError("empty number")
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"malformed number: {text}")


def parse_int(value: Any) -> int:
    number = parse_float(value)
    if not number.is_integer():
        raise ValueError(f"expected an integer: {normalize_text(value)}")
    return int(number)


def parse_bool(value: Any) -> bool:
    text = normalize_text(value).lower()
    if text in {"1", "true", "yes", "on"}:
        return True
    if text in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"expected a boolean: {text}")


def split_list(value: Any) -> List[str]:
    if isinstance(value, (list, tuple)):
        return [normalize_text(item) for item in value if normalize_text(item)]
    return [item for item in LIST_SPLIT_RE.split(normalize_text(value)) if item]


def to_float_list(value: Any) -> List[float]:
    return [parse_float(item) for item in split_list(value)]


def to_int_list(value: Any) -> List[int]:
    return [parse_int(item) for item in split_list(value)]


def parse_matrix(value: Any) -> List[List[float]]:
    """Rows separated by ';', entries by commas or spaces."""
    rows = [row for row in normalize_text(value).split(";") if row.strip()]
    matrix = [to_float_list(row) for row in rows]
    if matrix and len({len(row) for row in matrix}) != 1:
        raise ValueError("matrix rows differ in length")
    return matrix


def format_number(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{value:.12g}"

