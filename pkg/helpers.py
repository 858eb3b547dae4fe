import json
from fractions import Fraction
from pathlib import Path


def parse_bool(value):
    if value is None:
        return False
    value = str(value).strip().lower()
    return value in {"1", "true", "yes", "y", "on", "t"}


def parse_int(value, default: int | None = None) -> int | None:
    if value in (None, "", " "):
        return default
    try:
        return int(str(value).strip())
    except (ValueError, TypeError):
        return default


def parse_rational(value) -> Fraction:
    """Exact rational from an int, a float or a "p/q" / decimal string."""
    if isinstance(value, bool):
        raise ValueError("Boolean is not a number")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    text = str(value).strip()
    if not text:
        raise ValueError("Empty number")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"Invalid rational '{text}'") from exc


def load_json_argument(value: str):
    """Accept inline JSON or a path to a UTF-8 JSON file."""
    text = (value or "").strip()
    if not text:
        raise ValueError("Empty JSON argument")
    if text[0] in "[{":
        return json.loads(text)
    path = Path(text)
    if path.is_file():
        return json.loads(path.read_text(encoding="utf-8"))
    return json.loads(text)


def dump_json(payload, pretty: bool = False) -> str:
    if pretty:
        return json.dumps(payload, indent=2, ensure_ascii=False)
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)
