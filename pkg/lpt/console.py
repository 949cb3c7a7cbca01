"""
Console output helpers: section banners, status lines and progress bars.
"""
import json
from datetime import datetime
from pathlib import Path
from typing import Iterable, TypeVar

from tqdm import tqdm

from lpt import config

T = TypeVar("T")

_LEVELS = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40}
_level = _LEVELS.get(config.LOG_LEVEL.upper(), 20)


def set_level(name: str) -> None:
    """Change the verbosity (DEBUG, INFO, WARNING, ERROR)."""
    global _level
    _level = _LEVELS.get(name.upper(), 20)


def enabled(name: str) -> bool:
    return _LEVELS.get(name.upper(), 20) >= _level


def print_section(title: str) -> None:
    """Print a formatted section header"""
    if enabled("INFO"):
        print("\n" + "=" * 70)
        print(f"  {title}")
        print("=" * 70)


def info(message: str) -> None:
    if enabled("INFO"):
        print(message)


def debug(message: str) -> None:
    if enabled("DEBUG"):
        print(message)


def success(message: str) -> None:
    if enabled("INFO"):
        print(f"✓ {message}")


def warn(message: str) -> None:
    if enabled("WARNING"):
        print(f"⚠ {message}")


def error(message: str) -> None:
    print(f"❌ {message}")


def print_table(rows: list[dict], columns: list[str]) -> None:
    """Fixed-width table, one dict per row."""
    if not enabled("INFO"):
        return
    widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) if rows else len(c) for c in columns}
    header = " | ".join(f"{c:<{widths[c]}}" for c in columns)
    print(header)
    print("-" * len(header))
    for row in rows:
        print(" | ".join(f"{_fmt(row.get(c)):<{widths[c]}}" for c in columns))


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def progress(items: Iterable[T], desc: str, total: int | None = None) -> Iterable[T]:
    """tqdm progress bar, silent below INFO."""
    return tqdm(items, desc=desc, total=total, disable=not enabled("INFO"), leave=False)


def save_json(payload: dict, filename: str | Path, stamp: bool = False) -> None:
    """Save a report to a JSON file"""
    if stamp:
        payload = {**payload, "timestamp": datetime.now().isoformat()}
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    success(f"Saved to: {path}")
