"""
Shared helpers: catalogue id parsing, atomic writes, thread count.
"""

import os
import re
from pathlib import Path
from typing import Dict, Tuple, Union

from .config import THREADS_ENV
from .errors import ConfigError, ReportError

_ID_PATTERN = re.compile(r'^([a-z][a-z0-9_-]*)(?::(.*))?$')


def parse_catalog_id(entry_id: str) -> Tuple[str, Dict[str, float]]:
    """
    Split a catalogue id into its name and numeric parameters.

    Examples:
        "gauss:a=1,b=0.5" -> ("gauss", {"a": 1.0, "b": 0.5})
        "zero" -> ("zero", {})
    """
    text = (entry_id or "").strip().lower()
    match = _ID_PATTERN.match(text)
    if not match:
        raise ConfigError(f"Malformed catalogue id: {entry_id!r}")

    name, body = match.group(1), match.group(2)
    params: Dict[str, float] = {}
    if body:
        for item in body.split(','):
            item = item.strip()
            if not item:
                continue
            key, sep, value = item.partition('=')
            if not sep or not key.strip():
                raise ConfigError(f"Malformed parameter {item!r} in {entry_id!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ConfigError(f"Non-numeric parameter {item!r} in {entry_id!r}") from None
    return name, params


def thread_count() -> int:
    """Worker threads for sweeps, from the environment or the machine."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            count = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if count < 1:
            raise ConfigError(f"{THREADS_ENV} must be positive, got {count}")
        return count
    return os.cpu_count() or 1


def atomic_write(path: Union[str, Path], payload: Union[str, bytes]) -> Path:
    """Write to a temporary sibling and rename it over the target."""
    path = Path(path)
    temp_path = path.with_name(path.name + '.tmp')
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(payload, bytes):
            temp_path.write_bytes(payload)
        else:
            with open(temp_path, 'w', encoding='utf-8', newline='') as f:
                f.write(payload)
        temp_path.replace(path)
    except OSError as e:
        if temp_path.exists():
            temp_path.unlink()
        raise ReportError(f"Failed to write ({e.strerror or e})", str(path)) from e
    return path
