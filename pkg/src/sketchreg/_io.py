"""Small file helpers: atomic writes, float formatting and key=value sidecars."""

import os
import tempfile

import numpy as np

FLOAT_FMT = "%.17g"


def format_float(value):
    return FLOAT_FMT % float(value)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_to_csv(columns, rows):
    lines = [",".join(columns)]
    for row in np.atleast_2d(np.asarray(rows, dtype=float)):
        lines.append(",".join(format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def dump_keyvalue(mapping):
    lines = []
    for key, value in mapping.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            value = " ".join(str(v) for v in value)
        elif isinstance(value, float):
            value = format_float(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def parse_keyvalue(text):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            from .errors import ParseError

            raise ParseError(f"expected key=value, got {raw!r}", row=lineno)
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def sidecar_path(path):
    return os.fspath(path) + ".meta"
