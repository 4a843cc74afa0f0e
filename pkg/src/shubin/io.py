"""Deterministic, atomic text output: CSV tables and key=value documents."""

import csv
import io
import os
import tempfile
from pathlib import Path

from .errors import ParseError


def fmt(value):
    """Shortest round-trip text for numbers; plain str otherwise."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def publish(tmp, path):
    """Give a finished temp file normal permissions and rename it into place."""
    os.chmod(tmp, 0o666 & ~_umask())
    os.replace(tmp, path)


def atomic_write_text(path, text):
    """Write UTF-8 text with LF endings via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        publish(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    return atomic_write_text(path, csv_text(header, rows))


def read_csv(path):
    """Header and rows (as strings) of a CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty CSV file", line=1) from None
        rows = [row for row in reader if row]
    return [h.strip() for h in header], rows


def keyvalue_text(pairs):
    return "".join(f"{k}={fmt(v)}\n" for k, v in pairs)


def write_keyvalue(path, pairs):
    return atomic_write_text(path, keyvalue_text(pairs))


def parse_keyvalue(text, source="<config>"):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{lineno}: expected key=value, got {raw!r}", line=lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError(f"{source}:{lineno}: empty key", line=lineno)
        out[key] = value.strip()
    return out


def read_keyvalue(path):
    with open(path, encoding="utf-8") as fh:
        return parse_keyvalue(fh.read(), source=str(path))
