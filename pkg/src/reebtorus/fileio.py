"""Atomic file output: write to a temporary sibling, then rename over the target."""

from __future__ import annotations

import json
import os
import tempfile


def atomic_write(path, write, newline=None) -> None:
    """Call ``write(fh)`` on a temp file next to ``path`` and rename it into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="-" + os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline=newline) as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text: str) -> None:
    atomic_write(path, lambda fh: fh.write(text))


def write_json(path, data) -> None:
    write_text(path, json.dumps(data, indent=2, allow_nan=False) + "\n")
