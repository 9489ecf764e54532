"""Deterministic run artifacts: atomic CSV/JSON writers and the run manifest."""

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .rng import generator_name


def atomic_write_text(path, text):
    """Write via a temp file in the same directory and rename on completion."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value):
    import numpy as np

    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return "" if value is None else str(value)


def write_csv(path, header, rows, comments=()):
    """Write a CSV with optional '#' comment lines; floats use shortest round-trip repr."""
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def content_hash(payload):
    """sha256 over the canonical JSON encoding of a payload."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(path, config, seeds, extra=None):
    """Write the run manifest: full config, seeds, generator id, and a content hash.

    Every reported number is reproducible from the manifest alone, so the
    manifest itself contains no wall-clock fields.
    """
    from . import __version__

    payload = {
        "package": "arkde",
        "version": __version__,
        "generator": generator_name(),
        "config": config,
        "seeds": seeds,
    }
    if extra:
        payload.update(extra)
    payload["content_hash"] = content_hash(
        {"config": config, "seeds": seeds, "generator": generator_name()}
    )
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    return payload
