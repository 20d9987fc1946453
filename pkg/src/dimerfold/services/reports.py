"""
Report emission for CLI runs.

Every output file gets a manifest: package version, git hash, seed, config
digest and (unless disabled) a UTC timestamp. JSON payloads embed it under
``"manifest"``; CSV and SVG files get a ``<name>.manifest.json`` sidecar.

Version: 0.1.0
"""

from __future__ import annotations

import csv
import json
import subprocess
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass
from datetime import UTC, datetime
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np

from dimerfold import __version__
from dimerfold.core.exceptions import CLIError
from dimerfold.core.logging import get_logger
from dimerfold.core.models import RunConfig

logger = get_logger(__name__)

__all__ = [
    "Manifest",
    "git_hash",
    "make_manifest",
    "to_jsonable",
    "write_csv",
    "write_json",
    "write_manifest",
]


@lru_cache(maxsize=1)
def git_hash() -> str:
    """HEAD commit of the working directory, or ``"unknown"`` outside git."""
    try:
        result = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    return result.stdout.strip() if result.returncode == 0 else "unknown"


@dataclass(frozen=True)
class Manifest:
    command: str
    version: str
    git_hash: str
    seed: int
    config_digest: str
    timestamp: str | None = None

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        if self.timestamp is None:
            del data["timestamp"]
        return data


def make_manifest(command: str, config: RunConfig) -> Manifest:
    stamp = datetime.now(UTC).isoformat(timespec="seconds") if config.timestamp else None
    return Manifest(
        command=command,
        version=__version__,
        git_hash=git_hash(),
        seed=config.seed,
        config_digest=config.digest(),
        timestamp=stamp,
    )


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays, complex numbers and paths."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _dump(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n"


def _prepare(path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CLIError(f"cannot create output directory {path.parent}", details={"error": str(e)}) from e
    return path


def write_manifest(path: Path, manifest: Manifest) -> Path:
    """Sidecar ``<name>.manifest.json`` for a non-JSON output."""
    sidecar = path.with_name(path.name + ".manifest.json")
    _prepare(sidecar).write_text(_dump(manifest.to_dict()), encoding="utf-8")
    return sidecar


def write_json(path: Path, payload: Mapping[str, Any], manifest: Manifest) -> Path:
    """JSON with sorted keys and the manifest embedded."""
    data = {"manifest": manifest.to_dict(), **payload}
    _prepare(path).write_text(_dump(data), encoding="utf-8")
    logger.debug("report_written", path=str(path), format="json")
    return path


def write_csv(
    path: Path,
    rows: Sequence[Mapping[str, Any]],
    manifest: Manifest,
    columns: Sequence[str] | None = None,
) -> Path:
    """CSV with ``repr``-exact floats and a manifest sidecar."""
    columns = list(columns or (rows[0].keys() if rows else []))
    with _prepare(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})
    write_manifest(path, manifest)
    logger.debug("report_written", path=str(path), format="csv", rows=len(rows))
    return path


def _cell(value: Any) -> Any:
    value = to_jsonable(value)
    if isinstance(value, dict):
        return f"{value['re']!r}{value['im']:+}j" if set(value) == {"re", "im"} else json.dumps(value)
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else value
