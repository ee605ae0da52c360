"""CSV and manifest writers shared by the library and the command line."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

SCHEMA_PREFIX = "confined_tracer"
SCHEMA_VERSION = 1


def schema_name(kind: str) -> str:
    return f"{SCHEMA_PREFIX}/{kind}/v{SCHEMA_VERSION}"


def fmt(value: Any) -> str:
    """Render one CSV cell; floats get 12 significant digits."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".12g")
    try:
        import numpy as np

        if isinstance(value, np.integer):
            return str(int(value))
        if isinstance(value, np.floating):
            return format(float(value), ".12g")
    except ImportError:  # pragma: no cover
        pass
    return str(value)


def write_csv(
    path: str | os.PathLike,
    kind: str,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    meta: dict[str, Any] | None = None,
) -> Path:
    """Write ``rows`` with a schema comment on line 1 and ``# key=value`` lines after it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema: {schema_name(kind)}\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={fmt(value)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path: str | os.PathLike) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Inverse of :func:`write_csv`: (meta including 'schema', header, rows as strings)."""
    meta: dict[str, str] = {}
    header: list[str] = []
    rows: list[list[str]] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("schema:"):
                    meta["schema"] = body.split(":", 1)[1].strip()
                elif "=" in body:
                    k, v = body.split("=", 1)
                    meta[k] = v
            elif not header:
                header = line.split(",")
            elif line:
                rows.append(line.split(","))
    return meta, header, rows


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Record of one command invocation and the files it produced."""

    command: str
    parameters: dict[str, Any]
    seed: int | None
    version: str
    argv: list[str] = field(default_factory=lambda: list(sys.argv[1:]))
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: list[str] = field(default_factory=list)

    def add(self, path: str | os.PathLike) -> None:
        self.outputs.append(str(path))

    def write(self, directory: str | os.PathLike) -> Path:
        self.finished = _now()
        out = Path(directory) / f"{self.command}_manifest.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "version": self.version,
            "argv": self.argv,
            "started": self.started,
            "finished": self.finished,
            "outputs": [os.path.basename(p) for p in self.outputs],
        }
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return out
