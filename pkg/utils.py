import json
import logging
import math
import os
import re
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from sobonet import __version__
from sobonet.errors import SobonetError

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent
OUTPUT_DIR = Path(os.getenv("SOBONET_OUTPUT_DIR", BASE_DIR / "outputs"))
NETWORKS_SUBDIR = "networks"
REPORTS_SUBDIR = "reports"

# stable schemas so an empty run still writes a header
SCHEMAS: Dict[str, List[str]] = {
    "sweep-rate": ["K", "N", "L", "order", "sup_err"],
    "measure": ["order", "sup_err", "grid", "discarded"],
    "approx": ["order", "sup_err", "grid", "discarded"],
    "gap-sweep": ["M", "replica", "R_S", "R_D", "gap"],
    "gap-summary": ["M", "median_gap", "iqr", "replicas"],
    "shatter": ["m", "i", "patterns_found", "patterns_possible", "shattered", "samples",
                "samples_used", "seed", "strategy"],
    "train": ["step", "R_S"],
}


class ReportError(SobonetError):
    """Raised when a report or manifest cannot be written."""


def ensure_dirs(root: Optional[Path] = None) -> Path:
    root = Path(root or OUTPUT_DIR)
    for d in [root, root / NETWORKS_SUBDIR, root / REPORTS_SUBDIR]:
        d.mkdir(parents=True, exist_ok=True)
    return root


def sanitize_filename(name: str, max_len: int = 120) -> str:
    name = re.sub(r"[\\/:*?\"<>|,\s]", "_", name)
    if len(name) > max_len:
        stem, ext = os.path.splitext(name)
        name = f"{stem[: max_len - len(ext) - 1]}{ext}"
    return name


def artifact_path(root: Path, subdir: str, stem: str, ext: str) -> Path:
    """Deterministic artifact location; repeated runs overwrite the same file."""
    if not ext.startswith("."):
        ext = "." + ext
    return Path(root) / subdir / f"{sanitize_filename(stem)}{ext}"


def _plain(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def _columns(rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]]) -> List[str]:
    cols: List[str] = list(columns or [])
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    return cols


def emit_report(kind: str, rows: Iterable[Mapping[str, Any]], path: Path,
                columns: Optional[Sequence[str]] = None, meta: Optional[Mapping[str, Any]] = None) -> Path:
    """
    Write ``rows`` as CSV or JSON.

    CSV: header row, '\\n' line endings, shortest round-trip floats.
    JSON: indent 2, sorted keys; ``meta`` is stored next to the rows.
    """
    rows = [dict(r) for r in rows]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if kind == "csv":
            frame = pd.DataFrame([_plain(r) for r in rows], columns=_columns(rows, columns))
            frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
        elif kind == "json":
            doc: Any = [_plain(r) for r in rows]
            if meta is not None:
                doc = {"meta": _plain(meta), "rows": doc}
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        else:
            raise ReportError(f"unknown report kind {kind!r} (expected csv or json)")
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e}") from e
    logger.debug("wrote %s report with %d rows to %s", kind, len(rows), path)
    return path


class RunManifest(BaseModel):
    """Everything needed to re-run a command; timestamps aside, replays are byte-identical."""

    subcommand: str
    argv: List[str]
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    artifacts: List[str] = Field(default_factory=list)
    version: str = __version__
    started: str = ""
    finished: str = ""

    def add(self, path: Path) -> Path:
        self.artifacts.append(Path(path).as_posix())
        return path

    def write(self, root: Path) -> Path:
        self.finished = time.strftime("%Y-%m-%dT%H:%M:%S")
        path = Path(root) / f"manifest_{sanitize_filename(self.subcommand)}.json"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                json.dumps(_plain(self.model_dump(mode="json")), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
        except OSError as e:
            raise ReportError(f"cannot write manifest {path}: {e}") from e
        return path


def load_manifest(path: Path) -> RunManifest:
    try:
        return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ReportError(f"cannot read manifest {path}: {e}") from e


def replay_argv(manifest: RunManifest, output_dir: Optional[str] = None) -> List[str]:
    """The manifest's argv, optionally redirected to another output directory."""
    argv: List[str] = []
    skip = False
    for tok in manifest.argv:
        if skip:
            skip = False
            continue
        if output_dir is not None and tok == "--output-dir":
            skip = True
            continue
        if output_dir is not None and tok.startswith("--output-dir="):
            continue
        argv.append(tok)
    if output_dir is not None:
        argv = ["--output-dir", output_dir] + argv
    return argv


def parse_int_list(text: str) -> List[int]:
    """'4,8,16' or '2^6..2^12' (powers of two inclusive) to a list of ints."""
    text = text.strip()
    m = re.fullmatch(r"2\^(\d+)\.\.2\^(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return [2 ** k for k in range(lo, hi + 1)]
    return [int(v) for v in text.split(",") if v.strip()]
