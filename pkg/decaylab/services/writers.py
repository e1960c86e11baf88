import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np
import pandas as pd

from decaylab.schemas.config import RunConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="python"), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple) and len(value) == 2:
        return f"{_format_value(value[0])}:{_format_value(value[1])}"
    if isinstance(value, list):
        if value == [(-math.inf, math.inf)]:
            return "all"
        return ",".join(_format_value(item) for item in value) if value else "none"
    return str(value)


def flatten(tree: Dict[str, Any], prefix: str = "") -> List[str]:
    lines = []
    for key in sorted(tree):
        value = tree[key]
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.extend(flatten(value, dotted + "."))
        elif value is not None:
            lines.append(f"{dotted} = {_format_value(value)}")
    return lines


class RunWriter:
    """Owns one output directory; every file in it carries the manifest hash."""

    def __init__(self, out_dir: Union[str, Path], config: RunConfig, extra: Dict[str, Any] = None):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.hash = config_hash(config)
        self.written: List[Path] = []
        lines = flatten(config.model_dump(mode="python"))
        for key, value in sorted((extra or {}).items()):
            lines.append(f"run.{key} = {_format_value(value)}")
        lines.append(f"manifest.hash = {self.hash}")
        self._write("manifest.txt", "\n".join(lines) + "\n", stamp=False)

    def _write(self, name: str, body: str, stamp: bool = True) -> Path:
        path = self.out_dir / name
        with path.open("w", newline="\n") as handle:
            if stamp:
                handle.write(f"# manifest_hash={self.hash}\n")
            handle.write(body)
        self.written.append(path)
        logger.debug("wrote %s", path)
        return path

    def write_frame(self, name: str, frame: pd.DataFrame, index: bool = False) -> Path:
        return self._write(name, frame.to_csv(float_format=FLOAT_FORMAT, index=index, lineterminator="\n"))

    def write_text(self, name: str, lines: Iterable[str]) -> Path:
        return self._write(name, "".join(f"{line}\n" for line in lines))

    def write_matrix(self, name: str, rows: np.ndarray, steps: np.ndarray) -> Path:
        """One state per line, step index first."""
        frame = pd.DataFrame(rows)
        frame.insert(0, "step", steps)
        return self.write_frame(name, frame)
