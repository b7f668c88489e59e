"""
CSV output with `#`-prefixed key=value metadata lines.
All floats are written with 17 significant digits.
"""
from pathlib import Path
from typing import Dict, Tuple, Union

import pandas as pd

from gradfamily.core.logging import get_logger

logger = get_logger("csv_export")

FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def render_csv(frame: pd.DataFrame, metadata: Dict[str, str]) -> str:
    header = "".join(f"# {key}={value}\n" for key, value in metadata.items())
    return header + frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_csv(path: PathLike, frame: pd.DataFrame, metadata: Dict[str, str]) -> Path:
    """Write metadata lines followed by the frame; overwrites existing files."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(render_csv(frame, metadata), encoding="utf-8")
    logger.info(f"Wrote {len(frame)} rows to {target}")
    return target


def read_metadata(path: PathLike) -> Dict[str, str]:
    meta: Dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
    return meta


def read_csv(path: PathLike) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """Frame and metadata of a file written by write_csv."""
    frame = pd.read_csv(path, comment="#", keep_default_na=True)
    return frame, read_metadata(path)
