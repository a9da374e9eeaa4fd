"""Report writers: CSV through pandas, JSON with sorted keys."""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def to_plain(value: Any) -> Any:
    """Convert numpy scalars and arrays to builtins; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def write_json(data: Dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_plain(data), indent=2, sort_keys=True) + "\n")
    log.info(f"Report written to {path}")
    return path


def write_csv(rows: List[Dict], columns: List[str], path: Union[str, Path]) -> Path:
    path = Path(path)
    df = pd.DataFrame(rows, columns=columns)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    log.info(f"{len(df)} rows written to {path}")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)
