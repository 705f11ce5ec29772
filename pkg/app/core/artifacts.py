"""
Artifact I/O
Canonical JSON, CSV tables, JSON-lines records and raw float32 tensor files
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Union

import numpy as np
import pandas as pd
import torch

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def canonical_json(payload: Any) -> str:
    """Serialize with sorted keys and fixed separators so equal payloads give equal bytes"""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def fingerprint(payload: Any) -> str:
    """SHA-256 of the compact canonical JSON of a payload"""
    compact = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(compact.encode()).hexdigest()


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload), encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"JSON file not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def write_csv(path: PathLike, rows: List[Dict[str, Any]], columns: List[str] = None) -> Path:
    """Write rows as CSV through pandas; column order follows `columns` when given"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format="%.10g")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    return path


def iter_jsonl(path: PathLike) -> Iterator[tuple]:
    """
    Yield (line_number, record) pairs from a JSON-lines file

    Blank lines are skipped. A line that is not a JSON object raises
    ValueError naming its 1-based line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"JSON-lines file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}: line {line_number}: invalid JSON ({e.msg})") from e
            if not isinstance(record, dict):
                raise ValueError(f"{path}: line {line_number}: expected a JSON object")
            yield line_number, record


def save_tensor(path: PathLike, tensor: torch.Tensor) -> Path:
    """Write a tensor as raw little-endian float32"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = tensor.detach().cpu().to(torch.float32).contiguous().numpy()
    array.astype("<f4", copy=False).tofile(path)
    return path


def load_tensor(path: PathLike, shape: List[int]) -> torch.Tensor:
    """Read a raw little-endian float32 file back into a tensor of the given shape"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Tensor file not found: {path}")
    array = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape)) if shape else 1
    if array.size != expected:
        raise ValueError(f"{path}: expected {expected} floats for shape {shape}, found {array.size}")
    return torch.from_numpy(array.astype(np.float32).reshape(shape))
