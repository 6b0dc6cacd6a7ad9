from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import orjson
from loguru import logger

from .recorder import atomic_write

CACHE_ENV = "EQUILAB_CACHE_DIR"


def cache_dir(root: Optional[Path] = None) -> Path:
	env = os.environ.get(CACHE_ENV)
	path = Path(env) if env else (root or Path.cwd()) / "data" / "cache"
	path.mkdir(parents=True, exist_ok=True)
	return path


def write_blob(path: Path, magic: bytes, header: Dict[str, Any], array: np.ndarray, dtype: str) -> Path:
	"""magic | uint32 LE header length | orjson header | packed little-endian array."""
	head = orjson.dumps({**header, "shape": list(array.shape), "dtype": dtype}, option=orjson.OPT_SORT_KEYS)
	body = np.ascontiguousarray(array, dtype=np.dtype(dtype)).tobytes()
	atomic_write(path, magic + struct.pack("<I", len(head)) + head + body)
	logger.debug(f"cached {array.shape} array at {path}")
	return path


def read_blob(path: Path, magic: bytes) -> Optional[Tuple[Dict[str, Any], np.ndarray]]:
	if not path.exists():
		return None
	raw = path.read_bytes()
	if raw[: len(magic)] != magic:
		logger.warning(f"ignoring cache file with a foreign header: {path}")
		return None
	offset = len(magic)
	(size,) = struct.unpack("<I", raw[offset:offset + 4])
	header = orjson.loads(raw[offset + 4:offset + 4 + size])
	array = np.frombuffer(raw[offset + 4 + size:], dtype=np.dtype(header["dtype"]))
	return header, array.reshape(header["shape"]).astype(np.int64)
