from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import orjson
from loguru import logger

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def atomic_write(path: Path, data: bytes) -> Path:
	"""Write to a sibling temp file, then rename over the target."""
	path.parent.mkdir(parents=True, exist_ok=True)
	tmp = path.with_name(path.name + ".tmp")
	with open(tmp, "wb") as f:
		f.write(data)
	os.replace(tmp, path)
	return path


def _flatten(record: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
	flat: Dict[str, Any] = {}
	for key, value in record.items():
		name = f"{prefix}{key}"
		if isinstance(value, Mapping):
			flat.update(_flatten(value, prefix=f"{name}."))
		elif isinstance(value, (list, tuple)):
			flat[name] = orjson.dumps(value).decode()
		else:
			flat[name] = value
	return flat


def csv_bytes(rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> bytes:
	flat = [_flatten(r) for r in rows]
	if columns is None:
		seen: Dict[str, None] = {}
		for r in flat:
			for key in r:
				seen.setdefault(key, None)
		columns = list(seen)
	buf = io.StringIO()
	writer = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
	writer.writeheader()
	for r in flat:
		writer.writerow({c: ("" if r.get(c) is None else r.get(c)) for c in columns})
	return buf.getvalue().encode("utf-8")


@dataclass
class RecorderConfig:
	root: Path
	atomic: bool = True


class DataRecorder:
	"""Writes experiment outputs under one directory: result JSON, CSV extracts, JSONL exports."""

	def __init__(self, config: RecorderConfig) -> None:
		self.root = config.root
		self.atomic = config.atomic
		self.root.mkdir(parents=True, exist_ok=True)
		(self.root / "plots").mkdir(parents=True, exist_ok=True)

	def _write(self, path: Path, data: bytes) -> Path:
		if self.atomic:
			atomic_write(path, data)
		else:
			path.write_bytes(data)
		logger.info(f"wrote {path}")
		return path

	def write_json(self, name: str, payload: Any) -> Path:
		return self._write(self.root / name, orjson.dumps(payload, option=JSON_OPTIONS) + b"\n")

	def write_csv(self, name: str, rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> Path:
		return self._write(self.root / name, csv_bytes(rows, columns))

	def write_plot_data(self, name: str, rows: Sequence[Mapping[str, Any]]) -> Path:
		return self.write_csv(f"plots/{name}", rows)

	def write_jsonl(self, name: str, records: Iterable[Mapping[str, Any]]) -> Path:
		data = b"".join(orjson.dumps(r) + b"\n" for r in records)
		return self._write(self.root / name, data)


def read_json(path: Path) -> Any:
	return orjson.loads(path.read_bytes())


def read_csv(path: Path) -> List[Dict[str, str]]:
	with open(path, newline="", encoding="utf-8") as f:
		return list(csv.DictReader(f))
