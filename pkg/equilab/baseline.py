from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Set

import orjson
from loguru import logger

from .recorder import atomic_write, read_json

# Fields that move with the anchor or the Monte-Carlo stream when the seed changes.
SEED_SENSITIVE = {
	"anchor",
	"cell_seed",
	"layer_counts",
	"grid_counts",
	"ratio_ws",
	"ratio_vws",
	"grid_law",
	"union_measure",
	"union_measure_exact",
	"deficiency",
	"deficiency_ws",
	"deficiency_vws",
	"sampled_D",
	"fouvry_max_abs",
	"fouvry_counts",
	"max_ratio",
	"rows",
}
# Extra fields that follow the Monte-Carlo stream when a cell recorded method "sampled".
SAMPLED_SENSITIVE = {"thm1_ratio", "thm2_ratio", "witness", "argmax"}
DISCREPANCY_FIELDS = {"exact_D", "sampled_D", "thm1_ratio", "thm2_ratio", "D", "ratio"}
IGNORED = {"wall_clock", "elapsed"}


@dataclass(frozen=True)
class Tolerance:
	sums: float = 1e-9
	discrepancies: float = 1e-6

	def for_field(self, name: str) -> float:
		return self.discrepancies if name in DISCREPANCY_FIELDS else self.sums


@dataclass
class BaselineReport:
	statuses: Dict[str, str] = field(default_factory=dict)
	failures: List[str] = field(default_factory=list)
	seed_sensitive: List[str] = field(default_factory=list)

	@property
	def passed(self) -> bool:
		return not self.failures

	def as_dict(self) -> Dict[str, Any]:
		return {"passed": self.passed, "statuses": self.statuses, "failures": self.failures, "seed_sensitive": self.seed_sensitive}


def _close(a: Any, b: Any, tol: float) -> bool:
	if isinstance(a, bool) or isinstance(b, bool) or a is None or b is None or isinstance(a, str) or isinstance(b, str):
		return a == b
	if isinstance(a, int) and isinstance(b, int):
		return a == b
	if isinstance(a, (int, float)) and isinstance(b, (int, float)):
		if math.isnan(a) or math.isnan(b):
			return math.isnan(a) and math.isnan(b)
		return math.isclose(a, b, rel_tol=tol, abs_tol=tol * 1e-3)
	if isinstance(a, list) and isinstance(b, list):
		return len(a) == len(b) and all(_close(x, y, tol) for x, y in zip(a, b))
	if isinstance(a, dict) and isinstance(b, dict):
		return a.keys() == b.keys() and all(_close(a[k], b[k], tol) for k in a)
	return a == b


def _diff_fields(current: Mapping[str, Any], recorded: Mapping[str, Any], tolerance: Tolerance) -> List[str]:
	return [
		name
		for name in sorted(set(current) | set(recorded))
		if name not in IGNORED and not _close(current.get(name), recorded.get(name), tolerance.for_field(name))
	]


def _seed_sensitive_fields(recorded: Mapping[str, Any]) -> Set[str]:
	return SEED_SENSITIVE | SAMPLED_SENSITIVE if recorded.get("method") == "sampled" else SEED_SENSITIVE


def _cells(payload: Mapping[str, Any]) -> Dict[str, Mapping[str, Any]]:
	return {cell["key"]: cell for cell in payload.get("cells", [])}


def write_baseline(result: Mapping[str, Any], baseline_file: Path) -> Path:
	payload = {"config_hash": result.get("config_hash"), "seed": result.get("seed"), "cells": result.get("cells", [])}
	return atomic_write(baseline_file, orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS) + b"\n")


def check_baselines(result: Mapping[str, Any], baseline_file: Path, tolerance: Tolerance = Tolerance()) -> BaselineReport:
	"""Compare a result payload with a recorded baseline; the first call records it."""
	report = BaselineReport()
	if not baseline_file.exists():
		write_baseline(result, baseline_file)
		for key in _cells(result):
			report.statuses[key] = "recorded"
		logger.info(f"baseline recorded at {baseline_file}")
		return report
	baseline = read_json(baseline_file)
	seed_changed = baseline.get("seed") != result.get("seed")
	current = _cells(result)
	for key, recorded in _cells(baseline).items():
		if key not in current:
			report.statuses[key] = "missing"
			report.failures.append(f"{key}: cell missing from result")
			continue
		diffs = _diff_fields(current[key], recorded, tolerance)
		if seed_changed:
			moving = _seed_sensitive_fields(recorded)
			sensitive = [d for d in diffs if d in moving]
			diffs = [d for d in diffs if d not in moving]
			if sensitive:
				report.seed_sensitive.append(f"{key}: {', '.join(sensitive)}")
		if diffs:
			report.statuses[key] = "fail"
			report.failures.append(f"{key}: {', '.join(diffs)} differ")
		else:
			report.statuses[key] = "seed-sensitive" if seed_changed and any(s.startswith(f"{key}:") for s in report.seed_sensitive) else "pass"
	for key in current:
		report.statuses.setdefault(key, "new")
	if report.failures:
		logger.warning(f"{len(report.failures)} baseline mismatches against {baseline_file}")
	return report
