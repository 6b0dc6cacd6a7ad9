from __future__ import annotations

from collections import defaultdict
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import linregress


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
	"""Least-squares slope of log(y) against log(x); None with fewer than two positive pairs."""
	pairs = [(float(x), float(y)) for x, y in zip(xs, ys) if x is not None and y is not None and x > 0 and y > 0]
	if len(pairs) < 2 or len({x for x, _ in pairs}) < 2:
		return None
	lx, ly = np.log(np.array(pairs)).T
	return float(linregress(lx, ly).slope)


class SweepAnalyzer:
	"""Per-group trends over the prime axis of a sweep."""

	def __init__(self, records: Iterable[Mapping[str, Any]], group: str = "region") -> None:
		self.groups: Dict[str, List[Mapping[str, Any]]] = defaultdict(list)
		for rec in records:
			if rec.get("status", "ok") == "ok":
				self.groups[str(rec.get(group))].append(rec)

	def slopes(self, field: str) -> Dict[str, Optional[float]]:
		out = {}
		for name, recs in sorted(self.groups.items()):
			recs = sorted(recs, key=lambda r: r["p"])
			out[name] = loglog_slope([r["p"] for r in recs], [r.get(field) for r in recs])
		return out

	def maxima(self, field: str) -> Dict[str, Optional[float]]:
		out: Dict[str, Optional[float]] = {}
		for name, recs in sorted(self.groups.items()):
			values = [abs(float(r[field])) for r in recs if r.get(field) is not None]
			out[name] = max(values) if values else None
		return out

	def summary(self, fields: Sequence[str]) -> Dict[str, Any]:
		return {field: {"slope": self.slopes(field), "max_abs": self.maxima(field)} for field in fields}
