from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .errors import DimensionMismatchError, check_guard
from .region import Region

FIXED_BITS = 63
FIXED_ONE = 1 << FIXED_BITS
GRID_GUARD = 1 << 24  # k^m cubes per certified level
MAX_LEVEL = 20
DEPTH_POLICIES = ("thm1", "thm2", "thm3", "explicit")


@dataclass(frozen=True)
class Anchor:
	"""Grid offset gamma with coordinates v_j / 2^63."""

	numerators: Tuple[int, ...]
	seed: Optional[int] = None

	@property
	def m(self) -> int:
		return len(self.numerators)

	@property
	def gamma(self) -> Tuple[Fraction, ...]:
		return tuple(Fraction(v, FIXED_ONE) for v in self.numerators)

	def as_floats(self) -> np.ndarray:
		return np.array([v / FIXED_ONE for v in self.numerators])

	def hits(self, denominator: int) -> bool:
		"""True when some coordinate equals u/denominator for an integer u."""
		return any(v * denominator % FIXED_ONE == 0 for v in self.numerators)


def boundary_denominators(p: int, M: int) -> List[int]:
	return [(1 << i) * p for i in range(M + 1)]


def draw_anchor(m: int, seed: int, forbidden_denominators: Iterable[int] = ()) -> Anchor:
	rng = np.random.default_rng(seed)
	forbidden = sorted(set(int(q) for q in forbidden_denominators))
	coords: List[int] = []
	redraws = 0
	while len(coords) < m:
		v = int(rng.integers(1, FIXED_ONE, dtype=np.uint64))
		if any(v * q % FIXED_ONE == 0 for q in forbidden):
			redraws += 1
			continue
		coords.append(v)
	if redraws:
		logger.debug(f"anchor seed={seed}: {redraws} coordinate redraws")
	return Anchor(numerators=tuple(coords), seed=seed)


@dataclass(frozen=True)
class AnchoredCube:
	"""Closed cube prod_j [gamma_j + u_j/k, gamma_j + (u_j+1)/k] mod 1."""

	level: int
	coords: Tuple[int, ...]
	anchor: Anchor

	@property
	def side(self) -> Fraction:
		return Fraction(1, self.level)

	def corner(self) -> Tuple[Fraction, ...]:
		return tuple((g + Fraction(u, self.level)) % 1 for g, u in zip(self.anchor.gamma, self.coords))

	def measure(self) -> Fraction:
		return Fraction(1, self.level ** len(self.coords))

	def parent(self) -> "AnchoredCube":
		if self.level % 2:
			raise ValueError(f"level {self.level} has no dyadic parent")
		return AnchoredCube(self.level // 2, tuple(u // 2 for u in self.coords), self.anchor)

	def ancestor(self, level: int) -> "AnchoredCube":
		if self.level % level:
			raise ValueError(f"level {level} does not divide {self.level}")
		step = self.level // level
		return AnchoredCube(level, tuple(u // step for u in self.coords), self.anchor)

	def contains(self, other: "AnchoredCube") -> bool:
		if other.level % self.level:
			return False
		return other.ancestor(self.level).coords == self.coords

	def interiors_disjoint(self, other: "AnchoredCube") -> bool:
		coarse, fine = (self, other) if self.level <= other.level else (other, self)
		return not coarse.contains(fine)


def grid_cubes_inside(region: Region, k: int, anchor: Anchor) -> List[AnchoredCube]:
	"""C(k): the cubes of the anchored grid of side 1/k certified inside the region."""
	mask = certified_mask(region, k, anchor)
	return [AnchoredCube(k, tuple(int(u) for u in idx), anchor) for idx in np.argwhere(mask)]


def certified_mask(region: Region, k: int, anchor: Anchor) -> np.ndarray:
	if anchor.m != region.m:
		raise DimensionMismatchError(f"anchor in T_{anchor.m}, region in T_{region.m}")
	check_guard("grid", k**region.m, GRID_GUARD)
	return region.grid_mask(k, anchor.gamma)


def _upsample(mask: np.ndarray) -> np.ndarray:
	for axis in range(mask.ndim):
		mask = np.repeat(mask, 2, axis=axis)
	return mask


@dataclass(frozen=True, eq=False)
class DyadicCover:
	M: int
	layers: Tuple[np.ndarray, ...]  # layer i-1 holds the (count, m) coords of B_i at level 2^i
	region: Region
	anchor: Anchor
	grid_counts: Tuple[int, ...] = ()  # #C(2^i)

	def __post_init__(self) -> None:
		layers = tuple(np.asarray(layer, dtype=np.int64).reshape(-1, self.region.m) for layer in self.layers)
		for layer in layers:
			layer.flags.writeable = False
		object.__setattr__(self, "layers", layers)
		object.__setattr__(self, "grid_counts", tuple(int(c) for c in self.grid_counts))

	@property
	def m(self) -> int:
		return self.region.m

	@property
	def layer_counts(self) -> List[int]:
		return [len(layer) for layer in self.layers]

	@property
	def epsilon(self) -> float:
		return math.sqrt(self.m) * 2.0 ** (-self.M)

	def layer(self, i: int) -> List[AnchoredCube]:
		return [AnchoredCube(1 << i, tuple(int(u) for u in row), self.anchor) for row in self.layers[i - 1]]

	def cubes(self) -> Iterator[Tuple[int, AnchoredCube]]:
		for i in range(1, self.M + 1):
			for cube in self.layer(i):
				yield i, cube

	def union_measure(self) -> Fraction:
		return sum((Fraction(count, 1 << (i * self.m)) for i, count in enumerate(self.layer_counts, start=1)), Fraction(0))

	@cached_property
	def _sets(self) -> List[set]:
		return [set(map(tuple, layer.tolist())) for layer in self.layers]

	def locate(self, x: Sequence[int], p: int) -> Optional[Tuple[int, AnchoredCube]]:
		"""Layer and cube of the cover holding the lattice point x/p, if any."""
		if len(x) != self.m:
			raise DimensionMismatchError(f"point of dimension {len(x)} for a cover in T_{self.m}")
		finest = tuple(_cell_index(int(xj), p, 1 << self.M, v) for xj, v in zip(x, self.anchor.numerators))
		sets = self._sets
		for i in range(1, self.M + 1):
			coords = tuple(u >> (self.M - i) for u in finest)
			if coords in sets[i - 1]:
				return i, AnchoredCube(1 << i, coords, self.anchor)
		return None

	def layer_of(self, points: np.ndarray, p: int) -> np.ndarray:
		"""Layer index (1..M) of the cover cube holding each x/p, 0 when uncovered."""
		pts = np.asarray(points, dtype=np.int64).reshape(-1, self.m)
		out = np.zeros(len(pts), dtype=np.int64)
		if not len(pts):
			return out
		cells = grid_cell_indices(pts, p, 1 << self.M, self.anchor)
		for i in range(1, self.M + 1):
			if not len(self.layers[i - 1]):
				continue
			mask = np.zeros((1 << i,) * self.m, dtype=bool)
			mask[tuple(self.layers[i - 1].T)] = True
			hit = mask[tuple((cells >> (self.M - i)).T)] & (out == 0)
			out[hit] = i
		return out

	def records(self) -> Iterator[Dict[str, Any]]:
		for i, layer in enumerate(self.layers, start=1):
			for row in layer.tolist():
				yield {"level": 1 << i, "coords": row, "layer": i}


def build_cover(region: Region, M: int, anchor: Anchor) -> DyadicCover:
	"""Layers B_1..B_M: B_1 = C(2); B_i keeps the cubes of C(2^i) whose parent is not in C(2^(i-1))."""
	if M < 1:
		raise ValueError(f"cover depth must be >= 1, got {M}")
	if M > MAX_LEVEL:
		raise ValueError(f"cover depth {M} exceeds {MAX_LEVEL}")
	check_guard("grid", (1 << M) ** region.m, GRID_GUARD)
	layers: List[np.ndarray] = []
	counts: List[int] = []
	previous: Optional[np.ndarray] = None
	for i in range(1, M + 1):
		mask = certified_mask(region, 1 << i, anchor)
		counts.append(int(mask.sum()))
		fresh = mask if previous is None else mask & ~_upsample(previous)
		layers.append(np.argwhere(fresh).astype(np.int64))
		logger.debug(f"{region.label}: level 2^{i} certified {counts[-1]}, layer B_{i} has {len(layers[-1])}")
		previous = mask
	return DyadicCover(M=M, layers=layers, region=region, anchor=anchor, grid_counts=counts)


def choose_depth(policy: str, p: int, n: int = 1, M: Optional[int] = None) -> int:
	"""Cover depth for the thm1, thm2 and thm3 cutoffs, or an explicit M."""
	if policy == "explicit":
		if M is None or M < 1:
			raise ValueError("explicit depth policy needs M >= 1")
		return int(M)
	if policy == "thm1":
		depth = (p.bit_length() - 1) // 2  # 4^M <= p
	elif policy == "thm2":
		depth = p.bit_length() - 1  # 2^M <= p
	elif policy == "thm3":
		target = p ** (-1.0 / (2 * (n + 1))) * math.log(p)
		depth = math.ceil(-math.log2(target)) if target < 1 else 1
	else:
		raise ValueError(f"unknown depth policy {policy!r}; expected one of {DEPTH_POLICIES}")
	return max(1, depth)


def _cell_index(x: int, p: int, k: int, v: int) -> int:
	num = (x * FIXED_ONE - v * p) % (p * FIXED_ONE)
	return num * k // (p * FIXED_ONE)


def grid_cell_indices(points: np.ndarray, p: int, k: int, anchor: Anchor) -> np.ndarray:
	"""Exact index u with x/p in the cell starting at gamma + u/k, per row of `points`."""
	pts = np.asarray(points, dtype=np.int64).reshape(-1, anchor.m)
	out = np.empty_like(pts)
	for j, v in enumerate(anchor.numerators):
		table = np.array([_cell_index(x, p, k, v) for x in range(p)], dtype=np.int64)
		out[:, j] = table[pts[:, j] % p]
	return out


def on_grid_boundary(x: Sequence[int], p: int, k: int, anchor: Anchor) -> bool:
	return any((int(xj) * FIXED_ONE - v * p) * k % (p * FIXED_ONE) == 0 for xj, v in zip(x, anchor.numerators))


@dataclass(frozen=True)
class CoverDiagnostics:
	M: int
	mu: float
	layer_counts: List[int]
	grid_counts: List[int]
	ratio_ws: List[float]
	ratio_vws: List[float]
	grid_law: List[float]
	union_measure: Fraction
	deficiency: float
	deficiency_ws: float
	deficiency_vws: float
	epsilon: float

	def rows(self) -> List[Dict[str, Any]]:
		return [
			{
				"i": i,
				"count": self.layer_counts[i - 1],
				"ratio_ws": self.ratio_ws[i - 1],
				"ratio_vws": self.ratio_vws[i - 1],
				"grid_count": self.grid_counts[i - 1],
				"grid_law": self.grid_law[i - 1],
			}
			for i in range(1, self.M + 1)
		]

	def as_dict(self) -> Dict[str, Any]:
		return {
			"M": self.M,
			"mu": self.mu,
			"layer_counts": self.layer_counts,
			"grid_counts": self.grid_counts,
			"ratio_ws": self.ratio_ws,
			"ratio_vws": self.ratio_vws,
			"grid_law": self.grid_law,
			"union_measure": float(self.union_measure),
			"union_measure_exact": str(self.union_measure),
			"deficiency": self.deficiency,
			"deficiency_ws": self.deficiency_ws,
			"deficiency_vws": self.deficiency_vws,
			"epsilon": self.epsilon,
		}


def cover_diagnostics(cover: DyadicCover, region: Optional[Region] = None) -> CoverDiagnostics:
	region = region or cover.region
	m, M = region.m, cover.M
	mu = region.measure()
	shape = mu ** ((m - 1) / m)
	counts = cover.layer_counts
	ratio_ws = [c / 2.0 ** (i * (m - 1)) for i, c in enumerate(counts, start=1)]
	ratio_vws = [c / (1.0 + shape * 2.0 ** (i * (m - 1))) for i, c in enumerate(counts, start=1)]
	grid_law = [(g - (2.0**i) ** m * mu) / (2.0**i) ** (m - 1) for i, g in enumerate(cover.grid_counts, start=1)]
	union = cover.union_measure()
	deficiency = mu - float(union)
	return CoverDiagnostics(
		M=M,
		mu=mu,
		layer_counts=counts,
		grid_counts=list(cover.grid_counts),
		ratio_ws=ratio_ws,
		ratio_vws=ratio_vws,
		grid_law=grid_law,
		union_measure=union,
		deficiency=deficiency,
		deficiency_ws=deficiency / 2.0 ** (-M),
		deficiency_vws=deficiency / (shape * 2.0 ** (-M) + 2.0 ** (-M * m)),
		epsilon=cover.epsilon,
	)


def grid_count_law(region: Region, levels: Sequence[int], anchor: Anchor) -> List[Dict[str, float]]:
	"""(#C(k) - k^m mu) / k^(m-1) for each grid size k."""
	mu = region.measure()
	rows = []
	for k in levels:
		count = int(certified_mask(region, k, anchor).sum())
		rows.append({"k": k, "count": count, "law": (count - k**region.m * mu) / k ** (region.m - 1)})
	return rows
