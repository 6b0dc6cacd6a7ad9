from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
from loguru import logger
from scipy.stats import linregress

from .cache import read_blob, write_blob
from .dyadic import DyadicCover
from .errors import DependentSystemError, DimensionMismatchError, check_guard
from .field_poly import PolySystem, as_prime, degree2_independent, linear_combination, value_table
from .region import Region, iter_grid_blocks, lattice_points

CUBE_GUARD = 10**9
SCAN_GUARD = 10**7
FFT_GUARD = 10**7  # p^n cells of the joint histogram
TABLE_GUARD = 10**8  # rows held in memory by a ValueTable
L_SCAN = 10
TABLE_MAGIC = b"EQVT"
METHODS = ("histogram", "naive")

CoeffVector = Tuple[int, ...]


@dataclass(frozen=True)
class ExpSumResult:
	value: complex
	a: CoeffVector
	p: int
	range: Dict[str, Any]
	point_count: int

	@property
	def abs(self) -> float:
		return abs(self.value)

	@property
	def ratio(self) -> Optional[float]:
		"""|S| / (sqrt(p) w^(m-1) log p) on a cube; None for region sums."""
		if self.range.get("kind") != "cube":
			return None
		return self.abs / fk_normaliser(self.p, self.range["w"], len(self.range["u"]))

	def as_row(self) -> Dict[str, Any]:
		row: Dict[str, Any] = {f"a{j + 1}": v for j, v in enumerate(self.a)}
		row.update({"re": self.value.real, "im": self.value.imag, "abs": self.abs, "ratio": self.ratio})
		return row


@dataclass(frozen=True)
class MaxSumResult:
	S_star: float
	argmax: Optional[CoeffVector]
	L: int
	scanned: int
	method: str
	point_count: int


@lru_cache(maxsize=64)
def roots_of_unity(p: int) -> np.ndarray:
	"""e(t/p) for t = 0..p-1."""
	table = np.exp(2j * np.pi * np.arange(p) / p)
	table.flags.writeable = False
	return table


def _cube_points(u: Sequence[int], w: int, p: int) -> Iterator[np.ndarray]:
	for block in iter_grid_blocks(w + 1, len(u)):
		yield (block + np.asarray(u, dtype=np.int64)) % p


def _check_cube(u: Union[int, Sequence[int]], w: int, p: int, m: int) -> Tuple[int, ...]:
	corner = (int(u),) * m if isinstance(u, (int, np.integer)) else tuple(int(x) for x in u)
	if len(corner) != m:
		raise DimensionMismatchError(f"cube corner has {len(corner)} coordinates, system has {m} variables")
	if not 1 <= w < p:
		raise ValueError(f"cube width must satisfy 1 <= w < p, got w={w}, p={p}")
	check_guard("cube", (w + 1) ** m, CUBE_GUARD)
	return corner


def _phases(values: np.ndarray, a: Sequence[int], p: int) -> np.ndarray:
	t = np.zeros(values.shape[0], dtype=np.int64)
	for j, coeff in enumerate(a):
		t = (t + values[:, j] * (int(coeff) % p)) % p
	return t


def histogram_sum(values: np.ndarray, a: Sequence[int], p: int) -> complex:
	"""sum_t N_t e(t/p) with N_t = #{x : a . G(x) = t mod p}."""
	counts = np.bincount(_phases(values, a, p), minlength=p)
	return complex(np.sum(counts * roots_of_unity(p)))


def naive_sum(system: PolySystem, a: Sequence[int], p: int, points: np.ndarray) -> complex:
	"""Direct sum of e(H(x)/p) for the combined polynomial H = sum a_j G_j."""
	combined = linear_combination(system, a, p)
	phases = combined.evaluate_many(points, p) if len(points) else np.zeros(0, dtype=np.int64)
	return complex(np.sum(np.exp(2j * np.pi * phases / p)))


def _range_key(rng: Dict[str, Any]) -> str:
	return hashlib.sha256(orjson.dumps(rng, option=orjson.OPT_SORT_KEYS)).hexdigest()[:12]


@dataclass
class ValueTable:
	"""Value vectors (G_1(x), ..., G_n(x)) mod p over a cube or a region."""

	values: np.ndarray
	p: int
	system_hash: str
	range: Dict[str, Any]

	@property
	def n(self) -> int:
		return self.values.shape[1]

	@property
	def point_count(self) -> int:
		return self.values.shape[0]

	@classmethod
	def for_cube(cls, system: PolySystem, p: int, u: Union[int, Sequence[int]], w: int, cache: Optional[Path] = None) -> "ValueTable":
		q = as_prime(p)
		corner = _check_cube(u, w, q, system.m)
		check_guard("table", (w + 1) ** system.m, TABLE_GUARD)
		rng = {"kind": "cube", "u": list(corner), "w": w}
		cached = cls._load(cache, system, q, rng)
		if cached is not None:
			return cached
		parts = [value_table(system, block, q) for block in _cube_points(corner, w, q)]
		table = cls(values=np.concatenate(parts), p=q, system_hash=system.system_hash, range=rng)
		table._store(cache)
		return table

	@classmethod
	def for_region(cls, system: PolySystem, p: int, region: Region, cache: Optional[Path] = None) -> "ValueTable":
		q = as_prime(p)
		if region.m != system.m:
			raise DimensionMismatchError(f"region in T_{region.m}, system in {system.m} variables")
		rng = {"kind": "region", "region": region.describe()}
		cached = cls._load(cache, system, q, rng)
		if cached is not None:
			return cached
		points = lattice_points(region, q)
		check_guard("table", len(points), TABLE_GUARD)
		table = cls(values=value_table(system, points, q), p=q, system_hash=system.system_hash, range=rng)
		table._store(cache)
		return table

	@staticmethod
	def _cache_file(cache: Path, system_hash: str, p: int, rng: Dict[str, Any]) -> Path:
		return cache / f"values_{system_hash}_p{p}_{_range_key(rng)}.bin"

	@classmethod
	def _load(cls, cache: Optional[Path], system: PolySystem, p: int, rng: Dict[str, Any]) -> Optional["ValueTable"]:
		if cache is None:
			return None
		blob = read_blob(cls._cache_file(cache, system.system_hash, p, rng), TABLE_MAGIC)
		if blob is None:
			return None
		header, values = blob
		if header.get("system_hash") != system.system_hash or header.get("p") != p or header.get("range") != rng:
			return None
		logger.debug(f"value table for p={p} loaded from cache")
		return cls(values=values, p=p, system_hash=system.system_hash, range=rng)

	def _store(self, cache: Optional[Path]) -> None:
		if cache is None:
			return
		header = {"system_hash": self.system_hash, "p": self.p, "n": self.n, "count": self.point_count, "range": self.range}
		write_blob(self._cache_file(cache, self.system_hash, self.p, self.range), TABLE_MAGIC, header, self.values, "<i4")

	def joint_histogram(self) -> np.ndarray:
		check_guard("fft", self.p**self.n, FFT_GUARD)
		codes = np.ravel_multi_index(tuple(self.values.T), (self.p,) * self.n)
		return np.bincount(codes, minlength=self.p**self.n).reshape((self.p,) * self.n)

	def sum_for(self, a: Sequence[int]) -> complex:
		if len(a) != self.n:
			raise DimensionMismatchError(f"coefficient vector has length {len(a)}, system has {self.n} polynomials")
		return histogram_sum(self.values, a, self.p)

	def all_sums(self) -> np.ndarray:
		"""S(a) for every a in F_p^n at once: p^n times the inverse DFT of the joint histogram."""
		hist = self.joint_histogram().astype(np.float64)
		return np.fft.ifftn(hist) * self.p**self.n


def exp_sum_cube(system: PolySystem, a: Sequence[int], p: int, u: Union[int, Sequence[int]], w: int, method: str = "histogram") -> ExpSumResult:
	q = as_prime(p)
	if len(a) != system.n:
		raise DimensionMismatchError(f"coefficient vector has length {len(a)}, system has {system.n} polynomials")
	corner = _check_cube(u, w, q, system.m)
	if method not in METHODS:
		raise ValueError(f"unknown evaluator {method!r}")
	if method == "naive":
		value = sum((naive_sum(system, a, q, block) for block in _cube_points(corner, w, q)), 0j)
	else:
		counts = np.zeros(q, dtype=np.int64)
		for block in _cube_points(corner, w, q):
			counts += np.bincount(_phases(value_table(system, block, q), a, q), minlength=q)
		value = complex(np.sum(counts * roots_of_unity(q)))
	return ExpSumResult(value=value, a=tuple(int(x) for x in a), p=q, range={"kind": "cube", "u": list(corner), "w": w}, point_count=(w + 1) ** system.m)


def exp_sum_region(system: PolySystem, a: Sequence[int], p: int, region: Region, method: str = "histogram") -> ExpSumResult:
	q = as_prime(p)
	if len(a) != system.n:
		raise DimensionMismatchError(f"coefficient vector has length {len(a)}, system has {system.n} polynomials")
	points = lattice_points(region, q)
	if method == "naive":
		value = naive_sum(system, a, q, points)
	else:
		value = histogram_sum(value_table(system, points, q), a, q)
	return ExpSumResult(value=value, a=tuple(int(x) for x in a), p=q, range={"kind": "region", "region": region.label}, point_count=len(points))


def canonical_vectors(n: int, L: int, p: Optional[int] = None) -> np.ndarray:
	"""Nonzero a in [-L, L]^n with first nonzero coordinate positive, lexicographic order.

	With `p` given, vectors that vanish mod p are dropped.
	"""
	check_guard("scan", (2 * L + 1) ** n - 1, SCAN_GUARD)
	grid = np.stack(np.meshgrid(*[np.arange(-L, L + 1)] * n, indexing="ij"), axis=-1).reshape(-1, n)
	nonzero = grid != 0
	first = np.argmax(nonzero, axis=1)
	lead = grid[np.arange(len(grid)), first]
	keep = lead > 0
	if p is not None:
		keep &= (grid % p != 0).any(axis=1)
	return grid[keep]


def _scan(table: ValueTable, L: int) -> Tuple[np.ndarray, np.ndarray, str]:
	vectors = canonical_vectors(table.n, L, table.p)
	if not len(vectors):
		return vectors, np.zeros(0, dtype=complex), "empty"
	if table.p**table.n <= FFT_GUARD:
		sums = table.all_sums()
		return vectors, sums[tuple((vectors % table.p).T)], "fft"
	sums = np.array([table.sum_for(a) for a in vectors])
	return vectors, sums, "histogram"


def scan_exp_sums(table: ValueTable, L: int) -> List[ExpSumResult]:
	vectors, sums, _ = _scan(table, L)
	return [
		ExpSumResult(value=complex(s), a=tuple(int(x) for x in a), p=table.p, range=table.range, point_count=table.point_count)
		for a, s in zip(vectors, sums)
	]


def max_exp_sum(system: PolySystem, p: int, L: int, range: Union[None, Region, Tuple[Sequence[int], int], ValueTable] = None) -> MaxSumResult:
	"""max |S(a)| over nonzero a in [-L, L]^n; |S(-a)| = |S(a)| so only canonical a are scanned.

	`range` is a region, a cube (u, w), a prepared ValueTable, or None for the full torus.
	"""
	q = as_prime(p)
	if isinstance(range, ValueTable):
		table = range
	elif isinstance(range, Region):
		table = ValueTable.for_region(system, q, range)
	elif range is None:
		table = ValueTable.for_cube(system, q, 0, q - 1)
	else:
		u, w = range
		table = ValueTable.for_cube(system, q, u, w)
	vectors, sums, method = _scan(table, L)
	if not len(vectors):
		return MaxSumResult(S_star=0.0, argmax=None, L=L, scanned=0, method=method, point_count=table.point_count)
	mags = np.abs(sums)
	best = int(np.argmax(mags))  # first maximum in lexicographic order
	return MaxSumResult(
		S_star=float(mags[best]),
		argmax=tuple(int(x) for x in vectors[best]),
		L=L,
		scanned=len(vectors),
		method=method,
		point_count=table.point_count,
	)


def admissible_L(p: int, n: int, requested: Optional[int] = None) -> int:
	"""(p-1)/2 (or `requested`) capped at the largest L with (2L+1)^n - 1 within the scan guard."""
	target = (p - 1) // 2 if requested is None else requested
	cap = int(((SCAN_GUARD + 1) ** (1.0 / n) - 1) / 2)
	while (2 * (cap + 1) + 1) ** n - 1 <= SCAN_GUARD:
		cap += 1
	while cap > 1 and (2 * cap + 1) ** n - 1 > SCAN_GUARD:
		cap -= 1
	if cap < target:
		logger.warning(f"coefficient box reduced from L={target} to L={cap} by the scan guard (p={p}, n={n})")
	return max(1, min(target, cap))


def fk_normaliser(p: int, w: int, m: int) -> float:
	return math.sqrt(p) * w ** (m - 1) * math.log(p)


def _require_independent(system: PolySystem, p: int) -> None:
	check = degree2_independent(system, p)
	if not check.independent:
		raise DependentSystemError(f"system is not degree 2 independent mod {p}", witness=check.witness)


def fk_ratio(system: PolySystem, p: int, u: Union[int, Sequence[int]], w: int, L: int = L_SCAN) -> float:
	"""max |S| / (sqrt(p) w^(m-1) log p) over nonzero |a_j| <= L on the cube at u of width w."""
	q = as_prime(p)
	_require_independent(system, q)
	best = max_exp_sum(system, q, L, ValueTable.for_cube(system, q, u, w))
	return best.S_star / fk_normaliser(q, w, system.m)


@dataclass(frozen=True)
class FkSweep:
	rows: List[Dict[str, Any]]
	max_by_prime: Dict[int, float]
	slope: Optional[float]


def fk_sweep(system: PolySystem, primes: Sequence[int], subcubes: int = 10, seed: int = 0, L: int = L_SCAN) -> FkSweep:
	"""Full cube plus `subcubes` random sub-cubes per prime; slope of log max-ratio against log p."""
	rows: List[Dict[str, Any]] = []
	best: Dict[int, float] = {}
	for p in primes:
		q = as_prime(p)
		_require_independent(system, q)
		rng = np.random.default_rng(np.random.SeedSequence([seed, q]))
		cubes = [((0,) * system.m, q - 1)]
		for _ in range(subcubes):
			w = int(rng.integers(1, q))
			u = tuple(int(x) for x in rng.integers(0, q, size=system.m))
			cubes.append((u, w))
		for u, w in cubes:
			ratio = fk_ratio(system, q, u, w, L=L)
			rows.append({"p": q, "u": list(u), "w": w, "ratio": ratio})
			best[q] = max(best.get(q, 0.0), ratio)
		logger.debug(f"fk sweep p={q}: max ratio {best[q]:.4f}")
	slope = None
	usable = [(q, r) for q, r in best.items() if r > 0]
	if len(usable) >= 2:
		xs, ys = zip(*usable)
		slope = float(linregress(np.log(xs), np.log(ys)).slope)
	return FkSweep(rows=rows, max_by_prime=best, slope=slope)


@dataclass(frozen=True)
class CoverSplit:
	total: complex
	cover_part: complex
	remainder: complex
	per_layer: List[complex]
	covered_points: int
	point_count: int


def exp_sum_cover_split(system: PolySystem, a: Sequence[int], p: int, region: Region, cover: DyadicCover) -> CoverSplit:
	"""Region sum as the sum over the cover cubes plus the remainder from the uncovered collar."""
	q = as_prime(p)
	points = lattice_points(region, q)
	layer = cover.layer_of(points, q)
	values = value_table(system, points, q)
	per_layer = [histogram_sum(values[layer == i], a, q) for i in range(1, cover.M + 1)]
	remainder = histogram_sum(values[layer == 0], a, q)
	cover_part = sum(per_layer, 0j)
	return CoverSplit(
		total=cover_part + remainder,
		cover_part=cover_part,
		remainder=remainder,
		per_layer=per_layer,
		covered_points=int((layer > 0).sum()),
		point_count=len(points),
	)
