from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from loguru import logger

from .cache import read_blob, write_blob
from .dyadic import Anchor, AnchoredCube, DyadicCover, grid_cell_indices
from .errors import ConfigError, EmptySolutionSetError, RegionShapeError, SystemKindError, check_guard
from .field_poly import PolySystem, SystemKind, as_prime
from .region import LATTICE_GUARD, Region, iter_grid_blocks

SOLUTION_MAGIC = b"EQXP"
BAD_REDUCTION_THRESHOLD = 10.0


@dataclass(frozen=True)
class SolutionSet:
	"""X_p: sorted, duplicate-free solutions of F_j(x) = 0 mod p in {0..p-1}^m."""

	p: int
	system: PolySystem
	solutions: np.ndarray
	nu: Optional[int] = None
	justification: Optional[str] = None

	@property
	def count(self) -> int:
		return len(self.solutions)

	@property
	def m(self) -> int:
		return self.system.m

	@property
	def n(self) -> int:
		return self.system.n

	def with_nu(self, nu: Optional[int], justification: Optional[str] = None) -> "SolutionSet":
		return SolutionSet(p=self.p, system=self.system, solutions=self.solutions, nu=nu, justification=justification)


class SolutionCache:
	"""On-disk cache of solution sets keyed by (system hash, p)."""

	def __init__(self, directory: Path) -> None:
		self.directory = directory
		self.directory.mkdir(parents=True, exist_ok=True)

	def path_for(self, system: PolySystem, p: int) -> Path:
		return self.directory / f"solutions_{system.system_hash}_p{p}.bin"

	def load(self, system: PolySystem, p: int) -> Optional[np.ndarray]:
		blob = read_blob(self.path_for(system, p), SOLUTION_MAGIC)
		if blob is None:
			return None
		header, vectors = blob
		if header.get("system_hash") != system.system_hash or header.get("p") != p or header.get("count") != len(vectors):
			logger.warning(f"stale solution cache for p={p}; rescanning")
			return None
		return vectors.reshape(-1, system.m)

	def store(self, system: PolySystem, p: int, solutions: np.ndarray) -> Path:
		header = {"system_hash": system.system_hash, "p": p, "m": system.m, "n": system.n, "count": len(solutions)}
		return write_blob(self.path_for(system, p), SOLUTION_MAGIC, header, solutions, "<u4")


def solve_system(
	system: PolySystem,
	p: int,
	nu: Optional[int] = None,
	justification: Optional[str] = None,
	cache: Optional[SolutionCache] = None,
	guard: int = LATTICE_GUARD,
) -> SolutionSet:
	"""Exhaustive scan of {0..p-1}^m; each F_j is evaluated only on points that passed the previous ones."""
	if system.kind is not SystemKind.ZERO:
		raise SystemKindError("solve_system needs a zero-system")
	q = as_prime(p)
	check_guard("solve", q**system.m, guard)
	if cache is not None:
		cached = cache.load(system, q)
		if cached is not None:
			logger.debug(f"solutions for p={q} loaded from {cache.path_for(system, q)}")
			return SolutionSet(p=q, system=system, solutions=cached, nu=nu, justification=justification)
	found = []
	for block in iter_grid_blocks(q, system.m):
		survivors = block
		for poly in system.polys:
			if not len(survivors):
				break
			survivors = survivors[poly.evaluate_many(survivors, q) == 0]
		if len(survivors):
			found.append(survivors)
	solutions = np.concatenate(found) if found else np.zeros((0, system.m), dtype=np.int64)
	logger.debug(f"p={q}: {len(solutions)} solutions")
	if cache is not None:
		cache.store(system, q, solutions)
	return SolutionSet(p=q, system=system, solutions=solutions, nu=nu, justification=justification)


def count_in_region(sol: SolutionSet, region: Region) -> int:
	"""T_p(Omega)."""
	if not sol.count:
		return 0
	return int(region.lattice_mask(sol.solutions, sol.p).sum())


def lang_weil_residual(sol: SolutionSet) -> float:
	"""(#X_p - nu p^(m-n)) / p^(m-n-1/2)."""
	if sol.nu is None:
		raise ConfigError("nu is required for the Lang-Weil residual")
	if sol.nu < 1:
		raise ConfigError(f"nu must be >= 1, got {sol.nu}")
	d = sol.m - sol.n
	return (sol.count - sol.nu * sol.p**d) / sol.p ** (d - 0.5)


def suspected_bad_reduction(residual: float) -> bool:
	return abs(residual) > BAD_REDUCTION_THRESHOLD


def fouvry_normaliser(p: int, m: int, n: int, k: int) -> float:
	log_p = math.log(p)
	return p ** ((m - n) / 2) * log_p**m + k ** (-(m - n - 1)) * p ** (m - n - 0.5) * log_p ** (n + 1)


def _cube_counts(sol: SolutionSet, k: int, anchor: Anchor) -> np.ndarray:
	counts = np.zeros((k,) * sol.m, dtype=np.int64)
	if sol.count:
		cells = grid_cell_indices(sol.solutions, sol.p, k, anchor)
		np.add.at(counts, tuple(cells.T), 1)
	return counts


def fouvry_cube_residual(sol: SolutionSet, cube: AnchoredCube, k: Optional[int] = None) -> float:
	"""(T_p(cube) - #X_p k^-m) / (p^((m-n)/2) (log p)^m + k^-(m-n-1) p^(m-n-1/2) (log p)^(n+1))."""
	k = cube.level if k is None else k
	if k != cube.level:
		raise ValueError(f"cube has side 1/{cube.level}, residual asked for k={k}")
	inside = 0
	if sol.count:
		cells = grid_cell_indices(sol.solutions, sol.p, k, cube.anchor)
		inside = int((cells == np.asarray(cube.coords)).all(axis=1).sum())
	return (inside - sol.count / k**sol.m) / fouvry_normaliser(sol.p, sol.m, sol.n, k)


@dataclass(frozen=True)
class GridResiduals:
	k: int
	counts: np.ndarray
	residuals: np.ndarray
	total: int

	@property
	def max_abs(self) -> float:
		return float(np.abs(self.residuals).max())

	@property
	def partition_defect(self) -> int:
		"""sum over cubes of (T_p(cube) - #X_p k^-m); zero when the grid tiles the torus."""
		return int(self.counts.sum()) - self.total


def fouvry_grid_residuals(sol: SolutionSet, k: int, anchor: Anchor) -> GridResiduals:
	counts = _cube_counts(sol, k, anchor)
	residuals = (counts - sol.count / k**sol.m) / fouvry_normaliser(sol.p, sol.m, sol.n, k)
	return GridResiduals(k=k, counts=counts, residuals=residuals, total=sol.count)


def _require_solutions(sol: SolutionSet) -> None:
	if not sol.count:
		raise EmptySolutionSetError(f"no solutions mod {sol.p}; the region count has nothing to normalise by")


def theorem3_residual(sol: SolutionSet, region: Region) -> float:
	"""(T_p/#X_p - mu) / (mu^(1-1/m) p^(-1/(2(n+1))) log p + p^(-1/2) (log p)^(n+2))."""
	if not region.very_well_shaped:
		raise RegionShapeError(f"{region.label} is not very well shaped")
	_require_solutions(sol)
	mu = region.measure()
	log_p = math.log(sol.p)
	scale = mu ** (1 - 1 / sol.m) * sol.p ** (-1 / (2 * (sol.n + 1))) * log_p + sol.p**-0.5 * log_p ** (sol.n + 2)
	return (count_in_region(sol, region) / sol.count - mu) / scale


def well_shaped_residual(sol: SolutionSet, region: Region) -> float:
	"""(T_p/#X_p - mu) / (p^(-1/(2(n+1))) log p)."""
	_require_solutions(sol)
	scale = sol.p ** (-1 / (2 * (sol.n + 1))) * math.log(sol.p)
	return (count_in_region(sol, region) / sol.count - region.measure()) / scale


def cover_count_lower_bound(sol: SolutionSet, cover: DyadicCover) -> Dict[str, int]:
	"""sum over cover cubes of T_p(Gamma), next to T_p(Omega)."""
	layers = cover.layer_of(sol.solutions, sol.p) if sol.count else np.zeros(0, dtype=np.int64)
	return {"cover_count": int((layers > 0).sum()), "region_count": count_in_region(sol, cover.region)}


def variety_report(sol: SolutionSet) -> Dict[str, Any]:
	report: Dict[str, Any] = {"p": sol.p, "system_hash": sol.system.system_hash, "count": sol.count, "nu": sol.nu}
	if sol.nu is not None:
		residual = lang_weil_residual(sol)
		report["lang_weil_residual"] = residual
		report["bad_reduction"] = suspected_bad_reduction(residual)
		if report["bad_reduction"]:
			logger.warning(f"p={sol.p}: Lang-Weil residual {residual:.3f}; suspected bad reduction")
	if sol.justification:
		report["justification"] = sol.justification
	return report
