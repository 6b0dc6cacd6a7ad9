from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .dyadic import AnchoredCube, DyadicCover, grid_cell_indices
from .errors import DependentSystemError, DimensionMismatchError, GuardExceededError, check_guard
from .expsum import ValueTable, admissible_L, max_exp_sum
from .field_poly import PolySystem, as_prime, degree2_independent, value_table
from .region import Region, iter_grid_blocks, lattice_points

INT64_SAFE = 1 << 62
SAMPLED_TRIALS = 10_000
SAMPLE_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class DiscrepancyGuards:
	n1_points: int = 10**8
	n2_points: int = 5000
	n3_points: int = 300
	work: int = 2 * 10**9

	def points_cap(self, n: int) -> int:
		caps = {1: self.n1_points, 2: self.n2_points, 3: self.n3_points}
		if n not in caps:
			raise GuardExceededError("discrepancy-dimension", n, 3)
		return caps[n]


@dataclass(frozen=True)
class FractionalPointSet:
	"""Multiset of points residues/q in [0, 1)^n."""

	residues: np.ndarray
	q: int

	def __post_init__(self) -> None:
		res = np.asarray(self.residues, dtype=np.int64)
		if res.ndim != 2:
			raise DimensionMismatchError(f"expected an (N, n) residue array, got shape {res.shape}")
		if self.q < 1:
			raise ValueError(f"modulus must be positive, got {self.q}")
		if res.size and (res.min() < 0 or res.max() >= self.q):
			raise ValueError("residues must lie in [0, q)")
		object.__setattr__(self, "residues", res)

	@classmethod
	def empty(cls, n: int, q: int = 1) -> "FractionalPointSet":
		return cls(np.zeros((0, n), dtype=np.int64), q)

	@classmethod
	def from_system(cls, system: PolySystem, p: int, region: Region) -> "FractionalPointSet":
		q = as_prime(p)
		return cls(value_table(system, lattice_points(region, q), q), q)

	@property
	def n(self) -> int:
		return self.residues.shape[1]

	@property
	def N(self) -> int:
		return self.residues.shape[0]

	def as_floats(self) -> np.ndarray:
		return self.residues / self.q


@dataclass(frozen=True)
class Box:
	"""Axis box [lo, hi) with 0 <= lo <= hi <= 1; the flags turn it into a limit box.

	`include_upper` closes the upper ends and `exclude_lower` opens the lower ends.
	"""

	lo: Tuple[Fraction, ...]
	hi: Tuple[Fraction, ...]
	include_upper: bool = False
	exclude_lower: bool = False

	def __post_init__(self) -> None:
		object.__setattr__(self, "lo", tuple(Fraction(x) for x in self.lo))
		object.__setattr__(self, "hi", tuple(Fraction(x) for x in self.hi))
		if len(self.lo) != len(self.hi):
			raise DimensionMismatchError("box corners differ in dimension")
		if any(not 0 <= a <= b <= 1 for a, b in zip(self.lo, self.hi)):
			raise ValueError("box intervals must satisfy 0 <= lo <= hi <= 1")

	@property
	def volume(self) -> Fraction:
		return math.prod((b - a for a, b in zip(self.lo, self.hi)), start=Fraction(1))

	def count(self, pts: FractionalPointSet) -> int:
		if pts.n != len(self.lo):
			raise DimensionMismatchError(f"box in dimension {len(self.lo)}, points in dimension {pts.n}")
		if not pts.N:
			return 0
		inside = np.ones(pts.N, dtype=bool)
		for j, (a, b) in enumerate(zip(self.lo, self.hi)):
			# x/q against a/d compared as x*d against a*q
			den = max(a.denominator, b.denominator)
			col = pts.residues[:, j]
			if pts.q * den >= INT64_SAFE:
				col = col.astype(object)
			xa, ya = col * a.denominator, a.numerator * pts.q
			xb, yb = col * b.denominator, b.numerator * pts.q
			lower = xa > ya if self.exclude_lower else xa >= ya
			upper = xb <= yb if self.include_upper else xb < yb
			inside &= np.asarray(lower, dtype=bool) & np.asarray(upper, dtype=bool)
		return int(inside.sum())

	def as_dict(self) -> Dict[str, Any]:
		return {
			"lo": [str(x) for x in self.lo],
			"hi": [str(x) for x in self.hi],
			"include_upper": self.include_upper,
			"exclude_lower": self.exclude_lower,
		}


@dataclass(frozen=True)
class DiscrepancyResult:
	D: Fraction
	witness: Optional[Box]
	family: str


def _kernel(counts: np.ndarray, vals: np.ndarray, W: np.ndarray, N: int, Q: int, family: str) -> Tuple[Any, int, int, int]:
	"""Best box along the last axis for a batch of rows.

	counts: (R, K) point counts per coordinate; vals: (K,) coordinates in units of 1/q;
	W: (R,) outer widths. Returns (value, row, s, e) maximizing the scaled surplus or deficit.
	"""
	R, K = counts.shape
	C = np.zeros((R, K + 1), dtype=counts.dtype)
	C[:, 1:] = np.cumsum(counts, axis=1)
	NW = (W * N)[:, None]
	if family == "surplus":
		f = C[:, 1:] * Q - NW * vals[None, :]
		g = C[:, :-1] * Q - NW * vals[None, :]
		gmin = np.minimum.accumulate(g, axis=1)
		score = f - gmin
		flat = int(np.argmax(score))
		row, e = divmod(flat, K)
		s = int(np.argmin(g[row, : e + 1]))
		return score[row, e], row, s, e
	if K < 2:
		return None, 0, 0, 0
	F = NW * vals[None, :] - C[:, :-1] * Q  # uses C[e] (points strictly below e)
	h = NW * vals[None, :] - C[:, 1:] * Q  # uses C[s+1] (points at or below s)
	hmin = np.minimum.accumulate(h, axis=1)
	score = F[:, 1:] - hmin[:, :-1]
	flat = int(np.argmax(score))
	row, e1 = divmod(flat, K - 1)
	e = e1 + 1
	s = int(np.argmin(h[row, :e]))
	return score[row, e1], row, s, e


def _best_box(H: np.ndarray, axes: List[np.ndarray], W: Any, N: int, Q: int, family: str) -> Tuple[Any, List[Tuple[int, int]]]:
	"""Recursive search over outer axis pairs; the last axis is handled by `_kernel`."""
	dtype = H.dtype
	if H.ndim == 1:
		value, _, s, e = _kernel(H[None, :], axes[0], np.array([W], dtype=dtype), N, Q, family)
		return value, [(s, e)]
	K0 = H.shape[0]
	v0 = axes[0]
	best: Any = None
	best_idx: List[Tuple[int, int]] = []
	for s0 in range(K0):
		if family == "surplus":
			block = np.cumsum(H[s0:], axis=0)
			ends = np.arange(s0, K0)
		else:
			if s0 >= K0 - 1:
				break
			inner = np.cumsum(H[s0 + 1:K0 - 1], axis=0)
			block = np.concatenate([np.zeros((1,) + H.shape[1:], dtype=dtype), inner], axis=0)
			ends = np.arange(s0 + 1, K0)
		widths = (v0[ends] - v0[s0]) * W
		if H.ndim == 2:
			value, row, s, e = _kernel(block, axes[1], widths.astype(dtype), N, Q, family)
			if value is not None and (best is None or value > best):
				best, best_idx = value, [(s0, int(ends[row])), (s, e)]
			continue
		for r, e0 in enumerate(ends):
			value, idx = _best_box(block[r], axes[1:], widths[r], N, Q, family)
			if value is not None and (best is None or value > best):
				best, best_idx = value, [(s0, int(e0))] + idx
	return best, best_idx


def _work_estimate(sizes: Sequence[int]) -> int:
	work = sizes[-1]
	for k in sizes[:-1]:
		work *= k * (k + 1) // 2
	return work


def extreme_discrepancy_exact(pts: FractionalPointSet, guards: DiscrepancyGuards = DiscrepancyGuards()) -> DiscrepancyResult:
	"""Exact sup over half-open boxes of |A/N - lambda|, with a box attaining it in the limit.

	Surplus is realized by closed boxes between point coordinates, deficit by open boxes
	between coordinates or the ends 0 and 1.
	"""
	if pts.N == 0:
		return DiscrepancyResult(D=Fraction(1), witness=None, family="empty")
	n, N, q = pts.n, pts.N, pts.q
	check_guard(f"discrepancy-n{n}", N, guards.points_cap(n))
	Q = q**n
	dtype: Any = np.int64 if N * Q * 4 < INT64_SAFE else object

	closed_axes, closed_idx, open_axes, open_idx = [], [], [], []
	for j in range(n):
		col = pts.residues[:, j]
		vals, inv = np.unique(col, return_inverse=True)
		closed_axes.append(vals.astype(dtype))
		closed_idx.append(inv.reshape(-1))
		aug = np.unique(np.concatenate([vals, [0, q]]))
		open_axes.append(aug.astype(dtype))
		open_idx.append(np.searchsorted(aug, col))
	check_guard("discrepancy-work", _work_estimate([len(a) for a in open_axes]), guards.work)

	results = []
	for family, axes, idx in (("surplus", closed_axes, closed_idx), ("deficit", open_axes, open_idx)):
		shape = tuple(len(a) for a in axes)
		H = np.zeros(shape, dtype=np.int64)
		np.add.at(H, tuple(idx), 1)
		value, box_idx = _best_box(H.astype(dtype), axes, 1, N, Q, family)
		if value is not None:
			results.append((int(value), family, axes, box_idx))
	value, family, axes, box_idx = max(results, key=lambda r: r[0])
	lo = tuple(Fraction(int(axes[j][s]), q) for j, (s, _) in enumerate(box_idx))
	hi = tuple(Fraction(int(axes[j][e]), q) for j, (_, e) in enumerate(box_idx))
	witness = Box(lo=lo, hi=hi, include_upper=family == "surplus", exclude_lower=family == "deficit")
	return DiscrepancyResult(D=Fraction(value, N * Q), witness=witness, family=family)


def _box_counts(res: np.ndarray, lo: np.ndarray, hi: np.ndarray, closed: bool, opened: bool) -> np.ndarray:
	"""Counts for a batch of integer boxes (T, n) over residues (N, n)."""
	x = res[None, :, :]
	lower = x > lo[:, None, :] if opened else x >= lo[:, None, :]
	upper = x <= hi[:, None, :] if closed else x < hi[:, None, :]
	return (lower & upper).all(axis=2).sum(axis=1)


def sampled_discrepancy_lower_bound(pts: FractionalPointSet, trials: int = SAMPLED_TRIALS, seed: int = 0) -> Fraction:
	"""Max |A/N - lambda| over random corner boxes and boxes spanned by random point pairs."""
	if trials < 1:
		raise ValueError(f"trials must be >= 1, got {trials}")
	if pts.N == 0:
		return Fraction(1)
	n, N, q = pts.n, pts.N, pts.q
	Q = q**n
	rng = np.random.default_rng(seed)
	res = pts.residues
	best = 0
	chunk = max(1, SAMPLE_CHUNK_CELLS // (N * n))
	done = 0
	while done < trials:
		size = min(chunk, trials - done)
		corners = np.sort(rng.integers(0, q + 1, size=(size, 2, n)), axis=1)
		lo, hi = corners[:, 0, :], corners[:, 1, :]
		counts = _box_counts(res, lo, hi, closed=False, opened=False)
		pairs = rng.integers(0, N, size=(size, 2))
		a, b = res[pairs[:, 0]], res[pairs[:, 1]]
		plo, phi = np.minimum(a, b), np.maximum(a, b)
		closed_counts = _box_counts(res, plo, phi, closed=True, opened=False)
		open_counts = _box_counts(res, plo, phi, closed=False, opened=True)
		for t in range(size):
			vol = math.prod(int(v) for v in hi[t] - lo[t])
			best = max(best, abs(int(counts[t]) * Q - N * vol))
			pvol = math.prod(int(v) for v in phi[t] - plo[t])
			best = max(best, int(closed_counts[t]) * Q - N * pvol, N * pvol - int(open_counts[t]) * Q)
		done += size
	return Fraction(best, N * Q)


def ks_bound(S_star: float, L: int, N: int, n: int) -> float:
	"""1/L + (log L)^n / N * S_star, implied constant taken as 1."""
	if N < 1:
		raise ValueError(f"Koksma-Szusz bound needs N >= 1, got {N}")
	if L < 2:
		raise ValueError(f"Koksma-Szusz bound needs L >= 2, got {L}")
	return 1.0 / L + math.log(L) ** n / N * S_star


def theorem_ratios(D: float, mu: float, p: int, m: int, n: int) -> Tuple[float, float]:
	scale = math.sqrt(p) / math.log(p) ** (n + 2)
	return D * mu * scale, D * mu ** (1.0 / m) * scale


@dataclass
class DiscrepancyReport:
	p: int
	system_hash: str
	region: str
	mu: float
	N: int
	exact_D: Optional[Fraction]
	sampled_D: Optional[Fraction]
	S_star: float
	argmax: Optional[Tuple[int, ...]]
	L: int
	ks_bound: Optional[float]
	thm1_ratio: float
	thm2_ratio: float
	witness: Optional[Box] = None
	method: str = "exact"

	@property
	def D(self) -> Fraction:
		return self.exact_D if self.exact_D is not None else self.sampled_D  # type: ignore[return-value]

	def as_dict(self) -> Dict[str, Any]:
		return {
			"p": self.p,
			"system_hash": self.system_hash,
			"region": self.region,
			"mu": self.mu,
			"N": self.N,
			"exact_D": float(self.exact_D) if self.exact_D is not None else None,
			"exact_D_fraction": str(self.exact_D) if self.exact_D is not None else None,
			"sampled_D": float(self.sampled_D) if self.sampled_D is not None else None,
			"S_star": self.S_star,
			"argmax": list(self.argmax) if self.argmax else None,
			"L": self.L,
			"ks_bound": self.ks_bound,
			"thm1_ratio": self.thm1_ratio,
			"thm2_ratio": self.thm2_ratio,
			"witness": self.witness.as_dict() if self.witness else None,
			"method": self.method,
		}


def discrepancy_of_system(
	system: PolySystem,
	p: int,
	region: Region,
	L: Optional[int] = None,
	exact: bool = True,
	sampled_trials: int = 0,
	seed: int = 0,
	guards: DiscrepancyGuards = DiscrepancyGuards(),
) -> DiscrepancyReport:
	"""D(Omega) for the points (G(x)/p) with x/p in the region, plus the Koksma-Szusz inputs.

	The sampled lower bound runs when `sampled_trials` > 0 or when the exact guards trip.
	"""
	q = as_prime(p)
	check = degree2_independent(system, q)
	if not check.independent:
		raise DependentSystemError(f"system is not degree 2 independent mod {q}", witness=check.witness)
	points = lattice_points(region, q)
	values = value_table(system, points, q)
	pts = FractionalPointSet(values, q)
	mu = region.measure()
	L_used = admissible_L(q, system.n, L)

	exact_D: Optional[Fraction] = None
	witness: Optional[Box] = None
	method = "exact"
	if exact:
		try:
			found = extreme_discrepancy_exact(pts, guards)
			exact_D, witness = found.D, found.witness
		except GuardExceededError as exc:
			logger.warning(f"p={q} {region.label}: exact discrepancy skipped ({exc}); using the sampled lower bound")
			method = "sampled"
	else:
		method = "sampled"
	sampled_D = None
	if exact_D is None or sampled_trials > 0:
		trials = sampled_trials if sampled_trials > 0 else SAMPLED_TRIALS
		sampled_D = sampled_discrepancy_lower_bound(pts, trials=trials, seed=seed)

	if pts.N:
		table = ValueTable(values=values, p=q, system_hash=system.system_hash, range={"kind": "region", "region": region.describe()})
		best = max_exp_sum(system, q, L_used, table)
		S_star, argmax = best.S_star, best.argmax
		ks = ks_bound(S_star, L_used, pts.N, system.n) if L_used >= 2 else None
	else:
		S_star, argmax, ks = 0.0, None, None
	D = float(exact_D if exact_D is not None else sampled_D)
	thm1, thm2 = theorem_ratios(D, mu, q, system.m, system.n)
	return DiscrepancyReport(
		p=q,
		system_hash=system.system_hash,
		region=region.label,
		mu=mu,
		N=pts.N,
		exact_D=exact_D,
		sampled_D=sampled_D,
		S_star=S_star,
		argmax=argmax,
		L=L_used,
		ks_bound=ks,
		thm1_ratio=thm1,
		thm2_ratio=thm2,
		witness=witness,
		method=method,
	)


@dataclass(frozen=True)
class BoxCount:
	count: int
	expected: float
	residual: float


def box_count(system: PolySystem, p: int, region: Region, box: Box) -> BoxCount:
	"""N(Omega; Pi) with the residual (N - lambda mu p^m) / (p^(m-1/2) (log p)^(n+2))."""
	q = as_prime(p)
	pts = FractionalPointSet.from_system(system, q, region)
	count = box.count(pts)
	m, n = system.m, system.n
	expected = float(box.volume) * region.measure() * q**m
	residual = (count - expected) / (q ** (m - 0.5) * math.log(q) ** (n + 2))
	return BoxCount(count=count, expected=expected, residual=residual)


def cover_box_lower_bound(system: PolySystem, p: int, cover: DyadicCover, box: Box) -> Dict[str, int]:
	"""sum over cover cubes of N(Gamma; Pi), next to N(Omega; Pi)."""
	q = as_prime(p)
	points = lattice_points(cover.region, q)
	covered = cover.layer_of(points, q) > 0
	values = value_table(system, points, q)
	return {
		"cover_count": box.count(FractionalPointSet(values[covered], q)),
		"region_count": box.count(FractionalPointSet(values, q)),
	}


def cube_points(cube: AnchoredCube, p: int) -> np.ndarray:
	"""Lattice points x with x/p in the anchored cube."""
	m = len(cube.coords)
	found = []
	target = np.asarray(cube.coords, dtype=np.int64)
	for block in iter_grid_blocks(p, m):
		cells = grid_cell_indices(block, p, cube.level, cube.anchor)
		found.append(block[(cells == target).all(axis=1)])
	return np.concatenate(found) if found else np.zeros((0, m), dtype=np.int64)


def cube_discrepancy_ratio(system: PolySystem, p: int, cube: AnchoredCube, guards: DiscrepancyGuards = DiscrepancyGuards(), seed: int = 0) -> Dict[str, Any]:
	"""D(Gamma) mu(Gamma)^(1/m) p^(1/2) / (log p)^(n+1) for an anchored cube."""
	q = as_prime(p)
	pts = FractionalPointSet(value_table(system, cube_points(cube, q), q), q)
	try:
		D, method = extreme_discrepancy_exact(pts, guards).D, "exact"
	except GuardExceededError:
		D, method = sampled_discrepancy_lower_bound(pts, seed=seed), "sampled"
	mu = float(cube.measure())
	ratio = float(D) * mu ** (1.0 / system.m) * math.sqrt(q) / math.log(q) ** (system.n + 1)
	return {"N": pts.N, "D": float(D), "ratio": ratio, "method": method}
