from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from loguru import logger
from scipy.spatial import ConvexHull
from scipy.special import gamma as gamma_fn
from scipy.stats import norm

from .errors import (
	DimensionMismatchError,
	RegionShapeError,
	UncertifiableRegionError,
	check_guard,
)

Point = Tuple[Fraction, ...]

TIE_TOLERANCE = 1e-9  # float margins closer to zero than this are re-decided exactly
LATTICE_GUARD = 10**9
MC_SAMPLES = 1_000_000
MC_CHUNK = 1 << 16
CONFIDENCE = 0.99
GRID_BLOCK_POINTS = 1 << 20


def parse_coordinate(value: Any) -> Fraction:
	"""Config coordinate: decimal strings and numbers are read as exact decimals."""
	if isinstance(value, Fraction):
		return value
	if isinstance(value, (bool, np.bool_)):
		raise RegionShapeError(f"not a coordinate: {value!r}")
	if isinstance(value, (int, np.integer)):
		return Fraction(int(value))
	if isinstance(value, (float, np.floating)):
		return Fraction(repr(float(value)))
	if isinstance(value, str):
		try:
			return Fraction(value.strip())
		except ValueError as exc:
			raise RegionShapeError(f"not a coordinate: {value!r}") from exc
	raise RegionShapeError(f"not a coordinate: {value!r}")


def exact_point(u: Sequence[Any]) -> Point:
	"""Exact torus point; floats keep their binary value."""
	out = []
	for x in u:
		q = x if isinstance(x, Fraction) else Fraction(x) if not isinstance(x, str) else Fraction(x)
		out.append(q - math.floor(q))
	return tuple(out)


def unit_ball_volume(m: int) -> float:
	return float(math.pi ** (m / 2) / gamma_fn(m / 2 + 1))


def _circ(x: Fraction) -> Fraction:
	f = x - math.floor(x)
	return min(f, 1 - f)


def _circ_f(x: np.ndarray) -> np.ndarray:
	f = np.mod(x, 1.0)
	return np.minimum(f, 1.0 - f)


# Arc [a, a+w] on the circle with t = (c - a) mod 1: farthest and nearest
# circular distance from c to the arc.
def _arc_far(t: Fraction, w: Fraction) -> Fraction:
	if (t + Fraction(1, 2)) % 1 <= w:
		return Fraction(1, 2)
	return max(_circ(t), _circ(t - w))


def _arc_near(t: Fraction, w: Fraction) -> Fraction:
	if t <= w:
		return Fraction(0)
	return min(_circ(t), _circ(t - w))


def _arc_far_f(t: np.ndarray, w: float) -> np.ndarray:
	anti = np.mod(t + 0.5, 1.0)
	return np.where(anti <= w, 0.5, np.maximum(_circ_f(t), _circ_f(t - w)))


def _arc_near_f(t: np.ndarray, w: float) -> np.ndarray:
	return np.where(t <= w, 0.0, np.minimum(_circ_f(t), _circ_f(t - w)))


def _outer(op: np.ufunc, arrays: Sequence[np.ndarray]) -> np.ndarray:
	return reduce(op.outer, arrays)


def _pieces(a: Fraction, w: Fraction) -> List[Tuple[Fraction, Fraction]]:
	"""Split the closed arc [a, a+w] into intervals of [0, 1]."""
	if a + w <= 1:
		return [(a, a + w)]
	return [(a, Fraction(1)), (Fraction(0), a + w - 1)]


def grid_axes(k: int, gamma: Sequence[Fraction]) -> List[np.ndarray]:
	"""Float lower corners (gamma_j + u/k) mod 1 for u = 0..k-1, per axis."""
	return [np.mod(float(g) + np.arange(k, dtype=np.float64) / k, 1.0) for g in gamma]


@dataclass(frozen=True)
class ShellEstimate:
	epsilon: float
	plus_measure: float
	minus_measure: float
	half_width: float
	sample_count: int
	ws_ratio: float
	vws_ratio: float
	method: str


@dataclass(frozen=True)
class MeasureEstimate:
	value: float
	half_width: float
	sample_count: int


class Region:
	"""Subset of the torus T_m with exact membership and cube certification."""

	kind: str = "region"
	m: int

	# -- exact predicates, per kind -------------------------------------------------
	def _contains_exact(self, u: Point) -> bool:
		raise NotImplementedError

	def _cube_inside_exact(self, corner: Point, side: Fraction) -> bool:
		raise UncertifiableRegionError(f"{self.kind} regions cannot certify cubes")

	def _cube_outside_exact(self, corner: Point, side: Fraction) -> bool:
		raise UncertifiableRegionError(f"{self.kind} regions cannot certify cubes")

	# -- float margins, positive means inside ---------------------------------------
	def _slack(self, u: np.ndarray) -> np.ndarray:
		raise NotImplementedError

	def _grid_slack(self, k: int, gamma: Sequence[Fraction], outside: bool) -> np.ndarray:
		raise UncertifiableRegionError(f"{self.kind} regions cannot certify cubes")

	def distance_to_boundary(self, u: np.ndarray) -> np.ndarray:
		raise NotImplementedError

	def _shell_closed_form(self, epsilon: float) -> Optional[Tuple[float, float]]:
		return None

	def measure(self) -> float:
		raise NotImplementedError

	@property
	def certifiable(self) -> bool:
		return True

	@property
	def very_well_shaped(self) -> bool:
		return False

	@property
	def label(self) -> str:
		return self.kind

	def describe(self) -> Dict[str, Any]:
		return {"kind": self.kind, "m": self.m}

	def complement(self) -> "Region":
		return Complement(inner=self)

	# -- public API -----------------------------------------------------------------
	def _check_dim(self, width: int) -> None:
		if width != self.m:
			raise DimensionMismatchError(f"point of dimension {width} for a region in T_{self.m}")

	def contains(self, u: Sequence[Any]) -> bool:
		self._check_dim(len(u))
		return self._contains_exact(exact_point(u))

	def lattice_mask(self, xs: np.ndarray, p: int) -> np.ndarray:
		"""Exact membership of x/p for every row x of an integer array."""
		pts = np.asarray(xs, dtype=np.int64).reshape(-1, self.m)
		if pts.shape[0] == 0:
			return np.zeros(0, dtype=bool)
		slack = self._slack((pts % p) / p)
		mask = slack > 0
		for i in np.flatnonzero(np.abs(slack) <= TIE_TOLERANCE):
			mask[i] = self._contains_exact(tuple(Fraction(int(x) % p, p) for x in pts[i]))
		return mask

	def cube_inside(self, cube: Any) -> bool:
		"""Certified: every point of the closed cube lies in the region."""
		self._check_dim(len(cube.coords))
		return self._cube_inside_exact(cube.corner(), cube.side)

	def cube_outside(self, cube: Any) -> bool:
		"""Certified: the closed cube does not meet the region."""
		self._check_dim(len(cube.coords))
		return self._cube_outside_exact(cube.corner(), cube.side)

	def grid_mask(self, k: int, gamma: Sequence[Fraction], outside: bool = False) -> np.ndarray:
		"""Certification of all k^m anchored cubes of side 1/k; array of shape (k,)*m."""
		slack = self._grid_slack(k, gamma, outside)
		mask = slack > 0
		side = Fraction(1, k)
		ties = np.argwhere(np.abs(slack) <= TIE_TOLERANCE)
		if len(ties):
			logger.debug(f"{self.label}: {len(ties)} near-tie cubes at level {k} re-decided exactly")
		check = self._cube_outside_exact if outside else self._cube_inside_exact
		for idx in ties:
			corner = tuple((g + Fraction(int(u), k)) % 1 for g, u in zip(gamma, idx))
			mask[tuple(idx)] = check(corner, side)
		return mask


@dataclass(frozen=True)
class FullTorus(Region):
	m: int
	shape_constant: Optional[float] = None
	name: Optional[str] = None
	kind = "full-torus"

	def _contains_exact(self, u: Point) -> bool:
		return True

	def _cube_inside_exact(self, corner: Point, side: Fraction) -> bool:
		return True

	def _cube_outside_exact(self, corner: Point, side: Fraction) -> bool:
		return False

	def _slack(self, u: np.ndarray) -> np.ndarray:
		return np.full(u.shape[0], np.inf)

	def _grid_slack(self, k: int, gamma: Sequence[Fraction], outside: bool) -> np.ndarray:
		return np.full((k,) * self.m, -np.inf if outside else np.inf)

	def distance_to_boundary(self, u: np.ndarray) -> np.ndarray:
		return np.full(u.shape[0], np.inf)

	def _shell_closed_form(self, epsilon: float) -> Optional[Tuple[float, float]]:
		return 0.0, 0.0

	def measure(self) -> float:
		return 1.0

	@property
	def very_well_shaped(self) -> bool:
		return True

	@property
	def label(self) -> str:
		return self.name or "torus"


@dataclass(frozen=True)
class AxisBox(Region):
	"""Product of half-open intervals [lo_j, hi_j) with 0 <= lo_j < hi_j <= 1."""

	m: int
	lo: Tuple[Fraction, ...]
	hi: Tuple[Fraction, ...]
	shape_constant: Optional[float] = None
	name: Optional[str] = None
	kind = "axis-box"

	def __post_init__(self) -> None:
		object.__setattr__(self, "lo", tuple(parse_coordinate(v) for v in self.lo))
		object.__setattr__(self, "hi", tuple(parse_coordinate(v) for v in self.hi))
		if len(self.lo) != self.m or len(self.hi) != self.m:
			raise DimensionMismatchError(f"box corners must have {self.m} coordinates")
		for a, b in zip(self.lo, self.hi):
			if not 0 <= a < b <= 1:
				raise RegionShapeError(f"box interval [{a}, {b}) must satisfy 0 <= lo < hi <= 1")

	@property
	def sides(self) -> Tuple[Fraction, ...]:
		return tuple(b - a for a, b in zip(self.lo, self.hi))

	def _full(self, j: int) -> bool:
		return self.lo[j] == 0 and self.hi[j] == 1

	def _contains_exact(self, u: Point) -> bool:
		return all(a <= x < b for x, a, b in zip(u, self.lo, self.hi))

	def _cube_inside_exact(self, corner: Point, side: Fraction) -> bool:
		for j, a in enumerate(corner):
			if self._full(j):
				continue
			e = (a - self.lo[j]) % 1
			if not e + side < self.hi[j] - self.lo[j]:
				return False
		return True

	def _cube_outside_exact(self, corner: Point, side: Fraction) -> bool:
		for j, a in enumerate(corner):
			if self._full(j):
				continue
			d = (self.lo[j] - a) % 1
			if d > side and d + (self.hi[j] - self.lo[j]) <= 1:
				return True
		return False

	def _slack(self, u: np.ndarray) -> np.ndarray:
		self._check_dim(u.shape[1])
		out = np.full(u.shape[0], np.inf)
		for j in range(self.m):
			if self._full(j):
				continue
			out = np.minimum(out, np.minimum(u[:, j] - float(self.lo[j]), float(self.hi[j]) - u[:, j]))
		return out

	def _axis_grid_slack(self, j: int, corners: np.ndarray, w: float, outside: bool) -> np.ndarray:
		if self._full(j):
			return np.full(corners.shape, -np.inf if outside else np.inf)
		lo, h = float(self.lo[j]), float(self.hi[j] - self.lo[j])
		if outside:
			d = np.mod(lo - corners, 1.0)
			raw = np.minimum(d - w, 1.0 - h - d)
			seam = d
		else:
			e = np.mod(corners - lo, 1.0)
			raw = h - e - w
			seam = e
		near_seam = (seam <= TIE_TOLERANCE) | (seam >= 1.0 - TIE_TOLERANCE)
		return np.where(near_seam, 0.0, raw)

	def _grid_slack(self, k: int, gamma: Sequence[Fraction], outside: bool) -> np.ndarray:
		axes = grid_axes(k, gamma)
		per_axis = [self._axis_grid_slack(j, axes[j], 1.0 / k, outside) for j in range(self.m)]
		return _outer(np.maximum if outside else np.minimum, per_axis)

	def distance_to_boundary(self, u: np.ndarray) -> np.ndarray:
		inside = self._slack(u) > 0
		inner = np.full(u.shape[0], np.inf)
		outer_sq = np.zeros(u.shape[0])
		for j in range(self.m):
			if self._full(j):
				continue
			lo, hi = float(self.lo[j]), float(self.hi[j])
			x = u[:, j]
			inner = np.minimum(inner, np.minimum(x - lo, hi - x))
			in_axis = (x >= lo) & (x < hi)
			d = np.where(in_axis, 0.0, np.minimum(_circ_f(x - lo), _circ_f(x - hi)))
			outer_sq += d * d
		return np.where(inside, inner, np.sqrt(outer_sq))

	def _shell_closed_form(self, epsilon: float) -> Optional[Tuple[float, float]]:
		sides = [float(s) for j, s in enumerate(self.sides) if not self._full(j)]
		if not sides:
			return 0.0, 0.0
		if any(s + 2 * epsilon >= 1.0 for s in sides):
			return None
		# Steiner formula for the outer collar of a box.
		dim = len(sides)
		plus = 0.0
		for i in range(1, dim + 1):
			sym = sum(math.prod(c) for c in itertools.combinations(sides, dim - i))
			plus += unit_ball_volume(i) * epsilon**i * sym
		minus = math.prod(sides) - math.prod(max(s - 2 * epsilon, 0.0) for s in sides)
		return plus, minus

	def measure(self) -> float:
		return float(math.prod(self.sides))

	@property
	def very_well_shaped(self) -> bool:
		sides = {s for j, s in enumerate(self.sides) if not self._full(j)}
		return len(sides) <= 1

	@property
	def label(self) -> str:
		if self.name:
			return self.name
		return "box[" + ",".join(f"{a}:{b}" for a, b in zip(self.lo, self.hi)) + ")"

	def describe(self) -> Dict[str, Any]:
		return {"kind": self.kind, "m": self.m, "corners": [[str(v) for v in self.lo], [str(v) for v in self.hi]]}


@dataclass(frozen=True)
class EuclideanBall(Region):
	"""Closed torus ball {u : dist(u, c) <= r}, r <= 1/2."""

	m: int
	center: Tuple[Fraction, ...]
	radius: Fraction
	shape_constant: Optional[float] = None
	name: Optional[str] = None
	kind = "euclidean-ball"

	def __post_init__(self) -> None:
		object.__setattr__(self, "center", tuple(parse_coordinate(v) for v in self.center))
		object.__setattr__(self, "radius", parse_coordinate(self.radius))
		if len(self.center) != self.m:
			raise DimensionMismatchError(f"ball center must have {self.m} coordinates")
		if any(not 0 <= c < 1 for c in self.center):
			raise RegionShapeError("ball center must lie in [0, 1)^m")
		if not 0 <= self.radius <= Fraction(1, 2):
			raise RegionShapeError(f"ball radius {self.radius} outside [0, 1/2]")

	@property
	def _r2(self) -> float:
		return float(self.radius) ** 2

	def _contains_exact(self, u: Point) -> bool:
		return sum(_circ(x - c) ** 2 for x, c in zip(u, self.center)) <= self.radius**2

	def _cube_inside_exact(self, corner: Point, side: Fraction) -> bool:
		far = sum(_arc_far((c - a) % 1, side) ** 2 for a, c in zip(corner, self.center))
		return far <= self.radius**2

	def _cube_outside_exact(self, corner: Point, side: Fraction) -> bool:
		near = sum(_arc_near((c - a) % 1, side) ** 2 for a, c in zip(corner, self.center))
		return near > self.radius**2

	def _torus_distance(self, u: np.ndarray) -> np.ndarray:
		sq = np.zeros(u.shape[0])
		for j, c in enumerate(self.center):
			d = _circ_f(u[:, j] - float(c))
			sq += d * d
		return sq

	def _slack(self, u: np.ndarray) -> np.ndarray:
		self._check_dim(u.shape[1])
		return self._r2 - self._torus_distance(u)

	def _grid_slack(self, k: int, gamma: Sequence[Fraction], outside: bool) -> np.ndarray:
		w = 1.0 / k
		per_axis = []
		for corners, c in zip(grid_axes(k, gamma), self.center):
			t = np.mod(float(c) - corners, 1.0)
			d = _arc_near_f(t, w) if outside else _arc_far_f(t, w)
			per_axis.append(d * d)
		total = _outer(np.add, per_axis)
		return total - self._r2 if outside else self._r2 - total

	def distance_to_boundary(self, u: np.ndarray) -> np.ndarray:
		return np.abs(np.sqrt(self._torus_distance(u)) - float(self.radius))

	def _shell_closed_form(self, epsilon: float) -> Optional[Tuple[float, float]]:
		r = float(self.radius)
		if r + epsilon > 0.5:
			return None
		vol = unit_ball_volume(self.m)
		plus = vol * ((r + epsilon) ** self.m - r**self.m)
		minus = vol * (r**self.m - max(r - epsilon, 0.0) ** self.m)
		return plus, minus

	def measure(self) -> float:
		return unit_ball_volume(self.m) * float(self.radius) ** self.m

	@property
	def very_well_shaped(self) -> bool:
		return True

	@property
	def label(self) -> str:
		if self.name:
			return self.name
		return "ball(c=(" + ",".join(str(c) for c in self.center) + f"),r={self.radius})"

	def describe(self) -> Dict[str, Any]:
		return {"kind": self.kind, "m": self.m, "center": [str(c) for c in self.center], "radius": str(self.radius)}


@dataclass(frozen=True)
class ConvexPolytope(Region):
	"""Closed convex hull of vertices in [0, 1]^m, m in {2, 3}."""

	m: int
	vertices: Tuple[Tuple[Fraction, ...], ...]
	shape_constant: Optional[float] = None
	name: Optional[str] = None
	kind = "convex-polytope"

	def __post_init__(self) -> None:
		verts = tuple(tuple(parse_coordinate(v) for v in vertex) for vertex in self.vertices)
		object.__setattr__(self, "vertices", verts)
		if self.m not in (2, 3):
			raise RegionShapeError("convex polytopes are supported in dimensions 2 and 3")
		if any(len(v) != self.m for v in verts):
			raise DimensionMismatchError(f"polytope vertices must have {self.m} coordinates")
		if any(not 0 <= x <= 1 for v in verts for x in v):
			raise RegionShapeError("polytope vertices must lie in [0, 1]^m")
		if len(verts) < self.m + 1:
			raise RegionShapeError("a full-dimensional polytope needs at least m+1 vertices")

	@cached_property
	def _hull(self) -> ConvexHull:
		return ConvexHull(np.array([[float(x) for x in v] for v in self.vertices]))

	@cached_property
	def _facets(self) -> List[Tuple[Tuple[Fraction, ...], Fraction]]:
		"""Exact half-spaces n . x <= b, one per distinct hull facet."""
		centroid = tuple(sum(v[j] for v in self.vertices) / len(self.vertices) for j in range(self.m))
		facets = []
		seen = set()
		for simplex in self._hull.simplices:
			pts = [self.vertices[i] for i in simplex]
			rows = [[pts[i][j] - pts[0][j] for j in range(self.m)] for i in range(1, len(pts))]
			basis = sp.Matrix(rows).nullspace()
			if len(basis) != 1:
				continue
			normal = tuple(Fraction(int(sp.fraction(x)[0]), int(sp.fraction(x)[1])) for x in basis[0])
			offset = sum(nj * xj for nj, xj in zip(normal, pts[0]))
			if sum(nj * cj for nj, cj in zip(normal, centroid)) > offset:
				normal, offset = tuple(-x for x in normal), -offset
			scale = max(abs(x) for x in normal)
			key = (tuple(x / scale for x in normal), offset / scale)
			if key not in seen:
				seen.add(key)
				facets.append(key)
		return facets

	@cached_property
	def _facets_f(self) -> Tuple[np.ndarray, np.ndarray]:
		normals = np.array([[float(x) for x in n] for n, _ in self._facets])
		offsets = np.array([float(b) for _, b in self._facets])
		length = np.linalg.norm(normals, axis=1)
		return normals / length[:, None], offsets / length

	@cached_property
	def _edges(self) -> List[Tuple[int, int]]:
		edges = set()
		for simplex in self._hull.simplices:
			for i, j in itertools.combinations(sorted(int(s) for s in simplex), 2):
				edges.add((i, j))
		return sorted(edges)

	@cached_property
	def _axes(self) -> List[Tuple[Fraction, ...]]:
		"""Separating-axis candidates: facet normals, coordinate axes, edge cross products."""
		axes = [n for n, _ in self._facets]
		units = [tuple(Fraction(int(i == j)) for j in range(self.m)) for i in range(self.m)]
		axes.extend(units)
		if self.m == 3:
			for i, j in self._edges:
				e = tuple(self.vertices[j][t] - self.vertices[i][t] for t in range(3))
				for u in units:
					cross = (u[1] * e[2] - u[2] * e[1], u[2] * e[0] - u[0] * e[2], u[0] * e[1] - u[1] * e[0])
					if any(cross):
						axes.append(cross)
		return axes

	@cached_property
	def _axes_f(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
		axes = np.array([[float(x) for x in a] for a in self._axes])
		axes /= np.linalg.norm(axes, axis=1)[:, None]
		verts = np.array([[float(x) for x in v] for v in self.vertices])
		proj = verts @ axes.T
		return axes, proj.min(axis=0), proj.max(axis=0)

	def _inside_point(self, v: Sequence[Fraction]) -> bool:
		return all(sum(nj * xj for nj, xj in zip(n, v)) <= b for n, b in self._facets)

	def _contains_exact(self, u: Point) -> bool:
		return self._inside_point(u)

	def _piece_boxes(self, corner: Point, side: Fraction) -> Iterator[Tuple[Tuple[Fraction, Fraction], ...]]:
		return itertools.product(*[_pieces(a, side) for a in corner])

	def _cube_inside_exact(self, corner: Point, side: Fraction) -> bool:
		for box in self._piece_boxes(corner, side):
			for vertex in itertools.product(*box):
				if not self._inside_point(vertex):
					return False
		return True

	def _cube_outside_exact(self, corner: Point, side: Fraction) -> bool:
		for box in self._piece_boxes(corner, side):
			if not self._separated(box):
				return False
		return True

	def _separated(self, box: Sequence[Tuple[Fraction, Fraction]]) -> bool:
		for axis in self._axes:
			bmin = sum(min(n * lo, n * hi) for n, (lo, hi) in zip(axis, box))
			bmax = sum(max(n * lo, n * hi) for n, (lo, hi) in zip(axis, box))
			proj = [sum(n * x for n, x in zip(axis, v)) for v in self.vertices]
			if bmax < min(proj) or max(proj) < bmin:
				return True
		return False

	def _slack(self, u: np.ndarray) -> np.ndarray:
		self._check_dim(u.shape[1])
		normals, offsets = self._facets_f
		return (offsets[None, :] - u @ normals.T).min(axis=1)

	def _grid_slack(self, k: int, gamma: Sequence[Fraction], outside: bool) -> np.ndarray:
		axes = grid_axes(k, gamma)
		w = 1.0 / k
		rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, self.m - 1)
		out = np.empty((k,) * self.m)
		block = max(1, GRID_BLOCK_POINTS // len(rest))
		for start in range(0, k, block):
			first = axes[0][start:start + block]
			corners = np.column_stack([np.repeat(first, len(rest)), np.tile(rest, (len(first), 1))])
			slack = self._corner_slack_outside(corners, w) if outside else self._corner_slack_inside(corners, w)
			wrapped = (corners + w > 1.0).any(axis=1)
			slack = np.where(wrapped, 0.0, slack)
			out[start:start + len(first)] = slack.reshape((len(first),) + (k,) * (self.m - 1))
		return out

	def _corner_slack_inside(self, corners: np.ndarray, w: float) -> np.ndarray:
		normals, offsets = self._facets_f
		slack = np.full(corners.shape[0], np.inf)
		for offset in itertools.product((0.0, w), repeat=self.m):
			v = corners + np.array(offset)
			slack = np.minimum(slack, (offsets[None, :] - v @ normals.T).min(axis=1))
		return slack

	def _corner_slack_outside(self, corners: np.ndarray, w: float) -> np.ndarray:
		axes, pmin, pmax = self._axes_f
		base = corners @ axes.T
		bmin = base + np.minimum(axes, 0.0).sum(axis=1) * w
		bmax = base + np.maximum(axes, 0.0).sum(axis=1) * w
		gap = np.maximum(pmin[None, :] - bmax, bmin - pmax[None, :])
		return gap.max(axis=1)

	def _euclid_distance(self, u: np.ndarray) -> np.ndarray:
		"""Distance from points of R^m to the polytope boundary (as a point set)."""
		verts = np.array([[float(x) for x in v] for v in self.vertices])
		best = np.full(u.shape[0], np.inf)
		if self.m == 2:
			for i, j in self._edges:
				best = np.minimum(best, _segment_distance(u, verts[i], verts[j]))
		else:
			for simplex in self._hull.simplices:
				a, b, c = verts[simplex[0]], verts[simplex[1]], verts[simplex[2]]
				best = np.minimum(best, _triangle_distance(u, a, b, c))
		return best

	def distance_to_boundary(self, u: np.ndarray) -> np.ndarray:
		inside = self._slack(u) > 0
		out = np.full(u.shape[0], np.inf)
		normals, offsets = self._facets_f
		inner = (offsets[None, :] - u @ normals.T).min(axis=1)
		for shift in itertools.product((-1.0, 0.0, 1.0), repeat=self.m):
			out = np.minimum(out, self._euclid_distance(u + np.array(shift)))
		return np.where(inside, inner, out)

	def measure(self) -> float:
		return float(self._hull.volume)

	@property
	def label(self) -> str:
		return self.name or f"polytope({len(self.vertices)} vertices)"

	def describe(self) -> Dict[str, Any]:
		return {"kind": self.kind, "m": self.m, "vertices": [[str(x) for x in v] for v in self.vertices]}


def _segment_distance(u: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
	ab = b - a
	denom = float(ab @ ab)
	t = np.clip(((u - a) @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(u.shape[0])
	proj = a + t[:, None] * ab
	return np.linalg.norm(u - proj, axis=1)


def _triangle_distance(u: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
	normal = np.cross(b - a, c - a)
	area2 = float(np.linalg.norm(normal))
	edges = np.minimum(
		np.minimum(_segment_distance(u, a, b), _segment_distance(u, b, c)),
		_segment_distance(u, c, a),
	)
	if area2 == 0:
		return edges
	n = normal / area2
	height = (u - a) @ n
	foot = u - height[:, None] * n
	# barycentric sign tests on the projected foot point
	s1 = np.cross(b - a, foot - a) @ n
	s2 = np.cross(c - b, foot - b) @ n
	s3 = np.cross(a - c, foot - c) @ n
	interior = (s1 >= 0) & (s2 >= 0) & (s3 >= 0)
	return np.where(interior, np.abs(height), edges)


@dataclass(frozen=True)
class Complement(Region):
	inner: Region
	shape_constant: Optional[float] = None
	name: Optional[str] = None
	kind = "complement-of"

	@property
	def m(self) -> int:  # type: ignore[override]
		return self.inner.m

	def complement(self) -> Region:
		return self.inner

	def _contains_exact(self, u: Point) -> bool:
		return not self.inner._contains_exact(u)

	def _cube_inside_exact(self, corner: Point, side: Fraction) -> bool:
		return self.inner._cube_outside_exact(corner, side)

	def _cube_outside_exact(self, corner: Point, side: Fraction) -> bool:
		return self.inner._cube_inside_exact(corner, side)

	def _slack(self, u: np.ndarray) -> np.ndarray:
		return -self.inner._slack(u)

	def _grid_slack(self, k: int, gamma: Sequence[Fraction], outside: bool) -> np.ndarray:
		return self.inner._grid_slack(k, gamma, not outside)

	def distance_to_boundary(self, u: np.ndarray) -> np.ndarray:
		return self.inner.distance_to_boundary(u)

	def _shell_closed_form(self, epsilon: float) -> Optional[Tuple[float, float]]:
		inner = self.inner._shell_closed_form(epsilon)
		return None if inner is None else (inner[1], inner[0])

	def measure(self) -> float:
		return 1.0 - self.inner.measure()

	@property
	def certifiable(self) -> bool:
		return self.inner.certifiable

	@property
	def very_well_shaped(self) -> bool:
		return self.inner.very_well_shaped

	@property
	def label(self) -> str:
		return self.name or f"not {self.inner.label}"

	def describe(self) -> Dict[str, Any]:
		return {"kind": self.kind, "m": self.m, "inner": self.inner.describe()}


def ball_with_measure(m: int, center: Sequence[Any], mu: float, name: Optional[str] = None) -> EuclideanBall:
	"""Ball whose radius gives measure `mu`, radius rounded to 12 decimals."""
	radius = (mu / unit_ball_volume(m)) ** (1.0 / m)
	return EuclideanBall(m=m, center=tuple(center), radius=Fraction(f"{radius:.12f}"), name=name)


def region_from_spec(spec: Mapping[str, Any], m: Optional[int] = None) -> Region:
	"""Build a region from a config descriptor `{kind, center, radius, corners, vertices, ...}`."""
	kind = spec.get("kind")
	dim = spec.get("m", m)
	shape = spec.get("shape_constant")
	name = spec.get("name")
	if kind == "full-torus":
		if dim is None:
			raise RegionShapeError("full-torus needs m")
		return FullTorus(m=int(dim), shape_constant=shape, name=name)
	if kind == "axis-box":
		corners = spec.get("corners")
		if not corners or len(corners) != 2:
			raise RegionShapeError("axis-box needs corners [[lo...], [hi...]]")
		lo, hi = corners
		return AxisBox(m=len(lo), lo=tuple(lo), hi=tuple(hi), shape_constant=shape, name=name)
	if kind == "euclidean-ball":
		center = spec.get("center")
		if center is None:
			raise RegionShapeError("euclidean-ball needs a center")
		if spec.get("radius") is not None:
			return EuclideanBall(m=len(center), center=tuple(center), radius=spec["radius"], shape_constant=shape, name=name)
		if spec.get("measure") is not None:
			ball = ball_with_measure(len(center), center, float(spec["measure"]), name=name)
			return EuclideanBall(m=ball.m, center=ball.center, radius=ball.radius, shape_constant=shape, name=name)
		raise RegionShapeError("euclidean-ball needs a radius or a measure")
	if kind == "convex-polytope":
		vertices = spec.get("vertices")
		if not vertices:
			raise RegionShapeError("convex-polytope needs vertices")
		return ConvexPolytope(m=len(vertices[0]), vertices=tuple(tuple(v) for v in vertices), shape_constant=shape, name=name)
	if kind == "complement-of":
		inner = spec.get("inner")
		if inner is None:
			raise RegionShapeError("complement-of needs an inner region")
		region = region_from_spec(inner, m=dim)
		if isinstance(region, Complement):
			return region.inner
		return Complement(inner=region, shape_constant=shape, name=name)
	raise RegionShapeError(f"unknown region kind {kind!r}")


def measure(region: Region) -> float:
	return region.measure()


def contains(region: Region, u: Sequence[Any]) -> bool:
	return region.contains(u)


def cube_inside(region: Region, cube: Any) -> bool:
	return region.cube_inside(cube)


def iter_grid_blocks(p: int, m: int, block_points: int = GRID_BLOCK_POINTS) -> Iterator[np.ndarray]:
	"""Blocks of {0..p-1}^m in lexicographic order, split along the first coordinate."""
	rest = np.indices((p,) * (m - 1), dtype=np.int64).reshape(m - 1, -1).T if m > 1 else np.zeros((1, 0), dtype=np.int64)
	rows = max(1, block_points // len(rest))
	for start in range(0, p, rows):
		first = np.arange(start, min(start + rows, p), dtype=np.int64)
		yield np.column_stack([np.repeat(first, len(rest)), np.tile(rest, (len(first), 1))])


def lattice_points(region: Region, p: int, guard: int = LATTICE_GUARD) -> np.ndarray:
	"""Sorted integer vectors x in {0..p-1}^m with x/p in the region, as an (N, m) array."""
	check_guard("lattice", p**region.m, guard)
	found = [block[region.lattice_mask(block, p)] for block in iter_grid_blocks(p, region.m)]
	return np.concatenate(found) if found else np.zeros((0, region.m), dtype=np.int64)


def _uniform_chunks(m: int, samples: int, seed: int) -> Iterator[np.ndarray]:
	chunks = max(1, math.ceil(samples / MC_CHUNK))
	for i, child in enumerate(np.random.SeedSequence(seed).spawn(chunks)):
		size = min(MC_CHUNK, samples - i * MC_CHUNK)
		yield np.random.default_rng(child).random((size, m))


def _half_width(phat: float, samples: int) -> float:
	z = float(norm.ppf(0.5 + CONFIDENCE / 2))
	return z * math.sqrt((phat * (1.0 - phat) + 1.0 / samples) / samples)


def estimate_measure(region: Region, samples: int = MC_SAMPLES, seed: int = 0) -> MeasureEstimate:
	hits = 0
	for chunk in _uniform_chunks(region.m, samples, seed):
		hits += int((region._slack(chunk) > 0).sum())
	value = hits / samples
	return MeasureEstimate(value=value, half_width=_half_width(value, samples), sample_count=samples)


def shell_measure(region: Region, epsilon: float, samples: int = MC_SAMPLES, seed: int = 0, method: str = "auto") -> ShellEstimate:
	"""Measures of the collars Omega_eps^+ (outside) and Omega_eps^- (inside)."""
	if not 0 < epsilon < 0.5:
		raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
	closed = region._shell_closed_form(epsilon) if method != "monte_carlo" else None
	if closed is not None:
		plus, minus = closed
		half_width, count, used = 0.0, 0, "closed-form"
	else:
		plus_hits = minus_hits = 0
		for chunk in _uniform_chunks(region.m, samples, seed):
			inside = region._slack(chunk) > 0
			near = region.distance_to_boundary(chunk) < epsilon
			plus_hits += int((near & ~inside).sum())
			minus_hits += int((near & inside).sum())
		plus, minus = plus_hits / samples, minus_hits / samples
		half_width = max(_half_width(plus, samples), _half_width(minus, samples))
		count, used = samples, "monte-carlo"
	mu = region.measure()
	worst = max(plus, minus)
	scale = mu ** (1.0 - 1.0 / region.m) * epsilon + epsilon**region.m
	return ShellEstimate(
		epsilon=epsilon,
		plus_measure=plus,
		minus_measure=minus,
		half_width=half_width,
		sample_count=count,
		ws_ratio=worst / epsilon,
		vws_ratio=worst / scale,
		method=used,
	)
