from __future__ import annotations

import itertools
import math
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from equilab.dyadic import AnchoredCube, grid_cubes_inside
from equilab.errors import DimensionMismatchError, GuardExceededError, RegionShapeError
from equilab.region import (
	AxisBox,
	Complement,
	ConvexPolytope,
	EuclideanBall,
	FullTorus,
	contains,
	cube_inside,
	estimate_measure,
	lattice_points,
	measure,
	region_from_spec,
	shell_measure,
)


def _ball_oracle(center, radius, u) -> bool:
	total = Fraction(0)
	for x, c in zip(u, center):
		d = (Fraction(x) - Fraction(c)) % 1
		d = min(d, 1 - d)
		total += d * d
	return total <= Fraction(radius) ** 2


def _cube(corner, side):
	return SimpleNamespace(coords=(0,) * len(corner), corner=lambda: tuple(Fraction(c) for c in corner), side=Fraction(side))


def test_contains_examples(torus2):
	ball = EuclideanBall(m=2, center=("0.5", "0.5"), radius="0.25")
	assert contains(torus2, (0.3, 0.9))
	assert contains(ball, (0.5, 0.5))
	assert not contains(ball, (0, 0))
	assert contains(ball.complement(), (0, 0))
	assert ball.complement().complement() is ball
	with pytest.raises(DimensionMismatchError):
		contains(ball, (0.5,))


def test_half_open_box_membership(half_box):
	assert half_box.contains((0, 0))
	assert not half_box.contains(("1/2", 0))
	assert half_box.contains(("0.4999", "0.4999"))


def test_measure_examples(half_box):
	ball = EuclideanBall(m=2, center=("0.5", "0.5"), radius="0.25")
	assert measure(ball) == pytest.approx(math.pi / 16)
	assert measure(half_box) == pytest.approx(0.25)
	assert measure(half_box.complement()) == pytest.approx(0.75)
	assert measure(EuclideanBall(m=3, center=(0, 0, 0), radius="0.25")) == pytest.approx(4 / 3 * math.pi / 64)


def test_lattice_point_examples(torus2, half_box, ball03):
	assert len(lattice_points(torus2, 5)) == 25
	box_pts = lattice_points(half_box, 7)
	assert len(box_pts) == 16
	assert box_pts.max() == 3
	expected = [x for x in itertools.product(range(11), repeat=2) if _ball_oracle(ball03.center, ball03.radius, (Fraction(x[0], 11), Fraction(x[1], 11)))]
	assert [tuple(x) for x in lattice_points(ball03, 11).tolist()] == expected


def test_lattice_points_resolve_boundary_ties():
	# radius 3/11 at p=11 puts lattice points exactly on the circle
	ball = EuclideanBall(m=2, center=(0, 0), radius="3/11")
	pts = {tuple(x) for x in lattice_points(ball, 11).tolist()}
	assert (3, 0) in pts and (8, 0) in pts and (0, 3) in pts
	assert (3, 1) not in pts
	assert len(lattice_points(ball, 11)) + len(lattice_points(ball.complement(), 11)) == 121


def test_lattice_guard(torus2):
	with pytest.raises(GuardExceededError):
		lattice_points(torus2, 101, guard=1000)


def test_polytope_lattice_points_match_oracle():
	tri = ConvexPolytope(m=2, vertices=(("0.1", "0.1"), ("0.9", "0.1"), ("0.1", "0.9")))
	assert measure(tri) == pytest.approx(0.32)
	p = 11
	expected = []
	for x in itertools.product(range(p), repeat=2):
		u = [Fraction(v, p) for v in x]
		if u[0] >= Fraction(1, 10) and u[1] >= Fraction(1, 10) and u[0] + u[1] <= 1:
			expected.append(x)
	assert [tuple(x) for x in lattice_points(tri, p).tolist()] == expected


def test_shell_examples(torus2, half_box, ball03):
	flat = shell_measure(torus2, 0.01)
	assert flat.plus_measure == 0 and flat.minus_measure == 0
	assert shell_measure(ball03, 0.01).plus_measure == pytest.approx(math.pi * (0.31**2 - 0.30**2), rel=1e-9)
	box_shell = shell_measure(half_box, 0.01)
	assert box_shell.plus_measure == pytest.approx(4 * 0.5 * 0.01 + math.pi * 0.01**2, rel=1e-9)
	assert box_shell.method == "closed-form"
	with pytest.raises(ValueError):
		shell_measure(ball03, 0.5)


def test_monte_carlo_shell_matches_closed_form(ball03):
	closed = shell_measure(ball03, 0.02)
	sampled = shell_measure(ball03, 0.02, samples=200_000, seed=3, method="monte_carlo")
	assert sampled.method == "monte-carlo"
	assert abs(sampled.plus_measure - closed.plus_measure) <= 3 * sampled.half_width
	assert abs(sampled.minus_measure - closed.minus_measure) <= 3 * sampled.half_width


@pytest.mark.parametrize(
	"region",
	[
		EuclideanBall(m=2, center=("1/2", "1/2"), radius="3/10"),
		EuclideanBall(m=3, center=("1/4", "1/4", "1/4"), radius="2/5"),
		AxisBox(m=2, lo=("0.1", "0.2"), hi=("0.7", "0.5")),
		AxisBox(m=3, lo=(0, 0, 0), hi=("1/2", "1/2", "1/2")),
		ConvexPolytope(m=2, vertices=((0, 0), (1, 0), (0, 1))),
	],
)
def test_monte_carlo_measure_is_consistent(region):
	est = estimate_measure(region, samples=200_000, seed=11)
	assert abs(est.value - region.measure()) <= 3 * est.half_width


def test_cube_inside_examples(torus2):
	assert cube_inside(torus2, _cube(("0.3", "0.7"), "1/2"))
	small = EuclideanBall(m=2, center=("0.5", "0.5"), radius="0.25")
	for corner in [("0", "0"), ("0.25", "0.25"), ("0.4", "0.1")]:
		assert not cube_inside(small, _cube(corner, "1/2"))
	big = EuclideanBall(m=2, center=("0.5", "0.5"), radius="0.4")
	assert cube_inside(big, _cube(("0.45", "0.45"), "1/8"))
	assert not cube_inside(big, _cube(("0.1", "0.1"), "1/8"))


def _far_distance(a: float, w: float, c: float) -> float:
	"""Largest circular distance from c to the arc [a, a+w], written out case by case."""
	candidates = [a, a + w]
	antipode = (c + 0.5) % 1.0
	for shift in (-1.0, 0.0, 1.0):
		if a <= antipode + shift <= a + w:
			return 0.5
	best = 0.0
	for t in candidates:
		d = abs(t - c) % 1.0
		best = max(best, min(d, 1.0 - d))
	return best


def test_ball_grid_matches_per_cube_oracle(anchor2):
	ball = EuclideanBall(m=2, center=("1/2", "1/2"), radius="0.4")
	k = 8
	gamma = anchor2.as_floats()
	expected = set()
	for u in itertools.product(range(k), repeat=2):
		corner = [(g + ui / k) % 1.0 for g, ui in zip(gamma, u)]
		far = sum(_far_distance(a, 1.0 / k, 0.5) ** 2 for a in corner)
		if far <= 0.16:
			expected.add(u)
	found = {cube.coords for cube in grid_cubes_inside(ball, k, anchor2)}
	assert found == expected


@pytest.mark.parametrize(
	"region",
	[
		ConvexPolytope(m=2, vertices=(("0.1", "0.2"), ("0.8", "0.1"), ("0.6", "0.9"), ("0.2", "0.7"))),
		AxisBox(m=2, lo=("0.1", "0.3"), hi=("0.9", "0.6")),
		Complement(inner=EuclideanBall(m=2, center=("1/2", "1/2"), radius="1/4")),
	],
)
def test_grid_mask_agrees_with_exact_certification(region, anchor2):
	k = 16
	mask = region.grid_mask(k, anchor2.gamma)
	outside = region.grid_mask(k, anchor2.gamma, outside=True)
	for u in itertools.product(range(k), repeat=2):
		cube = AnchoredCube(k, u, anchor2)
		assert mask[u] == region.cube_inside(cube)
		assert outside[u] == region.cube_outside(cube)
		assert not (mask[u] and outside[u])


def test_region_from_spec():
	ball = region_from_spec({"kind": "euclidean-ball", "center": ["1/2", "1/2"], "measure": 0.1})
	assert ball.measure() == pytest.approx(0.1, rel=1e-9)
	box = region_from_spec({"kind": "axis-box", "corners": [[0, 0], ["1/2", "1/4"]]})
	assert box.measure() == pytest.approx(0.125)
	inner = {"kind": "euclidean-ball", "center": [0, 0], "radius": "1/5"}
	twice = region_from_spec({"kind": "complement-of", "inner": {"kind": "complement-of", "inner": inner}})
	assert twice == region_from_spec(inner)
	assert region_from_spec({"kind": "full-torus"}, m=3).m == 3
	assert isinstance(region_from_spec({"kind": "full-torus", "m": 2}), FullTorus)


@pytest.mark.parametrize(
	"spec",
	[
		{"kind": "hexagon"},
		{"kind": "full-torus"},
		{"kind": "axis-box", "corners": [[0.5, 0], [0.5, 1]]},
		{"kind": "euclidean-ball", "center": [0, 0], "radius": 0.75},
		{"kind": "euclidean-ball", "center": [0, 0]},
		{"kind": "convex-polytope", "vertices": [[0, 0], [2, 0], [0, 1]]},
	],
)
def test_region_from_spec_rejects(spec):
	with pytest.raises(RegionShapeError):
		region_from_spec(spec)


def test_shape_flags(half_box, ball03):
	assert ball03.very_well_shaped
	assert half_box.very_well_shaped
	assert not AxisBox(m=2, lo=(0, 0), hi=("1/2", "1/4")).very_well_shaped
	assert ball03.complement().very_well_shaped


def test_distance_to_boundary_of_ball(ball03):
	pts = np.array([[0.5, 0.5], [0.5, 0.9], [0.0, 0.5]])
	assert ball03.distance_to_boundary(pts) == pytest.approx([0.3, 0.1, 0.2])


SHELL_EPSILONS = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2)


@pytest.mark.parametrize(
	"region, method",
	[
		(EuclideanBall(m=2, center=("1/2", "1/2"), radius="3/10"), "auto"),
		(EuclideanBall(m=2, center=("1/2", "1/2"), radius="3/10"), "monte_carlo"),
		(AxisBox(m=2, lo=(0, 0), hi=("1/2", "1/2")), "auto"),
		(ConvexPolytope(m=2, vertices=(("0.1", "0.2"), ("0.8", "0.1"), ("0.6", "0.9"))), "monte_carlo"),
		(Complement(inner=EuclideanBall(m=2, center=("1/2", "1/2"), radius="1/4")), "auto"),
	],
)
def test_shells_grow_with_epsilon(region, method):
	shells = [shell_measure(region, eps, samples=20_000, seed=8, method=method) for eps in SHELL_EPSILONS]
	for smaller, larger in zip(shells, shells[1:]):
		assert larger.plus_measure >= smaller.plus_measure
		assert larger.minus_measure >= smaller.minus_measure


def _points_in_cube(cube, count, rng):
	denom = 1 << 20
	corner = cube.corner()
	for _ in range(count):
		yield tuple((c + cube.side * Fraction(int(t), denom)) % 1 for c, t in zip(corner, rng.integers(0, denom + 1, size=len(corner))))


CERTIFIED_REGIONS = [
	EuclideanBall(m=2, center=("1/2", "1/2"), radius="3/10"),
	AxisBox(m=2, lo=("0.1", "0.3"), hi=("0.9", "0.6")),
	ConvexPolytope(m=2, vertices=(("0.1", "0.2"), ("0.8", "0.1"), ("0.6", "0.9"), ("0.2", "0.7"))),
	Complement(inner=EuclideanBall(m=2, center=("1/2", "1/2"), radius="1/4")),
]


@pytest.mark.parametrize("region", CERTIFIED_REGIONS)
def test_certified_cubes_hold_sampled_points(region, anchor2):
	rng = np.random.default_rng(21)
	cubes = grid_cubes_inside(region, 8, anchor2)
	assert cubes
	for index in rng.integers(0, len(cubes), size=10_000):
		cube = cubes[int(index)]
		for u in _points_in_cube(cube, 1, rng):
			assert region.contains(u), (cube, u)


@pytest.mark.slow
@pytest.mark.parametrize("region", CERTIFIED_REGIONS)
def test_every_certified_cube_holds_sampled_points(region, anchor2):
	rng = np.random.default_rng(22)
	for cube in grid_cubes_inside(region, 4, anchor2):
		assert all(region.contains(u) for u in _points_in_cube(cube, 10_000, rng))


@pytest.mark.parametrize(
	"m, primes",
	[(1, (2, 5, 101, 211)), (2, (3, 31, 101, 211)), (3, (5, 17, 53))],
)
def test_cube_count_law(m, primes):
	rng = np.random.default_rng(m)
	for p in primes:
		for k in (1, 2, 3, 5, 8, 16):
			scale = 997 * k
			lo = tuple(Fraction(int(rng.integers(0, 997 * (k - 1) + 1)), scale) for _ in range(m))
			box = AxisBox(m=m, lo=lo, hi=tuple(a + Fraction(1, k) for a in lo))
			count = len(lattice_points(box, p))
			assert abs(count - p**m / k**m) <= 2 * m * (p / k + 1) ** (m - 1)
