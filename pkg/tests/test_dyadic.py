from __future__ import annotations

import dataclasses
import itertools
from fractions import Fraction

import numpy as np
import pytest
from sympy import primerange

from equilab.dyadic import (
	FIXED_ONE,
	AnchoredCube,
	boundary_denominators,
	build_cover,
	choose_depth,
	cover_diagnostics,
	draw_anchor,
	grid_cell_indices,
	grid_count_law,
	grid_cubes_inside,
	on_grid_boundary,
)
from equilab.errors import DimensionMismatchError
from equilab.region import ConvexPolytope, EuclideanBall, FullTorus, estimate_measure, lattice_points, shell_measure


def _ball(r: str) -> EuclideanBall:
	return EuclideanBall(m=2, center=("1/2", "1/2"), radius=r)


def _assert_disjoint(cover):
	members = {(cube.level, cube.coords) for _, cube in cover.cubes()}
	assert len(members) == sum(cover.layer_counts)
	for i, cube in cover.cubes():
		for j in range(1, i):
			coarse = cube.ancestor(1 << j)
			assert (coarse.level, coarse.coords) not in members


def test_anchor_is_deterministic():
	a, b = draw_anchor(2, seed=42), draw_anchor(2, seed=42)
	assert a == b
	assert draw_anchor(2, seed=43) != a
	assert all(0 <= g < 1 and g.denominator <= FIXED_ONE for g in a.gamma)
	assert FIXED_ONE % a.gamma[0].denominator == 0


def test_anchor_avoids_cube_boundaries():
	anchor = draw_anchor(3, seed=2024)
	for p in primerange(2, 10_000):
		for den in boundary_denominators(int(p), 20):
			assert not anchor.hits(den)


def test_grid_examples(torus2, anchor2):
	assert len(grid_cubes_inside(torus2, 4, anchor2)) == 16
	tiny = EuclideanBall(m=2, center=(0, 0), radius="1/3")
	assert grid_cubes_inside(tiny, 2, anchor2) == []
	with pytest.raises(DimensionMismatchError):
		grid_cubes_inside(FullTorus(m=3), 2, anchor2)


def test_cube_hierarchy(anchor2):
	cube = AnchoredCube(8, (5, 2), anchor2)
	assert cube.parent() == AnchoredCube(4, (2, 1), anchor2)
	assert cube.ancestor(2) == AnchoredCube(2, (1, 0), anchor2)
	assert cube.ancestor(2).contains(cube)
	assert not AnchoredCube(2, (0, 0), anchor2).contains(cube)
	assert cube.interiors_disjoint(AnchoredCube(8, (5, 3), anchor2))
	assert not cube.interiors_disjoint(AnchoredCube(4, (2, 1), anchor2))
	assert cube.measure() == Fraction(1, 64)
	with pytest.raises(ValueError):
		AnchoredCube(3, (0, 0), anchor2).parent()


def test_full_torus_cover(torus2, anchor2):
	cover = build_cover(torus2, 3, anchor2)
	assert cover.layer_counts == [4, 0, 0]
	assert cover.union_measure() == 1
	diag = cover_diagnostics(cover)
	assert diag.ratio_ws[1:] == [0.0, 0.0]
	assert diag.deficiency == 0


def test_depth_one_cover_is_the_coarse_grid(anchor2):
	ball = _ball("0.45")
	cover = build_cover(ball, 1, anchor2)
	assert {c.coords for c in cover.layer(1)} == {c.coords for c in grid_cubes_inside(ball, 2, anchor2)}


def test_ball_cover_is_sound_and_disjoint(anchor2):
	ball = _ball("0.4")
	cover = build_cover(ball, 6, anchor2)
	_assert_disjoint(cover)
	for _, cube in cover.cubes():
		assert ball.cube_inside(cube)
	assert cover.union_measure() <= Fraction(ball.radius) ** 2 * Fraction(355, 113)


def test_union_measure_grows_with_depth(anchor2):
	ball = _ball("0.3")
	measures = [build_cover(ball, M, anchor2).union_measure() for M in range(1, 8)]
	assert measures == sorted(measures)
	assert measures[-1] > 0


@pytest.mark.parametrize("r", ["1/5", "3/10", "2/5"])
def test_cover_bounds_small_depth(r, anchor2):
	ball = _ball(r)
	diag = cover_diagnostics(build_cover(ball, 6, anchor2))
	assert max(diag.ratio_vws) <= 32
	assert diag.deficiency_vws <= 8
	assert diag.deficiency > 0


@pytest.mark.slow
@pytest.mark.parametrize("r", ["1/5", "3/10", "2/5"])
def test_cover_bounds_depth_ten(r):
	ball = _ball(r)
	anchor = draw_anchor(2, seed=7, forbidden_denominators=boundary_denominators(1009, 10))
	cover = build_cover(ball, 10, anchor)
	_assert_disjoint(cover)
	diag = cover_diagnostics(cover)
	assert max(diag.ratio_vws) <= 32
	assert diag.deficiency_vws <= 8
	assert len(diag.rows()) == 10


def test_grid_count_law(anchor2):
	ball = _ball("3/10")
	rows = grid_count_law(ball, [2**i for i in range(1, 9)], anchor2)
	assert [row["k"] for row in rows] == [2, 4, 8, 16, 32, 64, 128, 256]
	assert all(abs(row["law"]) <= 16 for row in rows)


def test_choose_depth():
	assert choose_depth("thm1", 101) == 3
	assert choose_depth("thm2", 101) == 6
	assert choose_depth("thm2", 1031) == 10
	assert choose_depth("thm3", 101, n=1) == 1
	assert choose_depth("explicit", 101, M=4) == 4
	with pytest.raises(ValueError):
		choose_depth("explicit", 101)
	with pytest.raises(ValueError):
		choose_depth("deep", 101)


def test_grid_cell_indices_are_exact(anchor2):
	p, k = 101, 16
	pts = np.array(list(itertools.product(range(0, p, 7), repeat=2)))
	cells = grid_cell_indices(pts, p, k, anchor2)
	for x, u in zip(pts.tolist(), cells.tolist()):
		for xj, gj, uj in zip(x, anchor2.gamma, u):
			offset = (Fraction(xj, p) - gj) % 1
			assert uj == int(offset * k)
		assert not on_grid_boundary(x, p, k, anchor2)


def test_locate_and_layer_of_agree():
	ball = _ball("0.4")
	p = 101
	anchor = draw_anchor(2, seed=5, forbidden_denominators=boundary_denominators(p, 5))
	cover = build_cover(ball, 5, anchor)
	pts = lattice_points(ball, p)
	layers = cover.layer_of(pts, p)
	for x, layer in zip(pts.tolist(), layers.tolist()):
		found = cover.locate(x, p)
		if layer == 0:
			assert found is None
		else:
			i, cube = found
			assert i == layer
			assert cube.level == 1 << i


def test_cover_holds_the_inner_region():
	ball = _ball("0.4")
	p, M = 101, 5
	anchor = draw_anchor(2, seed=9, forbidden_denominators=boundary_denominators(p, M))
	cover = build_cover(ball, M, anchor)
	pts = lattice_points(ball, p)
	deep = ball.distance_to_boundary(pts / p) > cover.epsilon + 1e-9
	assert (cover.layer_of(pts[deep], p) > 0).all()
	outside = lattice_points(ball.complement(), p)
	assert (cover.layer_of(outside, p) == 0).all()


def test_cover_records(anchor2):
	cover = build_cover(_ball("0.3"), 3, anchor2)
	records = list(cover.records())
	assert len(records) == sum(cover.layer_counts)
	assert {r["layer"] for r in records} <= {1, 2, 3}
	assert all(r["level"] == 1 << r["layer"] for r in records)


@pytest.mark.parametrize(
	"region, M",
	[
		(EuclideanBall(m=2, center=("1/2", "1/2"), radius="3/10"), 7),
		(EuclideanBall(m=3, center=("1/2", "1/2", "1/2"), radius="2/5"), 5),
		(ConvexPolytope(m=2, vertices=(("0.1", "0.2"), ("0.8", "0.1"), ("0.6", "0.9"), ("0.2", "0.7"))), 6),
	],
)
def test_union_measure_tracks_sampled_region_measure(region, M):
	anchor = draw_anchor(region.m, seed=13)
	cover = build_cover(region, M, anchor)
	union = float(cover.union_measure())
	est = estimate_measure(region, samples=200_000, seed=5)
	slack = 3 * est.half_width
	assert union <= est.value + slack
	# everything deeper than epsilon inside the region is covered
	collar = shell_measure(region, cover.epsilon, samples=200_000, seed=6)
	assert est.value - union <= collar.minus_measure + slack + 3 * collar.half_width


def test_cover_is_immutable(anchor2):
	cover = build_cover(_ball("0.3"), 3, anchor2)
	with pytest.raises(dataclasses.FrozenInstanceError):
		cover.M = 4
	layer = max(cover.layers, key=len)
	assert len(layer)
	with pytest.raises(ValueError):
		layer[0, 0] = 5
	assert isinstance(cover.grid_counts, tuple)
	assert cover.locate((50, 50), 101) == cover.locate((50, 50), 101)
