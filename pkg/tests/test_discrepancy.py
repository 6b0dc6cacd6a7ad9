from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from equilab.dyadic import AnchoredCube, boundary_denominators, build_cover, draw_anchor
from equilab.errors import DependentSystemError, GuardExceededError
from equilab.discrepancy import (
	Box,
	DiscrepancyGuards,
	FractionalPointSet,
	box_count,
	cover_box_lower_bound,
	cube_discrepancy_ratio,
	cube_points,
	discrepancy_of_system,
	extreme_discrepancy_exact,
	ks_bound,
	sampled_discrepancy_lower_bound,
	theorem_ratios,
)
from equilab.field_poly import PolySystem
from equilab.region import AxisBox, EuclideanBall


def _oracle(res: np.ndarray, q: int) -> Fraction:
	"""Sup of |A/N - vol| from every box with corners on point coordinates, 0 or 1."""
	N, n = res.shape
	Q = q**n
	per_axis = []
	for j in range(n):
		ends = sorted(set(res[:, j].tolist()) | {0, q})
		per_axis.append([(a, b) for a in ends for b in ends if a <= b])
	boxes = np.array(list(itertools.product(*per_axis)), dtype=np.int64)
	lo, hi = boxes[:, :, 0], boxes[:, :, 1]
	vol = np.prod(hi - lo, axis=1)
	x = res[None, :, :]
	half = ((x >= lo[:, None, :]) & (x < hi[:, None, :])).all(axis=2).sum(axis=1)
	closed = ((x >= lo[:, None, :]) & (x <= hi[:, None, :])).all(axis=2).sum(axis=1)
	opened = ((x > lo[:, None, :]) & (x < hi[:, None, :])).all(axis=2).sum(axis=1)
	best = max(
		int(np.abs(half * Q - N * vol).max()),
		int((closed * Q - N * vol).max()),
		int((N * vol - opened * Q).max()),
	)
	return Fraction(best, N * Q)


def _random_sets(count: int, seed: int):
	rng = np.random.default_rng(seed)
	for _ in range(count):
		n = int(rng.choice([1, 1, 2, 2, 3]))
		q = int(rng.choice([5, 7, 11, 13])) if n < 3 else 5
		N = int(rng.integers(1, 9 if n < 3 else 6))
		yield FractionalPointSet(rng.integers(0, q, size=(N, n)), q)


def test_exact_matches_brute_force():
	for pts in _random_sets(200, seed=17):
		found = extreme_discrepancy_exact(pts)
		assert found.D == _oracle(pts.residues, pts.q)


def test_witness_attains_the_discrepancy():
	for pts in _random_sets(60, seed=4):
		found = extreme_discrepancy_exact(pts)
		box = found.witness
		gap = Fraction(box.count(pts), pts.N) - box.volume
		assert (gap if found.family == "surplus" else -gap) == found.D


@pytest.mark.parametrize("N", [1, 2, 3, 8, 17, 64])
def test_equally_spaced_points(N):
	pts = FractionalPointSet(np.arange(N).reshape(-1, 1), N)
	assert extreme_discrepancy_exact(pts).D == Fraction(1, N)
	assert sampled_discrepancy_lower_bound(pts, trials=500, seed=1) == Fraction(1, N)


def test_empty_and_single_point():
	assert extreme_discrepancy_exact(FractionalPointSet.empty(2)).D == 1
	assert sampled_discrepancy_lower_bound(FractionalPointSet.empty(1)) == 1
	assert extreme_discrepancy_exact(FractionalPointSet(np.array([[3]]), 7)).D == 1
	assert extreme_discrepancy_exact(FractionalPointSet(np.array([[3, 5]]), 7)).D == 1


def test_sampled_never_exceeds_exact():
	for i, pts in enumerate(_random_sets(60, seed=8)):
		assert sampled_discrepancy_lower_bound(pts, trials=200, seed=i) <= extreme_discrepancy_exact(pts).D


def test_discrepancy_ignores_point_order():
	rng = np.random.default_rng(3)
	res = rng.integers(0, 31, size=(40, 2))
	shuffled = res[rng.permutation(len(res))]
	assert extreme_discrepancy_exact(FractionalPointSet(res, 31)).D == extreme_discrepancy_exact(FractionalPointSet(shuffled, 31)).D


def test_point_set_validation():
	with pytest.raises(ValueError):
		FractionalPointSet(np.array([[7]]), 7)
	with pytest.raises(ValueError):
		FractionalPointSet(np.array([1, 2]), 7)


def test_guards():
	pts = FractionalPointSet(np.arange(20).reshape(-1, 2) % 7, 7)
	with pytest.raises(GuardExceededError):
		extreme_discrepancy_exact(pts, DiscrepancyGuards(n2_points=5))
	with pytest.raises(GuardExceededError):
		extreme_discrepancy_exact(pts, DiscrepancyGuards(work=10))
	with pytest.raises(GuardExceededError):
		extreme_discrepancy_exact(FractionalPointSet(np.zeros((2, 4), dtype=np.int64), 5))


def test_ks_bound():
	assert ks_bound(53.0, 26, 2809, 1) == pytest.approx(1 / 26 + math.log(26) * 53 / 2809)
	assert ks_bound(0.0, 2, 10, 3) == pytest.approx(0.5)
	with pytest.raises(ValueError):
		ks_bound(1.0, 10, 0, 1)
	with pytest.raises(ValueError):
		ks_bound(1.0, 1, 10, 1)


@pytest.mark.parametrize("mu", [1.0, 0.5, 0.1, 1e-3])
def test_second_ratio_dominates_first(mu):
	thm1, thm2 = theorem_ratios(0.02, mu, 101, 2, 1)
	assert thm2 >= thm1
	assert thm1 == pytest.approx(0.02 * mu * math.sqrt(101) / math.log(101) ** 3)


def test_product_system_on_full_torus(product_system, torus2):
	report = discrepancy_of_system(product_system, 53, torus2, L=26)
	assert report.N == 2809
	assert report.exact_D == Fraction(105, 2809)
	assert report.S_star == pytest.approx(53)
	assert report.L == 26
	assert report.exact_D <= 10 * report.ks_bound
	assert report.method == "exact"
	row = report.as_dict()
	assert row["exact_D_fraction"] == "105/2809"
	assert row["witness"]["include_upper"] is True


def test_region_without_lattice_points(product_system):
	tiny = AxisBox(m=2, lo=("1/100", "1/100"), hi=("1/50", "1/50"))
	report = discrepancy_of_system(product_system, 5, tiny)
	assert report.N == 0
	assert report.exact_D == 1
	assert report.S_star == 0.0
	assert report.ks_bound is None


def test_guard_falls_back_to_sampling(product_system, ball03):
	report = discrepancy_of_system(product_system, 53, ball03, guards=DiscrepancyGuards(n1_points=10), sampled_trials=300, seed=2)
	assert report.exact_D is None
	assert report.method == "sampled"
	assert 0 < report.sampled_D <= 1
	assert report.D == report.sampled_D


def test_sampled_and_exact_together(product_system, ball03):
	report = discrepancy_of_system(product_system, 29, ball03, sampled_trials=200, seed=5)
	assert report.sampled_D <= report.exact_D


def test_dependent_system_is_rejected(torus2):
	with pytest.raises(DependentSystemError) as info:
		discrepancy_of_system(PolySystem.parse(["X1", "X2"]), 11, torus2)
	assert info.value.witness == (1, 0)


def test_box_count(product_system, torus2):
	half = Box(lo=(0,), hi=("1/2",))
	result = box_count(product_system, 11, torus2, half)
	# value 0 has 21 preimages, values 1..5 have 10 each
	assert result.count == 71
	assert result.expected == pytest.approx(60.5)


def test_box_flags():
	pts = FractionalPointSet(np.array([[0], [2], [4]]), 8)
	assert Box(lo=(0,), hi=("1/2",)).count(pts) == 2
	assert Box(lo=(0,), hi=("1/2",), include_upper=True).count(pts) == 3
	assert Box(lo=(0,), hi=("1/2",), exclude_lower=True).count(pts) == 1
	with pytest.raises(ValueError):
		Box(lo=("1/2",), hi=("1/4",))


def test_cover_box_lower_bound(product_system):
	p = 31
	ball = EuclideanBall(m=2, center=("1/2", "1/2"), radius="2/5")
	anchor = draw_anchor(2, seed=1, forbidden_denominators=boundary_denominators(p, 4))
	cover = build_cover(ball, 4, anchor)
	counts = cover_box_lower_bound(product_system, p, cover, Box(lo=(0,), hi=("1/3",)))
	assert 0 < counts["cover_count"] <= counts["region_count"]


def test_cube_points_and_ratio(product_system, anchor2):
	p = 13
	assert len(cube_points(AnchoredCube(1, (0, 0), anchor2), p)) == p * p
	quarters = [len(cube_points(AnchoredCube(2, u, anchor2), p)) for u in itertools.product(range(2), repeat=2)]
	assert sum(quarters) == p * p
	row = cube_discrepancy_ratio(product_system, p, AnchoredCube(2, (0, 1), anchor2))
	assert row["method"] == "exact"
	assert 0 < row["D"] <= 1


@pytest.mark.slow
def test_exact_matches_brute_force_larger_sets():
	rng = np.random.default_rng(29)
	for _ in range(60):
		n = int(rng.integers(1, 3))
		q = int(rng.choice([31, 37, 41]))
		N = int(rng.integers(9, 31))
		pts = FractionalPointSet(rng.integers(0, q, size=(N, n)), q)
		assert extreme_discrepancy_exact(pts).D == _oracle(pts.residues, pts.q)
