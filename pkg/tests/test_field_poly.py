from __future__ import annotations

import itertools

import numpy as np
import pytest

from equilab.errors import DimensionMismatchError, InvalidPrimeError, PolynomialParseError, SystemKindError
from equilab.field_poly import (
	MvPolynomial,
	PolySystem,
	as_prime,
	degree2_independent,
	evaluate,
	linear_combination,
	parse_polynomial,
	value_table,
)


@pytest.mark.parametrize(
	"text, point, p, expected",
	[
		("X1^2 + X2", (2, 3), 7, 0),
		("X1*X2", (3, 4), 5, 2),
		("x1 * x2 + 3", (3, 4), 5, 0),
		("-X1", (1, 0), 7, 6),
	],
)
def test_evaluate_examples(text, point, p, expected):
	assert evaluate(parse_polynomial(text, m=2), point, p) == expected


def test_constant_is_constant_everywhere():
	five = parse_polynomial("5", m=2)
	assert {evaluate(five, (x1, x2), 7) for x1 in range(7) for x2 in range(7)} == {5}


def test_evaluate_many_matches_scalar():
	poly = parse_polynomial("3*X1^4*X2 - 2*X2^3 + X1 + 11", m=2)
	pts = np.array(list(itertools.product(range(13), repeat=2)))
	many = poly.evaluate_many(pts, 13)
	assert many.dtype == np.int64
	assert many.tolist() == [evaluate(poly, tuple(x), 13) for x in pts]


def test_value_table_shape(product_system):
	pts = np.array([[1, 2], [3, 4], [6, 6]])
	table = value_table(product_system, pts, 7)
	assert table.shape == (3, 1)
	assert table[:, 0].tolist() == [2, 5, 1]


def test_invalid_prime_rejected():
	poly = parse_polynomial("X1", m=1)
	for bad in (1, 4, 9, 1 << 31):
		with pytest.raises(InvalidPrimeError):
			evaluate(poly, (1,), bad)
	assert as_prime(2) == 2


def test_dimension_mismatch():
	poly = parse_polynomial("X1*X2")
	with pytest.raises(DimensionMismatchError):
		evaluate(poly, (1,), 5)
	with pytest.raises(DimensionMismatchError):
		parse_polynomial("X3", m=2)


@pytest.mark.parametrize("text", ["X1^17", "X1/2", "sin(X1)", "X1 +", "y"])
def test_parse_rejects(text):
	with pytest.raises(PolynomialParseError):
		parse_polynomial(text, m=1)


def test_parse_infers_variable_count():
	poly = parse_polynomial("X1 + X3")
	assert poly.m == 3
	assert poly.as_dict() == {(1, 0, 0): 1, (0, 0, 1): 1}
	assert poly.degree == 1


def test_zero_system_needs_more_variables_than_equations():
	with pytest.raises(SystemKindError):
		PolySystem.parse(["X1 - 1"], kind="zero")
	system = PolySystem.parse(["1"], kind="zero", m=2)
	assert system.m == 2 and system.n == 1


def test_system_hash_is_stable_and_sensitive():
	a = PolySystem.parse(["X1*X2 + 1"])
	b = PolySystem.parse([" x2*x1+1 "])
	c = PolySystem.parse(["X1*X2 + 2"])
	assert a.system_hash == b.system_hash
	assert a.system_hash != c.system_hash


def test_linear_combination_examples():
	system = PolySystem.parse(["X1^2 + X1", "2*X1^2"])
	assert linear_combination(system, (0, 0), 5).is_zero
	assert linear_combination(system, (1, 0), 5) == system.polys[0].reduce(5)
	assert linear_combination(system, (2, 4), 5).as_dict() == {(1,): 2}
	with pytest.raises(DimensionMismatchError):
		linear_combination(system, (1,), 5)


def test_degree2_examples():
	assert degree2_independent(PolySystem.parse(["X1^2", "X1*X2"]), 5).independent
	dep = degree2_independent(PolySystem.parse(["X1^2 + X1", "2*X1^2"]), 5)
	assert not dep.independent
	# (1, 2) is the normalised form of (2, 4)
	assert dep.witness == (1, 2)
	linear = degree2_independent(PolySystem.parse(["X1 + X2"]), 11)
	assert not linear.independent and linear.witness == (1,)


def test_degree2_rejects_zero_systems(hyperbola):
	with pytest.raises(SystemKindError):
		degree2_independent(hyperbola, 5)


def _random_terms(rng, m, max_degree):
	terms = {}
	size = int(rng.integers(1, 4))
	while len(terms) < size:
		mono = tuple(int(e) for e in rng.integers(0, max_degree + 1, size=m))
		if sum(mono) <= max_degree:
			terms[mono] = int(rng.integers(-3, 4))
	return terms


def _random_system(rng, n, m=2, max_degree=3):
	term_sets = [_random_terms(rng, m, max_degree) for _ in range(n)]
	if n >= 2 and rng.random() < 0.4:
		# last polynomial = c1 P1 + c2 P2 + (linear part), dependent in degree >= 2
		c1, c2 = (int(c) for c in rng.integers(-2, 3, size=2))
		mixed = {}
		for c, terms in ((c1, term_sets[0]), (c2, term_sets[1])):
			for mono, coeff in terms.items():
				mixed[mono] = mixed.get(mono, 0) + c * coeff
		mixed[tuple(int(j == 0) for j in range(m))] = mixed.get(tuple(int(j == 0) for j in range(m)), 0) + 1
		term_sets[-1] = mixed
	polys = [MvPolynomial.from_terms(m, terms) for terms in term_sets]
	if any(poly.is_zero for poly in polys):
		return None
	return PolySystem(polys=tuple(polys))


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_degree2_agrees_with_exhaustive_scan(p, n):
	rng = np.random.default_rng([p, n])
	checked = 0
	while checked < 25:
		system = _random_system(rng, n)
		if system is None:
			continue
		checked += 1
		exhaustive = all(
			linear_combination(system, a, p).degree >= 2
			for a in itertools.product(range(p), repeat=system.n)
			if any(a)
		)
		result = degree2_independent(system, p)
		assert result.independent == exhaustive
		if not result.independent:
			assert any(result.witness)
			assert linear_combination(system, result.witness, p).degree < 2
