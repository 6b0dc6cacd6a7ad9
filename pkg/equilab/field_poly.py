from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from tokenize import TokenError
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations
from sympy.polys.domains import GF
from sympy.polys.matrices import DomainMatrix

from .errors import (
	DimensionMismatchError,
	InvalidPrimeError,
	PolynomialParseError,
	SystemKindError,
)

Monomial = Tuple[int, ...]  # exponent vector, one entry per variable
Residue = int  # element of {0, ..., p-1}

DEGREE_CAP = 16
TERM_CAP = 10_000
PRIME_CAP = 1 << 31


@lru_cache(maxsize=4096)
def _is_prime(p: int) -> bool:
	return bool(sp.isprime(p))


@dataclass(frozen=True)
class PrimeModulus:
	p: int

	def __post_init__(self) -> None:
		if isinstance(self.p, bool) or not isinstance(self.p, (int, np.integer)):
			raise InvalidPrimeError(f"modulus must be an integer, got {self.p!r}")
		if not 2 <= int(self.p) < PRIME_CAP:
			raise InvalidPrimeError(f"modulus {self.p} outside [2, 2^31)")
		if not _is_prime(int(self.p)):
			raise InvalidPrimeError(f"{self.p} is not prime")
		object.__setattr__(self, "p", int(self.p))

	def __int__(self) -> int:
		return self.p


PrimeLike = Union[int, PrimeModulus]


def as_prime(p: PrimeLike) -> int:
	"""Validate `p` and return it as a plain int."""
	if isinstance(p, PrimeModulus):
		return p.p
	return PrimeModulus(p).p


@dataclass(frozen=True)
class MvPolynomial:
	"""Sparse polynomial in `m` variables.

	`terms` holds (monomial, coefficient) pairs sorted by monomial, with no zero
	coefficient. `modulus` is None for integer polynomials and p for F_p
	polynomials (coefficients then lie in [0, p)).
	"""

	m: int
	terms: Tuple[Tuple[Monomial, int], ...] = ()
	modulus: Optional[int] = None

	def __post_init__(self) -> None:
		if self.m < 1:
			raise DimensionMismatchError(f"polynomial needs at least one variable, got m={self.m}")
		for mono, coeff in self.terms:
			if len(mono) != self.m:
				raise DimensionMismatchError(f"monomial {mono} has length {len(mono)}, expected {self.m}")
			if coeff == 0:
				raise ValueError("zero coefficients are not stored")
			if self.modulus is not None and not 0 < coeff < self.modulus:
				raise ValueError(f"coefficient {coeff} not reduced mod {self.modulus}")

	@classmethod
	def from_terms(
		cls,
		m: int,
		terms: Union[Mapping[Monomial, int], Iterable[Tuple[Monomial, int]]],
		modulus: Optional[int] = None,
		degree_cap: int = DEGREE_CAP,
	) -> "MvPolynomial":
		items = terms.items() if isinstance(terms, Mapping) else terms
		acc: Dict[Monomial, int] = {}
		for mono, coeff in items:
			key = tuple(int(e) for e in mono)
			if len(key) != m:
				raise DimensionMismatchError(f"monomial {key} has length {len(key)}, expected {m}")
			if any(e < 0 for e in key):
				raise PolynomialParseError(f"negative exponent in {key}")
			acc[key] = acc.get(key, 0) + int(coeff)
		if modulus is not None:
			acc = {mono: c % modulus for mono, c in acc.items()}
		kept = sorted((mono, c) for mono, c in acc.items() if c != 0)
		if len(kept) > TERM_CAP:
			raise PolynomialParseError(f"{len(kept)} terms exceed the cap of {TERM_CAP}")
		for mono, _ in kept:
			if sum(mono) > degree_cap:
				raise PolynomialParseError(f"monomial {mono} exceeds the degree cap {degree_cap}")
		return cls(m=m, terms=tuple(kept), modulus=modulus)

	@classmethod
	def constant(cls, m: int, value: int, modulus: Optional[int] = None) -> "MvPolynomial":
		return cls.from_terms(m, {(0,) * m: value}, modulus=modulus)

	@classmethod
	def variable(cls, m: int, idx: int) -> "MvPolynomial":
		if not 0 <= idx < m:
			raise DimensionMismatchError(f"variable index {idx} invalid for m={m}")
		exps = [0] * m
		exps[idx] = 1
		return cls.from_terms(m, {tuple(exps): 1})

	@property
	def degree(self) -> int:
		"""Total degree; -1 for the zero polynomial."""
		return max((sum(mono) for mono, _ in self.terms), default=-1)

	@property
	def is_zero(self) -> bool:
		return not self.terms

	def as_dict(self) -> Dict[Monomial, int]:
		return dict(self.terms)

	def reduce(self, p: PrimeLike) -> "MvPolynomial":
		q = as_prime(p)
		if self.modulus == q:
			return self
		return MvPolynomial.from_terms(self.m, self.terms, modulus=q)

	def evaluate(self, point: Sequence[int], p: PrimeLike) -> Residue:
		q = as_prime(p)
		if len(point) != self.m:
			raise DimensionMismatchError(f"point has {len(point)} coordinates, polynomial has {self.m} variables")
		xs = [int(x) % q for x in point]
		total = 0
		for mono, coeff in self.terms:
			term = coeff % q
			for x, e in zip(xs, mono):
				if e:
					term = term * pow(x, e, q) % q
			total += term
		return total % q

	def evaluate_many(self, points: np.ndarray, p: PrimeLike) -> np.ndarray:
		"""Evaluate at every row of an (N, m) integer array; returns int64 residues."""
		q = as_prime(p)
		pts = np.asarray(points, dtype=np.int64)
		if pts.ndim != 2 or pts.shape[1] != self.m:
			raise DimensionMismatchError(f"expected an (N, {self.m}) point array, got shape {pts.shape}")
		pts = pts % q
		out = np.zeros(pts.shape[0], dtype=np.int64)
		if not self.terms:
			return out
		max_exp = [max(mono[v] for mono, _ in self.terms) for v in range(self.m)]
		powers: List[List[np.ndarray]] = []
		for v in range(self.m):
			col = pts[:, v]
			pw = [np.ones_like(col)]
			for _ in range(max_exp[v]):
				pw.append(pw[-1] * col % q)
			powers.append(pw)
		for mono, coeff in self.terms:
			term = np.full(pts.shape[0], coeff % q, dtype=np.int64)
			for v, e in enumerate(mono):
				if e:
					term = term * powers[v][e] % q
			out = (out + term) % q
		return out

	def __str__(self) -> str:
		if not self.terms:
			return "0"
		parts = []
		for mono, coeff in sorted(self.terms, key=lambda t: (-sum(t[0]), t[0])):
			factors = [f"X{v + 1}" + (f"^{e}" if e > 1 else "") for v, e in enumerate(mono) if e]
			if not factors:
				parts.append(str(coeff))
			elif coeff == 1:
				parts.append("*".join(factors))
			elif coeff == -1:
				parts.append("-" + "*".join(factors))
			else:
				parts.append(f"{coeff}*" + "*".join(factors))
		return " + ".join(parts).replace("+ -", "- ")


_VARIABLE = re.compile(r"x(\d+)")


def parse_polynomial(text: str, m: Optional[int] = None) -> MvPolynomial:
	"""Parse `c*X1^e1*X2^e2 + ...` (case-insensitive, whitespace ignored).

	Without `m` the variable count is the largest variable index that occurs.
	"""
	source = "".join(text.split()).lower().replace("^", "**")
	if not source:
		raise PolynomialParseError("empty polynomial text")
	indices = [int(i) for i in _VARIABLE.findall(source)]
	if any(i < 1 for i in indices):
		raise PolynomialParseError(f"variables are numbered from 1: {text!r}")
	highest = max(indices, default=1)
	if m is not None and highest > m:
		raise DimensionMismatchError(f"{text!r} uses X{highest} but m={m}")
	width = m if m is not None else highest
	symbols = sp.symbols(f"x1:{width + 1}")
	local = {str(s): s for s in symbols}
	try:
		expr = parse_expr(source, local_dict=local, transformations=standard_transformations)
	except (SyntaxError, TypeError, TokenError, sp.SympifyError) as exc:
		raise PolynomialParseError(f"cannot parse {text!r}: {exc}") from exc
	stray = expr.free_symbols - set(symbols)
	if stray:
		raise PolynomialParseError(f"unknown symbols {sorted(map(str, stray))} in {text!r}")
	try:
		poly = sp.Poly(expr, *symbols)
	except sp.PolynomialError as exc:
		raise PolynomialParseError(f"{text!r} is not a polynomial: {exc}") from exc
	terms: Dict[Monomial, int] = {}
	for mono, coeff in poly.terms():
		if not coeff.is_integer:
			raise PolynomialParseError(f"non-integer coefficient {coeff} in {text!r}")
		terms[tuple(int(e) for e in mono)] = int(coeff)
	return MvPolynomial.from_terms(width, terms)


class SystemKind(str, Enum):
	VALUE = "value"  # G_1..G_n over F_p
	ZERO = "zero"  # F_1..F_n over Z


@dataclass(frozen=True)
class PolySystem:
	polys: Tuple[MvPolynomial, ...]
	kind: SystemKind = SystemKind.VALUE

	def __post_init__(self) -> None:
		object.__setattr__(self, "polys", tuple(self.polys))
		object.__setattr__(self, "kind", SystemKind(self.kind))
		if not self.polys:
			raise SystemKindError("a system needs at least one polynomial")
		widths = {poly.m for poly in self.polys}
		if len(widths) != 1:
			raise DimensionMismatchError(f"polynomials disagree on the variable count: {sorted(widths)}")
		if self.kind is SystemKind.ZERO and self.m < self.n + 1:
			raise SystemKindError(f"zero-systems need m >= n+1, got m={self.m}, n={self.n}")

	@classmethod
	def parse(cls, texts: Sequence[str], kind: Union[SystemKind, str] = SystemKind.VALUE, m: Optional[int] = None) -> "PolySystem":
		if isinstance(texts, str):
			texts = [texts]
		if m is None:
			m = max((int(i) for t in texts for i in _VARIABLE.findall(t.lower())), default=1)
		return cls(polys=tuple(parse_polynomial(t, m=m) for t in texts), kind=SystemKind(kind))

	@property
	def m(self) -> int:
		return self.polys[0].m

	@property
	def n(self) -> int:
		return len(self.polys)

	@property
	def texts(self) -> List[str]:
		return [str(poly) for poly in self.polys]

	@property
	def system_hash(self) -> str:
		canonical = {
			"kind": self.kind.value,
			"m": self.m,
			"polys": [[[list(mono), coeff] for mono, coeff in poly.terms] for poly in self.polys],
		}
		return hashlib.sha256(orjson.dumps(canonical, option=orjson.OPT_SORT_KEYS)).hexdigest()[:16]

	def reduce(self, p: PrimeLike) -> "PolySystem":
		return PolySystem(polys=tuple(poly.reduce(p) for poly in self.polys), kind=self.kind)


def evaluate(poly: MvPolynomial, point: Sequence[int], p: PrimeLike) -> Residue:
	"""Value of `poly` at `point`, reduced mod p."""
	return poly.evaluate(point, p)


def value_table(system: PolySystem, points: np.ndarray, p: PrimeLike) -> np.ndarray:
	"""(N, n) table of G_j(x) mod p for every row x of `points`."""
	q = as_prime(p)
	pts = np.asarray(points, dtype=np.int64).reshape(-1, system.m)
	if pts.shape[0] == 0:
		return np.zeros((0, system.n), dtype=np.int64)
	return np.column_stack([poly.evaluate_many(pts, q) for poly in system.polys])


def linear_combination(system: PolySystem, a: Sequence[int], p: PrimeLike) -> MvPolynomial:
	q = as_prime(p)
	if len(a) != system.n:
		raise DimensionMismatchError(f"coefficient vector has length {len(a)}, system has {system.n} polynomials")
	acc: Dict[Monomial, int] = {}
	for coeff, poly in zip(a, system.polys):
		if coeff % q == 0:
			continue
		for mono, c in poly.terms:
			acc[mono] = (acc.get(mono, 0) + int(coeff) * c) % q
	return MvPolynomial.from_terms(system.m, acc, modulus=q)


@dataclass(frozen=True)
class IndependenceResult:
	independent: bool
	witness: Optional[Tuple[int, ...]] = None


def degree2_independent(system: PolySystem, p: PrimeLike) -> IndependenceResult:
	"""Rank test over F_p on the degree >= 2 coefficient rows of the G_j.

	Full rank n means every nonzero combination keeps a term of degree >= 2.
	Otherwise the witness is a kernel vector scaled so its first nonzero entry is 1.
	"""
	if system.kind is not SystemKind.VALUE:
		raise SystemKindError("degree 2 independence is defined for value-systems")
	q = as_prime(p)
	reduced = [poly.reduce(q).as_dict() for poly in system.polys]
	monos = sorted({mono for terms in reduced for mono in terms if sum(mono) >= 2})
	if not monos:
		return IndependenceResult(independent=False, witness=(1,) + (0,) * (system.n - 1))
	field = GF(q)
	rows = [[field(terms.get(mono, 0)) for mono in monos] for terms in reduced]
	matrix = DomainMatrix(rows, (system.n, len(monos)), field)
	if matrix.rank() == system.n:
		return IndependenceResult(independent=True)
	kernel = matrix.transpose().nullspace().to_list()[0]
	vec = [int(field.to_int(x)) % q for x in kernel]
	lead = next(v for v in vec if v)
	inv = pow(lead, -1, q)
	return IndependenceResult(independent=False, witness=tuple(v * inv % q for v in vec))
