from __future__ import annotations

from typing import List, Optional, Sequence


class EquilabError(Exception):
	"""Base class for every error raised by equilab."""


class InvalidPrimeError(EquilabError, ValueError):
	pass


class DimensionMismatchError(EquilabError, ValueError):
	pass


class PolynomialParseError(EquilabError, ValueError):
	pass


class SystemKindError(EquilabError, ValueError):
	pass


class DependentSystemError(EquilabError, ValueError):
	"""The system is not degree 2 independent; `witness` is a nonzero kernel vector."""

	def __init__(self, message: str, witness: Optional[Sequence[int]] = None) -> None:
		super().__init__(message)
		self.witness = tuple(witness) if witness is not None else None


class GuardExceededError(EquilabError, RuntimeError):
	def __init__(self, guard: str, requested: int, cap: int) -> None:
		super().__init__(f"{guard} guard exceeded: requested {requested}, cap {cap}")
		self.guard = guard
		self.requested = requested
		self.cap = cap


class UncertifiableRegionError(EquilabError, TypeError):
	pass


class RegionShapeError(EquilabError, ValueError):
	pass


class EmptySolutionSetError(EquilabError, ValueError):
	pass


class ConfigError(EquilabError, ValueError):
	pass


class ConfigValidationError(ConfigError):
	def __init__(self, problems: List[str]) -> None:
		super().__init__("invalid configuration:\n  - " + "\n  - ".join(problems))
		self.problems = list(problems)


def check_guard(guard: str, requested: int, cap: int) -> None:
	if requested > cap:
		raise GuardExceededError(guard, requested, cap)
