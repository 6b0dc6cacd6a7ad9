from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import orjson
from loguru import logger
from sympy import primerange

from .dyadic import DEPTH_POLICIES
from .errors import ConfigError, ConfigValidationError, EquilabError
from .field_poly import PRIME_CAP, PolySystem, SystemKind, _is_prime
from .region import region_from_spec

EXPERIMENT_KINDS = ("discrepancy", "expsum", "cover", "variety", "sweep")

HARD_CAPS: Dict[str, int] = {
	"lattice": 10**9,
	"solve": 10**9,
	"discrepancy_n1": 10**8,
	"discrepancy_n2": 5000,
	"discrepancy_n3": 300,
	"discrepancy_work": 10**10,
}


@dataclass(frozen=True)
class Guards:
	lattice: int = HARD_CAPS["lattice"]
	solve: int = HARD_CAPS["solve"]
	discrepancy_n1: int = HARD_CAPS["discrepancy_n1"]
	discrepancy_n2: int = HARD_CAPS["discrepancy_n2"]
	discrepancy_n3: int = HARD_CAPS["discrepancy_n3"]
	discrepancy_work: int = 2 * 10**9


@dataclass(frozen=True)
class ExperimentConfig:
	kind: str
	seed: int
	systems: Tuple[Tuple[str, ...], ...]
	primes: Tuple[int, ...]
	regions: Tuple[Dict[str, Any], ...]
	name: str = "experiment"
	system_kind: str = "value"
	m: Optional[int] = None
	depth_policy: str = "thm2"
	depth_M: Optional[int] = None
	L: Optional[int] = None
	exact: bool = True
	sampled_trials: int = 0
	subcubes: int = 10
	scan_L: int = 10
	grid_k: int = 4
	nu: Optional[int] = None
	justification: Optional[str] = None
	guards: Guards = field(default_factory=Guards)
	output: str = "data/results"
	workers: int = 1
	progress: bool = True
	export_cover: bool = False
	raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

	@property
	def config_hash(self) -> str:
		return hashlib.sha256(orjson.dumps(self.raw, option=orjson.OPT_SORT_KEYS)).hexdigest()[:16]

	def parsed_systems(self) -> List[PolySystem]:
		return [PolySystem.parse(list(texts), kind=self.system_kind, m=self.m) for texts in self.systems]


def _is_int(value: Any) -> bool:
	return isinstance(value, int) and not isinstance(value, bool)


def _expand_primes(spec: Any, problems: List[str]) -> Tuple[int, ...]:
	if spec is None:
		problems.append("primes: missing (use a list or {\"range\": [lo, hi], \"count\": k})")
		return ()
	if isinstance(spec, list):
		out = []
		for p in spec:
			if not _is_int(p):
				problems.append(f"primes: {p!r} is not an integer")
			elif not 2 <= p < PRIME_CAP or not _is_prime(p):
				problems.append(f"primes: {p} is not a prime in [2, 2^31)")
			else:
				out.append(p)
		return tuple(out)
	if isinstance(spec, Mapping) and "range" in spec:
		bounds = spec["range"]
		if not isinstance(bounds, (list, tuple)) or len(bounds) != 2 or not all(_is_int(b) for b in bounds):
			problems.append(f"primes.range: expected [lo, hi] integers, got {bounds!r}")
			return ()
		lo, hi = bounds
		count = spec.get("count")
		if count is not None and (not _is_int(count) or count < 1):
			problems.append(f"primes.count: must be a positive integer, got {count!r}")
			return ()
		found = [int(p) for p in primerange(max(2, int(lo)), min(int(hi), PRIME_CAP - 1) + 1)]
		if count is not None and found and count < len(found):
			picks = np.unique(np.linspace(0, len(found) - 1, int(count)).round().astype(int))
			found = [found[i] for i in picks]
		return tuple(found)
	problems.append(f"primes: unsupported value {spec!r}")
	return ()


def _systems(raw: Mapping[str, Any], problems: List[str]) -> Tuple[Tuple[str, ...], ...]:
	if "systems" in raw:
		groups = raw["systems"]
	elif "system" in raw:
		groups = [raw["system"]]
	else:
		return ()
	out = []
	for group in groups:
		texts = (group,) if isinstance(group, str) else tuple(group)
		try:
			PolySystem.parse(list(texts), kind=raw.get("system_kind", "value"), m=raw.get("m"))
		except EquilabError as exc:
			problems.append(f"system {list(texts)}: {exc}")
			continue
		out.append(texts)
	return tuple(out)


def validate_config(raw: Mapping[str, Any]) -> ExperimentConfig:
	"""Check every field and raise one ConfigValidationError listing all problems."""
	problems: List[str] = []
	kind = raw.get("kind")
	if kind not in EXPERIMENT_KINDS:
		problems.append(f"kind: expected one of {EXPERIMENT_KINDS}, got {kind!r}")
	seed = raw.get("seed")
	if not _is_int(seed) or seed < 0:
		problems.append("seed: a non-negative integer seed is mandatory")
	system_kind = raw.get("system_kind", "zero" if kind == "variety" else "value")
	try:
		SystemKind(system_kind)
	except ValueError:
		problems.append(f"system_kind: expected 'value' or 'zero', got {system_kind!r}")
		system_kind = "value"
	systems = _systems({**raw, "system_kind": system_kind}, problems)
	if not systems and kind != "cover":
		problems.append("system: at least one polynomial system is required")
	primes = _expand_primes(raw.get("primes"), problems)

	regions = tuple(raw.get("regions") or ())
	if not regions and kind in ("discrepancy", "sweep", "cover", "variety"):
		regions = ({"kind": "full-torus"},)
	m = PolySystem.parse(list(systems[0]), kind=system_kind, m=raw.get("m")).m if systems else raw.get("m")
	for i, spec in enumerate(regions):
		try:
			region = region_from_spec(spec, m=m)
			if m is not None and region.m != m:
				problems.append(f"regions[{i}]: region in T_{region.m}, system has {m} variables")
		except (EquilabError, TypeError, ValueError) as exc:
			problems.append(f"regions[{i}]: {exc}")

	depth = raw.get("depth", {}) or {}
	policy = depth.get("policy", "thm2")
	if policy not in DEPTH_POLICIES:
		problems.append(f"depth.policy: expected one of {DEPTH_POLICIES}, got {policy!r}")
	if policy == "explicit" and not isinstance(depth.get("M"), int):
		problems.append("depth.M: an explicit depth policy needs an integer M")

	guard_values = dict(raw.get("guards", {}) or {})
	for name, value in guard_values.items():
		if name not in Guards.__dataclass_fields__:
			problems.append(f"guards.{name}: unknown guard")
		elif not isinstance(value, int) or value < 1:
			problems.append(f"guards.{name}: must be a positive integer")
		elif value > HARD_CAPS[name]:
			problems.append(f"guards.{name}: {value} exceeds the hard cap {HARD_CAPS[name]}")

	nu = raw.get("nu")
	if kind == "variety":
		if nu is None:
			problems.append("nu: variety experiments need the configured component count nu")
		elif not isinstance(nu, int) or nu < 1:
			problems.append(f"nu: must be an integer >= 1, got {nu!r}")
	workers = raw.get("workers", 1)
	if not isinstance(workers, int) or workers < 1:
		problems.append("workers: must be a positive integer")

	if problems:
		raise ConfigValidationError(problems)
	if not primes:
		logger.warning("prime list is empty; the experiment has no cells")
	return ExperimentConfig(
		kind=kind,
		seed=seed,
		systems=systems,
		primes=primes,
		regions=regions,
		name=raw.get("name", "experiment"),
		system_kind=system_kind,
		m=raw.get("m"),
		depth_policy=policy,
		depth_M=depth.get("M"),
		L=raw.get("L"),
		exact=bool(raw.get("exact", True)),
		sampled_trials=int(raw.get("sampled_trials", 0)),
		subcubes=int(raw.get("subcubes", 10)),
		scan_L=int(raw.get("scan_L", 10)),
		grid_k=int(raw.get("grid_k", 4)),
		nu=nu,
		justification=raw.get("justification"),
		guards=Guards(**guard_values),
		output=raw.get("output", f"data/results/{raw.get('name', 'experiment')}"),
		workers=workers,
		progress=bool(raw.get("progress", True)),
		export_cover=bool(raw.get("export_cover", False)),
		raw=dict(raw),
	)


def load_config(path: Path) -> ExperimentConfig:
	try:
		raw = orjson.loads(Path(path).read_bytes())
	except FileNotFoundError as exc:
		raise ConfigError(f"config file not found: {path}") from exc
	except orjson.JSONDecodeError as exc:
		raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
	if not isinstance(raw, dict):
		raise ConfigError(f"config file {path} must hold a JSON object")
	return validate_config(raw)
