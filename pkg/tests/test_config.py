from __future__ import annotations

from pathlib import Path

import orjson
import pytest

from equilab.config import load_config, validate_config
from equilab.errors import ConfigError, ConfigValidationError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _base(**overrides):
	raw = {"kind": "discrepancy", "seed": 1, "system": ["X1*X2"], "primes": [11, 13]}
	raw.update(overrides)
	return raw


def test_minimal_config_gets_defaults():
	config = validate_config(_base(name="mini"))
	assert config.regions == ({"kind": "full-torus"},)
	assert config.primes == (11, 13)
	assert config.output == "data/results/mini"
	assert config.depth_policy == "thm2"
	assert config.workers == 1
	assert config.parsed_systems()[0].m == 2


def test_all_problems_are_reported_together():
	raw = {
		"kind": "bogus",
		"primes": [4, "x", 13],
		"guards": {"lattice": 10**12, "nope": 3},
		"workers": 0,
		"depth": {"policy": "deep"},
	}
	with pytest.raises(ConfigValidationError) as info:
		validate_config(raw)
	problems = "\n".join(info.value.problems)
	for needle in ("kind", "seed", "system", "primes: 4", "primes: 'x'", "guards.lattice", "guards.nope", "workers", "depth.policy"):
		assert needle in problems


def test_seed_is_mandatory():
	raw = _base()
	del raw["seed"]
	with pytest.raises(ConfigValidationError, match="seed"):
		validate_config(raw)
	with pytest.raises(ConfigValidationError, match="seed"):
		validate_config(_base(seed=-3))


def test_variety_needs_nu():
	with pytest.raises(ConfigValidationError, match="nu"):
		validate_config(_base(kind="variety", system=["X1*X2 - 1"]))
	config = validate_config(_base(kind="variety", system=["X1*X2 - 1"], nu=1))
	assert config.system_kind == "zero"


def test_region_problems_are_collected():
	raw = _base(regions=[{"kind": "euclidean-ball", "center": [0, 0], "radius": 0.9}, {"kind": "full-torus", "m": 3}])
	with pytest.raises(ConfigValidationError) as info:
		validate_config(raw)
	assert len(info.value.problems) == 2


def test_prime_range_is_thinned():
	config = validate_config(_base(primes={"range": [100, 200], "count": 3}))
	assert len(config.primes) == 3
	assert config.primes[0] == 101 and config.primes[-1] == 199


@pytest.mark.parametrize(
	"primes, needle",
	[
		({"range": 100}, "primes.range"),
		({"range": [100]}, "primes.range"),
		({"range": [100, 200, 300]}, "primes.range"),
		({"range": ["a", 200]}, "primes.range"),
		({"range": [100, 200], "count": 0}, "primes.count"),
		({"range": [100, 200], "count": "3"}, "primes.count"),
	],
)
def test_malformed_prime_range_is_a_validation_problem(primes, needle):
	with pytest.raises(ConfigValidationError) as info:
		validate_config(_base(primes=primes, workers=0))
	problems = "\n".join(info.value.problems)
	assert needle in problems
	assert "workers" in problems


def test_empty_prime_list_is_allowed():
	assert validate_config(_base(primes=[])).primes == ()


def test_cover_needs_no_system():
	config = validate_config({"kind": "cover", "seed": 0, "m": 2, "primes": [101]})
	assert config.systems == ()


def test_config_hash_tracks_content():
	a = validate_config(_base())
	b = validate_config(_base())
	c = validate_config(_base(seed=2))
	assert a.config_hash == b.config_hash != c.config_hash


def test_load_config_errors(tmp_path):
	with pytest.raises(ConfigError, match="not found"):
		load_config(tmp_path / "missing.json")
	bad = tmp_path / "bad.json"
	bad.write_text("{ not json")
	with pytest.raises(ConfigError, match="not valid JSON"):
		load_config(bad)
	listed = tmp_path / "list.json"
	listed.write_bytes(orjson.dumps([1, 2]))
	with pytest.raises(ConfigError):
		load_config(listed)


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
	config = load_config(path)
	assert config.primes
	assert config.name == path.stem
