from __future__ import annotations

import pytest

from equilab.dyadic import Anchor, FIXED_ONE
from equilab.field_poly import PolySystem
from equilab.region import AxisBox, EuclideanBall, FullTorus


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
	monkeypatch.setenv("EQUILAB_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture
def product_system() -> PolySystem:
	return PolySystem.parse(["X1*X2"])


@pytest.fixture
def hyperbola() -> PolySystem:
	return PolySystem.parse(["X1*X2 - 1"], kind="zero")


@pytest.fixture
def circle() -> PolySystem:
	return PolySystem.parse(["X1^2 + X2^2 - 1"], kind="zero")


@pytest.fixture
def torus2() -> FullTorus:
	return FullTorus(m=2)


@pytest.fixture
def half_box() -> AxisBox:
	return AxisBox(m=2, lo=(0, 0), hi=("1/2", "1/2"))


@pytest.fixture
def ball03() -> EuclideanBall:
	return EuclideanBall(m=2, center=("1/2", "1/2"), radius="3/10")


@pytest.fixture
def anchor2() -> Anchor:
	# irregular numerators, far from any u/(2^i p) for the primes used in tests
	return Anchor(numerators=(FIXED_ONE // 7 + 12345, FIXED_ONE // 3 + 67891))


