import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

"""
Pytest configuration and fixtures for the multiplier engine tests
"""
import pytest
import logging

from config import ResourceCaps
from polyring import Poly, RandomSource, parse_system

# Configure logging for tests
logging.basicConfig(level=logging.WARNING)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Keep KOHN_* variables from the developer's shell out of the tests"""
    for name in list(os.environ):
        if name.startswith("KOHN_"):
            monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    """Seeded random source"""
    return RandomSource(7)


@pytest.fixture
def caps():
    """Resource caps for desk-scale tests"""
    return ResourceCaps(degree_cap=40, pair_cap=200_000, digit_cap=200_000, trials=3, max_retries=12)


@pytest.fixture
def tiny_caps():
    """Caps small enough to trip every limit"""
    return ResourceCaps(degree_cap=1, pair_cap=1, digit_cap=1, trials=1, max_retries=1)


@pytest.fixture
def psi():
    """Pre-multipliers of the worked instance"""
    return parse_system("z1^2, z2^2, z3^2", 3)


@pytest.fixture
def polys():
    """Parse a comma separated system"""
    def _parse(text, nvars=None):
        return parse_system(text, nvars)
    return _parse


@pytest.fixture
def z():
    """Coordinate functions z1..zn as a callable"""
    def _z(n):
        return [Poly.variable(n, i) for i in range(1, n + 1)]
    return _z
