"""Shared fixtures: solved models at the test and production spacings.

Building a glued potential costs a few seconds (three solves plus the
corner-fit passes), so models are session-scoped.  p refers to the grid
exponent: h = 2^-p.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from perfstrip.assembler import build_glued
from perfstrip.annulus import build_annulus


@pytest.fixture(scope="session")
def glued_256():
    return build_glued(p=8, n_max=4, tol=1e-9)


@pytest.fixture(scope="session")
def glued_512():
    return build_glued(p=9, n_max=4, tol=1e-9)


@pytest.fixture(scope="session")
def glued_1024():
    return build_glued(p=10, n_max=4, tol=1e-9)


@pytest.fixture(scope="session")
def annulus_512(glued_512):
    return build_annulus(glued_512, eps=0.4)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
