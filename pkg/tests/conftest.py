from __future__ import annotations

import functools

import pytest

from spatialmix.branching import build_matrix, spectral_radius


@functools.lru_cache(maxsize=None)
def cached_matrix(cons: str, l: int, ordered: bool):
    bm = build_matrix(cons, l, apply_order=ordered)
    return bm, spectral_radius(bm).lambda_star


@pytest.fixture(scope="session")
def matrices():
    return cached_matrix
