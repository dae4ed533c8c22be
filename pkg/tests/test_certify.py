from __future__ import annotations

import math

import pytest

from spatialmix.certify import Verdict, certify, decide, g, g_prime, gamma
from spatialmix.lattice import Constraint


def test_gamma_d1_closed_form():
    thr = gamma(1)
    assert thr.x_star == pytest.approx(math.sqrt(2), abs=1e-10)
    assert thr.gamma == pytest.approx(3 + 2 * math.sqrt(2), abs=1e-10)


def test_gamma_published_degrees():
    assert 4.047 < gamma(5).gamma < 4.048
    assert gamma(7).gamma == pytest.approx(3.917, abs=1e-3)


@pytest.mark.parametrize("d", range(1, 11))
def test_gamma_is_stationary_minimum(d):
    thr = gamma(d)
    assert abs(g_prime(thr.x_star, d)) <= 1e-8
    assert g(thr.x_star - 1e-3, d) > thr.gamma
    assert g(thr.x_star + 1e-3, d) > thr.gamma
    # the grid minimum is never below the polished one
    grid = min(g(k / 1000, d) for k in range(1, 5000))
    assert grid >= thr.gamma - 1e-12


def test_gamma_positive_and_continuous_in_d():
    values = [gamma(d).gamma for d in range(1, 65)]
    assert all(v > 0 for v in values)
    assert all(abs(a - b) < 1.2 for a, b in zip(values, values[1:]))


def test_gamma_decreases_in_d():
    # direct evaluation: the threshold falls as the degree grows
    values = [gamma(d).gamma for d in range(1, 11)]
    assert values == sorted(values, reverse=True)


@pytest.mark.parametrize("d", [0, -1, 65])
def test_gamma_domain(d):
    with pytest.raises(ValueError):
        gamma(d)


def test_decide_margin():
    assert decide(4.0, 4.047) is Verdict.SSM_CERTIFIED
    assert decide(4.047, 4.047) is Verdict.INCONCLUSIVE
    assert decide(4.047 - 5e-7, 4.047) is Verdict.INCONCLUSIVE


def test_certificates():
    hh = certify(Constraint.HH, 4, ordered=True)
    assert hh.verdict is Verdict.SSM_CERTIFIED
    assert hh.lambda_star == pytest.approx(3.6857, abs=1e-3)
    rwim = certify("rwim", 8, ordered=True)
    assert rwim.verdict is Verdict.SSM_CERTIFIED
    for l in (4, 6, 8):
        for ordered in (False, True):
            assert certify("nak", l, ordered=ordered).verdict is Verdict.INCONCLUSIVE


def test_certificate_fields_and_determinism():
    a = certify("hh", 4)
    b = certify("hh", 4)
    assert a == b
    assert list(a.as_dict()) == ["cons", "l", "ordered", "lambdaStar", "gamma", "verdict"]
    assert a.gamma == gamma(5).gamma
