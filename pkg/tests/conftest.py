"""Shared fixtures and random-expression helpers."""

import random

import pytest
import sympy as sp

from diracq import models
from diracq.symcore import SYM, Expr


@pytest.fixture(scope="session")
def intrinsic_report():
    return models.intrinsic_scenario(2, 1)


@pytest.fixture(scope="session")
def extrinsic_report():
    return models.extrinsic_scenario(2, 1)


@pytest.fixture(scope="session")
def intrinsic_cs():
    return models.intrinsic_system()


@pytest.fixture(scope="session")
def cartesian_cs():
    return models.cartesian_system()


def rational(rng, lo=-3, hi=3):
    num = 0
    while num == 0:
        num = rng.randint(lo, hi)
    return sp.Rational(num, rng.randint(1, 3))


def random_polynomial(rng, symbols, terms=2, max_degree=2):
    """Small random polynomial over the pool (plus sin/cos of angles)."""
    out = sp.S.Zero
    for _ in range(terms):
        term = rational(rng)
        for _ in range(rng.randint(0, max_degree)):
            s = rng.choice(symbols)
            if s in (SYM.theta, SYM.phi) and rng.random() < 0.7:
                term *= rng.choice((sp.sin, sp.cos))(s)
            else:
                term *= s
        out += term
    return out


def random_expr(rng, symbols, allow_fraction=True):
    num = random_polynomial(rng, symbols)
    if allow_fraction and rng.random() < 0.3:
        # denominators kept structurally nonzero on the sampled domain
        den = SYM.a + SYM.b * sp.sin(SYM.theta) if SYM.theta in symbols else SYM.m
        return Expr(num / den)
    return Expr(num)
