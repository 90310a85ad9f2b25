"""Tests for exact generation-sum moments and the enumeration oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from bmclab.errors import ConfigError, ResourceCapError
from bmclab.kernels import BarParams
from bmclab.moments import (
    _gaussian_pair_expect,
    enumerated_cross_moment,
    enumerated_mean,
    enumerated_second_moment,
    exact_cross_moment,
    exact_mean,
    exact_second_moment,
)
from bmclab.quadrature import gaussian_expect
from bmclab.rng import RandomStream
from bmclab.spectral import constant, from_monomial, identity
from bmclab.treesim import InitialLaw, generation_sums

A_GRID = (0.3, 1.0 / math.sqrt(2.0), 0.85)
POLY_GRID = ([0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0])


def _quad_pair_expect(cf, cg, mean1, var1, mean2, var2, cov):
    """Nested-quadrature oracle for E[f(X) g(Y)], (X, Y) jointly Gaussian."""
    if var1 == 0.0:
        if var2 == 0.0:
            return P.polyval(mean1, cf) * P.polyval(mean2, cg)
        return P.polyval(mean1, cf) * gaussian_expect(
            lambda y: P.polyval(y, cg), mean=mean2, std=math.sqrt(var2), order=96
        )
    resid = var2 - cov**2 / var1
    std_in = math.sqrt(max(resid, 0.0))

    def outer(xs):
        xs = np.atleast_1d(xs)
        out = np.empty_like(xs)
        for i, x in enumerate(xs):
            mean_in = mean2 + cov / var1 * (x - mean1)
            if std_in == 0.0:
                inner = P.polyval(mean_in, cg)
            else:
                inner = gaussian_expect(lambda y: P.polyval(y, cg),
                                        mean=mean_in, std=std_in, order=96)
            out[i] = P.polyval(x, cf) * inner
        return out

    return gaussian_expect(outer, mean=mean1, std=math.sqrt(var1), order=96)


def test_gaussian_pair_expect_against_quadrature():
    rng = np.random.default_rng(4)
    for _ in range(6):
        cf = rng.normal(size=4)
        cg = rng.normal(size=3)
        mean1, mean2 = rng.normal(size=2)
        var1, var2 = rng.uniform(0.3, 2.0, size=2)
        cov = rng.uniform(-0.9, 0.9) * math.sqrt(var1 * var2)
        got = _gaussian_pair_expect(cf, cg, mean1, var1, mean2, var2, cov)
        want = _quad_pair_expect(cf, cg, mean1, var1, mean2, var2, cov)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-10)
    got = _gaussian_pair_expect(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]),
                                0.0, 1.0, 0.0, 1.0, 1.0)
    assert got == pytest.approx(3.0, rel=1e-12)


def test_mean_closed_forms():
    params = BarParams.symmetric_params(0.5)
    one = constant(1.0, params.sigma_a())
    for n in range(5):
        assert exact_mean(one, params, n, 0.3) == pytest.approx(2.0**n, rel=1e-12)
    f = identity(params.sigma_a())
    assert exact_mean(f, params, 3, 1.0) == pytest.approx(1.0, rel=1e-12)
    g = from_monomial([0.0, 0.0, 1.0], params.sigma_a())
    assert exact_mean(g, params, 0, 2.0) == pytest.approx(4.0, rel=1e-12)


def test_second_moment_closed_forms():
    params = BarParams.symmetric_params(0.5)
    sig = params.sigma_a()
    one = constant(1.0, sig)
    for n in range(5):
        assert exact_second_moment(one, params, n, 0.7) == pytest.approx(
            4.0**n, rel=1e-12)
    f = from_monomial([0.2, 1.0, 0.5], sig)
    assert exact_second_moment(f, params, 0, 1.3) == pytest.approx(
        f(1.3) ** 2, rel=1e-12)
    x_fn = identity(sig)
    for sigma in (1.0, 0.7):
        p = BarParams.symmetric_params(0.5, sigma=sigma)
        assert exact_second_moment(identity(p.sigma_a()), p, 1, 0.0) == pytest.approx(
            2.0 * sigma**2, rel=1e-12)
    assert exact_second_moment(x_fn, params, 1, 0.0) == pytest.approx(2.0, rel=1e-12)


def test_critical_second_moment_growth():
    a = 1.0 / math.sqrt(2.0)
    params = BarParams.symmetric_params(a)
    f = identity(params.sigma_a())
    sig2 = params.sigma_a() ** 2
    for n in range(1, 7):
        want = sig2 * n * 2.0 ** (n - 1)
        assert exact_second_moment(f, params, n, 0.0) == pytest.approx(want, rel=1e-12)


def test_cross_moment_reductions():
    params = BarParams.symmetric_params(0.6)
    sig = params.sigma_a()
    f = from_monomial([0.0, 1.0, 0.3], sig)
    g = from_monomial([0.5, 0.7], sig)
    one = constant(1.0, sig)
    for n, m in ((3, 2), (4, 1), (2, 2)):
        with_one = exact_cross_moment(f, one, params, n, m, 0.8)
        assert with_one == pytest.approx(2.0**m * exact_mean(f, params, n, 0.8),
                                         rel=1e-12)
        swapped = exact_cross_moment(g, f, params, m, n, 0.8)
        assert exact_cross_moment(f, g, params, n, m, 0.8) == pytest.approx(
            swapped, rel=1e-12)
    assert exact_cross_moment(f, f, params, 3, 3, 0.8) == pytest.approx(
        exact_second_moment(f, params, 3, 0.8), rel=1e-12)


def test_variance_nonnegative_and_cauchy_schwarz():
    for a in A_GRID:
        params = BarParams.symmetric_params(a)
        sig = params.sigma_a()
        funcs = [from_monomial(c, sig) for c in POLY_GRID]
        for x in (0.0, 1.0):
            for n in range(5):
                for f in funcs:
                    m1 = exact_mean(f, params, n, x)
                    m2 = exact_second_moment(f, params, n, x)
                    assert m2 - m1**2 >= -1e-9 * max(1.0, abs(m2))
                cross = exact_cross_moment(funcs[0], funcs[1], params, n, max(n - 1, 0), x)
                bound = math.sqrt(
                    exact_second_moment(funcs[0], params, n, x)
                    * exact_second_moment(funcs[1], params, max(n - 1, 0), x))
                assert abs(cross) <= bound * (1.0 + 1e-10)


def test_exact_matches_enumeration():
    for a in A_GRID:
        params = BarParams.symmetric_params(a)
        sig = params.sigma_a()
        funcs = [from_monomial(c, sig) for c in POLY_GRID]
        for x in (0.0, 1.0):
            for n in range(5):
                for f in funcs:
                    ref = enumerated_mean(f, params, n, x)
                    got = exact_mean(f, params, n, x)
                    assert got == pytest.approx(ref, rel=1e-8, abs=1e-8)
                    ref = enumerated_second_moment(f, params, n, x)
                    got = exact_second_moment(f, params, n, x)
                    assert got == pytest.approx(ref, rel=1e-8, abs=1e-8)
            for n, m in ((2, 0), (3, 2), (4, 4), (4, 1)):
                ref = enumerated_cross_moment(funcs[1], funcs[0], params, n, m, x)
                got = exact_cross_moment(funcs[1], funcs[0], params, n, m, x)
                assert got == pytest.approx(ref, rel=1e-8, abs=1e-8)


def test_monte_carlo_agreement():
    params = BarParams.symmetric_params(0.5)
    sig = params.sigma_a()
    f = from_monomial([0.0, 0.0, 1.0], sig)
    g = identity(sig)
    n, rows = 6, 4000
    keys = RandomStream.from_seed(77).split_keys(np.arange(rows))
    sums = generation_sums(params, InitialLaw.dirac(1.0), [f, g], n, keys)
    mf = sums[:, n, 0]
    mg4 = sums[:, 4, 1]

    want = exact_mean(f, params, n, 1.0)
    se = mf.std(ddof=1) / math.sqrt(rows)
    assert abs(mf.mean() - want) < 4 * se

    sq = mf**2
    want = exact_second_moment(f, params, n, 1.0)
    se = sq.std(ddof=1) / math.sqrt(rows)
    assert abs(sq.mean() - want) < 4 * se

    prod = mf * mg4
    want = exact_cross_moment(f, g, params, n, 4, 1.0)
    se = prod.std(ddof=1) / math.sqrt(rows)
    assert abs(prod.mean() - want) < 4 * se


def test_guards():
    params = BarParams.symmetric_params(0.5)
    f = identity(params.sigma_a())
    with pytest.raises(ResourceCapError):
        enumerated_mean(f, params, 5, 0.0)
    with pytest.raises(ResourceCapError):
        enumerated_cross_moment(f, f, params, 5, 2, 0.0)
    asym = BarParams(a0=0.4, a1=0.6)
    with pytest.raises(ConfigError):
        exact_mean(f, asym, 2, 0.0)
    with pytest.raises(ConfigError):
        enumerated_mean(f, asym, 2, 0.0)
