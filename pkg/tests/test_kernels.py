import math

import numpy as np
import pytest
from scipy.stats import kstest, multivariate_normal

from bmclab.errors import ConfigError
from bmclab.kernels import (
    CRITICAL,
    SUBCRITICAL,
    SUPERCRITICAL,
    BarParams,
    check_assumptions,
    classify_regime,
    density_row_norm,
    pair_density,
    sample_children,
    sample_lineage,
    transition_density,
)
from bmclab.quadrature import gaussian_expect
from bmclab.rng import RandomStream


def sym(a, sigma=1.0):
    return BarParams.symmetric_params(a, sigma)


def test_params_validation():
    with pytest.raises(ConfigError):
        BarParams(a0=1.0, a1=0.5)
    with pytest.raises(ConfigError):
        BarParams(a0=0.5, a1=0.5, sigma=0.0)
    with pytest.raises(ConfigError):
        BarParams(a0=0.5, a1=0.5, sigma=1.0, rho=1.5)
    p = BarParams(a0=0.5, a1=0.3, b0=0.1, b1=0.0, sigma=1.0, rho=0.2)
    assert not p.symmetric()
    with pytest.raises(ConfigError):
        p.sigma_a()
    q = sym(0.5)
    assert q.symmetric()
    assert abs(q.sigma_a() - 1.0 / math.sqrt(0.75)) < 1e-15


def test_regime_classification():
    assert classify_regime(0.5).regime == SUBCRITICAL
    assert classify_regime(-0.5).regime == SUBCRITICAL
    assert classify_regime(1.0 / math.sqrt(2.0)).regime == CRITICAL
    assert classify_regime(0.85).regime == SUPERCRITICAL
    eps = 1e-13
    assert classify_regime(math.sqrt(0.5 * (1.0 + eps))).regime == CRITICAL
    assert classify_regime(math.sqrt(0.5 * (1.0 + 1e-10))).regime == SUPERCRITICAL
    assert classify_regime(math.sqrt(0.5 * (1.0 - 1e-10))).regime == SUBCRITICAL


def test_children_deterministic_limit():
    rng = RandomStream.from_seed(1)
    y, z = sample_children(1.0, BarParams(a0=0.5, a1=0.5, sigma=1e-12), rng)
    assert abs(y - 0.5) < 1e-9
    assert abs(z - 0.5) < 1e-9


def test_children_independent_when_uncorrelated():
    rng = RandomStream.from_seed(2)
    y, z = sample_children(0.0, sym(0.5), rng, count=100_000)
    corr = np.corrcoef(y, z)[0, 1]
    assert abs(corr) < 0.01


def test_children_noise_correlation():
    rng = RandomStream.from_seed(3)
    params = BarParams(a0=0.5, a1=0.5, sigma=1.0, rho=0.5)
    y, z = sample_children(0.0, params, rng, count=100_000)
    corr = np.corrcoef(y, z)[0, 1]
    assert abs(corr - 0.5) < 0.01
    assert abs(y.var() - 1.0) < 0.02
    assert abs(z.var() - 1.0) < 0.02


def test_children_match_one_step_chain():
    # Averaging over either child reproduces one lineage step (3 SE).
    rng = RandomStream.from_seed(4)
    params = sym(0.5)
    x = 0.7
    y, z = sample_children(x, params, rng, count=100_000)
    for side in (y, z):
        vals = side**2
        want = gaussian_expect(lambda v: v**2, mean=0.5 * x, std=1.0, order=64)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - want) < 3.0 * se


def test_lineage_endpoints():
    rng = RandomStream.from_seed(5)
    assert sample_lineage(3.25, 0, sym(0.5), rng) == 3.25
    draws = sample_lineage(0.0, 50, sym(0.5), rng, count=10_000)
    sigma_a = sym(0.5).sigma_a()
    assert kstest(draws, "norm", args=(0.0, sigma_a)).statistic < 0.02


def test_lineage_mean():
    rng = RandomStream.from_seed(6)
    draws = sample_lineage(4.0, 2, sym(0.5), rng, count=100_000)
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - 1.0) < 3.0 * se
    with pytest.raises(ConfigError):
        sample_lineage(0.0, 1, BarParams(a0=0.2, a1=0.3), rng)


def test_transition_density_pinned():
    assert abs(transition_density(0.3, -1.2, sym(0.0)) - 1.0) < 1e-15
    got = transition_density(0.0, 0.0, sym(0.5))
    assert abs(got - 0.75**-0.5) < 1e-12
    assert abs(got - 1.1547) < 1e-4
    xs = np.array([0.4, -1.0, 2.2])
    ys = np.array([-0.3, 0.9, 1.1])
    assert np.allclose(
        transition_density(xs, ys, sym(0.6)), transition_density(ys, xs, sym(0.6))
    )


def test_densities_normalize():
    params = sym(0.5)
    sigma_a = params.sigma_a()
    for x in [0.0, 1.0, 2.0]:
        total = gaussian_expect(
            lambda y: transition_density(x, y, params), std=sigma_a, order=64
        )
        assert abs(total - 1.0) < 1e-10
        pair_total = gaussian_expect(
            lambda y: np.array(
                [
                    gaussian_expect(
                        lambda z: pair_density(x, yi, z, params), std=sigma_a, order=64
                    )
                    for yi in y
                ]
            ),
            std=sigma_a,
            order=64,
        )
        assert abs(pair_total - 1.0) < 1e-8


def test_lebesgue_densities():
    params = BarParams(a0=0.4, a1=0.7, b0=0.2, b1=-0.1, sigma=0.8, rho=0.3)
    ys = np.linspace(-6, 6, 2001)
    q = transition_density(1.3, ys, params, wrt="lebesgue")
    assert abs(np.trapezoid(q, ys) - 1.0) < 1e-6
    mean = np.array([0.4 * 1.3 + 0.2, 0.7 * 1.3 - 0.1])
    cov = np.array([[0.64, 0.3], [0.3, 0.64]])
    oracle = multivariate_normal(mean=mean, cov=cov)
    pts = np.array([[0.0, 0.0], [1.0, -0.5], [0.3, 0.4]])
    got = pair_density(1.3, pts[:, 0], pts[:, 1], params, wrt="lebesgue")
    assert np.allclose(got, oracle.pdf(pts), rtol=1e-12)
    with pytest.raises(ConfigError):
        transition_density(0.0, 0.0, params, wrt="stationary")


def test_pair_density_factorizes_symmetric():
    params = sym(0.6)
    got = pair_density(0.5, 1.0, -0.7, params)
    want = transition_density(0.5, 1.0, params) * transition_density(0.5, -0.7, params)
    assert got == want


def test_row_norm_closed_form():
    for a in [0.0, 0.3, 0.5, 0.85]:
        assert abs(density_row_norm(0.0, a) - (1.0 - a**4) ** -0.25) < 1e-14
    assert density_row_norm(2.0, 0.0) == 1.0
    # Defining integral: h(x)^2 is the invariant-law integral of q(x,.)^2.
    params = sym(0.5)
    sigma_a = params.sigma_a()
    for x in [0.0, 1.0, -2.0]:
        direct = gaussian_expect(
            lambda y: transition_density(x, y, params) ** 2, std=sigma_a, order=96
        )
        got = density_row_norm(x, 0.5) ** 2
        assert abs(got - direct) < 1e-8 * (1.0 + abs(direct))


def test_assumption_booleans_pinned():
    r = check_assumptions(0.5)
    assert r.h_in_L4 and r.Qh_in_L4 and r.hilsch2_holds
    assert check_assumptions(0.76).Qh_in_L4 is False
    assert check_assumptions(0.75).Qh_in_L4 is True
    r73 = check_assumptions(0.73)
    assert r73.hilsch2_holds is False
    assert r73.Qh_in_L4 is True
    assert check_assumptions(0.57).h_in_L4 is True
    assert check_assumptions(0.58).h_in_L4 is False
    assert check_assumptions(0.724).hilsch2_holds is True
    assert check_assumptions(0.725).hilsch2_holds is False


def test_assumption_report_details():
    r = check_assumptions(0.5)
    for key in ("h_L4", "Qh_L4", "hilsch2_L2"):
        assert r.norms[key] > 0.0
    assert r.norms["h_L4_margin"] > 0.0
    d = r.as_json_dict()
    assert list(d.keys()) == ["a", "h_in_L4", "Qh_in_L4", "hilsch2_holds", "norms", "flags"]
    near = check_assumptions(0.724)
    assert any(f.startswith("near-threshold:hilsch2") for f in near.flags)
    diverged = check_assumptions(0.9)
    assert "h_L4" not in diverged.norms
    assert not diverged.h_in_L4


def test_quadrature_cross_check_confirms_finite_norms():
    r = check_assumptions(0.3)
    assert not any(f.startswith("quadrature") for f in r.flags)
