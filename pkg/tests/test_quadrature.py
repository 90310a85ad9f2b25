import numpy as np
from numpy.polynomial.hermite import hermgauss

from bmclab.quadrature import gaussian_expect, hermite_nodes


def test_rules_match_reference_construction():
    for order in [1, 2, 3, 5, 8, 16, 32, 64, 128]:
        t, w = hermite_nodes(order)
        t_ref, w_ref = hermgauss(order)
        assert np.allclose(np.sort(t), t_ref, rtol=0.0, atol=1e-13)
        assert np.allclose(w[np.argsort(t)], w_ref, rtol=1e-13, atol=1e-18)


def test_weights_sum():
    for order in [4, 32, 64]:
        _, w = hermite_nodes(order)
        assert abs(w.sum() - np.sqrt(np.pi)) < 1e-13


def test_gaussian_moments():
    # E[X^{2k}] = (2k-1)!! for a standard normal; odd moments vanish.
    double_factorials = {0: 1.0, 2: 1.0, 4: 3.0, 6: 15.0, 8: 105.0, 10: 945.0}
    for p, want in double_factorials.items():
        got = gaussian_expect(lambda x: x**p, order=64)
        assert abs(got - want) < 1e-10 * max(1.0, want)
    for p in [1, 3, 5, 7]:
        assert abs(gaussian_expect(lambda x: x**p, order=64)) < 1e-10


def test_mean_and_scale_change():
    got = gaussian_expect(lambda x: x**2, mean=3.0, std=2.0, order=32)
    assert abs(got - (9.0 + 4.0)) < 1e-10
    got = gaussian_expect(lambda x: np.cos(x), mean=0.0, std=1.0, order=64)
    assert abs(got - np.exp(-0.5)) < 1e-12


def test_orders_agree_on_smooth_integrand():
    vals = [gaussian_expect(lambda x: np.exp(0.1 * x**2 + x), order=k) for k in (32, 64, 128)]
    # Closed form: E[exp(g x^2 + x)] = (1-2g)^{-1/2} exp(1/(2(1-2g))).
    want = (1 - 0.2) ** -0.5 * np.exp(0.5 / 0.8)
    for v in vals:
        assert abs(v - want) < 1e-9 * want
