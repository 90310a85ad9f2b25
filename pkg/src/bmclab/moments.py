"""Exact generation-sum moments for the symmetric kernel.

For M_n(f), the sum of f over generation n started from a point x, the
first two moments reduce to iterated one-step kernels: the mean is
2^n Q^n f(x), the second moment adds one branching correction per split
generation, and the cross moment of two generations follows the same
pattern after lifting the shallower sum to the deeper generation.

The enumerated_* variants compute the same quantities by brute force over
all node pairs, using the common-ancestor covariance of the joint Gaussian
and a recursion for bivariate Gaussian moments.  They are exponential in
the depth and exist to cross-check the kernel formulas at small n.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ResourceCapError
from .kernels import BarParams
from .spectral import SpectralFn, apply_kernel, as_monomial, pair_expect, product
from .treesim import TreeIndex, common_ancestor_depth

ENUM_DEPTH_MAX = 4


class _KahanSum:
    """Compensated accumulator; order of added terms is fixed by the caller."""

    def __init__(self) -> None:
        self.total = 0.0
        self._comp = 0.0

    def add(self, term: float) -> None:
        y = term - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t


def exact_mean(f: SpectralFn, params: BarParams, n: int, x: float) -> float:
    """E_x of the sum of f over generation n: 2^n Q^n f(x)."""
    a = params.require_symmetric("the generation-sum mean")
    return 2.0**n * apply_kernel(f, a, steps=n)(x)


def exact_second_moment(f: SpectralFn, params: BarParams, n: int, x: float) -> float:
    """E_x of the squared sum of f over generation n.

    Equals 2^n Q^n(f^2)(x) plus, for each k < n, the branching correction
    2^(n+k) Q^(n-k-1) applied to the child-pair expectation of Q^k f with
    itself.
    """
    a = params.require_symmetric("the generation-sum second moment")
    acc = _KahanSum()
    acc.add(2.0**n * apply_kernel(product(f, f), a, steps=n)(x))
    for k in range(n):
        fk = apply_kernel(f, a, steps=k)
        branch = pair_expect(fk, fk, a)
        acc.add(2.0 ** (n + k) * apply_kernel(branch, a, steps=n - k - 1)(x))
    return acc.total


def exact_cross_moment(f: SpectralFn, g: SpectralFn, params: BarParams,
                       n: int, m: int, x: float) -> float:
    """E_x of the product of the generation-n sum of f and generation-m sum of g."""
    a = params.require_symmetric("the generation-sum cross moment")
    if n < m:
        f, g = g, f
        n, m = m, n
    acc = _KahanSum()
    lifted = product(g, apply_kernel(f, a, steps=n - m))
    acc.add(2.0**n * apply_kernel(lifted, a, steps=m)(x))
    for k in range(m):
        gk = apply_kernel(g, a, steps=k)
        fk = apply_kernel(f, a, steps=n - m + k)
        branch = pair_expect(gk, fk, a)
        acc.add(2.0 ** (n + k) * apply_kernel(branch, a, steps=m - k - 1)(x))
    return acc.total


def _check_enum_depth(n: int) -> None:
    if n > ENUM_DEPTH_MAX:
        raise ResourceCapError(
            f"enumeration over {(1 << n)}^2 node pairs exceeds the "
            f"depth cap {ENUM_DEPTH_MAX}"
        )


def _node_mean_var(a: float, sigma: float, gen: int, x: float) -> tuple[float, float]:
    mean = a**gen * x
    var = sigma**2 * sum(a ** (2 * (gen - j)) for j in range(1, gen + 1))
    return mean, var


def _pair_cov(a: float, sigma: float, gen_u: int, gen_v: int, depth: int) -> float:
    return sigma**2 * sum(a ** (gen_u + gen_v - 2 * j) for j in range(1, depth + 1))


def _centered_pair_moment(p: int, q: int, var1: float, var2: float, cov: float,
                          memo: dict) -> float:
    """E[A^p B^q] for a centered bivariate Gaussian, by integration by parts."""
    if p < 0 or q < 0:
        return 0.0
    if p == 0 and q == 0:
        return 1.0
    key = (p, q)
    if key in memo:
        return memo[key]
    if p > 0:
        value = (p - 1) * var1 * _centered_pair_moment(p - 2, q, var1, var2, cov, memo)
        value += q * cov * _centered_pair_moment(p - 1, q - 1, var1, var2, cov, memo)
    else:
        value = (q - 1) * var2 * _centered_pair_moment(0, q - 2, var1, var2, cov, memo)
    memo[key] = value
    return value


def _gaussian_pair_expect(cf: np.ndarray, cg: np.ndarray,
                          mean1: float, var1: float,
                          mean2: float, var2: float, cov: float) -> float:
    """E[f(X) g(Y)] for monomial coefficient vectors and jointly Gaussian (X, Y)."""
    memo: dict = {}
    acc = _KahanSum()
    for i, ci in enumerate(cf):
        for j, cj in enumerate(cg):
            if ci == 0.0 or cj == 0.0:
                continue
            raw = _KahanSum()
            for p in range(i + 1):
                for q in range(j + 1):
                    raw.add(
                        math.comb(i, p) * math.comb(j, q)
                        * mean1 ** (i - p) * mean2 ** (j - q)
                        * _centered_pair_moment(p, q, var1, var2, cov, memo)
                    )
            acc.add(ci * cj * raw.total)
    return acc.total


def enumerated_mean(f: SpectralFn, params: BarParams, n: int, x: float) -> float:
    """Brute-force mean of the generation-n sum of f (small n only)."""
    a = params.require_symmetric("enumerated moments")
    _check_enum_depth(n)
    cf = as_monomial(f)
    mean, var = _node_mean_var(a, params.sigma, n, x)
    one = np.ones(1)
    per_node = _gaussian_pair_expect(cf, one, mean, var, 0.0, 1.0, 0.0)
    return 2.0**n * per_node


def enumerated_second_moment(f: SpectralFn, params: BarParams, n: int,
                             x: float) -> float:
    """Brute-force second moment of the generation-n sum of f (small n only)."""
    return enumerated_cross_moment(f, f, params, n, n, x)


def enumerated_cross_moment(f: SpectralFn, g: SpectralFn, params: BarParams,
                            n: int, m: int, x: float) -> float:
    """Brute-force E_x of the product of two generation sums (small n, m only)."""
    a = params.require_symmetric("enumerated moments")
    _check_enum_depth(max(n, m))
    cf = as_monomial(f)
    cg = as_monomial(g)
    mean_u, var_u = _node_mean_var(a, params.sigma, n, x)
    mean_v, var_v = _node_mean_var(a, params.sigma, m, x)
    acc = _KahanSum()
    for i in range(1 << n):
        u = TreeIndex(n, i)
        for j in range(1 << m):
            depth = common_ancestor_depth(u, TreeIndex(m, j))
            cov = _pair_cov(a, params.sigma, n, m, depth)
            acc.add(_gaussian_pair_expect(cf, cg, mean_u, var_u, mean_v, var_v, cov))
    return acc.total
