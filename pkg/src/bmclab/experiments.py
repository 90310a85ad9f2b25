"""Experiment drivers: limit-law verification and the slope phase transition.

clt_study replicates the regime-normalized fluctuation statistic and compares
its empirical law with the Gaussian limit predicted by the variance series.
supercritical_study tracks the rescaled statistics and the additive
martingale above the critical slope.  slope_study regresses log-variance of
the averaged statistic against log of the population size over a grid of
slopes, reproducing the phase transition in the decay exponent.

All drivers derive their randomness from a master seed through per-replica
(and per-grid-point) stream splits, so results are reproducible and
independent of chunking or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, RegimeError
from .kernels import CRITICAL, SUPERCRITICAL, BarParams, classify_regime
from .rng import RandomStream
from .spectral import center, from_monomial, project_linear
from .stats import SampleMoments, fit_line, ks_normal_distance, ks_threshold, sample_moments
from .treesim import FunctionalSeq, InitialLaw, generation_sums, replicate
from .variance import critical_variance, subcritical_variance

DEFAULT_N_MIN = 5
DEFAULT_OUTER_REPEATS = 20


@dataclass(frozen=True)
class ExperimentConfig:
    """A reproducible experiment: kernel, initial law, functions, and sizes."""

    params: BarParams
    nu: InitialLaw
    fseq: FunctionalSeq
    n: int
    replicas: int
    master_seed: int
    target: str = "Gn"
    normalization: str = "auto"

    def __post_init__(self) -> None:
        if self.replicas < 2:
            raise ConfigError("variance estimation needs at least 2 replicas")
        if self.n < 3:
            raise ConfigError("experiments need depth n >= 3")
        if self.target not in ("Gn", "Tn"):
            raise ConfigError(f"unknown target {self.target!r}")
        if self.normalization != "auto":
            raise ConfigError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class CltResult:
    """Outcome of one limit-law run at a fixed depth."""

    n: int
    replicas: int
    regime: str
    empirical_variance: float
    series_variance: float
    ks_distance: float
    ks_threshold: float
    moments: SampleMoments
    flags: tuple[str, ...]
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SupercriticalResult:
    """Outcome of one supercritical run at a fixed depth."""

    n: int
    replicas: int
    ratio_median: float
    martingale_l1_diffs: np.ndarray
    flags: tuple[str, ...]


@dataclass(frozen=True)
class SlopeResult:
    """One regression of log-variance against log population size."""

    alpha: float
    n_min: int
    n_max: int
    slope: float
    stderr: float
    replicas: int
    target: str
    f_label: str
    outer_repeat: int
    h1: float
    h2: float
    flags: tuple[str, ...]


@dataclass(frozen=True)
class SlopeSummary:
    """Mean and spread of the fitted slope over outer repetitions."""

    alpha: float
    target: str
    mean_slope: float
    sd_slope: float
    outer_repeats: int
    h1: float
    h2: float


def h1(alpha: float) -> float:
    """Decay exponent of the averaged statistic for degree-one functions."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError("h1 needs 0 < alpha < 1")
    return math.log2(max(alpha**2, 0.5))


def h2(alpha: float) -> float:
    """Decay exponent of the averaged statistic for degree-two functions."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError("h2 needs 0 < alpha < 1")
    return math.log2(max(alpha**4, 0.5))


def clt_study(cfg: ExperimentConfig, threads: int = 1) -> CltResult:
    """Replicate the normalized statistic and compare with its Gaussian limit.

    The statistic is normalized over the deepest generation; the limit
    variance comes from the variance series for the configured regime.  The
    Kolmogorov-Smirnov distance is measured against N(0, series_variance)
    and skipped with a flag when that limit is a point mass.
    """
    a = cfg.params.require_symmetric("the limit-law study")
    regime = classify_regime(a).regime
    if regime == SUPERCRITICAL:
        raise RegimeError(
            "the fluctuation statistic does not stabilize above the critical "
            "slope; use supercritical_study")
    values = replicate(cfg, threads=threads)
    if regime == CRITICAL:
        series = critical_variance(cfg.fseq, cfg.params)
    else:
        series = subcritical_variance(cfg.fseq, cfg.params)
    flags: list[str] = []
    if series.value > 0.0:
        ks = ks_normal_distance(values, 0.0, math.sqrt(series.value))
    else:
        ks = math.nan
        flags.append("ks-skipped:point-mass")
    return CltResult(
        n=cfg.n,
        replicas=cfg.replicas,
        regime=regime,
        empirical_variance=float(values.var(ddof=1)),
        series_variance=series.value,
        ks_distance=ks,
        ks_threshold=ks_threshold(cfg.replicas),
        moments=sample_moments(values),
        flags=tuple(flags),
        values=values,
    )


def supercritical_study(cfg: ExperimentConfig, threads: int = 1) -> SupercriticalResult:
    """Track the rescaled statistics and the additive martingale.

    Reports the median over replicas of the whole-tree to deepest-generation
    ratio of the (2a)^(-n)-rescaled centered sums, and the mean absolute
    martingale increment at each depth.
    """
    a = cfg.params.require_symmetric("the supercritical study")
    if classify_regime(a).regime != SUPERCRITICAL:
        raise RegimeError(f"the supercritical study needs 2 a^2 > 1, got a={a}")
    if cfg.fseq.shape == "custom":
        raise ConfigError("the supercritical study takes a single test function")
    f = cfg.fseq.funcs[0]

    master = RandomStream.from_seed(cfg.master_seed)
    keys = master.split_keys(np.arange(cfg.replicas))
    sums = generation_sums(cfg.params, cfg.nu, [center(f), project_linear(f)],
                           cfg.n, keys, threads=threads)

    flags: list[str] = []
    scale = (2.0 * a) ** (-cfg.n)
    gen_stat = scale * sums[:, cfg.n, 0]
    tree_stat = scale * sums[:, :, 0].sum(axis=1)
    usable = gen_stat != 0.0
    if not np.all(usable):
        flags.append(f"ratio-excluded:{int(np.sum(~usable))}")
    if np.any(usable):
        ratio_median = float(np.median(tree_stat[usable] / gen_stat[usable]))
    else:
        ratio_median = math.nan

    paths = sums[:, :, 1] * (2.0 * a) ** (-np.arange(cfg.n + 1))
    l1_diffs = np.abs(np.diff(paths, axis=1)).mean(axis=0)
    return SupercriticalResult(
        n=cfg.n,
        replicas=cfg.replicas,
        ratio_median=ratio_median,
        martingale_l1_diffs=l1_diffs,
        flags=tuple(flags),
    )


def _poly_label(coeffs) -> str:
    """Compact name for a monomial coefficient vector, e.g. "x" or "x^2"."""
    coeffs = list(coeffs)
    active = [i for i, c in enumerate(coeffs) if c != 0.0]
    if len(active) == 1 and coeffs[active[0]] == 1.0:
        power = active[0]
        return "1" if power == 0 else ("x" if power == 1 else f"x^{power}")
    return "poly(" + ",".join(f"{c:g}" for c in coeffs) + ")"


def _fit_loglog(sizes, variances) -> tuple[float, float]:
    """Slope and stderr of log(variance) regressed on log(size)."""
    xs = np.log(np.asarray(sizes, dtype=np.float64))
    ys = np.log(np.asarray(variances, dtype=np.float64))
    slope, stderr, _ = fit_line(xs, ys)
    return slope, stderr


def slope_study(alphas, f, n_max: int, replicas: int, target: str = "Gn",
                n_min: int = DEFAULT_N_MIN, outer_repeats: int = 1,
                master_seed: int = 0, sigma: float = 1.0,
                nu: InitialLaw | None = None, threads: int = 1) -> list[SlopeResult]:
    """Fit the variance decay exponent of the averaged statistic per slope.

    For each grid slope alpha (and each outer repetition), simulates
    `replicas` trees to depth n_max, computes across replicas the variance
    of the size-averaged sum of f over the target population at every depth
    in [n_min, n_max], and regresses log-variance on log-size.  f is a
    monomial coefficient vector rescaled per alpha.  Depths with zero
    variance are flagged and omitted from the regression.
    """
    alphas = [float(alpha) for alpha in alphas]
    for alpha in alphas:
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"grid slopes must lie in (0, 1), got {alpha}")
    if n_max < n_min + 3:
        raise ConfigError(f"need n_max >= n_min + 3, got [{n_min}, {n_max}]")
    if replicas < 2:
        raise ConfigError("variance estimation needs at least 2 replicas")
    if target not in ("Gn", "Tn"):
        raise ConfigError(f"unknown target {target!r}")
    if outer_repeats < 1:
        raise ConfigError("outer_repeats must be positive")
    if nu is None:
        nu = InitialLaw.stationary()

    label = _poly_label(f)
    master = RandomStream.from_seed(master_seed)
    results: list[SlopeResult] = []
    for i, alpha in enumerate(alphas):
        params = BarParams.symmetric_params(alpha, sigma)
        fn = from_monomial(f, params.sigma_a())
        for outer in range(outer_repeats):
            keys = master.split(i, outer).split_keys(np.arange(replicas))
            sums = generation_sums(params, nu, [fn], n_max, keys, threads=threads)
            totals = np.cumsum(sums[:, :, 0], axis=1)
            flags: list[str] = []
            sizes: list[float] = []
            variances: list[float] = []
            for n in range(n_min, n_max + 1):
                if target == "Gn":
                    size = 2.0**n
                    raw = sums[:, n, 0]
                else:
                    size = 2.0 ** (n + 1) - 1.0
                    raw = totals[:, n]
                var = float((raw / size).var(ddof=1))
                if var <= 0.0:
                    flags.append(f"degenerate-variance:n={n}")
                    continue
                sizes.append(size)
                variances.append(var)
            if len(sizes) < 2:
                flags.append("insufficient-points")
                slope, stderr = math.nan, math.nan
            else:
                slope, stderr = _fit_loglog(sizes, variances)
            results.append(SlopeResult(
                alpha=alpha,
                n_min=n_min,
                n_max=n_max,
                slope=slope,
                stderr=stderr,
                replicas=replicas,
                target=target,
                f_label=label,
                outer_repeat=outer,
                h1=h1(alpha),
                h2=h2(alpha),
                flags=tuple(flags),
            ))
    return results


def slope_summary(results) -> list[SlopeSummary]:
    """Mean and standard deviation of the slope per grid point.

    Groups SlopeResults by (alpha, target) preserving first-seen order;
    repeats with an undefined slope are dropped from the aggregation.
    """
    groups: dict[tuple[float, str], list[SlopeResult]] = {}
    for res in results:
        groups.setdefault((res.alpha, res.target), []).append(res)
    out = []
    for (alpha, target), group in groups.items():
        slopes = np.array([g.slope for g in group if not math.isnan(g.slope)])
        if len(slopes) == 0:
            mean = sd = math.nan
        else:
            mean = float(slopes.mean())
            sd = float(slopes.std(ddof=1)) if len(slopes) > 1 else 0.0
        out.append(SlopeSummary(
            alpha=alpha,
            target=target,
            mean_slope=mean,
            sd_slope=sd,
            outer_repeats=len(group),
            h1=group[0].h1,
            h2=group[0].h2,
        ))
    return out
