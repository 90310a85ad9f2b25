"""Generation-by-generation simulation on the full binary tree.

Traits are stored per generation in level order: node (g, k) has children
(g+1, 2k) and (g+1, 2k+1), so one generation is a flat array and the two
child arrays interleave into the next one.  The noise behind generation g of
replica r comes from the counter-based stream keyed by (master seed, r, g)
with the parent position as the counter, which makes every simulation a pure
function of (config, seed) regardless of chunking or thread count.

The module also evaluates the additive functionals over generations and the
normalized fluctuation statistics built from them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RegimeError, ResourceCapError
from .kernels import (
    CRITICAL,
    SUBCRITICAL,
    BarParams,
    _noise_cholesky,
    classify_regime,
)
from .rng import RandomStream, batch_normal_pairs, batch_normals, derive_keys
from .spectral import SpectralFn, center

N_MAX = 22

# Replica chunks are sized so one generation buffer stays near this many
# doubles; the chunk grid depends only on (replicas, n), never on threads.
CHUNK_VALUES = 1 << 22


@dataclass(frozen=True)
class TreeIndex:
    """A node of the full binary tree, identified by generation and rank."""

    gen: int
    pos: int

    def __post_init__(self) -> None:
        if self.gen < 0 or not 0 <= self.pos < (1 << self.gen):
            raise ConfigError(f"invalid tree index ({self.gen}, {self.pos})")

    def children(self) -> tuple["TreeIndex", "TreeIndex"]:
        return (
            TreeIndex(self.gen + 1, 2 * self.pos),
            TreeIndex(self.gen + 1, 2 * self.pos + 1),
        )

    def parent(self) -> "TreeIndex":
        if self.gen == 0:
            raise ConfigError("the root has no parent")
        return TreeIndex(self.gen - 1, self.pos >> 1)


def common_ancestor_depth(i: TreeIndex, j: TreeIndex) -> int:
    """Generation of the deepest common ancestor of two nodes."""
    d = min(i.gen, j.gen)
    while (i.pos >> (i.gen - d)) != (j.pos >> (j.gen - d)):
        d -= 1
    return d


@dataclass(frozen=True)
class GenerationBuffer:
    """All traits of one generation, in level order."""

    gen: int
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (1 << self.gen,):
            raise ConfigError(
                f"generation {self.gen} needs {1 << self.gen} values, got {v.shape}"
            )
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class InitialLaw:
    """Law of the root trait: a point mass, the invariant law, or a Gaussian."""

    kind: str
    x0: float = 0.0
    mean: float = 0.0
    var: float = 1.0

    @classmethod
    def dirac(cls, x0: float) -> "InitialLaw":
        return cls(kind="dirac", x0=float(x0))

    @classmethod
    def stationary(cls) -> "InitialLaw":
        return cls(kind="stationary")

    @classmethod
    def gaussian(cls, mean: float, var: float) -> "InitialLaw":
        if not var > 0.0:
            raise ConfigError("gaussian initial law needs var > 0")
        return cls(kind="gaussian", mean=float(mean), var=float(var))

    def __post_init__(self) -> None:
        if self.kind not in ("dirac", "stationary", "gaussian"):
            raise ConfigError(f"unknown initial law {self.kind!r}")
        if self.kind == "gaussian" and not self.var > 0.0:
            raise ConfigError("gaussian initial law needs var > 0")

    def label(self) -> str:
        if self.kind == "dirac":
            return f"dirac({self.x0:g})"
        if self.kind == "gaussian":
            return f"gaussian({self.mean:g},{self.var:g})"
        return "stationary"


@dataclass(frozen=True)
class FunctionalSeq:
    """A per-generation family of test functions with a tagged shape.

    shape "single" weights only the deepest generation, "tree" applies one
    function to every generation, "custom" lists one function per offset
    from the deepest generation (zero beyond the list).
    """

    shape: str
    funcs: tuple

    @classmethod
    def single(cls, f: SpectralFn) -> "FunctionalSeq":
        return cls(shape="single", funcs=(f,))

    @classmethod
    def tree(cls, f: SpectralFn) -> "FunctionalSeq":
        return cls(shape="tree", funcs=(f,))

    @classmethod
    def custom(cls, funcs) -> "FunctionalSeq":
        return cls(shape="custom", funcs=tuple(funcs))

    def __post_init__(self) -> None:
        if self.shape not in ("single", "tree", "custom"):
            raise ConfigError(f"unknown functional shape {self.shape!r}")
        if self.shape in ("single", "tree") and len(self.funcs) != 1:
            raise ConfigError(f"shape {self.shape!r} takes exactly one function")
        if not self.funcs or not all(isinstance(f, SpectralFn) for f in self.funcs):
            raise ConfigError("funcs must be SpectralFn instances")

    def func_at(self, offset: int) -> SpectralFn | None:
        """Function applied at generation n - offset, or None when zero."""
        if self.shape == "single":
            return self.funcs[0] if offset == 0 else None
        if self.shape == "tree":
            return self.funcs[0]
        return self.funcs[offset] if offset < len(self.funcs) else None

    def distinct_funcs(self) -> tuple:
        return self.funcs

    def sigma_a(self) -> float:
        return self.funcs[0].sigma_a


def _check_depth(n: int, n_cap: int) -> None:
    if n < 0:
        raise ConfigError("tree depth must be nonnegative")
    if n > n_cap:
        per_gen = (1 << n) * 8
        raise ResourceCapError(
            f"depth {n} exceeds the cap {n_cap}; one generation alone needs "
            f"about {per_gen:,} bytes per replica"
        )


def _root_values(nu: InitialLaw, params: BarParams, keys: np.ndarray) -> np.ndarray:
    rows = len(keys)
    if nu.kind == "dirac":
        return np.full((rows, 1), nu.x0)
    z = batch_normals(derive_keys(keys, 0), 1)
    if nu.kind == "stationary":
        return params.sigma_a() * z
    return nu.mean + math.sqrt(nu.var) * z


def _advance(values: np.ndarray, params: BarParams, gen_keys: np.ndarray) -> np.ndarray:
    z0, z1 = batch_normal_pairs(gen_keys, values.shape[1])
    l11, l21, l22 = _noise_cholesky(params)
    out = np.empty((values.shape[0], 2 * values.shape[1]))
    out[:, 0::2] = params.a0 * values + params.b0 + l11 * z0
    out[:, 1::2] = params.a1 * values + params.b1 + l21 * z0 + l22 * z1
    return out


def iter_generations(nu: InitialLaw, params: BarParams, n: int, stream: RandomStream,
                     n_cap: int = N_MAX):
    """Yield GenerationBuffers 0..n, holding one generation at a time."""
    _check_depth(n, n_cap)
    keys = np.array([stream.key], dtype=np.uint64)
    vals = _root_values(nu, params, keys)
    yield GenerationBuffer(gen=0, values=vals[0])
    for g in range(n):
        vals = _advance(vals, params, derive_keys(keys, g + 1))
        yield GenerationBuffer(gen=g + 1, values=vals[0])


def simulate(nu: InitialLaw, params: BarParams, n: int, stream: RandomStream,
             mode: str = "full", accumulators=(), n_cap: int = N_MAX):
    """Simulate one replica to depth n.

    mode="full" returns all generation buffers; mode="streaming" keeps only
    one generation alive and returns, per generation, the tuple of values of
    the registered accumulators (each a callable on a GenerationBuffer).
    """
    gens = iter_generations(nu, params, n, stream, n_cap=n_cap)
    if mode == "full":
        return list(gens)
    if mode != "streaming":
        raise ConfigError(f"unknown simulation mode {mode!r}")
    return [tuple(acc(buf) for acc in accumulators) for buf in gens]


def generation_sum(buf: GenerationBuffer, f: SpectralFn) -> float:
    """Sum of f over one generation."""
    return float(np.sum(f.evaluate(buf.values)))


def fluctuation_statistic(gens, fseq: FunctionalSeq, n: int) -> float:
    """Centered multi-generation sum, scaled by the deepest generation size.

    Computes |G_n|^(-1/2) * sum over offsets l of the centered f_l summed
    over generation n-l.  With shape "single" this is the one-generation
    statistic; with shape "tree" the whole-tree statistic.
    """
    if len(gens) <= n:
        raise ConfigError(f"need generations 0..{n}, got {len(gens)}")
    terms = []
    for offset in range(n + 1):
        f = fseq.func_at(offset)
        if f is None:
            continue
        centered = center(f)
        if centered.is_zero():
            continue
        terms.append(generation_sum(gens[n - offset], centered))
    return math.fsum(terms) / math.sqrt(2.0**n)


def generation_sums(params: BarParams, nu: InitialLaw, funcs, n: int,
                    replica_keys: np.ndarray, threads: int = 1,
                    n_cap: int = N_MAX) -> np.ndarray:
    """Per-replica, per-generation sums of each function.

    Returns an array of shape (replicas, n+1, len(funcs)) whose [r, g, j]
    entry is the sum of funcs[j] over generation g of replica r.  Replicas
    are processed in fixed chunks; the thread count never changes results.
    """
    _check_depth(n, n_cap)
    funcs = list(funcs)
    keys = np.asarray(replica_keys, dtype=np.uint64)
    rows = len(keys)
    out = np.empty((rows, n + 1, len(funcs)))

    chunk_rows = max(1, CHUNK_VALUES >> n)
    spans = [(lo, min(lo + chunk_rows, rows)) for lo in range(0, rows, chunk_rows)]

    def work(span):
        lo, hi = span
        vals = _root_values(nu, params, keys[lo:hi])
        for j, f in enumerate(funcs):
            out[lo:hi, 0, j] = np.sum(f.evaluate(vals), axis=1)
        for g in range(n):
            vals = _advance(vals, params, derive_keys(keys[lo:hi], g + 1))
            for j, f in enumerate(funcs):
                out[lo:hi, g + 1, j] = np.sum(f.evaluate(vals), axis=1)

    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, spans))
    else:
        for span in spans:
            work(span)
    return out


def replicate(config, threads: int = 1) -> np.ndarray:
    """Per-replica values of the regime-normalized fluctuation statistic.

    `config` carries params, nu, fseq, n, replicas, and master_seed (see the
    experiments module).  Replica r always uses the stream derived from
    (master_seed, r), so the output is ordered by replica index and is a
    pure function of the configuration.
    """
    params: BarParams = config.params
    fseq: FunctionalSeq = config.fseq
    n = int(config.n)
    replicas = int(config.replicas)
    if replicas < 1:
        raise ConfigError("need at least one replica")
    a = params.require_symmetric("the fluctuation statistic")
    sigma_a = params.sigma_a()
    if abs(fseq.sigma_a() - sigma_a) > 1e-12 * sigma_a:
        raise ConfigError("functional scale does not match the kernel parameters")
    normalization = getattr(config, "normalization", "auto")
    if normalization != "auto":
        raise ConfigError(f"unknown normalization {normalization!r}")

    master = RandomStream.from_seed(int(config.master_seed))
    keys = master.split_keys(np.arange(replicas))
    centered = [center(f) for f in fseq.distinct_funcs()]
    sums = generation_sums(params, config.nu, centered, n, keys, threads=threads)

    regime = classify_regime(a).regime
    if regime in (SUBCRITICAL, CRITICAL):
        if regime == CRITICAL and n == 0:
            raise ConfigError("the critical normalization needs depth n >= 1")
        index_of = {id(f): j for j, f in enumerate(fseq.distinct_funcs())}
        raw = np.zeros(replicas)
        for offset in range(n + 1):
            f = fseq.func_at(offset)
            if f is None:
                continue
            raw += sums[:, n - offset, index_of[id(f)]]
        scale = math.sqrt(2.0**n) if regime == SUBCRITICAL else math.sqrt(n * 2.0**n)
        return raw / scale
    if fseq.shape == "single":
        raw = sums[:, n, 0]
    elif fseq.shape == "tree":
        raw = sums[:, :, 0].sum(axis=1)
    else:
        raise RegimeError(
            "custom functional sequences have no supercritical normalization"
        )
    return raw / (2.0 * a) ** n
