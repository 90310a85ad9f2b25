"""Command-line front end for the tree simulation laboratory.

Each subcommand assembles its configuration from built-in defaults, an
optional JSON config file, and command-line flags (later sources win),
computes an 8-byte digest of the canonicalized configuration, runs the
requested study, and persists CSV/SVG outputs next to a manifest that
records the digest, seed, version, and wall time.  Exit codes: 0 success,
2 configuration error, 3 computation rejected (wrong regime or degree cap),
4 resource cap.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
import time

from . import __version__
from .errors import ComputationRejected, ConfigError, ResourceCapError
from .experiments import (
    DEFAULT_N_MIN,
    DEFAULT_OUTER_REPEATS,
    ExperimentConfig,
    clt_study,
    h1,
    h2,
    slope_study,
    slope_summary,
    supercritical_study,
)
from .kernels import (
    CRITICAL,
    SUBCRITICAL,
    BarParams,
    check_assumptions,
    classify_regime,
)
from .rng import RandomStream
from .spectral import from_monomial
from .svg import Band, Series, line_chart
from .treesim import FunctionalSeq, InitialLaw, replicate, simulate
from .variance import critical_variance, martingale_path, subcritical_variance

_MAX_MONOMIAL_POWER = 8

_FLOAT_KEYS = frozenset({"a", "sigma", "tol"})
_INT_KEYS = frozenset({"n", "replicas", "seed", "n_min", "outer_repeats"})

_DEFAULTS: dict[str, dict] = {
    "simulate": {"a": None, "sigma": 1.0, "n": None, "replicas": None, "f": "x",
                 "shape": "single", "nu": "stationary", "seed": 0},
    "variance": {"a": None, "sigma": 1.0, "f": "x", "shape": "single",
                 "regime": "auto", "tol": 1e-10},
    "clt": {"a": None, "sigma": 1.0, "n": None, "replicas": None, "f": "x",
            "shape": "single", "nu": "stationary", "seed": 0},
    "slopes": {"alphas": None, "f": "x", "n": None, "n_min": DEFAULT_N_MIN,
               "replicas": None, "target": "Gn",
               "outer_repeats": DEFAULT_OUTER_REPEATS, "sigma": 1.0,
               "nu": "stationary", "seed": 0},
    "supercritical": {"a": None, "sigma": 1.0, "n": None, "replicas": None,
                      "f": "x", "shape": "single", "nu": "stationary", "seed": 0},
    "martingale": {"a": None, "sigma": 1.0, "n": None, "f": "x",
                   "nu": "stationary", "seed": 0},
    "check-assumptions": {"a": None, "sigma": 1.0},
}


def _g17(value) -> str:
    return f"{float(value):.17g}"


def _as_float(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"option {name} needs a number, got {value!r}") from None


def _as_int(value, name: str) -> int:
    try:
        out = int(str(value), 10)
    except (TypeError, ValueError):
        raise ConfigError(f"option {name} needs an integer, got {value!r}") from None
    return out


def _parse_f(value) -> list[float]:
    """A test function: "x", "x^p" (p <= 8), "1", or monomial coefficients."""
    if isinstance(value, (list, tuple)):
        return [float(c) for c in value]
    text = str(value).strip()
    if text == "1":
        return [1.0]
    if text == "x":
        return [0.0, 1.0]
    match = re.fullmatch(r"x\^(\d+)", text)
    if match:
        power = int(match.group(1))
        if not 1 <= power <= _MAX_MONOMIAL_POWER:
            raise ConfigError(
                f"monomial powers are limited to 1..{_MAX_MONOMIAL_POWER}")
        return [0.0] * power + [1.0]
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise ConfigError(
            f"--f takes x, x^p, 1, or a coefficient list, got {value!r}") from None


def _parse_nu(value) -> InitialLaw:
    """An initial law: "stationary", "dirac:X", or "gaussian:MEAN,VAR"."""
    text = str(value).strip()
    if text == "stationary":
        return InitialLaw.stationary()
    if text.startswith("dirac:"):
        return InitialLaw.dirac(_as_float(text[6:], "--nu dirac point"))
    if text.startswith("gaussian:"):
        parts = text[9:].split(",")
        if len(parts) != 2:
            raise ConfigError("--nu gaussian takes MEAN,VAR")
        return InitialLaw.gaussian(_as_float(parts[0], "--nu gaussian mean"),
                                   _as_float(parts[1], "--nu gaussian var"))
    raise ConfigError(
        f"--nu takes stationary, dirac:X, or gaussian:MEAN,VAR, got {value!r}")


def _parse_alphas(value) -> list[float]:
    """A slope grid: "start:stop:step" (inclusive) or a comma list."""
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    text = str(value).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("--alphas grid form is start:stop:step")
        start = _as_float(parts[0], "--alphas start")
        stop = _as_float(parts[1], "--alphas stop")
        step = _as_float(parts[2], "--alphas step")
        if step <= 0.0 or stop < start:
            raise ConfigError("--alphas grid needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise ConfigError(f"--alphas takes a grid or comma list, got {value!r}") from None


def _resolve_threads(flag) -> int:
    value = flag if flag is not None else os.environ.get("BMC_LAB_THREADS")
    if value is None:
        return 1
    threads = _as_int(value, "--threads")
    if threads < 1:
        raise ConfigError("--threads must be positive")
    return threads


def _load_config_file(path: str, command: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    data.pop("command", None)
    unknown = sorted(set(data) - set(_DEFAULTS[command]))
    if unknown:
        raise ConfigError(
            f"config file {path} has unknown keys for {command}: "
            + ", ".join(unknown))
    return data


def _normalize_cfg(cfg: dict) -> dict:
    """Coerce merged option values to their semantic types.

    Flags arrive as strings while config files may already hold numbers;
    normalizing first makes the canonical digest independent of the source.
    """
    out = {}
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if key in _FLOAT_KEYS:
            out[key] = _as_float(value, flag)
        elif key in _INT_KEYS:
            out[key] = _as_int(value, flag)
        elif key == "f":
            out[key] = _parse_f(value)
        elif key == "alphas":
            out[key] = _parse_alphas(value)
        else:
            out[key] = str(value)
    if "nu" in out:
        _parse_nu(out["nu"])
    return out


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def _config_digest(payload: dict) -> str:
    return hashlib.blake2b(_canonical_json(payload).encode("utf-8"),
                           digest_size=8).hexdigest()


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_manifest(out_dir: str, command: str, digest: str, seed,
                    wall_time: float, outputs: list[str]) -> str:
    path = os.path.join(out_dir, "manifest.json")
    payload = {
        "command": command,
        "config_digest": digest,
        "master_seed": seed,
        "version": __version__,
        "wall_time_s": round(wall_time, 3),
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _experiment_config(cfg: dict, target: str = "Gn") -> ExperimentConfig:
    params = BarParams.symmetric_params(_as_float(cfg["a"], "--a"),
                                        _as_float(cfg["sigma"], "--sigma"))
    coeffs = _parse_f(cfg["f"])
    f = from_monomial(coeffs, params.sigma_a())
    shape = str(cfg.get("shape", "single"))
    if shape == "single":
        fseq = FunctionalSeq.single(f)
    elif shape == "tree":
        fseq = FunctionalSeq.tree(f)
    else:
        raise ConfigError(f"--shape takes single or tree, got {shape!r}")
    return ExperimentConfig(
        params=params,
        nu=_parse_nu(cfg["nu"]),
        fseq=fseq,
        n=_as_int(cfg["n"], "--n"),
        replicas=_as_int(cfg["replicas"], "--replicas"),
        master_seed=_as_int(cfg["seed"], "--seed"),
        target=target,
    )


def _run_simulate(cfg: dict, out_dir: str, threads: int) -> list[str]:
    ecfg = _experiment_config(cfg)
    values = replicate(ecfg, threads=threads)
    path = os.path.join(out_dir, "stats.csv")
    _write_csv(path, ("replica", "statistic"),
               ((str(i), _g17(v)) for i, v in enumerate(values)))
    print(f"wrote {path} ({ecfg.replicas} replicas, depth {ecfg.n})")
    return [path]


def _run_variance(cfg: dict, out_dir: str, threads: int) -> list[str]:
    params = BarParams.symmetric_params(_as_float(cfg["a"], "--a"),
                                        _as_float(cfg["sigma"], "--sigma"))
    f = from_monomial(_parse_f(cfg["f"]), params.sigma_a())
    shape = str(cfg["shape"])
    if shape == "single":
        fseq = FunctionalSeq.single(f)
    elif shape == "tree":
        fseq = FunctionalSeq.tree(f)
    else:
        raise ConfigError(f"--shape takes single or tree, got {shape!r}")
    tol = _as_float(cfg["tol"], "--tol")
    regime = str(cfg["regime"])
    if regime == "auto":
        regime = {SUBCRITICAL: "sub", CRITICAL: "crit"}.get(
            classify_regime(params.a0).regime)
        if regime is None:
            raise ComputationRejected(
                "no finite limit variance in the supercritical regime; "
                "use the supercritical subcommand")
    if regime == "sub":
        report = subcritical_variance(fseq, params, tol=tol)
    elif regime == "crit":
        report = critical_variance(fseq, params, tol=tol)
    else:
        raise ConfigError(f"--regime takes sub, crit, or auto, got {regime!r}")
    print(f"regime = {report.regime}")
    print(f"value = {_g17(report.value)}")
    print(f"sigma1 = {_g17(report.sigma1)}")
    print(f"sigma2 = {_g17(report.sigma2)}")
    print(f"tail_bound = {_g17(report.tail_bound)}")
    print("truncation = " + ",".join(str(t) for t in report.truncation))
    return []


def _run_clt(cfg: dict, out_dir: str, threads: int) -> list[str]:
    ecfg = _experiment_config(cfg)
    res = clt_study(ecfg, threads=threads)
    clt_path = os.path.join(out_dir, "clt.csv")
    _write_csv(
        clt_path,
        ("n", "empirical_variance", "series_variance", "ks_distance",
         "ks_threshold", "mean", "skewness", "kurtosis"),
        [(str(res.n), _g17(res.empirical_variance), _g17(res.series_variance),
          _g17(res.ks_distance), _g17(res.ks_threshold), _g17(res.moments.mean),
          _g17(res.moments.skewness), _g17(res.moments.kurtosis))],
    )
    stats_path = os.path.join(out_dir, "stats.csv")
    _write_csv(stats_path, ("replica", "statistic"),
               ((str(i), _g17(v)) for i, v in enumerate(res.values)))
    print(f"regime = {res.regime}")
    print(f"empirical_variance = {_g17(res.empirical_variance)}")
    print(f"series_variance = {_g17(res.series_variance)}")
    print(f"ks_distance = {_g17(res.ks_distance)} "
          f"(5% threshold {_g17(res.ks_threshold)})")
    for flag in res.flags:
        print(f"flag: {flag}")
    return [clt_path, stats_path]


def _slope_plot(alphas, summaries) -> str:
    by_alpha = {s.alpha: s for s in summaries}
    xs, means, lower, upper = [], [], [], []
    for alpha in alphas:
        summary = by_alpha.get(alpha)
        if summary is None or math.isnan(summary.mean_slope):
            continue
        xs.append(alpha)
        means.append(summary.mean_slope)
        lower.append(summary.mean_slope - 2.0 * summary.sd_slope)
        upper.append(summary.mean_slope + 2.0 * summary.sd_slope)
    lo, hi = min(alphas), max(alphas)
    grid = [lo + (hi - lo) * i / 200.0 for i in range(201)]
    series = [
        Series(label="mean slope", x=tuple(xs), y=tuple(means), color="#000000"),
        Series(label="h1", x=tuple(grid), y=tuple(h1(g) for g in grid),
               color="#c62828"),
        Series(label="h2", x=tuple(grid), y=tuple(h2(g) for g in grid),
               color="#1565c0", dashed=True),
    ]
    band = Band(x=tuple(xs), lower=tuple(lower), upper=tuple(upper)) if xs else None
    return line_chart(series, title="variance decay exponent",
                      x_label="slope parameter", y_label="fitted exponent",
                      band=band)


def _run_slopes(cfg: dict, out_dir: str, threads: int, plot: bool) -> list[str]:
    alphas = _parse_alphas(cfg["alphas"])
    results = slope_study(
        alphas,
        _parse_f(cfg["f"]),
        n_max=_as_int(cfg["n"], "--n"),
        replicas=_as_int(cfg["replicas"], "--replicas"),
        target=str(cfg["target"]),
        n_min=_as_int(cfg["n_min"], "--n-min"),
        outer_repeats=_as_int(cfg["outer_repeats"], "--outer-repeats"),
        master_seed=_as_int(cfg["seed"], "--seed"),
        sigma=_as_float(cfg["sigma"], "--sigma"),
        nu=_parse_nu(cfg["nu"]),
        threads=threads,
    )
    path = os.path.join(out_dir, "slopes.csv")
    _write_csv(
        path,
        ("alpha", "target", "n_min", "n_max", "slope", "stderr", "h1", "h2",
         "replicas", "outer_repeat"),
        ((_g17(r.alpha), r.target, str(r.n_min), str(r.n_max), _g17(r.slope),
          _g17(r.stderr), _g17(r.h1), _g17(r.h2), str(r.replicas),
          str(r.outer_repeat)) for r in results),
    )
    outputs = [path]
    summaries = slope_summary(results)
    for s in summaries:
        print(f"alpha={s.alpha:g} target={s.target} "
              f"mean_slope={s.mean_slope:.6f} sd={s.sd_slope:.6f} "
              f"h1={s.h1:.6f} h2={s.h2:.6f}")
    flagged = [r for r in results if r.flags]
    if flagged:
        print(f"flagged runs: {len(flagged)}")
    if plot:
        svg_path = os.path.join(out_dir, "slopes.svg")
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(_slope_plot(alphas, summaries))
            fh.write("\n")
        outputs.append(svg_path)
    return outputs


def _run_supercritical(cfg: dict, out_dir: str, threads: int) -> list[str]:
    ecfg = _experiment_config(cfg)
    res = supercritical_study(ecfg, threads=threads)
    path = os.path.join(out_dir, "supercritical.csv")
    _write_csv(path, ("level", "martingale_l1_diff"),
               ((str(g), _g17(v)) for g, v in enumerate(res.martingale_l1_diffs)))
    a = ecfg.params.a0
    print(f"ratio_median = {_g17(res.ratio_median)}")
    print(f"ratio_limit = {_g17(2.0 * a / (2.0 * a - 1.0))}")
    for flag in res.flags:
        print(f"flag: {flag}")
    return [path]


def _run_martingale(cfg: dict, out_dir: str, threads: int) -> list[str]:
    params = BarParams.symmetric_params(_as_float(cfg["a"], "--a"),
                                        _as_float(cfg["sigma"], "--sigma"))
    f = from_monomial(_parse_f(cfg["f"]), params.sigma_a())
    n = _as_int(cfg["n"], "--n")
    stream = RandomStream.from_seed(_as_int(cfg["seed"], "--seed")).split(0)
    gens = simulate(_parse_nu(cfg["nu"]), params, n, stream)
    path_values = martingale_path(f, gens, params)
    path = os.path.join(out_dir, "martingale.csv")
    _write_csv(path, ("level", "value"),
               ((str(g), _g17(v)) for g, v in enumerate(path_values)))
    print(f"martingale value at depth {n}: {_g17(path_values[-1])}")
    return [path]


def _run_check_assumptions(cfg: dict, out_dir: str | None) -> list[str]:
    report = check_assumptions(_as_float(cfg["a"], "--a"),
                               sigma=_as_float(cfg["sigma"], "--sigma"))
    text = json.dumps(report.as_json_dict(), indent=2)
    print(text)
    if out_dir is None:
        return []
    path = os.path.join(out_dir, "assumptions.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
    return [path]


def _add_common(sub: argparse.ArgumentParser, keys) -> None:
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--dump-config",
                     help="write the merged canonical config JSON to this path")
    sub.add_argument("--threads",
                     help="worker threads (default: BMC_LAB_THREADS or 1)")
    sub.add_argument("--out", help="output directory (default: current)")
    flag_help = {
        "a": "autoregression slope in (-1, 1)",
        "sigma": "noise standard deviation (default 1)",
        "n": "tree depth",
        "replicas": "number of independent trees",
        "f": "test function: x, x^p, 1, or coefficients c0,c1,...",
        "shape": "functional shape: single or tree",
        "nu": "root law: stationary, dirac:X, or gaussian:MEAN,VAR",
        "seed": "master seed (default 0)",
        "alphas": "slope grid: start:stop:step or comma list",
        "n_min": "smallest regression depth (default 5)",
        "target": "population for slopes: Gn or Tn",
        "outer_repeats": "independent slope repetitions (default 20)",
        "regime": "variance series: sub, crit, or auto",
        "tol": "series truncation tolerance (default 1e-10)",
    }
    for key in keys:
        sub.add_argument("--" + key.replace("_", "-"), dest=key,
                         help=flag_help[key])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bmclab",
        description="Simulation laboratory for autoregressive processes on "
                    "binary trees.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "simulate": "replicate the regime-normalized statistic to CSV",
        "variance": "evaluate the limit variance series",
        "clt": "compare the replicated statistic with its Gaussian limit",
        "slopes": "fit variance decay exponents over a slope grid",
        "supercritical": "rescaled-statistic ratio and martingale increments",
        "martingale": "one martingale path along a simulated tree",
        "check-assumptions": "integrability thresholds for the density row",
    }
    for command, defaults in _DEFAULTS.items():
        sub = subs.add_parser(command, help=descriptions[command])
        _add_common(sub, defaults.keys())
        if command == "slopes":
            sub.add_argument("--plot", action="store_true",
                             help="also write slopes.svg")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    command = args.command
    defaults = dict(_DEFAULTS[command])
    file_cfg = _load_config_file(args.config, command) if args.config else {}
    flag_cfg = {key: value for key, value in vars(args).items()
                if key in defaults and value is not None}
    cfg = {**defaults, **file_cfg, **flag_cfg}
    missing = sorted(key for key, value in cfg.items() if value is None)
    if missing:
        flags = ", ".join("--" + key.replace("_", "-") for key in missing)
        raise ConfigError(f"missing required option(s): {flags}")
    cfg = _normalize_cfg(cfg)

    threads = _resolve_threads(args.threads)
    out_dir = args.out if args.out is not None else "."
    if args.out is not None:
        os.makedirs(out_dir, exist_ok=True)

    digest = _config_digest({"command": command, **cfg})
    if args.dump_config:
        with open(args.dump_config, "w", encoding="utf-8") as fh:
            fh.write(_canonical_json({"command": command, **cfg}))
            fh.write("\n")
        print(f"config written to {args.dump_config} (digest {digest})")

    start = time.perf_counter()
    if command == "simulate":
        outputs = _run_simulate(cfg, out_dir, threads)
    elif command == "variance":
        outputs = _run_variance(cfg, out_dir, threads)
    elif command == "clt":
        outputs = _run_clt(cfg, out_dir, threads)
    elif command == "slopes":
        outputs = _run_slopes(cfg, out_dir, threads, plot=args.plot)
    elif command == "supercritical":
        outputs = _run_supercritical(cfg, out_dir, threads)
    elif command == "martingale":
        outputs = _run_martingale(cfg, out_dir, threads)
    else:
        outputs = _run_check_assumptions(
            cfg, out_dir if args.out is not None else None)
    wall = time.perf_counter() - start

    if outputs:
        manifest = _write_manifest(out_dir, command, digest, cfg.get("seed"),
                                   wall, outputs)
        print(f"manifest: {manifest}")
    return 0


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return 0 if code in (0, None) else 2
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ComputationRejected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
