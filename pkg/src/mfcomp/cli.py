"""
Command-line front end.

    mfcomp analyze       --input v.csv --out runs/a
    mfcomp surrogate     --input v.csv --kind lm --count 10 --out runs/s
    mfcomp synth         --kind cascade --p 0.3 --depth 14 --out runs/c
    mfcomp fse-calibrate --dist weibull --param 1 --ensemble 20 --out runs/f
    mfcomp decompose     --input prices.csv --prices --ensemble 100 --out runs/d
    mfcomp sweep         --input prices.csv --prices --family student --out runs/w

Every run writes its outputs and a ``manifest.json`` into the ``--out``
directory. Errors are reported on stderr as one JSON object; the exit code is
2 for bad arguments, 3 for unusable input and 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .analysis import AnalysisConfig, AnalysisError, analyze, partition_function
from .decomposition import decompose, family_sweep
from .fse import (
    DESK_H,
    DESK_L,
    FseTable,
    desk_pdf,
    fit_linear_laws,
    fit_power_exponent,
    fse_scan,
    rescale_window,
)
from .report import RunManifest, RunWriter, sha256_file
from .seeding import LEG_KEYS, job_rng, job_seed, new_master_seed
from .series import (
    Kind,
    Series,
    SeriesError,
    load_price_csv,
    load_series_csv,
    log_returns,
    volatility,
)
from .surrogates import (
    DistributionSpec,
    linear_memory_surrogate,
    rank_remap,
    shuffle,
)
from .synthetic import CascadeSpec, FgnSpec, binomial_cascade, generate_fgn

log = logging.getLogger("mfcomp")

EXIT_ARGS, EXIT_INPUT, EXIT_NUMERIC = 2, 3, 4

SWEEP_GRIDS = {
    "student": tuple(3 + 0.5 * k for k in range(15)),
    "weibull": tuple(round(0.4 + 0.1 * k, 1) for k in range(7)),
}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit_error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message,
                                           "exit_code": code}}) + "\n")
    return code


# ---------------------------------------------------------------- arguments

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--emit", choices=("json", "csv", "both"), default="both")
    p.add_argument("--seed", type=int, help="master seed (generated if omitted)")
    p.add_argument("--ci", action="store_true",
                   help="CI mode: require an explicit --seed (also set by CI env var)")
    p.add_argument("--workers", type=int, help="worker processes (default MFCOMP_THREADS or 1)")


def _add_input(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--input", type=Path, required=required, help="CSV input")
    p.add_argument("--column", default="0", help="column name or zero-based index")
    p.add_argument("--prices", action="store_true",
                   help="input holds prices; analyze the absolute log returns")


def _add_analysis(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q-range", nargs=2, type=float, default=(-4.0, 4.0),
                   metavar=("QMIN", "QMAX"))
    p.add_argument("--q-step", type=float, default=0.25)
    p.add_argument("--scale-range", nargs=2, type=float, default=(1 / 60, 1 / 3),
                   metavar=("LO", "HI"), help="scales as fractions of the length")
    p.add_argument("--n-scales", type=int, default=30)
    p.add_argument("--exhaustive", action="store_true",
                   help="use every window position instead of random sampling")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfcomp", description="Multifractal components of positive series.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="singularity spectrum of a series")
    _add_input(p)
    _add_analysis(p)
    _add_common(p)

    p = sub.add_parser("surrogate", help="shuffled, linear-memory or remapped surrogates")
    _add_input(p)
    p.add_argument("--kind", choices=("shuffle", "lm", "remap"), required=True)
    p.add_argument("--dist", choices=("empirical", "normal", "student", "weibull"),
                   default="empirical", help="target distribution for --kind remap")
    p.add_argument("--param", nargs="*", type=float, default=(),
                   help="student: gamma; weibull: beta; normal: mu sigma")
    p.add_argument("--reference", type=Path, help="CSV of the empirical target distribution")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=1000, help="IAAFT iteration cap")
    _add_common(p)

    p = sub.add_parser("synth", help="synthetic fGn or binomial cascade")
    p.add_argument("--kind", choices=("fgn", "cascade"), required=True)
    p.add_argument("--H", type=float, default=0.5)
    p.add_argument("--length", type=int, default=2**14, help="fGn length (power of 2)")
    p.add_argument("--abs", action="store_true", help="write |fGn| instead of fGn")
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--randomized", action="store_true", help="random child order per node")
    _add_common(p)

    p = sub.add_parser("fse-calibrate", help="finite-size width table over (H, L)")
    _add_input(p, required=False)
    p.add_argument("--dist", choices=("weibull", "student", "normal"),
                   help="target distribution when no --input is given (default weibull 1)")
    p.add_argument("--param", nargs="*", type=float, default=())
    p.add_argument("--H", nargs="+", type=float, default=DESK_H)
    p.add_argument("--L", nargs="+", type=int, default=DESK_L)
    p.add_argument("--ensemble", type=int, default=20)
    p.add_argument("--max-iter", type=int, default=50, help="IAAFT iteration cap")
    p.add_argument("--window", nargs=2, type=float, metavar=("LMIN", "LMAX"),
                   help="fit window in L (default: reference window rescaled to --L)")
    _add_analysis(p)
    _add_common(p)

    for name, helptext in (("decompose", "component decomposition of a series"),
                           ("sweep", "distribution-family sweep")):
        p = sub.add_parser(name, help=helptext)
        _add_input(p)
        p.add_argument("--ensemble", type=int, default=100)
        p.add_argument("--max-iter", type=int, default=1000, help="IAAFT iteration cap")
        if name == "decompose":
            p.add_argument("--fse-table", type=Path, help="fse-calibrate JSON for a cross-check")
        else:
            p.add_argument("--family", choices=("student", "weibull"), required=True)
            p.add_argument("--grid", nargs="+", type=float,
                           help="parameter values (default: the family's standard grid)")
        _add_analysis(p)
        _add_common(p)
    return parser


# ------------------------------------------------------------------ helpers

def _ci_mode(args) -> bool:
    return args.ci or os.environ.get("CI", "").lower() not in (
        "", "0", "false", "no")


def _resolve_seed(args) -> tuple[int, str]:
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        return args.seed, "given"
    if _ci_mode(args):
        raise UsageError("CI mode requires an explicit --seed")
    seed = new_master_seed()
    log.warning("no --seed given; using generated master seed %d", seed)
    return seed, "generated"


def _column(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _load_input(args) -> tuple[Series, Series | None]:
    """(series to analyze, returns or None)."""
    path = args.input
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    col = _column(args.column)
    if args.prices:
        r = log_returns(load_price_csv(path, col))
        return volatility(r), r
    s = load_series_csv(path, col, Kind.GENERIC_POSITIVE)
    if s.values.size and s.values.min() < 0:
        raise SeriesError("input has negative values; pass --prices for a price series "
                          "or supply absolute values")
    return s, None


def _analysis_cfg(args, seed: int) -> AnalysisConfig:
    lo, hi = args.q_range
    if args.q_step <= 0 or hi <= lo:
        raise UsageError("--q-range must be increasing and --q-step positive")
    n = int(round((hi - lo) / args.q_step))
    if not math.isclose(lo + n * args.q_step, hi, abs_tol=1e-9):
        raise UsageError("--q-range must be a whole number of --q-step wide")
    q = tuple(float(x) for x in np.round(lo + args.q_step * np.arange(n + 1), 12))
    try:
        return AnalysisConfig(q_grid=q, scale_range=tuple(args.scale_range),
                              n_scales=args.n_scales, exhaustive=args.exhaustive,
                              seed=job_seed(seed, LEG_KEYS["analysis"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _dist_spec(dist: str | None, params, reference: Series | None = None,
               default: DistributionSpec | None = None) -> DistributionSpec:
    params = list(params)
    if dist is None:
        return default
    try:
        if dist == "empirical":
            if reference is None:
                raise UsageError("empirical distribution needs a reference series")
            return DistributionSpec.empirical(reference)
        if dist == "student":
            (gamma,) = params or [3.0]
            return DistributionSpec.student_abs(gamma)
        if dist == "weibull":
            (beta,) = params or [1.0]
            return DistributionSpec.weibull(beta)
        if len(params) not in (0, 2):
            raise UsageError("normal distribution takes --param MU SIGMA")
        mu, sigma = params or (0.0, 1.0)
        return DistributionSpec.gaussian_abs(mu, sigma)
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad --param for {dist}: {exc}") from exc


def _want(args, fmt: str) -> bool:
    return args.emit in (fmt, "both")


def _input_info(args) -> dict | None:
    path = getattr(args, "input", None)
    if path is None:
        return None
    return {"path": str(path), "sha256": sha256_file(path), "column": args.column,
            "prices": bool(args.prices)}


def _config_snapshot(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("verbose",):
            continue
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


# -------------------------------------------------------------- subcommands

def cmd_analyze(args, seed, out: RunWriter) -> None:
    s, _ = _load_input(args)
    cfg = _analysis_cfg(args, seed)
    spec = analyze(s, cfg)
    spec.seed = seed
    if _want(args, "json"):
        out.json("spectrum.json", spec.to_dict())
    if _want(args, "csv"):
        out.csv("spectrum.csv", spec.csv_rows())
        table = partition_function(s, cfg)
        rows = [("q", "scale", "M_q", "M_q_gen")]
        rows += [(repr(q), str(l), repr(m), repr(g)) for q, l, m, g in table.tidy_rows()]
        out.csv("partition.csv", rows)
    for w in spec.warnings:
        log.warning("%s", w)


def cmd_surrogate(args, seed, out: RunWriter) -> None:
    s, returns = _load_input(args)
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    spec = None
    if args.kind == "remap":
        ref = None
        if args.dist == "empirical":
            ref = load_series_csv(args.reference, 0) if args.reference else s
        if args.dist == "normal" and not args.param and returns is not None:
            r = returns.values
            args.param = [float(r.mean()), float(r.std(ddof=1))]
        spec = _dist_spec(args.dist, args.param, ref)
    leg = {"shuffle": "sf", "lm": "lm", "remap": "family"}[args.kind]
    members = []
    for k in range(args.count):
        rng = job_rng(seed, LEG_KEYS[leg], k)
        report = None
        if args.kind == "shuffle":
            y = shuffle(s, rng)
        elif args.kind == "lm":
            y, report = linear_memory_surrogate(s, rng, max_iter=args.max_iter,
                                                return_report=True)
        else:
            y = rank_remap(s, spec, rng)
        name = f"member_{k:04d}.csv"
        out.csv(name, [("value",)] + [(repr(float(x)),) for x in y.values])
        members.append({"member": k, "file": name, "key": [LEG_KEYS[leg], k],
                        "iaaft": report.to_dict() if report else None})
    meta = {"schema": "mfcomp.surrogates/1", "kind": args.kind, "seed": seed,
            "count": args.count, "max_iter": args.max_iter,
            "distribution": spec.to_dict() if spec else None, "members": members}
    out.json("surrogates.json", meta)


def cmd_synth(args, seed, out: RunWriter) -> None:
    rng = job_rng(seed, 0)
    try:
        if args.kind == "fgn":
            series = generate_fgn(FgnSpec(args.H, args.length), rng)
            values = np.abs(series.values) if args.abs else series.values
            meta = {"kind": "fgn", "H": args.H, "L": args.length, "abs": args.abs,
                    **series.seed_provenance}
        else:
            series, tau = binomial_cascade(CascadeSpec(args.p, args.depth, args.randomized), rng)
            values = series.values
            meta = {"kind": "cascade", "p": args.p, "depth": args.depth,
                    "randomized": args.randomized,
                    "q": list(AnalysisConfig().q_grid), "tau_analytic": tau.tolist()}
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    meta["seed"] = seed
    out.csv("series.csv", [("value",)] + [(repr(float(x)),) for x in values])
    if _want(args, "json"):
        out.json("synth.json", meta)


def cmd_fse(args, seed, out: RunWriter) -> None:
    if args.input is not None:
        ref, _ = _load_input(args)
        pdf = DistributionSpec.empirical(ref)
    else:
        pdf = _dist_spec(args.dist, args.param, default=desk_pdf())
    if args.ensemble < 2:
        raise UsageError("--ensemble must be at least 2")
    H = tuple(sorted(set(args.H)))
    L = tuple(sorted(set(args.L)))
    if any(not 0 < h < 1 for h in H) or any(l < 64 for l in L):
        raise UsageError("--H values must lie in (0, 1) and --L values be at least 64")
    window = tuple(args.window) if args.window else rescale_window((L[0], L[-1]))
    cfg = _analysis_cfg(args, seed)
    table = fse_scan(pdf, H, L, ensemble=args.ensemble, seed=seed, cfg=cfg,
                     iaaft_max_iter=args.max_iter, scaling_window=window,
                     workers=args.workers)
    fit, fit_error = None, None
    try:
        fit = fit_linear_laws(table, fit_power_exponent(table, window, min_points=3),
                              exclude_H=(0.1,), window=window, min_H=3)
    except ValueError as exc:
        fit_error = str(exc)
        log.warning("scaling-law fit skipped: %s", exc)
    if _want(args, "json"):
        out.json("fse.json", {"schema": "mfcomp.fse/1", "table": table.to_dict(),
                              "fit": fit.to_dict() if fit else None, "fit_error": fit_error})
    if _want(args, "csv"):
        out.csv("fse_table.csv", table.csv_rows())
        if fit is not None:
            rows = [("H", "a", "a_stderr", "g_mean")]
            rows += [(repr(h), repr(a), repr(se), repr(fit.g_mean.get(h, float("nan"))))
                     for h, (a, se) in sorted(fit.a.items())]
            out.csv("fse_exponents.csv", rows)


def _load_fse_table(path: Path) -> FseTable:
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
        return FseTable.from_dict(d["table"] if "table" in d else d)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read FSE table {path}: {exc}") from exc


def _component_rows(report) -> list[tuple]:
    rows = [("component", "mean", "std", "n")]
    for k, v in report.to_dict().items():
        if isinstance(v, dict) and "mean" in v and "std" in v:
            rows.append((k, repr(v["mean"]), repr(v["std"]), str(v["n"])))
    return rows


def cmd_decompose(args, seed, out: RunWriter) -> None:
    s, returns = _load_input(args)
    if args.ensemble < 2:
        raise UsageError("--ensemble must be at least 2")
    table = _load_fse_table(args.fse_table) if args.fse_table else None
    cfg = _analysis_cfg(args, seed)
    report = decompose(s, cfg, ensemble=args.ensemble, seed=seed, returns=returns,
                       iaaft_max_iter=args.max_iter, fse_table=table, workers=args.workers)
    for f in report.failures:
        log.warning("leg failure: %s", f)
    if _want(args, "json"):
        out.json("report.json", report.to_dict())
    if _want(args, "csv"):
        out.csv("components.csv", _component_rows(report))


def cmd_sweep(args, seed, out: RunWriter) -> None:
    s, returns = _load_input(args)
    if args.ensemble < 2:
        raise UsageError("--ensemble must be at least 2")
    grid = tuple(args.grid) if args.grid else SWEEP_GRIDS[args.family]
    try:
        for g in grid:
            (DistributionSpec.student_abs(g) if args.family == "student"
             else DistributionSpec.weibull(g))
    except ValueError as exc:
        raise UsageError(f"bad --grid value: {exc}") from exc
    cfg = _analysis_cfg(args, seed)
    table = family_sweep(s, args.family, grid, cfg, ensemble=args.ensemble, seed=seed,
                         returns=returns, iaaft_max_iter=args.max_iter, workers=args.workers)
    if _want(args, "json"):
        out.json("sweep.json", table.to_dict())
    if _want(args, "csv"):
        out.csv("sweep.csv", table.csv_rows())
        out.csv("components.csv", _component_rows(table.reference))


COMMANDS = {
    "analyze": cmd_analyze,
    "surrogate": cmd_surrogate,
    "synth": cmd_synth,
    "fse-calibrate": cmd_fse,
    "decompose": cmd_decompose,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv
                        else logging.WARNING, format="mfcomp: %(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        seed, source = _resolve_seed(args)
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be at least 1")
        t0 = time.perf_counter()
        writer = RunWriter(args.out)
        COMMANDS[args.command](args, seed, writer)
        manifest = RunManifest(
            command=["mfcomp"] + argv, subcommand=args.command,
            config=_config_snapshot(args), seed=seed, seed_source=source,
            input=_input_info(args), duration_s=round(time.perf_counter() - t0, 6),
        )
        writer.finish(manifest)
    except UsageError as exc:
        return _emit_error("usage", str(exc), EXIT_ARGS)
    except AnalysisError as exc:
        return _emit_error("numeric", str(exc), EXIT_NUMERIC)
    except (SeriesError, InputError, UnicodeDecodeError, OSError) as exc:
        return _emit_error("input", str(exc), EXIT_INPUT)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        return _emit_error("numeric", str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        return _emit_error("usage", str(exc), EXIT_ARGS)
    return 0


if __name__ == "__main__":
    sys.exit(main())
