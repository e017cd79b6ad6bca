"""
Decomposition of the apparent singularity width.

    delta_alpha = fse + pdf + nl

* ``fse``: mean width of linear-memory (IAAFT) surrogates of the series.
* ``eff = delta_alpha - fse``: effective width.
* A Gaussian reference chain rank-remaps the series onto |N(mu, sigma)|
  draws, keeping its temporal ordering; its effective width ``norm_eff`` is
  taken as pure nonlinearity, so ``nl = norm_eff`` and ``pdf = eff - nl``.

Standard deviations of derived components combine the constituent ensemble
standard deviations in quadrature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import AnalysisConfig, AnalysisError, analyze
from .seeding import LEG_KEYS, job_rng, job_seed, run_jobs
from .series import Kind, Series, SeriesError
from .surrogates import (
    DistributionSpec,
    Family,
    linear_memory_surrogate,
    rank_remap,
    shuffle,
)

__all__ = [
    "ComponentReport",
    "Estimate",
    "SweepPoint",
    "SweepTable",
    "decompose",
    "family_sweep",
    "gaussian_reference",
]

log = logging.getLogger(__name__)

REPORT_SCHEMA = "mfcomp.component_report/1"
SWEEP_SCHEMA = "mfcomp.sweep_table/1"


@dataclass(frozen=True)
class Estimate:
    mean: float
    std: float = 0.0
    n: int = 1

    def __sub__(self, other: "Estimate") -> "Estimate":
        return Estimate(self.mean - other.mean, math.hypot(self.std, other.std),
                        min(self.n, other.n))

    @classmethod
    def of(cls, values) -> "Estimate":
        arr = np.asarray([v for v in values if v is not None], dtype=float)
        if arr.size == 0:
            return cls(float("nan"), float("nan"), 0)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return cls(float(arr.mean()), std, int(arr.size))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "Estimate":
        return cls(float(d["mean"]), float(d["std"]), int(d["n"]))


_REPORT_FIELDS = (
    "delta_alpha", "delta_alpha_fse", "delta_alpha_sf", "delta_alpha_eff",
    "delta_alpha_norm", "delta_alpha_norm_fse", "delta_alpha_norm_sf",
    "delta_alpha_norm_eff", "delta_alpha_pdf", "delta_alpha_nl",
)


@dataclass
class ComponentReport:
    delta_alpha: Estimate
    delta_alpha_fse: Estimate
    delta_alpha_sf: Estimate
    delta_alpha_eff: Estimate
    delta_alpha_norm: Estimate
    delta_alpha_norm_fse: Estimate
    delta_alpha_norm_sf: Estimate
    delta_alpha_norm_eff: Estimate
    delta_alpha_pdf: Estimate
    delta_alpha_nl: Estimate
    ensemble_size: int
    seed: int
    config: dict
    gaussian: dict
    iaaft_max_iter: int = 1000
    failures: list[str] = field(default_factory=list)
    fse_crosscheck: dict | None = None

    def accounting_residual(self) -> float:
        total = self.delta_alpha_fse.mean + self.delta_alpha_pdf.mean + self.delta_alpha_nl.mean
        return total - self.delta_alpha.mean

    def to_dict(self) -> dict:
        d = {"schema": REPORT_SCHEMA}
        d.update({k: getattr(self, k).to_dict() for k in _REPORT_FIELDS})
        d.update(ensemble_size=self.ensemble_size, seed=self.seed, config=self.config,
                 gaussian=self.gaussian, iaaft_max_iter=self.iaaft_max_iter,
                 failures=list(self.failures), fse_crosscheck=self.fse_crosscheck)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentReport":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        est = {k: Estimate.from_dict(d[k]) for k in _REPORT_FIELDS}
        return cls(**est, ensemble_size=d["ensemble_size"], seed=d["seed"],
                   config=d["config"], gaussian=d["gaussian"],
                   iaaft_max_iter=d.get("iaaft_max_iter", 1000),
                   failures=list(d.get("failures", [])), fse_crosscheck=d.get("fse_crosscheck"))


@dataclass
class SweepPoint:
    param: float
    delta_alpha: Estimate
    delta_alpha_fse: Estimate
    delta_alpha_sf: Estimate
    delta_alpha_eff: Estimate
    delta_alpha_pdf: Estimate

    def to_dict(self) -> dict:
        d = {"param": self.param}
        for k in ("delta_alpha", "delta_alpha_fse", "delta_alpha_sf", "delta_alpha_eff",
                  "delta_alpha_pdf"):
            d[k] = getattr(self, k).to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPoint":
        return cls(param=float(d["param"]), **{
            k: Estimate.from_dict(v) for k, v in d.items() if k != "param"})


@dataclass
class SweepTable:
    family: str
    points: list[SweepPoint]
    reference: ComponentReport
    ensemble_size: int
    seed: int
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SWEEP_SCHEMA,
            "family": self.family,
            "points": [p.to_dict() for p in self.points],
            "reference": self.reference.to_dict(),
            "ensemble_size": self.ensemble_size,
            "seed": self.seed,
            "failures": list(self.failures),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepTable":
        if d.get("schema") != SWEEP_SCHEMA:
            raise ValueError(f"unsupported sweep schema {d.get('schema')!r}")
        return cls(family=d["family"], points=[SweepPoint.from_dict(p) for p in d["points"]],
                   reference=ComponentReport.from_dict(d["reference"]),
                   ensemble_size=d["ensemble_size"], seed=d["seed"],
                   failures=list(d.get("failures", [])))

    def csv_rows(self):
        names = ("delta_alpha", "delta_alpha_fse", "delta_alpha_sf", "delta_alpha_eff",
                 "delta_alpha_pdf")
        yield ("param",) + tuple(f"{n}_{s}" for n in names for s in ("mean", "std"))
        for p in self.points:
            row = [repr(p.param)]
            for n in names:
                e = getattr(p, n)
                row += [repr(e.mean), repr(e.std)]
            yield tuple(row)


def gaussian_reference(v: Series, returns: Series | None = None) -> tuple[float, float, str]:
    """(mu, sigma, source) for the Gaussian reference distribution.

    Uses the sample mean and standard deviation of the returns when given;
    otherwise mu = 0 and sigma = RMS of the volatility, the standard deviation
    of zero-mean returns with those absolute values.
    """
    if returns is not None and len(returns) > 1:
        r = returns.values
        return float(r.mean()), float(r.std(ddof=1)), "returns"
    x = v.values
    return 0.0, float(np.sqrt(np.mean(x**2))), "volatility_rms"


def _analysis_cfg(cfg_dict: dict, rng: np.random.Generator) -> AnalysisConfig:
    return AnalysisConfig.from_dict(cfg_dict | {"seed": int(rng.integers(2**62))})


def _width(series, cfg_dict, rng):
    try:
        return analyze(series, _analysis_cfg(cfg_dict, rng)).delta_alpha, None
    except (AnalysisError, SeriesError) as exc:
        return None, str(exc)


def _surrogate_job(job):
    """One member of an LM or SF leg applied directly to the input series."""
    values, leg, seed, k, cfg_dict, max_iter = job
    rng = job_rng(seed, LEG_KEYS[leg], k)
    s = Series(values)
    sur = linear_memory_surrogate(s, rng, max_iter=max_iter) if leg == "lm" else shuffle(s, rng)
    return _width(sur, cfg_dict, rng)


def _chain_job(job):
    """Remap onto ``dist`` and measure the remapped, LM and SF widths."""
    values, dist, leg, seed, k, cfg_dict, max_iter = job
    rng = job_rng(seed, LEG_KEYS[leg], k)
    remapped = rank_remap(Series(values), dist, rng)
    lm = linear_memory_surrogate(remapped, rng, max_iter=max_iter)
    sf = shuffle(remapped, rng)
    return tuple(_width(x, cfg_dict, rng) for x in (remapped, lm, sf))


def _collect(results, label, failures):
    vals = []
    for k, (val, err) in enumerate(results):
        if err is not None:
            failures.append(f"{label}[{k}]: {err}")
        vals.append(val)
    return Estimate.of(vals)


def _chain(values, dist, leg, seed, ensemble, cfg_dict, max_iter, workers, failures, label):
    jobs = [(values, dist, leg, seed, k, cfg_dict, max_iter) for k in range(ensemble)]
    res = run_jobs(_chain_job, jobs, workers)
    return tuple(_collect([r[i] for r in res], f"{label}{suffix}", failures)
                 for i, suffix in enumerate(("", "_lm", "_sf")))


def _as_volatility(v) -> Series:
    s = v if isinstance(v, Series) else Series(v, kind=Kind.VOLATILITY)
    s.require_analyzable()
    return s


def decompose(v, cfg: AnalysisConfig | None = None, ensemble: int = 100, seed: int = 0,
              returns: Series | None = None, iaaft_max_iter: int = 1000,
              fse_table=None, workers: int | None = None) -> ComponentReport:
    """Run the full component decomposition on a volatility-like series.

    Legs that fail for some members are reported in ``failures`` and the
    remaining members are used; a leg with no surviving member yields NaN.
    """
    s = _as_volatility(v)
    cfg = cfg or AnalysisConfig()
    cfg_dict = cfg.to_dict()
    failures: list[str] = []
    values = s.values

    try:
        base = Estimate(analyze(s, cfg).delta_alpha, 0.0, 1)
    except AnalysisError as exc:
        failures.append(f"original: {exc}")
        base = Estimate(float("nan"), float("nan"), 0)

    legs = {}
    for leg in ("lm", "sf"):
        jobs = [(values, leg, seed, k, cfg_dict, iaaft_max_iter) for k in range(ensemble)]
        legs[leg] = _collect(run_jobs(_surrogate_job, jobs, workers), leg, failures)

    mu, sigma, source = gaussian_reference(s, returns)
    gauss = DistributionSpec(Family.GAUSSIAN_ABS, mu=mu, sigma=sigma)
    norm, norm_fse, norm_sf = _chain(values, gauss, "norm", seed, ensemble, cfg_dict,
                                     iaaft_max_iter, workers, failures, "norm")

    eff = base - legs["lm"]
    norm_eff = norm - norm_fse
    pdf = eff - norm_eff
    report = ComponentReport(
        delta_alpha=base, delta_alpha_fse=legs["lm"], delta_alpha_sf=legs["sf"],
        delta_alpha_eff=eff, delta_alpha_norm=norm, delta_alpha_norm_fse=norm_fse,
        delta_alpha_norm_sf=norm_sf, delta_alpha_norm_eff=norm_eff,
        delta_alpha_pdf=pdf, delta_alpha_nl=norm_eff,
        ensemble_size=ensemble, seed=seed, config=cfg_dict,
        gaussian={"mu": mu, "sigma": sigma, "source": source},
        iaaft_max_iter=iaaft_max_iter, failures=failures,
    )
    if fse_table is not None:
        report.fse_crosscheck = _fse_crosscheck(s, fse_table)
    return report


def _fse_crosscheck(s: Series, table) -> dict:
    from .fse import fse_predict
    from .synthetic import estimate_hurst

    try:
        H, se = estimate_hurst(s)
    except SeriesError as exc:
        return {"error": str(exc)}
    H = min(max(H, 0.01), 0.99)
    pred = fse_predict(H, len(s), table)
    return {"H": H, "H_stderr": se, "L": len(s), "value": pred.value, "path": pred.path}


def _family_spec(family: str, param: float) -> DistributionSpec:
    if family == "student":
        return DistributionSpec(Family.STUDENT_ABS, gamma=float(param))
    if family == "weibull":
        return DistributionSpec(Family.WEIBULL, beta=float(param))
    raise ValueError(f"unknown family {family!r}; expected 'student' or 'weibull'")


def family_sweep(v, family: str, grid: Sequence[float], cfg: AnalysisConfig | None = None,
                 ensemble: int = 100, seed: int = 0, returns: Series | None = None,
                 iaaft_max_iter: int = 1000, reference: ComponentReport | None = None,
                 workers: int | None = None) -> SweepTable:
    """Remap the series onto each member of a distribution family and
    decompose each remapped ensemble against the Gaussian reference chain."""
    s = _as_volatility(v)
    specs = [_family_spec(family, p) for p in grid]
    cfg = cfg or AnalysisConfig()
    if reference is None:
        reference = decompose(s, cfg, ensemble, seed, returns, iaaft_max_iter, workers=workers)
    norm_eff = reference.delta_alpha_norm_eff
    failures: list[str] = []
    points = []
    for i, (p, spec) in enumerate(zip(grid, specs)):
        # distinct seed subtree per grid point
        width, fse, sf = _chain(s.values, spec, "family", job_seed(seed, LEG_KEYS["family"], i), ensemble,
                                cfg.to_dict(), iaaft_max_iter, workers, failures,
                                f"{family}[{p:g}]")
        eff = width - fse
        points.append(SweepPoint(float(p), width, fse, sf, eff, eff - norm_eff))
    return SweepTable(family=family, points=points, reference=reference,
                      ensemble_size=ensemble, seed=seed, failures=failures)

