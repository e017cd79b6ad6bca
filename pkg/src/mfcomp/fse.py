"""
Finite-size-effect calibration.

Surrogates with a prescribed marginal and purely linear long memory (IAAFT
toward fractional Gaussian noise amplitudes) are analyzed over a grid of
Hurst indexes H and lengths L. The mean singularity width then follows

    delta_alpha(H, L) ~ g(H) * L ** a(H)

and the fitted laws ``a = 2H - 2`` and ``ln <g> = 10 - 10 H`` give the
closed form ``exp(10 (1 - H)) * L ** (-2 (1 - H))``, which is only reliable
for moderate L. The empirical table is the authoritative predictor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .analysis import AnalysisConfig, AnalysisError, _ols, analyze
from .seeding import job_rng, run_jobs
from .surrogates import DistributionSpec, Family, iaaft, sample_distribution
from .synthetic import FgnSpec, generate_fgn

__all__ = [
    "DESK_H",
    "DESK_L",
    "FseFit",
    "FsePrediction",
    "FseRow",
    "FseTable",
    "REFERENCE_WINDOW",
    "closed_form",
    "desk_pdf",
    "fit_linear_laws",
    "fit_power_exponent",
    "fse_predict",
    "fse_scan",
    "rescale_window",
]

log = logging.getLogger(__name__)

REFERENCE_WINDOW = (1000.0, 138950.0)
REFERENCE_SCAN = (1e3, 1e7)
DESK_H = (0.2, 0.35, 0.5, 0.65, 0.8)
DESK_L = tuple(2**k for k in range(10, 18))
FULL_H = tuple(round(0.1 * k, 1) for k in range(1, 10))
FULL_L = tuple(int(round(10 ** (3 + 0.25 * k))) for k in range(17))


@dataclass(frozen=True)
class FseRow:
    H: float
    L: int
    mean: float
    std: float
    n: int
    failed: int = 0


@dataclass
class FseTable:
    rows: list[FseRow]
    pdf_spec: dict
    scaling_window: tuple[float, float] = REFERENCE_WINDOW
    meta: dict = field(default_factory=dict)

    @property
    def H_values(self) -> np.ndarray:
        return np.array(sorted({r.H for r in self.rows}))

    @property
    def L_values(self) -> np.ndarray:
        return np.array(sorted({r.L for r in self.rows}))

    def grid(self) -> np.ndarray:
        """Mean widths as an (H, L) matrix, NaN where a cell is missing."""
        hs, ls = list(self.H_values), list(self.L_values)
        out = np.full((len(hs), len(ls)), np.nan)
        for r in self.rows:
            out[hs.index(r.H), ls.index(r.L)] = r.mean
        return out

    def for_H(self, H: float) -> list[FseRow]:
        return sorted((r for r in self.rows if r.H == H), key=lambda r: r.L)

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "pdf_spec": self.pdf_spec,
            "scaling_window": list(self.scaling_window),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FseTable":
        return cls(
            rows=[FseRow(**r) for r in d["rows"]],
            pdf_spec=d["pdf_spec"],
            scaling_window=tuple(d["scaling_window"]),
            meta=d.get("meta", {}),
        )

    def csv_rows(self):
        yield ("H", "L", "mean", "std")
        for r in self.rows:
            yield (repr(r.H), str(r.L), repr(r.mean), repr(r.std))


@dataclass
class FseFit:
    a: dict[float, tuple[float, float]]
    a_slope: float
    a_intercept: float
    a_slope_stderr: float
    g_mean: dict[float, float]
    lng_slope: float
    lng_intercept: float
    excluded_H: tuple[float, ...] = ()
    window: tuple[float, float] = REFERENCE_WINDOW

    def to_dict(self) -> dict:
        return {
            "a": {repr(h): list(v) for h, v in self.a.items()},
            "a_slope": self.a_slope,
            "a_intercept": self.a_intercept,
            "a_slope_stderr": self.a_slope_stderr,
            "g_mean": {repr(h): g for h, g in self.g_mean.items()},
            "lng_slope": self.lng_slope,
            "lng_intercept": self.lng_intercept,
            "excluded_H": list(self.excluded_H),
            "window": list(self.window),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FseFit":
        return cls(
            a={float(h): tuple(v) for h, v in d["a"].items()},
            a_slope=d["a_slope"], a_intercept=d["a_intercept"],
            a_slope_stderr=d["a_slope_stderr"],
            g_mean={float(h): g for h, g in d["g_mean"].items()},
            lng_slope=d["lng_slope"], lng_intercept=d["lng_intercept"],
            excluded_H=tuple(d.get("excluded_H", ())), window=tuple(d["window"]),
        )


@dataclass(frozen=True)
class FsePrediction:
    value: float
    path: str


def rescale_window(L_range: tuple[float, float], window=REFERENCE_WINDOW,
                   scan=REFERENCE_SCAN) -> tuple[float, float]:
    """Map a fit window onto another scan range, proportionally in log L."""
    lo_frac = math.log(window[0] / scan[0]) / math.log(scan[1] / scan[0])
    hi_frac = math.log(window[1] / scan[0]) / math.log(scan[1] / scan[0])
    span = math.log(L_range[1] / L_range[0])
    return (L_range[0] * math.exp(lo_frac * span), L_range[0] * math.exp(hi_frac * span))


def closed_form(H: float, L: float, slope: float = -10.0, intercept: float = 10.0) -> float:
    """``exp(intercept + slope H) * L ** (2H - 2)``; the defaults give the
    reference law ``ln <g> = 10 - 10 H``."""
    return math.exp(intercept + slope * H) * L ** (2 * H - 2)


def _member_values(pdf: DistributionSpec, L: int, rng) -> np.ndarray:
    return sample_distribution(pdf, L, rng).values


def _fse_member(job) -> float | None:
    seed, ih, il, k, H, L, pdf, cfg_dict, max_iter = job
    rng = job_rng(seed, ih, il, k)
    values = _member_values(pdf, L, rng)
    n2 = 1 << max(6, (L - 1).bit_length())
    target = np.abs(np.fft.rfft(generate_fgn(FgnSpec(H, n2), rng).values[:L]))
    surrogate, _ = iaaft(values, target, rng, max_iter=max_iter)
    cfg = AnalysisConfig.from_dict(cfg_dict | {"seed": int(rng.integers(2**62))})
    try:
        return analyze(surrogate, cfg).delta_alpha
    except AnalysisError as exc:
        log.warning("FSE member H=%s L=%s #%d failed: %s", H, L, k, exc)
        return None


def fse_scan(pdf: DistributionSpec, H_list: Sequence[float] = DESK_H,
             L_list: Sequence[int] = DESK_L, ensemble: int = 20, seed: int = 0,
             cfg: AnalysisConfig | None = None, iaaft_max_iter: int = 50,
             scaling_window=REFERENCE_WINDOW, workers: int | None = None) -> FseTable:
    """Mean and standard deviation of the singularity width per (H, L).

    Each member draws ``L`` values from ``pdf``, imposes the Fourier
    amplitudes of an fGn realization at ``H`` by IAAFT, and is analyzed over
    the scale range of ``cfg`` (default ``[L/60, L/3]``). Members whose
    analysis fails are excluded and counted.
    """
    cfg = cfg or AnalysisConfig()
    if cfg.scale_grid is not None:
        raise ValueError("the scan needs a length-relative scale grid")
    cfg_dict = cfg.to_dict()
    jobs = [
        (seed, ih, il, k, float(H), int(L), pdf, cfg_dict, iaaft_max_iter)
        for ih, H in enumerate(H_list)
        for il, L in enumerate(L_list)
        for k in range(ensemble)
    ]
    results = run_jobs(_fse_member, jobs, workers)
    rows = []
    pos = 0
    for H in H_list:
        for L in L_list:
            chunk = results[pos:pos + ensemble]
            pos += ensemble
            ok = np.array([x for x in chunk if x is not None])
            rows.append(FseRow(
                H=float(H), L=int(L),
                mean=float(ok.mean()) if ok.size else float("nan"),
                std=float(ok.std(ddof=1)) if ok.size > 1 else float("nan"),
                n=int(ok.size), failed=len(chunk) - int(ok.size),
            ))
    meta = {"seed": seed, "ensemble": ensemble, "iaaft_max_iter": iaaft_max_iter,
            "config": cfg_dict}
    return FseTable(rows=rows, pdf_spec=pdf.to_dict(), scaling_window=tuple(scaling_window),
                    meta=meta)


def _in_window(L, window) -> bool:
    return window[0] <= L <= window[1]


def fit_power_exponent(table: FseTable, window=None, min_points: int = 4
                       ) -> dict[float, tuple[float, float]]:
    """Per-H OLS slope of ln(mean width) against ln L inside ``window``.

    Returns ``{H: (a, stderr)}``.
    """
    window = tuple(window or table.scaling_window)
    out = {}
    for H in table.H_values:
        pts = [(r.L, r.mean) for r in table.for_H(H)
               if _in_window(r.L, window) and r.mean > 0 and math.isfinite(r.mean)]
        if len(pts) < min_points:
            raise ValueError(f"H={H}: only {len(pts)} usable lengths in window {window}")
        L, d = np.array(pts, dtype=float).T
        slope, _, se = _ols(np.log(L), np.log(d))
        out[float(H)] = (float(slope[0]), float(se[0]))
    return out


def fit_linear_laws(table: FseTable, a: dict[float, tuple[float, float]] | None = None,
                    exclude_H: Sequence[float] = (0.1,), window=None,
                    min_H: int = 4) -> FseFit:
    """Linear laws for ``a(H)`` and ``ln <g(H, L)>``.

    ``g = width * L ** -(2H - 2)`` uses the imposed exponent ``2H - 2`` and is
    averaged over the lengths inside ``window``.
    """
    window = tuple(window or table.scaling_window)
    a = a if a is not None else fit_power_exponent(table, window)
    hs = np.array([h for h in sorted(a) if not any(abs(h - x) < 1e-9 for x in exclude_H)])
    if hs.size < min_H:
        raise ValueError(f"need at least {min_H} Hurst values, got {hs.size}")
    slope, intercept, se = _ols(hs, np.array([a[h][0] for h in hs]))

    g_mean = {}
    for H in table.H_values:
        g = [r.mean * r.L ** (2 - 2 * H) for r in table.for_H(H)
             if _in_window(r.L, window) and r.mean > 0]
        if g:
            g_mean[float(H)] = float(np.mean(g))
    gh = np.array(sorted(g_mean))
    if gh.size < min_H:
        raise ValueError(f"need at least {min_H} Hurst values with g data")
    gs, gi, _ = _ols(gh, np.log([g_mean[h] for h in gh]))
    return FseFit(a=dict(a), a_slope=float(slope[0]), a_intercept=float(intercept[0]),
                  a_slope_stderr=float(se[0]), g_mean=g_mean, lng_slope=float(gs[0]),
                  lng_intercept=float(gi[0]), excluded_H=tuple(exclude_H), window=window)


def _bilinear(table: FseTable, H: float, L: float) -> float | None:
    hs, ls = table.H_values, table.L_values
    if hs.size < 2 or ls.size < 2:
        return None
    if not (hs[0] <= H <= hs[-1] and ls[0] <= L <= ls[-1]):
        return None
    grid = table.grid()
    if np.isnan(grid).any():
        return None
    x = np.log(ls)
    lx = math.log(L)
    i = int(np.clip(np.searchsorted(hs, H, side="right") - 1, 0, hs.size - 2))
    j = int(np.clip(np.searchsorted(x, lx, side="right") - 1, 0, ls.size - 2))
    th = (H - hs[i]) / (hs[i + 1] - hs[i])
    tl = (lx - x[j]) / (x[j + 1] - x[j])
    g = grid
    return float((1 - th) * (1 - tl) * g[i, j] + th * (1 - tl) * g[i + 1, j]
                 + (1 - th) * tl * g[i, j + 1] + th * tl * g[i + 1, j + 1])


def fse_predict(H: float, L: float, table: FseTable | None = None, fit: FseFit | None = None,
                allow_fallback: bool = True) -> FsePrediction:
    """Expected finite-size width at (H, L).

    Interpolates the table bilinearly in (H, ln L); outside the table, or
    without one, evaluates the closed form (with the fitted constants when
    ``fit`` is given).
    """
    if not 0 < H < 1:
        raise ValueError("H must lie in (0, 1)")
    if table is not None:
        val = _bilinear(table, H, L)
        if val is not None:
            return FsePrediction(val, "table")
        if not allow_fallback:
            raise ValueError(f"(H={H}, L={L}) outside the calibrated table")
    if fit is not None:
        return FsePrediction(closed_form(H, L, fit.lng_slope, fit.lng_intercept),
                             "closed_form_fitted")
    return FsePrediction(closed_form(H, L), "closed_form")


def desk_pdf() -> DistributionSpec:
    return DistributionSpec(Family.WEIBULL, beta=1.0)
