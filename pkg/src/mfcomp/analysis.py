"""
Multifractal analysis with the randomized partition function.

For a non-negative series ``v`` of length N and an integer scale ``l``,
``m`` window starts are drawn uniformly (with replacement) from
``[0, N - l]`` and each window's share of the total mass is

    E_i(l) = sum(v[j_i : j_i + l]) / sum(v)

The partition function is ``M_q(l) = N / (m l) * sum_i E_i(l) ** q`` and the
scaling exponents ``tau(q)`` are the log-log slopes of ``M_q(l)`` against
``l / N``. The singularity spectrum follows from the Legendre transform
``alpha = tau'(q)``, ``f = q alpha - tau``.

Notes
-----
* One window sample is drawn per scale and reused for every ``q`` so the
  table is internally consistent.
* Sums of ``E_i ** q`` are accumulated in log space to avoid overflow for
  negative orders on small windows.
* ``M_0(l) = N / l`` exactly, hence ``tau(0) = -1`` for every input.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .series import Series

__all__ = [
    "AnalysisConfig",
    "AnalysisError",
    "PartitionTable",
    "SingularitySpectrum",
    "ZeroMeasureError",
    "analyze",
    "default_q_grid",
    "fit_tau",
    "interval_measures",
    "legendre",
    "partition_function",
    "singularity_width",
]

MIN_FIT_SCALES = 5


class AnalysisError(ValueError):
    """Numerical failure of the multifractal estimator."""


class ZeroMeasureError(AnalysisError):
    pass


def default_q_grid() -> tuple[float, ...]:
    return tuple(float(q) for q in np.linspace(-4.0, 4.0, 33))


@dataclass(frozen=True)
class AnalysisConfig:
    """Estimator settings.

    ``scale_grid`` overrides the default grid of ``n_scales`` log-spaced
    integers in ``[N * scale_range[0], N * scale_range[1]]``. The number of
    windows per scale is ``max(m_min, min(ceil(m_factor * N / l), N - l + 1))``
    unless ``exhaustive`` is set, in which case every start ``0 .. N - l`` is
    used once. ``fit_range`` is an inclusive ``(l_lo, l_hi)`` filter applied
    to the grid before regression.
    """

    q_grid: tuple[float, ...] = field(default_factory=default_q_grid)
    scale_grid: tuple[int, ...] | None = None
    scale_range: tuple[float, float] = (1 / 60, 1 / 3)
    n_scales: int = 30
    m_factor: float = 2.0
    m_min: int = 10
    exhaustive: bool = False
    fit_range: tuple[int, int] | None = None
    seed: int = 0

    def __post_init__(self):
        q = tuple(float(x) for x in self.q_grid)
        object.__setattr__(self, "q_grid", q)
        if self.scale_grid is not None:
            object.__setattr__(
                self, "scale_grid", tuple(sorted({int(s) for s in self.scale_grid}))
            )
        if len(q) < 3:
            raise ValueError("q_grid needs at least 3 orders")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("q_grid must be strictly increasing")
        if 0.0 not in q or 1.0 not in q:
            raise ValueError("q_grid must contain q=0 and q=1")
        lo, hi = self.scale_range
        if not 0 < lo < hi <= 1:
            raise ValueError("scale_range must satisfy 0 < lo < hi <= 1")
        if self.m_min < 1 or self.m_factor <= 0:
            raise ValueError("m_min and m_factor must be positive")

    def scales_for(self, n: int) -> np.ndarray:
        if self.scale_grid is not None:
            scales = np.asarray(self.scale_grid, dtype=np.int64)
        else:
            lo, hi = self.scale_range
            raw = np.geomspace(max(n * lo, 1.0), max(n * hi, 1.0), self.n_scales)
            scales = np.unique(np.round(raw).astype(np.int64))
        if scales.size == 0 or scales[0] < 1 or scales[-1] > n:
            raise AnalysisError(f"scales must lie in [1, {n}]")
        return scales

    def windows_for(self, n: int, scale: int) -> int:
        if self.exhaustive:
            return n - scale + 1
        m = min(math.ceil(self.m_factor * n / scale), n - scale + 1)
        return max(self.m_min, m)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisConfig":
        d = dict(d)
        for k in ("q_grid", "scale_grid", "scale_range", "fit_range"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True)
class PartitionTable:
    """``log_m[i, j] = ln M_{q_i}(l_j)``."""

    q: np.ndarray
    scales: np.ndarray
    log_m: np.ndarray
    n: int
    m_used: np.ndarray

    @property
    def entries(self) -> np.ndarray:
        return np.exp(self.log_m)

    def tidy_rows(self):
        """Rows ``(q, l, M_q, M_q ** (1/(q-1)))`` for plotting; the last is
        NaN at q=1."""
        for i, q in enumerate(self.q):
            for j, s in enumerate(self.scales):
                lm = self.log_m[i, j]
                gen = math.exp(lm / (q - 1)) if q != 1 else float("nan")
                yield float(q), int(s), math.exp(lm), gen


@dataclass
class SingularitySpectrum:
    q: np.ndarray
    tau: np.ndarray
    tau_stderr: np.ndarray
    alpha: np.ndarray
    f: np.ndarray
    delta_alpha: float
    alpha_min: float
    alpha_max: float
    warnings: list[str] = field(default_factory=list)
    config: dict | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "tau": self.tau.tolist(),
            "tau_stderr": self.tau_stderr.tolist(),
            "alpha": self.alpha.tolist(),
            "f": self.f.tolist(),
            "delta_alpha": self.delta_alpha,
            "alpha_min": self.alpha_min,
            "alpha_max": self.alpha_max,
            "warnings": list(self.warnings),
            "config": self.config,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SingularitySpectrum":
        arr = {k: np.asarray(d[k], dtype=float) for k in ("q", "tau", "tau_stderr", "alpha", "f")}
        return cls(
            **arr,
            delta_alpha=float(d["delta_alpha"]),
            alpha_min=float(d["alpha_min"]),
            alpha_max=float(d["alpha_max"]),
            warnings=list(d.get("warnings", [])),
            config=d.get("config"),
            seed=d.get("seed"),
        )

    def csv_rows(self):
        yield ("q", "tau", "alpha", "f")
        for row in zip(self.q, self.tau, self.alpha, self.f):
            yield tuple(repr(float(x)) for x in row)


def _values(v) -> np.ndarray:
    s = v if isinstance(v, Series) else Series(v)
    s.require_analyzable()
    return s.values


def _window_sums(cs: np.ndarray, scale: int, starts: np.ndarray) -> np.ndarray:
    return cs[starts + scale] - cs[starts]


def interval_measures(v, scale: int, m: int, rng: np.random.Generator | None = None,
                      exhaustive: bool = False) -> np.ndarray:
    """Normalized masses of ``m`` random windows of length ``scale``.

    With ``exhaustive=True`` every start is used once and ``m`` is ignored.
    """
    x = _values(v)
    n = x.size
    if not 1 <= scale <= n:
        raise AnalysisError(f"scale {scale} outside [1, {n}]")
    cs = np.concatenate(([0.0], np.cumsum(x)))
    if exhaustive:
        starts = np.arange(n - scale + 1)
    else:
        if m < 1:
            raise AnalysisError("need at least one window")
        rng = rng if rng is not None else np.random.default_rng()
        starts = rng.integers(0, n - scale + 1, size=m)
    return _window_sums(cs, scale, starts) / cs[-1]


def partition_function(v, cfg: AnalysisConfig | None = None) -> PartitionTable:
    cfg = cfg or AnalysisConfig()
    x = _values(v)
    n = x.size
    scales = cfg.scales_for(n)
    q = np.asarray(cfg.q_grid)
    cs = np.concatenate(([0.0], np.cumsum(x)))
    total = cs[-1]
    rng = np.random.default_rng(cfg.seed)
    has_negative = bool(np.any(q < 0))

    log_m = np.empty((q.size, scales.size))
    m_used = np.empty(scales.size, dtype=np.int64)
    for j, scale in enumerate(scales):
        m = cfg.windows_for(n, int(scale))
        if cfg.exhaustive:
            starts = np.arange(n - scale + 1)
        else:
            starts = rng.integers(0, n - scale + 1, size=m)
        e = _window_sums(cs, int(scale), starts) / total
        m_used[j] = e.size
        with np.errstate(divide="ignore"):
            log_e = np.log(e)
        if not np.all(np.isfinite(log_e)):
            if has_negative:
                raise ZeroMeasureError(f"zero-measure interval at negative order (scale {scale})")
            if not np.any(np.isfinite(log_e)):
                raise ZeroMeasureError(f"every sampled interval is empty at scale {scale}")
        # 0 ** 0 == 1 and 0 ** q == 0 for q > 0
        with np.errstate(invalid="ignore"):
            qlog = np.where(q[None, :] == 0, 0.0, log_e[:, None] * q[None, :])
        log_m[:, j] = math.log(n / (e.size * scale)) + logsumexp(qlog, axis=0)
    # M_0 is exact by construction; keep it free of accumulated round-off
    log_m[q == 0, :] = np.log(n / scales.astype(float))
    return PartitionTable(q=q, scales=scales, log_m=log_m, n=n, m_used=m_used)


def _ols(x: np.ndarray, y: np.ndarray):
    """Slopes, intercepts and slope standard errors of y[k] ~ x per row k."""
    x = np.asarray(x, dtype=float)
    y = np.atleast_2d(y)
    k = x.size
    xc = x - x.mean()
    sxx = xc @ xc
    slope = (y - y.mean(axis=1, keepdims=True)) @ xc / sxx
    intercept = y.mean(axis=1) - slope * x.mean()
    resid = y - (intercept[:, None] + slope[:, None] * x[None, :])
    dof = k - 2
    if dof > 0:
        stderr = np.sqrt((resid**2).sum(axis=1) / dof / sxx)
    else:
        stderr = np.full(slope.shape, np.nan)
    return slope, intercept, stderr


def fit_tau(table: PartitionTable, fit_range: tuple[int, int] | None = None):
    """OLS slope of ln M_q(l) against ln(l/N) for each q.

    Returns ``(tau, stderr)``.
    """
    scales = table.scales
    mask = np.ones(scales.size, dtype=bool)
    if fit_range is not None:
        mask = (scales >= fit_range[0]) & (scales <= fit_range[1])
    if mask.sum() < MIN_FIT_SCALES:
        raise AnalysisError(
            f"only {int(mask.sum())} scales in fit range; need {MIN_FIT_SCALES}"
        )
    x = np.log(scales[mask] / table.n)
    tau, _, stderr = _ols(x, table.log_m[:, mask])
    tau[table.q == 0] = -1.0
    stderr[table.q == 0] = 0.0
    return tau, stderr


def legendre(q: Sequence[float], tau: Sequence[float], tau_stderr=None,
             tol: float = 1e-6) -> SingularitySpectrum:
    q = np.asarray(q, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if q.size < 3:
        raise AnalysisError("need at least 3 orders for the Legendre transform")
    alpha = np.gradient(tau, q)
    f = q * alpha - tau
    warnings = []
    rises = np.diff(alpha)
    if np.any(rises > tol):
        worst = float(q[1:][rises.argmax()])
        warnings.append(f"alpha(q) increases near q={worst:g}; tau is not concave there")
    amax, amin = float(alpha.max()), float(alpha.min())
    se = np.zeros_like(tau) if tau_stderr is None else np.asarray(tau_stderr, dtype=float)
    return SingularitySpectrum(
        q=q, tau=tau, tau_stderr=se, alpha=alpha, f=f,
        delta_alpha=amax - amin, alpha_min=amin, alpha_max=amax, warnings=warnings,
    )


def singularity_width(spec: SingularitySpectrum) -> float:
    return max(spec.alpha_max - spec.alpha_min, 0.0)


def analyze(v, cfg: AnalysisConfig | None = None) -> SingularitySpectrum:
    """Partition function, exponent fit and Legendre transform in one call."""
    cfg = cfg or AnalysisConfig()
    table = partition_function(v, cfg)
    tau, se = fit_tau(table, cfg.fit_range)
    spec = legendre(table.q, tau, se)
    spec.config = cfg.to_dict()
    spec.seed = cfg.seed
    return spec


def delta_alpha(v, cfg: AnalysisConfig | None = None) -> float:
    return analyze(v, cfg).delta_alpha
