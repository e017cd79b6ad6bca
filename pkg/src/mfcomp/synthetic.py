"""Synthetic inputs: fractional Gaussian noise, binomial cascades, DFA Hurst."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .analysis import _ols, default_q_grid
from .series import Kind, Series, SeriesError

__all__ = [
    "CascadeSpec",
    "FgnSpec",
    "binomial_cascade",
    "cascade_tau",
    "estimate_hurst",
    "fgn_autocovariance",
    "generate_fgn",
]


@dataclass(frozen=True)
class FgnSpec:
    H: float
    L: int

    def __post_init__(self):
        if not 0 < self.H < 1:
            raise ValueError("H must lie in (0, 1)")
        if self.L < 64 or self.L & (self.L - 1):
            raise ValueError("L must be a power of 2 and at least 64")


@dataclass(frozen=True)
class CascadeSpec:
    p: float
    depth: int
    randomized: bool = False

    def __post_init__(self):
        if not 0 < self.p <= 0.5:
            raise ValueError("p must lie in (0, 0.5]")
        if not 0 <= self.depth <= 24:
            raise ValueError("depth must lie in [0, 24]")


def fgn_autocovariance(H: float, n: int) -> np.ndarray:
    """Unit-variance fGn autocovariance at lags 0..n-1."""
    k = np.arange(n, dtype=float)
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _spectral_fgn(H: float, n: int, rng: np.random.Generator) -> np.ndarray:
    freqs = np.fft.rfftfreq(n)[1:]
    amp = freqs ** (-(2 * H - 1) / 2)
    coef = np.zeros(n // 2 + 1, dtype=complex)
    coef[1:] = amp * (rng.standard_normal(amp.size) + 1j * rng.standard_normal(amp.size))
    x = np.fft.irfft(coef, n=n)
    return (x - x.mean()) / x.std()


def generate_fgn(spec: FgnSpec, rng: np.random.Generator,
                 allow_fallback: bool = True) -> Series:
    """Fractional Gaussian noise by circulant embedding (Davies-Harte).

    Falls back to spectral synthesis when the embedding has negative
    eigenvalues; the method used is recorded in ``seed_provenance``.
    """
    n = spec.L
    acov = fgn_autocovariance(spec.H, n + 1)
    row = np.concatenate((acov, acov[-2:0:-1]))
    lam = np.fft.fft(row).real
    size = row.size
    method = "circulant"
    if lam.min() < -1e-10 * lam.max():
        if not allow_fallback:
            raise ValueError("circulant embedding is not nonnegative")
        warnings.warn("circulant embedding failed; using spectral synthesis")
        method = "spectral"
        x = _spectral_fgn(spec.H, n, rng)
    else:
        w = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        y = np.fft.fft(np.sqrt(np.clip(lam, 0, None) / size) * w)
        x = y.real[:n]
    return Series(x, kind=Kind.RETURN, label=f"fgn_H{spec.H:g}",
                  seed_provenance={"recipe": "fgn", "H": spec.H, "L": n, "method": method})


def binomial_cascade(spec: CascadeSpec, rng: np.random.Generator | None = None,
                     q_grid=None) -> tuple[Series, np.ndarray]:
    """Binomial measure of length ``2 ** depth`` and its exact tau(q).

    Each parent splits its mass as ``(p, 1-p)``. In the deterministic layout
    the lighter child is on the left at even levels and on the right at odd
    levels, which keeps the extreme boxes away from the series ends where
    gliding windows are one-sided. With ``spec.randomized`` the side is drawn
    per node from ``rng``.
    """
    p = spec.p
    mass = np.array([1.0])
    for level in range(spec.depth):
        if spec.randomized:
            if rng is None:
                raise ValueError("randomized cascade needs an rng")
            left = np.where(rng.random(mass.size) < 0.5, p, 1 - p)
        else:
            left = np.full(mass.size, p if level % 2 == 0 else 1 - p)
        mass = np.stack((mass * left, mass * (1 - left)), axis=1).ravel()
    q = np.asarray(default_q_grid() if q_grid is None else q_grid, dtype=float)
    series = Series(mass, kind=Kind.GENERIC_POSITIVE, label=f"cascade_p{p:g}",
                    seed_provenance={"recipe": "cascade", "p": p, "depth": spec.depth,
                                     "randomized": spec.randomized})
    return series, cascade_tau(p, q)


def cascade_tau(p: float, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return -np.log2(p**q + (1 - p) ** q)


def estimate_hurst(v, min_scale: int = 16, max_scale: int | None = None,
                   n_scales: int = 20) -> tuple[float, float]:
    """DFA-1 Hurst exponent and its OLS standard error.

    The profile of the mean-removed series is cut into non-overlapping
    windows, a line is removed from each, and the root-mean-square residual
    F(s) is regressed on s in log-log coordinates.
    """
    x = np.asarray(v.values if isinstance(v, Series) else v, dtype=float)
    n = x.size
    if n < 2**10:
        raise SeriesError("DFA needs at least 1024 points")
    max_scale = max_scale or n // 8
    scales = np.unique(np.round(np.geomspace(min_scale, max_scale, n_scales)).astype(int))
    profile = np.cumsum(x - x.mean())
    fluct = np.empty(scales.size)
    for i, s in enumerate(scales):
        k = n // s
        seg = profile[: k * s].reshape(k, s)
        t = np.arange(s, dtype=float)
        tc = t - t.mean()
        slope = (seg - seg.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)
        resid = seg - seg.mean(axis=1, keepdims=True) - slope[:, None] * tc[None, :]
        fluct[i] = np.sqrt(np.mean(resid**2))
    h, _, se = _ols(np.log(scales), np.log(fluct))
    return float(h[0]), float(se[0])
