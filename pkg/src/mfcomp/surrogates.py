"""
Surrogate series: shuffles, IAAFT linear-memory surrogates, and rank
remapping onto prescribed distributions.

All operations take an explicit ``numpy.random.Generator`` and reproduce
bit-identical output for the same generator state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .series import Kind, Series, SeriesError

__all__ = [
    "DistributionSpec",
    "Family",
    "IaaftReport",
    "empirical_inverse_cdf_sample",
    "iaaft",
    "linear_memory_surrogate",
    "rank_remap",
    "sample_distribution",
    "shuffle",
    "spectrum_mismatch",
]


class Family(str, enum.Enum):
    EMPIRICAL = "empirical"
    GAUSSIAN_ABS = "gaussian_abs"
    STUDENT_ABS = "student_abs"
    WEIBULL = "weibull"


@dataclass(frozen=True)
class DistributionSpec:
    """Target marginal for surrogates.

    ``gaussian_abs`` is |N(mu, sigma)|, ``student_abs`` is the absolute value
    of a location-0, unit-scale Student t with ``gamma`` degrees of freedom,
    ``weibull`` has density ``beta x**(beta-1) exp(-x**beta)``.
    """

    family: Family
    mu: float = 0.0
    sigma: float = 1.0
    gamma: float | None = None
    beta: float | None = None
    reference: Series | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam is Family.GAUSSIAN_ABS and not self.sigma > 0:
            raise ValueError("gaussian_abs needs sigma > 0")
        if fam is Family.STUDENT_ABS and not (self.gamma is not None and self.gamma > 2):
            raise ValueError("student_abs needs gamma > 2")
        if fam is Family.WEIBULL and not (self.beta is not None and 0 < self.beta <= 1):
            raise ValueError("weibull needs 0 < beta <= 1")
        if fam is Family.EMPIRICAL and self.reference is None:
            raise ValueError("empirical family needs a reference series")

    @classmethod
    def gaussian_abs(cls, mu: float = 0.0, sigma: float = 1.0) -> "DistributionSpec":
        return cls(Family.GAUSSIAN_ABS, mu=mu, sigma=sigma)

    @classmethod
    def student_abs(cls, gamma: float) -> "DistributionSpec":
        return cls(Family.STUDENT_ABS, gamma=gamma)

    @classmethod
    def weibull(cls, beta: float) -> "DistributionSpec":
        return cls(Family.WEIBULL, beta=beta)

    @classmethod
    def empirical(cls, reference) -> "DistributionSpec":
        ref = reference if isinstance(reference, Series) else Series(reference)
        return cls(Family.EMPIRICAL, reference=ref)

    def to_dict(self) -> dict:
        d = {"family": self.family.value}
        if self.family is Family.GAUSSIAN_ABS:
            d.update(mu=self.mu, sigma=self.sigma)
        elif self.family is Family.STUDENT_ABS:
            d["gamma"] = self.gamma
        elif self.family is Family.WEIBULL:
            d["beta"] = self.beta
        else:
            d["reference_label"] = self.reference.label
            d["reference_length"] = len(self.reference)
        return d


@dataclass(frozen=True)
class IaaftReport:
    iterations: int
    spectrum_mismatch: float
    converged: bool

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "spectrum_mismatch": self.spectrum_mismatch,
                "converged": self.converged}


def _series(v) -> Series:
    if isinstance(v, Series):
        return v
    arr = np.asarray(v, dtype=float)
    kind = Kind.GENERIC_POSITIVE if arr.size == 0 or arr.min() >= 0 else Kind.RETURN
    return Series(arr, kind=kind)


def shuffle(v, rng: np.random.Generator) -> Series:
    s = _series(v)
    return s.with_values(rng.permutation(s.values), label=f"{s.label}_sf")


def empirical_inverse_cdf_sample(reference, L: int, rng: np.random.Generator) -> Series:
    """Transformation-method sample of length ``L`` from the empirical CDF.

    Uniform draws are mapped affinely from ``[min x, max x]`` onto
    ``[min F, 1]`` before inversion, so no output exceeds the reference range.
    ``F`` is the right-continuous empirical CDF at the distinct reference
    values and is inverted by linear interpolation.
    """
    ref = _series(reference)
    uniq, counts = np.unique(ref.values, return_counts=True)
    if uniq.size < 2:
        raise SeriesError("reference needs at least 2 distinct values")
    cdf = np.cumsum(counts) / counts.sum()
    x = rng.random(L)
    span = x.max() - x.min()
    if span == 0:
        y = np.full(L, cdf[0])
    else:
        y = (x - x.min()) * (1 - cdf[0]) / span + cdf[0]
    z = np.interp(y, cdf, uniq)
    return ref.with_values(z, label=f"{ref.label}_icdf")


def sample_distribution(spec: DistributionSpec, L: int, rng: np.random.Generator) -> Series:
    fam = spec.family
    if fam is Family.GAUSSIAN_ABS:
        x = np.abs(rng.normal(spec.mu, spec.sigma, L))
    elif fam is Family.STUDENT_ABS:
        x = np.abs(rng.standard_t(spec.gamma, L))
    elif fam is Family.WEIBULL:
        x = rng.weibull(spec.beta, L)
    else:
        return empirical_inverse_cdf_sample(spec.reference, L, rng)
    return Series(x, kind=Kind.VOLATILITY, label=fam.value)


def _half_amplitudes(amplitude_target, n: int) -> np.ndarray:
    a = np.abs(np.asarray(amplitude_target, dtype=float))
    half = n // 2 + 1
    if a.size == n:
        return a[:half].copy()
    if a.size == half:
        return a.copy()
    raise ValueError(f"amplitude target has length {a.size}; expected {n} or {half}")


def _matched_target(values: np.ndarray, amplitude_target) -> np.ndarray:
    """Rescale the target's non-DC energy to that of ``values``; DC from values."""
    n = values.size
    target = _half_amplitudes(amplitude_target, n)
    own = np.abs(np.fft.rfft(values))
    norm = np.linalg.norm(target[1:])
    if norm > 0:
        target[1:] *= np.linalg.norm(own[1:]) / norm
    target[0] = own[0]
    return target


def spectrum_mismatch(values, amplitude_target) -> float:
    """Relative L2 error of the non-DC Fourier amplitudes of ``values``
    against the energy-matched target."""
    x = np.asarray(values, dtype=float)
    target = _matched_target(x, amplitude_target)
    got = np.abs(np.fft.rfft(x))
    denom = np.linalg.norm(target[1:])
    return float(np.linalg.norm(got[1:] - target[1:]) / denom) if denom > 0 else 0.0


def iaaft(values_source, amplitude_target, rng: np.random.Generator, max_iter: int = 1000,
          start: str = "shuffle") -> tuple[Series, IaaftReport]:
    """Iterative amplitude adjusted Fourier transform surrogate.

    Starting from a random shuffle of ``values_source`` (or from its own
    order with ``start="identity"``), alternately impose the target Fourier
    amplitudes keeping the phases, then put the sorted source values back in
    the rank order of the result. Stops when the rank order repeats or after
    ``max_iter`` iterations. The returned values are always an exact
    permutation of the source.
    """
    src = _series(values_source)
    x = src.values
    n = x.size
    target = _matched_target(x, amplitude_target)
    sorted_vals = np.sort(x)
    y = rng.permutation(x) if start == "shuffle" else x.copy()
    prev = np.argsort(y, kind="stable")
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        spec = np.fft.rfft(y)
        phase = np.exp(1j * np.angle(spec))
        z = np.fft.irfft(target * phase, n=n)
        rank = np.argsort(z, kind="stable")
        y = np.empty(n)
        y[rank] = sorted_vals
        if np.array_equal(rank, prev):
            converged = True
            break
        prev = rank
    report = IaaftReport(iterations=it, spectrum_mismatch=spectrum_mismatch(y, target),
                         converged=converged)
    return src.with_values(y, label=f"{src.label}_iaaft"), report


def linear_memory_surrogate(v, rng: np.random.Generator, max_iter: int = 1000,
                            return_report: bool = False):
    """IAAFT surrogate targeting the series' own Fourier amplitudes.

    Keeps the marginal exactly and the linear correlations approximately;
    nonlinear structure is destroyed.
    """
    s = _series(v)
    if len(s) < 64:
        raise SeriesError("linear-memory surrogate needs at least 64 values")
    out, report = iaaft(s, np.abs(np.fft.rfft(s.values)), rng, max_iter=max_iter)
    out = s.with_values(out.values, label=f"{s.label}_lm")
    return (out, report) if return_report else out


def rank_remap(reference, spec: DistributionSpec | None, rng: np.random.Generator | None = None,
               sample=None) -> Series:
    """Values drawn from ``spec`` placed in the rank order of ``reference``.

    The value at position t has the same rank as ``reference[t]``; ties in
    the reference are broken by position. ``sample`` replaces the draw.
    """
    ref = _series(reference)
    n = len(ref)
    if sample is None:
        if spec is None or rng is None:
            raise ValueError("need a distribution spec and rng, or an explicit sample")
        sample = sample_distribution(spec, n, rng).values
    sample = np.sort(np.asarray(sample, dtype=float))
    if sample.size != n:
        raise ValueError("sample and reference differ in length")
    order = np.argsort(ref.values, kind="stable")
    out = np.empty(n)
    out[order] = sample
    tag = spec.family.value if spec is not None else "remap"
    kind = ref.kind if ref.kind is Kind.GENERIC_POSITIVE else Kind.VOLATILITY
    if out.size and out.min() < 0:
        kind = Kind.RETURN
    return ref.with_values(out, kind=kind, label=f"{ref.label}_{tag}")
