import numpy as np
import pytest
from scipy import stats

from mfcomp.series import Series, SeriesError
from mfcomp.surrogates import (
    DistributionSpec,
    Family,
    empirical_inverse_cdf_sample,
    iaaft,
    linear_memory_surrogate,
    rank_remap,
    sample_distribution,
    shuffle,
    spectrum_mismatch,
)
from mfcomp.synthetic import FgnSpec, generate_fgn


def acf(x, lags):
    x = x - x.mean()
    d = x @ x
    return np.array([x[k:] @ x[:-k] / d for k in lags])


def test_shuffle_is_permutation(iid_exp):
    out = shuffle(iid_exp, np.random.default_rng(1)).values
    assert np.array_equal(np.sort(out), np.sort(iid_exp))
    assert not np.array_equal(out, iid_exp)


def test_shuffle_deterministic(iid_exp):
    a = shuffle(iid_exp, np.random.default_rng(5)).values
    b = shuffle(iid_exp, np.random.default_rng(5)).values
    assert np.array_equal(a, b)


def test_shuffle_destroys_memory():
    x = np.abs(generate_fgn(FgnSpec(0.8, 2**14), np.random.default_rng(0)).values)
    assert acf(x, [1])[0] > 0.1
    y = shuffle(x, np.random.default_rng(1)).values
    assert abs(acf(y, [1])[0]) < 3 / np.sqrt(x.size)


def test_inverse_cdf_confined_to_reference_range(rng):
    ref = rng.exponential(size=500)
    out = empirical_inverse_cdf_sample(ref, 20000, rng).values
    assert out.min() >= ref.min() and out.max() <= ref.max()
    assert out.max() == pytest.approx(ref.max())


def test_inverse_cdf_reproduces_distribution(rng):
    ref = rng.exponential(size=100_000)
    out = empirical_inverse_cdf_sample(ref, 100_000, rng).values
    assert stats.ks_2samp(ref, out).statistic < 0.01


def test_inverse_cdf_needs_two_values():
    with pytest.raises(SeriesError):
        empirical_inverse_cdf_sample(np.ones(10), 5, np.random.default_rng(0))


def test_iaaft_identity_fixed_point():
    # a series already carrying its own spectrum is returned unchanged
    x = np.random.default_rng(0).exponential(size=1024)
    out, rep = iaaft(x, np.abs(np.fft.rfft(x)), np.random.default_rng(1), start="identity")
    assert np.array_equal(out.values, x)
    assert rep.converged and rep.iterations == 1
    assert rep.spectrum_mismatch == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("source", ["exp", "student"])
def test_linear_memory_surrogate_exact_marginal(source):
    gen = np.random.default_rng(2)
    fgn = generate_fgn(FgnSpec(0.8, 2**14), gen).values
    draw = gen.exponential(size=fgn.size) if source == "exp" else np.abs(gen.standard_t(3, fgn.size))
    x = rank_remap(fgn, None, sample=draw).values
    y, rep = linear_memory_surrogate(x, np.random.default_rng(3), return_report=True)
    assert np.array_equal(np.sort(y.values), np.sort(x))
    assert rep.spectrum_mismatch < 0.01
    assert rep.iterations <= 1000


def test_linear_memory_surrogate_keeps_acf():
    gen = np.random.default_rng(7)
    x = np.abs(generate_fgn(FgnSpec(0.8, 2**14), gen).values)
    lags = [1, 2, 5, 10, 20, 50]
    base = acf(x, lags)
    surr = np.array([acf(linear_memory_surrogate(x, np.random.default_rng(s)).values, lags)
                     for s in range(10)])
    # surrogate mean lies within the band of the draws plus a small bias allowance
    band = 3 * surr.std(axis=0, ddof=1) / np.sqrt(len(surr)) + 0.02
    assert np.all(np.abs(surr.mean(axis=0) - base) < band)


def test_linear_memory_surrogate_deterministic(iid_exp):
    a = linear_memory_surrogate(iid_exp, np.random.default_rng(4), max_iter=20).values
    b = linear_memory_surrogate(iid_exp, np.random.default_rng(4), max_iter=20).values
    assert np.array_equal(a, b)


def test_linear_memory_surrogate_min_length():
    with pytest.raises(SeriesError):
        linear_memory_surrogate(np.arange(1.0, 10.0), np.random.default_rng(0))


def test_spectrum_mismatch_scale_free(iid_exp):
    amp = np.abs(np.fft.rfft(iid_exp))
    assert spectrum_mismatch(iid_exp, amp) == pytest.approx(0, abs=1e-12)
    assert spectrum_mismatch(iid_exp, 5 * amp) == pytest.approx(0, abs=1e-12)


def test_rank_remap_example():
    out = rank_remap([3.0, 1.0, 2.0], None, sample=[10.0, 30.0, 20.0]).values
    np.testing.assert_array_equal(out, [30.0, 10.0, 20.0])


def test_rank_remap_ties_broken_by_position():
    out = rank_remap([1.0, 1.0, 0.0], None, sample=[5.0, 6.0, 7.0]).values
    np.testing.assert_array_equal(out, [6.0, 7.0, 5.0])


def test_rank_remap_preserves_ranks(iid_exp):
    out = rank_remap(iid_exp, DistributionSpec.weibull(0.5), np.random.default_rng(1)).values
    assert stats.spearmanr(iid_exp, out).statistic == pytest.approx(1.0)


def test_rank_remap_needs_source():
    with pytest.raises(ValueError):
        rank_remap([1.0, 2.0], DistributionSpec.weibull(1.0))


def test_weibull_mean():
    from scipy.special import gamma
    for beta in (0.5, 1.0):
        x = sample_distribution(DistributionSpec.weibull(beta), 10**6, np.random.default_rng(0)).values
        assert x.mean() == pytest.approx(gamma(1 + 1 / beta), rel=0.02)


def test_student_tail_index():
    x = sample_distribution(DistributionSpec.student_abs(3), 10**6, np.random.default_rng(0)).values
    top = np.sort(x)[-10**4:]
    hill = 1 / np.mean(np.log(top / top[0]))
    assert hill == pytest.approx(3, abs=0.3)


def test_half_normal_mean():
    x = sample_distribution(DistributionSpec.gaussian_abs(), 10**6, np.random.default_rng(0)).values
    assert x.mean() == pytest.approx(np.sqrt(2 / np.pi), rel=0.01)


def test_empirical_family(iid_exp):
    spec = DistributionSpec.empirical(iid_exp)
    x = sample_distribution(spec, 1000, np.random.default_rng(0))
    assert x.values.max() <= iid_exp.max()
    assert spec.to_dict()["reference_length"] == iid_exp.size


@pytest.mark.parametrize("kwargs", [
    {"family": "student_abs", "gamma": 2.0},
    {"family": "weibull", "beta": 1.5},
    {"family": "gaussian_abs", "sigma": 0.0},
    {"family": "empirical"},
])
def test_distribution_validation(kwargs):
    with pytest.raises(ValueError):
        DistributionSpec(**kwargs)


def test_distribution_family_coercion():
    assert DistributionSpec("weibull", beta=1.0).family is Family.WEIBULL


def test_series_kind_kept(iid_exp):
    s = Series(iid_exp, kind="volatility", label="v")
    assert shuffle(s, np.random.default_rng(0)).kind is s.kind
