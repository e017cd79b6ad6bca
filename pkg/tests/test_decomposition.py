import json
import math

import numpy as np
import pytest

from mfcomp.analysis import AnalysisConfig
from mfcomp.decomposition import (
    ComponentReport,
    Estimate,
    SweepTable,
    decompose,
    family_sweep,
    gaussian_reference,
)
from mfcomp.fse import FseRow, FseTable, closed_form
from mfcomp.series import Series, SeriesError
from mfcomp.surrogates import DistributionSpec, rank_remap, sample_distribution
from mfcomp.synthetic import CascadeSpec, FgnSpec, binomial_cascade, generate_fgn

FIELDS = ("delta_alpha", "delta_alpha_fse", "delta_alpha_sf", "delta_alpha_eff",
          "delta_alpha_norm", "delta_alpha_norm_fse", "delta_alpha_norm_sf",
          "delta_alpha_norm_eff", "delta_alpha_pdf", "delta_alpha_nl")


@pytest.fixture(scope="module")
def fgn_vol():
    return np.abs(generate_fgn(FgnSpec(0.8, 2**14), np.random.default_rng(3)).values)


@pytest.fixture(scope="module")
def small_report():
    x = np.random.default_rng(0).exponential(size=4096)
    return decompose(x, ensemble=6, seed=1, iaaft_max_iter=100)


def test_estimate_subtraction_in_quadrature():
    d = Estimate(1.0, 0.3, 10) - Estimate(0.4, 0.4, 8)
    assert d.mean == pytest.approx(0.6)
    assert d.std == pytest.approx(0.5)
    assert d.n == 8


def test_estimate_of_skips_failures():
    e = Estimate.of([1.0, None, 3.0])
    assert (e.mean, e.n) == (2.0, 2)
    assert e.std == pytest.approx(math.sqrt(2))
    assert math.isnan(Estimate.of([None]).mean)


def test_report_invariants(small_report):
    r = small_report
    assert r.delta_alpha_eff.mean == pytest.approx(r.delta_alpha.mean - r.delta_alpha_fse.mean)
    assert r.delta_alpha_pdf.mean == pytest.approx(
        r.delta_alpha_eff.mean - r.delta_alpha_norm_eff.mean)
    assert r.delta_alpha_nl == r.delta_alpha_norm_eff
    assert abs(r.accounting_residual()) < 1e-12
    assert r.delta_alpha_eff.std == pytest.approx(
        math.hypot(r.delta_alpha.std, r.delta_alpha_fse.std))
    assert r.delta_alpha_pdf.std == pytest.approx(
        math.hypot(r.delta_alpha_eff.std, r.delta_alpha_norm_eff.std))
    assert r.failures == [] and r.ensemble_size == 6


def test_report_json_round_trip(small_report):
    d = json.loads(json.dumps(small_report.to_dict()))
    assert d["schema"] == "mfcomp.component_report/1"
    back = ComponentReport.from_dict(d)
    for k in FIELDS:
        assert getattr(back, k) == getattr(small_report, k)
    assert back.config == small_report.config
    with pytest.raises(ValueError):
        ComponentReport.from_dict(d | {"schema": "other/9"})


def test_report_deterministic(small_report):
    x = np.random.default_rng(0).exponential(size=4096)
    again = decompose(x, ensemble=6, seed=1, iaaft_max_iter=100)
    assert again.to_dict() == small_report.to_dict()


def test_report_independent_of_workers(small_report):
    x = np.random.default_rng(0).exponential(size=4096)
    par = decompose(x, ensemble=6, seed=1, iaaft_max_iter=100, workers=2)
    assert par.to_dict() == small_report.to_dict()


def test_gaussian_reference_sources():
    v = Series(np.array([1.0, 2.0, 2.0]), kind="volatility")
    mu, sigma, src = gaussian_reference(v)
    assert (mu, src) == (0.0, "volatility_rms") and sigma == pytest.approx(math.sqrt(3))
    r = Series(np.array([-1.0, 1.0, 3.0]), kind="return")
    assert gaussian_reference(v, r) == (1.0, 2.0, "returns")


def test_returns_recorded_in_report():
    gen = np.random.default_rng(2)
    r = gen.standard_normal(4096) * 0.01
    rep = decompose(np.abs(r), ensemble=2, seed=0, iaaft_max_iter=20,
                    returns=Series(r, kind="return"))
    assert rep.gaussian["source"] == "returns"
    assert rep.gaussian["sigma"] == pytest.approx(r.std(ddof=1))


@pytest.mark.parametrize("spec", [DistributionSpec.student_abs(3), DistributionSpec.weibull(0.5)])
def test_iid_input_has_no_effective_width(spec):
    x = sample_distribution(spec, 2**15, np.random.default_rng(7)).values
    r = decompose(x, ensemble=8, seed=3, iaaft_max_iter=100)
    assert abs(r.delta_alpha_eff.mean) < 2 * r.delta_alpha_eff.std
    assert abs(r.delta_alpha_pdf.mean) < 2 * r.delta_alpha_pdf.std
    assert r.delta_alpha_sf.mean < 0.02


def test_gaussian_input_self_reference(fgn_vol):
    # a series that already has the reference marginal carries no PDF component
    v = rank_remap(fgn_vol, DistributionSpec.gaussian_abs(0, 1), np.random.default_rng(0)).values
    r = decompose(v, ensemble=8, seed=5, iaaft_max_iter=100)
    assert abs(r.delta_alpha_pdf.mean) < 2 * r.delta_alpha_pdf.std
    assert r.delta_alpha_norm.mean == pytest.approx(r.delta_alpha.mean,
                                                    abs=2 * r.delta_alpha_norm.std + 1e-3)


@pytest.mark.slow
def test_coupling_property_on_nonlinear_input():
    v, _ = binomial_cascade(CascadeSpec(0.3, 16, randomized=True), np.random.default_rng(0))
    r = decompose(v, ensemble=10, seed=2, iaaft_max_iter=200)
    # structure beyond linear memory is clearly present
    assert r.delta_alpha_eff.mean > 3 * r.delta_alpha_eff.std
    gap = r.delta_alpha_pdf.mean - (r.delta_alpha_sf.mean - r.delta_alpha_norm_sf.mean)
    spread = math.sqrt(r.delta_alpha_pdf.std**2 + r.delta_alpha_sf.std**2
                       + r.delta_alpha_norm_sf.std**2)
    assert abs(gap) > 3 * spread


def test_student_sweep_trend(fgn_vol, small_report):
    st = family_sweep(fgn_vol, "student", [3, 5, 10], ensemble=5, seed=4, iaaft_max_iter=100,
                      reference=small_report)
    assert [p.param for p in st.points] == [3.0, 5.0, 10.0]
    for a, b in zip(st.points, st.points[1:]):
        assert b.delta_alpha.mean < a.delta_alpha.mean + a.delta_alpha.std
    assert st.points[-1].delta_alpha.mean < st.points[0].delta_alpha.mean
    assert all(p.delta_alpha_sf.mean < 0.02 for p in st.points)
    for p in st.points:
        assert p.delta_alpha_eff.mean == pytest.approx(p.delta_alpha.mean - p.delta_alpha_fse.mean)
        assert p.delta_alpha_pdf.mean == pytest.approx(
            p.delta_alpha_eff.mean - small_report.delta_alpha_norm_eff.mean)

    back = SweepTable.from_dict(json.loads(json.dumps(st.to_dict())))
    assert back.points[1].delta_alpha == st.points[1].delta_alpha
    rows = list(st.csv_rows())
    assert len(rows) == 4 and len(rows[0]) == 11


def test_weibull_sweep_runs_and_validates(small_report):
    x = np.random.default_rng(0).exponential(size=4096)
    st = family_sweep(x, "weibull", [0.5, 1.0], ensemble=2, seed=0, iaaft_max_iter=20,
                      reference=small_report)
    assert st.family == "weibull" and len(st.points) == 2
    with pytest.raises(ValueError):
        family_sweep(x, "weibull", [1.5], reference=small_report)
    with pytest.raises(ValueError):
        family_sweep(x, "pareto", [1.0], reference=small_report)


def test_fse_crosscheck_field(fgn_vol):
    rows = [FseRow(H=h, L=l, mean=closed_form(h, l), std=0.0, n=1)
            for h in (0.5, 0.65, 0.8) for l in (4096, 8192, 32768)]
    table = FseTable(rows=rows, pdf_spec={})
    r = decompose(fgn_vol, ensemble=2, seed=0, iaaft_max_iter=20, fse_table=table)
    cc = r.fse_crosscheck
    assert cc["path"] == "table" and cc["L"] == fgn_vol.size
    assert 0.5 < cc["H"] < 0.9


def test_zero_series_rejected():
    with pytest.raises(SeriesError):
        decompose(np.zeros(4096), ensemble=2)


def test_failures_annotated_not_raised():
    # a zero stretch breaks negative orders for the original and shuffled legs
    x = np.random.default_rng(1).exponential(size=4096)
    x[:400] = 0.0
    r = decompose(x, cfg=AnalysisConfig(), ensemble=3, seed=0, iaaft_max_iter=20)
    assert r.failures
    assert any(f.startswith("original") for f in r.failures)
    assert math.isnan(r.delta_alpha.mean)
