import json
import math

import numpy as np
import pytest

from mfcomp.analysis import AnalysisConfig
from mfcomp.fse import (
    DESK_L,
    FseFit,
    FseRow,
    FseTable,
    closed_form,
    desk_pdf,
    fit_linear_laws,
    fit_power_exponent,
    fse_predict,
    fse_scan,
    rescale_window,
)

HS = (0.2, 0.35, 0.5, 0.65, 0.8)
LS = tuple(int(round(10 ** (3 + 0.25 * k))) for k in range(9))


def planted(H_list=HS, L_list=LS, slope=-10.0, intercept=10.0, noise=0.0, seed=0):
    gen = np.random.default_rng(seed)
    rows = []
    for H in H_list:
        for L in L_list:
            m = closed_form(H, L, slope, intercept) * math.exp(noise * gen.standard_normal())
            rows.append(FseRow(H=H, L=L, mean=m, std=0.1 * m, n=20))
    return FseTable(rows=rows, pdf_spec=desk_pdf().to_dict(), scaling_window=(1000, 1e5))


def test_closed_form_reference_value():
    assert closed_form(0.8, 1e4) == pytest.approx(0.186, abs=1e-3)


def test_closed_form_monotone_in_L():
    for H in HS:
        vals = [closed_form(H, L) for L in LS]
        assert np.all(np.diff(vals) < 0)


def test_planted_exponents_recovered_exactly():
    table = planted()
    a = fit_power_exponent(table)
    for H, (slope, se) in a.items():
        assert slope == pytest.approx(2 * H - 2, abs=1e-10)
        assert se < 1e-8
    fit = fit_linear_laws(table, a)
    assert fit.a_slope == pytest.approx(2, abs=1e-10)
    assert fit.a_intercept == pytest.approx(-2, abs=1e-10)
    assert fit.lng_slope == pytest.approx(-10, abs=1e-10)
    assert fit.lng_intercept == pytest.approx(10, abs=1e-10)


def test_planted_noisy_recovery():
    fit = fit_linear_laws(planted(noise=0.02, seed=3))
    assert fit.a_slope == pytest.approx(2, abs=0.1)
    assert fit.lng_slope == pytest.approx(-10, abs=0.5)


def test_planted_inverse_length_slope():
    # widths shrinking exactly as 1/L give a = -1 at every H
    rows = [FseRow(H=H, L=L, mean=5.0 / L, std=0.0, n=1) for H in HS for L in LS]
    table = FseTable(rows=rows, pdf_spec={}, scaling_window=(1000, 1e5))
    for slope, _ in fit_power_exponent(table).values():
        assert slope == pytest.approx(-1, abs=1e-12)


def test_excluded_H_dropped():
    table = planted(H_list=(0.1,) + HS)
    fit = fit_linear_laws(table)
    assert 0.1 in fit.a and fit.a_slope == pytest.approx(2)
    with pytest.raises(ValueError):
        fit_linear_laws(planted(H_list=(0.1, 0.5, 0.8)))


def test_fit_needs_points_in_window():
    with pytest.raises(ValueError):
        fit_power_exponent(planted(), window=(1000, 2000))


def test_rescale_window():
    lo, hi = rescale_window((DESK_L[0], DESK_L[-1]))
    assert lo == pytest.approx(1024)
    assert hi == pytest.approx(1024 * 128 ** (math.log(138.95) / math.log(1e4)))
    assert rescale_window((1e3, 1e7)) == pytest.approx((1000, 138950))


def test_predict_grid_points_exact():
    table = planted()
    for r in table.rows:
        pred = fse_predict(r.H, r.L, table)
        assert pred.path == "table"
        assert pred.value == pytest.approx(r.mean, rel=1e-12)


def test_predict_interpolates_between_nodes():
    table = planted()
    pred = fse_predict(0.6, 5000, table)
    lo = min(closed_form(h, l) for h in (0.5, 0.65) for l in (3162, 5623))
    hi = max(closed_form(h, l) for h in (0.5, 0.65) for l in (3162, 5623))
    assert lo <= pred.value <= hi


def test_predict_fallbacks():
    table = planted()
    out = fse_predict(0.8, 1e7, table)
    assert out.path == "closed_form" and out.value == pytest.approx(closed_form(0.8, 1e7))
    fit = fit_linear_laws(table)
    assert fse_predict(0.8, 1e7, table, fit).path == "closed_form_fitted"
    assert fse_predict(0.8, 1e4).path == "closed_form"
    with pytest.raises(ValueError):
        fse_predict(0.8, 1e7, table, allow_fallback=False)
    with pytest.raises(ValueError):
        fse_predict(1.2, 1e4)


def test_table_and_fit_round_trip():
    table = planted()
    back = FseTable.from_dict(json.loads(json.dumps(table.to_dict())))
    assert back.rows == table.rows
    fit = fit_linear_laws(table)
    fit2 = FseFit.from_dict(json.loads(json.dumps(fit.to_dict())))
    assert fit2.a == fit.a and fit2.lng_slope == fit.lng_slope


def test_table_grid_and_csv():
    table = planted()
    assert table.grid().shape == (len(HS), len(LS))
    rows = list(table.csv_rows())
    assert rows[0] == ("H", "L", "mean", "std") and len(rows) == 1 + len(table.rows)


def test_small_scan_deterministic_and_decreasing():
    kw = dict(H_list=(0.5,), L_list=(1024, 8192), ensemble=3, seed=11,
              cfg=AnalysisConfig(n_scales=12), iaaft_max_iter=30)
    t1 = fse_scan(desk_pdf(), **kw)
    t2 = fse_scan(desk_pdf(), **kw)
    assert t1.rows == t2.rows
    assert all(r.n == 3 and r.failed == 0 for r in t1.rows)
    m = [r.mean for r in t1.for_H(0.5)]
    assert m[1] < m[0]


def test_scan_rejects_fixed_scales():
    with pytest.raises(ValueError):
        fse_scan(desk_pdf(), cfg=AnalysisConfig(scale_grid=(10, 20, 40, 80, 160)))
