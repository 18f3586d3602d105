from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gie import scan as sc
from gie.constants import ERBIUM
from gie.experiment import ExperimentConfig, effective_snr
from gie.spheroid import SpheroidGeometry

BASE = ExperimentConfig(ERBIUM, 10**8, SpheroidGeometry.sphere(0.01, 0.02), 1e3, 100)
HEADER = "lambda,gamma,snr,density_cm3,lifetime_s,density_ok,lifetime_ok,perturbative_ok"


def small_spec(**kw) -> sc.ScanSpec:
    axes = kw.pop("axes", (sc.Axis("d_m", 0.02, 0.2, 3), sc.Axis("time_s", 1e2, 1e4, 3)))
    return sc.ScanSpec(BASE, axes, **kw)


def test_axis_validation():
    for args, msg in [
        (("size", 1, 2, 3), "unknown axis"),
        (("d_m", 2, 1, 3), "min < max"),
        (("d_m", 1, 2, 1), "2 points"),
        (("d_m", 0, 2, 3), "positive"),
    ]:
        with pytest.raises(ValueError, match=msg):
            sc.Axis(*args)
    with pytest.raises(ValueError, match="scale"):
        sc.Axis("d_m", 1, 2, 3, "cubic")
    ax = sc.Axis("time_s", 1.0, 100.0, 3)
    assert np.allclose(ax.values(), [1, 10, 100])
    assert ax.from_unit(ax.to_unit(37.0)) == pytest.approx(37.0)
    assert np.allclose(sc.Axis("a_s_m", 0.0, 1.0, 3, "linear").values(), [0, 0.5, 1])


def test_spec_validation():
    with pytest.raises(ValueError, match="repeated"):
        small_spec(axes=(sc.Axis("d_m", 0.02, 0.2, 2), sc.Axis("d_m", 0.02, 0.2, 2)))
    with pytest.raises(ValueError, match="campaign"):
        small_spec(axes=(sc.Axis("reps", 2, 10, 2),), reps_rule="campaign")
    with pytest.raises(ValueError, match="1 to 3"):
        small_spec(axes=())


@pytest.mark.parametrize("rule,power", [("fixed", 1.0), ("campaign", 0.5)])
def test_two_point_time_scan_follows_analytic_scaling(rule, power):
    spec = small_spec(axes=(sc.Axis("time_s", 1e2, 1e4, 2),), reps_rule=rule)
    res = sc.run_scan(spec, workers=1)
    snr = res.column("snr")
    assert snr[1] / snr[0] == pytest.approx(100.0**power, rel=1e-6)
    direct = [effective_snr(sc.point_config(spec, {"time_s": t})).snr for t in (1e2, 1e4)]
    assert np.array_equal(snr, direct)


def test_rows_are_lexicographic_and_complete():
    spec = small_spec()
    res = sc.run_scan(spec, workers=1)
    assert len(res.rows) == 9
    assert [r.point for r in res.rows] == spec.grid()
    assert res.rows[0].point[0] == res.rows[2].point[0]


def test_all_masked_scan():
    res = sc.run_scan(small_spec(max_density_cm3=1.0), workers=2)
    assert len(res.rows) == 9
    assert not res.column("density_ok").any()
    assert not res.feasible().any()


def test_flags_follow_their_definitions():
    res = sc.run_scan(small_spec(axes=(sc.Axis("atoms", 1e6, 1e16, 4), sc.Axis("time_s", 1e2, 1e6, 3))), workers=1)
    for r in res.rows:
        assert r.density_ok == (r.density_cm3 < 1e16)
        assert r.lifetime_ok == (r.lifetime_s >= r.point[1])
        assert r.perturbative_ok == (abs(r.lam) * r.point[0] < 0.1)


def test_errors_are_recorded_per_row():
    # d below 2c overlaps the fixed clouds
    res = sc.run_scan(small_spec(axes=(sc.Axis("d_m", 0.01, 0.04, 3),)), workers=1)
    assert set(res.errors) == {0}
    assert "overlap" in res.errors[0]
    assert math.isnan(res.rows[0].snr) and not res.rows[0].density_ok
    assert res.rows[1].error is None


def test_touching_rule_keeps_ellipticity():
    base = BASE.with_(geom=SpheroidGeometry.from_volume(1e-6, 0.9))
    spec = sc.ScanSpec(base, (sc.Axis("d_m", 0.01, 0.1, 2),), geometry_rule="touching")
    cfg = sc.point_config(spec, {"d_m": 0.05})
    assert cfg.geom.c == pytest.approx(0.025) and cfg.geom.ellipticity == pytest.approx(0.9)


# --- export ------------------------------------------------------------------


def test_csv_header_and_round_trip():
    res = sc.run_scan(small_spec(), workers=1)
    data = sc.to_csv(res)
    assert data.decode().splitlines()[0] == "d_m,time_s," + HEADER
    again = sc.parse_csv(data)
    assert again == res
    assert sc.to_csv(again) == data


def test_csv_preserves_nan_rows():
    res = sc.run_scan(small_spec(axes=(sc.Axis("d_m", 0.01, 0.04, 2),)), workers=1)
    data = sc.to_csv(res)
    assert sc.to_csv(sc.parse_csv(data)) == data


@given(x=st.floats(allow_nan=False, allow_infinity=False, width=64))
@settings(max_examples=60)
def test_float_cells_round_trip_exactly(x):
    row = sc.ScanRow((x,), x, x, x, x, x, True, False, True)
    res = sc.ScanResult(("d_m",), (row,))
    assert sc.parse_csv(sc.to_csv(res)).rows[0].point[0] == x


def test_empty_scan_is_header_only():
    res = sc.ScanResult(("d_m",), ())
    assert sc.to_csv(res) == ("d_m," + HEADER + "\n").encode()
    assert sc.parse_csv(sc.to_csv(res)) == res


def test_json_matches_csv():
    res = sc.run_scan(small_spec(), workers=1)
    assert sc.parse_json(sc.to_json(res)) == sc.parse_csv(sc.to_csv(res))
    assert sc.export(res, "json") == sc.to_json(res)
    with pytest.raises(ValueError, match="format"):
        sc.export(res, "xml")


def test_parse_rejects_bad_input():
    with pytest.raises(ValueError, match="header"):
        sc.parse_csv(b"")
    with pytest.raises(ValueError, match="columns"):
        sc.parse_csv(b"a,b\n1,2\n")


def test_export_independent_of_worker_count(monkeypatch):
    spec = small_spec(axes=(sc.Axis("d_m", 0.02, 0.2, 4), sc.Axis("atoms", 1e6, 1e12, 4)))
    one = sc.export(sc.run_scan(spec, 1))
    assert sc.export(sc.run_scan(spec, 4)) == one
    monkeypatch.setenv("GIE_THREADS", "3")
    assert sc.worker_count() == 3
    assert sc.export(sc.run_scan(spec)) == one
    monkeypatch.setenv("GIE_THREADS", "many")
    with pytest.raises(ValueError, match="GIE_THREADS"):
        sc.worker_count()


# --- contour -----------------------------------------------------------------


def stub_spec():
    return sc.ScanSpec(BASE, (sc.Axis("time_s", 0.1, 10, 15), sc.Axis("atoms", 0.1, 10, 15)))


def stub(point):
    return point["time_s"] * point["atoms"]


@pytest.mark.parametrize("target", [1.0, 3.0, 0.2])
def test_contour_of_product_stub_is_hyperbola(target):
    c = sc.snr_contour(stub_spec(), target, stub)
    assert c.axis_names == ("time_s", "atoms")
    v = c.vertices
    assert len(v) > 10
    assert np.all(np.abs(v[:, 0] * v[:, 1] / target - 1) <= 1e-3)
    assert len(c.polylines) == 1


def test_contour_empty_above_max():
    c = sc.snr_contour(stub_spec(), 1e3, stub)
    assert c.polylines == () and c.vertices.shape == (0, 2)


def test_contour_validation():
    with pytest.raises(ValueError, match="2 axes"):
        sc.snr_contour(small_spec(axes=(sc.Axis("d_m", 0.02, 0.2, 3),)), 1.0)
    with pytest.raises(ValueError, match="positive"):
        sc.snr_contour(stub_spec(), 0.0, stub)


def test_contour_on_engine_rechecks():
    base = BASE.with_(squeeze_db=35.0, setups=5)
    spec = sc.ScanSpec(base, (sc.Axis("time_s", 1e1, 1e5, 8), sc.Axis("atoms", 1e11, 1e16, 8)))
    c = sc.snr_contour(spec, 1.0)
    assert len(c.vertices) > 0
    for t, n in c.vertices:
        snr = effective_snr(sc.point_config(spec, {"time_s": t, "atoms": n})).snr
        assert abs(snr - 1.0) <= 1e-3


# --- svg and preset -----------------------------------------------------------


def test_svg_marks_masked_cells():
    res = sc.run_scan(small_spec(max_density_cm3=1.0), workers=1)
    svg = sc.render_svg(res, "d_m", "time_s")
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count('fill="url(#hatch)"') == 9
    assert svg.count("data-snr=") == 9


def test_svg_slices_extra_axes():
    spec = small_spec(axes=(sc.Axis("d_m", 0.02, 0.2, 3), sc.Axis("time_s", 1e2, 1e4, 3), sc.Axis("atoms", 1e6, 1e8, 2)))
    res = sc.run_scan(spec, workers=1)
    svg = sc.render_svg(res, "d_m", "time_s", {"atoms": 1e8})
    assert svg.count("data-snr=") == 9


def test_feasibility_preset_small_grid_is_monotone():
    spec = sc.feasibility_spec((10, 10, 4))
    assert spec.base.squeeze_db == 35 and spec.base.setups == 5
    assert sc.point_config(spec, {"time_s": 1e4}).reps == pytest.approx(1e3)
    res = sc.run_scan(spec, workers=2)
    assert not res.errors
    assert res.feasible().any()
    snr = res.column("snr").reshape(10, 10, 4)
    ok = res.column("density_ok").astype(bool).reshape(10, 10, 4)
    for axis, sign in [(0, -1), (1, 1), (2, 1)]:
        diffs = np.diff(snr, axis=axis) * sign
        both = np.logical_and(np.take(ok, range(1, ok.shape[axis]), axis=axis), np.take(ok, range(ok.shape[axis] - 1), axis=axis))
        assert np.all(diffs[both] > 0)
