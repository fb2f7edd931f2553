"""Bounded eavesdropper-channel sets: circumscription, tightness, sampling.

The closed-form circle is only guaranteed to contain the fattened annular
sector in part of the parameter space; the sampling oracle decides where.
Tests pin both sides: containment where the form is valid, and detection
of the known failure band (small angular spread, the circle cuts the
inner sector corners).
"""

import math

import numpy as np
import pytest

from mris_isac import uncertainty as unc
from mris_isac.scenario import PolarView, SystemConfig, place_nodes

# single-row arrangement used by the bound-validation suite
ROW = dict(M_r=1, M_c=10, d_R=0.025, lambda_c=0.1)
VIEW = PolarView(d=50.0, azimuth=math.pi / 3, elevation=math.pi / 3)
EPS = 0.377
BETA0 = 1e-3
KAPPA = 14.2129      # (eps / 0.1)^2, so the zero-error corner spread is 0.1


def make_geom(D, th_deg, ps_deg):
    return unc.bound_geometry(ROW["M_r"], ROW["M_c"], ROW["d_R"],
                              ROW["lambda_c"], VIEW, D,
                              math.radians(th_deg), math.radians(ps_deg),
                              EPS, BETA0, KAPPA)


def test_zero_error_corner_spread_is_one_tenth():
    geom = make_geom(0.0, 0.0, 0.0)
    eta, spread = unc.tightness_metrics(geom)
    assert abs(spread - 0.1000) < 5e-4
    assert abs(eta - 1.0) < 1e-12       # pure disk: bound exactly tight


def test_max_error_corner_spread_frozen():
    # value pinned by an independent geometry probe of the closed form
    geom = make_geom(5.0, 5.0, 5.0)
    _, spread = unc.tightness_metrics(geom)
    assert abs(spread - 0.8001) < 5e-3


def test_spread_monotone_in_each_error_axis():
    base = unc.tightness_metrics(make_geom(0.0, 0.0, 0.0))[1]
    for D, th, ps in [(2.0, 0.0, 0.0), (0.0, 3.0, 0.0), (0.0, 0.0, 3.0)]:
        assert unc.tightness_metrics(make_geom(D, th, ps))[1] > base


def test_segment_collapse_midpoint_half_width():
    # zero angular spread: the closed form degenerates to a radial segment
    R_o, r_t = unc.circumscribe(np.array([2.0]), np.array([0.5]),
                                np.array([0.0]))
    assert abs(R_o[0] - 1.25) < 1e-12
    assert abs(r_t[0] - 0.75) < 1e-12


def test_origin_disk_guard_when_inner_radius_negative():
    R_o, r_t = unc.circumscribe(np.array([2.0]), np.array([-0.1]),
                                np.array([0.3]))
    assert R_o[0] == 0.0
    assert r_t[0] == 2.0


def test_circle_through_outer_corners_and_inner_point():
    # generic branch: the defining three contact points lie on the circle
    R_out, R_inn, dpsi = 1.8, 0.9, 0.35
    R_o, r_t = unc.circumscribe(np.array([R_out]), np.array([R_inn]),
                                np.array([dpsi]))
    cen, rad = R_o[0], r_t[0]
    corner = R_out * np.exp(1j * dpsi)
    assert abs(abs(corner - cen) - rad) < 1e-12
    assert abs(abs(R_out * np.exp(-1j * dpsi) - cen) - rad) < 1e-12
    assert abs((cen - R_inn) - rad) < 1e-12


def test_phase_spread_zero_at_zero_bounds_and_grows_with_index():
    dpsi = unc.phase_spread(1, 10, 0.025, 0.1, VIEW.azimuth, VIEW.elevation,
                            0.0, 0.0)
    assert np.allclose(dpsi, 0.0)
    dpsi = unc.phase_spread(1, 10, 0.025, 0.1, VIEW.azimuth, VIEW.elevation,
                            math.radians(2.0), math.radians(2.0))
    assert dpsi[0] == 0.0
    assert np.all(np.diff(dpsi) > 0)    # farther elements swing more


def test_bound_geometry_rejects_range_error_beyond_distance():
    with pytest.raises(ValueError):
        make_geom(50.0, 1.0, 1.0)


def test_h_bar_on_nominal_ray_and_ball_norm():
    geom = make_geom(2.0, 1.0, 1.0)
    ray = unc.nominal_ray(ROW["M_r"], ROW["M_c"], ROW["d_R"], ROW["lambda_c"],
                          VIEW.azimuth, VIEW.elevation)
    assert np.allclose(geom.h_bar, geom.R_o * ray)
    assert abs(geom.eps_ball - np.linalg.norm(geom.r_tilde)) < 1e-15
    rc = unc.robust_channel(geom)
    assert np.allclose(rc.center, geom.h_bar)
    assert rc.radius == geom.eps_ball


def test_rel_spread_raises_when_centers_collapse():
    # massive scatter drives every element to the origin-disk branch
    geom = unc.bound_geometry(1, 4, 0.025, 0.1, VIEW, 0.0, 0.0, 0.0,
                              1e6, BETA0, KAPPA)
    assert np.all(geom.R_o == 0.0)
    with pytest.raises(ValueError):
        geom.rel_spread
    with pytest.raises(ValueError):
        unc.tightness_metrics(geom)


def test_containment_holds_on_zero_angle_axis():
    rng = np.random.default_rng(21)
    for D in (0.0, 1.0, 3.0, 5.0):
        geom = make_geom(D, 0.0, 0.0)
        draws = unc.sample_eve_channels(geom, 20_000, rng)
        chk = unc.containment_check(geom, draws)
        assert chk["vector_violations"] == 0, (D, chk)
        assert chk["element_violations"] == 0, (D, chk)
        assert chk["max_vector_ratio"] <= 1.0 + 1e-9


def test_oracle_detects_known_failure_band():
    # the printed circle misses the inner sector corners when the angular
    # spread is small but nonzero; the sampler must surface that
    rng = np.random.default_rng(22)
    geom = make_geom(0.0, 1.0, 1.0)
    draws = unc.sample_eve_channels(geom, 50_000, rng)
    chk = unc.containment_check(geom, draws)
    assert chk["element_violations"] > 0
    assert chk["max_element_ratio"] > 1.05


def test_eta_exceeds_one_exactly_where_circle_under_covers():
    geom = make_geom(0.0, 1.0, 0.0)
    assert geom.eta > 1.0   # region area larger than the printed circle


def test_sampler_respects_error_box():
    rng = np.random.default_rng(23)
    geom = make_geom(3.0, 2.0, 1.0)
    draws = unc.sample_eve_channels(geom, 5_000, rng)
    assert draws.shape == (5_000, 10)
    mags = np.abs(draws)
    # amplitudes cannot exceed LoS max plus scatter max anywhere
    assert np.all(mags <= geom.R_out * (1 + 1e-12))


def test_bounds_for_layout_matches_config():
    cfg = SystemConfig(J=2, D_RE=2.0, Theta_RE=math.radians(1.0),
                       Psi_RE=math.radians(1.0)).validate()
    layout = place_nodes(cfg, np.random.default_rng(3))
    bounds = unc.bounds_for_layout(cfg, layout)
    assert len(bounds) == 2
    for j, geom in enumerate(bounds):
        assert geom.D == 2.0
        assert abs(geom.view.d - layout.eve_views[j].d) < 1e-12
        assert geom.eps.shape == (cfg.M,)


def test_area_formulas_reduce_to_disk_at_zero_geometry_error():
    geom = make_geom(0.0, 0.0, 0.0)
    assert np.allclose(geom.area_actual, np.pi * geom.r_sup ** 2)
    assert np.allclose(geom.area_safe, np.pi * geom.r_tilde ** 2)
    assert abs(geom.eta - 1.0) < 1e-12
