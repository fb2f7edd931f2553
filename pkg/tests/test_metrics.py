"""Rate, beampattern and secrecy evaluation against direct recomputation."""

import json
import math

import numpy as np
import pytest

from mris_isac import metrics, mris
from mris_isac.channel import complex_normal
from mris_isac.scenario import PolarView
from mris_isac.uncertainty import bound_geometry


def build_solution(rng, M_r=2, M_c=2, N_r=1, N_c=2, L=3, K=2):
    M = M_r * M_c
    N = N_r * N_c
    placements = mris.all_placements(M_r, M_c, N_r, N_c)
    B = len(placements)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, N))
    G = complex_normal(rng, (M, L))
    h_users = complex_normal(rng, (K, M))
    W = 0.1 * complex_normal(rng, (B, L, K))
    f = 0.05 * complex_normal(rng, (B, L))
    chi = np.zeros((K, B))
    chi[np.arange(K), rng.integers(0, B, K)] = 1.0
    bounds = [bound_geometry(M_r, M_c, 0.025, 0.1,
                             PolarView(50.0, 0.4, 0.2), 1.0,
                             math.radians(1.0), math.radians(1.0),
                             0.1, 1e-3, 10.0)]
    return dict(theta=theta, phi=phi, placements=placements, G=G,
                h_users=h_users, W=W, f=f, chi=chi, bounds=bounds,
                B=B, K=K)


def test_user_sinr_drops_inactive_interferers():
    rng = np.random.default_rng(20)
    L, K = 4, 3
    row = complex_normal(rng, L)
    W = complex_normal(rng, (L, K))
    f = 0.3 * complex_normal(rng, L)
    sigma2 = 0.01
    both = np.array([1.0, 1.0, 0.0])
    alone = np.array([1.0, 0.0, 0.0])
    s_both, _ = metrics.user_sinr(row, W, f, both, 0, sigma2)
    s_alone, r_alone = metrics.user_sinr(row, W, f, alone, 0, sigma2)
    assert s_alone > s_both
    expect = abs(row @ W[:, 0]) ** 2 / (abs(row @ f) ** 2 + sigma2)
    assert s_alone == pytest.approx(expect, rel=1e-12)
    assert r_alone == pytest.approx(math.log1p(expect), rel=1e-12)


def test_sampled_eve_rates_match_scalar_loop():
    rng = np.random.default_rng(21)
    n, L, K = 40, 3, 2
    rows = complex_normal(rng, (n, L))
    W = complex_normal(rng, (L, K))
    f = complex_normal(rng, L)
    chi = np.array([1.0, 1.0])
    batch = metrics.eve_rates_sampled(rows, W, f, chi, 1, 0.05)
    for i in range(n):
        _, r = metrics.eve_sinr(rows[i], W, f, chi, 1, 0.05)
        assert abs(batch[i] - r) < 1e-12


def test_beampattern_gain_is_transmit_covariance_form():
    rng = np.random.default_rng(22)
    L, K = 4, 3
    row = complex_normal(rng, L)
    W = complex_normal(rng, (L, K))
    f = complex_normal(rng, L)
    chi = np.array([1.0, 0.0, 1.0])
    cov = sum(chi[k] * np.outer(W[:, k], W[:, k].conj()) for k in range(K))
    cov = cov + np.outer(f, f.conj())
    expect = float((row @ cov @ row.conj()).real)
    assert metrics.beampattern_gain(row, W, f, chi) == pytest.approx(expect)


def test_to_bits():
    assert metrics.to_bits(metrics.LN2) == pytest.approx(1.0)
    assert np.allclose(metrics.to_bits(np.array([0.0, 2 * metrics.LN2])),
                       [0.0, 2.0])


def test_secrecy_report_internal_consistency():
    rng = np.random.default_rng(23)
    sol = build_solution(rng)
    rep = metrics.secrecy_report(
        sol["W"], sol["f"], sol["chi"], sol["theta"], sol["phi"],
        sol["placements"], sol["G"], sol["h_users"], sol["bounds"],
        sigma2_U=1e-3, sigma2_E=1e-3, mc_samples=300,
        rng=np.random.default_rng(99))
    K, B = sol["K"], sol["B"]
    assert rep.user_rate.shape == (K, B)
    assert rep.eve_rate_nom.shape == (K, 1, B)
    assert np.all(rep.eve_rate_wc >= rep.eve_rate_nom - 1e-12)
    # sampling should find something strictly worse than the center
    assert np.any(rep.eve_rate_wc > rep.eve_rate_nom)
    assert np.array_equal(rep.assigned, np.argmax(sol["chi"], axis=1))
    for k in range(K):
        b = rep.assigned[k]
        want_nom = max(0.0, rep.user_rate[k, b] - rep.eve_rate_nom[k, :, b].max())
        want_wc = max(0.0, rep.user_rate[k, b] - rep.eve_rate_wc[k, :, b].max())
        assert rep.secrecy_nom[k] == pytest.approx(want_nom, abs=1e-12)
        assert rep.secrecy_wc[k] == pytest.approx(want_wc, abs=1e-12)
    assert rep.min_secrecy_nom == pytest.approx(rep.secrecy_nom.min())
    for b in range(B):
        active = sol["chi"][:, b].astype(bool)
        want = (np.sum(np.abs(sol["W"][b][:, active]) ** 2)
                + np.sum(np.abs(sol["f"][b]) ** 2))
        assert rep.beam_power[b] == pytest.approx(want)


def test_secrecy_report_zero_transmit_is_all_zero():
    rng = np.random.default_rng(24)
    sol = build_solution(rng)
    rep = metrics.secrecy_report(
        np.zeros_like(sol["W"]), np.zeros_like(sol["f"]), sol["chi"],
        sol["theta"], sol["phi"], sol["placements"], sol["G"],
        sol["h_users"], sol["bounds"], sigma2_U=1e-3, sigma2_E=1e-3,
        mc_samples=50, rng=np.random.default_rng(0))
    assert np.all(rep.user_rate == 0)
    assert np.all(rep.eve_rate_wc == 0)
    assert np.all(rep.secrecy_wc == 0)
    assert np.all(rep.beam_power == 0)
    assert np.all(rep.bp_gain == 0)


def test_secrecy_report_without_eves_reduces_to_user_rate():
    rng = np.random.default_rng(25)
    sol = build_solution(rng)
    rep = metrics.secrecy_report(
        sol["W"], sol["f"], sol["chi"], sol["theta"], sol["phi"],
        sol["placements"], sol["G"], sol["h_users"], bounds=[],
        sigma2_U=1e-3, sigma2_E=1e-3, mc_samples=0)
    assert rep.eve_rate_nom.shape == (sol["K"], 0, sol["B"])
    for k in range(sol["K"]):
        assert rep.secrecy_nom[k] == pytest.approx(
            rep.user_rate[k, rep.assigned[k]])


def test_secrecy_report_sampling_controls():
    rng = np.random.default_rng(26)
    sol = build_solution(rng)
    args = (sol["W"], sol["f"], sol["chi"], sol["theta"], sol["phi"],
            sol["placements"], sol["G"], sol["h_users"], sol["bounds"])
    with pytest.raises(ValueError):
        metrics.secrecy_report(*args, sigma2_U=1e-3, sigma2_E=1e-3,
                               mc_samples=10, rng=None)
    rep = metrics.secrecy_report(*args, sigma2_U=1e-3, sigma2_E=1e-3,
                                 mc_samples=0)
    assert np.array_equal(rep.eve_rate_wc, rep.eve_rate_nom)


def test_report_serialization_scales_to_bits():
    rng = np.random.default_rng(27)
    sol = build_solution(rng)
    rep = metrics.secrecy_report(
        sol["W"], sol["f"], sol["chi"], sol["theta"], sol["phi"],
        sol["placements"], sol["G"], sol["h_users"], sol["bounds"],
        sigma2_U=1e-3, sigma2_E=1e-3, mc_samples=0)
    d = json.loads(rep.to_json(bits=True))
    assert d["rate_unit"] == "bits/s/Hz"
    assert d["min_secrecy_nominal"] == pytest.approx(
        rep.min_secrecy_nom / metrics.LN2)
    nat = rep.as_dict(bits=False)
    assert nat["min_secrecy_nominal"] == pytest.approx(rep.min_secrecy_nom)
