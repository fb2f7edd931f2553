"""Initialization, the alternating loop's bookkeeping, and its failure
policy. Small instances; statistical claims live in the acceptance suite."""

import numpy as np
import pytest

from mris_isac import orchestrator as orc
from mris_isac.channel import effective_rows, synthesize
from mris_isac.scenario import SystemConfig, place_nodes
from mris_isac.solvers.beamformer import BeamformerResult
from mris_isac.solvers.common import selected_beams, surrogate_floor
from mris_isac.uncertainty import bounds_for_layout
from mris_isac.wmmse import refresh


def tiny_case(seed=0, **overrides):
    base = dict(L=3, K=2, J=1, M_r=2, M_c=2, N_r=0, N_c=0, seed=seed,
                Gamma_user=0.02, ao_max_iters=3, pdd_outer_max=0)
    base.update(overrides)
    cfg = SystemConfig(**base).validate()
    rng = np.random.default_rng(seed)
    layout = place_nodes(cfg, rng)
    channels = synthesize(cfg, layout, rng)
    bounds = bounds_for_layout(cfg, layout)
    return cfg, layout, channels, bounds


def test_initialize_solution_invariants():
    cfg, _, channels, bounds = tiny_case(seed=1, N_r=1, N_c=2, M_r=1, M_c=3)
    ws, state = orc.initialize_solution(cfg, channels, bounds,
                                        rng=np.random.default_rng(1))
    assert np.allclose(np.abs(state.theta), 1.0, atol=1e-12)
    assert np.allclose(np.abs(state.phi), 1.0, atol=1e-12)
    assert state.chi.shape == (cfg.K, cfg.B)
    assert np.all(np.isin(state.chi, [0.0, 1.0]))
    assert np.all(state.chi.sum(axis=1) == 1)
    rows = ws.user_rows(state.theta, state.phi)
    gains = np.linalg.norm(rows, axis=2)
    assert np.array_equal(np.argmax(state.chi, axis=1),
                          np.argmax(gains, axis=1))
    # proxies fill every beam at the 0.9/0.1 power split
    for b in range(cfg.B):
        user_pw = np.sum(np.abs(state.W[b]) ** 2)
        an_pw = np.sum(np.abs(state.f[b]) ** 2)
        assert user_pw == pytest.approx(0.9 * cfg.P_max, rel=1e-9)
        assert an_pw == pytest.approx(0.1 * cfg.P_max, rel=1e-9)
    assert state.aux.t == pytest.approx(
        surrogate_floor(ws, rows, state.W, state.f, state.chi, state.aux))


def test_initialize_is_deterministic():
    cfg, _, channels, bounds = tiny_case(seed=2)
    ws1, s1 = orc.initialize_solution(cfg, channels, bounds,
                                      rng=np.random.default_rng(7))
    ws2, s2 = orc.initialize_solution(cfg, channels, bounds,
                                      rng=np.random.default_rng(7))
    assert np.array_equal(s1.theta, s2.theta)
    assert np.array_equal(s1.W, s2.W)
    assert s1.aux.t == s2.aux.t


def test_sense_floor_modes():
    cfg, layout, channels, bounds = tiny_case(seed=3)
    placements = [(np.zeros((cfg.M, 0)), np.ones(cfg.M))]
    theta = np.ones(cfg.M, complex)
    phi = np.zeros(0, complex)
    floors = orc.sense_floor_watts(cfg, channels, bounds, placements,
                                   theta, phi)
    rows = effective_rows(theta, phi, placements, bounds[0].h_bar, channels.G)
    best = float(np.max(np.sum(np.abs(rows) ** 2, axis=1)))
    assert floors.shape == (1,)
    assert floors[0] == pytest.approx(cfg.gamma_sense_frac * cfg.P_max * best)

    cfg_abs = cfg.with_overrides(gamma_sense_W=1e-7)
    floors_abs = orc.sense_floor_watts(cfg_abs, channels, bounds, placements,
                                       theta, phi)
    assert np.allclose(floors_abs, 1e-7)

    cfg_noj = cfg.with_overrides(J=0)
    assert orc.sense_floor_watts(cfg_noj, channels, [], placements,
                                 theta, phi).size == 0


def test_materialize_proxies_touches_only_idle_beams():
    cfg, _, channels, bounds = tiny_case(seed=4, N_r=1, N_c=2, M_r=1, M_c=3)
    ws, state = orc.initialize_solution(cfg, channels, bounds,
                                        rng=np.random.default_rng(4))
    rows = ws.user_rows(state.theta, state.phi)
    chi = np.zeros((cfg.K, cfg.B))
    chi[:, 0] = 1.0                       # beam 0 busy, beam 1 idle
    W = np.array(state.W)
    W[0] = 123.0                          # sentinel on the busy beam
    f = np.array(state.f)
    f[0] = -5.0
    orc.materialize_proxies(ws, rows, W, f, chi)
    assert np.all(W[0] == 123.0)
    assert np.all(f[0] == -5.0)
    for k in range(cfg.K):
        w = W[1][:, k]
        assert np.linalg.norm(w) == pytest.approx(
            np.sqrt(0.9 * cfg.P_max / cfg.K))
        # matched to the cascade row (colinear up to conjugation)
        cosang = abs(np.vdot(w, np.conj(rows[k, 1]))) / (
            np.linalg.norm(w) * np.linalg.norm(rows[k, 1]))
        assert cosang == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(f[1], np.sqrt(0.1 * cfg.P_max / cfg.L))


def test_run_ao_log_structure_and_monotone_floor():
    cfg, _, channels, bounds = tiny_case(seed=5, pdd_outer_max=3,
                                         pdd_inner_max=5)
    ws, state = orc.initialize_solution(cfg, channels, bounds,
                                        rng=np.random.default_rng(5))
    orc.run_ao(ws, state)
    assert 1 <= state.iterations == len(state.log) <= cfg.ao_max_iters
    trace = []
    for it, rec in enumerate(state.log, start=1):
        assert rec["iteration"] == it
        assert set(rec) >= {"iteration", "t", "blocks", "assigned"}
        for blk in rec["blocks"]:
            assert set(blk) >= {"block", "ok", "status", "t", "seconds"}
        trace.append(rec["t"])
    assert all(b >= a - 1e-4 for a, b in zip(trace, trace[1:]))
    assert state.aux.t == pytest.approx(trace[-1])
    assert np.allclose(np.abs(state.theta), 1.0, atol=1e-12)


def test_run_ao_convergence_flag():
    cfg, _, channels, bounds = tiny_case(seed=6, tol_ao=10.0, ao_max_iters=5)
    ws, state = orc.initialize_solution(cfg, channels, bounds,
                                        rng=np.random.default_rng(6))
    orc.run_ao(ws, state)
    assert state.converged
    assert state.iterations == 2          # stalls at the first comparison


def test_run_ao_secrecy_logging():
    cfg, _, channels, bounds = tiny_case(seed=7, ao_max_iters=1)
    ws, state = orc.initialize_solution(cfg, channels, bounds,
                                        rng=np.random.default_rng(7))
    orc.run_ao(ws, state, channels=channels, bounds=bounds,
               log_mc_samples=40, rng=np.random.default_rng(0))
    rec = state.log[0]
    assert "min_secrecy_nom" in rec and "min_secrecy_wc" in rec
    assert rec["min_secrecy_wc"] <= rec["min_secrecy_nom"] + 1e-12


def test_run_ao_degrades_and_restores_best(monkeypatch):
    cfg, _, channels, bounds = tiny_case(seed=8, ao_max_iters=4)
    ws, state = orc.initialize_solution(cfg, channels, bounds,
                                        rng=np.random.default_rng(8))
    real = orc.solve_beamformer
    calls = {"n": 0}

    def failing_second(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] >= 2:
            return BeamformerResult(ok=False, status="error",
                                    message="injected failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(orc, "solve_beamformer", failing_second)
    orc.run_ao(ws, state)
    assert state.degraded
    assert state.log[-1]["t"] is None
    assert state.log[-1]["note"] == "beamformer unrecoverable"
    # the restored point is the best completed iteration
    t_first = state.log[0]["t"]
    assert state.aux.t == pytest.approx(t_first)
    rows = ws.user_rows(state.theta, state.phi)
    refresh(state.aux, rows, state.W, state.f, state.chi, ws.sigma2_U)
    assert np.isfinite(
        surrogate_floor(ws, rows, state.W, state.f, state.chi, state.aux))


def test_solve_scenario_deterministic():
    cfg, _, channels, bounds = tiny_case(seed=9, ao_max_iters=2)
    ws1, s1 = orc.solve_scenario(cfg, channels, bounds)
    ws2, s2 = orc.solve_scenario(cfg, channels, bounds)
    assert s1.aux.t == s2.aux.t
    assert np.array_equal(s1.W, s2.W)
    assert np.array_equal(s1.theta, s2.theta)
    assert [r["t"] for r in s1.log] == [r["t"] for r in s2.log]
    assert set(np.argmax(s1.chi, axis=1)) <= set(range(cfg.B))
    assert selected_beams(s1.chi) == selected_beams(s2.chi)
