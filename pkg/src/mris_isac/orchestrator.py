"""Alternating-optimization driver.

One outer iteration runs the block sequence on a scaled workspace:
closed-form auxiliary refresh, the transmit beamformer program, the two
penalty-dual phase blocks (fixed surface, then movable surface), and the
penalized beam-assignment program. Eve-side slack anchors are rebuilt
from closed-form robust bounds at every block entry so each conic
subproblem starts from a certificate that holds at the incumbent point;
without that, anchors computed at an older iterate can make a subproblem
infeasible for no physical reason.

Failure policy: the beamformer block has its own slack restoration and
only reports failure when even that is infeasible, which ends the run
with the best state seen so far flagged degraded. The phase and
assignment blocks degrade softly: on failure the incumbent variables are
kept, the failure is logged, and the loop continues (the next beamformer
pass usually repairs the iterate).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import mris
from .channel import ChannelSet, effective_rows
from .metrics import secrecy_report
from .scenario import SystemConfig
from .solvers.assignment import solve_assignment
from .solvers.beamformer import solve_beamformer
from .solvers.common import (Workspace, rebuild_anchors, selected_beams,
                             surrogate_floor)
from .solvers.pdd import pdd_phase
from .wmmse import AuxiliaryState, refresh


@dataclass
class SolutionState:
    """Full decision state plus the per-iteration log."""

    W: np.ndarray               # (B, L, K) beamformers, proxies on idle beams
    f: np.ndarray               # (B, L) artificial-noise vectors
    theta: np.ndarray           # (M,) fixed-surface phases, unit modulus
    phi: np.ndarray             # (N,) movable-surface phases, unit modulus
    chi: np.ndarray             # (K, B) binary assignment, unit row sums
    aux: AuxiliaryState
    log: list = field(default_factory=list)
    converged: bool = False
    degraded: bool = False
    iterations: int = 0

    def snapshot(self):
        return {
            "W": self.W.copy(), "f": self.f.copy(),
            "theta": self.theta.copy(), "phi": self.phi.copy(),
            "chi": self.chi.copy(), "aux": copy.deepcopy(self.aux),
        }

    def restore(self, snap):
        self.W = snap["W"]
        self.f = snap["f"]
        self.theta = snap["theta"]
        self.phi = snap["phi"]
        self.chi = snap["chi"]
        self.aux = snap["aux"]


def sense_floor_watts(cfg: SystemConfig, channels: ChannelSet, bounds,
                      placements, theta, phi):
    """(J,) beam-gain floors in watts.

    Either the configured absolute override, or a fraction of the largest
    beam gain achievable toward each Eve center with full power matched
    to the nominal cascade at the given phases.
    """
    if cfg.J == 0:
        return np.zeros(0)
    if cfg.gamma_sense_W is not None:
        return np.broadcast_to(np.asarray(cfg.gamma_sense_W, float),
                               (cfg.J,)).copy()
    out = np.empty(cfg.J)
    for j in range(cfg.J):
        rows = effective_rows(theta, phi, placements,
                              bounds[j].h_bar, channels.G)
        best = float(np.max(np.sum(np.abs(rows) ** 2, axis=1)))
        out[j] = cfg.gamma_sense_frac * cfg.P_max * best
    return out


def materialize_proxies(ws: Workspace, rows, W, f, chi):
    """Refresh matched-filter stand-ins on beams serving no user.

    The assignment program evaluates candidate beams through the fixed
    W, f, so idle beams need plausible beamformers: per user a matched
    filter carrying an equal share of 0.9 P_max (as if every user moved
    there), plus the isotropic noise vector at 0.1 P_max. Beams with
    users keep their solved variables untouched.
    """
    cfg = ws.cfg
    K, B = chi.shape
    L = ws.G.shape[1]
    sel = set(selected_beams(chi))
    p_user = np.sqrt(0.9 * cfg.P_max / K)
    p_an = np.sqrt(0.1 * cfg.P_max / L)
    for b in range(B):
        if b in sel:
            continue
        for k in range(K):
            nrm = np.linalg.norm(rows[k, b])
            if nrm > 1e-300:
                W[b][:, k] = p_user * np.conj(rows[k, b]) / nrm
            else:
                W[b][:, k] = 0.0
        f[b] = p_an


def initialize_solution(cfg: SystemConfig, channels: ChannelSet, bounds,
                        placements=None, rng=None):
    """Build the scaled workspace and a feasible starting state.

    Phases are uniform random; each user starts on the beam with the
    largest cascade gain; beamformers are matched filters sharing
    0.9 P_max equally across users with isotropic noise at 0.1 P_max;
    the Eve-side anchors are the nominal intercept rates plus 0.05 nats.
    Returns (workspace, state).
    """
    if placements is None:
        placements = mris.all_placements(cfg.M_r, cfg.M_c,
                                         cfg.N_r, cfg.N_c)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    theta = mris.random_phases(cfg.M, rng)
    phi = mris.random_phases(cfg.N, rng)

    gamma_raw = sense_floor_watts(cfg, channels, bounds, placements,
                                  theta, phi)
    ws = Workspace.build(cfg, channels, bounds, placements, gamma_raw)

    K, B, L = cfg.K, cfg.B, cfg.L
    rows = ws.user_rows(theta, phi)
    chi = np.zeros((K, B))
    gains = np.linalg.norm(rows, axis=2)          # (K, B)
    chi[np.arange(K), np.argmax(gains, axis=1)] = 1.0

    W = np.zeros((B, L, K), complex)
    f = np.zeros((B, L), complex)
    materialize_proxies(ws, rows, W, f, np.zeros((K, B)))  # fill all beams

    aux = AuxiliaryState.empty(K, B, cfg.J)
    refresh(aux, rows, W, f, chi, ws.sigma2_U)
    aux.v, aux.v_bar = rebuild_anchors(ws, W, f, chi, theta, phi,
                                       robust=False, margin=0.05)
    aux.t = surrogate_floor(ws, rows, W, f, chi, aux)

    state = SolutionState(W=W, f=f, theta=theta, phi=phi, chi=chi, aux=aux)
    return ws, state


def _block_record(name, ok, status, t, seconds, **extra):
    rec = {"block": name, "ok": bool(ok), "status": str(status),
           "t": float(t) if np.isfinite(t) else None,
           "seconds": round(float(seconds), 4)}
    rec.update(extra)
    return rec


def run_ao(ws: Workspace, state: SolutionState, channels=None, bounds=None,
           engine="CLARABEL", log_mc_samples=0, rng=None):
    """Alternate the four blocks until the surrogate floor stalls.

    channels/bounds (raw, unscaled) are only needed when per-iteration
    secrecy logging is requested via log_mc_samples > 0. Mutates and
    returns `state`.
    """
    cfg = ws.cfg
    best = state.snapshot()
    best_t = -np.inf
    t_prev = None

    for it in range(1, cfg.ao_max_iters + 1):
        blocks = []

        rows = ws.user_rows(state.theta, state.phi)
        materialize_proxies(ws, rows, state.W, state.f, state.chi)
        refresh(state.aux, rows, state.W, state.f, state.chi, ws.sigma2_U)
        state.aux.v, state.aux.v_bar = rebuild_anchors(
            ws, state.W, state.f, state.chi, state.theta, state.phi)

        res4 = solve_beamformer(ws, state.W, state.f, state.chi,
                                state.theta, state.phi, state.aux, engine)
        blocks.append(_block_record(
            "beamformer", res4.ok, res4.status, res4.t, res4.solve_time,
            restored=res4.restored, message=res4.message))
        if not res4.ok:
            state.degraded = True
            state.log.append({"iteration": it, "t": None, "blocks": blocks,
                              "note": "beamformer unrecoverable"})
            break
        state.W, state.f = res4.W, res4.f
        state.aux.v, state.aux.v_bar = res4.v, res4.v_bar

        for which, rho in (("theta", cfg.rho2), ("phi", cfg.rho3)):
            if cfg.pdd_outer_max <= 0:
                break       # phase blocks disabled by configuration
            if which == "phi" and cfg.N == 0:
                continue
            state.aux.v, state.aux.v_bar = rebuild_anchors(
                ws, state.W, state.f, state.chi, state.theta, state.phi)
            res = pdd_phase(
                ws, state.W, state.f, state.chi, state.theta, state.phi,
                state.aux, which, engine=engine, rho=rho,
                varpi=cfg.varpi1, threshold=cfg.pdd_threshold,
                tol_inner=cfg.tol_pdd_inner, tol_outer=cfg.tol_pdd_outer,
                max_inner=cfg.pdd_inner_max, max_outer=cfg.pdd_outer_max)
            blocks.append(_block_record(
                f"pdd_{which}", res.ok, res.status or "ok", res.t,
                res.solve_time, outer=res.outer_iters,
                residual=(None if not np.isfinite(res.residual)
                          else float(res.residual)),
                message=res.message))
            if res.ok:
                if which == "theta":
                    state.theta = res.phases
                else:
                    state.phi = res.phases
                state.aux.v, state.aux.v_bar = res.v, res.v_bar

        rows = ws.user_rows(state.theta, state.phi)
        materialize_proxies(ws, rows, state.W, state.f, state.chi)
        refresh(state.aux, rows, state.W, state.f, state.chi, ws.sigma2_U)
        state.aux.v, state.aux.v_bar = rebuild_anchors(
            ws, state.W, state.f, state.chi, state.theta, state.phi)

        if cfg.B > 1:
            res7 = solve_assignment(
                ws, state.W, state.f, state.chi, state.theta, state.phi,
                state.aux, rho1=cfg.rho1, max_rounds=cfg.assign_max_rounds,
                tol=cfg.tol_assign, engine=engine)
            blocks.append(_block_record(
                "assignment", res7.ok, res7.status, res7.t, res7.solve_time,
                rounds=res7.rounds, gap=(None if not np.isfinite(res7.gap)
                                         else float(res7.gap)),
                message=res7.message))
            if res7.ok and not np.array_equal(res7.chi, state.chi):
                state.chi = res7.chi
                materialize_proxies(ws, rows, state.W, state.f, state.chi)
                refresh(state.aux, rows, state.W, state.f, state.chi,
                        ws.sigma2_U)
                state.aux.v, state.aux.v_bar = rebuild_anchors(
                    ws, state.W, state.f, state.chi, state.theta, state.phi)

        t_now = surrogate_floor(ws, rows, state.W, state.f, state.chi,
                                state.aux)
        state.aux.t = t_now
        rec = {"iteration": it, "t": t_now, "blocks": blocks,
               "assigned": np.argmax(state.chi, axis=1).tolist()}
        if log_mc_samples and channels is not None and bounds is not None:
            rep = secrecy_report(
                state.W, state.f, state.chi, state.theta, state.phi,
                ws.placements, channels.G, channels.h_users, bounds,
                cfg.sigma2_U, cfg.sigma2_E,
                mc_samples=log_mc_samples, rng=rng)
            rec["min_secrecy_nom"] = rep.min_secrecy_nom
            rec["min_secrecy_wc"] = rep.min_secrecy_wc
        state.log.append(rec)

        if t_now > best_t:
            best_t = t_now
            best = state.snapshot()

        if t_prev is not None and \
                abs(t_now - t_prev) <= cfg.tol_ao * max(abs(t_now), 1e-6):
            state.converged = True
            break
        t_prev = t_now

    state.iterations = len(state.log)
    if state.degraded and np.isfinite(best_t):
        state.restore(best)
        state.aux.t = best_t
    return state


def solve_scenario(cfg: SystemConfig, channels: ChannelSet, bounds,
                   placements=None, rng=None, engine="CLARABEL",
                   log_mc_samples=0):
    """Initialization plus the full alternating loop in one call."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    ws, state = initialize_solution(cfg, channels, bounds, placements, rng)
    run_ao(ws, state, channels=channels, bounds=bounds, engine=engine,
           log_mc_samples=log_mc_samples, rng=rng)
    return ws, state
