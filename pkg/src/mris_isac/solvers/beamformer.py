"""Transmit-side update: per-beam beamformers and artificial noise.

For fixed phases and assignment this solves the surrogate max-min secrecy
program: maximize t subject to per-beam power, per-user surrogate-rate
floors, the secrecy coupling t <= y - v, and the robust LMI families
(Eve signal budget, Eve interference floor, sensing floor) built from
Taylor expansions around the previous beamformers.

If the program is infeasible the restoration variant relaxes the rate and
sensing floors with slacks, minimizes total slack first, then re-maximizes
t under the minimal slack budget (lexicographic order).
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .. import robustify as rb
from ..wmmse import AuxiliaryState
from .common import Workspace, beam_users, selected_beams
from .conic import solve_conic


@dataclass
class BeamformerResult:
    ok: bool
    t: float = -np.inf
    W: np.ndarray = None        # (B, L, K)
    f: np.ndarray = None        # (B, L)
    v: np.ndarray = None        # (K, B)
    v_bar: np.ndarray = None    # (K, J, B)
    lambdas: dict = None
    restored: bool = False
    status: str = ""
    message: str = ""
    solve_time: float = 0.0


def _build(ws: Workspace, W_prev, f_prev, chi, theta, phi,
           aux: AuxiliaryState, with_slacks):
    cfg = ws.cfg
    J = cfg.J
    u_all = ws.beam_profiles(theta, phi)
    rows = ws.user_rows(theta, phi)
    sel = selected_beams(chi)

    t = cp.Variable(name="t")
    w_vars, f_vars, v_vars, vb_vars, lam_vars = {}, {}, {}, {}, {}
    s4, s5 = {}, {}
    cons = []

    for b in sel:
        users = beam_users(chi, b)
        D = u_all[b][:, None] * ws.G
        # every Eve-side signature D w lives in range(D), of rank at most
        # min(M, L); projecting the ball certificates onto that subspace
        # (exact: the complement block of the LMI is just lambda >= 0)
        # keeps the PSD cones at size min(M, L)+1 instead of M+1
        Q, R = np.linalg.qr(D)
        h_red = [np.conj(Q.T) @ ws.h_bars[j] for j in range(J)]
        f_b = cp.Variable(cfg.L, complex=True, name=f"f{b}")
        f_vars[b] = f_b
        for k in users:
            w_vars[(k, b)] = cp.Variable(cfg.L, complex=True, name=f"w{k}_{b}")
        cons.append(
            cp.sum_squares(cp.hstack([w_vars[(k, b)] for k in users] + [f_b]))
            <= cfg.P_max)

        x_exp = {k: R @ W_prev[b][:, k] for k in users}
        x_cur = {k: R @ w_vars[(k, b)] for k in users}
        x_exp_f = R @ f_prev[b]
        x_cur_f = R @ f_b

        for k in users:
            row = rows[k, b]
            z = aux.z[k, b]
            mu = aux.mu[k, b]
            amps = {i: row @ w_vars[(i, b)] for i in users}
            an = row @ f_b
            power = sum(cp.square(cp.abs(amps[i])) for i in users) \
                + cp.square(cp.abs(an))
            z_t = np.log(z) - z - z * abs(mu) ** 2 * ws.sigma2_U + 1.0
            y = 2.0 * z * cp.real(np.conj(mu) * amps[k]) + z_t \
                - z * abs(mu) ** 2 * power

            v_kb = cp.Variable(name=f"v{k}_{b}")
            v_vars[(k, b)] = v_kb
            if with_slacks:
                s = cp.Variable(nonneg=True)
                s4[(k, b)] = s
                cons.append(y >= cfg.Gamma_user[k] - s)
            else:
                cons.append(y >= cfg.Gamma_user[k])
            cons.append(t <= y - v_kb)

            for j in range(J):
                vb = cp.Variable(nonneg=True, name=f"vb{k}_{j}_{b}")
                vb_vars[(k, j, b)] = vb
                h_bar = h_red[j]
                epsj = ws.eps_balls[j]
                vb_tau = max(aux.v_bar[k, j, b], ws.sigma2_E)

                q9 = rb.taylor_form(x_cur[k], x_exp[k], h_bar)
                rhs9 = rb.sca_leak_budget(aux.v[k, b], vb_tau, v_kb, vb)
                lam9 = cp.Variable(nonneg=True)
                lam_vars[("C9", k, j, b)] = lam9
                cons.append(rb.assemble_lmi(q9, rhs9, "upper", epsj, lam9) >> 0)

                q10 = rb.taylor_form(x_cur_f, x_exp_f, h_bar)
                for i in users:
                    if i != k:
                        q10 = q10 + rb.taylor_form(x_cur[i], x_exp[i], h_bar)
                lam10 = cp.Variable(nonneg=True)
                lam_vars[("C10", k, j, b)] = lam10
                cons.append(rb.assemble_lmi(q10, vb - ws.sigma2_E, "lower",
                                            epsj, lam10) >> 0)

        for j in range(J):
            q5 = rb.taylor_form(x_cur_f, x_exp_f, h_red[j])
            for i in users:
                q5 = q5 + rb.taylor_form(x_cur[i], x_exp[i], h_red[j])
            lam5 = cp.Variable(nonneg=True)
            lam_vars[("C5", j, b)] = lam5
            if with_slacks:
                s = cp.Variable(nonneg=True)
                s5[(j, b)] = s
                rhs5 = ws.gamma_sense[j] - s
            else:
                rhs5 = ws.gamma_sense[j]
            cons.append(rb.assemble_lmi(q5, rhs5, "lower",
                                        ws.eps_balls[j], lam5) >> 0)

    return t, w_vars, f_vars, v_vars, vb_vars, lam_vars, cons, s4, s5


def _extract(ws, W_prev, f_prev, aux, t, w_vars, f_vars, v_vars, vb_vars,
             lam_vars, restored, sol):
    W_new = np.array(W_prev, copy=True)
    f_new = np.array(f_prev, copy=True)
    v_new = np.array(aux.v, copy=True)
    vb_new = np.array(aux.v_bar, copy=True)
    for (k, b), var in w_vars.items():
        W_new[b][:, k] = var.value
    for b, var in f_vars.items():
        f_new[b] = var.value
    for (k, b), var in v_vars.items():
        v_new[k, b] = var.value
    for (k, j, b), var in vb_vars.items():
        vb_new[k, j, b] = var.value
    lambdas = {key: float(var.value) for key, var in lam_vars.items()
               if var.value is not None}
    return BeamformerResult(
        ok=True, t=float(t.value), W=W_new, f=f_new, v=v_new, v_bar=vb_new,
        lambdas=lambdas, restored=restored, status=sol.status,
        message=sol.message, solve_time=sol.solve_time)


def solve_beamformer(ws: Workspace, W_prev, f_prev, chi, theta, phi,
                     aux: AuxiliaryState, engine="CLARABEL") -> BeamformerResult:
    """One beamformer block update; returns updated transmit variables or a
    failure report after restoration also fails."""
    t, w_v, f_v, v_v, vb_v, lam_v, cons, _, _ = _build(
        ws, W_prev, f_prev, chi, theta, phi, aux, with_slacks=False)
    sol = solve_conic(cp.Problem(cp.Maximize(t), cons), engine)
    if sol.usable:
        return _extract(ws, W_prev, f_prev, aux, t, w_v, f_v, v_v, vb_v,
                        lam_v, False, sol)

    # lexicographic feasibility restoration on the rate and sensing floors
    t2, w_v, f_v, v_v, vb_v, lam_v, cons2, s4, s5 = _build(
        ws, W_prev, f_prev, chi, theta, phi, aux, with_slacks=True)
    slack_sum = sum(s4.values()) + sum(s5.values())
    sol1 = solve_conic(cp.Problem(cp.Minimize(slack_sum), cons2), engine)
    if not sol1.usable:
        return BeamformerResult(
            ok=False, status=sol1.status,
            message=f"restoration stage 1 failed: {sol1.message}",
            solve_time=sol.solve_time + sol1.solve_time)
    budget = float(slack_sum.value) * (1.0 + 1e-6) + 1e-9
    sol2 = solve_conic(
        cp.Problem(cp.Maximize(t2), cons2 + [slack_sum <= budget]), engine)
    if not sol2.usable:
        return BeamformerResult(
            ok=False, status=sol2.status,
            message=f"restoration stage 2 failed: {sol2.message}",
            solve_time=sol.solve_time + sol1.solve_time + sol2.solve_time)
    res = _extract(ws, W_prev, f_prev, aux, t2, w_v, f_v, v_v, vb_v,
                   lam_v, True, sol2)
    res.solve_time += sol.solve_time + sol1.solve_time
    return res
