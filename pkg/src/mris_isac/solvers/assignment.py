"""Beam-pattern assignment via the penalized big-M relaxation.

With transmit variables and phases fixed, the binary user-to-beam map chi
is relaxed to [0, 1]; per-(user, beam) slacks carry the surrogate rate
(sigma slacks) and the secrecy margin (r slacks), both switched off by
big-M terms when chi is zero, and a linearized concave penalty
rho1 * (chi - chi^2) pushes the relaxation toward binary points over a
few rounds. The robust LMI families stay active: the quadratic forms are
exact (transmit fixed) and the interference/sensing aggregates are
affine in chi.

The round loop re-solves one compiled problem with the penalty anchor as
a parameter. Each relaxed point is rounded per user to its largest
entry, the rounded corner is scored by its true secrecy floor, and the
penalty is re-anchored at that corner; the best corner seen (incumbent
included) is returned. The incumbent assignment is kept whenever the
first solve already fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .. import robustify as rb
from ..wmmse import AuxiliaryState, refresh, surrogate_rate
from .common import Workspace, rebuild_anchors, selected_beams
from .conic import solve_conic


@dataclass
class AssignmentResult:
    ok: bool
    chi: np.ndarray             # (K, B) binary, best corner seen
    t: float = -np.inf          # true secrecy floor at that corner
    rounds: int = 0
    gap: float = np.inf         # final sum(chi - chi^2) of the relaxation
    fallback: bool = False
    v: np.ndarray = None
    v_bar: np.ndarray = None
    status: str = ""
    message: str = ""
    solve_time: float = 0.0
    objective_trace: list = field(default_factory=list)  # (relaxed, corner)


def big_m_value(rows, P_max, sigma2):
    """Smallest safe deactivation constant: the largest achievable rate
    plus one, from the matched-filter SNR bound."""
    best = float(np.max(np.sum(np.abs(rows) ** 2, axis=2)))
    return float(np.log1p(P_max * best / sigma2) + 1.0)


def round_assignment(chi_relaxed):
    """Per-user argmax rounding to a feasible binary assignment."""
    K, B = chi_relaxed.shape
    out = np.zeros((K, B))
    out[np.arange(K), np.argmax(chi_relaxed, axis=1)] = 1.0
    return out


def corner_floor(ws: Workspace, rows, W, f, chi_bin, theta, phi):
    """Value of a binary assignment at the fixed transmit point.

    Returns (floor, v, v_bar): the min over users of achieved rate minus
    worst-case intercept anchor, with the anchors rebuilt at this corner.
    -inf when some user misses its rate floor there.
    """
    cfg = ws.cfg
    K, B = chi_bin.shape
    aux = AuxiliaryState.empty(K, B, cfg.J)
    refresh(aux, rows, W, f, chi_bin, ws.sigma2_U)
    v, v_bar = rebuild_anchors(ws, W, f, chi_bin, theta, phi)
    worst = np.inf
    for k in range(K):
        b = int(np.argmax(chi_bin[k]))
        y = surrogate_rate(aux.z[k, b], aux.mu[k, b], rows[k, b],
                           W[b], f[b], chi_bin[:, b], k, ws.sigma2_U)
        if y < cfg.Gamma_user[k] - 1e-9:
            return -np.inf, v, v_bar
        worst = min(worst, y - v[k, b])
    return float(worst), v, v_bar


def solve_assignment(ws: Workspace, W, f, chi_cur, theta, phi,
                     aux: AuxiliaryState, rho1=0.5, max_rounds=10,
                     tol=1e-4, engine="CLARABEL") -> AssignmentResult:
    """Update the user-to-beam assignment; keeps the incumbent on failure."""
    cfg = ws.cfg
    K, B, J = cfg.K, cfg.B, cfg.J
    if B == 1:
        return AssignmentResult(ok=True, chi=np.ones((K, 1)), gap=0.0,
                                rounds=0, t=aux.t)

    rows = ws.user_rows(theta, phi)
    u_all = ws.beam_profiles(theta, phi)
    M_big = big_m_value(rows, cfg.P_max, ws.sigma2_U)
    # the secrecy rows also need to absorb the intercept-rate floor of
    # whichever pair is switched off, so their constant is widened by the
    # largest anchor
    M_sec = M_big + (float(np.max(aux.v)) if np.size(aux.v) else 0.0) + 1.0

    # constant pieces of the affine-in-chi surrogate rates
    zmu2 = aux.z * np.abs(aux.mu) ** 2                  # (K, B)
    P_cross = np.empty((K, B, K))
    c0 = np.empty((K, B))
    for k in range(K):
        for b in range(B):
            amps = rows[k, b] @ W[b]
            P_cross[k, b] = np.abs(amps) ** 2
            z = aux.z[k, b]
            mu = aux.mu[k, b]
            z_t = np.log(z) - z - z * abs(mu) ** 2 * ws.sigma2_U + 1.0
            c0[k, b] = (2.0 * z * (np.conj(mu) * amps[k]).real + z_t
                        - zmu2[k, b] * abs(rows[k, b] @ f[b]) ** 2)

    chi = cp.Variable((K, B), nonneg=True)
    sig = cp.Variable((K, B), nonneg=True)
    r = cp.Variable((K, B), nonneg=True)
    t = cp.Variable()
    v = cp.Variable((K, B))
    # flattened (k, j) rows; a 3-d variable would force a slow backend
    vb = cp.Variable((K * J, B), nonneg=True) if J else None
    chi_tau = cp.Parameter((K, B), nonneg=True)

    cons = [cp.sum(chi, axis=1) == 1, chi <= 1,
            sig <= M_big * chi, r <= M_sec * chi,
            cp.sum(sig, axis=1) >= cfg.Gamma_user,
            t <= cp.min(cp.sum(r, axis=1))]
    if J == 0:
        cons.append(v == 0)
    for k in range(K):
        for b in range(B):
            y_kb = c0[k, b] - (zmu2[k, b] * P_cross[k, b]) @ chi[:, b]
            # rate and secrecy caps are conditional on chi_kb = 1; the
            # slack term switches them off for pairs left unassigned,
            # otherwise any candidate pair with a negative secrecy margin
            # would make the whole program infeasible
            cons.append(sig[k, b] <= y_kb + M_big * (1.0 - chi[k, b]))
            cons.append(r[k, b] <= y_kb - v[k, b] + M_sec * (1.0 - chi[k, b]))

    sel_inc = selected_beams(chi_cur)
    for b in range(B):
        D = u_all[b][:, None] * ws.G
        # project signatures and Eve centers onto range(D): exact, and it
        # caps each LMI at size min(M, L)+1 (see the beamformer block)
        Q, R = np.linalg.qr(D)
        x_users = [R @ W[b][:, i] for i in range(K)]
        x_f = R @ f[b]
        for j in range(J):
            h_bar = np.conj(Q.T) @ ws.h_bars[j]
            epsj = ws.eps_balls[j]
            forms = [rb.exact_form(x, h_bar) for x in x_users]
            f_form = rb.exact_form(x_f, h_bar)
            for k in range(K):
                vb_tau = max(aux.v_bar[k, j, b], ws.sigma2_E)
                rhs9 = rb.sca_leak_budget(aux.v[k, b], vb_tau,
                                          v[k, b], vb[k * J + j, b])
                lam9 = cp.Variable(nonneg=True)
                cons.append(rb.assemble_lmi(forms[k], rhs9, "upper",
                                            epsj, lam9) >> 0)
                q10 = rb.aggregate(forms, f_form, chi[:, b], exclude=k)
                lam10 = cp.Variable(nonneg=True)
                cons.append(rb.assemble_lmi(q10, vb[k * J + j, b] - ws.sigma2_E,
                                            "lower", epsj, lam10) >> 0)
            if b in sel_inc:
                q5 = rb.aggregate(forms, f_form, chi[:, b])
                lam5 = cp.Variable(nonneg=True)
                cons.append(rb.assemble_lmi(q5, ws.gamma_sense[j], "lower",
                                            epsj, lam5) >> 0)

    # linearized penalty; the anchor-square constant is added when reporting
    penalty = cp.sum(chi) - 2.0 * cp.sum(cp.multiply(chi_tau, chi))
    problem = cp.Problem(cp.Maximize(t - rho1 * penalty), cons)

    # every round: solve the relaxation, round to a corner, score the
    # corner by its true floor, and re-anchor the penalty at the corner
    # (never at a fractional point, where the linearized penalty loses its
    # gradient and the big-M slack freezes the iterate mid-simplex)
    chi_inc = np.asarray(chi_cur, float)
    best_chi = chi_inc.copy()
    best_val, best_v, best_vb = corner_floor(ws, rows, W, f, best_chi,
                                             theta, phi)
    seen = {tuple(np.argmax(best_chi, axis=1))}

    chi_tau.value = chi_inc
    total_time = 0.0
    trace = []
    gap = np.inf
    rounds = 0
    solved = False
    for rounds in range(1, max_rounds + 1):
        sol = solve_conic(problem, engine)
        total_time += sol.solve_time
        if not sol.usable:
            detail = sol.message or f"{sol.engine} returned {sol.status}"
            if solved:
                break
            return AssignmentResult(
                ok=False, chi=chi_inc.copy(), fallback=True,
                rounds=rounds, status=sol.status,
                message=f"round {rounds}: {detail}",
                solve_time=total_time, objective_trace=trace)
        solved = True
        chi_star = np.clip(chi.value, 0.0, 1.0)
        gap = float(np.sum(chi_star - chi_star ** 2))
        corner = round_assignment(chi_star)
        val, v_c, vb_c = corner_floor(ws, rows, W, f, corner, theta, phi)
        const = rho1 * float(np.sum(chi_tau.value ** 2))
        trace.append((float(problem.value) - const, val))
        if val > best_val:
            best_val, best_chi, best_v, best_vb = val, corner, v_c, vb_c
        key = tuple(np.argmax(corner, axis=1))
        if gap <= tol or key in seen:
            break
        seen.add(key)
        chi_tau.value = corner

    return AssignmentResult(
        ok=True, chi=best_chi, t=best_val, rounds=rounds, gap=gap,
        v=best_v, v_bar=best_vb, status=sol.status,
        solve_time=total_time, objective_trace=trace)
