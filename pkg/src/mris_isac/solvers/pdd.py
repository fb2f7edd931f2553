"""Penalty-dual-decomposition update of the surface phases.

Works on a relaxed copy nu of the unit-modulus phase vector: the inner
problem maximizes the surrogate secrecy objective plus an augmented-
Lagrangian pull toward the feasible copy nu_breve, subject to the robust
LMI families (Taylor-expanded in nu around the block-entry phases) and
|nu| <= 1. The feasible copy has a closed-form projection, and the outer
loop tightens penalty and dual variables until nu and nu_breve agree.

Two variants share the machinery: `which="theta"` optimizes the full
surface phases (nu has M entries, the per-element signature is
nu * (phase-profile * G w)); `which="phi"` optimizes the movable-panel
phases (nu has N entries entering through the placement map E_b nu + e_b).

The inner problem is compiled once per block; penalty, dual and target
enter as parameters so outer/inner iterations only re-solve.
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
class PddState:
    """Relaxed phases, feasible copy, dual and penalty of one PDD block."""
    nu: np.ndarray
    nu_breve: np.ndarray
    lam: np.ndarray
    rho: float
    threshold: float


@dataclass
class PddResult:
    ok: bool
    phases: np.ndarray = None   # unit-modulus (the feasible copy)
    t: float = -np.inf
    v: np.ndarray = None
    v_bar: np.ndarray = None
    outer_iters: int = 0
    inner_solves: int = 0
    residual: float = np.inf    # terminal max |nu - nu_breve|
    status: str = ""
    message: str = ""
    solve_time: float = 0.0


def project_unit_modulus(nu, lam, rho):
    """Closed-form feasible copy: element-wise phase of nu/rho + lam.

    Zero argument at an element maps to phase 0 (coefficient 1).
    """
    return np.exp(1j * np.angle(nu / rho + np.asarray(lam)))


class _InnerProblem:
    """Compiled inner problem with (penalty, target, entry) as parameters."""

    def __init__(self, ws: Workspace, W, f, chi, theta, phi,
                 aux: AuxiliaryState, which):
        cfg = ws.cfg
        self.dim = cfg.M if which == "theta" else cfg.N
        if self.dim == 0:
            raise ValueError("no movable panel to optimize")
        nu = cp.Variable(self.dim, complex=True, name="nu")
        self.nu = nu
        # a complex Parameter would disable cvxpy's cached (DPP) compilation
        # path, so the projection target is split into real parameter pairs
        self.s_par = cp.Parameter(nonneg=True, name="s")          # 1/sqrt(2 rho)
        self.c_re = cp.Parameter(self.dim, name="c_re")
        self.c_im = cp.Parameter(self.dim, name="c_im")
        t = cp.Variable(name="t")
        self.t = t

        nu0 = theta if which == "theta" else phi
        sel = selected_beams(chi)
        rows = ws.user_rows(theta, phi)
        self.v_vars, self.vb_vars = {}, {}
        cons = [cp.abs(nu) <= 1.0]

        for b in sel:
            E_b, e_b = ws.placements[b]
            users = beam_users(chi, b)
            if which == "theta":
                phi_bar = E_b @ phi + e_b if cfg.N else e_b.astype(complex)
                # signature X_i(nu) = nu * (phi_bar * G w_i)
                def sig(vec, phi_bar=phi_bar):
                    return phi_bar * (ws.G @ vec)

                def x_of(vec, phi_bar=phi_bar):
                    return cp.multiply(nu, phi_bar * (ws.G @ vec))

                def amp_vec(h, vec, phi_bar=phi_bar):
                    # received amplitude as an affine function of nu
                    return (phi_bar * np.conj(h) * (ws.G @ vec)) @ nu
            else:
                def sig(vec):
                    return theta * (ws.G @ vec)

                def x_of(vec):
                    return cp.multiply(E_b @ nu + e_b, theta * (ws.G @ vec))

                def amp_vec(h, vec):
                    d = theta * np.conj(h) * (ws.G @ vec)
                    return complex(e_b @ d) + (E_b.T @ d) @ nu

            def x_exp_of(vec):
                base = sig(vec)
                if which == "theta":
                    return nu0 * base
                return (E_b @ nu0 + e_b) * base

            for k in users:
                h_k = ws.h_users[k]
                z = aux.z[k, b]
                mu = aux.mu[k, b]
                amps = {i: amp_vec(h_k, W[b][:, i]) for i in users}
                an = amp_vec(h_k, f[b])
                power = sum(cp.square(cp.abs(amps[i])) for i in users) \
                    + cp.square(cp.abs(an))
                z_t = np.log(z) - z - z * abs(mu) ** 2 * ws.sigma2_U + 1.0
                y = 2.0 * z * cp.real(np.conj(mu) * amps[k]) + z_t \
                    - z * abs(mu) ** 2 * power
                v_kb = cp.Variable(name=f"v{k}_{b}")
                self.v_vars[(k, b)] = v_kb
                cons.append(y >= cfg.Gamma_user[k])
                cons.append(t <= y - v_kb)

                for j in range(cfg.J):
                    vb = cp.Variable(nonneg=True)
                    self.vb_vars[(k, j, b)] = vb
                    h_bar = ws.h_bars[j]
                    epsj = ws.eps_balls[j]
                    vb_tau = max(aux.v_bar[k, j, b], ws.sigma2_E)

                    q9 = rb.taylor_form(x_of(W[b][:, k]),
                                        x_exp_of(W[b][:, k]), h_bar)
                    rhs9 = rb.sca_leak_budget(aux.v[k, b], vb_tau, v_kb, vb)
                    lam9 = cp.Variable(nonneg=True)
                    cons.append(
                        rb.assemble_lmi(q9, rhs9, "upper", epsj, lam9) >> 0)

                    q10 = rb.taylor_form(x_of(f[b]), x_exp_of(f[b]), h_bar)
                    for i in users:
                        if i != k:
                            q10 = q10 + rb.taylor_form(
                                x_of(W[b][:, i]), x_exp_of(W[b][:, i]), h_bar)
                    lam10 = cp.Variable(nonneg=True)
                    cons.append(
                        rb.assemble_lmi(q10, vb - ws.sigma2_E, "lower",
                                        epsj, lam10) >> 0)

            for j in range(cfg.J):
                q5 = rb.taylor_form(x_of(f[b]), x_exp_of(f[b]), ws.h_bars[j])
                for i in users:
                    q5 = q5 + rb.taylor_form(x_of(W[b][:, i]),
                                             x_exp_of(W[b][:, i]),
                                             ws.h_bars[j])
                lam5 = cp.Variable(nonneg=True)
                cons.append(
                    rb.assemble_lmi(q5, ws.gamma_sense[j], "lower",
                                    ws.eps_balls[j], lam5) >> 0)

        target = self.c_re + 1j * self.c_im
        objective = t - cp.sum_squares(self.s_par * nu - target)
        self.problem = cp.Problem(cp.Maximize(objective), cons)

    def solve(self, state: PddState, engine):
        s = 1.0 / np.sqrt(2.0 * state.rho)
        c = s * (state.nu_breve - state.rho * state.lam)
        self.s_par.value = s
        self.c_re.value = c.real
        self.c_im.value = c.imag
        return solve_conic(self.problem, engine)


def pdd_phase(ws: Workspace, W, f, chi, theta, phi, aux: AuxiliaryState,
              which, engine="CLARABEL", rho=0.3, varpi=0.85,
              threshold=1e-2, tol_inner=1e-4, tol_outer=1e-4,
              max_inner=15, max_outer=40) -> PddResult:
    """Run one full PDD block for the chosen phase vector.

    Returns the unit-modulus feasible copy plus the refreshed slack values;
    on unrecoverable solver failure returns ok=False with the entry phases.
    """
    entry = theta if which == "theta" else phi
    try:
        inner = _InnerProblem(ws, W, f, chi, theta, phi, aux, which)
    except ValueError as exc:
        return PddResult(ok=False, phases=entry, status="error",
                         message=str(exc))

    state = PddState(nu=entry.astype(complex).copy(),
                     nu_breve=entry.astype(complex).copy(),
                     lam=np.zeros(inner.dim, complex),
                     rho=rho, threshold=threshold)
    total_time = 0.0
    n_solves = 0
    t_val = -np.inf
    retried = False

    for outer in range(1, max_outer + 1):
        nu_prev = None
        for _ in range(max_inner):
            sol = inner.solve(state, engine)
            total_time += sol.solve_time
            n_solves += 1
            if not sol.usable:
                if not retried:
                    retried = True
                    state.rho *= 0.5
                    continue
                detail = sol.message or f"{sol.engine} returned {sol.status}"
                return PddResult(
                    ok=False, phases=entry, t=t_val, outer_iters=outer,
                    inner_solves=n_solves, status=sol.status,
                    message=f"inner solve failed: {detail}",
                    solve_time=total_time)
            nu_new = np.asarray(inner.nu.value)
            t_val = float(inner.t.value)
            state.nu = nu_new
            state.nu_breve = project_unit_modulus(nu_new, state.lam, state.rho)
            if nu_prev is not None \
                    and np.linalg.norm(nu_new - nu_prev) <= tol_inner:
                break
            nu_prev = nu_new

        gap = state.nu - state.nu_breve
        if np.linalg.norm(gap) <= tol_outer:
            break
        if np.max(np.abs(gap)) <= state.threshold:
            state.lam = state.lam + gap / state.rho
        else:
            state.rho *= varpi
        state.threshold *= varpi

    v_new = np.array(aux.v, copy=True)
    vb_new = np.array(aux.v_bar, copy=True)
    for (k, b), var in inner.v_vars.items():
        if var.value is not None:
            v_new[k, b] = float(var.value)
    for key, var in inner.vb_vars.items():
        if var.value is not None:
            vb_new[key] = float(var.value)
    return PddResult(ok=True, phases=state.nu_breve, t=t_val,
                     v=v_new, v_bar=vb_new, outer_iters=outer,
                     inner_solves=n_solves,
                     residual=float(np.max(np.abs(state.nu - state.nu_breve))),
                     solve_time=total_time)
