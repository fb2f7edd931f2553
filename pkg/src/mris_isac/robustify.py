"""Robustification building blocks for the bounded-error Eve channels.

Everything here works on quadratic forms in the channel error vector x,

    q(x) = x^H A x + 2 Re{a^H x} + c,

with A Hermitian, a = A h_bar and c = h_bar^H A h_bar, so that q(x) equals
(h_bar + x)^H A (h_bar + x). Three builders produce the A parts:

* exact_form:  A = X X^H for a fixed signature vector X, so q is exactly
  |(h_bar + x)^H X|^2.
* taylor_form: A = X_cur X_exp^H + X_exp X_cur^H - X_exp X_exp^H, affine
  in whatever decision variable X_cur depends on, a global lower bound on
  |(h_bar + x)^H X_cur|^2 that is tight when X_cur = X_exp.
* aggregate:   chi-weighted sums of forms plus the artificial-noise form,
  with optional leave-one-out exclusion.

assemble_lmi turns "q(x) <= rhs (or >=) for every ||x|| <= eps" into a
single (M+1) x (M+1) linear matrix inequality with multiplier lam >= 0,
valid for numeric entries or cvxpy expressions alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np


def _is_expr(*objs):
    return any(isinstance(o, cp.Expression) for o in objs)


def signature_vector(u, G, w):
    """X = diag(u) G w, the per-element transmit signature at the surface."""
    Gw = G @ w
    if _is_expr(u, w):
        return cp.multiply(u, Gw)
    return np.asarray(u) * Gw


@dataclass
class QuadraticForm:
    """q(x) = x^H A x + 2Re{a^H x} + c over the channel error x."""

    A: object   # (M, M) Hermitian, numpy array or cvxpy expression
    a: object   # (M,)
    c: object   # real scalar

    def __post_init__(self):
        if not _is_expr(self.A):
            A = np.asarray(self.A)
            scale = max(1.0, float(np.abs(A).max()))
            if np.abs(A - A.conj().T).max() > 1e-12 * scale:
                raise ValueError("quadratic form matrix is not Hermitian")

    def value(self, x):
        """Numeric evaluation (numpy parts only)."""
        x = np.asarray(x)
        return float((x.conj() @ self.A @ x).real
                     + 2.0 * (np.conj(self.a) @ x).real + self.c)

    def __add__(self, other):
        return QuadraticForm(self.A + other.A, self.a + other.a,
                             self.c + other.c)

    def scaled(self, s):
        return QuadraticForm(s * self.A, s * self.a, s * self.c)


def _form_from_matrix(A, h_bar):
    h_bar = np.asarray(h_bar)
    a = A @ h_bar
    if _is_expr(A):
        c = cp.real(cp.conj(h_bar) @ a)
    else:
        c = float((h_bar.conj() @ a).real)
    return QuadraticForm(A=A, a=a, c=c)


def exact_form(x_sig, h_bar) -> QuadraticForm:
    """Exact received-power form for a fixed signature vector."""
    x_sig = np.asarray(x_sig)
    return _form_from_matrix(np.outer(x_sig, x_sig.conj()), h_bar)


def taylor_form(x_cur, x_exp, h_bar) -> QuadraticForm:
    """First-order lower bound on |(h_bar + x)^H X_cur|^2 around X_exp.

    Affine in the decision variable inside x_cur; tight (exact) whenever
    x_cur evaluates to x_exp; a global lower bound otherwise, from
    |p|^2 >= 2 Re{p q^*} - |q|^2.
    """
    x_exp = np.asarray(x_exp)
    outer_ee = np.outer(x_exp, x_exp.conj())
    if _is_expr(x_cur):
        M = x_exp.size
        col = cp.reshape(x_cur, (M, 1), order="C")
        cross = col @ x_exp.conj()[None, :]
        A = cross + cp.conj(cross).T - outer_ee
    else:
        cross = np.outer(x_cur, x_exp.conj())
        A = cross + cross.conj().T - outer_ee
    return _form_from_matrix(A, h_bar)


def aggregate(forms, f_form, chi, exclude=None) -> QuadraticForm:
    """chi-weighted sum of user forms plus the AN form.

    `exclude` drops one user's contribution (the leave-one-out aggregate
    used by the interference floor).
    """
    total = f_form
    for k, q in enumerate(forms):
        if k == exclude:
            continue
        w = chi[k]
        if not _is_expr(w) and w == 0:
            continue
        total = total + q.scaled(w)
    return total


def sca_leak_budget(v_tau, vbar_tau, v, vbar):
    """Linearization of the leakage budget vbar*(e^v - 1) at (v_tau, vbar_tau).

    Affine in (v, vbar); equals the true budget at the anchor. Natural
    exponent throughout (rates in nats).
    """
    ev = np.exp(v_tau)
    return (ev - 1.0) * vbar + vbar_tau * ev * (v - v_tau)


def assemble_lmi(q: QuadraticForm, rhs, sense, eps_sphere, lam):
    """(M+1)x(M+1) block certifying q(x) <= rhs (upper) or >= rhs (lower)
    for every ||x||_2 <= eps_sphere, given a multiplier lam >= 0.

    Upper sense:  [[lam I - A, -a], [-a^H, -c + rhs - lam eps^2]] >= 0.
    Lower sense:  [[lam I + A,  a], [ a^H,  c - rhs - lam eps^2]] >= 0.

    The caller owns the lam >= 0 constraint. Returns a numpy array when
    all inputs are numeric, else a cvxpy expression (hermitized so PSD
    constraints accept it).
    """
    if sense not in ("upper", "lower"):
        raise ValueError(f"sense must be 'upper' or 'lower', got {sense!r}")
    s = -1.0 if sense == "upper" else 1.0
    e2 = eps_sphere ** 2
    A, a, c = q.A, q.a, q.c
    if _is_expr(A, a, c, rhs, lam):
        M = A.shape[0]
        corner = s * (c - rhs) - lam * e2
        col = cp.reshape(s * a, (M, 1), order="C")
        row = cp.conj(col).T
        block = cp.bmat([
            [lam * np.eye(M) + s * A, col],
            [row, cp.reshape(corner, (1, 1), order="C")],
        ])
        return (block + cp.conj(block).T) / 2
    M = np.asarray(A).shape[0]
    block = np.zeros((M + 1, M + 1), complex)
    block[:M, :M] = lam * np.eye(M) + s * A
    block[:M, M] = s * np.asarray(a)
    block[M, :M] = s * np.asarray(a).conj()
    block[M, M] = s * (c - rhs) - lam * e2
    return block


def lmi_violation(block):
    """Most negative eigenvalue of a numeric Hermitian block (0 if PSD)."""
    w = np.linalg.eigvalsh(np.asarray(block))
    return float(min(w.min(), 0.0))
