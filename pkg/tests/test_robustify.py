"""Quadratic-form builders and the sphere-robust LMI certificates."""

import cvxpy as cp
import numpy as np
import pytest

from mris_isac import robustify as rb
from mris_isac.channel import complex_normal


def random_hermitian(rng, m, scale=1.0):
    B = scale * complex_normal(rng, (m, m))
    return (B + B.conj().T) / 2


def ball_samples(rng, m, eps, n):
    """Points covering the closed ball: interior draws plus boundary draws."""
    x = complex_normal(rng, (n, m))
    r = np.linalg.norm(x, axis=1, keepdims=True)
    radii = eps * rng.uniform(0, 1, (n, 1)) ** (1 / (2 * m))
    inside = x / r * radii
    boundary = x / r * eps
    return np.vstack([inside, boundary])


def test_quadratic_form_value_matches_definition():
    rng = np.random.default_rng(0)
    m = 4
    A = random_hermitian(rng, m)
    a = complex_normal(rng, m)
    c = float(rng.normal())
    q = rb.QuadraticForm(A, a, c)
    for _ in range(50):
        x = complex_normal(rng, m)
        direct = (x.conj() @ A @ x).real + 2 * (a.conj() @ x).real + c
        assert abs(q.value(x) - direct) < 1e-10 * max(1, abs(direct))


def test_quadratic_form_add_scale_and_hermitian_guard():
    rng = np.random.default_rng(1)
    m = 3
    q1 = rb.QuadraticForm(random_hermitian(rng, m), complex_normal(rng, m), 0.3)
    q2 = rb.QuadraticForm(random_hermitian(rng, m), complex_normal(rng, m), -1.1)
    x = complex_normal(rng, m)
    assert abs((q1 + q2).value(x) - q1.value(x) - q2.value(x)) < 1e-10
    assert abs(q1.scaled(2.5).value(x) - 2.5 * q1.value(x)) < 1e-10
    bad = complex_normal(rng, (m, m))
    with pytest.raises(ValueError):
        rb.QuadraticForm(bad, np.zeros(m), 0.0)


def test_exact_form_is_received_power():
    rng = np.random.default_rng(2)
    m = 5
    for _ in range(200):
        sig = complex_normal(rng, m)
        h_bar = complex_normal(rng, m)
        q = rb.exact_form(sig, h_bar)
        x = 0.3 * complex_normal(rng, m)
        power = abs(np.vdot(h_bar + x, sig)) ** 2
        assert abs(q.value(x) - power) < 1e-9 * max(1, power)


def test_taylor_form_tight_at_expansion_point():
    rng = np.random.default_rng(3)
    m = 4
    sig = complex_normal(rng, m)
    h_bar = complex_normal(rng, m)
    q = rb.taylor_form(sig, sig, h_bar)
    for _ in range(100):
        x = complex_normal(rng, m)
        power = abs(np.vdot(h_bar + x, sig)) ** 2
        assert abs(q.value(x) - power) < 1e-9 * max(1, power)


def test_taylor_form_global_lower_bound():
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(500):
        m = int(rng.integers(2, 6))
        cur = complex_normal(rng, m)
        exp = complex_normal(rng, m)
        h_bar = complex_normal(rng, m)
        q = rb.taylor_form(cur, exp, h_bar)
        for _ in range(4):
            x = rng.uniform(0.05, 2.0) * complex_normal(rng, m)
            power = abs(np.vdot(h_bar + x, cur)) ** 2
            if q.value(x) > power + 1e-10 * max(1, power):
                violations += 1
    assert violations == 0


def test_taylor_form_cvxpy_branch_matches_numeric():
    rng = np.random.default_rng(5)
    m = 3
    cur = complex_normal(rng, m)
    exp = complex_normal(rng, m)
    h_bar = complex_normal(rng, m)
    var = cp.Variable(m, complex=True)
    var.value = cur
    q_expr = rb.taylor_form(var, exp, h_bar)
    q_num = rb.taylor_form(cur, exp, h_bar)
    assert np.allclose(q_expr.A.value, q_num.A, atol=1e-12)
    assert np.allclose(q_expr.a.value, q_num.a, atol=1e-12)
    assert abs(q_expr.c.value - q_num.c) < 1e-12


def test_signature_vector_both_branches():
    rng = np.random.default_rng(6)
    m, n = 5, 3
    u = np.exp(1j * rng.uniform(0, 2 * np.pi, m))
    G = complex_normal(rng, (m, n))
    w = complex_normal(rng, n)
    assert np.allclose(rb.signature_vector(u, G, w), u * (G @ w))
    wv = cp.Variable(n, complex=True)
    wv.value = w
    expr = rb.signature_vector(u, G, wv)
    assert np.allclose(expr.value, u * (G @ w), atol=1e-12)


def test_aggregate_weights_and_exclusion():
    rng = np.random.default_rng(7)
    m, K = 4, 3
    h_bar = complex_normal(rng, m)
    forms = [rb.exact_form(complex_normal(rng, m), h_bar) for _ in range(K)]
    f_form = rb.exact_form(complex_normal(rng, m), h_bar)
    chi = np.array([1.0, 0.0, 1.0])
    x = 0.2 * complex_normal(rng, m)
    total = rb.aggregate(forms, f_form, chi)
    expect = f_form.value(x) + sum(chi[k] * forms[k].value(x)
                                   for k in range(K))
    assert abs(total.value(x) - expect) < 1e-10
    loo = rb.aggregate(forms, f_form, chi, exclude=2)
    assert abs(loo.value(x) - (expect - forms[2].value(x))) < 1e-10


def test_sca_leak_budget_anchor_and_slices():
    rng = np.random.default_rng(8)
    for _ in range(100):
        v_tau = rng.uniform(0.05, 2.0)
        vbar_tau = rng.uniform(0.05, 2.0)
        true = lambda v, vb: vb * (np.exp(v) - 1.0)
        at_anchor = rb.sca_leak_budget(v_tau, vbar_tau, v_tau, vbar_tau)
        assert abs(at_anchor - true(v_tau, vbar_tau)) < 1e-12
        # linear in vbar at the anchor slope, so exact along that slice
        vb = rng.uniform(0.05, 3.0)
        assert abs(rb.sca_leak_budget(v_tau, vbar_tau, v_tau, vb)
                   - true(v_tau, vb)) < 1e-12
        # convex in v for fixed vbar, so the tangent sits below
        v = rng.uniform(0.0, 3.0)
        assert (rb.sca_leak_budget(v_tau, vbar_tau, v, vbar_tau)
                <= true(v, vbar_tau) + 1e-12)


def certified_upper_case(rng, m):
    """A random form plus (rhs, lam) chosen so the upper LMI holds."""
    A = random_hermitian(rng, m)
    a = complex_normal(rng, m)
    c = float(rng.normal())
    q = rb.QuadraticForm(A, a, c)
    eps = rng.uniform(0.1, 1.0)
    lam = max(0.0, float(np.linalg.eigvalsh(A).max())) + rng.uniform(0.1, 1.0)
    # Schur complement of the (PSD) top-left block gives the exact rhs
    # threshold for this lam; sit a little above it
    top = lam * np.eye(m) - A
    slack = float((a.conj() @ np.linalg.solve(top, a)).real)
    rhs = c + lam * eps ** 2 + slack + rng.uniform(0.01, 0.5)
    return q, rhs, eps, lam


def test_upper_lmi_certificate_is_sound():
    rng = np.random.default_rng(9)
    for _ in range(30):
        m = int(rng.integers(2, 5))
        q, rhs, eps, lam = certified_upper_case(rng, m)
        block = rb.assemble_lmi(q, rhs, "upper", eps, lam)
        assert rb.lmi_violation(block) == 0.0
        for x in ball_samples(rng, m, eps, 200):
            assert q.value(x) <= rhs + 1e-9


def test_lower_lmi_certificate_is_sound():
    rng = np.random.default_rng(10)
    for _ in range(30):
        m = int(rng.integers(2, 5))
        q_up, rhs_up, eps, lam = certified_upper_case(rng, m)
        # negate to turn the certified upper case into a lower one
        q = q_up.scaled(-1.0)
        rhs = -rhs_up
        block = rb.assemble_lmi(q, rhs, "lower", eps, lam)
        assert rb.lmi_violation(block) == 0.0
        for x in ball_samples(rng, m, eps, 200):
            assert q.value(x) >= rhs - 1e-9


def test_lmi_fails_when_bound_is_impossible():
    rng = np.random.default_rng(11)
    m = 3
    A = random_hermitian(rng, m)
    a = complex_normal(rng, m)
    c = 1.0
    q = rb.QuadraticForm(A, a, c)
    # rhs below q(0) = c cannot be certified by any multiplier
    for lam in [0.0, 0.5, 2.0, 10.0]:
        block = rb.assemble_lmi(q, c - 0.2, "upper", 0.3, lam)
        assert rb.lmi_violation(block) < 0.0


def test_assemble_lmi_cvxpy_matches_numeric():
    rng = np.random.default_rng(12)
    m = 3
    q, rhs, eps, lam = certified_upper_case(rng, m)
    var_a = cp.Variable(m, complex=True)
    var_a.value = q.a
    q_expr = rb.QuadraticForm(cp.Constant(q.A), var_a, cp.Constant(q.c))
    block_expr = rb.assemble_lmi(q_expr, rhs, "upper", eps, cp.Constant(lam))
    block_num = rb.assemble_lmi(q, rhs, "upper", eps, lam)
    assert np.allclose(block_expr.value, block_num, atol=1e-10)
    with pytest.raises(ValueError):
        rb.assemble_lmi(q, rhs, "sideways", eps, lam)


def test_lmi_violation_reports_min_eigenvalue():
    d = np.diag([2.0, 1.0, -0.7])
    assert rb.lmi_violation(d) == pytest.approx(-0.7)
    assert rb.lmi_violation(np.diag([0.3, 0.1])) == 0.0
