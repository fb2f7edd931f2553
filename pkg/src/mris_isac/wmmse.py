"""Weighted-MMSE machinery: auxiliary updates and the surrogate rate.

The rate ln(1 + SINR) is replaced by a surrogate y(z, mu) that is concave
in the transmit variables for fixed auxiliaries, lower-bounds the rate for
any admissible (z > 0, mu), and touches it exactly when z and mu take
their closed forms. Everything is in nats.

Conventions match metrics.py: `row` is the cascaded channel row with
`row @ w` the received amplitude; `W` has per-user columns (L, K); `chi`
is the 0/1 user activity on the beam at hand. The quadratic received
power is the sum of per-stream powers sum_i chi_i |row @ w_i|^2 plus the
artificial-noise term |row @ f|^2 (independent unit-power streams).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _received_power(row, W, f, chi):
    """Total signal-plus-AN power at the receiver behind `row` (no noise)."""
    return float(np.sum(chi * np.abs(row @ W) ** 2) + abs(row @ f) ** 2)


def update_mu(row, W, f, chi, k, sigma2):
    """Closed-form MMSE equalizer for user k's stream."""
    return (row @ W[:, k]) / (_received_power(row, W, f, chi) + sigma2)


def update_z(sinr):
    """Closed-form rate weight."""
    if sinr < 0:
        raise ValueError("SINR must be nonnegative")
    return 1.0 + sinr


def mse(mu, row, W, f, chi, k, sigma2):
    """Per-stream mean-square error e(mu) for equalizer output mu^* y."""
    q = _received_power(row, W, f, chi) + sigma2
    p = row @ W[:, k]
    return abs(mu) ** 2 * q - 2.0 * (np.conj(mu) * p).real + 1.0


def surrogate_rate(z, mu, row, W, f, chi, k, sigma2):
    """Surrogate y(z, mu) in nats; equals ln z - z*e(mu) + 1 expanded.

    Global lower bound on ln(1 + SINR) over z > 0 and complex mu, tight at
    the closed-form auxiliaries.
    """
    if z <= 0:
        raise ValueError("z must be positive")
    p = row @ W[:, k]
    z_tilde = math.log(z) - z - z * abs(mu) ** 2 * sigma2 + 1.0
    return (2.0 * z * (np.conj(mu) * p).real + z_tilde
            - z * abs(mu) ** 2 * _received_power(row, W, f, chi))


@dataclass
class AuxiliaryState:
    """Per-(user, beam) auxiliaries plus the slack variables of the
    secrecy reformulation."""

    z: np.ndarray               # (K, B) rate weights, positive
    mu: np.ndarray              # (K, B) complex equalizers
    t: float = 0.0              # current secrecy objective value, nats
    v: np.ndarray = None        # (K, B) eavesdropping-rate bounds, nats
    v_bar: np.ndarray = None    # (K, J, B) Eve interference-plus-noise bounds, W
    lambdas: dict = field(default_factory=dict)  # S-procedure multipliers

    @classmethod
    def empty(cls, K, B, J):
        return cls(z=np.ones((K, B)), mu=np.zeros((K, B), complex),
                   v=np.zeros((K, B)), v_bar=np.zeros((K, J, B)))


def refresh(aux: AuxiliaryState, rows_users, W, f, chi, sigma2):
    """Closed-form (mu, z) update for every (user, beam) pair in place.

    rows_users is (K, B, L); W is (B, L, K); f is (B, L); chi is (K, B).
    Never decreases any surrogate for fixed transmit variables.
    """
    K, B = aux.z.shape
    for k in range(K):
        for b in range(B):
            row = rows_users[k, b]
            q = _received_power(row, W[b], f[b], chi[:, b]) + sigma2
            p = row @ W[b][:, k]
            # denominator drops the own-stream term when the user is active
            sinr = abs(p) ** 2 / (q - chi[k, b] * abs(p) ** 2)
            aux.mu[k, b] = p / q
            aux.z[k, b] = 1.0 + sinr
    return aux
