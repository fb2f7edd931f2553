"""Rate, beampattern and secrecy evaluation for candidate solutions.

All rates are natural-log (nats) internally; `to_bits` converts at the
reporting boundary. Functions take the cascaded channel as a row vector
`row` with `row @ w` the received amplitude (see channel.effective_row),
i.e. `row` plays the role of the conjugate-transposed effective channel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import channel as chanmod
from .uncertainty import BoundGeometry, sample_eve_channels

LN2 = math.log(2.0)


def to_bits(x):
    """nats -> bits/s/Hz."""
    return np.asarray(x) / LN2


def user_sinr(row, W, f, chi, k, sigma2):
    """SINR and rate (nats) of user k on one beam.

    W holds per-user beamformers as columns (L, K); chi is the 0/1 user
    activity on this beam. Same-beam users interfere, AN always does.
    """
    amps = row @ W
    sig = abs(amps[k]) ** 2
    interf = float(np.sum(chi * np.abs(amps) ** 2)) - chi[k] * sig
    den = interf + abs(row @ f) ** 2 + sigma2
    s = sig / den
    return s, math.log1p(s)


def eve_sinr(row, W, f, chi, k, sigma2):
    """SINR and rate (nats) of an eavesdropper decoding user k's stream."""
    return user_sinr(row, W, f, chi, k, sigma2)


def eve_rates_sampled(rows, W, f, chi, k, sigma2):
    """(n,) eavesdropping rates for a batch of effective rows (n, L)."""
    amps = rows @ W                      # (n, K)
    pw = np.abs(amps) ** 2
    sig = pw[:, k]
    interf = pw @ chi - chi[k] * sig
    den = interf + np.abs(rows @ f) ** 2 + sigma2
    return np.log1p(sig / den)


def beampattern_gain(row, W, f, chi):
    """Transmit power density toward the channel behind `row`, watts.

    Quadratic form of the transmit covariance sum(chi * w w^H) + f f^H.
    """
    return float(np.sum(chi * np.abs(row @ W) ** 2) + abs(row @ f) ** 2)


@dataclass
class RateReport:
    """Performance summary of one solution on one channel realization."""

    user_sinr: np.ndarray      # (K, B)
    user_rate: np.ndarray      # (K, B) nats
    eve_rate_nom: np.ndarray   # (K, J, B) nats, nominal Eve channel
    eve_rate_wc: np.ndarray    # (K, J, B) nats, max over sampled channels
    bp_gain: np.ndarray        # (J, B) W at the nominal Eve channel
    beam_power: np.ndarray     # (B,) W
    assigned: np.ndarray       # (K,) beam index per user
    secrecy_nom: np.ndarray    # (K,) nats on the assigned beam
    secrecy_wc: np.ndarray     # (K,) nats

    @property
    def min_secrecy_nom(self):
        return float(self.secrecy_nom.min())

    @property
    def min_secrecy_wc(self):
        return float(self.secrecy_wc.min())

    def as_dict(self, bits=True):
        scale = 1.0 / LN2 if bits else 1.0
        unit = "bits" if bits else "nats"
        return {
            "rate_unit": f"{unit}/s/Hz",
            "assigned_beam": self.assigned.tolist(),
            "user_rate": (self.user_rate * scale).tolist(),
            "eve_rate_nominal": (self.eve_rate_nom * scale).tolist(),
            "eve_rate_worst_case": (self.eve_rate_wc * scale).tolist(),
            "beampattern_gain_W": self.bp_gain.tolist(),
            "beam_power_W": self.beam_power.tolist(),
            "secrecy_nominal": (self.secrecy_nom * scale).tolist(),
            "secrecy_worst_case": (self.secrecy_wc * scale).tolist(),
            "min_secrecy_nominal": self.min_secrecy_nom * scale,
            "min_secrecy_worst_case": self.min_secrecy_wc * scale,
        }

    def to_json(self, bits=True, **kw):
        return json.dumps(self.as_dict(bits=bits), **kw)


def secrecy_report(W, f, chi, theta, phi, placements, G, h_users,
                   bounds, sigma2_U, sigma2_E, mc_samples=1000,
                   rng=None) -> RateReport:
    """Evaluate a full solution: rates for every (user, beam), Eve rates at
    nominal and sampled-worst-case channels, secrecy on assigned beams.

    W is (B, L, K) per-beam beamformers, f is (B, L), chi a (K, B) 0/1
    assignment with unit row sums. `bounds` is a BoundGeometry per Eve;
    the worst case is the max over `mc_samples` uniform draws from each
    Eve's admissible set plus the nominal center itself.
    """
    W = np.asarray(W)
    f = np.asarray(f)
    chi = np.asarray(chi, float)
    K, B = chi.shape
    J = len(bounds)
    if mc_samples and rng is None:
        raise ValueError("rng required when mc_samples > 0")

    u_all = []
    for E_b, e_b in placements:
        phi_bar = E_b @ phi + e_b if np.size(phi) else e_b.astype(complex)
        u_all.append(phi_bar * theta)

    user_s = np.zeros((K, B))
    user_r = np.zeros((K, B))
    for k in range(K):
        rows_k = chanmod.effective_rows(theta, phi, placements, h_users[k], G)
        for b in range(B):
            user_s[k, b], user_r[k, b] = user_sinr(
                rows_k[b], W[b], f[b], chi[:, b], k, sigma2_U)

    eve_nom = np.zeros((K, J, B))
    eve_wc = np.zeros((K, J, B))
    bp = np.zeros((J, B))
    for j, geom in enumerate(bounds):
        center = geom.h_bar
        samples = (sample_eve_channels(geom, mc_samples, rng)
                   if mc_samples else np.zeros((0, geom.M)))
        for b in range(B):
            row_nom = chanmod.effective_row(u_all[b], center, G)
            rows_s = (np.conj(samples) * u_all[b]) @ G
            bp[j, b] = beampattern_gain(row_nom, W[b], f[b], chi[:, b])
            for k in range(K):
                _, r_nom = eve_sinr(row_nom, W[b], f[b], chi[:, b], k, sigma2_E)
                eve_nom[k, j, b] = r_nom
                if mc_samples:
                    r_s = eve_rates_sampled(rows_s, W[b], f[b], chi[:, b], k,
                                            sigma2_E)
                    eve_wc[k, j, b] = max(r_nom, float(r_s.max()))
                else:
                    eve_wc[k, j, b] = r_nom

    beam_power = np.array([
        float(np.sum(chi[:, b] * np.sum(np.abs(W[b]) ** 2, axis=0))
              + np.sum(np.abs(f[b]) ** 2))
        for b in range(B)])

    assigned = np.argmax(chi, axis=1)
    sec_nom = np.zeros(K)
    sec_wc = np.zeros(K)
    for k in range(K):
        b = assigned[k]
        leak_nom = eve_nom[k, :, b].max() if J else 0.0
        leak_wc = eve_wc[k, :, b].max() if J else 0.0
        sec_nom[k] = max(0.0, user_r[k, b] - leak_nom)
        sec_wc[k] = max(0.0, user_r[k, b] - leak_wc)

    return RateReport(
        user_sinr=user_s, user_rate=user_r,
        eve_rate_nom=eve_nom, eve_rate_wc=eve_wc,
        bp_gain=bp, beam_power=beam_power, assigned=assigned,
        secrecy_nom=sec_nom, secrecy_wc=sec_wc)
