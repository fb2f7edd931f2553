"""Shared solver-side data: the scaled workspace and small helpers.

Raw channel magnitudes (path gain ~1e-3 over tens of meters) and noise
powers (~1e-11 W) are hopeless conditioning for interior-point engines, so
every subproblem works on a scaled copy: G and the node channels are RMS
normalized, and every quantity quadratic in them (noise powers, beam-gain
floors, leakage budgets) carries the matching square factor. Rates, SINRs,
beamformers and transmit powers are invariant under this scaling, so
solver outputs need no descaling; watt-valued diagnostics do.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import ChannelSet
from ..scenario import SystemConfig
from ..wmmse import AuxiliaryState, surrogate_rate


def rms(x):
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


@dataclass
class Workspace:
    """Scaled, solver-ready view of one scenario realization."""

    cfg: SystemConfig
    placements: list           # [(E_b, e_b)] for every beam pattern
    G: np.ndarray              # (M, L) scaled
    h_users: np.ndarray        # (K, M) scaled
    h_bars: np.ndarray         # (J, M) scaled Eve channel centers
    eps_balls: np.ndarray      # (J,) scaled Eve ball radii
    sigma2_U: float            # scaled noise powers
    sigma2_E: float
    gamma_sense: np.ndarray    # (J,) scaled beam-gain floors
    scale_G: float
    scale_h: float

    @classmethod
    def build(cls, cfg: SystemConfig, channels: ChannelSet, bounds,
              placements, gamma_sense_raw):
        """Scale a raw realization. `bounds` is a BoundGeometry per Eve;
        `gamma_sense_raw` the (J,) beam-gain floors in watts."""
        s_G = 1.0 / max(rms(channels.G), 1e-300)
        stack = [channels.h_users]
        stack += [g.h_bar for g in bounds]
        s_h = 1.0 / max(rms(np.concatenate([np.ravel(x) for x in stack])),
                        1e-300)
        s2 = (s_G * s_h) ** 2
        J = len(bounds)
        return cls(
            cfg=cfg, placements=placements,
            G=channels.G * s_G,
            h_users=channels.h_users * s_h,
            h_bars=np.array([g.h_bar for g in bounds]).reshape(J, cfg.M) * s_h,
            eps_balls=np.array([g.eps_ball for g in bounds]) * s_h,
            sigma2_U=cfg.sigma2_U * s2,
            sigma2_E=cfg.sigma2_E * s2,
            gamma_sense=np.asarray(gamma_sense_raw, float) * s2,
            scale_G=s_G, scale_h=s_h)

    @property
    def watt_scale(self):
        """Multiply scaled watt-valued quantities by this to descale."""
        return 1.0 / (self.scale_G * self.scale_h) ** 2

    def beam_profiles(self, theta, phi):
        """(B, M) combined per-element coefficients u_b for all beams."""
        out = []
        for E_b, e_b in self.placements:
            phi_bar = E_b @ phi + e_b if np.size(phi) else e_b.astype(complex)
            out.append(phi_bar * theta)
        return np.asarray(out)

    def user_rows(self, theta, phi):
        """(K, B, L) scaled cascade rows for every user and beam."""
        u_all = self.beam_profiles(theta, phi)
        K = self.h_users.shape[0]
        B = u_all.shape[0]
        rows = np.empty((K, B, self.G.shape[1]), complex)
        for k in range(K):
            hc = np.conj(self.h_users[k])
            for b in range(B):
                rows[k, b] = (u_all[b] * hc) @ self.G
        return rows


def selected_beams(chi):
    """Beams serving at least one user, in index order."""
    return [b for b in range(chi.shape[1]) if np.any(chi[:, b] > 0.5)]


def beam_users(chi, b):
    """Users assigned to beam b."""
    return [k for k in range(chi.shape[0]) if chi[k, b] > 0.5]


def rebuild_anchors(ws: Workspace, W, f, chi, theta, phi,
                    robust=True, margin=0.0):
    """Closed-form Eve-side slack anchors (v, v_bar) at the current point.

    For every (user, eve, beam) triple the interference-plus-noise anchor
    is the per-term lower bound over the Eve channel ball (or the nominal
    value when robust=False), and the rate anchor is the worst-case (or
    nominal) intercept rate against it, plus an optional margin. With
    these anchors the leakage-budget linearization is tight at the
    incumbent, so the robust blocks enter feasible.
    """
    cfg = ws.cfg
    K, B, J = cfg.K, cfg.B, cfg.J
    v = np.zeros((K, B))
    v_bar = np.full((K, J, B), ws.sigma2_E)
    if J == 0:
        return v, v_bar
    u_all = ws.beam_profiles(theta, phi)
    for b in range(B):
        D = u_all[b][:, None] * ws.G
        X = D @ W[b]                      # (M, K) signal signatures
        xf = D @ f[b]
        for j in range(J):
            hb = ws.h_bars[j]
            eps = ws.eps_balls[j] if robust else 0.0
            amp = np.abs(np.conj(hb) @ X)
            nrm = np.linalg.norm(X, axis=0)
            hi = (amp + eps * nrm) ** 2
            lo = np.maximum(amp - eps * nrm, 0.0) ** 2
            af = abs(np.conj(hb) @ xf)
            an_lo = max(af - eps * np.linalg.norm(xf), 0.0) ** 2
            for k in range(K):
                inter = float(chi[:, b] @ lo) - chi[k, b] * lo[k]
                vb = inter + an_lo + ws.sigma2_E
                v_bar[k, j, b] = vb
                v[k, b] = max(v[k, b], np.log1p(hi[k] / vb) + margin)
    return v, v_bar


def surrogate_floor(ws: Workspace, rows, W, f, chi, aux: AuxiliaryState):
    """min over users of (surrogate rate - intercept anchor) on the
    assigned beam; the scalar the alternating loop drives up."""
    vals = []
    for k in range(chi.shape[0]):
        b = int(np.argmax(chi[k]))
        y = surrogate_rate(aux.z[k, b], aux.mu[k, b], rows[k, b],
                           W[b], f[b], chi[:, b], k, ws.sigma2_U)
        vals.append(y - aux.v[k, b])
    return float(min(vals))
