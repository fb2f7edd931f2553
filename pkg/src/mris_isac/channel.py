"""Channel synthesis for the BS -> reflecting surface -> node cascade.

All links are Rician: a geometry-determined line-of-sight ray plus an iid
complex-Gaussian scatter term, scaled by the square-root path gain
sqrt(beta0) / d. The direct BS -> node path is assumed blocked, so every
node is reached only through the surface.

Surface steering follows the planar-array convention used throughout the
package: for a direction with azimuth a and elevation e (see
scenario.polar_from_mris) the per-element phase ramp is

    delta_r = (d_R / lambda) * cos(a) * sin(e)   across rows,
    delta_c = (d_R / lambda) * sin(a) * sin(e)   across columns,

and element (m_r, m_c) carries phase 2*pi*(delta_r*m_r + delta_c*m_c)
with zero-based indices, flattened row-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import NodeLayout, PolarView, SystemConfig, polar_from_mris


def complex_normal(rng, shape=()):
    """iid CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / math.sqrt(2.0)


def directional_freqs(d_R, lambda_c, azimuth, elevation):
    """Normalized spatial frequencies (delta_r, delta_c) of a direction."""
    s = d_R / lambda_c
    return (s * math.cos(azimuth) * math.sin(elevation),
            s * math.sin(azimuth) * math.sin(elevation))


def bs_steering(L, d_B, lambda_c, angle):
    """ULA steering at the BS for departure angle `angle` (rad)."""
    ramp = 2.0 * np.pi * (d_B / lambda_c) * math.sin(angle) * np.arange(L)
    return np.exp(1j * ramp)


def surface_steering(M_r, M_c, d_R, lambda_c, azimuth, elevation):
    """Planar-array steering of the surface toward (azimuth, elevation)."""
    dr, dc = directional_freqs(d_R, lambda_c, azimuth, elevation)
    row = np.exp(2j * np.pi * dr * np.arange(M_r))
    col = np.exp(2j * np.pi * dc * np.arange(M_c))
    return np.kron(row, col)


def rician(los, kappa, beta0, d, nlos):
    """Combine LoS and scatter parts with Rician factor kappa and pathloss."""
    g = math.sqrt(beta0) / d
    return g * (math.sqrt(kappa / (1.0 + kappa)) * los
                + math.sqrt(1.0 / (1.0 + kappa)) * nlos)


@dataclass
class ChannelSet:
    """One realization of every link in the scenario."""
    G: np.ndarray        # (M, L) BS -> surface
    h_users: np.ndarray  # (K, M) surface -> user, conjugated on use
    h_eves: np.ndarray   # (J, M) surface -> eavesdropper


def bs_surface_channel(cfg: SystemConfig, rng) -> np.ndarray:
    """BS -> surface matrix G, Rician with geometry-matched LoS rank-1 term."""
    view = polar_from_mris(cfg.bs_pos, cfg.mris_pos)
    a_ms = surface_steering(cfg.M_r, cfg.M_c, cfg.d_R, cfg.lambda_c,
                            view.azimuth, view.elevation)
    # departure angle at the BS: elevation of the surface seen from the BS
    dz = cfg.mris_pos[2] - cfg.bs_pos[2]
    d = float(np.linalg.norm(cfg.mris_pos - cfg.bs_pos))
    a_bs = bs_steering(cfg.L, cfg.d_B, cfg.lambda_c, math.asin(dz / d))
    los = np.outer(a_ms, a_bs.conj())
    nlos = complex_normal(rng, (cfg.M, cfg.L))
    return rician(los, cfg.kappa_BR, cfg.beta0, d, nlos)


def surface_node_channel(cfg: SystemConfig, view: PolarView, kappa, rng):
    """Surface -> node vector for a node at the given polar view."""
    los = surface_steering(cfg.M_r, cfg.M_c, cfg.d_R, cfg.lambda_c,
                           view.azimuth, view.elevation)
    nlos = complex_normal(rng, cfg.M)
    return rician(los, kappa, cfg.beta0, view.d, nlos)


def synthesize(cfg: SystemConfig, layout: NodeLayout, rng) -> ChannelSet:
    """Draw one realization of all links for a placed scenario."""
    G = bs_surface_channel(cfg, rng)
    h_users = np.array([
        surface_node_channel(cfg, v, cfg.kappa_RU, rng)
        for v in layout.user_views]).reshape(cfg.K, cfg.M)
    h_eves = np.array([
        surface_node_channel(cfg, v, cfg.kappa_RE, rng)
        for v in layout.eve_views]).reshape(cfg.J, cfg.M)
    return ChannelSet(G=G, h_users=h_users, h_eves=h_eves)


def effective_row(u, h, G):
    """Cascaded channel row r with r @ w the received amplitude.

    r = u^T diag(h^H) G for surface coefficients u, node channel h and
    BS -> surface matrix G.
    """
    return (np.asarray(u) * np.conj(h)) @ G


def effective_rows(theta, phi, placements, h, G):
    """Cascade rows for one node across every placement, shape (B, L)."""
    rows = []
    for E_b, e_b in placements:
        phi_bar = E_b @ phi + e_b if np.size(phi) else e_b.astype(complex)
        rows.append(effective_row(phi_bar * theta, h, G))
    return np.asarray(rows)
