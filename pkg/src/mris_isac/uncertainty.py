"""Bounded uncertainty model for eavesdropper channels.

The eavesdropper position is known only up to a range error (at most D
meters), azimuth/elevation errors (at most Theta / Psi radians), and a
per-element scatter term of magnitude at most eps. Under this model each
entry of the channel vector lies in an annular sector, fattened by a disk
of the scatter radius. This module computes, per element, a circumscribing
circle (center R_o on the nominal phase ray, radius r_tilde), from which
follow the nominal channel center h_bar and a Euclidean ball radius
eps_ball = ||r_tilde||_2 that contains every admissible channel vector.

The circumscription is a closed form and is only guaranteed to contain the
fattened sector in part of the parameter space; sample_eve_channels plus
containment_check provide the Monte-Carlo falsifier used to certify where
it holds. Sampling is uniform over the admissible set: containment must
hold for any admissible draw, so uniform sampling suffices to falsify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import directional_freqs
from .scenario import PolarView, SystemConfig


@dataclass
class BoundGeometry:
    """Per-element circumscription of one eavesdropper's channel set."""

    M_r: int
    M_c: int
    d_R: float
    lambda_c: float
    view: PolarView            # nominal range / azimuth / elevation
    D: float                   # range error bound, m
    Theta: float               # azimuth error bound, rad
    Psi: float                 # elevation error bound, rad
    eps: np.ndarray            # (M,) per-element scatter magnitude bound
    beta1: float               # LoS amplitude scale sqrt(beta0*k/(1+k))
    beta2: float               # scatter amplitude scale sqrt(beta0/(1+k))
    R_inf: float               # min / max LoS amplitude over the range error
    R_sup: float
    r_inf: np.ndarray          # (M,) min / max scatter amplitude
    r_sup: np.ndarray
    dpsi: np.ndarray           # (M,) worst-case phase deviation per element
    R_o: np.ndarray            # (M,) circle center along the nominal ray
    r_tilde: np.ndarray        # (M,) circle radius

    @property
    def M(self):
        return self.M_r * self.M_c

    @property
    def R_out(self):
        return self.R_sup + self.r_sup

    @property
    def R_inn(self):
        return self.R_inf - self.r_sup

    @property
    def h_bar(self):
        """Nominal channel vector (circle centers on the nominal steering)."""
        ray = nominal_ray(self.M_r, self.M_c, self.d_R, self.lambda_c,
                          self.view.azimuth, self.view.elevation)
        return self.R_o * ray

    @property
    def eps_ball(self):
        """Radius of the Euclidean ball around h_bar holding all channels."""
        return float(np.linalg.norm(self.r_tilde))

    @property
    def area_actual(self):
        """(M,) exact area of each fattened annular sector."""
        dR = self.R_sup - self.R_inf
        Rs = self.R_sup + self.R_inf
        return (np.pi * self.r_sup ** 2
                + self.dpsi * Rs * (dR + 2.0 * self.r_sup)
                + 2.0 * self.r_sup * dR)

    @property
    def area_safe(self):
        """(M,) area of each circumscribing circle."""
        return np.pi * self.r_tilde ** 2

    @property
    def eta(self):
        """Area efficiency: actual over circumscribed, summed over elements.

        Guarded to 0 when both areas vanish (no uncertainty at all).
        """
        saf = float(np.sum(self.area_safe))
        if saf <= 0.0:
            return 0.0
        return float(np.sum(self.area_actual)) / saf

    @property
    def rel_spread(self):
        """Ball radius relative to the nominal channel norm."""
        cen = float(np.linalg.norm(self.R_o))
        if cen <= 0.0:
            raise ValueError(
                "relative spread undefined: every circle center is at the origin")
        return self.eps_ball / cen


def element_indices(M_r, M_c):
    """(row, col) zero-based indices of each element, row-major flat order."""
    mr = np.repeat(np.arange(M_r), M_c)
    mc = np.tile(np.arange(M_c), M_r)
    return mr, mc


def nominal_ray(M_r, M_c, d_R, lambda_c, azimuth, elevation):
    """Unit-modulus nominal phase per element (the LoS steering vector)."""
    mr, mc = element_indices(M_r, M_c)
    dr, dc = directional_freqs(d_R, lambda_c, azimuth, elevation)
    return np.exp(2j * np.pi * (dr * mr + dc * mc))


def phase_spread(M_r, M_c, d_R, lambda_c, azimuth, elevation,
                 Theta, Psi, grid_n=64):
    """(M,) worst-case per-element phase deviation over the angle box.

    Maximizes |2*pi*(ddelta_r*m_r + ddelta_c*m_c)| over the box
    |dazimuth| <= Theta, |delevation| <= Psi on a grid_n x grid_n grid that
    includes the box corners. The maximand is piecewise monotone in each
    angle so the grid maximum is essentially exact at this resolution.
    """
    mr, mc = element_indices(M_r, M_c)
    dr0, dc0 = directional_freqs(d_R, lambda_c, azimuth, elevation)
    dts = np.linspace(-Theta, Theta, grid_n)
    dps = np.linspace(-Psi, Psi, grid_n)
    tt, pp = np.meshgrid(dts, dps, indexing="ij")
    az = azimuth + tt.ravel()
    el = elevation + pp.ravel()
    s = d_R / lambda_c
    ddr = s * np.cos(az) * np.sin(el) - dr0
    ddc = s * np.sin(az) * np.sin(el) - dc0
    dev = 2.0 * np.pi * np.abs(np.outer(ddr, mr) + np.outer(ddc, mc))
    return dev.max(axis=0)


def circumscribe(R_out, R_inn, dpsi):
    """Per-element circle (center, radius) covering the fattened sector.

    The region per element is bounded by amplitudes [R_inn, R_out] (R_inn
    may be negative, meaning the origin is inside) and phase deviation
    +-dpsi around the nominal ray. Degenerate cases, in order per element:

    * R_inn < 0: the region wraps the origin radially; fall back to the
      origin-centered disk of radius R_out.
    * dpsi zero (up to roundoff): the region is a radial segment; its
      circumscribing circle is midpoint and half-width.
    * near-singular center denominator: fall back to the origin disk.

    Otherwise the circle passes through the inner point on the nominal ray
    and the two outer corners.
    """
    dpsi = np.atleast_1d(np.asarray(dpsi, float))
    R_out = np.broadcast_to(np.asarray(R_out, float), dpsi.shape)
    R_inn = np.broadcast_to(np.asarray(R_inn, float), dpsi.shape)
    R_o = np.zeros(dpsi.shape)
    r_t = np.array(R_out, float)   # default: origin-centered disk
    pos = R_inn >= 0.0

    seg = pos & (dpsi <= 1e-12)
    R_o[seg] = 0.5 * (R_out[seg] + R_inn[seg])
    r_t[seg] = 0.5 * (R_out[seg] - R_inn[seg])

    rest = pos & ~seg
    denom = 2.0 * (R_out[rest] * np.cos(dpsi[rest]) - R_inn[rest])
    ok = denom > 1e-12
    live = np.where(rest)[0][ok]
    cen = (R_out[live] ** 2 - R_inn[live] ** 2) / denom[ok]
    rad = np.sqrt(cen ** 2 + R_out[live] ** 2
                  - 2.0 * cen * R_out[live] * np.cos(dpsi[live]))
    R_o[live] = cen
    r_t[live] = rad
    return R_o, r_t


def bound_geometry(M_r, M_c, d_R, lambda_c, view: PolarView,
                   D, Theta, Psi, eps, beta0, kappa,
                   grid_n=64) -> BoundGeometry:
    """Build the per-element circumscription for one eavesdropper.

    `eps` may be a scalar or an (M,) array of per-element scatter bounds.
    """
    if D >= view.d:
        raise ValueError(
            f"range error bound D={D} must be below the nominal range {view.d}")
    M = M_r * M_c
    eps = np.broadcast_to(np.atleast_1d(np.asarray(eps, float)), (M,)).copy()
    beta1 = math.sqrt(beta0 * kappa / (1.0 + kappa))
    beta2 = math.sqrt(beta0 / (1.0 + kappa))
    R_inf = beta1 / (view.d + D)
    R_sup = beta1 / (view.d - D)
    r_inf = beta2 * eps / (view.d + D)
    r_sup = beta2 * eps / (view.d - D)
    dpsi = phase_spread(M_r, M_c, d_R, lambda_c,
                        view.azimuth, view.elevation, Theta, Psi, grid_n)
    R_o, r_t = circumscribe(R_sup + r_sup, R_inf - r_sup, dpsi)
    return BoundGeometry(
        M_r=M_r, M_c=M_c, d_R=d_R, lambda_c=lambda_c, view=view,
        D=D, Theta=Theta, Psi=Psi, eps=eps,
        beta1=beta1, beta2=beta2,
        R_inf=R_inf, R_sup=R_sup, r_inf=r_inf, r_sup=r_sup,
        dpsi=dpsi, R_o=R_o, r_tilde=r_t)


def bounds_for_layout(cfg: SystemConfig, layout) -> list:
    """BoundGeometry per eavesdropper using the config's uncertainty bounds."""
    return [
        bound_geometry(cfg.M_r, cfg.M_c, cfg.d_R, cfg.lambda_c,
                       layout.eve_views[j],
                       cfg.D_RE[j], cfg.Theta_RE[j], cfg.Psi_RE[j],
                       cfg.eps_nlos[j], cfg.beta0, cfg.kappa_RE)
        for j in range(cfg.J)
    ]


@dataclass
class RobustChannel:
    """Spherical channel set consumed by the robust constraints."""
    center: np.ndarray   # (M,) nominal channel
    radius: float        # Euclidean ball radius


def robust_channel(geom: BoundGeometry) -> RobustChannel:
    """Collapse the per-element circles into center plus ball radius."""
    return RobustChannel(center=geom.h_bar, radius=geom.eps_ball)


def tightness_metrics(geom: BoundGeometry):
    """(eta, eps_norm) summary of how tight the circumscription is."""
    if float(np.linalg.norm(geom.R_o)) <= 0.0 and geom.eps_ball > 0.0:
        raise ValueError(
            "tightness undefined: every circle center collapsed to the origin")
    eps_norm = 0.0 if geom.eps_ball == 0.0 else geom.rel_spread
    return geom.eta, eps_norm


# ---------------------------------------------------------------------------
# Monte-Carlo falsifier

def sample_eve_channels(geom: BoundGeometry, n, rng):
    """(n, M) channels drawn uniformly over the admissible set.

    Uniform over the box of range/angle errors; scatter per element uniform
    on the complex disk of radius eps (sqrt law on the radius).
    """
    mr, mc = element_indices(geom.M_r, geom.M_c)
    d = geom.view.d + rng.uniform(-geom.D, geom.D, size=n)
    az = geom.view.azimuth + rng.uniform(-geom.Theta, geom.Theta, size=n)
    el = geom.view.elevation + rng.uniform(-geom.Psi, geom.Psi, size=n)
    s = geom.d_R / geom.lambda_c
    dr = s * np.cos(az) * np.sin(el)
    dc = s * np.sin(az) * np.sin(el)
    los = np.exp(2j * np.pi * (np.outer(dr, mr) + np.outer(dc, mc)))
    radius = geom.eps * np.sqrt(rng.uniform(size=(n, geom.M)))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=(n, geom.M))
    scatter = radius * np.exp(1j * angle)
    return (geom.beta1 * los + geom.beta2 * scatter) / d[:, None]


def containment_check(geom: BoundGeometry, samples):
    """Check drawn channels against the per-element and vector bounds.

    Returns a dict with violation counts and worst ratios; a ratio above
    one means the corresponding bound failed to contain a sample.
    """
    diff = samples - geom.h_bar[None, :]
    elem_dist = np.abs(diff)
    vec_dist = np.linalg.norm(diff, axis=1)
    tiny = 1e-15
    elem_ratio = elem_dist / np.maximum(geom.r_tilde[None, :], tiny)
    vec_ratio = vec_dist / max(geom.eps_ball, tiny)
    tol = 1.0 + 1e-9
    return {
        "n": samples.shape[0],
        "vector_violations": int(np.sum(vec_ratio > tol)),
        "element_violations": int(np.sum(np.any(elem_ratio > tol, axis=1))),
        "max_vector_ratio": float(vec_ratio.max()),
        "max_element_ratio": float(elem_ratio.max()),
    }
