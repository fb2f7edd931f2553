"""Scenario setup: system configuration, node placement, polar geometry.

Configuration lives in an INI file with sections [system], [geometry],
[uncertainty], [algorithm], [experiment]. Powers are given in dBm and path
gains in dB in the file; everything is converted to linear SI units
(watts, meters, radians, nats) on load and stays that way internally.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

LN2 = math.log(2.0)


class ConfigError(ValueError):
    """Raised when a configuration file or override is invalid."""


class PlacementError(RuntimeError):
    """Raised when rejection sampling cannot satisfy the spacing floors."""


def _fit_per_node(val, n, name):
    """Shape a per-node parameter to (n,).

    Scalars and uniform arrays stretch to any n (so overriding K or J on
    an existing config keeps working); a non-uniform array must already
    have the right length.
    """
    arr = np.atleast_1d(np.asarray(val, float)).ravel()
    if n == 0:
        return arr[:0]
    if arr.size == n:
        return arr.copy()
    if arr.size == 1 or (arr.size and np.all(arr == arr[0])):
        return np.full(n, float(arr[0]))
    raise ConfigError(
        f"{name} has {arr.size} entries but {n} are needed; pass a scalar "
        f"or one value per node")


def db2lin(x_db):
    """dB -> linear power ratio."""
    return 10.0 ** (x_db / 10.0)


def dbm2watt(x_dbm):
    """dBm -> watts."""
    return 10.0 ** (x_dbm / 10.0) * 1e-3


@dataclass
class SystemConfig:
    """All scenario, hardware and algorithm parameters in linear SI units."""

    # array dimensions
    L: int = 8            # BS antennas
    M_r: int = 2          # fixed-surface rows
    M_c: int = 2          # fixed-surface cols
    N_r: int = 1          # movable-surface rows (0 with N_c=0 -> static baseline)
    N_c: int = 2          # movable-surface cols
    K: int = 2            # users
    J: int = 1            # eavesdroppers

    # powers / gains (linear)
    P_max: float = 0.1            # W (20 dBm)
    sigma2_U: float = 1e-11       # W (-80 dBm)
    sigma2_E: float = 1e-11       # W (-80 dBm)
    beta0: float = 1e-3           # path gain at 1 m (-30 dB)
    kappa_BR: float = db2lin(5.0)  # Rician factors, linear
    kappa_RU: float = db2lin(5.0)
    kappa_RE: float = db2lin(5.0)

    # carrier / spacing (m)
    lambda_c: float = 0.1
    d_R: float = 0.025    # surface element spacing, defaults lambda/4
    d_B: float = 0.05     # BS antenna spacing, defaults lambda/2

    # QoS / sensing floors
    Gamma_user: np.ndarray = None   # (K,) nats
    gamma_sense_frac: float = 0.1   # fraction of the unconstrained max gain
    gamma_sense_W: np.ndarray = None  # (J,) absolute override, W (optional)

    # geometry
    bs_pos: np.ndarray = None     # (3,) m
    mris_pos: np.ndarray = None   # (3,) m
    box: np.ndarray = None        # (3,2) placement box [min,max] per axis
    d_UU: float = 5.0             # min user-user spacing, m
    d_EE: float = 10.0            # min eve-eve spacing, m
    d_UE: float = 8.0             # min user-eve spacing, m
    users_polar: np.ndarray = None  # (K,3) optional explicit (d, az, el) rad
    eves_polar: np.ndarray = None   # (J,3)

    # eavesdropper uncertainty
    D_RE: np.ndarray = None       # (J,) m
    Theta_RE: np.ndarray = None   # (J,) rad
    Psi_RE: np.ndarray = None     # (J,) rad
    eps_nlos: np.ndarray = None   # (J,) NLoS magnitude bound per element

    # algorithm hyperparameters
    engine: str = "CLARABEL"
    rho1: float = 0.5             # assignment concavity penalty
    rho2: float = 0.3             # PDD penalty (first phase block)
    rho3: float = 0.3             # PDD penalty (second phase block)
    varpi1: float = 0.85          # PDD shrink factor, in [0.8, 0.9]
    pdd_threshold: float = 1e-2   # initial dual-vs-penalty switch threshold
    tol_ao: float = 1e-3
    tol_pdd_inner: float = 1e-4
    tol_pdd_outer: float = 1e-4
    tol_assign: float = 1e-4
    ao_max_iters: int = 30
    pdd_outer_max: int = 40
    pdd_inner_max: int = 15
    assign_max_rounds: int = 10
    place_budget: int = 100_000
    mc_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.Gamma_user is None:
            self.Gamma_user = np.full(self.K, 0.35)
        self.Gamma_user = _fit_per_node(self.Gamma_user, self.K, "Gamma_user")
        if self.bs_pos is None:
            self.bs_pos = np.array([0.0, 0.0, 10.0])
        if self.mris_pos is None:
            self.mris_pos = np.array([0.0, 10.0, 15.0])
        if self.box is None:
            self.box = np.array([[-20.0, 20.0], [20.0, 70.0], [0.0, 10.0]])
        for name in ("D_RE", "Theta_RE", "Psi_RE", "eps_nlos"):
            val = getattr(self, name)
            if val is None:
                if name == "D_RE":
                    val = 1.0
                elif name == "eps_nlos":
                    val = 0.1 * math.sqrt(self.kappa_RE)
                else:
                    val = math.radians(1.0)
            setattr(self, name, _fit_per_node(val, self.J, name))

    # -- derived quantities ------------------------------------------------

    @property
    def M(self):
        return self.M_r * self.M_c

    @property
    def N(self):
        return self.N_r * self.N_c

    @property
    def B(self):
        """Number of distinct placements of the movable surface."""
        if self.N == 0:
            return 1
        return (self.M_r - self.N_r + 1) * (self.M_c - self.N_c + 1)

    def validate(self):
        if self.L < 1 or self.K < 1 or self.J < 0:
            raise ConfigError("L >= 1, K >= 1 and J >= 0 are required")
        if self.M_r < 1 or self.M_c < 1:
            raise ConfigError("fixed surface needs M_r, M_c >= 1")
        if (self.N_r == 0) != (self.N_c == 0):
            raise ConfigError("N_r and N_c must be both zero (static) or both positive")
        if self.N_r > self.M_r or self.N_c > self.M_c:
            raise ConfigError(
                f"movable surface {self.N_r}x{self.N_c} does not fit on "
                f"{self.M_r}x{self.M_c}")
        if self.P_max <= 0 or self.sigma2_U <= 0 or self.sigma2_E <= 0:
            raise ConfigError("P_max and noise powers must be positive")
        if self.beta0 <= 0 or min(self.kappa_BR, self.kappa_RU, self.kappa_RE) < 0:
            raise ConfigError("beta0 must be positive and Rician factors nonnegative")
        if self.lambda_c <= 0 or self.d_R <= 0 or self.d_B <= 0:
            raise ConfigError("carrier wavelength and spacings must be positive")
        if np.any(self.box[:, 0] >= self.box[:, 1]):
            raise ConfigError("placement box must have min < max per axis")
        if not (0.8 <= self.varpi1 <= 0.9):
            raise ConfigError("varpi1 must lie in [0.8, 0.9]")
        if np.any(self.Gamma_user < 0):
            raise ConfigError("rate floors must be nonnegative")
        if self.J:
            if np.any(self.D_RE < 0) or np.any(self.eps_nlos < 0):
                raise ConfigError("uncertainty bounds must be nonnegative")
            if np.any(self.Theta_RE < 0) or np.any(self.Psi_RE < 0):
                raise ConfigError("angular bounds must be nonnegative")
        if np.allclose(self.bs_pos, self.mris_pos):
            raise ConfigError("BS and surface positions coincide")
        return self

    def with_overrides(self, **kw):
        return replace(self, **kw).validate()


@dataclass
class PolarView:
    """Range/azimuth/elevation of a point as seen from the surface."""
    d: float          # m
    azimuth: float    # rad, 0 along +y, positive toward +x
    elevation: float  # rad, positive above the horizontal plane


@dataclass
class NodeLayout:
    """Cartesian positions plus cached polar views from the surface."""
    users: np.ndarray            # (K,3)
    eves: np.ndarray             # (J,3)
    user_views: list = field(default_factory=list)  # PolarView per user
    eve_views: list = field(default_factory=list)   # PolarView per eve


# ---------------------------------------------------------------------------
# polar geometry

def polar_from_mris(point, mris_pos) -> PolarView:
    """Range, azimuth and elevation of `point` seen from the surface.

    Azimuth is measured in the ground plane from +y toward +x; elevation is
    the angle above the horizontal through the surface.
    """
    delta = np.asarray(point, float) - np.asarray(mris_pos, float)
    d = float(np.linalg.norm(delta))
    if d < 1e-9:
        raise ValueError("degenerate geometry: point coincides with the surface")
    az = math.atan2(delta[0], delta[1])
    el = math.asin(np.clip(delta[2] / d, -1.0, 1.0))
    return PolarView(d=d, azimuth=az, elevation=el)


def point_from_polar(view: PolarView, mris_pos):
    """Inverse of polar_from_mris."""
    c = math.cos(view.elevation)
    delta = np.array([
        view.d * c * math.sin(view.azimuth),
        view.d * c * math.cos(view.azimuth),
        view.d * math.sin(view.elevation),
    ])
    return np.asarray(mris_pos, float) + delta


# ---------------------------------------------------------------------------
# node placement

def _min_dist(p, pts):
    if len(pts) == 0:
        return np.inf
    return float(np.min(np.linalg.norm(np.asarray(pts) - p, axis=1)))


def place_nodes(cfg: SystemConfig, rng: np.random.Generator) -> NodeLayout:
    """Draw user/eve positions in the placement box honoring spacing floors.

    Rejection sampling, users first then eavesdroppers; a draw is rejected if
    it violates any pairwise floor against already-placed nodes. Explicit
    polar positions in the config bypass the box (spacing is still checked).
    """
    users, eves = [], []
    if cfg.users_polar is not None:
        users = [point_from_polar(PolarView(*row), cfg.mris_pos)
                 for row in np.asarray(cfg.users_polar, float)]
    if cfg.eves_polar is not None:
        eves = [point_from_polar(PolarView(*row), cfg.mris_pos)
                for row in np.asarray(cfg.eves_polar, float)]

    lo, hi = cfg.box[:, 0], cfg.box[:, 1]
    budget = int(cfg.place_budget)
    spent = 0
    while len(users) < cfg.K or len(eves) < cfg.J:
        if spent >= budget:
            raise PlacementError(
                f"placement budget {budget} exhausted with {len(users)}/{cfg.K} "
                f"users and {len(eves)}/{cfg.J} eves placed; spacing floors "
                f"d_UU={cfg.d_UU}, d_EE={cfg.d_EE}, d_UE={cfg.d_UE} may be "
                f"infeasible for this box")
        p = lo + rng.uniform(size=3) * (hi - lo)
        spent += 1
        if len(users) < cfg.K:
            if _min_dist(p, users) >= cfg.d_UU and _min_dist(p, eves) >= cfg.d_UE:
                users.append(p)
        else:
            if _min_dist(p, eves) >= cfg.d_EE and _min_dist(p, users) >= cfg.d_UE:
                eves.append(p)

    users = np.asarray(users, float).reshape(cfg.K, 3)
    eves = np.asarray(eves, float).reshape(cfg.J, 3)
    _check_spacing(cfg, users, eves)
    return NodeLayout(
        users=users, eves=eves,
        user_views=[polar_from_mris(p, cfg.mris_pos) for p in users],
        eve_views=[polar_from_mris(p, cfg.mris_pos) for p in eves],
    )


def _check_spacing(cfg, users, eves):
    for i in range(len(users)):
        for k in range(i + 1, len(users)):
            if np.linalg.norm(users[i] - users[k]) < cfg.d_UU - 1e-9:
                raise PlacementError("user pair violates the spacing floor")
    for i in range(len(eves)):
        for k in range(i + 1, len(eves)):
            if np.linalg.norm(eves[i] - eves[k]) < cfg.d_EE - 1e-9:
                raise PlacementError("eve pair violates the spacing floor")
    for u in users:
        for e in eves:
            if np.linalg.norm(u - e) < cfg.d_UE - 1e-9:
                raise PlacementError("user-eve pair violates the spacing floor")


# ---------------------------------------------------------------------------
# config file parsing

_REQUIRED_SECTIONS = ("system", "geometry", "uncertainty", "algorithm", "experiment")


def _parse_vec(text, n=None):
    vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} values, got {len(vals)}: {text!r}")
    return np.asarray(vals)


def _parse_polar_list(text):
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        d, az, el = (float(t) for t in chunk.split(","))
        rows.append([d, math.radians(az), math.radians(el)])
    return np.asarray(rows) if rows else None


def load_config(path=None, overrides=()) -> SystemConfig:
    """Build a SystemConfig from an INI file plus `section.key=value` overrides.

    With no path, spec defaults are used. Unknown sections or keys raise
    ConfigError naming the offender.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        read = cp.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for sect in cp.sections():
            if sect not in _REQUIRED_SECTIONS:
                raise ConfigError(f"unknown config section [{sect}]")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        target, value = item.split("=", 1)
        sect, key = target.split(".", 1)
        if sect not in _REQUIRED_SECTIONS:
            raise ConfigError(f"unknown config section [{sect}] in override {item!r}")
        if not cp.has_section(sect):
            cp.add_section(sect)
        cp.set(sect.strip(), key.strip(), value.strip())

    kw = {}
    handlers = _config_handlers()
    for sect in cp.sections():
        for key, raw in cp.items(sect):
            handler = handlers.get((sect, key))
            if handler is None:
                raise ConfigError(f"unknown config key {key!r} in section [{sect}]")
            try:
                handler(kw, raw)
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"bad value for [{sect}] {key} = {raw!r}: {exc}")

    eps_factor = kw.pop("eps_factor", None)
    cfg = SystemConfig(**kw)
    if "d_R" not in kw:
        cfg.d_R = cfg.lambda_c / 4.0
    if "d_B" not in kw:
        cfg.d_B = cfg.lambda_c / 2.0
    if "eps_nlos" not in kw and eps_factor is not None:
        cfg.eps_nlos = np.full(max(cfg.J, 1),
                               eps_factor * math.sqrt(cfg.kappa_RE))[: cfg.J]
    return cfg.validate()


def _config_handlers():
    """Map (section, key) -> handler writing converted values into kwargs."""
    def set_(name, conv=float):
        def h(kw, raw):
            kw[name] = conv(raw)
        return h

    def set_int(name):
        return set_(name, int)

    def set_arr(name, conv=lambda v: v):
        def h(kw, raw):
            kw[name] = conv(_parse_vec(raw))
        return h

    h = {
        ("system", "l"): set_int("L"),
        ("system", "m_r"): set_int("M_r"), ("system", "m_c"): set_int("M_c"),
        ("system", "n_r"): set_int("N_r"), ("system", "n_c"): set_int("N_c"),
        ("system", "k"): set_int("K"), ("system", "j"): set_int("J"),
        ("system", "p_max_dbm"): set_("P_max", lambda v: dbm2watt(float(v))),
        ("system", "sigma2_u_dbm"): set_("sigma2_U", lambda v: dbm2watt(float(v))),
        ("system", "sigma2_e_dbm"): set_("sigma2_E", lambda v: dbm2watt(float(v))),
        ("system", "beta0_db"): set_("beta0", lambda v: db2lin(float(v))),
        ("system", "kappa_br_db"): set_("kappa_BR", lambda v: db2lin(float(v))),
        ("system", "kappa_ru_db"): set_("kappa_RU", lambda v: db2lin(float(v))),
        ("system", "kappa_re_db"): set_("kappa_RE", lambda v: db2lin(float(v))),
        ("system", "lambda_c"): set_("lambda_c"),
        ("system", "d_r"): set_("d_R"), ("system", "d_b"): set_("d_B"),
        ("system", "gamma_user_bits"):
            set_arr("Gamma_user", lambda v: v * LN2),
        ("system", "gamma_sense_frac"): set_("gamma_sense_frac"),
        ("system", "gamma_sense_w"): set_arr("gamma_sense_W"),
        ("geometry", "bs_pos"): set_arr("bs_pos"),
        ("geometry", "mris_pos"): set_arr("mris_pos"),
        ("geometry", "box_x"): _box_handler(0),
        ("geometry", "box_y"): _box_handler(1),
        ("geometry", "box_z"): _box_handler(2),
        ("geometry", "d_uu"): set_("d_UU"),
        ("geometry", "d_ee"): set_("d_EE"),
        ("geometry", "d_ue"): set_("d_UE"),
        ("geometry", "users"):
            (lambda kw, raw: kw.__setitem__("users_polar", _parse_polar_list(raw))),
        ("geometry", "eves"):
            (lambda kw, raw: kw.__setitem__("eves_polar", _parse_polar_list(raw))),
        ("uncertainty", "d_re"): set_arr("D_RE"),
        ("uncertainty", "theta_re_deg"): set_arr("Theta_RE", np.radians),
        ("uncertainty", "psi_re_deg"): set_arr("Psi_RE", np.radians),
        ("uncertainty", "eps_nlos"): set_arr("eps_nlos"),
        ("uncertainty", "eps_factor"): set_("eps_factor"),
        ("algorithm", "engine"): (lambda kw, raw: kw.__setitem__("engine", raw.strip())),
        ("algorithm", "rho1"): set_("rho1"),
        ("algorithm", "rho2"): set_("rho2"),
        ("algorithm", "rho3"): set_("rho3"),
        ("algorithm", "varpi1"): set_("varpi1"),
        ("algorithm", "pdd_threshold"): set_("pdd_threshold"),
        ("algorithm", "tol_ao"): set_("tol_ao"),
        ("algorithm", "tol_pdd_inner"): set_("tol_pdd_inner"),
        ("algorithm", "tol_pdd_outer"): set_("tol_pdd_outer"),
        ("algorithm", "tol_assign"): set_("tol_assign"),
        ("algorithm", "ao_max_iters"): set_int("ao_max_iters"),
        ("algorithm", "pdd_outer_max"): set_int("pdd_outer_max"),
        ("algorithm", "pdd_inner_max"): set_int("pdd_inner_max"),
        ("algorithm", "assign_max_rounds"): set_int("assign_max_rounds"),
        ("algorithm", "place_budget"): set_int("place_budget"),
        ("algorithm", "mc_samples"): set_int("mc_samples"),
        ("experiment", "seed"): set_int("seed"),
    }
    return h


def _box_handler(axis):
    def h(kw, raw):
        pair = _parse_vec(raw, 2)
        box = kw.get("box")
        if box is None:
            box = np.array([[-20.0, 20.0], [20.0, 70.0], [0.0, 10.0]])
        box = box.copy()
        box[axis] = pair
        kw["box"] = box
    return h
