"""Config-driven experiment harness.

Single runs, parameter sweeps, the bound-validation suite, beam-gain maps
and the exhaustive assignment oracle. Every emitted row carries the config
hash and seed so any number can be reproduced by re-running its cell;
plots are rendered from the CSV rows and never compute anything themselves.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from .channel import effective_row, surface_steering, synthesize
from .metrics import secrecy_report, to_bits
from .orchestrator import (initialize_solution, materialize_proxies,
                           solve_scenario)
from .scenario import ConfigError, PolarView, SystemConfig, place_nodes
from .solvers.assignment import solve_assignment
from .solvers.beamformer import solve_beamformer
from .solvers.common import rebuild_anchors, surrogate_floor
from .uncertainty import (bound_geometry, bounds_for_layout,
                          containment_check, sample_eve_channels,
                          tightness_metrics)
from .wmmse import AuxiliaryState, refresh

_EVAL_STREAM = 0xE7A1        # decorrelates evaluation draws from solver draws


def config_hash(cfg: SystemConfig) -> str:
    """Short stable digest of the config.

    The seed is excluded: every record reports it in its own column, so
    runs of one scenario at different seeds share a hash.
    """
    items = []
    for f in dc_fields(cfg):
        if f.name == "seed":
            continue
        val = getattr(cfg, f.name)
        if isinstance(val, np.ndarray):
            val = val.tolist()
        items.append((f.name, val))
    blob = json.dumps(items, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class RunSpec:
    """One pipeline execution: a config, seeds, and output options."""

    config: SystemConfig
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = None
    mc_samples: int = 1000

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("RunSpec needs at least one seed")


@dataclass
class SweepSpec(RunSpec):
    """A grid of config overrides crossed with the seed list.

    `grid` maps SystemConfig field names to value lists (Cartesian product);
    `cells` may instead list explicit override dicts (e.g. paired element
    allocations). When both are given the product of `grid` is applied on
    top of every cell.
    """

    grid: dict = field(default_factory=dict)
    cells: list = None
    workers: int = 1

    def __post_init__(self):
        super().__post_init__()
        known = {f.name for f in dc_fields(SystemConfig)}
        for key in self.grid:
            if key not in known:
                raise ConfigError(f"unknown sweep key {key!r}")
        for cell in self.cells or ():
            for key in cell:
                if key not in known:
                    raise ConfigError(f"unknown sweep key {key!r}")

    def cell_list(self):
        base = self.cells if self.cells else [{}]
        if not self.grid:
            return [dict(c) for c in base]
        keys = sorted(self.grid)
        out = []
        for cell in base:
            for combo in itertools.product(*(self.grid[k] for k in keys)):
                merged = dict(cell)
                merged.update(dict(zip(keys, combo)))
                out.append(merged)
        return out


@dataclass
class ResultRecord:
    """Outcome of one (config, seed) pipeline run."""

    config_hash: str
    seed: int
    engine: str
    min_secrecy_nom_bits: float
    min_secrecy_wc_bits: float
    t_trace: list              # per-iteration surrogate floor, nats
    beam_gains_W: list         # (J, B) beampattern gain at the final state
    assigned_beams: list
    solve_seconds: dict        # per block name
    iterations: int
    converged: bool
    degraded: bool
    block_failures: int
    wall_seconds: float

    def as_dict(self):
        return dict(self.__dict__)

    def csv_row(self):
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "engine": self.engine,
            "min_secrecy_nom_bits": self.min_secrecy_nom_bits,
            "min_secrecy_wc_bits": self.min_secrecy_wc_bits,
            "iterations": self.iterations,
            "converged": self.converged,
            "degraded": self.degraded,
            "block_failures": self.block_failures,
            "wall_seconds": round(self.wall_seconds, 2),
        }


def _eval_rng(seed):
    return np.random.default_rng([int(seed), _EVAL_STREAM])


def demo_scenario(**overrides) -> SystemConfig:
    """Two users at +-50 deg azimuth, one eavesdropper straight ahead.

    The benchmark desk scenario: node positions are fixed, so seeds vary
    only the scattered channel components and the starting phases. Any
    keyword is forwarded as a config override.
    """
    base = dict(
        L=8, K=2, J=1, M_r=2, M_c=2, N_r=1, N_c=2,
        users_polar=np.array([
            [60.0, math.radians(-50.0), math.radians(-10.0)],
            [60.0, math.radians(50.0), math.radians(10.0)],
        ]),
        eves_polar=np.array([[60.0, 0.0, 0.0]]),
    )
    base.update(overrides)
    return SystemConfig(**base)


def run_case(cfg: SystemConfig, seed, mc_samples=1000,
             keep_state=False):
    """Full pipeline for one (config, seed); the workhorse behind run/sweep.

    With keep_state=True also returns (workspace, state, layout, channels,
    bounds) for callers that need the raw solution (beam maps, oracles).
    """
    cfg = cfg.with_overrides(seed=int(seed))
    t0 = time.time()
    rng = np.random.default_rng(int(seed))
    layout = place_nodes(cfg, rng)
    channels = synthesize(cfg, layout, rng)
    bounds = bounds_for_layout(cfg, layout)
    ws, state = solve_scenario(cfg, channels, bounds, rng=rng,
                               engine=cfg.engine)
    rep = secrecy_report(state.W, state.f, state.chi, state.theta, state.phi,
                         ws.placements, channels.G, channels.h_users, bounds,
                         cfg.sigma2_U, cfg.sigma2_E,
                         mc_samples=mc_samples, rng=_eval_rng(seed))
    seconds = {}
    failures = 0
    for rec in state.log:
        for blk in rec["blocks"]:
            seconds[blk["block"]] = round(
                seconds.get(blk["block"], 0.0) + blk["seconds"], 3)
            failures += 0 if blk["ok"] else 1
    record = ResultRecord(
        config_hash=config_hash(cfg), seed=int(seed), engine=cfg.engine,
        min_secrecy_nom_bits=float(to_bits(rep.min_secrecy_nom)),
        min_secrecy_wc_bits=float(to_bits(rep.min_secrecy_wc)),
        t_trace=[rec["t"] for rec in state.log],
        beam_gains_W=rep.bp_gain.tolist(),
        assigned_beams=rep.assigned.tolist(),
        solve_seconds=seconds, iterations=state.iterations,
        converged=state.converged, degraded=state.degraded,
        block_failures=failures, wall_seconds=time.time() - t0)
    if keep_state:
        return record, (ws, state, layout, channels, bounds)
    return record


def _persist_record(record: ResultRecord, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"run_{record.config_hash}_{record.seed}.json"
    path.write_text(json.dumps(record.as_dict(), indent=2))
    csv_path = out / "results.csv"
    row = record.csv_row()
    new = not csv_path.exists()
    with csv_path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row))
        if new:
            writer.writeheader()
        writer.writerow(row)
    return path


def run(spec: RunSpec) -> ResultRecord:
    """Single run for spec.seeds[0]; persists JSON + CSV when out_dir set."""
    record = run_case(spec.config, spec.seeds[0], spec.mc_samples)
    if spec.out_dir:
        _persist_record(record, spec.out_dir)
    return record


def _sweep_case(args):
    base, cell, seed, mc = args
    cfg = base.with_overrides(**cell)
    record = run_case(cfg, seed, mc)
    row = {f"ov_{k}": v for k, v in sorted(cell.items())}
    row.update(record.csv_row())
    return row


_SWEEP_AGG = ("min_secrecy_wc_bits", "min_secrecy_nom_bits")


def sweep(spec: SweepSpec):
    """Grid of overrides x seeds; one CSV row per case plus per-cell
    median/mean aggregate columns. Returns the row list."""
    cells = spec.cell_list()
    tasks = [(spec.config, cell, seed, spec.mc_samples)
             for cell in cells for seed in spec.seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_sweep_case, tasks))
    else:
        rows = [_sweep_case(t) for t in tasks]

    n_seeds = len(spec.seeds)
    for ci in range(len(cells)):
        chunk = rows[ci * n_seeds:(ci + 1) * n_seeds]
        for name in _SWEEP_AGG:
            vals = [r[name] for r in chunk]
            med = float(np.median(vals))
            mean = float(np.mean(vals))
            for r in chunk:
                r[f"cell_median_{name}"] = med
                r[f"cell_mean_{name}"] = mean

    if spec.out_dir:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "sweep.csv").open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return rows


def allocation_cells(M_r, M_c):
    """Movable-patch shapes that fit an M_r x M_c surface, static included.

    The per-shape override dicts for an element-allocation sweep, ordered
    by movable element count then rows.
    """
    out = [{"N_r": 0, "N_c": 0}]
    for nr in range(1, M_r + 1):
        for nc in range(1, M_c + 1):
            out.append({"N_r": nr, "N_c": nc})
    out.sort(key=lambda c: (c["N_r"] * c["N_c"], c["N_r"]))
    return out


# ---------------------------------------------------------------------------
# bound-validation suite

_VAL_DEFAULTS = dict(
    M_r=1, M_c=10, d_R=0.025, lambda_c=0.1,
    d_bar=50.0, azimuth=math.pi / 3, elevation=math.pi / 3,
    eps=0.377, beta0=1e-3, kappa=14.2129,
)


def validate_bounds(out_dir=None, D_grid=None, Theta_grid_deg=None,
                    Psi_grid_deg=None, samples=10_000, seed=0,
                    **geometry):
    """Tightness and containment over a (D, Theta, Psi) grid.

    For every cell: the area efficiency eta, the relative spread of the
    certified ball, and Monte-Carlo containment violation counts for both
    the vector ball and the per-element circles. Writes bounds.csv plus
    eta/eps heatmap images when out_dir is given; returns the row list.
    """
    p = dict(_VAL_DEFAULTS)
    p.update(geometry)
    if D_grid is None:
        D_grid = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    if Theta_grid_deg is None:
        Theta_grid_deg = [0.0, 1.0]
    if Psi_grid_deg is None:
        Psi_grid_deg = [0.0, 1.0]

    view = PolarView(d=p["d_bar"], azimuth=p["azimuth"],
                     elevation=p["elevation"])
    rows = []
    for ci, (D, th, ps) in enumerate(itertools.product(
            D_grid, Theta_grid_deg, Psi_grid_deg)):
        geom = bound_geometry(p["M_r"], p["M_c"], p["d_R"], p["lambda_c"],
                              view, D, math.radians(th), math.radians(ps),
                              p["eps"], p["beta0"], p["kappa"])
        eta, spread = tightness_metrics(geom)
        if samples:
            draws = sample_eve_channels(
                geom, samples, np.random.default_rng([seed, ci]))
            chk = containment_check(geom, draws)
        else:
            chk = {"n": 0, "vector_violations": 0, "element_violations": 0,
                   "max_vector_ratio": 0.0, "max_element_ratio": 0.0}
        rows.append({
            "D_m": D, "Theta_deg": th, "Psi_deg": ps,
            "eta": eta, "eps_rel": spread, "eps_ball": geom.eps_ball,
            "samples": chk["n"],
            "vector_violations": chk["vector_violations"],
            "element_violations": chk["element_violations"],
            "max_vector_ratio": chk["max_vector_ratio"],
            "max_element_ratio": chk["max_element_ratio"],
        })

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "bounds.csv").open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        _bounds_heatmaps(rows, out)
    return rows


def _bounds_heatmaps(rows, out):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    Ds = sorted({r["D_m"] for r in rows})
    pairs = sorted({(r["Theta_deg"], r["Psi_deg"]) for r in rows})
    for name, label in (("eta", "area efficiency"),
                        ("eps_rel", "relative spread")):
        img = np.full((len(pairs), len(Ds)), np.nan)
        for r in rows:
            i = pairs.index((r["Theta_deg"], r["Psi_deg"]))
            j = Ds.index(r["D_m"])
            img[i, j] = r[name]
        fig, ax = plt.subplots(figsize=(6, 3.2))
        pcm = ax.pcolormesh(img, shading="auto")
        ax.set_xticks(np.arange(len(Ds)) + 0.5,
                      [f"{d:g}" for d in Ds])
        ax.set_yticks(np.arange(len(pairs)) + 0.5,
                      [f"{t:g}/{s:g}" for t, s in pairs])
        ax.set_xlabel("range error bound D [m]")
        ax.set_ylabel("angle bounds [deg/deg]")
        ax.set_title(label)
        fig.colorbar(pcm, ax=ax)
        fig.tight_layout()
        fig.savefig(out / f"bounds_{name}.png", dpi=130)
        plt.close(fig)


# ---------------------------------------------------------------------------
# beam-gain maps

def beampattern_map(cfg: SystemConfig, state, placements, G,
                    az_deg=None, el_deg=None, out_dir=None,
                    basename="beampattern"):
    """Transmit gain over direction for a solved state.

    Directions are pure steering channels (unit element amplitude) at the
    given azimuth/elevation grids; per direction the communication layer
    sums the active beamformers over the selected beams, the AN layer the
    noise vectors. Writes <basename>.csv and <basename>.png when out_dir
    is set; returns the row list.
    """
    if az_deg is None:
        az_deg = np.linspace(-80.0, 80.0, 81)
    if el_deg is None:
        el_deg = np.linspace(-40.0, 40.0, 41)
    chi = np.asarray(state.chi, float)
    K, B = chi.shape
    sel = [b for b in range(B) if np.any(chi[:, b] > 0.5)]
    u_sel = {}
    for b in sel:
        E_b, e_b = placements[b]
        phi_bar = (E_b @ state.phi + e_b if np.size(state.phi)
                   else e_b.astype(complex))
        u_sel[b] = phi_bar * state.theta

    rows = []
    for el in el_deg:
        for az in az_deg:
            h_dir = surface_steering(cfg.M_r, cfg.M_c, cfg.d_R, cfg.lambda_c,
                                     math.radians(az), math.radians(el))
            comm = 0.0
            an = 0.0
            for b in sel:
                row = effective_row(u_sel[b], h_dir, G)
                amps = row @ state.W[b]
                comm += float(chi[:, b] @ np.abs(amps) ** 2)
                an += abs(row @ state.f[b]) ** 2
            rows.append({"azimuth_deg": float(az), "elevation_deg": float(el),
                         "gain_comm_W": comm, "gain_an_W": an,
                         "gain_total_W": comm + an})

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / f"{basename}.csv").open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        _beampattern_image(rows, az_deg, el_deg, out / f"{basename}.png")
    return rows


def _beampattern_image(rows, az_deg, el_deg, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    na, ne = len(az_deg), len(el_deg)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2), sharey=True)
    for ax, name in zip(axes, ("gain_comm_W", "gain_an_W", "gain_total_W")):
        img = np.array([r[name] for r in rows]).reshape(ne, na)
        pcm = ax.pcolormesh(az_deg, el_deg, img, shading="auto")
        ax.set_xlabel("azimuth [deg]")
        ax.set_title(name.replace("_W", "").replace("gain_", ""))
        fig.colorbar(pcm, ax=ax)
    axes[0].set_ylabel("elevation [deg]")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def map_peak(rows, layer="gain_an_W"):
    """(azimuth_deg, elevation_deg) of the strongest cell of one layer."""
    best = max(rows, key=lambda r: r[layer])
    return best["azimuth_deg"], best["elevation_deg"]


# ---------------------------------------------------------------------------
# exhaustive assignment oracle

def _reoptimized_floor(ws, state, chi_c, engine, max_iters=5, tol=1e-3):
    """Converged value of one binary assignment at fixed phases.

    Alternates the beamformer block with the closed-form refresh until
    the certified floor stalls, then reports that floor. A single pass
    is not enough: refreshing at a foreign assignment can produce huge
    curvature weights whose surrogate optimum is meaningless until the
    next refresh pulls them back.
    """
    W = state.W.copy()
    f = state.f.copy()
    rows = ws.user_rows(state.theta, state.phi)
    aux = AuxiliaryState.empty(*chi_c.shape, ws.cfg.J)
    t_val = -np.inf
    for it in range(max_iters):
        materialize_proxies(ws, rows, W, f, chi_c)
        refresh(aux, rows, W, f, chi_c, ws.sigma2_U)
        aux.v, aux.v_bar = rebuild_anchors(ws, W, f, chi_c, state.theta,
                                           state.phi)
        res = solve_beamformer(ws, W, f, chi_c, state.theta, state.phi,
                               aux, engine)
        if not res.ok:
            return t_val        # -inf when even the first pass fails
        W, f = res.W, res.f
        refresh(aux, rows, W, f, chi_c, ws.sigma2_U)
        aux.v, aux.v_bar = rebuild_anchors(ws, W, f, chi_c, state.theta,
                                           state.phi)
        t_new = surrogate_floor(ws, rows, W, f, chi_c, aux)
        if np.isfinite(t_val) and abs(t_new - t_val) <= tol:
            return t_new
        t_val = t_new
    return t_val


def oracle_assignment(cfg: SystemConfig, seeds, engine=None):
    """Exhaustive assignment enumeration vs the relaxed solver.

    Per seed: initialize a solution (matched-filter beamformers on every
    beam, so no beam is favoured by earlier optimization), call the
    assignment program once at that state, then enumerate every binary
    assignment with a per-candidate beamformer re-optimization from the
    same state. A case matches when the program picks the enumerated
    best assignment, or one whose re-optimized floor ties it within
    1e-6. Limited to K <= 3 and B <= 3 (at most 27 candidates).
    """
    cfg = cfg.with_overrides()
    if cfg.K > 3 or cfg.B > 3:
        raise ConfigError("oracle is exhaustive; needs K <= 3 and B <= 3")
    engine = engine or cfg.engine
    K, B = cfg.K, cfg.B
    per_seed = []
    for seed in seeds:
        rng = np.random.default_rng(int(seed))
        layout = place_nodes(cfg, rng)
        channels = synthesize(cfg, layout, rng)
        bounds = bounds_for_layout(cfg, layout)
        ws, state = initialize_solution(cfg, channels, bounds, rng=rng)

        rows = ws.user_rows(state.theta, state.phi)
        refresh(state.aux, rows, state.W, state.f, state.chi, ws.sigma2_U)
        state.aux.v, state.aux.v_bar = rebuild_anchors(
            ws, state.W, state.f, state.chi, state.theta, state.phi)
        res7 = solve_assignment(ws, state.W, state.f, state.chi,
                                state.theta, state.phi, state.aux,
                                rho1=cfg.rho1,
                                max_rounds=cfg.assign_max_rounds,
                                tol=cfg.tol_assign, engine=engine)
        chosen = tuple(int(x) for x in np.argmax(
            res7.chi if res7.ok else state.chi, axis=1))

        floors = {}
        for cand in itertools.product(range(B), repeat=K):
            chi_c = np.zeros((K, B))
            chi_c[np.arange(K), list(cand)] = 1.0
            floors[cand] = _reoptimized_floor(ws, state, chi_c, engine)
        best = max(floors, key=floors.get)
        gap = floors[best] - floors[chosen]
        per_seed.append({
            "seed": int(seed), "chosen": chosen, "best": best,
            "floor_chosen": floors[chosen], "floor_best": floors[best],
            "gap": gap, "match": bool(chosen == best or gap <= 1e-6),
            "assignment_ok": bool(res7.ok),
            "floors": {"-".join(map(str, k)): v for k, v in floors.items()},
        })
    matches = sum(1 for r in per_seed if r["match"])
    return {"cases": per_seed, "matches": matches, "total": len(per_seed),
            "gaps": [r["gap"] for r in per_seed]}
