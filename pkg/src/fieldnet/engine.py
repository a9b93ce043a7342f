"""Deterministic scenario runner.

One tick advances, in order: agent positions (RK4, four stage positions
precomputed because the motion ODE is decoupled), then every estimator
integrator from kernel and field samples taken at those same stage
positions.  Discrete events (waypoint switches, excitation checks and freezing)
happen between ticks.  Nothing is advanced twice and all agents see the
same clock.
"""

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .errors import ExcitationTimeout, FieldnetError, InvalidScenario
from .estimators import (
    EstimatorBank,
    basis_lipschitz,
    consensus_excitation,
    full_bound_inexact,
    leakage_factor,
    partial_bound,
    partial_bound_inexact,
    perturb_centres,
)
from .field import UNIT_SQUARE, AnalyticField, RegularGrid, integral_error, midpoints, reconstruct
from .motion import AgentMotion, ExcitationMonitor, lloyd_uniform_coverage, plan_tour, rk4_stage_positions
from .partition import build_partition, write_cells_csv
from .presets import reference_field, three_bump_field
from .rbf import KernelBasis, grid_basis, kernel_width

log = logging.getLogger(__name__)


@dataclass
class SimScenario:
    """Everything one run needs, built from a resolved config."""

    config: dict
    field: object
    true_basis: KernelBasis
    basis: KernelBasis
    a_true: np.ndarray
    positions: np.ndarray

    @property
    def algorithm(self):
        return self.config["scenario"]["algorithm"]

    @property
    def n_agents(self):
        return self.config["scenario"]["agents"]


@dataclass
class RunRecord:
    """Logged series and final metrics of one run."""

    config: dict
    algorithm: str
    basis: KernelBasis
    generators: np.ndarray
    cells: list
    blocks: list
    T: float
    T_agents: np.ndarray
    eta: np.ndarray
    final_estimates: np.ndarray
    composite: np.ndarray
    metrics: dict
    final_errors: np.ndarray = None
    bounds: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    V: np.ndarray = None
    trajectory: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    steps: int = 0
    wall_time: float = 0.0


def _random_positions(rng, n, box, min_sep):
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    pts = []
    for _ in range(10000 * n):
        q = lo + (hi - lo) * rng.uniform(size=2)
        if all(np.linalg.norm(q - r) >= min_sep for r in pts):
            pts.append(q)
            if len(pts) == n:
                return np.array(pts)
    raise InvalidScenario("could not place the agents with the requested separation")


def _reference_a(field_model, basis, resolution):
    """Least-squares weights of ``basis`` for a closed-form field on the midpoint grid."""
    pts, _ = midpoints(field_model.domain, resolution)
    sol, *_ = np.linalg.lstsq(basis.kernel_vector(pts), field_model.values(pts), rcond=None)
    return sol


def build_scenario(cfg):
    """Resolve a config into a concrete field with its bases and initial positions."""
    sc = cfg["scenario"]
    pos_ss, pert_ss = np.random.SeedSequence(sc["seed"]).spawn(2)
    kind = cfg["field"]["kind"]
    conv = cfg["basis"]["sigma_convention"]
    if kind == "reference":
        fld = reference_field(conv)
        true_basis = fld.basis
    elif kind == "three_bump":
        fld = three_bump_field()
        true_basis = None
    else:
        fld = AnalyticField("constant", [cfg["field"]["value"]])
        true_basis = None
    box = fld.domain

    if cfg["basis"]["kind"] == "field":
        nominal = true_basis
    else:
        width = kernel_width(cfg["basis"]["sigma"], conv)
        nominal = grid_basis(cfg["basis"]["p"], width, box.lower, box.upper)
    # always drawn so a zero accuracy takes the same path as a positive one
    basis = perturb_centres(nominal, cfg["centres"]["accuracy"], np.random.default_rng(pert_ss), box)

    if true_basis is not None and cfg["basis"]["kind"] == "field":
        a_true = np.array(fld.a)
    else:
        a_true = _reference_a(fld, basis, cfg["output"]["integral_resolution"])

    if sc["initial_positions"] == "random":
        pos = _random_positions(np.random.default_rng(pos_ss), sc["agents"], box, sc["min_separation"])
    else:
        pos = np.array(sc["initial_positions"], dtype=float)
        for i, q in enumerate(pos):
            if not box.contains(q):
                raise InvalidScenario(f"agent {i} starts outside the domain")
    return SimScenario(cfg, fld, true_basis, basis, a_true, pos)


def _freeze_mode(cfg):
    mode = cfg["estimator"]["freeze"]
    alg = cfg["scenario"]["algorithm"]
    if mode == "auto":
        if alg in ("s2", "s3"):
            return "agent"
        if alg == "s1" and cfg["centres"]["accuracy"] > 0:
            return "network"
        return "off"
    if mode == "off":
        return "off"
    return "agent" if alg in ("s2", "s3") else "network"


def _fmt(x):
    return repr(float(x))


def run(scenario, keep_logs=True):
    """Simulate one scenario and return its :class:`RunRecord`."""
    t_wall = time.perf_counter()
    cfg = scenario.config
    sc, est, mot = cfg["scenario"], cfg["estimator"], cfg["motion"]
    alg = sc["algorithm"]
    fld, basis = scenario.field, scenario.basis
    box = fld.domain
    dt = sc["dt"]
    sub = max(1, int(round(sc["control_period"] / dt)))
    n = sc["agents"]
    p = basis.p

    positions = scenario.positions
    if cfg["partition"]["seeding"] == "lloyd":
        res = lloyd_uniform_coverage(positions, box, iterations=cfg["partition"]["lloyd_iterations"])
        if not res.converged:
            log.warning("coverage pre-run stopped after %d iterations", res.iterations)
        positions = res.positions
    part = build_partition(positions, box, basis, est["edge_weight"], est["cross_weight"])
    blocks = part.blocks

    motions = []
    for i in range(n):
        tour = plan_tour(part.cells[i], basis.centres[blocks[i]], positions[i], indices=blocks[i],
                         mode=mot["tour_mode"], epsilon=mot["epsilon"])
        motions.append(AgentMotion(np.array(positions[i]), mot["gain"], tour, mot["reach_radius"]))

    gamma = np.asarray(est["gamma"], dtype=float)
    if gamma.size not in (1, p):
        raise InvalidScenario(f"estimator.gamma needs 1 or {p} values")
    bank = EstimatorBank(alg, blocks, p, gamma=gamma if gamma.size == p else float(gamma[0]),
                         zeta=est["zeta"], laplacian=part.laplacian, parent=part.parent_table(),
                         cross_weight=est["cross_weight"], a_init=np.full(p, est["a_init"]))
    stiff = float(np.max(bank.gamma)) * bank.zeta * float(np.max(np.linalg.eigvalsh(bank.laplacian))) * dt
    if stiff > 2.5:
        log.warning("consensus term is stiff for dt=%g (gain*dt=%.2f); RK4 may diverge", dt, stiff)
    check_interval = est["check_interval"]
    monitors = [ExcitationMonitor(len(b), est["excitation_threshold"], check_interval) for b in blocks]
    freeze = _freeze_mode(cfg)
    need_lap = est["require_full_lap"]
    a_true = scenario.a_true

    excited = np.zeros(n, dtype=bool)
    T_agents = np.full(n, np.nan)
    frozen_at = None
    run_after = sc["run_after_excitation"]
    end_step = None if run_after is not None else int(round(sc["duration"] / dt))
    timeout_step = int(round(sc["excitation_timeout"] / dt))
    traj_every = cfg["output"]["trajectory_every"]
    est_every = cfg["output"]["estimate_every"]

    trajectory, estimates, errors = [], [], []
    V_trace = [bank.lyapunov(a_true)]
    blocks_k = [np.asarray(b) for b in blocks]

    def log_trajectory(t):
        for i, m in enumerate(motions):
            trajectory.append((t, i, m.position[0], m.position[1], m.target_index()))

    def log_estimates(t):
        en = bank.error_norms(a_true)
        dis = bank.disagreement()
        V = V_trace[-1]
        for i in range(n):
            idx, vals = bank.own(i)
            for g, v in zip(idx, vals):
                estimates.append((t, i, int(g), float(v)))
            errors.append((t, i, float(en[i]), V, dis, monitors[i].min_eig))

    def mark_reached(t):
        for m in motions:
            # several consecutive waypoints may already be satisfied
            for _ in range(len(m.tour)):
                if not m.reached(basis):
                    break
                m.advance(t)

    mark_reached(0.0)
    if keep_logs:
        log_trajectory(0.0)
        log_estimates(0.0)

    step = 0
    while True:
        X = np.array([m.position for m in motions])
        goals = np.array([m.goal for m in motions])
        stages, X_new = rk4_stage_positions(X, goals, mot["gain"], dt)
        flat = stages.reshape(-1, 2)
        k = basis.kernel_vector(flat).reshape(4, n, p)
        phi = fld.values(flat).reshape(4, n)
        t = (step + 1) * dt
        for i in range(n):
            if not excited[i] and not monitors[i].achieved:
                monitors[i].accumulate_stages(k[:, i, blocks_k[i]], dt)
        bank.tick(k, phi, dt)
        step += 1
        for i, m in enumerate(motions):
            m.position = X_new[i]
        # discrete decisions run on the control clock so they do not move with dt
        control_tick = step % sub == 0
        if control_tick:
            mark_reached(t)
            if (step // sub - 1) % check_interval == 0:
                for i in range(n):
                    if not excited[i] and not monitors[i].achieved:
                        monitors[i].recheck(t)

        for i in range(n):
            if not control_tick or excited[i] or not monitors[i].achieved:
                continue
            if need_lap and len(motions[i].tour) and motions[i].laps < 1:
                continue
            excited[i] = True
            T_agents[i] = t
            if freeze == "agent":
                bank.freeze(i)
        if frozen_at is None and excited.all():
            frozen_at = step
            if freeze == "network":
                for i in range(n):
                    bank.freeze(i)
            if run_after is not None:
                end_step = step + int(round(run_after / dt))

        V_trace.append(bank.lyapunov(a_true))
        if not np.isfinite(V_trace[-1]):
            raise InvalidScenario(f"integration diverged at t={t:.3f} s; reduce dt or the gains")
        done = end_step is not None and step >= end_step
        if keep_logs:
            if step % traj_every == 0 or done:
                log_trajectory(t)
            if step % est_every == 0 or done:
                log_estimates(t)
        if done:
            break
        if frozen_at is None and step >= timeout_step:
            deficient = {}
            for i in range(n):
                if not excited[i]:
                    unvisited = sorted(set(blocks[i].tolist()) - {v[1] for v in motions[i].visits})
                    deficient[i] = dict(min_eig=monitors[i].min_eig, unvisited=unvisited)
            raise ExcitationTimeout(
                f"excitation not reached within {sc['excitation_timeout']} s; "
                f"deficient agents {sorted(deficient)}", deficient)

    T = float(np.nanmax(T_agents)) if excited.all() else float("nan")
    if not excited.all():
        log.warning("run ended before every agent was excited")

    composite = bank.composite()
    en = bank.error_norms(a_true)
    metrics = dict(
        T=T,
        max_param_error=float(en.max()),
        mean_param_error=float(en.mean()),
        integral_error=integral_error(fld, basis, composite, cfg["output"]["integral_resolution"]),
        consensus_disagreement=bank.disagreement(),
    )

    eta = np.array([float(np.linalg.eigvalsh(bank.state(i).Lambda)[0]) if len(bank.indices[i]) else np.inf
                    for i in range(n)])
    bounds = _bounds(cfg, scenario, bank, blocks, T_agents, T, eta, en)

    return RunRecord(
        config=cfg, algorithm=alg, basis=basis, generators=np.array(positions), cells=part.cells,
        blocks=[b.copy() for b in blocks], T=T, T_agents=T_agents, eta=eta,
        final_estimates=bank.a_hat.copy(), composite=composite, metrics=metrics, bounds=bounds,
        lambdas=[bank.state(i).Lambda for i in range(n)], final_errors=en,
        V=np.array(V_trace), trajectory=trajectory, estimates=estimates, errors=errors,
        steps=step, wall_time=time.perf_counter() - t_wall,
    )


def _bounds(cfg, scenario, bank, blocks, T_agents, T, eta, err):
    """Ultimate error radii where the theory applies, with satisfaction flags."""
    alg = cfg["scenario"]["algorithm"]
    basis = scenario.basis
    if scenario.true_basis is None or cfg["basis"]["kind"] != "field" or not np.isfinite(T):
        return []
    eps_c = cfg["centres"]["accuracy"]
    a_max = cfg["field"]["a_max"] or float(scenario.field.a_max)
    alpha = cfg["estimator"]["alpha"]
    p = basis.p
    out = []
    if alg in ("s2", "s3"):
        for i, b in enumerate(blocks):
            if len(b) == 0:
                continue
            delta = leakage_factor(basis, b)
            if eps_c > 0:
                bd = partial_bound_inexact(T_agents[i], p, delta, a_max, eta[i], basis_lipschitz(basis), eps_c, alpha)
            else:
                bd = partial_bound(T_agents[i], p, delta, a_max, eta[i], alpha)
            out.append(dict(agent=i, r=bd.r, error=float(err[i]), ok=bool(err[i] <= bd.r)))
    elif alg == "s1" and eps_c > 0:
        lams = [bank.state(i).Lambda for i in range(bank.n)]
        eta_min = consensus_excitation(lams, bank.laplacian, bank.zeta)
        bd = full_bound_inexact(T, p, a_max, eta_min, basis_lipschitz(basis), eps_c, alpha)
        for i in range(bank.n):
            out.append(dict(agent=i, r=bd.r, error=float(err[i]), ok=bool(err[i] <= bd.r)))
    return out


# -- outputs -----------------------------------------------------------------


def write_grid(path, values, grid: RegularGrid):
    (x0, y0), (x1, y1) = grid.box.lower, grid.box.upper
    with open(path, "w") as fh:
        fh.write(f"{grid.nx} {grid.ny} {x0!r} {y0!r} {x1!r} {y1!r}\n")
        for v in np.asarray(values).ravel():
            fh.write(f"{v:.9g}\n")


def read_grid(path):
    with open(path) as fh:
        head = fh.readline().split()
        vals = np.array([float(line) for line in fh if line.strip()])
    nx, ny = int(head[0]), int(head[1])
    box = type(UNIT_SQUARE)((float(head[2]), float(head[3])), (float(head[4]), float(head[5])))
    return vals.reshape(ny, nx), RegularGrid(nx, ny, box)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_outputs(record: RunRecord, out_dir):
    """Write the run logs and summary into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = record.config
    _write_rows(os.path.join(out_dir, "trajectory.csv"), ["t", "agent_id", "x", "y", "target_index"],
                record.trajectory)
    _write_rows(os.path.join(out_dir, "estimates.csv"), ["t", "agent_id", "param_index_global", "a_hat"],
                record.estimates)
    _write_rows(os.path.join(out_dir, "errors.csv"),
                ["t", "agent_id", "err_norm", "V", "consensus_disagreement", "min_eig_block"], record.errors)
    write_cells_csv(os.path.join(out_dir, "cells.csv"), record.cells)
    res = cfg["output"]["grid_resolution"]
    grid = RegularGrid(res, res, UNIT_SQUARE)
    write_grid(os.path.join(out_dir, "reconstruction.txt"), reconstruct(record.basis, record.composite, grid), grid)
    with open(os.path.join(out_dir, "config.ini"), "w") as fh:
        fh.write(cfgmod.dumps(cfg))
    summary = dict(
        algorithm=record.algorithm, T=record.T, T_agents=record.T_agents, eta=record.eta,
        metrics=record.metrics, final_errors=record.final_errors, bounds=record.bounds,
        blocks=[b.tolist() for b in record.blocks],
        basis=dict(centres=record.basis.centres, widths=record.basis.widths),
        composite=record.composite, steps=record.steps,
    )
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=1)
    return out_dir


# -- sweeps ------------------------------------------------------------------

SWEEP_COLUMNS = ("algorithm", "p", "sigma", "T_seconds", "integral_error", "max_param_error")


def _sweep_row(args):
    cfg, alg, p, sigma = args
    row = dict(algorithm=alg, p=p, sigma=sigma, T_seconds=float("nan"),
               integral_error=float("nan"), max_param_error=float("nan"), error="")
    try:
        run_cfg = cfgmod.override(cfg, scenario=dict(algorithm=alg), basis=dict(kind="grid", p=p, sigma=sigma))
        rec = run(build_scenario(run_cfg), keep_logs=False)
        row.update(T_seconds=rec.T, integral_error=rec.metrics["integral_error"],
                   max_param_error=rec.metrics["max_param_error"])
    except (FieldnetError, ValueError, np.linalg.LinAlgError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        log.error("sweep row %s p=%d sigma=%g failed: %s", alg, p, sigma, exc)
    return row


def sweep(cfg, threads=1):
    """Run every (algorithm, sigma, p) combination of the config's sweep section.

    Rows come back in grid order regardless of ``threads``; a failed row
    carries NaN metrics and the error text.
    """
    sw = cfg["sweep"]
    jobs = [(cfg, alg, p, sigma) for p in sw["sizes"] for sigma in sw["sigmas"] for alg in sw["algorithms"]]
    if not jobs:
        raise InvalidScenario("sweep grid is empty")
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(j) for j in jobs]


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r["algorithm"], r["p"], _fmt(r["sigma"]), _fmt(r["T_seconds"]),
                        _fmt(r["integral_error"]), _fmt(r["max_param_error"])])
