import filecmp
import logging
import math

import numpy as np
import pytest

from conftest import SEED3_POSITIONS, make_config
from fieldnet import config as cfgmod
from fieldnet.engine import (
    SWEEP_COLUMNS,
    build_scenario,
    read_grid,
    run,
    sweep,
    write_grid,
    write_outputs,
    write_sweep_csv,
)
from fieldnet.errors import ExcitationTimeout, InvalidScenario
from fieldnet.field import RegularGrid

OUTPUT_FILES = ("trajectory.csv", "estimates.csv", "errors.csv", "cells.csv", "reconstruction.txt",
                "config.ini", "summary.json")


def test_seeded_positions_are_reproducible(short_cfg):
    sc = build_scenario(short_cfg)
    np.testing.assert_allclose(sc.positions, SEED3_POSITIONS, atol=1e-8)
    other = build_scenario(cfgmod.override(short_cfg, scenario=dict(seed=4)))
    assert not np.allclose(other.positions, sc.positions)
    d = np.linalg.norm(sc.positions[:, None] - sc.positions[None], axis=-1)
    assert d[np.triu_indices(4, 1)].min() >= short_cfg["scenario"]["min_separation"]


def test_explicit_positions_are_used():
    cfg = make_config("[scenario]\nagents = 2\ninitial_positions = 0.1, 0.2; 0.8, 0.9\n")
    np.testing.assert_array_equal(build_scenario(cfg).positions, [[0.1, 0.2], [0.8, 0.9]])


def test_centre_accuracy_only_moves_the_model_basis(short_cfg):
    sc = build_scenario(cfgmod.override(short_cfg, centres=dict(accuracy=0.05)))
    assert not np.array_equal(sc.basis.centres, sc.true_basis.centres)
    np.testing.assert_array_equal(sc.positions, build_scenario(short_cfg).positions)


def test_zero_accuracy_is_bitwise_known_centres(short_cfg):
    base = run(build_scenario(short_cfg))
    zero = run(build_scenario(cfgmod.override(short_cfg, centres=dict(accuracy=0.0))))
    np.testing.assert_array_equal(base.final_estimates, zero.final_estimates)
    np.testing.assert_array_equal(base.V, zero.V)


def test_run_is_byte_identical_across_repeats(short_cfg, tmp_path):
    a = write_outputs(run(build_scenario(short_cfg)), tmp_path / "a")
    b = write_outputs(run(build_scenario(short_cfg)), tmp_path / "b")
    for name in OUTPUT_FILES:
        assert filecmp.cmp(f"{a}/{name}", f"{b}/{name}", shallow=False), name


@pytest.mark.parametrize("alg", ["s1", "s2", "s3"])
def test_halving_dt_barely_moves_the_estimate(short_cfg, alg):
    cfg = cfgmod.override(short_cfg, scenario=dict(algorithm=alg))
    coarse = run(build_scenario(cfg), keep_logs=False)
    fine = run(build_scenario(cfgmod.override(cfg, scenario=dict(dt=5e-4))), keep_logs=False)
    assert coarse.T == pytest.approx(fine.T, abs=1e-9)
    assert np.max(np.abs(coarse.composite - fine.composite)) < 1e-4


def test_lyapunov_trace_nonincreasing_for_s1(short_cfg):
    rec = run(build_scenario(short_cfg), keep_logs=False)
    assert len(rec.V) == rec.steps + 1
    assert np.all(np.diff(rec.V) <= 1e-9 * rec.V[0])


def test_degenerate_one_agent_one_kernel():
    cfg = make_config("""
[scenario]
algorithm = single
agents = 1
duration = 2.0
initial_positions = 0.5, 0.5
[field]
kind = constant
value = 2.0
[basis]
kind = grid
p = 1
sigma = 0.5
""")
    rec = run(build_scenario(cfg))
    assert rec.T == pytest.approx(1e-3)
    # parked on the only centre: da/dt = -t (a - 2), so a(t) = 2 (1 - exp(-t^2 / 2))
    assert rec.composite[0] == pytest.approx(2.0 * (1.0 - math.exp(-2.0)), abs=1e-9)


def test_stationary_agents_time_out():
    cfg = make_config("""
[scenario]
agents = 2
initial_positions = 0.2, 0.2; 0.8, 0.8
excitation_timeout = 0.5
[estimator]
excitation_threshold = 1.0
""")
    with pytest.raises(ExcitationTimeout) as exc:
        run(build_scenario(cfg), keep_logs=False)
    assert set(exc.value.deficient) == {0, 1}
    assert all("min_eig" in v for v in exc.value.deficient.values())


def test_divergence_is_reported(short_cfg, caplog):
    cfg = cfgmod.override(short_cfg, estimator=dict(gamma=(100.0,), zeta=30.0))
    with caplog.at_level(logging.WARNING, logger="fieldnet.engine"):
        with pytest.raises(InvalidScenario, match="diverged"):
            run(build_scenario(cfg), keep_logs=False)
    assert any("stiff" in r.message for r in caplog.records)


def test_bounds_present_for_partial_algorithms(short_cfg):
    rec = run(build_scenario(cfgmod.override(short_cfg, scenario=dict(algorithm="s2"),
                                             estimator=dict(gamma=(100.0,)))), keep_logs=False)
    assert len(rec.bounds) == 4
    for b, e in zip(rec.bounds, rec.final_errors):
        assert b["ok"] == (e <= b["r"])
        assert math.isfinite(b["r"])


def test_output_files(short_cfg, tmp_path):
    rec = run(build_scenario(short_cfg))
    out = write_outputs(rec, tmp_path)
    for name in OUTPUT_FILES:
        assert (tmp_path / name).exists()
    lines = (tmp_path / "errors.csv").read_text().splitlines()
    assert lines[0] == "t,agent_id,err_norm,V,consensus_disagreement,min_eig_block"
    assert cfgmod.load(tmp_path / "config.ini") == short_cfg
    values, grid = read_grid(tmp_path / "reconstruction.txt")
    assert values.shape == (101, 101) and grid.nx == 101
    assert out == tmp_path


def test_grid_file_round_trip(tmp_path, rng):
    grid = RegularGrid(4, 3)
    vals = rng.normal(size=(3, 4))
    write_grid(tmp_path / "g.txt", vals, grid)
    back, g2 = read_grid(tmp_path / "g.txt")
    np.testing.assert_allclose(back, vals, rtol=1e-8)
    assert g2 == grid


def test_sweep_rows_and_csv(tmp_path):
    cfg = make_config("""
[scenario]
agents = 2
duration = 3.0
seed = 2
[field]
kind = three_bump
[basis]
kind = grid
p = 16
sigma = 0.15
[sweep]
algorithms = s1, s2
sigmas = 0.15
sizes = 16
""")
    rows = sweep(cfg)
    assert [r["algorithm"] for r in rows] == ["s1", "s2"]
    assert all(not r["error"] and math.isfinite(r["integral_error"]) for r in rows)
    single = run(build_scenario(cfgmod.override(cfg, scenario=dict(algorithm="s2"))), keep_logs=False)
    assert rows[1]["integral_error"] == single.metrics["integral_error"]
    write_sweep_csv(tmp_path / "s.csv", rows)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS) and len(lines) == 3


def test_sweep_failed_row_is_recorded():
    cfg = make_config("""
[scenario]
agents = 2
[field]
kind = three_bump
[basis]
kind = grid
[sweep]
algorithms = s1
sigmas = 0.1
sizes = 10
""")
    (row,) = sweep(cfg)
    assert "perfect square" in row["error"] and math.isnan(row["integral_error"])


@pytest.fixture(scope="module")
def reference_s1_run():
    cfg = make_config("[scenario]\nseed = 3\n")
    return run(build_scenario(cfg))


def test_s1_lyapunov_decays_geometrically_after_excitation(reference_s1_run):
    rec = reference_s1_run
    dt = rec.config["scenario"]["dt"]
    start = int(math.ceil(rec.T))
    for t0 in range(start, int(rec.steps * dt) - 1):
        v0, v1 = rec.V[int(round(t0 / dt))], rec.V[int(round((t0 + 1) / dt))]
        assert math.log(v0 / v1) > 0.1


def test_s1_disagreement_shrinks(reference_s1_run):
    by_t = {}
    for t, _agent, _err, _v, dis, _eig in reference_s1_run.errors:
        by_t[t] = dis
    times = sorted(by_t)
    late = [by_t[t] for t in times if t >= 8.0]
    assert all(b <= a + 1e-12 for a, b in zip(late, late[1:]))
    assert late[-1] < 0.2 * late[0]


def test_trajectories_stay_in_own_cells(reference_s1_run):
    from fieldnet.partition import point_in_convex

    rec = reference_s1_run
    for _t, agent, x, y, _target in rec.trajectory:
        assert point_in_convex(rec.cells[agent], np.array([x, y]), tol=1e-9)


def test_blocks_partition_the_kernels(reference_s1_run):
    blocks = np.concatenate(reference_s1_run.blocks)
    assert sorted(blocks.tolist()) == list(range(reference_s1_run.basis.p))


def test_lambda_symmetric_psd(reference_s1_run):
    for lam in reference_s1_run.lambdas:
        assert np.max(np.abs(lam - lam.T)) <= 1e-12
        assert np.linalg.eigvalsh(lam)[0] >= -1e-12


@pytest.mark.parametrize("alg", ["s2", "s3"])
def test_frozen_filters_stay_constant(short_cfg, alg):
    cfg = cfgmod.override(short_cfg, scenario=dict(algorithm=alg, duration=2.0))
    early = run(build_scenario(cfg), keep_logs=False)
    late = run(build_scenario(cfgmod.override(cfg, scenario=dict(duration=3.0))), keep_logs=False)
    assert early.T < 2.0
    for a, b in zip(early.lambdas, late.lambdas):
        np.testing.assert_array_equal(a, b)
