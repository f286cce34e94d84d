"""Tests for the scan drivers: ring builders, targets, seeds, and outputs."""

from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from qnetlocal import (
    ConfigError,
    HilbertWiring,
    NetworkConfig,
    PartySpec,
    ScanPoint,
    ScanResult,
    bell_state,
    born_distribution,
    ring_wiring,
    parse_config,
    rgb4_point,
    rgb4_povm,
    ring_network,
    scan_grid_2d,
    scan_rgb4,
    scan_visibility,
    tetra_point,
    theta_mirror_gaps,
    write_scan_csv,
    write_scan_outputs,
)
from qnetlocal.localmodel import SamplingController, TrainConfig
from qnetlocal.scan import point_seed

TRIANGLE_DOC_WIRING = HilbertWiring((5, 0, 1, 2, 3, 4))


def tiny_tcfg(seed=11):
    return TrainConfig(max_iters=25, patience=30, smooth_window=10,
                       eval_samples=20_000, seed=seed)


def tiny_ctrl(n_outcomes=64):
    return SamplingController(n_outcomes=n_outcomes, n_min=300, n_max=1_000)


TINY_FIT = dict(width=6, depth=2)


# ---------------------------------------------------------------- ring builder


def test_ring_network_triangle_layout():
    net = ring_network(3)
    assert [p.name for p in net.parties] == ["a1", "a2", "a3"]
    assert net.parties[0].sources == ("lambda1", "lambda3")
    assert net.parties[1].sources == ("lambda2", "lambda1")
    assert net.parties[2].sources == ("lambda3", "lambda2")
    assert all(p.n_outcomes == 4 for p in net.parties)
    assert net.sources == ("lambda1", "lambda3", "lambda2")


def test_ring_network_pentagon_and_outcomes():
    net = ring_network(5, 2)
    assert net.n_parties == 5 and net.n_sources == 5
    assert net.parties[0].sources == ("lambda1", "lambda5")
    assert all(p.n_outcomes == 2 for p in net.parties)
    usage = net.source_usage()
    assert all(len(parties) == 2 for parties in usage.values())


def test_ring_network_rejects_small_rings():
    with pytest.raises(ConfigError):
        ring_network(2)


# ---------------------------------------------------------------- wiring


def test_ring_wiring_triangle_order():
    wiring = ring_wiring(ring_network(3))
    assert wiring.order == (3, 0, 1, 4, 5, 2)
    assert sorted(wiring.order) == list(range(6))


def test_ring_wiring_pentagon_order():
    wiring = ring_wiring(ring_network(5))
    assert wiring.order == (3, 0, 1, 4, 5, 6, 7, 8, 9, 2)


def test_ring_wiring_matches_documented_triangle_wiring():
    # Same pairing pattern and orientation, so the distributions agree
    # even though the slot order differs from the documented form.
    net = ring_network(3)
    states = [bell_state("psi_plus")] * 3
    povms = [rgb4_povm(0.9)] * 3
    mine = born_distribution(net, states, povms, ring_wiring(net))
    doc = born_distribution(net, states, povms, TRIANGLE_DOC_WIRING)
    np.testing.assert_allclose(mine.probs, doc.probs, rtol=0, atol=1e-12)


def test_ring_wiring_rejects_unbalanced_usage():
    with pytest.warns(UserWarning, match="feed only one party"):
        lonely = NetworkConfig((
            PartySpec("a", ("s", "t"), 2),
            PartySpec("b", ("t", "w"), 2),
        ))
    with pytest.raises(ConfigError):
        ring_wiring(lonely)
    crowded = NetworkConfig((
        PartySpec("a", ("s",), 2),
        PartySpec("b", ("s",), 2),
        PartySpec("c", ("s",), 2),
    ))
    with pytest.raises(ConfigError):
        ring_wiring(crowded)


# ---------------------------------------------------------------- scan points


def test_rgb4_point_validation():
    with pytest.raises(ValueError):
        rgb4_point(1.2)
    with pytest.raises(ValueError):
        rgb4_point(0.9, visibility=1.5)
    with pytest.raises(ValueError):
        ScanPoint(params=(("V", 1.0),), network=ring_network(3),
                  state_family="psi_plus", measurement_family="rgb4")
    with pytest.raises(ValueError):
        ScanPoint(params=(("u2", 0.9),), network=ring_network(3),
                  state_family="psi_plus", measurement_family="frobnicate")
    with pytest.raises(ValueError):
        ScanPoint(params=(("u2", 0.9),), network=ring_network(3),
                  state_family="ghz", measurement_family="rgb4")


def test_tetra_point_validation():
    with pytest.raises(ValueError):
        tetra_point(theta=4.0, mu=0.0)
    with pytest.raises(ValueError):
        tetra_point(theta=1.0, mu=2.0)
    with pytest.raises(ValueError):
        ScanPoint(params=(("mu", 0.5),), network=ring_network(3),
                  state_family="rotated1", measurement_family="tetra")


def test_rgb4_point_target_matches_direct_born():
    point = rgb4_point(0.85)
    direct = born_distribution(point.network, [bell_state("psi_plus")] * 3,
                               [rgb4_povm(math.sqrt(0.85))] * 3,
                               TRIANGLE_DOC_WIRING)
    np.testing.assert_allclose(point.target().probs, direct.probs,
                               rtol=0, atol=1e-12)


def test_rgb4_point_zero_visibility_is_uniform():
    probs = rgb4_point(0.85, visibility=0.0).target().probs
    np.testing.assert_allclose(probs, 1 / 64, rtol=0, atol=1e-12)


def test_tetra_point_coarse_pentagon_target():
    point = tetra_point(theta=0.7, mu=0.3, network=ring_network(5, 3),
                        coarse=(0, 0, 1, 2))
    dist = point.target()
    assert dist.indexer.shape == (3,) * 5
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_tetra_point_coarse_shape_mismatch():
    point = tetra_point(theta=0.7, mu=0.3, network=ring_network(3, 4),
                        coarse=(0, 0, 1, 2))
    with pytest.raises(ValueError):
        point.target()


# ---------------------------------------------------------------- seeds


def test_point_seed_depends_on_coordinates():
    seeds = {point_seed(7, (i,)) for i in range(20)}
    assert len(seeds) == 20
    assert point_seed(7, (3,)) == point_seed(7, (3,))
    assert point_seed(7, (1, 2)) != point_seed(7, (2, 1))
    assert point_seed(8, (3,)) != point_seed(7, (3,))


# ---------------------------------------------------------------- scan drivers


def test_scan_rgb4_records_points_and_seeds():
    tcfg = tiny_tcfg()
    results = scan_rgb4([0.5, 1.0], 1.0, tcfg, tiny_ctrl(), **TINY_FIT)
    assert len(results) == 2
    assert [r.point.param_dict()["u2"] for r in results] == [0.5, 1.0]
    assert all(r.point.param_dict()["V"] == 1.0 for r in results)
    assert results[0].seed == point_seed(tcfg.seed, (0,))
    assert results[1].seed == point_seed(tcfg.seed, (1,))
    for r in results:
        assert r.final_kl >= 0 and r.final_euclid >= 0
        assert 1 <= r.iterations <= tcfg.max_iters
        assert r.wall_time_seconds > 0
        assert r.end_sample_count <= 1_000
        assert r.point.param_names() == ("u2", "V")


def test_scan_rgb4_rejects_out_of_range_grid():
    with pytest.raises(ValueError):
        scan_rgb4([0.3], 1.0, tiny_tcfg(), tiny_ctrl())
    with pytest.raises(ValueError):
        scan_rgb4([0.9], 1.0, tiny_tcfg(), tiny_ctrl(), jobs=1, width=6,
                  depth=2, restarts=0)


def test_scan_parallel_matches_sequential():
    tcfg = tiny_tcfg(seed=21)
    seq = scan_rgb4([0.6, 0.9], 1.0, tcfg, tiny_ctrl(), **TINY_FIT, jobs=1)
    par = scan_rgb4([0.6, 0.9], 1.0, tcfg, tiny_ctrl(), **TINY_FIT, jobs=2)
    assert [(r.seed, r.final_kl, r.final_euclid) for r in seq] == \
           [(r.seed, r.final_kl, r.final_euclid) for r in par]


def test_scan_visibility_rgb4_mode():
    tcfg = tiny_tcfg(seed=31)
    results = scan_visibility([0.0, 1.0], u2=0.85, tcfg=tcfg,
                              ctrl=tiny_ctrl(), **TINY_FIT)
    assert [r.point.param_dict()["V"] for r in results] == [0.0, 1.0]
    assert all(r.point.param_dict()["u2"] == 0.85 for r in results)
    # V=0 target is uniform, which is exactly representable: the fit gets
    # close even with a tiny budget.
    assert results[0].final_euclid < 0.05


def test_scan_visibility_tetra_mode_and_arg_validation():
    results = scan_visibility([0.9], theta=0.7, mu=0.2, tcfg=tiny_tcfg(),
                              ctrl=tiny_ctrl(), **TINY_FIT)
    assert results[0].point.measurement_family == "tetra"
    assert results[0].point.param_dict() == {"theta": 0.7, "mu": 0.2, "V": 0.9}
    with pytest.raises(ValueError):
        scan_visibility([0.9], tcfg=tiny_tcfg())
    with pytest.raises(ValueError):
        scan_visibility([0.9], u2=0.8, theta=0.7, mu=0.2, tcfg=tiny_tcfg())
    with pytest.raises(ValueError):
        scan_visibility([1.4], u2=0.8, tcfg=tiny_tcfg())


def test_scan_grid_2d_matrix_and_mirror_gaps():
    tcfg = tiny_tcfg(seed=41)
    theta_grid = [math.pi / 2 - 0.4, math.pi / 2 + 0.4]
    mu_grid = [0.0, math.pi / 2]
    matrix = scan_grid_2d(None, theta_grid, mu_grid, tcfg=tcfg,
                          ctrl=tiny_ctrl(), **TINY_FIT)
    assert len(matrix) == 2 and all(len(row) == 2 for row in matrix)
    for i, row in enumerate(matrix):
        for j, r in enumerate(row):
            assert r.point.param_dict()["theta"] == pytest.approx(theta_grid[i])
            assert r.point.param_dict()["mu"] == pytest.approx(mu_grid[j])
            assert r.seed == point_seed(tcfg.seed, (i, j))
    flat = [r for row in matrix for r in row]
    gaps = theta_mirror_gaps(flat)
    assert gaps[0] == pytest.approx(abs(matrix[0][0].final_kl
                                        - matrix[1][0].final_kl))
    assert gaps[3] == gaps[1]
    assert all(g is not None for g in gaps)


def test_scan_grid_2d_warm_start_runs():
    tcfg = tiny_tcfg(seed=51)
    matrix = scan_grid_2d(None, [0.5], [0.1, 0.3], tcfg=tcfg,
                          ctrl=tiny_ctrl(), **TINY_FIT, warm_start=True)
    assert len(matrix) == 1 and len(matrix[0]) == 2
    assert all(r.final_kl >= 0 for r in matrix[0])


def test_scan_grid_2d_rejects_non_ring():
    chain = parse_config(json.dumps({"parties": {
        "a": {"sources": ["lam"], "outcomes": 4},
        "b": {"sources": ["lam"], "outcomes": 4},
    }}))
    with pytest.raises(ConfigError):
        scan_grid_2d(chain, [0.5], [0.1], tcfg=tiny_tcfg())


def test_theta_mirror_gap_none_without_mirror():
    point = tetra_point(theta=0.3, mu=0.1)
    r = ScanResult(point=point, final_kl=0.5, final_euclid=0.1,
                   best_during_training=0.4, iterations=10, seed=1,
                   wall_time_seconds=0.1, end_sample_count=100)
    center = tetra_point(theta=math.pi / 2, mu=0.1)
    rc = ScanResult(point=center, final_kl=0.2, final_euclid=0.1,
                    best_during_training=0.1, iterations=10, seed=2,
                    wall_time_seconds=0.1, end_sample_count=100)
    gaps = theta_mirror_gaps([r, rc])
    assert gaps[0] is None          # no theta = pi - 0.3 cell
    assert gaps[1] == 0.0           # pi/2 mirrors onto itself


# ---------------------------------------------------------------- outputs


def fabricated_results():
    out = []
    for i, u2 in enumerate([0.5, 0.85]):
        point = rgb4_point(u2)
        out.append(ScanResult(point=point, final_kl=0.1 * (i + 1),
                              final_euclid=0.01 * (i + 1),
                              best_during_training=0.05, iterations=100 + i,
                              seed=7 + i, wall_time_seconds=1.25,
                              end_sample_count=2_000))
    return out


def test_write_scan_csv_schema(tmp_path):
    results = fabricated_results()
    path = write_scan_csv(results, tmp_path / "out.csv",
                          extra={"note": [None, 0.25]})
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["u2", "V", "final_kl", "final_euclid", "best_raw_loss",
                       "iterations", "seed", "wall_time_s", "end_samples",
                       "note"]
    assert rows[1][0] == "0.5" and rows[1][-1] == ""
    assert rows[2][0] == "0.85" and rows[2][-1] == "0.25"
    assert float(rows[2][2]) == pytest.approx(0.2)
    assert rows[1][5] == "100" and rows[2][5] == "101"


def test_write_scan_csv_validates(tmp_path):
    with pytest.raises(ValueError):
        write_scan_csv([], tmp_path / "empty.csv")
    results = fabricated_results()
    with pytest.raises(ValueError):
        write_scan_csv(results, tmp_path / "bad.csv", extra={"x": [1.0]})


def test_write_scan_outputs_sidecar_and_collision(tmp_path):
    results = fabricated_results()
    tcfg, ctrl = tiny_tcfg(), tiny_ctrl()
    csv1, json1 = write_scan_outputs("rgb4", results, tmp_path, tcfg, ctrl,
                                     settings={"width": 6})
    csv2, json2 = write_scan_outputs("rgb4", results, tmp_path, tcfg, ctrl)
    assert csv1.name.startswith("scan_rgb4_") and csv1.suffix == ".csv"
    assert csv1 != csv2 and json1 != json2
    doc = json.loads(json1.read_text())
    assert doc["scan"] == "rgb4"
    assert doc["n_points"] == 2
    assert doc["train_config"]["max_iters"] == tcfg.max_iters
    assert doc["controller"]["n_max"] == ctrl.n_max
    assert doc["settings"] == {"width": 6}
    assert doc["csv"] == csv1.name
    assert doc["network"] == results[0].point.network.to_dict()
    assert doc["state_family"] == "psi_plus"
