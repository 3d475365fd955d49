import json
import math

import numpy as np
import pytest

from se3diffuse.cli import main
from se3diffuse.io import ParseError, read_keyvalue, read_point_cloud, read_poses, write_point_cloud, write_poses
from se3diffuse.lie import Pose, random_rotation
from se3diffuse.pointcloud import PointCloud
from se3diffuse.scenario import (
    make_toy_scenario,
    read_model_params,
    read_scenario,
    write_model_params,
    write_scenario,
)


# ---------------------------------------------------------------------------
# Point cloud files
# ---------------------------------------------------------------------------

def test_read_csv_single_point(tmp_path):
    path = tmp_path / "cloud.csv"
    path.write_text("1,2,3\n")
    pc = read_point_cloud(path)
    assert np.array_equal(pc.positions, [[1.0, 2.0, 3.0]])
    assert pc.colors is None


def test_cloud_round_trip_csv_and_text(tmp_path, rng):
    pc = PointCloud(rng.standard_normal((20, 3)), colors=rng.random((20, 3)))
    for name in ("cloud.csv", "cloud.txt"):
        path = tmp_path / name
        write_point_cloud(path, pc)
        back = read_point_cloud(path)
        assert np.array_equal(back.positions, pc.positions)
        assert np.array_equal(back.colors, pc.colors)


def test_read_csv_malformed_line_reports_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n4,nope,6\n")
    with pytest.raises(ParseError, match="bad.csv:2"):
        read_point_cloud(path)


def test_read_csv_wrong_field_count(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n")
    with pytest.raises(ParseError, match="3 or 6"):
        read_point_cloud(path)


def test_text_cloud_requires_points(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("colors = [[0,0,0]]\n")
    with pytest.raises(ParseError, match="points"):
        read_point_cloud(path)


# ---------------------------------------------------------------------------
# Pose files
# ---------------------------------------------------------------------------

def test_pose_round_trip(tmp_path, rng):
    poses = [Pose(rng.standard_normal(3), random_rotation(rng)) for _ in range(5)]
    path = tmp_path / "poses.txt"
    write_poses(path, poses)
    back = read_poses(path)
    assert len(back) == 5
    for a, b in zip(poses, back):
        assert np.array_equal(a.p, b.p)
        assert np.array_equal(a.r.q, b.r.q)


def test_pose_identity_round_trip(tmp_path):
    path = tmp_path / "poses.txt"
    write_poses(path, [Pose.identity()])
    back = read_poses(path)
    assert back[0].allclose(Pose.identity())


def test_pose_slightly_off_norm_warns(tmp_path):
    path = tmp_path / "poses.txt"
    w = float(1.0 + 1e-7)
    path.write_text(f"pos: [0.0, 0.0, 0.0]\nquat: [{w!r}, 0.0, 0.0, 0.0]\n")
    with pytest.warns(RuntimeWarning, match="renormalizing"):
        back = read_poses(path)
    assert abs(np.linalg.norm(back[0].r.q) - 1.0) < 1e-12


def test_pose_bad_norm_rejected(tmp_path):
    path = tmp_path / "poses.txt"
    path.write_text("pos: [0.0, 0.0, 0.0]\nquat: [0.5, 0.0, 0.0, 0.0]\n")
    with pytest.raises(ParseError, match="norm"):
        read_poses(path)


def test_pose_missing_quat_rejected(tmp_path):
    path = tmp_path / "poses.txt"
    path.write_text("pos: [0.0, 0.0, 0.0]\n")
    with pytest.raises(ParseError, match="pos"):
        read_poses(path)


# ---------------------------------------------------------------------------
# Scenario and model-parameter files
# ---------------------------------------------------------------------------

def test_scenario_round_trip(tmp_path):
    scn = make_toy_scenario(seed=3)
    path = write_scenario(tmp_path / "scn", scn)
    back = read_scenario(path)
    assert np.array_equal(back.scene.positions, scn.scene.positions)
    assert np.array_equal(back.grasp.positions, scn.grasp.positions)
    assert len(back.demo_poses) == len(scn.demo_poses)
    for a, b in zip(back.demo_poses, scn.demo_poses):
        assert np.array_equal(a.p, b.p) and np.array_equal(a.r.q, b.r.q)
    assert back.config.t == scn.config.t
    assert back.config.r == scn.config.r
    assert np.array_equal(back.schedule.t, scn.schedule.t)
    assert back.seed == scn.seed


def test_model_params_round_trip(tmp_path):
    scn = make_toy_scenario(seed=3)
    path = tmp_path / "params.txt"
    write_model_params(path, scn.model)
    back = read_model_params(path)
    assert np.array_equal(back.weights_nu, scn.model.weights_nu)
    assert np.array_equal(back.scene.channel_weights, scn.model.scene.channel_weights)
    assert back.scene.layout == scn.model.scene.layout
    assert back.query_count == scn.model.query_count


def test_keyvalue_parse_error_names_line(tmp_path):
    path = tmp_path / "kv.txt"
    path.write_text("good = 1\nbad line\n")
    with pytest.raises(ParseError, match="kv.txt:2"):
        read_keyvalue(path)


# ---------------------------------------------------------------------------
# CLI commands
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def scenario_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scn")
    assert main(["gen-scenario", "--out", str(out), "--seed", "7"]) == 0
    return out


def test_cmd_diffuse_deterministic_and_small_t(scenario_dir, tmp_path):
    scn_path = str(scenario_dir / "scenario.txt")
    out1 = tmp_path / "d1.txt"
    out2 = tmp_path / "d2.txt"
    for out in (out1, out2):
        assert main(["diffuse", "--scenario", scn_path, "--t", "1e-8",
                     "--n", "6", "--out", str(out), "--seed", "5"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    scn = read_scenario(scn_path)
    poses = read_poses(out1)
    assert len(poses) == 6
    for g in poses:
        dists = [np.linalg.norm(g.p - g0.p) for g0 in scn.demo_poses]
        assert min(dists) < 1e-3


def test_cmd_diffuse_empty_output_has_header(scenario_dir, tmp_path):
    out = tmp_path / "empty.txt"
    assert main(["diffuse", "--scenario", str(scenario_dir / "scenario.txt"),
                 "--n", "0", "--out", str(out), "--seed", "1"]) == 0
    text = out.read_text()
    assert text.startswith("# se3diffuse version")
    assert read_poses(out) == []


def test_cmd_diffuse_logs_provenance(scenario_dir, tmp_path):
    out = tmp_path / "d.txt"
    assert main(["diffuse", "--scenario", str(scenario_dir / "scenario.txt"),
                 "--t", "0.5", "--n", "2", "--out", str(out), "--seed", "3"]) == 0
    text = out.read_text()
    assert "# sample 0: t = " in text and "p_de = " in text and "delta_quat = " in text


def test_cmd_denoise_deterministic(scenario_dir, tmp_path):
    scn_path = str(scenario_dir / "scenario.txt")
    outs = []
    for name in ("n1.txt", "n2.txt"):
        out = tmp_path / name
        assert main(["denoise", "--scenario", scn_path, "--score", "oracle",
                     "--chains", "3", "--out", str(out), "--seed", "5"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_cmd_denoise_model_source_runs(scenario_dir, tmp_path):
    out = tmp_path / "model.txt"
    assert main(["denoise", "--scenario", str(scenario_dir / "scenario.txt"),
                 "--score", "model", "--chains", "1", "--out", str(out),
                 "--seed", "2"]) == 0
    assert len(read_poses(out)) == 1


def test_cmd_denoise_missing_model_params_is_usage_error(tmp_path):
    scn = make_toy_scenario(seed=4)
    scn_no_model = type(scn)(scene=scn.scene, grasp=scn.grasp, demo_poses=scn.demo_poses,
                             config=scn.config, schedule=scn.schedule, seed=scn.seed,
                             model=None)
    path = write_scenario(tmp_path / "scn", scn_no_model)
    assert main(["denoise", "--scenario", str(path), "--score", "model",
                 "--chains", "1", "--out", str(tmp_path / "x.txt"), "--seed", "1"]) == 2


def test_cmd_denoise_quat_trans_integrator(scenario_dir, tmp_path):
    out = tmp_path / "qt.txt"
    assert main(["denoise", "--scenario", str(scenario_dir / "scenario.txt"),
                 "--score", "oracle", "--chains", "2", "--out", str(out),
                 "--seed", "6", "--integrator", "quat-trans"]) == 0
    assert len(read_poses(out)) == 2


def test_cmd_check_passes_and_reports_numbers(capsys):
    assert main(["check", "--suite", "lie"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True
    assert all(isinstance(c["max_error"], float) for c in report["checks"])


def test_cmd_check_negative_control(capsys):
    assert main(["check", "--suite", "equivariance", "--perturb-adjoint"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is False


def test_cmd_sample_igso3_uniform_limit(tmp_path):
    out = tmp_path / "rots.txt"
    assert main(["sample-igso3", "--eps", "10.0", "--n", "20000",
                 "--out", str(out), "--seed", "4"]) == 0
    text = out.read_text().splitlines()
    ks_line = next(l for l in text if l.startswith("# ks_statistic"))
    ks = float(ks_line.split("=")[1])
    assert ks < 0.01
    quats = [json.loads(l.split(":", 1)[1]) for l in text if l.startswith("quat:")]
    assert len(quats) == 20000
    # KS against the Haar angle marginal (theta - sin theta)/pi
    angles = np.sort([2.0 * math.atan2(np.linalg.norm(q[1:]), abs(q[0])) for q in quats])
    haar = (angles - np.sin(angles)) / math.pi
    n = angles.size
    ks_haar = np.max(np.maximum(np.arange(1, n + 1) / n - haar, haar - np.arange(n) / n))
    assert ks_haar < 0.01


def test_cmd_sample_igso3_deterministic(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    for out in (a, b):
        assert main(["sample-igso3", "--eps", "0.5", "--n", "500",
                     "--out", str(out), "--seed", "9"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cmd_sample_igso3_rejects_bad_eps(tmp_path):
    assert main(["sample-igso3", "--eps", "-1.0", "--n", "10",
                 "--out", str(tmp_path / "x.txt"), "--seed", "0"]) == 2
