import json

import numpy as np
import pytest
from conftest import box_scenario, tetra_mics

from echopath import ScenarioError, export, load_scenario, run
from echopath.cli import main, to_frozen_frame
from echopath.simulator import Pose, Scenario
from echopath.geometry import Hyperplane, Wall


def test_load_box_scenario(scenario_dir):
    scn = load_scenario(scenario_dir / "box_room.yaml")
    assert len(scn.walls) == 6
    assert scn.dimension == 3
    assert scn.mic_local.shape == (4, 3)
    assert len(scn.path) == 10
    assert not scn.occlusion_enabled


def test_load_2d_scenario(scenario_dir):
    scn = load_scenario(scenario_dir / "rect_room_2d.yaml")
    assert scn.dimension == 2
    assert len(scn.walls) == 4
    assert scn.mic_local is None


def test_load_rejects_coplanar_microphones(tmp_path):
    text = """
dimension: 3
walls:
  - {normal: [1, 0, 0], offset: 0.0}
speaker: [1, 1, 1]
mic_local: [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
"""
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(ScenarioError, match="non-coplanar"):
        load_scenario(path)


def test_load_renormalizes_wall_normal_with_warning(tmp_path):
    text = """
dimension: 2
walls:
  - {normal: [2, 0], offset: 6.0}
  - {normal: [0, 1], offset: 0.0}
speaker: [1.0, 1.0]
"""
    path = tmp_path / "scaled.yaml"
    path.write_text(text)
    with pytest.warns(UserWarning, match="renormaliz"):
        scn = load_scenario(path)
    assert np.allclose(scn.walls[0].plane.normal, [1.0, 0.0])
    assert scn.walls[0].plane.offset == pytest.approx(3.0)  # same plane x = 3


def test_load_parse_error(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("walls: [unclosed\n")
    with pytest.raises(ScenarioError, match="parse error"):
        load_scenario(path)


def test_load_missing_file():
    with pytest.raises(ScenarioError):
        load_scenario("does_not_exist.yaml")


def test_run_noiseless_box(scenario_dir):
    scn = load_scenario(scenario_dir / "box_room.yaml")
    records, metrics = run(scn)
    assert records[0].status == "bootstrap"
    assert all(r.status == "success" for r in records[1:])
    assert metrics.position_rmse <= 1e-6
    assert metrics.fail_count == 0
    assert metrics.bootstrap_step_index == 0


def test_run_records_carry_frozen_truth(scenario_dir):
    scn = load_scenario(scenario_dir / "box_room.yaml")
    records, _ = run(scn)
    third = records[3]
    truth = to_frozen_frame(scn.path[0], scn.path[3])
    assert np.allclose(third.true_pose.v, truth.v)
    assert np.allclose(third.est_pose.v, truth.v, atol=1e-8)


def test_run_requires_three_dimensional_scenario(scenario_dir):
    scn = load_scenario(scenario_dir / "rect_room_2d.yaml")
    with pytest.raises(ScenarioError):
        run(scn)


def test_run_poses_are_orthogonal_and_orientation_preserving(scenario_dir):
    scn = load_scenario(scenario_dir / "box_room.yaml")
    records, _ = run(scn)
    for r in records[1:]:
        a = r.est_pose.A
        assert np.max(np.abs(a.T @ a - np.eye(3))) <= 1e-8
        assert np.linalg.det(a) == pytest.approx(1.0, abs=1e-8)


def test_frozen_frame_composes_back_to_world_truth(scenario_dir):
    scn = load_scenario(scenario_dir / "box_room.yaml")
    records, metrics = run(scn)
    bootstrap = scn.path[metrics.bootstrap_step_index]
    for r in records:
        if r.status != "success":
            continue
        world = scn.path[r.step_index]
        assert np.allclose(bootstrap.A @ r.est_pose.v + bootstrap.v, world.v, atol=1e-6)
        assert np.allclose(bootstrap.A @ r.est_pose.A, world.A, atol=1e-6)


def test_first_pose_deficient_bootstraps_later():
    patch = Wall(
        Hyperplane([0, 0, 1], 0.0),
        boundary=[[1, 2, 0], [2, 2, 0], [2, 3, 0], [1, 3, 0]],
    )
    walls = (Wall(Hyperplane([1, 0, 0], 0.0)), Wall(Hyperplane([0, 1, 0], 0.0)), patch)
    scn = Scenario(
        walls=walls,
        speaker=[1.5, 2.5, 1.0],
        mic_local=tetra_mics(0.5),
        path=(
            Pose([4.5, 0.8, 1.2], np.eye(3)),  # reflection ray misses the patch
            Pose([1.5, 2.5, 0.9], np.eye(3)),  # directly above the patch
            Pose([1.4, 2.6, 1.1], np.eye(3)),
        ),
        occlusion_enabled=True,
    )
    records, metrics = run(scn)
    assert [r.status for r in records] == ["fail", "bootstrap", "success"]
    assert metrics.bootstrap_step_index == 1
    assert metrics.fail_count == 1


def test_export_csv_header_only_for_empty(tmp_path):
    from echopath import Metrics

    out = tmp_path / "empty.csv"
    export([], Metrics(None, None, None, 0, None), out, "csv")
    lines = out.read_text().splitlines()
    assert lines == ["step,status,vx,vy,vz,yaw,pitch,roll,pos_err,ori_err,n_known,n_new"]


def test_export_csv_rows_and_determinism(scenario_dir, tmp_path):
    scn = load_scenario(scenario_dir / "box_room.yaml")
    records, metrics = run(scn)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    export(records, metrics, out1, "csv")
    records2, metrics2 = run(scn)
    export(records2, metrics2, out2, "csv")
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert len(lines) == 11
    assert lines[1].startswith("0,bootstrap,")
    row3 = lines[4].split(",")
    assert row3[0] == "3" and row3[1] == "success"
    assert len(row3) == 12


def test_export_json_round_trip(scenario_dir, tmp_path):
    scn = load_scenario(scenario_dir / "box_room.yaml")
    records, metrics = run(scn)
    out = tmp_path / "run.json"
    export(records, metrics, out, "json")
    doc = json.loads(out.read_text())
    assert len(doc["records"]) == 10
    assert doc["metrics"]["fail_count"] == 0
    # serializing the parsed document again reproduces the file exactly
    again = tmp_path / "run2.json"
    again.write_text(json.dumps(doc, indent=2) + "\n")
    assert again.read_bytes() == out.read_bytes()


def test_export_rejects_unknown_format(tmp_path):
    from echopath import Metrics

    with pytest.raises(ValueError):
        export([], Metrics(None, None, None, 0, None), tmp_path / "x", "xml")


def test_cli_run_writes_output(scenario_dir, tmp_path, capsys):
    out = tmp_path / "records.csv"
    code = main(["run", str(scenario_dir / "box_room.yaml"), "--out", str(out)])
    assert code == 0
    captured = capsys.readouterr().out
    assert "bootstrap" in captured
    assert "position_rmse" in captured
    assert out.exists()


def test_cli_run_noise_override(scenario_dir, capsys):
    code = main(["run", str(scenario_dir / "box_room.yaml"), "--noise", "0.0005", "--seed", "3"])
    assert code == 0
    captured = capsys.readouterr().out
    assert "fail_count" in captured


def test_cli_genericity_midline_fails_naming_h(scenario_dir, capsys):
    code = main(["genericity", str(scenario_dir / "rect_room_2d.yaml"), "--speaker", "8,5"])
    assert code == 0
    captured = capsys.readouterr().out
    assert "failed" in captured
    assert "h[" in captured


def test_cli_genericity_generic_point_passes(scenario_dir, capsys):
    code = main(["genericity", str(scenario_dir / "rect_room_2d.yaml"), "--speaker", "6.3,7.1"])
    assert code == 0
    assert "passed" in capsys.readouterr().out


def test_cli_counterexample_equilateral(capsys):
    code = main(["counterexample", "--k", "3"])
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if "|w" in l]
    dists = [float(l.split("=")[1]) for l in lines]
    assert len(dists) == 3
    assert max(dists) - min(dists) < 1e-9


def test_cli_counterexample_rejects_small_k(capsys):
    code = main(["counterexample", "--k", "2"])
    assert code == 1


def test_cli_ambiguity_onboard(scenario_dir, capsys):
    code = main(["ambiguity", str(scenario_dir / "box_room_onboard.yaml"), "--pose-a", "0", "--pose-b", "1"])
    assert code == 0
    out = capsys.readouterr().out
    diff = float(out.strip().splitlines()[-1].split(":")[1].split()[0])
    assert diff <= 1e-9


def test_cli_unknown_flag_rejected(scenario_dir, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", str(scenario_dir / "box_room.yaml"), "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_cli_load_error_exit_code(tmp_path, capsys):
    code = main(["run", str(tmp_path / "missing.yaml")])
    assert code == 1
    assert "error" in capsys.readouterr().err
