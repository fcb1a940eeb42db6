import json
import math

import numpy as np
import pytest

from bevkit.cli import main
from bevkit.scene import dumps_canonical, records_to_dict
from bevkit.boxes import Box3D
from bevkit.metrics import DetectionRecord


def read_tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def write_records(path, records):
    path.write_text(dumps_canonical(records_to_dict(records)), encoding="utf-8")


@pytest.fixture
def eval_files(tmp_path):
    gts = [
        DetectionRecord(Box3D((10.0, 0.0, 0.75), (4.0, 2.0, 1.5), 0.0), "s0"),
        DetectionRecord(Box3D((20.0, 5.0, 0.75), (4.0, 2.0, 1.5), 0.0), "s0"),
    ]
    dets = [
        DetectionRecord(Box3D((10.2, 0.0, 0.75), (4.0, 2.0, 1.5), 0.0, score=0.9), "s0"),
        DetectionRecord(Box3D((20.0, 5.0, 0.75), (4.0, 2.0, 1.5), 0.0, score=0.8), "s0"),
    ]
    gt_path, pred_path = tmp_path / "gt.json", tmp_path / "pred.json"
    write_records(gt_path, gts)
    write_records(pred_path, dets)
    return gt_path, pred_path


class TestGenScene:
    def test_writes_scene_and_is_deterministic(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert main(["gen-scene", "--seed", "7", "--output-dir", str(out)]) == 0
        assert (out_a / "scene.json").read_bytes() == (out_b / "scene.json").read_bytes()

    def test_with_images(self, tmp_path):
        out = tmp_path / "s"
        assert main(["gen-scene", "--seed", "1", "--with-images", "--output-dir", str(out)]) == 0
        scene = json.loads((out / "scene.json").read_text())
        assert len(scene["image_paths"]) == 6
        for rel in scene["image_paths"]:
            assert (out / rel).exists()

    def test_bad_style_exits_2(self, tmp_path, capsys):
        code = main(["gen-scene", "--style", "spiral", "--output-dir", str(tmp_path)])
        assert code == 2
        assert "ring" in capsys.readouterr().err


class TestAugmentCommand:
    def run_augment(self, tmp_path, tag, workers):
        scene_dir = tmp_path / "scene"
        if not (scene_dir / "scene.json").exists():
            assert main(["gen-scene", "--seed", "3", "--with-images", "--output-dir", str(scene_dir)]) == 0
        out = tmp_path / tag
        code = main(
            [
                "augment",
                "--scene",
                str(scene_dir / "scene.json"),
                "--seed",
                "5",
                "--workers",
                str(workers),
                "--output-dir",
                str(out),
            ]
        )
        assert code == 0
        return read_tree(out)

    def test_outputs_and_determinism_across_workers(self, tmp_path):
        first = self.run_augment(tmp_path, "w1", 1)
        again = self.run_augment(tmp_path, "w1b", 1)
        threaded = self.run_augment(tmp_path, "w4", 4)
        assert set(str(k) for k in first) >= {"homographies.json", "poses.json"}
        assert list(first.values()) == list(again.values())
        assert list(first.values()) == list(threaded.values())

    def test_homography_file_shape(self, tmp_path):
        tree = self.run_augment(tmp_path, "w1", 1)
        data = json.loads(next(v for k, v in tree.items() if str(k) == "homographies.json"))
        assert len(data["homographies"]) == 6
        for entry in data["homographies"]:
            matrix = entry["matrix_row_major"]
            assert len(matrix) == 9
            assert abs(np.linalg.norm(matrix) - 1.0) < 1e-9

    def test_scene_without_images_exits_2(self, tmp_path, capsys):
        scene_dir = tmp_path / "noimg"
        assert main(["gen-scene", "--seed", "3", "--output-dir", str(scene_dir)]) == 0
        code = main(["augment", "--scene", str(scene_dir / "scene.json"), "--output-dir", str(tmp_path / "o")])
        assert code == 2
        assert "image_paths" in capsys.readouterr().err


class TestHomographyCommand:
    def test_report_written(self, tmp_path):
        scene_dir = tmp_path / "scene"
        assert main(["gen-scene", "--seed", "9", "--output-dir", str(scene_dir)]) == 0
        out = tmp_path / "h"
        code = main(
            ["homography", "--scene", str(scene_dir / "scene.json"), "--seed", "2", "--output-dir", str(out)]
        )
        assert code == 0
        data = json.loads((out / "homographies.json").read_text())
        assert len(data["cameras"]) == 6
        for entry in data["cameras"]:
            assert entry["fitted"]["provenance"] in ("fitted", "identity-fallback")
            assert len(entry["analytic_pure_rotation"]["matrix_row_major"]) == 9


class TestDepthConvert:
    def test_known_conversion(self, capsys):
        code = main(
            [
                "depth-convert",
                "--direction",
                "to-scale-invariant",
                "--fx",
                "1000",
                "--fy",
                "1000",
                "--f-ref",
                "500",
                "--values",
                "40",
            ]
        )
        assert code == 0
        data = json.loads(capsys.readouterr().out)
        assert data["converted"][0] == pytest.approx(20.0, rel=1e-12)

    def test_roundtrip_through_cli(self, capsys):
        assert (
            main(
                [
                    "depth-convert",
                    "--direction",
                    "to-metric",
                    "--fx",
                    "1000",
                    "--fy",
                    "1000",
                    "--f-ref",
                    "500",
                    "--values",
                    "20",
                ]
            )
            == 0
        )
        data = json.loads(capsys.readouterr().out)
        assert data["converted"][0] == pytest.approx(40.0, rel=1e-12)

    def test_out_of_range_exits_2(self, capsys):
        code = main(
            [
                "depth-convert",
                "--direction",
                "to-scale-invariant",
                "--fx",
                "1000",
                "--fy",
                "1000",
                "--dataset",
                "nuscenes",
                "--values",
                "1.0",
            ]
        )
        assert code == 2

    def test_explicit_reference_pixel_size(self, capsys):
        c = math.sqrt(2.0) / 500.0
        code = main(
            [
                "depth-convert",
                "--direction",
                "to-scale-invariant",
                "--fx",
                "1000",
                "--fy",
                "1000",
                "--c",
                repr(c),
                "--values",
                "40",
            ]
        )
        assert code == 0
        data = json.loads(capsys.readouterr().out)
        assert data["reference_pixel_size"] == c
        assert data["converted"][0] == pytest.approx(20.0, rel=1e-12)


class TestBinFocal:
    def test_labels(self, capsys):
        code = main(["bin-focal", "--alpha", "500", "--beta", "750", "--subintervals", "5", "--focals", "480", "720", "800"])
        assert code == 0
        data = json.loads(capsys.readouterr().out)
        assert data["labels"] == [0, 5, 6]
        assert data["num_categories"] == 7


class TestOrdinalLossCommand:
    def test_loss_and_gradient(self, tmp_path, capsys):
        logits_path = tmp_path / "logits.json"
        logits_path.write_text(json.dumps({"logits": [0.0, 0.0, 0.0, 0.0]}))
        code = main(["ordinal-loss", "--logits-json", str(logits_path), "--label", "0", "--grl-lambda", "1.0"])
        assert code == 0
        data = json.loads(capsys.readouterr().out)
        assert data["loss"] == pytest.approx(2.0 * math.log(2.0))
        assert data["reversed_gradient"] == [-g for g in data["gradient"]]

    def test_missing_logits_key_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"values": [1, 2]}))
        assert main(["ordinal-loss", "--logits-json", str(bad), "--label", "0"]) == 2


class TestEvaluateCommand:
    def test_report_and_table(self, tmp_path, eval_files, capsys):
        gt_path, pred_path = eval_files
        out = tmp_path / "report"
        code = main(["evaluate", "--gt", str(gt_path), "--pred", str(pred_path), "--output-dir", str(out)])
        assert code == 0
        table = capsys.readouterr().out
        assert "mAP" in table and "NDS*" in table
        report = json.loads((out / "metric_report.json").read_text())
        assert report["mAP"] == 1.0
        assert report["NDS_star"] > 0.9

    def test_deterministic_bytes_across_runs_and_workers(self, tmp_path, eval_files):
        gt_path, pred_path = eval_files
        blobs = []
        for tag, workers in (("r1", "1"), ("r2", "1"), ("r4", "4")):
            out = tmp_path / tag
            assert (
                main(
                    [
                        "evaluate",
                        "--gt",
                        str(gt_path),
                        "--pred",
                        str(pred_path),
                        "--workers",
                        workers,
                        "--output-dir",
                        str(out),
                    ]
                )
                == 0
            )
            blobs.append((out / "metric_report.json").read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]

    def test_malformed_json_exits_2(self, tmp_path, eval_files, capsys):
        gt_path, _ = eval_files
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        assert main(["evaluate", "--gt", str(gt_path), "--pred", str(broken), "--output-dir", str(tmp_path / "x")]) == 2

    def test_missing_file_exits_2(self, tmp_path, eval_files):
        gt_path, _ = eval_files
        assert main(["evaluate", "--gt", str(gt_path), "--pred", str(tmp_path / "nope.json"), "--output-dir", str(tmp_path / "y")]) == 2

    def test_all_ground_truth_out_of_range_exits_2(self, tmp_path, capsys):
        gts = [DetectionRecord(Box3D((120.0, 0.0, 0.75), (4.0, 2.0, 1.5), 0.0), "s0")]
        dets = [DetectionRecord(Box3D((10.0, 0.0, 0.75), (4.0, 2.0, 1.5), 0.0, score=0.9), "s0")]
        gt_path, pred_path = tmp_path / "far_gt.json", tmp_path / "near_pred.json"
        write_records(gt_path, gts)
        write_records(pred_path, dets)
        code = main(["evaluate", "--gt", str(gt_path), "--pred", str(pred_path), "--output-dir", str(tmp_path / "z")])
        assert code == 2
        assert "ground truths" in capsys.readouterr().err

    def test_run_config_controls_metrics(self, tmp_path, eval_files, capsys):
        gt_path, pred_path = eval_files
        config_path = tmp_path / "run.json"
        config_path.write_text(
            json.dumps(
                {
                    "seed": 1,
                    "metrics": {"distance_thresholds": [1.0, 2.0], "tp_threshold": 1.0, "range_limit": 60.0},
                }
            )
        )
        out = tmp_path / "cfg_report"
        code = main(
            ["evaluate", "--gt", str(gt_path), "--pred", str(pred_path), "--config", str(config_path), "--output-dir", str(out)]
        )
        assert code == 0
        report = json.loads((out / "metric_report.json").read_text())
        assert sorted(report["per_threshold_ap"]) == ["1.0", "2.0"]


class TestSelftestCommand:
    def test_passes_and_prints_per_check_lines(self, capsys):
        assert main(["selftest", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        lines = [line for line in out.splitlines() if line.startswith(("PASS", "FAIL"))]
        assert len(lines) >= 10
        assert all(line.startswith("PASS") for line in lines)

    def test_report_identical_across_runs(self, capsys):
        main(["selftest", "--seed", "0"])
        first = capsys.readouterr().out
        main(["selftest", "--seed", "0"])
        second = capsys.readouterr().out
        assert first == second
