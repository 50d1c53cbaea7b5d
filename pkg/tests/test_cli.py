import json
import os

import numpy as np
import pytest
from PIL import Image

from posterkit import codec
from posterkit.cli import format_metric_table, load_config_file, main

from conftest import write_fixture_dataset


def run(argv):
    return main(argv)


@pytest.fixture
def dataset(tmp_path):
    manifest = write_fixture_dataset(tmp_path / "data", n_records=5)
    return manifest


class TestIngest:
    def test_generic(self, tmp_path, dataset):
        out = tmp_path / "manifest.jsonl"
        code = run(
            ["ingest", "--input", str(dataset), "--adapter", "generic-jsonl", "--output", str(out)]
        )
        assert code == 0
        assert out.is_file()
        assert len(out.read_text().splitlines()) == 5

    def test_bad_file_exits_one(self, tmp_path, capsys):
        code = run(
            [
                "ingest",
                "--input",
                str(tmp_path / "ghost.jsonl"),
                "--adapter",
                "generic-jsonl",
                "--output",
                str(tmp_path / "out.jsonl"),
            ]
        )
        assert code == 1
        assert "ingest failed" in capsys.readouterr().err

    def test_row_level_report(self, tmp_path, capsys):
        bad = tmp_path / "rows.jsonl"
        bad.write_text(
            json.dumps({"id": "ok", "canvas": [10, 10], "elements": []}) + "\n{broken\n"
        )
        out = tmp_path / "out.jsonl"
        code = run(
            ["ingest", "--input", str(bad), "--adapter", "generic-jsonl", "--output", str(out)]
        )
        assert code == 0
        captured = capsys.readouterr()
        assert "line 2" in captured.err
        assert "1 rows skipped" in captured.out


class TestStats:
    def test_table_output(self, tmp_path, capsys):
        rows = [
            {"id": "a", "canvas": [10, 10], "elements": [{"label": "text", "box": [0, 0, 1, 1]}] * 3},
            {"id": "b", "canvas": [10, 10], "elements": [{"label": "text", "box": [0, 0, 1, 1]}] * 5},
        ]
        path = tmp_path / "m.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows))
        assert run(["stats", "--manifest", str(path)]) == 0
        out = capsys.readouterr().out
        assert "Boxes/img" in out
        assert "4.00" in out

    def test_missing_manifest(self, tmp_path):
        assert run(["stats", "--manifest", str(tmp_path / "none.jsonl")]) == 1


class TestSplit:
    def test_deterministic(self, tmp_path, dataset):
        out1, out2 = tmp_path / "s1.jsonl", tmp_path / "s2.jsonl"
        for out in (out1, out2):
            code = run(
                [
                    "split",
                    "--manifest",
                    str(dataset),
                    "--ratio",
                    "0.9",
                    "--seed",
                    "7",
                    "--output",
                    str(out),
                ]
            )
            assert code == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestPrompt:
    def test_constraint_text_verbatim(self, tmp_path, dataset):
        constraints_dir = tmp_path / "constraints"
        constraints_dir.mkdir()
        (constraints_dir / "fix0.txt").write_text("PLACE logo AT top\n")
        run_dir = tmp_path / "run"
        code = run(
            [
                "prompt",
                "--manifest",
                str(dataset),
                "--run-dir",
                str(run_dir),
                "--constraints-dir",
                str(constraints_dir),
            ]
        )
        assert code == 0
        text = (run_dir / "prompts" / "fix0.txt").read_text()
        assert "PLACE logo AT top" in text
        text1 = (run_dir / "prompts" / "fix1.txt").read_text()
        assert "defined as: None," in text1


class TestGenerate:
    def test_mock_run(self, tmp_path, dataset, capsys):
        run_dir = tmp_path / "run"
        code = run(
            ["generate", "--manifest", str(dataset), "--run-dir", str(run_dir), "--backend", "mock"]
        )
        assert code == 0
        predictions = sorted((run_dir / "predictions").glob("fix*.json"))
        assert len([p for p in predictions if not p.name.endswith(".repair.json")]) == 5
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["success_rate"] == 1.0
        assert summary["mean_attempts"] == 1.0
        assert (run_dir / "config.json").is_file()
        assert "success rate 1.00" in capsys.readouterr().out

    def test_reproducible_outputs(self, tmp_path, dataset):
        dirs = [tmp_path / "run1", tmp_path / "run2"]
        for run_dir in dirs:
            assert (
                run(
                    [
                        "generate",
                        "--manifest",
                        str(dataset),
                        "--run-dir",
                        str(run_dir),
                        "--backend",
                        "mock",
                    ]
                )
                == 0
            )
        for name in [p.name for p in (dirs[0] / "predictions").iterdir()]:
            assert (dirs[0] / "predictions" / name).read_bytes() == (
                dirs[1] / "predictions" / name
            ).read_bytes()

    def test_unreachable_remote_exits_two(self, tmp_path, dataset):
        run_dir = tmp_path / "run"
        code = run(
            [
                "generate",
                "--manifest",
                str(dataset),
                "--run-dir",
                str(run_dir),
                "--backend",
                "remote",
                "--endpoint",
                "http://127.0.0.1:9/v1/chat/completions",
                "--timeout",
                "0.2",
                "--retries",
                "0",
            ]
        )
        assert code == 2
        errors = list((run_dir / "predictions").glob("*.error.json"))
        assert len(errors) == 5

    def test_jobs_parallel_same_outputs(self, tmp_path, dataset):
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        run(["generate", "--manifest", str(dataset), "--run-dir", str(serial)])
        run(["generate", "--manifest", str(dataset), "--run-dir", str(parallel), "--jobs", "4"])
        for name in [p.name for p in (serial / "predictions").iterdir()]:
            assert (serial / "predictions" / name).read_bytes() == (
                parallel / "predictions" / name
            ).read_bytes()


class TestEval:
    def _generate(self, tmp_path, dataset):
        run_dir = tmp_path / "run"
        assert run(["generate", "--manifest", str(dataset), "--run-dir", str(run_dir)]) == 0
        return run_dir

    def test_geometry_only_mock(self, tmp_path, dataset, capsys):
        run_dir = self._generate(tmp_path, dataset)
        code = run(
            [
                "eval",
                "--manifest",
                str(dataset),
                "--predictions",
                str(run_dir / "predictions"),
                "--run-dir",
                str(run_dir),
                "--metrics",
                "geometry",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Val" in out and "1.0000" in out
        assert "Ove" in out and "0.0000" in out
        report_lines = (run_dir / "reports" / "metrics.jsonl").read_text().splitlines()
        assert len(report_lines) == 5

    def test_gt_as_predictions_gives_identity_iou(self, tmp_path, dataset):
        from posterkit.cli import _derive_vocabulary, _load_manifest

        run_dir = tmp_path / "run"
        predictions = run_dir / "predictions"
        predictions.mkdir(parents=True)
        for line in dataset.read_text().splitlines():
            row = json.loads(line)
            body = json.dumps({"layout": row["elements"]})
            (predictions / f"{row['id']}.json").write_text(body)
        code = run(
            [
                "eval",
                "--manifest",
                str(dataset),
                "--predictions",
                str(predictions),
                "--run-dir",
                str(run_dir),
                "--metrics",
                "similarity",
            ]
        )
        assert code == 0
        summary = json.loads((run_dir / "reports" / "summary.json").read_text())
        assert summary["means"]["IoU"] == pytest.approx(1.0)

    def test_vio_zero_on_synthesized_gt(self, tmp_path, dataset, capsys):
        constraints_dir = tmp_path / "constraints"
        assert (
            run(
                [
                    "constraints-synth",
                    "--manifest",
                    str(dataset),
                    "--output-dir",
                    str(constraints_dir),
                    "--seed",
                    "11",
                ]
            )
            == 0
        )
        run_dir = tmp_path / "run"
        predictions = run_dir / "predictions"
        predictions.mkdir(parents=True)
        for line in dataset.read_text().splitlines():
            row = json.loads(line)
            (predictions / f"{row['id']}.json").write_text(
                json.dumps({"layout": row["elements"]})
            )
        code = run(
            [
                "eval",
                "--manifest",
                str(dataset),
                "--predictions",
                str(predictions),
                "--run-dir",
                str(run_dir),
                "--metrics",
                "vio",
                "--constraints-dir",
                str(constraints_dir),
            ]
        )
        assert code == 0
        summary = json.loads((run_dir / "reports" / "summary.json").read_text())
        assert summary["means"]["Vio"] == 0.0

    def test_content_metrics_from_fixtures(self, tmp_path, dataset):
        run_dir = self._generate(tmp_path, dataset)
        code = run(
            [
                "eval",
                "--manifest",
                str(dataset),
                "--predictions",
                str(run_dir / "predictions"),
                "--run-dir",
                str(run_dir),
                "--metrics",
                "geometry,content",
            ]
        )
        assert code == 0
        summary = json.loads((run_dir / "reports" / "summary.json").read_text())
        assert {"Occ", "Uti", "Rea"} <= set(summary["means"])

    def test_missing_predictions_dir(self, tmp_path, dataset):
        assert (
            run(
                [
                    "eval",
                    "--manifest",
                    str(dataset),
                    "--predictions",
                    str(tmp_path / "nope"),
                    "--run-dir",
                    str(tmp_path / "run"),
                ]
            )
            == 1
        )


class TestRender:
    def test_gt_render_and_reproducibility(self, tmp_path, dataset):
        run_dir = tmp_path / "run"
        code = run(["render", "--manifest", str(dataset), "--run-dir", str(run_dir)])
        assert code == 0
        renders = sorted((run_dir / "renders").glob("*.png"))
        assert len(renders) == 5
        first_bytes = renders[0].read_bytes()
        assert run(["render", "--manifest", str(dataset), "--run-dir", str(run_dir)]) == 0
        assert renders[0].read_bytes() == first_bytes

    def test_empty_layout_png_equals_background(self, tmp_path):
        background = tmp_path / "bg.png"
        Image.new("RGB", (40, 30), (7, 99, 200)).save(background)
        row = {
            "id": "only",
            "canvas": [40, 30],
            "background": str(background),
            "elements": [],
        }
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps(row))
        run_dir = tmp_path / "run"
        assert run(["render", "--manifest", str(manifest), "--run-dir", str(run_dir)]) == 0
        with Image.open(run_dir / "renders" / "only.png") as rendered:
            out = np.asarray(rendered.convert("RGB"))
        with Image.open(background) as bg_img:
            assert np.array_equal(out, np.asarray(bg_img))

    def test_transplant_identity(self, tmp_path, dataset):
        run_dir = tmp_path / "run"
        predictions = run_dir / "predictions"
        predictions.mkdir(parents=True)
        for line in dataset.read_text().splitlines():
            row = json.loads(line)
            (predictions / f"{row['id']}.json").write_text(
                json.dumps({"layout": row["elements"]})
            )
        code = run(
            [
                "render",
                "--manifest",
                str(dataset),
                "--run-dir",
                str(run_dir),
                "--predictions",
                str(predictions),
                "--transplant",
            ]
        )
        assert code == 0
        row = json.loads(dataset.read_text().splitlines()[0])
        with Image.open(run_dir / "renders" / f"{row['id']}.png") as out_img:
            out = np.asarray(out_img.convert("RGB"))
        with Image.open(row["background"]) as bg_img:
            assert np.array_equal(out, np.asarray(bg_img.convert("RGB")))

    def test_style_file_red_fill_pixel_count(self, tmp_path):
        row = {
            "id": "red",
            "canvas": [100, 100],
            "elements": [{"label": "text", "box": [0.25, 0.25, 0.75, 0.75]}],
        }
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps(row))
        style = tmp_path / "style.json"
        style.write_text(
            json.dumps({"styles": {"text": {"fill": [255, 0, 0, 255], "border": False}}})
        )
        run_dir = tmp_path / "run"
        code = run(
            [
                "render",
                "--manifest",
                str(manifest),
                "--run-dir",
                str(run_dir),
                "--style",
                str(style),
            ]
        )
        assert code == 0
        with Image.open(run_dir / "renders" / "red.png") as img:
            arr = np.asarray(img)
        assert int(np.all(arr == (255, 0, 0, 255), axis=-1).sum()) == 2500

    def test_missing_asset_exit_one(self, tmp_path):
        row = {
            "id": "x",
            "canvas": [40, 30],
            "background": str(tmp_path / "ghost.png"),
            "elements": [],
        }
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps(row))
        run_dir = tmp_path / "run"
        code = run(
            ["render", "--manifest", str(manifest), "--run-dir", str(run_dir), "--transplant"]
        )
        assert code == 1


class TestConstraintsCommands:
    def test_synth_then_check_gt(self, tmp_path, dataset, capsys):
        constraints_dir = tmp_path / "constraints"
        assert (
            run(
                [
                    "constraints-synth",
                    "--manifest",
                    str(dataset),
                    "--output-dir",
                    str(constraints_dir),
                ]
            )
            == 0
        )
        assert len(list(constraints_dir.glob("*.txt"))) == 5
        code = run(
            [
                "constraints-check",
                "--manifest",
                str(dataset),
                "--constraints-dir",
                str(constraints_dir),
                "--json",
                str(tmp_path / "vio.json"),
            ]
        )
        assert code == 0
        assert "Vio 0.0000" in capsys.readouterr().out
        doc = json.loads((tmp_path / "vio.json").read_text())
        assert doc["mean_vio"] == 0.0

    def test_synth_deterministic(self, tmp_path, dataset):
        dirs = [tmp_path / "c1", tmp_path / "c2"]
        for out_dir in dirs:
            run(
                [
                    "constraints-synth",
                    "--manifest",
                    str(dataset),
                    "--output-dir",
                    str(out_dir),
                    "--seed",
                    "5",
                ]
            )
        for name in [p.name for p in dirs[0].iterdir()]:
            assert (dirs[0] / name).read_text() == (dirs[1] / name).read_text()


class TestSettings:
    def test_config_file_parsing(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("backend = mock\nretries = 5  # retry budget\n\n# comment\n")
        parsed = load_config_file(config)
        assert parsed == {"backend": "mock", "retries": "5"}

    def test_precedence_env_over_file_flag_over_env(self, tmp_path, dataset, monkeypatch):
        config = tmp_path / "run.conf"
        config.write_text("retries = 9\n")
        monkeypatch.setenv("POSTERKIT_RETRIES", "4")
        run_dir = tmp_path / "run"
        assert (
            run(
                [
                    "generate",
                    "--manifest",
                    str(dataset),
                    "--run-dir",
                    str(run_dir),
                    "--config",
                    str(config),
                ]
            )
            == 0
        )
        written = json.loads((run_dir / "config.json").read_text())
        assert written["retries"] == 4  # env beats file
        run_dir2 = tmp_path / "run2"
        assert (
            run(
                [
                    "generate",
                    "--manifest",
                    str(dataset),
                    "--run-dir",
                    str(run_dir2),
                    "--config",
                    str(config),
                    "--retries",
                    "1",
                ]
            )
            == 0
        )
        assert json.loads((run_dir2 / "config.json").read_text())["retries"] == 1

    def test_format_metric_table(self):
        table = format_metric_table({"Val": 1.0, "Ove": 0.0})
        lines = table.splitlines()
        assert "Val" in lines[0] and "Ove" in lines[0]
        assert "1.0000" in lines[1] and "0.0000" in lines[1]

    def test_rerun_from_written_config_reproduces_outputs(self, tmp_path, dataset):
        first = tmp_path / "first"
        assert run(["generate", "--manifest", str(dataset), "--run-dir", str(first)]) == 0
        second = tmp_path / "second"
        assert (
            run(
                [
                    "generate",
                    "--manifest",
                    str(dataset),
                    "--run-dir",
                    str(second),
                    "--config",
                    str(first / "config.json"),
                ]
            )
            == 0
        )
        for name in [p.name for p in (first / "predictions").iterdir()]:
            assert (first / "predictions" / name).read_bytes() == (
                second / "predictions" / name
            ).read_bytes()
