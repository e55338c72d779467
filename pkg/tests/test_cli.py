import csv
import json
import os
import shutil

import numpy as np
import pytest

from lima.cli import main
from lima.search import bidirectional_evaluation_estimate, naive_evaluation_count

from conftest import make_image
from lima.core import save_image_png

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
FIXTURE = os.path.join(DATA_DIR, "fixture_8x8.png")

GOLDEN_ARGS = ["attribute", "fixture_8x8.png", "--division", "grid:2x2",
               "--oracle", "builtin:planted", "--search", "naive",
               "--seed", "7", "--out", "result.json", "--saliency", "saliency.png"]


def run_golden(tmp_path, monkeypatch):
    os.makedirs(tmp_path, exist_ok=True)
    shutil.copy(FIXTURE, tmp_path / "fixture_8x8.png")
    monkeypatch.chdir(tmp_path)
    assert main(GOLDEN_ARGS) == 0
    return (tmp_path / "result.json").read_bytes(), (tmp_path / "saliency.png").read_bytes()


def test_attribute_golden_output(tmp_path, monkeypatch):
    result_bytes, png_bytes = run_golden(tmp_path, monkeypatch)
    golden = open(os.path.join(DATA_DIR, "golden_result.json"), "rb").read()
    assert result_bytes == golden
    golden_png = open(os.path.join(DATA_DIR, "golden_saliency.png"), "rb").read()
    assert png_bytes == golden_png


def test_attribute_reproducible(tmp_path, monkeypatch):
    a, _ = run_golden(tmp_path / "a", monkeypatch)
    b, _ = run_golden(tmp_path / "b", monkeypatch)
    assert a == b


def test_result_schema_fields(tmp_path, monkeypatch):
    result_bytes, _ = run_golden(tmp_path, monkeypatch)
    result = json.loads(result_bytes)
    assert result["schema_version"] == 1
    for key in ("image", "division", "order", "scores", "step_values",
                "metrics", "oracle_calls"):
        assert key in result
    assert result["division"]["method"] == "grid"
    assert sorted(result["order"]) == [0, 1, 2, 3]
    assert len(result["division"]["masks"]) == 4
    # search loop count for the naive full sort is exact
    assert result["search"]["evaluations"] == naive_evaluation_count(4)
    ins = result["metrics"]["insertion_curve"]
    assert ins["T"][0] == 0 and ins["T"][-1] == 64


def test_missing_image_exits_2_without_outputs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["attribute", "nope.png", "--out", "result.json"])
    assert rc == 2
    assert not (tmp_path / "result.json").exists()


def test_bidirectional_np8_count_via_cli(tmp_path, monkeypatch):
    img = make_image(49, 49, 1, seed=3)
    monkeypatch.chdir(tmp_path)
    save_image_png(img, "input.png")
    rc = main(["attribute", "input.png", "--division", "grid:7x7",
               "--oracle", "builtin:identity", "--search", "bi", "--np", "8",
               "--out", "result.json"])
    assert rc == 0
    result = json.loads((tmp_path / "result.json").read_text())
    count = result["search"]["evaluations"]
    assert abs(count - bidirectional_evaluation_estimate(49, 8)) <= 49


def test_eval_csv_rows_and_mean(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for i in range(3):
        save_image_png(make_image(8, 8, 1, seed=i), f"img{i}.png")
    rc = main(["attribute", "img0.png", "img1.png", "img2.png",
               "--division", "grid:2x2", "--oracle", "builtin:planted",
               "--search", "naive", "--seed", "1", "--out", "results"])
    assert rc == 0
    rc = main(["eval", "--results", "results",
               "--metrics", "insertion,deletion,ahc:0.5,mufidelity",
               "--csv", "out.csv"])
    assert rc == 0
    with open("out.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sample", "insertion", "deletion", "ahc:0.5", "mufidelity"]
    assert len(rows) == 5  # 3 samples + header + aggregate
    assert rows[4][0] == "mean"
    for col in range(1, 5):
        vals = [float(rows[r][col]) for r in (1, 2, 3)]
        assert float(rows[4][col]) == pytest.approx(np.mean(vals), abs=1e-12)


def test_eval_empty_dir_exits_2(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    os.makedirs("empty")
    assert main(["eval", "--results", "empty", "--metrics", "insertion"]) == 2
    assert main(["eval", "--results", "missing", "--metrics", "insertion"]) == 2


def test_render_matches_attribute_saliency(tmp_path, monkeypatch):
    _, png_bytes = run_golden(tmp_path, monkeypatch)
    rc = main(["render", "result.json", "--png", "rerender.png",
               "--map-json", "map.json"])
    assert rc == 0
    assert (tmp_path / "rerender.png").read_bytes() == png_bytes
    payload = json.loads((tmp_path / "map.json").read_text())
    assert payload["height"] == 8 and payload["width"] == 8
    assert len(payload["values"]) == 64
    result = json.loads((tmp_path / "result.json").read_text())
    assert max(payload["values"]) == max(result["scores"])


def test_divide_command(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    save_image_png(make_image(12, 12, 1, seed=2), "input.png")
    rc = main(["divide", "input.png", "--division", "grid:3x4", "--out", "div.json"])
    assert rc == 0
    payload = json.loads((tmp_path / "div.json").read_text())
    assert payload["method"] == "grid"
    assert len(payload["masks"]) == 12


def test_config_file_precedence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    save_image_png(make_image(8, 8, 1, seed=4), "input.png")
    (tmp_path / "cfg.json").write_text(json.dumps(
        {"search": "naive", "division": "grid:2x2", "oracle": "builtin:planted"}))
    # file value applies when the flag is absent
    rc = main(["--config", "cfg.json", "attribute", "input.png",
               "--out", "a.json"])
    assert rc == 0
    assert json.loads((tmp_path / "a.json").read_text())["search"]["algorithm"] == "naive"
    # CLI flag wins over the file
    rc = main(["--config", "cfg.json", "attribute", "input.png",
               "--search", "bi", "--np", "2", "--out", "b.json"])
    assert rc == 0
    assert json.loads((tmp_path / "b.json").read_text())["search"]["algorithm"] == "bidirectional"


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "lima" in capsys.readouterr().out
