import json

import numpy as np
import pytest

from mkimpute.cli import main
from mkimpute.mri import load_kt
from mkimpute.sampling import load_mask_csv

TVGS_SPEC = {
    "problem": "tvgs",
    "data": {"source": "synthetic", "nodes": 14, "times": 16, "modes": 2,
             "knn": 3, "seed": 2},
    "sampling": {"kind": "p1", "ratios": [0.5]},
    "landmarks": {"strategy": "maxmin", "count": 5},
    "kernels": [{"kind": "gaussian", "sigma": "median"}],
    "dims": {"depth": 2, "inner": [2]},
    "solver": {"lambda1": 1e-3, "lambda2": 1e-3, "lambda_L": 0.02,
               "outer_iters": 5},
    "methods": ["mlkr", "zero-fill"],
}


def test_run_subcommand(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(TVGS_SPEC))
    out = tmp_path / "out"
    assert main(["run", str(spec_path), "--output", str(out)]) == 0
    assert (out / "results.csv").exists()
    assert "completed" in capsys.readouterr().out


def test_validate_subcommand(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(TVGS_SPEC))
    assert main(["validate", str(spec_path)]) == 0
    resolved = json.loads(capsys.readouterr().out)
    assert resolved["problem"] == "tvgs"
    assert resolved["repeats"] == 1


def test_validate_bad_spec_machine_readable_error(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"problem": "nope"}))
    assert main(["validate", str(spec_path)]) == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert payload["error"] == "InputError"
    assert "nope" in payload["message"]


def test_missing_file_error(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.json")]) == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "error" in payload


def test_phantom_subcommand(tmp_path, capsys):
    out = tmp_path / "p.kt"
    assert main(["phantom", "16x16x8", str(out)]) == 0
    ds = load_kt(out)
    assert ds.dims == (16, 16, 8)
    assert ds.ground_truth_image is not None


def test_phantom_bad_dims(tmp_path, capsys):
    assert main(["phantom", "16x16", str(tmp_path / "p.kt")]) == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "InputError"


@pytest.mark.parametrize("args,rows,cols", [
    (["mask", "p1", "OUT", "--rows", "10", "--cols", "8", "--ratio", "0.3"], 10, 8),
    (["mask", "p2", "OUT", "--rows", "6", "--cols", "10", "--ratio", "0.5"], 6, 10),
    (["mask", "cartesian", "OUT", "--i1", "16", "--i2", "8", "--frames", "3",
      "--accel", "4", "--band", "2"], 16 * 8, 3),
    (["mask", "radial", "OUT", "--i1", "16", "--i2", "16", "--frames", "2",
      "--accel", "8"], 16 * 16, 2),
])
def test_mask_subcommand(tmp_path, args, rows, cols):
    out = tmp_path / "mask.csv"
    argv = [a if a != "OUT" else str(out) for a in args]
    assert main(argv) == 0
    pattern = load_mask_csv(out)
    assert pattern.mask.shape == (rows, cols)
    assert pattern.observed_count > 0


def test_p1_mask_counts_via_cli(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["mask", "p1", str(out), "--rows", "10", "--cols", "5",
                 "--ratio", "0.3", "--seed", "4"]) == 0
    mask = load_mask_csv(out).mask
    assert np.all(mask.sum(axis=0) == 3)
