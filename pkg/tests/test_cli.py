from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from nnid.cli import main
from nnid.image import load_matrix, read_image, write_image

from conftest import random_image


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_costmap_hist_crop_embed_chain(workdir):
    img = random_image(0, 96, 80)
    write_image("img.pgm", img)
    assert main(["costmap", "img.pgm", "-o", "img.cost"]) == 0
    costs = load_matrix("img.cost")
    assert costs.shape == (96, 80)

    assert main(["hist", "img.cost", "-o", "hist.json", "--bins", "32"]) == 0
    hist = json.loads(Path("hist.json").read_text())
    assert sum(hist["counts"]) == 96 * 80

    assert main(["crop", "img.cost", "--size", "32", "-o", "crop.json"]) == 0
    crop = json.loads(Path("crop.json").read_text())
    assert 0 <= crop["x"] <= 80 - 32 and 0 <= crop["y"] <= 96 - 32
    assert crop["evaluated"] == (96 - 32 + 1) * (80 - 32 + 1)

    assert main(["embed", "img.pgm", "img.cost", "--alpha", "0.4", "-o", "steg.pgm"]) == 0
    stego = read_image("steg.pgm")
    diff = stego.astype(int) - img.astype(int)
    assert set(np.unique(diff)).issubset({-1, 0, 1})
    assert (diff != 0).any()


def test_crop_recompute_final(workdir):
    img = random_image(1, 64, 64)
    write_image("img.pgm", img)
    assert main(["costmap", "img.pgm", "-o", "img.cost"]) == 0
    rc = main(
        [
            "crop", "img.cost", "--size", "24", "-o", "crop.json",
            "--image", "img.pgm", "--recompute-final",
        ]
    )
    assert rc == 0
    crop = json.loads(Path("crop.json").read_text())
    assert "distance_recomputed" in crop
    assert crop["distance_recomputed"] >= 0


def test_dconv_round_trip(workdir):
    from nnid.image import save_matrix

    rng = np.random.default_rng(2)
    z = rng.standard_normal((20, 20))
    k = rng.standard_normal((3, 3))
    save_matrix("z.bin", z)
    save_matrix("k.bin", k)
    assert main(["dconv", "--input", "z.bin", "--kernel", "k.bin", "--dilation", "2", "-o", "out.bin"]) == 0
    out = load_matrix("out.bin")
    assert out.shape == (20, 20)


def test_exit_codes(workdir):
    img = random_image(3, 32, 32)
    write_image("img.pgm", img)
    assert main(["costmap", "missing.pgm", "-o", "x"]) == 3
    assert main(["costmap", "img.pgm", "-o", "x.cost", "--sigma", "-1"]) == 2
    # detector that cannot reach the target -> convergence failure
    rc = main(
        ["calibrate", "--dim", "256", "--target", "0.99", "--detector",
         "synthetic:0.1", "-o", "cal.json"]
    )
    assert rc == 4


def test_calibrate_synthetic_cli(workdir):
    rc = main(
        ["calibrate", "--dim", "256", "--target", "0.76", "--tol", "0.002",
         "--detector", "synthetic", "-o", "cal.json"]
    )
    assert rc == 0
    result = json.loads(Path("cal.json").read_text())
    assert result["converged"] is True
    assert abs(result["alpha"] - 0.26) <= 0.002


def test_full_dataset_flow(workdir):
    assert main(["synth-corpus", "-o", "mothers", "--count", "3",
                 "--width", "200", "--height", "160"]) == 0
    assert main(["--seed", "3", "build-nnid", "mothers", "-o", "data",
                 "--sizes", "48", "64", "80"]) == 0
    for size in (48, 64, 80):
        assert Path(f"data/UNI_{size}/manifest.json").is_file()
    table = json.dumps({"48": 0.4, "64": 0.35, "80": 0.3})
    for size in (48, 64, 80):
        assert main(["--seed", "3", "embed-dataset", "--manifest",
                     f"data/UNI_{size}/manifest.json", "--alpha-table", table]) == 0
    assert main(["build-multi", "--manifests",
                 "data/UNI_48/manifest.json", "data/UNI_64/manifest.json",
                 "data/UNI_80/manifest.json", "--pairs-per-dim", "2",
                 "-o", "data/MULTI/manifest.json"]) == 0
    multi = json.loads(Path("data/MULTI/manifest.json").read_text())
    assert len(multi["entries"]) == 6
    # MULTI entries resolve relative to their own manifest
    from nnid.pipeline import DatasetManifest

    m = DatasetManifest.load("data/MULTI/manifest.json")
    for e in m.entries:
        assert m.resolve(e.cover_path).is_file()
        assert m.resolve(e.stego_path).is_file()
    assert main(["report", "--manifest", "data/UNI_64/manifest.json",
                 "-o", "report.json"]) == 0
    report = json.loads(Path("report.json").read_text())
    assert report["entries"] == 3


def test_build_nnid_with_splits(workdir):
    assert main(["synth-corpus", "-o", "mothers", "--count", "4",
                 "--width", "120", "--height", "120"]) == 0
    rc = main(["--seed", "1", "--scale", "0.00025", "build-nnid", "mothers",
               "-o", "data", "--sizes", "48", "--assemble-splits"])
    assert rc == 0
    from nnid.pipeline import DatasetManifest

    m = DatasetManifest.load("data/UNI_48/manifest.json")
    # scale 0.00025: 3 pairs train+val, 5 train images -> rounded counts
    assert len(m.entries) == len(m.splits["train"]) + len(m.splits["val"]) + len(m.splits["test"])
    m.validate_splits()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "nnid" in capsys.readouterr().out
