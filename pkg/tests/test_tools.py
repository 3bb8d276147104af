import csv
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tools"))

import to_grayscale_csv  # noqa: E402


def test_export_colour_archive(tmp_path):
    npz = tmp_path / "set.npz"
    images = np.zeros((2, 1, 2, 3), dtype=np.uint8)
    images[0, 0, 0] = (255, 255, 255)
    images[1, 0, 1] = (100, 0, 0)
    np.savez(npz, train_images=images, train_labels=np.array([[3], [1]]))
    assert to_grayscale_csv.main(["--npz", str(npz), "--out-dir", str(tmp_path / "out"), "--splits", "train"]) == 0
    with (tmp_path / "out" / "train.csv").open(encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    assert rows == [["label", "p0", "p1"], ["3", "255", "0"], ["1", "0", "29"]]


def test_missing_split_exits_2(tmp_path, capsys):
    npz = tmp_path / "set.npz"
    np.savez(npz, x_train=np.zeros((1, 2, 2), dtype=np.uint8), y_train=np.zeros(1))
    with np.load(npz) as archive:
        assert to_grayscale_csv.pick(archive, "train")[0].shape == (1, 2, 2)
        with pytest.raises(SystemExit) as info:
            to_grayscale_csv.pick(archive, "test")
    assert info.value.code == 2
    assert "no test arrays" in capsys.readouterr().err
