#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
to_grayscale_csv.py

Export an .npz image archive (e.g. a MedMNIST/CIFAR/SVHN download) to the
label,p0,...,p{H-1} CSV schema the loader reads.

- Arrays are looked up as <split>_images / <split>_labels (MedMNIST naming),
  falling back to x_<split> / y_<split>.
- Colour images (last axis 3) become integer luminance (299 R + 587 G + 114 B) // 1000.
- Images are flattened row-major.

Version: 0.1.0
"""
from __future__ import annotations

import argparse
import csv
import sys
import tempfile
from pathlib import Path
from typing import NoReturn

import numpy as np

__version__ = "0.1.0"

LUMA = np.array([299, 587, 114], dtype=np.uint32)


def die(msg: str, code: int = 1) -> NoReturn:
    print(f"ERROR: {msg}", file=sys.stderr)
    raise SystemExit(code)


def to_gray(images: np.ndarray) -> np.ndarray:
    imgs = np.asarray(images)
    if imgs.ndim == 4 and imgs.shape[-1] == 3:
        imgs = (imgs.astype(np.uint32) * LUMA).sum(axis=-1) // 1000
    elif imgs.ndim == 4 and imgs.shape[-1] == 1:
        imgs = imgs[..., 0]
    if imgs.ndim != 3:
        die(f"expected (n, rows, cols[, channels]) images, got shape {imgs.shape}", code=2)
    return imgs.reshape(imgs.shape[0], -1).astype(np.uint8)


def pick(archive: np.lib.npyio.NpzFile, split: str) -> tuple[np.ndarray, np.ndarray]:
    for xi, yi in ((f"{split}_images", f"{split}_labels"), (f"x_{split}", f"y_{split}")):
        if xi in archive.files and yi in archive.files:
            return archive[xi], archive[yi]
    die(f"no {split} arrays in archive (have: {', '.join(archive.files)})", code=2)


def write_split(target: Path, images: np.ndarray, labels: np.ndarray) -> None:
    gray = to_gray(images)
    labels = np.asarray(labels).reshape(-1)
    if labels.shape[0] != gray.shape[0]:
        die(f"{labels.shape[0]} labels for {gray.shape[0]} images", code=2)
    target.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", delete=False, encoding="utf-8", newline="", dir=str(target.parent)) as tf:
        w = csv.writer(tf)
        w.writerow(["label"] + [f"p{i}" for i in range(gray.shape[1])])
        for lab, row in zip(labels, gray):
            w.writerow([int(lab)] + row.tolist())
        tmp_name = tf.name
    Path(tmp_name).replace(target)
    print(f"Wrote: {target} (n={gray.shape[0]}, H={gray.shape[1]})")


def main(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(add_help=True)
    ap.add_argument("--npz", required=True, help="Input .npz archive")
    ap.add_argument("--out-dir", required=True, help="Folder for train.csv / test.csv")
    ap.add_argument("--splits", nargs="+", default=["train", "test"])
    args = ap.parse_args(argv)

    src = Path(args.npz)
    if not src.is_file():
        die(f"input not found: {src}", code=2)
    out_dir = Path(args.out_dir)
    with np.load(src) as archive:
        for split in args.splits:
            images, labels = pick(archive, split)
            write_split(out_dir / f"{split}.csv", images, labels)
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
