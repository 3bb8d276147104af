#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
fetch_mnist.py

Download the MNIST / Fashion-MNIST IDX files into data/<dataset>/ with pinned digests.
The library never touches the network; this is repo tooling only.

Version: 0.1.0
"""
from __future__ import annotations

import argparse
import hashlib
import sys
import tempfile
from pathlib import Path
from typing import NoReturn

import requests

__version__ = "0.1.0"

MIRRORS = {
    "mnist": "https://ossci-datasets.s3.amazonaws.com/mnist",
    "fashion": "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com",
}

# MD5 digests as published with the torchvision dataset definitions
FILES = {
    "mnist": {
        "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
        "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
        "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
        "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
    },
    "fashion": {
        "train-images-idx3-ubyte.gz": "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
        "train-labels-idx1-ubyte.gz": "25c81989df183df01b3e8a0aad5dffbe",
        "t10k-images-idx3-ubyte.gz": "bef4ecab320f06d8554ea6380940ec79",
        "t10k-labels-idx1-ubyte.gz": "bb300cfdad3c16e7a12a480ee83cd310",
    },
}


def die(msg: str, code: int = 1) -> NoReturn:
    print(f"ERROR: {msg}", file=sys.stderr)
    raise SystemExit(code)


def repo_root_from_script() -> Path:
    return Path(__file__).resolve().parents[1]


def http_get(url: str, timeout: int = 300) -> bytes:
    r = requests.get(url, timeout=timeout)
    r.raise_for_status()
    return r.content


def md5_hex(data: bytes) -> str:
    return hashlib.md5(data).hexdigest()


def atomic_write_bytes(target: Path, data: bytes) -> None:
    target.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("wb", delete=False, dir=str(target.parent)) as tf:
        tf.write(data)
        tmp_name = tf.name
    Path(tmp_name).replace(target)


def main(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(add_help=True)
    ap.add_argument("--dataset", default="mnist", choices=sorted(FILES))
    ap.add_argument("--out-dir", default="", help="Target folder (default repo/data/<dataset>/)")
    ap.add_argument("--force", action="store_true", help="Re-download files that already verify")
    args = ap.parse_args(argv)

    out_dir = Path(args.out_dir).expanduser() if args.out_dir else repo_root_from_script() / "data" / args.dataset
    base = MIRRORS[args.dataset]

    failed = 0
    for fname, digest in FILES[args.dataset].items():
        target = out_dir / fname
        if target.is_file() and not args.force and md5_hex(target.read_bytes()) == digest:
            print(f"OK (cached): {target}")
            continue
        try:
            data = http_get(f"{base}/{fname}")
        except requests.RequestException as e:
            failed += 1
            print(f"SKIP (error): {fname} :: {e}")
            continue
        got = md5_hex(data)
        if got != digest:
            failed += 1
            print(f"SKIP (digest mismatch): {fname} :: got {got}, expected {digest}")
            continue
        atomic_write_bytes(target, data)
        print(f"Wrote: {target}")

    if failed:
        die(f"{failed} file(s) not fetched; existing files preserved", code=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
