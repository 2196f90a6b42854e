#!/usr/bin/env python3
"""Convert CIFAR-10 from the npm `tfjs-cifar10` package into the binary format.

Usage: make_cifar_subset.py <package dir> <output dir> [--train 5000] [--test 1000]

The package stores each split as a PNG whose row i is image i: 1024 pixels,
RGB interleaved, plus a JSON label list (one list for all five train batches).
The leading items of the first train batch and of the test batch are written
as 3073-byte records (label, then the R, G and B planes, row-major), the
layout of the original binary release.
"""
import argparse
import json
from pathlib import Path

import numpy as np
from PIL import Image


def load(png, labels):
    px = np.asarray(Image.open(png).convert("RGB"), dtype=np.uint8)  # (n, 1024, 3)
    # the train label list covers all five batches; batch 1 comes first
    y = np.asarray(json.load(open(labels)), dtype=np.uint8)[: px.shape[0]]
    assert px.shape[0] == len(y) and px.shape[1] == 1024
    return px, y


def write(path, px, y):
    planes = px.transpose(0, 2, 1).reshape(len(y), 3072)  # RRR..GGG..BBB..
    rec = np.concatenate([y[:, None], planes], axis=1)
    path.write_bytes(rec.astype(np.uint8).tobytes())
    print(path.name, len(y), np.bincount(y, minlength=10))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("package_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=5000)
    ap.add_argument("--test", type=int, default=1000)
    args = ap.parse_args()

    pkg = Path(args.package_dir)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_px, train_y = load(pkg / "data_batch_1.png", pkg / "train_lables.json")
    test_px, test_y = load(pkg / "test_batch.png", pkg / "test_lables.json")
    write(out / "data_batch_1.bin", train_px[: args.train], train_y[: args.train])
    write(out / "test_batch.bin", test_px[: args.test], test_y[: args.test])


if __name__ == "__main__":
    main()
