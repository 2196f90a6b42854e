#!/usr/bin/env python3
"""Convert the 10k MNIST digits bundled with the npm `mnist` package into IDX files.

Usage: make_mnist_subset.py <package/src/digits dir> <output dir> [--test-fraction 0.2]

Pixels in the package are k/255 rounded to three decimals, so round(v * 255)
recovers the original byte. Each class is split into a leading train part and a
trailing test part; both splits are then interleaved with a fixed permutation.
"""
import argparse
import json
import struct
from pathlib import Path

import numpy as np


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--test-fraction", type=float, default=0.2)
    args = ap.parse_args()

    train_x, train_y, test_x, test_y = [], [], [], []
    for d in range(10):
        data = json.load(open(Path(args.digits_dir) / f"{d}.json"))["data"]
        px = np.rint(np.asarray(data, dtype=np.float64) * 255.0).astype(np.int64)
        assert px.min() >= 0 and px.max() <= 255
        imgs = px.reshape(-1, 28, 28)
        n_test = int(round(len(imgs) * args.test_fraction))
        train_x.append(imgs[:-n_test]); train_y += [d] * (len(imgs) - n_test)
        test_x.append(imgs[-n_test:]); test_y += [d] * n_test

    rng = np.random.RandomState(0)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, xs, ys in (("train", train_x, train_y), ("t10k", test_x, test_y)):
        x = np.concatenate(xs)
        y = np.asarray(ys)
        perm = rng.permutation(len(y))
        write_idx_images(out / f"{name}-images-idx3-ubyte", x[perm])
        write_idx_labels(out / f"{name}-labels-idx1-ubyte", y[perm])
        print(name, len(y), np.bincount(y[perm]))


if __name__ == "__main__":
    main()
