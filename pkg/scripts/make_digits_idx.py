"""Write scikit-learn's bundled 8x8 handwritten digits as MNIST-named IDX files.

Useful when the MNIST files are not at hand: ``qcgan train`` reads the output
directory exactly as it would read MNIST. Pixel levels 0..16 map to bytes via
``round(v * 255 / 16)``.

    python3 scripts/make_digits_idx.py data/digits
"""

import argparse
from pathlib import Path

import numpy as np

from qcgan.data import encode_idx_images, encode_idx_labels, write_idx


def write_digits_idx(directory) -> Path:
    from sklearn.datasets import load_digits

    digits = load_digits()
    images = np.rint(digits.images * 255.0 / 16.0).astype(np.uint8)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_idx(directory / "train-images-idx3-ubyte.gz", encode_idx_images(images))
    write_idx(directory / "train-labels-idx1-ubyte.gz", encode_idx_labels(digits.target))
    return directory


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir")
    args = parser.parse_args()
    print(write_digits_idx(args.out_dir))


if __name__ == "__main__":
    main()
