"""Convert the amino-acid fluorescence data (``amino.mat``) to the dense text format.

The MATLAB file holds ``X`` either as a 5 x 201 x 61 array or unfolded to
5 x 12261 together with ``DimX``; both layouts are handled. Needs scipy.

    python scripts/convert_amino.py amino.mat data/amino.txt
"""
import argparse

import numpy as np
from scipy.io import loadmat

from segrecg.tensor_io import write_tensor


def load_amino(path) -> np.ndarray:
    mat = loadmat(path)
    X = np.asarray(mat["X"], dtype=float)
    if X.ndim == 2:
        dims = [int(d) for d in np.ravel(mat["DimX"])]
        # MATLAB unfolding X(i, j + (k-1) n2) is column-major in (j, k)
        X = X.reshape(dims, order="F")
    if X.shape == (5, 61, 201):
        X = X.transpose(0, 2, 1)
    return np.ascontiguousarray(X)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("mat")
    parser.add_argument("output")
    args = parser.parse_args()
    X = load_amino(args.mat)
    if not np.isfinite(X).all():
        raise SystemExit("data contains missing values; the mask pipeline needs a complete tensor")
    write_tensor(args.output, X)
    print(f"wrote {X.shape} tensor to {args.output}")


if __name__ == "__main__":
    main()
