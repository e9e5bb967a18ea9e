"""Plot a band CSV produced by `twistbands bands` or demos/03_dirac_cone.py.

Usage: python3 plot_bands.py bands_2_1.csv [out.png]

Kept out of the package on purpose: the library emits data files and leaves
rendering to whatever the user has at hand.
"""

import csv
import sys

import matplotlib.pyplot as plt
import numpy as np


def main(argv):
    path = argv[1] if len(argv) > 1 else "bands_2_1.csv"
    out = argv[2] if len(argv) > 2 else None
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(x) for x in row] for row in reader])
    n_bands = len(header) - 3
    ks = rows[:, 1:3]
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(ks, axis=0),
                                                          axis=1))])
    for j in range(n_bands):
        plt.plot(arc, rows[:, 3 + j], lw=1.0)
    plt.xlabel("arc length along k path")
    plt.ylabel("energy")
    plt.title(path)
    if out:
        plt.savefig(out, dpi=150, bbox_inches="tight")
        print("wrote", out)
    else:
        plt.show()


if __name__ == "__main__":
    main(sys.argv)
