"""Sparsemax returns exact zeros where softmax never does.

Run: python demos/sparsemax_vs_softmax.py
"""

import numpy as np

from sparsetopic.simplex import project_simplex_oracle, softmax, sparsemax


def main():
    z = np.array([1.6, 1.2, 0.3, -0.4, -2.0])
    p = sparsemax(z)
    print("scores    ", z)
    print("softmax   ", np.round(softmax(z), 4))
    print("sparsemax ", np.round(p.values, 4), "tau =", round(p.tau, 4), "support =", p.support.tolist())
    print("oracle    ", np.round(project_simplex_oracle(z), 4))

    # scaling the scores up makes sparsemax sparser
    for scale in (0.1, 0.5, 1.0, 2.0, 5.0):
        n = np.count_nonzero(sparsemax(scale * z).values)
        print(f"scale {scale:>4}: {n} of {z.size} coordinates active")


if __name__ == "__main__":
    main()
