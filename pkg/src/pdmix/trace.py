"""Per-iteration chain records and their columnar (CSV) serialization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ChainTrace:
    """Everything a Gibbs run records, one entry per sweep.

    ``rates`` holds the geometric-probability matrix for the GSB sampler and
    the concentration matrix for the DP sampler; ``rate_name`` says which.
    Density rows are recorded on ``grid`` every ``thin`` iterations after
    burn-in; ``density_iters`` maps each row back to its sweep.
    """

    sampler: str
    m: int
    iterations: int
    burn_in: int
    thin: int
    seed: int
    kernel: str
    p: np.ndarray
    rates: np.ndarray
    rate_name: str
    n_clusters: np.ndarray
    wall_nanos: np.ndarray
    comparisons: np.ndarray
    mean_slice_card: np.ndarray | None = None
    grid: np.ndarray | None = None
    density: np.ndarray | None = None
    density_iters: np.ndarray | None = None
    predictive_samples: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def kept(self) -> np.ndarray:
        """Indices of post-burn-in iterations."""
        return np.arange(self.burn_in, self.iterations)

    def to_csv(self, path, deterministic: bool = False):
        """Write one row per sweep; the header line documents column order.

        ``density_row`` is the row index into the density CSV, or -1 when no
        density was recorded at that sweep. ``deterministic`` zeroes the
        wall-clock column (the one timing field that cannot be reproduced
        byte-for-byte across runs).
        """
        header = ["iteration", "wall_nanos", "comparisons", "n_clusters", "density_row"]
        header += [f"p_{j}_{l}" for j in range(self.m) for l in range(self.m)]
        header += [f"{self.rate_name}_{j}_{l}" for j in range(self.m) for l in range(self.m)]
        if self.mean_slice_card is not None:
            header.append("mean_slice_cardinality")
        row_of = {}
        if self.density_iters is not None:
            row_of = {int(it): r for r, it in enumerate(self.density_iters)}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.iterations):
                row = [
                    t,
                    0 if deterministic else int(self.wall_nanos[t]),
                    int(self.comparisons[t]),
                    int(self.n_clusters[t]),
                    row_of.get(t, -1),
                ]
                row += [repr(float(v)) for v in self.p[t].ravel()]
                row += [repr(float(v)) for v in self.rates[t].ravel()]
                if self.mean_slice_card is not None:
                    row.append(repr(float(self.mean_slice_card[t])))
                writer.writerow(row)

    def density_to_csv(self, grid_path, density_path):
        """Write the evaluation grid and the recorded density rows."""
        if self.grid is None or self.density is None:
            raise ValueError("this trace recorded no density grid")
        with open(grid_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x"])
            for x in self.grid:
                writer.writerow([repr(float(x))])
        npts = self.grid.size
        with open(density_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "iteration", "group"] + [f"v{i}" for i in range(npts)])
            row = 0
            for r, it in enumerate(self.density_iters):
                for j in range(self.m):
                    writer.writerow(
                        [row, int(it), j] + [repr(float(v)) for v in self.density[r, j]]
                    )
                    row += 1


def occupied_cluster_count(m: int, d_list, delta_list) -> int:
    """Number of distinct (pair, atom) cells with at least one observation."""
    nonempty = [j for j in range(m) if len(d_list[j])]
    if not nonempty:
        return 0
    stride = int(max(d_list[j].max() for j in nonempty)) + 1
    codes = []
    for j in nonempty:
        lo = np.minimum(j, delta_list[j])
        hi = np.maximum(j, delta_list[j])
        codes.append((lo * m + hi) * stride + d_list[j])
    return int(np.unique(np.concatenate(codes)).size)
