"""Site geometry of the slab D_N^d = {1..N-1} x (Z/NZ)^{d-1}.

The first coordinate is walled (jumps leaving it are suppressed), the
remaining d-1 coordinates are periodic.  Sites are flattened site-major in
lexicographic coordinate order; this convention is shared by the simulator,
the generator-matrix oracle, and the snapshot format.
"""
from __future__ import annotations

import numpy as np


class Lattice:
    def __init__(self, N: int, d: int):
        if N < 2:
            raise ValueError("need N >= 2 so that S_N = {1..N-1} is non-empty")
        if d < 1:
            raise ValueError("d >= 1")
        self.N = N
        self.d = d
        shape = (N - 1,) + (N,) * (d - 1)
        self.shape = shape
        self.nsites = int(np.prod(shape))
        # coords[s] = (x_1, ..., x_d) with x_1 in 1..N-1
        idx = np.indices(shape).reshape(d, -1).T
        coords = idx.copy()
        coords[:, 0] += 1
        self.coords = coords
        self.coords.setflags(write=False)
        self._strides = np.array([int(np.prod(shape[j + 1:])) for j in range(d)], dtype=int)

    def site_index(self, x) -> int:
        """Flat index of coordinates x = (x_1, ..., x_d); transverse wrap applied."""
        x = np.asarray(x, dtype=int)
        if not (1 <= x[0] <= self.N - 1):
            raise ValueError(f"x_1={x[0]} outside S_N")
        rel = x.copy()
        rel[0] -= 1
        rel[1:] %= self.N
        return int(rel @ self._strides)

    def macro_coords(self) -> np.ndarray:
        """(nsites, d) float array of x/N."""
        return self.coords / self.N

    def neighbor_table(self) -> np.ndarray:
        """(nsites, 2d) flat neighbor indices for moves +e_1, -e_1, +e_2, ...;
        -1 where the move would leave S_N in the first coordinate."""
        return self.target_table_cache()[self._dirs_key()]

    # generic displacement targets ------------------------------------------------

    def targets(self, z) -> np.ndarray:
        """(nsites,) flat index of x+z per site, or -1 if x+z leaves the slab."""
        z = tuple(int(c) for c in z)
        key = (z,)
        cache = self.target_table_cache()
        if key not in cache:
            x1 = self.coords[:, 0] + z[0]
            ok = (x1 >= 1) & (x1 <= self.N - 1)
            rel = self.coords + np.asarray(z, dtype=int)
            rel[:, 0] -= 1
            rel[:, 1:] %= self.N
            flat = rel @ self._strides
            flat[~ok] = -1
            flat.setflags(write=False)
            cache[key] = flat
        return cache[key]

    def target_table_cache(self) -> dict:
        if not hasattr(self, "_tt_cache"):
            self._tt_cache = {}
        return self._tt_cache

    def _dirs_key(self):
        key = "nn"
        cache = self.target_table_cache()
        if key not in cache:
            cols = []
            for j in range(self.d):
                for s in (1, -1):
                    z = tuple(s if a == j else 0 for a in range(self.d))
                    cols.append(self.targets(z))
            tab = np.stack(cols, axis=1)
            tab.setflags(write=False)
            cache[key] = tab
        return key

    def unit_moves(self) -> list[tuple[int, ...]]:
        """Nearest-neighbor displacements in the order used by neighbor_table."""
        return [tuple(s if a == j else 0 for a in range(self.d))
                for j in range(self.d) for s in (1, -1)]

    def wall_mask(self, side: int) -> np.ndarray:
        """Boolean mask of sites with x_1 == side (side is 1 or N-1)."""
        return self.coords[:, 0] == side

    def transverse_coords(self, mask) -> np.ndarray:
        """(nwall, d-1) transverse integer coordinates of the masked sites."""
        return self.coords[mask][:, 1:]

    def __repr__(self):
        return f"Lattice(N={self.N}, d={self.d}, nsites={self.nsites})"
