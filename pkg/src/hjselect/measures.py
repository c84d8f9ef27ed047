"""Probability measures on the (x-node, velocity) lattice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class DiscreteMeasure:
    """Weights on grid-node x velocity pairs, stored densely as (n_nodes, n_velocities)."""

    grid: object
    velocities: np.ndarray  # (J, dim)
    weights: np.ndarray     # (N, J)

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def support(self, tol=0.0):
        """List of (x index, v index, weight) with weight > tol."""
        ii, jj = np.nonzero(self.weights > tol)
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(ii, jj)]

    def x_marginal(self):
        return self.weights.sum(axis=1)

    def integrate(self, table):
        """Sum of weights times a (N, J) table, ignoring entries with zero weight."""
        mask = self.weights > 0
        return float(np.sum(self.weights[mask] * np.asarray(table)[mask]))

    def mass_near(self, x, radius, v=None, v_radius=None):
        """Mass of lattice cells within ``radius`` of x (and of v, if given)."""
        pts = self.grid.points
        near_x = np.linalg.norm(pts - np.asarray(x, float).reshape(1, -1), axis=1) <= radius + 1e-12
        sel = np.zeros_like(self.weights, dtype=bool)
        sel[near_x] = True
        if v is not None:
            vd = np.linalg.norm(self.velocities - np.asarray(v, float).reshape(1, -1), axis=1)
            sel &= (vd <= (v_radius if v_radius is not None else 0.0) + 1e-12)[None, :]
        return float(self.weights[sel].sum())

    def rows(self):
        """(x..., v..., weight) rows of the support, for CSV export."""
        out = []
        for i, j, w in self.support():
            out.append([*self.grid.points[i].tolist(), *self.velocities[j].tolist(), w])
        return out

    @classmethod
    def dirac(cls, grid, velocities, i, j):
        w = np.zeros((grid.n, len(velocities)))
        w[i, j] = 1.0
        return cls(grid, np.asarray(velocities, float), w)
