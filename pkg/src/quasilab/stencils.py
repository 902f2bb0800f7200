"""Finite-difference weights and sparse derivative operators on uniform grids."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def fd_weights(x0, nodes, deriv):
    """Weights w with sum_k w_k f(nodes_k) ~ f^(deriv)(x0) (Fornberg recursion)."""
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    c = np.zeros((n, deriv + 1))
    c1, c4 = 1.0, nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, deriv)
        c2, c5, c4 = 1.0, c4, nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, deriv]


def staggered_first_derivative(num_intervals, spacing, order=4):
    """Sparse (N, N+1) matrix mapping nodal values to derivatives at cell midpoints.

    Interior rows use the centred ``order``-point stencil; rows near either end
    use the same number of points shifted inwards.
    """
    if order % 2 or order < 2:
        raise ValueError("order must be a positive even integer")
    n_nodes = num_intervals + 1
    if n_nodes < order:
        raise ValueError("grid too small for the requested order")
    rows, cols, vals = [], [], []
    half = order // 2
    cache = {}
    for k in range(num_intervals):
        start = min(max(k - half + 1, 0), n_nodes - order)
        offset = start - k
        if offset not in cache:
            cache[offset] = fd_weights(0.5, np.arange(order) + offset, 1) / spacing
        w = cache[offset]
        rows.extend([k] * order)
        cols.extend(range(start, start + order))
        vals.extend(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(num_intervals, n_nodes))


def nodal_derivative(num_intervals, spacing, order=6, deriv=1):
    """Sparse (N+1, N+1) matrix for a nodal derivative, shifted near the ends."""
    n_nodes = num_intervals + 1
    width = order + deriv if deriv > 1 else order + 1
    width += (width + 1) % 2
    width = min(width, n_nodes)
    half = width // 2
    rows, cols, vals = [], [], []
    cache = {}
    for k in range(n_nodes):
        start = min(max(k - half, 0), n_nodes - width)
        offset = start - k
        if offset not in cache:
            cache[offset] = fd_weights(0.0, np.arange(width) + offset, deriv) / spacing**deriv
        rows.extend([k] * width)
        cols.extend(range(start, start + width))
        vals.extend(cache[offset])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))
