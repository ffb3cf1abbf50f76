"""Local discontinuous trial functions from differential-quadrature weights.

Each subdomain carries one quadratic polynomial reconstructed from the nodal
values of its neighboring points: multiquadric radial basis interpolation,
augmented with the full quadratic monomial basis, is differentiated at the
subdomain's own Point and the resulting value/derivative weights define a
second-order Taylor polynomial.  Trial functions are therefore discontinuous
across subdomain boundaries while reproducing polynomials up to total degree
two exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, NearCoincidentPointsError, OutOfDomainError
from .geometry import point_in_polygon

DEFAULT_NEIGHBORS = 12
MIN_NEIGHBORS = 6  # quadratic reconstruction needs six independent samples


@dataclass(frozen=True)
class SupportSet:
    """Neighbor stencil of one subdomain's Point (center included)."""

    center_point: int
    neighbors: tuple
    radius: float


class DqWeights:
    """Weights mapping neighbor nodal values to value/derivatives anywhere
    inside one subdomain.

    The six base rows (value, d/dx, d/dy, d2/dx2, d2/dy2, d2/dxdy), taken at
    the subdomain's Point, define the local quadratic; evaluation at a query
    location shifts the Taylor expansion.
    """

    __slots__ = ("subdomain", "center", "neighbors", "rows")

    def __init__(self, subdomain, center, neighbors, rows):
        self.subdomain = subdomain
        self.center = np.asarray(center, dtype=float)
        self.neighbors = neighbors
        self.rows = rows  # (6, k): value, dx, dy, dxx, dyy, dxy at the center

    def value_rows(self, xy):
        """(m, k) value weights at query locations ``xy`` (m, 2)."""
        d = np.atleast_2d(xy) - self.center
        L = self.rows
        return (
            L[0]
            + np.outer(d[:, 0], L[1])
            + np.outer(d[:, 1], L[2])
            + 0.5 * np.outer(d[:, 0] ** 2, L[3])
            + 0.5 * np.outer(d[:, 1] ** 2, L[4])
            + np.outer(d[:, 0] * d[:, 1], L[5])
        )

    def grad_rows(self, xy):
        """Pair of (m, k) weight arrays for d/dx and d/dy at ``xy``."""
        d = np.atleast_2d(xy) - self.center
        L = self.rows
        gx = L[1] + np.outer(d[:, 0], L[3]) + np.outer(d[:, 1], L[5])
        gy = L[2] + np.outer(d[:, 1], L[4]) + np.outer(d[:, 0], L[5])
        return gx, gy

    def hess_rows(self):
        """Constant (3, k) second-derivative weights (xx, yy, xy)."""
        return self.rows[3:6]


def select_support(partition, point_id, k=DEFAULT_NEIGHBORS):
    """k nearest Points (Euclidean, ties to the lower id), center included."""
    n = partition.n_points
    if k > n:
        raise InvalidInputError(f"support of {k} requested but only {n} points exist")
    if k < MIN_NEIGHBORS:
        raise InvalidInputError(f"support needs at least {MIN_NEIGHBORS} points")
    tree = _tree(partition)
    # query a few extra so distance ties can be re-sorted deterministically
    kk = min(n, k + 4)
    dist, idx = tree.query(partition.points_xy[point_id], k=kk)
    dist = np.atleast_1d(dist)
    idx = np.atleast_1d(idx)
    order = np.lexsort((idx, dist))
    chosen = idx[order][:k]
    radius = float(dist[order][k - 1])
    if point_id not in chosen:
        chosen = np.concatenate([[point_id], chosen[: k - 1]])
    return SupportSet(point_id, tuple(int(i) for i in chosen), radius)


def _tree(partition):
    tree = getattr(partition, "_kdtree", None)
    if tree is None:
        tree = cKDTree(partition.points_xy)
        partition._kdtree = tree
    return tree


def build_dq_weights(partition, support, c0):
    """Multiquadric RBF-DQ weights for one subdomain.

    The basis sqrt(r^2 + (c0*h_loc)^2) with h_loc = radius/sqrt(k) is
    augmented by the six quadratic monomials; reproduction constraints make
    every polynomial of total degree <= 2 exact.
    """
    if not (0.0 < c0 <= math.sqrt(25.0) + 1e-12):
        raise InvalidInputError("c0 must lie in (0, sqrt(25)]")
    k = len(support.neighbors)
    center = partition.points_xy[support.center_point]
    pts = partition.points_xy[list(support.neighbors)]

    # work in support-radius units for conditioning
    scale = support.radius if support.radius > 0 else 1.0
    X = (pts - center) / scale
    h_loc = support.radius / math.sqrt(k)
    c = c0 * h_loc / scale

    dx = X[:, 0][:, None] - X[:, 0][None, :]
    dy = X[:, 1][:, None] - X[:, 1][None, :]
    r2 = dx * dx + dy * dy
    near = r2 + np.eye(k) < (1e-12) ** 2
    if near.any():
        i, j = np.argwhere(near)[0]
        raise NearCoincidentPointsError(
            f"points {support.neighbors[i]} and {support.neighbors[j]} nearly coincide",
            pair=(support.neighbors[i], support.neighbors[j]),
        )
    Phi = np.sqrt(r2 + c * c)

    # monomial block 1, x, y, x^2, xy, y^2 in scaled local coordinates
    P = np.column_stack(
        [
            np.ones(k),
            X[:, 0],
            X[:, 1],
            X[:, 0] ** 2,
            X[:, 0] * X[:, 1],
            X[:, 1] ** 2,
        ]
    )
    A = np.zeros((k + 6, k + 6))
    A[:k, :k] = Phi
    A[:k, k:] = P
    A[k:, :k] = P.T

    # derivative data of the basis at the center (local origin)
    d0 = -X  # x_center - x_j in scaled coords
    s = np.sqrt(d0[:, 0] ** 2 + d0[:, 1] ** 2 + c * c)
    B = np.zeros((k + 6, 6))
    B[:k, 0] = s
    B[:k, 1] = d0[:, 0] / s
    B[:k, 2] = d0[:, 1] / s
    B[:k, 3] = (d0[:, 1] ** 2 + c * c) / s**3
    B[:k, 4] = (d0[:, 0] ** 2 + c * c) / s**3
    B[:k, 5] = -d0[:, 0] * d0[:, 1] / s**3
    B[k + 0, 0] = 1.0  # value of the constant monomial
    B[k + 1, 1] = 1.0
    B[k + 2, 2] = 1.0
    B[k + 3, 3] = 2.0
    B[k + 5, 4] = 2.0
    B[k + 4, 5] = 1.0

    try:
        W = np.linalg.solve(A, B)
        # one step of iterative refinement; the augmented system is mildly
        # ill-conditioned for large c0
        W += np.linalg.solve(A, B - A @ W)
    except np.linalg.LinAlgError:
        raise NearCoincidentPointsError(
            "singular interpolation matrix (coincident or collinear support)",
            pair=None,
        )

    rows = W[:k].T.copy()
    # undo coordinate scaling: first derivatives 1/scale, second 1/scale^2
    rows[1:3] /= scale
    rows[3:6] /= scale**2
    return DqWeights(support.center_point, center, support.neighbors, rows)


def build_all_weights(partition, k=DEFAULT_NEIGHBORS, c0=math.sqrt(20.0)):
    """DqWeights for every subdomain (k clamped to the point count)."""
    k = min(k, partition.n_points)
    if k < MIN_NEIGHBORS:
        raise InvalidInputError(
            f"partition has {partition.n_points} points; {MIN_NEIGHBORS} needed"
        )
    return [
        build_dq_weights(partition, select_support(partition, s.point_id, k), c0)
        for s in partition.subdomains
    ]


def trial_value(weights, partition, nodal_values, query):
    """Value, gradient and hessian of the local trial function at ``query``.

    ``nodal_values`` holds one scalar per partition Point.  Raises
    OutOfDomainError when the query is outside the weights' subdomain.
    """
    poly = partition.subdomain_polygon(weights.subdomain)
    q = np.asarray(query, dtype=float)
    if not point_in_polygon(float(q[0]), float(q[1]), poly):
        raise OutOfDomainError(
            f"query {tuple(q)} outside subdomain {weights.subdomain}"
        )
    vals = np.asarray(nodal_values, dtype=float)[list(weights.neighbors)]
    v = float(weights.value_rows(q[None, :])[0] @ vals)
    gx, gy = weights.grad_rows(q[None, :])
    grad = np.array([float(gx[0] @ vals), float(gy[0] @ vals)])
    hxx, hyy, hxy = (float(r @ vals) for r in weights.hess_rows())
    hess = np.array([[hxx, hxy], [hxy, hyy]])
    return v, grad, hess
