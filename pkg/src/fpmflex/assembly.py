"""Global sparse assembly of the Galerkin weak form over polygonal subdomains.

Volume terms integrate the electric-enthalpy quadratic form per subdomain
(triangulated fan, Gauss quadrature); internal boundaries carry symmetric
interior-penalty jump terms plus consistency fluxes (average traction,
normal double-traction, normal electric displacement and its higher-order
analogue against the conjugate jumps); essential boundary conditions are
enforced with large penalties.  Electrical blocks enter the quadratic form
with negative sign, so the assembled matrix is the symmetric indefinite
saddle operator of the coupled problem.

Three unknowns per point (u1, u2, phi); one extra unknown per floating
electrode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import approximation as approx
from .errors import ConfigError, InvalidInputError
from .materials import maxwell_stress

# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------

# degree-4 symmetric triangle rule (6 points, barycentric, weights sum to 1)
_TRI_A = 0.445948490915965
_TRI_B = 0.091576213509771
_TRI_WA = 0.223381589678011
_TRI_WB = 0.109951743655322
_TRI4_BARY = np.array(
    [
        [_TRI_A, _TRI_A, 1 - 2 * _TRI_A],
        [_TRI_A, 1 - 2 * _TRI_A, _TRI_A],
        [1 - 2 * _TRI_A, _TRI_A, _TRI_A],
        [_TRI_B, _TRI_B, 1 - 2 * _TRI_B],
        [_TRI_B, 1 - 2 * _TRI_B, _TRI_B],
        [1 - 2 * _TRI_B, _TRI_B, _TRI_B],
    ]
)
_TRI4_W = np.array([_TRI_WA, _TRI_WA, _TRI_WA, _TRI_WB, _TRI_WB, _TRI_WB])

# degree-2 rule (3 midpoints)
_TRI2_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
_TRI2_W = np.array([1.0 / 3.0] * 3)


def triangle_rule(order):
    return (_TRI2_BARY, _TRI2_W) if order <= 2 else (_TRI4_BARY, _TRI4_W)


def segment_rule(order):
    n = 2 if order <= 2 else 4
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w  # mapped to [0, 1]


def polygon_quadrature(coords, order):
    """Quadrature points/weights on a convex polygon via a centroid fan."""
    bary, bw = triangle_rule(order)
    c = coords.mean(axis=0)
    pts = []
    wts = []
    n = len(coords)
    for i in range(n):
        tri = np.array([c, coords[i], coords[(i + 1) % n]])
        area = 0.5 * abs(
            (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
            - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1])
        )
        pts.append(bary @ tri)
        wts.append(bw * area)
    return np.vstack(pts), np.concatenate(wts)


# ---------------------------------------------------------------------------
# parameters and problem description
# ---------------------------------------------------------------------------


@dataclass
class SolverParams:
    """Computational parameters; eta values are absolute (already scaled by
    the moduli they multiply in the recommended-range table)."""

    c0: float = math.sqrt(20.0)
    eta11: float = 0.0  # essential displacement penalty (Pa)
    eta12: float = 0.0  # essential normal-derivative penalty (Pa)
    eta13: float = 0.0  # essential potential penalty (F/m)
    eta14: float = 0.0
    eta21: float = 0.0  # displacement continuity (Pa)
    eta22: float = 0.0  # displacement-gradient continuity (Pa)
    eta23: float = 0.0  # potential continuity (F/m)
    eta24: float = 0.0
    newton_tol: float = 1e-6
    newton_max_iter: int = 20
    quadrature_order: int = 4
    neighbors: int = approx.DEFAULT_NEIGHBORS
    use_maxwell: bool = True

    @classmethod
    def for_material(
        cls,
        material,
        c0=math.sqrt(20.0),
        eta11=1e10,
        eta12=1e10,
        eta13=1e10,
        eta14=1e10,
        eta21=2.0,
        eta22=50.0,
        eta23=0.0,
        eta24=0.0,
        **kw,
    ):
        """Build absolute penalties from the table's dimensionless multipliers."""
        E = material.youngs
        L = material.lambda_avg
        return cls(
            c0=c0,
            eta11=eta11 * E,
            eta12=eta12 * E,
            eta13=eta13 * L,
            eta14=eta14 * L,
            eta21=eta21 * E,
            eta22=eta22 * E,
            eta23=eta23 * L,
            eta24=eta24 * L,
            **kw,
        )

    def validate(self, material):
        E = material.youngs
        L = material.lambda_avg
        checks = [
            (1.0 - 1e-9 <= self.c0 <= math.sqrt(25.0) + 1e-9, "c0 outside [1, 5]"),
            (self.eta11 <= 0 or self.eta11 / E > 1e3, "eta11/E must exceed 1e3"),
            (self.eta13 <= 0 or self.eta13 / L > 1e3, "eta13/Lambda must exceed 1e3"),
            (0 <= self.eta21 / E <= 10 + 1e-9, "eta21/E outside [0, 10]"),
            (0 <= self.eta22 / E <= 100 + 1e-9, "eta22/E outside [0, 100]"),
            (0 <= self.eta23 / L <= 10 + 1e-9, "eta23/Lambda outside [0, 10]"),
            (0 <= self.eta24 / L <= 100 + 1e-9, "eta24/Lambda outside [0, 100]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


@dataclass
class ProblemSpec:
    """Everything assembly needs: partition, material, BCs, loads, params.

    Boundary-condition values may be floats or callables of (x, y).
    ``dirichlet_u`` maps tag -> (u1 or None, u2 or None); ``point_dirichlet``
    entries are ((x, y), component, value) with component 0, 1 or 2.
    ``point_loads`` entries are ((x, y), value, width): a 2-vector spreads as
    traction, a scalar as surface charge, uniformly over the boundary
    segments whose midpoint falls within width/2 of the location.
    """

    partition: object
    material: object
    params: SolverParams
    formulation: str = "primal"
    theory: str = "reduced"
    dirichlet_u: dict = field(default_factory=dict)
    dirichlet_phi: dict = field(default_factory=dict)
    dirichlet_dudn: dict = field(default_factory=dict)
    dirichlet_dphidn: dict = field(default_factory=dict)
    neumann_traction: dict = field(default_factory=dict)
    neumann_charge: dict = field(default_factory=dict)
    electrodes: tuple = ()
    point_dirichlet: tuple = ()
    point_loads: tuple = ()
    cracked_edges: frozenset = frozenset()
    permeable: bool = False

    def validate(self):
        if self.formulation not in ("primal", "mixed"):
            raise ConfigError(f"unknown formulation '{self.formulation}'")
        if self.theory not in ("reduced", "full"):
            raise ConfigError(f"unknown theory '{self.theory}'")
        tags = set(self.partition.boundary_tags())
        for name, bcs in (
            ("dirichlet_u", self.dirichlet_u),
            ("dirichlet_phi", self.dirichlet_phi),
            ("dirichlet_dudn", self.dirichlet_dudn),
            ("dirichlet_dphidn", self.dirichlet_dphidn),
            ("neumann_traction", self.neumann_traction),
            ("neumann_charge", self.neumann_charge),
        ):
            for tag in bcs:
                if tag not in tags:
                    raise ConfigError(f"{name} references unknown boundary tag '{tag}'")
        for tag in self.electrodes:
            if tag not in tags:
                raise ConfigError(f"electrode references unknown boundary tag '{tag}'")
            if tag in self.dirichlet_phi:
                raise ConfigError(f"tag '{tag}' is both electrode and dirichlet_phi")
        overlap = set(self.dirichlet_phi) & set(self.neumann_charge)
        if overlap:
            raise ConfigError(
                f"tags {sorted(overlap)} carry both potential and charge conditions"
            )
        n_int = len(self.partition.internal_boundaries)
        for eid in self.cracked_edges:
            if not (0 <= eid < n_int):
                raise InvalidInputError(f"cracked id {eid} is not an internal boundary")
        self.params.validate(self.material)


class GlobalSystem:
    """Assembled sparse operator K, load vector f and dof bookkeeping."""

    def __init__(self, K, f, npoints, electrode_index, assembler):
        self.K = K
        self.f = f
        self.npoints = npoints
        self.electrode_index = dict(electrode_index)
        self.assembler = assembler
        self.ndof = K.shape[0]

    @property
    def dof_map(self):
        """(N, 3) array: row i = dof indices (u1, u2, phi) of point i."""
        base = 3 * np.arange(self.npoints)[:, None]
        return base + np.arange(3)[None, :]


def _eval_bc(value, X):
    if callable(value):
        return np.array([value(float(x), float(y)) for x, y in X], dtype=float)
    return np.full(len(X), float(value))


# ---------------------------------------------------------------------------
# per-subdomain operator bundles
# ---------------------------------------------------------------------------


class _Ops:
    """Trial-function operators of one subdomain in its local dof layout.

    ``pts`` lists the points whose dofs the subdomain's fields touch
    (support for primal, extended union for mixed); matrices returned by the
    row builders are laid out over 3*len(pts) dofs.
    """

    __slots__ = ("sid", "weights", "pts", "k", "sup_pos", "gxl", "gyl")

    def __init__(self, sid, weights, pts, sup_pos, gxl=None, gyl=None):
        self.sid = sid
        self.weights = weights
        self.pts = pts
        self.k = len(weights.neighbors)
        self.sup_pos = sup_pos  # position of each support point inside pts
        self.gxl = gxl  # (k, m) nodal-gradient composition (mixed only)
        self.gyl = gyl

    @property
    def nloc(self):
        return 3 * len(self.pts)

    def dofs(self):
        base = 3 * np.asarray(self.pts, dtype=np.int64)
        return np.stack([base, base + 1, base + 2], axis=1).ravel()

    def _embed(self, rows):
        """(nq, k) support-row array -> (nq, len(pts)) in local point layout."""
        if len(self.pts) == self.k:
            return rows
        out = np.zeros((rows.shape[0], len(self.pts)))
        out[:, self.sup_pos] = rows
        return out

    def value_rows(self, X):
        return self._embed(self.weights.value_rows(X))

    def grad_rows(self, X):
        gx, gy = self.weights.grad_rows(X)
        return self._embed(gx), self._embed(gy)

    def B(self, X, nz):
        """(nq, nz, nloc) operator mapping local dofs to z = (eps, kappa, E[, V])."""
        nq = len(X)
        m = len(self.pts)
        B = np.zeros((nq, nz, 3 * m))
        if self.gxl is None:
            NX, NY = self.weights.grad_rows(X)
            Lxx, Lyy, Lxy = self.weights.hess_rows()
            one = np.ones((nq, 1))
            kxx = one * Lxx
            kyy = one * Lyy
            kxy = one * Lxy
            B[:, 0, 0::3] = NX
            B[:, 1, 1::3] = NY
            B[:, 2, 0::3] = NY
            B[:, 2, 1::3] = NX
            B[:, 3, 0::3] = kxx
            B[:, 4, 1::3] = kyy
            B[:, 5, 0::3] = kyy
            B[:, 6, 1::3] = kxx
            B[:, 7, 0::3] = 2.0 * kxy
            B[:, 8, 1::3] = 2.0 * kxy
            B[:, 9, 2::3] = -NX
            B[:, 10, 2::3] = -NY
            if nz > 11:
                B[:, 11, 2::3] = -kxx
                B[:, 12, 2::3] = -kxy
                B[:, 13, 2::3] = -kxy
                B[:, 14, 2::3] = -kyy
            return B
        # mixed: fields from smoothed nodal gradients composed once more
        N = self.weights.value_rows(X)
        NX, NY = self.weights.grad_rows(X)
        vx = N @ self.gxl  # (nq, m): d/dx of a nodal field, smoothed
        vy = N @ self.gyl
        dxx = NX @ self.gxl
        dyy = NY @ self.gyl
        dxy = 0.5 * (NX @ self.gyl + NY @ self.gxl)
        B[:, 0, 0::3] = vx
        B[:, 1, 1::3] = vy
        B[:, 2, 0::3] = vy
        B[:, 2, 1::3] = vx
        B[:, 3, 0::3] = dxx
        B[:, 4, 1::3] = dyy
        B[:, 5, 0::3] = dyy
        B[:, 6, 1::3] = dxx
        B[:, 7, 0::3] = 2.0 * dxy
        B[:, 8, 1::3] = 2.0 * dxy
        B[:, 9, 2::3] = -vx
        B[:, 10, 2::3] = -vy
        if nz > 11:
            B[:, 11, 2::3] = -dxx
            B[:, 12, 2::3] = -dxy
            B[:, 13, 2::3] = -dxy
            B[:, 14, 2::3] = -dyy
        return B


def _segments_cross(p, q, a, b):
    """True if segment p-q properly crosses segment a-b (shared endpoints of
    a-b excluded by prior shrinking)."""

    def orient(o, s, t):
        return (s[0] - o[0]) * (t[1] - o[1]) - (s[1] - o[1]) * (t[0] - o[0])

    d1 = orient(a, b, p)
    d2 = orient(a, b, q)
    d3 = orient(p, q, a)
    d4 = orient(p, q, b)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


class Assembler:
    """Builds K/f for a ProblemSpec and supports incremental crack updates."""

    def __init__(self, problem):
        problem.validate()
        self.problem = problem
        self.part = problem.partition
        self.params = problem.params
        self.material = problem.material
        self.theory = problem.theory
        self.nz = 15 if self.theory == "full" else 11
        self.M = problem.material.enthalpy_matrix(self.theory)[: self.nz, : self.nz]
        self.h = self.part.h
        self.cracked = set(problem.cracked_edges)
        self.permeable = problem.permeable
        self.npts = self.part.n_points
        self.electrode_index = {
            tag: 3 * self.npts + i for i, tag in enumerate(sorted(problem.electrodes))
        }
        self.ndof = 3 * self.npts + len(self.electrode_index)
        self._sx, self._sw = segment_rule(self.params.quadrature_order)
        self._ops = {}
        self._build_all_ops()

    # -- supports & weights -------------------------------------------------

    def _crack_segments(self):
        """Cracked edges as segments, shrunk at free tips so supports may
        wrap around a crack tip but never cross a crack flank."""
        verts = self.part.vertices
        count = {}
        for eid in self.cracked:
            e = self.part.internal_boundaries[eid]
            count[e.v1] = count.get(e.v1, 0) + 1
            count[e.v2] = count.get(e.v2, 0) + 1
        boundary_verts = set()
        for seg in self.part.external_boundaries:
            boundary_verts.add(seg.v1)
            boundary_verts.add(seg.v2)
        segs = []
        for eid in self.cracked:
            e = self.part.internal_boundaries[eid]
            a = verts[e.v1].astype(float).copy()
            b = verts[e.v2].astype(float).copy()
            d = b - a
            for v, end in ((e.v1, 0), (e.v2, 1)):
                if count[v] == 1 and v not in boundary_verts:
                    shift = 1e-6 * d
                    if end == 0:
                        a = a + shift
                    else:
                        b = b - shift
            segs.append((a, b))
        return segs

    def _filtered_support(self, pid, crack_segs):
        """k nearest points whose sightline to the center avoids crack flanks."""
        k = min(self.params.neighbors, self.npts)
        if not crack_segs:
            return approx.select_support(self.part, pid, k)
        center = self.part.points_xy[pid]
        tree = approx._tree(self.part)
        kk = min(self.npts, max(2 * k, k + 8))
        while True:
            dist, idx = tree.query(center, k=kk)
            dist = np.atleast_1d(dist)
            idx = np.atleast_1d(idx)
            order = np.lexsort((idx, dist))
            cand = idx[order]
            dists = dist[order]
            chosen = []
            radius = 0.0
            for c, dc in zip(cand, dists):
                p = self.part.points_xy[c]
                blocked = any(
                    _segments_cross(center, p, a, b) for a, b in crack_segs
                )
                if not blocked:
                    chosen.append(int(c))
                    radius = float(dc)
                    if len(chosen) == k:
                        break
            if len(chosen) >= max(approx.MIN_NEIGHBORS, min(k, len(cand))):
                break
            if len(chosen) >= approx.MIN_NEIGHBORS and kk >= self.npts:
                break
            if kk >= self.npts:
                # pocket fully enclosed by cracks: fall back to nearest
                for c, dc in zip(cand, dists):
                    if int(c) not in chosen:
                        chosen.append(int(c))
                        radius = max(radius, float(dc))
                    if len(chosen) == approx.MIN_NEIGHBORS:
                        break
                break
            kk = min(self.npts, 2 * kk)
        if pid not in chosen:
            chosen = [pid] + chosen[: len(chosen) - 1]
        return approx.SupportSet(pid, tuple(chosen), radius)

    def _make_ops(self, sid, supports, weights):
        sup = supports[sid]
        w = weights[sid]
        if self.problem.formulation == "primal":
            pts = list(sup.neighbors)
            return _Ops(sid, w, pts, np.arange(len(pts)))
        ext = sorted({q for p in sup.neighbors for q in supports[p].neighbors})
        pos = {p: i for i, p in enumerate(ext)}
        m = len(ext)
        k = len(sup.neighbors)
        gxl = np.zeros((k, m))
        gyl = np.zeros((k, m))
        for j, p in enumerate(sup.neighbors):
            wp = weights[p]
            cols = [pos[q] for q in wp.neighbors]
            gxl[j, cols] = wp.rows[1]
            gyl[j, cols] = wp.rows[2]
        sup_pos = np.array([pos[p] for p in sup.neighbors], dtype=np.int64)
        return _Ops(sid, w, ext, sup_pos, gxl, gyl)

    def _build_all_ops(self):
        crack_segs = self._crack_segments()
        self._supports = [
            self._filtered_support(i, crack_segs) for i in range(self.npts)
        ]
        self._weights = [
            approx.build_dq_weights(self.part, s, self.params.c0)
            for s in self._supports
        ]
        self._ops = {
            sid: self._make_ops(sid, self._supports, self._weights)
            for sid in range(self.npts)
        }

    def _rebuild_ops_for(self, sids):
        crack_segs = self._crack_segments()
        for sid in sids:
            self._supports[sid] = self._filtered_support(sid, crack_segs)
            self._weights[sid] = approx.build_dq_weights(
                self.part, self._supports[sid], self.params.c0
            )
        if self.problem.formulation == "primal":
            for sid in sids:
                self._ops[sid] = self._make_ops(sid, self._supports, self._weights)
        else:
            for sid in range(self.npts):
                self._ops[sid] = self._make_ops(sid, self._supports, self._weights)

    # -- elementary blocks ---------------------------------------------------

    def volume_block(self, sid):
        ops = self._ops[sid]
        coords = self.part.subdomain_polygon(sid)
        X, W = polygon_quadrature(coords, self.params.quadrature_order)
        B = ops.B(X, self.nz)
        MB = np.einsum("ab,qbj->qaj", self.M, B)
        K = np.einsum("qai,q,qaj->ij", B, W, MB)
        return ops.dofs(), K

    def _edge_geometry(self, e):
        a = self.part.vertices[e.v1]
        b = self.part.vertices[e.v2]
        X = a[None, :] + self._sx[:, None] * (b - a)[None, :]
        W = self._sw * e.length
        n = np.asarray(e.normal)
        return X, W, n

    def _union_layout(self, opsL, opsR):
        pts = sorted(set(opsL.pts) | set(opsR.pts))
        pos = {p: i for i, p in enumerate(pts)}
        mapL = np.array([pos[p] for p in opsL.pts], dtype=np.int64)
        mapR = np.array([pos[p] for p in opsR.pts], dtype=np.int64)
        base = 3 * np.asarray(pts, dtype=np.int64)
        dofs = np.stack([base, base + 1, base + 2], axis=1).ravel()
        return pos, mapL, mapR, dofs, len(pts)

    @staticmethod
    def _embed_pts(rows, mapping, m):
        out = np.zeros((rows.shape[0], m))
        out[:, mapping] = rows
        return out

    @staticmethod
    def _embed_B(B, mapping, m):
        out = np.zeros((B.shape[0], B.shape[1], 3 * m))
        idx = (3 * mapping[:, None] + np.arange(3)[None, :]).ravel()
        out[:, :, idx] = B.reshape(B.shape[0], B.shape[1], -1)
        return out

    def _edge_side_rows(self, ops, X, n, mapping, m):
        """Value, normal-derivative and constitutive rows in union layout."""
        Nv = self._embed_pts(ops.value_rows(X), mapping, m)
        gx, gy = ops.grad_rows(X)
        Gn = self._embed_pts(n[0] * gx + n[1] * gy, mapping, m)
        B = self._embed_B(ops.B(X, self.nz), mapping, m)
        return Nv, Gn, B

    def _flux_rows(self, B, n):
        """Traction, double-traction, D.n and Q.nn rows from a B stack."""
        MB = np.einsum("ab,qbj->qaj", self.M, B)
        sig = MB[:, 0:3, :]
        mu = MB[:, 3:9, :]
        t1 = n[0] * sig[:, 0, :] + n[1] * sig[:, 2, :]
        t2 = n[0] * sig[:, 2, :] + n[1] * sig[:, 1, :]
        m1 = n[0] ** 2 * mu[:, 0, :] + n[1] ** 2 * mu[:, 2, :] + 2 * n[0] * n[1] * mu[:, 4, :]
        m2 = n[0] ** 2 * mu[:, 3, :] + n[1] ** 2 * mu[:, 1, :] + 2 * n[0] * n[1] * mu[:, 5, :]
        D = -MB[:, 9:11, :]
        dn = n[0] * D[:, 0, :] + n[1] * D[:, 1, :]
        if self.nz > 11:
            Q = -MB[:, 11:15, :]
            qnn = (
                n[0] ** 2 * Q[:, 0, :]
                + n[0] * n[1] * (Q[:, 1, :] + Q[:, 2, :])
                + n[1] ** 2 * Q[:, 3, :]
            )
        else:
            qnn = None
        return t1, t2, m1, m2, dn, qnn

    @staticmethod
    def _wsym(A, Br, W):
        """sum_q W_q (A_q^T B_q + B_q^T A_q)."""
        AB = np.einsum("qi,q,qj->ij", A, W, Br)
        return AB + AB.T

    @staticmethod
    def _wgram(A, W):
        return np.einsum("qi,q,qj->ij", A, W, A)

    def edge_block(self, eid, cracked_override=None):
        """Full interior-penalty + flux contribution of one internal boundary.

        For a cracked boundary returns the permeable replacement block (or
        None when impermeable)."""
        e = self.part.internal_boundaries[eid]
        is_cracked = (eid in self.cracked) if cracked_override is None else cracked_override
        if is_cracked and not self.permeable:
            return None
        opsL = self._ops[e.left_subdomain]
        opsR = self._ops[e.right_subdomain]
        X, W, n = self._edge_geometry(e)
        pos, mapL, mapR, dofs, m = self._union_layout(opsL, opsR)
        NvL, GnL, BL = self._edge_side_rows(opsL, X, n, mapL, m)
        NvR, GnR, BR = self._edge_side_rows(opsR, X, n, mapR, m)

        nq = len(X)
        nloc = 3 * m
        jmp_v = NvL - NvR
        jmp_n = GnL - GnR
        Bavg = 0.5 * (BL + BR)
        t1, t2, m1, m2, dn, qnn = self._flux_rows(Bavg, n)

        def slot(rows, c):
            out = np.zeros((nq, nloc))
            out[:, c::3] = rows
            return out

        Ju1 = slot(jmp_v, 0)
        Ju2 = slot(jmp_v, 1)
        Jphi = slot(jmp_v, 2)
        Jn1 = slot(jmp_n, 0)
        Jn2 = slot(jmp_n, 1)
        Jpn = slot(jmp_n, 2)

        p = self.params
        K = np.zeros((nloc, nloc))
        if is_cracked:
            # permeable crack: potential continuity (strong penalty) + D flux
            K -= (p.eta13 / self.h) * self._wgram(Jphi, W)
            K -= self._wsym(dn, Jphi, W)
            return dofs, K
        if p.eta21:
            K += (p.eta21 / self.h) * (self._wgram(Ju1, W) + self._wgram(Ju2, W))
        if p.eta22:
            K += (p.eta22 * self.h) * (self._wgram(Jn1, W) + self._wgram(Jn2, W))
        if p.eta23:
            K -= (p.eta23 / self.h) * self._wgram(Jphi, W)
        if p.eta24:
            K -= (p.eta24 * self.h) * self._wgram(Jpn, W)
        K -= self._wsym(t1, Ju1, W) + self._wsym(t2, Ju2, W)
        K -= self._wsym(m1, Jn1, W) + self._wsym(m2, Jn2, W)
        K -= self._wsym(dn, Jphi, W)
        if qnn is not None:
            K -= self._wsym(qnn, Jpn, W)
        return dofs, K

    # -- external boundary & loads -------------------------------------------

    def boundary_blocks(self, segs=None, affected=None):
        """K and f contributions from essential penalties, Neumann loads,
        point constraints/loads and floating electrodes.

        ``segs`` restricts to the given external segments and ``affected``
        restricts point terms to owners in that set (both used by the
        incremental crack path).  Returns (block list, f) where each block
        is (dofs, Kblock)."""
        p = self.params
        blocks = []
        f = np.zeros(self.ndof)

        all_segs = self.part.external_boundaries
        use_segs = all_segs if segs is None else segs
        seg_by_tag = {}
        for seg in use_segs:
            seg_by_tag.setdefault(seg.tag, []).append(seg)

        def seg_rows(seg):
            ops = self._ops[seg.owner_subdomain]
            a = self.part.vertices[seg.v1]
            b = self.part.vertices[seg.v2]
            X = a[None, :] + self._sx[:, None] * (b - a)[None, :]
            W = self._sw * seg.length
            return ops, X, W

        prob = self.problem
        for tag, vals in prob.dirichlet_u.items():
            for seg in seg_by_tag.get(tag, []):
                ops, X, W = seg_rows(seg)
                Nv = ops.value_rows(X)
                dofs = ops.dofs()
                nloc = ops.nloc
                K = np.zeros((nloc, nloc))
                fl = np.zeros(nloc)
                for comp, val in enumerate(vals):
                    if val is None:
                        continue
                    rows = np.zeros((len(X), nloc))
                    rows[:, comp::3] = Nv
                    K += (p.eta11 / self.h) * self._wgram(rows, W)
                    g = _eval_bc(val, X)
                    fl += (p.eta11 / self.h) * (rows.T @ (W * g))
                blocks.append((dofs, K))
                f[dofs] += fl

        for tag, val in prob.dirichlet_phi.items():
            for seg in seg_by_tag.get(tag, []):
                ops, X, W = seg_rows(seg)
                Nv = ops.value_rows(X)
                nloc = ops.nloc
                rows = np.zeros((len(X), nloc))
                rows[:, 2::3] = Nv
                K = -(p.eta13 / self.h) * self._wgram(rows, W)
                g = _eval_bc(val, X)
                blocks.append((ops.dofs(), K))
                f[ops.dofs()] += -(p.eta13 / self.h) * (rows.T @ (W * g))

        for tag, vals in prob.dirichlet_dudn.items():
            for seg in seg_by_tag.get(tag, []):
                ops, X, W = seg_rows(seg)
                gx, gy = ops.grad_rows(X)
                n = seg.normal
                Gn = n[0] * gx + n[1] * gy
                nloc = ops.nloc
                K = np.zeros((nloc, nloc))
                fl = np.zeros(nloc)
                for comp, val in enumerate(vals):
                    if val is None:
                        continue
                    rows = np.zeros((len(X), nloc))
                    rows[:, comp::3] = Gn
                    K += (p.eta12 * self.h) * self._wgram(rows, W)
                    fl += (p.eta12 * self.h) * (rows.T @ (W * _eval_bc(val, X)))
                blocks.append((ops.dofs(), K))
                f[ops.dofs()] += fl

        for tag, val in prob.dirichlet_dphidn.items():
            for seg in seg_by_tag.get(tag, []):
                ops, X, W = seg_rows(seg)
                gx, gy = ops.grad_rows(X)
                n = seg.normal
                rows = np.zeros((len(X), ops.nloc))
                rows[:, 2::3] = n[0] * gx + n[1] * gy
                K = -(p.eta14 * self.h) * self._wgram(rows, W)
                blocks.append((ops.dofs(), K))
                f[ops.dofs()] += -(p.eta14 * self.h) * (rows.T @ (W * _eval_bc(val, X)))

        for tag, val in prob.neumann_traction.items():
            for seg in seg_by_tag.get(tag, []):
                ops, X, W = seg_rows(seg)
                Nv = ops.value_rows(X)
                if callable(val):
                    tr = np.array([val(float(x), float(y)) for x, y in X], dtype=float)
                else:
                    tr = np.tile(np.asarray(val, dtype=float), (len(X), 1))
                fl = np.zeros(ops.nloc)
                fl[0::3] = Nv.T @ (W * tr[:, 0])
                fl[1::3] = Nv.T @ (W * tr[:, 1])
                f[ops.dofs()] += fl

        for tag, val in prob.neumann_charge.items():
            for seg in seg_by_tag.get(tag, []):
                ops, X, W = seg_rows(seg)
                Nv = ops.value_rows(X)
                g = _eval_bc(val, X)
                fl = np.zeros(ops.nloc)
                fl[2::3] = Nv.T @ (W * g)
                f[ops.dofs()] += fl

        for tag in prob.electrodes:
            vd = self.electrode_index[tag]
            for seg in seg_by_tag.get(tag, []):
                ops, X, W = seg_rows(seg)
                Nv = ops.value_rows(X)
                nloc = ops.nloc
                rows = np.zeros((len(X), nloc))
                rows[:, 2::3] = Nv
                scale = p.eta13 / self.h
                Kpp = -scale * self._wgram(rows, W)
                kpv = scale * (rows.T @ W)  # phi-V coupling
                kvv = -scale * W.sum()
                dofs = np.concatenate([ops.dofs(), [vd]])
                K = np.zeros((nloc + 1, nloc + 1))
                K[:nloc, :nloc] = Kpp
                K[:nloc, nloc] = kpv
                K[nloc, :nloc] = kpv
                K[nloc, nloc] = kvv
                blocks.append((dofs, K))

        for (xy, comp, value) in prob.point_dirichlet:
            sid = self.part.containing_subdomain(float(xy[0]), float(xy[1]))
            if sid is None:
                raise ConfigError(f"point constraint at {tuple(xy)} lies outside the domain")
            if affected is not None and sid not in affected:
                continue
            ops = self._ops[sid]
            Nv = ops.value_rows(np.array([[float(xy[0]), float(xy[1])]]))
            rows = np.zeros((1, ops.nloc))
            rows[:, comp::3] = Nv
            scale = p.eta11 if comp < 2 else -p.eta13
            K = scale * (rows.T @ rows)
            blocks.append((ops.dofs(), K))
            f[ops.dofs()] += scale * rows[0] * float(value)

        keep_ids = None if segs is None else {s.id for s in segs}
        for (xy, value, width) in prob.point_loads:
            xy = np.asarray(xy, dtype=float)
            chosen = []
            for seg in all_segs:
                mid = 0.5 * (self.part.vertices[seg.v1] + self.part.vertices[seg.v2])
                if np.hypot(*(mid - xy)) <= width / 2:
                    chosen.append(seg)
            if not chosen:
                raise ConfigError(
                    f"no boundary segment within {width/2:g} of load at {tuple(xy)}"
                )
            total = sum(s.length for s in chosen)
            vec = np.atleast_1d(np.asarray(value, dtype=float))
            for seg in chosen:
                if keep_ids is not None and seg.id not in keep_ids:
                    continue
                ops, X, W = seg_rows(seg)
                Nv = ops.value_rows(X)
                fl = np.zeros(ops.nloc)
                if vec.size == 2:
                    fl[0::3] = Nv.T @ (W * (vec[0] / total))
                    fl[1::3] = Nv.T @ (W * (vec[1] / total))
                else:
                    fl[2::3] = Nv.T @ (W * (vec[0] / total))
                f[ops.dofs()] += fl

        return blocks, f

    # -- global assembly -------------------------------------------------------

    def _accumulate(self, block_iter, extra_blocks=()):
        """Sum dense blocks into one CSR, chunking the COO triplets."""
        ndof = self.ndof
        K = sp.csr_matrix((ndof, ndof))
        rows, cols, vals = [], [], []
        budget = 6_000_000
        count = 0

        def flush():
            nonlocal rows, cols, vals, count, K
            if not vals:
                return
            coo = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(ndof, ndof),
            )
            K = K + coo.tocsr()
            rows, cols, vals = [], [], []
            count = 0

        for item in block_iter:
            if item is None:
                continue
            dofs, Kb = item
            r = np.repeat(dofs, len(dofs))
            c = np.tile(dofs, len(dofs))
            rows.append(r)
            cols.append(c)
            vals.append(Kb.ravel())
            count += len(r)
            if count > budget:
                flush()
        for dofs, Kb in extra_blocks:
            r = np.repeat(dofs, len(dofs))
            c = np.tile(dofs, len(dofs))
            rows.append(r)
            cols.append(c)
            vals.append(Kb.ravel())
            count += len(r)
            if count > budget:
                flush()
        flush()
        return K

    def assemble(self):
        vol = (self.volume_block(s.id) for s in self.part.subdomains)
        edges = (self.edge_block(e.id) for e in self.part.internal_boundaries)
        bblocks, f = self.boundary_blocks()

        def all_blocks():
            yield from vol
            yield from edges

        K = self._accumulate(all_blocks(), bblocks)
        return GlobalSystem(K, f, self.npts, self.electrode_index, self)

    # -- incremental crack updates ---------------------------------------------

    def crack_update(self, system, new_edges):
        """Return a new GlobalSystem with ``new_edges`` additionally cracked.

        Removes the cracked edges' blocks and refreshes every block touching
        a subdomain whose crack-filtered support changed.
        """
        if self.problem.formulation != "primal":
            raise InvalidInputError("incremental crack updates require the primal formulation")
        new_edges = [e for e in new_edges if e not in self.cracked]
        if not new_edges:
            return system

        part = self.part
        # candidate points whose sightlines might newly cross the cracked edges
        radius = max(self._supports[i].radius for i in range(self.npts))
        cand = set()
        tree = approx._tree(part)
        for eid in new_edges:
            e = part.internal_boundaries[eid]
            mid = 0.5 * (part.vertices[e.v1] + part.vertices[e.v2])
            for i in tree.query_ball_point(mid, 2.2 * radius + e.length):
                cand.add(int(i))
        # tip status changes also affect sightlines near the former tip
        old_supports = {i: self._supports[i] for i in cand}

        minus_blocks = []
        # current blocks of the edges being cracked
        for eid in new_edges:
            blk = self.edge_block(eid)
            if blk is not None:
                minus_blocks.append(blk)

        # apply the crack, then recompute supports for candidates
        self.cracked.update(new_edges)
        self.problem.cracked_edges = frozenset(self.cracked)
        crack_segs = self._crack_segments()
        affected = []
        for i in sorted(cand):
            s_new = self._filtered_support(i, crack_segs)
            if s_new.neighbors != old_supports[i].neighbors:
                affected.append(i)

        touched_edges = set()
        touched_segs = []
        for e in part.internal_boundaries:
            if e.id in self.cracked and not self.permeable:
                continue
            if e.left_subdomain in affected or e.right_subdomain in affected:
                touched_edges.add(e.id)
        for seg in part.external_boundaries:
            if seg.owner_subdomain in affected:
                touched_segs.append(seg)

        # old contributions of everything that will be rebuilt
        affected_set = set(affected)
        for sid in affected:
            minus_blocks.append(self.volume_block(sid))
        for eid in sorted(touched_edges):
            if eid in new_edges:
                continue  # already removed above
            blk = self.edge_block(eid, cracked_override=(eid in self.cracked))
            if blk is not None:
                minus_blocks.append(blk)
        fb_minus, f_minus = self.boundary_blocks(segs=touched_segs, affected=affected_set)

        # rebuild and collect the new contributions
        self._rebuild_ops_for(affected)
        plus_blocks = []
        for sid in affected:
            plus_blocks.append(self.volume_block(sid))
        for eid in sorted(touched_edges):
            blk = self.edge_block(eid)
            if blk is not None:
                plus_blocks.append(blk)
        if self.permeable:
            for eid in new_edges:
                blk = self.edge_block(eid)
                if blk is not None:
                    plus_blocks.append(blk)
        fb_plus, f_plus = self.boundary_blocks(segs=touched_segs, affected=affected_set)

        dK_minus = self._accumulate(iter(minus_blocks), fb_minus)
        dK_plus = self._accumulate(iter(plus_blocks), fb_plus)
        K = system.K - dK_minus + dK_plus
        f = system.f - f_minus + f_plus
        self.problem._system_full = None
        return GlobalSystem(K, f, self.npts, self.electrode_index, self)

    # -- nonlinear (full-theory) pieces -----------------------------------------

    def _maxwell_terms(self, d, want_tangent):
        """Residual and tangent contributions of the electrostatic stress."""
        nz = self.nz
        R = np.zeros(self.ndof)
        rows, cols, vals = [], [], []
        for s in self.part.subdomains:
            ops = self._ops[s.id]
            coords = self.part.subdomain_polygon(s.id)
            X, W = polygon_quadrature(coords, self.params.quadrature_order)
            B = ops.B(X, nz)
            dofs = ops.dofs()
            z = np.einsum("qaj,j->qa", B, d[dofs])
            E = z[:, 9:11]
            MB = np.einsum("ab,qbj->qaj", self.M, B)
            Dval = -(np.einsum("qaj,j->qa", MB[:, 9:11, :], d[dofs]))
            ses = maxwell_stress(E, Dval)  # (nq, 3)
            Beps = B[:, 0:3, :]
            R[dofs] += np.einsum("qaj,q,qa->j", Beps, W, ses)
            if not want_tangent:
                continue
            # d(ses)/dE and d(ses)/dD
            dsE = np.zeros((len(X), 3, 2))
            dsD = np.zeros((len(X), 3, 2))
            dsE[:, 0, 0] = 0.5 * Dval[:, 0]
            dsE[:, 0, 1] = -0.5 * Dval[:, 1]
            dsE[:, 1, 0] = -0.5 * Dval[:, 0]
            dsE[:, 1, 1] = 0.5 * Dval[:, 1]
            dsE[:, 2, 0] = 0.5 * Dval[:, 1]
            dsE[:, 2, 1] = 0.5 * Dval[:, 0]
            dsD[:, 0, 0] = 0.5 * E[:, 0]
            dsD[:, 0, 1] = -0.5 * E[:, 1]
            dsD[:, 1, 0] = -0.5 * E[:, 0]
            dsD[:, 1, 1] = 0.5 * E[:, 1]
            dsD[:, 2, 0] = 0.5 * E[:, 1]
            dsD[:, 2, 1] = 0.5 * E[:, 0]
            Erows = B[:, 9:11, :]
            Drows = -MB[:, 9:11, :]
            dses = np.einsum("qae,qej->qaj", dsE, Erows) + np.einsum(
                "qae,qej->qaj", dsD, Drows
            )
            Kb = np.einsum("qai,q,qaj->ij", Beps, W, dses)
            rows.append(np.repeat(dofs, len(dofs)))
            cols.append(np.tile(dofs, len(dofs)))
            vals.append(Kb.ravel())
        if want_tangent and vals:
            T = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.ndof, self.ndof),
            ).tocsr()
        else:
            T = sp.csr_matrix((self.ndof, self.ndof))
        return R, T

    # -- per-edge diagnostics -----------------------------------------------------

    def edge_normal_stress(self, d, edge_ids):
        """Two-side averaged boundary-normal stress at each edge midpoint."""
        out = np.empty(len(edge_ids))
        use_mx = self.theory == "full" and self.params.use_maxwell
        for i, eid in enumerate(edge_ids):
            e = self.part.internal_boundaries[eid]
            a = self.part.vertices[e.v1]
            b = self.part.vertices[e.v2]
            mid = 0.5 * (a + b)[None, :]
            n = np.asarray(e.normal)
            snn = 0.0
            for sid in (e.left_subdomain, e.right_subdomain):
                ops = self._ops[sid]
                B = ops.B(mid, self.nz)
                z = np.einsum("qaj,j->qa", B, d[ops.dofs()])[0]
                sig = (self.M @ z)[0:3]
                if use_mx:
                    E = z[9:11]
                    Dv = -(self.M @ z)[9:11]
                    sig = sig + maxwell_stress(E, Dv)
                snn += 0.5 * (
                    sig[0] * n[0] ** 2 + sig[1] * n[1] ** 2 + 2 * sig[2] * n[0] * n[1]
                )
            out[i] = snn
        return out

    def edge_bond_energy(self, d, edge_ids):
        """Penalty + flux energy per unit length stored on each boundary.

        Electrical contributions are counted positively (bonding energy, not
        signed field energy); vanishes identically once an edge is cracked.
        """
        p = self.params
        out = np.empty(len(edge_ids))
        for i, eid in enumerate(edge_ids):
            if eid in self.cracked:
                out[i] = 0.0
                continue
            e = self.part.internal_boundaries[eid]
            opsL = self._ops[e.left_subdomain]
            opsR = self._ops[e.right_subdomain]
            X, W, n = self._edge_geometry(e)
            pos, mapL, mapR, dofs, m = self._union_layout(opsL, opsR)
            NvL, GnL, BL = self._edge_side_rows(opsL, X, n, mapL, m)
            NvR, GnR, BR = self._edge_side_rows(opsR, X, n, mapR, m)
            dl = d[dofs]
            du1 = (NvL - NvR) @ dl[0::3]
            du2 = (NvL - NvR) @ dl[1::3]
            dphi = (NvL - NvR) @ dl[2::3]
            dn1 = (GnL - GnR) @ dl[0::3]
            dn2 = (GnL - GnR) @ dl[1::3]
            dpn = (GnL - GnR) @ dl[2::3]
            t1, t2, m1, m2, dnr, qnn = self._flux_rows(0.5 * (BL + BR), n)
            tv1 = t1 @ dl
            tv2 = t2 @ dl
            mv1 = m1 @ dl
            mv2 = m2 @ dl
            dnv = dnr @ dl
            qv = qnn @ dl if qnn is not None else 0.0
            dens = (
                0.5 * (p.eta21 / self.h) * (du1**2 + du2**2)
                + 0.5 * (p.eta22 * self.h) * (dn1**2 + dn2**2)
                + 0.5 * (p.eta23 / self.h) * dphi**2
                + 0.5 * (p.eta24 * self.h) * dpn**2
                - tv1 * du1
                - tv2 * du2
                - mv1 * dn1
                - mv2 * dn2
                - dnv * dphi
                - (qv * dpn if qnn is not None else 0.0)
            )
            out[i] = float((W * dens).sum() / e.length)
        return out

    def edge_field_values(self, d, edge_ids):
        """(u1, u2, phi) at each edge midpoint from both sides: (m, 2, 3)."""
        out = np.empty((len(edge_ids), 2, 3))
        for i, eid in enumerate(edge_ids):
            e = self.part.internal_boundaries[eid]
            mid = 0.5 * (self.part.vertices[e.v1] + self.part.vertices[e.v2])[None, :]
            for side, sid in enumerate((e.left_subdomain, e.right_subdomain)):
                ops = self._ops[sid]
                Nv = ops.value_rows(mid)[0]
                dl = d[ops.dofs()]
                out[i, side, 0] = Nv @ dl[0::3]
                out[i, side, 1] = Nv @ dl[1::3]
                out[i, side, 2] = Nv @ dl[2::3]
        return out


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def _get_assembler(problem):
    asm = getattr(problem, "_assembler", None)
    if (
        asm is None
        or asm.cracked != set(problem.cracked_edges)
        or asm.permeable != problem.permeable
    ):
        asm = Assembler(problem)
        problem._assembler = asm
    return asm


def assemble(problem):
    """Assemble the linear system for the problem's formulation/theory."""
    return _get_assembler(problem).assemble()


def assemble_mixed(problem):
    """Assemble with the mixed (smoothed-gradient) field operators."""
    if problem.formulation != "mixed":
        raise ConfigError("assemble_mixed requires problem.formulation == 'mixed'")
    return _get_assembler(problem).assemble()


def residual_and_tangent_full(problem, state, system=None, want_tangent=True):
    """Residual and analytic tangent of the full (nonlinear) theory.

    residual = K_lin state - f + maxwell(state); the tangent adds the
    nonsymmetric linearization of the electrostatic stress.
    """
    if problem.theory != "full":
        raise ConfigError("full-theory residual requires problem.theory == 'full'")
    asm = _get_assembler(problem)
    if system is None:
        cached = getattr(problem, "_system_full", None)
        if cached is not None and cached.assembler is asm:
            system = cached
        else:
            system = asm.assemble()
            problem._system_full = system
    R = system.K @ state - system.f
    if asm.params.use_maxwell:
        Rm, Tm = asm._maxwell_terms(state, want_tangent)
        R = R + Rm
        T = (system.K + Tm).tocsc() if want_tangent else None
    else:
        T = system.K.tocsc() if want_tangent else None
    return (R, T) if want_tangent else (R, None)
