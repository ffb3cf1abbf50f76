"""Builtin benchmark problems with their published parameters baked in.

Each factory returns a fully populated ProblemSpec; the CLI maps benchmark
names onto these factories and the study helpers in :mod:`fpmflex.post`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import geometry as geo
from .assembly import ProblemSpec, SolverParams
from .errors import ConfigError
from .materials import cubic_symmetry_material, pzt5h_material, rotate_poling, SizeFactors

UM = 1e-6
NM = 1e-9


@dataclass(frozen=True)
class BenchmarkDef:
    name: str
    description: str
    kind: str  # field | convergence | theory-gap | layer | coupling | propagate
    default_resolution: int


def _plane_stress_equivalent(E, nu):
    """Parameters that make the plane-strain matrices behave as plane stress."""
    return E * (1 + 2 * nu) / (1 + nu) ** 2, nu / (1 + nu)


def patch_material():
    E_hat, nu_hat = _plane_stress_equivalent(100e9, 0.3)
    return cubic_symmetry_material(E_hat, nu_hat, Lam11=1e-9, Lam33=1e-9)


PATCH_E = 100e9
PATCH_NU = 0.3


def patch_partitions(n=None):
    """The three point distributions used by the patch tests."""
    rect = geo.Rectangle(0.0, 0.0, 1.0, 1.0)
    rect_b = geo.Rectangle(0.0, 0.0, 1.0, 1.0, points_on_boundary=True)
    uniform16 = geo.generate_structured(rect, 4, 4)
    boundary16 = geo.generate_structured(rect_b, 4, 4)
    random25 = geo.random_perturb(geo.generate_structured(rect, 5, 5), 0.3, seed=42)
    return [("boundary16", boundary16), ("uniform16", uniform16), ("random25", random25)]


def _patch_params(material):
    return SolverParams.for_material(
        material, c0=math.sqrt(20.0), eta21=2.0, eta22=0.0, eta23=0.0, eta24=0.0
    )


def patch_linear_exact():
    E, nu = PATCH_E, PATCH_NU
    q = E / (1 - nu)

    def u(X):
        X = np.atleast_2d(X)
        return np.column_stack([X[:, 0] - X[:, 1], X[:, 0] + X[:, 1]])

    def eps(X):
        X = np.atleast_2d(X)
        one = np.ones(len(X))
        return np.column_stack([one, one, 0 * one])

    return {"u": u, "eps": eps, "sigma_axial": q}


def patch_linear_cases():
    """(label, problem) for 3 distributions x 2 boundary-condition variants."""
    mat = patch_material()
    exact = patch_linear_exact()
    q = exact["sigma_axial"]
    cases = []
    for dist, part in patch_partitions():
        base = dict(
            partition=part,
            material=mat,
            params=_patch_params(mat),
            dirichlet_phi={t: 0.0 for t in part.boundary_tags()},
        )
        dir_all = {
            t: (lambda x, y: x - y, lambda x, y: x + y) for t in part.boundary_tags()
        }
        cases.append(
            (f"{dist}-dirichlet", ProblemSpec(dirichlet_u=dir_all, **base))
        )
        cases.append(
            (
                f"{dist}-traction",
                ProblemSpec(
                    dirichlet_u={
                        "left": (lambda x, y: x - y, None),
                        "bottom": (None, lambda x, y: x + y),
                    },
                    neumann_traction={"right": (q, 0.0), "top": (0.0, q)},
                    **base,
                ),
            )
        )
    return cases


def patch_quadratic_exact():
    E, nu = PATCH_E, PATCH_NU

    def u(X):
        X = np.atleast_2d(X)
        x, y = X[:, 0], X[:, 1]
        return np.column_stack([2 * x * y - x, -(x**2) - nu * y**2 + nu * y])

    def eps(X):
        X = np.atleast_2d(X)
        x, y = X[:, 0], X[:, 1]
        return np.column_stack([2 * y - 1, -nu * (2 * y - 1), 0 * x])

    return {"u": u, "eps": eps}


def patch_quadratic_cases():
    mat = patch_material()
    E = PATCH_E
    cases = []
    for dist, part in patch_partitions():
        prob = ProblemSpec(
            partition=part,
            material=mat,
            params=_patch_params(mat),
            dirichlet_u={"left": (0.0, None)},
            point_dirichlet=(((0.0, 0.0), 1, 0.0),),
            neumann_traction={"right": lambda x, y: (E * (2 * y - 1), 0.0)},
            dirichlet_phi={t: 0.0 for t in part.boundary_tags()},
        )
        cases.append((dist, prob))
    return cases


# ---------------------------------------------------------------------------
# hollow cylinder family
# ---------------------------------------------------------------------------

CYLINDER_GRIDS = {50: (5, 10), 200: (10, 20), 600: (20, 30), 800: (20, 40), 1800: (30, 60)}


def cylinder_material():
    return cubic_symmetry_material(
        139e9, 0.3, l=2 * UM, mu11=1e-6, mu12=1e-6, mu44=1e-6, Lam11=1e-9, Lam33=1e-9
    )


def cylinder_bcs():
    return dict(r_i=10 * UM, r_o=20 * UM, u_i=0.045 * UM, u_o=0.05 * UM, phi_i=0.0, phi_o=1.0)


def build_cylinder(resolution=600, formulation="primal", theory="reduced", scale=1.0):
    bc = cylinder_bcs()
    r_i = bc["r_i"] * scale
    r_o = bc["r_o"] * scale
    u_i = bc["u_i"] * scale
    u_o = bc["u_o"] * scale
    if resolution in CYLINDER_GRIDS:
        nr, nth = CYLINDER_GRIDS[resolution]
    else:
        nr = max(2, int(round(math.sqrt(resolution / 2))))
        nth = max(2, int(round(resolution / nr)))
    part = geo.generate_structured(geo.AnnulusQuadrant(r_i, r_o), nr, nth)
    mat = cylinder_material()
    params = SolverParams.for_material(
        mat, c0=math.sqrt(5.0), eta21=2.0, eta22=0.0, eta23=0.0, eta24=0.0
    )

    def radial(mag):
        return (
            lambda x, y: mag * x / math.hypot(x, y),
            lambda x, y: mag * y / math.hypot(x, y),
        )

    return ProblemSpec(
        partition=part,
        material=mat,
        params=params,
        formulation=formulation,
        theory=theory,
        dirichlet_u={
            "inner": radial(u_i),
            "outer": radial(u_o),
            "theta_min": (None, 0.0),
            "theta_max": (0.0, None),
        },
        dirichlet_phi={"inner": bc["phi_i"], "outer": bc["phi_o"]},
    )


def cylinder_reference(scale=1.0, n_nodes=2000):
    from .post import analytic_cylinder_reference

    bc = cylinder_bcs()
    return analytic_cylinder_reference(
        cylinder_material(),
        bc["r_i"] * scale,
        bc["r_o"] * scale,
        bc["u_i"] * scale,
        bc["u_o"] * scale,
        bc["phi_i"],
        bc["phi_o"],
        n_nodes=n_nodes,
    )


# ---------------------------------------------------------------------------
# block under concentrated load / voltage
# ---------------------------------------------------------------------------


def build_block(resolution=3200, load="force"):
    a, b = 20 * UM, 10 * UM
    nx = max(4, int(round(math.sqrt(resolution * 2))))
    ny = max(4, int(round(resolution / nx)))
    xs = geo.graded_coords(0.0, a, nx, a / 2, power=2.2)
    ys = geo.graded_coords(0.0, b, ny, b, power=1.8)
    part = geo.tensor_partition(xs, ys, domain=geo.Rectangle(0, 0, a, b))
    width = 200 * NM
    if load == "voltage":
        geo.retag_segments(
            part, lambda x, y, t: t == "top" and abs(x - a / 2) <= width / 2, "window"
        )
    mat = cylinder_material()
    params = SolverParams.for_material(
        mat, c0=math.sqrt(20.0), eta21=1.0, eta22=0.0, eta23=0.0, eta24=0.0
    )
    kw = dict(
        partition=part,
        material=mat,
        params=params,
        dirichlet_u={"bottom": (0.0, 0.0)},
        dirichlet_phi={"bottom": 0.0},
    )
    if load == "force":
        return ProblemSpec(point_loads=(((a / 2, b), (0.0, -100e-6), width),), **kw)
    kw["dirichlet_phi"] = {"bottom": 0.0, "window": 5.0}
    return ProblemSpec(**kw)


# ---------------------------------------------------------------------------
# cantilever beams (barium titanate)
# ---------------------------------------------------------------------------


def batio3_material():
    return cubic_symmetry_material(
        100e9,
        0.37,
        l=0.0,
        mu12=1e-6,
        mu11=0.0,
        mu44=0.0,
        Lam11=11e-9,
        Lam33=12.48e-9,
        e31=-4.4,
    )


def build_beam(resolution=306, circuit="open", h=0.12468 * UM):
    L = 10 * h
    if resolution == 306:
        nx, ny = 51, 6
    else:
        ny = max(3, int(round(math.sqrt(resolution / 8.5))))
        nx = max(4, int(round(resolution / ny)))
    part = geo.generate_structured(geo.Rectangle(0, 0, L, h), nx, ny)
    mat = batio3_material()
    params = SolverParams.for_material(
        mat, c0=math.sqrt(20.0), eta21=0.0, eta22=0.0, eta23=0.0, eta24=0.0
    )
    F = 100e-6
    kw = dict(
        partition=part,
        material=mat,
        params=params,
        dirichlet_u={"left": (0.0, 0.0)},
        neumann_traction={"right": (0.0, -F / h)},
    )
    if circuit == "open":
        return ProblemSpec(dirichlet_phi={"right": 0.0}, **kw)
    return ProblemSpec(dirichlet_phi={"top": 0.0}, electrodes=("bottom",), **kw)


def build_coupling_strip(h, flexo=True, n=12):
    """Pure-bending strip in the simplified 1D condition.

    Only the through-thickness permittivity and the transverse flexoelectric
    constant act; Poisson's ratio is zero so plane strain matches the 1D
    model exactly.  Exact bending displacements are prescribed on every edge
    and the potential is grounded at one corner.
    """
    mu12 = 1e-6 if flexo else 0.0
    mat = cubic_symmetry_material(
        100e9, 0.0, l=0.0, mu12=mu12, Lam11=12.48e-9, Lam33=12.48e-9, e31=-4.4
    )
    Lx = 2 * h
    part = geo.generate_structured(geo.Rectangle(0, 0, Lx, h), 2 * n, n)
    params = SolverParams.for_material(
        mat, c0=math.sqrt(20.0), eta21=2.0, eta22=0.0, eta23=0.0, eta24=0.0
    )
    c = 0.004 / h  # curvature giving ~0.2% peak strain

    def u1(x, y):
        return c * x * (y - h / 2)

    def u2(x, y):
        return -c * x**2 / 2

    return ProblemSpec(
        partition=part,
        material=mat,
        params=params,
        dirichlet_u={t: (u1, u2) for t in part.boundary_tags()},
        point_dirichlet=(((0.0, 0.0), 2, 0.0),),
    )


def coupling_curve(h_bars, n=12):
    """(h_bar, k_eff, e_bar) rows for the bending strip at each height."""
    from .post import normalized_coupling

    e31 = 4.4
    mu12 = 1e-6
    rows = []
    for hb in h_bars:
        h = hb * mu12 / e31
        prob = build_coupling_strip(h, n=n)
        k_eff, e_bar = normalized_coupling(prob)
        rows.append({"h_bar": hb, "h": h, "k_eff": k_eff, "e_bar": e_bar})
    return rows


# ---------------------------------------------------------------------------
# truncated pyramid
# ---------------------------------------------------------------------------


def build_pyramid(resolution=306, support="flexible"):
    a1, a2, hgt = 750 * UM, 2250 * UM, 750 * UM
    if resolution == 306:
        nx, ny = 17, 18
    else:
        nx = max(3, int(round(math.sqrt(resolution))))
        ny = max(3, int(round(resolution / nx)))
    part = geo.generate_structured(geo.Trapezoid(a2, a1, hgt), nx, ny)
    mat = batio3_material()
    params = SolverParams.for_material(
        mat,
        c0=math.sqrt(20.0),
        eta21=1.0,
        eta22=0.0,
        eta23=mat.Lambda_perm[1, 1] / mat.lambda_avg,
        eta24=0.0,
    )
    F = 450e3
    kw = dict(
        partition=part,
        material=mat,
        params=params,
        dirichlet_phi={"top": 0.0},
        electrodes=("bottom",),
        neumann_traction={"top": (0.0, -F / a1)},
    )
    if support == "flexible":
        return ProblemSpec(
            point_dirichlet=(
                ((-a2 / 2, 0.0), 0, 0.0),
                ((-a2 / 2, 0.0), 1, 0.0),
                ((a2 / 2, 0.0), 1, 0.0),
            ),
            **{**kw, "neumann_traction": {"top": (0.0, -F / a1), "bottom": (0.0, F / a2)}},
        )
    return ProblemSpec(
        dirichlet_u={"bottom": (None, 0.0)},
        point_dirichlet=(((0.0, 0.0), 0, 0.0),),
        **kw,
    )


# ---------------------------------------------------------------------------
# elliptical hole
# ---------------------------------------------------------------------------


def hole_plate_material():
    return cubic_symmetry_material(
        139e9,
        0.3,
        l=10 * UM / 3,
        mu11=-6.3e-5,
        mu12=5.2e-6,
        mu44=-3.4e-5,
        Lam11=4.9e-9,
        Lam33=4.9e-9,
    )


def build_elliptical_hole(resolution=3360):
    ra = 10 * UM
    rb = ra / 2
    L = 20 * ra
    nx = max(8, int(round(math.sqrt(resolution / 2.2))))
    ny = 2 * nx
    xs = geo.graded_coords(0.0, L / 2, nx, 0.0, power=2.5)
    ys = geo.graded_coords(-L / 2, L / 2, ny, 0.0, power=2.5)
    part = geo.tensor_partition(xs, ys, domain=geo.Rectangle(0.0, -L / 2, L / 2, L))
    part = geo.punch_hole(
        part, lambda x, y: (x / ra) ** 2 + (y / rb) ** 2 < 1.0, hole_tag="hole"
    )
    mat = hole_plate_material()
    params = SolverParams.for_material(
        mat, c0=math.sqrt(20.0), eta21=2.0, eta22=1.0,
        eta23=0.1 * mat.Lambda_perm[1, 1] / mat.lambda_avg, eta24=0.0
    )
    Q = 695e6
    omega = 0.0837
    return ProblemSpec(
        partition=part,
        material=mat,
        params=params,
        dirichlet_u={"left": (0.0, None)},
        point_dirichlet=(((L / 4, 0.0), 1, 0.0),),
        neumann_traction={"top": (0.0, Q), "bottom": (0.0, -Q)},
        neumann_charge={"top": omega, "bottom": -omega},
        dirichlet_phi={},
        point_loads=(),
    )


# ---------------------------------------------------------------------------
# dielectric layer (full theory)
# ---------------------------------------------------------------------------


def layer_material():
    return cubic_symmetry_material(
        139e9, 0.0, l=0.0, Lam11=1e-9, Lam33=1e-9, Phi11=1e-17, Phi33=1e-17, b33=1e-4
    )


def build_layer(h=1.0 * UM, voltage=1.0, ny=20):
    w = h / 5
    nx = 4
    part = geo.generate_structured(geo.Rectangle(0, 0, w, h), nx, ny)
    mat = layer_material()
    params = SolverParams.for_material(
        mat, c0=math.sqrt(20.0), eta21=2.0, eta22=50.0, eta23=0.0, eta24=0.0
    )
    prob = ProblemSpec(
        partition=part,
        material=mat,
        params=params,
        theory="full",
        dirichlet_u={"top": (0.0, 0.0), "left": (0.0, None), "right": (0.0, None)},
        dirichlet_phi={"top": 0.0, "bottom": voltage},
    )
    return prob, (w / 2, 0.0)


# ---------------------------------------------------------------------------
# stationary cracks (PZT-5H, full theory)
# ---------------------------------------------------------------------------

CRACK_Q = 1.17e6
CRACK_D1 = -5e-4
CRACK_D3 = 1e-3


def _crack_params(mat):
    lam33 = mat.Lambda_perm[1, 1]
    return SolverParams.for_material(
        mat,
        c0=math.sqrt(20.0),
        eta21=2.0,
        eta22=50.0,
        eta23=2.0 * lam33 / mat.lambda_avg,
        eta24=0.0,
    )


def build_crack_center(resolution=2916, alpha=2.0, omega=0.0, tension=CRACK_Q):
    L = 1 * UM
    n = max(2, int(round(math.sqrt(resolution))))
    n += n % 2  # keep the crack plane on a grid line
    part = geo.generate_structured(geo.Rectangle(-L / 2, -L / 2, L, L), n, n)
    mat = pzt5h_material(SizeFactors(alpha=alpha))
    prob = ProblemSpec(
        partition=part,
        material=mat,
        params=_crack_params(mat),
        theory="full",
        neumann_traction={"top": (0.0, tension), "bottom": (0.0, -tension)},
        neumann_charge={"top": omega, "bottom": -omega} if omega else {},
        point_dirichlet=(
            ((0.0, -L / 2), 0, 0.0),
            ((0.0, L / 2), 0, 0.0),
            ((-L / 2, 0.0), 1, 0.0),
            ((L / 2, 0.0), 1, 0.0),
            ((-L / 2, -L / 2), 2, 0.0),
        ),
    )
    a = 0.1 * UM
    crack_ids = geo.edges_on_segment(part, (-a, 0.0), (a, 0.0))
    return prob, crack_ids


def build_crack_hole(resolution=3456, alpha=2.0, omega=0.0, tension=CRACK_Q):
    L = 1 * UM
    r = 0.1 * UM
    a = 0.125 * UM
    n = max(8, int(round(math.sqrt(resolution * 1.15))))
    n += n % 2
    xs = geo.graded_coords(-L / 2, L / 2, n, 0.0, power=1.8)
    part = geo.tensor_partition(xs, xs, domain=geo.Rectangle(-L / 2, -L / 2, L, L))
    part = geo.punch_hole(part, lambda x, y: math.hypot(x, y) < r, hole_tag="hole")
    mat = pzt5h_material(SizeFactors(alpha=alpha))
    prob = ProblemSpec(
        partition=part,
        material=mat,
        params=_crack_params(mat),
        theory="full",
        neumann_traction={"top": (0.0, tension), "bottom": (0.0, -tension)},
        neumann_charge={"top": omega, "bottom": -omega} if omega else {},
        point_dirichlet=(
            ((0.0, -L / 2), 0, 0.0),
            ((0.0, L / 2), 0, 0.0),
            ((-L / 2, 0.0), 1, 0.0),
            ((L / 2, 0.0), 1, 0.0),
            ((-L / 2, -L / 2), 2, 0.0),
        ),
    )
    crack_ids = geo.edges_on_segment(part, (r, 0.0), (r + a, 0.0))
    crack_ids += geo.edges_on_segment(part, (-(r + a), 0.0), (-r, 0.0))
    return prob, sorted(crack_ids)


def build_crack_edge(resolution=2052, alpha=1.0, permeable=False, tension=CRACK_Q):
    L = 1 * UM
    if resolution == 2052:
        nx, ny = 32, 64
    else:
        nx = max(4, int(round(math.sqrt(resolution / 2))))
        ny = 2 * nx
    ny += ny % 2
    part = geo.generate_structured(geo.Rectangle(0.0, -L, L, 2 * L), nx, ny)
    mat = pzt5h_material(SizeFactors(alpha=alpha))
    prob = ProblemSpec(
        partition=part,
        material=mat,
        params=_crack_params(mat),
        theory="full",
        neumann_traction={"top": (0.0, tension), "bottom": (0.0, -tension)},
        point_dirichlet=(
            ((L, 0.0), 0, 0.0),
            ((L, 0.0), 1, 0.0),
            ((0.65 * L, 0.0), 1, 0.0),
            ((L, -L), 2, 0.0),
        ),
        permeable=permeable,
    )
    a = 0.1 * UM
    crack_ids = geo.edges_on_segment(part, (0.0, 0.0), (a, 0.0))
    return prob, crack_ids


# ---------------------------------------------------------------------------
# crack propagation
# ---------------------------------------------------------------------------

OBLIQUE_GRIDS = {3178: (40, 80), 5346: (52, 104), 10396: (72, 144)}


def oblique_material(l=10 * UM / 3):
    return cubic_symmetry_material(
        139e9,
        0.3,
        l=l,
        mu11=-6.3e-5,
        mu12=5.2e-6,
        mu44=-3.4e-5,
        Lam11=4.9e-9,
        Lam33=4.9e-9,
    )


def build_propagate_oblique(resolution=3178, electrical="none", l=10 * UM / 3):
    """Oblique center crack under tension, optionally with surface charges.

    electrical: none | parallel | antiparallel (sign of the top charge).
    """
    W = 110 * UM
    H = 2 * W
    if resolution in OBLIQUE_GRIDS:
        nx, ny = OBLIQUE_GRIDS[resolution]
    else:
        nx = max(6, int(round(math.sqrt(resolution / 2))))
        ny = 2 * nx
    part = geo.generate_structured(geo.Rectangle(-W / 2, -H / 2, W, H), nx, ny)
    mat = oblique_material(l)
    params = SolverParams.for_material(
        mat, c0=math.sqrt(20.0), eta21=2.0, eta22=50.0, eta23=0.0, eta24=0.0
    )
    Q = 695e6
    omega = {"none": 0.0, "parallel": 0.5, "antiparallel": -0.5}[electrical]
    prob = ProblemSpec(
        partition=part,
        material=mat,
        params=params,
        neumann_traction={"top": (0.0, Q), "bottom": (0.0, -Q)},
        neumann_charge={"top": omega, "bottom": -omega} if omega else {},
        point_dirichlet=(
            ((-W / 2, -H / 2), 0, 0.0),
            ((-W / 2, -H / 2), 1, 0.0),
            ((W / 2, -H / 2), 1, 0.0),
            ((-W / 2, -H / 2), 2, 0.0),
        ),
    )
    a = 20 * UM
    beta = math.radians(60.0)
    d = (a / 2) * np.array([math.cos(beta), math.sin(beta)])
    crack_ids = geo.edge_path_between(part, tuple(-d), tuple(d))
    return prob, crack_ids


def build_propagate_square_hole(resolution=3600, poling="none", tension=695e6):
    """Square plate with a tiny central square hole under biaxial tension.

    poling: none (non-piezoelectric) | parallel | antiparallel (+-y).
    """
    L = 40 * UM
    a = math.sqrt(2) / 2 * UM
    n = max(16, int(round(math.sqrt(resolution))))
    n += n % 2
    xs = geo.graded_coords(-L / 2, L / 2, n, 0.0, power=2.4)
    part = geo.tensor_partition(xs, xs, domain=geo.Rectangle(-L / 2, -L / 2, L, L))
    part = geo.punch_hole(
        part, lambda x, y: abs(x) < a / 2 and abs(y) < a / 2, hole_tag="hole"
    )
    e31 = 0.0 if poling == "none" else 20.0
    mat = cubic_symmetry_material(
        139e9,
        0.3,
        l=0.1 * UM,
        mu11=0.8e-5,
        mu12=0.8e-5,
        mu44=0.8e-5,
        Lam11=4.9e-9,
        Lam33=4.9e-9,
        e31=e31,
    )
    if poling == "antiparallel":
        mat = rotate_poling(mat, math.pi)
    lam33 = mat.Lambda_perm[1, 1]
    params = SolverParams.for_material(
        mat,
        c0=math.sqrt(20.0),
        eta21=2.0,
        eta22=50.0,
        eta23=2.0 * lam33 / mat.lambda_avg,
        eta24=0.0,
    )
    Q = tension
    prob = ProblemSpec(
        partition=part,
        material=mat,
        params=params,
        neumann_traction={
            "top": (0.0, Q),
            "bottom": (0.0, -Q),
            "left": (-Q, 0.0),
            "right": (Q, 0.0),
        },
        point_dirichlet=(
            ((-L / 2, 0.0), 0, 0.0),
            ((-L / 2, 0.0), 1, 0.0),
            ((L / 2, 0.0), 1, 0.0),
            ((-L / 2, -L / 2), 2, 0.0),
        ),
    )
    return prob, []


# ---------------------------------------------------------------------------
# roster
# ---------------------------------------------------------------------------

ROSTER = [
    BenchmarkDef("patch-linear", "linear displacement patch test on three point distributions, Dirichlet and traction variants", "field", 16),
    BenchmarkDef("patch-quadratic", "pure-bending quadratic patch test on three point distributions", "field", 16),
    BenchmarkDef("cylinder", "pressurized flexoelectric hollow cylinder (quarter model) against the 1D radial reference", "field", 600),
    BenchmarkDef("cylinder-convergence", "cylinder error-vs-spacing series (50/200/800/1800 points) with fitted convergence rates", "convergence", 1800),
    BenchmarkDef("block-load", "block with a concentrated force on a 200 nm window; flexoelectric potential response", "field", 3200),
    BenchmarkDef("block-voltage", "block with a concentrated 5 V window; converse-effect strain response", "field", 3200),
    BenchmarkDef("beam-open", "piezo-flexoelectric cantilever, grounded free end (open circuit)", "field", 306),
    BenchmarkDef("beam-closed", "piezo-flexoelectric cantilever with a floating bottom electrode (closed circuit)", "field", 306),
    BenchmarkDef("pyramid-flexible", "truncated pyramid, simply supported, uniform load on both faces", "field", 306),
    BenchmarkDef("pyramid-rigid", "truncated pyramid on a rigid base", "field", 306),
    BenchmarkDef("elliptical-hole", "half plate with an elliptical hole under tension and surface charge", "field", 3360),
    BenchmarkDef("layer-1d", "infinite dielectric layer, full theory with electrostatic stress, Newton solve", "layer", 80),
    BenchmarkDef("theory-gap", "full vs reduced theory differences across geometric scales", "theory-gap", 600),
    BenchmarkDef("crack-center", "plate with a central impermeable crack under tension and surface charge", "field", 2916),
    BenchmarkDef("crack-hole", "plate with two symmetric cracks at a central hole", "field", 3456),
    BenchmarkDef("crack-edge", "edge-cracked strip; impermeable and permeable crack faces", "field", 2052),
    BenchmarkDef("propagate-oblique", "oblique center crack growth by the maximum hoop stress criterion, with electrode-ward deflection", "propagate", 3178),
    BenchmarkDef("propagate-square-hole", "crack initiation at a square hole under biaxial tension; hoop and BER criteria", "propagate", 3600),
]


def list_benchmarks():
    """(name, description) pairs of every builtin benchmark."""
    return [(b.name, b.description) for b in ROSTER]


def get(name):
    for b in ROSTER:
        if b.name == name:
            return b
    raise ConfigError(
        f"unknown benchmark '{name}'; valid names: {', '.join(b.name for b in ROSTER)}"
    )


def build(name, resolution=None):
    """ProblemSpec (plus crack ids where applicable) for a benchmark name."""
    b = get(name)
    res = b.default_resolution if resolution is None else resolution
    if name == "patch-linear":
        return patch_linear_cases()[1][1]
    if name == "patch-quadratic":
        return patch_quadratic_cases()[1][1]
    if name in ("cylinder", "cylinder-convergence"):
        return build_cylinder(res)
    if name == "block-load":
        return build_block(res, load="force")
    if name == "block-voltage":
        return build_block(res, load="voltage")
    if name == "beam-open":
        return build_beam(res, circuit="open")
    if name == "beam-closed":
        return build_beam(res, circuit="closed")
    if name == "pyramid-flexible":
        return build_pyramid(res, support="flexible")
    if name == "pyramid-rigid":
        return build_pyramid(res, support="rigid")
    if name == "elliptical-hole":
        return build_elliptical_hole(res)
    if name == "layer-1d":
        return build_layer()[0]
    if name == "theory-gap":
        return build_cylinder(res, theory="full")
    if name == "crack-center":
        prob, ids = build_crack_center(res)
        return apply_initial_crack(prob, ids)
    if name == "crack-hole":
        prob, ids = build_crack_hole(res)
        return apply_initial_crack(prob, ids)
    if name == "crack-edge":
        prob, ids = build_crack_edge(res)
        return apply_initial_crack(prob, ids)
    if name == "propagate-oblique":
        prob, ids = build_propagate_oblique(res)
        return apply_initial_crack(prob, ids)
    if name == "propagate-square-hole":
        prob, ids = build_propagate_square_hole(res)
        return prob
    raise ConfigError(f"benchmark '{name}' has no builder")  # pragma: no cover


def apply_initial_crack(prob, ids):
    return replace(prob, cracked_edges=frozenset(int(i) for i in ids))
