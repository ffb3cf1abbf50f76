"""Error norms, analytic references, convergence and comparison studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import _get_assembler, polygon_quadrature
from .errors import FpmError, InvalidInputError
from .materials import VACUUM_PERMITTIVITY
from .solve import solve_linear, solve_newton

FIELD_SIZES = {
    "u": 2,
    "eps": 3,
    "kappa": 6,
    "phi": 1,
    "E": 2,
    "V": 4,
    "P": 2,
    "sigma": 3,
}


@dataclass
class ErrorReport:
    """Relative L2 errors of the six field groups at one resolution."""

    e_u: float
    e_eps: float
    e_kappa: float
    e_phi: float
    e_E: float
    e_V: float
    h: float
    dof_count: int

    def as_dict(self):
        return {
            "e_u": self.e_u,
            "e_eps": self.e_eps,
            "e_kappa": self.e_kappa,
            "e_phi": self.e_phi,
            "e_E": self.e_E,
            "e_V": self.e_V,
            "h": self.h,
            "dof_count": self.dof_count,
        }


@dataclass
class ConvergenceReport:
    """Series of (h, ErrorReport) plus fitted log-log slopes per variable."""

    reports: list
    slopes: dict
    failures: list = field(default_factory=list)


class FieldEvaluator:
    """Evaluates solution fields inside any subdomain at arbitrary points."""

    def __init__(self, problem, solution):
        self.asm = _get_assembler(problem)
        self.x = solution.raw
        self.M = problem.material.enthalpy_matrix("full")
        self.use_maxwell = problem.theory == "full" and problem.params.use_maxwell

    def sample(self, name, sid, X):
        """(len(X), size) array of the named field inside subdomain ``sid``."""
        ops = self.asm._ops[sid]
        nz = self.asm.nz
        if name == "u":
            Nv = ops.value_rows(X)
            dl = self.x[ops.dofs()]
            return np.column_stack([Nv @ dl[0::3], Nv @ dl[1::3]])
        if name == "phi":
            Nv = ops.value_rows(X)
            dl = self.x[ops.dofs()]
            return (Nv @ dl[2::3])[:, None]
        B = ops.B(X, nz)
        z = np.einsum("qaj,j->qa", B, self.x[ops.dofs()])
        zf = np.zeros((len(X), 15))
        zf[:, :nz] = z
        if name == "eps":
            return zf[:, 0:3]
        if name == "kappa":
            return zf[:, 3:9]
        if name == "E":
            return zf[:, 9:11]
        if name == "V":
            return zf[:, 11:15]
        out = zf @ self.M.T
        if name == "sigma":
            return out[:, 0:3]
        if name == "P":
            D = -out[:, 9:11]
            return D - VACUUM_PERMITTIVITY * zf[:, 9:11]
        raise InvalidInputError(f"unknown field '{name}'")


def relative_error(computed, exact, partition, order=4):
    """Relative L2 error between a computed and an exact field sampler.

    ``computed(sid, X)`` and ``exact(X)`` both return (len(X), m) arrays;
    the norm integrates x^T x over every subdomain.
    """
    num = 0.0
    den = 0.0
    for s in partition.subdomains:
        coords = partition.subdomain_polygon(s.id)
        X, W = polygon_quadrature(coords, order)
        xh = np.asarray(computed(s.id, X), dtype=float)
        xs = np.asarray(exact(X), dtype=float)
        if xh.ndim == 1:
            xh = xh[:, None]
        if xs.ndim == 1:
            xs = xs[:, None]
        num += float((W * ((xh - xs) ** 2).sum(axis=1)).sum())
        den += float((W * (xs**2).sum(axis=1)).sum())
    if den == 0.0:
        raise InvalidInputError(
            "exact field has zero L2 norm; use an absolute norm instead"
        )
    return math.sqrt(num / den)


def relative_difference(computed_a, computed_b, partition, order=4):
    """Relative L2 difference of two per-subdomain samplers, normalized by
    the second one."""
    num = 0.0
    den = 0.0
    for s in partition.subdomains:
        coords = partition.subdomain_polygon(s.id)
        X, W = polygon_quadrature(coords, order)
        xa = np.asarray(computed_a(s.id, X), dtype=float)
        xb = np.asarray(computed_b(s.id, X), dtype=float)
        num += float((W * ((xa - xb) ** 2).sum(axis=1)).sum())
        den += float((W * (xb**2).sum(axis=1)).sum())
    if den == 0.0:
        raise InvalidInputError("reference field has zero L2 norm")
    return math.sqrt(num / den)


def error_report(problem, solution, exact_fields, order=4):
    """ErrorReport against a dict of exact samplers keyed by field name."""
    ev = FieldEvaluator(problem, solution)
    vals = {}
    for name in ("u", "eps", "kappa", "phi", "E", "V"):
        ex = exact_fields.get(name)
        if ex is None:
            vals[name] = float("nan")
            continue
        vals[name] = relative_error(
            lambda sid, X, nm=name: ev.sample(nm, sid, X), ex, problem.partition, order
        )
    ndof = 3 * problem.partition.n_points + len(problem.electrodes)
    return ErrorReport(
        e_u=vals["u"],
        e_eps=vals["eps"],
        e_kappa=vals["kappa"],
        e_phi=vals["phi"],
        e_E=vals["E"],
        e_V=vals["V"],
        h=problem.partition.h,
        dof_count=ndof,
    )


def fit_slope(hs, errs):
    """Least-squares slope of log(err) vs log(h); nan when degenerate."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    good = (errs > 0) & np.isfinite(errs)
    if good.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[good]), np.log(errs[good]), 1)[0])


def convergence_study(problem_factory, resolutions, exact_fields, order=4):
    """Run the pipeline per resolution and fit per-variable slopes.

    ``problem_factory(resolution)`` returns a ProblemSpec; failures are
    recorded per resolution and skipped in the fit.
    """
    if len(resolutions) < 3:
        raise InvalidInputError("at least 3 resolutions required")
    reports = []
    failures = []
    for res in resolutions:
        try:
            prob = problem_factory(res)
            system = _get_assembler(prob).assemble()
            sol = solve_linear(system)
            reports.append((res, error_report(prob, sol, exact_fields, order)))
        except FpmError as err:
            failures.append((res, str(err)))
    slopes = {}
    if len(reports) >= 2:
        hs = [r.h for _, r in reports]
        for name in ("e_u", "e_eps", "e_kappa", "e_phi", "e_E", "e_V"):
            errs = [getattr(r, name) for _, r in reports]
            # machine-level errors make the fit degenerate; skip them
            if max(errs) < 1e-12:
                slopes[name] = float("nan")
            else:
                slopes[name] = fit_slope(hs, errs)
    return ConvergenceReport(reports=reports, slopes=slopes, failures=failures)


# ---------------------------------------------------------------------------
# energies and coupling factor
# ---------------------------------------------------------------------------


def energy_split(problem, solution, order=4):
    """(elastic, electrostatic) stored energies of a solution."""
    ev = FieldEvaluator(problem, solution)
    C = problem.material.C_sigma_eps
    Lam = problem.material.Lambda_perm
    elastic = 0.0
    electro = 0.0
    for s in problem.partition.subdomains:
        coords = problem.partition.subdomain_polygon(s.id)
        X, W = polygon_quadrature(coords, order)
        eps = ev.sample("eps", s.id, X)
        E = ev.sample("E", s.id, X)
        elastic += 0.5 * float((W * np.einsum("qa,ab,qb->q", eps, C, eps)).sum())
        electro += 0.5 * float((W * np.einsum("qa,ab,qb->q", E, Lam, E)).sum())
    return elastic, electro


def coupling_factor(problem, solution, companion_solution=None, companion_problem=None):
    """k_eff = sqrt(electrostatic / elastic energy); optionally e_bar.

    When a companion run without flexoelectric coupling is supplied, returns
    (k_eff, e_bar = k_eff / k_piezo); otherwise (k_eff, None).
    """
    elastic, electro = energy_split(problem, solution)
    if elastic <= 0 or electro <= 0:
        raise InvalidInputError("coupling factor needs nonzero elastic and electrostatic energy")
    k_eff = math.sqrt(electro / elastic)
    if companion_solution is None:
        return k_eff, None
    el2, eo2 = energy_split(companion_problem, companion_solution)
    if eo2 <= 0:
        raise InvalidInputError("companion run has zero electrostatic energy")
    k_piezo = math.sqrt(eo2 / el2)
    return k_eff, k_eff / k_piezo


def normalized_coupling(problem):
    """Solve the problem and its flexo-free companion; return (k_eff, e_bar)."""
    sol = _solve_any(problem)
    mat0 = replace(problem.material, a_flexo=np.zeros_like(problem.material.a_flexo))
    comp = replace(problem, material=mat0)
    comp.params = problem.params
    sol0 = _solve_any(comp)
    return coupling_factor(problem, sol, sol0, comp)


def _solve_any(problem):
    if problem.theory == "full":
        return solve_newton(problem)
    return solve_linear(_get_assembler(problem).assemble())


# ---------------------------------------------------------------------------
# analytic axisymmetric reference (reduced theory)
# ---------------------------------------------------------------------------


class CylinderReference:
    """High-resolution 1D radial solve of the axisymmetric reduced problem.

    Hermite-cubic elements in r for both u_r and phi; the radial energy
    density is the exact angle average of the plane enthalpy, so no polar
    strain-gradient operators are transcribed by hand.  Exposes radial
    profiles and Cartesian field samplers.
    """

    def __init__(self, material, r_i, r_o, u_i, u_o, phi_i, phi_o, n_nodes=2000):
        if np.any(material.e_piezo != 0):
            raise InvalidInputError("axisymmetric reference requires a non-piezoelectric material")
        if not (0 < r_i < r_o):
            raise InvalidInputError("radii must satisfy 0 < r_i < r_o")
        self.material = material
        self.r_i, self.r_o = float(r_i), float(r_o)
        self.bc = (float(u_i), float(u_o), float(phi_i), float(phi_o))
        self.nodes = np.linspace(self.r_i, self.r_o, n_nodes)
        self._solve()

    # angle-averaged quadratic form Q(r) over y = (u, u', u'', phi')
    def _qform(self, r):
        M = self.material.enthalpy_matrix("reduced")[:11, :11]
        nth = 16
        Q = np.zeros((4, 4))
        for th in (2 * math.pi / nth) * np.arange(nth):
            c, s = math.cos(th), math.sin(th)
            R = np.array([[c, -s], [s, c]])
            S = np.zeros((11, 4))
            S[0] = [s * s / r, c * c, 0.0, 0.0]
            S[1] = [c * c / r, s * s, 0.0, 0.0]
            S[2] = [-2 * c * s / r, 2 * c * s, 0.0, 0.0]
            # kappa from rotating the on-axis second-derivative tensor
            A = np.zeros((2, 2, 2))
            Bt = np.zeros((2, 2, 2))
            A[0, 0, 0] = 1.0  # u'' slot
            Bt[0, 1, 1] = 1.0  # f slot, f = u'/r - u/r^2
            Bt[1, 0, 1] = Bt[1, 1, 0] = 1.0
            TA = np.einsum("ap,bq,cr,pqr->abc", R, R, R, A)
            TB = np.einsum("ap,bq,cr,pqr->abc", R, R, R, Bt)

            def kap(T):
                return np.array(
                    [
                        T[0, 0, 0],
                        T[1, 1, 1],
                        T[0, 1, 1],
                        T[1, 0, 0],
                        T[0, 0, 1] + T[0, 1, 0],
                        T[1, 0, 1] + T[1, 1, 0],
                    ]
                )

            ka = kap(TA)
            kb = kap(TB)
            for slot in range(6):
                S[3 + slot] = [
                    -kb[slot] / r**2,
                    kb[slot] / r,
                    ka[slot],
                    0.0,
                ]
            S[9] = [0.0, 0.0, 0.0, -c]
            S[10] = [0.0, 0.0, 0.0, -s]
            Q += S.T @ M @ S
        return Q / nth

    @staticmethod
    def _hermite(xi, h):
        H = np.array(
            [
                1 - 3 * xi**2 + 2 * xi**3,
                h * (xi - 2 * xi**2 + xi**3),
                3 * xi**2 - 2 * xi**3,
                h * (-(xi**2) + xi**3),
            ]
        )
        dH = (
            np.array(
                [
                    -6 * xi + 6 * xi**2,
                    h * (1 - 4 * xi + 3 * xi**2),
                    6 * xi - 6 * xi**2,
                    h * (-2 * xi + 3 * xi**2),
                ]
            )
            / h
        )
        ddH = (
            np.array(
                [
                    -6 + 12 * xi,
                    h * (-4 + 6 * xi),
                    6 - 12 * xi,
                    h * (-2 + 6 * xi),
                ]
            )
            / h**2
        )
        return H, dH, ddH

    def _solve(self):
        nodes = self.nodes
        nn = len(nodes)
        ndof = 4 * nn  # (u, u', phi, phi') per node
        gx, gw = np.polynomial.legendre.leggauss(4)
        gx = 0.5 * (gx + 1)
        gw = 0.5 * gw
        rows, cols, vals = [], [], []
        for el in range(nn - 1):
            r0, r1 = nodes[el], nodes[el + 1]
            h = r1 - r0
            dofs = np.array(
                [4 * el, 4 * el + 1, 4 * (el + 1), 4 * (el + 1) + 1,
                 4 * el + 2, 4 * el + 3, 4 * (el + 1) + 2, 4 * (el + 1) + 3]
            )
            Ke = np.zeros((8, 8))
            for xi, w in zip(gx, gw):
                r = r0 + xi * h
                H, dH, ddH = self._hermite(xi, h)
                Sh = np.zeros((4, 8))
                Sh[0, 0:4] = H
                Sh[1, 0:4] = dH
                Sh[2, 0:4] = ddH
                Sh[3, 4:8] = dH
                Q = self._qform(r)
                Ke += (w * h * r) * (Sh.T @ Q @ Sh)
            rows.append(np.repeat(dofs, 8))
            cols.append(np.tile(dofs, 8))
            vals.append(Ke.ravel())
        K = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ndof, ndof),
        ).tocsr()

        u_i, u_o, phi_i, phi_o = self.bc
        fixed = {0: u_i, 4 * (nn - 1): u_o, 2: phi_i, 4 * (nn - 1) + 2: phi_o}
        free = np.array([i for i in range(ndof) if i not in fixed])
        xc = np.zeros(ndof)
        for i, v in fixed.items():
            xc[i] = v
        rhs = -(K @ xc)[free]
        Kff = K[free][:, free].tocsc()
        xf = spla.splu(Kff).solve(rhs)
        x = xc.copy()
        x[free] = xf
        self.dofs = x

    def _eval(self, r):
        """(u, u', u'', phi, phi', phi'') at radii ``r`` (vectorized)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        nodes = self.nodes
        el = np.clip(np.searchsorted(nodes, r) - 1, 0, len(nodes) - 2)
        out = np.zeros((len(r), 6))
        for i, (ri, e) in enumerate(zip(r, el)):
            r0, r1 = nodes[e], nodes[e + 1]
            h = r1 - r0
            xi = (ri - r0) / h
            H, dH, ddH = self._hermite(xi, h)
            du = self.dofs[[4 * e, 4 * e + 1, 4 * (e + 1), 4 * (e + 1) + 1]]
            dp = self.dofs[[4 * e + 2, 4 * e + 3, 4 * (e + 1) + 2, 4 * (e + 1) + 3]]
            out[i] = [H @ du, dH @ du, ddH @ du, H @ dp, dH @ dp, ddH @ dp]
        return out

    # -- radial profiles -----------------------------------------------------

    def u_r(self, r):
        return self._eval(r)[:, 0]

    def phi(self, r):
        return self._eval(r)[:, 3]

    def radial_fields(self, r):
        """dict of on-axis radial quantities incl. D_r and P_r."""
        vals = self._eval(r)
        u, du, ddu, ph, dph, ddph = vals.T
        f = du / r - u / r**2
        kap = np.zeros((len(r), 6))
        kap[:, 0] = ddu
        kap[:, 2] = f
        kap[:, 5] = 2 * f
        eps = np.column_stack([du, u / r, np.zeros_like(r)])
        E = np.column_stack([-dph, np.zeros_like(r)])
        a = self.material.a_flexo
        Lam = self.material.Lambda_perm
        D1 = Lam[0, 0] * E[:, 0] + kap @ a[:, 0]
        P1 = D1 - VACUUM_PERMITTIVITY * E[:, 0]
        return {
            "u_r": u,
            "phi": ph,
            "eps_rr": du,
            "eps_tt": u / r,
            "E_r": E[:, 0],
            "D_r": D1,
            "P_r": P1,
        }

    # -- Cartesian samplers for error norms ----------------------------------

    def fields(self):
        """dict of samplers keyed like error_report expects."""

        def polar(X):
            X = np.atleast_2d(X)
            r = np.hypot(X[:, 0], X[:, 1])
            th = np.arctan2(X[:, 1], X[:, 0])
            r = np.clip(r, self.r_i, self.r_o)
            return r, th

        def u(X):
            r, th = polar(X)
            ur = self.u_r(r)
            return np.column_stack([ur * np.cos(th), ur * np.sin(th)])

        def phi(X):
            r, _ = polar(X)
            return self.phi(r)[:, None]

        def eps(X):
            r, th = polar(X)
            vals = self._eval(r)
            du, u_ = vals[:, 1], vals[:, 0]
            err_, ett = du, u_ / r
            c, s = np.cos(th), np.sin(th)
            e11 = err_ * c**2 + ett * s**2
            e22 = err_ * s**2 + ett * c**2
            g12 = 2 * c * s * (err_ - ett)
            return np.column_stack([e11, e22, g12])

        def kappa(X):
            r, th = polar(X)
            vals = self._eval(r)
            u_, du, ddu = vals[:, 0], vals[:, 1], vals[:, 2]
            f = du / r - u_ / r**2
            out = np.zeros((len(r), 6))
            for i in range(len(r)):
                c, s = math.cos(th[i]), math.sin(th[i])
                R = np.array([[c, -s], [s, c]])
                T0 = np.zeros((2, 2, 2))
                T0[0, 0, 0] = ddu[i]
                T0[0, 1, 1] = f[i]
                T0[1, 0, 1] = T0[1, 1, 0] = f[i]
                T = np.einsum("ap,bq,cr,pqr->abc", R, R, R, T0)
                out[i] = [
                    T[0, 0, 0],
                    T[1, 1, 1],
                    T[0, 1, 1],
                    T[1, 0, 0],
                    T[0, 0, 1] + T[0, 1, 0],
                    T[1, 0, 1] + T[1, 1, 0],
                ]
            return out

        def E(X):
            r, th = polar(X)
            Er = -self._eval(r)[:, 4]
            return np.column_stack([Er * np.cos(th), Er * np.sin(th)])

        def V(X):
            r, th = polar(X)
            vals = self._eval(r)
            dph, ddph = vals[:, 4], vals[:, 5]
            out = np.zeros((len(r), 4))
            for i in range(len(r)):
                c, s = math.cos(th[i]), math.sin(th[i])
                R = np.array([[c, -s], [s, c]])
                V0 = np.diag([-ddph[i], -dph[i] / r[i]])
                Vr = R @ V0 @ R.T
                out[i] = [Vr[0, 0], Vr[1, 0], Vr[0, 1], Vr[1, 1]]
            return out

        def P(X):
            r, th = polar(X)
            pr = self.radial_fields(r)["P_r"]
            return np.column_stack([pr * np.cos(th), pr * np.sin(th)])

        return {"u": u, "phi": phi, "eps": eps, "kappa": kappa, "E": E, "V": V, "P": P}


def analytic_cylinder_reference(material, r_i, r_o, u_i, u_o, phi_i, phi_o, n_nodes=2000):
    """Verified 1D radial reference for the axisymmetric reduced problem."""
    return CylinderReference(material, r_i, r_o, u_i, u_o, phi_i, phi_o, n_nodes)


# ---------------------------------------------------------------------------
# comparison studies
# ---------------------------------------------------------------------------


def theory_gap_study(problem_factory, scales):
    """Relative full-vs-reduced differences of u, phi and P per scale.

    ``problem_factory(scale, theory)`` returns a ProblemSpec.  Newton
    divergence is recorded as a per-scale failure instead of aborting.
    """
    out = []
    for s in scales:
        try:
            red = problem_factory(s, "reduced")
            sol_r = solve_linear(_get_assembler(red).assemble())
            ful = problem_factory(s, "full")
            sol_f = solve_newton(ful)
            ev_r = FieldEvaluator(red, sol_r)
            ev_f = FieldEvaluator(ful, sol_f)
            diffs = {}
            for name in ("u", "phi", "P"):
                diffs[name] = relative_difference(
                    lambda sid, X, nm=name: ev_f.sample(nm, sid, X),
                    lambda sid, X, nm=name: ev_r.sample(nm, sid, X),
                    red.partition,
                )
            out.append({"scale": s, "ok": True, **diffs})
        except FpmError as err:
            out.append({"scale": s, "ok": False, "error": str(err)})
    return out


def layer_scaling_study(problem_factory, thicknesses):
    """(h, u2_bottom / h) series for the full-theory dielectric layer."""
    out = []
    for h in thicknesses:
        prob, probe_xy = problem_factory(h)
        sol = solve_newton(prob)
        sid = prob.partition.containing_subdomain(*probe_xy)
        ev = FieldEvaluator(prob, sol)
        u2 = float(ev.sample("u", sid, np.array([probe_xy]))[0, 1])
        iters = sol.convergence_log[-1][0] if sol.convergence_log else 1
        out.append({"h": h, "u2": u2, "u2_over_h": u2 / h, "iterations": iters})
    return out
