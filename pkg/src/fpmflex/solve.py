"""Linear and Newton solves plus derived-field recovery."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import _get_assembler, residual_and_tangent_full
from .errors import DivergenceError, RigidBodyModeError
from .materials import VACUUM_PERMITTIVITY, maxwell_stress


@dataclass
class FieldSolution:
    """Nodal solution plus per-point derived fields.

    Derived arrays are recomputable from the nodal fields through the
    approximation weights (derive_fields is idempotent on them).
    """

    nodal_u: np.ndarray  # (N, 2)
    nodal_phi: np.ndarray  # (N,)
    electrode_voltages: dict = field(default_factory=dict)
    eps: np.ndarray = None  # (N, 3)
    kappa: np.ndarray = None  # (N, 6)
    Efield: np.ndarray = None  # (N, 2)
    Vgrad: np.ndarray = None  # (N, 4)
    sigma: np.ndarray = None  # (N, 3)
    D: np.ndarray = None  # (N, 2)
    P: np.ndarray = None  # (N, 2)
    convergence_log: list = field(default_factory=list)
    raw: np.ndarray = None  # full dof vector including electrode unknowns

    @property
    def n_points(self):
        return len(self.nodal_phi)


def _split(system, x):
    n = system.npoints
    u = np.column_stack([x[0 : 3 * n : 3], x[1 : 3 * n : 3]])
    phi = x[2 : 3 * n : 3].copy()
    volts = {tag: float(x[idx]) for tag, idx in system.electrode_index.items()}
    return u, phi, volts


def _null_space_dim(K):
    """Estimated dimension of the near-null space (small systems only)."""
    n = K.shape[0]
    try:
        if n <= 1500:
            w = np.linalg.eigvalsh(K.toarray())
            scale = np.abs(w).max()
            return int(np.sum(np.abs(w) < 1e-12 * max(scale, 1.0)))
        w = spla.eigsh(K, k=min(6, n - 1), sigma=0, which="LM", return_eigenvectors=False)
        scale = spla.norm(K, ord=1)
        return int(np.sum(np.abs(w) < 1e-12 * max(scale, 1.0)))
    except Exception:
        return -1


def _factorize(K):
    try:
        lu = spla.splu(K.tocsc())
    except RuntimeError as err:
        dim = _null_space_dim(K)
        label = "unknown (>= 1)" if dim < 0 else str(dim)
        raise RigidBodyModeError(
            f"singular factorization; null-space dimension {label}", null_dim=dim
        ) from err
    return lu


def solve_linear(system, derive=True):
    """Direct sparse solve of the assembled system with one refinement step."""
    K = system.K.tocsc()
    lu = _factorize(K)
    x = lu.solve(system.f)
    r = system.f - K @ x
    x = x + lu.solve(r)
    if not np.all(np.isfinite(x)):
        dim = _null_space_dim(K)
        raise RigidBodyModeError(
            f"non-finite solution; null-space dimension {dim if dim >= 0 else 'unknown (>= 1)'}",
            null_dim=dim,
        )
    fn = np.linalg.norm(system.f)
    if fn > 0:
        res = np.linalg.norm(system.f - K @ x) / fn
        if res > 1e-8:
            raise RigidBodyModeError(
                f"direct solve residual {res:.2e} exceeds tolerance; system likely singular",
                null_dim=-1,
            )
    u, phi, volts = _split(system, x)
    sol = FieldSolution(nodal_u=u, nodal_phi=phi, electrode_voltages=volts, raw=x)
    if derive:
        asm = system.assembler
        derive_fields(asm.part, asm, asm.material, sol, theory=asm.theory)
    return sol


def solve_newton(problem, initial_guess=None, derive=True):
    """Newton iteration for the full theory.

    Stops when the relative update norms of both the displacement and the
    potential vector drop below params.newton_tol; the initial guess
    defaults to the reduced-theory linear solution.
    """
    asm = _get_assembler(problem)
    params = problem.params
    system = getattr(problem, "_system_full", None)
    if system is None or system.assembler is not asm:
        system = asm.assemble()
        problem._system_full = system

    if initial_guess is None:
        from dataclasses import replace

        red = replace(
            problem,
            theory="reduced",
            cracked_edges=problem.cracked_edges,
            permeable=problem.permeable,
        )
        red_sys = _get_assembler(red).assemble()
        x = solve_linear(red_sys, derive=False).raw
    else:
        x = np.asarray(initial_guess, dtype=float).copy()
        if x.shape != (system.ndof,):
            raise DivergenceError(
                f"initial guess has shape {x.shape}, expected ({system.ndof},)"
            )

    n = system.npoints
    log = []
    converged = False
    for it in range(1, params.newton_max_iter + 1):
        R, T = residual_and_tangent_full(problem, x, system=system)
        try:
            lu = spla.splu(T)
        except RuntimeError as err:
            raise DivergenceError(
                f"tangent factorization failed at iteration {it}",
                residual_norm=float(np.linalg.norm(R)),
            ) from err
        dx = lu.solve(-R)
        x = x + dx
        du = dx[0 : 3 * n].reshape(n, 3)[:, 0:2]
        dphi = dx[2 : 3 * n : 3]
        unorm = np.linalg.norm(x[0 : 3 * n].reshape(n, 3)[:, 0:2])
        pnorm = np.linalg.norm(x[2 : 3 * n : 3])
        rel_u = np.linalg.norm(du) / unorm if unorm > 0 else 0.0
        rel_p = np.linalg.norm(dphi) / pnorm if pnorm > 0 else 0.0
        log.append((it, float(rel_u), float(rel_p), float(np.linalg.norm(R))))
        if rel_u < params.newton_tol and rel_p < params.newton_tol:
            converged = True
            break
    if not converged:
        raise DivergenceError(
            f"Newton did not converge in {params.newton_max_iter} iterations",
            residual_norm=log[-1][3] if log else float("nan"),
        )
    u, phi, volts = _split(system, x)
    sol = FieldSolution(
        nodal_u=u, nodal_phi=phi, electrode_voltages=volts, convergence_log=log, raw=x
    )
    if derive:
        derive_fields(asm.part, asm, asm.material, sol, theory="full")
    return sol


def derive_fields(partition, assembler, material, solution, theory="reduced"):
    """Per-point eps, kappa, E, V, sigma, D and P from the nodal fields.

    Evaluation uses each subdomain's trial operators at its own Point;
    P = D - eps0 * E.
    """
    n = partition.n_points
    nz = assembler.nz
    x = solution.raw
    if x is None:
        x = np.zeros(3 * n + len(assembler.electrode_index))
        x[0 : 3 * n : 3] = solution.nodal_u[:, 0]
        x[1 : 3 * n : 3] = solution.nodal_u[:, 1]
        x[2 : 3 * n : 3] = solution.nodal_phi
    eps = np.zeros((n, 3))
    kap = np.zeros((n, 6))
    Ef = np.zeros((n, 2))
    Vg = np.zeros((n, 4))
    sig = np.zeros((n, 3))
    Dv = np.zeros((n, 2))
    M = material.enthalpy_matrix("full")
    for sid in range(n):
        ops = assembler._ops[sid]
        X = partition.points_xy[sid][None, :]
        B = ops.B(X, nz)
        z = np.einsum("qaj,j->qa", B, x[ops.dofs()])[0]
        zf = np.zeros(15)
        zf[:nz] = z
        out = M @ zf
        eps[sid] = zf[0:3]
        kap[sid] = zf[3:9]
        Ef[sid] = zf[9:11]
        Vg[sid] = zf[11:15]
        sig[sid] = out[0:3]
        Dv[sid] = -out[9:11]
        if theory == "full" and assembler.params.use_maxwell:
            sig[sid] += maxwell_stress(Ef[sid], Dv[sid])
    solution.eps = eps
    solution.kappa = kap
    solution.Efield = Ef
    solution.Vgrad = Vg
    solution.sigma = sig
    solution.D = Dv
    solution.P = Dv - VACUUM_PERMITTIVITY * Ef
    return solution


def stored_energy(system, x):
    """Quadratic stored energy 0.5 x^T K x of a linear solution."""
    return 0.5 * float(x @ (system.K @ x))


def external_work(system, x):
    return float(system.f @ x)
