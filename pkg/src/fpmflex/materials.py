"""Constitutive models for flexoelectric / piezoelectric dielectrics.

Voigt layouts used throughout (plane strain):
  strain          eps   = (e11, e22, 2*e12)
  strain gradient kappa = (u1,11; u2,22; u1,22; u2,11; 2*u1,12; 2*u2,12)
  electric field  E     = (E1, E2)                    with E = -grad(phi)
  field gradient  V     = (E1,1; E2,1; E1,2; E2,2)

Constitutive map (electric enthalpy gradient):
  sigma = C_se eps - e E - b V
  mu    = C_mk kappa - a E
  D     = Lam E + e^T eps + a^T kappa
  Q     = Phi V + b^T eps
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError

VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m


@dataclass(frozen=True)
class SizeFactors:
    """Scaling of the gradient-effect tensors; alpha = 0 turns them all off."""

    alpha: float = 1.0
    l0: float = 5e-9  # m
    q0: float = 3e-10  # m
    a0_sq: float = 5e-12  # m (squared factor as given)
    b0_sq: float = 5e-12  # m

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidInputError("alpha must be >= 0")


@dataclass(frozen=True)
class MaterialModel:
    """All constitutive tensors plus the scalars they were built from."""

    lam: float  # Pa, Lame first parameter (plane strain)
    G: float  # Pa, shear modulus
    l: float  # m, internal material length
    C_sigma_eps: np.ndarray  # (3, 3) Pa
    C_mu_kappa: np.ndarray  # (6, 6) Pa m^2
    e_piezo: np.ndarray  # (3, 2) C/m^2
    a_flexo: np.ndarray  # (6, 2) C/m
    b_quad: np.ndarray  # (3, 4) C/m
    Phi: np.ndarray  # (4, 4) F m
    Lambda_perm: np.ndarray  # (2, 2) F/m
    poling_angle: float = 0.0  # rad, 0 = poling along +y
    youngs: float = 0.0  # Pa, reference modulus for penalty scaling

    def __post_init__(self):
        for name in ("C_sigma_eps", "C_mu_kappa", "Phi", "Lambda_perm"):
            M = getattr(self, name)
            if not np.allclose(M, M.T, rtol=0, atol=1e-8 * max(1.0, abs(M).max())):
                raise InvalidInputError(f"{name} must be symmetric")
        w = np.linalg.eigvalsh(self.Lambda_perm)
        if w.min() <= 0:
            raise InvalidInputError("Lambda_perm must be positive definite")
        if np.linalg.eigvalsh(self.C_sigma_eps).min() < -1e-6 * abs(self.C_sigma_eps).max():
            raise InvalidInputError("C_sigma_eps must be positive semidefinite")
        if self.l < 0:
            raise InvalidInputError("internal length l must be >= 0")

    @property
    def lambda_avg(self):
        """Geometric-mean permittivity used for penalty scaling."""
        return float(np.sqrt(self.Lambda_perm[0, 0] * self.Lambda_perm[1, 1]))

    def enthalpy_matrix(self, theory="reduced"):
        """Symmetric block matrix M with (sigma, mu, -D, -Q) = M (eps, kappa, E, V).

        The reduced theory carries zero Phi/b blocks; layout is fixed as
        z = (eps[3], kappa[6], E[2], V[4]).
        """
        M = np.zeros((15, 15))
        M[0:3, 0:3] = self.C_sigma_eps
        M[3:9, 3:9] = self.C_mu_kappa
        M[0:3, 9:11] = -self.e_piezo
        M[9:11, 0:3] = -self.e_piezo.T
        M[3:9, 9:11] = -self.a_flexo
        M[9:11, 3:9] = -self.a_flexo.T
        M[9:11, 9:11] = -self.Lambda_perm
        if theory == "full":
            M[0:3, 11:15] = -self.b_quad
            M[11:15, 0:3] = -self.b_quad.T
            M[11:15, 11:15] = -self.Phi
        elif theory != "reduced":
            raise InvalidInputError(f"unknown theory '{theory}'")
        return M


def _lame(E, nu):
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    G = E / (2.0 * (1.0 + nu))
    return lam, G


def cubic_symmetry_material(
    E,
    nu,
    l=0.0,
    mu11=0.0,
    mu12=0.0,
    mu44=0.0,
    Lam11=1e-9,
    Lam33=1e-9,
    e31=0.0,
    e33=0.0,
    e15=0.0,
    Phi11=0.0,
    Phi33=0.0,
    b33=0.0,
):
    """Isotropic elasticity with cubic flexoelectric symmetry.

    The gradient stiffness is the l^2-scaled elastic tensor acting on strain
    gradients; the flexoelectric matrix carries the three cubic constants.
    """
    if E <= 0:
        raise InvalidInputError("Young's modulus must be positive")
    if not (-1.0 < nu < 0.5):
        raise InvalidInputError("Poisson's ratio must lie in (-1, 0.5)")
    lam, G = _lame(E, nu)

    C = np.array(
        [
            [lam + 2 * G, lam, 0.0],
            [lam, lam + 2 * G, 0.0],
            [0.0, 0.0, G],
        ]
    )
    Cm = l * l * np.array(
        [
            [lam + 2 * G, 0, 0, 0, 0, lam / 2],
            [0, lam + 2 * G, 0, 0, lam / 2, 0],
            [0, 0, G, 0, 0, G / 2],
            [0, 0, 0, G, G / 2, 0],
            [0, lam / 2, 0, G / 2, (lam + 3 * G) / 4, 0],
            [lam / 2, 0, G / 2, 0, 0, (lam + 3 * G) / 4],
        ]
    )
    e = np.array(
        [
            [0.0, e31],
            [0.0, e33],
            [e15, 0.0],
        ]
    )
    a = np.array(
        [
            [mu11, 0.0],
            [0.0, mu11],
            [mu44, 0.0],
            [0.0, mu44],
            [0.0, (mu12 + mu44) / 2],
            [(mu12 + mu44) / 2, 0.0],
        ]
    )
    Phi = np.diag([Phi11, Phi33, Phi11, Phi33])
    b = np.zeros((3, 4))
    if b33 != 0.0:
        # longitudinal quadrupole slots; the (eps22, E2,2) entry drives the
        # through-thickness response
        b[0, 0] = b33
        b[1, 3] = b33
    Lam = np.diag([float(Lam11), float(Lam33)])
    return MaterialModel(
        lam=lam,
        G=G,
        l=l,
        C_sigma_eps=C,
        C_mu_kappa=Cm,
        e_piezo=e,
        a_flexo=a,
        b_quad=b,
        Phi=Phi,
        Lambda_perm=Lam,
        youngs=float(E),
    )


# PZT-5H constants
PZT5H_C11 = 12.6e10
PZT5H_C13 = 5.3e10
PZT5H_C33 = 11.7e10
PZT5H_C44 = 3.53e10
PZT5H_E31 = -6.5
PZT5H_E33 = 23.3
PZT5H_E15 = 17.0
PZT5H_LAM11 = 15.1e-9
PZT5H_LAM33 = 13.0e-9


def pzt5h_material(factors=SizeFactors()):
    """Tetragonal PZT-5H with alpha-scaled gradient tensors."""
    l2 = factors.alpha * factors.l0**2
    q2 = factors.alpha * factors.q0**2
    a2 = factors.alpha * factors.a0_sq
    b2 = factors.alpha * factors.b0_sq

    C = np.array(
        [
            [PZT5H_C11, PZT5H_C13, 0.0],
            [PZT5H_C13, PZT5H_C33, 0.0],
            [0.0, 0.0, PZT5H_C44],
        ]
    )
    Cm = l2 * np.array(
        [
            [PZT5H_C11, 0, PZT5H_C13, 0, 0, 0],
            [0, PZT5H_C33, 0, PZT5H_C13, 0, 0],
            [PZT5H_C13, 0, PZT5H_C33, 0, 0, 0],
            [0, PZT5H_C13, 0, PZT5H_C11, 0, 0],
            [0, 0, 0, 0, PZT5H_C44, 0],
            [0, 0, 0, 0, 0, PZT5H_C44],
        ]
    )
    e = np.array(
        [
            [0.0, PZT5H_E31],
            [0.0, PZT5H_E33],
            [PZT5H_E15, 0.0],
        ]
    )
    a = a2 * np.array(
        [
            [0.0, PZT5H_E31],
            [0.0, PZT5H_E33],
            [0.0, PZT5H_E33],
            [0.0, PZT5H_E31],
            [PZT5H_E15, 0.0],
            [PZT5H_E15, 0.0],
        ]
    )
    Lam = np.diag([PZT5H_LAM11, PZT5H_LAM33])
    Phi = q2 * np.diag([PZT5H_LAM11, PZT5H_LAM33, PZT5H_LAM11, PZT5H_LAM33])
    b = b2 * np.hstack([e, e])

    # effective isotropic scalars retained for penalty scaling only
    youngs = PZT5H_C11 - PZT5H_C13**2 / PZT5H_C33
    return MaterialModel(
        lam=PZT5H_C13,
        G=PZT5H_C44,
        l=float(np.sqrt(l2)),
        C_sigma_eps=C,
        C_mu_kappa=Cm,
        e_piezo=e,
        a_flexo=a,
        b_quad=b,
        Phi=Phi,
        Lambda_perm=Lam,
        youngs=float(youngs),
    )


# ---------------------------------------------------------------------------
# poling rotation
# ---------------------------------------------------------------------------


def _rot(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


_EPS_PAIRS = [(0, 0), (1, 1), (0, 1)]  # Voigt strain slots -> index pairs
_KAPPA_TRIPLES = [
    (0, 0, 0),
    (1, 1, 1),
    (0, 1, 1),
    (1, 0, 0),
    (0, 0, 1),
    (1, 0, 1),
]  # (component c, i, j) per kappa slot; mixed slots carry the doubled measure
_V_PAIRS = [(0, 0), (1, 0), (0, 1), (1, 1)]  # (component i, direction k)


def rotate_poling(material, angle):
    """Rotate the coupling and permittivity tensors in-plane by ``angle``.

    Elastic and gradient stiffness are untouched (exact for the half-turn
    poling flips the benchmarks use).  angle = pi flips every odd-rank
    coupling, i.e. the piezoelectric matrix.

    Voigt slots with doubled measures (engineering shear, mixed strain
    gradients) map to tensors with the coefficient on both orientations, so
    the contraction against the doubled component reproduces the Voigt
    product; the inverse map reads a single tensor entry back.
    """
    if angle == 0.0:
        return material
    R = _rot(angle)

    # e_kij: D_k <- eps_ij
    e_t = np.zeros((2, 2, 2))
    for slot, (i, j) in enumerate(_EPS_PAIRS):
        for kk in range(2):
            w = material.e_piezo[slot, kk]
            e_t[kk, i, j] += w
            if i != j:
                e_t[kk, j, i] += w
    e_r = np.einsum("ka,ib,jc,abc->kij", R, R, R, e_t)
    e_new = np.zeros_like(material.e_piezo)
    for slot, (i, j) in enumerate(_EPS_PAIRS):
        for kk in range(2):
            e_new[slot, kk] = e_r[kk, i, j]

    # a: D_k <- kappa(c, i, j)
    a_t = np.zeros((2, 2, 2, 2))  # (k, c, i, j)
    for slot, (c, i, j) in enumerate(_KAPPA_TRIPLES):
        for kk in range(2):
            w = material.a_flexo[slot, kk]
            a_t[kk, c, i, j] += w
            if i != j:
                a_t[kk, c, j, i] += w
    a_r = np.einsum("ka,cb,ic,jd,abcd->kcij", R, R, R, R, a_t)
    a_new = np.zeros_like(material.a_flexo)
    for slot, (c, i, j) in enumerate(_KAPPA_TRIPLES):
        for kk in range(2):
            a_new[slot, kk] = a_r[kk, c, i, j]

    # b: sigma(eps_ij) <- V(m, n)
    b_t = np.zeros((2, 2, 2, 2))  # (i, j, m, n)
    for slot, (i, j) in enumerate(_EPS_PAIRS):
        for col, (m, n) in enumerate(_V_PAIRS):
            w = material.b_quad[slot, col]
            b_t[i, j, m, n] += w
            if i != j:
                b_t[j, i, m, n] += w
    b_r = np.einsum("ia,jb,mc,nd,abcd->ijmn", R, R, R, R, b_t)
    b_new = np.zeros_like(material.b_quad)
    for slot, (i, j) in enumerate(_EPS_PAIRS):
        for col, (m, n) in enumerate(_V_PAIRS):
            b_new[slot, col] = b_r[i, j, m, n]

    Lam_new = R @ material.Lambda_perm @ R.T

    # Phi: V(i,k) x V(j,l)
    Phi_t = np.zeros((2, 2, 2, 2))
    for r_, (i, kk) in enumerate(_V_PAIRS):
        for c_, (j, ll) in enumerate(_V_PAIRS):
            Phi_t[i, kk, j, ll] = material.Phi[r_, c_]
    Phi_r = np.einsum("ia,kb,jc,ld,abcd->ikjl", R, R, R, R, Phi_t)
    Phi_new = np.zeros_like(material.Phi)
    for r_, (i, kk) in enumerate(_V_PAIRS):
        for c_, (j, ll) in enumerate(_V_PAIRS):
            Phi_new[r_, c_] = Phi_r[i, kk, j, ll]

    return replace(
        material,
        e_piezo=e_new,
        a_flexo=a_new,
        b_quad=b_new,
        Lambda_perm=Lam_new,
        Phi=Phi_new,
        poling_angle=material.poling_angle + angle,
    )


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


def constitutive_eval(material, eps, kappa, Efield, Vgrad=None, theory="reduced"):
    """(sigma, mu, D, Q) from the constitutive map; all Voigt layouts."""
    eps = np.asarray(eps, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    E = np.asarray(Efield, dtype=float)
    V = np.zeros(4) if Vgrad is None else np.asarray(Vgrad, dtype=float)
    sigma = material.C_sigma_eps @ eps - material.e_piezo @ E
    if theory == "full":
        sigma = sigma - material.b_quad @ V
    mu = material.C_mu_kappa @ kappa - material.a_flexo @ E
    D = material.Lambda_perm @ E + material.e_piezo.T @ eps + material.a_flexo.T @ kappa
    Q = material.Phi @ V + material.b_quad.T @ eps if theory == "full" else np.zeros(4)
    return sigma, mu, D, Q


def maxwell_stress(Efield, D):
    """Electrostatic stress sigma_ij = sym(E_i D_j) - 0.5 delta_ij E.D, Voigt."""
    E = np.asarray(Efield, dtype=float)
    D = np.asarray(D, dtype=float)
    ed = E @ D if E.ndim == 1 else np.sum(E * D, axis=-1)
    if E.ndim == 1:
        return np.array(
            [
                E[0] * D[0] - 0.5 * ed,
                E[1] * D[1] - 0.5 * ed,
                0.5 * (E[0] * D[1] + E[1] * D[0]),
            ]
        )
    out = np.empty(E.shape[:-1] + (3,))
    out[..., 0] = E[..., 0] * D[..., 0] - 0.5 * ed
    out[..., 1] = E[..., 1] * D[..., 1] - 0.5 * ed
    out[..., 2] = 0.5 * (E[..., 0] * D[..., 1] + E[..., 1] * D[..., 0])
    return out
