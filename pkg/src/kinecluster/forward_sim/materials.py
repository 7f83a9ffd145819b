"""Hyperelastic strain-energy kernels.

The compressible neo-Hookean model drives the forward solves. It is written
for 2x2 in-plane deformation gradients embedded in 3D with ``F33 = 1``
(plane strain). All neo-Hookean functions broadcast over leading axes.

The Holzapfel-Ogden isochoric energy is provided as a standalone kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvertedStateError, ValidationError


def lame_parameters(E, nu):
    """Return ``(mu, lam)`` from Young's modulus and Poisson's ratio."""
    if E <= 0:
        raise ValidationError("Young's modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise ValidationError("Poisson's ratio must lie in (-1, 0.5)")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


def _det2(F):
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def _inv2(F, J):
    inv = np.empty_like(F)
    inv[..., 0, 0] = F[..., 1, 1]
    inv[..., 1, 1] = F[..., 0, 0]
    inv[..., 0, 1] = -F[..., 0, 1]
    inv[..., 1, 0] = -F[..., 1, 0]
    return inv / J[..., None, None]


def _checked_det(F):
    J = _det2(F)
    if np.any(~(J > 0)):
        raise InvertedStateError("deformation gradient has det F <= 0")
    return J


def neo_hookean_energy(F, mu, lam):
    """Plane-strain compressible neo-Hookean energy density.

    ``psi = mu/2 (tr(F^T F) - 3) - mu ln J + lam/2 (ln J)^2`` with the 2x2
    ``F`` embedded as a 3x3 tensor whose out-of-plane stretch is 1.
    """
    F = np.asarray(F, dtype=float)
    J = _checked_det(F)
    lnJ = np.log(J)
    trC = np.sum(F * F, axis=(-2, -1)) + 1.0
    return 0.5 * mu * (trC - 3.0) - mu * lnJ + 0.5 * lam * lnJ**2


def neo_hookean_stress(F, mu, lam):
    """First Piola-Kirchhoff stress ``dpsi/dF`` (in-plane block)."""
    F = np.asarray(F, dtype=float)
    J = _checked_det(F)
    Finv_T = np.swapaxes(_inv2(F, J), -1, -2)
    mu = np.asarray(mu, dtype=float)
    coef = np.asarray(lam * np.log(J) - mu)[..., None, None]
    return mu[..., None, None] * F + coef * Finv_T


def neo_hookean_tangent(F, mu, lam):
    """Material tangent ``A[i, J, k, L] = d^2 psi / dF_iJ dF_kL``."""
    F = np.asarray(F, dtype=float)
    J = _checked_det(F)
    Finv = _inv2(F, J)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    lead = F.shape[:-2]
    mu_b = np.broadcast_to(mu, lead)[..., None, None, None, None]
    lam_b = np.broadcast_to(lam, lead)[..., None, None, None, None]
    lnJ = np.log(J)[..., None, None, None, None]
    eye = np.eye(2)
    # (i,J,k,L): mu d_ik d_JL + lam Finv_Ji Finv_Lk + (mu - lam lnJ) Finv_Jk Finv_Li
    ident = np.einsum("ik,JL->iJkL", eye, eye)
    vol = np.einsum("...Ji,...Lk->...iJkL", Finv, Finv)
    geo = np.einsum("...Jk,...Li->...iJkL", Finv, Finv)
    return mu_b * ident + lam_b * vol + (mu_b - lam_b * lnJ) * geo


# -- Holzapfel-Ogden ---------------------------------------------------------


@dataclass(frozen=True)
class HolzapfelOgdenParams:
    a: float
    b: float
    a_f: float
    b_f: float
    a_s: float
    b_s: float
    a_fs: float
    b_fs: float

    def __post_init__(self):
        for name in ("b", "b_f", "b_s", "b_fs"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("a", "a_f", "a_s", "a_fs"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")


@dataclass(frozen=True)
class HolzapfelOgdenEnergy:
    W_g: float
    W_f: float
    W_s: float
    W_fs: float
    I1: float
    I4f: float
    I4s: float
    I8fs: float

    @property
    def total(self):
        return self.W_g + self.W_f + self.W_s + self.W_fs


def isochoric_cauchy_green(F):
    """``Cbar = Fbar^T Fbar`` with ``Fbar = J^(-1/3) F`` for a 3x3 ``F``."""
    F = np.asarray(F, dtype=float)
    J = np.linalg.det(F)
    if J <= 0:
        raise InvertedStateError("deformation gradient has det F <= 0")
    Fbar = J ** (-1.0 / 3.0) * F
    return Fbar.T @ Fbar


def holzapfel_ogden_isochoric_energy(Cbar, f0, s0, params: HolzapfelOgdenParams, det_tol=1e-10):
    """Isochoric Holzapfel-Ogden energy and its four contributions."""
    Cbar = np.asarray(Cbar, dtype=float)
    f0 = np.asarray(f0, dtype=float)
    s0 = np.asarray(s0, dtype=float)
    if Cbar.shape != (3, 3):
        raise ValidationError("Cbar must be 3x3")
    if not np.allclose(Cbar, Cbar.T, rtol=0, atol=1e-12):
        raise ValidationError("Cbar must be symmetric")
    if abs(np.linalg.det(Cbar) - 1.0) > det_tol:
        raise ValidationError("Cbar must have unit determinant")
    if np.linalg.eigvalsh(Cbar).min() <= 0:
        raise ValidationError("Cbar must be positive definite")
    for name, vec in (("f0", f0), ("s0", s0)):
        if vec.shape != (3,) or abs(np.linalg.norm(vec) - 1.0) > 1e-10:
            raise ValidationError(f"{name} must be a unit 3-vector")

    p = params
    I1 = float(np.trace(Cbar))
    I4f = float(f0 @ Cbar @ f0)
    I4s = float(s0 @ Cbar @ s0)
    I8fs = float(f0 @ Cbar @ s0)
    W_g = p.a / (2 * p.b) * np.expm1(p.b * (I1 - 3.0))
    W_f = p.a_f / (2 * p.b_f) * np.expm1(p.b_f * (I4f - 1.0) ** 2)
    W_s = p.a_s / (2 * p.b_s) * np.expm1(p.b_s * (I4s - 1.0) ** 2)
    W_fs = p.a_fs / (2 * p.b_fs) * np.expm1(p.b_fs * I8fs**2)
    return HolzapfelOgdenEnergy(float(W_g), float(W_f), float(W_s), float(W_fs), I1, I4f, I4s, I8fs)
