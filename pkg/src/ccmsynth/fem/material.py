"""Compressible neo-Hookean law in plane strain or plane stress.

Stored energy ``W = mu/2 (tr C - 3 - 2 ln J) + Lambda/2 (ln J)^2``. All functions
are vectorized over a leading batch axis of 2x2 deformation gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument, NonPositiveJacobian


@dataclass(frozen=True)
class MaterialParams:
    E: float = 2100.0
    nu: float = 0.33
    plane: str = "strain"

    def __post_init__(self):
        if not self.E > 0:
            raise InvalidArgument("Young's modulus must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise InvalidArgument("Poisson's ratio must lie in [0, 0.5)")
        if self.plane not in ("strain", "stress"):
            raise InvalidArgument(f"plane must be 'strain' or 'stress', got {self.plane!r}")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return 2.0 * self.mu * self.nu / (1.0 - 2.0 * self.nu)


def _inv_det(F):
    J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    Finv = np.empty_like(F)
    Finv[..., 0, 0] = F[..., 1, 1]
    Finv[..., 1, 1] = F[..., 0, 0]
    Finv[..., 0, 1] = -F[..., 0, 1]
    Finv[..., 1, 0] = -F[..., 1, 0]
    return Finv / J[..., None, None], J


def _stretch33(F, J, mat: MaterialParams):
    """Out-of-plane stretch making sigma_33 vanish (plane stress); ones for plane strain."""
    if mat.plane == "strain":
        return np.ones_like(J)
    mu, lam = mat.mu, mat.lam
    s = np.ones_like(J)
    for _ in range(50):
        g = mu * (s * s - 1.0) + lam * np.log(J * s)
        dg = 2.0 * mu * s + lam / s
        step = g / dg
        s = np.maximum(s - step, 0.5 * s)
        if np.max(np.abs(step)) < 1e-15:
            break
    return s


def strain_energy(F, mat: MaterialParams) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    Finv, J = _inv_det(F)
    if np.any(J <= 0):
        raise NonPositiveJacobian()
    s = _stretch33(F, J, mat)
    lnJ = np.log(J * s)
    trC = np.einsum("...ij,...ij->...", F, F) + s * s
    return 0.5 * mat.mu * (trC - 3.0 - 2.0 * lnJ) + 0.5 * mat.lam * lnJ**2


def first_piola(F, mat: MaterialParams, tangent: bool = True):
    """First Piola-Kirchhoff stress P (B,2,2) and, optionally, dP/dF (B,2,2,2,2)."""
    F = np.asarray(F, dtype=float)
    Finv, J = _inv_det(F)
    if np.any(J <= 0):
        raise NonPositiveJacobian()
    mu, lam = mat.mu, mat.lam
    s = _stretch33(F, J, mat)
    lnJ = np.log(J * s)
    FinvT = np.swapaxes(Finv, -1, -2)
    P = mu * (F - FinvT) + (lam * lnJ)[..., None, None] * FinvT
    if not tangent:
        return P, None
    eye = np.eye(2)
    # A_iJkL = mu d_ik d_JL + (mu - lam lnJ) Finv_Li Finv_Jk + lam Finv_Ji Finv_Lk
    A = mu * np.einsum("ik,JL->iJkL", eye, eye)[None]
    A = A + (mu - lam * lnJ)[:, None, None, None, None] * (FinvT[:, :, None, None, :] * Finv[:, None, :, :, None])
    A = A + lam * (FinvT[:, :, :, None, None] * FinvT[:, None, None, :, :])
    if mat.plane == "stress":
        # condense the out-of-plane stretch: ds/dF = -lam F^-T / (2 mu s + lam / s)
        ds = -(lam / (2.0 * mu * s + lam / s))[:, None, None] * FinvT
        dP_ds = (lam / s)[:, None, None] * FinvT
        A = A + np.einsum("bij,bkl->bijkl", dP_ds, ds)
    return P, A


def cauchy_stress(F, mat: MaterialParams) -> np.ndarray:
    """sigma = mu/J (F F^T - I) + Lambda/J ln(J) I for a single F or a batch."""
    F = np.asarray(F, dtype=float)
    single = F.ndim == 2
    Fb = F[None] if single else F
    _, J = _inv_det(Fb)
    if np.any(J <= 0):
        raise NonPositiveJacobian()
    if mat.plane == "strain":
        b = np.einsum("bij,bkj->bik", Fb, Fb)
        sig = (mat.mu / J)[:, None, None] * (b - np.eye(2)) + (mat.lam * np.log(J) / J)[:, None, None] * np.eye(2)
    else:
        P, _ = first_piola(Fb, mat, tangent=False)
        s = _stretch33(Fb, J, mat)
        sig = np.einsum("bij,bkj->bik", P, Fb) / (J * s)[:, None, None]
    return sig[0] if single else sig
