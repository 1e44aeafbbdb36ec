"""Black-box constitutive algorithms with consistent tangents.

Every law accepts displacement gradients of shape ``(..., 2, 2)`` and returns
stresses ``(..., 2, 2)`` and tangents ``(..., 2, 2, 2, 2)`` where
``tangent[..., i, j, k, l] = d stress_ij / d grad_u_kl``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

I2 = np.eye(2)
I_VOL = np.einsum("ij,kl->ijkl", I2, I2)
I_SYM = 0.5 * (np.einsum("ik,jl->ijkl", I2, I2) + np.einsum("il,jk->ijkl", I2, I2))
I_IDENT = np.einsum("ik,jl->ijkl", I2, I2)
I_TRANS = np.einsum("il,jk->ijkl", I2, I2)

_I3 = np.eye(3)
_I3_VOL = np.einsum("ij,kl->ijkl", _I3, _I3)
_I3_SYM = 0.5 * (np.einsum("ik,jl->ijkl", _I3, _I3) + np.einsum("il,jk->ijkl", _I3, _I3))
_I3_DEV = _I3_SYM - _I3_VOL / 3.0


class ConstitutiveError(ValueError):
    pass


class InvalidInputError(ConstitutiveError):
    pass


class InvertedElementError(ConstitutiveError):
    """det(I + grad u) <= 0; the Newton step that produced it must be rejected."""


@dataclass(frozen=True)
class MaterialState:
    """J2 history; tensors stored as ``[xx, yy, xy, zz]``."""

    plastic_strain: np.ndarray
    back_stress: np.ndarray
    gamma: np.ndarray

    @classmethod
    def zeros(cls, n: int | None = None) -> MaterialState:
        shape = () if n is None else (n,)
        return cls(np.zeros(shape + (4,)), np.zeros(shape + (4,)), np.zeros(shape))

    def __getitem__(self, idx) -> MaterialState:
        return MaterialState(self.plastic_strain[idx], self.back_stress[idx], self.gamma[idx])

    def __len__(self) -> int:
        return len(self.gamma)


@dataclass
class ConstitutiveResponse:
    stress: np.ndarray
    tangent: np.ndarray
    new_state: MaterialState | None = None
    stress_zz: np.ndarray | None = None


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...kl->...ijkl", a, b)


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("non-finite input to constitutive law")


# small strain elasticity -------------------------------------------------------


def eval_linear_elastic(grad_u, lam: float, mu: float) -> ConstitutiveResponse:
    grad_u = np.asarray(grad_u, dtype=float)
    eps = sym(grad_u)
    stress = lam * _trace(eps)[..., None, None] * I2 + 2.0 * mu * eps
    tangent = np.broadcast_to(lam * I_VOL + 2.0 * mu * I_SYM, grad_u.shape[:-2] + (2, 2, 2, 2)).copy()
    return ConstitutiveResponse(stress, tangent)


def carreau_mu(rho):
    return 0.75 * (1.0 + (1.0 + rho**2) ** -0.5) * 1e4


def carreau_dmu(rho):
    return -0.75 * rho * (1.0 + rho**2) ** -1.5 * 1e4


def carreau_lam(rho):
    # shear function entering in units of 1e4 MPa, see HenckyParams
    return 0.75 * (1.0 - 2.0 * carreau_mu(rho) / 1e4) * 1e4


def carreau_dlam(rho):
    return -1.5 * carreau_dmu(rho)


@dataclass(frozen=True)
class HenckyParams:
    """Lame functions of the deviatoric strain norm and their derivatives.

    The defaults are the Carreau-type shear function and the matching
    ``lam = 3/4 (1 - 2 mu / 1e4) 1e4`` in MPa.
    """

    mu: Callable = carreau_mu
    dmu: Callable = carreau_dmu
    lam: Callable = carreau_lam
    dlam: Callable = carreau_dlam


def eval_hencky_von_mises(grad_u, params: HenckyParams = HenckyParams()) -> ConstitutiveResponse:
    grad_u = np.asarray(grad_u, dtype=float)
    eps = sym(grad_u)
    tr = _trace(eps)
    dev = eps - 0.5 * tr[..., None, None] * I2
    rho = np.sqrt(np.einsum("...ij,...ij->...", dev, dev))
    mu, lam = params.mu(rho), params.lam(rho)
    dmu, dlam = params.dmu(rho), params.dlam(rho)
    stress = lam[..., None, None] * tr[..., None, None] * I2 + 2.0 * mu[..., None, None] * eps
    safe = np.where(rho > 0.0, rho, 1.0)
    drho = np.where((rho > 0.0)[..., None, None], dev / safe[..., None, None], 0.0)
    chain = dlam[..., None, None] * tr[..., None, None] * I2 + 2.0 * dmu[..., None, None] * eps
    tangent = (
        lam[..., None, None, None, None] * I_VOL
        + 2.0 * mu[..., None, None, None, None] * I_SYM
        + _outer(chain, drho)
    )
    return ConstitutiveResponse(stress, tangent)


BENCHMARK_SCALE = 3e4


def eval_benchmark(grad_u) -> ConstitutiveResponse:
    """``sigma = 3 (1 + |eps|^2) 1e4 eps`` (MPa)."""
    grad_u = np.asarray(grad_u, dtype=float)
    eps = sym(grad_u)
    nrm2 = np.einsum("...ij,...ij->...", eps, eps)
    mu_hat = BENCHMARK_SCALE * (1.0 + nrm2)
    stress = mu_hat[..., None, None] * eps
    tangent = mu_hat[..., None, None, None, None] * I_SYM + 2.0 * BENCHMARK_SCALE * _outer(eps, eps)
    return ConstitutiveResponse(stress, tangent)


# finite strain ----------------------------------------------------------------


def _inv2(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    adj = np.empty_like(F)
    adj[..., 0, 0] = F[..., 1, 1]
    adj[..., 1, 1] = F[..., 0, 0]
    adj[..., 0, 1] = -F[..., 0, 1]
    adj[..., 1, 0] = -F[..., 1, 0]
    return J, adj / J[..., None, None]


def eval_neo_hookean(grad_u, lam: float, mu: float, variant: str = "default") -> ConstitutiveResponse:
    """First Piola-Kirchhoff stress of a compressible neo-Hookean solid (plane strain).

    ``default``: ``P = mu (F - F^-T) + lam ln(J) F^-T``, stress free at F = I.
    ``sign_fixed``: ``P = mu (F - F^-T) + lam (J - 1) J F^-T``, i.e. volumetric
    function ``s - 1`` weighted by ``s`` and stress free at F = I.
    ``as_printed``: ``P = mu (F + F^-T) + lam (J - 1) J F^-T``.
    """
    grad_u = np.asarray(grad_u, dtype=float)
    _check_finite(grad_u)
    F = I2 + grad_u
    J, Finv = _inv2(F)
    if np.any(J <= 0.0):
        raise InvertedElementError(f"det F = {float(np.min(J)):.3g} <= 0")
    FinvT = np.swapaxes(Finv, -1, -2)
    # d(F^-T)_iJ / dF_kL = -Finv_Jk Finv_Li
    dFinvT = -np.einsum("...jk,...li->...ijkl", Finv, Finv)
    cof = _outer(FinvT, FinvT)  # Finv_Ji Finv_Lk
    J4 = J[..., None, None, None, None]
    if variant == "default":
        lnJ = np.log(J)
        stress = mu * (F - FinvT) + lam * lnJ[..., None, None] * FinvT
        tangent = mu * I_IDENT - (mu - lam * lnJ[..., None, None, None, None]) * dFinvT + lam * cof
    elif variant == "sign_fixed":
        g = (J - 1.0) * J
        stress = mu * (F - FinvT) + lam * g[..., None, None] * FinvT
        tangent = mu * I_IDENT - (mu - lam * g[..., None, None, None, None]) * dFinvT + lam * (2.0 * J4 - 1.0) * J4 * cof
    elif variant == "as_printed":
        g = (J - 1.0) * J
        stress = mu * (F + FinvT) + lam * g[..., None, None] * FinvT
        tangent = mu * I_IDENT + (mu + lam * g[..., None, None, None, None]) * dFinvT + lam * (2.0 * J4 - 1.0) * J4 * cof
    else:
        raise ValueError(f"unknown neo-Hookean variant {variant!r}")
    return ConstitutiveResponse(stress, tangent)


# J2 plasticity -----------------------------------------------------------------


@dataclass(frozen=True)
class J2Params:
    E: float = 70.0
    nu: float = 0.2
    sigma_y0: float = 0.8
    H_iso: float = 10.0
    H_kin: float = 10.0

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def kappa(self) -> float:
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def lam(self) -> float:
        return self.kappa - 2.0 * self.mu / 3.0


def _to3(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 0] = v[..., 0]
    out[..., 1, 1] = v[..., 1]
    out[..., 0, 1] = out[..., 1, 0] = v[..., 2]
    out[..., 2, 2] = v[..., 3]
    return out


def _from3(t: np.ndarray) -> np.ndarray:
    return np.stack([t[..., 0, 0], t[..., 1, 1], t[..., 0, 1], t[..., 2, 2]], axis=-1)


SQRT23 = math.sqrt(2.0 / 3.0)


def j2_return_map(grad_u_old, state: MaterialState, grad_u_new, params: J2Params) -> ConstitutiveResponse:
    """Plane-strain radial return with linear isotropic and kinematic hardening.

    The update depends only on the committed ``state`` and ``grad_u_new``;
    ``grad_u_old`` is accepted so the signature matches the generic
    incremental algorithm. ``state.gamma`` is the accumulated plastic
    multiplier; the isotropic hardening variable is ``sqrt(2/3) * gamma``.
    """
    grad_u_new = np.asarray(grad_u_new, dtype=float)
    _check_finite(grad_u_new, state.plastic_strain, state.back_stress, state.gamma)
    if grad_u_old is not None:
        _check_finite(np.asarray(grad_u_old, dtype=float))
    mu, kappa = params.mu, params.kappa
    hard = params.H_iso + params.H_kin

    eps = np.zeros(grad_u_new.shape[:-2] + (3, 3))
    eps[..., :2, :2] = sym(grad_u_new)
    tr = _trace(eps)
    e = eps - tr[..., None, None] * _I3 / 3.0
    ep = _to3(state.plastic_strain)
    beta = _to3(state.back_stress)
    s_trial = 2.0 * mu * (e - ep)
    xi = s_trial - beta
    xi_norm = np.sqrt(np.einsum("...ij,...ij->...", xi, xi))
    radius = SQRT23 * (params.sigma_y0 + params.H_iso * SQRT23 * state.gamma)
    f = xi_norm - radius
    plastic = f > 0.0

    dgamma = np.where(plastic, f / (2.0 * mu + 2.0 * hard / 3.0), 0.0)
    safe = np.where(plastic, xi_norm, 1.0)
    n = np.where(plastic[..., None, None], xi / safe[..., None, None], 0.0)
    s = s_trial - 2.0 * mu * dgamma[..., None, None] * n
    sigma = s + kappa * tr[..., None, None] * _I3

    theta = 1.0 - 2.0 * mu * dgamma / safe
    theta_bar = np.where(plastic, 1.0 / (1.0 + hard / (3.0 * mu)) - (1.0 - theta), 0.0)
    C = (
        kappa * _I3_VOL
        + 2.0 * mu * theta[..., None, None, None, None] * _I3_DEV
        - 2.0 * mu * theta_bar[..., None, None, None, None] * np.einsum("...ij,...kl->...ijkl", n, n)
    )
    if np.all(~plastic):
        new_state = state
    else:
        p = plastic[..., None]
        new_state = MaterialState(
            np.where(p, _from3(ep + dgamma[..., None, None] * n), state.plastic_strain),
            np.where(p, _from3(beta + (2.0 / 3.0) * params.H_kin * dgamma[..., None, None] * n), state.back_stress),
            np.where(plastic, state.gamma + dgamma, state.gamma),
        )
    return ConstitutiveResponse(
        stress=sigma[..., :2, :2],
        tangent=C[..., :2, :2, :2, :2].copy(),
        new_state=new_state,
        stress_zz=sigma[..., 2, 2],
    )


def yield_function(stress_dev3: np.ndarray, state: MaterialState, params: J2Params) -> np.ndarray:
    xi = stress_dev3 - _to3(state.back_stress)
    return np.sqrt(np.einsum("...ij,...ij->...", xi, xi)) - SQRT23 * (
        params.sigma_y0 + params.H_iso * SQRT23 * state.gamma
    )


def full_stress(resp: ConstitutiveResponse) -> np.ndarray:
    """3x3 stress from an in-plane response with its out-of-plane component."""
    s = np.zeros(resp.stress.shape[:-2] + (3, 3))
    s[..., :2, :2] = resp.stress
    if resp.stress_zz is not None:
        s[..., 2, 2] = resp.stress_zz
    return s


# law objects -------------------------------------------------------------------


class Law:
    """Elastic law: ``law(grad_u) -> ConstitutiveResponse``."""

    inelastic = False
    name = "law"

    def __call__(self, grad_u) -> ConstitutiveResponse:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearElastic(Law):
    lam: float = 1.0
    mu: float = 1.0
    name: str = "linear"

    def __call__(self, grad_u):
        return eval_linear_elastic(grad_u, self.lam, self.mu)


@dataclass(frozen=True)
class HenckyVonMises(Law):
    params: HenckyParams = field(default_factory=HenckyParams)
    name: str = "hencky"

    def __call__(self, grad_u):
        return eval_hencky_von_mises(grad_u, self.params)


@dataclass(frozen=True)
class Benchmark(Law):
    name: str = "benchmark"

    def __call__(self, grad_u):
        return eval_benchmark(grad_u)


@dataclass(frozen=True)
class NeoHookean(Law):
    lam: float = 5.1086e4
    mu: float = 2.6316e4
    variant: str = "default"
    name: str = "neo_hookean"

    def __call__(self, grad_u):
        return eval_neo_hookean(grad_u, self.lam, self.mu, self.variant)


@dataclass(frozen=True)
class J2Plasticity:
    """Inelastic law: ``law(grad_old, state, grad_new) -> ConstitutiveResponse``."""

    params: J2Params = field(default_factory=J2Params)
    name: str = "j2"
    inelastic = True

    def __call__(self, grad_u_old, state, grad_u_new):
        return j2_return_map(grad_u_old, state, grad_u_new, self.params)

    def initial_state(self, n: int) -> MaterialState:
        return MaterialState.zeros(n)

    def elastic(self) -> LinearElastic:
        return LinearElastic(self.params.lam, self.params.mu)


def with_state(law: J2Plasticity, state: MaterialState) -> Callable:
    """Freeze the history so the return map can be probed as a function of grad_u."""
    return lambda g: law(None, state, g)


# verification oracle -------------------------------------------------------------


def tangent_fd_oracle(law: Callable, grad_u, step: float = 1e-6) -> np.ndarray:
    """Central-difference tangent, one column per component of ``grad_u``."""
    grad_u = np.asarray(grad_u, dtype=float)
    scale = 1.0 + np.abs(grad_u).max(axis=(-2, -1))
    h = step * scale
    out = np.empty(grad_u.shape[:-2] + (2, 2, 2, 2))
    for k in range(2):
        for l in range(2):
            d = np.zeros_like(grad_u)
            d[..., k, l] = h
            plus = law(grad_u + d).stress
            minus = law(grad_u - d).stress
            out[..., :, :, k, l] = (plus - minus) / (2.0 * np.asarray(h)[..., None, None])
    return out


def max_entry(tangent: np.ndarray) -> np.ndarray:
    return np.abs(tangent).max(axis=(-4, -3, -2, -1))


def frobenius(tangent: np.ndarray) -> np.ndarray:
    return np.sqrt((tangent**2).sum(axis=(-4, -3, -2, -1)))


__all__ = [
    "ConstitutiveResponse",
    "MaterialState",
    "J2Params",
    "HenckyParams",
    "LinearElastic",
    "HenckyVonMises",
    "Benchmark",
    "NeoHookean",
    "J2Plasticity",
    "eval_linear_elastic",
    "eval_hencky_von_mises",
    "eval_benchmark",
    "eval_neo_hookean",
    "j2_return_map",
    "tangent_fd_oracle",
]
