"""Stored energy densities on 2x2 deformation gradients.

Two frame-indifferent densities vanishing exactly on SO(2) are provided:

* :class:`QuadraticDistance` -- ``W(F) = c_w dist^2(F, SO(2))``
* :class:`StVenantKirchhoff` -- ``W(F) = mu |E|^2 + lam/2 (tr E)^2`` with
  ``E = (F^T F - I)/2``, plus ``mu * max(0, -det F)^2`` so that reflections
  are not energy minimisers.

All evaluators are vectorised over leading axes: ``F`` has shape
``(..., 2, 2)``. Fourth-order tangents act on row-major vectorised matrices
``vec(F) = (F11, F12, F21, F22)`` and have shape ``(..., 4, 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "DegenerateFormError",
    "ConsistencyError",
    "QuadraticDistance",
    "StVenantKirchhoff",
    "StoredEnergyModel",
    "dist_so2",
    "dist2_so2",
    "sym",
    "eval_w",
    "hessian_at_identity",
    "relaxed_alpha",
    "quadratic_form",
    "rotation",
    "model_from_config",
]

FD_STEP = 1e-4
FD_RTOL = 1e-5


class DegenerateFormError(ValueError):
    """The quadratic form is not positive definite where it has to be."""


class ConsistencyError(RuntimeError):
    """Analytic derivative disagrees with its finite-difference check."""


def rotation(theta):
    """Rotation matrices for an array of angles, shape ``(..., 2, 2)``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def sym(X):
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def _conformal_split(F):
    # F = A + B with A = [[p, -q], [q, p]] and B = [[u, v], [v, -u]].
    p = 0.5 * (F[..., 0, 0] + F[..., 1, 1])
    q = 0.5 * (F[..., 1, 0] - F[..., 0, 1])
    u = 0.5 * (F[..., 0, 0] - F[..., 1, 1])
    v = 0.5 * (F[..., 0, 1] + F[..., 1, 0])
    return p, q, u, v


def dist2_so2(F):
    """Squared Frobenius distance to SO(2).

    Uses ``dist^2 = 2 (rho - 1)^2 + 2 tau^2`` where ``rho`` and ``tau`` are
    the moduli of the conformal and anticonformal parts of ``F``. This is
    algebraically the same as ``|F|^2 + 2 - 2 sqrt((F11+F22)^2 + (F21-F12)^2)``
    but free of cancellation near SO(2).
    """
    F = np.asarray(F, dtype=float)
    p, q, u, v = _conformal_split(F)
    rho = np.hypot(p, q)
    return 2.0 * (rho - 1.0) ** 2 + 2.0 * (u * u + v * v)


def dist_so2(F):
    return np.sqrt(dist2_so2(F))


def nearest_rotation(F):
    """Closest element of SO(2); identity where the conformal part vanishes."""
    F = np.asarray(F, dtype=float)
    p, q, _, _ = _conformal_split(F)
    rho = np.hypot(p, q)
    safe = rho > 0
    c = np.where(safe, p / np.where(safe, rho, 1.0), 1.0)
    s = np.where(safe, q / np.where(safe, rho, 1.0), 0.0)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _vec(F):
    return F.reshape(F.shape[:-2] + (4,))


def quadratic_form(Q, X):
    """Evaluate ``vec(X)^T Q vec(X)`` for matrices ``X`` of shape (..., 2, 2)."""
    x = _vec(np.asarray(X, dtype=float))
    return np.einsum("...i,ij,...j->...", x, Q, x)


# d cof(F) / d vec(F), where cof(F) = d det(F) / dF
_DCOF = np.array(
    [[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], dtype=float
)
# vec(F) -> (p, q)
_LPQ = 0.5 * np.array([[1, 0, 0, 1], [0, -1, 1, 0]], dtype=float)


@dataclass(frozen=True)
class _ModelBase:
    kind: str = field(init=False, default="")

    def energy(self, F):
        raise NotImplementedError

    def stress(self, F):
        raise NotImplementedError

    def tangent(self, F):
        raise NotImplementedError

    @property
    def lower_bound_constant(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    @cached_property
    def hessian_identity(self) -> np.ndarray:
        Q = self.tangent(np.eye(2))
        _check_hessian_fd(self, Q)
        return Q


@dataclass(frozen=True)
class QuadraticDistance(_ModelBase):
    """``W(F) = c_w dist^2(F, SO(2))``; Hessian at Id is ``2 c_w |e(X)|^2``."""

    c_w: float = 1.0
    kind: str = field(init=False, default="quadratic_distance")

    def __post_init__(self):
        if not self.c_w > 0:
            raise ValueError(f"c_w must be positive, got {self.c_w}")

    def energy(self, F):
        return self.c_w * dist2_so2(F)

    def stress(self, F):
        F = np.asarray(F, dtype=float)
        return 2.0 * self.c_w * (F - nearest_rotation(F))

    def tangent(self, F):
        F = np.asarray(F, dtype=float)
        p, q, _, _ = _conformal_split(F)
        rho = np.maximum(np.hypot(p, q), 1e-300)
        # unit vector orthogonal to (p, q), pulled back to vec(F)
        t = np.stack([-q / rho, p / rho], -1)
        g = t @ _LPQ
        outer = g[..., :, None] * g[..., None, :]
        return 2.0 * self.c_w * (np.eye(4) - (2.0 / rho)[..., None, None] * outer)

    @property
    def lower_bound_constant(self) -> float:
        return self.c_w

    def params(self) -> dict:
        return {"c_w": self.c_w}


@dataclass(frozen=True)
class StVenantKirchhoff(_ModelBase):
    """Saint Venant-Kirchhoff density with an orientation penalty.

    ``mu * max(0, -det F)^2`` is added so that the density is non-degenerate
    away from SO(2); it vanishes identically for ``det F >= 0`` and therefore
    does not affect the Hessian at the identity. ``W >= (mu/10) dist^2``
    holds on all of R^{2x2} (checked by sampling in the test suite).
    """

    mu: float = 1.0
    lam: float = 1.0
    kind: str = field(init=False, default="st_venant_kirchhoff")

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    @property
    def penalty(self) -> float:
        return self.mu

    def _green(self, F):
        C = np.swapaxes(F, -1, -2) @ F
        return 0.5 * (C - np.eye(2))

    def energy(self, F):
        F = np.asarray(F, dtype=float)
        E = self._green(F)
        trE = E[..., 0, 0] + E[..., 1, 1]
        m = np.maximum(0.0, -np.linalg.det(F))
        return (
            self.mu * np.sum(E * E, axis=(-2, -1))
            + 0.5 * self.lam * trE**2
            + self.penalty * m**2
        )

    def stress(self, F):
        F = np.asarray(F, dtype=float)
        E = self._green(F)
        trE = E[..., 0, 0] + E[..., 1, 1]
        S = 2.0 * self.mu * E + self.lam * trE[..., None, None] * np.eye(2)
        m = np.maximum(0.0, -np.linalg.det(F))
        cof = np.stack(
            [np.stack([F[..., 1, 1], -F[..., 1, 0]], -1),
             np.stack([-F[..., 0, 1], F[..., 0, 0]], -1)],
            -2,
        )
        return F @ S - 2.0 * self.penalty * m[..., None, None] * cof

    def tangent(self, F):
        F = np.asarray(F, dtype=float)
        E = self._green(F)
        trE = E[..., 0, 0] + E[..., 1, 1]
        S = 2.0 * self.mu * E + self.lam * trE[..., None, None] * np.eye(2)
        I2 = np.eye(2)
        FFt = F @ np.swapaxes(F, -1, -2)
        # A[i,J,k,L] = d P_iJ / d F_kL
        A = (
            np.einsum("ik,...JL->...iJkL", I2, S)
            + self.lam * np.einsum("...iJ,...kL->...iJkL", F, F)
            + self.mu * np.einsum("...ik,JL->...iJkL", FFt, I2)
            + self.mu * np.einsum("...iL,...kJ->...iJkL", F, F)
        )
        A = A.reshape(F.shape[:-2] + (4, 4))
        m = np.maximum(0.0, -np.linalg.det(F))
        cof = np.stack([F[..., 1, 1], -F[..., 1, 0], -F[..., 0, 1], F[..., 0, 0]], -1)
        active = (m > 0)[..., None, None]
        pen = 2.0 * self.penalty * (
            cof[..., :, None] * cof[..., None, :] - m[..., None, None] * _DCOF
        )
        return A + np.where(active, pen, 0.0)

    @property
    def lower_bound_constant(self) -> float:
        return self.mu / 10.0

    def params(self) -> dict:
        return {"mu": self.mu, "lambda": self.lam}


StoredEnergyModel = QuadraticDistance | StVenantKirchhoff


def _check_hessian_fd(model, Q, n_dirs: int = 12, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    I = np.eye(2)
    for _ in range(n_dirs):
        X = rng.standard_normal((2, 2))
        X /= np.linalg.norm(X)
        t = FD_STEP
        fd = (model.energy(I + t * X) - 2 * model.energy(I) + model.energy(I - t * X)) / t**2
        exact = quadratic_form(Q, X)
        if abs(fd - exact) > FD_RTOL * max(1.0, abs(exact)):
            raise ConsistencyError(
                f"{model.kind}: Hessian at Id {exact:.12g} vs finite difference {fd:.12g}"
            )


def eval_w(model: StoredEnergyModel, F):
    return model.energy(F)


def hessian_at_identity(model: StoredEnergyModel) -> np.ndarray:
    """4x4 matrix of Q with ``W(Id + X) = Q(X)/2 + o(|X|^2)``."""
    return model.hessian_identity


def relaxed_alpha(model: StoredEnergyModel) -> tuple[float, np.ndarray]:
    """Relaxed bending constant and the linear minimiser map.

    Returns ``(alpha, g1)`` where ``alpha = min_g Q(e1 x e1 + g x e2)`` and
    ``g1`` is the minimiser, so that the minimiser for ``lam e1 x e1`` is
    ``lam * g1``.
    """
    Q = hessian_at_identity(model)
    x0 = np.array([1.0, 0.0, 0.0, 0.0])
    # g x e2 fills the second column: vec entries 1 (F12) and 3 (F22)
    B = np.zeros((4, 2))
    B[1, 0] = 1.0
    B[3, 1] = 1.0
    K = B.T @ Q @ B
    rhs = -B.T @ Q @ x0
    eig = np.linalg.eigvalsh(0.5 * (K + K.T))
    if eig.min() <= 1e-12 * max(1.0, eig.max()):
        raise DegenerateFormError(f"stationarity system singular, eigenvalues {eig}")
    g1 = np.linalg.solve(K, rhs)
    x = x0 + B @ g1
    alpha = float(x @ Q @ x)
    if not alpha > 0:
        raise DegenerateFormError(f"relaxed constant not positive: {alpha}")
    return alpha, g1


def model_from_config(block: dict) -> StoredEnergyModel:
    """Build a model from a ``material`` config block.

    Keys: ``kind`` in {quadratic_distance, svk}; ``c_w``; ``mu``; ``lambda``.
    """
    kind = str(block.get("kind", "quadratic_distance")).lower()
    if kind in ("quadratic_distance", "quadraticdistance", "qd"):
        return QuadraticDistance(c_w=float(block.get("c_w", 1.0)))
    if kind in ("svk", "st_venant_kirchhoff", "stvenantkirchhoff"):
        return StVenantKirchhoff(mu=float(block.get("mu", 1.0)), lam=float(block.get("lambda", 1.0)))
    raise ValueError(f"unknown material.kind {kind!r}")
