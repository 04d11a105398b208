"""Dense Newton / SQP iteration for small smooth problems.

Minimises ``f(x)`` over the free entries of ``x`` subject to ``c(x) = 0``
using exact Hessians, a null-space step with eigenvalue-modified reduced
Hessian and an l1 merit backtracking line search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class NewtonResult:
    x: np.ndarray
    f: float
    grad_norm: float
    constraint_norm: float
    iterations: int
    converged: bool
    merit_history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    message: str = ""


class SmoothProblem:
    """Interface expected by :func:`newton_minimize`. Override as needed."""

    n_constraints = 0

    def energy(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def constraints(self, x):
        return np.zeros(0)

    def jacobian(self, x):
        return np.zeros((0, x.size))

    def constraint_hessian(self, x, lam):
        return np.zeros((x.size, x.size))


def newton_minimize(
    problem: SmoothProblem,
    x0,
    free=None,
    tol_grad: float = 1e-8,
    tol_relative: bool = True,
    tol_constraint: float = 1e-10,
    max_iters: int = 200,
) -> NewtonResult:
    x = np.array(x0, dtype=float)
    n = x.size
    free = np.ones(n, bool) if free is None else np.asarray(free, bool)
    idx = np.flatnonzero(free)
    rho = 1.0
    merits, energies = [], []

    def merit(y, rho_):
        return problem.energy(y) + rho_ * np.abs(problem.constraints(y)).sum()

    it = 0
    rnorm = np.inf
    cnorm = np.inf
    message = "max_iters reached"
    converged = False
    while True:
        f = problem.energy(x)
        g = problem.gradient(x)[idx]
        c = problem.constraints(x)
        J = problem.jacobian(x)[:, idx] if c.size else np.zeros((0, idx.size))
        if c.size:
            lam = -np.linalg.lstsq(J.T, g, rcond=None)[0]
        else:
            lam = np.zeros(0)
        r = g + J.T @ lam
        rnorm = float(np.max(np.abs(r))) if r.size else 0.0
        cnorm = float(np.max(np.abs(c))) if c.size else 0.0
        tol = tol_grad * (1.0 + abs(f)) if tol_relative else tol_grad
        energies.append(f)
        if c.size:
            rho = max(rho, 2.0 * float(np.max(np.abs(lam))) + 1.0)
        merits.append(f + rho * np.abs(c).sum())
        if rnorm <= tol and cnorm <= tol_constraint:
            converged = True
            message = "converged"
            break
        if it >= max_iters:
            break
        it += 1

        H = problem.hessian(x)[np.ix_(idx, idx)]
        if c.size:
            H = H + problem.constraint_hessian(x, lam)[np.ix_(idx, idx)]
            U, S, Vt = np.linalg.svd(J, full_matrices=True)
            m = c.size
            V1, Z = Vt[:m].T, Vt[m:].T
            keep = S > 1e-12 * max(1.0, float(S.max()))
            S_inv = np.where(keep, 1.0 / np.where(keep, S, 1.0), 0.0)
            py = -V1 @ ((U.T @ c) * S_inv)
        else:
            Z = np.eye(idx.size)
            py = np.zeros(idx.size)
        Hr = Z.T @ H @ Z
        Hr = 0.5 * (Hr + Hr.T)
        w, Q = np.linalg.eigh(Hr)
        floor = 1e-10 * max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
        w = np.maximum(np.abs(w), floor)
        rhs = -Z.T @ (g + H @ py)
        pz = Q @ ((Q.T @ rhs) / w)
        d = py + Z @ pz

        phi0 = merits[-1]
        slope = g @ d - rho * np.abs(c).sum()
        t = 1.0
        accepted = False
        while t > 1e-14:
            xt = x.copy()
            xt[idx] += t * d
            phit = merit(xt, rho)
            if phit <= phi0 + 1e-4 * t * min(slope, 0.0):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # roundoff floor: accept the point if it is already nearly stationary
            if rnorm <= 1e3 * tol and cnorm <= 1e3 * tol_constraint:
                converged = True
                message = "converged (line search at roundoff floor)"
            else:
                message = "line search failed"
            break
        x = xt
    return NewtonResult(
        x=x,
        f=float(problem.energy(x)),
        grad_norm=rnorm,
        constraint_norm=cnorm,
        iterations=it,
        converged=converged,
        merit_history=merits,
        energy_history=energies,
        message=message,
    )
