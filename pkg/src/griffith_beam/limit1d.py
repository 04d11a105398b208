"""One-dimensional Griffith-Euler-Bernoulli energy on broken elastica.

A midline is a list of segments partitioning ``(0, L)``. Each segment stores
tangent angles on a uniform sub-grid and its start position; positions are
rebuilt by integrating the unit tangent with midpoint angles, so unit speed
holds by construction. Interior segment boundaries are candidate jump points;
a boundary counts as a crack only if position or tangent actually jumps.

Energies::

    I0     = alpha/24 * sum((dtheta/delta)^2 * delta) + beta * #jumps
    J0     = I0 - load,  load = int y . f dt  (trapezoid on the angle grid)
    J0_bv  = J0 + beta * #(clamped ends not attained)
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .newton import SmoothProblem, newton_minimize

log = logging.getLogger(__name__)

__all__ = [
    "Segment",
    "MidlineCurve",
    "LoadProfile",
    "EndClamp",
    "ClampSpec",
    "EnergyBreakdown",
    "InvalidCurveError",
    "ConvergenceFailure",
    "SolverOptions",
    "TopologyResult",
    "energy_I0",
    "energy_J0",
    "energy_J0_bv",
    "minimize_fixed_topology",
    "optimize_topology",
    "exhaustive_topology_oracle",
    "rotation_clamps",
    "arc_curve",
    "straight_curve",
]


class InvalidCurveError(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    """Raised when a fixed-topology solve does not reach stationarity."""

    def __init__(self, message, best=None, result=None):
        super().__init__(message)
        self.best = best
        self.result = result


def _unit(theta):
    return np.stack([np.cos(theta), np.sin(theta)], -1)


def _angle(v) -> float:
    return math.atan2(v[1], v[0])


@dataclass
class Segment:
    start: float
    end: float
    theta: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.p = np.asarray(self.p, dtype=float).reshape(2)

    @property
    def cells(self) -> int:
        return self.theta.size - 1

    @property
    def delta(self) -> float:
        return (self.end - self.start) / self.cells

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.theta.size)

    def positions(self) -> np.ndarray:
        mid = 0.5 * (self.theta[:-1] + self.theta[1:])
        steps = self.delta * _unit(mid)
        return self.p + np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])

    def curvature(self) -> np.ndarray:
        return np.diff(self.theta) / self.delta


@dataclass
class MidlineCurve:
    L: float
    segments: list
    M: float = 1e3
    solver_info: dict | None = field(default=None, repr=False, compare=False)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([s.start for s in self.segments[1:]])

    def validate(self, check_bound: bool = True) -> None:
        if not self.segments:
            raise InvalidCurveError("curve has no segments")
        if abs(self.segments[0].start) > 1e-12 or abs(self.segments[-1].end - self.L) > 1e-12 * max(1, self.L):
            raise InvalidCurveError("segments do not cover (0, L)")
        for a, b in zip(self.segments[:-1], self.segments[1:]):
            if abs(a.end - b.start) > 1e-12 * max(1, self.L):
                raise InvalidCurveError("segments are not contiguous")
        for s in self.segments:
            if s.cells < 1 or not s.end > s.start:
                raise InvalidCurveError("degenerate segment")
            if not (np.all(np.isfinite(s.theta)) and np.all(np.isfinite(s.p))):
                raise InvalidCurveError("non-finite curve data")
            if check_bound and np.max(np.linalg.norm(s.positions(), axis=1)) > self.M:
                raise InvalidCurveError(f"|y| exceeds M = {self.M}")

    def start_point(self):
        return self.segments[0].p.copy()

    def end_point(self):
        return self.segments[-1].positions()[-1]

    def start_tangent(self):
        return _unit(self.segments[0].theta[0])

    def end_tangent(self):
        return _unit(self.segments[-1].theta[-1])

    def max_abs_position(self) -> float:
        return max(float(np.max(np.linalg.norm(s.positions(), axis=1))) for s in self.segments)

    def sample(self, t) -> np.ndarray:
        """Positions at parameters ``t`` (piecewise linear between nodes, right-continuous)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, 2))
        edges = [s.start for s in self.segments[1:]]
        which = np.searchsorted(edges, t, side="right")
        for i, s in enumerate(self.segments):
            m = which == i
            if np.any(m):
                y = s.positions()
                out[m, 0] = np.interp(t[m], s.t, y[:, 0])
                out[m, 1] = np.interp(t[m], s.t, y[:, 1])
        return out

    def tangent_angle(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.size)
        edges = [s.start for s in self.segments[1:]]
        which = np.searchsorted(edges, t, side="right")
        for i, s in enumerate(self.segments):
            m = which == i
            if np.any(m):
                out[m] = np.interp(t[m], s.t, s.theta)
        return out

    def transformed(self, R_angle: float, c) -> "MidlineCurve":
        """Image under the rigid motion ``x -> R x + c``."""
        R = np.array([[math.cos(R_angle), -math.sin(R_angle)], [math.sin(R_angle), math.cos(R_angle)]])
        segs = [Segment(s.start, s.end, s.theta + R_angle, R @ s.p + np.asarray(c, float)) for s in self.segments]
        return MidlineCurve(self.L, segs, self.M)

    def rows(self):
        """CSV rows ``(t, y1, y2, theta, segment_id)``."""
        for i, s in enumerate(self.segments):
            y = s.positions()
            for tk, yk, th in zip(s.t, y, s.theta):
                yield (float(tk), float(yk[0]), float(yk[1]), float(th), i)

    @classmethod
    def from_rows(cls, rows, L: float, M: float = 1e3) -> "MidlineCurve":
        rows = sorted(rows, key=lambda r: (int(r[4]), float(r[0])))
        segs = []
        for _, grp in itertools.groupby(rows, key=lambda r: int(r[4])):
            grp = list(grp)
            t = [float(r[0]) for r in grp]
            segs.append(Segment(t[0], t[-1], [float(r[3]) for r in grp], [float(grp[0][1]), float(grp[0][2])]))
        return cls(L, segs, M)


def _segment_cells(length: float, delta: float) -> int:
    return max(1, int(round(length / delta)))


def straight_curve(L: float, angle: float = 0.0, p0=(0.0, 0.0), delta: float | None = None,
                   breakpoints: Sequence[float] = (), M: float = 1e3) -> MidlineCurve:
    """Straight line, optionally split (continuously) at ``breakpoints``."""
    return arc_curve(L, 0.0, angle, p0, delta, breakpoints, M)


def arc_curve(L: float, kappa: float, angle0: float = 0.0, p0=(0.0, 0.0), delta: float | None = None,
              breakpoints: Sequence[float] = (), M: float = 1e3) -> MidlineCurve:
    """Discrete circular arc ``theta(t) = angle0 + kappa t``, continuous across breakpoints."""
    delta = L / 64 if delta is None else delta
    edges = [0.0, *sorted(breakpoints), L]
    segs = []
    p = np.asarray(p0, float)
    for a, b in zip(edges[:-1], edges[1:]):
        t = np.linspace(a, b, _segment_cells(b - a, delta) + 1)
        s = Segment(a, b, angle0 + kappa * t, p)
        segs.append(s)
        p = s.positions()[-1]
    return MidlineCurve(L, segs, M)


@dataclass
class LoadProfile:
    """Force per unit length ``f(t)``; ``func`` maps an array of t to (n, 2)."""

    func: Callable | None = None

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.func is None:
            return np.zeros((t.size, 2))
        return np.broadcast_to(np.asarray(self.func(t), dtype=float), (t.size, 2))

    @property
    def is_zero(self) -> bool:
        return self.func is None

    @classmethod
    def zero(cls) -> "LoadProfile":
        return cls(None)

    @classmethod
    def constant(cls, f) -> "LoadProfile":
        f = np.asarray(f, dtype=float).reshape(2)
        if not np.any(f):
            return cls(None)
        return cls(_ConstantForce(f))

    @classmethod
    def from_samples(cls, t, values) -> "LoadProfile":
        return cls(_SampledForce(np.asarray(t, float), np.asarray(values, float)))

    def rotated(self, R_angle: float) -> "LoadProfile":
        if self.func is None:
            return self
        return LoadProfile(_RotatedForce(self.func, R_angle))


class _ConstantForce:
    def __init__(self, f):
        self.f = f

    def __call__(self, t):
        return np.tile(self.f, (np.size(t), 1))


class _SampledForce:
    def __init__(self, t, v):
        self.t, self.v = t, v

    def __call__(self, t):
        return np.stack([np.interp(t, self.t, self.v[:, 0]), np.interp(t, self.t, self.v[:, 1])], -1)


class _RotatedForce:
    def __init__(self, func, a):
        self.func = func
        self.R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])

    def __call__(self, t):
        return np.asarray(self.func(t), float) @ self.R.T


@dataclass(frozen=True)
class EndClamp:
    position: tuple
    direction: tuple

    def __post_init__(self):
        e = np.asarray(self.direction, float)
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError(f"clamp direction must be a unit vector, got {self.direction}")

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.position, float)

    @property
    def e(self) -> np.ndarray:
        return np.asarray(self.direction, float)

    def transformed(self, R_angle: float, c) -> "EndClamp":
        R = np.array([[math.cos(R_angle), -math.sin(R_angle)], [math.sin(R_angle), math.cos(R_angle)]])
        return EndClamp(tuple(R @ self.y + np.asarray(c, float)), tuple(R @ self.e))


@dataclass(frozen=True)
class ClampSpec:
    """Per-end clamping; ``None`` means a free end."""

    left: EndClamp | None = None
    right: EndClamp | None = None

    def validate(self, M: float) -> None:
        for c in (self.left, self.right):
            if c is not None and not np.linalg.norm(c.y) < M:
                raise ValueError("clamp position must satisfy |y| < M")

    def transformed(self, R_angle: float, c) -> "ClampSpec":
        return ClampSpec(
            None if self.left is None else self.left.transformed(R_angle, c),
            None if self.right is None else self.right.transformed(R_angle, c),
        )

    def released(self, left: bool, right: bool) -> "ClampSpec":
        return ClampSpec(None if left else self.left, None if right else self.right)


def rotation_clamps(L: float, phi: float) -> ClampSpec:
    """Clamps at both ends compatible with a circular arc turning by ``phi``.

    Left end at the origin with tangent e1; the right end sits where the arc
    of length ``L`` and curvature ``phi/L`` ends, with tangent rotated by phi.
    The clamped elastica is then exactly that arc.
    """
    if phi == 0:
        yL = (L, 0.0)
    else:
        k = phi / L
        yL = (math.sin(phi) / k, (1.0 - math.cos(phi)) / k)
    return ClampSpec(EndClamp((0.0, 0.0), (1.0, 0.0)), EndClamp(yL, (math.cos(phi), math.sin(phi))))


@dataclass
class EnergyBreakdown:
    bending: float
    crack_count: int
    crack: float
    load: float = 0.0
    boundary_penalty: float = 0.0
    boundary_violations: int = 0
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.bending + self.crack + self.boundary_penalty - self.load

    @property
    def defects(self) -> int:
        return self.crack_count + self.boundary_violations

    def as_dict(self) -> dict:
        return {
            "bending": self.bending,
            "crack_count": self.crack_count,
            "crack": self.crack,
            "load": self.load,
            "boundary_penalty": self.boundary_penalty,
            "total": self.total,
        }


def _default_tau(curve: MidlineCurve, tau_jump):
    return 1e-6 * curve.L if tau_jump is None else tau_jump


def _bending(curve: MidlineCurve, alpha: float) -> float:
    return sum(alpha / 24.0 * float(np.sum(np.diff(s.theta) ** 2)) / s.delta for s in curve.segments)


def _jump_count(curve: MidlineCurve, tau: float) -> int:
    n = 0
    for a, b in zip(curve.segments[:-1], curve.segments[1:]):
        pos_jump = np.linalg.norm(a.positions()[-1] - b.p)
        tan_jump = np.linalg.norm(_unit(a.theta[-1]) - _unit(b.theta[0]))
        if pos_jump > tau or tan_jump > tau:
            n += 1
    return n


def _load(curve: MidlineCurve, load: LoadProfile) -> float:
    if load is None or load.is_zero:
        return 0.0
    total = 0.0
    for s in curve.segments:
        w = np.full(s.theta.size, s.delta)
        w[[0, -1]] *= 0.5
        total += float(np.sum(w[:, None] * load(s.t) * s.positions()))
    return total


def energy_I0(curve: MidlineCurve, alpha: float, beta: float, tau_jump: float | None = None) -> EnergyBreakdown:
    curve.validate()
    n = _jump_count(curve, _default_tau(curve, tau_jump))
    return EnergyBreakdown(_bending(curve, alpha), n, beta * n)


def energy_J0(curve: MidlineCurve, alpha: float, beta: float, load: LoadProfile | None,
              tau_jump: float | None = None) -> EnergyBreakdown:
    e = energy_I0(curve, alpha, beta, tau_jump)
    return EnergyBreakdown(e.bending, e.crack_count, e.crack, _load(curve, load))


def clamp_violations(curve: MidlineCurve, clamp: ClampSpec, tau: float) -> tuple[bool, bool]:
    def bad(c, y, e):
        return c is not None and (np.linalg.norm(y - c.y) > tau or np.linalg.norm(e - c.e) > tau)

    return (
        bad(clamp.left, curve.start_point(), curve.start_tangent()),
        bad(clamp.right, curve.end_point(), curve.end_tangent()),
    )


def energy_J0_bv(curve: MidlineCurve, alpha: float, beta: float, load: LoadProfile | None,
                 clamp: ClampSpec, tau_jump: float | None = None) -> EnergyBreakdown:
    clamp.validate(curve.M)
    e = energy_J0(curve, alpha, beta, load, tau_jump)
    nv = int(sum(clamp_violations(curve, clamp, _default_tau(curve, tau_jump))))
    return EnergyBreakdown(e.bending, e.crack_count, e.crack, e.load, float(beta * nv), nv)


# ---------------------------------------------------------------------------
# fixed-topology minimisation


@dataclass
class SolverOptions:
    delta: float | None = None  # angle-grid spacing, default L/64
    max_iters: int = 200
    tol_grad: float = 1e-8
    tau_jump: float | None = None
    barrier_weight: float = 1e4
    init_noise: float = 0.0
    seed: int | None = None


class _CurveProblem(SmoothProblem):
    """Smooth part of J0 over stacked (theta, p) for a fixed segment layout."""

    def __init__(self, edges, cells, alpha, load, right_target=None, M=None, barrier_weight=0.0):
        self.edges = list(edges)
        self.cells = list(cells)
        self.alpha = alpha
        self.load = load
        self.right_target = None if right_target is None else np.asarray(right_target, float)
        self.M = M
        self.barrier_weight = barrier_weight
        self.nseg = len(self.cells)
        self.deltas = [(b - a) / m for a, b, m in zip(self.edges[:-1], self.edges[1:], self.cells)]
        self.theta_off = np.concatenate([[0], np.cumsum([m + 1 for m in self.cells])]).astype(int)
        self.p_off = int(self.theta_off[-1])
        self.n = self.p_off + 2 * self.nseg
        self.n_constraints = 0 if self.right_target is None else 2
        self.t = [np.linspace(a, b, m + 1) for a, b, m in zip(self.edges[:-1], self.edges[1:], self.cells)]
        self.w = []
        self.f = []
        for i, m in enumerate(self.cells):
            w = np.full(m + 1, self.deltas[i])
            w[[0, -1]] *= 0.5
            self.w.append(w)
            self.f.append(load(self.t[i]) if load is not None and not load.is_zero else None)

    def theta(self, x, i):
        return x[self.theta_off[i]:self.theta_off[i + 1]]

    def p(self, x, i):
        return x[self.p_off + 2 * i:self.p_off + 2 * i + 2]

    def positions(self, x, i):
        th = self.theta(x, i)
        mid = 0.5 * (th[:-1] + th[1:])
        steps = self.deltas[i] * _unit(mid)
        return self.p(x, i) + np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])

    def to_curve(self, x, M) -> MidlineCurve:
        segs = [Segment(self.edges[i], self.edges[i + 1], self.theta(x, i).copy(), self.p(x, i).copy())
                for i in range(self.nseg)]
        return MidlineCurve(self.edges[-1], segs, M)

    # node-functional Phi(y) = -sum w f.y + barrier(y)
    def _phi_terms(self, x, i, want_hess=False):
        y = self.positions(x, i)
        val = 0.0
        G = np.zeros_like(y)
        Hn = None
        if self.f[i] is not None:
            wf = self.w[i][:, None] * self.f[i]
            val -= float(np.sum(wf * y))
            G -= wf
        if self.barrier_weight > 0 and self.M is not None:
            r2 = np.sum(y * y, axis=1)
            ex = np.maximum(0.0, r2 - self.M**2)
            kw = self.barrier_weight * self.w[i]
            val += float(np.sum(kw * ex**2))
            G += (4.0 * kw * ex)[:, None] * y
            if want_hess:
                Hn = (4.0 * kw * ex)[:, None, None] * np.eye(2) + (
                    8.0 * kw * (ex > 0))[:, None, None] * y[:, :, None] * y[:, None, :]
        return val, G, Hn

    def energy(self, x):
        e = 0.0
        for i in range(self.nseg):
            th = self.theta(x, i)
            e += self.alpha / 24.0 * float(np.sum(np.diff(th) ** 2)) / self.deltas[i]
            e += self._phi_terms(x, i)[0]
        return e

    def _seg_grad(self, x, i, G):
        """Gradient wrt (theta_i, p_i) of sum_k G_k . y_k with G held fixed."""
        th = self.theta(x, i)
        mid = 0.5 * (th[:-1] + th[1:])
        S = np.cumsum(G[::-1], axis=0)[::-1][1:]  # S_j = sum_{k>j} G_k
        du = np.stack([-np.sin(mid), np.cos(mid)], -1)
        gbar = self.deltas[i] * np.sum(du * S, axis=1)
        gth = np.zeros(th.size)
        gth[:-1] += 0.5 * gbar
        gth[1:] += 0.5 * gbar
        return gth, G.sum(axis=0), S, mid

    def gradient(self, x):
        g = np.zeros(self.n)
        for i in range(self.nseg):
            th = self.theta(x, i)
            k = self.alpha / (12.0 * self.deltas[i])
            d = np.diff(th)
            gb = np.zeros(th.size)
            gb[:-1] -= k * d
            gb[1:] += k * d
            _, G, _ = self._phi_terms(x, i)
            gth, gp, _, _ = self._seg_grad(x, i, G)
            g[self.theta_off[i]:self.theta_off[i + 1]] = gb + gth
            g[self.p_off + 2 * i:self.p_off + 2 * i + 2] = gp
        return g

    def _curvature_block(self, x, i, G):
        """Hessian block (theta_i) of sum_k G_k . y_k(theta) with G held fixed."""
        th = self.theta(x, i)
        mid = 0.5 * (th[:-1] + th[1:])
        S = np.cumsum(G[::-1], axis=0)[::-1][1:]
        dbar = -self.deltas[i] * np.sum(_unit(mid) * S, axis=1)
        m = th.size - 1
        H = np.zeros((m + 1, m + 1))
        idx = np.arange(m)
        H[idx, idx] += 0.25 * dbar
        H[idx + 1, idx + 1] += 0.25 * dbar
        H[idx, idx + 1] += 0.25 * dbar
        H[idx + 1, idx] += 0.25 * dbar
        return H

    def _position_jacobian(self, x, i):
        """d y_k / d (theta_i, p_i), shape (m+1, 2, m+3)."""
        th = self.theta(x, i)
        m = th.size - 1
        mid = 0.5 * (th[:-1] + th[1:])
        du = self.deltas[i] * np.stack([-np.sin(mid), np.cos(mid)], -1)  # (m, 2)
        Yb = np.zeros((m + 1, 2, m))
        for k in range(1, m + 1):
            Yb[k, :, :k] = du[:k].T
        A = np.zeros((m, m + 1))
        A[np.arange(m), np.arange(m)] = 0.5
        A[np.arange(m), np.arange(m) + 1] = 0.5
        Y = np.zeros((m + 1, 2, m + 3))
        Y[:, :, :m + 1] = Yb @ A
        Y[:, 0, m + 1] = 1.0
        Y[:, 1, m + 2] = 1.0
        return Y

    def hessian(self, x):
        H = np.zeros((self.n, self.n))
        for i in range(self.nseg):
            sl = slice(self.theta_off[i], self.theta_off[i + 1])
            m = self.cells[i]
            k = self.alpha / (12.0 * self.deltas[i])
            D = np.diff(np.eye(m + 1), axis=0)
            Hb = k * D.T @ D
            _, G, Hn = self._phi_terms(x, i, want_hess=True)
            H[sl, sl] += Hb + self._curvature_block(x, i, G)
            if Hn is not None and np.any(Hn):
                Y = self._position_jacobian(x, i)
                GN = np.einsum("kai,kab,kbj->ij", Y, Hn, Y)
                ids = np.r_[np.arange(self.theta_off[i], self.theta_off[i + 1]),
                            self.p_off + 2 * i, self.p_off + 2 * i + 1]
                H[np.ix_(ids, ids)] += GN
        return H

    def constraints(self, x):
        if self.right_target is None:
            return np.zeros(0)
        return self.positions(x, self.nseg - 1)[-1] - self.right_target

    def jacobian(self, x):
        if self.right_target is None:
            return np.zeros((0, self.n))
        i = self.nseg - 1
        J = np.zeros((2, self.n))
        for a in range(2):
            G = np.zeros((self.cells[i] + 1, 2))
            G[-1, a] = 1.0
            gth, gp, _, _ = self._seg_grad(x, i, G)
            J[a, self.theta_off[i]:self.theta_off[i + 1]] = gth
            J[a, self.p_off + 2 * i:self.p_off + 2 * i + 2] = gp
        return J

    def constraint_hessian(self, x, lam):
        H = np.zeros((self.n, self.n))
        if self.right_target is None:
            return H
        i = self.nseg - 1
        G = np.zeros((self.cells[i] + 1, 2))
        G[-1] = lam
        sl = slice(self.theta_off[i], self.theta_off[i + 1])
        H[sl, sl] = self._curvature_block(x, i, G)
        return H


def _nearest_branch(angle: float, ref: float) -> float:
    return angle + 2 * math.pi * round((ref - angle) / (2 * math.pi))


def _setup(L, breakpoints, clamp: ClampSpec, opts: SolverOptions, rng=None):
    delta = L / 64 if opts.delta is None else opts.delta
    edges = [0.0, *breakpoints, L]
    cells = [_segment_cells(b - a, delta) for a, b in zip(edges[:-1], edges[1:])]
    aL = _angle(clamp.left.e) if clamp.left is not None else None
    aR = _angle(clamp.right.e) if clamp.right is not None else None
    if aL is not None and aR is not None:
        aR = _nearest_branch(aR, aL)
    return edges, cells, aL, aR


def _initial_guess(prob: _CurveProblem, clamp, aL, aR, L, rng, noise):
    x = np.zeros(prob.n)
    y0 = clamp.left.y if clamp.left is not None else np.zeros(2)
    p = y0.copy()
    for i in range(prob.nseg):
        t = prob.t[i]
        if aL is not None and aR is not None:
            th = aL + (aR - aL) * t / L
        elif aL is not None:
            th = np.full(t.size, aL)
        elif aR is not None:
            th = np.full(t.size, aR)
        else:
            th = np.zeros(t.size)
        if noise and rng is not None:
            th = th + noise * rng.standard_normal(t.size)
        x[prob.theta_off[i]:prob.theta_off[i + 1]] = th
        x[prob.p_off + 2 * i:prob.p_off + 2 * i + 2] = p
        p = prob.positions(x, i)[-1]
    if aL is not None:
        x[prob.theta_off[0]] = aL
    if aR is not None:
        x[prob.theta_off[-1] - 1] = aR
    if clamp.right is not None and clamp.left is None and prob.nseg == 1:
        # shift the single free-start segment so its end sits on the clamp
        x[prob.p_off:prob.p_off + 2] += clamp.right.y - prob.positions(x, 0)[-1]
    return x


def minimize_fixed_topology(L: float, breakpoints: Sequence[float], alpha: float, load: LoadProfile | None,
                            clamp: ClampSpec, opts: SolverOptions | None = None, M: float = 1e3,
                            rng=None) -> MidlineCurve:
    """Minimise the smooth part of J0_bv with the given breakpoints.

    Attained clamps are imposed exactly: the left clamp fixes the first
    segment's start position and angle, the right clamp fixes the final angle
    and adds the end position as an equality constraint. Each segment carries
    free rigid freedom otherwise. The returned curve has ``solver_info`` with
    the stationarity measure and iteration history.
    """
    opts = opts or SolverOptions()
    bps = sorted(float(b) for b in breakpoints)
    if any(not 0 < b < L for b in bps) or len(set(bps)) != len(bps):
        raise ValueError("breakpoints must be distinct and strictly inside (0, L)")
    clamp.validate(M)
    if rng is None and opts.init_noise:
        rng = np.random.default_rng(opts.seed)
    edges, cells, aL, aR = _setup(L, bps, clamp, opts)
    right = clamp.right.y if clamp.right is not None else None
    prob = _CurveProblem(edges, cells, alpha, load, right_target=right, M=M)
    x0 = _initial_guess(prob, clamp, aL, aR, L, rng, opts.init_noise)
    free = np.ones(prob.n, bool)
    if clamp.left is not None:
        free[prob.theta_off[0]] = False
        free[prob.p_off:prob.p_off + 2] = False
    if clamp.right is not None:
        free[prob.theta_off[-1] - 1] = False

    res = newton_minimize(prob, x0, free, tol_grad=opts.tol_grad, max_iters=opts.max_iters)
    curve = prob.to_curve(res.x, M)
    barrier = False
    if curve.max_abs_position() > M:
        log.info("|y| <= M violated (%.3g); re-solving with barrier", curve.max_abs_position())
        prob.barrier_weight = opts.barrier_weight
        res = newton_minimize(prob, res.x, free, tol_grad=opts.tol_grad, max_iters=opts.max_iters)
        curve = prob.to_curve(res.x, M)
        barrier = True
    curve.solver_info = {
        "converged": res.converged,
        "grad_norm": res.grad_norm,
        "constraint_norm": res.constraint_norm,
        "iterations": res.iterations,
        "energy_history": res.energy_history,
        "merit_history": res.merit_history,
        "barrier": barrier,
        "message": res.message,
    }
    if not res.converged:
        raise ConvergenceFailure(f"fixed-topology solve failed: {res.message}", best=curve, result=res)
    return curve


# ---------------------------------------------------------------------------
# topology search


@dataclass
class TopologyCandidate:
    breakpoints: tuple
    released: tuple
    energy: EnergyBreakdown | None
    converged: bool
    message: str = ""


@dataclass
class TopologyResult:
    curve: MidlineCurve
    energy: EnergyBreakdown
    breakpoints: tuple
    released: tuple
    candidates: list

    def __iter__(self):
        return iter((self.curve, self.energy))


def _solve_one(args):
    (L, bps, released, alpha, beta, load, clamp, opts, M, noise_seed, restarts) = args
    solve_clamp = clamp.released(*released)
    best = None
    msgs = []
    for r in range(max(1, restarts)):
        o = opts
        rng = None
        if r > 0 or noise_seed is not None:
            rng = np.random.default_rng(None if noise_seed is None else (noise_seed, r, *[int(b * 1e9) for b in bps]))
            o = replace(opts, init_noise=opts.init_noise or (0.3 if r > 0 else 0.0))
        try:
            curve = minimize_fixed_topology(L, bps, alpha, load, solve_clamp, o, M, rng=rng)
            ok = True
        except ConvergenceFailure as exc:
            curve, ok = exc.best, False
            msgs.append(str(exc))
        e = energy_J0_bv(curve, alpha, beta, load, clamp, opts.tau_jump)
        if ok and (best is None or e.total < best[1].total - 1e-12):
            best = (curve, e)
    if best is None:
        return None, None, "; ".join(msgs)
    return best[0], best[1], ""


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("GRIFFITH_BEAM_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    n = _workers()
    if n <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _enumerate(L, alpha, beta, load, clamp, K_max, candidate_grid, opts, M, allow_release, restarts, seed):
    if K_max > 4:
        raise ValueError("K_max must be <= 4")
    grid = sorted(float(c) for c in candidate_grid)
    if any(not 0 < c < L for c in grid):
        raise ValueError("candidate grid must lie strictly inside (0, L)")
    releases = [(False, False)]
    if allow_release:
        releases = [(a, b) for a in (False, True) for b in (False, True)
                    if (not a or clamp.left is not None) and (not b or clamp.right is not None)]
    jobs = []
    for k in range(K_max + 1):
        for bps in itertools.combinations(grid, k):
            for rel in releases:
                jobs.append((L, bps, rel, alpha, beta, load, clamp, opts, M, seed, restarts))
    results = _parallel_map(_solve_one, jobs)
    return jobs, results


def _select(jobs, results, tol_tie):
    candidates = []
    best = None
    for job, (curve, e, msg) in zip(jobs, results):
        bps, rel = job[1], job[2]
        cand = TopologyCandidate(bps, rel, e, curve is not None, msg)
        candidates.append(cand)
        if curve is None:
            continue
        key = (e.total, len(bps), sum(rel), bps)
        if best is None:
            best = (key, curve, e, bps, rel)
            continue
        bkey = best[0]
        tie = abs(key[0] - bkey[0]) <= tol_tie * (1 + abs(bkey[0]))
        if (not tie and key[0] < bkey[0]) or (tie and key[1:] < bkey[1:]):
            best = (key, curve, e, bps, rel)
    if best is None:
        raise ConvergenceFailure("no topology converged")
    return TopologyResult(best[1], best[2], best[3], best[4], candidates)


def optimize_topology(L: float, alpha: float, beta: float, load: LoadProfile | None, clamp: ClampSpec,
                      K_max: int, candidate_grid: Sequence[float], opts: SolverOptions | None = None,
                      M: float = 1e3, allow_release: bool = False, tol_tie: float = 1e-9) -> TopologyResult:
    """Exhaustive search over breakpoint subsets of ``candidate_grid``.

    Every subset of size ``<= K_max`` is solved with
    :func:`minimize_fixed_topology` and scored with :func:`energy_J0_bv`.
    Ties (relative ``tol_tie``) go to fewer breakpoints, then fewer released
    clamps, then the lexicographically smaller breakpoint vector. With
    ``allow_release`` the search also tries dropping each clamp (paying beta).
    Failed subsets are kept in ``candidates`` with ``converged=False``.
    """
    opts = opts or SolverOptions()
    jobs, results = _enumerate(L, alpha, beta, load, clamp, K_max, candidate_grid, opts, M, allow_release, 1, None)
    out = _select(jobs, results, tol_tie)
    for c in out.candidates:
        if not c.converged:
            log.warning("topology %s (released %s) skipped: %s", c.breakpoints, c.released, c.message)
    return out


def exhaustive_topology_oracle(L, alpha, beta, load, clamp, K_max, candidate_grid, opts=None, M=1e3,
                               allow_release=False, restarts=3, seed=0, tol_tie=1e-9) -> TopologyResult:
    """Same subset enumeration with randomised multi-start inner solves."""
    opts = opts or SolverOptions()
    jobs, results = _enumerate(L, alpha, beta, load, clamp, K_max, candidate_grid, opts, M, allow_release,
                               restarts, seed)
    return _select(jobs, results, tol_tie)
