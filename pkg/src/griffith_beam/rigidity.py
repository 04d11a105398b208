"""Rectangle-cover rigidity diagnostics for thin-beam deformations.

Work in the rescaled frame ``w(z, x2) = y(h z, x2) / h`` where the beam is
``(0, L/h) x (-1/2, 1/2)`` and ``grad w = grad_h y``. The frame is covered by
overlapping unit rectangles; each gets a cell energy (elastic misfit plus
``h`` times crack length), a good/bad flag and a least-squares rigid motion.
Good-cell motions are blended with a smooth partition of unity into a frame
``(r, R)`` on ``(0, L)``, and the empirical constants of the interpolation
estimates are tracked across an ``h``-sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import operators
from .full2d import DamageField, DeformationField, SharpCrackSet, _segment_hits_boxes, _surface_density
from .material import dist2_so2, dist_so2, rotation

__all__ = [
    "ConfigError",
    "FitError",
    "DiagnosticAbort",
    "RectangleCover",
    "CellSamples",
    "CellStats",
    "RigidFit",
    "InterpolatedFrames",
    "ScalingRow",
    "ScalingReport",
    "samples_from_field",
    "cover_and_classify",
    "fit_rigid_motion",
    "fit_cells",
    "partition_of_unity",
    "interpolate_frames",
    "frame_statistics",
    "verify_scalings",
]


class ConfigError(ValueError):
    pass


class FitError(ValueError):
    pass


class DiagnosticAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class RectangleCover:
    """``Q_a = (a - 1 - 1/(2n), a + 1/(2n)) x (-1/2, 1/2) + k/n`` for ``a = 1..N``."""

    n: int
    h: float
    L: float
    k: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("overlap parameter n must be >= 2")
        if not 0 <= self.k < self.n:
            raise ConfigError("shift index must lie in 0..n-1")
        if self.N < 2:
            raise ConfigError("cover needs at least two rectangles; decrease h")

    @property
    def N(self) -> int:
        return int(math.floor((self.L - self.h) / self.h + 1e-9))

    @property
    def shift(self) -> float:
        return self.k / self.n

    def bounds(self, a: int) -> tuple[float, float]:
        o = 1.0 / (2 * self.n)
        return a - 1 - o + self.shift, a + o + self.shift

    def centre(self, a: int) -> float:
        return a - 0.5 + self.shift

    @property
    def area(self) -> float:
        return 1.0 + 1.0 / self.n


@dataclass
class CellSamples:
    """Point samples of the rescaled field with rescaled area weights."""

    h: float
    L: float
    z: np.ndarray  # (m, 2) rescaled coordinates
    w: np.ndarray  # (m, 2) values of w
    grad: np.ndarray  # (m, 2, 2) grad w
    weight: np.ndarray  # (m,)
    intact: np.ndarray  # (m,) bool
    cracks: SharpCrackSet | None = None  # in the reference (unrescaled) frame
    surface: np.ndarray | None = None  # AT surface density per point (diffuse mode)

    def crack_length(self, lo: float, hi: float) -> float:
        """Rescaled H^1 measure of the crack inside ``(lo, hi) x (-1/2, 1/2)``."""
        if self.surface is not None:
            sel = (self.z[:, 0] > lo) & (self.z[:, 0] < hi)
            # physical weight = h * rescaled weight; the physical AT integral approximates
            # the anisotropic length, which equals the rescaled length
            return float(np.sum(self.h * self.weight[sel] * self.surface[sel]))
        if self.cracks is None:
            return 0.0
        total = 0.0
        box = np.array([[lo, hi, -0.5, 0.5]])
        for a, b in self.cracks.edges():
            a = np.array([a[0] / self.h, a[1]])
            b = np.array([b[0] / self.h, b[1]])
            total += _clipped_length(a, b, box[0])
        return total


def _clipped_length(a, b, box) -> float:
    d = b - a
    t0, t1 = 0.0, 1.0
    for k, (lo, hi) in enumerate(((box[0], box[1]), (box[2], box[3]))):
        if abs(d[k]) < 1e-300:
            if a[k] < lo or a[k] > hi:
                return 0.0
            continue
        ta, tb = (lo - a[k]) / d[k], (hi - a[k]) / d[k]
        t0 = max(t0, min(ta, tb))
        t1 = min(t1, max(ta, tb))
    return max(0.0, t1 - t0) * float(np.hypot(*d))


def samples_from_field(y: DeformationField, cracks: SharpCrackSet | None = None,
                       damage: DamageField | None = None, intact_threshold: float = 0.5) -> CellSamples:
    """Quadrature-point samples of ``w`` from a nodal deformation.

    Sharp mode (``cracks``): points in elements touching a crack are not
    intact. Diffuse mode (``damage``): points with ``s < intact_threshold``
    are not intact and the crack measure is the AT surface integral.
    """
    grid, h = y.grid, y.h
    ops = operators(grid, h)
    pts = grid.quad_points()
    yq = np.stack([ops.interp @ y.y[:, 0], ops.interp @ y.y[:, 1]], -1)
    F = (ops.grad_h @ y.y.ravel()).reshape(-1, 2, 2)
    intact = np.ones(pts.shape[0], bool)
    surface = None
    if cracks is not None and cracks.polylines:
        boxes = grid.element_boxes()
        hit = np.zeros(grid.n_elements, bool)
        for a, b in cracks.edges():
            hit |= _segment_hits_boxes(a, b, boxes, 1e-12)
        intact = ~hit[ops.element_of_point]
    if damage is not None:
        intact &= (ops.interp @ damage.s) >= intact_threshold
        surface = _surface_density(ops, damage.s, damage.eps_at)
    z = np.stack([pts[:, 0] / h, pts[:, 1]], -1)
    return CellSamples(h, grid.L, z, yq / h, F, ops.weights / h, intact, cracks, surface)


@dataclass
class CellStats:
    a: int
    eps: float
    elastic: float
    crack: float
    crack_neighbourhood: float
    bad: bool
    reason: str = ""
    fit_residual: float = float("nan")


def cover_and_classify(samples: CellSamples, lam: float, n: int, k: int = 0,
                       elastic_cell_max: float | None = None) -> tuple[RectangleCover, list]:
    """Cell energies and good/bad flags for the shifted cover ``k``.

    A cell is bad when the crack measure in ``Q_{a-1} u Q_a u Q_{a+1}`` is at
    least ``lam`` or its elastic misfit exceeds ``elastic_cell_max`` (default
    ten times the median over cells).
    """
    if not 0.5 < lam < 1.0:
        raise ConfigError(f"lambda must lie in (1/2, 1), got {lam}")
    h = samples.h
    cover = RectangleCover(n, h, samples.L, k)
    d2 = dist2_so2(samples.grad)
    z1 = samples.z[:, 0]
    elastic, crack = [], []
    for a in range(1, cover.N + 1):
        lo, hi = cover.bounds(a)
        sel = (z1 > lo) & (z1 < hi) & samples.intact
        elastic.append(float(np.sum(samples.weight[sel] * d2[sel])))
        crack.append(samples.crack_length(lo, hi))
    elastic = np.array(elastic)
    if elastic_cell_max is None:
        elastic_cell_max = max(10.0 * float(np.median(elastic)), 1e-14)
    stats = []
    for i, a in enumerate(range(1, cover.N + 1)):
        lo = cover.bounds(max(a - 1, 1))[0]
        hi = cover.bounds(min(a + 1, cover.N))[1]
        c3 = samples.crack_length(lo, hi)
        reasons = []
        if c3 >= lam:
            reasons.append("crack")
        if elastic[i] > elastic_cell_max:
            reasons.append("elastic")
        stats.append(CellStats(a, elastic[i] + h * crack[i], float(elastic[i]), crack[i], c3,
                               bool(reasons), "+".join(reasons)))
    return cover, stats


@dataclass
class RigidFit:
    angle: float
    c: np.ndarray
    residual2: float
    stationarity: float
    mass: float
    support: np.ndarray | None = field(default=None, repr=False)

    @property
    def R(self) -> np.ndarray:
        return rotation(self.angle)

    def __call__(self, z) -> np.ndarray:
        return np.asarray(z, float) @ self.R.T + self.c


def fit_rigid_motion(z, w, weight=None, mask=None, min_mass: float = 0.0) -> RigidFit:
    """Weighted least-squares rigid motion ``w ~ R z + c`` (Procrustes).

    The angle is ``atan2(H21 - H12, H11 + H22)`` for the centred
    cross-covariance ``H = sum weight (w - wbar)(z - zbar)^T``.
    """
    z = np.asarray(z, float)
    w = np.asarray(w, float)
    weight = np.ones(len(z)) if weight is None else np.asarray(weight, float)
    m = np.ones(len(z), bool) if mask is None else np.asarray(mask, bool)
    om = weight * m
    mass = float(om.sum())
    if mass <= max(min_mass, 0.0) or mass <= 0:
        raise FitError(f"support mass {mass:.3g} below required {min_mass:.3g}")
    zb = om @ z / mass
    wb = om @ w / mass
    dz, dw = z - zb, w - wb
    cov = (om[:, None] * dz).T @ dz
    if np.linalg.det(cov) <= 1e-14 * max(1.0, np.trace(cov)) ** 2:
        raise FitError("support is degenerate (collinear points)")
    H = (om[:, None] * dw).T @ dz
    angle = math.atan2(H[1, 0] - H[0, 1], H[0, 0] + H[1, 1])
    R = rotation(angle)
    c = wb - R @ zb
    r = w - z @ R.T - c
    residual2 = float(np.sum(om * np.sum(r ** 2, axis=1)))
    # d/dangle and d/dc of the objective, scaled by mass * size
    Rz = dz @ (R @ np.array([[0.0, -1.0], [1.0, 0.0]])).T
    g_angle = -2.0 * float(np.sum(om * np.sum(r * Rz, axis=1)))
    g_c = -2.0 * (om @ r)
    spread_z = math.sqrt(np.trace(cov) / mass)
    spread_w = math.sqrt(float(np.sum(om * np.sum(dw ** 2, axis=1))) / mass)
    scale = mass * (1.0 + spread_z * (1.0 + spread_w))
    stationarity = float(max(abs(g_angle), np.max(np.abs(g_c)))) / scale
    return RigidFit(angle, c, residual2, stationarity, mass, m)


def fit_cells(samples: CellSamples, cover: RectangleCover, stats: list) -> dict:
    """Rigid fits on every good cell over its intact points; keys are cell indices."""
    fits = {}
    z1 = samples.z[:, 0]
    for st in stats:
        if st.bad:
            continue
        lo, hi = cover.bounds(st.a)
        sel = (z1 > lo) & (z1 < hi)
        fit = fit_rigid_motion(samples.z[sel], samples.w[sel], samples.weight[sel], samples.intact[sel],
                               min_mass=0.5 * cover.area)
        st.fit_residual = fit.residual2
        fits[st.a] = fit
    return fits


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_d(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


def partition_of_unity(cover: RectangleCover, z, margin: float | None = None):
    """Values and derivatives of ``phi_a`` at rescaled ``z``, shape ``(N, len(z))``.

    ``phi_a`` hands over to ``phi_{a+1}`` with a smoothstep ramp centred at
    ``a + k/n`` of width ``1/n - 2 margin``; ``phi_1`` and ``phi_N`` extend to
    the ends of the beam. The default margin ``1/(8n)`` gives slope exactly
    ``2n``; larger margins would exceed it and are rejected.
    """
    n = cover.n
    margin = 1.0 / (8 * n) if margin is None else margin
    if margin < 0 or margin > 1.0 / (8 * n) + 1e-15:
        raise ConfigError("margin must lie in [0, 1/(8n)] to keep |phi'| <= 2n")
    width = 1.0 / n - 2.0 * margin
    z = np.asarray(z, float)
    N = cover.N
    # U[i] rises from 0 to 1 across boundary a = i + 1 (between Q_{i+1} and Q_{i+2})
    b = np.arange(1, N) + cover.shift
    t = (z[None, :] - b[:, None] + 0.5 * width) / width
    U = _smoothstep(t)
    dU = _smoothstep_d(t) / width
    ones = np.ones((1, z.size))
    zeros = np.zeros((1, z.size))
    Ul = np.vstack([ones, U])  # rising edge of phi_a
    dUl = np.vstack([zeros, dU])
    Ur = np.vstack([U, zeros])  # falling edge of phi_a
    dUr = np.vstack([dU, zeros])
    phi = Ul * (1.0 - Ur)
    dphi = dUl * (1.0 - Ur) - Ul * dUr
    return phi, dphi


@dataclass
class InterpolatedFrames:
    x: np.ndarray  # physical x1 samples
    r: np.ndarray  # (m, 2)
    R: np.ndarray  # (m, 2, 2)
    dr: np.ndarray
    dR: np.ndarray
    breakpoints: list
    cover: RectangleCover
    fits: dict = field(repr=False, default_factory=dict)

    @property
    def so2_distance(self) -> float:
        return float(np.max(dist_so2(self.R)))

    def l2(self, values) -> float:
        """L2 norm on (0, L) of per-sample values (midpoint samples)."""
        v = np.asarray(values).reshape(len(self.x), -1)
        dx = self.cover.L / len(self.x)
        return float(np.sqrt(np.sum(v ** 2) * dx))


def _bad_components(stats):
    out = []
    run = None
    for st in stats:
        if st.bad:
            run = [st.a, st.a] if run is None else [run[0], st.a]
        elif run is not None:
            out.append(tuple(run))
            run = None
    if run is not None:
        out.append(tuple(run))
    return out


def interpolate_frames(fits: dict, cover: RectangleCover, stats: list, samples_per_cell: int = 64,
                       margin: float | None = None) -> InterpolatedFrames:
    """Blend good-cell motions into ``(r, R)`` on ``(0, L)``.

    ``r(x1) = sum phi_a(x1/h) h r_a(x1/h, 0)`` and ``R = sum phi_a R_a`` over
    good cells. Each bad component ``p..q`` is split at its midpoint, the
    left half taking cell ``p-1`` and the right half cell ``q+1``; a
    component touching an end of the beam takes its only good neighbour.
    Samples are cell midpoints of a uniform grid, so they never sit on a
    breakpoint.
    """
    h, N = cover.h, cover.N
    if all(st.bad for st in stats):
        raise DiagnosticAbort("every rectangle is bad; no frame to interpolate")
    m = int(math.ceil(cover.L / h * samples_per_cell))
    x = (np.arange(m) + 0.5) * cover.L / m
    z = x / h
    phi, dphi = partition_of_unity(cover, z, margin)
    good = np.array([not st.bad for st in stats])
    Rs = np.stack([fits[a].R if good[a - 1] else np.eye(2) for a in range(1, N + 1)])
    cs = np.stack([fits[a].c if good[a - 1] else np.zeros(2) for a in range(1, N + 1)])
    w = phi * good[:, None]
    dw = dphi * good[:, None]
    # h r_a(z, 0) = R_a e1 x1 + h c_a
    ra = Rs[:, None, :, 0] * x[None, :, None] + h * cs[:, None, :]
    R = np.einsum("am,aij->mij", w, Rs)
    dR = np.einsum("am,aij->mij", dw, Rs) / h
    r = np.einsum("am,amk->mk", w, ra)
    dr = np.einsum("am,amk->mk", dw, ra) / h + np.einsum("am,ai->mi", w, Rs[:, :, 0])

    breakpoints = []
    for p, q in _bad_components(stats):
        lo = cover.bounds(p)[0]
        hi = cover.bounds(q)[1]
        mid = 0.5 * (lo + hi)
        if p == 1 and q == N:
            raise DiagnosticAbort("every rectangle is bad; no frame to interpolate")
        if p == 1:
            parts = [(-np.inf, hi, q + 1)]
        elif q == N:
            parts = [(lo, np.inf, p - 1)]
        else:
            parts = [(lo, mid, p - 1), (mid, hi, q + 1)]
            breakpoints.append(h * mid)
        for zlo, zhi, a in parts:
            sel = (z >= zlo) & (z < zhi)
            Ra = Rs[a - 1]
            R[sel] = Ra
            dR[sel] = 0.0
            r[sel] = ra[a - 1, sel]
            dr[sel] = Ra[:, 0]
    return InterpolatedFrames(x, r, R, dr, dR, breakpoints, cover, fits)


# ---------------------------------------------------------------------------
# scaling laws

EPS_FLOOR = 1e-30


def frame_statistics(frames: InterpolatedFrames, stats: list) -> dict:
    """Empirical constants of the interpolation estimates for one ``h``."""
    cover, fits = frames.cover, frames.fits
    h = cover.h
    ratios = []
    for a in range(1, cover.N):
        b = a + 1
        if a not in fits or b not in fits:
            continue
        fa, fb = fits[a], fits[b]
        lo, hi = cover.bounds(a)[0], cover.bounds(b)[1]
        corners = np.array([[lo, -0.5], [lo, 0.5], [hi, -0.5], [hi, 0.5]])
        num = float(np.max(np.sum((fa(corners) - fb(corners)) ** 2, axis=1)))
        num += float(np.sum((fa.R - fb.R) ** 2))
        den = stats[a - 1].eps + stats[b - 1].eps
        if den <= EPS_FLOOR and num <= EPS_FLOOR:
            continue
        ratios.append(num / max(den, EPS_FLOOR))
    fit_ratio = [st.fit_residual / st.eps for st in stats
                 if not st.bad and np.isfinite(st.fit_residual) and st.eps > EPS_FLOOR]
    defect = frames.dr - frames.R[:, :, 0]
    return {
        "h": h,
        "frame_difference": max(ratios) if ratios else float("nan"),
        "fit_residual": max(fit_ratio) if fit_ratio else float("nan"),
        "rotation_derivative": frames.l2(frames.dR),
        "tangent_defect": frames.l2(defect),
        "so2_distance": frames.so2_distance,
        "sum_eps": float(sum(st.eps for st in stats)),
        "n_bad": int(sum(st.bad for st in stats)),
        "n_breakpoints": len(frames.breakpoints),
    }


@dataclass
class ScalingRow:
    law_id: str
    h: float
    empirical_constant: float
    passed: bool

    def as_tuple(self):
        return (self.law_id, self.h, self.empirical_constant, "PASS" if self.passed else "FAIL")


@dataclass
class ScalingReport:
    rows: list
    orders: dict
    drift_factor: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def law_passed(self, law_id: str) -> bool:
        return all(r.passed for r in self.rows if r.law_id == law_id)


def _fit_order(hs, values) -> float:
    hs, values = np.asarray(hs, float), np.asarray(values, float)
    ok = (values > 0) & np.isfinite(values)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[ok]), np.log(values[ok]), 1)[0])


def verify_scalings(per_h: list, drift_factor: float = 10.0, target_order: float = 2.0,
                    order_tol: float = 0.3, noise_floor: float = 1e-9) -> ScalingReport:
    """Drift of the empirical constants across an ``h``-sweep.

    ``per_h`` holds :func:`frame_statistics` dicts. Constants tracked:
    ``frame_difference`` (neighbour motions vs cell energies), ``fit_residual``
    (fit misfit vs cell energy), ``rotation_derivative`` (``||R'||``) and
    ``tangent_defect`` (``||r' - R e1|| / h^target_order``). A law passes when
    consecutive constants differ by at most ``drift_factor``; undefined
    constants (nothing to compare) pass trivially. The fitted log-log order of
    ``||r' - R e1||`` is reported as law ``tangent_defect_order`` and passes
    within ``order_tol`` of ``target_order``. Norms below ``noise_floor``
    (piecewise rigid fields) are roundoff and count as exact zeros.
    """
    per_h = sorted(per_h, key=lambda d: -d["h"])
    if len(per_h) < 3:
        raise ConfigError("scaling verification needs at least three values of h")
    rows = []
    # law -> (constant, raw quantity checked against the noise floor)
    laws = {
        "frame_difference": lambda d: (d["frame_difference"], np.inf),
        "fit_residual": lambda d: (d["fit_residual"], np.inf),
        "rotation_derivative": lambda d: (d["rotation_derivative"],) * 2,
        "tangent_defect": lambda d: (d["tangent_defect"] / d["h"] ** target_order, d["tangent_defect"]),
    }
    for law, get in laws.items():
        prev = None
        for d in per_h:
            c, raw = get(d)
            c = float(c)
            defined = raw > noise_floor and np.isfinite(c) and c > 0
            ok = True
            if prev is not None and defined:
                ok = 1.0 / drift_factor <= c / prev <= drift_factor
            rows.append(ScalingRow(law, d["h"], c, ok))
            prev = c if defined else None
    hs = [d["h"] for d in per_h]
    defects = [d["tangent_defect"] for d in per_h]
    order = _fit_order(hs, defects)
    trivial = all(v <= noise_floor for v in defects)
    order_ok = trivial or (np.isfinite(order) and abs(order - target_order) <= order_tol)
    rows.append(ScalingRow("tangent_defect_order", hs[-1], order, bool(order_ok)))
    orders = {"tangent_defect": order, "rotation_derivative": _fit_order(hs, [d["rotation_derivative"] for d in per_h])}
    return ScalingReport(rows, orders, drift_factor)
