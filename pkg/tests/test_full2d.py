import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from griffith_beam import full2d as f2
from griffith_beam import limit1d as l1
from griffith_beam.fem import Grid2, operators
from griffith_beam.material import QuadraticDistance, StVenantKirchhoff, relaxed_alpha

QD = QuadraticDistance(1.0)


def identity_field(grid, h):
    X = grid.nodes()
    return f2.DeformationField(grid, np.stack([X[:, 0], h * X[:, 1]], -1), h)


def painted_damage(grid, centre, eps=None):
    eps = 4 * grid.d1 if eps is None else eps
    prof = f2.crack_profile(grid.x1, centre, eps)
    return f2.DamageField(grid, np.repeat(prof, grid.n2), eps)


# -- grid and operators -----------------------------------------------------


def test_grid_layout_and_quadrature():
    g = Grid2.for_beam(1.0, 1 / 16, 5, ext_cells=2)
    assert g.x1[2] == pytest.approx(0.0, abs=1e-15) and g.x1[-3] == pytest.approx(1.0)
    assert g.quad_weights().sum() == pytest.approx(1.0 + 2 * g.eta)
    assert g.node_weights().sum() == pytest.approx(1.0 + 2 * g.eta)
    assert list(g.interior_columns()) == list(range(2, g.n1 - 2))
    with pytest.raises(ValueError):
        Grid2(2, 5, 1.0)


def test_gradient_operator_is_exact_on_affine_fields():
    g = Grid2(9, 4, 1.0)
    h = 0.1
    A = np.array([[1.2, -0.3], [0.4, 0.9]])
    X = g.nodes()
    y = X @ A.T
    F = (operators(g, h).grad_h @ y.ravel()).reshape(-1, 2, 2)
    expect = A.copy()
    expect[:, 1] /= h
    assert np.allclose(F, expect, atol=1e-12)


# -- sharp energy -----------------------------------------------------------


def test_identity_embedding_has_zero_energy():
    g = Grid2(17, 5, 1.0)
    assert f2.energy_Ih_sharp(identity_field(g, 0.1), None, QD, 1.0).total == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("h", [1 / 8, 1 / 32])
@pytest.mark.parametrize("beta", [1.0, 0.3])
def test_crack_anisotropy_exact(h, beta):
    g = Grid2(33, 5, 1.0)
    y = identity_field(g, h)
    vertical = f2.SharpCrackSet.vertical_lines([0.5])
    assert f2.energy_Ih_sharp(y, vertical, QD, beta).surface == pytest.approx(beta, abs=1e-12)
    ell = 0.375
    horizontal = f2.SharpCrackSet([[[0.3, 0.1], [0.3 + ell, 0.1]]])
    assert f2.energy_Ih_sharp(y, horizontal, QD, beta).surface == pytest.approx(beta * ell / h, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.05, 0.4))
def test_anisotropy_law_scales_with_normal(h, length):
    # unit normals e1, e2 and (1,1)/sqrt(2); the tangent is the normal rotated by +90 degrees
    for nu in (np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0]) / math.sqrt(2)):
        t = np.array([-nu[1], nu[0]])
        a = np.array([0.5, 0.0]) - 0.5 * length * t
        cracks = f2.SharpCrackSet([[a, a + length * t]])
        expect = length * math.hypot(nu[0], nu[1] / h)
        assert cracks.anisotropic_length(h) == pytest.approx(expect, rel=1e-12)


def test_crack_outside_domain_rejected():
    g = Grid2(9, 3, 1.0)
    with pytest.raises(f2.GeometryError):
        f2.energy_Ih_sharp(identity_field(g, 0.1), f2.SharpCrackSet([[[0.5, -0.6], [0.5, 0.2]]]), QD, 1.0)


def test_elements_touching_cracks_are_excluded():
    g = Grid2(17, 5, 1.0)
    e = f2.energy_Ih_sharp(identity_field(g, 0.1), f2.SharpCrackSet.vertical_lines([0.5]), QD, 1.0)
    # the crack sits on a node column, so both adjacent element columns are dropped
    assert e.excluded_area == pytest.approx(2 * g.d1)


@settings(max_examples=15, deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_frame_invariance(angle):
    g = Grid2.for_beam(1.0, 1 / 32, 5)
    h = 1 / 16
    curve = l1.arc_curve(1.0, 0.8)
    y, cracks = f2.build_recovery_sequence(curve, StVenantKirchhoff(1.0, 1.0), h, g)
    s = painted_damage(g, 0.4)
    yr = y.rotated(angle, (0.3, -1.0))
    for model in (QD, StVenantKirchhoff(1.0, 1.0)):
        a = f2.energy_Ih_sharp(y, cracks, model, 1.0).total
        b = f2.energy_Ih_sharp(yr, cracks, model, 1.0).total
        assert b == pytest.approx(a, abs=1e-10)
        a = f2.energy_AT(y, s, model, 1.0).total
        b = f2.energy_AT(yr, s, model, 1.0).total
        assert b == pytest.approx(a, abs=1e-10)


# -- recovery sequences -----------------------------------------------------


def test_straight_recovery_is_rigid():
    g = Grid2.for_beam(1.0, 1 / 32, 3)
    y, cracks = f2.build_recovery_sequence(l1.straight_curve(1.0, angle=0.4), QD, 1 / 16, g)
    assert not cracks.polylines
    assert f2.energy_Ih_sharp(y, cracks, QD, 1.0).total <= 1e-20


def test_arc_recovery_approaches_limit():
    curve = l1.arc_curve(1.0, 0.5)
    gaps = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        g = Grid2.for_beam(1.0, h / 2, 3)
        y, cracks = f2.build_recovery_sequence(curve, QD, h, g)
        gaps.append(abs(f2.energy_Ih_sharp(y, cracks, QD, 1.0).total - 1 / 48))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[-1] < 1e-7


def test_svk_recovery_uses_relaxed_constant():
    model = StVenantKirchhoff(1.0, 1.0)
    alpha, _ = relaxed_alpha(model)
    curve = l1.arc_curve(1.0, 0.5)
    g = Grid2.for_beam(1.0, 1 / 64, 17)
    y, cracks = f2.build_recovery_sequence(curve, model, 1 / 64, g)
    e = f2.energy_Ih_sharp(y, cracks, model, 1.0).total
    # through-thickness resolution error of relative size d2^2/8
    assert e == pytest.approx(alpha / 24 * 0.25, rel=2e-3)


def test_jump_recovery_charges_beta():
    a = l1.Segment(0.0, 0.5, np.zeros(17), (0.0, 0.0))
    b = l1.Segment(0.5, 1.0, np.full(17, 0.6), (0.5, 0.1))
    curve = l1.MidlineCurve(1.0, [a, b])
    for h in (1 / 8, 1 / 32):
        g = Grid2.for_beam(1.0, h / 2, 3)
        y, cracks = f2.build_recovery_sequence(curve, QD, h, g)
        e = f2.energy_Ih_sharp(y, cracks, QD, 1.0)
        assert e.surface == 1.0
        assert e.bulk <= 1e-20


def test_bound_violation_reported():
    g = Grid2.for_beam(1.0, 1 / 16, 3)
    with pytest.raises(f2.BoundViolation):
        f2.build_recovery_sequence(l1.straight_curve(1.0, p0=(5.0, 0.0)), QD, 1 / 8, g, M=3.0)
    y = identity_field(g, 0.1)
    y.M = 0.5
    assert y.bound_violations()["violated"]


def test_recovery_consistency_of_extracted_midline():
    curve = l1.arc_curve(1.0, 0.5, delta=1 / 128)
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = Grid2.for_beam(1.0, 1 / 128, 5)
        y, _ = f2.build_recovery_sequence(curve, QD, h, g)
        mid = f2.extract_midline(y)
        t = np.linspace(0, 1, 101)
        errs.append(float(np.max(np.linalg.norm(mid.sample(t) - curve.sample(t), axis=1))))
        assert not mid.breakpoints.size
    assert all(e <= 0.05 * h for e, h in zip(errs, (1 / 8, 1 / 16, 1 / 32)))


def test_extract_midline_finds_painted_jump():
    a = l1.Segment(0.0, 0.5, np.zeros(33), (0.0, 0.0))
    b = l1.Segment(0.5, 1.0, np.full(33, 0.5), (0.5, 0.05))
    g = Grid2.for_beam(1.0, 1 / 64, 5)
    y, _ = f2.build_recovery_sequence(l1.MidlineCurve(1.0, [a, b]), QD, 1 / 16, g)
    mid = f2.extract_midline(y, painted_damage(g, 0.5))
    assert mid.breakpoints.size == 1
    assert abs(mid.breakpoints[0] - 0.5) <= g.d1


# -- phase field ------------------------------------------------------------


def test_at_energy_trivial_cases():
    g = Grid2(17, 5, 1.0)
    y = identity_field(g, 0.1)
    for eta in (0.0, 1e-3):
        e = f2.energy_AT(y, f2.DamageField.intact(g, eta_res=eta), QD, 2.0)
        assert e.total == pytest.approx(0.0, abs=1e-20)
    bent = f2.DeformationField(g, y.y + 0.01 * np.sin(g.nodes()[:, :1] * 3), 0.1)
    assert f2.energy_AT(bent, f2.DamageField.intact(g), QD, 2.0).surface == pytest.approx(0.0, abs=1e-20)


def test_damage_field_validation():
    g = Grid2(9, 3, 1.0)
    with pytest.raises(ValueError):
        f2.DamageField(g, np.full(g.n_nodes, 1.5))
    with pytest.raises(ValueError):
        f2.DamageField(g, np.ones(g.n_nodes), eps_at=0.0)


@pytest.mark.parametrize("factor", [2, 4, 8])
def test_at_calibration_against_profile_oracle(factor):
    g = Grid2(257, 5, 1.0)
    eps = factor * g.d1
    dmg, surface = f2.optimal_crack_profile(g, 1 / 32, 0.5, beta=1.0, eps_at=eps)
    assert surface == pytest.approx(1.0, rel=0.05)
    # the continuous optimal profile 1 - exp(-d/(2 eps))
    d = np.abs(g.x1 - 0.5)
    cont = 1.0 - np.exp(-d / (2 * eps))
    assert np.max(np.abs(dmg.column_min() - cont)) < 0.05


def clamp_setup(phi, h=1 / 32):
    grid = Grid2.for_beam(1.0, 1 / 128, 5, ext_cells=4)
    clamp = l1.rotation_clamps(1.0, phi)
    curve = l1.minimize_fixed_topology(1.0, [], 2.0, None, clamp)
    y0, _ = f2.build_recovery_sequence(curve, QD, h, grid)
    return grid, clamp, y0


def test_straight_clamps_stay_intact():
    grid, clamp, y0 = clamp_setup(0.0)
    r = f2.minimize_AT(y0, f2.DamageField.intact(grid), QD, 0.5, clamp)
    assert r.energy.total <= 1e-8
    assert r.s.s.min() >= 0.999
    assert not f2.extract_midline(r.y, r.s).breakpoints.size


def test_stiff_rotation_clamps_bend_and_descend():
    grid, clamp, y0 = clamp_setup(math.pi / 2)
    r = f2.minimize_AT(y0, f2.DamageField.intact(grid), QD, 10.0, clamp)
    assert r.converged
    hist = np.array(r.history)
    assert np.all(np.diff(hist) <= 1e-12 * np.maximum(1.0, np.abs(hist[:-1])))
    assert r.s.s.min() >= 0.9
    elastica = 2.0 / 24 * (math.pi / 2) ** 2
    assert r.energy.total == pytest.approx(elastica, rel=0.15)


def test_brittle_rotation_clamps_break():
    grid, clamp, _ = clamp_setup(math.pi / 2)
    beta = 0.02
    yb, sb = f2.broken_state(grid, 1 / 32, clamp, 0.5)
    hand_built = f2.energy_AT(yb, sb, QD, beta).total
    r = f2.minimize_AT(yb, sb, QD, beta, clamp)
    assert r.energy.total <= hand_built
    assert r.s.s.min() <= 0.05
    assert r.energy.bulk < beta
    mid = f2.extract_midline(r.y, r.s)
    assert mid.breakpoints.size == len(mid.solver_info["bands"]) == 1
