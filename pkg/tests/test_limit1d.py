import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from griffith_beam import limit1d as l1

ALPHA = 2.0


def kinked_curve(L=1.0, angle=0.7, gap=(0.0, 0.0)):
    a = l1.Segment(0.0, L / 2, np.zeros(33), (0.0, 0.0))
    b = l1.Segment(L / 2, L, np.full(33, angle), np.array([L / 2, 0.0]) + np.asarray(gap))
    return l1.MidlineCurve(L, [a, b])


# -- energies ---------------------------------------------------------------


def test_straight_line_has_zero_energy():
    assert l1.energy_I0(l1.straight_curve(1.0), ALPHA, 1.0).total == 0.0


@pytest.mark.parametrize("kappa, L", [(0.5, 1.0), (2.0, 0.7), (-1.3, 2.0)])
def test_arc_bending(kappa, L):
    e = l1.energy_I0(l1.arc_curve(L, kappa), ALPHA, 1.0)
    assert e.bending == pytest.approx(ALPHA / 24 * kappa ** 2 * L, rel=1e-12)
    assert e.crack_count == 0


def test_union_counts_kink_with_gap_once():
    assert l1.energy_I0(kinked_curve(), ALPHA, 1.0).total == pytest.approx(1.0)
    assert l1.energy_I0(kinked_curve(gap=(0.1, 0.2)), ALPHA, 1.0).crack_count == 1
    # a continuous split is no jump
    assert l1.energy_I0(l1.straight_curve(1.0, breakpoints=[0.3]), ALPHA, 1.0).crack_count == 0


def test_load_terms():
    c = l1.straight_curve(1.0)
    assert l1.energy_J0(c, ALPHA, 1.0, None).total == l1.energy_I0(c, ALPHA, 1.0).total
    assert l1.energy_J0(c, ALPHA, 1.0, l1.LoadProfile.constant((0.0, 1.0))).load == pytest.approx(0.0, abs=1e-15)
    assert l1.energy_J0(c, ALPHA, 1.0, l1.LoadProfile.constant((1.0, 0.0))).load == pytest.approx(0.5, rel=1e-12)


def test_clamp_penalties():
    L = 1.0
    arc = l1.arc_curve(L, math.pi / 2, delta=L / 128)
    clamp = l1.rotation_clamps(L, math.pi / 2)
    tau = 1e-4  # the discrete arc reaches the exact end point up to O(delta^2)
    assert l1.energy_J0_bv(arc, ALPHA, 1.0, None, clamp, tau).boundary_penalty == 0.0
    # positions attained, tangents wrong at both ends
    wrong = l1.ClampSpec(l1.EndClamp((0.0, 0.0), (0.0, 1.0)), l1.EndClamp(clamp.right.position, (1.0, 0.0)))
    e = l1.energy_J0_bv(arc, ALPHA, 3.0, None, wrong, tau)
    assert e.boundary_penalty == 6.0 and e.boundary_violations == 2
    half = l1.ClampSpec(wrong.left, None)
    assert l1.energy_J0_bv(arc, ALPHA, 3.0, None, half, tau).boundary_penalty == 3.0


def test_free_free_bv_reduces_to_I0():
    c = kinked_curve()
    a = l1.energy_J0_bv(c, ALPHA, 0.4, None, l1.ClampSpec()).as_dict()
    b = l1.energy_I0(c, ALPHA, 0.4).as_dict()
    assert a == b


def test_invalid_curve_rejected():
    bad = l1.MidlineCurve(1.0, [l1.Segment(0.0, 0.4, np.zeros(5), (0.0, 0.0))])
    with pytest.raises(l1.InvalidCurveError):
        l1.energy_I0(bad, ALPHA, 1.0)


def test_resolution_order_of_smooth_curve():
    # theta = sin(2t): bending integral (alpha/24) int 4 cos^2(2t) dt
    exact = ALPHA / 24 * (2.0 + math.sin(4.0) / 2)
    errs = []
    for n in (32, 64, 128):
        t = np.linspace(0, 1, n + 1)
        c = l1.MidlineCurve(1.0, [l1.Segment(0.0, 1.0, np.sin(2 * t), (0.0, 0.0))])
        errs.append(abs(l1.energy_I0(c, ALPHA, 1.0).bending - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def circular_force(t):
    return np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], -1)


@settings(max_examples=25, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_euclidean_invariance(angle, c1, c2):
    # zero-mean load, so translations do not change the load term either
    curve = kinked_curve(gap=(0.05, -0.02))
    clamp = l1.rotation_clamps(1.0, 0.9)
    load = l1.LoadProfile(circular_force)
    e0 = l1.energy_J0_bv(curve, ALPHA, 0.7, load, clamp).as_dict()
    e1 = l1.energy_J0_bv(curve.transformed(angle, (c1, c2)), ALPHA, 0.7, load.rotated(angle),
                         clamp.transformed(angle, (c1, c2))).as_dict()
    for k in e0:
        assert e1[k] == pytest.approx(e0[k], abs=1e-10)


# -- solvers ----------------------------------------------------------------


def test_compatible_straight_clamps_give_straight_line():
    clamp = l1.rotation_clamps(1.0, 0.0)
    c = l1.minimize_fixed_topology(1.0, [], ALPHA, None, clamp)
    assert l1.energy_J0_bv(c, ALPHA, 1.0, None, clamp).total == pytest.approx(0.0, abs=1e-12)


def test_clamped_elastica_is_the_arc():
    L, phi = 1.0, math.pi / 2
    clamp = l1.rotation_clamps(L, phi)
    c = l1.minimize_fixed_topology(L, [], ALPHA, None, clamp)
    info = c.solver_info
    assert info["converged"]
    # the start violates the end-position constraint, so the l1 merit is the descending quantity;
    # the energy itself descends once the iterates are feasible
    merit = np.array(info["merit_history"])
    assert np.all(np.diff(merit) <= 1e-12 * (1 + abs(merit[0])))
    hist = np.array(info["energy_history"][1:])
    assert np.all(np.diff(hist) <= 1e-12 * (1 + abs(hist[0])))
    # discrete end-point constraint: O(delta^2) away from the exact arc
    assert l1.energy_J0_bv(c, ALPHA, 1.0, None, clamp).bending == pytest.approx(ALPHA / 24 * phi ** 2, rel=1e-6)
    # reference from a run at 4x resolution
    fine = l1.minimize_fixed_topology(L, [], ALPHA, None, clamp, l1.SolverOptions(delta=L / 256))
    assert l1.energy_I0(fine, ALPHA, 1.0).bending == pytest.approx(l1.energy_I0(c, ALPHA, 1.0).bending, rel=1e-6)


def test_one_breakpoint_free_end_relaxes_to_straight_pieces():
    clamp = l1.ClampSpec(l1.EndClamp((0.0, 0.0), (1.0, 0.0)), None)
    c = l1.minimize_fixed_topology(1.0, [0.4], ALPHA, None, clamp)
    e = l1.energy_J0_bv(c, ALPHA, 0.3, None, clamp, tau_jump=1e-12)
    assert e.bending == pytest.approx(0.0, abs=1e-14)


def test_bad_breakpoints_rejected():
    with pytest.raises(ValueError):
        l1.minimize_fixed_topology(1.0, [0.5, 0.5], ALPHA, None, l1.ClampSpec())
    with pytest.raises(ValueError):
        l1.minimize_fixed_topology(1.0, [1.2], ALPHA, None, l1.ClampSpec())


def test_topology_extremes():
    clamp = l1.rotation_clamps(1.0, math.pi / 2)
    grid = [0.25, 0.5, 0.75]
    stiff = l1.optimize_topology(1.0, ALPHA, 1e6, None, clamp, 2, grid)
    assert stiff.breakpoints == ()
    brittle = l1.optimize_topology(1.0, ALPHA, 1e-6, None, clamp, 2, grid)
    assert len(brittle.breakpoints) >= 1
    assert brittle.energy.bending == pytest.approx(0.0, abs=1e-10)
    # ties go to fewer breakpoints then the smaller breakpoint vector
    assert brittle.breakpoints == (0.25,)


def test_topology_input_validation():
    clamp = l1.rotation_clamps(1.0, 1.0)
    with pytest.raises(ValueError):
        l1.optimize_topology(1.0, ALPHA, 1.0, None, clamp, 5, [0.5])
    with pytest.raises(ValueError):
        l1.optimize_topology(1.0, ALPHA, 1.0, None, clamp, 1, [0.0, 0.5])


def test_crack_count_monotone_in_beta():
    clamp = l1.rotation_clamps(1.0, math.pi / 2)
    counts = [len(l1.optimize_topology(1.0, ALPHA, b, None, clamp, 1, [0.5]).breakpoints)
              for b in (0.01, 0.1, 0.2, 0.21, 1.0, 10.0)]
    assert all(b <= a for a, b in zip(counts[:-1], counts[1:]))
    assert counts[0] == 1 and counts[-1] == 0


def test_curve_rows_round_trip():
    c = kinked_curve(gap=(0.01, 0.02))
    back = l1.MidlineCurve.from_rows(list(c.rows()), c.L)
    for a, b in zip(c.segments, back.segments):
        assert np.allclose(a.theta, b.theta) and np.allclose(a.p, b.p)
