import math
import warnings

import numpy as np
import pytest

import torusbvp as tb
from oracles import fit_order


def fields(mesh, fval, gval):
    return tb.DiskField.constant(mesh, fval), tb.DiskField.constant(mesh, gval)


def manufactured_p2(n, c=0.3, a=0.5, b=-0.2, l=2.0, r=1.0):
    """Radial solution c(2 - t^2 - s^2) with matched volume and boundary data."""
    p = tb.make_params(l, r)
    mesh = tb.build_mesh(n)
    t, s = mesh.nodes[:, 0], mesh.nodes[:, 1]
    vstar = c * (2.0 - t * t - s * s)
    lap = (2.0 * c / r**2) * (2.0 + r * t / (l + r * t))
    f = -(lap + a) * np.exp(-vstar)
    dvdn = -2.0 * c / r
    g = -(dvdn + b) * np.exp(-vstar)
    return p, mesh, tb.ProblemP2(a, b, tb.DiskField(mesh, f), tb.DiskField(mesh, g)), vstar


def l2_norm(mesh, p, vals):
    ops = tb.assemble(mesh, p)
    return math.sqrt(float(ops.volume_mass @ (vals * vals)))


def k_scale(mesh, p, prob, field):
    ops = tb.assemble(mesh, p)
    ev = np.exp(field.values)
    return (abs(prob.a) * p.volume() + abs(prob.b) * p.boundary_area()
            + float(ops.volume_mass @ np.abs(prob.f.values * ev))
            + float(ops.boundary_mass @ np.abs(prob.g.values * ev)) + 1.0)


def id614_scale(mesh, p, prob, field):
    ops = tb.assemble(mesh, p)
    emv = np.exp(-field.values)
    return (abs(prob.a) * float(ops.volume_mass @ emv) + abs(prob.b) * float(ops.boundary_mass @ emv)
            + abs(float(ops.volume_mass @ prob.f.values)) + abs(float(ops.boundary_mass @ prob.g.values))
            + tb.grad_energy_weighted(mesh, p, field, lambda vc: np.exp(-vc)) + 1.0)


def test_exact_constant_volume_case(params, mesh16):
    f, g = fields(mesh16, -math.exp(-1.0), 0.0)
    rep = tb.solve_p2_newton(mesh16, params, tb.ProblemP2(1.0, 0.0, f, g))
    assert rep.converged
    assert np.abs(rep.field.values - 1.0).max() <= 1e-10
    assert abs(rep.constraint_value) <= 1e-9


def test_exact_constant_boundary_case(params, mesh16):
    f, g = fields(mesh16, 0.0, -math.exp(-2.0))
    rep = tb.solve_p2_newton(mesh16, params, tb.ProblemP2(0.0, 1.0, f, g))
    assert rep.converged
    assert np.abs(rep.field.values - 2.0).max() <= 1e-10


def test_manufactured_robin_convergence():
    errs = []
    for n in (8, 16, 32, 64):
        p, mesh, prob, vstar = manufactured_p2(n)
        rep = tb.solve_p2_newton(mesh, p, prob)
        errs.append(l2_norm(mesh, p, rep.field.values - vstar))
    assert 1.7 <= fit_order(errs) <= 2.3


def test_converged_solutions_satisfy_identities(params):
    cases = []
    p, mesh, prob, _ = manufactured_p2(16)
    cases.append((mesh, p, prob, tb.solve_p2_newton(mesh, p, prob)))
    f, g = fields(mesh, -math.exp(-1.0), 0.0)
    prob_c = tb.ProblemP2(1.0, 0.0, f, g)
    cases.append((mesh, p, prob_c, tb.solve_p2_newton(mesh, p, prob_c)))
    for mesh_i, p_i, prob_i, rep in cases:
        h2 = mesh_i.h**2
        assert abs(rep.constraint_value) <= 10 * h2 * k_scale(mesh_i, p_i, prob_i, rep.field)
        res614 = tb.identity_6_14_residual(mesh_i, p_i, rep.field, prob_i)
        assert abs(res614) <= 10 * h2 * id614_scale(mesh_i, p_i, prob_i, rep.field)


def test_singular_jacobian_on_degenerate_data(params, mesh16):
    f, g = fields(mesh16, 0.0, 0.0)
    with pytest.raises((tb.SingularJacobian, tb.NonConvergence)):
        tb.solve_p2_newton(mesh16, params, tb.ProblemP2(1.0, 0.0, f, g))


def test_variational_case1_multiplier_positive(params, mesh16):
    f = tb.DiskField.from_function(mesh16, lambda t, s: t + 0.55)
    g = tb.DiskField.constant(mesh16, 0.0)
    prob = tb.ProblemP2(0.0, 0.0, f, g)
    rep = tb.solve_p2_variational(mesh16, params, prob)
    assert rep.converged
    assert rep.multiplier > 0.0
    assert abs(rep.constraint_value) <= 10 * mesh16.h**2 * k_scale(mesh16, params, prob, rep.field)
    assert rep.residual_norm <= 1e-8
    res614 = tb.identity_6_14_residual(mesh16, params, rep.field, prob)
    assert abs(res614) <= 10 * mesh16.h**2 * id614_scale(mesh16, params, prob, rep.field)


def test_variational_case1_boundary_data(params, mesh16):
    f = tb.DiskField.constant(mesh16, 0.0)
    g = tb.DiskField.from_function(mesh16, lambda t, s: t + 0.8)
    prob = tb.ProblemP2(0.0, 0.0, f, g)
    rep = tb.solve_p2_variational(mesh16, params, prob)
    assert rep.converged
    assert rep.multiplier > 0.0
    assert rep.residual_norm <= 1e-8


def test_variational_constant_case_multiplier_orientation(params, mesh16):
    """With (a,b) != 0 the fitted stationarity multiplier is -1 in the strong-form
    orientation (the K-gradient enters the weak form with a plus sign)."""
    f, g = fields(mesh16, -math.exp(-1.0), 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", tb.ExistenceWindowWarning)
        rep = tb.solve_p2_variational(mesh16, params, tb.ProblemP2(1.0, 0.0, f, g))
    assert np.abs(rep.field.values - 1.0).max() <= 1e-9
    assert rep.multiplier == pytest.approx(-1.0, abs=1e-8)


def test_variational_rejects_degenerate_and_unbalanced(params, mesh16):
    zero = tb.DiskField.constant(mesh16, 0.0)
    with pytest.raises(tb.InfeasibleError):
        tb.solve_p2_variational(mesh16, params, tb.ProblemP2(0.0, 0.0, zero, zero))
    one = tb.DiskField.constant(mesh16, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", tb.ExistenceWindowWarning)
        with pytest.raises(tb.InfeasibleError):
            tb.solve_p2_variational(mesh16, params, tb.ProblemP2(1.0, 0.0, one, zero))


def test_variational_window_warning(params, mesh16):
    f = tb.DiskField.from_function(mesh16, lambda t, s: t - 0.5)
    zero = tb.DiskField.constant(mesh16, 0.0)
    big_a = (8.0 * math.pi**2 * (params.l - params.r) + 5.0) / params.volume()
    with pytest.warns(tb.ExistenceWindowWarning):
        try:
            tb.solve_p2_variational(mesh16, params, tb.ProblemP2(big_a, 0.0, f, zero),
                                    opts=tb.SolveOptions(max_iter=2, max_descent_iter=2))
        except (tb.NonConvergence, tb.InfeasibleError):
            pass


def test_newton_variational_agreement_manufactured():
    p, mesh, prob, _ = manufactured_p2(16)
    rep_n = tb.solve_p2_newton(mesh, p, prob)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", tb.ExistenceWindowWarning)
        rep_v = tb.solve_p2_variational(mesh, p, prob)
    diff = l2_norm(mesh, p, rep_n.field.values - rep_v.field.values)
    assert diff <= 10 * mesh.h**2
