"""Solvers for the torus problems: damped Newton, constrained descent, monotone iteration.

Sign convention: the problems are stated with the geometer's positive
Laplacian (``Delta v = -div grad v``), so weak forms use the positive
semidefinite weighted stiffness directly.  Every residual orientation is
calibrated against the exact constant solutions in the test suite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import (
    DomainError,
    ExistenceWindowWarning,
    InfeasibleError,
    NoBracket,
    NonConvergence,
    NoRootError,
    OrderingViolation,
    SingularJacobian,
)
from .functionals import (
    ProblemP1,
    ProblemP2,
    bump_field,
    constraint_A_p1,
    constraint_K,
    construct_feasible_p2,
    functional_I_p1,
    functional_I_p2,
    multiplier_kappa,
    reach_exponential_target,
    _bracket_and_solve,
)
from .geometry import TorusParams
from .mesh import DiskField, DiskMesh, assemble


@dataclass
class SolveOptions:
    """Iteration controls; defaults are the desk-scale settings."""

    tol_abs: float = 1e-10
    tol_rel: float = 1e-10
    max_iter: int = 50
    max_descent_iter: int = 5000
    max_monotone_iter: int = 500
    armijo_factor: float = 0.5
    armijo_slope: float = 1e-4
    min_step: float = 2.0**-20


@dataclass
class SolveReport:
    """Converged field plus diagnostics.

    ``residual_norm`` is the weighted-L2 norm of the discrete strong-form
    residual of the returned field.  ``trace`` holds one
    ``(residual_or_merit, step)`` pair per accepted iteration: the Newton
    solvers record residual norms (non-increasing by the Armijo rule), the
    descent solvers record the constrained functional value, and the monotone
    solver records sup-norm increments.
    """

    field: DiskField
    converged: bool
    iterations: int
    residual_norm: float
    constraint_value: float
    multiplier: float | None
    functional_value: float
    trace: list = dataclass_field(repr=False, default_factory=list)


def _exp_unguarded(x):
    # line-search internals want inf (step rejected), not an exception
    with np.errstate(over="ignore"):
        return np.exp(x)


def _weighted_norm(res, weights):
    """L2(T)-weighted norm of the nodal strong residual ``res_i = F_i / w_i``."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.sqrt(np.sum(res * res / weights))
    return float(out)


def _factorize(matrix):
    try:
        lu = splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise SingularJacobian("sparse factorization failed: %s" % exc) from exc
    return lu


def _newton_loop(residual_fn, jacobian_fn, v0, weights, opts, trace=None, mask=None):
    """Damped Newton with Armijo backtracking on the weighted residual norm.

    ``mask`` restricts the update to a subset of nodes (Dirichlet problems);
    the residual function must already vanish on the complement.
    """
    v = v0.copy()
    trace = trace if trace is not None else []
    F = residual_fn(v)
    res = _weighted_norm(F if mask is None else F[mask], weights)
    if not math.isfinite(res):
        raise DomainError("initial iterate produces a non-finite residual")
    res0 = res
    tol = opts.tol_abs + opts.tol_rel * res0
    trace.append((res, 0.0))
    iterations = 0
    while res > tol and iterations < opts.max_iter:
        J = jacobian_fn(v)
        if mask is not None:
            J = J[mask, :][:, mask]
        lu = _factorize(J)
        delta = -lu.solve(F if mask is None else F[mask])
        if not np.all(np.isfinite(delta)):
            raise SingularJacobian("Newton direction is non-finite")
        step = 1.0
        accepted = False
        while step >= opts.min_step:
            v_trial = v.copy()
            if mask is None:
                v_trial += step * delta
            else:
                v_trial[mask] += step * delta
            F_trial = residual_fn(v_trial)
            res_trial = _weighted_norm(F_trial if mask is None else F_trial[mask], weights)
            if math.isfinite(res_trial) and res_trial <= (1.0 - opts.armijo_slope * step) * res:
                accepted = True
                break
            step *= opts.armijo_factor
        if not accepted:
            raise NonConvergence("Newton line search stalled at residual %g" % res)
        v, F, res = v_trial, F_trial, res_trial
        iterations += 1
        trace.append((res, step))
    if res > tol:
        raise NonConvergence("Newton did not reach tolerance %g in %d iterations (residual %g)"
                             % (tol, opts.max_iter, res))
    return v, res, iterations, trace


# ---------------------------------------------------------------------------
# P1: Delta v + gamma = f e^v in T, v = 0 on the boundary
# ---------------------------------------------------------------------------

def _p1_residual(ops, prob, interior, v):
    ev = _exp_unguarded(v)
    F = ops.stiffness @ v + prob.gamma * ops.volume_mass - ops.volume_mass * (prob.f.values * ev)
    out = np.zeros_like(F)
    out[interior] = F[interior]
    return out


def p1_residual_norm(mesh: DiskMesh, p: TorusParams, prob: ProblemP1, field: DiskField,
                     natural: bool = False) -> float:
    """Weighted-L2 strong residual of the P1 equation.

    With ``natural=False`` only interior rows count (Dirichlet boundary);
    ``natural=True`` scores all rows (zero-flux stationarity of the
    variational path).
    """
    ops = assemble(mesh, p)
    ev = _exp_unguarded(field.values)
    F = ops.stiffness @ field.values + prob.gamma * ops.volume_mass \
        - ops.volume_mass * (prob.f.values * ev)
    if natural:
        return _weighted_norm(F, ops.volume_mass)
    interior = mesh.interior_nodes()
    return _weighted_norm(F[interior], ops.volume_mass[interior])


def solve_p1_newton(mesh: DiskMesh, p: TorusParams, prob: ProblemP1,
                    init: DiskField | None = None, opts: SolveOptions | None = None) -> SolveReport:
    """Damped Newton on the Dirichlet weak form of the P1 problem."""
    opts = opts or SolveOptions()
    ops = assemble(mesh, p)
    interior = mesh.interior_nodes()
    v0 = np.zeros(mesh.n_nodes) if init is None else init.values.copy()
    if not np.all(np.isfinite(v0)):
        raise DomainError("initial field must be finite")
    v0[mesh.boundary_nodes] = 0.0

    def jacobian(v):
        ev = _exp_unguarded(v)
        return (ops.stiffness - sp.diags(ops.volume_mass * prob.f.values * ev)).tocsr()

    v, res, iterations, trace = _newton_loop(
        lambda v: _p1_residual(ops, prob, interior, v), jacobian,
        v0, ops.volume_mass[interior], opts, mask=interior)
    out = DiskField(mesh, v)
    return SolveReport(
        field=out,
        converged=True,
        iterations=iterations,
        residual_norm=res,
        constraint_value=constraint_A_p1(mesh, p, out, prob),
        multiplier=None,
        functional_value=functional_I_p1(mesh, p, out, prob),
        trace=trace,
    )


def _warn_outside_window(condition, message):
    if condition:
        warnings.warn(message, ExistenceWindowWarning, stacklevel=3)


def _project_p1(ops, prob, v, vol_h):
    """Restore the P1 constraint by the exact exponential shift (gamma != 0)."""
    e_int = float(ops.volume_mass @ (prob.f.values * _exp_unguarded(v)))
    target = prob.gamma * vol_h
    if e_int == 0.0 or np.sign(e_int) != np.sign(target):
        return None
    return v + math.log(target / e_int)


def _bump_until_sign(mesh, p, ops, data_field, v, target):
    """Add a calibrated bump so the weighted integral of f e^v hits ``target``."""
    f = data_field.values
    current = float(ops.volume_mass @ (f * _exp_unguarded(v)))
    raise_integral = target > current
    center = int(np.argmax(f)) if raise_integral else int(np.argmin(f))
    stop = np.nonzero(f <= 0.0)[0] if raise_integral else np.nonzero(f >= 0.0)[0]
    from .geometry import orbit_distance_disk

    t_c, s_c = mesh.nodes[center]
    orbit = (p.l + p.r * t_c, p.r * s_c)
    if stop.size:
        d = orbit_distance_disk(p, mesh.nodes[stop, 0], mesh.nodes[stop, 1], orbit)
        delta = max(0.5 * float(np.min(d)), 0.75 * mesh.h * p.r)
    else:
        delta = 0.5 * p.r

    def gap(t0):
        w = v + bump_field(mesh, p, center, delta, t0).values
        return float(ops.volume_mass @ (f * _exp_unguarded(w))) - target

    t0 = _bracket_and_solve(gap)
    return v + bump_field(mesh, p, center, delta, t0).values


def solve_p1_variational(mesh: DiskMesh, p: TorusParams, prob: ProblemP1,
                         init: DiskField | None = None, opts: SolveOptions | None = None) -> SolveReport:
    """Constrained minimization of the P1 energy over {int(f e^v) = gamma Vol}.

    Projected preconditioned descent selects the minimizer; a damped Newton
    polish on the stationarity system finishes to tolerance.  The descent runs
    over the full nodal space, so the stationary field satisfies the interior
    equation with natural (zero-flux) boundary behavior; for gamma = 0 the
    returned field is the multiplier-shifted minimizer and the multiplier is
    reported.
    """
    opts = opts or SolveOptions()
    ops = assemble(mesh, p)
    S, m = ops.stiffness, ops.volume_mass
    vol_h = float(np.sum(m))
    f = prob.f.values
    gamma = prob.gamma

    if gamma > 0 and f.max() <= 0.0:
        raise InfeasibleError("gamma > 0 requires f to be positive somewhere")
    if gamma < 0 and f.min() >= 0.0:
        raise InfeasibleError("gamma < 0 requires f to be negative somewhere")
    if gamma == 0:
        if not (f.min() < 0.0 < f.max()) or float(m @ f) >= 0.0:
            raise InfeasibleError("gamma = 0 requires sign-changing f with negative mean")
    _warn_outside_window(
        gamma > 0 and gamma >= 8.0 * (p.l - p.r) / (p.l * p.r**2),
        "gamma=%g outside the sufficient window (0, %g); existence not guaranteed"
        % (gamma, 8.0 * (p.l - p.r) / (p.l * p.r**2)))

    v = np.zeros(mesh.n_nodes) if init is None else init.values.copy()
    if gamma != 0.0:
        projected = _project_p1(ops, prob, v, vol_h)
        if projected is None:
            v = _bump_until_sign(mesh, p, ops, prob.f, v, gamma * vol_h)
            projected = _project_p1(ops, prob, v, vol_h)
            if projected is None:
                raise InfeasibleError("could not reach the P1 constraint set")
        v = projected
    else:
        e0 = float(m @ (f * _exp_unguarded(v)))
        if e0 != 0.0:
            v = _bump_until_sign(mesh, p, ops, prob.f, v, 0.0)
        v = v - float(m @ v) / vol_h

    precond = _factorize(S + sp.diags(m))
    trace = []
    merit = functional_I_p1(mesh, p, DiskField(mesh, v), prob)
    iterations = 0
    for _ in range(opts.max_descent_iter):
        grad = 2.0 * (S @ v) + 2.0 * gamma * m
        normals = [m * f * _exp_unguarded(v)]
        if gamma == 0.0:
            normals.append(m)
        d, slope = _projected_direction(precond, grad, normals)
        if not math.isfinite(slope) or slope >= 0.0:
            break
        dnorm = _weighted_norm(d * m, m)
        if dnorm <= 1e3 * opts.tol_abs:
            break
        step, accepted = 1.0, False
        while step >= opts.min_step:
            v_t = v + step * d
            if gamma != 0.0:
                v_p = _project_p1(ops, prob, v_t, vol_h)
            else:
                v_p = _restore_zero_integral(ops, prob.f, v_t)
                if v_p is not None:
                    v_p = v_p - float(m @ v_p) / vol_h
            if v_p is not None:
                merit_t = functional_I_p1(mesh, p, DiskField(mesh, v_p), prob)
                if math.isfinite(merit_t) and merit_t <= merit + opts.armijo_slope * step * slope:
                    v, merit, accepted = v_p, merit_t, True
                    break
            step *= opts.armijo_factor
        if not accepted:
            break
        iterations += 1
        trace.append((merit, step))
        if dnorm * step <= 10.0 * opts.tol_abs:
            break

    # polish: damped Newton on the stationarity system
    if gamma != 0.0:
        def residual(w):
            return S @ w + gamma * m - m * (f * _exp_unguarded(w))

        def jacobian(w):
            return (S - sp.diags(m * f * _exp_unguarded(w))).tocsr()

        v, res, polish_iters, trace = _newton_loop(residual, jacobian, v, m, opts, trace=trace)
        out = DiskField(mesh, v)
        w_vec = m * f * _exp_unguarded(v)
        multiplier = float(w_vec @ (S @ v + gamma * m)) / float(w_vec @ w_vec)
        final_res = res
    else:
        v, lam, polish_iters, trace = _kkt_polish_p1_zero_gamma(S, m, f, v, opts, trace)
        if lam <= 0.0:
            raise NonConvergence("recovered multiplier is not positive: %g" % lam)
        v = v + math.log(lam)  # shifted minimizer solves the gamma = 0 equation
        out = DiskField(mesh, v)
        multiplier = lam
        final_res = _weighted_norm(S @ v - m * (f * _exp_unguarded(v)), m)

    return SolveReport(
        field=out,
        converged=True,
        iterations=iterations + polish_iters,
        residual_norm=final_res,
        constraint_value=constraint_A_p1(mesh, p, out, prob),
        multiplier=multiplier,
        functional_value=functional_I_p1(mesh, p, out, prob),
        trace=trace,
    )


def _projected_direction(precond, grad, normals):
    """Preconditioned steepest-descent direction tangent to the constraints.

    Solves the small normal system so that the returned ``d`` satisfies
    ``w @ d = 0`` for every constraint gradient ``w`` while keeping
    ``grad @ d <= 0`` (zero only at constrained stationarity).
    """
    pg = precond.solve(grad)
    pw = np.stack([precond.solve(w) for w in normals], axis=1)
    wmat = np.stack(normals, axis=1)
    a = wmat.T @ pw
    rhs = wmat.T @ pg
    try:
        mu = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        mu = np.linalg.lstsq(a, rhs, rcond=None)[0]
    d = -(pg - pw @ mu)
    return d, float(grad @ d)


def _restore_zero_integral(ops, f_field, v):
    """Move v along the constraint normal until int(f e^v) = 0 (or give up)."""
    m = ops.volume_mass
    f = f_field.values
    for _ in range(60):
        ev = _exp_unguarded(v)
        g = float(m @ (f * ev))
        scale = float(m @ np.abs(f * ev)) + 1e-300
        if abs(g) <= 1e-13 * scale:
            return v
        w = m * f * ev
        wn = w / (np.linalg.norm(w) + 1e-300)
        deriv = float(w @ wn)
        if deriv == 0.0 or not math.isfinite(deriv):
            return None
        v = v - (g / deriv) * wn
        if not np.all(np.isfinite(v)):
            return None
    return None


def _kkt_polish_p1_zero_gamma(S, m, f, v, opts, trace):
    """Damped Newton on the bordered system of the gamma = 0 minimization.

    Unknowns (v, lambda, kappa); equations: S v = lambda m f e^v + kappa m,
    int(f e^v) = 0, int(v) = 0.
    """
    n = v.size
    ev = _exp_unguarded(v)
    denom = float(v @ (m * f * ev))
    lam = float(v @ (S @ v)) / denom if denom != 0.0 else 1.0
    kap = 0.0

    def residual(x):
        w, la, ka = x[:n], x[n], x[n + 1]
        ew = _exp_unguarded(w)
        F = np.empty(n + 2)
        F[:n] = S @ w - la * m * f * ew - ka * m
        F[n] = m @ (f * ew)
        F[n + 1] = m @ w
        return F

    def jacobian(x):
        w, la, _ = x[:n], x[n], x[n + 1]
        ew = _exp_unguarded(w)
        core = S - sp.diags(la * m * f * ew)
        col_la = sp.csc_matrix((-m * f * ew)[:, None])
        col_ka = sp.csc_matrix((-m)[:, None])
        row_c = sp.csc_matrix((m * f * ew)[None, :])
        row_m = sp.csc_matrix(m[None, :])
        zero = sp.csc_matrix((2, 2))
        return sp.bmat([[core, sp.hstack([col_la, col_ka])],
                        [sp.vstack([row_c, row_m]), zero]], format="csr")

    x0 = np.concatenate([v, [lam, kap]])
    weights = np.concatenate([m, [1.0, 1.0]])
    x, _, iters, trace = _newton_loop(residual, jacobian, x0, weights, opts, trace=trace)
    return x[:n], float(x[n]), iters, trace


# ---------------------------------------------------------------------------
# P2: Delta v + a + f e^v = 0 in T, dv/dn + b + g e^v = 0 on the boundary
# ---------------------------------------------------------------------------

def _p2_residual(ops, prob, v):
    ev = _exp_unguarded(v)
    with np.errstate(invalid="ignore"):
        return (ops.stiffness @ v
                + ops.volume_mass * (prob.a + prob.f.values * ev)
                + ops.boundary_mass * (prob.b + prob.g.values * ev))


def p2_residual_norm(mesh: DiskMesh, p: TorusParams, prob: ProblemP2, field: DiskField) -> float:
    """Weighted-L2 strong residual of both P2 equations (all rows)."""
    ops = assemble(mesh, p)
    F = _p2_residual(ops, prob, field.values)
    return _weighted_norm(F, ops.volume_mass + ops.boundary_mass)


def solve_p2_newton(mesh: DiskMesh, p: TorusParams, prob: ProblemP2,
                    init: DiskField | None = None, opts: SolveOptions | None = None) -> SolveReport:
    """Damped Newton on the nonlinear Neumann weak form of the P2 problem."""
    opts = opts or SolveOptions()
    ops = assemble(mesh, p)
    v0 = np.zeros(mesh.n_nodes) if init is None else init.values.copy()
    if not np.all(np.isfinite(v0)):
        raise DomainError("initial field must be finite")

    def jacobian(v):
        ev = _exp_unguarded(v)
        return (ops.stiffness
                + sp.diags(ops.volume_mass * prob.f.values * ev
                           + ops.boundary_mass * prob.g.values * ev)).tocsr()

    weights = ops.volume_mass + ops.boundary_mass
    v, res, iterations, trace = _newton_loop(
        lambda v: _p2_residual(ops, prob, v), jacobian, v0, weights, opts)
    out = DiskField(mesh, v)
    return SolveReport(
        field=out,
        converged=True,
        iterations=iterations,
        residual_norm=res,
        constraint_value=constraint_K(mesh, p, out, prob),
        multiplier=None,
        functional_value=functional_I_p2(mesh, p, out, prob),
        trace=trace,
    )


def solve_p2_variational(mesh: DiskMesh, p: TorusParams, prob: ProblemP2,
                         init: DiskField | None = None, opts: SolveOptions | None = None) -> SolveReport:
    """Constrained minimization of the P2 energy over {K = 0}.

    For a = b = 0 the minimizer is gauge-fixed to zero mean, the constraint
    multiplier is recovered from the e^{-v}-weighted gradient integral, and
    the multiplier-shifted field (polished by Newton) is returned.  With
    (a, b) != 0 the stationary point of the constrained problem satisfies the
    P2 weak form directly.
    """
    opts = opts or SolveOptions()
    ops = assemble(mesh, p)
    S, m, mb = ops.stiffness, ops.volume_mass, ops.boundary_mass
    f, g = prob.f.values, prob.g.values
    if np.all(f == 0.0) and np.all(g[mesh.boundary_nodes] == 0.0):
        raise InfeasibleError("f and g must not both vanish identically")
    r_h = prob.a * float(np.sum(m)) + prob.b * float(np.sum(mb))
    case_zero = prob.a == 0.0 and prob.b == 0.0

    _warn_outside_window(
        prob.a >= 0.0 and prob.b >= 0.0 and not case_zero
        and not (0.0 < prob.R(p) < (8.0 if np.all(g[mesh.boundary_nodes] == 0.0) else 4.0) * math.pi**2 * (p.l - p.r)),
        "R=%g outside the sufficient existence window of the a,b >= 0 regime" % prob.R(p))

    def e_terms(v):
        ev = _exp_unguarded(v)
        return float(m @ (f * ev)) + float(mb @ (g * ev))

    def project(v):
        if case_zero:
            return _restore_zero_e_terms(m, mb, f, g, v)
        e = e_terms(v)
        if e == 0.0 or np.sign(e) == np.sign(r_h):
            return None
        return v + math.log(-r_h / e)

    if init is not None:
        v = init.values.copy()
    else:
        v = np.zeros(mesh.n_nodes)
    v_p = project(v)
    if v_p is None and init is None:
        # smooth projection failed: move the exponential terms by a bump first
        if case_zero:
            v = construct_feasible_p2(mesh, p, prob).values.copy()
        else:
            v = reach_exponential_target(mesh, p, prob.f, prob.g, v, -r_h)
        v_p = project(v)
    if v_p is None:
        if (f.max() <= 0.0 and g[mesh.boundary_nodes].max() <= 0.0 and r_h > 0.0) or \
           (f.min() >= 0.0 and g[mesh.boundary_nodes].min() >= 0.0 and r_h < 0.0):
            raise InfeasibleError("signs of f, g cannot balance R=%g: constraint set empty" % r_h)
        raise InfeasibleError("could not reach the K = 0 constraint set from the initial field")
    v = v_p

    precond = _factorize(S + sp.diags(m + mb))
    merit = functional_I_p2(mesh, p, DiskField(mesh, v), prob)
    trace = []
    iterations = 0
    vol_h = float(np.sum(m))
    for _ in range(opts.max_descent_iter):
        grad = S @ v + prob.a * m + prob.b * mb
        ev = _exp_unguarded(v)
        normals = [m * f * ev + mb * g * ev]
        if case_zero:
            normals.append(m)  # shift gauge: pin the mean
        d, slope = _projected_direction(precond, grad, normals)
        if not math.isfinite(slope) or slope >= 0.0:
            break
        dnorm = _weighted_norm(d * (m + mb), m + mb)
        step, accepted = 1.0, False
        while step >= opts.min_step:
            v_t = project(v + step * d)
            if v_t is not None:
                if case_zero:
                    v_t = v_t - float(m @ v_t) / vol_h
                merit_t = functional_I_p2(mesh, p, DiskField(mesh, v_t), prob)
                if math.isfinite(merit_t) and merit_t <= merit + opts.armijo_slope * step * slope:
                    v, merit, accepted = v_t, merit_t, True
                    break
            step *= opts.armijo_factor
        if not accepted:
            break
        iterations += 1
        trace.append((merit, step))
        if dnorm * step <= 10.0 * opts.tol_abs:
            break

    if case_zero:
        kappa0 = multiplier_kappa(mesh, p, DiskField(mesh, v), prob)
        v, kappa, polish_iters, trace = _kkt_polish_p2_case1(S, m, mb, f, g, v, kappa0, opts, trace)
        if kappa <= 0.0:
            raise NonConvergence("recovered constraint multiplier is not positive: %g" % kappa)
        multiplier = multiplier_kappa(mesh, p, DiskField(mesh, v), prob)
        v = v + math.log(kappa)  # shifted minimizer solves the Neumann problem
        res = _weighted_norm(_p2_residual(ops, prob, v), m + mb)
    else:
        def residual(w):
            return _p2_residual(ops, prob, w)

        def jacobian(w):
            ew = _exp_unguarded(w)
            return (S + sp.diags(m * f * ew + mb * g * ew)).tocsr()

        v, res, polish_iters, trace = _newton_loop(residual, jacobian, v, m + mb, opts, trace=trace)
        ev = _exp_unguarded(v)
        w_vec = m * f * ev + mb * g * ev
        multiplier = float(w_vec @ (S @ v + prob.a * m + prob.b * mb)) / float(w_vec @ w_vec)
    out = DiskField(mesh, v)
    return SolveReport(
        field=out,
        converged=True,
        iterations=iterations + polish_iters,
        residual_norm=res,
        constraint_value=constraint_K(mesh, p, out, prob),
        multiplier=multiplier,
        functional_value=functional_I_p2(mesh, p, out, prob),
        trace=trace,
    )


def _kkt_polish_p2_case1(S, m, mb, f, g, v, kappa0, opts, trace):
    """Damped Newton on the bordered system of the a = b = 0 minimization.

    Unknowns (v, kappa, lambda); equations (in the Euler orientation of the
    constrained problem): S v + kappa w(v) + lambda m = 0 with
    w(v) = m f e^v + mb g e^v, plus sum(w(v)) = 0 and int(v) = 0.  At the
    solution lambda vanishes and v + ln(kappa) solves the Neumann problem.
    """
    n = v.size

    def w_of(w):
        ew = _exp_unguarded(w)
        with np.errstate(invalid="ignore"):
            return m * f * ew + mb * g * ew

    def residual(x):
        w, ka, la = x[:n], x[n], x[n + 1]
        wv = w_of(w)
        F = np.empty(n + 2)
        with np.errstate(invalid="ignore", over="ignore"):
            F[:n] = S @ w + ka * wv + la * m
        F[n] = np.sum(wv)
        F[n + 1] = m @ w
        return F

    def jacobian(x):
        w, ka, _ = x[:n], x[n], x[n + 1]
        wv = w_of(w)
        core = S + sp.diags(ka * wv)
        col_ka = sp.csc_matrix(wv[:, None])
        col_la = sp.csc_matrix(m[:, None])
        row_c = sp.csc_matrix(wv[None, :])
        row_m = sp.csc_matrix(m[None, :])
        zero = sp.csc_matrix((2, 2))
        return sp.bmat([[core, sp.hstack([col_ka, col_la])],
                        [sp.vstack([row_c, row_m]), zero]], format="csr")

    x0 = np.concatenate([v, [kappa0, 0.0]])
    weights = np.concatenate([m + mb, [1.0, 1.0]])
    x, _, iters, trace = _newton_loop(residual, jacobian, x0, weights, opts, trace=trace)
    return x[:n], float(x[n]), iters, trace


def _restore_zero_e_terms(m, mb, f, g, v):
    """Newton along the constraint normal until int(f e^v) + bint(g e^v) = 0."""
    for _ in range(60):
        ev = _exp_unguarded(v)
        w = m * f * ev + mb * g * ev
        val = float(np.sum(w))
        scale = float(np.sum(np.abs(w))) + 1e-300
        if abs(val) <= 1e-13 * scale:
            return v
        wn = w / (np.linalg.norm(w) + 1e-300)
        deriv = float(w @ wn)
        if deriv == 0.0 or not math.isfinite(deriv):
            return None
        v = v - (val / deriv) * wn
        if not np.all(np.isfinite(v)):
            return None
    return None


# ---------------------------------------------------------------------------
# Monotone sub/supersolution iteration (P2, a <= 0, b <= 0 regime)
# ---------------------------------------------------------------------------

def find_constant_bracket(mesh: DiskMesh, p: TorusParams, prob: ProblemP2):
    """Constant sub/supersolution pair for the a, b <= 0 regime.

    The subsolution needs ``a + f e^c <= 0`` and ``b + g e^c <= 0`` at every
    node; the supersolution reverses both.  Returns the binding constants or
    raises ``NoBracket`` when no constants work (constant family only).
    """
    if not (prob.a <= 0.0 and prob.b <= 0.0) or (prob.a == 0.0 and prob.b == 0.0):
        raise DomainError("constant brackets require a <= 0, b <= 0, not both zero")
    f = prob.f.values
    g = prob.g.values[mesh.boundary_nodes]

    upper_bounds = []  # e^c <= bound  (subsolution side)
    for coeff, const in ((f, prob.a), (g, prob.b)):
        pos = coeff[coeff > 0.0]
        if pos.size:
            if const == 0.0:
                raise NoBracket("positive data with zero linear part admit no constant subsolution")
            upper_bounds.append(float(np.min(-const / pos)))
    lower_bounds = []  # e^c >= bound  (supersolution side)
    for coeff, const in ((f, prob.a), (g, prob.b)):
        if const < 0.0:
            if float(coeff.min()) <= 0.0:
                raise NoBracket("nonpositive data cannot dominate a negative linear part")
            lower_bounds.append(float(np.max(-const / coeff)))
        # const == 0 requires coeff >= 0 everywhere, checked via the sub side
    if prob.a == 0.0 and float(f.min()) < 0.0:
        raise NoBracket("a = 0 with sign-changing f admits no constant supersolution")
    if prob.b == 0.0 and float(g.min()) < 0.0:
        raise NoBracket("b = 0 with negative boundary data admits no constant supersolution")

    c_plus = math.log(max(lower_bounds)) if lower_bounds else 0.0
    c_minus = math.log(min(upper_bounds)) if upper_bounds else min(0.0, c_plus)
    if upper_bounds and lower_bounds and c_minus < c_plus - 1e-14 * (1 + abs(c_plus)):
        # binding constants cross only for inconsistent data
        raise NoBracket("constant inequalities are inconsistent: c-=%g > c+=%g" % (c_minus, c_plus))
    c_minus = min(c_minus, c_plus)
    return (DiskField.constant(mesh, c_minus), DiskField.constant(mesh, c_plus))


def solve_p2_monotone(mesh: DiskMesh, p: TorusParams, prob: ProblemP2,
                      sub: DiskField, super: DiskField,
                      opts: SolveOptions | None = None) -> SolveReport:
    """Monotone iteration between an ordered sub/supersolution pair.

    Each step solves the shifted linear problem; iterates from the
    subsolution are nodewise non-decreasing and stay below the supersolution
    (asserted every iteration).  Terminates when the sup-norm increment drops
    below tolerance.
    """
    opts = opts or SolveOptions()
    ops = assemble(mesh, p)
    S, m, mb = ops.stiffness, ops.volume_mass, ops.boundary_mass
    f, g = prob.f.values, prob.g.values
    lo, hi = sub.values, super.values
    slack = 1e-12 * (1.0 + float(np.max(np.abs(hi))) + float(np.max(np.abs(lo))))
    if np.any(lo > hi + slack):
        raise OrderingViolation("subsolution exceeds supersolution at %d nodes"
                                % int(np.sum(lo > hi + slack)))

    # discrete inequality check of the defining sub/supersolution conditions,
    # scored as nodewise strong residuals
    ehi = _exp_unguarded(float(np.max(hi)))
    scale = 1.0 + abs(prob.a) + abs(prob.b) + float(np.max(np.abs(f))) * ehi + float(np.max(np.abs(g))) * ehi
    tol_ineq = 1e-9 * scale
    F_lo = _p2_residual(ops, prob, lo) / (m + mb)
    if np.any(F_lo > tol_ineq):
        raise OrderingViolation("subsolution fails the discrete inequality (max violation %g)"
                                % float(np.max(F_lo)))
    F_hi = _p2_residual(ops, prob, hi) / (m + mb)
    if np.any(F_hi < -tol_ineq):
        raise OrderingViolation("supersolution fails the discrete inequality (min value %g)"
                                % float(np.min(F_hi)))

    w_shift = float(np.max(np.abs(f) * _exp_unguarded(np.max(hi)))) + 1.0
    wb_shift = float(np.max(np.abs(g) * _exp_unguarded(np.max(hi)))) + 1.0
    lu = _factorize(S + sp.diags(w_shift * m + wb_shift * mb))

    v = lo.copy()
    trace = []
    converged = False
    iterations = 0
    tol = opts.tol_abs + opts.tol_rel * float(np.max(hi - lo))
    for iterations in range(1, opts.max_monotone_iter + 1):
        ev = _exp_unguarded(v)
        rhs = m * (w_shift * v - prob.a - f * ev) + mb * (wb_shift * v - prob.b - g * ev)
        v_new = lu.solve(rhs)
        if np.any(v_new < v - slack):
            raise OrderingViolation("iterate decreased at %d nodes (shift too small?)"
                                    % int(np.sum(v_new < v - slack)))
        if np.any(v_new > hi + slack):
            raise OrderingViolation("iterate escaped above the supersolution at %d nodes"
                                    % int(np.sum(v_new > hi + slack)))
        inc = float(np.max(np.abs(v_new - v)))
        trace.append((inc, 1.0))
        v = v_new
        if inc <= tol:
            converged = True
            break
    if not converged:
        raise NonConvergence("monotone iteration did not contract below %g in %d steps"
                             % (tol, opts.max_monotone_iter))
    out = DiskField(mesh, v)
    return SolveReport(
        field=out,
        converged=True,
        iterations=iterations,
        residual_norm=p2_residual_norm(mesh, p, prob, out),
        constraint_value=constraint_K(mesh, p, out, prob),
        multiplier=None,
        functional_value=functional_I_p2(mesh, p, out, prob),
        trace=trace,
    )
