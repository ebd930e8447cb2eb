"""Variational functionals, constraint values and integral identities.

Problem data live on mesh nodes as ``DiskField``s.  Constraint values are
computed with the same lumped quadrature as the operators, so exactly
feasible nodal data (e.g. constant fields) produce exactly zero residuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError, NoRootError
from .geometry import TorusParams, orbit_distance_disk
from .mesh import DiskField, DiskMesh, assemble, dirichlet_energy, grad_energy_weighted

EXP_ARG_CAP = 700.0


def exp_capped(x):
    """Exponential with a hard argument cap; raises ``OverflowError`` beyond it.

    Saturating silently would corrupt constraint values, so arguments above
    700 (just below the float64 overflow threshold) are treated as errors.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x > EXP_ARG_CAP):
        raise OverflowError("exponential argument exceeds cap %g" % EXP_ARG_CAP)
    out = np.exp(x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ProblemP1:
    """Dirichlet problem data: Delta v + gamma = f e^v on T, v = 0 on the boundary."""

    gamma: float
    f: DiskField


@dataclass(frozen=True)
class ProblemP2:
    """Nonlinear Neumann problem data.

    Delta v + a + f e^v = 0 in T and dv/dn + b + g e^v = 0 on the boundary;
    ``g`` is stored as a nodal field but only its boundary trace enters.
    """

    a: float
    b: float
    f: DiskField
    g: DiskField

    def R(self, p: TorusParams) -> float:
        """Linear part a*Vol(T) + b*Vol(boundary) of the compatibility value."""
        return self.a * p.volume() + self.b * p.boundary_area()


def functional_I_p1(mesh: DiskMesh, p: TorusParams, field: DiskField, prob: ProblemP1) -> float:
    """Energy ``|grad v|^2 + 2 gamma * integral(v)`` over the torus."""
    ops = assemble(mesh, p)
    return dirichlet_energy(mesh, p, field) + 2.0 * prob.gamma * float(ops.volume_mass @ field.values)


def constraint_A_p1(mesh: DiskMesh, p: TorusParams, field: DiskField, prob: ProblemP1) -> float:
    """Residual ``integral(f e^v) - gamma * Vol(T)`` of the P1 constraint set.

    The volume is the discrete one (sum of the lumped mass), so constant
    feasible data are exactly feasible.
    """
    ops = assemble(mesh, p)
    ev = exp_capped(field.values)
    return float(ops.volume_mass @ (prob.f.values * ev)) - prob.gamma * float(np.sum(ops.volume_mass))


def functional_I_p2(mesh: DiskMesh, p: TorusParams, field: DiskField, prob: ProblemP2) -> float:
    """Energy ``0.5 |grad v|^2 + a integral(v) + b boundary-integral(v)``."""
    ops = assemble(mesh, p)
    v = field.values
    return (
        0.5 * dirichlet_energy(mesh, p, field)
        + prob.a * float(ops.volume_mass @ v)
        + prob.b * float(ops.boundary_mass @ v)
    )


def constraint_K(mesh: DiskMesh, p: TorusParams, field: DiskField, prob: ProblemP2) -> float:
    """Compatibility value K(v) = a Vol + b Vol_b + int(f e^v) + bint(g e^v).

    Vanishes on every solution of the Neumann problem; discrete volumes keep
    constant cancellation exact.
    """
    ops = assemble(mesh, p)
    ev = exp_capped(field.values)
    return (
        prob.a * float(np.sum(ops.volume_mass))
        + prob.b * float(np.sum(ops.boundary_mass))
        + float(ops.volume_mass @ (prob.f.values * ev))
        + float(ops.boundary_mass @ (prob.g.values * ev))
    )


def identity_6_14_residual(mesh: DiskMesh, p: TorusParams, field: DiskField, prob: ProblemP2) -> float:
    """Residual of the e^{-v}-weighted compatibility identity.

    ``a int(e^-v) + b bint(e^-v) + int(f) + bint(g) - int(e^-v |grad v|^2)``
    is zero (to quadrature accuracy) exactly when the field solves the
    Neumann problem.  The gradient term uses piecewise-constant gradients and
    centroid values of e^{-v}.
    """
    ops = assemble(mesh, p)
    emv = exp_capped(-field.values)
    grad_term = grad_energy_weighted(mesh, p, field, lambda vc: exp_capped(-vc))
    return (
        prob.a * float(ops.volume_mass @ emv)
        + prob.b * float(ops.boundary_mass @ emv)
        + float(ops.volume_mass @ prob.f.values)
        + float(ops.boundary_mass @ prob.g.values)
        - grad_term
    )


def multiplier_kappa(mesh: DiskMesh, p: TorusParams, field: DiskField, prob: ProblemP2) -> float:
    """Constraint multiplier of the a=b=0 minimization.

    ``kappa = int(|grad v|^2 e^-v) / (int f + bint g)``; positive whenever the
    data admit the problem.  The solution of the Neumann problem is the
    shifted field ``v + ln(kappa)`` (calibrated against exact solutions).
    """
    ops = assemble(mesh, p)
    denom = float(ops.volume_mass @ prob.f.values) + float(ops.boundary_mass @ prob.g.values)
    if denom == 0.0:
        raise DomainError("multiplier undefined: int(f) + bint(g) vanishes")
    num = grad_energy_weighted(mesh, p, field, lambda vc: exp_capped(-vc))
    return num / denom


def mean_value(mesh: DiskMesh, p: TorusParams, field: DiskField, where: str = "volume") -> float:
    """Weighted mean of the field over the torus volume or its boundary."""
    ops = assemble(mesh, p)
    if where == "volume":
        w = ops.volume_mass
    elif where == "boundary":
        w = ops.boundary_mass
    else:
        raise DomainError("where must be 'volume' or 'boundary', got %r" % (where,))
    return float(w @ field.values) / float(np.sum(w))


def smooth_cutoff(x):
    """C-infinity transition: 1 on [0, 1/2], 0 on [1, inf), monotone between."""
    x = np.asarray(x, dtype=float)
    u = np.clip(2.0 * x - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        qa = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        qb = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    out = qb / (qa + qb)
    return float(out) if out.ndim == 0 else out


def bump_field(mesh: DiskMesh, p: TorusParams, center_node: int, delta: float, t0: float) -> DiskField:
    """Smooth bump ``t0 * eta(d / delta)`` around the orbit of a mesh node."""
    t_c, s_c = mesh.nodes[center_node]
    orbit = (p.l + p.r * t_c, p.r * s_c)
    d = orbit_distance_disk(p, mesh.nodes[:, 0], mesh.nodes[:, 1], orbit)
    return DiskField(mesh, t0 * smooth_cutoff(d / delta))


def _bracket_and_solve(fn, lo=-60.0, hi=60.0, n_scan=61):
    """Root of a continuous scalar function on [lo, hi] via scan + brentq."""
    from scipy.optimize import brentq

    ts = np.linspace(lo, hi, n_scan)
    vals = np.array([fn(t) for t in ts])
    sign = np.sign(vals)
    if np.any(vals == 0.0):
        return float(ts[np.nonzero(vals == 0.0)[0][0]])
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if idx.size == 0:
        raise NoRootError("no sign change of the bump equation on [%g, %g]" % (lo, hi))
    a, b = ts[idx[0]], ts[idx[0] + 1]
    return float(brentq(fn, a, b, xtol=1e-13, rtol=8.9e-16))


def reach_exponential_target(mesh: DiskMesh, p: TorusParams, f_field: DiskField, g_field: DiskField,
                             base: np.ndarray, target: float) -> np.ndarray:
    """Add a calibrated bump so ``int(f e^v) + bint(g e^v)`` hits ``target``.

    The bump sits on the orbit of the node where the data pull in the needed
    direction most strongly, with radius half the distance to the set where
    they pull the other way; the amplitude is solved by 1D root finding.
    """
    ops = assemble(mesh, p)
    f, g = f_field.values, g_field.values
    with np.errstate(over="ignore"):
        ev0 = np.exp(base)
    e0 = float(ops.volume_mass @ (f * ev0)) + float(ops.boundary_mass @ (g * ev0))
    sgn = 1.0 if target < e0 else -1.0  # sgn*density must be negative where the bump sits

    # combined lumped density decides where amplifying e^v moves the value the
    # right way: boundary masses dominate volume masses for boundary nodes
    density = ops.volume_mass * f + ops.boundary_mass * g
    helpful = sgn * density < 0.0
    if not np.any(helpful):
        raise InfeasibleError("data have no values of the sign needed to reach the target")
    is_bnd = np.zeros(mesh.n_nodes, dtype=bool)
    is_bnd[mesh.boundary_nodes] = True
    score = sgn * f + np.where(is_bnd, sgn * g, 0.0)
    cand = np.nonzero(helpful)[0]
    center = int(cand[np.argmin(score[cand])])

    nodes = mesh.nodes
    t_c, s_c = nodes[center]
    orbit = (p.l + p.r * t_c, p.r * s_c)
    stop = np.nonzero(~helpful)[0]
    stop = stop[stop != center]
    if stop.size:
        d_stop = orbit_distance_disk(p, nodes[stop, 0], nodes[stop, 1], orbit)
        delta = 0.5 * float(np.min(d_stop))
    else:
        delta = 0.5 * p.r
    delta = max(delta, 0.75 * mesh.h * p.r)  # keep at least the center node inside the plateau

    def gap(t0):
        v = base + bump_field(mesh, p, center, delta, t0).values
        with np.errstate(over="ignore"):
            ev = np.exp(np.minimum(v, EXP_ARG_CAP))
        return float(ops.volume_mass @ (f * ev)) + float(ops.boundary_mass @ (g * ev)) - target

    t0 = _bracket_and_solve(gap)
    return base + bump_field(mesh, p, center, delta, t0).values


def construct_feasible_p2(mesh: DiskMesh, p: TorusParams, prob: ProblemP2, tol_scale: float = 1e-8) -> DiskField:
    """Feasible point of {K = 0} for a = b = 0 via a calibrated smooth bump.

    Places a bump on the orbit where the data are most negative (volume data
    first, boundary data otherwise) with radius half the distance to the
    nonnegative set, then solves K(bump amplitude) = 0 by 1D root finding.
    """
    if prob.a != 0.0 or prob.b != 0.0:
        raise DomainError("feasible-point construction requires a = b = 0")
    ops = assemble(mesh, p)
    f = prob.f.values
    g = prob.g.values
    bidx = mesh.boundary_nodes
    total = float(ops.volume_mass @ f) + float(ops.boundary_mass @ g)
    if total <= 0.0:
        raise InfeasibleError("int(f) + bint(g) must be positive, got %g" % total)
    if float(f.min()) >= 0.0 and float(g[bidx].min()) >= 0.0:
        raise InfeasibleError("f and g are both nonnegative: the constraint set is empty")

    values = reach_exponential_target(mesh, p, prob.f, prob.g, np.zeros(mesh.n_nodes), 0.0)
    field = DiskField(mesh, values)
    k_val = constraint_K(mesh, p, field, prob)
    tol = tol_scale * (abs(float(ops.volume_mass @ f)) + abs(float(ops.boundary_mass @ g)) + 1.0)
    if abs(k_val) > tol:
        raise NoRootError("bump calibration left |K| = %g above tolerance %g" % (abs(k_val), tol))
    return field
