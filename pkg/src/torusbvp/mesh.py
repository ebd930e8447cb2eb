"""Unit-disk triangulation and weighted operators for torus-reduced integrals.

The mesh is a deterministic concentric-ring triangulation of the closed unit
disk: ring ``k`` (k = 0..n_rings) sits at radius ``k/n_rings`` and carries
``max(1, 6k)`` nodes.  Piecewise-linear elements with the affine weight
``(l + r t)`` give the torus volume form ``2 pi r^2 (l + r t) dt ds``, the
gradient form ``2 pi (l + r t) dt ds`` and the boundary form
``2 pi r (l + r t) dsigma`` exactly up to the O(h^2) polygonal boundary error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .geometry import TorusParams

TWO_PI = 2.0 * math.pi


class DiskMesh:
    """Immutable triangulation of the closed unit disk."""

    def __init__(self, nodes, triangles, boundary_nodes, h):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_nodes = np.ascontiguousarray(boundary_nodes, dtype=np.int64)
        self.h = float(h)
        for a in (self.nodes, self.triangles, self.boundary_nodes):
            a.setflags(write=False)
        self._cache = {}

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def interior_nodes(self):
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.nonzero(mask)[0]


def build_mesh(n_rings: int) -> DiskMesh:
    """Concentric-ring triangulation with nominal mesh size ``h = 1/n_rings``."""
    if n_rings < 2:
        raise DomainError("n_rings must be >= 2, got %r" % (n_rings,))
    nodes = [(0.0, 0.0)]
    ring_start = [0]
    for k in range(1, n_rings + 1):
        ring_start.append(len(nodes))
        m = 6 * k
        ang = np.arange(m) * (TWO_PI / m)
        rad = k / n_rings
        nodes.extend(zip(rad * np.cos(ang), rad * np.sin(ang)))
    nodes = np.asarray(nodes)

    triangles = []
    for j in range(6):  # central fan
        triangles.append((0, 1 + j, 1 + (j + 1) % 6))
    for k in range(2, n_rings + 1):
        i0, m1 = ring_start[k - 1], 6 * (k - 1)
        o0, m2 = ring_start[k], 6 * k
        i = j = 0
        while i < m1 or j < m2:
            # advance whichever ring has the smaller next angle (exact integer compare)
            advance_inner = i < m1 and (j >= m2 or (i + 1) * m2 <= (j + 1) * m1)
            if advance_inner:
                triangles.append((i0 + i, o0 + j % m2, i0 + (i + 1) % m1))
                i += 1
            else:
                triangles.append((o0 + j, o0 + (j + 1) % m2, i0 + i % m1))
                j += 1
    triangles = np.asarray(triangles, dtype=np.int64)

    boundary = np.arange(ring_start[n_rings], ring_start[n_rings] + 6 * n_rings)
    mesh = DiskMesh(nodes, triangles, boundary, 1.0 / n_rings)
    areas = _triangle_geometry(mesh)[0]
    if np.any(areas <= 0.0):
        raise DomainError("mesh construction produced a non-positively-oriented triangle")
    return mesh


def _triangle_geometry(mesh: DiskMesh):
    """Per-triangle areas, P1 basis gradients and centroid t-coordinate (cached)."""
    cached = mesh._cache.get("tri_geom")
    if cached is not None:
        return cached
    pts = mesh.nodes
    tri = mesh.triangles
    p1, p2, p3 = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    det = (p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1]) - (p3[:, 0] - p1[:, 0]) * (p2[:, 1] - p1[:, 1])
    areas = 0.5 * det
    grads = np.empty((tri.shape[0], 3, 2))
    grads[:, 0, 0] = p2[:, 1] - p3[:, 1]
    grads[:, 0, 1] = p3[:, 0] - p2[:, 0]
    grads[:, 1, 0] = p3[:, 1] - p1[:, 1]
    grads[:, 1, 1] = p1[:, 0] - p3[:, 0]
    grads[:, 2, 0] = p1[:, 1] - p2[:, 1]
    grads[:, 2, 1] = p2[:, 0] - p1[:, 0]
    grads /= det[:, None, None]
    t_cent = (p1[:, 0] + p2[:, 0] + p3[:, 0]) / 3.0
    mesh._cache["tri_geom"] = (areas, grads, t_cent)
    return areas, grads, t_cent


def _assemble_core(mesh: DiskMesh, w0: float, w1: float):
    """Raw operators for the affine weight ``w0 + w1 t`` (no 2*pi factors).

    Stiffness uses centroid quadrature, exact for constant gradients against
    an affine weight; masses are vertex-lumped.
    """
    areas, grads, t_cent = _triangle_geometry(mesh)
    tri = mesh.triangles
    w_tri = w0 + w1 * t_cent
    n = mesh.n_nodes

    rows, cols, data = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(tri[:, i])
            cols.append(tri[:, j])
            data.append(areas * w_tri * np.einsum("kd,kd->k", grads[:, i, :], grads[:, j, :]))
    stiffness = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()

    vol_mass = np.zeros(n)
    t_node = mesh.nodes[:, 0]
    for i in range(3):
        np.add.at(vol_mass, tri[:, i], (areas / 3.0) * (w0 + w1 * t_node[tri[:, i]]))

    bnd_mass = np.zeros(n)
    b = mesh.boundary_nodes
    nxt = np.roll(b, -1)
    seg = np.linalg.norm(mesh.nodes[nxt] - mesh.nodes[b], axis=1)
    np.add.at(bnd_mass, b, 0.5 * seg * (w0 + w1 * t_node[b]))
    np.add.at(bnd_mass, nxt, 0.5 * seg * (w0 + w1 * t_node[nxt]))
    return stiffness, vol_mass, bnd_mass


@dataclass(frozen=True)
class WeightedOperators:
    """Assembled torus-weighted operators on a disk mesh.

    ``stiffness`` is symmetric positive semidefinite with the constants as
    kernel; ``volume_mass`` and ``boundary_mass`` are lumped diagonals whose
    sums approximate the torus volume and boundary area.
    """

    params: TorusParams
    mesh: DiskMesh
    stiffness: sp.csr_matrix
    volume_mass: np.ndarray
    boundary_mass: np.ndarray


def assemble(mesh: DiskMesh, p: TorusParams) -> WeightedOperators:
    """Weighted stiffness and lumped volume/boundary masses (memoized per mesh)."""
    key = ("ops", p.l, p.r)
    ops = mesh._cache.get(key)
    if ops is None:
        stiff, vol, bnd = _assemble_core(mesh, p.l, p.r)
        ops = WeightedOperators(
            params=p,
            mesh=mesh,
            stiffness=(TWO_PI * stiff).tocsr(),
            volume_mass=TWO_PI * p.r**2 * vol,
            boundary_mass=TWO_PI * p.r * bnd,
        )
        ops.volume_mass.setflags(write=False)
        ops.boundary_mass.setflags(write=False)
        mesh._cache[key] = ops
    return ops


def disk_operators(mesh: DiskMesh):
    """Unweighted unit-disk operators (stiffness, lumped mass, boundary mass)."""
    key = ("ops_plain",)
    ops = mesh._cache.get(key)
    if ops is None:
        ops = _assemble_core(mesh, 1.0, 0.0)
        mesh._cache[key] = ops
    return ops


@dataclass(frozen=True)
class DiskField:
    """Nodal values of a rotation-invariant function reduced to the disk."""

    mesh: DiskMesh
    values: np.ndarray = dataclass_field(repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_nodes,):
            raise DomainError(
                "field has %r values for a mesh with %d nodes" % (vals.shape, self.mesh.n_nodes)
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, mesh: DiskMesh, fn) -> "DiskField":
        """Sample ``fn(t, s)`` (vectorized) at the mesh nodes."""
        vals = np.asarray(fn(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)
        return cls(mesh, np.broadcast_to(vals, (mesh.n_nodes,)).copy())

    @classmethod
    def constant(cls, mesh: DiskMesh, c: float) -> "DiskField":
        return cls(mesh, np.full(mesh.n_nodes, float(c)))

    def replace(self, values) -> "DiskField":
        return DiskField(self.mesh, np.asarray(values, dtype=float))


def _transformed_values(field: DiskField, transform):
    if transform is None:
        return field.values
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        vals = np.asarray(transform(field.values), dtype=float)
        if vals.shape != field.values.shape:
            vals = np.array([transform(v) for v in field.values], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise OverflowError("transform produced non-finite values")
    return vals


def integrate_volume(mesh: DiskMesh, p: TorusParams, field: DiskField, transform=None) -> float:
    """Torus volume integral of ``transform(v)`` via the lumped weighted mass."""
    ops = assemble(mesh, p)
    return float(ops.volume_mass @ _transformed_values(field, transform))


def integrate_boundary(mesh: DiskMesh, p: TorusParams, field: DiskField, transform=None) -> float:
    """Boundary-torus integral of ``transform(v)`` over the trace of the field."""
    ops = assemble(mesh, p)
    return float(ops.boundary_mass @ _transformed_values(field, transform))


def dirichlet_energy(mesh: DiskMesh, p: TorusParams, field: DiskField) -> float:
    """Squared gradient norm of the lifted field over the torus, v' S v."""
    ops = assemble(mesh, p)
    v = field.values
    return float(v @ (ops.stiffness @ v))


def grad_energy_weighted(mesh: DiskMesh, p: TorusParams, field: DiskField, centroid_transform=None) -> float:
    """Integral of ``|grad v|^2 * w(v)`` with w evaluated at triangle centroids.

    With ``centroid_transform=None`` this reduces to ``dirichlet_energy`` up to
    roundoff; the transform is used for e^{-v}-weighted gradient integrals.
    """
    areas, grads, t_cent = _triangle_geometry(mesh)
    tri = mesh.triangles
    v = field.values
    gvec = np.einsum("kid,ki->kd", grads, v[tri])
    g2 = np.einsum("kd,kd->k", gvec, gvec)
    if centroid_transform is not None:
        v_cent = v[tri].mean(axis=1)
        weights = np.asarray(centroid_transform(v_cent), dtype=float)
        if not np.all(np.isfinite(weights)):
            raise OverflowError("centroid transform produced non-finite values")
        g2 = g2 * weights
    return float(TWO_PI * np.sum(areas * (p.l + p.r * t_cent) * g2))


def export_tables(mesh: DiskMesh, node_path, triangle_path) -> None:
    """Write plain-text node and triangle tables, one record per line."""
    with open(node_path, "w") as f:
        for i, (t, s) in enumerate(mesh.nodes):
            f.write("%d %.17g %.17g\n" % (i, t, s))
    with open(triangle_path, "w") as f:
        for i, (a, b, c) in enumerate(mesh.triangles):
            f.write("%d %d %d %d\n" % (i, a, b, c))
