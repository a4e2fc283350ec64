"""P1 scalar and P2 vector finite element spaces on the active mesh.

Scalar unknowns (c, mu, p) live in P1 on the active vertices.  The velocity
is a full ambient 3-vector in P2; its degrees of freedom are stored
component-major, ``dof = comp * n_nodes + node``.

:class:`TraceSpaces` bundles the discrete surface, quadrature and all shape
function data at quadrature points so that forms can be assembled with a
handful of ``einsum`` calls.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cutgeom
from .levelset import LevelSetSurface, check_gradient_floor
from .mesh import EDGES, ActiveMesh


class GeometryError(ValueError):
    pass


_DET_FLOOR = 1e-14


@dataclass(frozen=True)
class DofMap:
    """Local-to-global numbering for one space on the active mesh.

    ``cell_nodes`` has shape ``(A, 4)`` for P1 and ``(A, 10)`` for P2 (four
    vertices, then the six edges in :data:`tracefem.mesh.EDGES` order).
    """

    kind: str
    cell_nodes: np.ndarray
    node_coords: np.ndarray
    ncomp: int
    vertex_ids: np.ndarray  # parent-mesh vertex index of each P1 node

    @property
    def n_nodes(self):
        return len(self.node_coords)

    @property
    def n_dofs(self):
        return self.ncomp * self.n_nodes

    def cell_dofs(self):
        """Global DOFs per cell in component-major local order."""
        if self.ncomp == 1:
            return self.cell_nodes
        return np.concatenate([self.cell_nodes + k * self.n_nodes for k in range(self.ncomp)], axis=1)


def build_dofmap(active: ActiveMesh, kind: str) -> DofMap:
    """Number the P1 (``"P1_scalar"``) or P2 (``"P2_vector"``) space."""
    X = active.parent.vertices
    tets = active.tets
    verts = active.active_vertices  # sorted, unique
    local = np.searchsorted(verts, tets)
    if kind == "P1_scalar":
        return DofMap(kind, local, X[verts], 1, verts)
    if kind != "P2_vector":
        raise ValueError(f"unknown space kind {kind!r}")
    pairs = np.sort(local[:, EDGES], axis=2)  # (A, 6, 2)
    keys = pairs[..., 0].astype(np.int64) * len(verts) + pairs[..., 1]
    ukeys, inv = np.unique(keys.ravel(), return_inverse=True)
    ea, eb = ukeys // len(verts), ukeys % len(verts)
    mid = 0.5 * (X[verts[ea]] + X[verts[eb]])
    cells = np.concatenate([local, len(verts) + inv.reshape(-1, 6)], axis=1)
    return DofMap(kind, cells, np.concatenate([X[verts], mid]), 3, verts)


# -- shape functions --------------------------------------------------------

def barycentric(coords, points):
    """Barycentric coordinates of ``points (A, Q, 3)`` in cells ``(A, 4, 3)``."""
    grads, det = cutgeom.barycentric_gradients(coords)
    if np.any(np.abs(det) < _DET_FLOOR):
        raise GeometryError("degenerate tetrahedron (|det J| below 1e-14)")
    lam = np.einsum("akd,aqd->aqk", grads, points - coords[:, None, 0, :])
    lam[..., 0] += 1.0
    return lam, grads


def p1_shape(lam, grads):
    """Values ``(A, Q, 4)`` and gradients ``(A, Q, 4, 3)``."""
    g = np.broadcast_to(grads[:, None], lam.shape + (3,))
    return lam, g


def p2_shape(lam, grads):
    """Quadratic Lagrange basis: vertex functions then edge functions."""
    A, Q, _ = lam.shape
    val = np.empty((A, Q, 10))
    grd = np.empty((A, Q, 10, 3))
    val[..., :4] = lam * (2.0 * lam - 1.0)
    grd[..., :4, :] = (4.0 * lam - 1.0)[..., None] * grads[:, None]
    i, j = EDGES[:, 0], EDGES[:, 1]
    val[..., 4:] = 4.0 * lam[..., i] * lam[..., j]
    grd[..., 4:, :] = 4.0 * (lam[..., j, None] * grads[:, None, i] + lam[..., i, None] * grads[:, None, j])
    return val, grd


def eval_shape(kind, coords, points, tol=1e-12):
    """Shape values and physical gradients at ``points`` inside ``coords``.

    Parameters
    ----------
    kind : {"P1", "P2"}
    coords : (A, 4, 3) array
    points : (A, Q, 3) array
    """
    lam, grads = barycentric(coords, points)
    if np.any(lam < -tol) or np.any(lam > 1 + tol):
        raise GeometryError("evaluation point outside its tetrahedron")
    if kind in ("P1", "P1_scalar"):
        return p1_shape(lam, grads)
    if kind in ("P2", "P2_vector"):
        return p2_shape(lam, grads)
    raise ValueError(f"unknown shape kind {kind!r}")


# -- fields -----------------------------------------------------------------

@dataclass
class FieldVector:
    dofmap: DofMap
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.dofmap.n_dofs,):
            raise ValueError(f"expected {self.dofmap.n_dofs} coefficients, got {self.values.shape}")

    def check_finite(self, name="field"):
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError(f"{name} has non-finite entries")
        return self

    def nodal(self):
        """Coefficients as ``(n_nodes,)`` or ``(n_nodes, 3)``."""
        if self.dofmap.ncomp == 1:
            return self.values
        return self.values.reshape(self.dofmap.ncomp, -1).T


def interpolate(dofmap: DofMap, f, t=0.0) -> FieldVector:
    """Nodal interpolant of ``f(points (N, 3))``; vector fields return ``(N, 3)``."""
    vals = np.asarray(f(dofmap.node_coords), dtype=float)
    if dofmap.ncomp == 1:
        vals = np.broadcast_to(vals, (dofmap.n_nodes,))
    else:
        vals = np.broadcast_to(vals, (dofmap.n_nodes, 3)).T
    return FieldVector(dofmap, np.ascontiguousarray(vals).ravel(), t)


def tangential_part(u, n):
    """``u - (u . n) n`` for arrays of vectors."""
    u = np.asarray(u, dtype=float)
    n = np.asarray(n, dtype=float)
    return u - np.sum(u * n, axis=-1, keepdims=True) * n


# -- assembled-space context ------------------------------------------------

@dataclass
class QPData:
    """Shape data at one family of quadrature points (per active tet)."""

    points: np.ndarray
    weights: np.ndarray
    p1: np.ndarray
    p1_grad: np.ndarray
    p2: Optional[np.ndarray] = None
    p2_grad: Optional[np.ndarray] = None


@dataclass
class TraceSpaces:
    """Discrete surface, spaces and cached quadrature data for assembly.

    Surface quantities (``n``, ``P``, surface gradients) use the discrete
    normal ``n_h`` unless ``use_exact_normals`` is set.  Volume
    stabilizations use the quasi-normal ``grad phi / |grad phi|``.
    """

    surface: LevelSetSurface
    active: ActiveMesh
    surface_order: int = 4
    volume_order_p1: int = 2
    volume_order_p2: int = 4
    use_exact_normals: bool = False
    with_p2: bool = True
    patches: cutgeom.SurfaceMesh = field(init=False)
    p1: DofMap = field(init=False)
    p2: Optional[DofMap] = field(init=False)

    def __post_init__(self):
        act = self.active
        self.coords = act.parent.vertices[act.tets]
        self.patches = cutgeom.extract_patches(act)
        self.p1 = build_dofmap(act, "P1_scalar")
        self.p2 = build_dofmap(act, "P2_vector") if self.with_p2 else None
        self.tet_volumes = act.parent.volumes()[act.active_tets]
        self.h = act.h

        sq = cutgeom.patch_quadrature(self.patches, self.surface_order)
        self.sq = self._qp(sq.points, sq.weights, self.with_p2)
        if self.use_exact_normals:
            n = self.surface.normal(sq.points)
        else:
            n = np.broadcast_to(self.patches.normals[:, None, :], sq.points.shape)
        self.n = np.ascontiguousarray(n)
        self.P = np.eye(3) - self.n[..., :, None] * self.n[..., None, :]
        self.p1_sgrad = np.einsum("aqxy,aqky->aqkx", self.P, self.sq.p1_grad)
        self.p2_sgrad = (
            np.einsum("aqxy,aqky->aqkx", self.P, self.sq.p2_grad) if self.with_p2 else None
        )

        vq1 = cutgeom.volume_quadrature(self.coords, self.volume_order_p1)
        self.vq1 = self._qp(vq1.points, vq1.weights, False)
        self.vq1_dn = np.einsum("aqkd,aqd->aqk", self.vq1.p1_grad, self._quasi_normal(vq1.points))
        if self.with_p2:
            vq2 = cutgeom.volume_quadrature(self.coords, self.volume_order_p2)
            self.vq2 = self._qp(vq2.points, vq2.weights, True)
            self.vq2_dn = np.einsum("aqkd,aqd->aqk", self.vq2.p2_grad, self._quasi_normal(vq2.points))

    def _qp(self, points, weights, with_p2):
        lam, grads = barycentric(self.coords, points)
        v1, g1 = p1_shape(lam, grads)
        if not with_p2:
            return QPData(points, weights, v1, g1)
        v2, g2 = p2_shape(lam, grads)
        return QPData(points, weights, v1, g1, v2, g2)

    def _quasi_normal(self, points):
        check_gradient_floor(self.surface, points)
        return self.surface.normal(points)

    # -- evaluation of discrete fields at surface quadrature points ---------
    @property
    def area(self):
        return float(self.sq.weights.sum())

    def scalar_at_qp(self, values):
        return np.einsum("aqk,ak->aq", self.sq.p1, values[self.p1.cell_nodes])

    def scalar_sgrad_at_qp(self, values):
        return np.einsum("aqkd,ak->aqd", self.p1_sgrad, values[self.p1.cell_nodes])

    def vector_at_qp(self, values):
        nodal = values.reshape(3, -1)[:, self.p2.cell_nodes]  # (3, A, 10)
        return np.einsum("aqk,xak->aqx", self.sq.p2, nodal)

    def vector_sdiv_at_qp(self, values):
        """``div_Gamma u = tr(P grad u)`` at surface quadrature points."""
        nodal = values.reshape(3, -1)[:, self.p2.cell_nodes]
        return np.einsum("aqkx,xak->aq", self.p2_sgrad, nodal)

    def vector_sgrad_at_qp(self, values):
        """``P (grad u) P`` at surface quadrature points, shape ``(A, Q, 3, 3)``."""
        nodal = values.reshape(3, -1)[:, self.p2.cell_nodes]
        return np.einsum("aqxy,aqyz->aqxz", self.P, np.einsum("xak,aqkz->aqxz", nodal, self.p2_sgrad))


def build_spaces(surface, active, **kw) -> TraceSpaces:
    return TraceSpaces(surface, active, **kw)
