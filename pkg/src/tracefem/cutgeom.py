"""Discrete surface ``Gamma_h``: marching-tetrahedra patches and quadrature.

``Gamma_h`` is the zero set of the P1 interpolant of the level set.  Inside
each cut tetrahedron it is a planar triangle or quadrilateral; quads are
split along the shorter diagonal.  Quadrature data is stored padded per
active tetrahedron (two triangle slots, zero weights when unused) so that
element-level assembly reduces over a fixed axis.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .mesh import EDGES, ActiveMesh
from .quadrature import tet_rule, triangle_rule

logger = logging.getLogger(__name__)

_EDGE_ID = {tuple(e): k for k, e in enumerate(EDGES.tolist())}


def _edge(i, j):
    return _EDGE_ID[(min(i, j), max(i, j))]


def _cut_table():
    """Cut edges, in cyclic order, for each of the 16 vertex sign patterns."""
    table = {}
    for bits in range(16):
        neg = [k for k in range(4) if bits >> k & 1]
        pos = [k for k in range(4) if not bits >> k & 1]
        if len(neg) in (1, 3):
            lone = neg[0] if len(neg) == 1 else pos[0]
            others = [k for k in range(4) if k != lone]
            table[bits] = [_edge(lone, k) for k in others]
        elif len(neg) == 2:
            a, b = neg
            c, d = pos
            table[bits] = [_edge(a, c), _edge(a, d), _edge(b, d), _edge(b, c)]
    return table


_CUT_TABLE = _cut_table()
_PAIR_BASE = np.int64(1) << 32


@dataclass
class SurfaceMesh:
    """Polygonal surface patches, one per active tetrahedron.

    ``tri_points`` has shape ``(T, 3, 3)``; ``tri_owner`` maps triangles to
    local active-tet indices (``0..A-1``).  ``normals`` are the unit
    gradients of the P1 level-set interpolant, pointing toward ``phi > 0``.
    """

    active: ActiveMesh
    tri_points: np.ndarray
    tri_owner: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    dropped: np.ndarray

    @property
    def total_area(self):
        return float(self.areas.sum())

    @property
    def n_triangles(self):
        return len(self.tri_owner)


@dataclass
class SurfaceQuadrature:
    points: np.ndarray   # (A, S, 3)
    weights: np.ndarray  # (A, S), zero in unused slots
    order: int


@dataclass
class VolumeQuadrature:
    points: np.ndarray   # (A, V, 3)
    weights: np.ndarray  # (A, V)
    order: int


def barycentric_gradients(coords):
    """Gradients of barycentric coordinates, shape ``(..., 4, 3)``, and det J."""
    jac = np.swapaxes(coords[..., 1:, :] - coords[..., :1, :], -1, -2)
    det = np.linalg.det(jac)
    # singular cells get the identity so callers can inspect det and raise
    inv = np.linalg.inv(np.where((det == 0.0)[..., None, None], np.eye(3), jac))
    g = np.empty(coords.shape[:-2] + (4, 3))
    g[..., 1:, :] = inv
    g[..., 0, :] = -inv.sum(axis=-2)
    return g, det


def p1_normals(coords, phi):
    g, _ = barycentric_gradients(coords)
    grad = np.einsum("...i,...id->...d", phi, g)
    return grad / np.linalg.norm(grad, axis=-1, keepdims=True)


def extract_patches(active: ActiveMesh) -> SurfaceMesh:
    """Marching tetrahedra over the active set."""
    X = active.parent.vertices
    tets = active.tets
    coords = X[tets]
    phi = active.phi[tets]
    a = phi[:, EDGES[:, 0]]
    b = phi[:, EDGES[:, 1]]
    pa = coords[:, EDGES[:, 0]]
    pb = coords[:, EDGES[:, 1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = a / (a - b)
        cut_pts = pa + s[..., None] * (pb - pa)  # (A, 6, 3), garbage on uncut edges
    normals = p1_normals(coords, phi)
    bits = ((phi < 0) * (1 << np.arange(4))).sum(axis=1)
    gkeys = np.sort(tets[:, EDGES], axis=2)  # global vertex pairs per local edge

    n_act = len(tets)
    tri_pts, tri_own = [], []
    for pattern, edges in _CUT_TABLE.items():
        sel = np.nonzero(bits == pattern)[0]
        if len(sel) == 0:
            continue
        p = cut_pts[sel][:, edges]  # (n, 3|4, 3)
        if len(edges) == 3:
            tri_pts.append(p)
            tri_own.append(sel)
            continue
        d02 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        d13 = np.linalg.norm(p[:, 1] - p[:, 3], axis=1)
        # equal diagonals: take the one through the cut edge whose global
        # vertex pair is lexicographically smallest
        k = gkeys[sel][:, edges]  # (n, 4, 2)
        smallest = np.argmin(k[:, :, 0] * _PAIR_BASE + k[:, :, 1], axis=1)
        tie = np.isclose(d02, d13, rtol=1e-12, atol=0)
        use02 = np.where(tie, smallest % 2 == 0, d02 < d13)
        t1 = np.where(use02[:, None, None], p[:, [0, 1, 2]], p[:, [1, 2, 3]])
        t2 = np.where(use02[:, None, None], p[:, [0, 2, 3]], p[:, [1, 3, 0]])
        tri_pts += [t1, t2]
        tri_own += [sel, sel]
    tri_pts = np.concatenate(tri_pts)
    tri_own = np.concatenate(tri_own)
    order = np.argsort(tri_own, kind="stable")
    tri_pts, tri_own = tri_pts[order], tri_own[order]

    cross = np.cross(tri_pts[:, 1] - tri_pts[:, 0], tri_pts[:, 2] - tri_pts[:, 0])
    flip = np.einsum("td,td->t", cross, normals[tri_own]) < 0
    tri_pts[flip] = tri_pts[flip][:, [0, 2, 1]]
    tri_area = 0.5 * np.linalg.norm(cross, axis=1)
    areas = np.bincount(tri_own, weights=tri_area, minlength=n_act)

    dropped = areas < 1e-14 * active.h ** 2
    if dropped.any():
        logger.warning("dropping %d degenerate surface patches", int(dropped.sum()))
        keep = ~dropped[tri_own]
        tri_pts, tri_own = tri_pts[keep], tri_own[keep]
        areas = np.where(dropped, 0.0, areas)
    return SurfaceMesh(active, tri_pts, tri_own, normals, areas, dropped)


def triangle_quadrature(tri_points, order=4):
    """Map the reference rule onto triangles ``(T, 3, 3)``."""
    bary, w = triangle_rule(order)
    pts = np.einsum("qk,tkd->tqd", bary, tri_points)
    cross = np.cross(tri_points[:, 1] - tri_points[:, 0], tri_points[:, 2] - tri_points[:, 0])
    area = 0.5 * np.linalg.norm(cross, axis=1)
    return pts, area[:, None] * w[None, :]


def patch_quadrature(surf: SurfaceMesh, order=4) -> SurfaceQuadrature:
    """Quadrature on every patch, padded to two triangles per tetrahedron."""
    pts_t, w_t = triangle_quadrature(surf.tri_points, order)
    nq = w_t.shape[1]
    n_act = surf.active.n_active
    # slot 0 for the first triangle of a tet, slot 1 for the second
    first = np.ones(len(surf.tri_owner), dtype=bool)
    first[1:] = surf.tri_owner[1:] != surf.tri_owner[:-1]
    slot = np.where(first, 0, 1)
    pts = np.zeros((n_act, 2, nq, 3))
    w = np.zeros((n_act, 2, nq))
    centroids = surf.active.parent.vertices[surf.active.tets].mean(axis=1)
    pts[:] = centroids[:, None, None, :]  # harmless location for padded slots
    pts[surf.tri_owner, slot] = pts_t
    w[surf.tri_owner, slot] = w_t
    return SurfaceQuadrature(pts.reshape(n_act, 2 * nq, 3), w.reshape(n_act, 2 * nq), order)


def volume_quadrature(coords, order=2) -> VolumeQuadrature:
    """Tetrahedral rule on cells ``coords`` of shape ``(A, 4, 3)``."""
    bary, w = tet_rule(order)
    pts = np.einsum("qk,akd->aqd", bary, coords)
    vol = np.abs(np.linalg.det(np.swapaxes(coords[:, 1:] - coords[:, :1], 1, 2))) / 6.0
    return VolumeQuadrature(pts, vol[:, None] * w[None, :], order)


def surface_area(surf: SurfaceMesh) -> float:
    return surf.total_area
