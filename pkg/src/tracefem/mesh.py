"""Background tetrahedral meshes of a cube and their active (cut) subsets.

The initial mesh splits ``[-a, a]^3`` into 2x2x2 sub-cubes and each
sub-cube into six Kuhn tetrahedra sharing the main diagonal.  Uniform
refinement follows Bey's ordering of the eight red children, which maps a
Kuhn simplex onto eight congruent half-size Kuhn simplices, so the mesh
size at level ``l`` is exactly ``a / 2**l``.

Tetrahedra are stored positively oriented.  ``swapped[i]`` records whether
the last two vertices were exchanged with respect to the Bey (path) order
used by the refinement rules.
"""
import logging
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

logger = logging.getLogger(__name__)

# local edge numbering shared by refinement, P2 dofs and cut extraction
EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])

# Bey's red children; indices 0-3 are vertices, 4-9 midpoints of EDGES
_RED_CHILDREN = np.array([
    [0, 4, 5, 6], [4, 1, 7, 8], [5, 7, 2, 9], [6, 8, 9, 3],
    [4, 5, 6, 8], [4, 5, 7, 8], [5, 6, 8, 9], [5, 7, 8, 9],
])

# green patterns as bitmasks over EDGES: (mask, face vertices, opposite vertex)
_FACE_PATTERNS = (
    (1 | 2 | 8, (0, 1, 2), 3),
    (1 | 4 | 16, (0, 1, 3), 2),
    (2 | 4 | 32, (0, 2, 3), 1),
    (8 | 16 | 32, (1, 2, 3), 0),
)
_KEY = np.int64(1) << 32


class MeshError(RuntimeError):
    """Invalid mesh topology or an empty active set."""


@dataclass
class BackgroundMesh:
    vertices: np.ndarray
    tets: np.ndarray
    level: int = 0
    box_half_width: float = 5.0 / 3.0
    depth: np.ndarray = None
    swapped: np.ndarray = None
    green: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        nt = len(self.tets)
        if self.depth is None:
            self.depth = np.full(nt, self.level, dtype=np.int64)
        if self.swapped is None:
            self.swapped = np.zeros(nt, dtype=bool)
        if self.green is None:
            self.green = np.zeros(nt, dtype=bool)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    @property
    def h(self):
        """Size of the finest tetrahedra (edge of the Kuhn cube)."""
        return self.box_half_width / 2.0 ** int(self.depth.max())

    def tet_h(self):
        return self.box_half_width / 2.0 ** self.depth

    def signed_volumes(self):
        return signed_volumes(self.vertices, self.tets)

    def volumes(self):
        return np.abs(self.signed_volumes())

    def bey_order(self):
        t = self.tets.copy()
        s = self.swapped
        t[s, 2], t[s, 3] = self.tets[s, 3], self.tets[s, 2]
        return t


@dataclass
class ActiveMesh:
    """Cut tetrahedra ``T_h^Gamma`` of a background mesh."""

    parent: BackgroundMesh
    active_tets: np.ndarray
    active_vertices: np.ndarray
    phi: np.ndarray  # perturbed nodal level-set values for *all* parent vertices
    h: float = field(init=False)

    def __post_init__(self):
        self.h = self.parent.h

    @property
    def tets(self):
        """Vertex indices (into the parent) of the active tetrahedra."""
        return self.parent.tets[self.active_tets]

    @property
    def n_active(self):
        return len(self.active_tets)

    def vertex_coords(self):
        return self.parent.vertices

    def band_volume(self):
        return float(self.parent.volumes()[self.active_tets].sum())


def signed_volumes(vertices, tets):
    p = vertices[tets]
    d = p[:, 1:] - p[:, :1]
    return np.linalg.det(d) / 6.0


def _orient(vertices, tets):
    """Return positively oriented copies of ``tets`` and the swap mask."""
    tets = np.array(tets, dtype=np.int64, copy=True)
    neg = signed_volumes(vertices, tets) < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()
    return tets, neg


def build_initial(half_width=5.0 / 3.0):
    """Kuhn subdivision of ``[-a, a]^3`` into 8 cubes x 6 tetrahedra."""
    if not half_width > 0:
        raise ValueError("box half width must be positive")
    a = float(half_width)
    g = np.arange(3)
    I, J, K = np.meshgrid(g, g, g, indexing="ij")
    idx = np.stack([I.ravel(), J.ravel(), K.ravel()], axis=1)
    vertices = -a + a * idx.astype(float)

    def vid(i, j, k):
        return i * 9 + j * 3 + k

    tets = []
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for perm in permutations(range(3)):
                    cur = [i, j, k]
                    path = [vid(*cur)]
                    for axis in perm:
                        cur[axis] += 1
                        path.append(vid(*cur))
                    tets.append(path)
    tets, swapped = _orient(vertices, np.array(tets))
    return BackgroundMesh(vertices, tets, level=0, box_half_width=a, swapped=swapped)


def _edge_keys(t):
    a = t[..., EDGES[:, 0]]
    b = t[..., EDGES[:, 1]]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo * _KEY + hi


def _red_split(bey, mids):
    loc = np.concatenate([bey, mids], axis=1)
    return loc[:, _RED_CHILDREN].reshape(-1, 4)


def refine_uniform(mesh: BackgroundMesh) -> BackgroundMesh:
    """Red-refine every tetrahedron (8 children, edge midpoints)."""
    bey = mesh.bey_order()
    keys = _edge_keys(bey)
    uk, inv = np.unique(keys.ravel(), return_inverse=True)
    lo, hi = uk // _KEY, uk % _KEY
    new_v = 0.5 * (mesh.vertices[lo] + mesh.vertices[hi])
    vertices = np.vstack([mesh.vertices, new_v])
    mids = mesh.n_vertices + inv.reshape(-1, 6)
    children = _red_split(bey, mids)
    tets, swapped = _orient(vertices, children)
    return BackgroundMesh(
        vertices, tets, level=mesh.level + 1, box_half_width=mesh.box_half_width,
        depth=np.repeat(mesh.depth + 1, 8), swapped=swapped,
    )


def build_level(level, half_width=5.0 / 3.0):
    mesh = build_initial(half_width)
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def _perturb(phi, h):
    eps = 1e-12 * h
    return np.where(np.abs(phi) < eps, eps, phi)


def _cut_mask(phi_at_tets):
    return (phi_at_tets.min(axis=1) < 0) & (phi_at_tets.max(axis=1) > 0)


class _RedGreenRefiner:
    """Nonconforming red hierarchy plus a green closure pass.

    Leaves are red tetrahedra in Bey order.  Hanging edge midpoints are
    tolerated one level deep; leaves with deeper hanging nodes are
    red-refined.  The closure splits a leaf with one hanging edge into two,
    one with a fully refined face into four, and cones any other pattern
    from its centroid over its triangulated faces.  Face triangulations
    depend only on the face, so neighbours always match.
    """

    def __init__(self, mesh: BackgroundMesh, surface):
        self.surface = surface
        self.a = mesh.box_half_width
        self.level = mesh.level
        self.vertices = mesh.vertices.copy()
        self.leaves = mesh.bey_order()
        self.depth = mesh.depth.copy()
        self.mkeys = np.empty(0, dtype=np.int64)
        self.mvals = np.empty(0, dtype=np.int64)
        self.phi = surface.nodal_phi(self.vertices)

    def _lookup(self, keys):
        pos = np.searchsorted(self.mkeys, keys)
        pos = np.minimum(pos, max(len(self.mkeys) - 1, 0))
        if len(self.mkeys) == 0:
            return np.zeros(keys.shape, dtype=bool), np.zeros(keys.shape, dtype=np.int64)
        found = self.mkeys[pos] == keys
        return found, self.mvals[pos]

    def red(self, mask):
        if not mask.any():
            return
        t = self.leaves[mask]
        keys = _edge_keys(t)
        uk, inv = np.unique(keys.ravel(), return_inverse=True)
        found, vals = self._lookup(uk)
        new = uk[~found]
        nv = len(self.vertices)
        lo, hi = new // _KEY, new % _KEY
        coords = 0.5 * (self.vertices[lo] + self.vertices[hi])
        self.vertices = np.vstack([self.vertices, coords])
        self.phi = np.concatenate([self.phi, self.surface.nodal_phi(coords)])
        new_ids = nv + np.arange(len(new), dtype=np.int64)
        vals = vals.copy()
        vals[~found] = new_ids
        allk = np.concatenate([self.mkeys, new])
        allv = np.concatenate([self.mvals, new_ids])
        order = np.argsort(allk, kind="stable")
        self.mkeys, self.mvals = allk[order], allv[order]
        mids = vals[inv].reshape(-1, 6)
        children = _red_split(t, mids)
        self.leaves = np.vstack([self.leaves[~mask], children])
        self.depth = np.concatenate([self.depth[~mask], np.repeat(self.depth[mask] + 1, 8)])

    def _hanging(self):
        keys = _edge_keys(self.leaves)
        found, mids = self._lookup(keys)
        return keys, found, mids

    def close(self):
        while True:
            keys, found, mids = self._hanging()
            if not found.any():
                return
            # midpoints of half-edges mean a neighbour two levels finer
            lo, hi = keys // _KEY, keys % _KEY
            r, c = np.nonzero(found)
            m = mids[r, c]
            k1 = np.minimum(lo[r, c], m) * _KEY + np.maximum(lo[r, c], m)
            k2 = np.minimum(hi[r, c], m) * _KEY + np.maximum(hi[r, c], m)
            f1, _ = self._lookup(k1)
            f2, _ = self._lookup(k2)
            bad = np.zeros(len(self.leaves), dtype=bool)
            bad[r[f1 | f2]] = True
            if not bad.any():
                return
            self.red(bad)

    def _face_triangles(self, v, m, hang):
        """Triangulate one face; identical on both sides of a shared face."""
        (a, b, c), (mab, mbc, mac), (hab, hbc, hac) = v, m, hang
        n = hab + hbc + hac
        if n == 0:
            return [(a, b, c)]
        if n == 3:
            return [(a, mab, mac), (mab, b, mbc), (mac, mbc, c), (mab, mbc, mac)]
        if n == 1:
            if hab:
                return [(a, mab, c), (mab, b, c)]
            if hbc:
                return [(b, mbc, a), (mbc, c, a)]
            return [(c, mac, b), (mac, a, b)]
        # two hanging edges: corner triangle plus a quadrilateral
        if not hab:
            p, q, r, mpr, mqr = a, b, c, mac, mbc
        elif not hbc:
            p, q, r, mpr, mqr = b, c, a, mab, mac
        else:
            p, q, r, mpr, mqr = c, a, b, mbc, mab
        X = self.vertices
        d1 = np.linalg.norm(X[p] - X[mqr])
        d2 = np.linalg.norm(X[q] - X[mpr])
        if d1 < d2 or (d1 == d2 and p < q):
            quad = [(p, q, mqr), (p, mqr, mpr)]
        else:
            quad = [(p, q, mpr), (q, mqr, mpr)]
        return [(mpr, mqr, r)] + quad

    def green(self):
        """Conforming tetrahedra, owning leaf index, green flag, extra vertices."""
        _, found, mids = self._hanging()
        bits = (found * (1 << np.arange(6))).sum(axis=1)
        t = self.leaves
        plain = bits == 0
        out, owner = [t[plain]], [np.nonzero(plain)[0]]
        handled = plain.copy()
        for e, (i, j) in enumerate(EDGES):
            sel = np.nonzero(bits == (1 << e))[0]
            handled[sel] = True
            if len(sel) == 0:
                continue
            m = mids[sel, e]
            c1 = t[sel].copy()
            c1[:, j] = m
            c2 = t[sel].copy()
            c2[:, i] = m
            out += [c1, c2]
            owner += [sel, sel]
        edge_index = {tuple(p): n for n, p in enumerate(EDGES.tolist())}
        for mask, (i, j, k), l in _FACE_PATTERNS:
            sel = np.nonzero(bits == mask)[0]
            handled[sel] = True
            if len(sel) == 0:
                continue
            v = t[sel]
            mij = mids[sel, edge_index[(i, j)]]
            mjk = mids[sel, edge_index[(j, k)]]
            mik = mids[sel, edge_index[(i, k)]]
            vi, vj, vk, vl = v[:, i], v[:, j], v[:, k], v[:, l]
            for child in (
                (vi, mij, mik, vl), (mij, vj, mjk, vl),
                (mik, mjk, vk, vl), (mij, mjk, mik, vl),
            ):
                out.append(np.stack(child, axis=1))
                owner.append(sel)
        # remaining patterns: cone the triangulated boundary from the centroid
        rest = np.nonzero(~handled)[0]
        centroids = []
        nv = len(self.vertices)
        cone, cone_owner = [], []
        for n, leaf in enumerate(rest):
            tv = t[leaf]
            cid = nv + n
            centroids.append(self.vertices[tv].mean(axis=0))
            for (i, j, k) in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
                es = (edge_index[(i, j)], edge_index[(j, k)], edge_index[(i, k)])
                tris = self._face_triangles(
                    (tv[i], tv[j], tv[k]),
                    tuple(mids[leaf, e] for e in es),
                    tuple(bool(found[leaf, e]) for e in es),
                )
                for tri in tris:
                    cone.append((cid,) + tuple(tri))
                    cone_owner.append(leaf)
        if cone:
            out.append(np.array(cone, dtype=np.int64))
            owner.append(np.array(cone_owner, dtype=np.int64))
        tets = np.vstack(out)
        owner = np.concatenate(owner)
        order = np.argsort(owner, kind="stable")
        tets, owner = tets[order], owner[order]
        is_green = ~plain[owner]
        extra = np.array(centroids).reshape(-1, 3)
        return tets, owner, is_green, extra

    def to_mesh(self):
        tets, owner, is_green, extra = self.green()
        vertices = np.vstack([self.vertices, extra])
        oriented, swapped = _orient(vertices, tets)
        return BackgroundMesh(
            vertices, oriented, level=self.level, box_half_width=self.a,
            depth=self.depth[owner], swapped=swapped, green=is_green,
        )


def refine_toward_surface(mesh: BackgroundMesh, surface, extra_levels: int) -> BackgroundMesh:
    """Refine cut tetrahedra ``extra_levels`` more times, red with green closure.

    After the call every tetrahedron cut by the surface sits at depth
    ``mesh.depth.max() + extra_levels`` and the mesh is conforming.
    """
    if extra_levels < 0:
        raise ValueError("extra_levels must be >= 0")
    if extra_levels == 0:
        return mesh
    ref = _RedGreenRefiner(mesh, surface)
    base = int(mesh.depth.max())
    for k in range(extra_levels):
        target = base + k + 1
        h_leaf = ref.a / 2.0 ** ref.depth
        cut = _cut_mask(_perturb(ref.phi[ref.leaves], h_leaf[:, None]))
        ref.red(cut & (ref.depth < target))
        while True:
            ref.close()
            tets, owner, _, extra = ref.green()
            hmin = ref.a / 2.0 ** target
            phi = np.concatenate([ref.phi, ref.surface.nodal_phi(extra)])
            active = _cut_mask(_perturb(phi[tets], hmin))
            low = np.zeros(len(ref.leaves), dtype=bool)
            low[owner[active]] = True
            low &= ref.depth < target
            if not low.any():
                break
            ref.red(low)
    out = ref.to_mesh()
    logger.info("surface refinement: %d -> %d tetrahedra", mesh.n_tets, out.n_tets)
    return out


def conformity_audit(mesh: BackgroundMesh, tol=1e-12):
    """Check face matching, orientation and volume partition of the box.

    Returns a dict of findings; raises :class:`MeshError` on failure.
    """
    vol = mesh.signed_volumes()
    if np.any(vol <= 0):
        raise MeshError(f"{int((vol <= 0).sum())} tetrahedra with non-positive volume")
    faces = np.sort(mesh.tets[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]].reshape(-1, 3), axis=1)
    uf, counts = np.unique(faces, axis=0, return_counts=True)
    if counts.max() > 2:
        raise MeshError("face shared by more than two tetrahedra")
    a = mesh.box_half_width
    single = uf[counts == 1]
    p = mesh.vertices[single]  # (nf, 3, 3)
    on_boundary = np.zeros(len(single), dtype=bool)
    for ax in range(3):
        for side in (-a, a):
            on_boundary |= np.all(np.abs(p[:, :, ax] - side) < tol * max(a, 1.0), axis=1)
    if not on_boundary.all():
        raise MeshError(f"{int((~on_boundary).sum())} unmatched interior faces (hanging nodes)")
    total = vol.sum()
    box = (2 * a) ** 3
    if abs(total - box) > tol * box * 10:
        raise MeshError(f"volume {total} does not partition the box {box}")
    return {"faces": len(uf), "boundary_faces": len(single), "volume": total}


def select_active(mesh: BackgroundMesh, surface) -> ActiveMesh:
    """Tetrahedra whose perturbed vertex values change sign."""
    phi = _perturb(surface.nodal_phi(mesh.vertices), mesh.h)
    active = np.nonzero(_cut_mask(phi[mesh.tets]))[0]
    if len(active) == 0:
        raise MeshError("no tetrahedron is cut by the surface (surface outside the box?)")
    verts = np.unique(mesh.tets[active])
    return ActiveMesh(mesh, active, verts, phi)
