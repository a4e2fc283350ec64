"""Mesh-convergence studies used by the CLI and the acceptance suite."""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import forms, mesh
from .cutgeom import extract_patches
from .fespace import TraceSpaces
from .levelset import LevelSetSurface
from .linalg import solve


@dataclass
class GeometryRow:
    level: int
    h: float
    n_active: int
    area: float
    error: Optional[float]
    order: Optional[float]
    max_normal_angle: float


def observed_orders(errors):
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


def normal_angle(active, surface):
    """Largest angle between ``n_h`` and the exact normal at patch centroids."""
    surf = extract_patches(active)
    cross = np.cross(surf.tri_points[:, 1] - surf.tri_points[:, 0], surf.tri_points[:, 2] - surf.tri_points[:, 0])
    a = 0.5 * np.linalg.norm(cross, axis=1)
    cent = np.zeros((active.n_active, 3))
    np.add.at(cent, surf.tri_owner, a[:, None] * surf.tri_points.mean(axis=1))
    keep = surf.areas > 0
    cent = cent[keep] / surf.areas[keep, None]
    n_exact = surface.normal(cent)
    cosang = np.clip(np.einsum("ad,ad->a", surf.normals[keep], n_exact), -1.0, 1.0)
    return float(np.arccos(cosang).max())


def geometry_table(surface: LevelSetSurface, levels, exact_area=None, half_width=5.0 / 3.0,
                   extra_levels=0) -> List[GeometryRow]:
    """Area of ``Gamma_h`` per level; errors against ``exact_area`` when given."""
    rows = []
    for lvl in levels:
        bg = mesh.build_level(lvl, half_width)
        if extra_levels:
            bg = mesh.refine_toward_surface(bg, surface, extra_levels)
        act = mesh.select_active(bg, surface)
        area = extract_patches(act).total_area
        err = abs(area - exact_area) if exact_area is not None else None
        rows.append(GeometryRow(lvl, act.h, act.n_active, area, err, None, normal_angle(act, surface)))
    if exact_area is not None:
        for prev, row in zip(rows, rows[1:]):
            row.order = float(np.log2(prev.error / row.error)) if row.error > 0 else np.inf
    return rows


@dataclass
class ConvergenceRow:
    level: int
    h: float
    n_dofs: int
    l2_error: float
    order: Optional[float] = None


def solve_shifted_laplace(spaces: TraceSpaces, f_qp, tau=None):
    """P1 TraceFEM solution of ``u - Delta_Gamma u = f`` with normal-gradient stabilization."""
    tau = 1.0 / spaces.h if tau is None else tau
    K = forms.assemble_mass(spaces) + forms.assemble_a_c(spaces, 1.0, tau)
    return solve(K, forms.assemble_load(spaces, f_qp))


def manufactured_sphere(levels, half_width=5.0 / 3.0) -> List[ConvergenceRow]:
    """``(I - Delta_Gamma) u = 3 x_1`` on the unit sphere, exact ``u = x_1``."""
    from .levelset import unit_sphere

    surface = unit_sphere()
    rows = []
    for lvl in levels:
        act = mesh.select_active(mesh.build_level(lvl, half_width), surface)
        sp_ = TraceSpaces(surface, act, with_p2=False)
        x = sp_.sq.points
        # f is evaluated at the closest point on the sphere, the natural extension
        xs = x / np.linalg.norm(x, axis=-1, keepdims=True)
        u = solve_shifted_laplace(sp_, 3.0 * xs[..., 0])
        err = sp_.scalar_at_qp(u) - xs[..., 0]
        rows.append(ConvergenceRow(lvl, sp_.h, sp_.p1.n_dofs, float(np.sqrt(np.sum(sp_.sq.weights * err ** 2)))))
    for prev, row in zip(rows, rows[1:]):
        row.order = float(np.log2(prev.l2_error / row.l2_error))
    return rows
