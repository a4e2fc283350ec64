"""Analytic level-set descriptions of closed surfaces.

A surface is the zero set of a scalar field ``phi`` with ``|grad phi| > 0``
near the surface.  All evaluation functions are vectorized over the leading
axes of ``x`` (shape ``(..., 3)``).

Sign convention: ``phi < 0`` inside, ``phi > 0`` outside.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class DomainError(ValueError):
    """Level-set function evaluated where it is not defined."""


class SingularGradientError(ValueError):
    """Normal requested at a point where the level-set gradient vanishes."""


_GRAD_FLOOR = 1e-14


@dataclass(frozen=True)
class LevelSetSurface:
    """Immutable surface descriptor.

    ``kind`` is one of ``"unit_sphere"``, ``"asymmetric_torus"`` or
    ``"custom"``.  Custom surfaces supply ``custom_phi`` and ``custom_grad``,
    both taking an array of points ``(..., 3)``.
    """

    kind: str = "unit_sphere"
    radius: float = 1.0
    R: float = 1.0
    r_min: float = 0.3
    r_max: float = 0.6
    custom_phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    custom_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("unit_sphere", "asymmetric_torus", "custom"):
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if self.kind == "custom" and (self.custom_phi is None or self.custom_grad is None):
            raise ValueError("custom surfaces need both custom_phi and custom_grad")
        if self.kind == "unit_sphere" and self.radius <= 0:
            raise ValueError("sphere radius must be positive")
        if self.kind == "asymmetric_torus" and not (0 < self.r_min <= self.r_max < self.R):
            raise ValueError("torus needs 0 < r_min <= r_max < R")

    # -- torus helpers --------------------------------------------------
    def _tube_radius(self, x, y, on_axis="raise"):
        rho = np.sqrt(x * x + y * y)
        axis = rho == 0.0
        if np.any(axis):
            if on_axis == "raise":
                raise DomainError("torus level set undefined on the z-axis (x = y = 0)")
            rho = np.where(axis, 1.0, rho)
            cos = np.where(axis, 0.0, x / rho)
        else:
            cos = x / rho
        half = 0.5 * (self.r_max - self.r_min)
        return self.r_min + half * (1.0 - cos), rho, half

    def _torus_phi(self, x, on_axis="raise"):
        x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
        r, _, _ = self._tube_radius(x0, x1, on_axis)
        s = x0 * x0 + x1 * x1 + x2 * x2 + self.R ** 2 - r * r
        return s * s - 4.0 * self.R ** 2 * (x0 * x0 + x1 * x1)

    def _torus_grad(self, x):
        x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
        r, rho, half = self._tube_radius(x0, x1)
        rho3 = rho ** 3
        # d(x/rho)/dx = y^2/rho^3, d(x/rho)/dy = -x y/rho^3
        r_x = -half * x1 * x1 / rho3
        r_y = half * x0 * x1 / rho3
        s = x0 * x0 + x1 * x1 + x2 * x2 + self.R ** 2 - r * r
        R2 = self.R ** 2
        g = np.empty(np.shape(x), dtype=float)
        g[..., 0] = 2.0 * s * (2.0 * x0 - 2.0 * r * r_x) - 8.0 * R2 * x0
        g[..., 1] = 2.0 * s * (2.0 * x1 - 2.0 * r * r_y) - 8.0 * R2 * x1
        g[..., 2] = 4.0 * s * x2
        return g

    # -- public vectorized interface -----------------------------------
    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "unit_sphere":
            return np.linalg.norm(x, axis=-1) - self.radius
        if self.kind == "asymmetric_torus":
            return self._torus_phi(x)
        return np.asarray(self.custom_phi(x), dtype=float)

    def nodal_phi(self, x):
        """Like :meth:`phi` but defined everywhere in the box.

        Used only to classify mesh vertices by sign.  On the torus axis the
        tube radius is replaced by its mean; the sign there is positive for
        every admissible radius, which is all classification needs.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == "asymmetric_torus":
            return self._torus_phi(x, on_axis="mean")
        return self.phi(x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "unit_sphere":
            nrm = np.linalg.norm(x, axis=-1, keepdims=True)
            if np.any(nrm == 0.0):
                raise SingularGradientError("sphere level set has no gradient at the origin")
            return x / nrm
        if self.kind == "asymmetric_torus":
            return self._torus_grad(x)
        return np.asarray(self.custom_grad(x), dtype=float)

    def normal(self, x):
        g = self.grad(x)
        nrm = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.any(nrm < _GRAD_FLOOR):
            raise SingularGradientError("level-set gradient vanishes")
        return g / nrm

    def projector(self, x):
        n = self.normal(x)
        return np.eye(3) - n[..., :, None] * n[..., None, :]


def unit_sphere(radius=1.0):
    return LevelSetSurface("unit_sphere", radius=radius)


def asymmetric_torus(R=1.0, r_min=0.3, r_max=0.6):
    return LevelSetSurface("asymmetric_torus", R=R, r_min=r_min, r_max=r_max)


def custom_surface(phi, grad):
    return LevelSetSurface("custom", custom_phi=phi, custom_grad=grad)


def plane(normal, offset=0.0):
    """Plane ``normal . x = offset``; handy for single-tetrahedron checks."""
    nv = np.asarray(normal, dtype=float)
    return custom_surface(
        lambda x: np.asarray(x) @ nv - offset,
        lambda x: np.broadcast_to(nv, np.shape(x)).copy(),
    )


def eval_phi(surface: LevelSetSurface, x) -> float:
    return float(surface.phi(np.asarray(x, dtype=float)))


def eval_normal(surface: LevelSetSurface, x) -> np.ndarray:
    return surface.normal(np.asarray(x, dtype=float))


def projector(surface: LevelSetSurface, x) -> np.ndarray:
    return surface.projector(np.asarray(x, dtype=float))


def check_gradient_floor(surface: LevelSetSurface, points, c0=1e-8):
    """Abort if ``|grad phi|`` drops below ``c0`` at any of ``points``."""
    g = np.linalg.norm(surface.grad(points), axis=-1)
    if g.size and g.min() < c0:
        raise SingularGradientError(
            f"|grad phi| = {g.min():.3e} below floor {c0:g} at a quadrature point"
        )
    return g
