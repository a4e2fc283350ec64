"""Diagnostics on the discrete surface.

All integrals use the surface quadrature of the assembled forms, so e.g.
``total_mass`` equals ``1 @ M @ c``.
"""
from dataclasses import asdict, dataclass, fields

import numpy as np

from .ch import double_well
from .fespace import TraceSpaces


def lyapunov_energy(spaces: TraceSpaces, c, eps):
    """``int f0(c)/eps + eps/2 |grad_Gamma c|^2 ds``."""
    cq = spaces.scalar_at_qp(c)
    gq = spaces.scalar_sgrad_at_qp(c)
    dens = double_well(cq) / eps + 0.5 * eps * np.einsum("aqd,aqd->aq", gq, gq)
    return float(np.sum(spaces.sq.weights * dens))


def total_mass(spaces: TraceSpaces, c):
    return float(np.sum(spaces.sq.weights * spaces.scalar_at_qp(c)))


def kinetic_energy(spaces: TraceSpaces, u, rho=1.0):
    """``int rho/2 |u|^2 ds``; ``rho`` scalar or values at quadrature points."""
    uq = spaces.vector_at_qp(u)
    return float(0.5 * np.sum(spaces.sq.weights * rho * np.einsum("aqd,aqd->aq", uq, uq)))


def l2_norm(spaces: TraceSpaces, values_qp):
    v = np.asarray(values_qp)
    sq = v * v if v.ndim == 2 else np.einsum("aqd,aqd->aq", v, v)
    return float(np.sqrt(np.sum(spaces.sq.weights * sq)))


def constraint_norms(spaces: TraceSpaces, u):
    """``(||u . n_h||, ||div_Gamma u||)`` in ``L2(Gamma_h)``."""
    un = np.einsum("aqd,aqd->aq", spaces.vector_at_qp(u), spaces.n)
    return l2_norm(spaces, un), l2_norm(spaces, spaces.vector_sdiv_at_qp(u))


def phase_separation(c, threshold=0.3):
    """Fraction of nodal values with ``|c - 1/2| > threshold``."""
    return float(np.mean(np.abs(np.asarray(c) - 0.5) > threshold))


@dataclass
class DiagnosticsRecord:
    t: float
    dt: float
    E_lyap: float
    mass: float
    E_kin: float = 0.0
    u_normal_l2: float = 0.0
    div_l2: float = 0.0
    res_step1: float = 0.0
    res_step2: float = 0.0
    wall_ms: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise FloatingPointError(f"diagnostic {f.name} is not finite")

    def as_row(self):
        return asdict(self)


CSV_COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))
