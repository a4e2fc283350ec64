"""Surface Cahn-Hilliard time stepping.

One BDF1 step solves the linear 2x2 block system for ``(c, mu)``

    [ M + dt C            dt A_mu ] [c ]   [ M c_n                          ]
    [ -(g/eps M + A_c)    M       ] [mu] = [ F(c_n)/eps - g/eps M c_n       ]

where ``g`` is the stabilization constant ``gamma_c``, ``F`` the load of
``f0'(c_n)`` and ``C`` an optional transport matrix (zero for pure CH).
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from . import forms
from .fespace import TraceSpaces
from .linalg import SolverOptions, block_system, solve

logger = logging.getLogger(__name__)


class MassDriftError(RuntimeError):
    pass


MASS_DRIFT_LIMIT = 1e-6


def double_well(c):
    c = np.asarray(c, dtype=float)
    return 0.25 * c * c * (1.0 - c) ** 2


def dwell_prime(c):
    c = np.asarray(c, dtype=float)
    return 0.5 * c * (1.0 - c) * (1.0 - 2.0 * c)


@dataclass(frozen=True)
class PotentialParams:
    """Interface width, mobility scale and stabilization constant."""

    eps: float = 0.02
    D: float = 0.02
    gamma_c: float = 1.0
    mobility: str = "degenerate"  # or "constant"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.D > 0:
            raise ValueError("D must be positive")
        if not self.gamma_c >= 0:
            raise ValueError("gamma_c must be nonnegative")
        if self.mobility not in ("degenerate", "constant"):
            raise ValueError(f"unknown mobility law {self.mobility!r}")

    def mobility_at(self, c_qp):
        if self.mobility == "constant":
            return np.full_like(c_qp, self.D)
        cc = np.clip(c_qp, 0.0, 1.0)
        return self.D * cc * (1.0 - cc)


@dataclass
class CHState:
    c: np.ndarray
    mu: np.ndarray
    t: float = 0.0
    dt: float = 1e-3

    def copy(self):
        return CHState(self.c.copy(), self.mu.copy(), self.t, self.dt)


@dataclass
class StepResult:
    state: CHState
    residual: float


class CHSystem:
    """Matrices that stay fixed over a run, plus per-step assembly.

    Parameters
    ----------
    spaces : TraceSpaces
    params : PotentialParams
    tau_mu, tau_c : float, optional
        Stabilization weights; default ``h`` and ``eps / h``.
    """

    def __init__(self, spaces: TraceSpaces, params: PotentialParams, tau_mu=None, tau_c=None,
                 solver: SolverOptions = SolverOptions()):
        self.spaces = spaces
        self.params = params
        h = spaces.h
        self.tau_mu = h if tau_mu is None else tau_mu
        self.tau_c = params.eps / h if tau_c is None else tau_c
        self.solver = solver
        self.M = forms.assemble_mass(spaces)
        self.A_c = forms.assemble_a_c(spaces, params.eps, self.tau_c)
        self.mass_vector = forms.lumped_surface_mass(spaces)
        self._A_mu_const = None

    def a_mu(self, c):
        p = self.params
        if p.mobility == "constant":
            if self._A_mu_const is None:
                self._A_mu_const = forms.assemble_a_mu(self.spaces, p.D, self.tau_mu)
            return self._A_mu_const
        mob = p.mobility_at(self.spaces.scalar_at_qp(c))
        return forms.assemble_a_mu(self.spaces, mob, self.tau_mu)

    def potential_load(self, c):
        return forms.assemble_load(self.spaces, dwell_prime(self.spaces.scalar_at_qp(c)))

    def mass(self, c):
        return float(self.mass_vector @ c)

    def step(self, state: CHState, dt, convection=None) -> StepResult:
        p = self.params
        M, A_c = self.M, self.A_c
        A_mu = self.a_mu(state.c)
        g = p.gamma_c / p.eps
        top = M if convection is None else M + dt * convection
        K = block_system([[top, dt * A_mu], [-(g * M + A_c), M]])
        Mc = M @ state.c
        rhs = np.concatenate([Mc, self.potential_load(state.c) / p.eps - g * Mc])
        x, info = solve(K, rhs, self.solver, return_info=True)
        n = len(state.c)
        new = CHState(x[:n], x[n:], state.t + dt, dt)
        self._check_mass(state.c, new.c)
        return StepResult(new, info.residual)

    def _check_mass(self, c_old, c_new):
        m0, m1 = self.mass(c_old), self.mass(c_new)
        scale = max(abs(m0), self.spaces.area * 1e-12)
        drift = abs(m1 - m0) / scale
        if drift > MASS_DRIFT_LIMIT:
            raise MassDriftError(f"mass drift {drift:.3e} exceeds {MASS_DRIFT_LIMIT:g}")


def ch_step(system: CHSystem, state: CHState, dt) -> CHState:
    return system.step(state, dt).state


def bernoulli_ic(n, a=0.5, seed=0):
    """Independent Bernoulli(a) values, one per P1 node."""
    if not 0.0 <= a <= 1.0:
        raise ValueError("Bernoulli probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    return (rng.random(n) < a).astype(float)


@dataclass(frozen=True)
class TimeStepController:
    """Step-size control on the max-norm change of ``c``.

    ``dt' = dt * min(2, max(0.5, tol / delta))`` clipped to
    ``[dt_min, dt_max]``; steps with ``delta > 4 tol`` are rejected and
    retried at half the step.
    """

    tol: float = 0.1
    dt_min: float = 1e-5
    dt_max: float = 1.0
    adaptive: bool = True

    def adapt(self, delta, dt):
        """Return ``(accepted, next_dt)``."""
        if not self.adaptive:
            return True, dt
        if delta > 4.0 * self.tol and dt > self.dt_min:
            return False, max(0.5 * dt, self.dt_min)
        factor = 2.0 if delta == 0 else min(2.0, max(0.5, self.tol / delta))
        return True, float(np.clip(dt * factor, self.dt_min, self.dt_max))


def adapt_dt(controller: TimeStepController, c_new, c_old, dt):
    delta = float(np.max(np.abs(c_new - c_old))) if len(c_new) else 0.0
    return controller.adapt(delta, dt)


def with_dt(state: CHState, dt) -> CHState:
    return replace(state, dt=dt)
