"""Decoupled linear scheme for surface Navier-Stokes-Cahn-Hilliard.

Step 1 is the CH step with the lagged velocity transporting ``c``.
Step 2 solves one linearized Navier-Stokes saddle-point system

    [ rho_n Mbar/dt + N + A - Theta   B^T ] [u]   [ rho_n Mbar u_n/dt + f ]
    [ B                               -S  ] [p] = [ 0                     ]

where ``Mbar`` is the tangential mass, ``N`` the stabilized convection,
``A`` the viscous form with penalty and stabilizations, ``Theta`` the
density-gradient coupling and ``f`` the surface-tension force.  ``S`` and
``B`` share the constant-pressure kernel; one pressure value is pinned for
the solve and the result is projected to zero surface mean.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import forms
from .ch import CHState, CHSystem, PotentialParams
from .fespace import TraceSpaces
from .linalg import SolverOptions, block_system, project_zero_mean, solve
from .observables import constraint_norms, l2_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixtureParams:
    rho1: float = 3.0
    rho2: float = 1.0
    eta1: float = 0.01
    eta2: float = 0.0008
    sigma_gamma: float = 0.04
    M: float = 0.02

    def __post_init__(self):
        if not self.rho2 > 0:
            raise ValueError("rho2 must be positive")
        if self.rho1 < self.rho2:
            raise ValueError("densities must satisfy rho1 >= rho2")
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("viscosities must be positive")
        if self.sigma_gamma < 0 or not self.M > 0:
            raise ValueError("sigma_gamma must be nonnegative and M positive")

    @property
    def theta(self):
        return float(np.sqrt(self.rho1 - self.rho2))

    def density(self, c):
        cc = np.clip(c, 0.0, 1.0)
        return self.rho1 * cc + self.rho2 * (1.0 - cc)

    def viscosity(self, c):
        cc = np.clip(c, 0.0, 1.0)
        return self.eta1 * cc + self.eta2 * (1.0 - cc)

    def rho_hat(self, c):
        """``rho - (d rho / dc) c`` on clamped ``c``; equals ``rho2`` for the linear law."""
        cc = np.clip(c, 0.0, 1.0)
        return self.density(cc) - (self.rho1 - self.rho2) * cc


def mixture_density(params: MixtureParams, c):
    return params.density(np.asarray(c, dtype=float))


def mixture_viscosity(params: MixtureParams, c):
    return params.viscosity(np.asarray(c, dtype=float))


@dataclass
class NSCHState:
    c: np.ndarray
    mu: np.ndarray
    u: np.ndarray
    p: np.ndarray
    t: float = 0.0
    dt: float = 1e-3

    @property
    def ch(self):
        return CHState(self.c, self.mu, self.t, self.dt)


@dataclass
class Step2Result:
    u: np.ndarray
    p: np.ndarray
    residual: float
    normal_ratio: float


class NSCHSystem:
    """Assembly and solves for both steps of the decoupled scheme.

    Stabilization defaults: ``tau = h^-2``, ``beta_u = 1/h``, ``beta_p = h``,
    grad-div weight 1.
    """

    def __init__(self, spaces: TraceSpaces, potential: PotentialParams, mixture: MixtureParams,
                 tau=None, beta_u=None, beta_p=None, grad_div=1.0, tau_mu=None, tau_c=None,
                 solver: SolverOptions = SolverOptions(), forcing=None, tangential_warn=10.0):
        if spaces.p2 is None:
            raise ValueError("NSCH needs the P2 velocity space")
        self.spaces = spaces
        self.mixture = mixture
        h = spaces.h
        self.ch = CHSystem(spaces, potential, tau_mu=tau_mu, tau_c=tau_c, solver=solver)
        self.tau = h ** -2 if tau is None else tau
        self.beta_u = 1.0 / h if beta_u is None else beta_u
        self.beta_p = h if beta_p is None else beta_p
        self.grad_div = grad_div
        self.solver = solver
        self.forcing = forcing
        self.tangential_warn = tangential_warn
        self.B = forms.assemble_b(spaces)
        self.S = forms.assemble_s(spaces, self.beta_p)
        self.mass_vector = self.ch.mass_vector
        fixed = ("penalty", "volume", "grad_div")
        self._A_fixed = forms.assemble_ns_a(spaces, 1.0, self.tau, self.beta_u, grad_div, parts=fixed)
        self._A_const = None
        if mixture.eta1 == mixture.eta2:
            self._A_const = self.viscous(np.zeros(spaces.p1.n_dofs))

    # -- step 1 -------------------------------------------------------------
    def step1(self, state: NSCHState, dt):
        sp_ = self.spaces
        if np.any(state.u):
            C = forms.assemble_scalar_convection(sp_, sp_.vector_at_qp(state.u))
        else:
            C = None
        return self.ch.step(state.ch, dt, convection=C)

    # -- step 2 -------------------------------------------------------------
    def viscous(self, c):
        if self._A_const is not None:
            return self._A_const
        eta = self.mixture.viscosity(self.spaces.scalar_at_qp(c))
        strain = forms.assemble_ns_a(self.spaces, eta, 0.0, 0.0, 0.0, parts=("strain",))
        return self._A_fixed + strain

    def theta_coupling(self, mu):
        th = self.mixture.theta
        return forms.assemble_theta_coupling(self.spaces, th, mu, self.mixture.M)

    def step2(self, state: NSCHState, c_new, mu_new, dt) -> Step2Result:
        sp_, mix = self.spaces, self.mixture
        rho_old = mix.density(sp_.scalar_at_qp(state.c))
        c_qp = sp_.scalar_at_qp(c_new)
        Mt = forms.assemble_tangential_mass(sp_, rho_old)
        K = Mt / dt + self.viscous(c_new) - self.theta_coupling(mu_new)
        if np.any(state.u):
            K = K + forms.assemble_ns_convection(sp_, mix.density(c_qp), mix.rho_hat(c_qp), state.u)
        rhs_u = Mt @ state.u / dt + forms.assemble_coupling_rhs(sp_, c_new, mu_new, mix.sigma_gamma)
        if self.forcing is not None:
            rhs_u = rhs_u + forms.assemble_vector_load(sp_, self.forcing(sp_.sq.points, state.t + dt))
        nu, npr = sp_.p2.n_dofs, sp_.p1.n_dofs
        full = block_system([[K, self.B.T], [self.B, -self.S]])
        rhs = np.concatenate([rhs_u, np.zeros(npr)])
        x = solve(_pin(full, nu), rhs, self.solver)
        residual = float(np.linalg.norm(full @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
        u = x[:nu]
        p = project_zero_mean(x[nu:], self.mass_vector)
        un, _ = constraint_norms(sp_, u)
        unorm = l2_norm(sp_, sp_.vector_at_qp(u))
        ratio = un / unorm if unorm > 0 else 0.0
        if ratio > self.tangential_warn * sp_.h:
            logger.warning("tangential violation %.3e exceeds %.1f h", ratio, self.tangential_warn)
        return Step2Result(u, p, residual, ratio)

    def step(self, state: NSCHState, dt):
        """Both steps; returns ``(new_state, step1_residual, step2_result)``."""
        r1 = self.step1(state, dt)
        r2 = self.step2(state, r1.state.c, r1.state.mu, dt)
        new = NSCHState(r1.state.c, r1.state.mu, r2.u, r2.p, state.t + dt, dt)
        return new, r1.residual, r2


def _pin(K, k):
    """Replace row and column ``k`` by the identity (fixes that unknown to 0)."""
    d = np.ones(K.shape[0])
    d[k] = 0.0
    D = sp.diags(d)
    e = sp.csr_matrix(([1.0], ([k], [k])), shape=K.shape)
    return (D @ K @ D + e).tocsr()


def nsch_step1(system: NSCHSystem, state: NSCHState, dt):
    r = system.step1(state, dt)
    return r.state.c, r.state.mu


def nsch_step2(system: NSCHSystem, state: NSCHState, c_new, mu_new, dt):
    r = system.step2(state, c_new, mu_new, dt)
    return r.u, r.p


def initial_state(spaces: TraceSpaces, c0, t=0.0, dt=1e-3):
    n1 = spaces.p1.n_dofs
    return NSCHState(np.asarray(c0, dtype=float), np.zeros(n1), np.zeros(spaces.p2.n_dofs),
                     np.zeros(n1), t, dt)
