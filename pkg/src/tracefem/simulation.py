"""Build a discretization from a configuration and run the time loop."""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from . import io, mesh
from .ch import CHState, CHSystem, PotentialParams, TimeStepController, adapt_dt, bernoulli_ic
from .config import SimulationConfig
from .fespace import TraceSpaces
from .levelset import asymmetric_torus, unit_sphere
from .linalg import SolverOptions
from .nsch import MixtureParams, NSCHSystem, initial_state
from .observables import DiagnosticsRecord, constraint_norms, kinetic_energy, lyapunov_energy

logger = logging.getLogger(__name__)


def make_surface(cfg: SimulationConfig):
    if cfg["surface"] == "torus":
        return asymmetric_torus(cfg["torus.R"], cfg["torus.r_min"], cfg["torus.r_max"])
    return unit_sphere(cfg["sphere.radius"])


def make_active_mesh(cfg: SimulationConfig, surface=None):
    surface = surface or make_surface(cfg)
    bg = mesh.build_level(cfg["mesh.level"], cfg["mesh.box_half_width"])
    if cfg["mesh.extra_surface_levels"] > 0:
        bg = mesh.refine_toward_surface(bg, surface, cfg["mesh.extra_surface_levels"])
    return mesh.select_active(bg, surface)


def make_spaces(cfg: SimulationConfig, surface=None, with_p2=None) -> TraceSpaces:
    surface = surface or make_surface(cfg)
    if with_p2 is None:
        with_p2 = cfg["model"] == "nsch"
    return TraceSpaces(
        surface, make_active_mesh(cfg, surface),
        surface_order=cfg["quadrature.surface_order"],
        volume_order_p1=cfg["quadrature.volume_order"],
        volume_order_p2=max(4, cfg["quadrature.volume_order"]),
        use_exact_normals=cfg["geometry.use_exact_normals"],
        with_p2=with_p2,
    )


def potential_params(cfg):
    return PotentialParams(cfg["phys.epsilon"], cfg["phys.D"], cfg["phys.gamma_c"], cfg.mobility)


def mixture_params(cfg):
    return MixtureParams(cfg["phys.rho1"], cfg["phys.rho2"], cfg["phys.eta1"], cfg["phys.eta2"],
                         cfg["phys.sigma_gamma"], cfg["phys.M"])


def solver_options(cfg):
    return SolverOptions(cfg["linalg.rtol"], cfg["linalg.max_iter"], cfg["linalg.direct_threshold"])


def controller(cfg):
    return TimeStepController(cfg.tol_dt, cfg["time.dt_min"], cfg["time.dt_max"], cfg["time.adaptive"])


@dataclass
class RunResult:
    config: SimulationConfig
    spaces: TraceSpaces
    records: List[DiagnosticsRecord] = field(default_factory=list)
    state: object = None
    snapshots: List[tuple] = field(default_factory=list)
    rejected: int = 0

    def series(self, name):
        return np.array([getattr(r, name) for r in self.records])


class Simulation:
    """CH or NSCH run driven by a :class:`SimulationConfig`."""

    def __init__(self, cfg: SimulationConfig, spaces: Optional[TraceSpaces] = None):
        self.cfg = cfg
        self.surface = make_surface(cfg)
        self.spaces = spaces or make_spaces(cfg, self.surface)
        self.potential = potential_params(cfg)
        h = self.spaces.h
        eps = self.potential.eps
        stab = dict(tau_mu=cfg["stab.tau_mu_scale"] * h, tau_c=cfg["stab.tau_c_scale"] * eps / h)
        if cfg["model"] == "nsch":
            self.mixture = mixture_params(cfg)
            self.system = NSCHSystem(
                self.spaces, self.potential, self.mixture,
                tau=cfg["stab.tau_scale"] * h ** -2, beta_u=cfg["stab.beta_u_scale"] / h,
                beta_p=cfg["stab.beta_p_scale"] * h, grad_div=cfg["stab.grad_div"],
                solver=solver_options(cfg), **stab)
            self.ch = self.system.ch
        else:
            self.mixture = None
            self.system = self.ch = CHSystem(self.spaces, self.potential, solver=solver_options(cfg), **stab)
        self.controller = controller(cfg)

    def initial_state(self, c0=None):
        n = self.spaces.p1.n_dofs
        if c0 is None:
            c0 = bernoulli_ic(n, self.cfg["ic.a"], self.cfg["ic.seed"])
        dt = self.cfg["time.dt0"]
        if self.mixture is not None:
            return initial_state(self.spaces, c0, 0.0, dt)
        return CHState(np.asarray(c0, dtype=float), np.zeros(n), 0.0, dt)

    def diagnostics(self, state, dt, res1=0.0, res2=0.0, wall_ms=0.0):
        sp_ = self.spaces
        rec = DiagnosticsRecord(state.t, dt, lyapunov_energy(sp_, state.c, self.potential.eps),
                                float(self.ch.mass_vector @ state.c))
        if self.mixture is not None:
            rho = self.mixture.density(sp_.scalar_at_qp(state.c))
            rec.E_kin = kinetic_energy(sp_, state.u, rho)
            rec.u_normal_l2, rec.div_l2 = constraint_norms(sp_, state.u)
        rec.res_step1, rec.res_step2 = res1, res2
        rec.wall_ms = wall_ms if self.cfg["output.wall_time"] else 0.0
        return rec

    def _advance(self, state, dt):
        if self.mixture is None:
            r = self.ch.step(state, dt)
            return r.state, r.residual, 0.0
        new, res1, r2 = self.system.step(state, dt)
        return new, res1, r2.residual

    def run(self, output_dir=None, max_steps=None, c0=None, callback: Optional[Callable] = None,
            quiet=True) -> RunResult:
        cfg = self.cfg
        T, every = cfg["time.T"], cfg["output.every_t"]
        out = Path(output_dir) if output_dir is not None else None
        result = RunResult(cfg, self.spaces)
        state = self.initial_state(c0)
        writer = manifest = None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            writer = io.DiagnosticsWriter(out / "diag.csv", cfg.hash)
            manifest = io.SnapshotManifest(f"{cfg['model']}-{cfg['surface']}-seed{cfg['ic.seed']}", cfg.hash)

        def emit(rec):
            result.records.append(rec)
            if writer is not None:
                writer.write(rec)
            if callback is not None:
                callback(state, rec)

        def snapshot():
            result.snapshots.append(state.t)
            if not quiet:
                logger.info("snapshot t=%.6g E=%.8g", state.t, result.records[-1].E_lyap)
            if out is None or not cfg["output.vtk"]:
                if manifest is not None:
                    manifest.write(out)
                return
            name = io.snapshot_name(state.t)
            u = getattr(state, "u", None)
            p = getattr(state, "p", None)
            io.write_vtk_surface(out / name, self.spaces, state.c, state.mu, p, u,
                                 title=f"tracefem t={state.t!r} config_hash={cfg.hash}")
            manifest.add(state.t, name)
            manifest.write(out)

        try:
            emit(self.diagnostics(state, 0.0))
            snapshot()
            dt = state.dt
            steps = 0
            k_snap = 1
            next_snap = every
            while state.t < T * (1 - 1e-12) and (max_steps is None or steps < max_steps):
                target = min(next_snap, T)
                dt_try = min(dt, target - state.t)
                tic = time.perf_counter()
                new, res1, res2 = self._advance(state, dt_try)
                ok, dt_next = adapt_dt(self.controller, new.c, state.c, dt_try)
                if not ok:
                    result.rejected += 1
                    dt = dt_next
                    continue
                if dt_try < dt and self.controller.adaptive:
                    dt_next = max(dt_next, dt)  # a step shortened to hit an output time keeps its size
                elif not self.controller.adaptive:
                    dt_next = dt
                state = new
                steps += 1
                emit(self.diagnostics(state, dt_try, res1, res2, 1e3 * (time.perf_counter() - tic)))
                logger.debug("t=%.6g dt=%.3g E=%.6g", state.t, dt_try, result.records[-1].E_lyap)
                if abs(state.t - target) <= 1e-12 * max(1.0, target):
                    state.t = target
                    if target == next_snap:
                        snapshot()
                        k_snap += 1
                        next_snap = k_snap * every
                    elif target == T:
                        snapshot()
                dt = dt_next
        finally:
            if writer is not None:
                writer.close()
        result.state = state
        return result


def run(cfg: SimulationConfig, output_dir=None, max_steps=None, **kw) -> RunResult:
    return Simulation(cfg).run(output_dir, max_steps, **kw)
