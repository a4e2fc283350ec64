import logging

import numpy as np
import pytest

from tracefem import forms
from tracefem.ch import CHSystem, PotentialParams, bernoulli_ic, ch_step
from tracefem.fespace import interpolate
from tracefem.nsch import (
    MixtureParams, NSCHState, NSCHSystem, initial_state, mixture_density, mixture_viscosity,
    nsch_step1, nsch_step2,
)
from tracefem.observables import total_mass

from conftest import rotation


def test_mixture_laws():
    mix = MixtureParams(3.0, 1.0, 0.01, 0.0008)
    assert mixture_density(mix, 1.0) == 3.0
    assert mixture_density(mix, 0.5) == 2.0
    assert mixture_viscosity(mix, 0.5) == pytest.approx(0.0054, rel=1e-14)
    assert mixture_density(mix, 1.2) == 3.0
    assert mixture_density(mix, -0.3) == 1.0


@pytest.mark.parametrize("kw", [dict(rho1=1.0, rho2=2.0), dict(eta1=0.0), dict(rho2=0.0), dict(M=0.0)])
def test_mixture_validation(kw):
    with pytest.raises(ValueError):
        MixtureParams(**kw)


def make(sp_, **kw):
    return NSCHSystem(sp_, PotentialParams(eps=0.05, mobility="constant"), MixtureParams(**kw))


def test_step1_matches_ch_with_zero_velocity(sphere2):
    sysm = make(sphere2)
    ch = CHSystem(sphere2, PotentialParams(eps=0.05, mobility="constant"))
    st_ = initial_state(sphere2, bernoulli_ic(sphere2.p1.n_dofs, 0.5, 2))
    c_ch = st_.ch
    for _ in range(3):
        c, mu = nsch_step1(sysm, st_, 1e-3)
        c_ch = ch_step(ch, c_ch, 1e-3)
        st_ = NSCHState(c, mu, st_.u, st_.p, st_.t + 1e-3)
    assert np.abs(st_.c - c_ch.c).max() <= 1e-12


def test_transport_of_constant():
    # a rotation is divergence free on the sphere but has conormal jumps across
    # the edges of Gamma_h, so a uniform c moves by O(h) and not by roundoff
    from conftest import sphere_spaces
    drift = []
    for lvl in (2, 3):
        sp_ = sphere_spaces(lvl)
        n = sp_.p1.n_dofs
        u = 0.3 * interpolate(sp_.p2, rotation).values
        st_ = NSCHState(np.full(n, 0.4), np.zeros(n), u, np.zeros(n))
        c, _ = nsch_step1(make(sp_), st_, 1e-2)
        drift.append(np.abs(c - 0.4).max())
    assert drift[0] < 1e-3
    assert drift[1] < drift[0] / 2


def test_mass_conserved_with_velocity(sphere2):
    sysm = make(sphere2)
    st_ = initial_state(sphere2, bernoulli_ic(sphere2.p1.n_dofs, 0.5, 5))
    st_.u = 0.5 * interpolate(sphere2.p2, rotation).values
    m0 = total_mass(sphere2, st_.c)
    for _ in range(20):
        c, mu = nsch_step1(sysm, st_, 1e-3)
        st_ = NSCHState(c, mu, st_.u, st_.p, st_.t + 1e-3)
    assert abs(total_mass(sphere2, st_.c) - m0) / m0 <= 1e-8


def test_rest_state_persists(sphere2):
    sysm = make(sphere2)
    n = sphere2.p1.n_dofs
    st_ = initial_state(sphere2, np.full(n, 0.5))
    u, p = nsch_step2(sysm, st_, np.full(n, 0.5), np.full(n, 1.3), 1e-3)
    assert np.abs(u).max() <= 1e-10 and np.abs(p).max() <= 1e-10


def test_pressure_has_zero_mean(sphere2):
    sysm = make(sphere2)
    st_ = initial_state(sphere2, bernoulli_ic(sphere2.p1.n_dofs, 0.5, 1))
    new, _, r2 = sysm.step(st_, 1e-3)
    assert abs(sysm.mass_vector @ new.p) <= 1e-12 * (1 + np.abs(new.p).max())
    assert r2.residual <= 1e-10
    assert np.abs(new.u).max() > 0


def test_model_h_limit(sphere2):
    sysm = make(sphere2, rho1=1.5, rho2=1.5)
    T = sysm.theta_coupling(np.random.default_rng(0).random(sphere2.p1.n_dofs))
    assert T.nnz == 0 or abs(T).max() == 0.0


def test_requires_p2(sphere2):
    from conftest import sphere_spaces
    with pytest.raises(ValueError):
        make(sphere_spaces(2, with_p2=False))


def test_tangentiality_improves_with_refinement(sphere2, sphere3):
    ratios = []
    for sp_ in (sphere2, sphere3):
        sysm = make(sp_)
        st_ = initial_state(sp_, bernoulli_ic(sp_.p1.n_dofs, 0.5, 0))
        _, _, r2 = sysm.step(st_, 1e-3)
        ratios.append(r2.normal_ratio)
    assert ratios[1] < ratios[0]


def test_tangential_warning(sphere2, caplog):
    sysm = make(sphere2)
    sysm.tangential_warn = 0.0
    st_ = initial_state(sphere2, bernoulli_ic(sphere2.p1.n_dofs, 0.5, 0))
    with caplog.at_level(logging.WARNING, logger="tracefem.nsch"):
        sysm.step(st_, 1e-3)
    assert "tangential violation" in caplog.text


def test_forcing_drives_flow(sphere2):
    sysm = NSCHSystem(sphere2, PotentialParams(eps=0.05), MixtureParams(),
                      forcing=lambda x, t: rotation(x))
    n = sphere2.p1.n_dofs
    st_ = initial_state(sphere2, np.full(n, 0.5))
    new, _, _ = sysm.step(st_, 1e-2)
    assert new.u @ interpolate(sphere2.p2, rotation).values > 0


def test_step2_matrix_symmetry_without_convection(sphere2):
    sysm = make(sphere2, rho1=1.0, rho2=1.0)
    A = sysm.viscous(np.full(sphere2.p1.n_dofs, 0.2))
    assert forms.is_symmetric(A)
