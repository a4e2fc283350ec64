import logging

import numpy as np
import pytest

from tracefem import forms
from tracefem.fespace import interpolate
from tracefem.nsch import MixtureParams

from conftest import rotation


def ones(sp_):
    return np.ones(sp_.p1.n_dofs)


def test_mass_examples(sphere3):
    M = forms.assemble_mass(sphere3)
    assert M.sum() == pytest.approx(sphere3.area, rel=1e-12)
    assert forms.is_symmetric(M)
    assert np.all(M.diagonal() >= 0)
    c = np.full(sphere3.p1.n_dofs, 0.5)
    cq = sphere3.scalar_at_qp(c)
    assert forms.assemble_mass(sphere3, cq * (1 - cq)).sum() == pytest.approx(0.25 * sphere3.area, rel=1e-12)


def test_mass_linear_in_coefficient(sphere2):
    f = sphere2.sq.points[..., 2] ** 2
    a = forms.assemble_mass(sphere2, 3.0 * f)
    b = forms.assemble_mass(sphere2, f)
    assert abs(a - 3.0 * b).max() <= 1e-14 * abs(a).max()


def test_a_mu_kernel_and_spectrum(sphere2):
    A = forms.assemble_a_mu(sphere2, 1.0, sphere2.h)
    assert np.abs(A @ ones(sphere2)).max() < 1e-11
    assert forms.is_symmetric(A)
    assert np.linalg.eigvalsh(A.toarray()).min() >= -1e-10


def test_a_mu_clamps_negative_mobility(sphere2, caplog):
    mob = np.full(sphere2.sq.weights.shape, -1.0)
    with caplog.at_level(logging.INFO, logger="tracefem.forms"):
        A = forms.assemble_a_mu(sphere2, mob, 0.0)
    assert abs(A).max() == 0.0
    assert "clamping" in caplog.text


def test_dirichlet_energy_of_x1(sphere4_p1):
    sp_ = sphere4_p1
    x1 = interpolate(sp_.p1, lambda x: x[:, 0]).values
    A = forms.assemble_a_mu(sp_, 1.0, 0.0)
    assert x1 @ A @ x1 == pytest.approx(8 * np.pi / 3, rel=0.02)


def test_a_c_examples(sphere2):
    h = sphere2.h
    A = forms.assemble_a_c(sphere2, 0.02, 0.02 / h)
    assert np.abs(A @ ones(sphere2)).max() < 1e-11
    assert forms.is_symmetric(A)
    s1 = forms.assemble_a_c(sphere2, 0.02, 1.0, parts=("surface",))
    s2 = forms.assemble_a_c(sphere2, 0.04, 1.0, parts=("surface",))
    assert abs(s2 - 2.0 * s1).max() == 0.0


def test_scalar_convection(sphere3):
    n = sphere3.p1.n_dofs
    Z = forms.assemble_scalar_convection(sphere3, np.zeros(sphere3.sq.points.shape))
    assert abs(Z).max() == 0.0
    C = forms.assemble_scalar_convection(sphere3, rotation(sphere3.sq.points))
    # column sums: <C c, 1> = 0 for every c, since grad of the constant test vanishes
    assert np.abs(np.ones(n) @ C).max() < 1e-13
    rng = np.random.default_rng(1)
    c = rng.random(n)
    assert abs(np.ones(n) @ (C @ c)) < 1e-12


def test_convection_row_sums_decay():
    # row sums are -int u . grad_Gamma psi_i; on polygonal Gamma_h they carry the
    # conormal jumps of the rotation and shrink with h instead of vanishing
    from conftest import sphere_spaces
    rs = []
    for lvl in (2, 3):
        sp_ = sphere_spaces(lvl)
        C = forms.assemble_scalar_convection(sp_, rotation(sp_.sq.points))
        rs.append(np.abs(C @ np.ones(sp_.p1.n_dofs)).max())
    assert rs[1] < rs[0] / 4


def test_ns_a_killing_field(sphere3):
    sp_ = sphere3
    A = forms.assemble_ns_a(sp_, 1.0, 0.0, 0.0, 0.0, parts=("strain",))
    u = interpolate(sp_.p2, rotation).values
    v = interpolate(sp_.p2, lambda x: np.broadcast_to([1.0, 0, 0], x.shape) - x[:, :1] * x / np.sum(x * x, axis=1, keepdims=True)).values
    assert u @ A @ u <= 1e-3 * (v @ A @ v)


def test_ns_a_penalty_on_normal_field(sphere2):
    sp_ = sphere2
    tau = 7.0
    A = forms.assemble_ns_a(sp_, 1.0, tau, 0.0, 0.0, parts=("penalty",))
    # constant-in-tet normal: P2 field with the same value at all local nodes is
    # not globally continuous, so test the local identity through a quadrature sum
    n = sp_.n
    val = tau * np.sum(sp_.sq.weights * np.einsum("aqd,aqd->aq", n, n) ** 2)
    assert val == pytest.approx(tau * sp_.area, rel=1e-13)
    assert forms.is_symmetric(A)


def test_ns_a_symmetry(sphere2):
    eta = MixtureParams().viscosity(sphere2.scalar_at_qp(np.linspace(0, 1, sphere2.p1.n_dofs)))
    A = forms.assemble_ns_a(sphere2, eta, sphere2.h ** -2, 1 / sphere2.h, 1.0)
    assert forms.is_symmetric(A)


def test_ns_a_rejects_nonpositive_viscosity(sphere2):
    with pytest.raises(forms.FormError):
        forms.assemble_ns_a(sphere2, 0.0, 1.0, 1.0, 1.0)


def test_ns_convection(sphere3):
    sp_ = sphere3
    N0 = forms.assemble_ns_convection(sp_, 1.0, 1.0, np.zeros(sp_.p2.n_dofs))
    assert abs(N0).max() == 0.0
    w = interpolate(sp_.p2, rotation).values
    N = forms.assemble_ns_convection(sp_, 1.0, 1.0, w)
    assert abs(w @ N @ w) <= 1e-2 * (w @ w)


def test_rho_hat_linear_law():
    mix = MixtureParams(3.0, 1.0)
    np.testing.assert_allclose(mix.rho_hat(np.linspace(-0.5, 1.5, 9)), 1.0)
    assert mix.theta == pytest.approx(np.sqrt(2.0))


def test_b_examples(sphere3):
    sp_ = sphere3
    B = forms.assemble_b(sp_)
    assert B.shape == (sp_.p1.n_dofs, sp_.p2.n_dofs)
    assert np.abs(ones(sp_) @ B).max() < 1e-13
    # u = x-component gradient: grad_Gamma x1 = P e1, interpolate P e1 at nodes
    p = interpolate(sp_.p1, lambda x: x[:, 0]).values
    u = interpolate(sp_.p2, lambda x: np.broadcast_to([1.0, 0, 0], x.shape) - x[:, :1] * x / np.sum(x * x, 1, keepdims=True)).values
    assert p @ (B @ u) > 0


def test_b_adjoint_consistency():
    from conftest import sphere_spaces
    rel = []
    for lvl in (2, 3):
        sp_ = sphere_spaces(lvl)
        B = forms.assemble_b(sp_)
        u = interpolate(sp_.p2, lambda x: np.cross([0.3, -0.2, 1.0], x) * x[:, 2:] ** 2).values
        q = interpolate(sp_.p1, lambda x: x[:, 0] + x[:, 1] * x[:, 2]).values
        lhs = q @ (B @ u)
        div = np.sum(sp_.sq.weights * sp_.scalar_at_qp(q) * sp_.vector_sdiv_at_qp(u))
        rel.append(abs(lhs + div) / abs(lhs))
    assert rel[1] <= 1e-2 and rel[1] < rel[0]


def test_s_examples(sphere2):
    S = forms.assemble_s(sphere2, 1.0)
    assert np.abs(S @ ones(sphere2)).max() < 1e-12
    assert forms.is_symmetric(S)
    assert np.linalg.eigvalsh(S.toarray()).min() >= -1e-12
    assert abs(forms.assemble_s(sphere2, 2.5) - 2.5 * S).max() <= 1e-14 * abs(S).max()


def test_coupling_rhs(sphere2):
    sp_ = sphere2
    n = sp_.p1.n_dofs
    assert np.abs(forms.assemble_coupling_rhs(sp_, np.full(n, 0.3), np.full(n, 2.0), 0.04)).max() < 1e-15
    mu = interpolate(sp_.p1, lambda x: x[:, 2]).values
    f = forms.assemble_coupling_rhs(sp_, np.full(n, 0.5), mu, 0.04)
    g = forms.assemble_coupling_rhs(sp_, np.ones(n), mu, 1.0)
    np.testing.assert_allclose(f, 0.04 * 0.5 * g, rtol=1e-13, atol=1e-18)


def test_theta_coupling_vanishes_for_matched_densities(sphere2):
    mix = MixtureParams(2.0, 2.0)
    mu = np.random.default_rng(0).random(sphere2.p1.n_dofs)
    T = forms.assemble_theta_coupling(sphere2, mix.theta, mu, mix.M)
    assert T.nnz == 0 or abs(T).max() == 0.0


def test_deterministic_assembly(sphere2):
    c = np.linspace(0, 1, sphere2.p1.n_dofs)
    mob = sphere2.scalar_at_qp(c)
    a = forms.assemble_a_mu(sphere2, mob, 0.1)
    b = forms.assemble_a_mu(sphere2, mob, 0.1)
    assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.data, b.data)
