"""Bilinear and linear forms on ``Gamma_h`` and the narrow band.

Every form is built as a stack of dense element matrices ``(A, k, l)``
and scattered into CSR.  Coefficients are passed as values at the surface
quadrature points, shape ``(A, Q)``, or as scalars.

Notation for the vector forms: for a P2 basis function ``phi_a e_x`` the
surface gradient ``s_a = P grad phi_a`` gives ``P grad(u) P = p_x (x) s_a``,
so the rate-of-strain pairing and the divergence reduce to products of
``P``, ``s_a`` and ``s_b``.
"""
import logging

import numpy as np
import scipy.sparse as sp

from .fespace import TraceSpaces

logger = logging.getLogger(__name__)


class FormError(ValueError):
    pass


class Pattern:
    """CSR sparsity pattern of an element-to-global map, built once.

    Summation goes through ``np.bincount`` in element order, so repeated
    assemblies are bit-identical.
    """

    def __init__(self, rows, cols, shape):
        A, k = rows.shape
        l = cols.shape[1]
        self.local_shape = (k, l)
        self.shape = shape
        r = np.broadcast_to(rows[:, :, None], (A, k, l)).ravel().astype(np.int64)
        c = np.broadcast_to(cols[:, None, :], (A, k, l)).ravel().astype(np.int64)
        keys, self.inverse = np.unique(r * shape[1] + c, return_inverse=True)
        self.indices = (keys % shape[1]).astype(np.int32)
        self.indptr = np.searchsorted(keys // shape[1], np.arange(shape[0] + 1)).astype(np.int32)
        self.nnz = len(keys)

    def assemble(self, local):
        data = np.bincount(self.inverse, weights=local.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


def scatter(local, rows, cols, shape):
    """Sum element matrices ``local (A, k, l)`` into a CSR matrix."""
    return Pattern(rows, cols, shape).assemble(local)


def _pattern(spaces, name):
    cache = spaces.__dict__.setdefault("_patterns", {})
    if name not in cache:
        if name == "p1":
            d = spaces.p1.cell_nodes
            cache[name] = Pattern(d, d, (spaces.p1.n_dofs,) * 2)
        elif name == "p2":
            d = spaces.p2.cell_dofs()
            cache[name] = Pattern(d, d, (spaces.p2.n_dofs,) * 2)
        else:
            cache[name] = Pattern(spaces.p1.cell_nodes, spaces.p2.cell_dofs(),
                                  (spaces.p1.n_dofs, spaces.p2.n_dofs))
    return cache[name]


def scatter_vector(local, rows, n):
    return np.bincount(rows.ravel(), weights=local.ravel(), minlength=n)


def _coef(spaces, coeff):
    w = spaces.sq.weights
    if coeff is None:
        return w
    return w * np.broadcast_to(np.asarray(coeff, dtype=float), w.shape)


def _p1(spaces, local):
    return _pattern(spaces, "p1").assemble(local)


def _vec_layout(local):
    """``(A, 3, k, 3, k)`` test/trial blocks to ``(A, 3k, 3k)`` component-major."""
    A, _, k, _, _ = local.shape
    return local.reshape(A, 3 * k, 3 * k)


def _p2(spaces, local):
    return _pattern(spaces, "p2").assemble(_vec_layout(local))


# -- scalar forms ----------------------------------------------------------

def assemble_mass(spaces: TraceSpaces, coeff=None):
    """``M_ij = int_Gamma_h coeff psi_j psi_i ds``."""
    w = _coef(spaces, coeff)
    phi = spaces.sq.p1
    return _p1(spaces, np.einsum("aq,aqi,aqj->aij", w, phi, phi))


def lumped_surface_mass(spaces: TraceSpaces):
    """``int psi_i ds``; the surface mean of ``p`` is ``m @ p / m.sum()``."""
    local = np.einsum("aq,aqi->ai", spaces.sq.weights, spaces.sq.p1)
    return scatter_vector(local, spaces.p1.cell_nodes, spaces.p1.n_dofs)


def assemble_load(spaces: TraceSpaces, values_at_qp):
    """``int f psi_i ds`` for ``f`` given at surface quadrature points."""
    local = np.einsum("aq,aqi->ai", _coef(spaces, values_at_qp), spaces.sq.p1)
    return scatter_vector(local, spaces.p1.cell_nodes, spaces.p1.n_dofs)


def _normal_stab(spaces, tau):
    dn = spaces.vq1_dn
    return tau * np.einsum("aq,aqi,aqj->aij", spaces.vq1.weights, dn, dn)


def _stiffness(spaces, coeff):
    g = spaces.p1_sgrad
    return np.einsum("aq,aqid,aqjd->aij", _coef(spaces, coeff), g, g)


def assemble_a_mu(spaces: TraceSpaces, mobility, tau_mu):
    """Mobility-weighted surface stiffness plus normal-gradient stabilization."""
    mob = np.asarray(mobility, dtype=float)
    if np.any(mob < 0):
        logger.info("clamping %d negative mobility values to 0", int(np.sum(mob < 0)))
        mob = np.maximum(mob, 0.0)
    return _p1(spaces, _stiffness(spaces, mob) + _normal_stab(spaces, tau_mu))


def assemble_a_c(spaces: TraceSpaces, eps, tau_c, parts=("surface", "volume")):
    local = np.zeros((spaces.active.n_active, 4, 4))
    if "surface" in parts:
        local = local + _stiffness(spaces, eps)
    if "volume" in parts:
        local = local + _normal_stab(spaces, tau_c)
    return _p1(spaces, local)


def assemble_scalar_convection(spaces: TraceSpaces, u_qp):
    """``C_ij = -int psi_j (u . grad_Gamma psi_i) ds`` with ``u`` at quadrature points."""
    w = spaces.sq.weights
    ug = np.einsum("aqd,aqid->aqi", u_qp, spaces.p1_sgrad)
    return _p1(spaces, -np.einsum("aq,aqi,aqj->aij", w, ug, spaces.sq.p1))


def assemble_s(spaces: TraceSpaces, beta_p):
    """Full-gradient pressure stabilization over the active tetrahedra."""
    g = spaces.vq1.p1_grad[:, 0]  # P1 gradients are constant per tet
    local = beta_p * spaces.tet_volumes[:, None, None] * np.einsum("aid,ajd->aij", g, g)
    return _p1(spaces, local)


# -- vector forms ----------------------------------------------------------

NS_PARTS = ("strain", "penalty", "volume", "grad_div")


def assemble_ns_a(spaces: TraceSpaces, eta, tau, beta_u, grad_div, parts=NS_PARTS):
    """Viscous form with tangential penalty and stabilizations.

    ``eta`` may be a scalar or values at surface quadrature points; it must
    be positive.  ``parts`` selects a subset of the four contributions.
    """
    eta = np.broadcast_to(np.asarray(eta, dtype=float), spaces.sq.weights.shape)
    if "strain" in parts and np.any(eta <= 0):
        raise FormError("viscosity must be positive at every quadrature point")
    A = spaces.active.n_active
    P, s, phi, n = spaces.P, spaces.p2_sgrad, spaces.sq.p2, spaces.n
    w = spaces.sq.weights
    local = np.zeros((A, 3, 10, 3, 10))
    if "strain" in parts:
        we = w * eta
        G = np.einsum("aq,aqid,aqjd->aqij", we, s, s)
        local += np.einsum("aqxy,aqij->axiyj", P, G)
        local += np.einsum("aq,aqjx,aqiy->axiyj", we, s, s)
    if "penalty" in parts:
        nn = np.einsum("aq,aqx,aqy->aqxy", w, n, n)
        local += tau * np.einsum("aqxy,aqi,aqj->axiyj", nn, phi, phi, optimize=True)
    if "grad_div" in parts:
        local += grad_div * np.einsum("aq,aqix,aqjy->axiyj", w, s, s)
    if "volume" in parts:
        dn = spaces.vq2_dn
        blk = beta_u * np.einsum("aq,aqi,aqj->aij", spaces.vq2.weights, dn, dn)
        for x in range(3):
            local[:, x, :, x, :] += blk
    return _p2(spaces, local)


def assemble_tangential_mass(spaces: TraceSpaces, rho=None):
    """``int rho (P u) . v ds``, the time-derivative form acting on ``u-bar``."""
    w = _coef(spaces, rho)
    phi = spaces.sq.p2
    wP = w[..., None, None] * spaces.P
    return _p2(spaces, np.einsum("aqxy,aqi,aqj->axiyj", wP, phi, phi, optimize=True))


def assemble_ns_convection(spaces: TraceSpaces, rho, rho_hat, w_values):
    """Skew-stabilized convection with advecting P2 field ``w_values``."""
    wq = spaces.vector_at_qp(w_values)
    div_w = spaces.vector_sdiv_at_qp(w_values)
    wt = spaces.sq.weights
    rho = np.broadcast_to(np.asarray(rho, dtype=float), wt.shape)
    rho_hat = np.broadcast_to(np.asarray(rho_hat, dtype=float), wt.shape)
    phi, s, P = spaces.sq.p2, spaces.p2_sgrad, spaces.P
    sw = np.einsum("aqjd,aqd->aqj", s, wq)
    scal = np.einsum("aq,aqi,aqj->aqij", wt * rho, phi, sw)
    scal += np.einsum("aq,aqi,aqj->aqij", 0.5 * wt * rho_hat * div_w, phi, phi)
    return _p2(spaces, np.einsum("aqxy,aqij->axiyj", P, scal))


def assemble_b(spaces: TraceSpaces):
    """``B[q, u] = int u . grad_Gamma psi_q ds``, shape ``(n_p1, n_p2)``."""
    w = spaces.sq.weights
    local = np.einsum("aq,aqkx,aqj->akxj", w, spaces.p1_sgrad, spaces.sq.p2)
    return _pattern(spaces, "b").assemble(local)


def assemble_coupling_rhs(spaces: TraceSpaces, c, mu, sigma_gamma):
    """Surface-tension force ``-sigma_gamma int c grad_Gamma mu . v ds``."""
    cq = spaces.scalar_at_qp(c)
    gq = spaces.scalar_sgrad_at_qp(mu)
    local = -sigma_gamma * np.einsum("aq,aqx,aqi->axi", spaces.sq.weights * cq, gq, spaces.sq.p2)
    A = local.shape[0]
    return scatter_vector(local.reshape(A, 30), spaces.p2.cell_dofs(), spaces.p2.n_dofs)


def assemble_theta_coupling(spaces: TraceSpaces, theta, mu, mobility, theta_grad=None):
    """``M ((grad_Gamma(theta u-bar)) grad_Gamma mu, theta v)`` acting on ``u``.

    With constant ``theta`` the integrand is ``M theta^2 v . P grad(u) P grad mu``.
    ``theta_grad`` (surface gradient of theta at quadrature points) adds the
    product-rule term for a spatially varying theta.
    """
    wt = spaces.sq.weights
    theta = np.broadcast_to(np.asarray(theta, dtype=float), wt.shape)
    mob = np.broadcast_to(np.asarray(mobility, dtype=float), wt.shape)
    gmu = spaces.scalar_sgrad_at_qp(mu)
    phi, s, P = spaces.sq.p2, spaces.p2_sgrad, spaces.P
    coef = wt * mob * theta
    sg = np.einsum("aqjd,aqd->aqj", s, gmu)
    scal = np.einsum("aq,aqi,aqj->aqij", coef * theta, phi, sg)
    if theta_grad is not None:
        tg = np.einsum("aqd,aqd->aq", theta_grad, gmu)
        scal += np.einsum("aq,aqi,aqj->aqij", coef * tg, phi, phi)
    return _p2(spaces, np.einsum("aqxy,aqij->axiyj", P, scal))


def assemble_vector_load(spaces: TraceSpaces, f_qp):
    """``int f . v ds`` for a vector field given at surface quadrature points."""
    local = np.einsum("aq,aqx,aqi->axi", spaces.sq.weights, f_qp, spaces.sq.p2)
    A = local.shape[0]
    return scatter_vector(local.reshape(A, 30), spaces.p2.cell_dofs(), spaces.p2.n_dofs)


def is_symmetric(m, rtol=1e-12):
    d = abs(m - m.T).max() if m.nnz else 0.0
    return d <= rtol * max(abs(m).max(), 1e-300)
