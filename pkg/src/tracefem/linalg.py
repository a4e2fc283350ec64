"""Sparse storage helpers and the linear-solver contract.

Direct LU (SuperLU) is used up to ``direct_threshold`` unknowns, with a
few steps of iterative refinement; larger systems go through GMRES with
an incomplete-LU preconditioner.  Either way the relative residual must
reach ``rtol`` or :class:`SolverError` is raised.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    def __init__(self, msg, residual=np.nan):
        super().__init__(f"{msg} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SolverOptions:
    rtol: float = 1e-10
    max_iter: int = 2000
    direct_threshold: int = 200_000
    refine_steps: int = 3


def canonical_csr(m):
    """CSR with summed duplicates, sorted column indices and no NaN."""
    m = sp.csr_matrix(m, dtype=float)
    m.sum_duplicates()
    m.sort_indices()
    if not np.all(np.isfinite(m.data)):
        raise SolverError("matrix contains non-finite entries")
    return m


def block_system(blocks):
    """Monolithic CSR from a nested list of blocks (``None`` for zero)."""
    return canonical_csr(sp.bmat(blocks, format="csr"))


@dataclass
class SolveInfo:
    residual: float
    method: str
    iterations: int = 0


def _rel_res(A, x, b, bnorm):
    return float(np.linalg.norm(A @ x - b) / bnorm)


def solve(A, b, opts: SolverOptions = SolverOptions(), return_info=False):
    """Solve ``A x = b`` to ``||Ax - b|| <= rtol ||b||``."""
    A = canonical_csr(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        info = SolveInfo(0.0, "trivial")
        return (np.zeros(n), info) if return_info else np.zeros(n)
    if n <= opts.direct_threshold:
        try:
            lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from exc
        x = lu.solve(b)
        res = _rel_res(A, x, b, bnorm)
        for _ in range(opts.refine_steps):
            if res <= opts.rtol:
                break
            x = x + lu.solve(b - A @ x)
            res = _rel_res(A, x, b, bnorm)
        info = SolveInfo(res, "splu")
    else:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        prec = spla.LinearOperator(A.shape, ilu.solve)
        count = [0]

        def cb(_):
            count[0] += 1

        x, _ = spla.gmres(A, b, M=prec, rtol=opts.rtol, restart=200, maxiter=opts.max_iter,
                          callback=cb, callback_type="pr_norm")
        res = _rel_res(A, x, b, bnorm)
        info = SolveInfo(res, "gmres+ilu", count[0])
    if not np.all(np.isfinite(x)) or not res <= opts.rtol:
        raise SolverError(f"{info.method} did not reach rtol {opts.rtol:g}", res)
    return (x, info) if return_info else x


def surface_mean(p, mass_vector):
    return float(mass_vector @ p / mass_vector.sum())


def project_zero_mean(p, mass_vector):
    """Subtract the surface mean; ``mass_vector[i] = int psi_i ds``."""
    return p - surface_mean(p, mass_vector)
