"""Saddle-point system, Riesz preconditioner, MINRES and spectrum.

The Tikhonov optimality system on the diffuse spaces is the symmetric
block operator (unknown ordering (u, v, p, mu_v, mu_p), fixed):

    [ alpha B_H   0      -B_H     0    0  ] [u   ]   [0        ]
    [ 0           B_B    K_omega  m    0  ] [v   ]   [B_B f~   ]
    [-B_H         K_omega 0       0    m  ] [p   ] = [0        ]
    [ 0           m^T    0        0    0  ] [mu_v]   [0        ]
    [ 0           0      m^T      0    0  ] [mu_p]   [0        ]

restricted to the active DOF sets.  The two scalar multipliers enforce
the mean constraints <v, 1>_U = <p, 1>_U = 0 while keeping the matrix
symmetric for MINRES.

The preconditioner applies the inverse Riesz maps blockwise: B_H on the
control block, the H-norm matrix (M-weighted stiffness + bulk mass) on
the state and adjoint blocks, and the scalar <1, 1>_U on the multiplier
rows.  MINRES stops when the preconditioned residual norm
sqrt(r^T P^{-1} r), relative to its initial value, falls below rho.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import OperatorSet


class SaddleError(RuntimeError):
    pass


@dataclass
class SaddleSystem:
    """Assembled KKT operator on the active sets."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    alpha: float
    nu: int                 # number of active control DOFs
    nv: int                 # number of active state DOFs
    ops: OperatorSet
    mult_scale: float       # <1, 1>_U, natural multiplier scaling

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def split(self, x: np.ndarray):
        """Slice a system vector into (u, v, p, multipliers)."""
        nu, nv = self.nu, self.nv
        return (x[:nu], x[nu:nu + nv], x[nu + nv:nu + 2 * nv],
                x[nu + 2 * nv:])


def build_system(ops: OperatorSet, alpha: float, f_tilde: np.ndarray,
                 allow_zero_alpha: bool = False) -> SaddleSystem:
    """Assemble the symmetric saddle system for data vector f_tilde.

    ``f_tilde`` is a full-length nodal vector supported on the B-band
    (the constant-normal extension of the measured data).
    """
    if alpha <= 0.0 and not (allow_zero_alpha and alpha == 0.0):
        raise SaddleError(f"alpha must be positive, got {alpha}")
    f_tilde = np.asarray(f_tilde, dtype=float)
    if f_tilde.shape != (ops.mesh.num_vertices,):
        raise SaddleError("f_tilde must be a full-length nodal vector")
    a_u, a_v = ops.active_u, ops.active_v
    b_uu = ops.b_h[np.ix_(a_u, a_u)]
    b_vu = ops.b_h[np.ix_(a_v, a_u)]
    k_vv = ops.k_omega[np.ix_(a_v, a_v)]
    t_vv = ops.b_b[np.ix_(a_v, a_v)]
    m_col = sp.csr_matrix(ops.mean_vec[a_v][:, None])
    nu, nv = len(a_u), len(a_v)
    mat = sp.bmat([
        [alpha * b_uu, None, -b_vu.T, None, None],
        [None, t_vv, k_vv, m_col, None],
        [-b_vu, k_vv, None, None, m_col],
        [None, m_col.T, None, None, None],
        [None, None, m_col.T, None, None],
    ], format="csr")
    rhs = np.zeros(mat.shape[0])
    rhs[nu:nu + nv] = (ops.b_b @ f_tilde)[a_v]
    mult_scale = float(ops.mean_vec.sum())
    return SaddleSystem(mat, rhs, alpha, nu, nv, ops, mult_scale)


def _sym_gauss_seidel_factory(a: sp.csr_matrix, sweeps: int):
    """Approximate inverse of SPD ``a`` by symmetric Gauss-Seidel sweeps."""
    lower = sp.tril(a, 0).tocsr()
    upper = sp.triu(a, 0).tocsr()

    def apply(r: np.ndarray) -> np.ndarray:
        z = np.zeros_like(r)
        for _ in range(sweeps):
            z += spla.spsolve_triangular(lower, r - a @ z, lower=True)
            z += spla.spsolve_triangular(upper, r - a @ z, lower=False)
        return z

    return apply


@dataclass
class RieszPreconditioner:
    """Block-diagonal inverse Riesz map for the saddle system."""

    system: SaddleSystem
    mode: str = "exact"          # "exact" or "gauss-seidel"
    sweeps: int = 3
    _apply_u: object = field(default=None, repr=False)
    _apply_h: object = field(default=None, repr=False)
    _riesz_u: sp.csr_matrix = field(default=None, repr=False)
    _riesz_h: sp.csr_matrix = field(default=None, repr=False)

    def __post_init__(self):
        ops = self.system.ops
        self._riesz_u = ops.riesz_u()
        self._riesz_h = ops.riesz_h()
        if self.mode == "exact":
            try:
                lu_u = spla.splu(self._riesz_u.tocsc())
                lu_h = spla.splu(self._riesz_h.tocsc())
            except RuntimeError as err:
                raise SaddleError(
                    f"Riesz block factorization failed ({err}); "
                    f"active sets are inconsistent") from err
            self._apply_u = lu_u.solve
            self._apply_h = lu_h.solve
        elif self.mode == "gauss-seidel":
            self._apply_u = _sym_gauss_seidel_factory(self._riesz_u, self.sweeps)
            self._apply_h = _sym_gauss_seidel_factory(self._riesz_h, self.sweeps)
        else:
            raise ValueError(f"unknown preconditioner mode {self.mode!r}")

    def matrix(self) -> sp.csr_matrix:
        """The Riesz (not inverted) block matrix; SPD on the active sets."""
        s = self.system
        scale = sp.identity(2, format="csr") * s.mult_scale
        return sp.block_diag([self._riesz_u, self._riesz_h, self._riesz_h,
                              scale], format="csr")

    def apply(self, r: np.ndarray) -> np.ndarray:
        s = self.system
        nu, nv = s.nu, s.nv
        z = np.empty_like(r)
        z[:nu] = self._apply_u(r[:nu])
        z[nu:nu + nv] = self._apply_h(r[nu:nu + nv])
        z[nu + nv:nu + 2 * nv] = self._apply_h(r[nu + nv:nu + 2 * nv])
        z[nu + 2 * nv:] = r[nu + 2 * nv:] / s.mult_scale
        return z


@dataclass
class SolveReport:
    """Outcome of one MINRES solve."""

    iterations: int
    residual_history: list
    converged: bool
    wall_time: float
    rho: float


def minres(system: SaddleSystem, prec: RieszPreconditioner, rho: float,
           max_iter: int = 2000):
    """Preconditioned MINRES with the relative preconditioned-residual stop.

    Returns (x, SolveReport).  residual_history[k] is the norm ratio after
    k+1 iterations; the history is nonincreasing in exact arithmetic.
    Hitting max_iter reports converged=False instead of raising.
    """
    if not (0.0 < rho < 1.0):
        raise SaddleError(f"rho must be in (0, 1), got {rho}")
    a = system.matrix
    b = system.rhs
    n = len(b)
    x = np.zeros(n)
    history: list = []
    t0 = time.perf_counter()

    r1 = b.copy()
    y = prec.apply(r1)
    beta1 = float(np.sqrt(r1 @ y))
    if beta1 == 0.0:
        return x, SolveReport(0, history, True, time.perf_counter() - t0, rho)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1.copy()

    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        s = 1.0 / beta
        v = s * y
        y = a @ v
        if k >= 2:
            y -= (beta / oldb) * r1
        alfa = float(v @ y)
        y -= (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = prec.apply(r2)
        oldb = beta
        beta2 = float(r2 @ y)
        if beta2 < 0.0:
            raise SaddleError("preconditioner is not positive definite")
        beta = float(np.sqrt(beta2))

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = float(np.sqrt(gbar * gbar + beta * beta))
        gamma = max(gamma, np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        history.append(phibar / beta1)
        if history[-1] < rho:
            converged = True
            break
        if beta == 0.0:  # Lanczos breakdown: solution is in the Krylov span
            converged = history[-1] < rho
            break

    return x, SolveReport(k, history, converged,
                          time.perf_counter() - t0, rho)


DENSE_SPECTRUM_CAP = 4000


def spectrum(system: SaddleSystem, prec: RieszPreconditioner,
             dense_cap: int = DENSE_SPECTRUM_CAP) -> np.ndarray:
    """Eigenvalues of the Riesz-preconditioned operator, sorted ascending.

    Solves the generalized symmetric problem A q = lambda P q with P the
    (SPD) Riesz block matrix, densely.  Requires the exact mode cap.
    """
    n = system.size
    if n > dense_cap:
        raise SaddleError(f"system size {n} exceeds dense spectrum cap "
                          f"{dense_cap}")
    from scipy.linalg import eigh

    a = system.matrix.toarray()
    p = prec.matrix().toarray()
    vals = eigh(a, p, eigvals_only=True)
    return np.sort(vals)


def detect_bands(eigs: np.ndarray, alpha: float, jump_factor: float = 8.0):
    """Classify a preconditioned-KKT spectrum into its three bands.

    Returns a dict with the negative band, the O(alpha) band, the O(1)
    band (as (min, max) tuples) and the list of isolated eigenvalues
    falling outside all three.  Band edges are found by the largest
    relative jump between consecutive positive eigenvalues in the gap
    region above 2 alpha.
    """
    eigs = np.sort(np.asarray(eigs, dtype=float))
    neg = eigs[eigs < 0.0]
    pos = eigs[eigs > 0.0]
    if len(neg) == 0 or len(pos) == 0:
        raise SaddleError("spectrum lacks a negative or positive part")
    # the O(1) band: positive eigenvalues above the biggest relative jump
    low = pos[pos <= 2.0 * alpha * (1.0 + 1e-8)]
    rest = pos[pos > 2.0 * alpha * (1.0 + 1e-8)]
    if len(rest) >= 2:
        ratios = rest[1:] / rest[:-1]
        cut = int(np.argmax(ratios))
        if ratios[cut] >= jump_factor:
            isolated_pos = list(rest[:cut + 1])
            big = rest[cut + 1:]
        else:
            isolated_pos = []
            big = rest
    else:
        isolated_pos = list(rest[:0])
        big = rest
    # isolated negatives: separated from the main negative band by jump
    neg_mag = np.sort(-neg)  # magnitudes ascending
    isolated_neg: list = []
    if len(neg_mag) >= 2:
        ratios = neg_mag[1:] / neg_mag[:-1]
        cut = int(np.argmax(ratios))
        if ratios[cut] >= jump_factor:
            isolated_neg = list(-neg_mag[:cut + 1])
    bands = {
        "negative": (float(neg.min()), float(neg.max())),
        "alpha_band": ((float(low.min()), float(low.max()))
                       if len(low) else None),
        "unit_band": ((float(big.min()), float(big.max()))
                      if len(big) else None),
        "isolated": sorted(isolated_pos + isolated_neg),
    }
    return bands
