"""Dense complex spectral kernels, pseudospectrum grids and set metrics.

The eigensolver is implemented in-repo (Hessenberg reduction plus implicit
single-shift QR with Wilkinson shifts) so the toolkit has no opaque
eigenvalue dependency; tests check it against an independent
characteristic-polynomial oracle.  Pseudospectra follow the squared
resolvent-estimate formula on uneven sections, which keeps finite-section
pollution out of the mask at the price of an epsilon floor near
sqrt(machine epsilon).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import (
    hessenberg_qr_eigvals,
    hessenberg_reduce_inplace,
    schur_eigvecs,
)
from .operators import ColumnOracle, RandomEnsemble

__all__ = [
    "SpectrumSource",
    "SpectrumEstimate",
    "SubspaceFrame",
    "PseudospecGrid",
    "EigensolverError",
    "EPSILON_FLOOR",
    "hessenberg_reduce",
    "schur_eigenvalues",
    "schur_decomposition",
    "eig_with_vectors",
    "canonical_eig_order",
    "smallest_singular_value",
    "pseudospectrum_grid",
    "finite_section_spectrum",
    "hausdorff_distance",
    "sup_distance",
    "subspace_delta",
    "subspace_delta_hat",
    "subspace_angle",
    "inverse_participation_ratio",
    "lyapunov_exponent",
]

EPSILON_FLOOR = 1e-7  # ~sqrt(machine epsilon); the grid squares the operator
DEFLATE_REL = 1e-13


class SpectrumSource(Enum):
    FINITE_SECTION = "finite_section"
    IQR_TRUNCATION = "iqr_truncation"
    SIGMA1_TOWER = "sigma1_tower"
    DELTA1_TOWER = "delta1_tower"
    ANALYTIC = "analytic"


@dataclass
class SpectrumEstimate:
    """A finite set of spectral points, optionally with certified radii."""

    points: np.ndarray
    source: SpectrumSource
    radii: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).ravel()
        if self.radii is not None:
            self.radii = np.asarray(self.radii, dtype=float).ravel()
            if self.radii.shape != self.points.shape:
                raise ValueError("radii must match points in length")
            if np.any(self.radii < 0):
                raise ValueError("radii must be >= 0")


class EigensolverError(RuntimeError):
    pass


def _as_square(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if M.size and not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    return M


def _is_hessenberg(M: np.ndarray) -> bool:
    n = M.shape[0]
    if n <= 2:
        return True
    return not np.any(np.tril(M, -2))


def hessenberg_reduce(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unitary reduction to upper Hessenberg form: U* M U = H."""
    M = _as_square(M)
    n = M.shape[0]
    H = np.ascontiguousarray(M, dtype=np.complex128).copy()
    U = np.eye(n, dtype=np.complex128)
    if _is_hessenberg(H):
        return H, U
    hessenberg_reduce_inplace(H, U, True)
    return H, U


def canonical_eig_order(eigs: np.ndarray) -> np.ndarray:
    """Sort by descending modulus, ties by descending argument in (-pi, pi]."""
    eigs = np.asarray(eigs, dtype=complex)
    mods = np.abs(eigs)
    args = np.angle(eigs)  # in (-pi, pi]
    order = np.lexsort((-args, -mods))
    return eigs[order]


def _schur_inplace(M: np.ndarray, want_z: bool) -> tuple[np.ndarray, np.ndarray]:
    n = M.shape[0]
    H = np.ascontiguousarray(M, dtype=np.complex128).copy()
    Z = np.eye(n, dtype=np.complex128)
    if not _is_hessenberg(H):
        hessenberg_reduce_inplace(H, Z, want_z)
    steps = hessenberg_qr_eigvals(H, Z, want_z, DEFLATE_REL, 30 * max(n, 1))
    if steps < 0:
        raise EigensolverError(
            f"QR iteration did not converge within {30 * n} implicit-shift steps"
        )
    return H, Z


def schur_eigenvalues(M: np.ndarray) -> np.ndarray:
    """All eigenvalues (with algebraic multiplicity), canonically ordered."""
    M = _as_square(M)
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    if M.shape[0] == 1:
        return M.ravel().copy()
    H, _ = _schur_inplace(M, False)
    return canonical_eig_order(np.diagonal(H))


def schur_decomposition(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex Schur form M = Z T Z* with T upper triangular."""
    M = _as_square(M)
    if M.shape[0] <= 1:
        return M.copy(), np.eye(M.shape[0], dtype=np.complex128)
    return _schur_inplace(M, True)


def eig_with_vectors(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and right eigenvectors via Schur form plus back
    substitution; pairs are canonically ordered."""
    M = _as_square(M)
    n = M.shape[0]
    if n == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex)
    T, Z = schur_decomposition(M)
    VT = schur_eigvecs(np.ascontiguousarray(T), 1e-150)
    V = Z @ VT
    V /= np.linalg.norm(V, axis=0, keepdims=True)
    eigs = np.diagonal(T).copy()
    mods = np.abs(eigs)
    args = np.angle(eigs)
    order = np.lexsort((-args, -mods))
    return eigs[order], V[:, order]


# ---------------------------------------------------------------------------
# Smallest singular values and pseudospectra


def _inverse_power_largest(apply_inv, dim: int, tol: float, max_iter: int) -> float:
    """Largest eigenvalue of a Hermitian PSD operator given x -> A^{-1}... ,
    here apply_inv computes the PSD operator application itself."""
    rng = np.random.Generator(np.random.Philox(key=[dim, 0xA5A5]))
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = apply_inv(x)
        if not np.all(np.isfinite(y)):
            return math.inf
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        lam_new = float(np.real(np.vdot(x, y)))
        x = y / nrm
        if lam > 0 and abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


def smallest_singular_value(
    M: np.ndarray, z: complex = 0.0, tol: float = 1e-13, max_iter: int = 300
) -> float:
    """min over both branches of the squared-resolvent formula:
    sqrt(lambda_min((M-z)*(M-z))) and sqrt(lambda_min((M-z)(M-z)*)).

    For square M the two branches agree; both are evaluated from one LU
    factorization by inverse iteration.
    """
    M = _as_square(M)
    n = M.shape[0]
    if n == 0:
        return 0.0
    B = M - z * np.eye(n, dtype=np.complex128)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            lu, piv = sla.lu_factor(B, check_finite=False)
        except (sla.LinAlgError, ValueError):
            return 0.0
    if np.any(np.abs(np.diagonal(lu)) == 0.0):
        return 0.0

    def c1(x):  # (B*B)^{-1} x
        y = sla.lu_solve((lu, piv), x, trans=2, check_finite=False)
        return sla.lu_solve((lu, piv), y, trans=0, check_finite=False)

    def c2(x):  # (BB*)^{-1} x
        y = sla.lu_solve((lu, piv), x, trans=0, check_finite=False)
        return sla.lu_solve((lu, piv), y, trans=2, check_finite=False)

    out = math.inf
    for op in (c1, c2):
        lam = _inverse_power_largest(op, n, tol, max_iter)
        if lam == math.inf:
            return 0.0
        if lam > 0:
            out = min(out, 1.0 / math.sqrt(lam))
    return 0.0 if out == math.inf else out


@dataclass
class PseudospecGrid:
    """sigma_min estimates over a complex rectangle.

    values[i, j] is the estimate at im_values[i], re_values[j]; rows are
    grid rows in row-major order.
    """

    re_values: np.ndarray
    im_values: np.ndarray
    epsilon: float
    truncation: int
    values: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return self.values <= self.epsilon

    def point(self, i: int, j: int) -> complex:
        return complex(self.re_values[j], self.im_values[i])

    def value_at(self, z: complex) -> float:
        j = int(np.argmin(np.abs(self.re_values - z.real)))
        i = int(np.argmin(np.abs(self.im_values - z.imag)))
        return float(self.values[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("re,im,sigma_min\n")
            for i in range(self.im_values.size):
                for j in range(self.re_values.size):
                    fh.write(
                        f"{self.re_values[j]!r},{self.im_values[i]!r},"
                        f"{self.values[i, j]!r}\n"
                    )


class _SingularSolve(Exception):
    pass


def _sigma_min_psd(H: sp.spmatrix, tol: float, max_iter: int) -> float:
    """sqrt(lambda_min(H)) for Hermitian PSD sparse H via shift-invert.

    Numerically singular H (garbage or non-finite solves, nonpositive
    Rayleigh quotients) reports 0, which is the correct limit for the
    pseudospectrum mask.
    """
    n = H.shape[0]
    if n <= 64:
        lam = float(np.min(np.linalg.eigvalsh(H.toarray())))
        return math.sqrt(lam) if lam > 0 else 0.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu = spla.splu(H.tocsc())
    except RuntimeError:
        return 0.0

    def mv(x):
        y = lu.solve(x)
        if not np.all(np.isfinite(y)):
            raise _SingularSolve
        return y

    op = spla.LinearOperator((n, n), matvec=mv, dtype=np.complex128)
    rng = np.random.Generator(np.random.Philox(key=[n, 0xA5A5]))
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    lam = None
    try:
        vals = spla.eigsh(
            op, k=1, which="LA", return_eigenvectors=False, tol=tol, v0=v0,
            maxiter=max_iter,
        )
        lam = float(np.real(vals[0]))
    except _SingularSolve:
        return 0.0
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            lam = float(np.real(exc.eigenvalues[-1]))
    except spla.ArpackError:
        lam = None
    if lam is None:
        try:
            lam = _inverse_power_largest(mv, n, tol, 10 * max_iter)
        except _SingularSolve:
            return 0.0
    if not math.isfinite(lam) or lam <= 0:
        return 0.0
    return 1.0 / math.sqrt(lam)


def pseudospectrum_grid(
    T: ColumnOracle,
    region: tuple[float, float, float, float],
    resolution: tuple[int, int],
    epsilon: float,
    m: int,
    unsafe: bool = False,
    tol: float = 1e-6,
    max_iter: int = 400,
) -> PseudospecGrid:
    """Grid of smallest-singular-value estimates on uneven sections.

    Branch 1 uses the tall rectangle (rows 1..f(m), columns 1..m) of T-z;
    branch 2 the fat rectangle of rows 1..m.  Membership mask is
    values <= epsilon; epsilon below the floor ~sqrt(eps_mach) is rejected
    because the formula squares the operator (double precision cannot
    resolve smaller epsilon; pass unsafe=True to override).
    """
    if epsilon < EPSILON_FLOOR and not unsafe:
        raise ValueError(
            f"epsilon={epsilon:g} is below the double-precision floor "
            f"{EPSILON_FLOOR:g} for the squared formula; pass unsafe=True "
            "to override"
        )
    re_lo, re_hi, im_lo, im_hi = region
    n_re, n_im = resolution
    res = np.linspace(re_lo, re_hi, n_re)
    ims = np.linspace(im_lo, im_hi, n_im)

    band = T.band
    rows1 = band.extent(m) if band else 2 * m
    # branch 1: tall rectangle rows x m
    B1 = sp.csc_matrix(T.rectangle(rows1, m))
    E1 = sp.eye(rows1, m, format="csc", dtype=np.complex128)
    H_bb = (B1.conj().T @ B1).tocsc()
    H_eb = (E1.conj().T @ B1).tocsc()  # = P_m B1
    H_be = H_eb.conj().T.tocsc()
    I_m = sp.eye(m, format="csc", dtype=np.complex128)
    # branch 2: fat rectangle m x cols (columns reaching rows <= m)
    cols2 = band.extent(m) if band else 2 * m
    C = sp.csc_matrix(T.rectangle(m, cols2))
    E2 = sp.eye(m, cols2, format="csc", dtype=np.complex128)
    G_cc = (C @ C.conj().T).tocsc()
    G_ce = (C @ E2.conj().T).tocsc()
    G_ec = G_ce.conj().T.tocsc()

    values = np.zeros((n_im, n_re))
    for i, b in enumerate(ims):
        for j, a in enumerate(res):
            z = complex(a, b)
            H1 = H_bb - np.conj(z) * H_eb - z * H_be + (abs(z) ** 2) * I_m
            s1 = _sigma_min_psd(H1, tol, max_iter)
            H2 = G_cc - z * G_ec - np.conj(z) * G_ce + (abs(z) ** 2) * I_m
            s2 = _sigma_min_psd(H2, tol, max_iter)
            values[i, j] = min(s1, s2)
    return PseudospecGrid(
        re_values=res, im_values=ims, epsilon=epsilon, truncation=m, values=values
    )


def finite_section_spectrum(T: ColumnOracle, m: int) -> SpectrumEstimate:
    """sigma(P_m T |_{P_m H}): eigenvalues of the square m x m section."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return SpectrumEstimate(
        points=schur_eigenvalues(T.truncation(m)),
        source=SpectrumSource.FINITE_SECTION,
    )


# ---------------------------------------------------------------------------
# Set metrics


def _as_points(A) -> np.ndarray:
    if isinstance(A, SpectrumEstimate):
        A = A.points
    A = np.asarray(A, dtype=complex).ravel()
    if A.size == 0:
        raise ValueError("point sets must be nonempty")
    return A


def sup_distance(A, B, chunk: int = 4096) -> float:
    """sup_{a in A} dist(a, B) (one-sided)."""
    A, B = _as_points(A), _as_points(B)
    worst = 0.0
    for s in range(0, A.size, chunk):
        d = np.min(np.abs(A[s : s + chunk, None] - B[None, :]), axis=1)
        worst = max(worst, float(np.max(d)))
    return worst


def hausdorff_distance(A, B) -> float:
    """Hausdorff metric max(sup_a dist(a, B), sup_b dist(b, A))."""
    return max(sup_distance(A, B), sup_distance(B, A))


# ---------------------------------------------------------------------------
# Subspaces


@dataclass
class SubspaceFrame:
    """Orthonormal finite frame; columns of `vectors` span the subspace."""

    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=complex)
        if self.vectors.ndim != 2:
            raise ValueError("frame must be a 2-D array of column vectors")
        k = self.vectors.shape[1]
        if k:
            gram = self.vectors.conj().T @ self.vectors
            if np.linalg.norm(gram - np.eye(k)) > 1e-8:
                raise ValueError("frame is not orthonormal (Gram residual > 1e-8)")

    @property
    def ambient_height(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _frame_matrix(F) -> np.ndarray:
    if isinstance(F, SubspaceFrame):
        return F.vectors
    F = np.asarray(F, dtype=complex)
    if F.ndim == 1:
        F = F[:, None]
    k = F.shape[1]
    if k:
        gram = F.conj().T @ F
        if np.linalg.norm(gram - np.eye(k)) > 1e-8:
            raise ValueError("frame is not orthonormal (Gram residual > 1e-8)")
    return F


def _pad_common(Mf: np.ndarray, Nf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = max(Mf.shape[0], Nf.shape[0])
    if Mf.shape[0] < h:
        Mf = np.vstack([Mf, np.zeros((h - Mf.shape[0], Mf.shape[1]), complex)])
    if Nf.shape[0] < h:
        Nf = np.vstack([Nf, np.zeros((h - Nf.shape[0], Nf.shape[1]), complex)])
    return Mf, Nf


def subspace_delta(Mf, Nf) -> float:
    """delta(M, N) = ||(I - P_N) P_M|| (one-sided gap)."""
    M, N = _pad_common(_frame_matrix(Mf), _frame_matrix(Nf))
    if M.shape[1] == 0:
        return 0.0
    if N.shape[1] == 0:
        return 1.0
    R = M - N @ (N.conj().T @ M)
    s = np.linalg.svd(R, compute_uv=False)
    return float(min(max(s[0], 0.0), 1.0)) if s.size else 0.0


def subspace_delta_hat(Mf, Nf) -> float:
    """delta-hat(M, N) = max of the two one-sided gaps = ||P_M - P_N||."""
    return max(subspace_delta(Mf, Nf), subspace_delta(Nf, Mf))


def subspace_angle(Mf, Nf) -> float:
    """Maximal principal angle in [0, pi/2]: sin(phi) = delta-hat."""
    return float(np.arcsin(min(subspace_delta_hat(Mf, Nf), 1.0)))


# ---------------------------------------------------------------------------
# Localization diagnostics


def inverse_participation_ratio(psi: np.ndarray) -> float:
    """sum |psi_i|^4 / (sum |psi_i|^2)^2; 1/dim (delocalized) .. 1 (localized).

    Input is normalized internally.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    p2 = float(np.sum(np.abs(psi) ** 2))
    if p2 == 0.0:
        raise ValueError("zero vector has no participation ratio")
    return float(np.sum(np.abs(psi) ** 4) / p2**2)


def lyapunov_exponent(
    ensemble: RandomEnsemble,
    z: complex,
    g: float,
    N: int,
    burn_in: int = 1000,
    y0: complex = 1.0,
) -> float:
    """Transfer-matrix Lyapunov exponent of the random hopping model.

    kappa(z; g) ~ (1/(2N+1)) sum_{j=-N}^{N} (log|y_j(z)| - g) with
    y_{n+1} = -(s-_{n-1}/s+_n)/y_n + z/s+_n, y started burn_in steps
    before -N at y0.  Signs are drawn from the same counter convention as
    the hopping-sign gallery operator, so a shared ensemble reproduces the
    operator realization.  |y| is clamped at 1e-300 (with a warning).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    from .operators import fold_z_to_n

    sign_at = ensemble.sign_source()

    def s_plus(n: int) -> int:
        return sign_at(2 * (fold_z_to_n(n) - 1))

    def s_minus(n: int) -> int:
        return sign_at(2 * (fold_z_to_n(n) - 1) + 1)

    y = complex(y0)
    if y == 0:
        raise ValueError("y0 must be nonzero")
    n0 = -N - burn_in
    total = 0.0
    clamped = False
    for n in range(n0, N):
        sp_ = s_plus(n)
        sm = s_minus(n - 1)
        y = -(sm / sp_) / y + z / sp_
        if abs(y) < 1e-300:
            y = 1e-300
            clamped = True
        j = n + 1
        if -N <= j <= N:
            total += math.log(abs(y)) - g
    if clamped:
        warnings.warn("Lyapunov recursion hit the 1e-300 clamp", RuntimeWarning)
    return total / (2 * N + 1)
