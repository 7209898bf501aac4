"""The infinite-dimensional QR iteration.

Two evaluation paths compute the same canonical object (positive-diagonal
phase convention):

* sweep path -- interleaved Householder sweeps on a shrinking window; the
  finite window f_n(m) reproduces P_m T_n P_m exactly for quasi-banded T.
* power path -- batched simultaneous iteration; the first m columns of the
  accumulated Q-sequence are the orthonormalization of the columns of T^n
  restricted to span{e_1..e_m}, so per-step canonical QR of T*V recovers
  them stably.  Used for large n*bandwidth runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._kernels import (
    apply_q_sweep,
    banded_matmul,
    iqr_sweep,
)
from .operators import (
    DEFAULT_WINDOW_CAP,
    BandProfile,
    ColumnOracle,
    DecaySchedule,
)

__all__ = [
    "HouseholderReflector",
    "SweepData",
    "IqrWindow",
    "ErrorLedger",
    "ErrorBudgetExceeded",
    "householder_vector",
    "qr_window",
    "iqr_truncation",
    "giant_window_reference",
    "q_columns",
    "power_qr_equivalence_check",
    "iqr_invertible",
]

# dense window guard: refuse to allocate sweep windows above this many
# entries (complex128), ~1.9 GB
DENSE_WINDOW_ENTRY_CAP = 120_000_000


@dataclass
class HouseholderReflector:
    """Reflector S = I - (2/||xi||^2) xi (x -> <x, xi>), acting from
    basis index `start` (1-based); xi is finitely supported."""

    start: int
    xi: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        """S x for a vector of any length covering the support."""
        out = np.array(x, dtype=np.complex128, copy=True)
        s0 = self.start - 1
        seg = out[s0 : s0 + self.xi.size]
        nrm2 = np.vdot(self.xi, self.xi).real
        if nrm2 > 0:
            seg -= (2.0 / nrm2) * np.vdot(self.xi, seg) * self.xi
        return out

    def matrix(self, dim: int) -> np.ndarray:
        s = np.eye(dim, dtype=np.complex128)
        s0 = self.start - 1
        nrm2 = np.vdot(self.xi, self.xi).real
        if nrm2 > 0:
            k = self.xi.size
            s[s0 : s0 + k, s0 : s0 + k] -= (2.0 / nrm2) * np.outer(
                self.xi, self.xi.conj()
            )
        return s


def householder_vector(eta: np.ndarray, start: int = 1) -> HouseholderReflector:
    """Reflector mapping eta to a multiple of the first basis vector.

    Sign is the cancellation-avoiding '+' branch: xi = eta + ph(eta_1)
    ||eta|| e_1 (ph = 1 when eta_1 = 0), so S eta = -ph ||eta|| e_1.
    """
    eta = np.asarray(eta, dtype=np.complex128)
    nrm = np.linalg.norm(eta)
    if nrm == 0:
        raise ValueError("cannot reflect the zero vector")
    ph = eta[0] / abs(eta[0]) if abs(eta[0]) > 0 else 1.0 + 0j
    xi = eta.copy()
    xi[0] += ph * nrm
    return HouseholderReflector(start=start, xi=xi)


@dataclass
class SweepData:
    """Raw reflector data for one sweep (0-based internal layout)."""

    pivots: int
    ext: np.ndarray  # int64, exclusive row ends per pivot
    ubuf: np.ndarray  # (pivots, maxwidth) scaled Householder vectors, u[0]=1
    tau: np.ndarray
    phases: np.ndarray  # canonical phase diagonal entries
    rdiag: np.ndarray  # |R_ll| (canonical R diagonal)
    flags: np.ndarray  # 1 where the pivot column was zero

    def reflectors(self) -> list[HouseholderReflector]:
        out = []
        for l in range(self.pivots):
            if self.flags[l]:
                continue
            width = int(self.ext[l]) - l
            u = self.ubuf[l, :width].copy()
            out.append(HouseholderReflector(start=l + 1, xi=u))
        return out


@dataclass
class IqrWindow:
    """State of a finished windowed IQR run."""

    block: np.ndarray
    window_size: int
    sweeps_done: int
    method: str = "sweep"
    sweeps: list[SweepData] = field(default_factory=list)
    q_basis: np.ndarray | None = None  # power path: columns of Q-hat
    had_zero_pivot: bool = False
    rdiag_logs: np.ndarray | None = None  # accumulated log |R-hat_kk|

    @property
    def reflectors(self) -> list[list[HouseholderReflector]]:
        """Householder reflectors grouped by sweep (sweep-path runs)."""
        return [s.reflectors() for s in self.sweeps]

    @property
    def phase_fixers(self) -> list[np.ndarray]:
        return [s.phases.copy() for s in self.sweeps]


def qr_window(
    block: np.ndarray, band: BandProfile
) -> tuple[list[HouseholderReflector], np.ndarray, np.ndarray]:
    """QR-decompose a window of a quasi-banded operator.

    Returns (reflectors, R, phases) with block = (U_1...U_p D) R, R upper
    triangular with real non-negative diagonal, and D = diag(phases).
    Zero pivot columns produce R_ll = 0 with phase 1 (no reflector).
    """
    r = np.array(block, dtype=np.complex128, copy=True)
    w = r.shape[0]
    reflectors: list[HouseholderReflector] = []
    phases = np.ones(w, dtype=np.complex128)
    for l in range(w):
        hi = min(band.extent(l + 1), w)
        x = r[l:hi, l]
        nrm = np.linalg.norm(x)
        if nrm == 0:
            continue
        ph = x[0] / abs(x[0]) if abs(x[0]) > 0 else 1.0 + 0j
        xi = x.copy()
        xi[0] += ph * nrm
        refl = HouseholderReflector(start=l + 1, xi=xi)
        reflectors.append(refl)
        nrm2 = np.vdot(xi, xi).real
        r[l:hi, l:] -= (2.0 / nrm2) * np.outer(xi, xi.conj() @ r[l:hi, l:])
        r[l, l] = -ph * nrm
        r[l + 1 : hi, l] = 0.0
        phases[l] = -ph
    r = phases.conj()[:, None] * r
    return reflectors, r, phases


def _window_chain(band: BandProfile, m: int, n: int, cap: int) -> list[int]:
    chain = [m]
    for _ in range(n):
        nxt = band.extent(chain[-1])
        if nxt > cap:
            from .operators import WindowCapExceeded

            raise WindowCapExceeded(nxt, cap)
        chain.append(nxt)
    return chain


def _dense_window(oracle: ColumnOracle, w: int) -> np.ndarray:
    if w * w > DENSE_WINDOW_ENTRY_CAP:
        raise MemoryError(
            f"dense window {w}x{w} exceeds the entry cap; use method='power'"
        )
    return oracle.rectangle(w, w)


def _packed_window(oracle: ColumnOracle, w: int):
    """Column-packed sparse window (indptr, rows, data) with exact
    leading/trailing zero trimming."""
    band = oracle.band
    indptr = np.zeros(w + 1, dtype=np.int64)
    rows_list = []
    data_list = []
    for j in range(1, w + 1):
        hi = min(band.extent(j), w) if band else w
        colv = np.asarray(oracle.column(j, hi), dtype=np.complex128)
        nz = np.nonzero(colv)[0]
        rows_list.append(nz.astype(np.int64))
        data_list.append(colv[nz])
        indptr[j] = indptr[j - 1] + nz.size
    rows = np.concatenate(rows_list) if rows_list else np.zeros(0, np.int64)
    data = np.concatenate(data_list) if data_list else np.zeros(0, np.complex128)
    return indptr, rows, data


def _sweep_path(
    oracle: ColumnOracle,
    m: int,
    n: int,
    chain: list[int],
    keep_reflectors: bool,
    record: int | None,
    rdiag_track: int,
) -> tuple[np.ndarray, IqrWindow, list[np.ndarray]]:
    band = oracle.band
    w_full = chain[n]
    B = _dense_window(oracle, w_full)
    ext_full = band.extents_array(w_full)
    maxwidth = int(np.max(ext_full - np.arange(w_full))) if w_full else 1
    acc = np.zeros(w_full, dtype=np.complex128)
    sweeps: list[SweepData] = []
    trajectory: list[np.ndarray] = []
    had_zero = False
    rlogs = np.zeros(rdiag_track, dtype=np.float64) if rdiag_track else None
    for j in range(1, n + 1):
        w_r = chain[n - j + 1]
        p = chain[n - j]
        ext = np.minimum(ext_full[:w_r], w_r)
        ubuf = np.zeros((p, maxwidth), dtype=np.complex128)
        tau = np.zeros(p, dtype=np.float64)
        phases = np.zeros(p, dtype=np.complex128)
        rdiag = np.zeros(p, dtype=np.float64)
        flags = np.zeros(p, dtype=np.int8)
        iqr_sweep(B, w_r, p, ext, ubuf, tau, phases, rdiag, flags, acc, True)
        if np.any(flags[:p] == 1):
            had_zero = True
        if rlogs is not None:
            with np.errstate(divide="ignore"):
                rlogs += np.log(rdiag[:rdiag_track])
        if keep_reflectors:
            sweeps.append(
                SweepData(
                    pivots=p, ext=ext[:p].copy(), ubuf=ubuf, tau=tau,
                    phases=phases, rdiag=rdiag, flags=flags,
                )
            )
        if record is not None:
            rec = min(record, p)
            trajectory.append(B[:rec, :rec].copy())
    block = B[:m, :m].copy()
    window = IqrWindow(
        block=block,
        window_size=w_full,
        sweeps_done=n,
        method="sweep",
        sweeps=sweeps,
        had_zero_pivot=had_zero,
        rdiag_logs=rlogs,
    )
    return block, window, trajectory


def _canonical_orth(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormalize columns with positive-diagonal R; returns (Q, log|R_kk|).

    CholQR with a second pass; falls back to Householder QR when the Gram
    matrix is not numerically positive definite.
    """
    logs = np.zeros(V.shape[1])
    for _ in range(2):
        G = V.conj().T @ V
        try:
            R = sla.cholesky(G, lower=False, check_finite=False)
        except sla.LinAlgError:
            Q, R = sla.qr(V, mode="economic", check_finite=False)
            d = np.diagonal(R).copy()
            ph = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
            Q = Q * ph.conj()[None, :]
            mag = np.abs(d)
            with np.errstate(divide="ignore"):
                logs += np.where(mag > 0, np.log(mag, where=mag > 0), -np.inf)
            V = Q
            continue
        V = sla.solve_triangular(
            R, V.T, trans="T", lower=False, check_finite=False
        ).T
        logs += np.log(np.diagonal(R).real)
    return V, logs


def _power_path(
    oracle: ColumnOracle,
    m: int,
    n: int,
    chain: list[int],
    batch: int,
    rdiag_track: int,
) -> tuple[np.ndarray, IqrWindow]:
    w = chain[n]
    indptr, rows, data = _packed_window(oracle, w)
    V = np.zeros((w, m), dtype=np.complex128)
    V[:m, :m] = np.eye(m)
    tmp = np.zeros_like(V)
    rlogs = np.zeros(m)
    done = 0
    while done < n:
        q = min(batch, n - done)
        for _ in range(q):
            banded_matmul(indptr, rows, data, V, tmp)
            V, tmp = tmp, V
        V, logs = _canonical_orth(np.ascontiguousarray(V))
        rlogs += logs
        done += q
    banded_matmul(indptr, rows, data, np.ascontiguousarray(V), tmp)
    block = V.conj().T @ tmp[:, :]
    window = IqrWindow(
        block=block[:m, :m].copy(),
        window_size=w,
        sweeps_done=n,
        method="power",
        q_basis=V,
        rdiag_logs=rlogs[:rdiag_track] if rdiag_track else None,
    )
    return window.block, window


def iqr_truncation(
    T: ColumnOracle,
    m: int,
    n: int,
    method: str = "auto",
    keep_reflectors: bool | None = None,
    record: int | None = None,
    cap: int = DEFAULT_WINDOW_CAP,
    power_batch: int = 4,
    _rdiag_track: int = 0,
) -> tuple[np.ndarray, IqrWindow]:
    """Exact m x m section of the n-th IQR iterate of a quasi-banded T.

    Returns (block, window) with block = P_m T_n P_m under the
    positive-diagonal phase convention, computed from the finite window
    of size f_n(m).  method 'sweep' carries reflectors (q_columns), method
    'power' scales to large n; 'auto' picks by window size.
    """
    band = T.band
    if band is None:
        raise TypeError("iqr_truncation needs a quasi-banded oracle; "
                        "use iqr_invertible for column-decay oracles")
    if m < 0 or n < 0:
        raise ValueError("m and n must be >= 0")
    chain = _window_chain(band, m, n, cap)
    if n == 0:
        block = T.truncation(m)
        return block, IqrWindow(block=block.copy(), window_size=m, sweeps_done=0)
    if method == "auto":
        dense_ok = chain[n] * chain[n] <= DENSE_WINDOW_ENTRY_CAP
        method = (
            "sweep"
            if (record is not None or keep_reflectors or (chain[n] <= 1600 and dense_ok))
            else "power"
        )
        if not dense_ok and (record is not None or keep_reflectors):
            raise MemoryError(
                "window too large for the sweep path but reflectors or a "
                "trajectory were requested"
            )
    if method == "sweep":
        keep = True if keep_reflectors is None else keep_reflectors
        block, window, _ = _sweep_path(T, m, n, chain, keep, record, _rdiag_track)
        return block, window
    if method == "power":
        if record is not None:
            raise ValueError("trajectory recording is only supported on the sweep path")
        return _power_path(T, m, n, chain, power_batch, _rdiag_track)
    raise ValueError(f"unknown method {method!r}")


def iqr_trajectory(
    T: ColumnOracle,
    m: int,
    n: int,
    cap: int = DEFAULT_WINDOW_CAP,
) -> list[np.ndarray]:
    """Blocks P_m T_j P_m for j = 1..n from a single windowed run."""
    band = T.band
    if band is None:
        raise TypeError("trajectories need a quasi-banded oracle")
    chain = _window_chain(band, m, n, cap)
    _, _, traj = _sweep_path(T, m, n, chain, False, m, 0)
    return traj


def giant_window_reference(
    T: ColumnOracle, m: int, n: int, pad: int = 10, cap: int = DEFAULT_WINDOW_CAP
) -> np.ndarray:
    """Test oracle: run n full QR iterations on one N x N truncation,
    N = f_n(m) + pad, and return the leading m x m block."""
    band = T.band
    chain = _window_chain(band, m, n, cap)
    w = chain[n] + pad
    B = _dense_window(T, w)
    ext = band.extents_array(w)
    acc = np.zeros(w, dtype=np.complex128)
    maxwidth = int(np.max(ext - np.arange(w)))
    for _ in range(n):
        p = w
        ubuf = np.zeros((p, maxwidth), dtype=np.complex128)
        tau = np.zeros(p, dtype=np.float64)
        phases = np.zeros(p, dtype=np.complex128)
        rdiag = np.zeros(p, dtype=np.float64)
        flags = np.zeros(p, dtype=np.int8)
        iqr_sweep(B, w, p, ext, ubuf, tau, phases, rdiag, flags, acc, True)
    return B[:m, :m].copy()


def q_columns(window: IqrWindow, count: int, height: int) -> np.ndarray:
    """First `count` columns of Q-hat_n = Q_1...Q_n, truncated to `height`
    rows (columns of the returned (height, count) array)."""
    if height > window.window_size:
        raise ValueError(
            f"height {height} exceeds the computed window {window.window_size}"
        )
    if window.method == "power":
        if count > window.q_basis.shape[1]:
            raise ValueError("count exceeds the stored Q-basis width")
        return window.q_basis[:height, :count].copy()
    if window.sweeps_done and not window.sweeps:
        raise ValueError("run iqr_truncation with keep_reflectors=True first")
    w = window.window_size
    out = np.zeros((height, count), dtype=np.complex128)
    for c in range(count):
        x = np.zeros(w, dtype=np.complex128)
        x[c] = 1.0
        for s in reversed(window.sweeps):
            apply_q_sweep(x, s.pivots, s.ext, s.ubuf, s.tau, s.phases, s.flags)
        out[:, c] = x[:height]
    return out


def power_qr_equivalence_check(T: ColumnOracle, m: int, n: int) -> float:
    """Gap between span{T^n e_j}_{j<=m} and span{Q-hat_n e_j}_{j<=m}.

    Both spans are computed on a window of height f_n(m); the power span
    uses repeated application with per-column scaling, the Q span comes
    from the sweep path.  Small values verify T^n = Q-hat_n R-hat_n.
    """
    from .spectra import subspace_delta_hat

    band = T.band
    chain = _window_chain(band, m, n, DEFAULT_WINDOW_CAP)
    w = chain[n]
    indptr, rows, data = _packed_window(T, w)
    V = np.zeros((w, m), dtype=np.complex128)
    V[:m, :m] = np.eye(m)
    tmp = np.zeros_like(V)
    for _ in range(n):
        banded_matmul(indptr, rows, data, V, tmp)
        V, tmp = tmp, V
        nrm = np.linalg.norm(V, axis=0)
        nrm[nrm == 0] = 1.0
        V = np.ascontiguousarray(V / nrm[None, :])
    Vq, _ = np.linalg.qr(V)
    _, win = iqr_truncation(T, m, n, method="sweep", keep_reflectors=True)
    Q = q_columns(win, m, w)
    return subspace_delta_hat(Vq, Q)


@dataclass
class ErrorLedger:
    """Certified error data for the column-decay path.

    Implements the delta recursion: delta_1 = 2*C~/(j*||t~_1||) and
    delta_k = max(delta_{k-1}, 2(C~/j + 2(k-1) delta_{k-1} C~)/||v~_k||)
    with C~ = (C+1)^n, and final_bound = 2 sqrt(m) delta_m C + 1/j.
    """

    level: int
    c_tilde: float
    deltas: np.ndarray
    v_norms: np.ndarray
    final_bound: float

    @property
    def column_bound(self) -> float:
        """Certified l2 error of each computed Q-hat column."""
        return float(self.deltas[-1]) if self.deltas.size else 0.0


class ErrorBudgetExceeded(RuntimeError):
    """The ledger search exhausted its level budget; carries the best bound."""

    def __init__(self, best_bound: float, best_level: int, eps: float):
        super().__init__(
            f"certified bound {best_bound:.3e} (level j={best_level}) "
            f"did not reach eps={eps:.3e}"
        )
        self.best_bound = best_bound
        self.best_level = best_level
        self.eps = eps


def _ledger_from_logs(
    level: int, n: int, m: int, norm_bound: float, rlogs: np.ndarray
) -> ErrorLedger:
    c_tilde = (norm_bound + 1.0) ** n
    v_norms = np.exp(rlogs[:m])
    deltas = np.zeros(m)
    if m >= 1:
        with np.errstate(divide="ignore"):
            deltas[0] = 2.0 * c_tilde / (level * v_norms[0]) if v_norms[0] > 0 else np.inf
        for k in range(1, m):
            if v_norms[k] > 0:
                cand = 2.0 * (c_tilde / level + 2.0 * k * deltas[k - 1] * c_tilde) / v_norms[k]
            else:
                cand = np.inf
            deltas[k] = max(deltas[k - 1], cand)
    final = 2.0 * math.sqrt(m) * deltas[-1] * norm_bound + 1.0 / level if m else 1.0 / level
    return ErrorLedger(
        level=level, c_tilde=c_tilde, deltas=deltas, v_norms=v_norms, final_bound=final
    )


def iqr_invertible(
    T: ColumnOracle,
    m: int,
    n: int,
    eps: float,
    max_level: int = 2**24,
    column_eps: float | None = None,
    method: str = "auto",
    keep_reflectors: bool = False,
) -> tuple[np.ndarray, ErrorLedger, IqrWindow]:
    """Error-controlled m x m section of the n-th IQR iterate.

    For an invertible T with a column-decay schedule, runs the windowed
    iteration on the truncated operator T_(j) over a doubling schedule of
    levels j until the certified bound ||P_m T_n P_m - P_m T_(j),n P_m||
    <= eps (and, when given, the certified column error <= column_eps).
    Raises ErrorBudgetExceeded (carrying the best bound) on failure.
    """
    decay = T.decay
    if decay is None:
        raise TypeError("iqr_invertible needs a column-decay oracle; "
                        "banded oracles can use iqr_truncation directly")
    if eps <= 0:
        raise ValueError("eps must be positive")
    best_bound = np.inf
    best_level = 0
    level = 1
    while level <= max_level:
        profile = decay.level_profile(level)

        def trunc_col(j: int, height: int, _p=profile) -> np.ndarray:
            v = np.array(T.column(j, height), dtype=np.complex128, copy=True)
            cut = _p.extent(j)
            if cut < height:
                v[cut:] = 0.0
            return v

        T_level = ColumnOracle(
            column=trunc_col,
            structure=profile,
            metadata=None,
            name=f"{T.name}|g^{level}" if T.name else f"|g^{level}",
        )
        if n == 0:
            block = T_level.truncation(m)
            ledger = ErrorLedger(
                level=level,
                c_tilde=1.0,
                deltas=np.zeros(m),
                v_norms=np.ones(m),
                final_bound=1.0 / level,
            )
            window = IqrWindow(block=block.copy(), window_size=m, sweeps_done=0)
        else:
            block, window = iqr_truncation(
                T_level,
                m,
                n,
                method=method,
                keep_reflectors=keep_reflectors,
                _rdiag_track=m,
            )
            ledger = _ledger_from_logs(level, n, m, decay.norm_bound, window.rdiag_logs)
        ok = ledger.final_bound <= eps
        if column_eps is not None:
            ok = ok and ledger.column_bound <= column_eps
        if ok:
            return block, ledger, window
        if ledger.final_bound < best_bound:
            best_bound = ledger.final_bound
            best_level = level
        level *= 2
    raise ErrorBudgetExceeded(best_bound, best_level, eps)
