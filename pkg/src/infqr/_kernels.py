"""Low-level numeric kernels, jit-compiled when numba is available.

Every kernel is plain loop-based numpy code so the module still works
(slowly) without numba.  All arrays are C-contiguous complex128 unless
noted; index arguments are 0-based here.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True, nogil=True)
def iqr_sweep(B, w, p, ext, ubuf, tau, phases, rdiag, flags, acc, apply_phases):
    """One IQR sweep on the window B[:w, :w] with pivots 0..p-1.

    In place: B <- D* (R_house U_1...U_p) D, i.e. the next canonical
    iterate, exact on the leading p x p block.  ext[l] is the exclusive
    row end of column l (min(f(l+1), w) in 1-based terms).  Outputs per
    pivot: the Householder vector (ubuf row, u[0] = 1 implicit), tau,
    the canonical phase, |R_ll| and a zero-pivot flag.
    """
    for l in range(p):
        hi = ext[l]
        if hi > w:
            hi = w
        s = 0.0
        for r in range(l, hi):
            s += B[r, l].real * B[r, l].real + B[r, l].imag * B[r, l].imag
        nrm = np.sqrt(s)
        if nrm == 0.0:
            tau[l] = 0.0
            rdiag[l] = 0.0
            phases[l] = 1.0 + 0.0j
            flags[l] = 1
            continue
        flags[l] = 0
        a0 = B[l, l]
        a0abs = abs(a0)
        if a0abs > 0.0:
            ph = a0 / a0abs
        else:
            ph = 1.0 + 0.0j
        xi0 = a0 + ph * nrm
        for r in range(l + 1, hi):
            ubuf[l, r - l] = B[r, l] / xi0
        ubuf[l, 0] = 1.0 + 0.0j
        t = 1.0 + a0abs / nrm
        tau[l] = t
        # reflected column l is exactly -ph*nrm*e_l
        B[l, l] = -ph * nrm
        for r in range(l + 1, hi):
            B[r, l] = 0.0
        rdiag[l] = nrm
        phases[l] = -ph
        # acc[c] = (u* B)[c]; contiguous row passes
        for c in range(l + 1, w):
            acc[c] = B[l, c]
        for r in range(l + 1, hi):
            uc = np.conj(ubuf[l, r - l])
            row = B[r]
            for c in range(l + 1, w):
                acc[c] += uc * row[c]
        for c in range(l + 1, w):
            B[l, c] -= t * acc[c]
        for r in range(l + 1, hi):
            ur = ubuf[l, r - l] * t
            row = B[r]
            for c in range(l + 1, w):
                row[c] -= ur * acc[c]
    # right-apply U_1 ... U_p (fill stays within rows < ext[l])
    for l in range(p):
        if flags[l] == 1:
            continue
        hi = ext[l]
        if hi > w:
            hi = w
        t = tau[l]
        for r in range(hi):
            row = B[r]
            a = row[l]
            for c in range(l + 1, hi):
                a += row[c] * ubuf[l, c - l]
            a *= t
            row[l] -= a
            for c in range(l + 1, hi):
                row[c] -= a * np.conj(ubuf[l, c - l])
    if apply_phases:
        for i in range(p):
            pi = np.conj(phases[i])
            row = B[i]
            for j in range(p):
                row[j] *= pi
        for i in range(p):
            row = B[i]
            for j in range(p):
                row[j] *= phases[j]
    return 0


@njit(cache=True, nogil=True)
def apply_q_sweep(x, p, ext, ubuf, tau, phases, flags):
    """x <- Q_sweep x where Q_sweep = (U_1 ... U_p) D, given sweep data.

    Applies the phase diagonal first, then the reflectors in reverse
    pivot order (U_p first), matching Q x = U_1(U_2(...U_p(Dx))).
    """
    n = x.shape[0]
    for i in range(min(p, n)):
        x[i] *= phases[i]
    for l in range(p - 1, -1, -1):
        if flags[l] == 1:
            continue
        hi = ext[l]
        if hi > n:
            hi = n
        if l >= n:
            continue
        a = x[l]
        for r in range(l + 1, hi):
            a += np.conj(ubuf[l, r - l]) * x[r]
        a *= tau[l]
        x[l] -= a
        for r in range(l + 1, hi):
            x[r] -= a * ubuf[l, r - l]
    return 0


@njit(cache=True, nogil=True)
def banded_matmul(indptr, rows, data, V, out):
    """out <- T V for a column-packed sparse T.

    Column c holds entries data[indptr[c]:indptr[c+1]] at row indices
    rows[...]; V and out are (w, m) C-contiguous.
    """
    w, m = V.shape
    out[:, :] = 0.0 + 0.0j
    for c in range(w):
        vc = V[c]
        for idx in range(indptr[c], indptr[c + 1]):
            r = rows[idx]
            t = data[idx]
            orow = out[r]
            for q in range(m):
                orow[q] += t * vc[q]
    return 0


@njit(cache=True, nogil=True)
def hessenberg_reduce_inplace(H, Q, want_q):
    """Reduce H to upper Hessenberg by Householder similarity, in place.

    If want_q, accumulates the unitary Q with Q* H_in Q = H_out.
    """
    n = H.shape[0]
    if n <= 2:
        return 0
    u = np.zeros(n, dtype=np.complex128)
    acc = np.zeros(n, dtype=np.complex128)
    for c in range(n - 2):
        s = 0.0
        for r in range(c + 1, n):
            s += H[r, c].real * H[r, c].real + H[r, c].imag * H[r, c].imag
        nrm = np.sqrt(s)
        if nrm == 0.0:
            continue
        a0 = H[c + 1, c]
        a0abs = abs(a0)
        if a0abs > 0.0:
            ph = a0 / a0abs
        else:
            ph = 1.0 + 0.0j
        xi0 = a0 + ph * nrm
        u[c + 1] = 1.0 + 0.0j
        for r in range(c + 2, n):
            u[r] = H[r, c] / xi0
        t = 1.0 + a0abs / nrm
        # left: H[c+1:, c:] -= t u (u* H)
        H[c + 1, c] = -ph * nrm
        for r in range(c + 2, n):
            H[r, c] = 0.0
        for col in range(c + 1, n):
            acc[col] = H[c + 1, col]
        for r in range(c + 2, n):
            ur = np.conj(u[r])
            row = H[r]
            for col in range(c + 1, n):
                acc[col] += ur * row[col]
        for col in range(c + 1, n):
            H[c + 1, col] -= t * acc[col]
        for r in range(c + 2, n):
            ur = u[r] * t
            row = H[r]
            for col in range(c + 1, n):
                row[col] -= ur * acc[col]
        # right: H[:, c+1:] -= t (H u) u*
        for r in range(n):
            row = H[r]
            a = row[c + 1]
            for col in range(c + 2, n):
                a += row[col] * u[col]
            a *= t
            row[c + 1] -= a
            for col in range(c + 2, n):
                row[col] -= a * np.conj(u[col])
        if want_q:
            for r in range(n):
                row = Q[r]
                a = row[c + 1]
                for col in range(c + 2, n):
                    a += row[col] * u[col]
                a *= t
                row[c + 1] -= a
                for col in range(c + 2, n):
                    row[col] -= a * np.conj(u[col])
    return 0


@njit(cache=True, nogil=True)
def hessenberg_qr_eigvals(H, Z, want_z, deflate_rel, max_steps):
    """Implicit single-shift QR on an upper Hessenberg H, in place.

    Wilkinson shifts, exceptional shifts every 10 stalled steps, deflation
    when |H[i, i-1]| <= deflate_rel * (|H[i-1,i-1]| + |H[i,i]|) (with a
    norm-scaled fallback when that sum vanishes).  Reduces H to upper
    triangular (complex Schur form); accumulates Z if want_z.  Returns the
    number of steps used, or -1 on non-convergence.
    """
    n = H.shape[0]
    if n == 0:
        return 0
    hnorm = 0.0
    for i in range(n):
        for j in range(max(0, i - 1), n):
            hnorm += H[i, j].real ** 2 + H[i, j].imag ** 2
    hnorm = np.sqrt(hnorm)
    if hnorm == 0.0:
        return 0
    hi = n - 1
    steps = 0
    stall = 0
    while hi >= 0:
        # deflation scan
        l = hi
        while l > 0:
            ss = abs(H[l - 1, l - 1]) + abs(H[l, l])
            if ss == 0.0:
                ss = hnorm
            if abs(H[l, l - 1]) <= deflate_rel * ss:
                H[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            hi -= 1
            stall = 0
            continue
        steps += 1
        stall += 1
        if steps > max_steps:
            return -1
        # shift
        if stall % 20 == 0:
            # exceptional shift
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            a = H[hi - 1, hi - 1]
            b = H[hi - 1, hi]
            c = H[hi, hi - 1]
            d = H[hi, hi]
            tr2 = (a + d) * 0.5
            det = a * d - b * c
            disc = np.sqrt(tr2 * tr2 - det)
            mu1 = tr2 + disc
            mu2 = tr2 - disc
            if abs(mu1 - d) < abs(mu2 - d):
                mu = mu1
            else:
                mu = mu2
        # implicit single-shift sweep on H[l:hi+1, l:hi+1]
        x = H[l, l] - mu
        y = H[l + 1, l]
        for i in range(l, hi):
            if i > l:
                x = H[i, i - 1]
                y = H[i + 1, i - 1]
            fa = abs(x)
            r = np.hypot(fa, abs(y))
            if r == 0.0:
                cc = 1.0
                ss_ = 0.0 + 0.0j
            else:
                if fa == 0.0:
                    cc = 0.0
                    ss_ = np.conj(y) / abs(y)
                else:
                    cc = fa / r
                    ss_ = (x / fa) * np.conj(y) / r
            # rows i, i+1: G = [[c, s], [-conj(s), c]]
            cstart = i - 1 if i > l else l
            for col in range(cstart, n):
                t1 = H[i, col]
                t2 = H[i + 1, col]
                H[i, col] = cc * t1 + ss_ * t2
                H[i + 1, col] = -np.conj(ss_) * t1 + cc * t2
            if i > l:
                H[i + 1, i - 1] = 0.0
            # cols i, i+1: H <- H G^H
            rend = i + 3 if i + 3 <= hi + 1 else hi + 1
            for rr in range(0, rend):
                t1 = H[rr, i]
                t2 = H[rr, i + 1]
                H[rr, i] = cc * t1 + np.conj(ss_) * t2
                H[rr, i + 1] = -ss_ * t1 + cc * t2
            if want_z:
                for rr in range(n):
                    t1 = Z[rr, i]
                    t2 = Z[rr, i + 1]
                    Z[rr, i] = cc * t1 + np.conj(ss_) * t2
                    Z[rr, i + 1] = -ss_ * t1 + cc * t2
    return steps


@njit(cache=True, nogil=True)
def schur_eigvecs(T, tol):
    """Right eigenvectors of an upper-triangular T by back substitution.

    Column i solves (T - lambda_i) v = 0 with v[i] = 1, v[j>i] = 0.
    Near-degenerate pivots are perturbed by tol to keep the solve finite.
    """
    n = T.shape[0]
    V = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        lam = T[i, i]
        V[i, i] = 1.0 + 0.0j
        for r in range(i - 1, -1, -1):
            s = 0.0 + 0.0j
            for c in range(r + 1, i + 1):
                s += T[r, c] * V[c, i]
            denom = T[r, r] - lam
            if abs(denom) < tol:
                denom = tol + 0.0j
            V[r, i] = -s / denom
        # normalize
        s2 = 0.0
        for r in range(i + 1):
            s2 += V[r, i].real ** 2 + V[r, i].imag ** 2
        inv = 1.0 / np.sqrt(s2)
        for r in range(i + 1):
            V[r, i] *= inv
    return V
