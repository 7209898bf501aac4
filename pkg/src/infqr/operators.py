"""Infinite matrices as column oracles, plus the operator gallery.

An infinite matrix T on l2(N) is represented by a function producing any
finite prefix of any column, together with structural metadata: either a
band profile f (column j is supported in rows 1..f(j)) or a column-decay
schedule g^j.  Indices in the public API are 1-based, matching the usual
operator-theory convention e_1, e_2, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "BandProfile",
    "DecaySchedule",
    "GalleryMetadata",
    "ColumnOracle",
    "RandomEnsemble",
    "SignRole",
    "WindowCapExceeded",
    "fold_z_to_n",
    "unfold_n_to_z",
    "fold_operator",
    "sample_bernoulli_signs",
    "diag_oracle",
    "gallery_schrodinger_t1",
    "gallery_mixed_diag_t2",
    "gallery_bidiagonal_a",
    "gallery_blockdiag_t",
    "gallery_toeplitz",
    "gallery_laurent",
    "gallery_jacobi_t3",
    "gallery_pt_h1",
    "gallery_feinberg_zee_h3",
    "gallery_hatano_nelson_h4",
    "gallery_diag_harmonic",
    "make_operator",
    "list_operators",
    "convergence_rate",
    "per_entry_rates",
]

DEFAULT_WINDOW_CAP = 10**6


class WindowCapExceeded(RuntimeError):
    """Iterated band profile exceeded the configured window cap."""

    def __init__(self, required: int, cap: int):
        super().__init__(
            f"window of size {required} exceeds the cap {cap}; "
            "raise the cap explicitly if this is intended"
        )
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class BandProfile:
    """Column support bound: <Te_j, e_i> = 0 whenever i > f(j).

    f must be non-decreasing with f(n) >= n.
    """

    f: Callable[[int], int]

    def extent(self, j: int) -> int:
        v = int(self.f(j))
        if v < j:
            raise ValueError(f"band profile violates f(n) >= n at n={j}: f={v}")
        return v

    def iterate(self, m: int, times: int, cap: int = DEFAULT_WINDOW_CAP) -> int:
        """a-fold iterate f_a(m), guarded by the window cap."""
        v = m
        for _ in range(times):
            v = self.extent(v)
            if v > cap:
                raise WindowCapExceeded(v, cap)
        return v

    def extents_array(self, w: int) -> np.ndarray:
        """0-based exclusive row ends min(f(j), w) for columns j = 1..w."""
        return np.minimum(
            np.array([self.extent(j) for j in range(1, w + 1)], dtype=np.int64), w
        )

    @staticmethod
    def affine(k: int) -> "BandProfile":
        if k < 0:
            raise ValueError("affine band offset must be >= 0")
        return BandProfile(lambda n, _k=k: n + _k)


@dataclass(frozen=True)
class DecaySchedule:
    """Column decay data for the error-controlled path.

    g(j, n) gives the truncation height of column n at level j, promising
    ||(P_{g(j,n)} - I) T e_n|| <= 1/j.  The error ledger additionally relies
    on the operator-norm form ||T_(j) - T|| <= 1/j (the proof upgrades the
    columnwise bound to this; here the schedule is caller-asserted at the
    stronger level, like invertibility).  norm_bound is a C with ||T|| <= C.
    """

    g: Callable[[int, int], int]
    norm_bound: float

    def level_profile(self, j: int) -> BandProfile:
        return BandProfile(lambda n, _j=j: max(int(self.g(_j, n)), n))


@dataclass(frozen=True)
class GalleryMetadata:
    """Known analytic facts about a gallery operator.

    known_eigenvalues are (value, multiplicity) pairs in descending modulus;
    essential_bound is rho = sup{|z| : z in Psi}; rate is the overall
    convergence ratio r; analytic_sets maps names to samplers
    resolution -> complex points.
    """

    known_eigenvalues: tuple[tuple[complex, int], ...] | None = None
    essential_bound: float | None = None
    rate: float | None = None
    analytic_sets: Mapping[str, Callable[[int], np.ndarray]] | None = None

    def __post_init__(self):
        if self.rate is not None and not (0 < self.rate < 1):
            raise ValueError("rate must lie in (0,1)")
        if self.known_eigenvalues:
            for _, mult in self.known_eigenvalues:
                if mult < 1:
                    raise ValueError("multiplicities must be >= 1")

    def sample_set(self, name: str, resolution: int = 1024) -> np.ndarray:
        if not self.analytic_sets or name not in self.analytic_sets:
            raise KeyError(f"no analytic set named {name!r}")
        return np.asarray(self.analytic_sets[name](resolution), dtype=complex)


def convergence_rate(meta: GalleryMetadata) -> float:
    """Overall ratio r = max{|l_2/l_1|, ..., |l_N/l_{N-1}|, rho/|l_N|}."""
    if not meta.known_eigenvalues or meta.essential_bound is None:
        raise ValueError("needs known eigenvalues and an essential bound")
    mod = [abs(v) for v, _ in meta.known_eigenvalues]
    ratios = [mod[i + 1] / mod[i] for i in range(len(mod) - 1)]
    ratios.append(meta.essential_bound / mod[-1])
    return max(ratios)


def per_entry_rates(meta: GalleryMetadata, count: int | None = None) -> list[float]:
    """Per-diagonal-entry rates r_i: entry i converges like O(r_i^n).

    r_i = max over the first k ratios, where k is the eigenvalue group of
    entry i; the last group also includes rho/|l_N|.
    """
    if not meta.known_eigenvalues or meta.essential_bound is None:
        raise ValueError("needs known eigenvalues and an essential bound")
    eigs = meta.known_eigenvalues
    mod = [abs(v) for v, _ in eigs]
    n_groups = len(eigs)
    group_rates = []
    running = 0.0
    for kk in range(n_groups):
        if kk + 1 < n_groups:
            running = max(running, mod[kk + 1] / mod[kk])
        else:
            running = max(running, meta.essential_bound / mod[kk])
        group_rates.append(running)
    rates: list[float] = []
    for kk, (_, mult) in enumerate(eigs):
        rates.extend([group_rates[kk]] * mult)
    if count is not None:
        rates = rates[:count]
    return rates


@dataclass(frozen=True)
class ColumnOracle:
    """An infinite matrix given by column prefixes.

    column(j, height) returns entries <Te_j, e_i> for i = 1..height as a
    complex array.  Prefixes must be consistent: column(j, h1) is the head
    of column(j, h2) for h1 <= h2.  Entries are computed on demand; oracles
    are immutable and safe to evaluate concurrently.
    """

    column: Callable[[int, int], np.ndarray]
    structure: BandProfile | DecaySchedule
    metadata: GalleryMetadata | None = None
    name: str = ""

    @property
    def band(self) -> BandProfile | None:
        return self.structure if isinstance(self.structure, BandProfile) else None

    @property
    def decay(self) -> DecaySchedule | None:
        return self.structure if isinstance(self.structure, DecaySchedule) else None

    def entry(self, i: int, j: int) -> complex:
        if i < 1 or j < 1:
            raise IndexError("indices are 1-based")
        return complex(self.column(j, i)[i - 1])

    def truncation(self, m: int) -> np.ndarray:
        """Dense m x m section P_m T P_m."""
        out = np.zeros((m, m), dtype=np.complex128)
        for j in range(1, m + 1):
            out[:, j - 1] = self.column(j, m)
        return out

    def rectangle(self, rows: int, cols: int) -> np.ndarray:
        """Dense rows x cols section (uneven truncation)."""
        out = np.zeros((rows, cols), dtype=np.complex128)
        for j in range(1, cols + 1):
            out[:, j - 1] = self.column(j, rows)
        return out

    def with_shift(self, lam: complex) -> "ColumnOracle":
        """Oracle of T + lam*I with the same structure."""
        if lam == 0:
            return self
        base = self.column

        def col(j: int, height: int, _l=complex(lam)) -> np.ndarray:
            v = np.array(base(j, height), dtype=np.complex128, copy=True)
            if j <= height:
                v[j - 1] += _l
            return v

        return ColumnOracle(
            column=col,
            structure=self.structure,
            metadata=None,
            name=f"{self.name}+{lam}" if self.name else "",
        )


def _column_from_entryfn(entries: Callable[[int], dict[int, complex]]):
    """Build a column callable from j -> {row: value} maps (1-based)."""

    def col(j: int, height: int) -> np.ndarray:
        v = np.zeros(height, dtype=np.complex128)
        for i, x in entries(j).items():
            if 1 <= i <= height:
                v[i - 1] = x
        return v

    return col


# ---------------------------------------------------------------------------
# Z -> N folding


def fold_z_to_n(z_index: int) -> int:
    """Interleave Z into N: 0 -> 1, z > 0 -> 2z, z < 0 -> 2|z|+1."""
    if z_index == 0:
        return 1
    if z_index > 0:
        return 2 * z_index
    return 2 * (-z_index) + 1


def unfold_n_to_z(n_index: int) -> int:
    """Inverse of fold_z_to_n."""
    if n_index < 1:
        raise IndexError("N indices are 1-based")
    if n_index == 1:
        return 0
    if n_index % 2 == 0:
        return n_index // 2
    return -(n_index // 2)


def fold_operator(
    entry_z: Callable[[int, int], complex],
    bandwidth: int,
    metadata: GalleryMetadata | None = None,
    name: str = "",
) -> ColumnOracle:
    """Fold a banded operator on l2(Z) to l2(N) via the interleaving order.

    entry_z(i, j) gives <T e_j, e_i> over Z and must vanish for |i-j| >
    bandwidth.  The folded oracle is quasi-banded with f(n) = n + 2b + 1.
    """
    if bandwidth < 0:
        raise ValueError("bandwidth must be >= 0")

    def entries(n: int) -> dict[int, complex]:
        jz = unfold_n_to_z(n)
        out: dict[int, complex] = {}
        for iz in range(jz - bandwidth, jz + bandwidth + 1):
            v = entry_z(iz, jz)
            if v != 0:
                out[fold_z_to_n(iz)] = complex(v)
        return out

    return ColumnOracle(
        column=_column_from_entryfn(entries),
        structure=BandProfile.affine(2 * bandwidth + 1),
        metadata=metadata,
        name=name,
    )


# ---------------------------------------------------------------------------
# Seeded randomness: counter-based (Philox) streams


class SignRole(Enum):
    SIGNS_OFFDIAG = 0
    SIGNS_DIAG = 1


@dataclass(frozen=True)
class RandomEnsemble:
    """Deterministic Bernoulli sign source keyed by (seed, role).

    Backed by the Philox counter-based generator, so identical seed and
    parameters reproduce identical realizations bit-exactly.
    """

    seed: int
    bernoulli_p: float
    distribution_role: SignRole = SignRole.SIGNS_OFFDIAG

    def __post_init__(self):
        if not (0.0 <= self.bernoulli_p <= 1.0):
            raise ValueError("bernoulli_p must lie in [0, 1]")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def _uniforms(self, count: int) -> np.ndarray:
        bg = np.random.Philox(key=[self.seed, self.distribution_role.value])
        return np.random.Generator(bg).random(count)

    def signs(self, count: int) -> np.ndarray:
        """First `count` signs of the stream, as an int8 array of +-1."""
        if count < 0:
            raise ValueError("count must be >= 0")
        u = self._uniforms(count)
        return np.where(u < self.bernoulli_p, 1, -1).astype(np.int8)

    def sign_source(self) -> Callable[[int], int]:
        """Random-access counter -> sign function with an internal cache.

        The cache only memoizes the (deterministic) stream prefix, so the
        returned closure is value-pure.
        """
        box = {"arr": self.signs(1024)}

        def sign_at(counter: int) -> int:
            arr = box["arr"]
            if counter >= arr.size:
                box["arr"] = self.signs(2 * (counter + 1))
                arr = box["arr"]
            return int(arr[counter])

        return sign_at

    def sign_at(self, counter: int) -> int:
        """Value of the stream at a given counter (random access)."""
        return int(self.signs(counter + 1)[counter])


def sample_bernoulli_signs(ensemble: RandomEnsemble, count: int) -> np.ndarray:
    """Signs with P(+1) = p, deterministic given the ensemble seed."""
    return ensemble.signs(count)


def _seeded_complex_gaussian(seed: int, shape: tuple[int, ...]) -> np.ndarray:
    bg = np.random.Philox(key=[seed, 2**32])
    g = np.random.Generator(bg)
    return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / math.sqrt(2)


# ---------------------------------------------------------------------------
# Gallery


def diag_oracle(
    values: Callable[[int], complex],
    metadata: GalleryMetadata | None = None,
    name: str = "diag",
) -> ColumnOracle:
    """Diagonal operator diag(values(1), values(2), ...)."""

    def entries(j: int) -> dict[int, complex]:
        return {j: complex(values(j))}

    return ColumnOracle(
        column=_column_from_entryfn(entries),
        structure=BandProfile(lambda n: n),
        metadata=metadata,
        name=name,
    )


def gallery_diag_harmonic() -> ColumnOracle:
    """diag(1, 1/2, 1/3, ...); spectrum {1/k : k in N} union {0}."""

    def spectrum_sampler(resolution: int) -> np.ndarray:
        pts = [0.0] + [1.0 / kk for kk in range(1, resolution)]
        return np.array(pts, dtype=complex)

    meta = GalleryMetadata(analytic_sets={"spectrum": spectrum_sampler})
    return diag_oracle(lambda j: 1.0 / j, metadata=meta, name="diag_harmonic")


def gallery_schrodinger_t1() -> ColumnOracle:
    """Discrete Schrodinger operator with compactly supported potential.

    Tridiagonal with unit off-diagonals and v_j = 5 sin(j)^2 / sqrt(j) for
    j <= 10, zero otherwise.  Essential spectrum [-2, 2].
    """

    def v(j: int) -> float:
        return 5.0 * math.sin(j) ** 2 / math.sqrt(j) if j <= 10 else 0.0

    def entries(j: int) -> dict[int, complex]:
        out = {j: complex(v(j)), j + 1: 1.0 + 0j}
        if j > 1:
            out[j - 1] = 1.0 + 0j
        return out

    def essential_sampler(resolution: int) -> np.ndarray:
        return np.linspace(-2.0, 2.0, resolution).astype(complex)

    meta = GalleryMetadata(
        essential_bound=2.0, analytic_sets={"essential_spectrum": essential_sampler}
    )
    return ColumnOracle(
        column=_column_from_entryfn(entries),
        structure=BandProfile.affine(1),
        metadata=meta,
        name="schrodinger_t1",
    )


_T2_EIGS = (2.0 + 0j, 1.5j, -1.25 + 0j, -1.125j)


def _householder_unitary(a: np.ndarray) -> np.ndarray:
    """Unitary Q from a Householder QR with R_ii > 0 (phases fixed)."""
    n = a.shape[0]
    r = a.astype(np.complex128, copy=True)
    q = np.eye(n, dtype=np.complex128)
    for l in range(n):
        x = r[l:, l]
        nrm = np.linalg.norm(x)
        if nrm == 0:
            continue
        ph = x[0] / abs(x[0]) if abs(x[0]) > 0 else 1.0
        xi = x.copy()
        xi[0] += ph * nrm
        xi /= np.linalg.norm(xi)
        r[l:, :] -= 2.0 * np.outer(xi, xi.conj() @ r[l:, :])
        q[:, l:] -= 2.0 * np.outer(q[:, l:] @ xi, xi.conj())
    d = np.diagonal(r).copy()
    ph = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return q * ph[None, :]


def gallery_mixed_diag_t2(seed: int = 2**32 + 7) -> ColumnOracle:
    """diag(2, 3i/2, -5/4, -9i/8) + folded bilateral shift, mixed by a
    seeded random unitary on span{e_1..e_9}.

    The unitary is the phase-fixed Householder Q of a seeded 9 x 9 complex
    Ginibre sample, so the construction is reproducible bit-for-bit.
    """
    w9 = _householder_unitary(_seeded_complex_gaussian(seed, (9, 9)))

    # A = diag block (cols 1..4) + folded U_1 shifted to indices >= 5.
    def a_entries(j: int) -> dict[int, complex]:
        if j <= 4:
            return {j: _T2_EIGS[j - 1]}
        jz = unfold_n_to_z(j - 4)
        return {fold_z_to_n(jz + 1) + 4: 1.0 + 0j}

    def a_column(j: int, height: int) -> np.ndarray:
        v = np.zeros(height, dtype=np.complex128)
        for i, x in a_entries(j).items():
            if i <= height:
                v[i - 1] = x
        return v

    def col(j: int, height: int) -> np.ndarray:
        h = max(height, 11)
        if j > 9:
            # A e_j is a single basis vector; W* only matters if it lands
            # in span{e_1..e_9} (happens for j = 11 only).
            acc = a_column(j, h)
        else:
            # T2 e_j = W* A (W e_j); supports live in rows 1..11
            wj = w9[:, j - 1]
            acc = np.zeros(h, dtype=np.complex128)
            for c in range(1, 10):
                acc += wj[c - 1] * a_column(c, h)
        out = acc.copy()
        out[:9] = w9.conj().T @ acc[:9]
        return out[:height]

    def f(n: int) -> int:
        return 11 if n <= 9 else n + 2

    def circle_sampler(resolution: int) -> np.ndarray:
        th = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        return np.exp(1j * th)

    meta = GalleryMetadata(
        known_eigenvalues=tuple((v, 1) for v in _T2_EIGS),
        essential_bound=1.0,
        rate=0.9,
        analytic_sets={"essential_spectrum": circle_sampler},
    )
    return ColumnOracle(
        column=col,
        structure=BandProfile(f),
        metadata=meta,
        name=f"mixed_diag_t2:seed={seed}",
    )


def gallery_bidiagonal_a() -> ColumnOracle:
    """Non-normal tridiagonal operator with a_j = 5cos(j)/4 + 2i sin(j),
    sub-diagonal 1 and super-diagonal i (the spectral-pollution example)."""

    def entries(j: int) -> dict[int, complex]:
        out = {
            j: 5.0 * math.cos(j) / 4.0 + 2j * math.sin(j),
            j + 1: 1.0 + 0j,
        }
        if j > 1:
            out[j - 1] = 1j
        return out

    return ColumnOracle(
        column=_column_from_entryfn(entries),
        structure=BandProfile.affine(1),
        metadata=GalleryMetadata(essential_bound=None),
        name="bidiagonal_a",
    )


def _t_coeff(j: int) -> complex:
    return 1.0 + 0.5 * (math.sin(j) + 1j * math.cos(j))


def gallery_blockdiag_t() -> ColumnOracle:
    """4x4 upper block followed by a lower-bidiagonal tail with entries
    t_j = 1 + 0.5(sin j + i cos j); spectrum = two isolated eigenvalues
    plus the closed disc of radius 1 centred at 1."""
    block = np.array(
        [
            [2.5 + 0.5j, 0, 0, 0],
            [1, 3 - 0.5j, 0, 0],
            [0, 1, 1.7, 0.05],
            [0, 0, 0.05, _t_coeff(4)],
        ],
        dtype=np.complex128,
    )

    def entries(j: int) -> dict[int, complex]:
        if j <= 4:
            return {
                i: complex(block[i - 1, j - 1])
                for i in range(1, 5)
                if block[i - 1, j - 1] != 0
            }
        out = {j: _t_coeff(j)}
        out[j + 1] = 1.0 + 0j
        return out

    def disc_sampler(resolution: int) -> np.ndarray:
        th = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        return 1.0 + np.exp(1j * th)

    meta = GalleryMetadata(
        known_eigenvalues=((3 - 0.5j, 1), (2.5 + 0.5j, 1)),
        essential_bound=2.0,
        analytic_sets={"essential_boundary": disc_sampler},
    )
    return ColumnOracle(
        column=_column_from_entryfn(entries),
        structure=BandProfile.affine(1),
        metadata=meta,
        name="blockdiag_t",
    )


def _symbol_dict(symbol: Mapping[int, complex]) -> dict[int, complex]:
    coeffs = {int(p): complex(c) for p, c in symbol.items() if c != 0}
    if not coeffs:
        raise ValueError("symbol must have at least one nonzero coefficient")
    return coeffs


def _symbol_curve(coeffs: dict[int, complex]):
    def sampler(resolution: int) -> np.ndarray:
        th = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        z = np.exp(1j * th)
        out = np.zeros_like(z)
        for p, c in coeffs.items():
            out += c * z**p
        return out

    return sampler


def gallery_toeplitz(symbol: Mapping[int, complex]) -> ColumnOracle:
    """Toeplitz operator T(a) with entry(i, j) = a_{i-j}."""
    coeffs = _symbol_dict(symbol)
    k = max(max(coeffs), 0)

    def entries(j: int) -> dict[int, complex]:
        return {j + p: c for p, c in coeffs.items() if j + p >= 1}

    meta = GalleryMetadata(analytic_sets={"symbol_curve": _symbol_curve(coeffs)})
    sym = ",".join(f"{p}:{c}" for p, c in sorted(coeffs.items()))
    return ColumnOracle(
        column=_column_from_entryfn(entries),
        structure=BandProfile.affine(k),
        metadata=meta,
        name=f"toeplitz[{sym}]",
    )


def gallery_laurent(symbol: Mapping[int, complex]) -> ColumnOracle:
    """Laurent operator L(a) on l2(Z), folded to l2(N)."""
    coeffs = _symbol_dict(symbol)
    b = max(abs(p) for p in coeffs)

    def entry_z(i: int, j: int) -> complex:
        return coeffs.get(i - j, 0.0 + 0j)

    meta = GalleryMetadata(analytic_sets={"symbol_curve": _symbol_curve(coeffs)})
    sym = ",".join(f"{p}:{c}" for p, c in sorted(coeffs.items()))
    return fold_operator(entry_z, b, metadata=meta, name=f"laurent[{sym}]")


def gallery_jacobi_t3() -> ColumnOracle:
    """Jacobi operator with alternating off-diagonals 3, 1, 3, 1, ...;
    spectrum [-4, -2] union [2, 4]."""

    def c(j: int) -> float:
        return 3.0 if j % 2 == 1 else 1.0

    def entries(j: int) -> dict[int, complex]:
        out = {j + 1: complex(c(j))}
        if j > 1:
            out[j - 1] = complex(c(j - 1))
        return out

    def spectrum_sampler(resolution: int) -> np.ndarray:
        half = max(resolution // 2, 2)
        left = np.linspace(-4.0, -2.0, half)
        right = np.linspace(2.0, 4.0, half)
        return np.concatenate([left, right]).astype(complex)

    meta = GalleryMetadata(
        essential_bound=4.0, analytic_sets={"spectrum": spectrum_sampler}
    )
    return ColumnOracle(
        column=_column_from_entryfn(entries),
        structure=BandProfile.affine(1),
        metadata=meta,
        name="jacobi_t3",
    )


def gallery_pt_h1(gamma: float) -> ColumnOracle:
    """PT-symmetric hopping Hamiltonian on Z (folded): unit hopping plus
    V_n = cos(n) + i*gamma*sin(n) on even sites, 0 on odd sites."""

    def v(n: int) -> complex:
        return math.cos(n) + 1j * gamma * math.sin(n) if n % 2 == 0 else 0.0

    def entry_z(i: int, j: int) -> complex:
        if i == j:
            return v(j)
        if abs(i - j) == 1:
            return 1.0 + 0j
        return 0.0 + 0j

    return fold_operator(entry_z, 1, name=f"pt_h1:gamma={gamma}")


def _annulus_sampler(g: float):
    def sampler(resolution: int) -> np.ndarray:
        half = max(resolution // 2, 2)
        th = np.linspace(0.0, 2.0 * np.pi, half, endpoint=False)
        inner = 2.0 * math.sinh(g) * np.exp(1j * th)
        outer = 2.0 * math.cosh(g) * np.exp(1j * th)
        return np.concatenate([inner, outer])

    return sampler


def _ellipse_sampler(g: float):
    def sampler(resolution: int) -> np.ndarray:
        th = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        return np.exp(g + 1j * th) + np.exp(-g - 1j * th)

    return sampler


def gallery_feinberg_zee_h3(g: float, p: float, seed: int) -> ColumnOracle:
    """Random hopping sign model: (H3 x)_n = s-_{n-1} e^{-g} x_{n-1} +
    s+_n e^{g} x_{n+1}, with i.i.d. Bernoulli(p) signs s+-.

    The spectrum lies in the annulus 2 sinh(g) <= |z| <= 2 cosh(g) and
    contains the ellipse {e^{g+i t} + e^{-g-i t}}.
    """
    ens = RandomEnsemble(seed=seed, bernoulli_p=p, distribution_role=SignRole.SIGNS_OFFDIAG)
    sign_at = ens.sign_source()

    def s_plus(n: int) -> int:
        return sign_at(2 * (fold_z_to_n(n) - 1))

    def s_minus(n: int) -> int:
        return sign_at(2 * (fold_z_to_n(n) - 1) + 1)

    eg, emg = math.exp(g), math.exp(-g)

    def entry_z(i: int, j: int) -> complex:
        # row n couples columns n-1 (s-_{n-1} e^{-g}) and n+1 (s+_n e^{g})
        if j == i - 1:
            return s_minus(i - 1) * emg
        if j == i + 1:
            return s_plus(i) * eg
        return 0.0 + 0j

    meta = GalleryMetadata(
        essential_bound=2.0 * math.cosh(g),
        analytic_sets={"annulus": _annulus_sampler(g), "ellipse_e1": _ellipse_sampler(g)},
    )
    return fold_operator(entry_z, 1, metadata=meta, name=f"feinberg_zee:g={g},p={p},seed={seed}")


def gallery_hatano_nelson_h4(g: float, p: float, seed: int) -> ColumnOracle:
    """NSA Anderson model: (H4 x)_n = e^{-g} x_{n-1} + e^{g} x_{n+1} +
    V_n x_n with i.i.d. Bernoulli(p) +-1 potential V.

    sigma(H4) is contained in (conv(E) + [-1,1]) \\cap (E + B_1) where E is
    the ellipse {e^{g+it} + e^{-g-it}}.
    """
    ens = RandomEnsemble(seed=seed, bernoulli_p=p, distribution_role=SignRole.SIGNS_DIAG)
    sign_at = ens.sign_source()

    def v(n: int) -> int:
        return sign_at(fold_z_to_n(n) - 1)

    eg, emg = math.exp(g), math.exp(-g)

    def entry_z(i: int, j: int) -> complex:
        if j == i - 1:
            return emg + 0j
        if j == i + 1:
            return eg + 0j
        if j == i:
            return v(j) + 0j
        return 0.0 + 0j

    a, b = 2.0 * math.cosh(g), 2.0 * math.sinh(g)

    def inclusion_boundary(resolution: int) -> np.ndarray:
        # boundary points of both constraint sets, for plotting/diagnostics
        th = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        e = np.exp(g + 1j * th) + np.exp(-g - 1j * th)
        return np.concatenate([e + 1.0, e - 1.0])

    meta = GalleryMetadata(
        essential_bound=a + 1.0,
        analytic_sets={
            "ellipse_e": _ellipse_sampler(g),
            "inclusion_boundary": inclusion_boundary,
        },
    )
    oracle = fold_operator(
        entry_z, 1, metadata=meta, name=f"hatano_nelson:g={g},p={p},seed={seed}"
    )
    return oracle


def hatano_nelson_inclusion_mask(z: np.ndarray, g: float, samples: int = 4096) -> np.ndarray:
    """Membership in (conv(E) + [-1,1]) \\cap (E + B_1) for H4 bounds."""
    z = np.asarray(z, dtype=complex)
    a, b = 2.0 * math.cosh(g), 2.0 * math.sinh(g)

    # conv(E) + [-1,1]: exists t in [-1,1] with ((x-t)/a)^2 + (y/b)^2 <= 1
    x, y = z.real, z.imag
    t = np.clip(x, -1.0, 1.0)
    in_conv = ((x - t) / a) ** 2 + (y / b) ** 2 <= 1.0 + 1e-12

    th = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    e = np.exp(g + 1j * th) + np.exp(-g - 1j * th)
    d = np.min(np.abs(z[..., None] - e[None, :]), axis=-1)
    in_tube = d <= 1.0 + 2.0 * np.pi * (a + b) / samples
    return in_conv & in_tube


# ---------------------------------------------------------------------------
# String-addressable registry ("op:key=value,key=value" grammar; see cli)

NAMED_SYMBOLS: dict[str, dict[int, complex]] = {
    # a(t) = (t^3 + t^-1)/2
    "a3": {3: 0.5, -1: 0.5},
    # a~(t) = t + i t^-2
    "atilde": {1: 1.0, -2: 1j},
    # a(t) = t: unilateral/bilateral shift
    "shift": {1: 1.0},
    # a(t) = t + t^-1: free Jacobi
    "free": {1: 1.0, -1: 1.0},
}


def _parse_params(spec: str) -> dict[str, str]:
    out: dict[str, str] = {}
    if not spec:
        return out
    for item in spec.split(","):
        if "=" not in item:
            raise ValueError(f"malformed operator parameter {item!r}; expected key=value")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def make_operator(operator_id: str) -> ColumnOracle:
    """Build a gallery operator from its string identifier.

    Grammar: "name" or "name:key=value,key=value", e.g. "schrodinger_t1",
    "laurent:a3", "hatano_nelson:g=0.5,p=0.5,seed=42".
    """
    name, _, spec = operator_id.partition(":")
    name = name.strip()
    if name in ("laurent", "toeplitz"):
        params = _parse_params(spec) if "=" in spec else {}
        if params:
            raise ValueError(f"{name} takes a named symbol, e.g. '{name}:a3'")
        sym = spec.strip()
        if sym not in NAMED_SYMBOLS:
            raise ValueError(
                f"unknown symbol {sym!r}; known: {sorted(NAMED_SYMBOLS)}"
            )
        builder = gallery_laurent if name == "laurent" else gallery_toeplitz
        return builder(NAMED_SYMBOLS[sym])

    params = _parse_params(spec)
    try:
        if name == "schrodinger_t1":
            return gallery_schrodinger_t1()
        if name == "mixed_diag_t2":
            return gallery_mixed_diag_t2(seed=int(params.get("seed", 2**32 + 7)))
        if name == "bidiagonal_a":
            return gallery_bidiagonal_a()
        if name == "blockdiag_t":
            return gallery_blockdiag_t()
        if name == "jacobi_t3":
            return gallery_jacobi_t3()
        if name == "pt_h1":
            return gallery_pt_h1(gamma=float(params.get("gamma", 1.0)))
        if name in ("feinberg_zee", "h3"):
            return gallery_feinberg_zee_h3(
                g=float(params.get("g", 0.1)),
                p=float(params.get("p", 0.5)),
                seed=int(params.get("seed", 0)),
            )
        if name in ("hatano_nelson", "h4"):
            return gallery_hatano_nelson_h4(
                g=float(params.get("g", 0.5)),
                p=float(params.get("p", 0.5)),
                seed=int(params.get("seed", 0)),
            )
        if name == "diag_harmonic":
            return gallery_diag_harmonic()
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad parameters for operator {name!r}: {exc}") from exc
    raise ValueError(f"unknown operator id {operator_id!r}; see list_operators()")


def list_operators() -> list[str]:
    """Identifier grammar summary for every gallery operator."""
    return [
        "schrodinger_t1",
        "mixed_diag_t2[:seed=N]",
        "bidiagonal_a",
        "blockdiag_t",
        "jacobi_t3",
        "pt_h1[:gamma=X]",
        "feinberg_zee[:g=X,p=X,seed=N]",
        "hatano_nelson[:g=X,p=X,seed=N]",
        "diag_harmonic",
        "toeplitz:" + "|".join(sorted(NAMED_SYMBOLS)),
        "laurent:" + "|".join(sorted(NAMED_SYMBOLS)),
    ]
