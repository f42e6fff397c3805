"""Density operators as matrix product operators in the Pauli basis.

A chain of real tensors ``A_j[l, s, r]`` with ``s`` in (I, X, Y, Z) encodes

    rho = 2^-n  sum_s  (A_1[s_1] A_2[s_2] ... A_n[s_n])  sigma^{s_1} x ... x sigma^{s_n}

with boundary bond dimension 1, so the contracted number is exactly the
Pauli coefficient ``tr(rho P)``. Real tensors make rho Hermitian by
construction and the trace is the all-identity coefficient.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .dense_oracle import DenseState, ResourceError, pauli_coefficients
from .operators import PAULIS, PauliString

SNAPSHOT_FORMAT = "lindblad-ness-mpo"
SNAPSHOT_VERSION = 1
DENSE_N_MAX = 6


@dataclass
class PauliMpo:
    """Pauli-basis MPO.

    ``center`` is the 0-based orthogonality centre when the chain is in
    mixed-canonical form (tensors left of it left-isometric, right of it
    right-isometric), or None when no gauge is maintained.
    """

    tensors: list[np.ndarray]
    center: int | None = None

    def __post_init__(self):
        if not self.tensors:
            raise ValueError("an MPO needs at least one site")
        self.tensors = [np.asarray(t, dtype=float) for t in self.tensors]
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for j, (a, b) in enumerate(zip(self.tensors, self.tensors[1:]), start=1):
            if a.shape[2] != b.shape[0]:
                raise ValueError(f"bond {j}: dimensions {a.shape[2]} and {b.shape[0]} disagree")

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "PauliMpo":
        return PauliMpo([t.copy() for t in self.tensors], self.center)

    def trace(self) -> float:
        return expect_pauli_string(self, PauliString("I" * self.n))

    def normalize(self) -> float:
        """Rescale in place to unit trace; returns the previous trace."""
        tr = self.trace()
        if not np.isfinite(tr) or tr == 0:
            raise FloatingPointError(f"cannot normalize MPO with trace {tr}")
        c = 0 if self.center is None else self.center
        self.tensors[c] = self.tensors[c] / tr
        return tr


@dataclass
class TruncationReport:
    bond: int
    kept: int
    discarded_weight: float


def identity_mpo(n: int) -> PauliMpo:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    t = np.zeros((1, 4, 1))
    t[0, 0, 0] = 1.0
    return PauliMpo([t.copy() for _ in range(n)])


def product_mpo(coeffs: list) -> PauliMpo:
    """Product state from per-site Pauli coefficient 4-vectors ``(1, x, y, z)``."""
    return PauliMpo([np.asarray(c, dtype=float).reshape(1, 4, 1) for c in coeffs])


def coefficient_tensor(mpo: PauliMpo) -> np.ndarray:
    """Full coefficient array of shape (4,)*n; exponential in n."""
    if mpo.n > DENSE_N_MAX + 2:
        raise ResourceError(f"full coefficient tensor limited to n <= {DENSE_N_MAX + 2}")
    out = mpo.tensors[0][0]  # (4, D)
    for t in mpo.tensors[1:]:
        out = np.tensordot(out, t, axes=([-1], [0]))
    return out[..., 0]


def to_dense(mpo: PauliMpo) -> DenseState:
    if mpo.n > DENSE_N_MAX:
        raise ResourceError(f"dense conversion limited to n <= {DENSE_N_MAX}, got {mpo.n}")
    half_paulis = np.stack(PAULIS) / 2
    # W[l, r, i, j] = sum_s A[l, s, r] sigma^s_ij / 2
    out = np.ones((1, 1, 1))  # (row, col, bond)
    for t in mpo.tensors:
        w = np.einsum("lsr,sij->lijr", t, half_paulis)
        out = np.einsum("abl,lijr->aibjr", out, w)
        d0, d1 = out.shape[0] * 2, out.shape[2] * 2
        out = out.reshape(d0, d1, -1)
    rho = out[:, :, 0]
    return DenseState(0.5 * (rho + rho.conj().T))


def from_coefficients(c: np.ndarray, tol: float = 1e-14) -> PauliMpo:
    """Exact tensor-train decomposition of a (4,)*n coefficient array."""
    n = c.ndim
    tensors = []
    rest = c.reshape(1, -1)
    for _ in range(n - 1):
        D = rest.shape[0]
        mat = rest.reshape(D * 4, -1)
        u, s, vt = sla.svd(mat, full_matrices=False)
        keep = max(1, int(np.sum(s > tol * s[0]))) if s[0] > 0 else 1
        u, s, vt = u[:, :keep], s[:keep], vt[:keep]
        tensors.append(u.reshape(D, 4, keep))
        rest = s[:, None] * vt
    tensors.append(rest.reshape(rest.shape[0], 4, 1))
    return PauliMpo(tensors)


def from_dense(state: DenseState, tol: float = 1e-14) -> PauliMpo:
    return from_coefficients(pauli_coefficients(state), tol)


def _svd(mat: np.ndarray):
    try:
        return sla.svd(mat, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        return sla.svd(mat, full_matrices=False, lapack_driver="gesvd", check_finite=False)


def apply_two_site_gate(
    mpo: PauliMpo,
    gate: np.ndarray,
    j: int,
    D_max: int = 64,
    eps_trunc: float = 1e-12,
    absorb: str = "both",
) -> tuple[PauliMpo, TruncationReport]:
    """Apply a 16x16 Pauli-basis superoperator on bond j (sites j, j+1, 1-based).

    The updated pair is split by SVD; singular values below
    ``eps_trunc * s_max`` are dropped and at most ``D_max`` kept. ``absorb``
    puts the singular values on the ``"left"`` or ``"right"`` tensor, which
    then becomes the orthogonality centre, or splits their square root over
    both (``"both"``, gauge dropped). Truncation is optimal only when the
    centre already sits on site j or j+1. The input MPO is modified in place
    and also returned.
    """
    if not 1 <= j <= mpo.n - 1:
        raise IndexError(f"bond {j} outside 1..{mpo.n - 1}")
    A, B = mpo.tensors[j - 1], mpo.tensors[j]
    Dl, Dr = A.shape[0], B.shape[2]
    theta = np.tensordot(A, B, axes=([2], [0])).reshape(Dl, 16, Dr)
    theta = np.einsum("ab,lbr->lar", gate, theta, optimize=True)
    mat = theta.reshape(Dl * 4, 4 * Dr)
    if not np.all(np.isfinite(mat)):
        raise FloatingPointError(f"non-finite values after gate on bond {j}")
    u, s, vt = _svd(mat)
    total = float(np.sum(s * s))
    if s.size == 0 or s[0] == 0:
        keep = 1
    else:
        keep = int(np.sum(s > eps_trunc * s[0]))
        keep = max(1, min(keep, D_max))
    discarded = float(np.sum(s[keep:] ** 2) / total) if total > 0 else 0.0
    if absorb == "both":
        sl = sr = np.sqrt(s[:keep])
        mpo.center = None
    elif absorb == "right":
        sl, sr = np.ones(keep), s[:keep]
        mpo.center = j
    elif absorb == "left":
        sl, sr = s[:keep], np.ones(keep)
        mpo.center = j - 1
    else:
        raise ValueError(f"absorb must be 'left', 'right' or 'both', got {absorb!r}")
    mpo.tensors[j - 1] = (u[:, :keep] * sl).reshape(Dl, 4, keep)
    mpo.tensors[j] = (sr[:, None] * vt[:keep]).reshape(keep, 4, Dr)
    return mpo, TruncationReport(j, keep, discarded)


def _shift_right(mpo: PauliMpo, i: int):
    t = mpo.tensors[i]
    D = t.shape[0]
    q, r = np.linalg.qr(t.reshape(D * 4, -1))
    mpo.tensors[i] = q.reshape(D, 4, -1)
    mpo.tensors[i + 1] = np.tensordot(r, mpo.tensors[i + 1], axes=([1], [0]))


def _shift_left(mpo: PauliMpo, i: int):
    t = mpo.tensors[i]
    D = t.shape[2]
    q, r = np.linalg.qr(t.reshape(-1, 4 * D).T)
    mpo.tensors[i] = q.T.reshape(-1, 4, D)
    mpo.tensors[i - 1] = np.tensordot(mpo.tensors[i - 1], r.T, axes=([2], [0]))


def move_center(mpo: PauliMpo, site: int) -> PauliMpo:
    """Bring the MPO to mixed-canonical form with centre at 0-based ``site``."""
    if not 0 <= site < mpo.n:
        raise IndexError(f"site {site} outside 0..{mpo.n - 1}")
    if mpo.center is None:
        for i in range(site):
            _shift_right(mpo, i)
        for i in range(mpo.n - 1, site, -1):
            _shift_left(mpo, i)
    else:
        for i in range(mpo.center, site):
            _shift_right(mpo, i)
        for i in range(mpo.center, site, -1):
            _shift_left(mpo, i)
    mpo.center = site
    return mpo


def expect_pauli_string(mpo: PauliMpo, p: PauliString | str) -> float:
    """Pauli coefficient ``tr(rho P)`` (not divided by the trace)."""
    p = PauliString(p) if isinstance(p, str) else p
    if len(p) != mpo.n:
        raise ValueError(f"Pauli string length {len(p)} != chain length {mpo.n}")
    v = np.ones(1)
    for t, s in zip(mpo.tensors, p.indices):
        v = v @ t[:, s, :]
    return float(v[0])


@dataclass
class LocalExpectations:
    """Normalized one- and two-site Pauli expectations of an MPO."""

    trace: float
    single: np.ndarray  # (n, 4)
    pairs: np.ndarray  # (n-1, 4, 4), nearest neighbours

    @property
    def magnetization(self) -> np.ndarray:
        return self.single[:, 3].copy()

    @property
    def current(self) -> np.ndarray:
        return 2 * (self.pairs[:, 1, 2] - self.pairs[:, 2, 1])


def local_expectations(mpo: PauliMpo) -> LocalExpectations:
    """All single-site and nearest-neighbour expectations in one sweep pair."""
    n = mpo.n
    ident = [t[:, 0, :] for t in mpo.tensors]
    left = [np.ones(1)]
    for m in ident[:-1]:
        left.append(left[-1] @ m)
    right = [np.ones(1)]
    for m in reversed(ident[1:]):
        right.append(m @ right[-1])
    right = right[::-1]
    tr = float(left[-1] @ ident[-1] @ right[-1])
    single = np.empty((n, 4))
    for j, t in enumerate(mpo.tensors):
        single[j] = np.einsum("l,lsr,r->s", left[j], t, right[j])
    pairs = np.empty((max(n - 1, 0), 4, 4))
    for j in range(n - 1):
        pairs[j] = np.einsum("l,lsm,mtr,r->st", left[j], mpo.tensors[j], mpo.tensors[j + 1], right[j + 1])
    return LocalExpectations(tr, single / tr, pairs / tr)


def bond_spectrum(mpo: PauliMpo, j: int) -> np.ndarray:
    """Operator-Schmidt values of the coefficient tensor across bond j, descending.

    Works on a copy; the gauge of ``mpo`` is left untouched.
    """
    if not 1 <= j <= mpo.n - 1:
        raise IndexError(f"bond {j} outside 1..{mpo.n - 1}")
    tmp = move_center(mpo.copy(), j - 1)
    t = tmp.tensors[j - 1]
    return sla.svdvals(t.reshape(t.shape[0] * 4, -1))


def save_snapshot(mpo: PauliMpo, path, metadata: dict | None = None) -> Path:
    """Write an ``.npz`` snapshot; tensors are stored bit-exact in C order."""
    path = Path(path)
    header = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "n": mpo.n,
        "bond_dims": mpo.bond_dims,
        "metadata": metadata or {},
    }
    arrays = {f"site_{j:04d}": np.ascontiguousarray(t) for j, t in enumerate(mpo.tensors)}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
    return path


def load_snapshot(path) -> tuple[PauliMpo, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"not an MPO snapshot: format {header.get('format')!r}")
        if header.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {header.get('version')}")
        tensors = [data[f"site_{j:04d}"] for j in range(header["n"])]
    mpo = PauliMpo(tensors)
    if mpo.bond_dims != header["bond_dims"]:
        raise ValueError("snapshot bond dimensions do not match header")
    return mpo, header["metadata"]
