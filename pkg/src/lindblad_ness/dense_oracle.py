"""Exact dense treatment of the Lindblad generator for small chains.

The density matrix is vectorized row-major (rows of rho concatenated), so
``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.

The dissipator follows the factor-2 convention

    D(rho) = sum_k 2 L_k rho L_k^+ - {L_k^+ L_k, rho}

and the coherent part is ``i [rho, H]``. All closed-form NESS coefficients in
:mod:`lindblad_ness.exact` are stated in this normalization.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .operators import (
    PAULIS,
    PauliString,
    SpinChainModel,
    full_hamiltonian,
    model_lindblads,
)

N_MAX = 6
TOL_ZERO = 1e-10


class ResourceError(RuntimeError):
    pass


class NonUniqueNessError(RuntimeError):
    def __init__(self, null_dim: int):
        super().__init__(f"steady state not unique: null space dimension {null_dim}")
        self.null_dim = null_dim


@dataclass(frozen=True)
class LiouvillianMatrix:
    n: int
    data: np.ndarray

    @property
    def dim(self) -> int:
        return 2 ** self.n


@dataclass(frozen=True)
class DenseState:
    rho: np.ndarray

    @property
    def n(self) -> int:
        return int(round(np.log2(self.rho.shape[0])))

    def vec(self) -> np.ndarray:
        return self.rho.reshape(-1)


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    """Matrix of rho -> i [rho, H]."""
    eye = np.eye(H.shape[0])
    return 1j * (np.kron(eye, H.T) - np.kron(H, eye))


def dissipator_superop(L: np.ndarray) -> np.ndarray:
    """Matrix of rho -> 2 L rho L^+ - {L^+ L, rho}."""
    eye = np.eye(L.shape[0])
    LdL = L.conj().T @ L
    return 2 * np.kron(L, L.conj()) - np.kron(LdL, eye) - np.kron(eye, LdL.T)


def build_liouvillian(model: SpinChainModel) -> LiouvillianMatrix:
    if model.n > N_MAX:
        raise ResourceError(f"dense Liouvillian limited to n <= {N_MAX}, got {model.n}")
    L = hamiltonian_superop(full_hamiltonian(model))
    for term in model_lindblads(model):
        L = L + dissipator_superop(term.full(model.n))
    return LiouvillianMatrix(model.n, L)


def _null_dimension(L: LiouvillianMatrix) -> int:
    ev = np.linalg.eigvals(L.data)
    scale = max(1.0, np.max(np.abs(ev)))
    return int(np.sum(np.abs(ev) < TOL_ZERO * scale))


def steady_state(L: LiouvillianMatrix) -> DenseState:
    """Unique stationary state of ``L``.

    Solves ``L vec(rho) = 0`` with the first row replaced by the trace
    condition. A singular bordered system signals a degenerate null space,
    which is then measured by full diagonalization and reported.
    """
    d = L.dim
    A = L.data.copy()
    A[0, :] = np.eye(d).reshape(-1)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    lu, piv, info = sla.lapack.zgetrf(A)
    anorm = np.linalg.norm(A, 1)
    rcond, _ = sla.lapack.zgecon(lu, anorm, norm="1")
    if info > 0 or rcond < 1e-13:
        raise NonUniqueNessError(_null_dimension(L))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        x = sla.lu_solve((lu, piv), rhs)
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    return DenseState(rho / np.trace(rho).real)


def spectrum(L: LiouvillianMatrix) -> np.ndarray:
    return np.linalg.eigvals(L.data)


def spectral_gap(L: LiouvillianMatrix) -> tuple[float, int]:
    """Return ``(gap, null_dim)``; gap is -max Re over non-zero eigenvalues."""
    ev = spectrum(L)
    scale = max(1.0, np.max(np.abs(ev)))
    zero = np.abs(ev) < TOL_ZERO * scale
    null_dim = int(zero.sum())
    if zero.all():
        return 0.0, null_dim
    return float(-np.max(ev[~zero].real)), null_dim


def propagate(L: LiouvillianMatrix, state: DenseState, t: float) -> DenseState:
    d = L.dim
    v = sla.expm(L.data * t) @ state.vec()
    return DenseState(v.reshape(d, d))


def expect(state: DenseState, obs: np.ndarray) -> float:
    if obs.shape != state.rho.shape:
        raise ValueError(f"observable shape {obs.shape} does not match state {state.rho.shape}")
    val = np.trace(state.rho @ obs)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def pauli_coefficient(state: DenseState, p: PauliString | str) -> float:
    """``tr(rho P)``, i.e. the coefficient c_P in ``rho = 2^-n sum_P c_P P``."""
    p = PauliString(p) if isinstance(p, str) else p
    if len(p) != state.n:
        raise ValueError(f"Pauli string length {len(p)} != chain length {state.n}")
    return expect(state, p.to_matrix())


def pauli_coefficients(state: DenseState) -> np.ndarray:
    """All 4^n coefficients ``tr(rho P)`` as a real array of shape (4,)*n."""
    n = state.n
    t = state.rho.reshape((2,) * (2 * n))
    pauli = np.stack(PAULIS)
    for s in range(n):
        # axes: (r_{s+1}..r_n, c_{s+1}..c_n, a_1..a_s); tr(rho P) = sum rho[r, c] P[c, r]
        t = np.tensordot(t, pauli, axes=([0, n - s], [2, 1]))
    return t.real.copy()


def magnetizations(state: DenseState) -> np.ndarray:
    n = state.n
    return np.array([pauli_coefficient(state, PauliString.from_sites(n, {j: "Z"})) for j in range(1, n + 1)])


def currents(state: DenseState) -> np.ndarray:
    n = state.n
    out = []
    for k in range(1, n):
        xy = pauli_coefficient(state, PauliString.from_sites(n, {k: "X", k + 1: "Y"}))
        yx = pauli_coefficient(state, PauliString.from_sites(n, {k: "Y", k + 1: "X"}))
        out.append(2 * (xy - yx))
    return np.array(out)


def zz_correlations(state: DenseState) -> np.ndarray:
    """Matrix of ``<Z_j Z_k>`` for j != k (diagonal left at zero)."""
    n = state.n
    out = np.zeros((n, n))
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            v = pauli_coefficient(state, PauliString.from_sites(n, {j: "Z", k: "Z"}))
            out[j - 1, k - 1] = out[k - 1, j - 1] = v
    return out


def connected_zz(state: DenseState) -> np.ndarray:
    z = magnetizations(state)
    C = zz_correlations(state) - np.outer(z, z)
    np.fill_diagonal(C, 0.0)
    return C
