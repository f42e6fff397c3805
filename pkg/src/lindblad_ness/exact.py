"""Closed-form steady state of the dephasing XX chain to second order in the driving.

Two conventions are available for the boundary sites:

``"literal"``
    The closed form with the boundary Kronecker-delta terms carrying the signs
    ``+delta_{j,1} - delta_{j,n}`` and ``u_1 = 2``. This is the reference form
    whose tabulated values the package reproduces exactly.

``"consistent"``
    Boundary terms with signs ``-delta_{j,1} + delta_{j,n}`` and ``u_1 = 1``.
    This is the form satisfied by the dense steady state of the generator in
    :mod:`lindblad_ness.dense_oracle`: the one-site balance at a bath-coupled
    end, ``z_1 = -mu - <j>/4``, holds only with these signs. Magnetizations
    and connected zz correlations then agree with the oracle to rounding at
    any mu, not only to leading order.

Bulk entries are identical in both conventions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense_oracle import DenseState, pauli_coefficients

CONVENTIONS = ("literal", "consistent")

# <j_k> = CURRENT_NORMALIZATION * b, fixed by tr(j_k^2) / 2^n / 2 = 4
CURRENT_NORMALIZATION = 4.0


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ExactParams:
    n: int
    mu: float
    gamma: float

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        if abs(self.mu) > 1:
            raise DomainError(f"|mu| must be <= 1, got {self.mu}")
        if self.gamma < 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class FirstOrder:
    a: np.ndarray
    b: float

    @property
    def current(self) -> float:
        """Steady-state spin current <j_k>, identical on every bond."""
        return CURRENT_NORMALIZATION * self.b


@dataclass(frozen=True)
class SecondOrderZZ:
    """Connected correlations; ``C[j-1, k-1]`` is filled for j < k, zeros elsewhere."""

    C: np.ndarray

    def symmetric(self) -> np.ndarray:
        return self.C + self.C.T

    def plateau(self, min_distance: int = 2) -> float:
        n = self.C.shape[0]
        j, k = np.triu_indices(n, min_distance)
        if j.size == 0:
            return 0.0
        return float(np.max(np.abs(self.C[j, k])))


def _check_convention(convention: str):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def current_coefficient(n: int, mu: float, gamma: float) -> float:
    return -mu / (2 + (n - 1) * gamma)


def first_order(params: ExactParams, convention: str = "literal") -> FirstOrder:
    _check_convention(convention)
    n, mu, g = params.n, params.mu, params.gamma
    j = np.arange(1, n + 1)
    edge = (j == 1).astype(float) - (j == n)
    if convention == "consistent":
        edge = -edge
    denom = 2 + (n - 1) * g
    a = -mu + mu * (2 + 2 * (j - 1) * g + edge) / denom
    return FirstOrder(a=a, b=current_coefficient(n, mu, g))


def u_profile(n: int, gamma: float, convention: str = "literal") -> np.ndarray:
    u = 2 + 2 * np.arange(n) * gamma
    if convention == "consistent":
        u[0] -= 1
    return u


def connected_zz(params: ExactParams, convention: str = "literal") -> SecondOrderZZ:
    _check_convention(convention)
    n, g = params.n, params.gamma
    if g <= 0:
        raise DomainError("connected zz closed form needs gamma > 0")
    if n < 3:
        raise DomainError("connected zz closed form needs n >= 3")
    b = current_coefficient(n, params.mu, g)
    u = u_profile(n, g, convention)
    pref = -b * b / ((n - 2) + 2 / g)
    C = np.zeros((n, n))
    jj, kk = np.triu_indices(n, 1)
    # u_{n+1-k} with 1-based k is u[n - k] 0-based
    C[jj, kk] = pref * (u[jj] * u[n - 1 - kk] + (n - 1 + 2 / g) * (kk == jj + 1))
    return SecondOrderZZ(C)


@dataclass(frozen=True)
class HigherCoefficients:
    """Second-order coefficients read off a dense steady state.

    ``d[j-1]`` for j = 1..n-2 and ``f`` are means over all admissible strings;
    the ``*_spread`` fields give the max deviation from that mean.
    """

    d: np.ndarray
    d_spread: np.ndarray
    f: float
    f_spread: float
    zz: np.ndarray
    residual: float
    ok: bool


def fit_higher_coefficients(
    params: ExactParams, oracle_state: DenseState, convention: str = "consistent", tol: float = 1e-8
) -> HigherCoefficients:
    """Extract ``d_j`` and ``f`` from the Pauli coefficients of a dense NESS.

    With ``rho = 2^-n sum_P c_P P``:

    * ``c(Z_j X_l Y_{l+1}) = a_j b + d_j`` for l > j,
    * ``c(X_l Y_{l+1} Z_{n+1-j}) = a_{n+1-j} b - d_j`` for l <= n-1-j,
    * ``c(X_k Y_{k+1} X_l Y_{l+1}) = f`` for |k - l| >= 2.

    ``residual`` is the largest spread among the redundant estimates; ``ok``
    is False when it exceeds ``tol`` relative to the estimate scale.
    """
    n = params.n
    if oracle_state.n != n:
        raise ValueError(f"state has {oracle_state.n} sites, params say {n}")
    if n > 6:
        raise DomainError("coefficient extraction limited to n <= 6")
    c = pauli_coefficients(oracle_state)
    fo = first_order(params, convention)
    a, b = fo.a, fo.b
    X, Y, Z = 1, 2, 3

    def coef(ops):
        idx = [0] * n
        for site, lab in ops.items():
            idx[site - 1] = lab
        return c[tuple(idx)]

    d = np.full(max(n - 2, 0), np.nan)
    d_spread = np.zeros_like(d)
    for j in range(1, n - 1):
        est = [coef({j: Z, l: X, l + 1: Y}) - a[j - 1] * b for l in range(j + 1, n)]
        m = n + 1 - j
        est += [a[m - 1] * b - coef({l: X, l + 1: Y, m: Z}) for l in range(1, n - j)]
        est = np.array(est)
        d[j - 1] = est.mean()
        d_spread[j - 1] = np.max(np.abs(est - est.mean()))

    f_est = np.array(
        [coef({k: X, k + 1: Y, l: X, l + 1: Y}) for k in range(1, n) for l in range(k + 2, n)]
    )
    if f_est.size:
        f = float(f_est.mean())
        f_spread = float(np.max(np.abs(f_est - f)))
    else:
        f, f_spread = float("nan"), 0.0

    zz = np.zeros((n, n))
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            zz[j - 1, k - 1] = coef({j: Z, k: Z})

    residual = float(max(np.max(d_spread, initial=0.0), f_spread))
    scale = max(np.max(np.abs(d), initial=0.0), abs(f) if np.isfinite(f) else 0.0, params.mu**2)
    return HigherCoefficients(d, d_spread, f, f_spread, zz, residual, residual <= tol * max(scale, 1e-300) + 1e-14)
