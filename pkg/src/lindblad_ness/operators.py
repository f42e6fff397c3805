"""Pauli algebra, spin-chain Hamiltonians, jump operators and observables.

Conventions used throughout the package:

* ``sigma_z = diag(1, -1)``, so basis index 0 is spin up.
* ``sigma_plus = (sigma_x + i sigma_y) / 2`` raises the spin.
* Multi-site operators are Kronecker products with site 1 as the slowest index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SPLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SMINUS = np.array([[0, 0], [1, 0]], dtype=complex)

PAULI_LABELS = "IXYZ"
PAULIS = (I2, SX, SY, SZ)

FAMILIES = ("heisenberg", "xx")
BATH_SIDES = ("left", "right")


class InvalidModelError(ValueError):
    pass


class NegativeRateError(ValueError):
    pass


# product table: _MUL[a][b] = (phase, c) with sigma_a sigma_b = phase * sigma_c
_MUL = [[None] * 4 for _ in range(4)]
for _a in range(4):
    for _b in range(4):
        _prod = PAULIS[_a] @ PAULIS[_b]
        for _c in range(4):
            _ph = np.trace(PAULIS[_c] @ _prod) / 2
            if abs(_ph) > 0.5:
                _MUL[_a][_b] = (complex(np.round(_ph.real) + 1j * np.round(_ph.imag)), _c)
                break


def pauli_product(a: str, b: str) -> tuple[complex, str]:
    """Multiply two single-site Pauli labels; returns ``(phase, label)``."""
    phase, c = _MUL[PAULI_LABELS.index(a)][PAULI_LABELS.index(b)]
    return phase, PAULI_LABELS[c]


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-site Paulis, e.g. ``PauliString("ZIZ")``."""

    labels: str

    def __post_init__(self):
        labels = "".join(self.labels).upper()
        if any(c not in PAULI_LABELS for c in labels):
            raise ValueError(f"invalid Pauli labels {self.labels!r}")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(PAULI_LABELS.index(c) for c in self.labels)

    @classmethod
    def from_sites(cls, n: int, ops: dict[int, str]) -> "PauliString":
        """Build a string from ``{site: label}`` with 1-based sites."""
        chars = ["I"] * n
        for site, lab in ops.items():
            if not 1 <= site <= n:
                raise IndexError(f"site {site} outside 1..{n}")
            chars[site - 1] = lab
        return cls("".join(chars))

    def __mul__(self, other: "PauliString") -> tuple[complex, "PauliString"]:
        if len(self) != len(other):
            raise ValueError("length mismatch")
        phase = 1 + 0j
        out = []
        for a, b in zip(self.labels, other.labels):
            ph, c = pauli_product(a, b)
            phase *= ph
            out.append(c)
        return phase, PauliString("".join(out))

    def to_matrix(self) -> np.ndarray:
        return kron_all([PAULIS[i] for i in self.indices])


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def embed(op: np.ndarray, first_site: int, n: int) -> np.ndarray:
    """Place a 1- or 2-site operator starting at ``first_site`` (1-based) in an n-site chain."""
    width = int(round(np.log2(op.shape[0])))
    if not 1 <= first_site <= n - width + 1:
        raise IndexError(f"operator on sites {first_site}..{first_site + width - 1} outside chain of {n}")
    left = np.eye(2 ** (first_site - 1))
    right = np.eye(2 ** (n - first_site - width + 1))
    return np.kron(np.kron(left, op), right)


@dataclass(frozen=True)
class SpinChainModel:
    """Boundary-driven spin-1/2 chain.

    ``baths`` selects which boundary reservoirs are attached; the default
    attaches both. For ``n == 1`` both sides act on the single site.
    """

    n: int
    family: str = "heisenberg"
    J: float = 1.0
    delta: float = 1.0
    mu: float = 0.0
    gamma: float = 0.0
    baths: tuple[str, ...] = field(default=BATH_SIDES)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidModelError(f"n must be >= 1, got {self.n}")
        if self.family not in FAMILIES:
            raise InvalidModelError(f"unknown family {self.family!r}")
        object.__setattr__(self, "baths", tuple(self.baths))
        if any(b not in BATH_SIDES for b in self.baths):
            raise InvalidModelError(f"unknown bath side in {self.baths!r}")
        if abs(self.mu) > 1:
            raise NegativeRateError(f"|mu| must be <= 1, got {self.mu}")
        if self.gamma < 0:
            raise NegativeRateError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def coupling(self) -> tuple[float, float]:
        """Effective ``(J, delta)``; the xx family is J=1, delta=0."""
        if self.family == "xx":
            return 1.0, 0.0
        return float(self.J), float(self.delta)


@dataclass(frozen=True)
class LindbladTerm:
    sites: tuple[int, ...]
    operator: np.ndarray
    label: str

    def full(self, n: int) -> np.ndarray:
        return embed(self.operator, self.sites[0], n)


def bond_term(J: float, delta: float) -> np.ndarray:
    return J * (np.kron(SX, SX) + np.kron(SY, SY) + delta * np.kron(SZ, SZ))


def build_hamiltonian(model: SpinChainModel) -> list[tuple[int, np.ndarray]]:
    """Return ``[(j, h_{j,j+1}), ...]`` for bonds j = 1..n-1 as dense 4x4 matrices."""
    if model.n < 2:
        raise InvalidModelError("a Hamiltonian needs at least two sites")
    h = bond_term(*model.coupling)
    return [(j, h.copy()) for j in range(1, model.n)]


def full_hamiltonian(model: SpinChainModel) -> np.ndarray:
    dim = 2 ** model.n
    if model.n < 2:
        return np.zeros((dim, dim), dtype=complex)
    return sum(embed(h, j, model.n) for j, h in build_hamiltonian(model))


def boundary_lindblads(mu: float, n: int = 2, sides: Sequence[str] = BATH_SIDES) -> list[LindbladTerm]:
    """Bath jump operators; left side pumps down for mu > 0, right side pumps up."""
    if abs(mu) > 1:
        raise NegativeRateError(f"|mu| must be <= 1, got {mu}")
    terms = []
    if "left" in sides:
        terms.append(LindbladTerm((1,), np.sqrt(1 - mu) * SPLUS, "bath_left"))
        terms.append(LindbladTerm((1,), np.sqrt(1 + mu) * SMINUS, "bath_left"))
    if "right" in sides:
        terms.append(LindbladTerm((n,), np.sqrt(1 + mu) * SPLUS, "bath_right"))
        terms.append(LindbladTerm((n,), np.sqrt(1 - mu) * SMINUS, "bath_right"))
    return terms


def dephasing_lindblads(n: int, gamma: float) -> list[LindbladTerm]:
    if gamma < 0:
        raise NegativeRateError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0:
        return []
    amp = np.sqrt(gamma / 2)
    return [LindbladTerm((j,), amp * SZ, "dephasing") for j in range(1, n + 1)]


def model_lindblads(model: SpinChainModel) -> list[LindbladTerm]:
    return boundary_lindblads(model.mu, model.n, model.baths) + dephasing_lindblads(model.n, model.gamma)


CURRENT_TWO_SITE = 2 * (np.kron(SX, SY) - np.kron(SY, SX))


def spin_current_op(k: int, n: int | None = None) -> np.ndarray:
    """Spin current on bond k, ``2(X_k Y_{k+1} - Y_k X_{k+1})``.

    Returns the 4x4 two-site operator, or the full 2^n operator when n is given.
    """
    if n is None:
        if k < 1:
            raise IndexError(f"bond {k} out of range")
        return CURRENT_TWO_SITE.copy()
    if not 1 <= k <= n - 1:
        raise IndexError(f"bond {k} outside 1..{n - 1}")
    return embed(CURRENT_TWO_SITE, k, n)


def sz_op(j: int, n: int) -> np.ndarray:
    return embed(SZ, j, n)


def current_string(k: int, n: int) -> list[tuple[float, PauliString]]:
    """Pauli decomposition of the spin current on bond k."""
    return [
        (2.0, PauliString.from_sites(n, {k: "X", k + 1: "Y"})),
        (-2.0, PauliString.from_sites(n, {k: "Y", k + 1: "X"})),
    ]
