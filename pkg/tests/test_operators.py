import itertools

import numpy as np
import pytest

from lindblad_ness.operators import (
    PAULI_LABELS,
    InvalidModelError,
    NegativeRateError,
    PauliString,
    SX,
    SZ,
    SpinChainModel,
    boundary_lindblads,
    build_hamiltonian,
    dephasing_lindblads,
    embed,
    full_hamiltonian,
    pauli_product,
    spin_current_op,
    sz_op,
)
from lindblad_ness.dense_oracle import dissipator_superop


def test_heisenberg_bond_spectrum():
    (j, h), = build_hamiltonian(SpinChainModel(2, "heisenberg", J=1, delta=1.5))
    assert j == 1
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(h)), [-3.5, 0.5, 1.5, 1.5], atol=1e-14)


def test_xx_bond_spectrum():
    (_, h), = build_hamiltonian(SpinChainModel(2, "xx"))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(h)), [-2, 0, 0, 2], atol=1e-14)


def test_bond_count_and_hermiticity():
    terms = build_hamiltonian(SpinChainModel(3, "heisenberg", delta=0.7))
    assert [j for j, _ in terms] == [1, 2]
    for _, h in terms:
        assert np.array_equal(h, h.conj().T)


def test_heisenberg_delta0_identical_to_xx():
    a = build_hamiltonian(SpinChainModel(4, "heisenberg", J=1.0, delta=0.0))
    b = build_hamiltonian(SpinChainModel(4, "xx", J=3.0, delta=9.0))
    for (_, ha), (_, hb) in zip(a, b):
        assert np.array_equal(ha, hb)


def test_hamiltonian_needs_two_sites():
    with pytest.raises(InvalidModelError):
        build_hamiltonian(SpinChainModel(1))


@pytest.mark.parametrize("family", ["heisenberg", "xx"])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_total_magnetization_conserved(family, n):
    H = full_hamiltonian(SpinChainModel(n, family, delta=1.5))
    Mz = sum(sz_op(j, n) for j in range(1, n + 1))
    assert np.abs(H @ Mz - Mz @ H).max() < 1e-13


def test_boundary_lindblads_prefactors():
    terms = boundary_lindblads(0.0, 4)
    assert len(terms) == 4
    for t in terms:
        assert np.isclose(np.abs(t.operator).max(), 1.0)
    left = boundary_lindblads(0.02, 4)[:2]
    assert left[0].sites == (1,) and left[1].sites == (1,)
    assert np.isclose(left[0].operator[0, 1], np.sqrt(0.98))  # sigma^+ raises: |up><down|
    assert np.isclose(left[1].operator[1, 0], np.sqrt(1.02))
    right = boundary_lindblads(0.02, 4)[2:]
    assert right[0].sites == (4,) and np.isclose(right[0].operator[0, 1], np.sqrt(1.02))
    assert np.isclose(right[1].operator[1, 0], np.sqrt(0.98))


def test_boundary_lindblads_edge_of_range():
    assert np.abs(boundary_lindblads(1.0, 3)[0].operator).max() == 0.0
    with pytest.raises(NegativeRateError):
        boundary_lindblads(1.5, 3)


def test_dephasing_lindblads():
    assert dephasing_lindblads(5, 0.0) == []
    terms = dephasing_lindblads(3, 0.5)
    assert [t.sites for t in terms] == [(1,), (2,), (3,)]
    for t in terms:
        np.testing.assert_allclose(t.operator, np.sqrt(0.25) * SZ)
        assert np.array_equal(t.operator, t.operator.conj().T)
    with pytest.raises(NegativeRateError):
        dephasing_lindblads(3, -0.1)


def test_dephasing_dissipator_on_sigma_x():
    gamma = 0.7
    (t,) = dephasing_lindblads(1, gamma)
    out = (dissipator_superop(t.operator) @ SX.reshape(-1)).reshape(2, 2)
    np.testing.assert_allclose(out, -2 * gamma * SX, atol=1e-14)
    np.testing.assert_allclose(out, gamma * (SZ @ SX @ SZ - SX), atol=1e-14)


def test_current_operator():
    j = spin_current_op(1)
    assert np.trace(j) == 0
    assert np.array_equal(j, j.conj().T)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(j)), [-4, 0, 0, 4], atol=1e-13)
    with pytest.raises(IndexError):
        spin_current_op(3, 3)
    with pytest.raises(IndexError):
        spin_current_op(0, 3)


@pytest.mark.parametrize("family", ["heisenberg", "xx"])
def test_continuity_equation(family):
    n = 3
    H = full_hamiltonian(SpinChainModel(n, family, delta=1.5))
    z2 = sz_op(2, n)
    lhs = 1j * (H @ z2 - z2 @ H)
    rhs = spin_current_op(1, n) - spin_current_op(2, n)
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_pauli_product_table():
    mats = {c: PauliString(c).to_matrix() for c in PAULI_LABELS}
    for a, b in itertools.product(PAULI_LABELS, repeat=2):
        phase, c = pauli_product(a, b)
        assert phase in (1, -1, 1j, -1j)
        np.testing.assert_allclose(mats[a] @ mats[b], phase * mats[c], atol=1e-15)
    assert pauli_product("X", "Y") == (1j, "Z")
    assert pauli_product("Z", "X") == (1j, "Y")


def test_pauli_string_product():
    p, q = PauliString("XYZI"), PauliString("YYXZ")
    phase, r = p * q
    np.testing.assert_allclose(p.to_matrix() @ q.to_matrix(), phase * r.to_matrix(), atol=1e-14)
    assert PauliString.from_sites(4, {2: "Z", 4: "x"}).labels == "IZIX"
    with pytest.raises(ValueError):
        PauliString("IXQ")


def test_embed_ordering():
    # site 1 is the slowest index
    op = embed(SZ, 1, 2)
    np.testing.assert_allclose(np.diag(op).real, [1, 1, -1, -1])
    with pytest.raises(IndexError):
        embed(np.eye(4), 3, 3)


def test_model_validation():
    with pytest.raises(InvalidModelError):
        SpinChainModel(0)
    with pytest.raises(InvalidModelError):
        SpinChainModel(3, "ising")
    with pytest.raises(NegativeRateError):
        SpinChainModel(3, gamma=-1)
    with pytest.raises(InvalidModelError):
        SpinChainModel(3, baths=("middle",))
