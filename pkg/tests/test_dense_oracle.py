import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lindblad_ness import dense_oracle as do
from lindblad_ness.operators import PauliString, SpinChainModel, spin_current_op, sz_op


def _ness(model):
    return do.steady_state(do.build_liouvillian(model))


MODELS = [
    SpinChainModel(2, "xx", mu=0.1, gamma=0.5),
    SpinChainModel(3, "heisenberg", delta=1.5, mu=0.2),
    SpinChainModel(4, "xx", mu=-0.3, gamma=1.0),
    SpinChainModel(4, "heisenberg", delta=0.5, mu=0.05, gamma=0.2),
]


@pytest.mark.parametrize("model", MODELS)
def test_trace_preservation(model):
    L = do.build_liouvillian(model)
    left = np.eye(L.dim).reshape(-1) @ L.data
    assert np.abs(left).max() < 1e-13


def test_n1_dephasing_spectrum():
    L = do.build_liouvillian(SpinChainModel(1, baths=(), gamma=0.3))
    ev = np.sort(do.spectrum(L).real)
    np.testing.assert_allclose(ev, [-0.6, -0.6, 0, 0], atol=1e-14)
    gap, null = do.spectral_gap(L)
    assert gap == pytest.approx(0.6, abs=1e-12)
    assert null == 2


@pytest.mark.parametrize("mu", [0.0, 0.1, -0.7, 1.0])
def test_n1_left_bath_spectrum(mu):
    L = do.build_liouvillian(SpinChainModel(1, baths=("left",), mu=mu))
    ev = np.sort(do.spectrum(L).real)
    np.testing.assert_allclose(ev, [-4, -2, -2, 0], atol=1e-12)
    gap, null = do.spectral_gap(L)
    assert gap == pytest.approx(2.0, abs=1e-10)
    assert null == 1


def test_n1_left_bath_steady_state():
    rho = _ness(SpinChainModel(1, baths=("left",), mu=0.1)).rho
    np.testing.assert_allclose(rho, np.diag([0.45, 0.55]), atol=1e-14)
    assert do.expect(do.DenseState(rho), sz_op(1, 1)) == pytest.approx(-0.1, abs=1e-14)


@pytest.mark.parametrize(
    "model",
    [
        SpinChainModel(3, "xx", mu=0.0, gamma=1.0),
        SpinChainModel(4, "heisenberg", delta=1.5, mu=0.0),
        SpinChainModel(2, "heisenberg", delta=0.3, mu=0.0, gamma=0.4),
    ],
)
def test_equilibrium_is_identity(model):
    rho = _ness(model).rho
    dim = rho.shape[0]
    np.testing.assert_allclose(rho, np.eye(dim) / dim, atol=1e-13)


def test_degenerate_null_space_reported():
    model = SpinChainModel(2, "xx", mu=0.0, gamma=0.5, baths=())
    with pytest.raises(do.NonUniqueNessError) as err:
        _ness(model)
    assert err.value.null_dim > 1


def test_gap_positive_with_baths():
    gap, null = do.spectral_gap(do.build_liouvillian(SpinChainModel(2, "xx", mu=0.0, gamma=0.5)))
    assert gap > 0 and null == 1


def test_n_max_enforced():
    with pytest.raises(do.ResourceError):
        do.build_liouvillian(SpinChainModel(7, "xx"))


def test_xx_dephasing_ness_n3():
    # bath balance at the ends: z_1 = -mu - <j>/4, z_n = mu + <j>/4
    st = _ness(SpinChainModel(3, "xx", mu=0.02, gamma=1.0))
    z = do.magnetizations(st)
    j = do.currents(st)
    np.testing.assert_allclose(j, [-0.02, -0.02], atol=1e-15)
    np.testing.assert_allclose(z, [-0.015, 0.0, 0.015], atol=1e-15)
    assert do.pauli_coefficient(st, "ZIZ") - z[0] * z[2] == pytest.approx(-8.333333333333333e-06, rel=1e-9)


@pytest.mark.parametrize("model", MODELS + [SpinChainModel(5, "heisenberg", delta=1.5, mu=0.1)])
def test_boundary_balance(model):
    st = _ness(model)
    z, j = do.magnetizations(st), do.currents(st)
    assert z[0] == pytest.approx(-model.mu - j[0] / 4, abs=1e-12)
    assert z[-1] == pytest.approx(model.mu + j[-1] / 4, abs=1e-12)


def test_expect_identity_and_dims():
    st = _ness(MODELS[1])
    assert do.expect(st, np.eye(8)) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        do.expect(st, np.eye(4))
    with pytest.raises(ValueError):
        do.pauli_coefficient(st, "ZZ")


@pytest.mark.parametrize("model", MODELS)
def test_ness_invariants(model):
    L = do.build_liouvillian(model)
    st = do.steady_state(L)
    assert np.abs(L.data @ st.vec()).max() < 1e-12
    assert np.array_equal(st.rho, st.rho.conj().T)
    assert np.trace(st.rho).real == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.eigvalsh(st.rho).min() >= -1e-10
    assert do.spectrum(L).real.max() <= 1e-10
    j = do.currents(st)
    assert np.max(np.abs(j - j[0])) <= 1e-9
    n = model.n
    j_full = [do.expect(st, spin_current_op(k, n)) for k in range(1, n)]
    np.testing.assert_allclose(j, j_full, atol=1e-14)


def test_pauli_coefficients_match_single():
    st = _ness(MODELS[2])
    c = do.pauli_coefficients(st)
    for s in ["IIII", "ZIIZ", "XYII", "IYXZ", "ZZZZ"]:
        p = PauliString(s)
        assert c[p.indices] == pytest.approx(do.pauli_coefficient(st, p), abs=1e-14)
    assert c[0, 0, 0, 0] == pytest.approx(1.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0.01, 0.5))
def test_hermiticity_preserved(seed, t):
    rng = np.random.default_rng(seed)
    L = do.build_liouvillian(SpinChainModel(2, "heisenberg", delta=1.5, mu=0.3, gamma=0.2))
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = do.DenseState(a + a.conj().T)
    out = do.propagate(L, rho, t).rho
    assert np.abs(out - out.conj().T).max() < 1e-12


def test_connected_zz_helper():
    st = _ness(SpinChainModel(4, "xx", mu=0.1, gamma=0.5))
    C = do.connected_zz(st)
    z = do.magnetizations(st)
    assert C[0, 2] == pytest.approx(do.pauli_coefficient(st, "ZIZI") - z[0] * z[2], abs=1e-15)
    assert np.array_equal(C, C.T)
