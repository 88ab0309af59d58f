import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvqms.fock import FockBasisSpec, fock_state
from cvqms.sobolev import interpolate_omega, moment, sobolev_norm, stein_weiss_check, trace_norm


def rand_state(rng, d, support=None):
    s = support or d
    X = rng.normal(size=(s, s)) + 1j * rng.normal(size=(s, s))
    rho = np.zeros((d, d), complex)
    rho[:s, :s] = X @ X.conj().T
    return rho / np.trace(rho).real


def test_fock_state_norms():
    b = FockBasisSpec(10)
    x = fock_state(3, b).matrix
    assert sobolev_norm(x, 2, b) == pytest.approx(4.0)
    assert sobolev_norm(x, 0, b) == pytest.approx(1.0)
    assert moment(x, 4, b) == pytest.approx(16.0)


def test_trace_norm_of_hermitian():
    x = np.diag([1.0, -2.0, 0.5])
    assert trace_norm(x) == pytest.approx(3.5)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0, 6))
def test_norm_monotone_in_k(seed, k):
    rng = np.random.default_rng(seed)
    b = FockBasisSpec(12)
    rho = rand_state(rng, 12)
    assert sobolev_norm(rho, k, b) <= sobolev_norm(rho, k + 1, b) * (1 + 1e-12)
    # on states the norm is the moment
    assert sobolev_norm(rho, k, b) == pytest.approx(moment(rho, k, b), rel=1e-9)


def test_multimode_order():
    b = FockBasisSpec((4, 4))
    x = fock_state((1, 2), b).matrix
    assert sobolev_norm(x, (2, 2), b) == pytest.approx(2 * 3)
    assert sobolev_norm(x, 2, b) == sobolev_norm(x, (2, 2), b)


def test_interpolate_omega():
    grid = [(0.0, 0.0), (4.0, 8.0)]
    assert interpolate_omega(2.0, grid) == pytest.approx(4.0)


def test_stein_weiss_identity_map():
    b = FockBasisSpec(10)
    rng = np.random.default_rng(1)
    xs = [rand_state(rng, 10) for _ in range(5)]
    rep = stein_weiss_check(lambda x: x, 0, 4, 0.5, xs, b)
    assert rep.estimated
    assert rep.M0 == pytest.approx(1) and rep.M1 == pytest.approx(1)
    assert rep.passed()


def test_stein_weiss_bad_theta():
    with pytest.raises(ValueError):
        stein_weiss_check(lambda x: x, 0, 4, 1.5, [], FockBasisSpec(3))
