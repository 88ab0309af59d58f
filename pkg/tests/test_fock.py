import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvqms.ccr import OperatorPolynomial as P
from cvqms.fock import (FockBasisSpec, TruncationError, cat_code_basis, coherent_vector, edge_population,
                        export_coo, fock_state, geometric_state, import_coo, realize, weight_diagonal)


def test_annihilation_matrix():
    m = realize(P.annihilation(), FockBasisSpec(4)).dense()
    np.testing.assert_allclose(np.diag(m, 1), np.sqrt([1, 2, 3]))
    assert np.count_nonzero(m) == 3


def test_number_is_diagonal():
    m = realize(P.number(), FockBasisSpec(6)).dense()
    np.testing.assert_allclose(m, np.diag(np.arange(6)))


def test_two_mode_index_and_kron():
    b = FockBasisSpec((3, 4))
    assert b.dim == 12
    assert b.index(1, 2) == 6
    m = realize(P.number(1, 2), b).dense()
    np.testing.assert_allclose(np.diag(m), np.tile(np.arange(4), 3))


def test_interior_and_edge_partition():
    b = FockBasisSpec((6, 5))
    inter, edge = set(b.interior(2)), set(b.edge(2))
    assert not inter & edge
    assert len(inter) + len(edge) == b.dim
    assert len(inter) == 4 * 3


@given(st.floats(0.1, 2.5), st.floats(0, 2 * math.pi))
def test_coherent_overlap_and_eigen(r, phi):
    alpha = r * np.exp(1j * phi)
    b = FockBasisSpec(50)
    psi, leak, _ = coherent_vector(alpha, b)
    assert leak < 1e-10
    assert abs(abs(psi[0]) ** 2 - math.exp(-r * r)) < 1e-9
    A = realize(P.annihilation(), b).dense()
    np.testing.assert_allclose((A @ psi)[:40], (alpha * psi)[:40], atol=1e-8)


def test_coherent_leak_raises():
    with pytest.raises(TruncationError):
        coherent_vector(5.0, FockBasisSpec(10))


def test_cat_code_gram():
    code = cat_code_basis(2.0, 2, FockBasisSpec(60))
    assert len(code.matrices) == 4
    assert abs(abs(code.gram[0, 1]) - math.exp(-8)) < 1e-12
    for x in code.matrices:
        assert abs(np.linalg.norm(x) - 1) < 1e-12


def test_weights():
    b = FockBasisSpec(5)
    np.testing.assert_allclose(weight_diagonal(4, b), np.arange(1, 6))
    np.testing.assert_allclose(weight_diagonal(2, b, power=0.5), np.arange(1, 6))


def test_geometric_and_edge_population():
    b = FockBasisSpec(30, edge_band=2)
    rho = geometric_state(0.5, b).matrix
    assert abs(np.trace(rho) - 1) < 1e-14
    assert abs(edge_population(rho, b) - (0.5 ** 28 + 0.5 ** 29) / (2 - 0.5 ** 29)) < 1e-15
    assert edge_population(fock_state(0, b).matrix, b) == 0


def test_coo_roundtrip():
    b = FockBasisSpec(8)
    op = realize(P.annihilation() * (1 + 2j) + P.creation() ** 2, b)
    back = import_coo(export_coo(op, b))
    np.testing.assert_allclose(back.dense(), op.dense())
