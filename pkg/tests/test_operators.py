import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qderiv.operators import (
    MAX_DENSE_QUBITS,
    OperatorError,
    PauliTerm,
    QubitOperator,
    all_pauli_words,
    decompose_hermitian,
    decompose_unitary,
    multiply,
    parse_pauli,
    pauli_sum,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])
I2 = np.eye(2, dtype=complex)
DENSE = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_word(word):
    out = np.array([[1.0 + 0j]])
    for p in word:
        out = np.kron(out, DENSE[p])
    return out


words = st.integers(1, 3).flatmap(lambda n: st.lists(st.sampled_from("IXYZ"), min_size=n, max_size=n).map("".join))
coeffs = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)


@st.composite
def operators(draw, n=None):
    n = draw(st.integers(1, 3)) if n is None else n
    ws = draw(st.lists(st.lists(st.sampled_from("IXYZ"), min_size=n, max_size=n).map("".join), max_size=6))
    cs = draw(st.lists(coeffs, min_size=len(ws), max_size=len(ws)))
    return QubitOperator(n, dict(zip(ws, cs)))


def test_pauli_products_match_matrices():
    for a in "IXYZ":
        for b in "IXYZ":
            prod = multiply(PauliTerm(a), PauliTerm(b))
            assert np.allclose(prod.coeff * DENSE[prod.word], DENSE[a] @ DENSE[b])


def test_xy_is_iz():
    assert multiply(PauliTerm("X"), PauliTerm("Y")) == PauliTerm("Z", 1j)


def test_qubit_zero_is_most_significant():
    op = QubitOperator(2, {"XI": 1.0})
    assert np.allclose(op.to_matrix(), np.kron(X, I2))
    v = np.zeros(4)
    v[0] = 1.0
    assert np.allclose(op.apply(v), np.eye(4)[2])


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_dense_matrix_matches_kron(data):
    op = data.draw(operators())
    expect = sum((c * kron_word(w) for w, c in op.terms.items()), np.zeros((2**op.n_qubits,) * 2))
    assert np.allclose(op.to_matrix(), expect)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_product_is_matrix_product(data):
    n = data.draw(st.integers(1, 3))
    a, b = data.draw(operators(n)), data.draw(operators(n))
    assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_apply_matches_dense(data):
    op = data.draw(operators())
    rng = np.random.default_rng(data.draw(st.integers(0, 1000)))
    v = rng.normal(size=2**op.n_qubits) + 1j * rng.normal(size=2**op.n_qubits)
    assert np.allclose(op.apply(v), op.to_matrix() @ v)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_from_matrix_round_trip(data):
    op = data.draw(operators())
    assert QubitOperator.from_matrix(op.to_matrix()).allclose(op, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_json_round_trip(data):
    op = data.draw(operators())
    back = QubitOperator.from_json(op.to_json())
    assert back == op
    assert json.loads(op.to_json())["n_qubits"] == op.n_qubits


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_adjoint_and_hermitian_part(data):
    op = data.draw(operators())
    assert np.allclose(op.adjoint().to_matrix(), op.to_matrix().conj().T)
    herm = 0.5 * (op + op.adjoint())
    assert herm.is_hermitian


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_decompositions_reconstruct(data):
    op = data.draw(operators())
    assert decompose_unitary(op).reconstruct().allclose(op)
    herm = 0.5 * (op + op.adjoint())
    dec = decompose_hermitian(herm)
    assert dec.reconstruct().allclose(herm)
    assert all(len(p) == 1 for p in dec.parts)


def test_unitary_parts_are_unitary():
    op = QubitOperator(2, {"XY": 0.3, "ZI": -1.2j})
    for part in decompose_unitary(op).parts:
        m = part.to_matrix()
        assert np.allclose(m @ m.conj().T, np.eye(4))


def test_commutation_relations():
    x, y, z = (QubitOperator(1, {p: 1.0}) for p in "XYZ")
    assert (x * y - y * x).allclose(2j * z)
    assert (x * y + y * x).allclose(QubitOperator.zero(1))


def test_small_coefficients_dropped():
    op = QubitOperator(1, {"X": 1e-13, "Z": 1.0})
    assert op.terms == {"Z": 1.0}


def test_identity_and_zero():
    assert np.allclose(QubitOperator.identity(2).to_matrix(), np.eye(4))
    assert len(QubitOperator.zero(3)) == 0
    assert QubitOperator.zero(2).norm1() == 0.0


def test_norm1_bounds_spectral_norm():
    op = pauli_sum(2, ["XX", "ZI", "YZ"], [0.5, -1.0, 0.25])
    assert op.norm1() == pytest.approx(1.75)
    assert np.max(np.abs(np.linalg.eigvalsh(op.to_matrix()))) <= op.norm1() + 1e-12


def test_all_words_count_and_order():
    ws = all_pauli_words(2)
    assert len(ws) == 16 and ws[0] == "II" and ws == sorted(ws, key=lambda w: ["IXYZ".index(c) for c in w])


@pytest.mark.parametrize("bad", ["", "XA", "xq"])
def test_bad_words_rejected(bad):
    with pytest.raises(OperatorError):
        QubitOperator(max(len(bad), 1), {bad: 1.0})


def test_parse_pauli_normalizes_case():
    assert parse_pauli(" xz ").word == "XZ"


def test_width_mismatch():
    with pytest.raises(OperatorError):
        QubitOperator(2, {"X": 1.0})
    with pytest.raises(OperatorError):
        QubitOperator(1, {"X": 1.0}) * QubitOperator(2, {"XX": 1.0})


def test_non_finite_coefficient_rejected():
    with pytest.raises(OperatorError):
        QubitOperator(1, {"X": np.nan})


def test_decompose_hermitian_rejects_non_hermitian():
    with pytest.raises(OperatorError):
        decompose_hermitian(QubitOperator(1, {"X": 1j}))


def test_dense_limit():
    op = QubitOperator(MAX_DENSE_QUBITS + 1, {"Z" * (MAX_DENSE_QUBITS + 1): 1.0})
    with pytest.raises(OperatorError):
        op.to_matrix()
