"""Pauli-word algebra and dense realization of qubit operators.

Words are strings over ``IXYZ``; character ``q`` acts on qubit ``q`` and qubit 0
is the most significant bit of a computational-basis index (``kron`` order).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

PAULI_LETTERS = "IXYZ"
DROP_TOL = 1e-12
MAX_DENSE_QUBITS = 12

# single-qubit products: (a, b) -> (phase, a*b)
_PRODUCTS = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


class OperatorError(ValueError):
    """Raised for malformed words, width mismatches and oversize registers."""


def _check_word(text: str) -> str:
    if not isinstance(text, str) or not text:
        raise OperatorError("Pauli word must be a non-empty string")
    bad = set(text) - set(PAULI_LETTERS)
    if bad:
        raise OperatorError(f"invalid Pauli letter(s) {sorted(bad)} in {text!r}")
    return text


@dataclass(frozen=True)
class PauliTerm:
    """A single Pauli word with a complex coefficient."""

    word: str
    coeff: complex = 1.0

    def __post_init__(self):
        _check_word(self.word)
        c = complex(self.coeff)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise OperatorError("coefficient must be finite")
        object.__setattr__(self, "coeff", c)

    @property
    def n_qubits(self) -> int:
        return len(self.word)

    @property
    def is_identity(self) -> bool:
        return set(self.word) == {"I"}

    def __mul__(self, other):
        if isinstance(other, PauliTerm):
            return multiply(self, other)
        return PauliTerm(self.word, self.coeff * complex(other))

    __rmul__ = __mul__

    def to_operator(self) -> "QubitOperator":
        return QubitOperator(self.n_qubits, {self.word: self.coeff})

    def to_matrix(self) -> np.ndarray:
        return self.to_operator().to_matrix()


def parse_pauli(text: str, coeff: complex = 1.0) -> PauliTerm:
    """Build a :class:`PauliTerm` from a word such as ``"XZ"``."""
    return PauliTerm(_check_word(text.strip().upper() if isinstance(text, str) else text), coeff)


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Product ``a @ b`` of two Pauli terms, accumulating the phase."""
    if a.n_qubits != b.n_qubits:
        raise OperatorError(f"width mismatch: {a.n_qubits} vs {b.n_qubits}")
    phase = 1 + 0j
    letters = []
    for p, q in zip(a.word, b.word):
        ph, r = _PRODUCTS[(p, q)]
        phase *= ph
        letters.append(r)
    return PauliTerm("".join(letters), phase * a.coeff * b.coeff)


def _masks(word: str) -> tuple[int, int, int]:
    """Bit masks (flip, phase, n_y) of a word for basis-state action."""
    n = len(word)
    flip = phase = 0
    n_y = 0
    for q, p in enumerate(word):
        bit = 1 << (n - 1 - q)
        if p in "XY":
            flip |= bit
        if p in "YZ":
            phase |= bit
        if p == "Y":
            n_y += 1
    return flip, phase, n_y


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x >>= 1
    return out


def _word_action(word: str):
    """Return (rows, values) with ``P |x> = values[x] |rows[x]>``."""
    n = len(word)
    flip, zmask, n_y = _masks(word)
    x = np.arange(1 << n, dtype=np.int64)
    sign = 1 - 2 * _parity(x & zmask)
    return x ^ flip, (1j ** n_y) * sign


class QubitOperator:
    """Immutable weighted sum of Pauli words on ``n_qubits`` qubits.

    Terms are kept in lexicographic word order; coefficients whose real or
    imaginary part falls below ``DROP_TOL`` have that part zeroed, and
    vanishing terms are removed.
    """

    __slots__ = ("_n", "_terms")

    def __init__(self, n_qubits: int, terms: Mapping[str, complex] | Iterable[PauliTerm] = ()):
        if int(n_qubits) < 1:
            raise OperatorError("n_qubits must be >= 1")
        self._n = int(n_qubits)
        acc: dict[str, complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else ((t.word, t.coeff) for t in terms)
        for word, c in items:
            _check_word(word)
            if len(word) != self._n:
                raise OperatorError(f"word {word!r} does not have width {self._n}")
            acc[word] = acc.get(word, 0j) + complex(c)
        clean = {}
        for word in sorted(acc):
            c = acc[word]
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise OperatorError("coefficient must be finite")
            re = c.real if abs(c.real) >= DROP_TOL else 0.0
            im = c.imag if abs(c.imag) >= DROP_TOL else 0.0
            if re or im:
                clean[word] = complex(re, im)
        self._terms = clean

    # construction helpers
    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "QubitOperator":
        return cls(n_qubits, {"I" * n_qubits: coeff})

    @classmethod
    def zero(cls, n_qubits: int) -> "QubitOperator":
        return cls(n_qubits)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "QubitOperator":
        """Pauli expansion ``c_P = Tr(P M) / 2^n`` of a dense matrix."""
        m = np.asarray(matrix, dtype=complex)
        dim = m.shape[0]
        n = int(round(math.log2(dim)))
        if m.shape != (dim, dim) or (1 << n) != dim:
            raise OperatorError("matrix must be square with power-of-two dimension")
        if n > MAX_DENSE_QUBITS:
            raise OperatorError(f"{n} qubits exceeds dense limit {MAX_DENSE_QUBITS}")
        terms = {}
        x = np.arange(dim)
        for letters in _all_words(n):
            rows, vals = _word_action(letters)
            # Tr(P M) = sum_y phase(y) M[y, P(y)] with P|y> = phase(y)|P(y)>
            terms[letters] = np.sum(vals * m[x, rows]) / dim
        return cls(n, terms)

    # accessors
    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def terms(self) -> dict[str, complex]:
        return dict(self._terms)

    @property
    def is_hermitian(self) -> bool:
        return all(c.imag == 0.0 for c in self._terms.values())

    def __iter__(self) -> Iterator[PauliTerm]:
        return (PauliTerm(w, c) for w, c in self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def coefficient(self, word: str) -> complex:
        return self._terms.get(word, 0j)

    def __repr__(self) -> str:
        if not self._terms:
            return f"QubitOperator({self._n}, 0)"
        body = " + ".join(f"{c:.6g} {w}" for w, c in self._terms.items())
        return f"QubitOperator({self._n}, {body})"

    # algebra
    def _coerce(self, other) -> "QubitOperator":
        if isinstance(other, QubitOperator):
            if other.n_qubits != self._n:
                raise OperatorError(f"width mismatch: {self._n} vs {other.n_qubits}")
            return other
        if isinstance(other, PauliTerm):
            return self._coerce(other.to_operator())
        return QubitOperator.identity(self._n, complex(other))

    def __add__(self, other) -> "QubitOperator":
        other = self._coerce(other)
        acc = dict(self._terms)
        for w, c in other._terms.items():
            acc[w] = acc.get(w, 0j) + c
        return QubitOperator(self._n, acc)

    __radd__ = __add__

    def __neg__(self) -> "QubitOperator":
        return QubitOperator(self._n, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other) -> "QubitOperator":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "QubitOperator":
        return self._coerce(other) - self

    def __mul__(self, other) -> "QubitOperator":
        if isinstance(other, (QubitOperator, PauliTerm)):
            other = self._coerce(other)
            acc: dict[str, complex] = {}
            for wa, ca in self._terms.items():
                for wb, cb in other._terms.items():
                    t = multiply(PauliTerm(wa, ca), PauliTerm(wb, cb))
                    acc[t.word] = acc.get(t.word, 0j) + t.coeff
            return QubitOperator(self._n, acc)
        s = complex(other)
        return QubitOperator(self._n, {w: c * s for w, c in self._terms.items()})

    def __rmul__(self, other) -> "QubitOperator":
        if isinstance(other, PauliTerm):
            return other.to_operator() * self
        return self * other

    def __truediv__(self, other) -> "QubitOperator":
        return self * (1.0 / complex(other))

    def adjoint(self) -> "QubitOperator":
        return QubitOperator(self._n, {w: c.conjugate() for w, c in self._terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, QubitOperator):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self):
        return hash((self._n, tuple(self._terms.items())))

    def allclose(self, other: "QubitOperator", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff._terms.values())

    def norm1(self) -> float:
        """Sum of absolute coefficients (upper bound on the spectral norm)."""
        return float(sum(abs(c) for c in self._terms.values()))

    # dense realization
    def _check_dense(self):
        if self._n > MAX_DENSE_QUBITS:
            raise OperatorError(f"{self._n} qubits exceeds dense limit {MAX_DENSE_QUBITS}")

    def to_matrix(self) -> np.ndarray:
        self._check_dense()
        dim = 1 << self._n
        out = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim)
        for w, c in self._terms.items():
            rows, vals = _word_action(w)
            out[rows, cols] += c * vals
        return out

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Action on a state vector (or on the columns of a matrix)."""
        self._check_dense()
        v = np.asarray(vec, dtype=complex)
        out = np.zeros_like(v)
        for w, c in self._terms.items():
            rows, vals = _word_action(w)
            if v.ndim == 1:
                out[rows] += c * vals * v
            else:
                out[rows] += (c * vals)[:, None] * v
        return out

    # serialization
    def to_dict(self) -> dict:
        return {
            "n_qubits": self._n,
            "terms": [{"pauli": w, "re": c.real, "im": c.imag} for w, c in self._terms.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "QubitOperator":
        try:
            n = int(data["n_qubits"])
            terms = {}
            for t in data["terms"]:
                w = t["pauli"]
                terms[w] = terms.get(w, 0j) + complex(float(t["re"]), float(t.get("im", 0.0)))
        except (KeyError, TypeError) as exc:
            raise OperatorError(f"malformed operator JSON: {exc}") from exc
        return cls(n, terms)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "QubitOperator":
        return cls.from_dict(json.loads(text))


def _all_words(n: int) -> Iterator[str]:
    if n == 0:
        yield ""
        return
    for head in PAULI_LETTERS:
        for tail in _all_words(n - 1):
            yield head + tail


def all_pauli_words(n_qubits: int) -> list[str]:
    """All ``4**n`` Pauli words on ``n_qubits`` in lexicographic order."""
    return list(_all_words(n_qubits))


@dataclass(frozen=True)
class Decomposition:
    """Operator split into individually implementable pieces.

    ``parts[i] * weights[i]`` summed over ``i`` reproduces ``source``.
    """

    source: QubitOperator
    parts: tuple
    weights: tuple
    kind: str

    def __len__(self) -> int:
        return len(self.parts)

    def reconstruct(self) -> QubitOperator:
        total = QubitOperator.zero(self.source.n_qubits)
        for part, w in zip(self.parts, self.weights):
            piece = part.to_operator() if isinstance(part, PauliTerm) else part
            total = total + piece * w
        return total


def decompose_hermitian(op: QubitOperator) -> Decomposition:
    """Split a Hermitian operator into single real-weighted Pauli observables."""
    if not op.is_hermitian:
        raise OperatorError("decompose_hermitian requires a Hermitian operator")
    parts = tuple(QubitOperator(op.n_qubits, {w: c.real}) for w, c in op.terms.items())
    return Decomposition(op, parts, (1.0,) * len(parts), "hermitian")


def decompose_unitary(op: QubitOperator) -> Decomposition:
    """Split an operator into unit-coefficient Pauli words with scalar weights."""
    items = op.terms.items()
    parts = tuple(PauliTerm(w, 1.0) for w, _ in items)
    weights = tuple(c for _, c in items)
    return Decomposition(op, parts, weights, "unitary")


def pauli_sum(n_qubits: int, words: Sequence[str], coeffs: Sequence[complex] | None = None) -> QubitOperator:
    coeffs = [1.0] * len(words) if coeffs is None else coeffs
    return QubitOperator(n_qubits, [PauliTerm(w, c) for w, c in zip(words, coeffs)])
