"""Pauli strings on arbitrary qubit subsets and their product algebra.

A Pauli string is a tensor product of single-qubit X/Y/Z factors; qubits not
listed carry the identity, so the empty string IS the identity operator.
The product of two strings is again a string up to a phase in {1, -1, i, -i},
which :func:`mul` tracks exactly.
"""

from dataclasses import dataclass

LETTERS = ("X", "Y", "Z")

# Single-qubit products a*b -> (power of i, resulting letter; None = identity).
_PROD = {
    ("X", "X"): (0, None), ("Y", "Y"): (0, None), ("Z", "Z"): (0, None),
    ("X", "Y"): (1, "Z"), ("Y", "X"): (3, "Z"),
    ("Y", "Z"): (1, "X"), ("Z", "Y"): (3, "X"),
    ("Z", "X"): (1, "Y"), ("X", "Z"): (3, "Y"),
}

I_POWERS = (1 + 0j, 1j, -1 + 0j, -1j)

# Letter codes used for base-4 string enumeration: I=0, X=1, Y=2, Z=3.
_CODE_TO_LETTER = (None, "X", "Y", "Z")
_LETTER_TO_CODE = {"X": 1, "Y": 2, "Z": 3}


@dataclass(frozen=True)
class PauliString:
    """Pauli string as ``((qubit, letter), ...)`` with strictly increasing qubits.

    Identity factors are never stored; two strings are equal iff their
    supports are equal.
    """

    support: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        qubits = [q for q, _ in self.support]
        if any(q < 0 for q in qubits):
            raise ValueError(f"negative qubit index in {self.support!r}")
        if any(b <= a for a, b in zip(qubits, qubits[1:])):
            raise ValueError("qubit indices must be strictly increasing")
        for _, letter in self.support:
            if letter not in LETTERS:
                raise ValueError(f"invalid Pauli letter {letter!r}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.support)

    def is_identity(self) -> bool:
        return not self.support

    def y_count(self) -> int:
        return sum(1 for _, letter in self.support if letter == "Y")

    def __str__(self) -> str:
        if not self.support:
            return "I"
        return "*".join(f"{letter}{q}" for q, letter in self.support)


IDENTITY = PauliString()


def single(qubit: int, letter: str) -> PauliString:
    """One-letter string, e.g. ``single(3, "Z")`` -> Z3."""
    return PauliString(((qubit, letter),))


@dataclass(frozen=True)
class PauliTerm:
    """A Pauli string scaled by a complex coefficient."""

    coefficient: complex
    string: PauliString

    def __post_init__(self):
        c = complex(self.coefficient)
        if c != c or abs(c) == float("inf"):
            raise ValueError(f"non-finite coefficient {self.coefficient!r}")

    def __str__(self) -> str:
        return f"({self.coefficient:g})*{self.string}"


def mul(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    """Operator product ``p*q`` as ``(phase, r)`` with ``phase*r == p*q``.

    The phase is one of {1, -1, i, -i}; ``mul(p, p)`` is ``(1, identity)``.
    """
    out = []
    power = 0
    ia, ib = 0, 0
    sa, sb = p.support, q.support
    while ia < len(sa) or ib < len(sb):
        if ib >= len(sb) or (ia < len(sa) and sa[ia][0] < sb[ib][0]):
            out.append(sa[ia])
            ia += 1
        elif ia >= len(sa) or sb[ib][0] < sa[ia][0]:
            out.append(sb[ib])
            ib += 1
        else:
            qubit = sa[ia][0]
            dp, letter = _PROD[(sa[ia][1], sb[ib][1])]
            power += dp
            if letter is not None:
                out.append((qubit, letter))
            ia += 1
            ib += 1
    return I_POWERS[power % 4], PauliString(tuple(out))


def code_to_string(code: int, qubits: tuple[int, ...]) -> PauliString:
    """Decode a base-4 letter code over `qubits` (first qubit = most significant digit)."""
    d = len(qubits)
    support = []
    for k, qubit in enumerate(qubits):
        digit = (code >> (2 * (d - 1 - k))) & 3
        if digit:
            support.append((qubit, _CODE_TO_LETTER[digit]))
    return PauliString(tuple(support))


def string_code(p: PauliString, qubits: tuple[int, ...]) -> int:
    """Inverse of :func:`code_to_string`; raises if `p` is not supported inside `qubits`."""
    d = len(qubits)
    positions = {q: k for k, q in enumerate(qubits)}
    code = 0
    for qubit, letter in p.support:
        if qubit not in positions:
            raise ValueError(f"{p} is not supported inside {qubits}")
        code |= _LETTER_TO_CODE[letter] << (2 * (d - 1 - positions[qubit]))
    return code


def enumerate_basis(domain) -> list[PauliString]:
    """All ``4^|domain| - 1`` non-identity Pauli strings inside `domain`.

    Deterministic order: base-4 counting over the sorted qubits with digit
    values I<X<Y<Z and the first qubit as the most significant digit; the
    all-identity string (code 0) is skipped.
    """
    qubits = tuple(sorted(set(domain)))
    if not qubits:
        raise ValueError("domain must be nonempty")
    if any(q < 0 for q in qubits):
        raise ValueError("qubit indices must be >= 0")
    return [code_to_string(code, qubits) for code in range(1, 4 ** len(qubits))]
