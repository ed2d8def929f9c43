"""Dense pure-state simulator sized for the comparison protocol.

Qubits are numbered from 1.  Qubit 1 is the most significant bit of the
basis index, so the ket ``|q1 q2 ... qn>`` sits at index ``int("q1q2...qn", 2)``
and printed kets can be read straight off the amplitude vector.

All sampling takes an explicit :class:`numpy.random.Generator`; nothing here
touches global random state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_QUBITS = 16
NORM_TOL = 1e-9
UNITARY_TOL = 1e-9
# Outcome branches lighter than this are never sampled.
BRANCH_FLOOR = 1e-12

_SQRT1_2 = 1.0 / math.sqrt(2.0)


class QuantumError(ValueError):
    """Invalid quantum operation (bad index, non-unitary matrix, budget)."""


class Basis(str, enum.Enum):
    Z = "z"
    X = "x"


class StateKind(str, enum.Enum):
    EIGHT_QUBIT = "eight_qubit"
    DECOY_ZERO = "decoy_zero"
    DECOY_ONE = "decoy_one"
    DECOY_PLUS = "decoy_plus"
    DECOY_MINUS = "decoy_minus"

    @property
    def basis(self) -> Basis | None:
        if self in (StateKind.DECOY_ZERO, StateKind.DECOY_ONE):
            return Basis.Z
        if self in (StateKind.DECOY_PLUS, StateKind.DECOY_MINUS):
            return Basis.X
        return None

    @property
    def bit(self) -> int | None:
        """Outcome index of a decoy when measured in its own basis."""
        if self in (StateKind.DECOY_ZERO, StateKind.DECOY_PLUS):
            return 0
        if self in (StateKind.DECOY_ONE, StateKind.DECOY_MINUS):
            return 1
        return None


DECOY_KINDS = (
    StateKind.DECOY_ZERO,
    StateKind.DECOY_ONE,
    StateKind.DECOY_PLUS,
    StateKind.DECOY_MINUS,
)


class BellLabel(str, enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"


BELL_LABELS = tuple(BellLabel)

# Rows are |phi+>, |phi->, |psi+>, |psi-> over the two-qubit basis 00,01,10,11.
BELL_VECTORS = np.array(
    [
        [_SQRT1_2, 0, 0, _SQRT1_2],
        [_SQRT1_2, 0, 0, -_SQRT1_2],
        [0, _SQRT1_2, _SQRT1_2, 0],
        [0, _SQRT1_2, -_SQRT1_2, 0],
    ],
    dtype=complex,
)

BASIS_VECTORS = {
    Basis.Z: np.eye(2, dtype=complex),
    Basis.X: np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=complex),
}

I2 = np.eye(2, dtype=complex)
X_GATE = np.array([[0, 1], [1, 0]], dtype=complex)
H_GATE = BASIS_VECTORS[Basis.X].copy()
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


class PureState:
    """Normalized state vector over ``num_qubits`` qubits.

    Instances are treated as immutable: every operation returns a new state.
    """

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, amplitudes: Sequence[complex] | np.ndarray):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(math.log2(amps.size))) if amps.size else 0
        if amps.size != 1 << n or not 1 <= n <= MAX_QUBITS:
            raise QuantumError(
                f"amplitude vector of length {amps.size} is not 2^n with 1 <= n <= {MAX_QUBITS}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise QuantumError(f"state is not normalized (squared norm {norm!r})")
        self.num_qubits = n
        self.amplitudes = amps

    @classmethod
    def _trusted(cls, amps: np.ndarray, n: int) -> "PureState":
        # Internal constructor for results of norm-preserving operations.
        obj = cls.__new__(cls)
        obj.num_qubits = n
        obj.amplitudes = amps
        return obj

    @classmethod
    def basis_state(cls, bits: str) -> "PureState":
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls._trusted(amps, len(bits))

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, bits: str) -> complex:
        if len(bits) != self.num_qubits:
            raise QuantumError(f"expected {self.num_qubits} bits, got {bits!r}")
        return complex(self.amplitudes[int(bits, 2)])

    def support(self, tol: float = 1e-12) -> list[str]:
        """Basis strings carrying non-negligible amplitude, in index order."""
        idx = np.flatnonzero(np.abs(self.amplitudes) > tol)
        return [format(int(i), f"0{self.num_qubits}b") for i in idx]

    def __repr__(self) -> str:
        return f"PureState(num_qubits={self.num_qubits})"


def _fixed_states() -> dict[StateKind, PureState]:
    eight = np.zeros(256, dtype=complex)
    for half in range(16):
        eight[(half << 4) | half] = 0.25
    vectors = {
        StateKind.EIGHT_QUBIT: eight,
        StateKind.DECOY_ZERO: np.array([1, 0], dtype=complex),
        StateKind.DECOY_ONE: np.array([0, 1], dtype=complex),
        StateKind.DECOY_PLUS: np.array([_SQRT1_2, _SQRT1_2], dtype=complex),
        StateKind.DECOY_MINUS: np.array([_SQRT1_2, -_SQRT1_2], dtype=complex),
    }
    out = {}
    for kind, amps in vectors.items():
        amps.setflags(write=False)
        out[kind] = PureState._trusted(amps, int(math.log2(amps.size)))
    return out


def make_state(kind: StateKind) -> PureState:
    """Build one of the protocol's fixed input states.

    The eight-qubit carrier is the uniform superposition of the 16 kets
    whose first four bits repeat as the last four.
    """
    return _FIXED[StateKind(kind)]


_FIXED = _fixed_states()


def _check_qubits(state: PureState, qubits: Sequence[int]) -> None:
    for q in qubits:
        if not 1 <= q <= state.num_qubits:
            raise QuantumError(f"qubit {q} out of range 1..{state.num_qubits}")
    if len(set(qubits)) != len(qubits):
        raise QuantumError(f"repeated qubit index in {list(qubits)}")


def _perm(n: int, qubits: Sequence[int]) -> tuple[list[int], list[int]]:
    front = [q - 1 for q in qubits]
    chosen = set(front)
    perm = front + [a for a in range(n) if a not in chosen]
    inverse = [0] * n
    for pos, axis in enumerate(perm):
        inverse[axis] = pos
    return perm, inverse


def _to_front(amps: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    """View the state as a (2^k, rest) matrix with ``qubits`` as row index."""
    if len(qubits) == 1:
        q = qubits[0]
        return amps.reshape(1 << (q - 1), 2, 1 << (n - q)).transpose(1, 0, 2).reshape(2, -1)
    perm, _ = _perm(n, qubits)
    return amps.reshape((2,) * n).transpose(perm).reshape(1 << len(qubits), -1)


def _from_front(mat: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    if len(qubits) == 1:
        q = qubits[0]
        return mat.reshape(2, 1 << (q - 1), 1 << (n - q)).transpose(1, 0, 2).reshape(-1)
    _, inverse = _perm(n, qubits)
    return mat.reshape((2,) * n).transpose(inverse).reshape(-1)


def _sample(probs: Sequence[float], rng: np.random.Generator) -> int:
    live = [p if p >= BRANCH_FLOOR else 0.0 for p in probs]
    r = rng.random() * sum(live)
    acc = 0.0
    last = 0
    for j, p in enumerate(live):
        if p == 0.0:
            continue
        acc += p
        last = j
        if r < acc:
            return j
    # r landed on the upper edge through rounding.
    return last


def _project(
    state: PureState,
    qubits: Sequence[int],
    vectors: np.ndarray | None,
    rng: np.random.Generator,
) -> tuple[int, PureState]:
    """Measure ``qubits`` in the orthonormal basis given by the rows of ``vectors``.

    ``vectors=None`` means the computational basis.
    """
    n = state.num_qubits
    mat = _to_front(state.amplitudes, n, qubits)
    coeffs = mat if vectors is None else vectors.conj() @ mat
    probs = [float(np.vdot(row, row).real) for row in coeffs]
    j = _sample(probs, rng)
    scaled = coeffs[j] / math.sqrt(probs[j])
    if vectors is None:
        branch = np.zeros_like(mat)
        branch[j] = scaled
    else:
        branch = np.outer(vectors[j], scaled)
    return j, PureState._trusted(_from_front(branch, n, qubits), n)


def measure(
    state: PureState, qubit: int, basis: Basis | str, rng: np.random.Generator
) -> tuple[int, PureState]:
    """Single-qubit projective measurement with collapse.

    Returns the outcome bit (0 for ``|0>``/``|+>``, 1 for ``|1>``/``|->``)
    and the renormalized post-measurement state.  Exactly one uniform draw
    is taken from ``rng``.
    """
    _check_qubits(state, [qubit])
    vectors = None if Basis(basis) is Basis.Z else BASIS_VECTORS[Basis.X]
    return _project(state, [qubit], vectors, rng)


def measure_bell(
    state: PureState, qa: int, qb: int, rng: np.random.Generator
) -> tuple[BellLabel, PureState]:
    """Project the ordered pair ``(qa, qb)`` onto the Bell basis."""
    if qa == qb:
        raise QuantumError("Bell measurement needs two distinct qubits")
    _check_qubits(state, [qa, qb])
    j, post = _project(state, [qa, qb], BELL_VECTORS, rng)
    return BELL_LABELS[j], post


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol, rtol=0))


def _apply(state: PureState, qubits: Sequence[int], u: np.ndarray) -> PureState:
    n = state.num_qubits
    mat = _to_front(state.amplitudes, n, qubits)
    return PureState._trusted(_from_front(u @ mat, n, qubits), n)


def apply_unitary(state: PureState, qubits: Sequence[int], u: np.ndarray) -> PureState:
    """Apply ``u`` to ``qubits`` (first listed qubit is the most significant)."""
    u = np.asarray(u, dtype=complex)
    _check_qubits(state, qubits)
    if u.shape != (1 << len(qubits), 1 << len(qubits)):
        raise QuantumError(
            f"matrix of shape {u.shape} does not act on {len(qubits)} qubit(s)"
        )
    if not is_unitary(u):
        raise QuantumError("matrix is not unitary")
    return _apply(state, qubits, u)


def attach(state: PureState, other: PureState) -> PureState:
    """Tensor product ``state (x) other``; ``other``'s qubits are renumbered after ``state``'s."""
    n = state.num_qubits + other.num_qubits
    if n > MAX_QUBITS:
        raise QuantumError(f"attaching would need {n} qubits (limit {MAX_QUBITS})")
    return PureState._trusted(np.outer(state.amplitudes, other.amplitudes).reshape(-1), n)


def reduced_single(state: PureState, qubit: int) -> np.ndarray:
    """2x2 reduced density matrix of one qubit (partial trace over the rest)."""
    _check_qubits(state, [qubit])
    mat = _to_front(state.amplitudes, state.num_qubits, [qubit])
    return mat @ mat.conj().T


def fidelity(a: PureState, b: PureState) -> float:
    """``|<a|b>|^2`` for two states on the same number of qubits."""
    if a.num_qubits != b.num_qubits:
        raise QuantumError("fidelity needs states of equal size")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class ProbeUnitary:
    """Eavesdropper probe acting on (data qubit, one-qubit ancilla).

    The ancilla always starts in ``|0>``.  Writing
    ``U|x>|0> = sum_y lambda_xy |y>|eps_xy>`` gives the four coefficient
    views and ancilla states exposed below.  ``lambda_xy`` is taken real and
    non-negative; any phase is carried by ``eps_xy``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise QuantumError(f"probe must be 4x4, got {m.shape}")
        if not is_unitary(m):
            raise QuantumError("probe matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def _branch(self, x: int, y: int) -> np.ndarray:
        # Column x|0> of U, restricted to data value y: an unnormalized ancilla vector.
        col = self.matrix[:, 2 * x]
        return col[2 * y : 2 * y + 2]

    def lam(self, x: int, y: int) -> float:
        return float(np.linalg.norm(self._branch(x, y)))

    def eps(self, x: int, y: int) -> PureState | None:
        """Normalized ancilla state ``|eps_xy>``, or None when ``lambda_xy`` vanishes."""
        w = self._branch(x, y)
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            return None
        return PureState(w / norm)

    def is_stealth(self, tol: float = 1e-9) -> bool:
        """True when the probe leaves every decoy undisturbed.

        That holds exactly when ``lambda_01 = lambda_10 = 0`` and
        ``lambda_00 |eps_00> = lambda_11 |eps_11>``.
        """
        if self.lam(0, 1) > tol or self.lam(1, 0) > tol:
            return False
        return bool(np.allclose(self._branch(0, 0), self._branch(1, 1), atol=tol, rtol=0))

    @classmethod
    def stealth(cls, theta: float = 0.0) -> "ProbeUnitary":
        """``I (x) Ry(theta)``: ``|eps_00> = |eps_11> = Ry(theta)|0>``."""
        return cls(np.kron(I2, ry(theta)))

    @classmethod
    def cnot(cls) -> "ProbeUnitary":
        """Z-basis copy onto the ancilla: ``|eps_00> = |0>``, ``|eps_11> = |1>``."""
        return cls(CNOT.copy())

    @classmethod
    def family(cls, flip: float = 0.0, spread: float = 0.0) -> "ProbeUnitary":
        """Probes parameterized away from stealth.

        ``flip`` rotates the data qubit (making ``lambda_01, lambda_10``
        nonzero); ``spread`` is a controlled-Ry on the ancilla, so that
        ``<eps_00|eps_11> = cos(spread / 2)``.  Both zero gives the identity.
        """
        controlled = np.eye(4, dtype=complex)
        controlled[2:, 2:] = ry(spread)
        return cls(controlled @ np.kron(ry(flip), I2))


def sample_z(state: PureState, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Measure every qubit in Z, ``shots`` times on fresh copies.

    Returns basis indices (qubit 1 most significant).  Equivalent to
    measuring the qubits one by one, but drawn from the joint Born
    distribution in a single call.
    """
    probs = np.abs(state.amplitudes) ** 2
    probs[probs < BRANCH_FLOOR] = 0.0
    return rng.choice(probs.size, size=shots, p=probs / probs.sum())
