"""
Pure-state simulation of polarization qubits.

Basis order is |H> = 0, |V> = 1 with the first listed qubit most
significant. Measured qubits stay in the register, collapsed onto the
observed eigenstate. Noise elsewhere is unraveled into Pauli branches so
nothing here ever needs a density matrix.
"""

import logging
import math
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..config import settings
from ..exceptions import InvalidArgumentError
from ..models.quantum import MeasBasis, Outcome, QubitId

logger = logging.getLogger(__name__)

_SQRT2_INV = 1.0 / np.sqrt(2.0)


class Unitary2:
    """2x2 unitary, checked at construction."""

    __slots__ = ("matrix", "entries", "name")

    def __init__(self, m00: complex, m01: complex, m10: complex, m11: complex, name: str = "U"):
        matrix = np.array([[m00, m01], [m10, m11]], dtype=complex)
        if not np.all(np.isfinite(matrix)):
            raise InvalidArgumentError(f"{name} has non-finite entries")
        deviation = np.max(np.abs(matrix.conj().T @ matrix - np.eye(2)))
        if deviation > settings.NORM_TOLERANCE:
            raise InvalidArgumentError(
                f"{name} is not unitary",
                details={"max_deviation": float(deviation)}
            )
        matrix.flags.writeable = False
        self.matrix = matrix
        # Row-major Python scalars for the one- and two-qubit path.
        self.entries: Tuple[complex, complex, complex, complex] = tuple(complex(x) for x in matrix.reshape(-1))
        self.name = name

    def __repr__(self) -> str:
        return f"Unitary2({self.name}, {self.matrix.tolist()})"


@lru_cache(maxsize=None)
def hwp() -> Unitary2:
    """Half-wave plate: |H> -> |+>, |V> -> |->."""
    return Unitary2(_SQRT2_INV, _SQRT2_INV, _SQRT2_INV, -_SQRT2_INV, name="HWP")


@lru_cache(maxsize=None)
def pauli_x() -> Unitary2:
    return Unitary2(0, 1, 1, 0, name="X")


@lru_cache(maxsize=None)
def pauli_y() -> Unitary2:
    return Unitary2(0, -1j, 1j, 0, name="Y")


@lru_cache(maxsize=None)
def pauli_z() -> Unitary2:
    return Unitary2(1, 0, 0, -1, name="Z")


@lru_cache(maxsize=None)
def pauli_zx() -> Unitary2:
    """Z after X in one gate, i.e. the V-outcome correction of remote preparation."""
    return Unitary2(0, 1, -1, 0, name="ZX")


@lru_cache(maxsize=256)
def rotation(alpha: float, beta: float) -> Unitary2:
    """
    Polarization rotation R with |H> -> alpha|H> + beta|V> and |V> -> beta|H> - alpha|V>.

    Only real parameters are accepted: the matrix [[a, b], [b, -a]] is
    unitary only when conj(a)*b is real.
    """
    if isinstance(alpha, complex) or isinstance(beta, complex):
        raise InvalidArgumentError("rotation parameters must be real")
    if abs(alpha * alpha + beta * beta - 1.0) > settings.NORM_TOLERANCE:
        raise InvalidArgumentError(
            "rotation parameters must satisfy alpha^2 + beta^2 = 1",
            details={"alpha": alpha, "beta": beta}
        )
    return Unitary2(alpha, beta, beta, -alpha, name=f"R({alpha:.6g},{beta:.6g})")


class StateVector:
    """Normalized amplitudes over an ordered list of labeled qubits."""

    __slots__ = ("qubits", "amplitudes")

    def __init__(self, qubits: Sequence[QubitId], amplitudes: Iterable[complex], normalize: bool = False):
        qubits = tuple(qubits)
        if len(set(qubits)) != len(qubits):
            raise InvalidArgumentError("qubit labels must be distinct", details={"qubits": list(qubits)})
        if len(qubits) > settings.MAX_QUBITS:
            raise InvalidArgumentError(
                f"joint state of {len(qubits)} qubits exceeds the cap of {settings.MAX_QUBITS}"
            )
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2 ** len(qubits):
            raise InvalidArgumentError(
                f"{len(qubits)} qubits need {2 ** len(qubits)} amplitudes, got {amps.shape[0]}"
            )
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if normalize:
            if norm <= 0.0:
                raise InvalidArgumentError("cannot normalize the zero vector")
            amps = amps / np.sqrt(norm)
        elif abs(norm - 1.0) > settings.NORM_TOLERANCE:
            raise InvalidArgumentError("state is not normalized", details={"norm": norm})
        self.qubits: Tuple[QubitId, ...] = qubits
        self.amplitudes: np.ndarray = amps

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def index_of(self, q: QubitId) -> int:
        try:
            return self.qubits.index(q)
        except ValueError:
            raise InvalidArgumentError(f"unknown qubit label: {q}", details={"qubits": list(self.qubits)}) from None

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape([2] * self.n_qubits)

    @classmethod
    def _trusted(cls, qubits: Tuple[QubitId, ...], amplitudes: np.ndarray) -> "StateVector":
        # Internal constructor for results of norm-preserving operations.
        state = cls.__new__(cls)
        state.qubits = qubits
        state.amplitudes = amplitudes
        return state

    def __repr__(self) -> str:
        return f"StateVector(qubits={list(self.qubits)}, amplitudes={np.round(self.amplitudes, 6).tolist()})"


_EIGENSTATES: Dict[Outcome, np.ndarray] = {
    Outcome.H: np.array([1.0, 0.0], dtype=complex),
    Outcome.V: np.array([0.0, 1.0], dtype=complex),
    Outcome.PLUS: np.array([_SQRT2_INV, _SQRT2_INV], dtype=complex),
    Outcome.MINUS: np.array([_SQRT2_INV, -_SQRT2_INV], dtype=complex),
}
for _vector in _EIGENSTATES.values():
    _vector.flags.writeable = False

# Python-scalar eigenvectors keyed by (basis, bit).
_EIGEN_SCALARS: Dict[Tuple[MeasBasis, int], Tuple[complex, complex]] = {
    (outcome.basis, outcome.bit): (complex(vector[0]), complex(vector[1]))
    for outcome, vector in _EIGENSTATES.items()
}

# Amplitudes are never written in place, so every Bell pair can share one buffer.
_PHI_PLUS = np.array([_SQRT2_INV, 0, 0, _SQRT2_INV], dtype=complex)
_PHI_PLUS.flags.writeable = False


def basis_state(q: QubitId, outcome: Outcome) -> StateVector:
    """Single-qubit eigenstate |H>, |V>, |+> or |->."""
    return StateVector._trusted((q,), _EIGENSTATES[outcome].copy())


def qubit_state(q: QubitId, alpha: complex, beta: complex) -> StateVector:
    return StateVector((q,), [alpha, beta])


def bell_phi_plus(id_a: QubitId, id_b: QubitId) -> StateVector:
    """(|HH> + |VV>)/sqrt(2) on (id_a, id_b)."""
    if id_a == id_b:
        raise InvalidArgumentError("Bell pair needs two distinct labels", details={"label": id_a})
    return StateVector._trusted((id_a, id_b), _PHI_PLUS)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product; qubit order is a's qubits followed by b's."""
    clash = set(a.qubits) & set(b.qubits)
    if clash:
        raise InvalidArgumentError("qubit labels collide", details={"labels": sorted(clash)})
    if a.n_qubits + b.n_qubits > settings.MAX_QUBITS:
        raise InvalidArgumentError(
            f"joint state of {a.n_qubits + b.n_qubits} qubits exceeds the cap of {settings.MAX_QUBITS}"
        )
    return StateVector._trusted(a.qubits + b.qubits, np.outer(a.amplitudes, b.amplitudes).reshape(-1))


def tensor_all(states: Sequence[StateVector]) -> StateVector:
    result = states[0]
    for state in states[1:]:
        result = tensor(result, state)
    return result


# (bit 0, bit 1) amplitude index pairs of qubit k, keyed by (n_qubits, k).
_SMALL_PAIRS: Dict[Tuple[int, int], Tuple[Tuple[int, int], ...]] = {
    (1, 0): ((0, 1),),
    (2, 0): ((0, 2), (1, 3)),
    (2, 1): ((0, 1), (2, 3)),
}


def _split(amplitudes: np.ndarray, k: int) -> np.ndarray:
    # (leading qubits, qubit k, trailing qubits)
    return amplitudes.reshape(1 << k, 2, -1)


def _apply_matrix(state: StateVector, k: int, u: Unitary2) -> StateVector:
    pairs = _SMALL_PAIRS.get((state.n_qubits, k))
    if pairs is not None:
        m00, m01, m10, m11 = u.entries
        amps = state.amplitudes.tolist()
        out = [0j] * len(amps)
        for i, j in pairs:
            out[i] = m00 * amps[i] + m01 * amps[j]
            out[j] = m10 * amps[i] + m11 * amps[j]
        return StateVector._trusted(state.qubits, np.array(out, dtype=complex))
    return StateVector._trusted(state.qubits, np.matmul(u.matrix, _split(state.amplitudes, k)).reshape(-1))


def apply_single_qubit(state: StateVector, q: QubitId, u: Unitary2) -> StateVector:
    return _apply_matrix(state, state.index_of(q), u)


@lru_cache(maxsize=64)
def _fredkin_gather(n: int, c: int, axes_a: Tuple[int, ...], axes_b: Tuple[int, ...]) -> np.ndarray:
    # Source position of every output amplitude.
    perm = list(range(n))
    for i, j in zip(axes_a, axes_b):
        perm[i], perm[j] = perm[j], perm[i]
    positions = np.arange(1 << n).reshape([2] * n)
    swapped = np.transpose(positions, perm)
    gather = positions.copy()
    branch = [slice(None)] * n
    branch[c] = 1
    gather[tuple(branch)] = swapped[tuple(branch)]
    gather = gather.reshape(-1)
    gather.flags.writeable = False
    return gather


def apply_fredkin(
    state: StateVector,
    control: QubitId,
    reg_a: Sequence[QubitId],
    reg_b: Sequence[QubitId],
) -> StateVector:
    """
    Controlled swap of two equally sized registers.

    Basis states whose control bit is H are untouched; those with control
    bit V get the reg_a and reg_b bit blocks exchanged.
    """
    if not reg_a or len(reg_a) != len(reg_b):
        raise InvalidArgumentError(
            "registers must be non-empty and of equal length",
            details={"reg_a": list(reg_a), "reg_b": list(reg_b)}
        )
    involved = [control, *reg_a, *reg_b]
    if len(set(involved)) != len(involved):
        raise InvalidArgumentError("control and register qubits must all be distinct", details={"qubits": involved})

    c = state.index_of(control)
    axes_a = tuple(state.index_of(q) for q in reg_a)
    axes_b = tuple(state.index_of(q) for q in reg_b)
    gather = _fredkin_gather(state.n_qubits, c, axes_a, axes_b)
    return StateVector._trusted(state.qubits, state.amplitudes[gather])


class _Branches:
    """
    Qubit k of a state written in a measurement basis, ready to collapse.

    Diagonal coefficients come from one half-wave plate pass; the collapsed
    state is rebuilt as eigenvector times the kept branch, so the plate is
    never applied a second time.
    """

    __slots__ = ("state", "k", "basis", "small", "coeffs", "w0", "w1")

    def __init__(self, state: StateVector, k: int, basis: MeasBasis):
        self.state = state
        self.k = k
        self.basis = basis
        self.small = _SMALL_PAIRS.get((state.n_qubits, k))
        if self.small is not None:
            amps = state.amplitudes.tolist()
            if basis == MeasBasis.DIAGONAL:
                coeffs = [
                    ((amps[i] + amps[j]) * _SQRT2_INV, (amps[i] - amps[j]) * _SQRT2_INV) for i, j in self.small
                ]
            else:
                coeffs = [(amps[i], amps[j]) for i, j in self.small]
            self.coeffs = coeffs
            self.w0 = sum(c0.real * c0.real + c0.imag * c0.imag for c0, _ in coeffs)
            self.w1 = sum(c1.real * c1.real + c1.imag * c1.imag for _, c1 in coeffs)
        else:
            view = _split(state.amplitudes, k)
            if basis == MeasBasis.DIAGONAL:
                view = np.matmul(hwp().matrix, view)
            self.coeffs = view
            weights = (view.real ** 2 + view.imag ** 2).sum(axis=(0, 2))
            self.w0, self.w1 = float(weights[0]), float(weights[1])

    def weight(self, bit: int) -> float:
        return self.w0 if bit == 0 else self.w1

    def sample(self, u: float) -> int:
        return 0 if u * (self.w0 + self.w1) < self.w0 else 1

    def collapse(self, bit: int) -> StateVector:
        scale = 1.0 / math.sqrt(self.weight(bit))
        e0, e1 = _EIGEN_SCALARS[(self.basis, bit)]
        if self.small is not None:
            out = [0j] * (1 << self.state.n_qubits)
            for (i, j), pair in zip(self.small, self.coeffs):
                kept = pair[bit] * scale
                out[i] = e0 * kept
                out[j] = e1 * kept
            amplitudes = np.array(out, dtype=complex)
        else:
            kept = self.coeffs[:, bit, :] * scale
            eigen = _EIGENSTATES[Outcome.from_bit(self.basis, bit)]
            amplitudes = (kept[:, None, :] * eigen[None, :, None]).reshape(-1)
        return StateVector._trusted(self.state.qubits, amplitudes)


def outcome_probabilities(state: StateVector, q: QubitId, basis: MeasBasis) -> Dict[Outcome, float]:
    """Born probabilities for measuring q in the given basis."""
    branches = _Branches(state, state.index_of(q), basis)
    total = branches.w0 + branches.w1
    return {
        Outcome.from_bit(basis, 0): branches.w0 / total,
        Outcome.from_bit(basis, 1): branches.w1 / total,
    }


def project(state: StateVector, q: QubitId, outcome: Outcome) -> Tuple[float, StateVector]:
    """
    Project q onto the eigenstate of `outcome` and renormalize.

    Returns the Born probability of that outcome together with the
    collapsed state. Raises when the outcome has zero probability.
    """
    branches = _Branches(state, state.index_of(q), outcome.basis)
    weight = branches.weight(outcome.bit)
    if weight <= 0.0:
        raise InvalidArgumentError(f"outcome {outcome.value} has zero probability on {q}")
    return weight / (branches.w0 + branches.w1), branches.collapse(outcome.bit)


def measure(
    state: StateVector,
    q: QubitId,
    basis: MeasBasis,
    rng: np.random.Generator,
) -> Tuple[Outcome, StateVector]:
    """Projective measurement with Born sampling; q stays in the register, collapsed."""
    branches = _Branches(state, state.index_of(q), basis)
    bit = branches.sample(rng.random())
    return Outcome.from_bit(basis, bit), branches.collapse(bit)


def measure_pair(
    state: StateVector,
    first: QubitId,
    second: QubitId,
    basis: MeasBasis,
    rng_first: np.random.Generator,
    rng_second: np.random.Generator,
) -> Tuple[Outcome, Outcome, StateVector]:
    """
    Measure two qubits in the same basis, first then second, each party drawing from its own stream.

    A two-qubit register is handled on its four amplitudes in one pass:
    the first bit is drawn from its marginal and the second from the
    conditional, which is what two successive calls to measure() sample.
    Larger registers fall back to exactly those two calls.
    """
    i, j = state.index_of(first), state.index_of(second)
    if i == j:
        raise InvalidArgumentError("measure_pair needs two distinct qubits", details={"qubit": first})
    if state.n_qubits != 2:
        outcome_first, state = measure(state, first, basis, rng_first)
        outcome_second, state = measure(state, second, basis, rng_second)
        return outcome_first, outcome_second, state

    c00, c01, c10, c11 = state.amplitudes.tolist()
    if basis == MeasBasis.DIAGONAL:
        c00, c01, c10, c11 = (
            0.5 * (c00 + c01 + c10 + c11),
            0.5 * (c00 - c01 + c10 - c11),
            0.5 * (c00 + c01 - c10 - c11),
            0.5 * (c00 - c01 - c10 + c11),
        )
    p00, p01, p10, p11 = (abs(c) ** 2 for c in (c00, c01, c10, c11))
    if i == 0:
        # joint[first_bit][second_bit]
        joint = ((p00, p01), (p10, p11))
    else:
        joint = ((p00, p10), (p01, p11))

    w0, w1 = sum(joint[0]), sum(joint[1])
    bit_first = 0 if rng_first.random() * (w0 + w1) < w0 else 1
    v0, v1 = joint[bit_first]
    bit_second = 0 if rng_second.random() * (v0 + v1) < v0 else 1

    bits = (bit_first, bit_second) if i == 0 else (bit_second, bit_first)
    collapsed = np.outer(
        _EIGENSTATES[Outcome.from_bit(basis, bits[0])],
        _EIGENSTATES[Outcome.from_bit(basis, bits[1])],
    ).reshape(-1)
    return (
        Outcome.from_bit(basis, bit_first),
        Outcome.from_bit(basis, bit_second),
        StateVector._trusted(state.qubits, collapsed),
    )


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> with conjugation on a."""
    if a.qubits != b.qubits:
        raise InvalidArgumentError(
            "inner product needs identical registers",
            details={"a": list(a.qubits), "b": list(b.qubits)}
        )
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2, i.e. equality up to global phase."""
    return abs(inner_product(a, b)) ** 2


def _bipartition(state: StateVector, left: Sequence[QubitId]) -> np.ndarray:
    left_axes = [state.index_of(q) for q in left]
    right_axes = [i for i in range(state.n_qubits) if i not in left_axes]
    psi = np.transpose(state.tensor_view(), left_axes + right_axes)
    return psi.reshape(2 ** len(left_axes), 2 ** len(right_axes))


def schmidt_rank(state: StateVector, left: Sequence[QubitId], tol: float = 1e-10) -> int:
    """Number of non-zero Schmidt coefficients across the cut left | rest."""
    singular = np.linalg.svd(_bipartition(state, left), compute_uv=False)
    return int(np.sum(singular > tol))


def reduced_qubit_state(state: StateVector, q: QubitId, tol: float = 1e-10) -> StateVector:
    """
    Pure state of a qubit that is not entangled with the rest of the register.

    Global phase of the result is arbitrary.
    """
    u, s, _ = np.linalg.svd(_bipartition(state, [q]))
    if np.sum(s > tol) != 1:
        raise InvalidArgumentError(f"qubit {q} is entangled with the rest of the register")
    return StateVector((q,), u[:, 0], normalize=True)


def swap_test_registers(
    u: StateVector,
    v: StateVector,
    shots: int,
    rng: np.random.Generator,
    control: QubitId = "c",
) -> float:
    """
    Flip frequency of a |+> control after a Fredkin over two equally sized registers.

    The expected value is (1 - |<u|v>|^2) / 2 whatever the register width.
    """
    if u.n_qubits != v.n_qubits:
        raise InvalidArgumentError("registers must have the same width")
    if shots < 1:
        raise InvalidArgumentError("shots must be positive")
    joint = tensor(basis_state(control, Outcome.PLUS), tensor(u, v))
    joint = apply_fredkin(joint, control, list(u.qubits), list(v.qubits))
    # Every shot starts from the same pre-measurement state, so sample the
    # Born distribution directly instead of re-running the circuit.
    p_minus = outcome_probabilities(joint, control, MeasBasis.DIAGONAL)[Outcome.MINUS]
    flips = int(np.count_nonzero(rng.random(shots) < p_minus))
    logger.debug(f"Register swap test: {flips}/{shots} flips (p_minus={p_minus:.6f})")
    return flips / shots


def random_state(qubits: List[QubitId], rng: np.random.Generator, real: bool = False) -> StateVector:
    """Haar-ish random pure state, used for property checks and sweeps."""
    dim = 2 ** len(qubits)
    amps = rng.normal(size=dim).astype(complex)
    if not real:
        amps = amps + 1j * rng.normal(size=dim)
    return StateVector(qubits, amps, normalize=True)
