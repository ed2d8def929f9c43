"""Particle bookkeeping, decoy insertion, transit taps and eavesdropping checks."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .qsim import (
    DECOY_KINDS,
    Basis,
    BellLabel,
    PureState,
    QuantumError,
    StateKind,
    _apply,
    apply_unitary,
    attach,
    make_state,
    measure,
    measure_bell,
)

_session_ids = itertools.count(1)


class ChannelError(ValueError):
    pass


class Channel(str, enum.Enum):
    """Quantum channels of the protocol, both originating at TP."""

    TO_ALICE = "tp->alice"
    TO_BOB = "tp->bob"


class CheckMode(str, enum.Enum):
    FULL = "full"
    SEMI = "semi"


@dataclass(frozen=True)
class ParticleHandle:
    """Opaque reference to one qubit of one register in one session."""

    session_id: int
    register_id: int
    qubit: int


class QuantumLab:
    """All quantum registers of a single session.

    Registers are independent pure states; a handle names a qubit inside one
    of them.  Every Born-rule draw comes from ``rng`` in call order.
    """

    def __init__(self, rng: np.random.Generator, session_id: int | None = None):
        self.rng = rng
        self.session_id = next(_session_ids) if session_id is None else session_id
        self._registers: dict[int, PureState] = {}
        self._next_register = 0
        self._merged: dict[int, tuple[int, int]] = {}

    def add(self, state: PureState) -> list[ParticleHandle]:
        rid = self._next_register
        self._next_register += 1
        self._registers[rid] = state
        return [ParticleHandle(self.session_id, rid, q) for q in range(1, state.num_qubits + 1)]

    def prepare(self, kind: StateKind) -> ParticleHandle:
        return self.add(make_state(kind))[0]

    def _resolve(self, h: ParticleHandle) -> tuple[int, int]:
        """Current (register, qubit) of a handle, following register merges."""
        if h.session_id != self.session_id:
            raise ChannelError(f"handle {h} belongs to another session")
        rid, q = h.register_id, h.qubit
        while rid in self._merged:
            rid, offset = self._merged[rid]
            q += offset
        state = self._registers.get(rid)
        if state is None:
            raise ChannelError(f"handle {h} refers to an unknown register")
        if not 1 <= q <= state.num_qubits:
            raise ChannelError(f"handle {h} refers to a missing qubit")
        return rid, q

    def _root(self, register_id: int) -> int:
        while register_id in self._merged:
            register_id = self._merged[register_id][0]
        return register_id

    def state(self, register_id: int) -> PureState:
        return self._registers[self._root(register_id)]

    def measure(self, h: ParticleHandle, basis: Basis = Basis.Z) -> int:
        rid, q = self._resolve(h)
        bit, post = measure(self._registers[rid], q, basis, self.rng)
        self._registers[rid] = post
        return bit

    def measure_bell(self, a: ParticleHandle, b: ParticleHandle) -> BellLabel:
        (ra, qa), (rb, qb) = self._resolve(a), self._resolve(b)
        if ra != rb:
            self._merge(ra, rb)
            ra, qa = self._resolve(a)
            _, qb = self._resolve(b)
        label, post = measure_bell(self._registers[ra], qa, qb, self.rng)
        self._registers[ra] = post
        return label

    def apply(self, handles: Sequence[ParticleHandle], u: np.ndarray, *, checked: bool = True) -> None:
        located = [self._resolve(h) for h in handles]
        rid = located[0][0]
        for other, _ in located[1:]:
            if other != rid:
                self._merge(rid, other)
        located = [self._resolve(h) for h in handles]
        qubits = [q for _, q in located]
        state = self._registers[rid]
        self._registers[rid] = apply_unitary(state, qubits, u) if checked else _apply(state, qubits, u)

    def attach(self, register_id: int, state: PureState) -> list[ParticleHandle]:
        """Grow a register by ``state``; returns handles of the new qubits."""
        register_id = self._root(register_id)
        base = self._registers[register_id]
        self._registers[register_id] = attach(base, state)
        return [
            ParticleHandle(self.session_id, register_id, base.num_qubits + q)
            for q in range(1, state.num_qubits + 1)
        ]

    def _merge(self, keep: int, drop: int) -> None:
        # Registers are in a product state, so joining them is a tensor product.
        base = self._registers[keep]
        self._registers[keep] = attach(base, self._registers.pop(drop))
        self._merged[drop] = (keep, base.num_qubits)


@dataclass(frozen=True)
class DecoyRecord:
    """TP's private note of one decoy photon it inserted."""

    position: int
    prepared: StateKind

    def __post_init__(self):
        if self.prepared not in DECOY_KINDS:
            raise ChannelError(f"{self.prepared} is not a decoy state")

    @property
    def basis(self) -> Basis:
        return self.prepared.basis

    @property
    def value(self) -> int:
        return self.prepared.bit


@dataclass(frozen=True)
class CheckResult:
    tested: int
    mismatches: int
    threshold: int = 0

    @property
    def error_rate(self) -> float:
        return self.mismatches / self.tested if self.tested else 0.0

    @property
    def passed(self) -> bool:
        return self.mismatches <= self.threshold

    def to_dict(self) -> dict:
        return {
            "tested": self.tested,
            "mismatches": self.mismatches,
            "error_rate": round(self.error_rate, 6),
            "pass": self.passed,
        }


class Tap(Protocol):
    """Anything that can act on particles in transit.

    A tap sees only handles, in transmission order; it cannot tell decoys
    from payload.
    """

    session_id: int

    def on_transit(self, channel: Channel, seq: list[ParticleHandle]) -> list[ParticleHandle]: ...


def insert_decoys(
    payload: Sequence[ParticleHandle],
    l: int,
    lab: QuantumLab,
    rng: np.random.Generator,
) -> tuple[list[ParticleHandle], list[DecoyRecord]]:
    """Interleave ``l`` fresh decoy photons at uniformly random positions."""
    if l < 0:
        raise ChannelError("decoy count must be non-negative")
    total = len(payload) + l
    if l == 0:
        return list(payload), []
    positions = np.sort(rng.choice(total, size=l, replace=False))
    kinds = rng.integers(0, 4, size=l)
    records = [DecoyRecord(int(p), DECOY_KINDS[int(k)]) for p, k in zip(positions, kinds)]
    seq: list[ParticleHandle] = []
    it = iter(payload)
    r = 0
    for pos in range(total):
        if r < l and records[r].position == pos:
            seq.append(lab.prepare(records[r].prepared))
            r += 1
        else:
            seq.append(next(it))
    return seq, records


def strip_decoys(seq: Sequence[ParticleHandle], records: Sequence[DecoyRecord]) -> list[ParticleHandle]:
    drop = {r.position for r in records}
    return [h for i, h in enumerate(seq) if i not in drop]


def transmit(
    seq: Sequence[ParticleHandle],
    tap: Tap | None,
    channel: Channel,
    lab: QuantumLab,
) -> list[ParticleHandle]:
    """Deliver ``seq`` over ``channel``, letting ``tap`` act on it in transit."""
    if tap is None:
        return list(seq)
    if tap.session_id != lab.session_id:
        raise ChannelError("tap is bound to a different session")
    delivered = tap.on_transit(channel, list(seq))
    if len(delivered) != len(seq):
        raise ChannelError("tap changed the sequence length")
    return delivered


def eavesdrop_check(
    records: Sequence[DecoyRecord],
    delivered: Sequence[ParticleHandle],
    lab: QuantumLab,
    mode: CheckMode = CheckMode.FULL,
    rng: np.random.Generator | None = None,
    threshold: int = 0,
) -> CheckResult:
    """Run the post-delivery decoy comparison between TP and one receiver.

    Full mode: the receiver measures every announced decoy in its
    preparation basis.  Semi mode: the receiver reflects or Z-measure-resends
    each decoy with probability 1/2 (drawn from ``rng``); TP then checks
    reflected decoys in the preparation basis and measure-resent ones only
    if they were prepared in Z.
    """
    mode = CheckMode(mode)
    if mode is CheckMode.SEMI and rng is None:
        raise ChannelError("semi-quantum checking needs a random stream")
    tested = mismatches = 0
    for rec in records:
        if not 0 <= rec.position < len(delivered):
            raise ChannelError(f"decoy position {rec.position} outside delivered sequence")
        h = delivered[rec.position]
        if mode is CheckMode.FULL or rng.integers(0, 2) == 0:
            bit = lab.measure(h, rec.basis)
        else:
            lab.measure(h, Basis.Z)
            if rec.basis is not Basis.Z:
                continue
            # TP measures the qubit the receiver sent back.
            bit = lab.measure(h, Basis.Z)
        tested += 1
        mismatches += bit != rec.value
    return CheckResult(tested, mismatches, threshold)


__all__ = [
    "Channel",
    "ChannelError",
    "CheckMode",
    "CheckResult",
    "DecoyRecord",
    "ParticleHandle",
    "QuantumError",
    "QuantumLab",
    "Tap",
    "eavesdrop_check",
    "insert_decoys",
    "strip_decoys",
    "transmit",
]
