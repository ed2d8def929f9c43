"""Two-party private equality test over eight-qubit carrier states.

One carrier per two-bit group.  TP keeps qubits (1, 2, 7, 8), sends (3, 4)
to Alice and (5, 6) to Bob, each sequence padded with decoy photons.  After
the decoy checks pass, the parties measure, mask their groups with the
outcomes (and keys, when remote) and TP unmasks with its own outcomes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence, Union

import numpy as np

from .channel import (
    Channel,
    CheckMode,
    CheckResult,
    ParticleHandle,
    QuantumLab,
    eavesdrop_check,
    insert_decoys,
    strip_decoys,
    transmit,
)
from .qsim import Basis, BellLabel, StateKind, make_state

if TYPE_CHECKING:
    from .adversary import AdversaryView, AttackModel

DEFAULT_DECOYS = 16


class ProtocolError(ValueError):
    pass


class BitPair(NamedTuple):
    """Two classical bits; ``^`` is componentwise XOR."""

    hi: int
    lo: int

    def __xor__(self, other: "BitPair") -> "BitPair":  # type: ignore[override]
        return BitPair(self.hi ^ other.hi, self.lo ^ other.lo)

    def __str__(self) -> str:
        return f"{self.hi}{self.lo}"

    @classmethod
    def parse(cls, text: str) -> "BitPair":
        if len(text) != 2 or set(text) - {"0", "1"}:
            raise ProtocolError(f"not a bit pair: {text!r}")
        return cls(int(text[0]), int(text[1]))

    @classmethod
    def from_index(cls, v: int) -> "BitPair":
        return cls((v >> 1) & 1, v & 1)

    @property
    def index(self) -> int:
        return (self.hi << 1) | self.lo


ZERO = BitPair(0, 0)
ALL_PAIRS = tuple(BitPair.from_index(v) for v in range(4))


def xor_all(*pairs: BitPair) -> BitPair:
    out = ZERO
    for p in pairs:
        out = out ^ p
    return out


class Locality(str, enum.Enum):
    CO_LOCATED = "colocated"
    REMOTE = "remote"
    REMOTE_AUTHENTICATED = "remote-auth"


class Measurement(str, enum.Enum):
    SINGLE_PARTICLE = "z"
    BELL = "bell"


class Quantumness(str, enum.Enum):
    FULL = "full"
    SEMI = "semi"


class Party(str, enum.Enum):
    ALICE = "alice"
    BOB = "bob"


class KeyPair(str, enum.Enum):
    AB = "ab"
    AC = "ac"
    BC = "bc"


class Verdict(str, enum.Enum):
    EQUAL = "equal"
    NOT_EQUAL = "not_equal"
    ABORTED = "aborted"


# ---------------------------------------------------------------- secrets


def secret_bits(value: int, n: int) -> list[int]:
    """``x_1 .. x_N`` with ``value = sum x_j 2^(j-1)``."""
    if n < 1:
        raise ProtocolError("bit width must be at least 1")
    if not 0 <= value < (1 << n):
        raise ProtocolError(f"value {value} does not fit in {n} bits")
    return [(value >> j) & 1 for j in range(n)]


def bits_to_groups(bits: Sequence[int], n: int) -> list[BitPair]:
    """Split ``n`` bits into ``ceil(n/2)`` consecutive pairs, padding odd ``n`` with 0."""
    if n < 1:
        raise ProtocolError("cannot group an empty secret")
    if len(bits) != n:
        raise ProtocolError(f"expected {n} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ProtocolError("bits must be 0 or 1")
    padded = list(bits) + [0] * (n % 2)
    return [BitPair(padded[i], padded[i + 1]) for i in range(0, len(padded), 2)]


@dataclass(frozen=True)
class GroupedSecret:
    n_bits: int
    bits: tuple[int, ...]
    groups: tuple[BitPair, ...]

    @classmethod
    def from_value(cls, value: int, n: int) -> "GroupedSecret":
        bits = secret_bits(value, n)
        return cls(n, tuple(bits), tuple(bits_to_groups(bits, n)))

    @property
    def value(self) -> int:
        return sum(b << j for j, b in enumerate(self.bits))


def n_groups(n: int) -> int:
    return math.ceil(n / 2)


# ------------------------------------------------------------------- keys


def _key_allowed(pair: KeyPair, locality: Locality) -> bool:
    if locality is Locality.REMOTE:
        return True
    if locality is Locality.REMOTE_AUTHENTICATED:
        return pair is KeyPair.AB
    return False


def deal_keys(
    pair: KeyPair, count: int, rng: np.random.Generator, locality: Locality = Locality.REMOTE
) -> list[BitPair]:
    """Ideal key dealer: ``count`` uniform bit pairs for one pair of parties."""
    pair, locality = KeyPair(pair), Locality(locality)
    if not _key_allowed(pair, locality):
        raise ProtocolError(f"no {pair.value} key is used in {locality.value} mode")
    return [BitPair.from_index(int(v)) for v in rng.integers(0, 4, size=count)]


class KeyDealer:
    """Hands both endpoints of a key pair the same string.

    Keys are drawn lazily in a fixed order (ab, ac, bc) so the draw sequence
    never depends on which party asks first.
    """

    def __init__(self, rng: np.random.Generator, locality: Locality, count: int):
        self.locality = Locality(locality)
        self.count = count
        self._keys: dict[KeyPair, list[BitPair]] = {}
        for pair in KeyPair:
            if _key_allowed(pair, self.locality):
                self._keys[pair] = deal_keys(pair, count, rng, self.locality)

    def key(self, pair: KeyPair) -> list[BitPair]:
        pair = KeyPair(pair)
        if pair not in self._keys:
            raise ProtocolError(f"no {pair.value} key is used in {self.locality.value} mode")
        return list(self._keys[pair])

    def keys(self) -> dict[KeyPair, list[BitPair]]:
        return {p: list(k) for p, k in self._keys.items()}


# --------------------------------------------------------------- encoding

_BELL_CODE = {
    BellLabel.PHI_PLUS: BitPair(0, 0),
    BellLabel.PHI_MINUS: BitPair(0, 1),
    BellLabel.PSI_PLUS: BitPair(1, 0),
    BellLabel.PSI_MINUS: BitPair(1, 1),
}


def encode_outcome(outcome: Union[tuple[int, int], BellLabel]) -> BitPair:
    """Public coding rules: Z outcomes map to their bits, Bell labels to 00/01/10/11."""
    if isinstance(outcome, BellLabel):
        return _BELL_CODE[outcome]
    a, b = outcome
    if a not in (0, 1) or b not in (0, 1):
        raise ProtocolError(f"invalid Z outcome pair {outcome!r}")
    return BitPair(a, b)


def measure_pair(
    lab: QuantumLab, a: ParticleHandle, b: ParticleHandle, measurement: Measurement
) -> BitPair:
    if Measurement(measurement) is Measurement.BELL:
        return encode_outcome(lab.measure_bell(a, b))
    return encode_outcome((lab.measure(a, Basis.Z), lab.measure(b, Basis.Z)))


# ----------------------------------------------------------------- rounds


@dataclass(frozen=True)
class ParticipantGroup:
    m: BitPair  # encoded measurement outcome
    r: BitPair  # masked value handed on (to the partner, or announced)


def participant_round(
    party: Party,
    groups: Sequence[BitPair],
    handles: Sequence[ParticleHandle],
    lab: QuantumLab,
    measurement: Measurement = Measurement.SINGLE_PARTICLE,
    locality: Locality = Locality.CO_LOCATED,
    keys: dict[KeyPair, Sequence[BitPair]] | None = None,
) -> list[ParticipantGroup]:
    """Measure own particles and mask each group.

    co-located: ``R = G ^ M``; remote: ``R = G ^ M ^ K_ab ^ K_ac`` (``K_bc``
    for Bob); authenticated remote: ``R = G ^ M ^ K_ab``.
    """
    party, locality = Party(party), Locality(locality)
    if len(handles) != 2 * len(groups):
        raise ProtocolError(f"{party.value} holds {len(handles)} particles for {len(groups)} groups")
    keys = keys or {}
    needed: list[KeyPair] = []
    if locality is Locality.REMOTE:
        needed = [KeyPair.AB, KeyPair.AC if party is Party.ALICE else KeyPair.BC]
    elif locality is Locality.REMOTE_AUTHENTICATED:
        needed = [KeyPair.AB]
    for pair in needed:
        if pair not in keys or len(keys[pair]) != len(groups):
            raise ProtocolError(f"{party.value} is missing the {pair.value} key")
    out = []
    for i, g in enumerate(groups):
        m = measure_pair(lab, handles[2 * i], handles[2 * i + 1], measurement)
        out.append(ParticipantGroup(m, xor_all(g, m, *(keys[p][i] for p in needed))))
    return out


def joint_xor(ra: Sequence[BitPair], rb: Sequence[BitPair]) -> list[BitPair]:
    """Private Alice-Bob exchange producing ``R_AB = R_a ^ R_b``."""
    if len(ra) != len(rb):
        raise ProtocolError("group counts differ")
    return [a ^ b for a, b in zip(ra, rb)]


@dataclass(frozen=True)
class Announcement:
    """What the participants publish to TP."""

    r_ab: tuple[BitPair, ...] | None = None
    r_a: tuple[BitPair, ...] | None = None
    r_b: tuple[BitPair, ...] | None = None

    def __len__(self) -> int:
        return len(self.r_ab if self.r_ab is not None else self.r_a)

    def to_dict(self) -> dict:
        out = {}
        for name in ("r_ab", "r_a", "r_b"):
            v = getattr(self, name)
            if v is not None:
                out[name] = [str(p) for p in v]
        return out


@dataclass(frozen=True)
class TPResult:
    verdict: Verdict
    r: tuple[BitPair, ...]
    m_c1: tuple[BitPair, ...]
    m_c2: tuple[BitPair, ...]


def tp_round(
    announced: Announcement,
    tp_handles: Sequence[ParticleHandle],
    lab: QuantumLab,
    measurement: Measurement = Measurement.SINGLE_PARTICLE,
    locality: Locality = Locality.CO_LOCATED,
    keys: dict[KeyPair, Sequence[BitPair]] | None = None,
) -> TPResult:
    """Measure S_c, unmask every group and decide.

    ``tp_handles`` lists each carrier's (p1, p2, p7, p8) in order.  The
    verdict is Equal iff every group's ``R_i`` is 00.
    """
    locality = Locality(locality)
    count = len(tp_handles) // 4
    if len(tp_handles) != 4 * count:
        raise ProtocolError("TP sequence is not a whole number of quadruples")
    if locality is Locality.REMOTE:
        if announced.r_a is None or announced.r_b is None:
            raise ProtocolError("remote mode needs individual announcements")
        keys = keys or {}
        if any(len(keys.get(p, ())) != count for p in (KeyPair.AC, KeyPair.BC)):
            raise ProtocolError("TP is missing its keys")
    elif announced.r_ab is None:
        raise ProtocolError("joint announcement R_AB missing")
    if len(announced) != count:
        raise ProtocolError(f"{len(announced)} announced groups for {count} carriers")

    m_c1, m_c2, r = [], [], []
    for i in range(count):
        p1, p2, p7, p8 = tp_handles[4 * i : 4 * i + 4]
        c1 = measure_pair(lab, p1, p2, measurement)
        c2 = measure_pair(lab, p7, p8, measurement)
        if locality is Locality.REMOTE:
            ri = xor_all(announced.r_a[i], announced.r_b[i], c1, c2, keys[KeyPair.AC][i], keys[KeyPair.BC][i])
        else:
            ri = xor_all(announced.r_ab[i], c1, c2)
        m_c1.append(c1)
        m_c2.append(c2)
        r.append(ri)
    verdict = Verdict.EQUAL if all(ri == ZERO for ri in r) else Verdict.NOT_EQUAL
    return TPResult(verdict, tuple(r), tuple(m_c1), tuple(m_c2))


def qubit_efficiency(n_bits: int) -> float:
    """Compared bits over consumed carrier qubits (decoys and key material excluded)."""
    g = n_groups(n_bits)
    return (2 * g) / (8 * g)


# ---------------------------------------------------------------- session


@dataclass(frozen=True)
class SessionConfig:
    n: int
    x: int
    y: int
    locality: Locality = Locality.CO_LOCATED
    measurement: Measurement = Measurement.SINGLE_PARTICLE
    quantumness: Quantumness = Quantumness.FULL
    decoys: int = DEFAULT_DECOYS
    seed: int = 0
    attack: "AttackModel | None" = None
    semi_threshold: int = 0

    def __post_init__(self):
        for name, enum_type in (
            ("locality", Locality),
            ("measurement", Measurement),
            ("quantumness", Quantumness),
        ):
            object.__setattr__(self, name, enum_type(getattr(self, name)))
        if self.n < 1:
            raise ProtocolError("N must be at least 1")
        for name in ("x", "y"):
            if not 0 <= getattr(self, name) < (1 << self.n):
                raise ProtocolError(f"{name.upper()} must satisfy 0 <= {name.upper()} < 2^N")
        if self.decoys < 0:
            raise ProtocolError("decoy count must be non-negative")
        if not 0 <= self.seed < (1 << 64):
            raise ProtocolError("seed must be a 64-bit unsigned integer")
        if self.semi_threshold < 0:
            raise ProtocolError("semi threshold must be non-negative")


class SessionStreams:
    """Independent counter-based streams derived from one 64-bit seed.

    Each consumer owns a stream, so e.g. key dealing never shifts the
    Born-rule draws.
    """

    NAMES = ("quantum", "decoy", "check", "dealer", "adversary")

    def __init__(self, seed: int):
        for i, name in enumerate(self.NAMES):
            ss = np.random.SeedSequence(seed, spawn_key=(i,))
            setattr(self, name, np.random.Generator(np.random.Philox(ss)))


@dataclass
class GroupTranscript:
    index: int
    g_a: BitPair
    g_b: BitPair
    m_a: BitPair
    m_b: BitPair
    m_c1: BitPair
    m_c2: BitPair
    r_a: BitPair
    r_b: BitPair
    r_ab: BitPair | None
    r: BitPair
    keys: dict[KeyPair, BitPair] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"group": self.index}
        for name in ("g_a", "g_b", "m_a", "m_b", "m_c1", "m_c2", "r_a", "r_b", "r_ab", "r"):
            v = getattr(self, name)
            out[name] = None if v is None else str(v)
        for pair in KeyPair:
            if pair in self.keys:
                out[f"k_{pair.value}"] = str(self.keys[pair])
        return out


@dataclass
class SessionReport:
    config: SessionConfig
    verdict: Verdict
    groups: list[GroupTranscript]
    checks: dict[Channel, CheckResult]
    qubit_efficiency: float
    announcement: Announcement | None = None
    attack_rejected: bool = False
    adversary: "AdversaryView | None" = None

    @property
    def seed(self) -> int:
        return self.config.seed

    def tp_view(self) -> dict:
        """Everything TP sees: its own outcomes and keys, announcements, checks."""
        return {
            "announcement": None if self.announcement is None else self.announcement.to_dict(),
            "m_c1": [str(g.m_c1) for g in self.groups],
            "m_c2": [str(g.m_c2) for g in self.groups],
            "tp_keys": [
                {p.value: str(g.keys[p]) for p in (KeyPair.AC, KeyPair.BC) if p in g.keys}
                for g in self.groups
            ],
            "r": [str(g.r) for g in self.groups],
            "checks": {c.value: r.to_dict() for c, r in self.checks.items()},
            "verdict": self.verdict.value,
        }


def _carve(handles: list[ParticleHandle]) -> tuple[list, list, list]:
    s_a = [handles[2], handles[3]]
    s_b = [handles[4], handles[5]]
    s_c = [handles[0], handles[1], handles[6], handles[7]]
    return s_a, s_b, s_c


def run_session(config: SessionConfig, dealer: KeyDealer | None = None) -> SessionReport:
    """Run one complete comparison, optionally under attack.

    ``dealer`` overrides the seeded ideal key dealer (used to replay a
    session with chosen keys).
    """
    cfg = config
    streams = SessionStreams(cfg.seed)
    lab = QuantumLab(streams.quantum)
    count = n_groups(cfg.n)
    ga = GroupedSecret.from_value(cfg.x, cfg.n).groups
    gb = GroupedSecret.from_value(cfg.y, cfg.n).groups
    efficiency = qubit_efficiency(cfg.n)

    # Step 1: carriers and the three sequences.
    s_a: list[ParticleHandle] = []
    s_b: list[ParticleHandle] = []
    s_c: list[ParticleHandle] = []
    for _ in range(count):
        a, b, c = _carve(lab.add(make_state(StateKind.EIGHT_QUBIT)))
        s_a += a
        s_b += b
        s_c += c

    rejected = False
    tap = None
    if cfg.attack is not None:
        if cfg.attack.blocked_by(cfg.locality):
            rejected = True
        else:
            tap = cfg.attack.bind(lab, streams.adversary, cfg.measurement)

    # Steps 2-3: decoys, transit, checks.
    check_mode = CheckMode(cfg.quantumness.value)
    threshold = cfg.semi_threshold if check_mode is CheckMode.SEMI else 0
    delivered: dict[Channel, list[ParticleHandle]] = {}
    checks: dict[Channel, CheckResult] = {}
    records_by_channel = {}
    for channel, payload in ((Channel.TO_ALICE, s_a), (Channel.TO_BOB, s_b)):
        seq, records = insert_decoys(payload, cfg.decoys, lab, streams.decoy)
        if tap is not None and tap.relays(channel):
            received, checks[channel] = tap.relay(
                channel, seq, records, check_mode, streams.check, threshold
            )
            delivered[channel] = received
            continue
        seq = transmit(seq, tap, channel, lab)
        checks[channel] = eavesdrop_check(records, seq, lab, check_mode, streams.check, threshold)
        delivered[channel] = strip_decoys(seq, records)
        records_by_channel[channel] = records

    if not all(c.passed for c in checks.values()):
        adversary = tap.view(None, cfg.locality, detected=True) if tap is not None else None
        return SessionReport(cfg, Verdict.ABORTED, [], checks, efficiency, None, rejected, adversary)

    if tap is not None:
        for channel, records in records_by_channel.items():
            tap.after_announcement(channel, [r.position for r in records])

    # Step 4.
    if dealer is None and cfg.locality is not Locality.CO_LOCATED:
        dealer = KeyDealer(streams.dealer, cfg.locality, count)
    keys = dealer.keys() if dealer is not None else {}
    alice = participant_round(
        Party.ALICE, ga, delivered[Channel.TO_ALICE], lab, cfg.measurement, cfg.locality, keys
    )
    bob = participant_round(
        Party.BOB, gb, delivered[Channel.TO_BOB], lab, cfg.measurement, cfg.locality, keys
    )
    ra = [p.r for p in alice]
    rb = [p.r for p in bob]
    if cfg.locality is Locality.REMOTE:
        announcement = Announcement(r_a=tuple(ra), r_b=tuple(rb))
        r_ab = [None] * count
    else:
        r_ab = joint_xor(ra, rb)
        announcement = Announcement(r_ab=tuple(r_ab))

    # Step 5.
    tp = tp_round(announcement, s_c, lab, cfg.measurement, cfg.locality, keys)

    groups = [
        GroupTranscript(
            index=i + 1,
            g_a=ga[i],
            g_b=gb[i],
            m_a=alice[i].m,
            m_b=bob[i].m,
            m_c1=tp.m_c1[i],
            m_c2=tp.m_c2[i],
            r_a=ra[i],
            r_b=rb[i],
            r_ab=r_ab[i],
            r=tp.r[i],
            keys={p: k[i] for p, k in keys.items()},
        )
        for i in range(count)
    ]
    adversary = tap.view(announcement, cfg.locality, detected=False) if tap is not None else None
    return SessionReport(cfg, tp.verdict, groups, checks, efficiency, announcement, rejected, adversary)
