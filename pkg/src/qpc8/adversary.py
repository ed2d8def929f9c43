"""Channel attacks and the Monte Carlo detection laboratory.

Each :class:`AttackModel` binds to a session as a tap.  A tap only ever
sees particle handles in transmission order, so it cannot single out
decoys until TP announces their positions after the check.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

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
)
from .protocol import (
    DEFAULT_DECOYS,
    Announcement,
    BitPair,
    Locality,
    Measurement,
    Quantumness,
    SessionConfig,
    Verdict,
    measure_pair,
    run_session,
    xor_all,
)
from .qsim import CNOT, Basis, ProbeUnitary, StateKind, make_state

BOTH_CHANNELS = frozenset(Channel)


class AttackKind(str, enum.Enum):
    INTERCEPT_RESEND = "intercept-resend"
    MEASURE_RESEND = "measure-resend"
    ENTANGLE_MEASURE = "entangle-measure"
    MAN_IN_MIDDLE = "mitm"


class FakeKind(str, enum.Enum):
    # Fresh qubit CNOT-copied from the captured one in the Z basis.
    Z_COPY = "z-copy"
    # Fresh uniformly random Z eigenstate, independent of the capture.
    RANDOM_Z = "random-z"


@dataclass(frozen=True)
class AttackModel:
    kind: AttackKind
    channels: frozenset = BOTH_CHANNELS
    probe: ProbeUnitary | None = None
    fakes: FakeKind = FakeKind.Z_COPY

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "fakes", FakeKind(self.fakes))
        object.__setattr__(self, "channels", frozenset(Channel(c) for c in self.channels))
        if not self.channels:
            raise ValueError("attack must target at least one channel")
        if self.kind is AttackKind.ENTANGLE_MEASURE and self.probe is None:
            raise ValueError("entangle-measure attack needs a probe")

    @classmethod
    def named(cls, name: str, channels=BOTH_CHANNELS) -> "AttackModel":
        """Build one of the CLI's model names."""
        if name == "entangle-stealth":
            return cls(AttackKind.ENTANGLE_MEASURE, channels, ProbeUnitary.stealth())
        if name == "entangle-cnot":
            return cls(AttackKind.ENTANGLE_MEASURE, channels, ProbeUnitary.cnot())
        return cls(AttackKind(name), channels)

    def blocked_by(self, locality: Locality) -> bool:
        """Authenticated classical/quantum links shut out impersonation outright."""
        return self.kind is AttackKind.MAN_IN_MIDDLE and Locality(locality) is Locality.REMOTE_AUTHENTICATED

    def bind(self, lab: QuantumLab, rng: np.random.Generator, measurement: Measurement) -> "_Tap":
        cls = {
            AttackKind.INTERCEPT_RESEND: InterceptResendTap,
            AttackKind.MEASURE_RESEND: MeasureResendTap,
            AttackKind.ENTANGLE_MEASURE: EntangleMeasureTap,
            AttackKind.MAN_IN_MIDDLE: ManInMiddleTap,
        }[self.kind]
        return cls(self, lab, rng, Measurement(measurement))


@dataclass
class AdversaryView:
    """What the eavesdropper holds at the end of a session.

    ``decrypted_guess`` is the XOR-level estimate ``R ^ M_a ^ M_b`` and is
    only defined when both channels were tapped.  ``guess_a``/``guess_b``
    are single-party estimates, available only in remote mode where each
    party announces individually.
    """

    model: str
    captured_a: list[BitPair] | None
    captured_b: list[BitPair] | None
    public: dict | None
    decrypted_guess: list[BitPair] | None
    guess_a: list[BitPair] | None
    guess_b: list[BitPair] | None
    detected: bool

    def to_dict(self) -> dict:
        def pairs(v):
            return None if v is None else [str(p) for p in v]

        return {
            "model": self.model,
            "captured_a": pairs(self.captured_a),
            "captured_b": pairs(self.captured_b),
            "public": self.public,
            "decrypted_guess": pairs(self.decrypted_guess),
            "guess_a": pairs(self.guess_a),
            "guess_b": pairs(self.guess_b),
            "detected": self.detected,
        }


class _Tap:
    def __init__(self, model: AttackModel, lab: QuantumLab, rng: np.random.Generator, measurement: Measurement):
        self.model = model
        self.lab = lab
        self.session_id = lab.session_id
        self.rng = rng
        self.measurement = measurement
        self.captured: dict[Channel, list[BitPair]] = {}

    def targets(self, channel: Channel) -> bool:
        return channel in self.model.channels

    def relays(self, channel: Channel) -> bool:
        return False

    def on_transit(self, channel: Channel, seq: list[ParticleHandle]) -> list[ParticleHandle]:
        if not self.targets(channel):
            return seq
        return self._transit(channel, seq)

    def _transit(self, channel: Channel, seq: list[ParticleHandle]) -> list[ParticleHandle]:
        raise NotImplementedError

    def after_announcement(self, channel: Channel, decoy_positions: list[int]) -> None:
        pass

    def _pairs(self, handles: list[ParticleHandle]) -> list[BitPair]:
        return [
            measure_pair(self.lab, handles[i], handles[i + 1], self.measurement)
            for i in range(0, len(handles), 2)
        ]

    def view(self, announcement: Announcement | None, locality: Locality, detected: bool) -> AdversaryView:
        ca = self.captured.get(Channel.TO_ALICE)
        cb = self.captured.get(Channel.TO_BOB)
        decrypted = guess_a = guess_b = None
        public = None
        if announcement is not None:
            public = announcement.to_dict()
            if announcement.r_ab is not None:
                if ca is not None and cb is not None:
                    decrypted = [xor_all(r, a, b) for r, a, b in zip(announcement.r_ab, ca, cb)]
            else:
                if ca is not None and cb is not None:
                    decrypted = [
                        xor_all(ra, rb, a, b)
                        for ra, rb, a, b in zip(announcement.r_a, announcement.r_b, ca, cb)
                    ]
                if ca is not None:
                    guess_a = [r ^ a for r, a in zip(announcement.r_a, ca)]
                if cb is not None:
                    guess_b = [r ^ b for r, b in zip(announcement.r_b, cb)]
        return AdversaryView(
            self.model.kind.value if self.model.probe is None else _probe_name(self.model.probe),
            ca,
            cb,
            public,
            decrypted,
            guess_a,
            guess_b,
            detected,
        )


def _probe_name(probe: ProbeUnitary) -> str:
    return "entangle-stealth" if probe.is_stealth() else "entangle-measure"


class InterceptResendTap(_Tap):
    """Capture every particle, forward a fake, measure the captures later."""

    def __init__(self, *args):
        super().__init__(*args)
        self.retained: dict[Channel, list[ParticleHandle]] = {}

    def _transit(self, channel, seq):
        fakes = []
        for h in seq:
            if self.model.fakes is FakeKind.Z_COPY:
                fake = self.lab.attach(h.register_id, make_state(StateKind.DECOY_ZERO))[0]
                self.lab.apply([h, fake], CNOT, checked=False)
            else:
                kind = StateKind.DECOY_ONE if self.rng.integers(0, 2) else StateKind.DECOY_ZERO
                fake = self.lab.prepare(kind)
            fakes.append(fake)
        self.retained[channel] = seq
        return fakes

    def after_announcement(self, channel, decoy_positions):
        if channel not in self.retained:
            return
        drop = set(decoy_positions)
        payload = [h for i, h in enumerate(self.retained[channel]) if i not in drop]
        self.captured[channel] = self._pairs(payload)


class MeasureResendTap(_Tap):
    """Z-measure every particle in flight and forward the observed eigenstate."""

    def __init__(self, *args):
        super().__init__(*args)
        self.outcomes: dict[Channel, list[int]] = {}

    def _transit(self, channel, seq):
        # After a Z measurement the particle is exactly |bit>, so forwarding
        # it is the same as re-preparing |bit>.
        self.outcomes[channel] = [self.lab.measure(h, Basis.Z) for h in seq]
        return seq

    def after_announcement(self, channel, decoy_positions):
        if channel not in self.outcomes:
            return
        drop = set(decoy_positions)
        bits = [b for i, b in enumerate(self.outcomes[channel]) if i not in drop]
        self.captured[channel] = [BitPair(bits[i], bits[i + 1]) for i in range(0, len(bits), 2)]


class EntangleMeasureTap(_Tap):
    """Couple a fresh ancilla to every particle with the probe unitary."""

    def __init__(self, *args):
        super().__init__(*args)
        self.ancillas: dict[Channel, list[ParticleHandle]] = {}

    def _transit(self, channel, seq):
        ancillas = []
        u = self.model.probe.matrix
        for h in seq:
            anc = self.lab.attach(h.register_id, make_state(StateKind.DECOY_ZERO))[0]
            self.lab.apply([h, anc], u, checked=False)
            ancillas.append(anc)
        self.ancillas[channel] = ancillas
        return seq

    def after_announcement(self, channel, decoy_positions):
        if channel not in self.ancillas:
            return
        drop = set(decoy_positions)
        anc = [h for i, h in enumerate(self.ancillas[channel]) if i not in drop]
        bits = [self.lab.measure(h, Basis.Z) for h in anc]
        self.captured[channel] = [BitPair(bits[i], bits[i + 1]) for i in range(0, len(bits), 2)]


class ManInMiddleTap(_Tap):
    """Pose as the receiver toward TP and as TP toward the receiver.

    The real sequence is checked honestly with TP and its payload measured;
    the receiver gets shares of freshly prepared carriers plus the
    adversary's own decoys.  Keeping the partner qubits of every forged
    share tells the adversary exactly what the receiver will measure.
    """

    _SHARE = {Channel.TO_ALICE: (2, 3), Channel.TO_BOB: (4, 5)}
    # Partner pair whose outcome equals the share's outcome in either basis.
    _PARTNER = {Channel.TO_ALICE: (6, 7), Channel.TO_BOB: (0, 1)}

    def __init__(self, *args):
        super().__init__(*args)
        self.real: dict[Channel, list[BitPair]] = {}
        self.receiver_checks: dict[Channel, CheckResult] = {}

    def relays(self, channel):
        return self.targets(channel)

    def relay(
        self,
        channel: Channel,
        seq: list[ParticleHandle],
        records,
        mode: CheckMode,
        check_rng: np.random.Generator,
        threshold: int = 0,
    ) -> tuple[list[ParticleHandle], CheckResult]:
        tp_check = eavesdrop_check(records, seq, self.lab, mode, check_rng, threshold)
        self.real[channel] = self._pairs(strip_decoys(seq, records))

        share, partner = self._SHARE[channel], self._PARTNER[channel]
        forged: list[ParticleHandle] = []
        claimed: list[BitPair] = []
        for _ in range(len(self.real[channel])):
            h = self.lab.add(make_state(StateKind.EIGHT_QUBIT))
            forged += [h[share[0]], h[share[1]]]
            claimed.append(measure_pair(self.lab, h[partner[0]], h[partner[1]], self.measurement))
        self.captured[channel] = claimed

        fake_seq, fake_records = insert_decoys(forged, len(records), self.lab, self.rng)
        self.receiver_checks[channel] = eavesdrop_check(
            fake_records, fake_seq, self.lab, mode, self.rng, threshold
        )
        return strip_decoys(fake_seq, fake_records), tp_check


# ----------------------------------------------------------- experiments


def expected_detection(l: int, per_decoy_pass: float = 0.75) -> float:
    """Session detection probability when each decoy independently passes with ``per_decoy_pass``."""
    return 1.0 - per_decoy_pass**l


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DetectionResult:
    model: str
    decoys: int
    trials: int
    detected: int
    decoys_tested: int
    decoy_mismatches: int

    @property
    def rate(self) -> float:
        return self.detected / self.trials

    @property
    def half_width(self) -> float:
        """95% normal-approximation half-width of ``rate``."""
        p = self.rate
        return 1.96 * math.sqrt(p * (1 - p) / self.trials)

    @property
    def per_decoy_rate(self) -> float:
        """Mismatch fraction over decoys on the tapped channels."""
        return self.decoy_mismatches / self.decoys_tested if self.decoys_tested else 0.0


@dataclass(frozen=True)
class _Batch:
    model: AttackModel
    decoys: int
    seed: int
    start: int
    stop: int
    n: int
    locality: Locality
    measurement: Measurement
    quantumness: Quantumness


def _run_batch(batch: _Batch) -> tuple[int, int, int]:
    detected = tested = mismatches = 0
    for t in range(batch.start, batch.stop):
        report = run_session(
            SessionConfig(
                batch.n,
                0,
                0,
                batch.locality,
                batch.measurement,
                batch.quantumness,
                batch.decoys,
                trial_seed(batch.seed, t),
                batch.model,
            )
        )
        detected += report.verdict is Verdict.ABORTED
        for channel, c in report.checks.items():
            if channel not in batch.model.channels:
                continue
            tested += c.tested
            mismatches += c.mismatches
    return detected, tested, mismatches


def detection_experiment(
    model: AttackModel,
    l: int = DEFAULT_DECOYS,
    trials: int = 1000,
    seed: int = 0,
    *,
    n: int = 2,
    locality: Locality = Locality.CO_LOCATED,
    measurement: Measurement = Measurement.SINGLE_PARTICLE,
    quantumness: Quantumness = Quantumness.FULL,
    workers: int = 1,
) -> DetectionResult:
    """Fraction of ``trials`` independent tapped sessions that abort.

    Trial ``t`` runs with seed ``trial_seed(seed, t)``, so results do not
    depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if workers > 1:
        step = math.ceil(trials / workers)
        batches = [
            _Batch(model, l, seed, s, min(s + step, trials), n, locality, measurement, quantumness)
            for s in range(0, trials, step)
        ]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_batch, batches))
    else:
        parts = [_run_batch(_Batch(model, l, seed, 0, trials, n, locality, measurement, quantumness))]
    detected, tested, mismatches = (sum(col) for col in zip(*parts))
    name = model.kind.value if model.probe is None else _probe_name(model.probe)
    return DetectionResult(name, l, trials, detected, tested, mismatches)


__all__ = [
    "AdversaryView",
    "AttackKind",
    "AttackModel",
    "DetectionResult",
    "EntangleMeasureTap",
    "FakeKind",
    "InterceptResendTap",
    "ManInMiddleTap",
    "MeasureResendTap",
    "detection_experiment",
    "expected_detection",
    "trial_seed",
]
