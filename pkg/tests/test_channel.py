import numpy as np
import pytest

from qpc8.channel import (
    Channel,
    ChannelError,
    CheckMode,
    CheckResult,
    DecoyRecord,
    QuantumLab,
    eavesdrop_check,
    insert_decoys,
    strip_decoys,
    transmit,
)
from qpc8.qsim import CNOT, Basis, StateKind, make_state


def lab(seed=0):
    return QuantumLab(np.random.default_rng(seed))


def payload(lb, count):
    return lb.add(make_state(StateKind.EIGHT_QUBIT))[:count]


class MeasureEverything:
    """Test tap: Z-measures every particle and forwards it."""

    def __init__(self, lb):
        self.lab = lb
        self.session_id = lb.session_id

    def on_transit(self, channel, seq):
        for h in seq:
            self.lab.measure(h, Basis.Z)
        return seq


# ---------------------------------------------------------------- records


def test_decoy_record_basis_and_value():
    rec = DecoyRecord(3, StateKind.DECOY_MINUS)
    assert rec.basis is Basis.X and rec.value == 1
    assert DecoyRecord(0, StateKind.DECOY_ZERO).basis is Basis.Z
    with pytest.raises(ChannelError):
        DecoyRecord(0, StateKind.EIGHT_QUBIT)


def test_check_result_rates():
    assert CheckResult(0, 0).error_rate == 0.0
    assert CheckResult(0, 0).passed
    r = CheckResult(8, 2)
    assert r.error_rate == 0.25 and not r.passed
    assert CheckResult(8, 2, threshold=2).passed
    assert r.to_dict() == {"tested": 8, "mismatches": 2, "error_rate": 0.25, "pass": False}


# ----------------------------------------------------------- insert_decoys


def test_insert_decoys_lengths_and_order():
    lb = lab()
    p = payload(lb, 4)
    seq, records = insert_decoys(p, 2, lb, np.random.default_rng(1))
    assert len(seq) == 6 and len(records) == 2
    assert strip_decoys(seq, records) == p
    assert all(seq[r.position] not in p for r in records)


def test_insert_zero_decoys():
    lb = lab()
    p = payload(lb, 4)
    seq, records = insert_decoys(p, 0, lb, np.random.default_rng(1))
    assert seq == p and records == []


def test_insert_decoys_replay():
    def draw():
        lb = lab()
        _, records = insert_decoys(payload(lb, 6), 5, lb, np.random.default_rng(42))
        return records

    assert draw() == draw()


def test_insert_decoys_rejects_negative():
    lb = lab()
    with pytest.raises(ChannelError):
        insert_decoys(payload(lb, 2), -1, lb, np.random.default_rng())


def test_decoy_positions_and_kinds_uniform():
    rng = np.random.default_rng(7)
    pos_counts = np.zeros(6)
    kind_counts = {k: 0 for k in StateKind if k is not StateKind.EIGHT_QUBIT}
    trials = 4000
    for _ in range(trials):
        lb = lab()
        _, records = insert_decoys(payload(lb, 4), 2, lb, rng)
        for r in records:
            pos_counts[r.position] += 1
            kind_counts[r.prepared] += 1
    # Each of 6 slots holds a decoy with probability 2/6.
    np.testing.assert_allclose(pos_counts / trials, 1 / 3, atol=0.03)
    for count in kind_counts.values():
        assert abs(count / (2 * trials) - 0.25) < 0.02


# --------------------------------------------------------------- transmit


def test_transmit_without_tap_is_identity():
    lb = lab()
    seq, _ = insert_decoys(payload(lb, 4), 3, lb, np.random.default_rng(0))
    assert transmit(seq, None, Channel.TO_ALICE, lb) == seq


def test_transmit_rejects_foreign_tap():
    lb, other = lab(), lab()
    with pytest.raises(ChannelError):
        transmit(payload(lb, 2), MeasureEverything(other), Channel.TO_BOB, lb)


def test_transmit_rejects_length_change():
    lb = lab()

    class Dropper(MeasureEverything):
        def on_transit(self, channel, seq):
            return seq[1:]

    with pytest.raises(ChannelError):
        transmit(payload(lb, 2), Dropper(lb), Channel.TO_BOB, lb)


def test_measure_resend_fails_only_x_decoys():
    # Z-measuring each decoy in transit: Z decoys always survive, X decoys fail half the time.
    rng = np.random.default_rng(3)
    fails = {Basis.Z: 0, Basis.X: 0}
    totals = {Basis.Z: 0, Basis.X: 0}
    for _ in range(2000):
        lb = QuantumLab(rng)
        seq, records = insert_decoys(payload(lb, 4), 4, lb, rng)
        delivered = transmit(seq, MeasureEverything(lb), Channel.TO_ALICE, lb)
        for rec in records:
            single = eavesdrop_check([DecoyRecord(rec.position, rec.prepared)], delivered, lb)
            totals[rec.basis] += 1
            fails[rec.basis] += single.mismatches
    assert fails[Basis.Z] == 0
    assert abs(fails[Basis.X] / totals[Basis.X] - 0.5) < 0.03


# ---------------------------------------------------------- eavesdrop_check


@pytest.mark.parametrize("mode", list(CheckMode))
@pytest.mark.parametrize("l", [0, 1, 8, 32])
def test_no_tap_always_passes(mode, l):
    rng = np.random.default_rng(l)
    for _ in range(20):
        lb = QuantumLab(rng)
        seq, records = insert_decoys(payload(lb, 4), l, lb, rng)
        result = eavesdrop_check(records, transmit(seq, None, Channel.TO_BOB, lb), lb, mode, rng)
        assert result.mismatches == 0 and result.passed
        if mode is CheckMode.FULL:
            assert result.tested == l


def test_semi_mode_tests_about_three_quarters():
    # Reflected decoys (1/2) always count; measured ones count only when Z-prepared (1/2 * 1/2).
    rng = np.random.default_rng(9)
    tested = 0
    for _ in range(500):
        lb = QuantumLab(rng)
        seq, records = insert_decoys(payload(lb, 2), 16, lb, rng)
        tested += eavesdrop_check(records, seq, lb, CheckMode.SEMI, rng).tested
    assert abs(tested / (500 * 16) - 0.75) < 0.02


def test_semi_mode_needs_rng():
    lb = lab()
    seq, records = insert_decoys(payload(lb, 2), 2, lb, np.random.default_rng(0))
    with pytest.raises(ChannelError):
        eavesdrop_check(records, seq, lb, CheckMode.SEMI, None)


def test_check_position_mismatch():
    lb = lab()
    seq, _ = insert_decoys(payload(lb, 2), 0, lb, np.random.default_rng(0))
    with pytest.raises(ChannelError):
        eavesdrop_check([DecoyRecord(5, StateKind.DECOY_ZERO)], seq, lb)


# ------------------------------------------------------------- QuantumLab


def test_lab_merges_registers_for_joint_ops():
    lb = lab(0)
    a = lb.prepare(StateKind.DECOY_PLUS)
    b = lb.prepare(StateKind.DECOY_ZERO)
    lb.apply([a, b], CNOT)
    # Now a Bell pair: Z outcomes agree every time.
    assert lb.measure(a) == lb.measure(b)
    assert lb.state(b.register_id).num_qubits == 2


def test_lab_rejects_foreign_handle():
    lb, other = lab(), lab()
    h = other.prepare(StateKind.DECOY_ONE)
    with pytest.raises(ChannelError):
        lb.measure(h)


def test_lab_attach_returns_new_handles():
    lb = lab()
    h = lb.prepare(StateKind.DECOY_ONE)
    (new,) = lb.attach(h.register_id, make_state(StateKind.DECOY_ZERO))
    assert new.qubit == 2
    assert lb.measure(h) == 1 and lb.measure(new) == 0
