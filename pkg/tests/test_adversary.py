import numpy as np
import pytest

from qpc8.adversary import (
    AttackKind,
    AttackModel,
    FakeKind,
    detection_experiment,
    expected_detection,
)
from qpc8.channel import Channel, QuantumLab
from qpc8.protocol import Locality, Measurement, SessionConfig, Verdict, run_session
from qpc8.qsim import ProbeUnitary, QuantumError, StateKind, attach, fidelity, make_state, sample_z

ALICE_ONLY = {Channel.TO_ALICE}
X, Y = 0b1011_0010_0111, 0b0110_1110_0001


def attacked(model, x=X, y=Y, n=12, locality=Locality.CO_LOCATED, measurement="z", decoys=0, seed=5):
    return run_session(SessionConfig(n, x, y, locality, Measurement(measurement), decoys=decoys, seed=seed, attack=model))


# ------------------------------------------------------------------ models


def test_named_models():
    assert AttackModel.named("intercept-resend").kind is AttackKind.INTERCEPT_RESEND
    assert AttackModel.named("entangle-stealth").probe.is_stealth()
    assert not AttackModel.named("entangle-cnot").probe.is_stealth()
    assert AttackModel.named("mitm").blocked_by(Locality.REMOTE_AUTHENTICATED)
    assert not AttackModel.named("mitm").blocked_by(Locality.REMOTE)
    with pytest.raises(ValueError):
        AttackModel.named("teleport")


def test_model_validation():
    with pytest.raises(ValueError):
        AttackModel(AttackKind.ENTANGLE_MEASURE)
    with pytest.raises(ValueError):
        AttackModel(AttackKind.MEASURE_RESEND, channels=())
    with pytest.raises(QuantumError):
        AttackModel(AttackKind.ENTANGLE_MEASURE, probe=ProbeUnitary(np.ones((4, 4))))


def test_expected_detection():
    assert expected_detection(0) == 0
    assert expected_detection(8) == pytest.approx(0.8998870849609375)
    assert expected_detection(4, 0.5) == pytest.approx(0.9375)


# --------------------------------------------------------- intercept-resend


@pytest.mark.parametrize("measurement", ["z", "bell"])
def test_intercept_view_depends_only_on_xor(measurement):
    model = AttackModel.named("intercept-resend")
    mask = 0b0101_1100_0011
    a = attacked(model, measurement=measurement)
    b = attacked(model, X ^ mask, Y ^ mask, measurement=measurement)
    assert a.adversary.to_dict() == b.adversary.to_dict()
    assert a.tp_view() == b.tp_view()


def test_intercept_decrypts_only_the_xor():
    rep = attacked(AttackModel.named("intercept-resend"))
    view = rep.adversary
    assert view.decrypted_guess == [g.g_a ^ g.g_b for g in rep.groups]
    assert view.guess_a is None and view.guess_b is None
    assert not view.detected


def test_intercept_detection_at_l8():
    res = detection_experiment(AttackModel.named("intercept-resend", ALICE_ONLY), 8, 3000, seed=1)
    assert abs(res.rate - expected_detection(8)) <= 0.025
    assert abs(res.per_decoy_rate - 0.25) <= 0.02


def test_random_fakes_fail_more_often():
    # Independent random Z fakes fail X decoys with 1/2 and Z decoys with 1/2.
    model = AttackModel(AttackKind.INTERCEPT_RESEND, ALICE_ONLY, fakes=FakeKind.RANDOM_Z)
    res = detection_experiment(model, 4, 3000, seed=2)
    assert abs(res.per_decoy_rate - 0.5) <= 0.03
    assert abs(res.rate - expected_detection(4, 0.5)) <= 0.025


def test_aborted_session_marks_detection():
    rep = attacked(AttackModel.named("intercept-resend"), decoys=16, seed=0)
    assert rep.verdict is Verdict.ABORTED
    assert rep.groups == [] and rep.adversary.detected
    assert rep.adversary.decrypted_guess is None


def test_remote_guess_at_chance():
    model = AttackModel.named("intercept-resend")
    rng = np.random.default_rng(3)
    hits = total = 0
    for seed in range(150):
        x, y = (int(v) for v in rng.integers(0, 1 << 63, size=2))
        rep = attacked(model, x, y, n=64, locality=Locality.REMOTE, seed=seed)
        hits += sum(guess == g.g_a for guess, g in zip(rep.adversary.guess_a, rep.groups))
        total += len(rep.groups)
    assert abs(hits / total - 0.25) <= 0.02


# ----------------------------------------------------------- measure-resend


def test_measure_resend_rates():
    res = detection_experiment(AttackModel.named("measure-resend", ALICE_ONLY), 16, 2000, seed=4)
    assert abs(res.per_decoy_rate - 0.25) <= 0.02
    assert abs(res.rate - expected_detection(16)) <= 0.02


def test_measure_resend_keeps_payload_correlation():
    rep = attacked(AttackModel.named("measure-resend"), X, X)
    assert rep.verdict is Verdict.EQUAL
    for g in rep.groups:
        assert g.m_c1 ^ g.m_c2 == g.m_a ^ g.m_b


# -------------------------------------------------------- entangle-measure


def test_stealth_probe_never_detected():
    res = detection_experiment(AttackModel.named("entangle-stealth"), 32, 100, seed=5)
    assert res.decoys_tested == 100 * 64
    assert res.detected == 0 and res.decoy_mismatches == 0


def test_stealth_tap_leaves_product_state():
    probe = ProbeUnitary.stealth(0.9)
    lab = QuantumLab(np.random.default_rng(0))
    handles = lab.add(make_state(StateKind.EIGHT_QUBIT))
    tap = AttackModel(AttackKind.ENTANGLE_MEASURE, ALICE_ONLY, probe).bind(lab, np.random.default_rng(1), "z")
    tap.on_transit(Channel.TO_ALICE, handles[2:4])
    target = attach(attach(make_state(StateKind.EIGHT_QUBIT), probe.eps(0, 0)), probe.eps(0, 0))
    assert fidelity(lab.state(handles[0].register_id), target) == pytest.approx(1.0, abs=1e-10)


def test_stealth_ancillas_carry_no_information():
    model = AttackModel.named("entangle-stealth", ALICE_ONLY)
    hits = total = 0
    for seed in range(120):
        rep = attacked(model, n=64, x=seed, y=seed, seed=seed)
        hits += sum(c == g.m_a for c, g in zip(rep.adversary.captured_a, rep.groups))
        total += len(rep.groups)
    assert abs(hits / total - 0.25) <= 0.02


def test_cnot_probe_per_decoy_quarter():
    res = detection_experiment(AttackModel.named("entangle-cnot", ALICE_ONLY), 16, 800, seed=6)
    assert abs(res.per_decoy_rate - 0.25) <= 0.02


@pytest.mark.parametrize("flip, spread", [(0.6, 0.0), (0.0, 0.6), (0.4, 1.2)])
def test_non_stealth_probes_detected(flip, spread):
    probe = ProbeUnitary.family(flip, spread)
    assert not probe.is_stealth()
    res = detection_experiment(AttackModel(AttackKind.ENTANGLE_MEASURE, ALICE_ONLY, probe), 32, 200, seed=7)
    assert res.rate > 0


# ---------------------------------------------------------------------- MITM


def test_mitm_colocated_recovers_outcomes_not_inputs():
    model = AttackModel.named("mitm")
    a = attacked(model, decoys=8)
    b = attacked(model, X ^ 0xABC, Y ^ 0xABC, decoys=8)
    assert a.verdict is not Verdict.ABORTED
    assert a.adversary.captured_a == [g.m_a for g in a.groups]
    assert a.adversary.captured_b == [g.m_b for g in a.groups]
    assert a.adversary.to_dict() == b.adversary.to_dict()


def test_mitm_remote_guess_at_chance():
    model = AttackModel.named("mitm")
    rng = np.random.default_rng(8)
    hits = total = 0
    for seed in range(150):
        x, y = (int(v) for v in rng.integers(0, 1 << 63, size=2))
        rep = attacked(model, x, y, n=64, locality=Locality.REMOTE, seed=seed)
        hits += sum(guess == g.g_b for guess, g in zip(rep.adversary.guess_b, rep.groups))
        total += len(rep.groups)
    assert abs(hits / total - 0.25) <= 0.02


def test_mitm_rejected_under_authentication():
    rep = attacked(AttackModel.named("mitm"), locality=Locality.REMOTE_AUTHENTICATED, decoys=8)
    assert rep.attack_rejected and rep.adversary is None
    assert [g.r for g in rep.groups] == [g.g_a ^ g.g_b for g in rep.groups]
    assert rep.verdict is Verdict.NOT_EQUAL


# --------------------------------------------------------------- experiments


@pytest.mark.parametrize("name", ["intercept-resend", "measure-resend", "entangle-cnot", "mitm"])
def test_zero_decoys_never_detected(name):
    assert detection_experiment(AttackModel.named(name), 0, 50).rate == 0


def test_experiment_independent_of_workers():
    model = AttackModel.named("intercept-resend", ALICE_ONLY)
    serial = detection_experiment(model, 4, 60, seed=9)
    parallel = detection_experiment(model, 4, 60, seed=9, workers=3)
    assert serial == parallel


def test_experiment_rejects_no_trials():
    with pytest.raises(ValueError):
        detection_experiment(AttackModel.named("mitm"), 4, 0)


def test_participant_outcomes_flat():
    # A curious participant's own outcomes carry no information: each qubit is a fair coin.
    idx = sample_z(make_state(StateKind.EIGHT_QUBIT), 100_000, np.random.default_rng(10))
    for q in range(8):
        ones = ((idx >> (7 - q)) & 1).mean()
        assert abs(ones - 0.5) < 0.01
