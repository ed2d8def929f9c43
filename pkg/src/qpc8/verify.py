"""Self-checks of the carrier state and the protocol's algebra.

Each suite returns a :class:`SuiteResult` with a pass flag and the measured
quantities behind it, so the CLI can print one report line per suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .protocol import ALL_PAIRS, BitPair
from .qsim import (
    BELL_VECTORS,
    PureState,
    StateKind,
    _to_front,
    make_state,
    measure_bell,
    reduced_single,
    sample_z,
)

SUITES = ("state", "truth-table", "marginals", "bell-pairing", "eq18")

# The sixteen kets of the carrier, as printed.
CARRIER_KETS = (
    "00000000", "00010001", "00100010", "00110011",
    "01000100", "01010101", "01100110", "01110111",
    "10001000", "10011001", "10101010", "10111011",
    "11001100", "11011101", "11101110", "11111111",
)

# Rows of the published truth table: M_a, M_b, M_c1, M_c2, M_a^M_b, M_c1^M_c2.
TRUTH_TABLE = (
    ("00", "00", "00", "00", "00", "00"),
    ("00", "01", "00", "01", "01", "01"),
    ("00", "10", "00", "10", "10", "10"),
    ("00", "11", "00", "11", "11", "11"),
    ("01", "00", "01", "00", "01", "01"),
    ("01", "01", "01", "01", "00", "00"),
    ("01", "10", "01", "10", "11", "11"),
    ("01", "11", "01", "11", "10", "10"),
    ("10", "00", "10", "00", "10", "10"),
    ("10", "01", "10", "01", "11", "11"),
    ("10", "10", "10", "10", "00", "00"),
    ("10", "11", "10", "11", "01", "01"),
    ("11", "00", "11", "00", "11", "11"),
    ("11", "01", "11", "01", "10", "10"),
    ("11", "10", "11", "10", "01", "01"),
    ("11", "11", "11", "11", "00", "00"),
)

# Bell-measurement pairs used by the protocol: (Alice, TP) and (Bob, TP).
PROTOCOL_BELL_PAIRS = (((3, 4), (7, 8)), ((5, 6), (1, 2)))
# Pairing implied by the printed Bell-basis rewriting of the carrier.
PRINTED_BELL_PAIRS = (((1, 2), (3, 4)), ((5, 6), (7, 8)))


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    metrics: dict = field(default_factory=dict)


def truth_table_rows() -> list[tuple[str, ...]]:
    """Enumerate all (M_a, M_b) and fill the table columns.

    Following the published layout, ``M_c1`` repeats ``M_a`` and ``M_c2``
    repeats ``M_b``.  (A physical run has ``M_c1 = M_b`` and ``M_c2 = M_a``;
    the XOR columns are the same either way.)
    """
    rows = []
    for ma, mb in itertools.product(ALL_PAIRS, repeat=2):
        mc1, mc2 = ma, mb
        rows.append(tuple(str(v) for v in (ma, mb, mc1, mc2, ma ^ mb, mc1 ^ mc2)))
    return rows


def eq18_holds(bits: str) -> bool:
    """``m1m2 ^ m7m8 == m3m4 ^ m5m6`` for an 8-character outcome string."""
    m = [BitPair(int(bits[i]), int(bits[i + 1])) for i in range(0, 8, 2)]
    return (m[0] ^ m[3]) == (m[1] ^ m[2])


def bell_correlation(state: PureState, first: tuple[int, int], second: tuple[int, int]) -> float:
    """Exact probability that Bell measurements on two disjoint pairs give equal labels."""
    qubits = [*first, *second]
    mat = _to_front(state.amplitudes, state.num_qubits, qubits).reshape(4, 4, -1)
    total = 0.0
    for v in BELL_VECTORS:
        amp = np.einsum("i,j,ijk->k", v.conj(), v.conj(), mat)
        total += float(np.vdot(amp, amp).real)
    return total


def correlated_bell_pairings(state: PureState, tol: float = 1e-12) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Brute force over all disjoint pair-of-pairs with perfectly agreeing Bell labels.

    Pairs are unordered within the protocol's convention (lower index first)
    and each pair-of-pairs is listed once.
    """
    pairs = list(itertools.combinations(range(1, state.num_qubits + 1), 2))
    found = []
    for a, b in itertools.combinations(pairs, 2):
        if set(a) & set(b):
            continue
        if abs(bell_correlation(state, a, b) - 1.0) <= tol:
            found.append((a, b))
    return found


def check_state() -> SuiteResult:
    psi = make_state(StateKind.EIGHT_QUBIT)
    support = psi.support()
    max_dev = max(abs(psi.amplitude(k) - 0.25) for k in CARRIER_KETS)
    mirrored = all(k[:4] == k[4:] for k in support)
    passed = tuple(support) == CARRIER_KETS and max_dev <= 1e-15 and mirrored
    return SuiteResult(
        "state",
        passed,
        {"nonzero": len(support), "max_amplitude_deviation": max_dev, "mirrored": mirrored},
    )


def check_truth_table() -> SuiteResult:
    rows = truth_table_rows()
    matches = sum(r == t for r, t in zip(rows, TRUTH_TABLE))
    return SuiteResult("truth-table", matches == 16 and len(rows) == 16, {"rows_matched": matches})


def check_marginals() -> SuiteResult:
    psi = make_state(StateKind.EIGHT_QUBIT)
    half_identity = np.eye(2) / 2
    devs = [float(np.max(np.abs(reduced_single(psi, k) - half_identity))) for k in range(1, 9)]
    return SuiteResult("marginals", max(devs) <= 1e-12, {"max_deviation": max(devs)})


def check_bell_pairing(trials: int = 10_000, seed: int = 0) -> SuiteResult:
    psi = make_state(StateKind.EIGHT_QUBIT)
    correlated = correlated_bell_pairings(psi)
    protocol_ok = all(tuple(sorted(p)) in correlated for p in PROTOCOL_BELL_PAIRS)
    printed = [bell_correlation(psi, *p) for p in PRINTED_BELL_PAIRS]
    rng = np.random.default_rng(seed)
    agree = 0
    for _ in range(trials):
        ok = True
        state = psi
        for mine, partner in PROTOCOL_BELL_PAIRS:
            la, state = measure_bell(state, *mine, rng)
            lb, state = measure_bell(state, *partner, rng)
            ok &= la == lb
        agree += ok
    return SuiteResult(
        "bell-pairing",
        protocol_ok and agree == trials,
        {
            "protocol_pairs": [[list(a), list(b)] for a, b in PROTOCOL_BELL_PAIRS],
            "correlated_pairings": len(correlated),
            "printed_pairing_agreement": [round(p, 12) for p in printed],
            "trials": trials,
            "agreement_rate": agree / trials,
        },
    )


def check_eq18(samples: int = 100_000, seed: int = 0) -> SuiteResult:
    psi = make_state(StateKind.EIGHT_QUBIT)
    rng = np.random.default_rng(seed)
    idx = sample_z(psi, samples, rng)
    counts = np.bincount(idx, minlength=256)
    seen = np.flatnonzero(counts)
    violations = int(sum(counts[i] for i in seen if not eq18_holds(format(int(i), "08b"))))
    max_dev = float(np.max(np.abs(counts[seen] / samples - 1 / 16)))
    passed = violations == 0 and seen.size == 16 and max_dev < 0.015
    return SuiteResult(
        "eq18",
        passed,
        {
            "samples": samples,
            "distinct_outcomes": int(seen.size),
            "violations": violations,
            "max_frequency_deviation": max_dev,
        },
    )


def run_suite(name: str, seed: int = 0) -> SuiteResult:
    if name == "state":
        return check_state()
    if name == "truth-table":
        return check_truth_table()
    if name == "marginals":
        return check_marginals()
    if name == "bell-pairing":
        return check_bell_pairing(seed=seed)
    if name == "eq18":
        return check_eq18(seed=seed)
    raise ValueError(f"unknown suite {name!r}")
