"""Command-line front end.

Three commands, each writing newline-delimited JSON::

    qpc run --n 32 --x a1b2c3d4 --y a1b2c3d4 --mode colocated --seed 42
    qpc attack --model intercept-resend --decoys 8 --trials 20000 --seed 7
    qpc verify --suite all

Secrets are hexadecimal integers of width ``--n`` bits; bit ``j`` of the
secret (weight ``2^(j-1)``) is the ``j``-th protocol bit, so ``--x 1
--n 3`` means ``x1=1, x2=0, x3=0``.

Exit codes: 0 clean, 1 internal error, 2 protocol aborted, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import IO, Sequence

from .adversary import AttackModel, detection_experiment, expected_detection
from .channel import Channel
from .protocol import (
    DEFAULT_DECOYS,
    Locality,
    Measurement,
    Quantumness,
    SessionConfig,
    Verdict,
    run_session,
)
from .verify import SUITES, run_suite

DEFAULT_SEED = 20210
SEED_ENV = "QPC_SEED"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ABORTED = 2
EXIT_USAGE = 64

MODELS = ("intercept-resend", "measure-resend", "entangle-stealth", "entangle-cnot", "mitm")
CHANNEL_CHOICES = {
    "alice": frozenset({Channel.TO_ALICE}),
    "bob": frozenset({Channel.TO_BOB}),
    "both": frozenset(Channel),
}
# Per-decoy pass probability behind each model's reference detection curve.
_PER_DECOY_PASS = {
    "intercept-resend": 0.75,
    "measure-resend": 0.75,
    "entangle-cnot": 0.75,
    "entangle-stealth": 1.0,
    "mitm": 1.0,
}
PRECISION = 6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


@dataclass
class RunPlan:
    command: str
    seed: int
    params: dict = field(default_factory=dict)
    out: str | None = None
    timing: bool = False


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--config", help="JSON file of defaults; flags win")
        p.add_argument("--timing", action="store_true", help="add wall_time_ms (breaks byte-identical replay)")

    def session_flags(p):
        p.add_argument("--mode", choices=[m.value for m in Locality])
        p.add_argument("--measure", choices=[m.value for m in Measurement])
        p.add_argument("--quantumness", choices=[q.value for q in Quantumness])
        p.add_argument("--decoys", type=int)
        p.add_argument("--channels", choices=sorted(CHANNEL_CHOICES))

    run = sub.add_parser("run", help="run one comparison session")
    run.add_argument("--n", type=int)
    run.add_argument("--x")
    run.add_argument("--y")
    run.add_argument("--model", choices=MODELS)
    session_flags(run)
    common(run)

    attack = sub.add_parser("attack", help="estimate detection rate of an attack")
    attack.add_argument("--model", choices=MODELS)
    attack.add_argument("--trials", type=int)
    attack.add_argument("--sweep", help="comma-separated decoy counts for extra lines")
    attack.add_argument("--n", type=int)
    session_flags(attack)
    common(attack)

    verify = sub.add_parser("verify", help="run state and algebra self-checks")
    verify.add_argument("--suite", help="one of %s, 'all', or a comma list" % ", ".join(SUITES))
    common(verify)
    return parser


_DEFAULTS = {
    "run": {
        "mode": "colocated", "measure": "z", "quantumness": "full",
        "decoys": DEFAULT_DECOYS, "model": None, "channels": "both",
    },
    "attack": {
        "mode": "colocated", "measure": "z", "quantumness": "full", "decoys": DEFAULT_DECOYS,
        "trials": 1000, "sweep": None, "n": 2, "channels": "alice", "model": None,
    },
    "verify": {"suite": "all"},
}


def _parse_hex(name: str, text: str, n: int) -> int:
    try:
        value = int(text, 16)
    except (TypeError, ValueError):
        raise UsageError(f"--{name} must be hexadecimal, got {text!r}") from None
    if value >= 1 << n:
        raise UsageError(f"--{name} {text} does not fit in --n {n} bits")
    return value


def _resolve_seed(flag: int | None, file_value) -> int:
    if flag is not None:
        seed = flag
    elif file_value is not None:
        seed = file_value
    elif os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
    else:
        seed = DEFAULT_SEED
    if not isinstance(seed, int) or not 0 <= seed < 1 << 64:
        raise UsageError("seed must be an integer in [0, 2^64)")
    return seed


def parse_plan(argv: Sequence[str], config: dict | None = None) -> RunPlan:
    """Turn arguments (plus optional config-file defaults) into a plan."""
    args = _build_parser().parse_args(list(argv))
    if args.command is None:
        raise UsageError("a command is required: run, attack or verify")
    if config is None and args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    config = dict(config or {})

    params = dict(_DEFAULTS[args.command])
    for key in list(params) + ["n", "x", "y"]:
        if key in config:
            params[key] = config[key]
        flag = getattr(args, key, None)
        if flag is not None:
            params[key] = flag
    seed = _resolve_seed(args.seed, config.get("seed"))

    if args.command == "run":
        for key in ("n", "x", "y"):
            if params.get(key) is None:
                raise UsageError(f"run needs --{key}")
        n = params["n"]
        if not isinstance(n, int) or n < 1:
            raise UsageError("--n must be a positive integer")
        params["x"] = _parse_hex("x", str(params["x"]), n)
        params["y"] = _parse_hex("y", str(params["y"]), n)
    if args.command in ("run", "attack"):
        if params["decoys"] < 0:
            raise UsageError("--decoys must be non-negative")
        for key, enum_type in (("mode", Locality), ("measure", Measurement), ("quantumness", Quantumness)):
            try:
                enum_type(params[key])
            except ValueError:
                raise UsageError(f"invalid --{key} {params[key]!r}") from None
        if params["channels"] not in CHANNEL_CHOICES:
            raise UsageError(f"invalid --channels {params['channels']!r}")
    if args.command == "attack":
        if params.get("model") is None:
            raise UsageError("attack needs --model")
        if params["trials"] < 1:
            raise UsageError("--trials must be at least 1")
        if params["n"] < 1:
            raise UsageError("--n must be a positive integer")
        if params["sweep"]:
            try:
                params["sweep"] = [int(v) for v in str(params["sweep"]).split(",") if v.strip()]
            except ValueError:
                raise UsageError("--sweep must be a comma list of integers") from None
            if any(v < 0 for v in params["sweep"]):
                raise UsageError("--sweep values must be non-negative")
        else:
            params["sweep"] = []
    if args.command == "verify":
        suite = str(params["suite"])
        names = list(SUITES) if suite == "all" else [s.strip() for s in suite.split(",") if s.strip()]
        unknown = [s for s in names if s not in SUITES]
        if unknown:
            raise UsageError(f"unknown suite(s): {', '.join(unknown)}")
        params["suite"] = names
    return RunPlan(args.command, seed, params, args.out or config.get("out"), args.timing)


def _round(value):
    return round(value, PRECISION) if isinstance(value, float) else value


def _run_line(plan: RunPlan) -> dict:
    p = plan.params
    attack = None
    if p["model"]:
        attack = AttackModel.named(p["model"], CHANNEL_CHOICES[p["channels"]])
    cfg = SessionConfig(
        p["n"], p["x"], p["y"], p["mode"], p["measure"], p["quantumness"], p["decoys"], plan.seed, attack
    )
    report = run_session(cfg)
    line = {
        "command": "run",
        "seed": plan.seed,
        "n": cfg.n,
        "mode": cfg.locality.value,
        "measure": cfg.measurement.value,
        "quantumness": cfg.quantumness.value,
        "decoys": cfg.decoys,
        "model": p["model"],
        "channels": p["channels"] if p["model"] else None,
        "verdict": report.verdict.value,
        "attack_rejected": report.attack_rejected,
        "checks": {c.value: r.to_dict() for c, r in report.checks.items()},
        "groups": [g.to_dict() for g in report.groups],
        "adversary": None if report.adversary is None else report.adversary.to_dict(),
        "qubit_efficiency": report.qubit_efficiency,
    }
    return line


def _attack_line(plan: RunPlan, decoys: int, record: str) -> dict:
    p = plan.params
    channels = CHANNEL_CHOICES[p["channels"]]
    model = AttackModel.named(p["model"], channels)
    result = detection_experiment(
        model,
        decoys,
        p["trials"],
        plan.seed,
        n=p["n"],
        locality=Locality(p["mode"]),
        measurement=Measurement(p["measure"]),
        quantumness=Quantumness(p["quantumness"]),
    )
    exposed = decoys * len(channels)
    expected = None
    if Quantumness(p["quantumness"]) is Quantumness.FULL:
        expected = expected_detection(exposed, _PER_DECOY_PASS[p["model"]])
    return {
        "command": "attack",
        "record": record,
        "seed": plan.seed,
        "model": p["model"],
        "channels": p["channels"],
        "mode": p["mode"],
        "measure": p["measure"],
        "quantumness": p["quantumness"],
        "n": p["n"],
        "decoys": decoys,
        "exposed_decoys": exposed,
        "trials": result.trials,
        "detected": result.detected,
        "rate": _round(result.rate),
        "half_width": _round(result.half_width),
        "expected": _round(expected),
        "deviation": None if expected is None else _round(abs(result.rate - expected)),
        "per_decoy_rate": _round(result.per_decoy_rate),
    }


def execute_plan(plan: RunPlan) -> list[dict]:
    """Dispatch a plan and return its report lines in output order."""
    start = time.perf_counter()
    if plan.command == "run":
        lines = [_run_line(plan)]
    elif plan.command == "attack":
        lines = [_attack_line(plan, plan.params["decoys"], "summary")]
        lines += [_attack_line(plan, l, "sweep") for l in plan.params["sweep"]]
    elif plan.command == "verify":
        lines = []
        for name in plan.params["suite"]:
            res = run_suite(name, seed=plan.seed)
            lines.append(
                {
                    "command": "verify",
                    "seed": plan.seed,
                    "suite": res.suite,
                    "pass": res.passed,
                    **{k: _round(v) for k, v in res.metrics.items()},
                }
            )
    else:
        raise ValueError(f"unknown command {plan.command!r}")
    if plan.timing:
        elapsed = round((time.perf_counter() - start) * 1000, 3)
        for line in lines:
            line["wall_time_ms"] = elapsed
    return lines


def emit_report(lines: Sequence[dict], sink: IO[str]) -> None:
    for line in lines:
        sink.write(json.dumps(line, ensure_ascii=False) + "\n")
    sink.flush()


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        plan = parse_plan(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE

    try:
        lines = execute_plan(plan)
    except Exception as exc:
        print(f"qpc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    try:
        if plan.out:
            with open(plan.out, "w", encoding="utf-8", newline="\n") as fh:
                emit_report(lines, fh)
        else:
            emit_report(lines, sys.stdout)
    except OSError as exc:
        print(f"qpc: cannot write report: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if plan.command == "run" and lines[0]["verdict"] == Verdict.ABORTED.value:
        return EXIT_ABORTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
