"""Command-line entry point.

Subcommands: simulate, audit, keygen, demo-table1.  Human-readable progress
goes to stderr; machine-readable artifacts go to files or stdout, so pipes
stay clean.  Exit codes are a stable contract: 0 success, 1 usage/config/
infeasibility, 2 protocol budget exceeded, 3 reproduction mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import audit, codec, demo, keying, protocol
from .errors import (
    ConfigError,
    InfeasibleEnumeration,
    KeySetIncoherent,
    KeyshareBudgetExceeded,
    SecrecastError,
)
from .protocol import SessionConfig, SessionReport
from .seeds import child_seed

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BUDGET = 2
EXIT_MISMATCH = 3


@dataclass
class RunManifest:
    """Resolved invocation context shared by the subcommand handlers."""

    subcommand: str
    out_dir: Path
    force: bool
    quiet: bool
    seed_override: int | None = None
    config_path: Path | None = None

    def say(self, message: str) -> None:
        if not self.quiet:
            print(message, file=sys.stderr)

    def write(self, name: str, data: bytes) -> Path:
        path = self.out_dir / name
        if path.exists() and not self.force:
            raise ConfigError(f"{path} already exists; pass --force to overwrite")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.say(f"wrote {path}")
        return path


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for budget exceedance.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    sub.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    sub.add_argument("--force", action="store_true", help="overwrite existing files")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="secrecast", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="run broadcast sessions from a config file")
    sim.add_argument("config", type=Path, help="session config JSON")
    sim.add_argument("--seeds", default=None, metavar="A..B",
                     help="inclusive seed range for a sweep, e.g. 1..20")
    sim.add_argument("--messages", type=Path, default=None,
                     help="message input (.json streams or raw binary)")
    sim.add_argument("--keyset", type=Path, default=None,
                     help="inject an out-of-band key set file")
    _add_common(sim)

    aud = subs.add_parser("audit", help="measure the scheme's secrecy claims")
    kind = aud.add_mutually_exclusive_group()
    kind.add_argument("--lemma2", action="store_true",
                      help="coefficient distribution instead of leakage")
    kind.add_argument("--packet-dist", action="store_true",
                      help="coded-vector distribution instead of leakage")
    kind.add_argument("--matrix-law", action="store_true",
                      help="key-derived vs uniform matrix law distance")
    aud.add_argument("--n", type=int, required=True, help="message count")
    aud.add_argument("--target", type=int, default=1, help="target message index")
    aud.add_argument("--known", default="", metavar="I,J,...",
                     help="comma-separated known message indices")
    aud.add_argument("--exact", action="store_true",
                     help="exact enumeration instead of Monte Carlo")
    aud.add_argument("--trials", type=int, default=100_000,
                     help="Monte Carlo sample count")
    aud.add_argument("--matrix-source", choices=["idealized", "key-derived"],
                     default="idealized")
    _add_common(aud)

    kg = subs.add_parser("keygen", help="generate and save a key set")
    kg.add_argument("--n", type=int, required=True, help="message count")
    _add_common(kg)

    dm = subs.add_parser("demo-table1",
                         help="rebuild the bundled reference matrix and verify it")
    dm.add_argument("--quiet", action="store_true", help="suppress progress output")

    return parser


# ---------------------------------------------------------------------------
# simulate


def _parse_seed_range(text: str) -> range:
    try:
        lo, hi = text.split("..", 1)
        first, last = int(lo), int(hi)
    except ValueError as exc:
        raise ConfigError(f"--seeds wants A..B, got {text!r}") from exc
    if last < first:
        raise ConfigError(f"--seeds range {text!r} is empty")
    return range(first, last + 1)


def _thread_count() -> int:
    env = os.environ.get("SECRECAST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SECRECAST_THREADS={env!r} is not an integer") from exc
    return min(8, os.cpu_count() or 1)


def _load_config(path: Path) -> SessionConfig:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return SessionConfig.from_dict(data)


def cmd_simulate(args, manifest: RunManifest) -> int:
    base = _load_config(args.config)
    if manifest.seed_override is not None:
        base = SessionConfig.from_dict(
            {**base.to_dict(), "seed": manifest.seed_override}
        )
    base.validate()

    messages = None
    if args.messages is not None:
        messages = codec.load_messages(args.messages, base.n)
    keyset = keying.load_keyset(args.keyset) if args.keyset is not None else None

    seeds = (
        list(_parse_seed_range(args.seeds))
        if args.seeds is not None
        else [base.seed]
    )
    configs = [
        SessionConfig.from_dict({**base.to_dict(), "seed": s}) for s in seeds
    ]

    def one(cfg: SessionConfig) -> SessionReport:
        return protocol.run_session(cfg, messages=messages, keyset=keyset)

    budget_exceeded = False
    if len(configs) == 1:
        reports = [one(configs[0])]
    else:
        with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
            reports = list(pool.map(one, configs))

    if len(reports) == 1:
        manifest.write("report.json", protocol.report_json_bytes(reports[0]))
    else:
        for report in reports:
            manifest.write(
                f"report_seed{report.config.seed}.json",
                protocol.report_json_bytes(report),
            )
    manifest.write("report.csv", protocol.report_csv_bytes(reports))

    for report in reports:
        if not report.all_decoded:
            budget_exceeded = True
            failed = [u + 1 for u, ok in enumerate(report.decode_success) if not ok]
            manifest.say(
                f"seed {report.config.seed}: client(s) {failed} did not finish "
                "within the recovery budget"
            )
    return EXIT_BUDGET if budget_exceeded else EXIT_OK


# ---------------------------------------------------------------------------
# audit


def _audit_json(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def cmd_audit(args, manifest: RunManifest) -> int:
    seed = manifest.seed_override if manifest.seed_override is not None else 0
    mode = "exact" if args.exact else "monte_carlo"
    rng = np.random.default_rng(child_seed(seed, "audit"))
    source = (
        audit.KEY_DERIVED if args.matrix_source == "key-derived" else audit.IDEALIZED
    )

    if args.matrix_law:
        tv = audit.matrix_law_distance(args.n)
        payload = {
            "kind": "matrix_law_distance",
            "n": args.n,
            "method": "exact",
            "tv_distance": float(tv),
            "tv_distance_exact": str(tv),
        }
        manifest.write("matrix_law.json", _audit_json(payload))
        return EXIT_OK

    if args.lemma2:
        report = audit.coefficient_distribution(
            args.n, mode=mode, trials=args.trials, rng=rng
        )
        manifest.write(
            "coefficient_distribution.json", _audit_json(report.to_json_dict())
        )
        return EXIT_OK

    if args.packet_dist:
        report = audit.packet_distribution(
            args.n, mode=mode, trials=args.trials, rng=rng
        )
        manifest.write(
            "packet_distribution.json", _audit_json(report.to_json_dict())
        )
        return EXIT_OK

    known = tuple(int(p) for p in args.known.split(",") if p.strip())
    report = audit.leakage(
        args.n,
        args.target,
        known,
        mode=mode,
        trials=args.trials,
        rng=rng,
        matrix_source=source,
    )
    manifest.write("leakage.json", _audit_json(report.to_json_dict()))
    manifest.say(
        f"leakage n={args.n} target={args.target}: "
        f"{report.mutual_information_bits:.9f} bits "
        f"({report.conditional_mi_given_nonzero_P_bits:.9f} given P != 0)"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# keygen


def cmd_keygen(args, manifest: RunManifest) -> int:
    import random

    seed = manifest.seed_override if manifest.seed_override is not None else 0
    rng = random.Random(child_seed(seed, "keys"))
    keyset = protocol.generate_keyset(args.n, rng)
    data = (
        json.dumps(keying.keyset_to_dict(keyset), indent=2, sort_keys=True) + "\n"
    ).encode("utf-8")
    manifest.write("keyset.json", data)
    return EXIT_OK


# ---------------------------------------------------------------------------
# demo-table1


def cmd_demo_table1(args) -> int:
    quiet = args.quiet
    ok, checks, expected_rank = demo.verify_reference()
    derived_text = "\n".join(" ".join(str(b) for b in c.derived) for c in checks)
    print(derived_text)

    def say(msg):
        if not quiet:
            print(msg, file=sys.stderr)

    for c in checks:
        if c.erratum:
            say(
                f"row {c.index}: stored map is not a bijection (documented "
                f"erratum); printed literally, excluded from the verdict"
            )
        elif not c.matches:
            say(
                f"row {c.index}: derived {list(c.derived)} != expected "
                f"{list(c.expected)}"
            )
    say(f"expected matrix rank: {expected_rank}")
    if ok and expected_rank == demo.REFERENCE_N:
        say("verified: all non-erratum rows match the reference matrix")
        return EXIT_OK
    say("MISMATCH against the reference matrix")
    return EXIT_MISMATCH


# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "demo-table1":
            return cmd_demo_table1(args)
        manifest = RunManifest(
            subcommand=args.command,
            out_dir=args.out,
            force=args.force,
            quiet=args.quiet,
            seed_override=args.seed,
            config_path=getattr(args, "config", None),
        )
        if args.command == "simulate":
            return cmd_simulate(args, manifest)
        if args.command == "audit":
            return cmd_audit(args, manifest)
        if args.command == "keygen":
            return cmd_keygen(args, manifest)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleEnumeration as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeySetIncoherent as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyshareBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SecrecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
