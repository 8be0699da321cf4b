"""Session orchestration: key establishment, broadcast, recovery, decoding.

A session runs in phases.  Keys are installed out of band (or distributed
opportunistically over the same erasure channel), all T rounds are encoded
and packetized, packets are broadcast, missing packets are rebroadcast until
every client holds all n of them or the round budget runs out, and finally
each complete client decodes exactly its demanded streams.

Clients NACK every missing packet regardless of demand: filtering by the
wants set would disclose which coefficient-row entries are nonzero.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from typing import AbstractSet, Callable, NamedTuple, Sequence

from . import codec, keying
from .channel import ErasureChannel, Packet, broadcast, depacketize, packetize
from .codec import CodedSession, DemandProfile, MessageSet
from .errors import ConfigError, KeySetIncoherent, KeyshareBudgetExceeded
from .gf2 import BitVector
from .keying import InitialKey, KeySet
from .seeds import child_seed

__all__ = [
    "SessionConfig",
    "ClientState",
    "SessionReport",
    "RecoveryResult",
    "nack",
    "recovery_loop",
    "opportunistic_keyshare",
    "run_session",
    "generate_messages",
    "generate_keyset",
    "privileged_sets",
    "report_json_bytes",
    "report_csv_bytes",
    "CSV_FIELDS",
]

KEY_MODES = ("out_of_band", "opportunistic")


@dataclass(frozen=True)
class SessionConfig:
    """Everything a simulation run depends on; fully determines its output."""

    n: int
    k: int
    T: int
    demands: tuple[frozenset, ...]
    erasure_probs: tuple[float, ...]
    seed: int
    nu_period: int = 1
    max_recovery_rounds: int = 64
    key_mode: str = "out_of_band"
    keyshare_budget: int = 10_000

    def __post_init__(self):
        object.__setattr__(
            self, "demands", tuple(frozenset(d) for d in self.demands)
        )
        object.__setattr__(
            self, "erasure_probs", tuple(float(p) for p in self.erasure_probs)
        )

    def validate(self) -> list[str]:
        """Raise ConfigError on a broken config; return warnings otherwise."""
        if self.n < 1 or self.k < 1 or self.T < 1:
            raise ConfigError("n, k, and T must be positive")
        if self.nu_period < 1:
            raise ConfigError("nu_period must be positive")
        if self.max_recovery_rounds < 1:
            raise ConfigError("max_recovery_rounds must be positive")
        if self.keyshare_budget < 1:
            raise ConfigError("keyshare_budget must be positive")
        if self.key_mode not in KEY_MODES:
            raise ConfigError(f"key_mode must be one of {KEY_MODES}")
        if len(self.demands) != self.k:
            raise ConfigError(f"expected {self.k} demand sets, got {len(self.demands)}")
        if len(self.erasure_probs) != self.k:
            raise ConfigError(
                f"expected {self.k} erasure probabilities, got {len(self.erasure_probs)}"
            )
        for u, d in enumerate(self.demands, 1):
            bad = sorted(i for i in d if not (isinstance(i, int) and 1 <= i <= self.n))
            if bad:
                raise ConfigError(f"client {u} demands invalid indices {bad}")
        if any(not 0.0 <= p <= 1.0 for p in self.erasure_probs):
            raise ConfigError("erasure probabilities must lie in [0, 1]")

        warnings = []
        unused = self.unused_messages()
        if unused:
            warnings.append(f"messages {sorted(unused)} have no privileged recipient")
            if self.key_mode == "opportunistic":
                raise ConfigError(
                    "opportunistic key sharing needs every message to have a "
                    f"privileged recipient; messages {sorted(unused)} have none"
                )
        return warnings

    def unused_messages(self) -> set[int]:
        used = set().union(*self.demands) if self.demands else set()
        return set(range(1, self.n + 1)) - used

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "T": self.T,
            "demands": [sorted(d) for d in self.demands],
            "erasure_probs": list(self.erasure_probs),
            "seed": self.seed,
            "nu_period": self.nu_period,
            "max_recovery_rounds": self.max_recovery_rounds,
            "key_mode": self.key_mode,
            "keyshare_budget": self.keyshare_budget,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        required = ("n", "k", "T", "demands", "erasure_probs", "seed")
        missing = [key for key in required if key not in data]
        if missing:
            raise ConfigError(f"config is missing required field(s) {missing}")
        unknown = sorted(
            set(data)
            - set(required)
            - {"nu_period", "max_recovery_rounds", "key_mode", "keyshare_budget"}
        )
        if unknown:
            raise ConfigError(f"config has unknown field(s) {unknown}")
        try:
            return cls(
                n=int(data["n"]),
                k=int(data["k"]),
                T=int(data["T"]),
                demands=tuple(frozenset(d) for d in data["demands"]),
                erasure_probs=tuple(data["erasure_probs"]),
                seed=int(data["seed"]),
                nu_period=int(data.get("nu_period", 1)),
                max_recovery_rounds=int(data.get("max_recovery_rounds", 64)),
                key_mode=data.get("key_mode", "out_of_band"),
                keyshare_budget=int(data.get("keyshare_budget", 10_000)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from exc


@dataclass
class ClientState:
    """One client's view: demand, held keys, buffer, and decoded output.

    Held keys cover only demanded indices, never more; tests may assert this
    through the run_session inspection hook.
    """

    id: int
    demand: frozenset
    keys: dict = field(default_factory=dict)
    received: set = field(default_factory=set)
    decoded: dict = field(default_factory=dict)

    def profile(self) -> DemandProfile:
        return DemandProfile(client_id=self.id, demand=self.demand)


class RecoveryResult(NamedTuple):
    reception_sets: list
    retransmissions: int
    budget_exceeded: bool


@dataclass(frozen=True)
class SessionReport:
    """Outcome metrics of one simulated session."""

    config: SessionConfig
    decode_success: tuple[bool, ...]
    received_counts: tuple[int, ...]
    broadcast_count: int
    retransmission_count: int
    nu_overhead_bits: int
    singular_rejections: int
    keyshare_broadcasts: int
    audit_summary: dict | None = None

    @property
    def all_decoded(self) -> bool:
        return all(self.decode_success)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "decode_success": list(self.decode_success),
            "broadcast_count": self.broadcast_count,
            "retransmission_count": self.retransmission_count,
            "nu_overhead_bits": self.nu_overhead_bits,
            "singular_rejections": self.singular_rejections,
            "keyshare_broadcasts": self.keyshare_broadcasts,
            "audit_summary": self.audit_summary,
            "clients": [
                {
                    "id": u + 1,
                    "demand": sorted(self.config.demands[u]),
                    "decode_success": self.decode_success[u],
                    "received_packets": self.received_counts[u],
                }
                for u in range(self.config.k)
            ],
        }


CSV_FIELDS = [
    "seed",
    "client",
    "demand",
    "decode_success",
    "received_packets",
    "broadcast_count",
    "retransmission_count",
    "nu_overhead_bits",
    "singular_rejections",
    "keyshare_broadcasts",
]


def report_csv_rows(report: SessionReport) -> list[dict]:
    """One CSV row per client."""
    return [
        {
            "seed": report.config.seed,
            "client": u + 1,
            "demand": "|".join(str(i) for i in sorted(report.config.demands[u])),
            "decode_success": int(report.decode_success[u]),
            "received_packets": report.received_counts[u],
            "broadcast_count": report.broadcast_count,
            "retransmission_count": report.retransmission_count,
            "nu_overhead_bits": report.nu_overhead_bits,
            "singular_rejections": report.singular_rejections,
            "keyshare_broadcasts": report.keyshare_broadcasts,
        }
        for u in range(report.config.k)
    ]


def report_json_bytes(report: SessionReport) -> bytes:
    return (
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    ).encode("utf-8")


def report_csv_bytes(reports: Sequence[SessionReport]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        for row in report_csv_rows(report):
            writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def nack(state: ClientState, n: int) -> set[int]:
    """All missing packet indices, never filtered by the demand set."""
    return set(range(1, n + 1)) - state.received


def recovery_loop(
    reception_sets: Sequence[AbstractSet[int]],
    packets: Sequence[Packet],
    ch: ErasureChannel,
    max_rounds: int,
) -> RecoveryResult:
    """Rebroadcast the union of all NACKed packets until every client holds
    all n packets or the round budget is spent.  Plain rebroadcast of the
    original packets; coded retransmission strategies plug in elsewhere."""
    n = len(packets)
    by_index = {p.index: p for p in packets}
    sets = [set(s) for s in reception_sets]
    retransmissions = 0
    for _ in range(max_rounds):
        missing = sorted(set().union(*(set(range(1, n + 1)) - s for s in sets)))
        if not missing:
            return RecoveryResult(sets, retransmissions, False)
        resend = [by_index[i] for i in missing]
        for got, s in zip(broadcast(resend, ch), sets):
            s |= got
        retransmissions += len(resend)
    exhausted = any(len(s) < n for s in sets)
    return RecoveryResult(sets, retransmissions, exhausted)


def _basis_add(basis: dict[int, int], vec: int) -> bool:
    """Add vec to an incremental GF(2) echelon basis; False if dependent."""
    v = vec
    while v:
        top = v.bit_length() - 1
        if top not in basis:
            basis[top] = v
            return True
        v ^= basis[top]
    return False


def opportunistic_keyshare(
    privileged: Sequence[AbstractSet[int]],
    ch: ErasureChannel,
    rng: random.Random,
    budget: int,
) -> tuple[dict[int, InitialKey], int]:
    """Distribute keys by broadcasting candidates over the erasure channel.

    Each broadcast of a fresh candidate key reaches a random subset of
    clients; the candidate is bound to the lowest-indexed still-unkeyed
    message whose privileged set equals that reception pattern exactly, so
    exactly the right clients hold it and nobody else ever heard it.  The
    candidate's content only matters once it is bound, so it is materialized
    lazily.  A candidate whose base row would break key-set coherence (its
    augmented row is dependent on those already bound, see keyset_coherent)
    is discarded; for realistic n the chance of that is negligible.

    Returns (message index -> key, broadcasts used); raises
    KeyshareBudgetExceeded once `budget` broadcasts were spent.
    """
    n = len(privileged)
    targets = [frozenset(r) for r in privileged]
    if any(not r for r in targets):
        raise ValueError("every message needs a nonempty privileged set")
    if any(not all(1 <= u <= ch.k for u in r) for r in targets):
        raise ValueError("privileged sets reference unknown clients")

    unkeyed = list(range(1, n + 1))
    assignment: dict[int, InitialKey] = {}
    basis: dict[int, int] = {}
    broadcasts = 0
    while unkeyed:
        if broadcasts >= budget:
            raise KeyshareBudgetExceeded(assignment, broadcasts, unkeyed)
        slots = ch.deliveries(1)
        pattern = frozenset(u + 1 for u, got in enumerate(slots) if got)
        broadcasts += 1
        for i in unkeyed:
            if targets[i - 1] == pattern:
                candidate = keying.keygen(n, rng)
                row = keying.base_row(candidate).value | (1 << n)
                if _basis_add(basis, row):
                    assignment[i] = candidate
                    unkeyed.remove(i)
                break
    return assignment, broadcasts


def generate_keyset(n: int, rng: random.Random, max_attempts: int = 64) -> KeySet:
    """Sample a key set, resampling whole sets until coherent (some
    regenerating vector yields an invertible matrix).  Raises
    KeySetIncoherent if the bound is hit; a uniform draw is coherent with
    probability at least the invertible-matrix density, so it never is."""
    for _ in range(max_attempts):
        ks = KeySet(tuple(keying.keygen(n, rng) for _ in range(n)))
        if keying.keyset_coherent(ks):
            return ks
    raise KeySetIncoherent(f"no coherent key set after {max_attempts} attempts")


def generate_messages(cfg: SessionConfig) -> MessageSet:
    """The session's message source: uniform bits from the master seed."""
    rng = random.Random(child_seed(cfg.seed, "messages"))
    return codec.random_messages(cfg.n, cfg.T, rng)


def privileged_sets(cfg: SessionConfig) -> list[set[int]]:
    """R_j for each message j: the clients whose demand contains j."""
    return [
        {u + 1 for u in range(cfg.k) if j in cfg.demands[u]}
        for j in range(1, cfg.n + 1)
    ]


def _establish_keys(
    cfg: SessionConfig, ch: ErasureChannel, keyset: KeySet | None
) -> tuple[KeySet, int]:
    if keyset is not None:
        if keyset.n != cfg.n:
            raise ConfigError(
                f"injected key set is for n={keyset.n}, config has n={cfg.n}"
            )
        check = keying.validate_keyset(keyset)
        if not check.ok:
            raise KeySetIncoherent(
                f"injected key set has duplicate base rows {list(check.duplicate_pairs)}"
            )
        if not keying.keyset_coherent(keyset):
            raise KeySetIncoherent(
                "no regenerating vector can make the injected key set invertible"
            )
        return keyset, 0
    if cfg.key_mode == "out_of_band":
        rng = random.Random(child_seed(cfg.seed, "keys"))
        return generate_keyset(cfg.n, rng), 0
    share_rng = random.Random(child_seed(cfg.seed, "keyshare"))
    assignment, broadcasts = opportunistic_keyshare(
        privileged_sets(cfg), ch, share_rng, cfg.keyshare_budget
    )
    keys = KeySet(tuple(assignment[i] for i in range(1, cfg.n + 1)))
    return keys, broadcasts


def run_session(
    cfg: SessionConfig,
    messages: MessageSet | None = None,
    keyset: KeySet | None = None,
    inspect: Callable[[str, list[ClientState]], None] | None = None,
) -> SessionReport:
    """Execute one full session and report its metrics.

    Fully deterministic given cfg.seed: every randomized component draws from
    its own labeled child seed.  `inspect`, when given, is called with
    (phase_name, client_states) after each phase so tests can watch state
    without changing behavior.
    """
    cfg.validate()
    if messages is None:
        messages = generate_messages(cfg)
    if messages.n != cfg.n or messages.T != cfg.T:
        raise ConfigError(
            f"messages are {messages.n}x{messages.T}, config wants {cfg.n}x{cfg.T}"
        )

    ch = ErasureChannel(
        cfg.erasure_probs, random.Random(child_seed(cfg.seed, "channel"))
    )
    keys, keyshare_broadcasts = _establish_keys(cfg, ch, keyset)

    clients = [
        ClientState(
            id=u + 1,
            demand=cfg.demands[u],
            keys={i: keys[i - 1] for i in sorted(cfg.demands[u])},
        )
        for u in range(cfg.k)
    ]
    if inspect:
        inspect("keys_established", clients)

    session = codec.encode_session(
        messages, keys, random.Random(child_seed(cfg.seed, "nu")), cfg.nu_period
    )
    packets = packetize(session, session_id=child_seed(cfg.seed, "session-id"))

    reception = broadcast(packets, ch)
    for state, got in zip(clients, reception):
        state.received = set(got)
    if inspect:
        inspect("after_broadcast", clients)

    recovery = recovery_loop(
        [c.received for c in clients], packets, ch, cfg.max_recovery_rounds
    )
    for state, got in zip(clients, recovery.reception_sets):
        state.received = got
    if inspect:
        inspect("after_recovery", clients)

    coded_streams, nus = depacketize(packets, cfg.n)
    coded_map = {i + 1: s for i, s in enumerate(coded_streams)}
    decode_success = []
    for state in clients:
        complete = len(state.received) == cfg.n
        if complete:
            state.decoded = codec.decode_client(
                state.profile(), state.keys, nus, coded_map
            )
        decode_success.append(complete)
    if inspect:
        inspect("after_decode", clients)

    periods = -(-cfg.T // cfg.nu_period)
    return SessionReport(
        config=cfg,
        decode_success=tuple(decode_success),
        received_counts=tuple(len(c.received) for c in clients),
        broadcast_count=cfg.n,
        retransmission_count=recovery.retransmissions,
        nu_overhead_bits=cfg.n * periods,
        singular_rejections=session.singular_rejections,
        keyshare_broadcasts=keyshare_broadcasts,
    )
