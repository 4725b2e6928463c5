"""Stimulus sets, participant sessions, and the judgment store.

Persistence is an append-only JSONL event log (session-created and
response events) plus a snapshot written on clean shutdown.  A response
is acknowledged only after its event line is flushed and fsynced, so an
acknowledged judgment survives a crash; a partial trailing line (the
crash case) is discarded on load.  One lock serializes writers; reads
work off in-memory state that is only mutated under the same lock.

Aggregates count completed sessions only, mirroring the analysis of
fully answered questionnaires.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from scenestat.grid import FrequencyTable, Pattern, pattern_hex_width
from scenestat.rng import SplitMix64, derive_seed
from scenestat.stats import JudgmentAggregate

CHOICES = ("random", "not_random")


class UnknownSetError(KeyError):
    pass


class UnknownSessionError(KeyError):
    pass


class DuplicateResponseError(ValueError):
    """A different response already exists at this trial index."""


class ResponseValidationError(ValueError):
    pass


class CorruptLogError(ValueError):
    pass


@dataclass(frozen=True)
class StimulusSet:
    """An ordered selection of patterns shown to participants."""

    set_id: str
    side: int
    patterns: tuple[int, ...]
    provenance: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        space = 1 << (self.side * self.side)
        if len(set(self.patterns)) != len(self.patterns):
            raise ValueError("patterns within a set must be unique")
        for bits in self.patterns:
            if not 0 <= bits < space:
                raise ValueError(f"pattern {bits:#x} out of range for side {self.side}")

    def pattern_hex(self, index: int) -> str:
        return format(self.patterns[index], f"0{pattern_hex_width(self.side)}x")

    def to_dict(self) -> dict:
        width = pattern_hex_width(self.side)
        return {
            "set_id": self.set_id,
            "side": self.side,
            "patterns": [format(b, f"0{width}x") for b in self.patterns],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StimulusSet":
        return cls(
            set_id=data["set_id"],
            side=int(data["side"]),
            patterns=tuple(int(h, 16) for h in data["patterns"]),
            provenance=dict(data.get("provenance", {})),
        )


def sample_stimuli(
    table: FrequencyTable, n: int, seed: int, set_id: str | None = None
) -> StimulusSet:
    """Draw n distinct patterns, frequency-weighted without replacement.

    Occurrences are drawn one at a time from the table's multiset; the
    set keeps first-draw order and deduplicates until n distinct
    patterns are collected.  Deterministic given the seed.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(table.counts) < n:
        raise ValueError(
            f"table has {len(table.counts)} distinct patterns, need {n}"
        )
    keys = sorted(table.counts)
    remaining = [table.counts[k] for k in keys]
    remaining_total = sum(remaining)
    rng = SplitMix64(seed)
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < n:
        r = rng.bounded(remaining_total)
        acc = 0
        for i, count in enumerate(remaining):
            acc += count
            if r < acc:
                remaining[i] -= 1
                remaining_total -= 1
                bits = keys[i]
                if bits not in seen:
                    seen.add(bits)
                    chosen.append(bits)
                break
    if set_id is None:
        digest = SplitMix64(seed)
        mixed = 0
        for bits in chosen:
            mixed ^= digest.next_u64() * (bits + 1)
        set_id = f"set-{mixed & 0xFFFFFFFFFF:010x}"
    return StimulusSet(
        set_id=set_id,
        side=table.side,
        patterns=tuple(chosen),
        provenance={
            "seed": seed,
            "corpus_total": table.total,
            "corpus_images": table.n_images,
            "extraction_mode": table.mode,
        },
    )


@dataclass
class Response:
    session_id: str
    trial_index: int
    pattern: int
    choice: str
    rt_ms: float
    received_at: str


@dataclass
class Session:
    session_id: str
    set_id: str
    order: tuple[int, ...]
    age: int | None = None
    gender: str | None = None
    created_at: str = ""
    responses: dict[int, Response] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return len(self.responses) == len(self.order)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class ExperimentStore:
    """Event-sourced store for sessions and judgments.

    ``data_dir`` holds ``sets/*.json`` stimulus sets, ``events.jsonl``,
    and ``snapshot.json``.  ``master_seed`` pins every session's
    presentation order: session number i shuffles with the sub-stream
    (master_seed, i), so a restart over the same files replays the same
    orders.
    """

    def __init__(self, data_dir: str | Path, master_seed: int = 0, fsync: bool = True):
        self.data_dir = Path(data_dir)
        self.sets_dir = self.data_dir / "sets"
        self.events_path = self.data_dir / "events.jsonl"
        self.snapshot_path = self.data_dir / "snapshot.json"
        self.master_seed = master_seed
        self.fsync = fsync
        self._lock = threading.Lock()
        self.sets: dict[str, StimulusSet] = {}
        self.sessions: dict[str, Session] = {}
        self._session_counter = 0
        self._event_count = 0

        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sets_dir.mkdir(exist_ok=True)
        for path in sorted(self.sets_dir.glob("*.json")):
            stimulus_set = StimulusSet.from_dict(json.loads(path.read_text()))
            self.sets[stimulus_set.set_id] = stimulus_set
        self._replay()
        self._log = open(self.events_path, "a", encoding="utf-8")

    # -- persistence -------------------------------------------------------

    def _restore_snapshot(self) -> int:
        """Load state saved on the last clean shutdown; returns events covered."""
        if not self.snapshot_path.exists():
            return 0
        snapshot = json.loads(self.snapshot_path.read_text())
        for data in snapshot.get("sessions", []):
            session = Session(
                session_id=data["session_id"],
                set_id=data["set_id"],
                order=tuple(data["order"]),
                age=data.get("age"),
                gender=data.get("gender"),
                created_at=data.get("created_at", ""),
            )
            for rdata in data.get("responses", []):
                response = Response(
                    session_id=session.session_id,
                    trial_index=int(rdata["index"]),
                    pattern=int(rdata["pattern"]),
                    choice=rdata["choice"],
                    rt_ms=rdata["rt_ms"],
                    received_at=rdata.get("received_at", ""),
                )
                session.responses[response.trial_index] = response
            self.sessions[session.session_id] = session
        self._session_counter = int(snapshot.get("session_counter", len(self.sessions)))
        return int(snapshot.get("event_count", 0))

    def _replay(self) -> None:
        skip = self._restore_snapshot()
        events: list[dict] = []
        if self.events_path.exists():
            # a complete log ends with a newline; any bytes after the last
            # newline are a partial record from a crash, never acknowledged
            lines = self.events_path.read_bytes().split(b"\n")[:-1]
            for lineno, line in enumerate(lines, start=1):
                if not line.strip():
                    continue
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError as err:
                    if lineno == len(lines):
                        break  # torn final record despite its newline; drop it
                    raise CorruptLogError(f"undecodable event at line {lineno}") from err
        for index, event in enumerate(events, start=1):
            if index <= skip:
                continue  # already captured by the snapshot
            self._apply(event)
        self._event_count = max(len(events), skip)

    def _apply(self, event: dict) -> None:
        kind = event.get("event")
        if kind == "session_created":
            session = Session(
                session_id=event["session_id"],
                set_id=event["set_id"],
                order=tuple(event["order"]),
                age=event.get("age"),
                gender=event.get("gender"),
                created_at=event.get("created_at", ""),
            )
            self.sessions[session.session_id] = session
            self._session_counter += 1
        elif kind == "response":
            session = self.sessions[event["session_id"]]
            response = Response(
                session_id=event["session_id"],
                trial_index=int(event["index"]),
                pattern=int(event["pattern"], 16),
                choice=event["choice"],
                rt_ms=event["rt_ms"],
                received_at=event.get("received_at", ""),
            )
            session.responses[response.trial_index] = response
        else:
            raise CorruptLogError(f"unknown event type {kind!r}")

    def _append(self, event: dict) -> None:
        # must hold the lock; ack only after the line is on disk
        line = json.dumps(event, separators=(",", ":"), sort_keys=True)
        self._log.write(line + "\n")
        self._log.flush()
        if self.fsync:
            os.fsync(self._log.fileno())
        self._event_count += 1

    def close(self) -> None:
        """Flush, write a full-state snapshot atomically, and release the log."""
        with self._lock:
            self._log.close()
            snapshot = {
                "event_count": self._event_count,
                "session_counter": self._session_counter,
                "sessions": [
                    {
                        "session_id": s.session_id,
                        "set_id": s.set_id,
                        "order": list(s.order),
                        "age": s.age,
                        "gender": s.gender,
                        "created_at": s.created_at,
                        "responses": [
                            {
                                "index": r.trial_index,
                                "pattern": r.pattern,
                                "choice": r.choice,
                                "rt_ms": r.rt_ms,
                                "received_at": r.received_at,
                            }
                            for r in s.responses.values()
                        ],
                    }
                    for s in self.sessions.values()
                ],
            }
            tmp = self.snapshot_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(snapshot))
            tmp.replace(self.snapshot_path)

    # -- sets ---------------------------------------------------------------

    def register_set(self, stimulus_set: StimulusSet) -> None:
        with self._lock:
            self.sets[stimulus_set.set_id] = stimulus_set
            path = self.sets_dir / f"{stimulus_set.set_id}.json"
            path.write_text(json.dumps(stimulus_set.to_dict(), indent=1))

    def get_set(self, set_id: str) -> StimulusSet:
        try:
            return self.sets[set_id]
        except KeyError:
            raise UnknownSetError(set_id) from None

    # -- sessions -------------------------------------------------------------

    def create_session(
        self, set_id: str, age: int | None = None, gender: str | None = None
    ) -> Session:
        stimulus_set = self.get_set(set_id)
        with self._lock:
            order = list(range(len(stimulus_set.patterns)))
            SplitMix64(derive_seed(self.master_seed, self._session_counter)).shuffle(order)
            while True:
                session_id = secrets.token_urlsafe(12)
                if session_id not in self.sessions:
                    break
            event = {
                "event": "session_created",
                "session_id": session_id,
                "set_id": set_id,
                "order": order,
                "age": age,
                "gender": gender,
                "created_at": _now(),
            }
            self._append(event)
            self._apply(event)
            return self.sessions[session_id]

    def get_session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSessionError(session_id) from None

    def trial_pattern(self, session: Session, trial_index: int) -> int:
        stimulus_set = self.get_set(session.set_id)
        return stimulus_set.patterns[session.order[trial_index]]

    def record_response(
        self, session_id: str, trial_index: int, choice: str, rt_ms: float
    ) -> Response:
        session = self.get_session(session_id)
        if choice not in CHOICES:
            raise ResponseValidationError(f"choice must be one of {CHOICES}, got {choice!r}")
        if not 0 <= trial_index < len(session.order):
            raise ResponseValidationError(
                f"trial index {trial_index} out of range [0, {len(session.order)})"
            )
        with self._lock:
            existing = session.responses.get(trial_index)
            if existing is not None:
                if existing.choice == choice and existing.rt_ms == rt_ms:
                    return existing  # idempotent retry, store unchanged
                raise DuplicateResponseError(
                    f"trial {trial_index} already answered with {existing.choice!r}"
                )
            pattern = self.trial_pattern(session, trial_index)
            width = pattern_hex_width(self.get_set(session.set_id).side)
            event = {
                "event": "response",
                "session_id": session_id,
                "index": trial_index,
                "pattern": format(pattern, f"0{width}x"),
                "choice": choice,
                "rt_ms": rt_ms,
                "received_at": _now(),
            }
            self._append(event)
            self._apply(event)
            return session.responses[trial_index]

    # -- aggregates --------------------------------------------------------------

    def completed_sessions(self, set_id: str) -> list[Session]:
        return [
            s for s in self.sessions.values() if s.set_id == set_id and s.completed
        ]

    def export_aggregates(self, set_id: str) -> list[JudgmentAggregate]:
        """One row per pattern in set order, over completed sessions only."""
        stimulus_set = self.get_set(set_id)
        completed = self.completed_sessions(set_id)
        width = pattern_hex_width(stimulus_set.side)
        tallies = {bits: [0, 0] for bits in stimulus_set.patterns}
        for session in completed:
            for response in session.responses.values():
                tally = tallies[response.pattern]
                tally[1] += 1
                if response.choice == "random":
                    tally[0] += 1
        return [
            JudgmentAggregate(
                pattern_hex=format(bits, f"0{width}x"),
                n_random=tallies[bits][0],
                n_total=tallies[bits][1],
            )
            for bits in stimulus_set.patterns
        ]


def aggregates_to_csv(
    aggregates: Iterable[JudgmentAggregate],
    set_id: str,
    completed_sessions: int,
) -> str:
    lines = [
        f"# set={set_id} completed_sessions={completed_sessions} "
        "policy=completed-only,all-trials,self-paced",
        "pattern_hex,n_random,n_total",
    ]
    for agg in aggregates:
        lines.append(f"{agg.pattern_hex},{agg.n_random},{agg.n_total}")
    return "\n".join(lines) + "\n"


def aggregates_from_csv(text: str) -> list[JudgmentAggregate]:
    rows = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != "pattern_hex,n_random,n_total":
                raise ValueError(f"line {lineno}: expected aggregates header")
            header_seen = True
            continue
        hex_part, n_random, n_total = line.split(",")
        rows.append(JudgmentAggregate(hex_part, int(n_random), int(n_total)))
    return rows
