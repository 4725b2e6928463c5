import json
import threading
from collections import Counter

import pytest

from scenestat.experiment import (
    CorruptLogError,
    DuplicateResponseError,
    ExperimentStore,
    ResponseValidationError,
    StimulusSet,
    UnknownSetError,
    aggregates_from_csv,
    aggregates_to_csv,
    sample_stimuli,
)
from scenestat.grid import FrequencyTable
from scenestat.rng import SplitMix64


def small_table(counts=None) -> FrequencyTable:
    counts = counts or {0: 10, 1: 7, 3: 5, 6: 2, 7: 1, 15: 4}
    return FrequencyTable(side=2, mode="tiled", counts=counts, n_images=1)


def make_set(n_patterns=4, set_id="s1") -> StimulusSet:
    return StimulusSet(set_id=set_id, side=2, patterns=tuple(range(n_patterns)))


@pytest.fixture
def store(tmp_path):
    s = ExperimentStore(tmp_path / "data", master_seed=42)
    s.register_set(make_set())
    yield s
    s.close()


# --- sample_stimuli -----------------------------------------------------------


def test_sample_all_distinct_forced():
    table = small_table()
    result = sample_stimuli(table, 6, seed=1)
    assert sorted(result.patterns) == sorted(table.counts)


def test_sample_deterministic():
    table = small_table()
    a = sample_stimuli(table, 4, seed=9)
    b = sample_stimuli(table, 4, seed=9)
    assert a.patterns == b.patterns and a.set_id == b.set_id


def test_sample_too_few_patterns():
    with pytest.raises(ValueError):
        sample_stimuli(small_table(), 7, seed=1)


def test_sample_frequency_weighting():
    table = FrequencyTable(side=2, mode="tiled", counts={5: 999, 9: 1}, n_images=1)
    first = Counter(sample_stimuli(table, 1, seed=s).patterns[0] for s in range(10_000))
    assert abs(first[5] / 10_000 - 0.999) < 0.01


def test_sample_draw_order_preserved():
    table = small_table()
    result = sample_stimuli(table, 6, seed=3)
    assert len(set(result.patterns)) == 6
    assert result.side == 2
    assert result.provenance["seed"] == 3


def test_stimulus_set_rejects_duplicates():
    with pytest.raises(ValueError):
        StimulusSet(set_id="x", side=2, patterns=(1, 1))


def test_stimulus_set_json_roundtrip():
    s = sample_stimuli(small_table(), 5, seed=8)
    assert StimulusSet.from_dict(json.loads(json.dumps(s.to_dict()))) == s


# --- sessions -----------------------------------------------------------------


def test_create_session_orders_are_permutations(store):
    s1 = store.create_session("s1", age=30, gender="f")
    s2 = store.create_session("s1")
    assert s1.session_id != s2.session_id
    assert sorted(s1.order) == [0, 1, 2, 3]
    assert sorted(s2.order) == [0, 1, 2, 3]


def test_create_session_unknown_set(store):
    with pytest.raises(UnknownSetError):
        store.create_session("nope")


def test_session_order_replays_across_restarts(tmp_path):
    d = tmp_path / "data"
    s = ExperimentStore(d, master_seed=7)
    s.register_set(make_set(10))
    first = s.create_session("s1").order
    s.close()
    # a fresh service over the same files, same master seed: the next
    # session (counter 1) must continue the stream, and a parallel fresh
    # deployment reproduces the first order
    s2 = ExperimentStore(d, master_seed=7)
    second = s2.create_session("s1").order
    s2.close()
    fresh = ExperimentStore(tmp_path / "other", master_seed=7)
    fresh.register_set(make_set(10))
    assert fresh.create_session("s1").order == first
    assert fresh.create_session("s1").order == second
    fresh.close()


def test_record_response_and_completion(store):
    session = store.create_session("s1")
    for i in range(4):
        store.record_response(session.session_id, i, "random", 100.0 + i)
    assert store.get_session(session.session_id).completed


def test_record_response_idempotent_retry(store):
    session = store.create_session("s1")
    store.record_response(session.session_id, 0, "random", 120.0)
    before = store._event_count
    store.record_response(session.session_id, 0, "random", 120.0)
    assert store._event_count == before  # store unchanged


def test_record_response_conflict(store):
    session = store.create_session("s1")
    store.record_response(session.session_id, 0, "random", 120.0)
    with pytest.raises(DuplicateResponseError):
        store.record_response(session.session_id, 0, "not_random", 120.0)


def test_record_response_out_of_range(store):
    session = store.create_session("s1")
    with pytest.raises(ResponseValidationError):
        store.record_response(session.session_id, 4, "random", 50.0)
    with pytest.raises(ResponseValidationError):
        store.record_response(session.session_id, -1, "random", 50.0)


def test_record_response_bad_choice(store):
    session = store.create_session("s1")
    with pytest.raises(ResponseValidationError):
        store.record_response(session.session_id, 0, "maybe", 50.0)


# --- aggregates ------------------------------------------------------------------


def test_export_empty(store):
    aggs = store.export_aggregates("s1")
    assert len(aggs) == 4
    assert all(a.n_total == 0 for a in aggs)


def test_export_scripted_sessions_hand_tally(store):
    # three scripted participants with deterministic answers:
    # p1 says random everywhere; p2 alternates by trial index;
    # p3 answers only 2 trials and is excluded (abandoned)
    s1 = store.create_session("s1")
    s2 = store.create_session("s1")
    s3 = store.create_session("s1")
    for i in range(4):
        store.record_response(s1.session_id, i, "random", 10.0)
    for i in range(4):
        choice = "random" if i % 2 == 0 else "not_random"
        store.record_response(s2.session_id, i, choice, 10.0)
    store.record_response(s3.session_id, 0, "random", 10.0)
    store.record_response(s3.session_id, 1, "random", 10.0)

    aggs = {a.pattern_hex: a for a in store.export_aggregates("s1")}
    # hand tally: every pattern got 1 vote from p1; p2's vote depends on
    # where the pattern landed in p2's presentation order
    expected_random = {}
    for trial_index, set_index in enumerate(s2.order):
        hexkey = format(make_set().patterns[set_index], "01x")
        expected_random[hexkey] = 1 + (1 if trial_index % 2 == 0 else 0)
    for hexkey, agg in aggs.items():
        assert agg.n_total == 2
        assert agg.n_random == expected_random[hexkey]


def test_aggregates_conservation(store):
    rng = SplitMix64(5)
    n_completed = 0
    for p in range(6):
        session = store.create_session("s1")
        complete = p % 3 != 2
        n_trials = 4 if complete else 2
        n_completed += complete
        for i in range(n_trials):
            choice = "random" if rng.bounded(2) else "not_random"
            store.record_response(session.session_id, i, choice, 1.0)
    aggs = store.export_aggregates("s1")
    assert sum(a.n_total for a in aggs) == n_completed * 4


def test_concurrent_participants_match_serial_replay(tmp_path):
    store = ExperimentStore(tmp_path / "data", master_seed=3, fsync=False)
    store.register_set(make_set(8))
    sessions = [store.create_session("s1") for _ in range(50)]
    plans = {
        s.session_id: [
            ("random" if SplitMix64(hash((n, i)) & 0xFFFF).bounded(2) else "not_random")
            for i in range(8)
        ]
        for n, s in enumerate(sessions)
    }

    def run(session):
        for i, choice in enumerate(plans[session.session_id]):
            store.record_response(session.session_id, i, choice, 5.0)

    threads = [threading.Thread(target=run, args=(s,)) for s in sessions]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    concurrent_aggs = store.export_aggregates("s1")
    store.close()

    serial = ExperimentStore(tmp_path / "serial", master_seed=3, fsync=False)
    serial.register_set(make_set(8))
    for session in sessions:
        replay = serial.create_session("s1")
        for i, choice in enumerate(plans[session.session_id]):
            serial.record_response(replay.session_id, i, choice, 5.0)
    serial_aggs = serial.export_aggregates("s1")
    serial.close()

    # same master seed, same session counter sequence -> same orders; the
    # aggregates must agree regardless of thread interleaving
    assert [(a.n_random, a.n_total) for a in concurrent_aggs] == [
        (a.n_random, a.n_total) for a in serial_aggs
    ]


# --- durability -------------------------------------------------------------------


def test_replay_from_log(tmp_path):
    d = tmp_path / "data"
    store = ExperimentStore(d, master_seed=1)
    store.register_set(make_set())
    session = store.create_session("s1")
    store.record_response(session.session_id, 0, "random", 44.0)
    store._log.close()  # simulate crash: no snapshot written

    revived = ExperimentStore(d, master_seed=1)
    assert session.session_id in revived.sessions
    assert revived.sessions[session.session_id].responses[0].choice == "random"
    revived.close()


def test_partial_trailing_record_discarded(tmp_path):
    d = tmp_path / "data"
    store = ExperimentStore(d, master_seed=1)
    store.register_set(make_set())
    session = store.create_session("s1")
    store.record_response(session.session_id, 0, "random", 44.0)
    store.record_response(session.session_id, 1, "not_random", 44.0)
    store._log.close()

    log = d / "events.jsonl"
    raw = log.read_bytes()
    cut = raw.rstrip(b"\n").rfind(b"\n")  # keep everything before the last record
    log.write_bytes(raw[: cut + 1 + 20])  # 20 bytes of the last record, no newline

    revived = ExperimentStore(d, master_seed=1)
    responses = revived.sessions[session.session_id].responses
    assert 0 in responses and 1 not in responses
    revived.close()


def test_snapshot_restores_state_and_skips_replayed_events(tmp_path):
    d = tmp_path / "data"
    store = ExperimentStore(d, master_seed=1)
    store.register_set(make_set())
    session = store.create_session("s1")
    store.record_response(session.session_id, 0, "random", 1.0)
    store.close()  # writes snapshot

    second = ExperimentStore(d, master_seed=1)
    s2 = second.create_session("s1")
    second.record_response(s2.session_id, 0, "not_random", 2.0)
    second._log.close()  # crash: snapshot covers only the first two events

    third = ExperimentStore(d, master_seed=1)
    assert third.sessions[session.session_id].responses[0].choice == "random"
    assert third.sessions[s2.session_id].responses[0].choice == "not_random"
    assert third._session_counter == 2
    third.close()


def test_corrupt_middle_record_raises(tmp_path):
    d = tmp_path / "data"
    store = ExperimentStore(d, master_seed=1)
    store.register_set(make_set())
    session = store.create_session("s1")
    store.record_response(session.session_id, 0, "random", 1.0)
    store._log.close()
    log = d / "events.jsonl"
    lines = log.read_bytes().splitlines(keepends=True)
    lines[0] = b"{garbage\n"
    log.write_bytes(b"".join(lines))
    with pytest.raises(CorruptLogError):
        ExperimentStore(d, master_seed=1)


# --- aggregates CSV ------------------------------------------------------------------


def test_aggregates_csv_roundtrip(store):
    session = store.create_session("s1")
    for i in range(4):
        store.record_response(session.session_id, i, "random", 1.0)
    aggs = store.export_aggregates("s1")
    text = aggregates_to_csv(aggs, "s1", 1)
    assert text.splitlines()[1] == "pattern_hex,n_random,n_total"
    back = aggregates_from_csv(text)
    assert back == aggs
