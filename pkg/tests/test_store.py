import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainport import errors
from chainport.store import (
    ReplicaSet,
    RetentionMode,
    fail_replica,
    recover_replica,
    storage_report,
    store_read,
    store_write,
)


def test_write_reaches_every_replica():
    s = ReplicaSet(3)
    assert store_write(s, "k", 0, b"v").replicas_written == 3
    assert all(r["k"] == {0: b"v"} for r in s.replicas)


def test_write_with_all_replicas_down_is_unavailable():
    s = ReplicaSet(3)
    for i in range(3):
        fail_replica(s, i)
    with pytest.raises(errors.Unavailable):
        store_write(s, "k", 0, b"v")


def test_overwrite_keeps_one_version_per_replica():
    s = ReplicaSet(3, RetentionMode.OVERWRITE)
    for v in range(100):
        store_write(s, "k", v, bytes([v]))
    assert all(len(r["k"]) == 1 for r in s.replicas)
    assert store_read(s, "k") == bytes([99])


def test_read_served_by_the_surviving_replica():
    s = ReplicaSet(3)
    store_write(s, "k", 0, b"v")
    s.replicas[2]["k"][0] = b"from-2"
    fail_replica(s, 0)
    fail_replica(s, 1)
    assert store_read(s, "k") == b"from-2"


def test_append_versions_reads_old_versions():
    s = ReplicaSet(3)
    for v in range(5):
        store_write(s, "k", v, f"v{v}".encode())
    assert store_read(s, "k", 0) == b"v0"
    assert store_read(s, "k") == b"v4"


def test_overwrite_discards_old_versions():
    s = ReplicaSet(3, RetentionMode.OVERWRITE)
    store_write(s, "k", 0, b"a")
    store_write(s, "k", 1, b"b")
    with pytest.raises(errors.NotFound):
        store_read(s, "k", 0)


def test_missing_key_is_not_found():
    with pytest.raises(errors.NotFound):
        store_read(ReplicaSet(2), "nope")


def test_recover_resyncs_from_a_live_replica():
    s = ReplicaSet(3)
    store_write(s, "a", 0, b"1")
    fail_replica(s, 1)
    store_write(s, "a", 1, b"2")
    store_write(s, "b", 0, b"3")
    recover_replica(s, 1)
    assert s.replicas[1] == s.replicas[0]
    assert s.replicas[1] is not s.replicas[0]


def test_fail_is_idempotent_and_recovering_a_live_replica_is_a_noop():
    s = ReplicaSet(3)
    store_write(s, "a", 0, b"1")
    fail_replica(s, 2)
    fail_replica(s, 2)
    assert s.failed == {2}
    before = [dict(r) for r in s.replicas]
    recover_replica(s, 0)
    assert s.failed == {2}
    assert [dict(r) for r in s.replicas] == before


def test_recovering_with_everything_failed_empties_the_store():
    s = ReplicaSet(2)
    store_write(s, "a", 0, b"1")
    fail_replica(s, 0)
    fail_replica(s, 1)
    recover_replica(s, 0)
    assert storage_report(s).total_versions == 0
    recover_replica(s, 1)
    with pytest.raises(errors.NotFound):
        store_read(s, "a")


def test_replica_index_out_of_range():
    with pytest.raises(errors.ChainportError):
        fail_replica(ReplicaSet(3), 3)
    with pytest.raises(errors.ChainportError):
        recover_replica(ReplicaSet(3), -1)


@pytest.mark.parametrize("mode, expected", [(RetentionMode.APPEND_VERSIONS, 4 * 6), (RetentionMode.OVERWRITE, 4)])
def test_storage_report_counts(mode, expected):
    s = ReplicaSet(3, mode)
    assert storage_report(s).total_versions == 0
    for u in range(6):
        for k in range(4):
            store_write(s, f"k{k}", u, b"x")
    report = storage_report(s)
    assert report.total_versions == expected
    assert set(report.per_key) == {f"k{k}" for k in range(4)}


def test_storage_report_unavailable_when_all_failed():
    s = ReplicaSet(1)
    fail_replica(s, 0)
    with pytest.raises(errors.Unavailable):
        storage_report(s)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_read_succeeds_iff_a_live_replica_holds_the_key(n):
    for failed in itertools.chain.from_iterable(itertools.combinations(range(n), r) for r in range(n + 1)):
        s = ReplicaSet(n)
        store_write(s, "k", 0, b"v")
        for i in failed:
            fail_replica(s, i)
        if len(failed) == n:
            with pytest.raises(errors.Unavailable):
                store_read(s, "k")
        else:
            assert store_read(s, "k") == b"v"


store_ops = st.lists(
    st.one_of(
        st.tuples(st.just("write"), st.sampled_from("abc"), st.binary(max_size=3)),
        st.tuples(st.just("fail"), st.integers(1, 3)),
        st.tuples(st.just("recover"), st.integers(1, 3)),
    ),
    max_size=60,
)


@given(store_ops, st.sampled_from(list(RetentionMode)))
@settings(max_examples=150, deadline=None)
def test_live_replicas_converge_and_retention_bound_holds(ops, mode):
    # replica 0 never fails
    s = ReplicaSet(4, mode)
    writes, versions = 0, {}
    for op in ops:
        if op[0] == "write":
            versions[op[1]] = versions.get(op[1], -1) + 1
            store_write(s, op[1], versions[op[1]], op[2])
            writes += 1
        elif op[0] == "fail":
            fail_replica(s, op[1])
        else:
            recover_replica(s, op[1])
    live = [s.replicas[i] for i in s.live()]
    assert all(r == live[0] for r in live)
    total = storage_report(s).total_versions
    if mode is RetentionMode.OVERWRITE:
        assert total <= len(versions)
    else:
        assert total == writes
