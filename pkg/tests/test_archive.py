import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainport import errors
from chainport.archive import (
    ArchiveChain,
    archive_read,
    archive_write,
    snapshot,
    verify_archive,
    verify_archive_chain,
)
from chainport.chain import Chain, confirm_block

import oracle
from conftest import FIXTURE_CHAIN_ID, build_chain

ZERO = bytes(32)
# oracle.archive_bytes(FIXTURE_CHAIN_ID, 0, ZERO, oracle.chain_blocks([(0, [])]))
FIXTURE_ARCHIVE_DIGEST = "caf9dae6eba6c0aafc16fc369f67b151f26c26c23ab4880229044103e86a5005"
FIXTURE_ARCHIVE_LEN = 186


def genesis_only():
    chain = Chain(FIXTURE_CHAIN_ID)
    confirm_block(chain, 0)
    return chain


def test_fixture_archive_digest_matches_independent_serializer():
    archive = snapshot(genesis_only(), 0)
    data = archive_write(archive)
    assert archive.archive_digest.hex() == FIXTURE_ARCHIVE_DIGEST
    assert len(data) == FIXTURE_ARCHIVE_LEN
    expected, digest = oracle.archive_bytes(FIXTURE_CHAIN_ID, 0, ZERO, oracle.chain_blocks([(0, [])]))
    assert data == expected and digest.hex() == FIXTURE_ARCHIVE_DIGEST


def test_snapshot_truncates_at_expiration(chain10):
    archive = snapshot(chain10, 5)
    assert [b.height for b in archive.blocks] == list(range(6))
    assert archive.expiration_height == 5


def test_snapshot_beyond_tip(chain10):
    with pytest.raises(errors.ExpirationBeyondTip):
        snapshot(chain10, 12)
    with pytest.raises(errors.ExpirationBeyondTip):
        snapshot(Chain(FIXTURE_CHAIN_ID), 0)


def test_snapshot_excludes_pending(chain10):
    from chainport.chain import Bytes, submit_entry

    submit_entry(chain10, "late", Bytes(b"x"), 999)
    archive = snapshot(chain10, 9)
    assert "late" not in archive.keys()


def test_snapshot_refuses_a_broken_source(chain10):
    import dataclasses

    chain10.blocks[3] = dataclasses.replace(chain10.blocks[3], wall_clock=31)
    with pytest.raises(errors.SourceIntegrityError):
        snapshot(chain10, 9)


def test_untampered_archive_verifies(chain10):
    assert verify_archive(snapshot(chain10, 9), ZERO) is None


def test_flipped_byte_is_a_digest_mismatch(chain10):
    data = bytearray(archive_write(snapshot(chain10, 9)))
    data[100] ^= 0x40
    parsed = archive_read(bytes(data), verify=False)
    assert verify_archive(parsed, ZERO).reason == "digest-mismatch"


def test_recreated_expiration_breaks_the_next_link(chain10):
    five = snapshot(chain10, 5)
    nxt = snapshot(build_chain(3, chain_id=b"\x01" * 16), 2, five.archive_digest)
    six = snapshot(chain10, 6)
    chain = ArchiveChain([six, nxt])
    assert verify_archive(nxt, six.archive_digest).reason == "prev-link-mismatch"
    v = verify_archive_chain(chain, nxt.archive_digest)
    assert (v.position, v.reason) == (1, "prev-link-mismatch")


def test_expiration_field_must_match_block_count(chain10):
    import dataclasses

    archive = snapshot(chain10, 5)
    lying = dataclasses.replace(archive, expiration_height=4)
    lying = dataclasses.replace(lying, archive_digest=lying.recompute_digest())
    assert verify_archive(lying, ZERO).reason == "expiration"


def linked(n=3):
    chain = ArchiveChain()
    for i in range(n):
        src = build_chain(4 + i, chain_id=bytes([i]) * 16)
        chain.append(snapshot(src, src.height, chain.head_digest))
    return chain


def test_three_linked_archives_verify():
    chain = linked()
    assert verify_archive_chain(chain, chain.head_digest) is None


def test_append_rejects_a_broken_link():
    chain = linked(1)
    with pytest.raises(errors.MigrationError):
        chain.append(snapshot(build_chain(2), 1, ZERO))


def test_tampering_archive_one_reports_position_one():
    import dataclasses

    chain = linked()
    anchor = chain.head_digest
    a1 = chain.archives[1]
    # re-sealed forgery: its own digest checks out, so the next link is what breaks
    forged = dataclasses.replace(a1, blocks=a1.blocks[:-1], expiration_height=a1.expiration_height - 1)
    forged = dataclasses.replace(forged, archive_digest=forged.recompute_digest())
    chain.archives[1] = forged
    assert verify_archive_chain(chain, anchor).position == 2
    # unsealed tamper is caught at the archive itself
    chain.archives[1] = dataclasses.replace(a1, expiration_height=a1.expiration_height + 7)
    v = verify_archive_chain(chain, anchor)
    assert (v.position, v.reason) == (1, "digest-mismatch")
    assert verify_archive(chain.archives[2], chain.archives[1].recompute_digest()).reason == "prev-link-mismatch"


def test_wrong_anchor_is_reported_at_the_head():
    chain = linked()
    v = verify_archive_chain(chain, b"\x11" * 32)
    assert (v.position, v.reason) == (2, "anchor-mismatch")
    assert verify_archive_chain(ArchiveChain(), ZERO) is None


def test_round_trip_is_byte_identical(chain10):
    archive = snapshot(chain10, 7, b"\x22" * 32)
    data = archive_write(archive)
    again = archive_read(data)
    assert again == archive
    assert archive_write(again) == data


def test_truncated_file_is_malformed(chain10):
    data = archive_write(snapshot(chain10, 9))
    for cut in (0, 3, 10, 70, len(data) // 2, len(data) - 1):
        with pytest.raises(errors.MalformedStream):
            archive_read(data[:cut])


def test_trailing_garbage_and_bad_magic_are_malformed(chain10):
    data = archive_write(snapshot(chain10, 2))
    with pytest.raises(errors.MalformedStream):
        archive_read(data + b"\x00")
    with pytest.raises(errors.MalformedStream):
        archive_read(b"XCAR" + data[4:])


def test_corrupted_trailing_digest(chain10):
    data = bytearray(archive_write(snapshot(chain10, 9)))
    data[-1] ^= 1
    with pytest.raises(errors.DigestMismatch):
        archive_read(bytes(data))


def test_read_verification_needs_no_live_chain():
    data = archive_write(snapshot(build_chain(6), 4))
    archive = archive_read(data)
    assert verify_archive_chain(ArchiveChain([archive]), archive.archive_digest) is None


@given(st.integers(0, 2**32), st.integers(1, 25), st.data())
@settings(max_examples=60, deadline=None)
def test_archive_holds_exactly_the_entries_up_to_expiration(seed, n_blocks, data):
    chain = build_chain(n_blocks, entries_per_block=3, rng=random.Random(seed))
    h = data.draw(st.integers(0, n_blocks - 1))
    archive = snapshot(chain, h)
    got = sorted((e.logical_time, e.encode()) for b in archive.blocks for e in b.entries)
    brute = sorted((e.logical_time, e.encode()) for b in chain.blocks for e in b.entries if e.height <= h)
    assert got == brute


def test_random_byte_mutations_are_all_detected():
    rng = random.Random(3)
    chain = linked()
    anchor = chain.head_digest
    files = [archive_write(a) for a in chain.archives]
    for _ in range(1000):
        i = rng.randrange(len(files))
        mutated = bytearray(files[i])
        mutated[rng.randrange(len(mutated))] ^= rng.randrange(1, 256)
        try:
            parsed = archive_read(bytes(mutated), verify=False)
        except errors.MalformedStream:
            continue
        archives = list(chain.archives)
        archives[i] = parsed
        v = verify_archive_chain(ArchiveChain(archives), anchor)
        assert v is not None and v.position == i
