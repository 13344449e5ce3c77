"""``chainport`` command-line tool.

Every command loads the universe directory, runs one operation, and saves.
Failures print a single ``ERROR <code>: <message>`` line to stderr and exit 2;
negative verification results print a verdict line and exit 1.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import errors
from ._wire import ZERO_DIGEST, sha256
from .archive import archive_read, archive_write, snapshot, verify_archive, verify_archive_chain
from .chain import Bytes, confirm_block, get_entries, verify_chain
from .ledger import (
    ANCHOR_NAME,
    AppConfig,
    StorageDesign,
    checkpoint,
    create_app,
    derive_numeric_state,
    encode_delta,
    get_history,
    get_state,
    put_state,
    verify_state_changes,
)
from .migration import (
    COPIER_ID,
    default_copier_program,
    migrate_existence_only,
    migrate_full_log,
    migrate_restart_initial,
)
from .proofs import (
    ExistenceClaim,
    current_anchor,
    evidence_for,
    proof_read,
    proof_write,
    prove_existence,
    verify_existence,
    verify_existence_copied,
)
from .store import ReplicaSet, fail_replica, recover_replica, storage_report
from .universe import Universe, check_name, locked

EXIT_REJECTED = 1
EXIT_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise errors.UsageError(message)


def parse_value(text: str) -> bytes:
    """``0x``-prefixed hex, otherwise the UTF-8 bytes of ``text``."""
    if text.startswith("0x"):
        try:
            return bytes.fromhex(text[2:])
        except ValueError:
            raise errors.UsageError(f"bad hex value {text!r}") from None
    return text.encode("utf-8")


def parse_digest(text: str) -> bytes:
    try:
        raw = bytes.fromhex(text[2:] if text.startswith("0x") else text)
    except ValueError:
        raise errors.UsageError(f"bad digest {text!r}") from None
    if len(raw) != 32:
        raise errors.UsageError("digest must be 32 bytes")
    return raw


def show(value: bytes) -> str:
    return "0x" + value.hex()


def _time(lt) -> str:
    return "-" if lt is None else f"{lt[0]}:{lt[1]}"


def _verdict(ok: bool, line: str) -> int:
    print(line)
    return 0 if ok else EXIT_REJECTED


# chain


def cmd_chain_create(uni: Universe, args) -> int:
    print(uni.create_chain(args.id).chain_id.hex())
    return 0


def cmd_chain_confirm(uni: Universe, args) -> int:
    block = confirm_block(uni.chain(args.chain), uni.tick(args.clock))
    print(block.block_digest.hex())
    return 0


def cmd_chain_verify(uni: Universe, args) -> int:
    v = verify_chain(uni.chain(args.chain))
    return _verdict(v is None, "OK" if v is None else f"VIOLATION height={v.height} reason={v.reason}")


def cmd_chain_entries(uni: Universe, args) -> int:
    for e in get_entries(uni.chain(args.chain), args.key):
        data = show(e.payload.data) if isinstance(e.payload, Bytes) else ",".join(map(str, e.payload.values))
        print(f"{_time(e.logical_time)} wall={e.wall_clock} digest={e.entry_digest.hex()} payload={data}")
    return 0


# app


def cmd_app_create(uni: Universe, args) -> int:
    check_name("app", args.app)
    design = StorageDesign(args.design)
    config = AppConfig(args.app, design, not args.no_change_verification)
    store = None
    if design is StorageDesign.EXTERNAL_STORE:
        store = ReplicaSet(args.replicas, config.expected_retention)
    create_app(config, uni.chain(args.chain), store, registry=uni.apps)
    if store is not None:
        uni.stores[args.app] = store
    print(f"app={args.app} design={design.value} chain={args.chain}")
    return 0


def cmd_app_put(uni: Universe, args) -> int:
    if (args.value is None) == (args.delta is None):
        raise errors.UsageError("give exactly one of VALUE or --delta")
    value = encode_delta(args.delta) if args.delta is not None else parse_value(args.value)
    v = put_state(uni.app(args.app), args.key, value, uni.tick(args.clock))
    print(f"version={v.version_index} time={_time(v.logical_time)} digest={v.value_digest.hex()}")
    return 0


def cmd_app_get(uni: Universe, args) -> int:
    print(show(get_state(uni.app(args.app), args.key)))
    return 0


def cmd_app_history(uni: Universe, args) -> int:
    for v in get_history(uni.app(args.app), args.key):
        print(f"version={v.version_index} time={_time(v.logical_time)} digest={v.value_digest.hex()} value={show(v.value)}")
    return 0


def cmd_app_verify_changes(uni: Universe, args) -> int:
    v = verify_state_changes(uni.app(args.app), args.key)
    return _verdict(v is None, "OK" if v is None else f"VIOLATION version={v.version_index}")


def cmd_app_balance(uni: Universe, args) -> int:
    print(derive_numeric_state(uni.app(args.app), args.key))
    return 0


def cmd_app_checkpoint(uni: Universe, args) -> int:
    for v in checkpoint(uni.app(args.app), uni.tick(args.clock), args.keys or None):
        print(f"key={v.key} version={v.version_index} time={_time(v.logical_time)} digest={v.value_digest.hex()}")
    return 0


# store


def _store(uni: Universe, name: str) -> ReplicaSet:
    try:
        return uni.stores[name]
    except KeyError:
        raise errors.NotFound(f"no store for app {name!r}") from None


def cmd_store_fail(uni: Universe, args) -> int:
    store = fail_replica(_store(uni, args.app), args.index)
    print(f"failed={','.join(map(str, sorted(store.failed)))}")
    return 0


def cmd_store_recover(uni: Universe, args) -> int:
    store = recover_replica(_store(uni, args.app), args.index)
    print(f"failed={','.join(map(str, sorted(store.failed)))}")
    return 0


def cmd_store_report(uni: Universe, args) -> int:
    report = storage_report(_store(uni, args.app))
    print(f"total={report.total_versions}")
    for key, count in report.per_key.items():
        print(f"{key}={count}")
    return 0


# archive


def cmd_archive_snapshot(uni: Universe, args) -> int:
    chain = uni.chain(args.chain)
    height = chain.height if args.height is None else args.height
    if height is None:
        raise errors.ExpirationBeyondTip("chain has no confirmed blocks")
    prev = parse_digest(args.prev) if args.prev else ZERO_DIGEST
    archive = snapshot(chain, height, prev)
    Path(args.out).write_bytes(archive_write(archive))
    print(archive.archive_digest.hex())
    return 0


def cmd_archive_verify(uni: Universe, args) -> int:
    archive = archive_read(Path(args.file).read_bytes(), verify=False)
    expected = parse_digest(args.expected_prev) if args.expected_prev else archive.prev_archive_digest
    v = verify_archive(archive, expected)
    return _verdict(v is None, "OK" if v is None else f"VIOLATION reason={v.reason}")


def cmd_archive_export(uni: Universe, args) -> int:
    archives = uni.app(args.app).archives.archives
    if not 0 <= args.index < len(archives):
        raise errors.NotFound(f"app {args.app!r} has no archive {args.index}")
    Path(args.out).write_bytes(archive_write(archives[args.index]))
    print(archives[args.index].archive_digest.hex())
    return 0


def cmd_archive_import(uni: Universe, args) -> int:
    archive = archive_read(Path(args.file).read_bytes())
    if args.expected_prev and archive.prev_archive_digest != parse_digest(args.expected_prev):
        raise errors.DigestMismatch("archive does not link to the expected predecessor")
    entries = sum(len(b.entries) for b in archive.blocks)
    print(
        f"chain_id={archive.chain_id.hex()} expiration_height={archive.expiration_height} "
        f"blocks={len(archive.blocks)} entries={entries} digest={archive.archive_digest.hex()}"
    )
    return 0


# migrate


def _migrate_done(uni: Universe, moved, receipt) -> int:
    uni.apps[moved.app_id] = moved
    sys.stdout.write(receipt.render())
    return 0


def cmd_migrate_full_log(uni: Universe, args) -> int:
    ledger = uni.app(args.app)
    moved, receipt = migrate_full_log(ledger, ledger.chain, uni.chain(args.to), uni.tick(args.clock))
    return _migrate_done(uni, moved, receipt)


def cmd_migrate_existence_only(uni: Universe, args) -> int:
    ledger = uni.app(args.app)
    program = Path(args.copier).read_bytes() if args.copier else default_copier_program()
    moved, receipt = migrate_existence_only(
        ledger, ledger.chain, uni.chain(args.to), program, uni.tick(args.clock), args.copier_id
    )
    return _migrate_done(uni, moved, receipt)


def cmd_migrate_restart(uni: Universe, args) -> int:
    moved, receipt = migrate_restart_initial(uni.app(args.app), uni.chain(args.to))
    return _migrate_done(uni, moved, receipt)


# verification


def cmd_verify_archive_chain(uni: Universe, args) -> int:
    chain = uni.chain(args.anchor_from)
    apps = [args.app] if args.app else sorted(
        a for a, ledger in uni.apps.items() if get_entries(chain, ledger.reserved_key(ANCHOR_NAME))
    )
    if len(apps) != 1:
        raise errors.UsageError(f"chain {args.anchor_from!r} anchors {len(apps)} apps; pick one with --app")
    ledger = uni.app(apps[0])
    anchors = get_entries(chain, ledger.reserved_key(ANCHOR_NAME))
    if not anchors:
        raise errors.NotFound(f"no anchor for {apps[0]!r} on chain {args.anchor_from!r}")
    v = verify_archive_chain(ledger.archives, anchors[-1].payload.data)
    return _verdict(v is None, "OK" if v is None else f"VIOLATION position={v.position} reason={v.reason}")


def cmd_prove(uni: Universe, args) -> int:
    proof = prove_existence(uni.app(args.app), args.key, args.version)
    Path(args.out).write_bytes(proof_write(proof))
    c = proof.claim
    where = "live" if c.archive_index is None else f"archive:{c.archive_index}"
    print(f"key={c.key} digest={c.payload_digest.hex()} chain={c.chain_id.hex()} at={where} height={c.height}")
    return 0


def cmd_verify_proof(uni: Universe, args) -> int:
    ledger = uni.app(args.app)
    proof = proof_read(Path(args.file).read_bytes())
    verdict = verify_existence(proof, current_anchor(ledger), evidence_for(ledger))
    return _verdict(verdict.accepted, verdict.label)


def cmd_verify_copied(uni: Universe, args) -> int:
    ledger = uni.app(args.app)
    if ledger.attestation is None:
        raise errors.NotFound(f"app {args.app!r} has no existence-only import")
    imported = ledger.imported.get(args.key)
    if args.digest:
        digest = parse_digest(args.digest)
    elif args.value is not None:
        digest = sha256(parse_value(args.value))
    else:
        raise errors.UsageError("give --value or --digest")
    source = bytes.fromhex(args.source) if args.source else (imported.source_chain_id if imported else bytes(16))
    height = args.height if args.height is not None else (imported.source_time[0] if imported else 0)
    claim = ExistenceClaim(ledger.chain_key(args.key), digest, source, None, height)
    verdict = verify_existence_copied(claim, ledger.import_chain, ledger.attestation)
    return _verdict(verdict.accepted, verdict.label)


# universe


def cmd_universe_save(uni: Universe, args) -> int:
    uni.save(args.to)
    print(f"saved {args.to}")
    return 0


def cmd_universe_load(uni: Universe, args) -> int:
    loaded = Universe.load(args.source)
    uni.__dict__.update(loaded.__dict__)
    print(f"loaded {args.source}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--universe", default=argparse.SUPPRESS, help="universe directory (default: ./universe)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for a new universe")
    common.add_argument("--clock", type=int, default=argparse.SUPPRESS, help="logical clock value (ms) for this command")

    parser = _Parser(prog="chainport", parents=[common], description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    def group(name: str, help: str):
        p = groups.add_parser(name, help=help)
        return p.add_subparsers(dest="command", required=True)

    def command(sub, name: str, func, help: str):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    chain = group("chain", "simulated chains")
    command(chain, "create", cmd_chain_create, "create an empty chain").add_argument("--id", required=True)
    command(chain, "confirm", cmd_chain_confirm, "confirm pending entries into a block").add_argument("chain")
    command(chain, "verify", cmd_chain_verify, "check every block digest and link").add_argument("chain")
    p = command(chain, "entries", cmd_chain_entries, "list confirmed entries for a raw key")
    p.add_argument("chain")
    p.add_argument("key")

    app = group("app", "applications")
    p = command(app, "create", cmd_app_create, "register an application")
    p.add_argument("app")
    p.add_argument("--chain", required=True)
    p.add_argument("--design", choices=["A", "B"], default="A")
    p.add_argument("--replicas", type=int, default=3)
    p.add_argument("--no-change-verification", action="store_true")
    p = command(app, "put", cmd_app_put, "write a value (0x-hex or text) or a numeric delta")
    p.add_argument("app")
    p.add_argument("key")
    p.add_argument("value", nargs="?")
    p.add_argument("--delta", type=int)
    for name, func, help in [
        ("get", cmd_app_get, "current value"),
        ("history", cmd_app_history, "all versions"),
        ("verify-changes", cmd_app_verify_changes, "recheck every version digest"),
        ("balance", cmd_app_balance, "sum of numeric deltas"),
    ]:
        p = command(app, name, func, help)
        p.add_argument("app")
        p.add_argument("key")
    p = command(app, "checkpoint", cmd_app_checkpoint, "record current digests on chain (overwrite mode)")
    p.add_argument("app")
    p.add_argument("keys", nargs="*")

    store = group("store", "design-B replica sets")
    for name, func, help in [("fail", cmd_store_fail, "fail a replica"), ("recover", cmd_store_recover, "recover a replica")]:
        p = command(store, name, func, help)
        p.add_argument("app")
        p.add_argument("index", type=int)
    command(store, "report", cmd_store_report, "retained version counts").add_argument("app")

    archive = group("archive", "chain archives")
    p = command(archive, "snapshot", cmd_archive_snapshot, "write a truncated archive of a chain")
    p.add_argument("chain")
    p.add_argument("--height", type=int)
    p.add_argument("--prev")
    p.add_argument("--out", required=True)
    p = command(archive, "verify", cmd_archive_verify, "verify an archive file")
    p.add_argument("file")
    p.add_argument("--expected-prev")
    p = command(archive, "export", cmd_archive_export, "write one of an app's archives to a file")
    p.add_argument("app")
    p.add_argument("index", type=int)
    p.add_argument("--out", required=True)
    p = command(archive, "import", cmd_archive_import, "read and fully verify an archive file")
    p.add_argument("file")
    p.add_argument("--expected-prev")

    migrate = group("migrate", "move an app to another chain")
    p = command(migrate, "full-log", cmd_migrate_full_log, "archive, anchor and re-home")
    p.add_argument("app")
    p.add_argument("--to", required=True)
    p = command(migrate, "existence-only", cmd_migrate_existence_only, "copy latest versions and attest the copier")
    p.add_argument("app")
    p.add_argument("--to", required=True)
    p.add_argument("--copier", help="copier program file (default: the built-in copier's source)")
    p.add_argument("--copier-id", default=COPIER_ID)
    p = command(migrate, "restart", cmd_migrate_restart, "start over empty")
    p.add_argument("app")
    p.add_argument("--to", required=True)

    verify = group("verify", "cross-object verification")
    p = command(verify, "archive-chain", cmd_verify_archive_chain, "verify an app's archive chain against an on-chain anchor")
    p.add_argument("--anchor-from", required=True)
    p.add_argument("--app")

    p = groups.add_parser("prove", parents=[common], help="write an existence proof")
    p.set_defaults(func=cmd_prove)
    p.add_argument("app")
    p.add_argument("key")
    p.add_argument("version", type=int)
    p.add_argument("--out", required=True)
    p = groups.add_parser("verify-proof", parents=[common], help="verify a proof against the app's current anchor")
    p.set_defaults(func=cmd_verify_proof)
    p.add_argument("file")
    p.add_argument("--app", required=True)
    p = groups.add_parser("verify-copied", parents=[common], help="check a claim against existence-only copies")
    p.set_defaults(func=cmd_verify_copied)
    p.add_argument("app")
    p.add_argument("key")
    p.add_argument("--value")
    p.add_argument("--digest")
    p.add_argument("--height", type=int)
    p.add_argument("--source", help="source chain id (hex)")

    uni = group("universe", "persistence")
    command(uni, "save", cmd_universe_save, "write the universe to another directory").add_argument("--to", required=True)
    command(uni, "load", cmd_universe_load, "replace this universe with a saved one").add_argument(
        "--from", dest="source", required=True
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        directory = getattr(args, "universe", "universe")
        args.clock = getattr(args, "clock", None)
        with locked(directory):
            uni = Universe.open(directory, getattr(args, "seed", None))
            code = args.func(uni, args)
            uni.save(directory)
        return code
    except errors.ChainportError as exc:
        print(f"ERROR {exc.code}: {' '.join(exc.message.split())}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"ERROR io: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
