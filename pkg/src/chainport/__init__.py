"""Portable blockchain applications: a minimal ledger API, storage designs A/B,
archive-chain migration between simulated chains, and existence proofs."""

from .archive import ArchiveChain, ChainArchive, archive_read, archive_write, snapshot, verify_archive, verify_archive_chain
from .chain import Block, Bytes, Chain, LedgerEntry, NumberList, confirm_block, get_entries, submit_entry, verify_chain
from .errors import ChainportError
from .ledger import (
    AppConfig,
    AppLedger,
    StateVersion,
    StorageDesign,
    checkpoint,
    create_app,
    derive_numeric_state,
    get_history,
    get_state,
    put_state,
    verify_state_changes,
)
from .migration import (
    CopierAttestation,
    MigrationMode,
    MigrationReceipt,
    migrate_existence_only,
    migrate_full_log,
    migrate_restart_initial,
)
from .proofs import (
    DestinationAnchor,
    Evidence,
    ExistenceClaim,
    ExistenceProof,
    LiveHead,
    Verdict,
    prove_existence,
    verify_existence,
    verify_existence_copied,
)
from .store import ReplicaSet, RetentionMode, fail_replica, recover_replica, storage_report, store_read, store_write

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "AppLedger",
    "ArchiveChain",
    "Block",
    "Bytes",
    "Chain",
    "ChainArchive",
    "ChainportError",
    "CopierAttestation",
    "DestinationAnchor",
    "Evidence",
    "ExistenceClaim",
    "ExistenceProof",
    "LedgerEntry",
    "LiveHead",
    "MigrationMode",
    "MigrationReceipt",
    "NumberList",
    "ReplicaSet",
    "RetentionMode",
    "StateVersion",
    "StorageDesign",
    "Verdict",
    "archive_read",
    "archive_write",
    "checkpoint",
    "confirm_block",
    "create_app",
    "derive_numeric_state",
    "fail_replica",
    "get_entries",
    "get_history",
    "get_state",
    "migrate_existence_only",
    "migrate_full_log",
    "migrate_restart_initial",
    "prove_existence",
    "put_state",
    "recover_replica",
    "snapshot",
    "storage_report",
    "store_read",
    "store_write",
    "submit_entry",
    "verify_archive",
    "verify_archive_chain",
    "verify_chain",
    "verify_existence",
    "verify_existence_copied",
    "verify_state_changes",
]
