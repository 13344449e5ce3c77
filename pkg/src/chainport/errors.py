"""Exception types. Every error carries a short machine-readable ``code``."""

from __future__ import annotations


class ChainportError(Exception):
    code = "error"

    def __init__(self, message: str = "") -> None:
        super().__init__(message or self.code)
        self.message = message or self.code


class KeyInvalid(ChainportError):
    code = "key-invalid"


class KeyTooLong(ChainportError):
    code = "key-too-long"


class PayloadInvalid(ChainportError):
    code = "payload-invalid"


class PayloadTooLarge(ChainportError):
    code = "payload-too-large"


class NonMonotonicClock(ChainportError):
    code = "non-monotonic-clock"


class ExpirationBeyondTip(ChainportError):
    code = "expiration-beyond-tip"


class SourceIntegrityError(ChainportError):
    code = "source-integrity"


class MalformedStream(ChainportError):
    code = "malformed-stream"


class DigestMismatch(ChainportError):
    code = "digest-mismatch"


class DuplicateApp(ChainportError):
    code = "duplicate-app"


class StoreRequired(ChainportError):
    code = "store-required"


class StoreMismatch(ChainportError):
    code = "store-mismatch"


class MigratedAway(ChainportError):
    code = "migrated-away"


class Unavailable(ChainportError):
    code = "unavailable"


class NotFound(ChainportError):
    code = "not-found"


class IntegrityError(ChainportError):
    """Off-chain value does not match the digest recorded on chain."""

    code = "integrity"


class HistoryDisabled(ChainportError):
    code = "history-disabled"


class ChangeVerificationUnsupported(ChainportError):
    code = "change-verification-unsupported"


class CheckpointNotApplicable(ChainportError):
    code = "checkpoint-not-applicable"


class DecodeError(ChainportError):
    code = "decode"


class NumericOverflow(ChainportError):
    code = "overflow"


class AttestationRequired(ChainportError):
    code = "attestation-required"


class MigrationError(ChainportError):
    code = "migration"


class ProofUnavailable(ChainportError):
    code = "proof-unavailable"


class UsageError(ChainportError):
    code = "usage"
