"""A named collection of chains, stores, apps and archive chains, persisted to a directory.

Directory layout::

    universe.manifest          canonical key=value lines
    chains/<name>.bcar         one archive-format file per chain
    archives/<app>/<k>.bcar    the app's archive chain, one file per archive
    stores/<app>.kv            replica contents (design B apps)
"""

from __future__ import annotations

import fcntl
import os
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import errors
from ._wire import U64, sha256
from .archive import ArchiveChain, archive_read, archive_write, chain_read, chain_write
from .chain import Chain
from .ledger import AppConfig, AppLedger, Segment, StorageDesign
from .migration import load_imported
from .store import ReplicaSet, RetentionMode

MANIFEST = "universe.manifest"
FORMAT = "chainport-universe/1"
NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,127}$")


def check_name(kind: str, name: str) -> str:
    if not NAME_RE.match(name):
        raise errors.UsageError(f"invalid {kind} name {name!r} (letters, digits, '.', '_', '-')")
    return name


@dataclass
class Universe:
    seed: int = 0
    clock: int = 0
    chains: dict[str, Chain] = field(default_factory=dict)
    stores: dict[str, ReplicaSet] = field(default_factory=dict)
    apps: dict[str, AppLedger] = field(default_factory=dict)

    def chain_id_for(self, name: str) -> bytes:
        return sha256(b"chainport/chain-id" + U64.pack(self.seed) + name.encode("utf-8"))[:16]

    def create_chain(self, name: str) -> Chain:
        check_name("chain", name)
        if name in self.chains:
            raise errors.UsageError(f"chain {name!r} already exists")
        chain = Chain(self.chain_id_for(name))
        self.chains[name] = chain
        return chain

    def chain(self, name: str) -> Chain:
        try:
            return self.chains[name]
        except KeyError:
            raise errors.NotFound(f"no chain named {name!r}") from None

    def chain_name(self, chain: Chain) -> str:
        for name, c in self.chains.items():
            if c is chain:
                return name
        raise errors.NotFound(f"chain {chain.chain_id.hex()} is not part of this universe")

    def app(self, app_id: str) -> AppLedger:
        try:
            return self.apps[app_id]
        except KeyError:
            raise errors.NotFound(f"no app named {app_id!r}") from None

    def tick(self, override: int | None = None) -> int:
        """Advance the logical clock by one millisecond, or jump to ``override``."""
        self.clock = self.clock + 1 if override is None else override
        return self.clock

    # persistence

    def manifest(self) -> str:
        lines = [f"format={FORMAT}", f"seed={self.seed}", f"clock={self.clock}"]
        for name in sorted(self.chains):
            lines.append(f"chain.{name}={self.chains[name].chain_id.hex()}")
        for name in sorted(self.stores):
            s = self.stores[name]
            lines += [
                f"store.{name}.replicas={s.n_replicas}",
                f"store.{name}.mode={s.mode.value}",
                f"store.{name}.failed={','.join(str(i) for i in sorted(s.failed))}",
            ]
        for app_id in sorted(self.apps):
            ledger = self.apps[app_id]
            cfg = ledger.config
            import_at = ""
            if ledger.attestation is not None:
                import_at = f"{self.chain_name(ledger.import_chain)}:{ledger.attestation.recorded_at[0]}"
            lines += [
                f"app.{app_id}.design={cfg.storage_design.value}",
                f"app.{app_id}.change_verification={int(cfg.requires_change_verification)}",
                f"app.{app_id}.namespace={cfg.key_namespace}",
                f"app.{app_id}.chain={self.chain_name(ledger.chain)}",
                f"app.{app_id}.home_since={ledger.home_since}",
                f"app.{app_id}.archive_anchor={ledger.archive_anchor.hex() if ledger.archive_anchor else ''}",
                f"app.{app_id}.segments={','.join(f'{s.archive_index}:{s.since_height}' for s in ledger.segments)}",
                f"app.{app_id}.archives={len(ledger.archives)}",
                f"app.{app_id}.import_at={import_at}",
            ]
        return "\n".join(lines) + "\n"

    def save(self, directory: str | os.PathLike) -> None:
        root = Path(directory)
        for sub in ("chains", "archives", "stores"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        for name, chain in self.chains.items():
            _write(root / "chains" / f"{name}.bcar", chain_write(chain))
        for app_id, ledger in self.apps.items():
            adir = root / "archives" / app_id
            adir.mkdir(exist_ok=True)
            for k, archive in enumerate(ledger.archives.archives):
                _write(adir / f"{k:04d}.bcar", archive_write(archive))
            for stale in adir.glob("*.bcar"):
                if int(stale.stem) >= len(ledger.archives):
                    stale.unlink()
        for name, store in self.stores.items():
            rows = [
                f"{i}\t{key.encode('utf-8').hex()}\t{v}\t{value.hex()}"
                for i, replica in enumerate(store.replicas)
                for key in sorted(replica)
                for v, value in sorted(replica[key].items())
            ]
            _write(root / "stores" / f"{name}.kv", ("\n".join(rows) + "\n" if rows else "").encode())
        _write(root / MANIFEST, self.manifest().encode("utf-8"))

    @classmethod
    def load(cls, directory: str | os.PathLike) -> Universe:
        root = Path(directory)
        fields = _parse_manifest((root / MANIFEST).read_text("utf-8"))
        top = fields.pop("", {})
        if top.get("format") != FORMAT:
            raise errors.MalformedStream(f"not a {FORMAT} manifest")
        uni = cls(seed=int(top["seed"]), clock=int(top["clock"]))

        for name, chain_id in sorted(fields.get("chain", {}).items()):
            chain = chain_read((root / "chains" / f"{name}.bcar").read_bytes())
            if chain.chain_id.hex() != chain_id:
                raise errors.MalformedStream(f"chain file {name} has id {chain.chain_id.hex()}, manifest says {chain_id}")
            uni.chains[name] = chain

        for name, props in sorted(_group(fields.get("store", {})).items()):
            n = int(props["replicas"])
            replicas: list[dict[str, dict[int, bytes]]] = [{} for _ in range(n)]
            for line in (root / "stores" / f"{name}.kv").read_text().splitlines():
                i, key, v, value = line.split("\t")
                replicas[int(i)].setdefault(bytes.fromhex(key).decode("utf-8"), {})[int(v)] = bytes.fromhex(value)
            failed = {int(x) for x in props["failed"].split(",") if x}
            uni.stores[name] = ReplicaSet(n, RetentionMode(props["mode"]), replicas, failed)

        for app_id, props in sorted(_group(fields.get("app", {})).items()):
            config = AppConfig(
                app_id,
                StorageDesign(props["design"]),
                props["change_verification"] == "1",
                props["namespace"],
            )
            chain = uni.chain(props["chain"])
            archives = ArchiveChain()
            for k in range(int(props["archives"])):
                archives.append(archive_read((root / "archives" / app_id / f"{k:04d}.bcar").read_bytes()))
            segments = [Segment(int(a), int(h)) for a, h in (s.split(":") for s in props["segments"].split(",") if s)]
            ledger = AppLedger(
                config,
                chain,
                uni.stores.get(app_id),
                bytes.fromhex(props["archive_anchor"]) if props["archive_anchor"] else None,
                archives,
                segments,
                int(props["home_since"]),
            )
            if props["import_at"]:
                name, _, height = props["import_at"].rpartition(":")
                ledger.import_chain = uni.chain(name)
                ledger.imported, ledger.attestation = load_imported(ledger.import_chain, config.key_namespace, int(height))
            uni.apps[app_id] = ledger
        return uni

    @classmethod
    def open(cls, directory: str | os.PathLike, seed: int | None = None) -> Universe:
        """Load the universe in ``directory``, or start a fresh one."""
        if (Path(directory) / MANIFEST).exists():
            uni = cls.load(directory)
            if seed is not None and seed != uni.seed:
                raise errors.UsageError(f"universe was created with seed {uni.seed}, not {seed}")
            return uni
        return cls(seed=seed or 0)


def _write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _parse_manifest(text: str) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise errors.MalformedStream(f"manifest line without '=': {line!r}")
        kind, dot, rest = key.partition(".")
        if dot:
            out.setdefault(kind, {})[rest] = value
        else:
            out.setdefault("", {})[key] = value
    return out


def _group(flat: dict[str, str]) -> dict[str, dict[str, str]]:
    grouped: dict[str, dict[str, str]] = {}
    for key, value in flat.items():
        name, _, prop = key.rpartition(".")
        grouped.setdefault(name, {})[prop] = value
    return grouped


@contextmanager
def locked(directory: str | os.PathLike):
    """Hold an exclusive lock on ``directory`` for one command."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / ".lock", "w") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield root
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)
