"""A CLI scenario touching every command group, shared by the CLI and acceptance tests."""

import contextlib
import io
from pathlib import Path

from chainport.cli import main

SCRIPT = [
    "chain create --id demo",
    "chain confirm demo",
    "chain create --id chain2",
    "chain confirm chain2",
    "chain create --id chain3",
    "chain confirm chain3",
    "chain create --id chain4",
    "chain confirm chain4",
    "app create demo-app --chain demo",
    "app put demo-app alice 0x05",
    "app put demo-app bob hello",
    "app put demo-app acct --delta 7",
    "app put demo-app acct --delta -2",
    "app create vault --chain demo --design B --replicas 3",
    "app put vault doc v1",
    "app put vault doc v2",
    "store fail vault 0",
    "app get vault doc",
    "store recover vault 0",
    "app create cache --chain demo --design B --no-change-verification",
    "app put cache page one",
    "app put cache page two",
    "app checkpoint cache",
    "prove demo-app alice 0 --out {tmp}/alice0.bcpf",
    "migrate full-log demo-app --to chain2",
    "verify archive-chain --anchor-from chain2",
    "app put demo-app alice 0x06",
    "migrate full-log demo-app --to chain3",
    "verify archive-chain --anchor-from chain3",
    "verify-proof {tmp}/alice0.bcpf --app demo-app",
    "archive export demo-app 0 --out {tmp}/first.bcar",
    "archive export demo-app 1 --out {tmp}/second.bcar",
    "archive verify {tmp}/first.bcar",
    "archive import {tmp}/second.bcar",
    "archive snapshot chain3 --out {tmp}/chain3.bcar",
    "migrate existence-only vault --to chain4",
    "verify-copied vault doc --value v2",
    "migrate restart cache --to chain4",
    "app history demo-app alice",
    "app balance demo-app acct",
    "app verify-changes demo-app alice",
    "store report vault",
    "chain verify chain3",
    "chain entries chain2 demo-app/__anchor",
]


def run(universe, command, seed=7):
    """Run one CLI command; returns (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    argv = command.split() + ["--universe", str(universe), "--seed", str(seed)]
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def run_script(workdir, seed=7):
    """Run SCRIPT in ``workdir``; returns the transcript and every file written, by relative path."""
    workdir = Path(workdir)
    universe = workdir / "universe"
    transcript = []
    for line in SCRIPT:
        code, out, err = run(universe, line.format(tmp=workdir), seed)
        transcript.append((line, code, out, err))
    files = {
        str(p.relative_to(workdir)): p.read_bytes()
        for p in sorted(workdir.rglob("*"))
        if p.is_file() and not p.name.endswith(".lock")
    }
    return transcript, files
