import subprocess
import sys
from pathlib import Path

import pytest

from chainport.universe import Universe

import oracle
from scenario import SCRIPT, run, run_script


@pytest.fixture
def uni(tmp_path):
    return tmp_path / "u"


def ok(universe, command):
    code, out, err = run(universe, command)
    assert code == 0, err
    return out.strip()


def test_genesis_digest_matches_independent_layout(uni):
    ok(uni, "chain create --id demo")
    digest = ok(uni, "chain confirm demo --clock 0")
    ((_, expected),) = oracle.chain_blocks([(0, [])])
    assert digest == expected.hex()


def test_put_then_get(uni):
    ok(uni, "chain create --id demo")
    ok(uni, "chain confirm demo")
    ok(uni, "app create demo-app --chain demo")
    ok(uni, "app put demo-app alice 0x05")
    assert ok(uni, "app get demo-app alice") == "0x05"


def test_full_log_then_verify_archive_chain(uni):
    for cmd in ("chain create --id demo", "chain confirm demo", "chain create --id chain2", "chain confirm chain2",
                "app create demo-app --chain demo", "app put demo-app alice 0x05"):
        ok(uni, cmd)
    receipt = ok(uni, "migrate full-log demo-app --to chain2")
    assert receipt.splitlines()[:2] == ["app=demo-app", "mode=full-log"]
    assert ok(uni, "verify archive-chain --anchor-from chain2") == "OK"
    assert ok(uni, "app get demo-app alice") == "0x05"


def test_errors_are_single_line_with_exit_two(uni):
    code, out, err = run(uni, "app get nobody alice")
    assert (code, out) == (2, "")
    assert err.startswith("ERROR not-found: ") and err.count("\n") == 1
    ok(uni, "chain create --id demo")
    ok(uni, "chain confirm demo")
    ok(uni, "app create a --chain demo")
    code, _, err = run(uni, "app put a __anchor x")
    assert code == 2 and err.startswith("ERROR key-invalid: ")
    code, _, err = run(uni, "app frobnicate")
    assert code == 2 and err.startswith("ERROR usage: ")


def test_seed_is_fixed_per_universe(uni):
    ok(uni, "chain create --id demo")
    code, _, err = run(uni, "chain confirm demo", seed=8)
    assert code == 2 and err.startswith("ERROR usage: ")


def test_tampered_archive_is_a_violation_with_exit_one(tmp_path, uni):
    for cmd in ("chain create --id demo", "chain confirm demo", "chain confirm demo"):
        ok(uni, cmd)
    path = tmp_path / "a.bcar"
    ok(uni, f"archive snapshot demo --out {path}")
    assert ok(uni, f"archive verify {path}") == "OK"
    data = bytearray(path.read_bytes())
    data[60] ^= 1
    path.write_bytes(bytes(data))
    code, out, _ = run(uni, f"archive verify {path}")
    assert (code, out.strip()) == (1, "VIOLATION reason=digest-mismatch")
    code, _, err = run(uni, f"archive import {path}")
    assert code == 2 and err.startswith("ERROR digest-mismatch: ")


def test_tampered_proof_is_rejected_with_exit_one(tmp_path, uni):
    for cmd in ("chain create --id demo", "chain confirm demo", "app create a --chain demo", "app put a k v"):
        ok(uni, cmd)
    path = tmp_path / "p.bcpf"
    ok(uni, f"prove a k 0 --out {path}")
    assert ok(uni, f"verify-proof {path} --app a") == "ACCEPT"
    data = bytearray(path.read_bytes())
    data[-40] ^= 1  # inside the block header
    path.write_bytes(bytes(data))
    code, out, _ = run(uni, f"verify-proof {path} --app a")
    assert code == 1 and out.startswith("REJECT ")


def test_scenario_runs_clean(tmp_path):
    transcript, _ = run_script(tmp_path)
    failures = [(line, err) for line, code, _, err in transcript if code != 0]
    assert failures == []
    outputs = {line: out.strip() for line, _, out, _ in transcript}
    assert outputs["verify-proof {tmp}/alice0.bcpf --app demo-app"] == "ACCEPT"
    assert outputs["verify-copied vault doc --value v2"] == "ACCEPT-ATTESTED"
    assert outputs["app balance demo-app acct"] == "5"
    assert outputs["app get vault doc"] == "0x7632"


def test_save_load_save_is_identical(tmp_path):
    run_script(tmp_path)
    first, second = tmp_path / "copy1", tmp_path / "copy2"
    Universe.load(tmp_path / "universe").save(first)
    Universe.load(first).save(second)

    def files(root):
        return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file() and p.name != ".lock"}

    assert files(first) == files(second) == files(tmp_path / "universe")


def test_universe_save_and_load_commands(tmp_path, uni):
    ok(uni, "chain create --id demo")
    ok(uni, "chain confirm demo")
    ok(uni, f"universe save --to {tmp_path / 'backup'}")
    ok(uni, "chain confirm demo")
    ok(uni, f"universe load --from {tmp_path / 'backup'}")
    assert Universe.load(uni).chains["demo"].height == 0


def test_same_seed_same_bytes(tmp_path):
    a_t, a_files = run_script(tmp_path / "a")
    b_t, b_files = run_script(tmp_path / "b")
    assert a_files == b_files
    assert [t[1:] for t in a_t] == [t[1:] for t in b_t]


def test_different_seed_different_chain_ids(tmp_path):
    _, a = run_script(tmp_path / "a", seed=1)
    _, b = run_script(tmp_path / "b", seed=2)
    assert a["universe/chains/demo.bcar"] != b["universe/chains/demo.bcar"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "chainport", "chain", "create", "--id", "x", "--universe", str(tmp_path / "u")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0 and len(proc.stdout.strip()) == 32
    assert Path(tmp_path / "u" / "universe.manifest").exists()


def test_script_covers_every_command_group():
    groups = {line.split()[0] for line in SCRIPT}
    assert groups >= {"chain", "app", "store", "archive", "migrate", "verify", "prove", "verify-proof", "verify-copied"}
