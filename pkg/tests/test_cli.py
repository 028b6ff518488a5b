import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from blecert.cli import main

GOLDEN = Path(__file__).parent / "golden"
MAC = "A4:C1:38:00:00:2A"


@pytest.fixture
def cli(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(main, ["--home", str(tmp_path / "ca"), *args])

    return invoke


def _json(result):
    assert result.exit_code == 0, result.output
    return json.loads(result.output)


def test_pair_demo_golden(cli):
    first = _json(cli("pair-demo", "--seed", "7", "--json"))
    assert first == json.loads((GOLDEN / "pair_demo_seed7.json").read_text())
    assert first == _json(cli("pair-demo", "--seed", "7", "--json"))


def test_pair_demo_text(cli):
    result = cli("pair-demo", "--seed", "7")
    assert result.exit_code == 0
    assert "EstablishedSecurely" in result.output and "<redacted>" in result.output
    revealed = cli("pair-demo", "--seed", "7", "--reveal-keys")
    assert "<redacted>" not in revealed.output


def test_size_report_golden(cli):
    doc = _json(cli("size-report", "--json"))
    assert doc == json.loads((GOLDEN / "size_report.json").read_text())
    assert (doc["x509_total"], doc["ble_total"], doc["reduction_percent"]) == (1518, 103, 93.2)


def test_attack_demo_golden(cli):
    doc = _json(cli("attack-demo", "--strategy", "key-sub", "--baseline", "--trials", "3", "--json"))
    assert doc == json.loads((GOLDEN / "attack_keysub_baseline.json").read_text())


def test_attack_demo_hundred_trials(cli):
    doc = _json(cli("attack-demo", "--strategy", "key-sub", "--baseline", "--trials", "100", "--json"))
    assert len(doc) == 100
    assert {d["outcome"] for d in doc} == {"CompromiseDetectedByHarness"}


def test_attack_demo_certificate_mode_text(cli):
    result = cli("attack-demo", "--strategy", "cert-sub", "--trials", "5")
    assert result.exit_code == 0
    assert "AbortedWithReason=5" in result.output


def test_authority_workflow(cli, tmp_path):
    assert cli("bleca", "init", "--seed", "1").exit_code == 0
    assert cli("bleca", "init").exit_code == 1
    assert cli("keygen", "--out", "maker", "--seed", "2").exit_code == 0
    assert cli("keygen", "--out", "dev", "--seed", "3").exit_code == 0
    assert cli("bleca", "register", "--manufacturer-key", "maker.pub").exit_code == 0
    assert cli("bleca", "sign-request", "--manufacturer-key", "maker.key", "--mac", MAC,
               "--subject-key", "dev.pub", "--out", "req.sig", "--seed", "4").exit_code == 0
    issued = cli("bleca", "issue", "--mac", MAC, "--subject-key", "dev.pub", "--request-sig", "req.sig",
                 "--out", "dev.cert")
    assert issued.exit_code == 0, issued.output

    info = _json(cli("certinfo", "dev.cert", "--json"))
    assert info["status"] == "valid" and info["size"] == 103 and info["serial"] == MAC

    dup = cli("bleca", "issue", "--mac", MAC, "--subject-key", "dev.pub", "--request-sig", "req.sig")
    assert dup.exit_code == 1 and "DuplicateSerial" in dup.output

    lookup = cli("bleca", "lookup", "--mac", MAC.lower())
    assert lookup.output.strip() == issued.output.strip()
    assert cli("bleca", "lookup", "--mac", "00:00:00:00:00:01").exit_code == 1


def test_unregistered_manufacturer(cli):
    cli("bleca", "init", "--seed", "1")
    cli("keygen", "--out", "maker", "--seed", "2")
    cli("keygen", "--out", "dev", "--seed", "3")
    cli("bleca", "sign-request", "--manufacturer-key", "maker.key", "--mac", MAC,
        "--subject-key", "dev.pub", "--out", "req.sig")
    result = cli("bleca", "issue", "--mac", MAC, "--subject-key", "dev.pub", "--request-sig", "req.sig")
    assert result.exit_code == 1 and "RequestRejected" in result.output


def test_certinfo_truncated(cli, tmp_path):
    (tmp_path / "short.cert").write_text("01" * 50)
    result = cli("certinfo", "short.cert")
    assert result.exit_code == 1 and "BadLength" in result.output


def test_certinfo_wrong_root(cli, tmp_path):
    cli("bleca", "init", "--seed", "1")
    cli("keygen", "--out", "maker", "--seed", "2")
    cli("keygen", "--out", "dev", "--seed", "3")
    cli("keygen", "--out", "other", "--seed", "9")
    cli("bleca", "register", "--manufacturer-key", "maker.pub")
    cli("bleca", "sign-request", "--manufacturer-key", "maker.key", "--mac", MAC,
        "--subject-key", "dev.pub", "--out", "req.sig")
    cli("bleca", "issue", "--mac", MAC, "--subject-key", "dev.pub", "--request-sig", "req.sig", "--out", "dev.cert")
    result = cli("certinfo", "dev.cert", "--root", "other.pub")
    assert result.exit_code == 1 and "BadSignature" in result.output


def test_key_update_round_trip(cli, tmp_path):
    cli("bleca", "init", "--seed", "1")
    cli("keygen", "--out", "maker", "--seed", "2")
    cli("keygen", "--out", "dev", "--seed", "3")
    cli("keygen", "--out", "new", "--seed", "5")
    cli("bleca", "register", "--manufacturer-key", "maker.pub")
    cli("bleca", "sign-request", "--manufacturer-key", "maker.key", "--mac", MAC,
        "--subject-key", "dev.pub", "--out", "req.sig")
    cli("bleca", "issue", "--mac", MAC, "--subject-key", "dev.pub", "--request-sig", "req.sig", "--out", "dev.cert")
    (tmp_path / "factory.secret").write_text("00112233445566778899aabbccddeeff\n")

    cli("bleca", "sign-request", "--manufacturer-key", "maker.key", "--mac", MAC,
        "--subject-key", "new.pub", "--out", "new.sig")
    assert cli("bleca", "reissue", "--mac", "00:00:00:00:00:01", "--subject-key", "new.pub",
               "--request-sig", "new.sig").exit_code == 1
    reissued = cli("bleca", "reissue", "--mac", MAC, "--subject-key", "new.pub", "--request-sig", "new.sig",
                   "--out", "new.cert")
    assert reissued.exit_code == 0, reissued.output

    built = cli("key-update", "build", "--factory-secret", "factory.secret", "--new-key", "new.key",
                "--cert", "new.cert", "--now", "1000", "--out", "update.pkg", "--seed", "6")
    assert built.exit_code == 0, built.output

    old_key = (tmp_path / "dev.key").read_text()
    stale = cli("key-update", "apply", "--factory-secret", "factory.secret", "--device-key", "dev.key",
                "--device-cert", "dev.cert", "--package", "update.pkg", "--now", "2000")
    assert stale.exit_code == 1 and "Disconnected(StaleTimestamp)" in stale.output
    assert (tmp_path / "dev.key").read_text() == old_key

    ok = cli("key-update", "apply", "--factory-secret", "factory.secret", "--device-key", "dev.key",
             "--device-cert", "dev.cert", "--package", "update.pkg", "--now", "1100")
    assert ok.exit_code == 0 and "Applied" in ok.output
    assert (tmp_path / "dev.key").read_text() == (tmp_path / "new.key").read_text()
    assert _json(cli("certinfo", "dev.cert", "--json"))["subject_public_key"] == (tmp_path / "new.pub").read_text().strip()


def test_energy_command(cli, tmp_path):
    (tmp_path / "unit.txt").write_text("e_wu=0\ne_tx=1\ne_rx=1\ne_ifs=0\ne_slp=0\n")
    doc = _json(cli("energy", "--params", "unit.txt", "--json"))
    assert doc == {"cert_size": 103, "fragments": 1, "cert_rx_uJ": 131.0, "cert_tx_uJ": 131.0}
    big = _json(cli("energy", "--params", "unit.txt", "--cert-size", "1518", "--json"))
    assert big["fragments"] == 7
    report = _json(cli("energy", "--params", "unit.txt", "--report", "--json"))
    assert report["handshake_mJ"]["verify_only"] == 35.09


def test_energy_bad_params(cli, tmp_path):
    (tmp_path / "bad.txt").write_text("e_wu=0\n")
    result = cli("energy", "--params", "bad.txt")
    assert result.exit_code == 1 and "missing" in result.output


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "blecert", "size-report"], capture_output=True, text=True)
    assert out.returncode == 0 and "93.2%" in out.stdout
