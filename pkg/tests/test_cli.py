import csv
import io
import json

import pytest

from lattice_ppt import cli, ppt
from lattice_ppt.census import ResultCache
from lattice_ppt.lattice import parse_set


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def test_check_writes_verifiable_certificate(capsys, tmp_path):
    cert_path = tmp_path / "cert.json"
    code, out = run(capsys, "check", "--set", "00,11,21,31", "--cache-dir", str(tmp_path / "c"),
                    "--certificate", str(cert_path))
    assert code == 0
    data = json.loads(out)
    assert data["alpha"] == "7/8" and data["certificate_verified"] and data["verdict"] == "indistinguishable"
    cert = ppt.certificate_from_json(json.loads(cert_path.read_text()))
    assert ppt.verify_certificate(parse_set("00,11,21,31"), cert)
    assert ResultCache(tmp_path / "c").read(2, "00,11,21,31").alpha == "7/8"


def test_check_distinguishable_set(capsys):
    code, out = run(capsys, "check", "--set", "00,01,02", "--no-cache")
    assert code == 0 and json.loads(out)["alpha"] == "1"


@pytest.mark.parametrize("bad", ["00,00", "00,4", "0,11"])
def test_check_rejects_malformed_sets(capsys, bad):
    assert cli.main(["check", "--set", bad, "--no-cache"]) == 2


def test_unknown_command_and_missing_args(capsys):
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["lemmas", "--t", "2"]) == 2
    assert cli.main([]) == 2


def test_lemmas(capsys):
    code, out = run(capsys, "lemmas", "--t", "2", "--m", "2")
    assert code == 0
    data = json.loads(out)
    assert data["min_count"] == data["max_count"] == 2


def test_lemmas_size_guard(capsys):
    assert cli.main(["lemmas", "--t", "4", "--m", "6"]) == 2


def test_sample_is_byte_identical_without_timestamps(capsys, tmp_path):
    argv = ["sample", "--t", "2", "--k", "4", "--samples", "12", "--seed", "7", "--no-timestamp"]
    first = run(capsys, *argv, "--no-cache")
    second = run(capsys, *argv, "--cache-dir", str(tmp_path))
    third = run(capsys, *argv, "--cache-dir", str(tmp_path))
    assert first[0] == 0 and first == second == third


def test_sample_csv(capsys):
    code, out = run(capsys, "sample", "--t", "2", "--k", "4", "--samples", "5", "--no-cache",
                    "--no-timestamp", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 5
    assert all(r["t"] == "2" and r["k"] == "4" for r in rows)


def test_families_csv_and_text(capsys):
    code, out = run(capsys, "families", "--format", "csv")
    assert code == 0 and out.startswith("key,value")
    code, out = run(capsys, "families", "--format", "text")
    assert code == 0 and "00,01,02,13,23,33" in out


def test_output_file(capsys, tmp_path):
    target = tmp_path / "bound.json"
    code, out = run(capsys, "bound", "--set", "00,11,21,31", "--output", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["beta_prime"] == "7/8"


def test_oracle_t1(capsys):
    code, out = run(capsys, "oracle", "--t", "1")
    assert code == 0 and json.loads(out)["passed"]


def test_reduced_costs(capsys):
    code, out = run(capsys, "reduced-costs", "--set", "00,11,21,31")
    assert code == 0 and json.loads(out)["passed"]
