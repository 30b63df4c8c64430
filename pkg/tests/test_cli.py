import json
import subprocess
import sys

import pytest

from freeclt.cli import parse_series, run
from freeclt.errors import ConfigurationError
from freeclt.orthopoly import Basis


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def call_json(capsys, *argv):
    code, out, err = call(capsys, *argv)
    assert code == 0, err
    doc = json.loads(out)
    assert doc["schema"] == 1
    return doc


def error_doc(err):
    doc = json.loads(err.strip().splitlines()[-1])
    assert doc["schema"] == 1 and {"error", "message", "exit_code"} <= set(doc)
    return doc


def test_parse_series_forms():
    assert parse_series("U2").coeffs == (0, 0, 1.0) and parse_series("U2").basis is Basis.CHEBYSHEV
    assert parse_series("H3").basis is Basis.HERMITE
    assert parse_series("chebyshev:0,0.5,1").coeffs == (0, 0.5, 1)
    s = parse_series("expand:x2", world="free", max_deg=4)
    assert s.basis is Basis.CHEBYSHEV and abs(s.coeffs[2] - 1) < 1e-10
    with pytest.raises(ConfigurationError):
        parse_series("H2", world="free")
    with pytest.raises(ConfigurationError):
        parse_series("expand:nonsense")


def test_partitions(capsys):
    assert call_json(capsys, "partitions", "--rows", "2,2,2", "--class", "free-connected")["count"] == 1
    assert call_json(capsys, "partitions", "--rows", "2,2,2", "--class", "classical")["count"] == 8
    assert call_json(capsys, "partitions", "--rows", "1,1,1,1", "--class", "pairings")["count"] == 3
    doc = call_json(capsys, "partitions", "--rows", "2,2", "--class", "noncrossing", "--list")
    assert len(doc["partitions"]) == doc["count"]


def test_cumulant_with_oracle(capsys):
    doc = call_json(capsys, "cumulant", "--degrees", "2,2", "--times", "0,1", "--world", "free",
                    "--model", "geometric:0.5", "--oracle")
    assert doc["value"] == 0.25 and doc["agree"] is True
    doc = call_json(capsys, "cumulant", "--degrees", "2,2", "--times", "0,1", "--model", "geometric:0.5")
    assert doc["value"] == 0.5


def test_clt_scan_csv_and_json(capsys):
    code, out, _ = call(capsys, "clt-scan", "--series", "U2", "--model", "geometric:0.5", "--N", "16,32",
                        "--Rmax", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "N,R,kappa_raw,kappa_normalized,sigma2_ref" and len(lines) == 5
    doc = call_json(capsys, "clt-scan", "--series", "U2", "--N", "16", "--Rmax", "2", "--format", "json")
    assert doc["summability"]["summable"] and doc["series"]["basis"] == "chebyshev"


def test_clt_scan_is_byte_reproducible(capsys, tmp_path):
    argv = ["clt-scan", "--series", "H2", "--model", "power:1.5", "--N", "8,16", "--Rmax", "4"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(argv + ["--out", str(a), "--threads", "1"]) == 0
    assert run(argv + ["--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, out, _ = call(capsys, *argv)
    assert out.encode() == a.read_bytes()


def test_mc(capsys):
    doc = call_json(capsys, "mc", "--series", "H1", "--model", "tabulated:1", "--N", "32", "--reps", "400",
                    "--seed", "3")
    assert doc["reps"] == 400 and doc["N"] == 32
    again = call_json(capsys, "mc", "--series", "H1", "--model", "tabulated:1", "--N", "32", "--reps", "400",
                      "--seed", "3")
    assert again["sample_var"] == doc["sample_var"]


def test_rmt(capsys):
    doc = call_json(capsys, "rmt", "--series", "U1", "--model", "geometric:0.5", "--N", "2", "--dim", "256",
                    "--bins", "10")
    assert len(doc["histogram"]["centers"]) == 10


def test_breaking_modes(capsys):
    doc = call_json(capsys, "breaking", "--check53", "--m", "1", "--p", "2:inf")
    assert doc["satisfied"] and doc["rows"][0]["required_p"] == "inf"
    doc = call_json(capsys, "breaking", "--alpha", "--rows", "2,2", "--partition", "1-3,2-4", "--p", "2:2")
    assert doc["alpha_G"] == 2.0
    doc = call_json(capsys, "breaking", "--spectral", "--c", "1,0.5", "--d", "3:2", "--k", "3", "--j", "0,0,0")
    assert doc["lhs"] == 2.25 and doc["abs_err"] < 1e-6
    doc = call_json(capsys, "breaking", "--slope", "--N", "64,128,256")
    assert doc["within"]


def test_selftest(capsys):
    doc = call_json(capsys, "selftest", "--max-total", "4", "--max-rows", "3")
    assert doc["passed"] and doc["requests"] > 0


@pytest.mark.parametrize("argv,code", [
    (["bogus"], 2),
    ([], 2),
    (["clt-scan", "--series", "H2", "--world", "free"], 2),
    (["clt-scan", "--series", "U2", "--model", "geometric:1.5"], 2),
    (["cumulant", "--degrees", "2,x", "--times", "0,1"], 2),
    (["breaking", "--check53", "--m", "1", "--p", "2:0.5"], 2),
    (["partitions", "--rows", "2,2", "--threads", "0"], 2),
    (["cumulant", "--degrees", "7,7", "--times", "0,1", "--oracle"], 3),
    (["clt-scan", "--series", "U2", "--N", "200", "--Rmax", "3", "--method", "direct", "--budget", "1000"], 3),
    (["clt-scan", "--series", "U1", "--model", "tabulated:1,-0.5", "--N", "16"], 4),
    (["clt-scan", "--series", "U1", "--model", "power:0.6", "--N", "16"], 4),
    (["mc", "--series", "H1", "--model", "tabulated:1,0.9,0.9", "--N", "16", "--reps", "10"], 5),
])
def test_exit_codes_and_error_json(capsys, argv, code):
    got, out, err = call(capsys, *argv)
    assert got == code
    assert out == ""
    assert error_doc(err)["exit_code"] == code


def test_help_lists_exit_codes(capsys):
    code, out, _ = call(capsys, "--help")
    assert code == 0
    assert "exit codes" in out and "FREECLT_BUDGET" in out
    code, out, _ = call(capsys, "clt-scan", "--help")
    assert code == 0 and "hypothesis violation" in out


def test_config_files_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "scan.json"
    cfg.write_text(json.dumps({"subcommand": "clt-scan", "series": "U2", "model": "geometric:0.5",
                               "N": "16", "Rmax": 2}))
    _, out_cfg, _ = call(capsys, "--config", str(cfg))
    _, out_flags, _ = call(capsys, "clt-scan", "--series", "U2", "--model", "geometric:0.5", "--N", "16",
                           "--Rmax", "2")
    assert out_cfg == out_flags
    _, out, _ = call(capsys, "--config", str(cfg), "clt-scan", "--N", "32")
    assert out.splitlines()[1].startswith("32,2,")

    toml = tmp_path / "check.toml"
    toml.write_text('subcommand = "breaking"\nmode = "check53"\nm = 2\np = ["2:4"]\n')
    code, out, _ = call(capsys, "--config", str(toml))
    assert code == 0 and json.loads(out)["satisfied"]
    code, out, _ = call(capsys, "--config", str(toml), "breaking", "--p", "2:3")
    assert code == 0 and not json.loads(out)["satisfied"]


def test_config_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"subcommand": "clt-scan", "serie": "U2"}))
    code, _, err = call(capsys, "--config", str(cfg))
    assert code == 2 and "serie" in error_doc(err)["message"]
    code, _, _ = call(capsys, "--config", str(tmp_path / "missing.json"), "selftest")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "freeclt", "partitions", "--rows", "2,2", "--class", "pairings"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and json.loads(proc.stdout)["count"] == 3
    proc = subprocess.run([sys.executable, "-m", "freeclt", "bogus"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == 2 and json.loads(proc.stderr)["exit_code"] == 2
