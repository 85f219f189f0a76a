import json
import subprocess
import sys

import pytest

from fiberband import cli
from fiberband.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, run

SCAN = ["band-scan", "--model", "step", "--b", "0.5", "--k", "-1..2", "--nk", "7", "--j-max", "2"]


def files(path):
    return sorted(p.name for p in path.iterdir()) if path.exists() else []


def test_band_scan_outputs(tmp_path):
    code, summary = run(SCAN + ["--out-dir", str(tmp_path), "--no-cache"])
    assert code == EXIT_OK
    assert files(tmp_path) == ["bands.csv", "bands.json", "bands.svg"]
    header = (tmp_path / "bands.csv").read_text().splitlines()[0]
    assert header == "k,j,lambda,velocity,err"
    assert summary["n_k"] == 7 and summary["j_max"] == 2
    svg = (tmp_path / "bands.svg").read_text()
    assert 'viewBox="0 0 800 600"' in svg


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(SCAN + ["--out-dir", str(d), "--no-cache"])[0] == EXIT_OK
    for name in files(a):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_cache_matches_fresh_scan(tmp_path):
    cache = tmp_path / "cache"
    outs = [tmp_path / n for n in ("cold", "warm", "fresh")]
    run(SCAN + ["--out-dir", str(outs[0]), "--cache-dir", str(cache), "--format", "csv"])
    assert len(files(cache)) == 2
    run(SCAN + ["--out-dir", str(outs[1]), "--cache-dir", str(cache), "--format", "csv"])
    run(SCAN + ["--out-dir", str(outs[2]), "--no-cache", "--format", "csv"])
    texts = {(d / "bands.csv").read_text() for d in outs}
    assert len(texts) == 1


def test_prefix_and_format(tmp_path):
    run(SCAN + ["--out-dir", str(tmp_path), "--no-cache", "--prefix", "run1", "--format", "json"])
    assert files(tmp_path) == ["run1_bands.json"]


@pytest.mark.parametrize(
    "argv",
    [
        ["band-scan", "--model", "step", "--b", "0.5", "--k", "2..-1"],
        ["band-scan", "--model", "step", "--b", "0.5", "--k", "abc"],
        ["band-scan", "--model", "step", "--b", "1.5", "--k", "0..1"],
        ["band-scan", "--model", "iwatsuka", "--B-plus", "0.5", "--B-minus", "1.0", "--k", "0..1"],
        ["current", "--model", "dirichlet", "--k", "0..3", "--nk", "7", "--window", "0.1..0.2", "--x-cut", "1"],
        ["robin", "--mode", "sector", "--theta", "pi"],
    ],
)
def test_invalid_input_exit_code_and_no_files(tmp_path, argv):
    out = tmp_path / "out"
    code, summary = run(argv + ["--out-dir", str(out), "--no-cache"])
    assert code == EXIT_INVALID and summary is None
    assert not out.exists()


def test_argparse_errors_exit_invalid(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["band-scan", "--model", "nonsense"])
    assert exc.value.code == EXIT_INVALID


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    from fiberband.errors import NumericalError

    def boom(*args, **kwargs):
        raise NumericalError("inverse iteration did not converge")

    monkeypatch.setattr(cli, "band_scan", boom)
    out = tmp_path / "out"
    code, _ = run(SCAN + ["--out-dir", str(out), "--no-cache"])
    assert code == EXIT_NUMERICAL
    assert not out.exists()


def test_config_file_and_flag_precedence(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(
        json.dumps(
            {
                "model": {"family": "MagneticStep", "b": 0.5},
                "k": "-1..2",
                "nk": 5,
                "j_max": 1,
                "policy": {"margin": 3.5},
                "formats": ["json"],
            }
        )
    )
    code, summary = run(["band-scan", "--config", str(config), "--nk", "9", "--out-dir", str(tmp_path / "o"), "--no-cache"])
    assert code == EXIT_OK
    assert summary["n_k"] == 9 and summary["j_max"] == 1
    data = json.loads((tmp_path / "o" / "bands.json").read_text())
    assert data["policy"]["margin"] == 3.5


def test_unknown_config_field(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"k": "0..1", "colour": "blue"}))
    code, _ = run(["band-scan", "--config", str(config), "--out-dir", str(tmp_path / "o")])
    assert code == EXIT_INVALID
    assert not (tmp_path / "o").exists()


def test_theta0_report(tmp_path):
    code, summary = run(["theta0", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    data = json.loads((tmp_path / "theta0.json").read_text())
    assert {"k0", "theta0", "second_derivative"} <= set(data)
    assert data["theta0"] == pytest.approx(0.5901, abs=1e-3)
    assert data["second_derivative"] > 0


def test_wire_figures(tmp_path):
    argv = ["figures", "--model", "wire", "--m", "0..1", "--j", "1..2", "--k", "2..6", "--nk", "9"]
    code, _ = run(argv + ["--out-dir", str(tmp_path), "--no-cache"])
    assert code == EXIT_OK
    names = files(tmp_path)
    assert "wire_bands.svg" in names and "wire_zoom.svg" in names
    assert "wire_m0.csv" in names and "wire_m1.csv" in names


def test_current_command(tmp_path):
    argv = ["current", "--model", "step", "--b", "0.5", "--k", "-3..3", "--nk", "31", "--j", "1", "--window", "0.5..0.9", "--x-cut", "0"]
    code, summary = run(argv + ["--out-dir", str(tmp_path), "--no-cache"])
    assert code == EXIT_OK
    assert summary["sandwich"] is True
    assert (tmp_path / "localization.csv").read_text().startswith("x,density\n")


def test_cache_purge(tmp_path):
    cache = tmp_path / "cache"
    run(SCAN + ["--out-dir", str(tmp_path / "o"), "--cache-dir", str(cache)])
    code, summary = run(["cache-purge", "--cache-dir", str(cache)])
    assert code == EXIT_OK
    assert files(cache) == []


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fiberband.cli"] + SCAN + ["--out-dir", str(tmp_path), "--no-cache", "--format", "csv"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["n_k"] == 7
