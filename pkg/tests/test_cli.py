import json
import subprocess
import sys

import numpy as np
import pytest

from aeromap import fileio
from aeromap.cli import main
from aeromap.scenario import ArraySpec, Scenario, SourceSpec, dump


@pytest.fixture
def scn_file(tmp_path):
    path = tmp_path / "scenario.ini"
    dump(Scenario.default(), path)
    return path


@pytest.fixture
def exact_csm(tmp_path, scn_file):
    out = tmp_path / "exact.csm"
    assert main(["synth", "--scenario", str(scn_file), "--out", str(out), "--exact"]) == 0
    return out


def test_synth_estimated_and_exact(tmp_path, scn_file, exact_csm):
    out = tmp_path / "est.csm"
    assert main(["synth", "--scenario", str(scn_file), "--out", str(out)]) == 0
    C = fileio.read_csm(out)
    assert C.snapshots == 1000 and C.size == 16
    assert np.array_equal(C.entries, C.entries.conj().T)
    assert fileio.read_csm(exact_csm).snapshots == 0


def test_synth_is_byte_identical(tmp_path, scn_file):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for path in (a, b):
        assert main(["synth", "--scenario", str(scn_file), "--out", str(path)]) == 0
    assert main(["synth", "--scenario", str(scn_file), "--out", str(c), "--seed", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_synth_with_noise(tmp_path):
    path = tmp_path / "s.ini"
    dump(Scenario(noise=1e-6, exact=True), path)
    out = tmp_path / "n.csm"
    assert main(["synth", "--scenario", str(path), "--out", str(out)]) == 0
    base = tmp_path / "b.csm"
    dump(Scenario(exact=True), path)
    main(["synth", "--scenario", str(path), "--out", str(base)])
    diff = fileio.read_csm(out).entries - fileio.read_csm(base).entries
    assert np.allclose(diff, 1e-6 * np.eye(16), atol=1e-20)


def test_beamform_single_source_peak(tmp_path):
    path = tmp_path / "one.ini"
    dump(Scenario(sources=SourceSpec(indices=(8,), powers=(1.0,)), exact=True), path)
    csm, out = tmp_path / "c", tmp_path / "bf.txt"
    assert main(["synth", "--scenario", str(path), "--out", str(csm)]) == 0
    assert main(["beamform", "--scenario", str(path), "--csm", str(csm), "--out", str(out),
                 "--normalize"]) == 0
    values, _, kind = fileio.read_source_map(out)
    assert kind == "raw" and int(np.argmax(values)) == 8
    norm, _, kind = fileio.read_source_map(tmp_path / "bf.normalized.txt")
    assert kind == "normalized" and norm[8] == 1.0
    assert np.all(np.isnan(norm) | (norm >= 0.1))


def test_damas_and_cmf_agree(tmp_path, scn_file, exact_csm):
    d, c = tmp_path / "damas.txt", tmp_path / "cmf.txt"
    assert main(["damas", "--scenario", str(scn_file), "--csm", str(exact_csm), "--out", str(d),
                 "--tol", "1e-14"]) == 0
    assert main(["cmf", "--scenario", str(scn_file), "--csm", str(exact_csm), "--out", str(c)]) == 0
    qd, _, _ = fileio.read_source_map(d)
    qc, _, _ = fileio.read_source_map(c)
    assert np.linalg.norm(qd - qc) / np.linalg.norm(qc) < 1e-5
    t = tmp_path / "tik.txt"
    assert main(["damas", "--scenario", str(scn_file), "--csm", str(exact_csm), "--out", str(t),
                 "--solver", "tikhonov", "--alpha", "0"]) == 0


def test_nonconvergence_writes_partial_output(tmp_path, scn_file, exact_csm):
    out = tmp_path / "partial.txt"
    code = main(["cmf", "--scenario", str(scn_file), "--csm", str(exact_csm), "--out", str(out),
                 "--max-iter", "1"])
    assert code == 4
    assert out.exists()


def test_psf_command(tmp_path, scn_file):
    out = tmp_path / "psf.txt"
    assert main(["psf", "--scenario", str(scn_file), "--index", "12", "--out", str(out)]) == 0
    values, _, kind = fileio.read_source_map(out)
    assert kind == "psf" and values[12] == 1.0
    assert main(["psf", "--scenario", str(scn_file), "--index", "25", "--out", str(out)]) == 2


def test_usage_and_validation_errors(tmp_path, scn_file, exact_csm):
    assert main([]) == 2
    assert main(["cmf", "--scenario", str(scn_file)]) == 2
    assert main(["cmf", "--scenario", str(scn_file), "--csm", str(exact_csm), "--out",
                 str(tmp_path / "x"), "--penalty", "l3"]) == 2
    assert main(["damas", "--scenario", str(scn_file), "--csm", str(exact_csm), "--out",
                 str(tmp_path / "x"), "--alpha", "1"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[flow]\nmach = 2, 0, 0\n")
    assert main(["synth", "--scenario", str(bad), "--out", str(tmp_path / "y")]) == 2


def test_channel_mismatch(tmp_path, exact_csm):
    path = tmp_path / "nine.ini"
    dump(Scenario(array=ArraySpec("grid", 9, 1.0, 1.0)), path)
    assert main(["beamform", "--scenario", str(path), "--csm", str(exact_csm),
                 "--out", str(tmp_path / "m")]) == 2


def test_io_errors(tmp_path, scn_file, exact_csm):
    assert main(["synth", "--scenario", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "z")]) == 3
    corrupt = tmp_path / "corrupt.csm"
    corrupt.write_text(exact_csm.read_text().replace("# M 16", "# M sixteen"))
    assert main(["cmf", "--scenario", str(scn_file), "--csm", str(corrupt), "--out", str(tmp_path / "o")]) == 3
    truncated = tmp_path / "trunc.csm"
    truncated.write_text("\n".join(exact_csm.read_text().splitlines()[:100]))
    assert main(["beamform", "--scenario", str(scn_file), "--csm", str(truncated),
                 "--out", str(tmp_path / "o")]) == 3
    assert main(["synth", "--scenario", str(scn_file), "--out", str(tmp_path / "no" / "dir.csm")]) == 3


def test_verify_command(tmp_path, scn_file, capsys):
    report = tmp_path / "report.txt"
    assert main(["verify", "--scenario", str(scn_file), "--out", str(report)]) == 0
    payload = json.loads(report.with_suffix(".json").read_text())
    names = [c["name"] for c in payload["checks"]]
    assert len(names) == len(set(names)) == 9
    assert "overall: PASS" in capsys.readouterr().out
    assert main(["verify", "--scenario", str(scn_file), "--tol-override", "lorentz=1e-20"]) == 1
    assert main(["verify", "--scenario", str(scn_file), "--tol-override", "bogus=1"]) == 2
    assert main(["verify", "--scenario", str(scn_file), "--tol-override", "mc_convergence=0.3"]) == 2


def test_thread_env(tmp_path, scn_file, monkeypatch):
    monkeypatch.setenv("AEROMAP_NUM_THREADS", "1")
    assert main(["synth", "--scenario", str(scn_file), "--out", str(tmp_path / "t"), "--exact"]) == 0
    monkeypatch.setenv("AEROMAP_NUM_THREADS", "many")
    assert main(["synth", "--scenario", str(scn_file), "--out", str(tmp_path / "t"), "--exact"]) == 2


def test_module_entry_point(tmp_path, scn_file):
    out = tmp_path / "m.csm"
    proc = subprocess.run([sys.executable, "-m", "aeromap", "synth", "--scenario", str(scn_file),
                           "--out", str(out), "--exact"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "snapshot count 0" in proc.stderr
