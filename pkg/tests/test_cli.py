"""CLI tests: subcommands, exit codes, file round-trips."""

import json

import numpy as np
import pytest

from ucdis import cli
from ucdis.sources import memoryless, sample_sequence


def run_cli(capsys, *args):
    code = cli.main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBounds:
    def test_anchor(self, capsys):
        code, out, _ = run_cli(
            capsys, "bounds", "--family", "memoryless", "--k", "256", "--n", "512",
            "--m", "32768", "--pe", "1e-6", "--strategy", "ducompm", "--mode", "approx",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["total_bits"] == pytest.approx(21.7757744879973, abs=1e-6)
        assert 0.040 <= doc["rate"] <= 0.060
        assert doc["d"] == 255

    def test_ucompm_simple(self, capsys):
        code, out, _ = run_cli(
            capsys, "bounds", "--k", "2", "--n", "1000", "--m", "1000", "--strategy", "ucompm",
        )
        assert code == 0
        assert json.loads(out)["total_bits"] == pytest.approx(0.5)

    def test_zero_pe_ducompm_notice(self, capsys):
        code, out, _ = run_cli(
            capsys, "bounds", "--k", "4", "--n", "100", "--m", "400", "--pe", "0",
            "--strategy", "ducompm",
        )
        assert code == 0
        doc = json.loads(out)
        ucomp = json.loads(run_cli(capsys, "bounds", "--k", "4", "--n", "100", "--strategy", "ucomp")[1])
        assert doc["total_bits"] == pytest.approx(ucomp["total_bits"])
        assert any("ucomp" in note for note in doc["notes"])

    def test_validation_names_flag(self, capsys):
        code, _, err = run_cli(capsys, "bounds", "--k", "2", "--n", "100", "--strategy", "ducompm")
        assert code == 1
        assert "--m" in err

    def test_json_error_mode(self, capsys):
        code, _, err = run_cli(capsys, "--json", "bounds", "--k", "2", "--n", "100",
                               "--strategy", "ducompm")
        assert code == 1
        doc = json.loads(err)
        assert doc["error"]["code"] == 1


class TestFigure:
    def test_fig2_csv(self, capsys, tmp_path):
        out = tmp_path / "fig2.csv"
        code, _, _ = run_cli(capsys, "figure", "--preset", "fig2", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "# mode=approx"
        assert len(lines) == 12
        # UComp column is row-wise maximal
        for line in lines[2:]:
            _, ucomp, d40, d6, ucompm = map(float, line.split(",")[0:1] + line.split(",")[1:])
            assert ucomp >= d40 >= d6 >= ucompm

    def test_unknown_preset(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "figure", "--preset", "fig9", "--out", str(tmp_path / "x.csv"))
        assert code == 1
        assert "fig9" in err

    def test_unwritable_path(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "figure", "--preset", "fig2",
                             "--out", str(tmp_path / "missing" / "x.csv"))
        assert code == 2


class TestEncodeDecode:
    def _roundtrip_ucomp(self, capsys, tmp_path, data: bytes, k=256):
        src = tmp_path / "in.bin"
        enc = tmp_path / "out.ucds"
        dec = tmp_path / "back.bin"
        src.write_bytes(data)
        code, _, _ = run_cli(capsys, "encode", "--strategy", "ucomp", "--in", str(src),
                             "--out", str(enc), "--k", str(k))
        assert code == 0
        code, _, _ = run_cli(capsys, "decode", "--in", str(enc), "--out", str(dec))
        assert code == 0
        assert dec.read_bytes() == data

    def test_ucomp_roundtrip_small(self, capsys, tmp_path):
        rng = np.random.default_rng(0)
        self._roundtrip_ucomp(capsys, tmp_path, rng.integers(0, 256, size=2048, dtype=np.uint8).tobytes())

    def test_ucomp_roundtrip_one_mebibyte(self, capsys, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.integers(0, 64, size=1 << 20, dtype=np.uint8).tobytes()
        self._roundtrip_ucomp(capsys, tmp_path, data)

    def test_ucompm_roundtrip(self, capsys, tmp_path):
        rng = np.random.default_rng(2)
        mem = tmp_path / "mem.bin"
        src = tmp_path / "in.bin"
        enc = tmp_path / "out.ucds"
        dec = tmp_path / "back.bin"
        mem.write_bytes(rng.integers(0, 256, size=8192, dtype=np.uint8).tobytes())
        src.write_bytes(rng.integers(0, 256, size=4096, dtype=np.uint8).tobytes())
        assert run_cli(capsys, "encode", "--strategy", "ucompm", "--in", str(src),
                       "--memory", str(mem), "--out", str(enc))[0] == 0
        assert run_cli(capsys, "decode", "--in", str(enc), "--memory", str(mem),
                       "--out", str(dec))[0] == 0
        assert dec.read_bytes() == src.read_bytes()

    def test_ucompm_requires_memory(self, capsys, tmp_path):
        src = tmp_path / "in.bin"
        src.write_bytes(b"\x00\x01")
        code, _, err = run_cli(capsys, "encode", "--strategy", "ucompm", "--in", str(src),
                               "--out", str(tmp_path / "o"))
        assert code == 1 and "--memory" in err

    def test_symbol_out_of_alphabet(self, capsys, tmp_path):
        src = tmp_path / "in.bin"
        src.write_bytes(bytes([0, 1, 9]))
        code, _, err = run_cli(capsys, "encode", "--strategy", "ucomp", "--in", str(src),
                               "--out", str(tmp_path / "o"), "--k", "4")
        assert code == 1 and "--k" in err

    def test_missing_input_file(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "encode", "--strategy", "ucomp",
                             "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "o"))
        assert code == 2


class TestDucompmCli:
    def _write_seq(self, path, fam, theta, n, seed):
        x = sample_sequence(fam, theta, n, seed)
        path.write_bytes(bytes(np.asarray(x, dtype=np.uint8)))
        return x

    def test_encoder_refuses_memory_file(self, capsys, tmp_path):
        src = tmp_path / "in.bin"
        src.write_bytes(b"\x00\x01\x00")
        code, _, err = run_cli(
            capsys, "encode", "--strategy", "ducompm", "--in", str(src),
            "--memory", str(src), "--out", str(tmp_path / "o"), "--k", "2", "--pe", "0.1",
        )
        assert code == 1
        assert "memory-len" in err

    def test_roundtrip_matched_sources(self, capsys, tmp_path):
        fam = memoryless(3)
        theta = [0.5, 0.3, 0.2]
        src, mem = tmp_path / "x.bin", tmp_path / "y.bin"
        x = self._write_seq(src, fam, theta, 300, seed=101)
        self._write_seq(mem, fam, theta, 3000, seed=102)
        enc, dec = tmp_path / "w.ucds", tmp_path / "back.bin"
        code, _, _ = run_cli(
            capsys, "encode", "--strategy", "ducompm", "--in", str(src), "--out", str(enc),
            "--k", "3", "--pe", "0.05", "--memory-len", "3000",
        )
        assert code == 0
        code, _, _ = run_cli(capsys, "decode", "--in", str(enc), "--memory", str(mem),
                             "--out", str(dec))
        assert code == 0
        assert np.array_equal(np.frombuffer(dec.read_bytes(), dtype=np.uint8), x)

    def test_declared_failure_exits_three(self, capsys, tmp_path):
        fam = memoryless(2)
        src, mem = tmp_path / "x.bin", tmp_path / "y.bin"
        self._write_seq(src, fam, [0.9, 0.1], 400, seed=7)
        self._write_seq(mem, fam, [0.02, 0.98], 4000, seed=8)  # distant parameter
        enc = tmp_path / "w.ucds"
        assert run_cli(capsys, "encode", "--strategy", "ducompm", "--in", str(src),
                       "--out", str(enc), "--k", "2", "--pe", "0.05",
                       "--memory-len", "4000")[0] == 0
        code, _, err = run_cli(capsys, "decode", "--in", str(enc), "--memory", str(mem),
                               "--out", str(tmp_path / "back.bin"))
        assert code == 3
        assert "failure" in err


class TestExperimentCli:
    def _config(self, tmp_path, **overrides):
        doc = {
            "family": "memoryless", "k": 2, "n": 150, "m": 300, "p_e": 0.1,
            "strategies": ["ucomp", "ucompm", "ducompm"], "trials": 25,
            "master_seed": 5, "theta_mode": "jeffreys",
        }
        doc.update(overrides)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return path

    def test_experiment_csv(self, capsys, tmp_path):
        cfg = self._config(tmp_path)
        out = tmp_path / "rows.csv"
        code, _, _ = run_cli(capsys, "experiment", "--config", str(cfg), "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("strategy,k,n,m,p_e,trials,")
        assert len(lines) == 4

    def test_experiment_json_out(self, capsys, tmp_path):
        cfg = self._config(tmp_path, strategies=["ucomp"])
        out = tmp_path / "rows.json"
        assert run_cli(capsys, "experiment", "--config", str(cfg), "--out", str(out))[0] == 0
        doc = json.load(open(out))
        assert doc["config"]["k"] == 2
        assert len(doc["rows"]) == 1

    def test_zero_trials(self, capsys, tmp_path):
        cfg = self._config(tmp_path)
        code, _, err = run_cli(capsys, "experiment", "--config", str(cfg),
                               "--out", str(tmp_path / "o.csv"), "--trials", "0")
        assert code == 1 and "trials" in err

    def test_missing_config(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "experiment", "--config", str(tmp_path / "nope.json"),
                             "--out", str(tmp_path / "o.csv"))
        assert code == 2

    def test_unknown_field_rejected(self, capsys, tmp_path):
        cfg = self._config(tmp_path, bogus_field=1)
        code, _, err = run_cli(capsys, "experiment", "--config", str(cfg),
                               "--out", str(tmp_path / "o.csv"))
        assert code == 1 and "bogus_field" in err

    def test_coverage_csv(self, capsys, tmp_path):
        cfg = self._config(tmp_path, strategies=["ducompm"], trials=40)
        out = tmp_path / "cov.csv"
        assert run_cli(capsys, "coverage", "--config", str(cfg), "--out", str(out))[0] == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "k,n,m,p_e,trials,empirical_coverage,target"

    def test_determinism_across_runs(self, capsys, tmp_path):
        cfg = self._config(tmp_path, strategies=["ucomp"])
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(capsys, "experiment", "--config", str(cfg), "--out", str(out1))
        run_cli(capsys, "experiment", "--config", str(cfg), "--out", str(out2), "--threads", "2")
        assert out1.read_text() == out2.read_text()

    def test_threads_env_fallback(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("UCDIS_THREADS", "2")
        cfg = self._config(tmp_path, strategies=["ucomp"], trials=8)
        out1, out2 = tmp_path / "env.csv", tmp_path / "serial.csv"
        assert run_cli(capsys, "experiment", "--config", str(cfg), "--out", str(out1))[0] == 0
        monkeypatch.delenv("UCDIS_THREADS")
        run_cli(capsys, "experiment", "--config", str(cfg), "--out", str(out2))
        assert out1.read_text() == out2.read_text()
