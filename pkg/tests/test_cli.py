import csv
import json

import pytest

from modewarp.cli import build_parser, main

SUBCOMMANDS = ["modes", "dispersion", "synth", "spectrogram", "separate", "range-a", "range-b", "pipeline-demo"]


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_exits_zero(cmd, capsys):
    with pytest.raises(SystemExit) as e:
        main([cmd, "--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    assert "--config" in out and "--out" in out


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2


def test_modes_writes_exports(tmp_path):
    assert main(["modes", "-o", str(tmp_path), "-f", "20", "70", "--no-plots"]) == 0
    for f in ("20", "70"):
        d = json.loads((tmp_path / f"modes_{f}Hz.json").read_text())
        assert len(d["modes"]) >= 3
        head = (tmp_path / f"eigenfunctions_{f}Hz.csv").read_text().splitlines()[0]
        assert head.startswith("z_m,psi_mode1,psi_mode2,psi_mode3")
    man = json.loads((tmp_path / "modes.manifest.json").read_text())
    assert len(man["config_hash"]) == 16 and "modes_20Hz.json" in man["files"]


def test_modes_below_cutoff(tmp_path):
    ssp = tmp_path / "iso.csv"
    ssp.write_text("depth_m,speed_mps\n0,1500\n100,1500\n")
    rc = main(["modes", "-o", str(tmp_path), "-f", "2", "--ssp-csv", str(ssp),
               "--set", "environment.water_depth=100", "--no-plots"])
    assert rc == 0
    d = json.loads((tmp_path / "modes_2Hz.json").read_text())
    assert d["below_cutoff"] is True and d["modes"] == []


def test_missing_ssp_is_config_error(tmp_path, capsys):
    rc = main(["modes", "-o", str(tmp_path), "--ssp-csv", str(tmp_path / "absent.csv")])
    assert rc == 2
    assert "absent.csv" in capsys.readouterr().err


def test_bad_set_is_usage_error(tmp_path):
    assert main(["modes", "-o", str(tmp_path), "--set", "noequals"]) == 2


def test_synth_then_analyse(tmp_path):
    out = str(tmp_path)
    assert main(["synth", "-o", out, "--range-km", "200", "--no-plots"]) == 0
    wav = str(tmp_path / "waveform.wav")
    assert main(["spectrogram", "-o", out, "-i", wav, "--no-plots"]) == 0
    with (tmp_path / "spectrogram.csv").open() as fh:
        assert next(csv.reader(fh)) == ["t_s", "f_hz", "mag"]
    assert main(["range-a", "-o", out, "-i", str(tmp_path / "waveform.csv"), "--range-km", "200"]) == 0
    est = json.loads((tmp_path / "range_a.json").read_text())
    assert abs(est["range_m"] - 200e3) / 200e3 <= 0.05
    assert main(["separate", "-o", out, "-i", wav, "--no-plots"]) == 0
    assert (tmp_path / "separation" / "manifest.json").exists()


def test_range_b_guard_is_computation_error(tmp_path, capsys):
    rc = main(["range-b", "-o", str(tmp_path), "--set", 'environment.ssp={"fixture": "single_duct"}'])
    assert rc == 1
    assert "dual-channel" in capsys.readouterr().err


def test_missing_input_is_usage_error(tmp_path):
    assert main(["range-a", "-o", str(tmp_path), "-i", str(tmp_path / "none.wav")]) == 2


def test_pipeline_demo_summary(tmp_path):
    assert main(["pipeline-demo", "-o", str(tmp_path), "--no-plots"]) == 0
    with (tmp_path / "summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["range_km"]) for r in rows] == [200.0, 300.0, 400.0, 518.0]
    assert [r["structure"] for r in rows] == ["complete", "blocked", "blocked", "complete"]
    for r in rows:
        has_a = r["range_a_km"] != ""
        assert has_a == (r["structure"] == "complete")
        assert r["range_b_km"] != ""
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert "summary.csv" in man["files"]


def test_parser_documents_every_flag():
    ap = build_parser()
    sub = next(a for a in ap._actions if a.dest == "command")
    for name, p in sub.choices.items():
        for act in p._actions:
            if act.option_strings and act.dest != "help":
                assert act.help, f"{name} {act.option_strings} lacks help"
