import io
import json

import pytest

from localft.cli import is_unimodal, run
from localft.config import PRESETS, ExperimentConfig
from localft.errors import ConfigError


def invoke(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def footer(text):
    out = {}
    for line in text.splitlines():
        if line.startswith("# ") and "=" in line:
            key, val = line[2:].split("=", 1)
            out[key] = val
    return out


def test_flow_fig3_two_below_two_above():
    code, text = invoke("flow", "--preset", "fig3")
    assert code == 0
    assert text.startswith("# localft 0.1.0 schema=1 command=flow\n")
    assert json.loads(footer(text)["classification"]) == ["below", "below", "above", "above"]


def test_flow_figs_share_fixed_point():
    points = []
    for name in ("fig3", "fig4", "fig5"):
        code, text = invoke("flow", "--preset", name, "--format", "json")
        assert code == 0
        doc = json.loads(text)
        assert doc["footer"]["classification"] == ["below", "below", "above", "above"]
        points.append(doc["footer"]["fixed_point"])
    assert points[0] == pytest.approx(points[1], rel=1e-6)
    assert points[0] == pytest.approx(points[2], rel=1e-6)


def test_flow_zero_start():
    code, text = invoke("flow", "--scales", "0")
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    assert code == 0 and len(rows) == 2  # header plus one level
    assert json.loads(footer(text)["classification"]) == ["below"]


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["threshold-line", "--preset", "fig6", "--out", str(a), "--workers", "3"]) == 0
    assert run(["threshold-line", "--preset", "fig6", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_threshold_line_values(tmp_path):
    code, text = invoke("threshold-line", "--preset", "fig6", "--format", "json")
    doc = json.loads(text)
    rows = {r[0]: r for r in doc["rows"]}
    assert rows[3.4e-5][1] == pytest.approx(3.4e-4, rel=0.05)
    assert rows[0.0][4] is None and "gamma_w_bracket" in rows[0.0][5]
    assert rows[0.0][2] is not None and rows[0.0][3] is not None
    assert doc["footer"]["line_max_residual_over_range"] < 0.05


def test_threshold_and_pseudothreshold():
    code, text = invoke("pseudothreshold", "--format", "json")
    doc = json.loads(text)
    ratio = doc["rows"][0][3]
    assert code == 0 and 2.5 < ratio < 5


def test_fixed_point_command():
    code, text = invoke("fixed-point", "--format", "json")
    doc = json.loads(text)
    assert doc["footer"]["unstable_count"] == 1
    assert doc["footer"]["residual"] < 1e-12


def test_sweeps():
    code, text = invoke("sweep", "--preset", "fig8", "--format", "json", "--workers", "4")
    doc = json.loads(text)
    assert doc["footer"]["tau_star"] in (3, 4, 5) and doc["footer"]["unimodal"]
    code, text = invoke("sweep", "--preset", "fig7", "--grid", "10,20,40", "--format", "json")
    doc = json.loads(text)
    assert -1.2 < doc["footer"]["loglog_slope"] < -0.8


def test_analytic_command():
    code, text = invoke("analytic", "--r", "10", "--gamma0", "1e-8", "--format", "json")
    doc = json.loads(text)
    assert code == 0 and doc["footer"]["a_lc"] == 514
    code2, text2 = invoke("analytic", "--r", "20", "--gamma0", "1e-8", "--format", "json")
    ratio = doc["footer"]["gamma_crit"] / json.loads(text2)["footer"]["gamma_crit"]
    assert ratio == pytest.approx(2.0, rel=1e-12)


def test_analytic_above_threshold_exit_2(capsys):
    code, _ = invoke("analytic", "--r", "20", "--gamma0", "1e-3")
    assert code == 2
    assert "above analytic threshold" in capsys.readouterr().err


def test_catalog_command():
    code, text = invoke("catalog", "--format", "json")
    doc = json.loads(text)
    assert code == 0 and doc["footer"]["all_identities_pass"]


def test_seedless_rejected():
    assert invoke("catalog", "--seedless")[0] == 2


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": "quantum"}')
    assert invoke("flow", "--config", str(bad))[0] == 2
    bad.write_text('{"unknown_key": 1}')
    assert invoke("flow", "--config", str(bad))[0] == 2
    assert invoke("flow", "--config", str(tmp_path / "missing.json"))[0] == 2
    assert invoke("flow", "--direction", "1,1")[0] == 2
    assert invoke("sweep", "--model", "nonlocal")[0] == 2


def test_config_file_overrides_preset(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"scales": [0.0001]}')
    code, text = invoke("flow", "--preset", "fig3", "--config", str(cfg), "--format", "json")
    doc = json.loads(text)
    assert doc["footer"]["classification"] == ["below"]


def test_numerical_error_exit_3(monkeypatch):
    import localft.cli as cli
    from localft.errors import NumericalError

    def boom(cfg):
        raise NumericalError("forced")
    monkeypatch.setitem(cli.COMMANDS, "catalog", boom)
    assert invoke("catalog")[0] == 3


def test_plot_emission(tmp_path):
    prefix = str(tmp_path / "fig7")
    assert run(["sweep", "--preset", "fig7", "--grid", "10,20", "--plot", prefix, "--out",
                str(tmp_path / "o.csv")]) == 0
    script = (tmp_path / "fig7.gp").read_text()
    assert "fig7.dat" in script and "logscale" in script
    assert len((tmp_path / "fig7.dat").read_text().splitlines()) == 3


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_config_round_trip(name):
    cfg = PRESETS[name]
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(grid=(1.0, 1.0, 2.0))
    with pytest.raises(ConfigError):
        ExperimentConfig(grid=(1.0, float("inf")))
    with pytest.raises(ConfigError):
        ExperimentConfig(tau="sometimes")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1, 2]")


def test_unimodal_helper():
    assert is_unimodal([1, 2, 3, 2, 1])
    assert is_unimodal([1, 2, 2.0005, 2, 1], rel_tol=1e-3)
    assert not is_unimodal([1, 3, 2, 3, 1])


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "localft", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "localft 0.1.0" in out.stdout
