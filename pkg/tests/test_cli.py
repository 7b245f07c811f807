import numpy as np
import pytest

from rdmlab.cli import build_parser, main
from rdmlab.config import EXPERIMENTS, default_text, load_config, parse_config
from rdmlab.errors import ConfigError


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config parsing -------------------------------------------------------------


def test_default_text_round_trip():
    cfg = parse_config(default_text(3, 1, 1, 10, 2.0, coupling=0.2, pair_jastrow=False))
    assert (cfg.particles.N, cfg.particles.d, cfg.particles.K) == (3, 1, 1)
    assert cfg.grid.points_per_axis == 10 and cfg.grid.box == 2.0
    assert not cfg.model.pair_jastrow and cfg.model.nuclear_jastrow
    assert cfg.seed == 0


def test_unknown_key_names_field_and_line():
    text = default_text().replace("[grid]", "[grid]\nspacing = 0.1")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert "grid.spacing" in str(info.value)
    assert info.value.line == text.splitlines().index("spacing = 0.1") + 1


def test_invalid_split_reports_k():
    text = default_text(N=3, K=3)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "particles.K"
    assert info.value.line == text.splitlines().index("K = 3") + 1


def test_syntax_error_has_line():
    with pytest.raises(ConfigError) as info:
        parse_config("seed = 0\n[particles\nN = 2\n")
    assert info.value.line == 2


@pytest.mark.parametrize("extra", ['box = 2.0\neps = 1e-4', 'rule = "simpson"', "points_per_axis = 1"])
def test_grid_errors(extra):
    text = default_text().replace("box = 3.0\n", "") + extra + "\n"
    if "points_per_axis = 1" in extra:
        text = text.replace("points_per_axis = 24\n", "")
    with pytest.raises(ConfigError):
        parse_config(text)


def test_experiment_mismatch():
    with pytest.raises(ConfigError):
        parse_config(default_text(experiment="decay-fit"), experiment="besov-scan")
    assert parse_config(default_text(experiment="decay-fit"), "decay-fit").experiment == "decay-fit"


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.toml"))
    assert files
    for f in files:
        cfg = load_config(f)
        assert cfg.particles.N >= 2


# -- command line ---------------------------------------------------------------


def small(tmp_path, **kw):
    return write(tmp_path, default_text(3, 1, 1, 10, 2.5, **kw))


def test_parser_choices():
    p = build_parser()
    assert set(p._actions[1].choices) == set(EXPERIMENTS)
    with pytest.raises(SystemExit):
        p.parse_args(["rdm-spectrum"])


def test_missing_file_exit_2(tmp_path, capsys):
    assert main(["rdm-spectrum", "--config", str(tmp_path / "nope.toml")]) == 2


def test_config_error_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, default_text(N=4, K=4))
    assert main(["rdm-spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "particles.K" in err and "line" in err


def test_budget_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, default_text(3, 3, 1, 40, 2.0))
    assert main(["rdm-spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "BudgetExceeded" in capsys.readouterr().err


def test_bad_jobs(tmp_path):
    assert main(["rdm-spectrum", "--config", str(small(tmp_path)), "--jobs", "0"]) == 2


@pytest.mark.parametrize("experiment,files", [
    ("factorize-check", {"residual.csv"}),
    ("rdm-spectrum", {"spectrum.csv", "fit.csv", "plot.svg"}),
    ("duality-check", {"spectrum.csv", "fit.csv", "plot.svg"}),
])
def test_outputs_written(tmp_path, capsys, experiment, files):
    out = tmp_path / "out"
    assert main([experiment, "--config", str(small(tmp_path)), "--out", str(out)]) == 0
    present = {p.name for p in out.iterdir()}
    assert files | {"report.txt"} <= present
    report = (out / "report.txt").read_text()
    assert "PASS" in report and "FAIL" not in report
    assert capsys.readouterr().out == report


def test_reference_lines_in_plot(tmp_path, capsys):
    out = tmp_path / "out"
    main(["rdm-spectrum", "--config", str(small(tmp_path)), "--out", str(out)])
    svg = (out / "plot.svg").read_text()
    assert svg.count('class="reference"') == 2
    assert 'data-slope="-2.66667"' in svg


def test_byte_identical_reruns(tmp_path, capsys):
    cfg = small(tmp_path)
    for name in ("a", "b", "c"):
        jobs = "2" if name == "c" else "1"
        assert main(["rdm-spectrum", "--config", str(cfg), "--out", str(tmp_path / name), "--jobs", jobs]) == 0
    for f in ("spectrum.csv", "fit.csv", "plot.svg"):
        ref = (tmp_path / "a" / f).read_bytes()
        assert (tmp_path / "b" / f).read_bytes() == ref
        assert (tmp_path / "c" / f).read_bytes() == ref


def test_seed_override_changes_samples(tmp_path, capsys):
    cfg = small(tmp_path)
    main(["factorize-check", "--config", str(cfg), "--out", str(tmp_path / "s0")])
    main(["factorize-check", "--config", str(cfg), "--out", str(tmp_path / "s1"), "--seed", "1"])
    a = (tmp_path / "s0" / "residual.csv").read_text()
    b = (tmp_path / "s1" / "residual.csv").read_text()
    assert a != b


def test_separable_leading_eigenvalue(tmp_path, capsys):
    cfg = small(tmp_path, nuclear_jastrow=False, pair_jastrow=False, coupling=0.0)
    out = tmp_path / "out"
    assert main(["rdm-spectrum", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "spectrum.csv").read_text().splitlines()
    header = rows[0].split(",")
    first = dict(zip(header, rows[1].split(",")))
    assert float(first["value"]) == pytest.approx(1.0, abs=1e-12)
    second = dict(zip(header, rows[2].split(",")))
    assert abs(float(second["value"])) <= 1e-12
    assert np.isfinite(float(first["value"]))
