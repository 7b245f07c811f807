import csv
import io
import math
from pathlib import Path

import numpy as np
import pytest

from rdmlab.config import default_text, load_config, parse_config
from rdmlab.errors import BudgetExceeded
from rdmlab.experiments import (
    DEFAULT_S_VALUES,
    run_besov_scan,
    run_decay_fit,
    run_experiment,
    run_factorize_check,
    run_multiplier_scan,
    run_rdm_spectrum,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_factorize_default_three_particles():
    res = run_factorize_check(parse_config(default_text(3, 1, 1, 10, 3.0)))
    assert res.passed and res.data["residual"] <= 1e-13
    assert "psi_mu_residual" not in res.data


def test_factorize_without_jastrow_and_decay():
    text = default_text(3, 1, 1, 10, 3.0, nuclear_jastrow=False, pair_jastrow=False).replace("kappa = 0.5", "kappa = 0.0")
    res = run_factorize_check(parse_config(text))
    assert res.passed and res.data["psi_mu_residual"] <= 1e-14


def test_rdm_spectrum_separable_is_rank_one():
    cfg = load_config(CONFIGS / "separable.toml")
    res = run_rdm_spectrum(cfg)
    lam = res.data["eigenvalues"]
    assert lam[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(lam[1:]) <= 1e-12)
    assert res.passed


def test_rdm_spectrum_symmetric_bumps():
    res = run_rdm_spectrum(load_config(CONFIGS / "symmetric_bumps.toml"))
    assert res.passed
    assert "eigenvalues_bold" in res.data


def test_decay_fit_desk_line():
    res = run_decay_fit(load_config(CONFIGS / "desk_1d.toml"))
    assert res.passed
    assert res.data["refinement"] == [20, 24]
    assert res.data["exponent_cusped"] >= 1.0 and res.data["drift"] <= 0.10
    fit = rows(res.files["fit.csv"])
    assert {r["variant"] for r in fit} == {"cusped", "cusp_free"}
    assert all(float(r["alpha_K"]) == pytest.approx(13 / 6) for r in fit)


@pytest.mark.slow
def test_decay_fit_desk_space():
    res = run_decay_fit(load_config(CONFIGS / "desk_3d.toml"))
    assert res.passed
    assert res.data["exponent_cusp_free"] >= 2 * 8 / 3
    assert all(float(r["reference_8_3"]) == pytest.approx(8 / 3) for r in rows(res.files["fit.csv"]))


@pytest.mark.parametrize("d", [1, 3])
def test_besov_scan_nuclear_cusp_threshold(d):
    cfg = parse_config(default_text(2, d, 1, 10, 2.5, pair_jastrow=False))
    res = run_besov_scan(cfg)
    assert res.passed
    th = res.data["thresholds"]
    expected = 1 + d / 2
    assert th["mu"] == np.inf
    assert th["psi"] == min(s for s in DEFAULT_S_VALUES if s > expected)
    slopes = [float(r["observed_slope"]) for r in rows(res.files["besov.csv"]) if r["target"] == "psi" and r["cell"] == "0"]
    assert expected - 0.25 <= max(slopes) <= expected + 0.1


def test_besov_scan_budget_for_high_dimension():
    with pytest.raises(BudgetExceeded, match="points_per_axis"):
        run_besov_scan(parse_config(default_text(4, 3, 2, 4, 2.0)))


def test_multiplier_scan_small():
    text = default_text(2, 1, 1, 16, 3.0) + "\n[multiplier_scan]\nq = 1.0\nprobes = 16\ncells = 5\npoints_per_axis = 8\n"
    res = run_multiplier_scan(parse_config(text))
    assert res.passed
    scan = res.data["scan"]
    assert [c.nu for c in scan.cells] == [(-2,), (-1,), (0,), (1,), (2,)]
    assert len(rows(res.files["cells.csv"])) == 5


def test_run_experiment_dispatch():
    cfg = parse_config(default_text(3, 1, 1, 8, 2.5))
    res = run_experiment("duality-check", cfg)
    assert res.passed and math.isfinite(res.data["report"].residual)
    with pytest.raises(ValueError):
        run_experiment("unknown", cfg)
