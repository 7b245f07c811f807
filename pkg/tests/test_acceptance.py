"""End-to-end acceptance criteria on the desk-scale shapes.

Each test prints one ``criterion N: PASS|FAIL`` line; the lines are
repeated in the terminal summary.
"""

import dataclasses
import math
import time
from pathlib import Path

import numpy as np
import pytest

from rdmlab.besov import SampledFunction, mixed_split_residual, order_equivalence, seminorm
from rdmlab.cli import main
from rdmlab.config import default_text, load_config, parse_config
from rdmlab.experiments import (
    run_besov_scan,
    run_decay_fit,
    run_duality_check,
    run_factorize_check,
    run_multiplier_scan,
    run_rdm_spectrum,
)
from rdmlab.grid import make_grid
from rdmlab.model import coulomb_V, jastrow_F, one_norm, tau
from rdmlab.multipliers import MultiplierKernel, probe_multiplier_norm, reduce_tilde_a, weighted_operator
from rdmlab.spectra import SingularSpectrum, block_triangle_check, inclusion_checks, schatten_norm, weak_functional

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def desk_1d(K=2, **changes):
    text = (CONFIGS / "desk_1d.toml").read_text().replace("K = 2", f"K = {K}")
    cfg = parse_config(text)
    return dataclasses.replace(cfg, **changes) if changes else cfg


def desk_3d(**changes):
    cfg = load_config(CONFIGS / "desk_3d.toml")
    return dataclasses.replace(cfg, **changes) if changes else cfg


# -- 1 --------------------------------------------------------------------------


def test_criterion_1_exact_identities(criterion):
    t0 = time.perf_counter()
    details, ok = [], True
    for d, N in ((1, 4), (3, 2), (3, 3)):
        cfg = parse_config(default_text(N=N, d=d, K=1, points_per_axis=4, box=3.0))
        r = run_factorize_check(cfg, samples=10_000).data["residual"]
        ok &= r <= 1e-12
        details.append(f"d={d} N={N} residual {r:.1e}")
    rng = np.random.default_rng(0)
    split = 0.0
    for _ in range(20):
        u = SampledFunction(rng.normal(size=(14, 11, 9)), 1.0, 0.0)
        h1 = [int(rng.integers(1, 3))]
        h2 = [int(v) for v in rng.integers(0, 3, size=2)]
        split = max(split, mixed_split_residual(u, h1, h2, int(rng.integers(1, 4))))
    ok &= split <= 1e-12
    perm = 0.0
    for N, d in ((2, 3), (3, 3), (4, 1)):
        x = rng.normal(size=(200, N, d)) * 2
        ref = (jastrow_F(x, 1.0), coulomb_V(x, 1.0), one_norm(x))
        for p in np.random.default_rng(N).permuted(np.tile(np.arange(N), (6, 1)), axis=1):
            y = x[:, p, :]
            for a, b in zip(ref, (jastrow_F(y, 1.0), coulomb_V(y, 1.0), one_norm(y))):
                perm = max(perm, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    ok &= perm <= 1e-14
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    details += [f"mixed split {split:.1e}", f"permutation {perm:.1e}", f"{elapsed:.1f}s"]
    assert criterion(1, ok, "; ".join(details))


# -- 2 --------------------------------------------------------------------------


def test_criterion_2_duality(criterion):
    t0 = time.perf_counter()
    cases = [(f"d=1 N=4 K={K}", desk_1d(K)) for K in (1, 2, 3)] + [("d=3 N=2 K=1", desk_3d())]
    ok, details = True, []
    for label, cfg in cases:
        rep = run_duality_check(cfg).data["report"]
        rel = rep.residual / rep.singular_values[0] ** 2
        ok &= rep.passed and rel <= 1e-10
        details.append(f"{label}: {rel:.1e} ({rep.route_check}/{rep.route_hat})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    assert criterion(2, ok, "; ".join(details) + f"; {elapsed:.1f}s")


# -- 3 --------------------------------------------------------------------------


def test_criterion_3_traces(criterion):
    ok, details = True, []
    for label, cfg in (("d=1 N=4", desk_1d(2)), ("d=3 N=2", desk_3d())):
        data = run_rdm_spectrum(cfg).data
        traces = np.array(list(data["traces"].values()))
        grid = make_grid(cfg.particles, cfg.grid.points_per_axis, cfg.grid.box, cfg.grid.rule)
        pts, w = grid.points(), grid.weights()
        oracle = math.fsum((w * np.abs(cfg.model.psi(pts)) ** 2).tolist())
        spread = float((traces.max() - traces.min()) / oracle)
        quad = float(np.max(np.abs(traces - oracle)) / oracle)
        ok &= spread <= 1e-8 and quad <= 1e-8
        details.append(f"{label}: spread {spread:.1e}, vs quadrature {quad:.1e}")
    assert criterion(3, ok, "; ".join(details))


# -- 4 --------------------------------------------------------------------------


def test_criterion_4_schatten(criterion):
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(100):
        n = int(rng.integers(2, 300))
        s = SingularSpectrum.from_values(rng.pareto(rng.uniform(0.5, 3.0), n) * rng.uniform(1e-3, 10.0))
        for p, q in ((0.5, 1.0), (1.0, 1.5), (0.5, 1.5), (1.0, 2.0)):
            rep = inclusion_checks(s, p, q)
            violations += not (weak_functional(s, p) <= schatten_norm(s, p) * (1 + 1e-12))
            violations += not (schatten_norm(s, q) <= schatten_norm(s, p) * (1 + 1e-12))
            violations += not rep.passed
    tri = 0
    for q in (0.5, 1.0, 1.5):
        for _ in range(50):
            count = int(rng.integers(2, 9))
            rows, cols = int(rng.integers(4, 16)), int(rng.integers(count, 40))
            blocks = []
            for idx in np.array_split(rng.permutation(cols), count):
                m = np.zeros((rows, cols))
                m[:, idx] = rng.normal(size=(rows, len(idx))) * rng.uniform(0.01, 5.0)
                blocks.append(m)
            if rng.random() < 0.5:
                blocks = [m.T for m in blocks]
            tri += not block_triangle_check(blocks, q).passed
    ok = violations == 0 and tri == 0
    assert criterion(4, ok, f"inclusion violations {violations}/1200; quasi-triangle violations {tri}/150")


# -- 5 --------------------------------------------------------------------------


def test_criterion_5_besov(criterion):
    x = np.linspace(-1, 1, 2048)
    u = SampledFunction(np.abs(x), x[1] - x[0], -1.0)
    semi = seminorm(u, 1.0, 2, np.inf).seminorm
    ok = abs(semi - 2.0) <= 0.05 * 2.0
    corpus = {
        "abs": np.abs,
        "sqrt_abs": lambda t: np.sqrt(np.abs(t)),
        "abs_3_2": lambda t: np.abs(t) ** 1.5,
        "gauss": lambda t: np.exp(-4 * t * t),
        "cusp_exp": lambda t: np.exp(tau(t[..., None]) / 4),
    }
    worst = 0.0
    for f in corpus.values():
        v = SampledFunction.from_callable(lambda p, f=f: f(p[..., 0]), [-1.0], [1.0], 1025)
        for q in (2, np.inf):
            worst = max(worst, order_equivalence(v, 1.0, 2, 3, q)[2])
    ok &= worst <= 2.0
    orderings = []
    for seed in (0, 1, 2):
        th = run_besov_scan(desk_1d(2, seed=seed)).data["thresholds"]
        orderings.append(th["mu"] > th["psi"])
        ok &= th["mu"] > th["psi"]
    assert criterion(5, ok, f"[|x|]_(1,2,inf) = {semi:.4f}; max order ratio {worst:.3f}; "
                            f"threshold ordering on seeds 0,1,2: {orderings}")


# -- 6 --------------------------------------------------------------------------


def test_criterion_6_decay(criterion, tmp_path, capsys):
    t0 = time.perf_counter()
    ok, details = True, []
    for label, cfg in (("d=1 N=4 K=2", desk_1d(2)), ("d=3 N=2 K=1", desk_3d())):
        res = run_decay_fit(cfg)
        data = res.data
        exp_c, exp_f = data["exponent_cusped"], data["exponent_cusp_free"]
        drift = data.get("drift", np.inf)
        ok &= exp_c >= 1.0 and drift <= 0.10 and exp_f > exp_c
        details.append(f"{label}: cusped {exp_c:.3f}, cusp-free {exp_f:.3g}, drift {drift:.3f}")
    for label, cfg in (("d=1", desk_1d(2)), ("d=3", desk_3d())):
        toml = CONFIGS / ("desk_1d.toml" if label == "d=1" else "desk_3d.toml")
        for exp in ("rdm-spectrum", "decay-fit", "duality-check"):
            out = tmp_path / f"{label}-{exp}"
            main([exp, "--config", str(toml), "--out", str(out)])
            svg = (out / "plot.svg").read_text()
            slopes = {f"{-cfg.particles.alpha_K:g}", f"{-8 / 3:g}"}
            found = {s for s in slopes if f'data-slope="{s}"' in svg}
            ok &= found == slopes and svg.count('class="reference"') == 2
    capsys.readouterr()
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 600
    details.append(f"reference lines on 6 plots; {elapsed:.1f}s")
    assert criterion(6, ok, "; ".join(details))


# -- 7 --------------------------------------------------------------------------


def test_criterion_7_multipliers(criterion):
    ok, ratios = True, []
    for seed in (0, 1, 2):
        cfg = desk_3d(seed=seed)
        scan = run_multiplier_scan(cfg).data["scan"]
        ok &= len(scan.cells) == 5 and scan.probes == 64 and scan.ratio <= 2.0
        ratios.append(round(scan.ratio, 4))
    cfg = desk_3d()
    g = make_grid(cfg.particles, 6, 2.0)
    gc, gh = g.split(1)
    one = probe_multiplier_norm(MultiplierKernel.constant(), None, gc, gh, 0.9, 64, seed=0).estimate
    ok &= abs(one - 1.0) <= 1e-12
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        n_y, n1, n2 = (int(v) for v in rng.integers(3, 12, size=3))
        wy, w1, w2 = (rng.uniform(0.05, 1.0, n) for n in (n_y, n1, n2))
        b, omega, a = rng.normal(size=n_y), rng.normal(size=(n_y, n1)), rng.normal(size=(n1, n2))
        big = weighted_operator(b, np.repeat(omega, n2, axis=1), a.ravel(), wy, np.outer(w1, w2).ravel())
        small = weighted_operator(b, omega, reduce_tilde_a(a, w2), wy, w1)
        s_big = np.linalg.svd(big, compute_uv=False)
        s_small = np.linalg.svd(small, compute_uv=False)
        k = len(s_small)
        tail = s_big[k:] if len(s_big) > k else np.zeros(1)
        worst = max(worst, float(np.max(np.abs(s_big[:k] - s_small))), float(np.max(tail)))
    ok &= worst <= 1e-10
    assert criterion(7, ok, f"cross-cell ratios {ratios}; constant multiplier {one:.15f}; "
                            f"tilde-a singular value mismatch {worst:.1e}")


# -- 8 --------------------------------------------------------------------------


def test_criterion_8_determinism(criterion, tmp_path, capsys):
    runs = [
        ("factorize-check", "desk_1d.toml"),
        ("rdm-spectrum", "desk_1d.toml"),
        ("decay-fit", "desk_1d.toml"),
        ("besov-scan", "desk_1d.toml"),
        ("multiplier-scan", "desk_3d.toml"),
        ("duality-check", "desk_3d.toml"),
    ]
    compared, mismatched = 0, []
    for exp, toml in runs:
        dirs = [tmp_path / f"{exp}-{i}" for i in range(2)]
        for dd in dirs:
            main([exp, "--config", str(CONFIGS / toml), "--out", str(dd)])
        for csv in sorted(dirs[0].glob("*.csv")):
            compared += 1
            if csv.read_bytes() != (dirs[1] / csv.name).read_bytes():
                mismatched.append(f"{exp}/{csv.name}")
    capsys.readouterr()
    ok = compared >= len(runs) and not mismatched
    assert criterion(8, ok, f"{compared} CSV files compared, mismatches: {mismatched or 'none'}")
