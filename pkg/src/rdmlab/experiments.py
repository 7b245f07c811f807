"""Batch experiment pipelines.

Each ``run_*`` function takes an :class:`~rdmlab.config.ExperimentConfig`
and returns a :class:`RunResult` whose ``files`` map output names to text.
Nothing here reads clocks or global RNG state, so equal inputs give
byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .besov import SampledFunction, observed_smoothness, seminorm
from .errors import BudgetExceeded, DegenerateWindow, StencilOutOfRange
from .grid import Cell, block_grid, make_grid
from .model import ONE_BODY_EXPONENT
from .multipliers import c_multiplier_scan
from .operators import assemble_psi_matrix, full_norm2, gamma_bold, gram, verify_duality
from .plotting import spectrum_svg
from .spectra import SingularSpectrum, default_window, fit_decay_exponent

DENSE_LIMIT = 4096
DEFAULT_S_VALUES = (1.0, 2.0, 2.5, 3.0, 3.5)
_BESOV_NODES = {1: 1025, 2: 257, 3: 65}
NOISE_FLOOR = 1e-13


@dataclass
class Contract:
    name: str
    passed: bool
    detail: str


@dataclass
class RunResult:
    """Outcome of one experiment: contracts, report text and output files."""

    experiment: str
    contracts: list = field(default_factory=list)
    lines: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.contracts)

    def check(self, name, passed, detail=""):
        self.contracts.append(Contract(name, bool(passed), detail))

    def report(self) -> str:
        out = [f"experiment: {self.experiment}"] + self.lines + ["", "contracts:"]
        for c in self.contracts:
            out.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        out.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(out) + "\n"


def _g(v) -> str:
    return f"{v:.17g}"


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _header(cfg, res: RunResult):
    pc = cfg.particles
    m = cfg.model
    res.lines += [
        f"particles: N={pc.N} d={pc.d} K={pc.K} Z={pc.Z:g} kappa={pc.kappa:g}",
        f"jastrow: nuclear={m.nuclear_jastrow} pair={m.pair_jastrow}",
        f"grid: points_per_axis={cfg.grid.points_per_axis} box={cfg.grid.box:g} rule={cfg.grid.rule}",
        f"seed: {cfg.seed}",
        f"reference exponents: alpha_K={pc.alpha_K:.6g} one-body=8/3",
    ]


def _split_grids(cfg, ppa=None, K=None):
    pc = cfg.particles
    K = pc.K if K is None else K
    ppa = cfg.grid.points_per_axis if ppa is None else ppa
    grid = make_grid(pc, ppa, cfg.grid.box, cfg.grid.rule, cfg.grid.budget)
    nc, nh = ppa ** (pc.d * K), ppa ** (pc.d * (pc.N - K))
    if min(nc, nh) > DENSE_LIMIT:
        raise BudgetExceeded(
            f"dense spectra of a {nh} x {nc} matrix exceed the limit {DENSE_LIMIT}; "
            f"use at most {int(DENSE_LIMIT ** (1.0 / (pc.d * min(K, pc.N - K))))} points per axis"
        )
    return grid, grid.split(K)


def _spectrum_rows(series, alpha):
    rows = [["variant", "n", "value", f"n^{alpha:.6g}*value"]]
    for label, v in series:
        for n, x in enumerate(v, start=1):
            rows.append([label, n, _g(x), _g(n**alpha * x)])
    return rows


def _plot(cfg, series, title):
    return spectrum_svg(series, cfg.particles, title)


def _safe_fit(values, window, series=None):
    """Fit, mapping a window that collapses below the noise floor to an infinite exponent."""
    try:
        return fit_decay_exponent(values, window, series, floor=NOISE_FLOOR)
    except DegenerateWindow:
        return None


def _fit_row(label, ppa, fit, window, cfg):
    pc = cfg.particles
    ref1 = _g(ONE_BODY_EXPONENT) if pc.K in (1, pc.N - 1) else ""
    if fit is None:
        return [label, ppa, window[0], window[1], "inf", "", "", "", _g(pc.alpha_K), ref1]
    return [label, ppa, fit.window[0], fit.window[1], _g(fit.exponent), _g(fit.intercept),
            _g(fit.r_squared), _g(fit.refinement_drift), _g(pc.alpha_K), ref1]


_FIT_HEADER = ["variant", "points_per_axis", "n_lo", "n_hi", "exponent", "intercept", "r_squared",
               "drift", "alpha_K", "reference_8_3"]


def _eigenvalues(model, gc, gh):
    """Normalized eigenvalues of the discrete reduced density matrix."""
    P = assemble_psi_matrix(model, gc, gh)
    lam = SingularSpectrum.from_matrix(P).squared().values
    tr = float(np.sum(lam))
    return lam / tr if tr > 0 else lam, P, tr


# ----------------------------------------------------------------------------


def run_factorize_check(cfg, samples: int = 10_000) -> RunResult:
    """Compare ``psi`` with ``A B C mu`` on random points of the truncation box.

    Also checks ``psi = mu`` pointwise when the Jastrow factor is off and
    ``kappa = 0``.
    """
    res = RunResult("factorize-check")
    _header(cfg, res)
    pc, model = cfg.particles, cfg.model
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(-cfg.grid.box, cfg.grid.box, size=(samples, pc.N, pc.d))
    f = model.factors(x[:, :pc.K], x[:, pc.K:])
    prod = f.A * f.B * f.C * f.mu
    scale = float(np.max(np.abs(f.psi)))
    resid = float(np.max(np.abs(f.psi - prod)) / scale) if scale > 0 else 0.0
    res.lines.append(f"samples: {samples}")
    res.lines.append(f"max relative residual |psi - A*B*C*mu| / max|psi|: {resid:.3e}")
    res.data["residual"] = resid
    res.check("factorization", resid <= 1e-12, f"{resid:.3e} <= 1e-12")
    if not model.nuclear_jastrow and not model.pair_jastrow and pc.kappa == 0:
        mu = model.mu(x)
        r2 = float(np.max(np.abs(f.psi - mu)) / max(float(np.max(np.abs(mu))), np.finfo(float).tiny))
        res.data["psi_mu_residual"] = r2
        res.check("psi equals mu without Jastrow and decay", r2 <= 1e-14, f"{r2:.3e} <= 1e-14")
    res.files["residual.csv"] = _csv([["samples", "max_relative_residual"], [samples, _g(resid)]])
    return res


def run_rdm_spectrum(cfg) -> RunResult:
    """Spectra of ``Gamma^(K)`` and the symmetrized ``Gamma_bold`` with trace checks."""
    res = RunResult("rdm-spectrum")
    _header(cfg, res)
    pc, model = cfg.particles, cfg.model
    grid, (gc, gh) = _split_grids(cfg)
    norm2 = full_norm2(model, grid)
    lam, P, tr = _eigenvalues(model, gc, gh)
    rel = abs(tr - norm2) / norm2
    res.lines.append(f"|psi|^2 by direct quadrature: {norm2:.12g}")
    res.lines.append(f"trace Gamma^({pc.K}): {tr:.12g}")
    res.check("trace matches quadrature", rel <= 1e-8, f"relative difference {rel:.3e} <= 1e-8")
    traces = {}
    for K in range(1, pc.N):
        if K == pc.K:
            traces[K] = tr
            continue
        gc_k, gh_k = grid.split(K)
        Pk = assemble_psi_matrix(model, gc_k, gh_k)
        traces[K] = float(np.sum(np.abs(Pk.values) ** 2))
    spread = (max(traces.values()) - min(traces.values())) / norm2
    res.lines.append("traces over K: " + ", ".join(f"K={k}: {v:.12g}" for k, v in traces.items()))
    res.check("trace independent of K", spread <= 1e-8, f"relative spread {spread:.3e} <= 1e-8")
    G = gram(P).values
    lam_min = float(np.linalg.eigvalsh(G)[0])
    res.check("Gamma positive semidefinite", lam_min >= -1e-10 * tr, f"min eigenvalue {lam_min:.3e}")
    series = [("gamma", lam)]
    res.data.update(eigenvalues=lam, trace=tr, norm2=norm2, traces=traces)
    if pc.N <= 5:
        GB = gamma_bold(model, gc, gh).values
        eb = np.linalg.eigvalsh(GB)
        trb = float(np.real(np.trace(GB)))
        expected = math.factorial(pc.N) / math.factorial(pc.N - pc.K) * norm2
        relb = abs(trb - expected) / expected
        res.lines.append(f"trace Gamma_bold: {trb:.12g} (N!/(N-K)! |psi|^2 = {expected:.12g})")
        res.check("Gamma_bold trace counts ordered K-tuples", relb <= 1e-8, f"relative difference {relb:.3e}")
        res.check("Gamma_bold positive semidefinite", eb[0] >= -1e-10 * trb, f"min eigenvalue {eb[0]:.3e}")
        lb = np.clip(eb[::-1], 0.0, None) / norm2
        series.append(("gamma_bold", lb))
        res.data["eigenvalues_bold"] = lb
    res.lines.append("leading normalized eigenvalues: " + ", ".join(f"{v:.6g}" for v in lam[:5]))
    window = cfg.decay_fit.get("window", default_window(len(lam)))
    fit = _safe_fit(lam, window)
    res.files["spectrum.csv"] = _csv(_spectrum_rows(series, pc.alpha_K))
    res.files["fit.csv"] = _csv([_FIT_HEADER, _fit_row("gamma", cfg.grid.points_per_axis, fit, window, cfg)])
    res.files["plot.svg"] = _plot(cfg, series, f"RDM spectrum N={pc.N} d={pc.d} K={pc.K}")
    return res


def _refinement(cfg):
    ref = list(cfg.grid.refinement)
    if not ref:
        p = cfg.grid.points_per_axis
        ref = [p - max(1, p // 6), p]
    return ref


def run_decay_fit(cfg) -> RunResult:
    """Fit eigenvalue decay exponents of cusped and cusp-free models across grid refinements."""
    res = RunResult("decay-fit")
    _header(cfg, res)
    pc = cfg.particles
    ref = _refinement(cfg)
    tol = cfg.decay_fit.get("drift_tolerance", 0.10)
    variants = [("cusped", cfg.model), ("cusp_free", cfg.model.cusp_free())]
    spectra = {name: [] for name, _ in variants}
    for ppa in ref:
        _, (gc, gh) = _split_grids(cfg, ppa)
        for name, model in variants:
            spectra[name].append(_eigenvalues(model, gc, gh)[0])
    finest = {name: s[-1] for name, s in spectra.items()}
    window = cfg.decay_fit.get("window", default_window(len(finest["cusped"])))
    rows = [_FIT_HEADER]
    fits = {}
    for name, _ in variants:
        series = spectra[name]
        prev_fit = None
        for i, ppa in enumerate(ref):
            fi = _safe_fit(series[i], window, [series[i - 1]] if i and prev_fit is not None else None)
            rows.append(_fit_row(name, ppa, fi, window, cfg))
            prev_fit = fi
        prev = series[-2:-1] if len(series) > 1 else None
        try:
            fits[name] = fit_decay_exponent(series[-1], window, prev, floor=NOISE_FLOOR)
        except DegenerateWindow as exc:
            fits[name] = None
            res.lines.append(f"{name}: window below noise floor ({exc}); exponent treated as infinite")
    cusped, free = fits["cusped"], fits["cusp_free"]
    exp_c = cusped.exponent if cusped is not None else np.inf
    exp_f = free.exponent if free is not None else np.inf
    res.lines.append(f"refinement (points per axis): {ref}")
    res.lines.append(f"fit window: {tuple(window)}")
    res.lines.append(f"cusped exponent: {exp_c:.6g}" + (f" (r^2={cusped.r_squared:.4f}, drift={cusped.refinement_drift:.4f})" if cusped else ""))
    res.lines.append(f"cusp-free exponent: {exp_f:.6g}" + (f" (r^2={free.r_squared:.4f})" if free else ""))
    res.lines.append(f"reference alpha_K: {pc.alpha_K:.6g}" + (" ; reference 8/3" if pc.K in (1, pc.N - 1) else ""))
    res.data.update(fits=fits, exponent_cusped=exp_c, exponent_cusp_free=exp_f, spectra=spectra, refinement=ref)
    res.check("cusped exponent >= 1", exp_c >= 1.0, f"{exp_c:.6g}")
    if cusped is not None and len(ref) > 1:
        res.data["drift"] = cusped.refinement_drift
        res.check("refinement drift", cusped.refinement_drift <= tol,
                  f"{cusped.refinement_drift:.4f} <= {tol:g} between {ref[-2]} and {ref[-1]} points per axis")
    res.check("cusp-free decays faster", exp_f > exp_c, f"{exp_f:.6g} > {exp_c:.6g}")
    series = [(name, finest[name]) for name, _ in variants]
    res.files["spectrum.csv"] = _csv(_spectrum_rows(series, pc.alpha_K))
    res.files["fit.csv"] = _csv(rows)
    res.files["plot.svg"] = _plot(cfg, series, f"Eigenvalue decay N={pc.N} d={pc.d} K={pc.K}")
    return res


def _besov_cells(cfg, rng, D):
    n = cfg.besov_scan.get("cells", 4)
    centers = [np.zeros(D)] + [rng.uniform(-1.5, 1.5, size=D) for _ in range(max(0, n - 1))]
    return centers


def run_besov_scan(cfg) -> RunResult:
    """Sweep-slope smoothness of ``mu`` and ``psi`` in ``x_check`` with ``x_hat`` frozen.

    For every ``s`` the difference order is ``l = floor(s) + 1`` and the
    observed ``L^2`` sweep slope is compared with ``s``; the sweep degrades
    when the slope drops below ``s - tolerance``. The threshold of a target
    is the smallest ``s`` degraded on some cell (infinite if none).
    """
    res = RunResult("besov-scan")
    _header(cfg, res)
    pc, model = cfg.particles, cfg.model
    opts = cfg.besov_scan
    s_values = sorted(opts.get("s_values", DEFAULT_S_VALUES))
    tol = opts.get("tolerance", 0.25)
    D = pc.d * pc.K
    nodes = opts.get("points_per_axis", 0) or _BESOV_NODES.get(D)
    if nodes is None or nodes**D > cfg.grid.budget:
        raise BudgetExceeded(
            f"besov-scan samples the {D}-dimensional x_check space densely; "
            f"use d*K <= 3 or set besov_scan.points_per_axis (budget {cfg.grid.budget})"
        )
    rng = np.random.default_rng(cfg.seed)
    x_hat = rng.standard_normal((pc.N - pc.K, pc.d))
    centers = _besov_cells(cfg, rng, D)
    targets = [("mu", model.mu), ("psi", model.psi)]
    rows = [["target", "cell", "center", "s", "l", "observed_slope", "seminorm", "degraded"]]
    thresholds = {}
    for name, fn in targets:

        def f(pts, fn=fn):
            xc = pts.reshape(pts.shape[:-1] + (pc.K, pc.d))
            xh = np.broadcast_to(x_hat, xc.shape[:-2] + x_hat.shape)
            return fn(np.concatenate([xc, xh], axis=-2))

        first = np.inf
        for ci, c in enumerate(centers):
            u = SampledFunction.from_callable(f, c - 1.0, c + 1.0, nodes)
            for s in s_values:
                l = math.floor(s) + 1
                try:
                    slope = observed_smoothness(u, l, q=2)
                    semi = seminorm(u, s, l, q=2).seminorm
                except StencilOutOfRange as exc:
                    raise StencilOutOfRange(f"{exc}; increase besov_scan.points_per_axis (now {nodes})") from None
                degraded = slope < s - tol
                if degraded:
                    first = min(first, s)
                rows.append([name, ci, " ".join(f"{v:.6f}" for v in c), _g(s), l, _g(slope), _g(semi), int(degraded)])
        thresholds[name] = first
        res.lines.append(f"threshold {name}: {first:g}")
    res.lines.append(f"frozen x_hat: {' '.join(f'{v:.6f}' for v in x_hat.ravel())}")
    res.lines.append(f"cells: {len(centers)} of side 2, nodes per axis {nodes}; s values {s_values}; tolerance {tol:g}")
    res.data["thresholds"] = thresholds
    res.check("mu threshold exceeds psi threshold", thresholds["mu"] > thresholds["psi"],
              f"{thresholds['mu']:g} > {thresholds['psi']:g}")
    res.files["besov.csv"] = _csv(rows)
    return res


def run_multiplier_scan(cfg, jobs: int = 1) -> RunResult:
    """Random-probe estimates of the cross factor as an ``S_q`` multiplier on translated cells."""
    res = RunResult("multiplier-scan")
    _header(cfg, res)
    pc, opts = cfg.particles, cfg.multiplier_scan
    q = opts.get("q", 0.9)
    n_cells = opts.get("cells", 5)
    probes = opts.get("probes", 64)
    ppa_cell = opts.get("points_per_axis", 6)
    bound = opts.get("bound", 2.0)
    D = pc.d * pc.K
    cells = [Cell((k - n_cells // 2,) + (0,) * (D - 1)) for k in range(n_cells)]
    n_hat = cfg.grid.points_per_axis ** (pc.d * (pc.N - pc.K))
    if n_hat > cfg.grid.budget or n_hat * ppa_cell**D > cfg.grid.budget:
        raise BudgetExceeded(f"hat grid with {n_hat} nodes exceeds budget {cfg.grid.budget}")
    gh = block_grid(pc.d, pc.N - pc.K, cfg.grid.points_per_axis, -cfg.grid.box, cfg.grid.box, cfg.grid.rule)
    scan = c_multiplier_scan(cfg.model, cells, gh, q, probes, cfg.seed, ppa_cell, bound, jobs)
    rows = [["cell", "estimate"]]
    for c, e in zip(scan.cells, scan.estimates):
        rows.append([" ".join(str(v) for v in c.nu), _g(e)])
        res.lines.append(f"cell {c.nu}: {e:.10g}")
    res.lines.append(f"q={q:g} probes={probes} seed={cfg.seed}" + (" (q > 1: heuristic diagnostic)" if scan.heuristic else ""))
    res.lines.append(f"max/min ratio: {scan.ratio:.10g}")
    res.data["scan"] = scan
    res.check("cross-cell ratio", scan.passed, f"{scan.ratio:.6g} <= {bound:g}")
    res.files["cells.csv"] = _csv(rows)
    return res


def run_duality_check(cfg) -> RunResult:
    """Squared singular values of ``Psi`` against both Gram spectra."""
    res = RunResult("duality-check")
    _header(cfg, res)
    pc = cfg.particles
    rtol = cfg.duality_check.get("rtol", 1e-10)
    _, (gc, gh) = _split_grids(cfg)
    P = assemble_psi_matrix(cfg.model, gc, gh)
    rep = verify_duality(P, rtol, DENSE_LIMIT)
    res.lines.append(f"matrix: {P.shape[0]} x {P.shape[1]} (hat x check)")
    res.lines.append(f"routes: check={rep.route_check} hat={rep.route_hat}")
    res.lines.append(f"residuals: check={rep.residual_check:.3e} hat={rep.residual_hat:.3e}")
    res.data["report"] = rep
    res.check("duality", rep.passed, f"{rep.residual:.3e} <= {rep.tolerance:.3e}")
    s2 = rep.singular_values**2
    lam = s2 / s2.sum() if s2.sum() > 0 else s2
    window = cfg.decay_fit.get("window", default_window(len(lam)))
    fit = _safe_fit(lam, window)
    rows = [["n", "s_n^2", "lambda_check", "lambda_hat"]]
    for n in range(len(s2)):
        rows.append([n + 1, _g(s2[n]), _g(rep.eig_check[n]), _g(rep.eig_hat[n])])
    res.files["spectrum.csv"] = _csv(rows)
    res.files["fit.csv"] = _csv([_FIT_HEADER, _fit_row("gamma", cfg.grid.points_per_axis, fit, window, cfg)])
    res.files["plot.svg"] = _plot(cfg, [("s_n^2 / trace", lam)], f"Duality N={pc.N} d={pc.d} K={pc.K}")
    return res


RUNNERS = {
    "factorize-check": run_factorize_check,
    "rdm-spectrum": run_rdm_spectrum,
    "decay-fit": run_decay_fit,
    "besov-scan": run_besov_scan,
    "multiplier-scan": run_multiplier_scan,
    "duality-check": run_duality_check,
}


def run_experiment(name: str, cfg, jobs: int = 1) -> RunResult:
    if name not in RUNNERS:
        raise ValueError(f"unknown experiment {name!r}")
    if name == "multiplier-scan":
        return run_multiplier_scan(cfg, jobs)
    return RUNNERS[name](cfg)
