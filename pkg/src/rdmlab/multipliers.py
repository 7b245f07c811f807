"""Hadamard (entrywise) kernel multipliers and random-probe norm estimates.

A multiplier ``Lambda(y, x)`` acts on kernels by pointwise multiplication.
Its norm on ``S_q`` for ``q <= 1`` equals the supremum of
``||Int(b Lambda a)||_q`` over unit ``a`` and ``b``; random probes give
certified lower bounds for that supremum. For ``1 < q < 2`` the probe value
is only a diagnostic and reports are flagged ``heuristic``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Cell, TensorGrid, block_grid
from .operators import DiscreteKernel, _joined_points
from .spectra import SingularSpectrum, schatten_norm


@dataclass(frozen=True)
class MultiplierKernel:
    """``Lambda(y, x)`` for ``y`` of shape ``(..., N-K, d)`` and ``x`` of shape ``(..., K, d)``."""

    evaluator: Callable
    sup_bound: float | None = None

    def __call__(self, y, x):
        return self.evaluator(y, x)

    def on_grids(self, rows: TensorGrid, cols: TensorGrid):
        """Matrix ``Lambda(y_i, x_j)`` over row (hat) and column (check) nodes."""
        return self.on_points(rows.points(), cols.points())

    def on_points(self, py, px):
        x = _joined_points(px, py)
        K = px.shape[1]
        return np.asarray(self.evaluator(x[..., K:, :], x[..., :K, :]))

    @classmethod
    def constant(cls, c=1.0) -> "MultiplierKernel":
        return cls(lambda y, x: np.full(np.broadcast_shapes(y.shape[:-2], x.shape[:-2]), c), abs(c))


def cross_factor(model) -> MultiplierKernel:
    """The cross Jastrow factor ``C(x_check, x_hat)`` as ``Lambda(x_hat, x_check)``."""

    def ev(y, x):
        return model.factors(x, y).C

    return MultiplierKernel(ev, 1.0)


def hadamard_multiply(Lambda: MultiplierKernel, T: DiscreteKernel) -> DiscreteKernel:
    """Entrywise product ``Lambda * T`` sampled on ``T``'s grids; weights untouched."""
    if T.rows is None or T.cols is None:
        raise ValueError("kernel needs row and column grids to evaluate the multiplier")
    return DiscreteKernel(Lambda.on_grids(T.rows, T.cols) * T.values, T.rows, T.cols, T.weighted)


def weighted_operator(b, lam, a, w_rows, w_cols):
    """Matrix of ``Int(b Lambda a)``: ``sqrt(w_y) b(y) Lambda(y, x) a(x) sqrt(w_x)``."""
    return (np.sqrt(w_rows) * b)[:, None] * lam * (a * np.sqrt(w_cols))[None, :]


def _unit_field(rng, n, weights, complex_):
    v = rng.standard_normal(n)
    if complex_:
        v = v + 1j * rng.standard_normal(n)
    return v / np.sqrt(np.sum(weights * np.abs(v) ** 2))


@dataclass
class ProbeRecord:
    index: int
    norm: float
    running_max: float


@dataclass
class MultiplierEstimate:
    """Running maximum of ``||Int(b Lambda a)||_q`` over random unit probes."""

    q: float
    cell: Cell | None
    probes: int
    estimate: float
    seed: int
    per_probe: list = field(repr=False)
    heuristic: bool = False


def probe_multiplier_norm(
    Lambda: MultiplierKernel,
    cell: Cell | None,
    grid_check: TensorGrid,
    grid_hat: TensorGrid,
    q: float,
    probe_count: int = 64,
    seed: int = 0,
    lam_matrix=None,
    complex_probes: bool = False,
) -> MultiplierEstimate:
    """Lower-bound ``M_q(Lambda)`` on ``L^2(cell) -> L^2(hat grid)`` by random probes.

    ``a`` lives on the check nodes inside ``cell`` (all nodes when ``cell``
    is None) and ``b`` on the hat nodes; both are standard Gaussian fields
    normalized in the weighted ``L^2`` norm. Probe ``i`` draws from the
    ``i``-th child of ``SeedSequence(seed)``, so estimates for a prefix of
    probes do not depend on ``probe_count``.
    """
    if not q > 0:
        raise ValueError("q must be positive")
    px, wx = grid_check.points(), grid_check.weights()
    if cell is not None:
        mask = cell.contains(px)
        if not np.any(mask):
            raise ValueError(f"no check-grid node lies in cell {cell.nu}")
        px, wx = px[mask], wx[mask]
    py, wy = grid_hat.points(), grid_hat.weights()
    lam = Lambda.on_points(py, px) if lam_matrix is None else np.asarray(lam_matrix)
    children = np.random.SeedSequence(seed).spawn(probe_count)
    best = 0.0
    records = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        a = _unit_field(rng, len(px), wx, complex_probes)
        b = _unit_field(rng, len(py), wy, complex_probes)
        m = weighted_operator(b, lam, a, wy, wx)
        val = schatten_norm(SingularSpectrum.from_matrix(m), q)
        best = max(best, val)
        records.append(ProbeRecord(i, val, best))
    return MultiplierEstimate(q, cell, probe_count, best, seed, records, heuristic=q > 1)


def reduce_tilde_a(a, weights2):
    """``a~(x1) = (sum_{x2} w(x2) |a(x1, x2)|^2)^(1/2)`` for ``a`` of shape ``(n1, n2)``."""
    a = np.asarray(a)
    return np.sqrt(np.sum(np.asarray(weights2)[None, :] * np.abs(a) ** 2, axis=1))


@dataclass
class ScanReport:
    q: float
    probes: int
    seed: int
    cells: list
    estimates: list
    ratio: float
    bound: float
    heuristic: bool

    @property
    def passed(self) -> bool:
        return bool(np.all(np.isfinite(self.estimates))) and self.ratio <= self.bound


def c_multiplier_scan(
    model,
    cells: Sequence[Cell],
    grid_hat: TensorGrid,
    q: float,
    probe_count: int = 64,
    seed: int = 0,
    points_per_axis: int = 6,
    bound: float = 2.0,
    jobs: int = 1,
) -> ScanReport:
    """Probe the cross factor as a multiplier on every cell and compare across cells.

    Each cell gets its own midpoint grid with ``points_per_axis`` nodes per
    coordinate, and all cells share the probe seed.
    """
    if not 0.75 < q < 2:
        raise ValueError("q must lie in (3/4, 2)")
    lam = cross_factor(model)
    d = model.config.d

    def one(cell):
        K = cell.dim // d
        g = block_grid(d, K, points_per_axis, cell.lower, cell.upper)
        return probe_multiplier_norm(lam, None, g, grid_hat, q, probe_count, seed).estimate

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            est = list(pool.map(one, cells))
    else:
        est = [one(c) for c in cells]
    est_arr = np.asarray(est)
    ratio = float(est_arr.max() / est_arr.min()) if est_arr.min() > 0 else np.inf
    return ScanReport(q, probe_count, seed, list(cells), est, ratio, bound, heuristic=q > 1)
