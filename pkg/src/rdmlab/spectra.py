"""Singular-value sequences, Schatten functionals and decay-exponent fits."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import zeta

from .errors import DegenerateWindow, PreconditionViolated


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Nonincreasing nonnegative sequence with a provenance tag."""

    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if np.any(v < 0) or np.any(np.diff(v) > 0):
            raise ValueError("spectrum must be nonnegative and nonincreasing")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values, source: str = "") -> "SingularSpectrum":
        """Sort arbitrary nonnegative values into a spectrum."""
        v = np.sort(np.abs(np.asarray(values, dtype=float)).ravel())[::-1]
        return cls(v, source)

    @classmethod
    def from_matrix(cls, matrix) -> "SingularSpectrum":
        """Singular values; those below ``max(shape) * eps * s_1`` are set to 0.

        Round-off singular values would otherwise dominate ``S_q`` sums for
        ``q < 1``.
        """
        m = np.asarray(getattr(matrix, "values", matrix))
        s = np.linalg.svd(m, compute_uv=False) if m.size else np.zeros(0)
        if s.size:
            s = np.where(s > max(m.shape) * np.finfo(float).eps * s.max(), s, 0.0)
        return cls(np.sort(s)[::-1], _matrix_tag(m))

    @classmethod
    def from_hermitian(cls, matrix) -> "SingularSpectrum":
        """Eigenvalues of a Hermitian PSD matrix; round-off negatives clipped to 0."""
        m = np.asarray(getattr(matrix, "values", matrix))
        lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        return cls(np.clip(lam[::-1], 0.0, None), _matrix_tag(m))

    def squared(self) -> "SingularSpectrum":
        return SingularSpectrum(self.values**2, self.source)

    def __len__(self):
        return len(self.values)


def _matrix_tag(m) -> str:
    return hashlib.sha256(np.ascontiguousarray(m).tobytes()).hexdigest()[:16]


def _values(spec):
    return spec.values if isinstance(spec, SingularSpectrum) else np.asarray(spec, dtype=float)


def schatten_norm(spec, q: float) -> float:
    """``(sum_n s_n^q)^(1/q)``."""
    if not q > 0:
        raise ValueError("q must be positive")
    s = _values(spec)
    if s.size == 0:
        return 0.0
    top = s.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((s / top) ** q) ** (1.0 / q))


def weak_functional(spec, q: float) -> float:
    """``sup_n n^(1/q) s_n`` over the finite sequence."""
    if not q > 0:
        raise ValueError("q must be positive")
    s = _values(spec)
    if s.size == 0:
        return 0.0
    n = np.arange(1, s.size + 1, dtype=float)
    return float(np.max(n ** (1.0 / q) * s))


def tail_exponent(spec) -> float:
    """Log-log decay exponent fitted over the second half of the positive values."""
    s = _values(spec)
    s = s[s > 0]
    if s.size < 4:
        return np.inf
    n = np.arange(1, s.size + 1, dtype=float)
    half = slice(s.size // 2, s.size)
    return float(-np.polyfit(np.log(n[half]), np.log(s[half]), 1)[0])


@dataclass
class InclusionReport:
    """Monotonicity and weak-type inclusions for a pair ``p < q``.

    ``member_p`` / ``member_p_weak`` are tail diagnostics for the finite
    sequence: decay strictly faster than ``n^(-1/p)`` versus at least as
    fast, judged from :func:`tail_exponent` with tolerance ``tol``.
    """

    p: float
    q: float
    norm_p: float
    norm_q: float
    weak_p: float
    fitted_constant: float
    zeta_bound: float
    monotone: bool
    weak_below_strong: bool
    weak_inclusion: bool
    tail_exponent: float
    member_p: bool
    member_p_weak: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.weak_below_strong and self.weak_inclusion


def inclusion_checks(spec, p: float, q: float, tol: float = 1e-2, rtol: float = 1e-12) -> InclusionReport:
    """Check ``||T||_q <= ||T||_p``, ``||T||_{p,inf} <= ||T||_p`` and ``||T||_q <= C ||T||_{p,inf}``.

    ``C`` is reported as the fitted ratio; the sharp comparison bound is
    ``zeta(q/p)^(1/q)`` since ``s_n <= ||T||_{p,inf} n^(-1/p)``.
    """
    if not 0 < p < q:
        raise ValueError("need 0 < p < q")
    np_, nq, wp = schatten_norm(spec, p), schatten_norm(spec, q), weak_functional(spec, p)
    fitted = nq / wp if wp > 0 else 0.0
    zb = float(zeta(q / p) ** (1.0 / q))
    slack = 1.0 + rtol
    te = tail_exponent(spec)
    return InclusionReport(
        p, q, np_, nq, wp, fitted, zb,
        monotone=nq <= np_ * slack,
        weak_below_strong=wp <= np_ * slack,
        weak_inclusion=fitted <= zb * slack,
        tail_exponent=te,
        member_p=te > 1.0 / p + tol,
        member_p_weak=te >= 1.0 / p - tol,
    )


@dataclass
class TriangleReport:
    q: float
    lhs: float
    rhs: float
    orthogonality: str

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + 1e-12)


def _support(m, axis):
    return np.any(m != 0, axis=axis)


def block_triangle_check(blocks: Sequence, q: float) -> TriangleReport:
    """Quasi-triangle inequality ``||sum T_j||_{q,inf}^q <= 2/(2-q) sum ||T_j||_{q,inf}^q``.

    Blocks must have pairwise-disjoint column supports (so
    ``T_j T_k^H = 0``) or pairwise-disjoint row supports
    (``T_j^H T_k = 0``).

    Raises
    ------
    PreconditionViolated
        If neither support family is pairwise disjoint.
    """
    if not 0 < q < 2:
        raise ValueError("q must lie in (0, 2)")
    mats = [np.asarray(getattr(b, "values", b)) for b in blocks]
    if not mats:
        raise ValueError("at least one block is required")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ValueError("blocks must share one shape")

    def disjoint(axis):
        count = np.sum([_support(m, axis) for m in mats], axis=0)
        return bool(np.all(count <= 1))

    if disjoint(0):
        kind = "columns"
    elif disjoint(1):
        kind = "rows"
    else:
        raise PreconditionViolated("blocks overlap in both row and column supports")
    total = np.sum(mats, axis=0)
    lhs = weak_functional(SingularSpectrum.from_matrix(total), q) ** q
    rhs = 2.0 / (2.0 - q) * sum(weak_functional(SingularSpectrum.from_matrix(m), q) ** q for m in mats)
    return TriangleReport(q, lhs, rhs, kind)


@dataclass
class DecayFit:
    """Least-squares power law ``v_n ~ C n^(-exponent)`` over ``[n_lo, n_hi]``."""

    window: tuple
    exponent: float
    intercept: float
    r_squared: float
    refinement_drift: float = 0.0
    series_exponents: list = field(default_factory=list)

    @property
    def is_power_law(self) -> bool:
        return self.r_squared >= 0.98


def default_window(length: int) -> tuple:
    """``[5, min(50, length // 2)]`` (1-based, inclusive)."""
    return 5, min(50, length // 2)


def _fit(values, window, floor):
    lo, hi = window
    if lo < 1 or hi > len(values) or hi - lo + 1 < 8:
        raise DegenerateWindow(f"window {window} invalid for a spectrum of length {len(values)} (need >= 8 points)")
    v = values[lo - 1:hi]
    top = values[0] if len(values) else 0.0
    if not np.all(np.isfinite(v)) or np.any(v <= 0) or np.any(v <= floor * top):
        raise DegenerateWindow(f"values in window {window} fall below the floor {floor:g} * v_1")
    x = np.log(np.arange(lo, hi + 1, dtype=float))
    y = np.log(v)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), float(icpt), float(min(max(r2, 0.0), 1.0))


def fit_decay_exponent(spec, window: tuple | None = None, refinement_series: Sequence | None = None,
                       floor: float = 0.0) -> DecayFit:
    """Fit the log-log slope of ``spec`` over ``window``.

    ``refinement_series`` holds spectra from coarser grids (coarse to fine);
    ``refinement_drift`` is the largest relative change of the exponent
    between consecutive members of ``series + [spec]``.

    Raises
    ------
    DegenerateWindow
        If the window has fewer than 8 points or a value in it is
        non-positive or below ``floor * v_1``.
    """
    values = _values(spec)
    window = tuple(window) if window is not None else default_window(len(values))
    alpha, icpt, r2 = _fit(values, window, floor)
    exps = [_fit(_values(s), window, floor)[0] for s in (refinement_series or [])] + [alpha]
    drift = 0.0
    for a, b in zip(exps[:-1], exps[1:]):
        drift = max(drift, abs(b - a) / abs(b)) if b != 0 else np.inf
    return DecayFit(window, alpha, icpt, r2, drift, exps)


def write_spectrum_csv(path, spec, q: float, label: str | None = None):
    """Columns ``n, value, n^(1/q)*value``; one row per spectrum entry."""
    s = _values(spec)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["n", "value", f"n^(1/{q:g})*value"]
        if label is not None:
            header = ["variant"] + header
        w.writerow(header)
        for n, v in enumerate(s, start=1):
            row = [n, f"{v:.17g}", f"{n ** (1.0 / q) * v:.17g}"]
            w.writerow(([label] if label is not None else []) + row)
