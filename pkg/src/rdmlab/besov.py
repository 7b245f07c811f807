"""Finite differences and sampled Besov-Nikol'skii seminorms.

Functions are sampled on uniform Cartesian grids (:class:`SampledFunction`);
difference steps are integer multiples of the grid spacing, so every
stencil point is a grid node and no interpolation is involved.

The seminorm reported here is the supremum of ``|h|^{-s} ||Delta_h^l u||_q``
over a finite set of steps, with the norm taken over the nodes where the
whole stencil fits. It is a computable proxy for the norm on a domain,
which is defined as an infimum over extensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import StencilOutOfRange
from .model import Cutoff


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values on the uniform grid ``origin + index * spacing``.

    Quadrature uses the cell volume ``prod(spacing)`` as the node weight.
    """

    values: np.ndarray
    spacing: tuple
    origin: tuple

    def __post_init__(self):
        v = np.asarray(self.values)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "spacing", tuple(float(s) for s in np.broadcast_to(self.spacing, (v.ndim,))))
        object.__setattr__(self, "origin", tuple(float(s) for s in np.broadcast_to(self.origin, (v.ndim,))))

    @classmethod
    def from_callable(cls, f: Callable, lower, upper, n) -> "SampledFunction":
        """Sample ``f`` at ``n`` equispaced nodes per axis including both ends.

        ``f`` receives points of shape ``(..., D)``.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        D = len(lower)
        n = np.broadcast_to(np.asarray(n, dtype=int), (D,))
        axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(lower, upper, n)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        spacing = tuple((hi - lo) / (k - 1) for lo, hi, k in zip(lower, upper, n))
        return cls(np.asarray(f(pts)), spacing, tuple(lower))

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def total_points(self) -> int:
        return self.values.size

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``values.shape + (ndim,)``."""
        return np.stack(np.meshgrid(*[self.coords(a) for a in range(self.ndim)], indexing="ij"), axis=-1)

    def norm(self, q) -> float:
        if q == np.inf:
            return float(np.max(np.abs(self.values))) if self.values.size else 0.0
        return float((self.cell_volume * np.sum(np.abs(self.values) ** q)) ** (1.0 / q))

    def shifted(self, offset) -> "SampledFunction":
        """Same values on a grid translated by ``offset``."""
        return replace(self, origin=tuple(o + a for o, a in zip(self.origin, offset)))


def _region(shape, offsets):
    """Index box where ``idx + off`` is in range for all offsets; None if empty."""
    offsets = np.atleast_2d(np.asarray(offsets, dtype=int))
    lo = np.maximum(0, -offsets.min(axis=0))
    hi = np.asarray(shape) - np.maximum(0, offsets.max(axis=0))
    if np.any(hi <= lo):
        return None
    return lo, hi


def _take(values, lo, hi, off):
    return values[tuple(slice(l + o, h + o) for l, h, o in zip(lo, hi, off))]


def _check_shift(u, shift):
    shift = np.asarray(shift, dtype=int).reshape(-1)
    if shift.shape != (u.ndim,):
        raise ValueError(f"step must have {u.ndim} integer components, got {shift}")
    return shift


def difference_values(u: SampledFunction, shift, l: int):
    """``Delta^l`` values and the index box where they are defined."""
    if l < 0:
        raise ValueError("difference order must be >= 0")
    shift = _check_shift(u, shift)
    offs = [j * shift for j in range(l + 1)]
    reg = _region(u.shape, offs)
    if reg is None:
        raise StencilOutOfRange(f"no node admits a stencil of order {l} with step {shift.tolist()} on shape {u.shape}")
    lo, hi = reg
    out = np.zeros(tuple(hi - lo), dtype=np.result_type(u.values, float))
    for j in range(l + 1):
        out += (-1) ** (j + l) * math.comb(l, j) * _take(u.values, lo, hi, offs[j])
    return out, lo


def finite_difference(u: SampledFunction, shift, l: int) -> SampledFunction:
    """``Delta_h^l u(x) = sum_j (-1)^(j+l) C(l, j) u(x + j h)`` with ``h = shift * spacing``.

    The result lives on the nodes where all ``l + 1`` stencil points exist.
    """
    vals, lo = difference_values(u, shift, l)
    origin = tuple(o + s * i for o, s, i in zip(u.origin, u.spacing, lo))
    return SampledFunction(vals, u.spacing, origin)


def step_length(u: SampledFunction, shift) -> float:
    return float(np.linalg.norm(np.asarray(shift) * np.asarray(u.spacing)))


def dyadic_shifts(u: SampledFunction, l: int, levels: int | None = 7, diagonal: bool = True) -> list:
    """Steps ``2^p`` grid spacings along every axis (and the main diagonal).

    Only steps whose order-``l`` stencil fits on the grid are returned;
    ``levels`` caps ``p`` at ``levels - 1``.
    """
    D = u.ndim
    dirs = [np.eye(D, dtype=int)[a] for a in range(D)]
    if diagonal and D > 1:
        dirs.append(np.ones(D, dtype=int))
    out = []
    p = 0
    while levels is None or p < levels:
        level = [2**p * e for e in dirs if _region(u.shape, [l * 2**p * e, 0 * e]) is not None]
        if not level:
            break
        out.extend(level)
        p += 1
    return out


@dataclass
class BesovEstimate:
    """Sampled seminorm ``[u]_{s,l}`` in ``L^q`` over a finite step set."""

    s: float
    l: int
    q: float
    h_sweep: list
    shifts: list = field(repr=False)
    seminorm: float
    lq_norm: float

    @property
    def total(self) -> float:
        return self.lq_norm + self.seminorm


def _diff_norm(u, shift, l, q):
    vals, _ = difference_values(u, shift, l)
    if q == np.inf:
        return float(np.max(np.abs(vals)))
    return float((u.cell_volume * np.sum(np.abs(vals) ** q)) ** (1.0 / q))


def seminorm(u: SampledFunction, s: float, l: int, q=2, h_set: Sequence | None = None) -> BesovEstimate:
    """Estimate ``[u]_{s,l} = sup_h |h|^{-s} ||Delta_h^l u||_q`` over ``h_set``.

    ``h_set`` holds integer step vectors (multiples of the spacing); by
    default the dyadic axis/diagonal sweep of :func:`dyadic_shifts`.
    """
    if q not in (2, np.inf):
        raise ValueError("q must be 2 or inf")
    if not l > s:
        raise ValueError(f"difference order l={l} must exceed s={s}")
    shifts = list(h_set) if h_set is not None else dyadic_shifts(u, l)
    if not shifts:
        raise StencilOutOfRange("empty step set")
    sweep = []
    for sh in shifts:
        hn = step_length(u, sh)
        sweep.append((hn, hn ** (-s) * _diff_norm(u, sh, l, q)))
    semi = max(v for _, v in sweep)
    return BesovEstimate(s, l, q, sweep, [np.asarray(sh) for sh in shifts], semi, u.norm(q))


def order_equivalence(u: SampledFunction, s: float, l: int, m: int, q=2, h_set=None):
    """Return ``([u]_{s,m}, [u]_{s,l}, ratio)``; the ratio is 0 when both vanish."""
    a = seminorm(u, s, m, q, h_set).seminorm
    b = seminorm(u, s, l, q, h_set).seminorm
    if b == 0:
        ratio = 0.0 if a == 0 else np.inf
    else:
        ratio = a / b
    return a, b, ratio


def mixed_split_residual(u: SampledFunction, h1, h2, l: int) -> float:
    """Max residual of the block splitting of an order-``l`` difference.

    With ``u`` on a ``(d1 + d2)``-dimensional grid and block steps ``h1``
    (length ``d1``) and ``h2`` (length ``d2``), compares
    ``Delta_{(h1,h2)}^l u(x1, x2)`` with
    ``sum_k C(l,k) Delta_{(h1,0)}^{l-k} Delta_{(0,h2)}^k u(x1 + k h1, x2)``
    on every node where all terms are defined.
    """
    h1 = np.asarray(h1, dtype=int).reshape(-1)
    h2 = np.asarray(h2, dtype=int).reshape(-1)
    if len(h1) + len(h2) != u.ndim:
        raise ValueError("block steps must add up to the grid dimension")
    e1 = np.concatenate([h1, np.zeros_like(h2)])
    e2 = np.concatenate([np.zeros_like(h1), h2])
    offs = [a * e1 + b * e2 for a in range(l + 1) for b in range(a + 1)]
    reg = _region(u.shape, offs)
    if reg is None:
        raise StencilOutOfRange("block stencils do not fit on the grid")
    lo, hi = reg
    v = u.values

    def at(a, b):
        return _take(v, lo, hi, a * e1 + b * e2)

    lhs = sum((-1) ** (j + l) * math.comb(l, j) * at(j, j) for j in range(l + 1))
    rhs = 0.0
    for k in range(l + 1):
        # Delta_{h1}^{l-k} Delta_{h2}^{k} u, evaluated at x + k h1
        term = 0.0
        for i in range(l - k + 1):
            for j in range(k + 1):
                c = (-1) ** (i + l - k) * math.comb(l - k, i) * (-1) ** (j + k) * math.comb(k, j)
                term = term + c * at(k + i, j)
        rhs = rhs + math.comb(l, k) * term
    return float(np.max(np.abs(lhs - rhs)))


def localize(u: SampledFunction, centers, diameters, cutoff: Cutoff | None = None) -> SampledFunction:
    """Multiply by ``prod_j chi(|x_j - z_j| / d_j)`` over particle blocks.

    The grid axes are grouped into ``len(centers)`` consecutive blocks of
    ``len(centers[0])`` coordinates each.
    """
    chi = cutoff or Cutoff()
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    diameters = np.atleast_1d(np.asarray(diameters, dtype=float))
    K, d = centers.shape
    if K * d != u.ndim or len(diameters) != K:
        raise ValueError("centers/diameters do not match the grid block structure")
    pts = u.points().reshape(u.shape + (K, d))
    r = np.linalg.norm(pts - centers, axis=-1) / diameters
    weight = np.prod(chi(r), axis=-1)
    return replace(u, values=u.values * weight)


def observed_smoothness(u: SampledFunction, l: int, q=2, levels: int = 4, diagonal: bool = True,
                        skip: int = 0) -> float:
    """Worst log-log slope of ``||Delta_h^l u||_q`` against ``|h|`` over small steps.

    Fitted per direction over ``levels`` dyadic steps ``2^p`` grid spacings,
    ``p = skip, ..., skip + levels - 1``; the minimum over directions is
    returned. Near a singular point the first few grid steps are
    pre-asymptotic whatever the resolution, so ``skip`` trades range for
    bias. A function in ``N^s_q`` near the
    sampled region has slope at least ``min(s, l)``. Directions along which
    the differences vanish identically are skipped; ``inf`` if all do.
    """
    D = u.ndim
    dirs = [np.eye(D, dtype=int)[a] for a in range(D)]
    if diagonal and D > 1:
        dirs.append(np.ones(D, dtype=int))
    slopes = []
    for e in dirs:
        hs, ns = [], []
        for p in range(skip, skip + levels):
            sh = 2**p * e
            if _region(u.shape, [l * sh, 0 * sh]) is None:
                break
            hs.append(step_length(u, sh))
            ns.append(_diff_norm(u, sh, l, q))
        ns = np.asarray(ns)
        if len(hs) < 2 or np.all(ns <= 1e3 * np.finfo(float).tiny):
            continue
        floor = 1e-13 * max(u.norm(np.inf), np.finfo(float).tiny)
        if np.all(ns <= floor):
            continue
        slopes.append(np.polyfit(np.log(hs), np.log(np.maximum(ns, floor)), 1)[0])
    return float(min(slopes)) if slopes else np.inf


@dataclass
class EnvelopeBesovReport:
    s: float
    l: int
    q: float
    center: np.ndarray
    radius: float
    estimate: BesovEstimate
    constant: float
    ratio: float


def envelope_to_besov(
    f: Callable,
    envelope,
    center,
    radius: float,
    q=2,
    points_per_axis: int = 48,
    cutoff: Cutoff | None = None,
) -> EnvelopeBesovReport:
    """Seminorm of ``f`` localized to ``B(center, radius)`` relative to its envelope constant.

    ``f`` acts on points of shape ``(..., d)``. The function is multiplied
    by ``chi(|x - z| / R)`` and sampled on ``[z - 2R, z + 2R]^d``; the
    seminorm uses ``s = alpha + d/q`` and ``l = floor(s) + 1``.
    """
    z = np.atleast_1d(np.asarray(center, dtype=float))
    d = len(z)
    s = envelope.alpha + (d / q if q != np.inf else 0.0)
    if not s > 0:
        raise ValueError("alpha must exceed -d/q")
    l = math.floor(s) + 1
    u = SampledFunction.from_callable(f, z - 2 * radius, z + 2 * radius, points_per_axis)
    v = localize(u, [z], [radius], cutoff)
    est = seminorm(v, s, l, q)
    A = float(envelope.constant)
    return EnvelopeBesovReport(s, l, q, z, radius, est, A, est.seminorm / A)
