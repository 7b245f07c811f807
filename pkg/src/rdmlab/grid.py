"""Tensor-product quadrature grids, truncation radii and unit cells."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded

RULES = ("midpoint", "gauss_legendre")

#: Default cap on the number of full-grid points, which is also the entry
#: count of the dense half-density matrix for every split.
DEFAULT_BUDGET = 2**24


@dataclass(frozen=True, eq=False)
class AxisRule:
    """One-dimensional quadrature rule: increasing nodes, positive weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.nodes)

    def same_as(self, other: "AxisRule") -> bool:
        return np.array_equal(self.nodes, other.nodes) and np.array_equal(self.weights, other.weights)


def axis_rule(n: int, halfwidth: float, rule: str = "midpoint") -> AxisRule:
    """Nodes and weights of an ``n``-point rule on ``[-halfwidth, halfwidth]``.

    ``midpoint`` is exact for polynomials of degree 1 and uses uniformly
    spaced nodes; ``gauss_legendre`` is exact up to degree ``2n - 1``.
    """
    if n < 2:
        raise ValueError("points_per_axis must be >= 2")
    if not halfwidth > 0:
        raise ValueError("box half-width must be positive")
    if rule == "midpoint":
        h = 2.0 * halfwidth / n
        nodes = -halfwidth + h * (np.arange(n) + 0.5)
        weights = np.full(n, h)
    elif rule == "gauss_legendre":
        t, w = np.polynomial.legendre.leggauss(n)
        nodes = halfwidth * t
        weights = halfwidth * w
    else:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
    return AxisRule(nodes, weights)


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Tensor product of per-coordinate rules for a block of particles.

    Points are enumerated in C order over ``axes``; coordinate ``(p, a)``
    (particle ``p``, spatial axis ``a``) uses ``axes[p * d + a]``.
    """

    dim_per_particle: int
    axes: tuple
    box: float
    rule: str = "midpoint"

    def __post_init__(self):
        if len(self.axes) % self.dim_per_particle:
            raise ValueError("number of axes must be a multiple of dim_per_particle")

    @property
    def n_particles(self) -> int:
        return len(self.axes) // self.dim_per_particle

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def total_points(self) -> int:
        return math.prod(self.shape)

    def points(self) -> np.ndarray:
        """All nodes, shape ``(total_points, n_particles, d)``."""
        mesh = np.meshgrid(*[a.nodes for a in self.axes], indexing="ij")
        flat = np.stack([g.ravel() for g in mesh], axis=-1)
        return flat.reshape(-1, self.n_particles, self.dim_per_particle)

    def weights(self) -> np.ndarray:
        """Product weights aligned with :meth:`points`."""
        w = np.ones(1)
        for a in self.axes:
            w = np.multiply.outer(w, a.weights).ravel()
        return w

    def index(self, multi_index) -> int:
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def multi_index(self, flat_index):
        return np.unravel_index(flat_index, self.shape)

    def split(self, K: int):
        """Split into ``(check, hat)`` grids over the first ``K`` and the remaining particles."""
        if not 1 <= K < self.n_particles:
            raise ValueError(f"split index must satisfy 1 <= K < {self.n_particles}")
        cut = K * self.dim_per_particle
        check = TensorGrid(self.dim_per_particle, self.axes[:cut], self.box, self.rule)
        hat = TensorGrid(self.dim_per_particle, self.axes[cut:], self.box, self.rule)
        return check, hat

    def particles_identical(self) -> bool:
        """True when every particle carries the same per-axis rules."""
        d = self.dim_per_particle
        first = self.axes[:d]
        return all(
            a.same_as(b) for p in range(1, self.n_particles) for a, b in zip(first, self.axes[p * d:(p + 1) * d])
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.dim_per_particle}|{self.rule}|{self.box!r}|".encode())
        for a in self.axes:
            h.update(np.ascontiguousarray(a.nodes, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(a.weights, dtype="<f8").tobytes())
        return h.hexdigest()


def make_grid(config, points_per_axis: int, box_halfwidth: float, rule: str = "midpoint",
              budget: int = DEFAULT_BUDGET) -> TensorGrid:
    """Full ``N``-particle grid on ``[-box, box]^{dN}``.

    Raises
    ------
    BudgetExceeded
        If the point count (equal to ``n_check * n_hat`` for every split)
        exceeds ``budget``.
    """
    n_axes = config.N * config.d
    total = points_per_axis**n_axes
    if total > budget:
        raise BudgetExceeded(
            f"grid with {points_per_axis}^{n_axes} = {total} points exceeds budget {budget}; "
            f"use at most {int(budget ** (1.0 / n_axes))} points per axis"
        )
    ax = axis_rule(points_per_axis, box_halfwidth, rule)
    return TensorGrid(config.d, tuple(ax for _ in range(n_axes)), float(box_halfwidth), rule)


def block_grid(d: int, n_particles: int, points_per_axis: int, lower, upper, rule: str = "midpoint") -> TensorGrid:
    """Grid over an arbitrary axis-aligned box ``prod [lower_i, upper_i]``."""
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n_particles * d,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n_particles * d,))
    axes = []
    for lo, hi in zip(lower, upper):
        base = axis_rule(points_per_axis, 0.5 * (hi - lo), rule)
        axes.append(AxisRule(base.nodes + 0.5 * (hi + lo), base.weights))
    box = float(np.max(np.maximum(np.abs(lower), np.abs(upper))))
    return TensorGrid(d, tuple(axes), box, rule)


def truncation_radius(kappa: float, eps: float = 1e-8) -> float:
    """Radius ``R = ln(1/eps) / kappa`` at which ``exp(-kappa R) = eps``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return math.log(1.0 / eps) / kappa


@dataclass(frozen=True)
class Cell:
    """Half-open box ``[0, side)^D + nu``."""

    nu: tuple
    side: float = 1.0

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.nu, dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.side

    @property
    def dim(self) -> int:
        return len(self.nu)

    def contains(self, points) -> np.ndarray:
        """Membership mask for points of shape ``(..., D)`` (or ``(..., K, d)``)."""
        p = np.asarray(points, dtype=float)
        if p.shape[-1] != self.dim or (p.ndim >= 3 and p.shape[-2] * p.shape[-1] == self.dim):
            p = p.reshape(p.shape[:-2] + (-1,))
        return np.all((p >= self.lower) & (p < self.upper), axis=-1)


def cells_covering(grid: TensorGrid, K: int) -> list:
    """Unit cells meeting the ``x_check`` truncation box ``[-box, box)^{dK}``."""
    R = grid.box
    ticks = range(math.floor(-R), math.ceil(R))
    D = K * grid.dim_per_particle
    return [Cell(tuple(nu)) for nu in itertools.product(ticks, repeat=D)]
