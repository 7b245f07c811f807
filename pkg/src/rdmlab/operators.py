"""Nyström discretization of the half-density and reduced density matrices.

Kernels are sampled at tensor-grid nodes and symmetrized with square-root
quadrature weights, so that matrix singular values and eigenvalues
approximate those of the integral operators.

The half-density matrix maps ``x_check`` functions to ``x_hat`` functions,
so its matrix is indexed ``[hat, check]`` and ``Gamma = Psi^H Psi``.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FactorialBudget
from .grid import TensorGrid

MAX_FACTORIAL_N = 5
_MAGIC = b"RDMK"
_HEADER = struct.Struct("<4sIQQBB32s")


@dataclass(frozen=True)
class Permutation:
    """Bijection ``i -> mapping[i]`` on ``{0, ..., N-1}``.

    Acts on configurations by ``P(x) = (x_{s(0)}, ..., x_{s(N-1)})``.
    """

    mapping: tuple

    def __post_init__(self):
        m = tuple(int(i) for i in self.mapping)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"{self.mapping!r} is not a permutation of 0..{len(m) - 1}")
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def all(cls, n: int) -> list:
        return [cls(p) for p in itertools.permutations(range(n))]

    def __len__(self):
        return len(self.mapping)

    def __call__(self, i: int) -> int:
        return self.mapping[i]

    def compose(self, other: "Permutation") -> "Permutation":
        """``(self o other)(i) = self(other(i))``."""
        return Permutation(tuple(self.mapping[j] for j in other.mapping))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.mapping)
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Permutation(tuple(inv))

    def apply(self, x):
        return np.asarray(x)[..., list(self.mapping), :]


def permute_point(sigma: Permutation, x):
    """Blockwise reordering ``P_sigma(x)``.

    ``P_sigma(P_rho(x)) == P_{rho o sigma}(x)``.
    """
    return sigma.apply(x)


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """Dense sampled kernel with its row and column grids.

    When ``weighted`` is set, entries already include the factor
    ``sqrt(w_row * w_col)``.
    """

    values: np.ndarray
    rows: TensorGrid | None = None
    cols: TensorGrid | None = None
    weighted: bool = True

    @property
    def shape(self):
        return self.values.shape

    @property
    def H(self) -> "DiscreteKernel":
        return DiscreteKernel(self.values.conj().T, self.cols, self.rows, self.weighted)

    def grid_hash(self) -> bytes:
        h = hashlib.sha256()
        for g in (self.rows, self.cols):
            h.update((g.fingerprint() if g is not None else "none").encode())
        return h.digest()

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.grid_hash())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()[:16]

    def to_bytes(self) -> bytes:
        """Binary dump: header then row-major little-endian float64 data.

        Header (little-endian): magic ``b"RDMK"``, version ``u32``, rows
        ``u64``, cols ``u64``, weighted ``u8``, complex ``u8``, 32-byte grid
        hash. Complex entries are stored as interleaved (real, imag) pairs.
        """
        v = np.ascontiguousarray(self.values)
        is_complex = np.iscomplexobj(v)
        header = _HEADER.pack(_MAGIC, 1, v.shape[0], v.shape[1], int(self.weighted), int(is_complex), self.grid_hash())
        data = v.astype("<c16" if is_complex else "<f8").tobytes()
        return header + data

    @classmethod
    def from_bytes(cls, blob: bytes, rows=None, cols=None) -> "DiscreteKernel":
        magic, version, m, n, weighted, is_complex, ghash = _HEADER.unpack_from(blob)
        if magic != _MAGIC or version != 1:
            raise ValueError("not a DiscreteKernel dump")
        dtype = "<c16" if is_complex else "<f8"
        vals = np.frombuffer(blob, dtype=dtype, offset=_HEADER.size, count=m * n).reshape(m, n).copy()
        k = cls(vals, rows, cols, bool(weighted))
        if rows is not None and cols is not None and k.grid_hash() != ghash:
            raise ValueError("grid hash in dump does not match the supplied grids")
        return k

    def dump(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path, rows=None, cols=None) -> "DiscreteKernel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), rows, cols)


def _psi_fn(model):
    return model.psi if hasattr(model, "psi") else model


def _joined_points(pc, ph):
    """Configurations ``(x_check_j, x_hat_i)`` for all pairs, shape ``(nh, nc, N, d)``."""
    nh, nc = len(ph), len(pc)
    left = np.broadcast_to(pc[None], (nh,) + pc.shape)
    right = np.broadcast_to(ph[:, None], (nh, nc) + ph.shape[1:])
    return np.concatenate([left, right], axis=-2)


def _psi_values(model, pc, ph, sigma):
    x = _joined_points(pc, ph)
    if sigma is not None:
        x = sigma.apply(x)
    return np.asarray(_psi_fn(model)(x))


def _row_chunk(nc, n_particles, d, target=2**21):
    return max(1, target // max(1, nc * n_particles * d))


def assemble_psi_matrix(model, grid_check: TensorGrid, grid_hat: TensorGrid,
                        sigma: Permutation | None = None) -> DiscreteKernel:
    """Matrix ``sqrt(w_hat) psi(P_sigma(x_check, x_hat)) sqrt(w_check)`` indexed ``[hat, check]``.

    ``model`` is a :class:`~rdmlab.model.WavefunctionModel` or any callable
    on configuration points.
    """
    if grid_check.dim_per_particle != grid_hat.dim_per_particle:
        raise ValueError("grids must share the per-particle dimension")
    pc, ph = grid_check.points(), grid_hat.points()
    sc, sh = np.sqrt(grid_check.weights()), np.sqrt(grid_hat.weights())
    n_particles = grid_check.n_particles + grid_hat.n_particles
    step = _row_chunk(len(pc), n_particles, grid_check.dim_per_particle)
    blocks = []
    for start in range(0, len(ph), step):
        stop = min(start + step, len(ph))
        vals = _psi_values(model, pc, ph[start:stop], sigma)
        blocks.append(sh[start:stop, None] * vals * sc[None, :])
    return DiscreteKernel(np.concatenate(blocks, axis=0), grid_hat, grid_check, True)


def gram(psi_matrix: DiscreteKernel) -> DiscreteKernel:
    """``Psi^H Psi``: the discrete reduced density matrix on the check grid."""
    v = psi_matrix.values
    g = v.conj().T @ v
    return DiscreteKernel(0.5 * (g + g.conj().T), psi_matrix.cols, psi_matrix.cols, psi_matrix.weighted)


def gram_hat(psi_matrix: DiscreteKernel) -> DiscreteKernel:
    """``Psi Psi^H`` on the hat grid."""
    v = psi_matrix.values
    g = v @ v.conj().T
    return DiscreteKernel(0.5 * (g + g.conj().T), psi_matrix.rows, psi_matrix.rows, psi_matrix.weighted)


def gamma_kernel(model, grid_check: TensorGrid, grid_hat: TensorGrid,
                 sigma: Permutation | None = None) -> DiscreteKernel:
    """Reduced density kernel by direct summation over the hat nodes.

    ``gamma[i, j] = sum_hat w_hat conj(psi(P(x_i, x_hat))) psi(P(y_j, x_hat))``,
    then scaled by ``sqrt(w_i w_j)``. This is an independent code path for
    :func:`gram` applied to :func:`assemble_psi_matrix`.
    """
    pc, ph = grid_check.points(), grid_hat.points()
    wc, wh = grid_check.weights(), grid_hat.weights()
    n_particles = grid_check.n_particles + grid_hat.n_particles
    step = _row_chunk(len(pc), n_particles, grid_check.dim_per_particle)
    acc = None
    for start in range(0, len(ph), step):
        stop = min(start + step, len(ph))
        vals = _psi_values(model, pc, ph[start:stop], sigma)
        part = np.einsum("h,hi,hj->ij", wh[start:stop], vals.conj(), vals)
        acc = part if acc is None else acc + part
    sw = np.sqrt(wc)
    acc = sw[:, None] * acc * sw[None, :]
    acc = 0.5 * (acc + acc.conj().T)
    return DiscreteKernel(acc, grid_check, grid_check, True)


def _check_positions(sigma: Permutation, K: int) -> tuple:
    inv = sigma.inverse()
    return tuple(inv(c) for c in range(K))


def gamma_bold(model, grid_check: TensorGrid, grid_hat: TensorGrid, use_symmetry: bool = True) -> DiscreteKernel:
    """``(1/(N-K)!) sum_{sigma in S_N} gamma_sigma`` on the check grid.

    ``gamma_sigma`` depends only on where ``sigma`` places the check
    particles once the hat integration variables are relabeled, provided
    every hat particle uses the same per-axis rules. With ``use_symmetry``
    each such class is assembled once and weighted by its size.

    Raises
    ------
    FactorialBudget
        If ``N > 5``.
    """
    K = grid_check.n_particles
    N = K + grid_hat.n_particles
    if N > MAX_FACTORIAL_N:
        raise FactorialBudget(f"sum over S_{N} has {math.factorial(N)} terms; limit is N <= {MAX_FACTORIAL_N}")
    classes: dict = {}
    symmetric = use_symmetry and grid_hat.particles_identical()
    for sigma in Permutation.all(N):
        key = _check_positions(sigma, K) if symmetric else sigma.mapping
        if key in classes:
            classes[key][1] += 1
        else:
            classes[key] = [sigma, 1]
    total = None
    for sigma, count in classes.values():
        g = gram(assemble_psi_matrix(model, grid_check, grid_hat, sigma)).values * count
        total = g if total is None else total + g
    total = total / math.factorial(N - K)
    return DiscreteKernel(total, grid_check, grid_check, True)


def full_norm2(model, grid: TensorGrid) -> float:
    """``sum_x w(x) |psi(x)|^2`` over the full tensor grid, evaluated directly."""
    pts = grid.points()
    w = grid.weights()
    f = _psi_fn(model)
    total = 0.0
    step = 2**16
    for start in range(0, len(pts), step):
        v = np.asarray(f(pts[start:start + step]))
        total += float(np.sum(w[start:start + step] * np.abs(v) ** 2))
    return total


@dataclass
class DualityReport:
    """Agreement of ``s_n(Psi)^2`` with Gram eigenvalues on both sides."""

    singular_values: np.ndarray
    eig_check: np.ndarray
    eig_hat: np.ndarray
    residual_check: float
    residual_hat: float
    route_check: str
    route_hat: str
    rtol: float
    tolerance: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        s1 = self.singular_values[0] if self.singular_values.size else 0.0
        self.tolerance = self.rtol * s1 * s1
        self.passed = bool(max(self.residual_check, self.residual_hat, 0.0) <= self.tolerance)

    @property
    def residual(self) -> float:
        return max(self.residual_check, self.residual_hat)


def _gram_spectrum(v, dense_limit):
    """Eigenvalues of ``v^H v`` in decreasing order and the route used.

    Dense ``eigvalsh`` when the Gram matrix is at most ``dense_limit`` wide;
    otherwise ``v^H`` is tall, and with ``v^H = Q R`` the nonzero spectrum of
    ``v^H v = Q (R R^H) Q^H`` is that of the small matrix ``R R^H``.
    """
    n = v.shape[1]
    if n <= dense_limit:
        g = v.conj().T @ v
        lam = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
        return lam[::-1], "dense"
    r = np.linalg.qr(v.conj().T, mode="r")
    small = r @ r.conj().T
    lam = np.linalg.eigvalsh(0.5 * (small + small.conj().T))[::-1]
    return np.concatenate([lam, np.zeros(n - len(lam))]), "range-projected"


def verify_duality(psi_matrix: DiscreteKernel, rtol: float = 1e-10, dense_limit: int = 4096) -> DualityReport:
    """Compare squared singular values of ``Psi`` with the spectra of ``Psi^H Psi`` and ``Psi Psi^H``."""
    if not psi_matrix.weighted:
        raise ValueError("quadrature weights must be absorbed before spectral comparison")
    v = psi_matrix.values
    if v.size == 0:
        empty = np.zeros(0)
        return DualityReport(empty, empty, empty, 0.0, 0.0, "dense", "dense", rtol)
    s = np.linalg.svd(v, compute_uv=False)
    lam_c, route_c = _gram_spectrum(v, dense_limit)
    lam_h, route_h = _gram_spectrum(v.conj().T, dense_limit)
    r = len(s)
    res_c = float(np.max(np.abs(s**2 - lam_c[:r])))
    res_h = float(np.max(np.abs(s**2 - lam_h[:r])))
    return DualityReport(s, lam_c, lam_h, res_c, res_h, route_c, route_h, rtol)
