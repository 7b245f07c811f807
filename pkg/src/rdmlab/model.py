"""Particle configurations and manufactured Coulombic-type wavefunctions.

A configuration point for ``N`` particles in ``R^d`` is an array of shape
``(..., N, d)``; every function here broadcasts over the leading axes.

The wavefunction is manufactured rather than solved for::

    psi = exp(F) * mu * prod_l exp(-kappa * sqrt(1 + |x_l|^2))

with ``mu`` a smooth Gaussian-mixture core and ``F`` the Jastrow exponent.
All cusp structure therefore comes from ``F`` and the factorization
``psi = A * B * C * mu`` holds by construction.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import SingularConfiguration, StepTooCoarse

#: Constant of the logarithmic correction ``H`` in the optimal Jastrow factor.
C0 = (2.0 - math.pi) / (12.0 * math.pi)

#: Known optimal decay exponent of the one-particle density matrix.
ONE_BODY_EXPONENT = 8.0 / 3.0


@dataclass(frozen=True)
class ParticleConfig:
    """Sizes and physical constants of the ``N``-particle system.

    ``K`` is the split index: ``x = (x_check, x_hat)`` with ``K`` particles
    in ``x_check`` and ``N - K`` in ``x_hat``.
    """

    N: int
    d: int = 3
    K: int = 1
    Z: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d!r}")
        if int(self.K) != self.K or not 1 <= self.K <= self.N - 1:
            raise ValueError(f"K must satisfy 1 <= K <= N-1 = {self.N - 1}, got {self.K!r}")
        if not self.Z > 0:
            raise ValueError(f"Z must be positive, got {self.Z!r}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa!r}")

    @property
    def L(self) -> int:
        return min(self.K, self.N - self.K)

    @property
    def alpha_K(self) -> float:
        """Eigenvalue decay exponent ``1 + 7/(3L)``."""
        return 1.0 + 7.0 / (3.0 * self.L)

    @property
    def reference_exponent(self) -> float:
        """Best known decay exponent for this split.

        ``8/3`` when ``K`` is ``1`` or ``N - 1``, otherwise ``alpha_K``.
        """
        if self.K in (1, self.N - 1):
            return ONE_BODY_EXPONENT
        return self.alpha_K


def _charge(config) -> float:
    return float(getattr(config, "Z", config))


def _pair_index(n):
    j, k = np.triu_indices(n, 1)
    return j, k


def _norms(x):
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def tau(x):
    """``|x| - sqrt(1 + |x|^2)`` for points of shape ``(..., d)``.

    Evaluated as ``-1 / (|x| + sqrt(1 + |x|^2))`` to avoid cancellation
    for large ``|x|``. The range is ``[-1, 0)``.
    """
    r = _norms(x)
    return -1.0 / (r + np.sqrt(1.0 + r * r))


def one_norm(x):
    """Sum of per-particle Euclidean norms ``|x_1| + ... + |x_N|``."""
    return _norms(x).sum(axis=-1)


def _nuclear_tau(x):
    return tau(x).sum(axis=-1)


def _pair_tau(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[-2]
    if n < 2:
        return np.zeros(x.shape[:-2])
    j, k = _pair_index(n)
    return tau(x[..., j, :] - x[..., k, :]).sum(axis=-1)


def _cross_tau(x_check, x_hat):
    x_check = np.asarray(x_check, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    diff = x_check[..., :, None, :] - x_hat[..., None, :, :]
    return tau(diff).sum(axis=(-1, -2))


def jastrow_F(x, config):
    """Jastrow exponent ``-(Z/2) sum_j tau(x_j) + (1/4) sum_{j<k} tau(x_j - x_k)``.

    ``config`` may be a :class:`ParticleConfig` or the charge ``Z`` itself;
    the particle count is read from ``x``.
    """
    Z = _charge(config)
    return -0.5 * Z * _nuclear_tau(x) + 0.25 * _pair_tau(x)


def coulomb_V(x, config):
    """Coulomb potential ``-sum Z/|x_j| + sum_{j<k} 1/|x_j - x_k|``.

    Raises
    ------
    SingularConfiguration
        If any particle sits at the nucleus or two particles coincide.
    """
    x = np.asarray(x, dtype=float)
    Z = _charge(config)
    r = _norms(x)
    n = x.shape[-2]
    j, k = _pair_index(n)
    rjk = _norms(x[..., j, :] - x[..., k, :])
    if np.any(r == 0) or np.any(rjk == 0):
        raise SingularConfiguration("configuration lies on the Coulomb singular set")
    return -Z * (1.0 / r).sum(axis=-1) + (1.0 / rjk).sum(axis=-1)


def lambda_dist(j, x):
    """Distance ``min{1, |x_j|, |x_j - x_k| / sqrt(2)}`` for particle ``j``.

    ``j`` is a 0-based particle index.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-2]
    if not 0 <= j < n:
        raise IndexError(f"particle index {j} out of range for N={n}")
    terms = [np.ones(x.shape[:-2]), _norms(x[..., j, :])]
    for k in range(n):
        if k != j:
            terms.append(_norms(x[..., j, :] - x[..., k, :]) / math.sqrt(2.0))
    return np.min(np.stack(terms, axis=0), axis=0)


def sigma_dist(x):
    """Distance-like function vanishing exactly on the singular set.

    Minimum of ``|x_j|`` and ``|x_j - x_k|`` over the particles of ``x``
    (shape ``(..., K, d)``).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-2]
    terms = [_norms(x).min(axis=-1)]
    if n >= 2:
        j, k = _pair_index(n)
        terms.append(_norms(x[..., j, :] - x[..., k, :]).min(axis=-1))
    return np.min(np.stack(terms, axis=0), axis=0)


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff equal to 1 on ``r <= inner`` and 0 on ``r >= outer``.

    Quintic smoothstep in between, so the profile is ``C^2``.
    """

    inner: float = 1.0
    outer: float = 2.0

    def __call__(self, r):
        t = np.clip((np.asarray(r, dtype=float) - self.inner) / (self.outer - self.inner), 0.0, 1.0)
        return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def appendix_factors(x, config, cutoff: Cutoff | None = None):
    """Cutoff Jastrow exponent ``G`` and logarithmic correction ``H``.

    Returns
    -------
    G, H : ndarray
        Arrays over the leading axes of ``x``. ``0 * log 0`` is taken as 0.
    """
    chi = cutoff or Cutoff()
    x = np.asarray(x, dtype=float)
    Z = _charge(config)
    n = x.shape[-2]
    r = _norms(x)
    j, k = _pair_index(n)
    rjk = _norms(x[..., j, :] - x[..., k, :])
    G = -0.5 * Z * (chi(r) * r).sum(axis=-1) + 0.25 * (chi(rjk) * rjk).sum(axis=-1)

    rr = r * r
    s = rr[..., j] + rr[..., k]
    dots = np.einsum("...a,...a->...", x[..., j, :], x[..., k, :])
    safe = np.where(s > 0, s, 1.0)
    logs = np.where(s > 0, np.log(safe), 0.0)
    H = C0 * Z * (chi(r[..., j]) * chi(r[..., k]) * dots * logs).sum(axis=-1)
    return G, H


@dataclass(frozen=True, eq=False)
class GaussianCore:
    """Smooth core ``mu`` as a sum of anisotropic Gaussian bumps.

    Bump ``i`` is ``a_i * exp(-q_i / 2)`` with, for ``z = (x - c_i) / w_i``,
    ``q_i = sum z^2 + coupling * sum_axes (sum_particles z)^2``.
    The coupling term correlates particles; with ``coupling = 0`` each bump
    is a product over particles.

    Parameters
    ----------
    centers, widths : ndarray, shape (M, N, d)
    amplitudes : ndarray, shape (M,)
        Real or complex.
    coupling : float
        Nonnegative inter-particle correlation strength.
    """

    centers: np.ndarray
    widths: np.ndarray
    amplitudes: np.ndarray
    coupling: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        w = np.broadcast_to(np.asarray(self.widths, dtype=float), c.shape).copy()
        a = np.atleast_1d(np.asarray(self.amplitudes))
        if c.ndim != 3 or a.shape != (c.shape[0],):
            raise ValueError("centers must be (M, N, d) and amplitudes (M,)")
        if np.any(w <= 0):
            raise ValueError("widths must be positive")
        if self.coupling < 0:
            raise ValueError("coupling must be nonnegative")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def single(cls, N, d, width=1.0, coupling=0.0, center=None, amplitude=1.0):
        c = np.zeros((1, N, d)) if center is None else np.asarray(center, dtype=float).reshape(1, N, d)
        return cls(c, np.full((1, N, d), float(width)), np.array([amplitude]), coupling)

    @property
    def n_particles(self) -> int:
        return self.centers.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.amplitudes)

    def symmetrized(self) -> "GaussianCore":
        """Totally symmetric core: every bump replaced by all its particle permutations."""
        n = self.n_particles
        perms = list(itertools.permutations(range(n)))
        c = np.concatenate([self.centers[:, p, :] for p in perms], axis=0)
        w = np.concatenate([self.widths[:, p, :] for p in perms], axis=0)
        a = np.concatenate([self.amplitudes for _ in perms]) / len(perms)
        return GaussianCore(c, w, a, self.coupling)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None, :, :] - self.centers) / self.widths
        q = (z * z).sum(axis=(-1, -2))
        if self.coupling:
            q = q + self.coupling * (z.sum(axis=-2) ** 2).sum(axis=-1)
        return (self.amplitudes * np.exp(-0.5 * q)).sum(axis=-1)


class Factors(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    mu: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True, eq=False)
class WavefunctionModel:
    """Manufactured wavefunction ``psi = exp(F) * mu * decay``.

    ``nuclear_jastrow`` and ``pair_jastrow`` switch the nuclear and
    electron-electron parts of ``F`` on or off. ``energy`` is carried as
    metadata only.
    """

    config: ParticleConfig
    core: GaussianCore
    nuclear_jastrow: bool = True
    pair_jastrow: bool = True
    energy: float | None = None

    def __post_init__(self):
        if self.core.n_particles != self.config.N or self.core.centers.shape[2] != self.config.d:
            raise ValueError("core shape does not match (N, d) of the configuration")

    def with_jastrow(self, nuclear: bool, pair: bool) -> "WavefunctionModel":
        return dataclasses.replace(self, nuclear_jastrow=nuclear, pair_jastrow=pair)

    def cusp_free(self) -> "WavefunctionModel":
        """Same core and decay with the Jastrow factor removed."""
        return self.with_jastrow(False, False)

    @property
    def is_complex(self) -> bool:
        return self.core.is_complex

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-2:] != (self.config.N, self.config.d):
            raise ValueError(f"expected points of shape (..., {self.config.N}, {self.config.d}), got {x.shape}")
        return x

    def jastrow_exponent(self, x):
        x = self._check(x)
        out = np.zeros(x.shape[:-2])
        if self.nuclear_jastrow:
            out = out - 0.5 * self.config.Z * _nuclear_tau(x)
        if self.pair_jastrow:
            out = out + 0.25 * _pair_tau(x)
        return out

    def decay(self, x):
        """``prod_l exp(-kappa * sqrt(1 + |x_l|^2))``."""
        x = np.asarray(x, dtype=float)
        r = _norms(x)
        return np.exp(-self.config.kappa * np.sqrt(1.0 + r * r).sum(axis=-1))

    def mu(self, x):
        return self.core(self._check(x))

    def phi(self, x):
        x = self._check(x)
        return self.core(x) * self.decay(x)

    def psi(self, x):
        x = self._check(x)
        return np.exp(self.jastrow_exponent(x)) * self.decay(x) * self.core(x)

    __call__ = psi

    def factors(self, x_check, x_hat) -> Factors:
        """Evaluate ``A(x_check)``, ``B(x_hat)``, ``C(x_check, x_hat)``, ``mu`` and ``psi``.

        The split index is taken from ``x_check.shape[-2]``, so any
        ``1 <= K <= N - 1`` may be used with the same model.
        """
        x_check = np.asarray(x_check, dtype=float)
        x_hat = np.asarray(x_hat, dtype=float)
        shape = np.broadcast_shapes(x_check.shape[:-2], x_hat.shape[:-2])
        x_check = np.broadcast_to(x_check, shape + x_check.shape[-2:])
        x_hat = np.broadcast_to(x_hat, shape + x_hat.shape[-2:])
        x = self._check(np.concatenate([x_check, x_hat], axis=-2))
        Z = self.config.Z

        def block(xb):
            e = np.zeros(shape)
            if self.nuclear_jastrow:
                e = e - 0.5 * Z * _nuclear_tau(xb)
            if self.pair_jastrow:
                e = e + 0.25 * _pair_tau(xb)
            return np.exp(e) * self.decay(xb)

        A = block(x_check)
        B = block(x_hat)
        C = np.exp(0.25 * _cross_tau(x_check, x_hat)) if self.pair_jastrow else np.ones(shape)
        mu = self.core(x)
        return Factors(A, B, C, mu, self.psi(x))


def evaluate_factors(model: WavefunctionModel, x_check, x_hat) -> Factors:
    """Functional alias of :meth:`WavefunctionModel.factors`."""
    return model.factors(x_check, x_hat)


@dataclass(frozen=True)
class EnvelopeSpec:
    """Pointwise derivative envelope for particle-``j`` derivatives of order ``m``.

    The bound is ``A * (1 + |x_j|^e + sum_{k != j} |x_j - x_k|^e)`` with
    ``e = min(alpha - |m|, 0)``.
    """

    order: tuple
    alpha: float
    constant: float = 1.0

    @property
    def exponent(self) -> float:
        return min(self.alpha - sum(self.order), 0.0)

    def profile(self, x, j):
        """Envelope shape without the constant."""
        x = np.asarray(x, dtype=float)
        e = self.exponent
        xj = x[..., j, :]
        out = 1.0 + _norms(xj) ** e
        for k in range(x.shape[-2]):
            if k != j:
                out = out + _norms(xj - x[..., k, :]) ** e
        return out

    def bound(self, x, j):
        return self.constant * self.profile(x, j)


@dataclass
class EnvelopeReport:
    order: tuple
    particle: int
    alpha: float
    exponent: float
    derivatives: np.ndarray
    envelope: np.ndarray
    constant: float
    step: float
    finite: bool = field(init=False)

    def __post_init__(self):
        self.finite = bool(np.isfinite(self.constant))


def _stencil(order, h):
    """Tensor central-difference stencil as (offsets (S, d), coefficients (S,))."""
    axes = []
    for k in order:
        pts = [((k / 2.0 - i) * h, (-1) ** i * math.comb(k, i) / h**k) for i in range(k + 1)]
        axes.append(pts)
    offsets, coefs = [], []
    for combo in itertools.product(*axes):
        offsets.append([c[0] for c in combo])
        coefs.append(np.prod([c[1] for c in combo]))
    return np.array(offsets), np.array(coefs)


def partial_derivative(f: Callable, x, j, order, h):
    """Central-difference estimate of ``d^order f / d x_j^order`` with step ``h``."""
    x = np.asarray(x, dtype=float)
    offsets, coefs = _stencil(tuple(order), h)
    pts = np.repeat(x[..., None, :, :], len(coefs), axis=-3).copy()
    pts[..., :, j, :] += offsets
    vals = f(pts)
    return (vals * coefs).sum(axis=-1)


def richardson_derivative(f: Callable, x, j, order, h, rtol=0.1):
    """Richardson-extrapolated derivative validated at two scales.

    Extrapolates the ``O(h^2)`` central difference from ``(h, h/2)`` and
    from ``(h/2, h/4)`` and returns the finer value.

    Raises
    ------
    StepTooCoarse
        If the two extrapolations differ by more than ``rtol`` (relative),
        beyond a round-off floor.
    """
    order = tuple(int(k) for k in order)
    m = sum(order)
    d1, d2, d3 = (partial_derivative(f, x, j, order, h / s) for s in (1.0, 2.0, 4.0))
    if m == 0:
        return d1
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    scale = np.abs(f(np.asarray(x, dtype=float)))
    floor = 1e3 * np.finfo(float).eps * 2.0**m * scale / (h / 4.0) ** m
    gap = np.abs(r1 - r2)
    tol = rtol * np.maximum(np.abs(r1), np.abs(r2)) + floor
    if np.any(gap > tol):
        worst = float(np.max(gap / np.maximum(tol, np.finfo(float).tiny)))
        raise StepTooCoarse(f"derivative estimates at two scales disagree (gap/tol = {worst:.3g}); reduce step")
    return r2


def envelope_check(
    model: WavefunctionModel,
    m: Sequence[int],
    j: int,
    samples,
    step: float,
    *,
    target: str = "mu",
    alpha: float = 2.0,
) -> EnvelopeReport:
    """Fit the smallest envelope constant for a particle-``j`` derivative.

    Estimates ``d^m_{x_j} target`` at every sample by Richardson-extrapolated
    central differences and returns the smallest ``C`` with
    ``|d^m target| <= C * (1 + |x_j|^e + sum_k |x_j - x_k|^e)``,
    ``e = min(alpha - |m|, 0)``, over the samples.

    ``target`` is one of ``"mu"``, ``"phi"``, ``"psi"``. The default
    ``alpha = 2`` is the smoothness order of ``mu``; ``psi`` itself has
    ``alpha = 1``.
    """
    m = tuple(int(k) for k in m)
    if len(m) != model.config.d or any(k < 0 for k in m):
        raise ValueError(f"order must be a nonnegative multi-index of length {model.config.d}")
    if sum(m) > 4:
        raise ValueError("derivative orders above 4 are not supported")
    samples = np.asarray(samples, dtype=float)
    if np.any(sigma_dist(samples) < 10.0 * step):
        raise ValueError("samples must stay at least 10*step away from the singular set")
    f = {"mu": model.mu, "phi": model.phi, "psi": model.psi}[target]
    deriv = richardson_derivative(f, samples, j, m, step)
    spec = EnvelopeSpec(m, alpha)
    env = spec.profile(samples, j)
    ratio = np.abs(deriv) / env
    const = float(np.max(ratio)) if ratio.size else 0.0
    return EnvelopeReport(m, j, alpha, spec.exponent, deriv, env, const, step)
