"""Fock-basis states, Wigner functions and Liouville transport on phase space.

Phase-space points are complex amplitudes ``alpha``.  Grids are laid out on
the alpha plane: the ``x`` axis is ``Re(alpha)`` and the ``p`` axis is
``Im(alpha)``, so ``d^2 alpha = dx dp`` and every Wigner function obeys
``integral W d^2 alpha = 1`` with ``|W| <= 2/pi``.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateStateError, DomainError, FlowConsistencyError, TruncationError

WIGNER_BOUND = 2 / math.pi
DEFAULT_CUTOFF = 60
TAIL_BUDGET = 1e-10
THREADS_ENV = "CLASSEVO_THREADS"


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# Fock-basis states
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FockVector:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return self.coeffs.size - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def density(self) -> "FockDensity":
        return FockDensity(np.outer(self.coeffs, self.coeffs.conj()))

    def mean_annihilation(self) -> complex:
        """``<a>`` for the truncated state."""
        c = self.coeffs
        n = np.arange(1, c.size)
        return complex(np.sum(c[:-1].conj() * np.sqrt(n) * c[1:]))

    def mean_number(self) -> float:
        return float(np.sum(np.arange(self.coeffs.size) * np.abs(self.coeffs) ** 2))


@dataclass(frozen=True)
class FockDensity:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("density matrix must be square")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise DomainError(f"density matrix has trace {np.trace(m).real!r}")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise DomainError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[0] - 1


def _coherent_log_weights(alpha, cutoff):
    n = np.arange(cutoff + 1)
    r2 = abs(alpha) ** 2
    if r2 == 0.0:
        return n, np.where(n == 0, 0.0, -np.inf)
    return n, n * math.log(r2) - r2 - gammaln(n + 1)


def required_cutoff(alpha: complex, budget: float = TAIL_BUDGET) -> int:
    """Smallest cutoff whose Poisson tail mass is below ``budget``."""
    r2 = abs(alpha) ** 2
    if r2 == 0.0:
        return 0
    cut = int(r2)
    while True:
        _, logw = _coherent_log_weights(alpha, cut + 400)
        tail = np.exp(logw[cut + 1:]).sum()
        if tail < budget:
            return cut
        cut += 1


def _raw_coherent(alpha, cutoff):
    n, logw = _coherent_log_weights(alpha, cutoff)
    amp = np.exp(0.5 * logw)
    if alpha != 0:
        amp = amp * np.exp(1j * n * np.angle(alpha))
    return amp.astype(complex)


def coherent_fock(alpha: complex, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
    """Coherent state ``|alpha>`` truncated at ``cutoff`` and renormalized.

    Raises :class:`TruncationError` when the discarded Poisson tail exceeds
    the truncation budget.
    """
    alpha = complex(alpha)
    if cutoff < 0:
        raise DomainError("cutoff must be nonnegative")
    c = _raw_coherent(alpha, cutoff)
    tail = 1.0 - float(np.sum(np.abs(c) ** 2))
    if tail > TAIL_BUDGET:
        need = required_cutoff(alpha)
        raise TruncationError(
            f"cutoff {cutoff} too small for |alpha|={abs(alpha):.4g}; need >= {need}", need
        )
    return FockVector(c / np.linalg.norm(c))


def coherent_overlap(a1: complex, a2: complex) -> complex:
    """``<a1|a2> = exp(-(|a1|^2 + |a2|^2)/2 + conj(a1) a2)``."""
    return complex(np.exp(-(abs(a1) ** 2 + abs(a2) ** 2) / 2 + np.conj(a1) * a2))


def cat_norm_squared(a1: complex, a2: complex, sign: int) -> float:
    return 2.0 + 2.0 * sign * coherent_overlap(a1, a2).real


def cat_fock(a1: complex, a2: complex, sign: int, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
    """Normalized ``(|a1> + sign |a2>)`` in the Fock basis."""
    if sign not in (1, -1):
        raise DomainError("relative sign must be +1 or -1")
    norm2 = cat_norm_squared(a1, a2, sign)
    if norm2 < 1e-12:
        raise DegenerateStateError("superposition has vanishing norm")
    for a in (a1, a2):
        need = required_cutoff(a)
        if need > cutoff:
            raise TruncationError(f"cutoff {cutoff} too small; need >= {need}", need)
    c = _raw_coherent(complex(a1), cutoff) + sign * _raw_coherent(complex(a2), cutoff)
    # Renormalize against the truncated vector so the stored state is unit norm.
    return FockVector(c / np.linalg.norm(c))


# --------------------------------------------------------------------------
# Grids
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GridGeometry:
    x_range: tuple = (-6.0, 6.0)
    p_range: tuple = (-6.0, 6.0)
    nx: int = 301
    np_: int = 301

    def __post_init__(self):
        if self.nx < 2 or self.np_ < 2:
            raise DomainError("grid needs at least two nodes per axis")
        if not (self.x_range[1] > self.x_range[0] and self.p_range[1] > self.p_range[0]):
            raise DomainError("grid window is empty")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.nx)

    @property
    def ps(self) -> np.ndarray:
        return np.linspace(self.p_range[0], self.p_range[1], self.np_)

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / (self.nx - 1)

    @property
    def dp(self) -> float:
        return (self.p_range[1] - self.p_range[0]) / (self.np_ - 1)

    def alphas(self) -> np.ndarray:
        """Complex nodes, shape ``(nx, np)`` (x index first)."""
        return self.xs[:, None] + 1j * self.ps[None, :]


@dataclass(frozen=True)
class WignerGrid:
    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.geometry.nx, self.geometry.np_):
            raise DomainError("values do not match the grid geometry")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def _weights(self):
        g = self.geometry
        wx = np.full(g.nx, g.dx)
        wx[[0, -1]] *= 0.5
        wp = np.full(g.np_, g.dp)
        wp[[0, -1]] *= 0.5
        return wx[:, None] * wp[None, :]

    def integral(self) -> float:
        """Trapezoidal estimate of the integral of W over the window."""
        return float(np.sum(self._weights() * self.values))

    def integrate(self, f: np.ndarray) -> complex:
        return complex(np.sum(self._weights() * f * self.values))

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    def to_csv(self, path) -> None:
        """Write ``x,p,w`` rows, x-major, shortest round-trip floats."""
        xs, ps = self.geometry.xs, self.geometry.ps
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,p,w\n")
            for i, x in enumerate(xs):
                xr = repr(float(x))
                row = self.values[i]
                fh.writelines(f"{xr},{float(p)!r},{float(w)!r}\n" for p, w in zip(ps, row))

    def to_json(self) -> str:
        g = self.geometry
        return json.dumps(
            {
                "convention": "x = Re(alpha), p = Im(alpha); integral W dx dp = 1",
                "x_range": list(g.x_range),
                "p_range": list(g.p_range),
                "nx": g.nx,
                "np": g.np_,
                "layout": "row-major, x outer, p inner",
                "values": [float(v) for v in self.values.ravel()],
            }
        )

    @classmethod
    def from_csv(cls, path) -> "WignerGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        ps = np.unique(data[:, 1])
        geom = GridGeometry((xs[0], xs[-1]), (ps[0], ps[-1]), xs.size, ps.size)
        return cls(geom, data[:, 2].reshape(xs.size, ps.size))


def _map_rows(func: Callable[[np.ndarray], np.ndarray], alphas: np.ndarray) -> np.ndarray:
    """Evaluate ``func`` on row chunks of the node array, optionally threaded."""
    workers = thread_count()
    if workers <= 1 or alphas.shape[0] < 2 * workers:
        return func(alphas)
    chunks = np.array_split(alphas, workers, axis=0)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(func, chunks))
    return np.concatenate(parts, axis=0)


# --------------------------------------------------------------------------
# Wigner functions from density matrices
# --------------------------------------------------------------------------


def _wigner_kernel_sum(rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """``sum_{m,n} rho_mn K_nm(alpha)`` without the 2/pi factor.

    For each offset ``k = m - n >= 0`` the normalized functions

        h_n = sqrt(n!/(n+k)!) L_n^k(x) (2 conj(alpha))^k exp(-x/2),  x = 4|alpha|^2,

    obey the Laguerre three-term recurrence rescaled by the square-root
    factorials, starting from the bounded seed
    ``h_0 = exp(-x/2) (2 conj(alpha))^k / sqrt(k!)``.
    """
    nonzero = np.flatnonzero(np.any(rho != 0, axis=1))
    dim = int(nonzero[-1]) + 1 if nonzero.size else 0
    x = 4.0 * np.abs(alpha) ** 2
    two_conj = 2.0 * np.conj(alpha)
    seed = np.exp(-x / 2).astype(complex)
    acc = np.zeros(alpha.shape, dtype=complex)
    for k in range(dim):
        if k > 0:
            seed = seed * two_conj / math.sqrt(k)
        weight = 1.0 if k == 0 else 2.0
        h_prev = None
        h = seed
        for n in range(dim - k):
            m = n + k
            coeff = rho[m, n]
            if coeff != 0:
                term = coeff * h
                acc += weight * term if n % 2 == 0 else -weight * term
            if n + 1 < dim - k:
                nxt = (2 * n + 1 + k - x) * h
                if h_prev is not None:
                    nxt = nxt - math.sqrt(n * (n + k)) * h_prev
                h_prev, h = h, nxt / math.sqrt((n + 1) * (n + 1 + k))
    return acc


def wigner_of_density(rho, geometry: GridGeometry | None = None) -> WignerGrid:
    """Wigner function of a Fock-basis density matrix on a grid.

    Off-diagonal contributions are folded as ``2 Re`` of the lower triangle;
    the imaginary residue is checked to vanish.
    """
    geometry = geometry or GridGeometry()
    if isinstance(rho, FockVector):
        rho = rho.density()
    m = rho.matrix if isinstance(rho, FockDensity) else np.asarray(rho, dtype=complex)
    alphas = geometry.alphas()

    far = float(np.abs(alphas).max())
    if 2.0 * far**2 > 700.0:
        warnings.warn(
            f"Wigner kernel underflows on the grid beyond |alpha|={math.sqrt(350):.3g}",
            RuntimeWarning,
            stacklevel=2,
        )

    total = _map_rows(lambda a: _wigner_kernel_sum(m, a), alphas)
    # Diagonal terms are real for Hermitian rho; folded pairs are taken as 2 Re.
    return WignerGrid(geometry, WIGNER_BOUND * total.real)


def wigner_points(rho, alphas) -> np.ndarray:
    """Wigner function of ``rho`` at arbitrary complex points."""
    if isinstance(rho, FockVector):
        rho = rho.density()
    m = rho.matrix if isinstance(rho, FockDensity) else np.asarray(rho, dtype=complex)
    a = np.asarray(alphas, dtype=complex)
    return WIGNER_BOUND * _wigner_kernel_sum(m, a).real


# --------------------------------------------------------------------------
# Closed-form initial Wigner functions
# --------------------------------------------------------------------------


def _dyad_wigner(alpha, beta, gamma):
    """Wigner function of the operator ``|beta><gamma|`` (complex valued)."""
    return (
        WIGNER_BOUND
        * coherent_overlap(gamma, beta)
        * np.exp(-2.0 * (np.conj(alpha) - np.conj(gamma)) * (alpha - beta))
    )


@dataclass(frozen=True)
class CoherentWigner:
    """``W(alpha) = (2/pi) exp(-2|alpha - alpha0|^2)``."""

    alpha0: complex

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=complex)
        return WIGNER_BOUND * np.exp(-2.0 * np.abs(a - self.alpha0) ** 2)

    def fock(self, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
        return coherent_fock(self.alpha0, cutoff)

    def mean(self) -> complex:
        return complex(self.alpha0)


@dataclass(frozen=True)
class CatWigner:
    """Wigner function of the normalized superposition ``|a1> + sign |a2>``."""

    alpha1: complex
    alpha2: complex
    sign: int = -1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DomainError("relative sign must be +1 or -1")
        if cat_norm_squared(self.alpha1, self.alpha2, self.sign) < 1e-12:
            raise DegenerateStateError("superposition has vanishing norm")

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=complex)
        a1, a2, s = self.alpha1, self.alpha2, self.sign
        cross = _dyad_wigner(a, a1, a2)
        w = (
            _dyad_wigner(a, a1, a1).real
            + _dyad_wigner(a, a2, a2).real
            + 2.0 * s * cross.real
        )
        return w / cat_norm_squared(a1, a2, s)

    def fock(self, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
        return cat_fock(self.alpha1, self.alpha2, self.sign, cutoff)

    def mean(self) -> complex:
        """``<a>`` from ``<b|a|c> = c <b|c>``."""
        a1, a2, s = self.alpha1, self.alpha2, self.sign
        num = (
            a1
            + a2
            + s * (coherent_overlap(a1, a2) * a2 + coherent_overlap(a2, a1) * a1)
        )
        return complex(num / cat_norm_squared(a1, a2, s))


# --------------------------------------------------------------------------
# Classical transport
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowMap:
    """Invertible phase-space flow ``alpha -> forward(alpha, t)``."""

    forward: Callable
    inverse: Callable

    def check(self, t: float, probes: int = 32, seed: int = 0, tol: float = 1e-10) -> None:
        rng = np.random.default_rng(seed)
        a = rng.normal(scale=3.0, size=probes) + 1j * rng.normal(scale=3.0, size=probes)
        back = self.inverse(self.forward(a, t), t)
        err = np.max(np.abs(back - a) / np.maximum(1.0, np.abs(a)))
        if not err <= tol:
            raise FlowConsistencyError(f"flow inverse round trip error {err:.3e} at t={t}")


def wigner_pullback(
    w0: Callable,
    flow: FlowMap,
    t: float,
    geometry: GridGeometry | None = None,
    frame: Callable | None = None,
) -> WignerGrid:
    """Transport ``w0`` along a classical flow: ``W_t(alpha) = w0(flow^-1(alpha, t))``.

    ``frame`` optionally maps displayed grid nodes to lab-frame points before
    the pull-back (e.g. undoing a free rotation).
    """
    geometry = geometry or GridGeometry()
    flow.check(t)
    alphas = geometry.alphas()
    if frame is not None:
        alphas = frame(alphas)

    def evaluate(a):
        return np.real(w0(flow.inverse(a, t)))

    return WignerGrid(geometry, _map_rows(evaluate, alphas))


def wigner_direct(w0: Callable, geometry: GridGeometry | None = None) -> WignerGrid:
    geometry = geometry or GridGeometry()
    return WignerGrid(geometry, np.real(w0(geometry.alphas())))


def mean_from_grid(w: WignerGrid) -> complex:
    """Quadrature estimate of ``<alpha>`` normalized by the grid integral."""
    norm = w.integral()
    return w.integrate(w.geometry.alphas()) / norm
