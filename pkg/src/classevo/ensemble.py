"""Covariance dynamics of N all-to-all coupled oscillators under K-separability.

Natural units: time ``tau = omega t``, coupling ``R = kappa / (m omega^2)``,
inverse temperature ``beta = hbar omega / (k_B T)``.  Phase-space vectors are
ordered (all positions, then all momenta) and ``J = [[0, E], [-E, 0]]``.

Within one block of size ``N_j`` the position coupling is
``G_j = (1 + R N) E_j - R n_j n_j^T``.  Its eigenspaces are the direction of
``n_j`` and the orthogonal complement, so every matrix of the form
``u (E_j - P_j) + v P_j`` with ``P_j = n_j n_j^T / N_j`` stays in that form
under ``C -> S C S^T``: the block dynamics reduces to two independent 2x2
problems, one per eigenspace, at a cost independent of ``N_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError
from .integrate import IntegratorOptions

DENSE_LIMIT = 256
ALGEBRA_TOL = 1e-12


# --------------------------------------------------------------------------
# Parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise DomainError("partition blocks must be positive integers")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def balanced(cls, N: int, K: int) -> "Partition":
        if N < 1 or K < 1:
            raise DomainError("N and K must be positive")
        if N % K:
            raise DomainError(f"K={K} does not divide N={N}; valid K: {divisors(N)}")
        return cls((N // K,) * K)

    @property
    def N(self) -> int:
        return sum(self.sizes)

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def is_balanced(self) -> bool:
        return len(set(self.sizes)) == 1

    def offsets(self) -> list:
        return list(np.cumsum((0,) + self.sizes[:-1]))


def divisors(N: int) -> list:
    small = [k for k in range(1, int(math.isqrt(N)) + 1) if N % k == 0]
    return sorted(set(small + [N // k for k in small]))


@dataclass(frozen=True)
class NaturalUnits:
    R: float
    beta: float
    tau: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.R, self.beta, self.tau)):
            raise DomainError("natural-unit parameters must be finite")
        if self.R < 0:
            raise DomainError("R must be nonnegative")
        if not self.beta > 0:
            raise DomainError("beta must be positive")


def thermal_sigma(beta: float) -> float:
    """``<xi^2> = <pi^2> = 1/2 + 1/(e^beta - 1)`` of a unit oscillator."""
    if not beta > 0:
        raise DomainError("beta must be positive")
    return 0.5 + 1.0 / math.expm1(beta)


# --------------------------------------------------------------------------
# Structured blocks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StructuredBlock:
    """Covariance block with each quadrant ``a E + b n n^T / N_j``.

    The xp quadrant is symmetric, so the px quadrant is its transpose and
    equals it.
    """

    size: int
    a_xx: float
    b_xx: float
    a_xp: float
    b_xp: float
    a_pp: float
    b_pp: float

    # Eigenspace components: value on (E - P) and on P.
    def perp(self) -> np.ndarray:
        return np.array([[self.a_xx, self.a_xp], [self.a_xp, self.a_pp]])

    def par(self) -> np.ndarray:
        return np.array(
            [
                [self.a_xx + self.b_xx, self.a_xp + self.b_xp],
                [self.a_xp + self.b_xp, self.a_pp + self.b_pp],
            ]
        )

    @classmethod
    def from_eigen(cls, size: int, perp, par) -> "StructuredBlock":
        perp = np.asarray(perp, dtype=float)
        par = np.asarray(par, dtype=float)
        if size == 1:
            # No orthogonal complement; keep the redundant component equal.
            perp = par
        return cls(
            size,
            float(perp[0, 0]),
            float(par[0, 0] - perp[0, 0]),
            float(perp[0, 1]),
            float(par[0, 1] - perp[0, 1]),
            float(perp[1, 1]),
            float(par[1, 1] - perp[1, 1]),
        )

    def is_physical(self) -> bool:
        return (
            self.a_xx > 0
            and self.a_xx + self.b_xx > 0
            and self.a_pp > 0
            and self.a_pp + self.b_pp > 0
        )

    def to_dense(self) -> np.ndarray:
        n = self.size
        E = np.eye(n)
        P = np.full((n, n), 1.0 / n)
        xx = self.a_xx * E + self.b_xx * P
        xp = self.a_xp * E + self.b_xp * P
        pp = self.a_pp * E + self.b_pp * P
        return np.block([[xx, xp], [xp, pp]])

    @classmethod
    def from_dense(cls, C, tol: float = ALGEBRA_TOL) -> "StructuredBlock | None":
        """Project a dense ``2n x 2n`` block onto the algebra.

        Returns ``None`` when the block is not of the structured form.
        """
        C = np.asarray(C, dtype=float)
        n = C.shape[0] // 2
        if C.shape != (2 * n, 2 * n) or n == 0:
            raise DomainError("block must be 2n x 2n")
        quads = [C[:n, :n], C[:n, n:], C[n:, :n], C[n:, n:]]
        coeffs = []
        for q in (quads[0], quads[1], quads[3]):
            if n == 1:
                coeffs.append((float(q[0, 0]), 0.0))
                continue
            off = q[~np.eye(n, dtype=bool)]
            b = float(off.mean()) * n
            a = float(np.diag(q).mean()) - b / n
            coeffs.append((a, b))
        block = cls(n, *coeffs[0], *coeffs[1], *coeffs[2])
        scale = max(1.0, float(np.abs(C).max()))
        if np.max(np.abs(block.to_dense() - C)) > tol * scale:
            return None
        return block


def thermal_covariance(beta: float, partition: Partition) -> list:
    """Thermal state of the uncoupled oscillators, one structured block per party."""
    s = thermal_sigma(beta)
    return [StructuredBlock(n, s, 0.0, 0.0, 0.0, s, 0.0) for n in partition.sizes]


def block_eigenvalues(j: int, partition: Partition, R: float) -> tuple:
    """Eigenvalues of ``G_j``: (orthogonal to ``n_j``, along ``n_j``)."""
    if R < 0:
        raise DomainError("R must be nonnegative")
    N = partition.N
    return 1.0 + R * N, 1.0 + R * (N - partition.sizes[j])


def sqrt_G(j: int, partition: Partition, R: float) -> tuple:
    """``G_j^{1/2}`` as ``(a, b)`` coefficients of ``a E_j + b n_j n_j^T / N_j``."""
    lam_perp, lam_par = block_eigenvalues(j, partition, R)
    a = math.sqrt(lam_perp)
    return a, math.sqrt(lam_par) - a


def _rotation(lam: float, tau: float) -> np.ndarray:
    w = math.sqrt(lam)
    c, s = math.cos(w * tau), math.sin(w * tau)
    return np.array([[c, s / w], [-w * s, c]])


def propagate_block(
    c0: StructuredBlock, j: int, partition: Partition, R: float, tau: float
) -> StructuredBlock:
    """``C_j(tau) = S_j(tau) C_j(0) S_j(tau)^T`` inside the structured algebra."""
    if c0.size != partition.sizes[j]:
        raise DomainError("block size does not match the partition")
    lam_perp, lam_par = block_eigenvalues(j, partition, R)
    S_perp = _rotation(lam_perp, tau)
    S_par = _rotation(lam_par, tau)
    perp = S_perp @ c0.perp() @ S_perp.T
    par = S_par @ c0.par() @ S_par.T
    return StructuredBlock.from_eigen(c0.size, perp, par)


def block_G(j: int, partition: Partition, R: float) -> np.ndarray:
    n = partition.sizes[j]
    return (1.0 + R * partition.N) * np.eye(n) - R * np.ones((n, n))


def _symplectic_from_G(G: np.ndarray, tau: float) -> np.ndarray:
    lam, V = np.linalg.eigh(G)
    w = np.sqrt(lam)
    c = (V * np.cos(w * tau)) @ V.T
    s_over = (V * (np.sin(w * tau) / w)) @ V.T
    s_times = (V * (w * np.sin(w * tau))) @ V.T
    return np.block([[c, s_over], [-s_times, c]])


def propagate_covariance(c0, j: int, partition: Partition, R: float, tau: float):
    """Propagate a block, structured when possible and dense otherwise."""
    if isinstance(c0, StructuredBlock):
        return propagate_block(c0, j, partition, R, tau)
    structured = StructuredBlock.from_dense(c0)
    if structured is not None:
        return propagate_block(structured, j, partition, R, tau).to_dense()
    S = _symplectic_from_G(block_G(j, partition, R), tau)
    return S @ np.asarray(c0, dtype=float) @ S.T


def assemble_dense(blocks) -> np.ndarray:
    """Block-diagonal ``2N x 2N`` covariance in (positions, momenta) order."""
    mats = [b.to_dense() if isinstance(b, StructuredBlock) else np.asarray(b) for b in blocks]
    sizes = [m.shape[0] // 2 for m in mats]
    N = sum(sizes)
    C = np.zeros((2 * N, 2 * N))
    off = 0
    for m, n in zip(mats, sizes):
        idx = np.r_[off:off + n, N + off:N + off + n]
        C[np.ix_(idx, idx)] = m
        off += n
    return C


# --------------------------------------------------------------------------
# Dense matrices and the numerical oracle
# --------------------------------------------------------------------------


def symplectic_form(N: int) -> np.ndarray:
    E = np.eye(N)
    Z = np.zeros((N, N))
    return np.block([[Z, E], [-E, Z]])


def coupling_matrix(partition: Partition, R: float, separable: bool = True) -> np.ndarray:
    """Block-diagonal ``G`` (separable) or the full ``(1+RN)E - R n n^T``."""
    N = partition.N
    if not separable:
        return (1.0 + R * N) * np.eye(N) - R * np.ones((N, N))
    G = np.zeros((N, N))
    for j, off in enumerate(partition.offsets()):
        n = partition.sizes[j]
        G[off:off + n, off:off + n] = block_G(j, partition, R)
    return G


def symplectic_propagator(G: np.ndarray, tau: float) -> np.ndarray:
    """Dense ``S(tau)`` from the spectral decomposition of ``G``."""
    return _symplectic_from_G(np.asarray(G, dtype=float), tau)


def dense_oracle(C0, G, tau_grid, opts: IntegratorOptions | None = None) -> np.ndarray:
    """Integrate ``dC/dtau = A C + C A^T`` with ``A = J diag(G, E)``.

    ``C0`` (``..., 2N, 2N``) and ``G`` (``..., N, N``) may carry leading batch
    dimensions that broadcast against each other and share one adaptive step
    sequence.  Returns an array of shape
    ``(len(tau_grid),) + batch_shape + (2N, 2N)``.  Uses an 8th-order
    Dormand-Prince integrator, independent of the closed-form propagators.
    """
    G = np.asarray(G, dtype=float)
    N = G.shape[-1]
    if N > DENSE_LIMIT:
        raise DomainError(f"dense oracle limited to N <= {DENSE_LIMIT}, got {N}")
    C0 = np.asarray(C0, dtype=float)
    if C0.shape[-2:] != (2 * N, 2 * N):
        raise DomainError("covariance and coupling matrix sizes differ")
    batch = np.broadcast_shapes(C0.shape[:-2], G.shape[:-2])
    A = np.zeros(G.shape[:-2] + (2 * N, 2 * N))
    A[..., :N, N:] = np.eye(N)
    A[..., N:, :N] = -G
    At = np.swapaxes(A, -1, -2).copy()
    shape = batch + (2 * N, 2 * N)
    y0 = np.broadcast_to(C0, shape).ravel().copy()

    def rhs(tau, y):
        C = y.reshape(shape)
        return (A @ C + C @ At).ravel()

    opts = opts or IntegratorOptions(rtol=1e-12, atol=1e-13)
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.size == 1:
        return y0.reshape((1,) + shape)
    sol = solve_ivp(
        rhs,
        (tau_grid[0], tau_grid[-1]),
        y0,
        method="DOP853",
        t_eval=tau_grid,
        rtol=opts.rtol,
        atol=opts.atol,
    )
    if sol.status != 0:
        raise IntegrationError(f"dense oracle failed: {sol.message}", float(sol.t[-1]))
    return sol.y.T.reshape((tau_grid.size,) + shape)


def uncertainty_min_eigenvalue(C) -> float:
    """Smallest eigenvalue of ``C + i J / 2`` (nonnegative for physical states)."""
    C = np.asarray(C, dtype=float)
    N = C.shape[0] // 2
    return float(np.linalg.eigvalsh(C + 0.5j * symplectic_form(N)).min())


# --------------------------------------------------------------------------
# Mean momentum and first moments
# --------------------------------------------------------------------------


def r_K(N: int, K: int, R: float) -> float:
    return R * N * (1.0 - 1.0 / K)


def variance_mean_momentum(partition: Partition, R: float, beta: float, tau) -> np.ndarray:
    """Closed-form variance of ``Pi = n^T pi / N`` for a balanced partition."""
    if not partition.is_balanced:
        raise DomainError("closed form needs a balanced partition; use propagate_block")
    if R < 0:
        raise DomainError("R must be nonnegative")
    N, K = partition.N, partition.K
    r = r_K(N, K, R)
    tau = np.asarray(tau, dtype=float)
    return thermal_sigma(beta) / N * (1.0 + r * np.sin(math.sqrt(1.0 + r) * tau) ** 2)


def mean_momentum_variance_structured(blocks, partition: Partition) -> float:
    """``n^T C_pp n / N^2`` from structured blocks (any partition)."""
    N = partition.N
    # n_j^T (a E + b P) n_j = (a + b) N_j
    total = sum((b.a_pp + b.b_pp) * b.size for b in blocks)
    return total / N**2


def mean_propagation(xi, pi, partition: Partition, R: float, tau: float) -> tuple:
    """First moments under the full generator ``G = (1+RN)E - R n n^T``.

    The mean-field terms of the separable dynamics add up to exactly this
    generator, so the result does not depend on the partition.
    """
    xi = np.asarray(xi, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if xi.shape != (partition.N,) or pi.shape != (partition.N,):
        raise DomainError("moment vectors must have length N")
    N = partition.N
    lam_perp, lam_par = 1.0 + R * N, 1.0
    out_xi = np.empty(N)
    out_pi = np.empty(N)
    xi_par = np.full(N, xi.mean())
    pi_par = np.full(N, pi.mean())
    for lam, xs, ps, sign in (
        (lam_par, xi_par, pi_par, 1),
        (lam_perp, xi - xi_par, pi - pi_par, 0),
    ):
        S = _rotation(lam, tau)
        if sign:
            out_xi[:] = S[0, 0] * xs + S[0, 1] * ps
            out_pi[:] = S[1, 0] * xs + S[1, 1] * ps
        else:
            out_xi += S[0, 0] * xs + S[0, 1] * ps
            out_pi += S[1, 0] * xs + S[1, 1] * ps
    return out_xi, out_pi


def separable_mean_field_rhs(partition: Partition, R: float):
    """Right-hand side of the per-party first-moment equations.

    Party ``j`` sees its own ``G_j`` plus the linear drive
    ``-R (sum_{l != j} n_l . <xi_l>) n_j`` from all other parties.
    """
    N = partition.N
    offsets = partition.offsets()

    def rhs(tau, y):
        xi, pi = y[:N], y[N:]
        dpi = np.empty(N)
        sums = [xi[o:o + n].sum() for o, n in zip(offsets, partition.sizes)]
        total = sum(sums)
        for j, (o, n) in enumerate(zip(offsets, partition.sizes)):
            block = xi[o:o + n]
            own = (1.0 + R * N) * block - R * sums[j]
            drive = -R * (total - sums[j])
            dpi[o:o + n] = -own - drive
        return np.concatenate([pi, dpi])

    return rhs


# --------------------------------------------------------------------------
# Sweep over partitions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepResult:
    N: int
    R: float
    beta: float
    K_list: tuple
    tau: np.ndarray
    ratios: np.ndarray  # shape (len(K_list), len(tau))

    def max_amplitude(self) -> np.ndarray:
        """Peak ratio per K, ``1 + r_K``, reached at half a period."""
        return np.array([1.0 + r_K(self.N, K, self.R) for K in self.K_list])

    def half_period(self) -> np.ndarray:
        return np.array([math.pi / math.sqrt(1.0 + r_K(self.N, K, self.R)) for K in self.K_list])


def ratio_curve(N: int, K: int, R: float, beta: float, tau) -> np.ndarray:
    """``V(tau)/V(0)`` through the structured propagation of one representative block.

    All blocks of a balanced partition are identical, so one block suffices.
    """
    part = Partition.balanced(N, K)
    block0 = thermal_covariance(beta, Partition((part.sizes[0],)))[0]
    v0 = block0.a_pp + block0.b_pp
    out = []
    for t in np.asarray(tau, dtype=float).ravel():
        b = propagate_block(block0, 0, part, R, float(t))
        out.append((b.a_pp + b.b_pp) / v0)
    return np.array(out)


def fig2_sweep(N: int, K_list, R: float, tau_grid, beta: float = 1.0) -> SweepResult:
    """Relative mean-momentum variance for each K in ``K_list``."""
    K_list = tuple(int(k) for k in K_list)
    bad = [K for K in K_list if K < 1 or N % K]
    if bad:
        raise DomainError(f"K={bad} do not divide N={N}; valid K: {divisors(N)}")
    tau = np.asarray(tau_grid, dtype=float)
    ratios = np.stack([ratio_curve(N, K, R, beta, tau) for K in K_list])
    return SweepResult(N, R, beta, K_list, tau, ratios)
