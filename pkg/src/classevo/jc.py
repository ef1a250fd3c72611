"""Semi-classical and fully quantum resonant Jaynes-Cummings dynamics.

The field mode is restricted to coherent states ``|alpha>`` while the atom
keeps a full ket ``|phi> = phi_g |g> + phi_e |e>``; the parameter vector is
``zeta = (alpha, phi_g, phi_e)``.  Atom kets are always laid out as (g, e).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .integrate import IntegratorOptions, integrate
from .manifold import ClassicalParameter, HamiltonianModel, TrajectoryRecord, evolve_constrained

SQRT2 = math.sqrt(2.0)
JC_LABELS = ("coherent amplitude", "atom ket g", "atom ket e")

# Tolerances for the theta ODE; absolute accuracy ~1e-12 over x <= 10.
_THETA_OPTS = IntegratorOptions(rtol=1e-14, atol=1e-15)


@dataclass(frozen=True)
class JCParams:
    omega: float = 10.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise DomainError("omega must be positive")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise DomainError("kappa must be finite and nonnegative")


@dataclass(frozen=True)
class SemiClassicalState:
    alpha: complex
    atom: np.ndarray

    def __post_init__(self):
        atom = np.array(self.atom, dtype=complex).reshape(2)
        atom.setflags(write=False)
        object.__setattr__(self, "atom", atom)
        object.__setattr__(self, "alpha", complex(self.alpha))

    @classmethod
    def standard_initial(cls) -> "SemiClassicalState":
        """Vacuum field, atom in ``(|g> + |e>)/sqrt(2)``."""
        return cls(0.0, np.array([1.0, 1.0]) / SQRT2)

    @classmethod
    def from_values(cls, values) -> "SemiClassicalState":
        return cls(values[0], values[1:3])

    def to_parameter(self) -> ClassicalParameter:
        return ClassicalParameter(
            [self.alpha, *self.atom], labels=JC_LABELS, normalized=((1, 2),)
        )

    @property
    def excitation(self) -> float:
        return abs(self.alpha) ** 2 + abs(self.atom[1]) ** 2

    @property
    def atom_norm(self) -> float:
        return float(np.linalg.norm(self.atom))


def semiclassical_model(params: JCParams, hbar: float = 1.0) -> HamiltonianModel:
    """``H(alpha, phi)`` for a coherent field coupled to a two-level atom."""
    w, k = params.omega, params.kappa

    def energy(z):
        a, g, e = z
        cross = a * np.conj(e) * g
        # i k (X - X^*) = -2 k Im X
        return hbar * float(w * abs(a) ** 2 + w * abs(e) ** 2 - 2.0 * k * cross.imag)

    def gradient(z):
        a, g, e = z
        return hbar * np.array(
            [
                w * a - 1j * k * np.conj(g) * e,
                -1j * k * np.conj(a) * e,
                w * e + 1j * k * a * g,
            ]
        )

    return HamiltonianModel(energy, gradient, hbar=hbar, name="jaynes-cummings")


@dataclass(frozen=True)
class SemiClassicalTrajectory:
    record: TrajectoryRecord

    @property
    def times(self) -> np.ndarray:
        return self.record.times

    @property
    def alpha(self) -> np.ndarray:
        return self.record.states[:, 0]

    @property
    def atom(self) -> np.ndarray:
        return self.record.states[:, 1:3]

    @property
    def excitation(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2 + np.abs(self.atom[:, 1]) ** 2

    @property
    def excitation_drift(self) -> float:
        ex = self.excitation
        return float(np.max(np.abs(ex - ex[0])))

    @property
    def atom_norm_drift(self) -> float:
        return self.record.norm_drift

    @property
    def energy_drift(self) -> float:
        return self.record.energy_drift

    def state(self, i: int) -> SemiClassicalState:
        return SemiClassicalState.from_values(self.record.states[i])


def integrate_semiclassical(
    s0: SemiClassicalState,
    params: JCParams,
    t_grid,
    opts: IntegratorOptions | None = None,
) -> SemiClassicalTrajectory:
    """Solve the coupled field / atom equations through the generic engine."""
    if abs(s0.atom_norm - 1.0) > 1e-10:
        raise DomainError("initial atom ket must be normalized")
    record = evolve_constrained(semiclassical_model(params), s0.to_parameter(), t_grid, opts)
    return SemiClassicalTrajectory(record)


# --------------------------------------------------------------------------
# Elliptic amplitude
# --------------------------------------------------------------------------


def _theta_rhs(x, y):
    return np.sqrt(1.0 + np.sin(y) ** 2)


def jacobi_theta(x):
    """Solution of ``d theta/dx = sqrt(1 + sin(theta)^2)``, ``theta(0) = 0``.

    This is the Jacobi amplitude with parameter ``m = -1``.  Evaluated by
    adaptive integration of the defining ODE; odd in ``x``.
    """
    xs = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise DomainError("theta argument must be finite")
    mags = np.abs(xs).ravel()
    nodes, inverse = np.unique(mags, return_inverse=True)
    if nodes[0] == 0.0:
        grid = nodes
        offset = 0
    else:
        grid = np.concatenate(([0.0], nodes))
        offset = 1
    if grid.size == 1:
        values = np.zeros(1)
    else:
        values = integrate(_theta_rhs, np.zeros(1), grid, _THETA_OPTS).states[:, 0]
    out = values[offset:][inverse].reshape(xs.shape) * np.sign(xs)
    return float(out) if out.ndim == 0 else out


def quarter_period() -> float:
    """``integral_0^{pi/2} d theta / sqrt(1 + sin^2 theta)``: where theta reaches pi/2."""
    from scipy.special import ellipk

    return float(ellipk(-1.0))


def linear_theta_slope() -> float:
    """Mean slope of theta: ``pi / (2 * quarter_period)``."""
    return math.pi / (2.0 * quarter_period())


def analytic_semiclassical(t, params: JCParams):
    """Closed-form semi-classical solution for the vacuum / equal-superposition start.

    Returns a :class:`SemiClassicalState` for scalar ``t``, otherwise a tuple
    ``(alpha, atom)`` of arrays.
    """
    ts = np.asarray(t, dtype=float)
    theta = np.asarray(jacobi_theta(params.kappa * ts / SQRT2))
    rot = np.exp(-1j * params.omega * ts)
    s = np.sin(theta)
    alpha = -rot * s / SQRT2
    g = np.sqrt(1.0 + s**2) / SQRT2 + 0j
    e = rot * np.cos(theta) / SQRT2
    if ts.ndim == 0:
        return SemiClassicalState(complex(alpha), [complex(g), complex(e)])
    return alpha, np.stack([g, e], axis=-1)


# --------------------------------------------------------------------------
# Exact quantum solution
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JointFockAtomState:
    """Amplitudes ``<n, a|psi>`` with rows ``n = 0..cutoff`` and columns (g, e)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex)
        if amp.ndim != 2 or amp.shape[1] != 2:
            raise DomainError("amplitudes must have shape (cutoff + 1, 2)")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def cutoff(self) -> int:
        return self.amplitudes.shape[0] - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def vector(self) -> np.ndarray:
        """Flattened with index ``2 n + a``."""
        return self.amplitudes.reshape(-1)

    def reduced_atom(self) -> np.ndarray:
        m = self.amplitudes
        return m.T @ m.conj()

    def mean_annihilation(self) -> complex:
        m = self.amplitudes
        n = np.sqrt(np.arange(1, m.shape[0]))[:, None]
        return complex(np.sum(m[:-1].conj() * n * m[1:]))

    def mean_number(self) -> float:
        n = np.arange(self.amplitudes.shape[0])[:, None]
        return float(np.sum(n * np.abs(self.amplitudes) ** 2))


def exact_quantum_solution(t: float, params: JCParams, cutoff: int = 2) -> JointFockAtomState:
    """Exact joint state for the vacuum / equal-superposition start."""
    if cutoff < 1:
        raise DomainError("cutoff must be at least 1")
    amp = np.zeros((cutoff + 1, 2), dtype=complex)
    rot = np.exp(-1j * params.omega * t)
    kt = params.kappa * t
    amp[0, 0] = 1 / SQRT2
    amp[1, 0] = -rot * math.sin(kt) / SQRT2
    amp[0, 1] = rot * math.cos(kt) / SQRT2
    return JointFockAtomState(amp)


def jc_hamiltonian(params: JCParams, cutoff: int, hbar: float = 1.0) -> np.ndarray:
    """Hamilton matrix on the truncated space, basis index ``2 n + a`` (a = g, e)."""
    dim = 2 * (cutoff + 1)
    H = np.zeros((dim, dim), dtype=complex)
    w, k = params.omega, params.kappa
    for n in range(cutoff + 1):
        H[2 * n, 2 * n] = w * n
        H[2 * n + 1, 2 * n + 1] = w * n + w
        if n >= 1:
            # i k a |e><g| maps |n, g> to sqrt(n) |n-1, e>.
            H[2 * (n - 1) + 1, 2 * n] = 1j * k * math.sqrt(n)
            H[2 * n, 2 * (n - 1) + 1] = -1j * k * math.sqrt(n)
    return hbar * H


def entanglement_entropy(state: JointFockAtomState) -> float:
    """Von Neumann entropy (bits) of the reduced atom state."""
    rho = state.reduced_atom()
    rho = rho / np.trace(rho).real
    evals = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
    evals = evals[evals > 1e-300]
    return float(max(0.0, -np.sum(evals * np.log2(evals))))
