"""Single-mode Kerr medium: classical flow, quantum mean, Fock propagation, panels.

Hamilton operator ``hbar*omega*n + (hbar*kappa/2) a^dag^2 a^2``; restricted to
coherent states the classical Hamiltonian is
``hbar*omega*|alpha|^2 + (hbar*kappa/2)*|alpha|^4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .manifold import ClassicalParameter, HamiltonianModel
from .phasespace import (
    DEFAULT_CUTOFF,
    CatWigner,
    CoherentWigner,
    FlowMap,
    FockVector,
    GridGeometry,
    WignerGrid,
    wigner_of_density,
    wigner_pullback,
)

TRAJECTORY_SAMPLES = 256
DEFAULT_CAT = (3 * np.exp(-1j * math.pi / 4), 3 * np.exp(1j * math.pi / 4), -1)


@dataclass(frozen=True)
class KerrParams:
    omega: float = 1.0
    kappa: float = 0.1
    chi: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise DomainError("omega must be positive")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise DomainError("kappa must be nonnegative")
        object.__setattr__(self, "chi", self.kappa / self.omega)


def kerr_model(params: KerrParams, hbar: float = 1.0) -> HamiltonianModel:
    w, k = params.omega, params.kappa

    def energy(z):
        n = abs(z[0]) ** 2
        return hbar * (w * n + 0.5 * k * n * n)

    def gradient(z):
        return hbar * (w + k * np.abs(z) ** 2) * z

    return HamiltonianModel(energy, gradient, hbar=hbar, name="kerr")


def kerr_parameter(alpha0: complex) -> ClassicalParameter:
    return ClassicalParameter([alpha0], labels=("coherent amplitude",))


def classical_vector_field(alpha, params: KerrParams):
    """Right-hand side of ``i d(alpha)/dt = omega (1 + chi |alpha|^2) alpha``."""
    return params.omega * (1 + params.chi * np.abs(alpha) ** 2) * alpha


def classical_flow(alpha0, params: KerrParams, t):
    """``alpha(t) = exp(-i t (omega + kappa |alpha0|^2)) alpha0``."""
    a = np.asarray(alpha0, dtype=complex)
    out = np.exp(-1j * t * (params.omega + params.kappa * np.abs(a) ** 2)) * a
    return complex(out) if out.ndim == 0 else out


def kerr_flow_map(params: KerrParams) -> FlowMap:
    # |alpha| is invariant, so the inverse uses the same rotation rate.
    return FlowMap(
        forward=lambda a, t: classical_flow(a, params, t),
        inverse=lambda a, t: classical_flow(a, params, -t),
    )


def quantum_mean_coherent(alpha0: complex, params: KerrParams, t: float) -> complex:
    """``<alpha0| a(t) |alpha0>`` for the quantum Kerr evolution."""
    a = complex(alpha0)
    exponent = -1j * params.omega * t + (np.exp(-1j * params.kappa * t) - 1) * abs(a) ** 2
    return complex(np.exp(exponent) * a)


def kerr_phases(params: KerrParams, t: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1, dtype=float)
    return np.exp(-1j * t * (params.omega * n + 0.5 * params.kappa * n * (n - 1)))


def quantum_evolve_fock(state: FockVector, params: KerrParams, t: float) -> FockVector:
    """Exact propagation; the Hamilton operator is diagonal in the Fock basis."""
    return FockVector(state.coeffs * kerr_phases(params, t, state.cutoff))


def free_rotation(state: FockVector, omega: float, t: float) -> FockVector:
    n = np.arange(state.cutoff + 1)
    return FockVector(state.coeffs * np.exp(-1j * omega * n * t))


def heisenberg_coefficients(params: KerrParams) -> dict:
    """Normally ordered Hamilton coefficients ``Omega_{k,l}`` (units of hbar).

    Both the classical wave equation and the Heisenberg equation have the
    right-hand side ``sum_{k,l} Omega_{k,l} k x^{*(k-1)} x^l`` with x the
    amplitude or the annihilation operator respectively.
    """
    return {(1, 1): params.omega, (2, 2): params.kappa / 2}


def normally_ordered_rhs(coefficients: dict, alpha):
    """Evaluate ``sum Omega_{k,l} k conj(alpha)^(k-1) alpha^l``."""
    a = np.asarray(alpha, dtype=complex)
    return sum(c * k * np.conj(a) ** (k - 1) * a**l for (k, l), c in coefficients.items() if k)


# --------------------------------------------------------------------------
# Panels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PanelSpec:
    """One phase-space panel: initial state kind x dynamics kind.

    ``initial`` is ``("coherent", alpha0)`` or ``("cat", alpha1, alpha2, sign)``.
    """

    initial: tuple
    dynamics: str
    time: float
    corotating: bool = True

    def __post_init__(self):
        kind = self.initial[0]
        if kind == "coherent" and len(self.initial) == 2:
            pass
        elif kind == "cat" and len(self.initial) == 4:
            pass
        else:
            raise DomainError(f"unknown initial state spec {self.initial!r}")
        if self.dynamics not in ("classical", "quantum"):
            raise DomainError("dynamics must be 'classical' or 'quantum'")

    @property
    def label(self) -> str:
        first = "C" if self.initial[0] == "coherent" else "Q"
        second = "C" if self.dynamics == "classical" else "Q"
        return first + second

    def initial_wigner(self):
        if self.initial[0] == "coherent":
            return CoherentWigner(complex(self.initial[1]))
        _, a1, a2, sign = self.initial
        return CatWigner(complex(a1), complex(a2), int(sign))


def panel_spec(mode: str, time: float, alpha0: complex = 3.0, corotating: bool = True) -> PanelSpec:
    """Build a panel from a two-letter label (``cc``, ``qc``, ``cq``, ``qq``)."""
    mode = mode.lower()
    if mode not in ("cc", "qc", "cq", "qq"):
        raise DomainError(f"unknown panel mode {mode!r}")
    initial = ("coherent", alpha0) if mode[0] == "c" else ("cat",) + DEFAULT_CAT
    dynamics = "classical" if mode[1] == "c" else "quantum"
    return PanelSpec(initial, dynamics, time, corotating)


@dataclass(frozen=True)
class PanelResult:
    spec: PanelSpec
    wigner: WignerGrid
    times: np.ndarray
    means: np.ndarray


def evolve_family(spec: PanelSpec, params: KerrParams, t: float):
    """Initial Wigner family with every coherent amplitude moved along the flow.

    This is the classical evolution proper: the state stays inside the
    coherent-state family (for the cat, each branch amplitude follows
    the classical trajectory).
    """
    if spec.initial[0] == "coherent":
        return CoherentWigner(classical_flow(complex(spec.initial[1]), params, t))
    _, a1, a2, sign = spec.initial
    return CatWigner(
        classical_flow(complex(a1), params, t),
        classical_flow(complex(a2), params, t),
        int(sign),
    )


def _mean_trajectory(spec, params, times, transport, state, geometry):
    if spec.dynamics == "quantum":
        means = np.array(
            [quantum_evolve_fock(state, params, t).mean_annihilation() for t in times]
        )
    elif transport == "manifold":
        means = np.array([evolve_family(spec, params, t).mean() for t in times])
    else:
        # Mean of the transported distribution: average the flow over W0.
        alphas = geometry.alphas()
        weights = np.real(spec.initial_wigner()(alphas))
        total = weights.sum()
        means = np.array(
            [np.sum(classical_flow(alphas, params, t) * weights) / total for t in times]
        )
    if spec.corotating:
        means = means * np.exp(1j * params.omega * times)
    return means


def render_panel(
    spec: PanelSpec,
    params: KerrParams,
    geometry: GridGeometry | None = None,
    cutoff: int = DEFAULT_CUTOFF,
    samples: int = TRAJECTORY_SAMPLES,
    transport: str = "manifold",
) -> PanelResult:
    """Wigner function at ``spec.time`` plus the sampled mean trajectory.

    Classical dynamics uses ``transport="manifold"`` (coherent amplitudes
    follow the classical flow, the state stays in its family) or
    ``"liouville"`` (pull-back of the initial Wigner function along the flow).
    The Liouville picture shears the distribution into spiral arms that need
    a much finer grid than 301x301 to integrate accurately at t = pi/kappa.
    """
    if transport not in ("manifold", "liouville"):
        raise DomainError(f"unknown transport {transport!r}")
    geometry = geometry or GridGeometry()
    t = spec.time
    # Displayed node beta corresponds to the lab-frame point beta*exp(-i omega t).
    frame = (lambda a: a * np.exp(-1j * params.omega * t)) if spec.corotating else None

    state = None
    if spec.dynamics == "quantum":
        state = spec.initial_wigner().fock(cutoff)
        evolved = quantum_evolve_fock(state, params, t)
        if spec.corotating:
            evolved = free_rotation(evolved, -params.omega, t)
        grid = wigner_of_density(evolved, geometry)
    elif transport == "liouville":
        grid = wigner_pullback(
            spec.initial_wigner(), kerr_flow_map(params), t, geometry, frame=frame
        )
    else:
        w_t = evolve_family(spec, params, t)
        alphas = geometry.alphas()
        if frame is not None:
            alphas = frame(alphas)
        grid = WignerGrid(geometry, np.real(w_t(alphas)))

    times = np.linspace(0.0, t, samples)
    means = _mean_trajectory(spec, params, times, transport, state, geometry)
    return PanelResult(spec, grid, times, means)
