"""Constrained Hamiltonian evolution on parametrized families of states.

A classical state family ``|psi_zeta>`` is described by a complex parameter
vector ``zeta``.  With ``H(zeta) = <psi_zeta|H|psi_zeta>`` the parameters obey

    i d(zeta)/dt = (1/hbar) dH/d(zeta^dagger),

where the derivative is the Wirtinger derivative with respect to the
conjugate parameters.  Statistical mixtures are handled by evolving every
member separately with time-independent weights.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConservationError, DomainError, IntegrationError, NumericDomainError
from .integrate import IntegratorOptions, integrate

__all__ = [
    "ClassicalParameter",
    "HamiltonianModel",
    "IntegratorOptions",
    "MixedEnsemble",
    "TrajectoryRecord",
    "ensemble_expectation",
    "evolve_constrained",
    "evolve_ensemble",
    "fd_step",
    "quadratic_form_model",
    "wirtinger_gradient",
]


def _frozen(values, dtype=complex):
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClassicalParameter:
    """Complex parameter vector of a classical-state family.

    ``normalized`` lists index groups that form unit-norm state vectors
    (e.g. the ket of a quantum subsystem inside a semi-classical model).
    """

    values: np.ndarray
    labels: tuple = ()
    normalized: tuple = ()

    def __post_init__(self):
        values = _frozen(self.values)
        if values.size < 1:
            raise DomainError("a classical parameter needs dimension >= 1")
        object.__setattr__(self, "values", values)
        labels = tuple(self.labels) or tuple(f"z{k}" for k in range(values.size))
        if len(labels) != values.size:
            raise DomainError("one label per parameter component is required")
        object.__setattr__(self, "labels", labels)
        groups = tuple(tuple(int(i) for i in g) for g in self.normalized)
        for g in groups:
            if any(i < 0 or i >= values.size for i in g):
                raise DomainError(f"normalized group {g} out of range")
        object.__setattr__(self, "normalized", groups)

    @property
    def dim(self) -> int:
        return self.values.size

    def with_values(self, values) -> "ClassicalParameter":
        return ClassicalParameter(values, self.labels, self.normalized)

    def norm_drift(self) -> float:
        """Largest deviation from unit norm over the normalized groups."""
        if not self.normalized:
            return 0.0
        return max(
            abs(float(np.linalg.norm(self.values[list(g)])) - 1.0) for g in self.normalized
        )


@dataclass(frozen=True)
class HamiltonianModel:
    """Classical Hamiltonian ``H(zeta)`` with optional analytic gradient.

    ``energy`` and ``gradient`` take the raw complex parameter array.  The
    gradient is ``dH/d(zeta^*)``; when it is ``None`` a central finite
    difference is used.
    """

    energy: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    hbar: float = 1.0
    name: str = "model"

    def __post_init__(self):
        if not self.hbar > 0:
            raise DomainError("hbar must be positive")

    def grad(self, zeta) -> np.ndarray:
        if self.gradient is not None:
            return np.asarray(self.gradient(zeta), dtype=complex)
        return wirtinger_gradient(self, zeta)


def _values(zeta):
    if isinstance(zeta, ClassicalParameter):
        return zeta.values
    return np.asarray(zeta, dtype=complex).reshape(-1)


def fd_step(zeta_k: complex) -> float:
    return 1e-6 * max(1.0, abs(zeta_k))


def wirtinger_gradient(model: HamiltonianModel, zeta, h: float | None = None) -> np.ndarray:
    """Central-difference estimate of ``dH/d(zeta^*)``.

    Each component is split as ``zeta_k = x_k + i y_k`` and
    ``dH/d(zeta_k^*) = (dH/dx_k + i dH/dy_k) / 2``.  With ``h=None`` the step
    is ``1e-6 * max(1, |zeta_k|)`` per component.
    """
    z = np.array(_values(zeta), dtype=complex)
    if h is not None and not h > 0:
        raise DomainError("finite-difference step must be positive")
    out = np.empty_like(z)

    def energy_at(k, shifted):
        value = model.energy(shifted)
        if not np.isfinite(value):
            raise NumericDomainError(
                f"non-finite energy while differentiating component {k}", component=k
            )
        return float(np.real(value))

    for k in range(z.size):
        step = fd_step(z[k]) if h is None else h
        partial = []
        for shift in (step, 1j * step):
            zp = z.copy()
            zm = z.copy()
            zp[k] += shift
            zm[k] -= shift
            partial.append((energy_at(k, zp) - energy_at(k, zm)) / (2 * step))
        out[k] = 0.5 * (partial[0] + 1j * partial[1])
    return out


@dataclass(frozen=True)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    energy_drift: float
    norm_drift: float
    accepted: int
    rejected: int
    template: ClassicalParameter = field(repr=False)

    def __len__(self):
        return self.times.size

    def snapshot(self, i: int) -> ClassicalParameter:
        return self.template.with_values(self.states[i])

    @property
    def step_stats(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected}


def evolve_constrained(
    model: HamiltonianModel,
    zeta0,
    t_grid,
    opts: IntegratorOptions | None = None,
) -> TrajectoryRecord:
    """Integrate the constrained equation of motion and sample at ``t_grid``.

    Normalized sub-vectors are never projected back during integration;
    their drift is reported in ``norm_drift``.  Raises
    :class:`ConservationError` if the relative energy drift exceeds
    ``opts.energy_tol``.
    """
    opts = opts or IntegratorOptions()
    if not isinstance(zeta0, ClassicalParameter):
        zeta0 = ClassicalParameter(zeta0)
    e0 = model.energy(np.array(zeta0.values))
    if not np.isfinite(e0):
        raise NumericDomainError("energy is not finite at the initial parameter")

    inv_hbar = 1.0 / model.hbar

    def rhs(t, z):
        return -1j * inv_hbar * model.grad(z)

    sol = integrate(rhs, np.array(zeta0.values), t_grid, opts)
    energies = np.array([float(np.real(model.energy(z))) for z in sol.states])
    scale = max(1.0, abs(float(np.real(e0))))
    deviation = np.abs(energies - energies[0]) / scale
    drift = float(deviation.max())
    if drift > opts.energy_tol:
        bad = int(np.argmax(deviation > opts.energy_tol))
        last_good = float(sol.times[bad - 1]) if bad > 0 else float(sol.times[0])
        raise ConservationError(
            f"relative energy drift {drift:.3e} exceeds tolerance {opts.energy_tol:.1e}",
            last_good,
            drift,
        )
    norm_drift = 0.0
    if zeta0.normalized:
        norm_drift = max(zeta0.with_values(z).norm_drift() for z in sol.states)
    states = sol.states
    states.setflags(write=False)
    return TrajectoryRecord(
        times=sol.times,
        states=states,
        energies=energies,
        energy_drift=drift,
        norm_drift=norm_drift,
        accepted=sol.accepted,
        rejected=sol.rejected,
        template=zeta0,
    )


@dataclass(frozen=True)
class MixedEnsemble:
    """Weighted collection of classical parameters.

    Weights must be nonnegative and sum to one unless ``signed`` is set
    (quasiprobability ensembles).
    """

    weights: np.ndarray
    members: tuple
    signed: bool = False

    def __post_init__(self):
        w = _frozen(self.weights, dtype=float)
        members = tuple(
            m if isinstance(m, ClassicalParameter) else ClassicalParameter(m)
            for m in self.members
        )
        if w.size != len(members) or w.size == 0:
            raise DomainError("weights and members must be nonempty and index-aligned")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if not self.signed:
            if np.any(w < 0):
                raise DomainError("negative weight in an unsigned ensemble")
            if abs(w.sum() - 1.0) > 1e-12:
                raise DomainError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "members", members)


def evolve_ensemble(
    model: HamiltonianModel,
    ens: MixedEnsemble,
    t_grid,
    opts: IntegratorOptions | None = None,
    max_workers: int | None = None,
) -> list[MixedEnsemble]:
    """Evolve each member independently; one ensemble snapshot per time."""

    def run(indexed):
        idx, member = indexed
        try:
            return evolve_constrained(model, member, t_grid, opts)
        except IntegrationError as exc:
            raise IntegrationError(
                f"member {idx}: {exc}", exc.last_time, member=idx
            ) from exc

    jobs = list(enumerate(ens.members))
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(run, jobs))
    else:
        records = [run(job) for job in jobs]

    snapshots = []
    for i in range(len(records[0])):
        members = tuple(rec.snapshot(i) for rec in records)
        snapshots.append(MixedEnsemble(ens.weights, members, ens.signed))
    return snapshots


def ensemble_expectation(ens: MixedEnsemble, f: Callable[[np.ndarray], complex]) -> complex:
    """Weighted average ``sum_n p_n f(zeta_n)``."""
    values = np.array([f(m.values) for m in ens.members], dtype=complex)
    if not np.all(np.isfinite(values)):
        raise NumericDomainError("observable is not finite on every member")
    return complex(np.dot(ens.weights, values))


def quadratic_form_model(hamiltonian, hbar: float = 1.0, name: str = "schrodinger"):
    """Model with ``zeta = |psi>`` and ``H = <psi|H|psi>`` for Hermitian ``H``.

    The constrained equation is then the Schrodinger equation itself.
    """
    H = np.array(hamiltonian, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError("Hamilton operator must be a square matrix")
    if not np.allclose(H, H.conj().T, atol=1e-12):
        raise DomainError("Hamilton operator must be Hermitian")
    H.setflags(write=False)

    def energy(z):
        return float(np.real(np.vdot(z, H @ z)))

    def gradient(z):
        return H @ z

    return HamiltonianModel(energy, gradient, hbar=hbar, name=name)
