"""Adaptive Dormand-Prince 5(4) integrator for real or complex state arrays.

Output times are hit exactly (the step is clipped at each requested time),
so no interpolation error enters the sampled trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError

# Dormand & Prince (1980) tableau, FSAL form.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and limits for :func:`integrate`.

    ``energy_tol`` is not used by the integrator itself; it is the
    conservation threshold that callers checking a Hamiltonian apply.
    """

    rtol: float = 1e-12
    atol: float = 1e-13
    h0: float | None = None
    max_steps: int = 5_000_000
    energy_tol: float = 1e-8
    error_norm: str = "rms"


@dataclass(frozen=True)
class Solution:
    times: np.ndarray
    states: np.ndarray
    accepted: int
    rejected: int
    nfev: int


def _error_norm(err, y, y_new, rtol, atol, kind="rms"):
    ratio = np.abs(err / (atol + rtol * np.maximum(np.abs(y), np.abs(y_new))))
    if kind == "max":
        return float(ratio.max())
    return float(np.sqrt(np.mean(ratio**2)))


def _initial_step(fun, t0, y0, f0, rtol, atol, direction_span):
    # Hairer, Norsett & Wanner, Solving ODEs I, section II.4.
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span)


def integrate(fun, y0, t_grid, options: IntegratorOptions | None = None) -> Solution:
    """Integrate ``dy/dt = fun(t, y)`` and sample at every time in ``t_grid``.

    ``t_grid[0]`` is the initial time.  The state dtype (real or complex) is
    preserved.  Raises :class:`IntegrationError` on step-size underflow,
    non-finite derivatives, or when ``max_steps`` is exhausted.
    """
    opts = options or IntegratorOptions()
    if opts.error_norm not in ("rms", "max"):
        raise ValueError(f"unknown error norm {opts.error_norm!r}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    y = np.array(y0, copy=True)
    if not np.issubdtype(y.dtype, np.complexfloating):
        y = y.astype(float)
    states = np.empty((t_grid.size,) + y.shape, dtype=y.dtype)
    states[0] = y

    t = float(t_grid[0])
    f = fun(t, y)
    nfev = 1
    if not np.all(np.isfinite(f)):
        raise IntegrationError("non-finite derivative at initial state", t)
    accepted = rejected = 0
    h = None
    if t_grid.size > 1:
        span = float(t_grid[-1] - t)
        h = opts.h0 if opts.h0 is not None else _initial_step(
            fun, t, y, f, opts.rtol, opts.atol, span
        )
        nfev += 1

    k = [None] * 7
    for i_out in range(1, t_grid.size):
        t_target = float(t_grid[i_out])
        while t < t_target:
            if accepted + rejected >= opts.max_steps:
                raise IntegrationError("maximum number of steps exceeded", t)
            h_min = 16 * np.spacing(max(abs(t), 1.0))
            if h < h_min:
                raise IntegrationError(
                    f"step size underflow (h={h:.3e}) at t={t:.17g}", t
                )
            hit = t + h >= t_target
            h_step = t_target - t if hit else h

            k[0] = f
            for s in range(1, 7):
                dy = sum(a * ks for a, ks in zip(_A[s], k[:s]) if a != 0.0)
                k[s] = fun(t + _C[s] * h_step, y + h_step * dy)
            nfev += 6
            y_new = y + h_step * sum(b * ks for b, ks in zip(_B5, k) if b != 0.0)
            err = h_step * sum(e * ks for e, ks in zip(_E, k) if e != 0.0)

            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(k[6]))):
                rejected += 1
                h = 0.25 * h_step
                continue

            err_norm = _error_norm(err, y, y_new, opts.rtol, opts.atol, opts.error_norm)
            if err_norm <= 1.0:
                accepted += 1
                t = t_target if hit else t + h_step
                y = y_new
                f = k[6]
                fac = _FAC_MAX if err_norm == 0.0 else min(
                    _FAC_MAX, max(_FAC_MIN, _SAFETY * err_norm ** -0.2)
                )
                # A clipped step says nothing about the natural step length.
                h = max(h, h_step * fac) if hit else h_step * fac
            else:
                rejected += 1
                h = h_step * max(_FAC_MIN, _SAFETY * err_norm ** -0.2)
        states[i_out] = y

    return Solution(t_grid.copy(), states, accepted, rejected, nfev)
