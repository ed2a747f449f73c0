"""Damped semismooth Newton method on nonsmooth residual maps.

The driver works on any residual/element pair; the KKT front end in
:mod:`kktstab.problem` supplies the composite-problem specifics.  Steps
solve the element system by least squares with a ridge fallback when the
element is near singular, and are globalized by Armijo backtracking on
half the squared residual norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 100
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    min_step: float = 1e-12
    regularization_floor: float = 1e-12

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter <= 0 or self.armijo_c <= 0 \
                or self.min_step <= 0 or self.regularization_floor <= 0:
            raise ValueError("all Newton options must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class NewtonTrace:
    residual_norms: list[float] = field(default_factory=list)
    step_lengths: list[float] = field(default_factory=list)
    element_min_sv: list[float] = field(default_factory=list)
    status: str = "running"

    @property
    def iterations(self) -> int:
        return len(self.step_lengths)


class NewtonError(RuntimeError):
    def __init__(self, message: str, trace: NewtonTrace):
        super().__init__(message)
        self.trace = trace


class NewtonNonConvergence(NewtonError):
    """Iteration limit reached before the residual target."""


class NewtonStagnation(NewtonError):
    """Line search collapsed below the minimal step length."""


class InsufficientTraceError(ValueError):
    """The trace is too short for rate classification."""


def semismooth_solve(residual: Callable[[np.ndarray], np.ndarray],
                     element: Callable[[np.ndarray], np.ndarray],
                     z0: np.ndarray,
                     opts: NewtonOptions | None = None) -> tuple[np.ndarray, NewtonTrace]:
    """Drive z to a zero of the residual map.

    Parameters
    ----------
    residual : callable
        Maps a point to the residual vector.
    element : callable
        Maps a point to one generalized-derivative matrix of the residual.
    z0 : ndarray
        Finite starting point.
    """
    opts = opts or NewtonOptions()
    z = np.asarray(z0, dtype=float).copy()
    if not np.all(np.isfinite(z)):
        raise ValueError("starting point must be finite")
    trace = NewtonTrace()
    r = residual(z)
    rnorm = float(np.linalg.norm(r, np.inf))
    trace.residual_norms.append(rnorm)
    for _ in range(opts.max_iter):
        if rnorm <= opts.tol:
            trace.status = "converged"
            return z, trace
        E = element(z)
        svals = np.linalg.svd(E, compute_uv=False)
        min_sv = float(svals[-1]) if svals.size else 0.0
        if min_sv < 1e-10:
            # ridge-regularized least squares keeps the iteration alive in
            # degenerate regions; the analyzer reports the degeneracy itself
            tau = max(opts.regularization_floor, 1e-10 * float(svals[0]) if svals.size else 0.0)
            s = np.linalg.solve(E.T @ E + tau * np.eye(E.shape[1]), -E.T @ r)
        else:
            s = np.linalg.solve(E, -r)
        merit = 0.5 * float(np.dot(r, r))
        slope = float(np.dot(E @ s, r))  # derivative of the merit along s
        if slope >= 0.0:
            slope = -2.0 * merit
        alpha = 1.0
        while True:
            z_new = z + alpha * s
            r_new = residual(z_new)
            merit_new = 0.5 * float(np.dot(r_new, r_new))
            if merit_new <= merit + opts.armijo_c * alpha * slope:
                break
            alpha *= opts.backtrack_factor
            if alpha < opts.min_step:
                trace.status = "stagnated"
                raise NewtonStagnation(
                    f"line search collapsed at residual {rnorm:.3e}", trace)
        z = z_new
        r = r_new
        rnorm = float(np.linalg.norm(r, np.inf))
        trace.residual_norms.append(rnorm)
        trace.step_lengths.append(alpha)
        trace.element_min_sv.append(min_sv)
    if rnorm <= opts.tol:
        trace.status = "converged"
        return z, trace
    trace.status = "max_iter"
    raise NewtonNonConvergence(
        f"no convergence in {opts.max_iter} iterations, residual {rnorm:.3e}", trace)


NOISE_FLOOR = 1e-14


def local_rate(trace: NewtonTrace) -> str:
    """Classify the tail convergence rate of a converged trace.

    Returns one of 'quadratic', 'superlinear', 'linear', 'none'.  The
    quadratic verdict requires log e_{k+1} / log e_k >= 1.8 on the last
    comparable pairs above the noise floor; residuals that drop straight
    below the floor terminate the comparable tail (finite termination is
    faster than any measurable rate, not evidence against one).
    """
    if trace.status != "converged" or trace.iterations < 2:
        raise InsufficientTraceError(
            "rate classification needs a converged trace with at least 2 iterations")
    e = [max(v, 0.0) for v in trace.residual_norms]
    # comparable pairs: the log ratio is meaningful (e_k safely below 1),
    # or the residual fell straight below the noise floor, which is faster
    # than any measurable rate and scores as +inf
    ratios = []
    for a, b in zip(e, e[1:]):
        if a <= NOISE_FLOOR:
            continue
        if b <= NOISE_FLOOR:
            ratios.append(np.inf)
        elif a < 0.5:
            ratios.append(np.log(b) / np.log(a))
    tail = ratios[-3:]
    if tail:
        if min(tail) >= 1.8:
            return "quadratic"
        if min(tail) >= 1.1:
            return "superlinear"
    lin_pairs = [(a, b) for a, b in zip(e, e[1:]) if a > NOISE_FLOOR]
    if len(lin_pairs) >= 2 and all(b <= 0.9 * a for a, b in lin_pairs[-3:]):
        return "linear"
    return "none"
