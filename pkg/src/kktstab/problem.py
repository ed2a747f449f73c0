"""Composite problems min g(F(x)) and their nonsmooth KKT machinery.

The residual map stacks dual stationarity with the prox fixed-point gap of
the conjugate block function.  Generalized-derivative elements follow the
convention [[H, J^T], [(I-U) J, -U]]: the second row block carries the
opposite sign of the literal derivative of the residual's second block,
which leaves singular values and nonsingularity untouched.  The Newton
front ends therefore iterate on the sign-adjusted residual whose elements
these matrices are.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .newton import NewtonOptions, NewtonTrace, semismooth_solve
from .pieces import ConvexPiece, LinearOperatorElement

FD_HESS_STEP = 1e-5


class DimensionError(ValueError):
    pass


@dataclass
class SmoothMap:
    """Smooth map with value, Jacobian and the weighted Hessian form.

    ``weighted_hessian(x, mu)`` returns sum_i mu_i * Hess F_i(x); when the
    callback is omitted it falls back to central finite differences of
    x -> J(x)^T mu.
    """

    n: int
    m: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    weighted_hessian_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def weighted_hessian(self, x: np.ndarray, mu: np.ndarray) -> np.ndarray:
        if self.weighted_hessian_fn is not None:
            H = np.asarray(self.weighted_hessian_fn(x, mu), dtype=float)
        else:
            x = np.asarray(x, dtype=float)
            h = FD_HESS_STEP * (1.0 + float(np.linalg.norm(x)))
            H = np.empty((self.n, self.n))
            for j in range(self.n):
                e = np.zeros(self.n)
                e[j] = h
                gp = np.asarray(self.jacobian(x + e)).T @ mu
                gm = np.asarray(self.jacobian(x - e)).T @ mu
                H[:, j] = (gp - gm) / (2.0 * h)
        return 0.5 * (H + H.T)


class CompositeProblem:
    """A smooth map composed with a block-separable convex function."""

    def __init__(self, F: SmoothMap, pieces: list[ConvexPiece], name: str = ""):
        if not pieces:
            raise ValueError("at least one block is required")
        total = sum(p.dim for p in pieces)
        if total != F.m:
            raise DimensionError(
                f"block dims sum to {total} but the smooth map has m={F.m}")
        self.F = F
        self.pieces = list(pieces)
        self.name = name
        self.offsets = np.cumsum([0] + [p.dim for p in pieces])

    @property
    def n(self) -> int:
        return self.F.n

    @property
    def m(self) -> int:
        return self.F.m

    def blocks(self, y: np.ndarray) -> list[np.ndarray]:
        y = np.asarray(y, dtype=float)
        return [y[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.pieces))]

    def prox_g(self, w: np.ndarray, sigma: float = 1.0) -> np.ndarray:
        return np.concatenate(
            [p.prox(wb, sigma) for p, wb in zip(self.pieces, self.blocks(w))])

    def prox_gstar(self, w: np.ndarray, sigma: float = 1.0) -> np.ndarray:
        return np.concatenate(
            [p.prox_conjugate(wb, sigma) for p, wb in zip(self.pieces, self.blocks(w))])


@dataclass(frozen=True)
class KKTPoint:
    x: np.ndarray
    mu: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(np.asarray(self.x, dtype=float)),
                               np.atleast_1d(np.asarray(self.mu, dtype=float))])


def as_point(problem: CompositeProblem, z) -> KKTPoint:
    if isinstance(z, KKTPoint):
        x = np.atleast_1d(np.asarray(z.x, dtype=float))
        mu = np.atleast_1d(np.asarray(z.mu, dtype=float))
    else:
        z = np.asarray(z, dtype=float)
        if z.size != problem.n + problem.m:
            raise DimensionError(
                f"point has {z.size} entries, expected n+m={problem.n + problem.m}")
        x, mu = z[:problem.n], z[problem.n:]
    if x.size != problem.n or mu.size != problem.m:
        raise DimensionError(
            f"point dims ({x.size}, {mu.size}) do not match (n, m)=({problem.n}, {problem.m})")
    return KKTPoint(x, mu)


def residual(problem: CompositeProblem, z) -> np.ndarray:
    """Stacked KKT residual (stationarity; mu - prox of conjugate at F(x)+mu)."""
    pt = as_point(problem, z)
    J = np.atleast_2d(np.asarray(problem.F.jacobian(pt.x), dtype=float))
    w = np.asarray(problem.F.eval(pt.x), dtype=float) + pt.mu
    r1 = J.T @ pt.mu
    r2 = pt.mu - problem.prox_gstar(w)
    return np.concatenate([r1, r2])


def signed_residual(problem: CompositeProblem, z) -> np.ndarray:
    """Residual with the second block negated; its elements are the
    assembled matrices below."""
    r = residual(problem, z)
    out = r.copy()
    out[problem.n:] *= -1.0
    return out


@dataclass
class KKTReport:
    ok: bool
    tol: float
    stationarity_norm: float
    fixed_point_norm: float
    residual: np.ndarray = field(repr=False)


def kkt_check(problem: CompositeProblem, z, tol: float = 1e-8) -> KKTReport:
    r = residual(problem, z)
    r1 = r[:problem.n]
    r2 = r[problem.n:]
    s = float(np.linalg.norm(r1, np.inf)) if r1.size else 0.0
    f = float(np.linalg.norm(r2, np.inf)) if r2.size else 0.0
    return KKTReport(ok=max(s, f) <= tol, tol=tol, stationarity_norm=s,
                     fixed_point_norm=f, residual=r)


@dataclass
class JacobianElementR:
    """One generalized-derivative element of the KKT residual map."""

    matrix: np.ndarray
    provenance: tuple[str, ...] = ()

    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False)[-1])


def _blockdiag(problem: CompositeProblem,
               prox_elements: list[LinearOperatorElement]) -> np.ndarray:
    U = np.zeros((problem.m, problem.m))
    for i, el in enumerate(prox_elements):
        lo, hi = problem.offsets[i], problem.offsets[i + 1]
        if el.matrix.shape != (hi - lo, hi - lo):
            raise DimensionError(
                f"block {i} element has shape {el.matrix.shape}, expected "
                f"({hi - lo}, {hi - lo})")
        U[lo:hi, lo:hi] = el.matrix
    return U


def assemble_element(problem: CompositeProblem, z,
                     prox_elements: list[LinearOperatorElement]) -> JacobianElementR:
    """Assemble [[H, J^T], [(I-U) J, -U]] from one prox element per block."""
    pt = as_point(problem, z)
    if len(prox_elements) != len(problem.pieces):
        raise DimensionError(
            f"got {len(prox_elements)} prox elements for {len(problem.pieces)} blocks")
    n, m = problem.n, problem.m
    H = problem.F.weighted_hessian(pt.x, pt.mu)
    J = np.atleast_2d(np.asarray(problem.F.jacobian(pt.x), dtype=float))
    U = _blockdiag(problem, prox_elements)
    E = np.zeros((n + m, n + m))
    E[:n, :n] = H
    E[:n, n:] = J.T
    E[n:, :n] = (np.eye(m) - U) @ J
    E[n:, n:] = -U
    return JacobianElementR(E, tuple(el.provenance for el in prox_elements))


def canonical_element(problem: CompositeProblem, z) -> JacobianElementR:
    pt = as_point(problem, z)
    w = np.asarray(problem.F.eval(pt.x), dtype=float) + pt.mu
    els = [p.clarke_element(wb) for p, wb in zip(problem.pieces, problem.blocks(w))]
    return assemble_element(problem, pt, els)


def sample_elements_R(problem: CompositeProblem, z, count: int,
                      seed: int) -> list[JacobianElementR]:
    """Sampled elements of the residual's generalized Jacobian.

    Combines per-block prox-element samples, always including the fully
    canonical combination; deterministic under the seed and deduplicated.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    pt = as_point(problem, z)
    w = np.asarray(problem.F.eval(pt.x), dtype=float) + pt.mu
    wblocks = problem.blocks(w)
    per_block = [p.sample_clarke(wb, count, seed + 977 * i)
                 for i, (p, wb) in enumerate(zip(problem.pieces, wblocks))]
    sizes = [len(s) for s in per_block]
    combos: list[tuple[int, ...]] = [tuple(0 for _ in sizes)]  # canonical first
    total = int(np.prod(sizes))
    if total <= count:
        combos = [tuple(ix) for ix in np.ndindex(*sizes)]
    else:
        rng = np.random.default_rng(seed)
        seen = {combos[0]}
        while len(combos) < count:
            pick = tuple(int(rng.integers(0, s)) for s in sizes)
            if pick not in seen:
                seen.add(pick)
                combos.append(pick)
    elements = []
    for combo in combos:
        els = [per_block[i][j] for i, j in enumerate(combo)]
        elements.append(assemble_element(problem, pt, els))
    kept: list[JacobianElementR] = []
    for el in elements:
        if all(np.max(np.abs(el.matrix - o.matrix)) > 1e-12 for o in kept):
            kept.append(el)
    return kept


def linearized_residual(problem: CompositeProblem, zbar, z) -> np.ndarray:
    """Residual of the linearization around the base point zbar."""
    base = as_point(problem, zbar)
    pt = as_point(problem, z)
    Hbar = problem.F.weighted_hessian(base.x, base.mu)
    Jbar = np.atleast_2d(np.asarray(problem.F.jacobian(base.x), dtype=float))
    Fbar = np.asarray(problem.F.eval(base.x), dtype=float)
    w = Fbar + Jbar @ (pt.x - base.x) + pt.mu
    r1 = Hbar @ (pt.x - base.x) + Jbar.T @ (pt.mu - base.mu)
    r2 = pt.mu - problem.prox_gstar(w)
    return np.concatenate([r1, r2])


def _linearized_newton_functions(problem, base, rhs):
    Hbar = problem.F.weighted_hessian(base.x, base.mu)
    Jbar = np.atleast_2d(np.asarray(problem.F.jacobian(base.x), dtype=float))
    Fbar = np.asarray(problem.F.eval(base.x), dtype=float)
    n = problem.n

    def res(zv: np.ndarray) -> np.ndarray:
        # sign-adjusted so that elem() below is its derivative element;
        # zeros coincide with solutions of (linearized residual) == rhs
        x, nu = zv[:n], zv[n:]
        w = Fbar + Jbar @ (x - base.x) + nu
        r1 = Hbar @ (x - base.x) + Jbar.T @ (nu - base.mu) - rhs[:n]
        r2 = (Fbar + Jbar @ (x - base.x)) - problem.prox_g(w) + rhs[n:]
        return np.concatenate([r1, r2])

    def elem(zv: np.ndarray) -> np.ndarray:
        x, nu = zv[:n], zv[n:]
        w = Fbar + Jbar @ (x - base.x) + nu
        els = [p.clarke_element(wb) for p, wb in zip(problem.pieces, problem.blocks(w))]
        U = _blockdiag(problem, els)
        m = problem.m
        E = np.zeros((n + m, n + m))
        E[:n, :n] = Hbar
        E[:n, n:] = Jbar.T
        E[n:, :n] = (np.eye(m) - U) @ Jbar
        E[n:, n:] = -U
        return E

    return res, elem


def solve_linearized_ge(problem: CompositeProblem, zbar, delta,
                        start=None, opts: NewtonOptions | None = None) -> KKTPoint:
    """Solve the canonically perturbed linearized generalized equation.

    The perturbed inclusion is translated into the nonsmooth equation for
    the shifted dual variable nu = mu + delta_2; the returned point undoes
    the shift.  Non-convergence of the inner Newton iteration propagates,
    signalling probable failure of strong regularity.
    """
    base = as_point(problem, zbar)
    delta = np.asarray(delta, dtype=float)
    n, m = problem.n, problem.m
    if delta.size != n + m:
        raise DimensionError(f"delta has {delta.size} entries, expected {n + m}")
    Jbar = np.atleast_2d(np.asarray(problem.F.jacobian(base.x), dtype=float))
    rhs = np.concatenate([delta[:n] + Jbar.T @ delta[n:], delta[n:]])
    res, elem = _linearized_newton_functions(problem, base, rhs)
    z0 = base.stacked() if start is None else as_point(problem, start).stacked()
    zsol, _ = semismooth_solve(res, elem, z0, opts)
    return KKTPoint(zsol[:n], zsol[n:] - delta[n:])


def solve(problem: CompositeProblem, z0,
          opts: NewtonOptions | None = None) -> tuple[KKTPoint, NewtonTrace]:
    """Semismooth Newton on the KKT residual from the given start.

    Each iteration uses the canonical element at the current iterate and
    backtracks on half the squared residual norm.
    """
    start = as_point(problem, z0)

    def rho(zv: np.ndarray) -> np.ndarray:
        return signed_residual(problem, zv)

    def elem(zv: np.ndarray) -> np.ndarray:
        return canonical_element(problem, zv).matrix

    zsol, trace = semismooth_solve(rho, elem, start.stacked(), opts)
    return KKTPoint(zsol[:problem.n], zsol[problem.n:]), trace
