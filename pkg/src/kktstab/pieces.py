"""Convex building blocks with their full proximal calculus.

Each piece knows its value, conjugate value, prox pair, Moreau envelope,
one-sided directional derivative of the prox, canonical and sampled
generalized-derivative elements, the curvature functional used by the
second-order machinery, and the descriptors of its critical direction set.

Points are plain 1-d float arrays.  Matrix pieces live in the svec
coordinates of :mod:`kktstab.symmat`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .symmat import (
    SQRT2,
    SpectralSplit,
    conjugation_matrix,
    eig_split,
    smat,
    svec,
    svec_dim,
    svec_indices,
)

# Least-squares residual threshold for membership in the domain of the
# curvature functional (the domain has measure zero, exact tests are
# meaningless in floating point).
DOM_RESIDUAL_TOL = 1e-8

# Sampling caps: enumerated 0/1 patterns for separable pieces, random
# kernel-block patterns for matrix pieces.
SEPARABLE_PATTERN_CAP = 64
PSD_PATTERN_CAP = 32

_DEDUP_TOL = 1e-12


class SubgradientError(ValueError):
    """The supplied pair (xbar, ubar) is not a subgradient pair."""


class GammaDomainBoundaryWarning(UserWarning):
    """A direction sits marginally outside every sampled element range."""


@dataclass
class LinearOperatorElement:
    """One element of the generalized derivative of a prox map.

    The matrix acts on the piece's coordinates and is symmetric with
    spectrum contained in [0, 1].
    """

    matrix: np.ndarray
    provenance: str = ""

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class ConeDescriptor:
    """Critical direction set of a piece at a subgradient pair.

    affine_hull_basis spans the affine hull of the critical set,
    lineality_basis its largest contained subspace; membership tests the
    (non-affine) critical set itself.
    """

    affine_hull_basis: np.ndarray
    lineality_basis: np.ndarray
    membership: Callable[[np.ndarray, float], bool] = field(repr=False)


@dataclass
class ConeModel:
    """Closed convex cone given by an exact projection.

    When ``polyhedral`` is true the cone is a product of coordinate
    intervals encoded by ``lower``/``upper`` (entries 0 or +-inf), which
    enables the exact linear-programming decision path.
    """

    dim: int
    polyhedral: bool
    project: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def residual(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(v - self.project(v)))


def _interval_cone(lower: np.ndarray, upper: np.ndarray) -> ConeModel:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return ConeModel(
        dim=lower.size,
        polyhedral=True,
        project=lambda v: np.clip(v, lower, upper),
        lower=lower,
        upper=upper,
    )


def _orthonormal_from_coords(dim: int, coords: list[int]) -> np.ndarray:
    B = np.zeros((dim, len(coords)))
    for k, c in enumerate(coords):
        B[c, k] = 1.0
    return B


def dedup_elements(elements: list[LinearOperatorElement]) -> list[LinearOperatorElement]:
    kept: list[LinearOperatorElement] = []
    for el in elements:
        if all(np.max(np.abs(el.matrix - other.matrix)) > _DEDUP_TOL for other in kept):
            kept.append(el)
    return kept


class ConvexPiece:
    """Base class; concrete pieces fill in the scalar/matrix specifics."""

    kind: str = ""
    dim: int = 0

    # -- values ---------------------------------------------------------
    def value(self, z: np.ndarray, tol: float = 1e-9) -> float:
        raise NotImplementedError

    def conjugate_value(self, w: np.ndarray, tol: float = 1e-9) -> float:
        raise NotImplementedError

    def prox_value(self, p: np.ndarray) -> float:
        """Function value at a point known to be a prox output (0 for indicators)."""
        raise NotImplementedError

    # -- prox pair ------------------------------------------------------
    def prox(self, z: np.ndarray, sigma: float = 1.0) -> np.ndarray:
        raise NotImplementedError

    def prox_conjugate(self, z: np.ndarray, sigma: float = 1.0) -> np.ndarray:
        """Prox of the conjugate function, always through the Moreau identity."""
        z = np.asarray(z, dtype=float)
        _check_sigma(sigma)
        return z - sigma * self.prox(z / sigma, 1.0 / sigma)

    def moreau_envelope(self, z: np.ndarray, sigma: float = 1.0) -> tuple[float, np.ndarray]:
        z = np.asarray(z, dtype=float)
        _check_sigma(sigma)
        p = self.prox(z, sigma)
        value = self.prox_value(p) + float(np.dot(p - z, p - z)) / (2.0 * sigma)
        gradient = (z - p) / sigma
        return value, gradient

    # -- first-order variational objects --------------------------------
    def prox_dirderiv(self, z: np.ndarray, d: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def clarke_element(self, z: np.ndarray) -> LinearOperatorElement:
        raise NotImplementedError

    def sample_clarke(self, z: np.ndarray, count: int, seed: int) -> list[LinearOperatorElement]:
        raise NotImplementedError

    # -- second-order objects --------------------------------------------
    def check_subgradient(self, xbar: np.ndarray, ubar: np.ndarray, tol: float = 1e-8) -> None:
        xbar = np.asarray(xbar, dtype=float)
        ubar = np.asarray(ubar, dtype=float)
        res = float(np.linalg.norm(self.prox(xbar + ubar) - xbar))
        if res > tol * (1.0 + float(np.linalg.norm(xbar))):
            raise SubgradientError(
                f"{self.kind}: ubar is not a subgradient at xbar "
                f"(prox fixed-point residual {res:.3e})"
            )

    def gamma(self, xbar: np.ndarray, ubar: np.ndarray, v: np.ndarray,
              samples: list[LinearOperatorElement] | None = None) -> float:
        raise NotImplementedError

    def cone_descriptors(self, xbar: np.ndarray, ubar: np.ndarray) -> ConeDescriptor:
        raise NotImplementedError

    # -- cones for the constraint-qualification machinery ----------------
    def critical_polar_cone(self, xbar: np.ndarray, ubar: np.ndarray) -> ConeModel:
        """Polar of the critical direction set (= tangent cone to the
        subdifferential at ubar)."""
        raise NotImplementedError

    def domain_normal_cone(self, xbar: np.ndarray, ubar: np.ndarray) -> ConeModel:
        """Normal cone to the function domain at xbar."""
        raise NotImplementedError


def _check_sigma(sigma: float) -> None:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")


# ----------------------------------------------------------------------
# Separable scalar pieces


class _SeparablePiece(ConvexPiece):
    """Common machinery for coordinatewise pieces.

    Subclasses classify each coordinate of the base point into
    'free'  (prox derivative identically 1 nearby),
    'pinned' (prox derivative identically 0 nearby),
    'kink'   (one-sided derivatives 0 and 1).
    Critical intervals per coordinate follow the same classification:
    free -> R, pinned -> {0}, kink -> a half line whose sign the subclass
    reports (+1 for d >= 0, -1 for d <= 0).
    """

    def _classify(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (state, halfline_sign); state in {1: free, 0: pinned, 2: kink}."""
        raise NotImplementedError

    def _classify_pair(self, xbar: np.ndarray, ubar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._classify(np.asarray(xbar, float) + np.asarray(ubar, float))

    def prox_dirderiv(self, z: np.ndarray, d: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        d = np.asarray(d, dtype=float)
        state, sign = self._classify(z)
        out = np.where(state == 1, d, 0.0)
        kink = state == 2
        out[kink] = np.where(sign[kink] > 0, np.maximum(d[kink], 0.0),
                             np.minimum(d[kink], 0.0))
        return out

    def _diag_element(self, diag: np.ndarray, provenance: str) -> LinearOperatorElement:
        return LinearOperatorElement(np.diag(diag.astype(float)), provenance)

    def clarke_element(self, z: np.ndarray) -> LinearOperatorElement:
        state, _ = self._classify(np.asarray(z, dtype=float))
        # ties at kinks resolve to 1, the limit from the identity side
        diag = np.where(state == 0, 0.0, 1.0)
        return self._diag_element(diag, f"{self.kind}:canonical")

    def sample_clarke(self, z: np.ndarray, count: int, seed: int) -> list[LinearOperatorElement]:
        if count < 1:
            raise ValueError("count must be at least 1")
        z = np.asarray(z, dtype=float)
        state, _ = self._classify(z)
        base = np.where(state == 1, 1.0, 0.0)
        kinks = np.where(state == 2)[0]
        elements = [self.clarke_element(z)]
        diag_zero = base.copy()
        elements.append(self._diag_element(diag_zero, f"{self.kind}:pattern-zeros"))
        rng = np.random.default_rng(seed)
        n_k = kinks.size
        if n_k:
            if 2 ** n_k <= SEPARABLE_PATTERN_CAP:
                patterns = [np.array([(p >> i) & 1 for i in range(n_k)], dtype=float)
                            for p in range(2 ** n_k)]
            else:
                patterns = [rng.integers(0, 2, size=n_k).astype(float)
                            for _ in range(SEPARABLE_PATTERN_CAP)]
            for pat in patterns:
                diag = base.copy()
                diag[kinks] = pat
                tag = "".join(str(int(b)) for b in pat)
                elements.append(self._diag_element(diag, f"{self.kind}:pattern[{tag}]"))
            while len(elements) < count + 2:
                theta = rng.uniform(0.05, 0.95)
                i, j = rng.integers(0, len(elements), size=2)
                mix = theta * elements[i].matrix + (1 - theta) * elements[j].matrix
                elements.append(LinearOperatorElement(mix, f"{self.kind}:convex({i},{j})"))
        deduped = dedup_elements(elements)
        if len(deduped) > max(count, 2):
            deduped = deduped[: max(count, 2)]
        return deduped

    def gamma(self, xbar, ubar, v, samples=None):
        self.check_subgradient(xbar, ubar)
        v = np.asarray(v, dtype=float)
        state, _ = self._classify_pair(xbar, ubar)
        blocked = state == 0
        vnorm = float(np.linalg.norm(v))
        res = float(np.linalg.norm(v[blocked])) if np.any(blocked) else 0.0
        if res > DOM_RESIDUAL_TOL * (1.0 + vnorm):
            if res <= 10.0 * DOM_RESIDUAL_TOL * (1.0 + vnorm):
                warnings.warn("direction is marginally outside the sampled ranges",
                              GammaDomainBoundaryWarning)
            return float("inf")
        return 0.0

    def cone_descriptors(self, xbar, ubar) -> ConeDescriptor:
        self.check_subgradient(xbar, ubar)
        state, sign = self._classify_pair(xbar, ubar)
        aff = _orthonormal_from_coords(self.dim, list(np.where(state != 0)[0]))
        lin = _orthonormal_from_coords(self.dim, list(np.where(state == 1)[0]))
        pinned = state == 0
        kink = state == 2

        def membership(d: np.ndarray, tol: float = 1e-9) -> bool:
            d = np.asarray(d, dtype=float)
            if np.any(np.abs(d[pinned]) > tol):
                return False
            return bool(np.all(sign[kink] * d[kink] >= -tol))

        return ConeDescriptor(aff, lin, membership)

    def critical_polar_cone(self, xbar, ubar) -> ConeModel:
        state, sign = self._classify_pair(xbar, ubar)
        lower = np.zeros(self.dim)
        upper = np.zeros(self.dim)
        lower[state == 0] = -np.inf
        upper[state == 0] = np.inf
        kink = state == 2
        # polar of a half line {s*d >= 0} is the opposite half line
        lower[kink] = np.where(sign[kink] > 0, -np.inf, 0.0)
        upper[kink] = np.where(sign[kink] > 0, 0.0, np.inf)
        return _interval_cone(lower, upper)


class OrthantIndicator(_SeparablePiece):
    """Indicator of the nonnegative (sign=+1) or nonpositive (sign=-1) orthant."""

    def __init__(self, dim: int, sign: int = -1):
        if sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        self.kind = "orthant_indicator"
        self.dim = int(dim)
        self.sign = int(sign)

    def value(self, z, tol=1e-9):
        z = np.asarray(z, dtype=float)
        ok = np.all(self.sign * z >= -tol * (1.0 + np.linalg.norm(z)))
        return 0.0 if ok else float("inf")

    def conjugate_value(self, w, tol=1e-9):
        w = np.asarray(w, dtype=float)
        ok = np.all(self.sign * w <= tol * (1.0 + np.linalg.norm(w)))
        return 0.0 if ok else float("inf")

    def prox_value(self, p):
        return 0.0

    def prox(self, z, sigma=1.0):
        _check_sigma(sigma)
        z = np.asarray(z, dtype=float)
        return np.maximum(z, 0.0) if self.sign > 0 else np.minimum(z, 0.0)

    def _classify(self, z):
        w = self.sign * np.asarray(z, dtype=float)
        state = np.where(w > 0, 1, np.where(w < 0, 0, 2))
        sign = np.where(w == 0, float(self.sign), 0.0)
        return state, sign

    def domain_normal_cone(self, xbar, ubar) -> ConeModel:
        x = self.sign * np.asarray(xbar, dtype=float)
        # interior coordinates contribute {0}; active ones the outward ray
        lower = np.zeros(self.dim)
        upper = np.zeros(self.dim)
        active = x <= 1e-12 * (1.0 + np.linalg.norm(x))
        if self.sign > 0:
            lower[active] = -np.inf
        else:
            upper[active] = np.inf
        return _interval_cone(lower, upper)


class BoxIndicator(_SeparablePiece):
    """Indicator of the box [lower, upper]; infinite bounds are allowed."""

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same shape")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        self.kind = "box_indicator"
        self.dim = lower.size
        self.lower = lower
        self.upper = upper

    def value(self, z, tol=1e-9):
        z = np.asarray(z, dtype=float)
        s = tol * (1.0 + np.linalg.norm(z))
        ok = np.all(z >= self.lower - s) and np.all(z <= self.upper + s)
        return 0.0 if ok else float("inf")

    def conjugate_value(self, w, tol=1e-9):
        # support function of the box; guard inf * 0
        w = np.asarray(w, dtype=float)
        total = 0.0
        for i in range(self.dim):
            if w[i] > 0:
                total += self.upper[i] * w[i]
            elif w[i] < 0:
                total += self.lower[i] * w[i]
        return float(total)

    def prox_value(self, p):
        return 0.0

    def prox(self, z, sigma=1.0):
        _check_sigma(sigma)
        return np.clip(np.asarray(z, dtype=float), self.lower, self.upper)

    def _classify(self, z):
        z = np.asarray(z, dtype=float)
        state = np.empty(self.dim, dtype=int)
        sign = np.zeros(self.dim)
        for i in range(self.dim):
            lo, hi = self.lower[i], self.upper[i]
            if lo == hi:
                state[i] = 0
            elif lo < z[i] < hi:
                state[i] = 1
            elif z[i] == lo:
                state[i] = 2
                sign[i] = 1.0
            elif z[i] == hi:
                state[i] = 2
                sign[i] = -1.0
            else:
                state[i] = 0
        return state, sign

    def domain_normal_cone(self, xbar, ubar) -> ConeModel:
        x = np.asarray(xbar, dtype=float)
        lower = np.zeros(self.dim)
        upper = np.zeros(self.dim)
        s = 1e-12 * (1.0 + np.linalg.norm(x))
        for i in range(self.dim):
            lo, hi = self.lower[i], self.upper[i]
            at_lo = x[i] <= lo + s
            at_hi = x[i] >= hi - s
            if at_lo:
                lower[i] = -np.inf
            if at_hi:
                upper[i] = np.inf
        return _interval_cone(lower, upper)


class L1Norm(_SeparablePiece):
    """The l1 norm; its prox is the coordinatewise soft threshold."""

    def __init__(self, dim: int):
        self.kind = "l1_norm"
        self.dim = int(dim)

    def value(self, z, tol=1e-9):
        return float(np.sum(np.abs(np.asarray(z, dtype=float))))

    def conjugate_value(self, w, tol=1e-9):
        w = np.asarray(w, dtype=float)
        ok = np.all(np.abs(w) <= 1.0 + tol)
        return 0.0 if ok else float("inf")

    def prox_value(self, p):
        return float(np.sum(np.abs(p)))

    def prox(self, z, sigma=1.0):
        _check_sigma(sigma)
        z = np.asarray(z, dtype=float)
        return np.sign(z) * np.maximum(np.abs(z) - sigma, 0.0)

    def _classify(self, z):
        # classification of the soft threshold at unit sigma, the scale at
        # which all second-order analysis happens
        z = np.asarray(z, dtype=float)
        a = np.abs(z)
        state = np.where(a > 1.0, 1, np.where(a < 1.0, 0, 2))
        sign = np.where(a == 1.0, np.sign(z), 0.0)
        return state, sign

    def domain_normal_cone(self, xbar, ubar) -> ConeModel:
        # full domain, normal cone is trivial
        zero = np.zeros(self.dim)
        return _interval_cone(zero, zero)


# ----------------------------------------------------------------------
# Positive semidefinite cone piece


class PSDConeIndicator(ConvexPiece):
    """Indicator of the positive semidefinite cone in svec coordinates.

    All second-order objects are driven by the eigenvalue split of
    A = smat(xbar + ubar) into positive (alpha), zero (beta) and negative
    (gamma) parts.
    """

    def __init__(self, order: int, tol_eig: float | None = None):
        self.kind = "psd_indicator"
        self.order = int(order)
        self.dim = svec_dim(self.order)
        self.tol_eig = tol_eig

    # -- split helpers ----------------------------------------------------
    def split(self, z: np.ndarray) -> SpectralSplit:
        return eig_split(smat(np.asarray(z, dtype=float)), self.tol_eig)

    def _rotated(self, sp: SpectralSplit, v: np.ndarray) -> np.ndarray:
        return sp.P.T @ smat(v) @ sp.P

    def value(self, z, tol=1e-9):
        sp = self.split(z)
        scale = tol * (1.0 + float(np.linalg.norm(z)))
        return 0.0 if np.all(sp.lam >= -scale) else float("inf")

    def conjugate_value(self, w, tol=1e-9):
        sp = self.split(w)
        scale = tol * (1.0 + float(np.linalg.norm(w)))
        return 0.0 if np.all(sp.lam <= scale) else float("inf")

    def prox_value(self, p):
        return 0.0

    def prox(self, z, sigma=1.0):
        _check_sigma(sigma)
        sp = self.split(z)
        lam_pos = np.maximum(sp.lam, 0.0)
        return svec(sp.P @ np.diag(lam_pos) @ sp.P.T)

    def prox_dirderiv(self, z, d):
        sp = self.split(z)
        Dt = self._rotated(sp, np.asarray(d, dtype=float))
        a, b, g = sp.alpha, sp.beta, sp.gamma
        V = np.zeros_like(Dt)
        V[np.ix_(a, a)] = Dt[np.ix_(a, a)]
        V[np.ix_(a, b)] = Dt[np.ix_(a, b)]
        V[np.ix_(b, a)] = Dt[np.ix_(b, a)]
        V[np.ix_(a, g)] = sp.Sigma[np.ix_(a, g)] * Dt[np.ix_(a, g)]
        V[np.ix_(g, a)] = sp.Sigma[np.ix_(g, a)] * Dt[np.ix_(g, a)]
        if b.size:
            Dbb = Dt[np.ix_(b, b)]
            w, Q = np.linalg.eigh(0.5 * (Dbb + Dbb.T))
            V[np.ix_(b, b)] = Q @ np.diag(np.maximum(w, 0.0)) @ Q.T
        return svec(sp.P @ V @ sp.P.T)

    # -- elements ---------------------------------------------------------
    def _element_from_Z(self, sp: SpectralSplit, Z_small: np.ndarray | None,
                        provenance: str) -> LinearOperatorElement:
        """Assemble the svec operator with the given inner kernel-block map."""
        m = sp.order
        idx = svec_indices(m)
        cls = np.empty(m, dtype="<U1")
        cls[sp.alpha] = "a"
        cls[sp.beta] = "b"
        cls[sp.gamma] = "g"
        B = np.zeros((self.dim, self.dim))
        beta_coords = []
        for k, (i, j) in enumerate(idx):
            ci, cj = cls[i], cls[j]
            pair = ci + cj
            if pair in ("aa", "ab", "ba"):
                B[k, k] = 1.0
            elif pair in ("ag", "ga"):
                B[k, k] = sp.Sigma[i, j]
            elif pair == "bb":
                beta_coords.append(k)
            # bg, gb, gg stay zero
        if beta_coords:
            if Z_small is None:
                Z_small = np.eye(len(beta_coords))
            B[np.ix_(beta_coords, beta_coords)] = Z_small
        K = conjugation_matrix(sp.P)
        M = K @ B @ K.T
        return LinearOperatorElement(0.5 * (M + M.T), provenance)

    def clarke_element(self, z):
        sp = self.split(z)
        nb = sp.beta.size
        Z = np.eye(svec_dim(nb)) if nb else None
        return self._element_from_Z(sp, Z, f"{self.kind}:canonical(beta=I)")

    @staticmethod
    def _projection_kernel_block(Q: np.ndarray, pattern: np.ndarray) -> np.ndarray:
        """svec operator of D -> M D M with M = Q diag(pattern) Q^T."""
        M = Q @ np.diag(pattern.astype(float)) @ Q.T
        b = Q.shape[0]
        d = svec_dim(b)
        K = np.empty((d, d))
        for k, (i, j) in enumerate(svec_indices(b)):
            E = np.zeros((b, b))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / SQRT2
            K[:, k] = svec(M @ E @ M)
        return K

    def sample_clarke(self, z, count, seed):
        if count < 1:
            raise ValueError("count must be at least 1")
        sp = self.split(z)
        nb = sp.beta.size
        elements = [self.clarke_element(z)]
        if nb == 0:
            return dedup_elements(elements)
        sd = svec_dim(nb)
        elements.append(self._element_from_Z(sp, np.zeros((sd, sd)),
                                             f"{self.kind}:zero-beta"))
        rng = np.random.default_rng(seed)
        n_rand = min(PSD_PATTERN_CAP, max(count, 4))
        for s in range(n_rand):
            G = rng.standard_normal((nb, nb))
            Q, R = np.linalg.qr(G)
            Q = Q * np.sign(np.diag(R))
            pattern = rng.integers(0, 2, size=nb)
            Z = self._projection_kernel_block(Q, pattern)
            tag = "".join(str(int(b)) for b in pattern)
            elements.append(self._element_from_Z(sp, Z, f"{self.kind}:pattern[{tag}]q{s}"))
        while len(elements) < count + 2:
            theta = rng.uniform(0.05, 0.95)
            i, j = rng.integers(0, len(elements), size=2)
            mix = theta * elements[i].matrix + (1 - theta) * elements[j].matrix
            elements.append(LinearOperatorElement(mix, f"{self.kind}:convex({i},{j})"))
        deduped = dedup_elements(elements)
        if len(deduped) > max(count, 2):
            deduped = deduped[: max(count, 2)]
        return deduped

    # -- curvature and descriptors -----------------------------------------
    def gamma(self, xbar, ubar, v, samples=None):
        self.check_subgradient(xbar, ubar)
        v = np.asarray(v, dtype=float)
        sp = self.split(np.asarray(xbar, float) + np.asarray(ubar, float))
        Vt = self._rotated(sp, v)
        a, b, g = sp.alpha, sp.beta, sp.gamma
        vnorm = float(np.linalg.norm(v))
        res = 0.0
        if b.size and g.size:
            res += float(np.linalg.norm(Vt[np.ix_(b, g)])) * SQRT2
        if g.size:
            res += float(np.linalg.norm(Vt[np.ix_(g, g)]))
        if res > DOM_RESIDUAL_TOL * (1.0 + vnorm):
            if res <= 10.0 * DOM_RESIDUAL_TOL * (1.0 + vnorm):
                warnings.warn("direction is marginally outside the sampled ranges",
                              GammaDomainBoundaryWarning)
            return float("inf")
        if a.size == 0 or g.size == 0:
            return 0.0
        Vag = Vt[np.ix_(a, g)]
        ratio = sp.lam[g][None, :] / sp.lam[a][:, None]
        return float(-2.0 * np.sum(ratio * Vag ** 2))

    def cone_descriptors(self, xbar, ubar) -> ConeDescriptor:
        self.check_subgradient(xbar, ubar)
        sp = self.split(np.asarray(xbar, float) + np.asarray(ubar, float))
        m = sp.order
        cls = np.empty(m, dtype="<U1")
        cls[sp.alpha] = "a"
        cls[sp.beta] = "b"
        cls[sp.gamma] = "g"
        K = conjugation_matrix(sp.P)
        aff_cols, lin_cols = [], []
        for k, (i, j) in enumerate(svec_indices(m)):
            pair = cls[i] + cls[j]
            if pair in ("aa", "ab", "ba", "ag", "ga"):
                aff_cols.append(k)
                lin_cols.append(k)
            elif pair == "bb":
                aff_cols.append(k)
        aff = K[:, aff_cols] if aff_cols else np.zeros((self.dim, 0))
        lin = K[:, lin_cols] if lin_cols else np.zeros((self.dim, 0))
        beta, gamma_ix = sp.beta, sp.gamma
        P = sp.P

        def membership(d: np.ndarray, tol: float = 1e-9) -> bool:
            Dt = P.T @ smat(np.asarray(d, dtype=float)) @ P
            if gamma_ix.size and np.max(np.abs(Dt[np.ix_(gamma_ix, gamma_ix)])) > tol:
                return False
            if beta.size and gamma_ix.size and np.max(np.abs(Dt[np.ix_(beta, gamma_ix)])) > tol:
                return False
            if beta.size:
                w = np.linalg.eigvalsh(Dt[np.ix_(beta, beta)])
                if w.size and w[0] < -tol:
                    return False
            return True

        return ConeDescriptor(aff, lin, membership)

    def _structured_cone(self, sp: SpectralSplit, pinned_pairs, neg_block) -> ConeModel:
        """Cone {V : rotated pinned blocks vanish, rotated neg_block is NSD}."""
        m = sp.order
        P = sp.P
        neg = np.asarray(neg_block, dtype=int)

        def project(v: np.ndarray) -> np.ndarray:
            Vt = P.T @ smat(np.asarray(v, dtype=float)) @ P
            out = Vt.copy()
            for (rows, cols) in pinned_pairs:
                if len(rows) and len(cols):
                    out[np.ix_(rows, cols)] = 0.0
                    out[np.ix_(cols, rows)] = 0.0
            if neg.size:
                blk = out[np.ix_(neg, neg)]
                w, Q = np.linalg.eigh(0.5 * (blk + blk.T))
                out[np.ix_(neg, neg)] = Q @ np.diag(np.minimum(w, 0.0)) @ Q.T
            return svec(P @ out @ P.T)

        return ConeModel(dim=self.dim, polyhedral=False, project=project)

    def critical_polar_cone(self, xbar, ubar) -> ConeModel:
        sp = self.split(np.asarray(xbar, float) + np.asarray(ubar, float))
        a = list(sp.alpha)
        all_ix = list(range(sp.order))
        return self._structured_cone(sp, [(a, all_ix)], sp.beta)

    def domain_normal_cone(self, xbar, ubar) -> ConeModel:
        sp = self.split(np.asarray(xbar, float) + np.asarray(ubar, float))
        a = list(sp.alpha)
        all_ix = list(range(sp.order))
        bg = np.concatenate([sp.beta, sp.gamma]) if (sp.beta.size or sp.gamma.size) \
            else np.array([], dtype=int)
        return self._structured_cone(sp, [(a, all_ix)], bg)


# ----------------------------------------------------------------------
# Epigraph lift


class EpiSum(ConvexPiece):
    """The lift (c, y) -> c + inner(y) that encodes constrained problems."""

    def __init__(self, inner: ConvexPiece):
        self.kind = "epi_lift"
        self.inner = inner
        self.dim = 1 + inner.dim

    def _split(self, z):
        z = np.asarray(z, dtype=float)
        return float(z[0]), z[1:]

    def value(self, z, tol=1e-9):
        c, y = self._split(z)
        return c + self.inner.value(y, tol)

    def conjugate_value(self, w, tol=1e-9):
        wc, wy = self._split(w)
        if abs(wc - 1.0) > tol:
            return float("inf")
        return self.inner.conjugate_value(wy, tol)

    def prox_value(self, p):
        c, y = self._split(p)
        return c + self.inner.prox_value(y)

    def prox(self, z, sigma=1.0):
        _check_sigma(sigma)
        c, y = self._split(z)
        return np.concatenate([[c - sigma], self.inner.prox(y, sigma)])

    def prox_dirderiv(self, z, d):
        _, y = self._split(z)
        dc, dy = self._split(d)
        return np.concatenate([[dc], self.inner.prox_dirderiv(y, dy)])

    def _lift_element(self, el: LinearOperatorElement) -> LinearOperatorElement:
        M = np.zeros((self.dim, self.dim))
        M[0, 0] = 1.0
        M[1:, 1:] = el.matrix
        return LinearOperatorElement(M, f"epi({el.provenance})")

    def clarke_element(self, z):
        _, y = self._split(z)
        return self._lift_element(self.inner.clarke_element(y))

    def sample_clarke(self, z, count, seed):
        _, y = self._split(z)
        return [self._lift_element(el) for el in self.inner.sample_clarke(y, count, seed)]

    def gamma(self, xbar, ubar, v, samples=None):
        self.check_subgradient(xbar, ubar)
        _, xy = self._split(xbar)
        _, uy = self._split(ubar)
        _, vy = self._split(v)
        inner_samples = None
        if samples is not None:
            inner_samples = [LinearOperatorElement(el.matrix[1:, 1:], el.provenance)
                             for el in samples]
        return self.inner.gamma(xy, uy, vy, inner_samples)

    def cone_descriptors(self, xbar, ubar) -> ConeDescriptor:
        self.check_subgradient(xbar, ubar)
        _, xy = self._split(xbar)
        _, uy = self._split(ubar)
        inner_desc = self.inner.cone_descriptors(xy, uy)

        def lift_basis(B: np.ndarray) -> np.ndarray:
            out = np.zeros((self.dim, B.shape[1] + 1))
            out[0, 0] = 1.0
            out[1:, 1:] = B
            return out

        def membership(d: np.ndarray, tol: float = 1e-9) -> bool:
            return inner_desc.membership(np.asarray(d, dtype=float)[1:], tol)

        return ConeDescriptor(lift_basis(inner_desc.affine_hull_basis),
                              lift_basis(inner_desc.lineality_basis),
                              membership)

    def _lift_cone(self, cone: ConeModel) -> ConeModel:
        # the scalar coordinate is free in the critical set, so its polar
        # coordinate is pinned to zero; likewise for the domain normal cone
        if cone.polyhedral:
            lower = np.concatenate([[0.0], cone.lower])
            upper = np.concatenate([[0.0], cone.upper])
            return _interval_cone(lower, upper)

        def project(v: np.ndarray) -> np.ndarray:
            v = np.asarray(v, dtype=float)
            return np.concatenate([[0.0], cone.project(v[1:])])

        return ConeModel(dim=self.dim, polyhedral=False, project=project)

    def critical_polar_cone(self, xbar, ubar) -> ConeModel:
        _, xy = self._split(xbar)
        _, uy = self._split(ubar)
        return self._lift_cone(self.inner.critical_polar_cone(xy, uy))

    def domain_normal_cone(self, xbar, ubar) -> ConeModel:
        _, xy = self._split(xbar)
        _, uy = self._split(ubar)
        return self._lift_cone(self.inner.domain_normal_cone(xy, uy))


# ----------------------------------------------------------------------
# Functional surface mirroring the operation names


def prox(piece: ConvexPiece, z, sigma: float = 1.0):
    return piece.prox(z, sigma)


def prox_conjugate(piece: ConvexPiece, z, sigma: float = 1.0):
    return piece.prox_conjugate(z, sigma)


def moreau_envelope(piece: ConvexPiece, z, sigma: float = 1.0):
    return piece.moreau_envelope(z, sigma)


def prox_dirderiv(piece: ConvexPiece, z, d):
    return piece.prox_dirderiv(z, d)


def clarke_element(piece: ConvexPiece, z):
    return piece.clarke_element(z)


def sample_clarke(piece: ConvexPiece, z, count: int, seed: int):
    return piece.sample_clarke(z, count, seed)


def gamma(piece: ConvexPiece, xbar, ubar, v, samples=None):
    return piece.gamma(xbar, ubar, v, samples)


def cone_descriptors(piece: ConvexPiece, xbar, ubar):
    return piece.cone_descriptors(xbar, ubar)


def gamma_oracle(piece: ConvexPiece, xbar, ubar, v,
                 samples: list[LinearOperatorElement]) -> float:
    """Brute-force curvature evaluation used purely as a test oracle.

    For each sampled element U admitting v within the least-squares
    tolerance, evaluates <v, pinv(U) v> - ||v||^2 and returns the minimum.
    """
    piece.check_subgradient(np.asarray(xbar, float), np.asarray(ubar, float))
    v = np.asarray(v, dtype=float)
    vnorm = float(np.linalg.norm(v))
    tol = DOM_RESIDUAL_TOL * (1.0 + vnorm)
    best = float("inf")
    min_res = float("inf")
    for el in samples:
        d, *_ = np.linalg.lstsq(el.matrix, v, rcond=None)
        res = float(np.linalg.norm(el.matrix @ d - v))
        min_res = min(min_res, res)
        if res <= tol:
            best = min(best, float(np.dot(v, d) - vnorm ** 2))
    if not np.isfinite(best) and tol < min_res <= 10.0 * tol:
        warnings.warn("direction is marginally outside the sampled ranges",
                      GammaDomainBoundaryWarning)
    return best


def make_piece(kind: str, **params) -> ConvexPiece:
    """Construct a piece from its serialized kind name and parameters."""
    if kind == "psd_indicator":
        return PSDConeIndicator(params["order"])
    if kind == "orthant_indicator":
        return OrthantIndicator(params["dim"], params.get("sign", -1))
    if kind == "box_indicator":
        return BoxIndicator(params["lower"], params["upper"])
    if kind == "l1_norm":
        return L1Norm(params["dim"])
    if kind == "epi_lift":
        return EpiSum(params["inner"])
    raise ValueError(f"unknown piece kind: {kind!r}")
