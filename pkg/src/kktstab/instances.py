"""Instance files: a JSON format for composite problems, loaders with
eager validation, and the shipped test battery.

The smooth map is either a per-output polynomial of degree at most two
(so analytic Hessians always exist) or a registered builtin family; the
battery uses the affine matrix-pencil family for the semidefinite
instances.  Canonical schema::

    {
      "name": "...",
      "n": 1,
      "F": {"polynomial": [{"const": c, "linear": [...], "quadratic": [[...]]}, ...]}
           or {"builtin": {"id": "affine_pencil", "params": {...}}},
      "g": [{"kind": "...", ...}, ...],
      "known_solution": {"x": [...], "mu": [...]},   # optional
      "start": {"x": [...], "mu": [...]}             # optional
    }

Off-diagonal svec coordinates carry the sqrt(2) scaling throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .pieces import (
    BoxIndicator,
    ConvexPiece,
    EpiSum,
    L1Norm,
    OrthantIndicator,
    PSDConeIndicator,
)
from .problem import CompositeProblem, DimensionError, KKTPoint, SmoothMap, kkt_check
from .symmat import svec


class InstanceFormatError(ValueError):
    pass


@dataclass
class InstanceMeta:
    name: str
    known_solution: KKTPoint | None
    start: KKTPoint | None


# ----------------------------------------------------------------------
# smooth-map families


def _poly_smooth_map(n: int, outputs: list[dict]) -> SmoothMap:
    consts = []
    linears = []
    quads = []
    for k, out in enumerate(outputs):
        c = float(out.get("const", 0.0))
        a = np.asarray(out.get("linear", np.zeros(n)), dtype=float)
        if a.size != n:
            raise DimensionError(
                f"output {k}: linear part has {a.size} entries, expected n={n}")
        Q = np.asarray(out.get("quadratic", np.zeros((n, n))), dtype=float)
        if Q.shape != (n, n):
            raise DimensionError(
                f"output {k}: quadratic part has shape {Q.shape}, expected ({n}, {n})")
        consts.append(c)
        linears.append(a)
        quads.append(0.5 * (Q + Q.T))
    m = len(outputs)
    A = np.array(linears)
    c0 = np.array(consts)

    def value(x):
        x = np.asarray(x, dtype=float)
        return c0 + A @ x + 0.5 * np.array([x @ Q @ x for Q in quads])

    def jac(x):
        x = np.asarray(x, dtype=float)
        return A + np.array([Q @ x for Q in quads])

    def whess(x, mu):
        H = np.zeros((n, n))
        for mi, Q in zip(np.asarray(mu, dtype=float), quads):
            if mi != 0.0:
                H = H + mi * Q
        return H

    return SmoothMap(n=n, m=m, eval=value, jacobian=jac, weighted_hessian_fn=whess)


def _affine_pencil_smooth_map(n: int, params: dict) -> SmoothMap:
    """Scalar objective output followed by svec of an affine matrix pencil."""
    obj = params["objective"]
    c = float(obj.get("const", 0.0))
    a = np.asarray(obj.get("linear", np.zeros(n)), dtype=float)
    Q = np.asarray(obj.get("quadratic", np.zeros((n, n))), dtype=float)
    Q = 0.5 * (Q + Q.T)
    M0 = np.asarray(params["pencil_const"], dtype=float)
    Ms = [np.asarray(M, dtype=float) for M in params["pencil_coeff"]]
    if len(Ms) != n:
        raise DimensionError(
            f"pencil has {len(Ms)} coefficient matrices, expected n={n}")
    order = M0.shape[0]
    for k, M in enumerate([M0] + Ms):
        if M.shape != (order, order) or np.max(np.abs(M - M.T)) > 1e-12:
            raise InstanceFormatError(f"pencil matrix {k} is not symmetric {order}x{order}")
    svec_cols = np.array([svec(M) for M in Ms]).T
    m = 1 + order * (order + 1) // 2

    def value(x):
        x = np.asarray(x, dtype=float)
        top = c + a @ x + 0.5 * x @ Q @ x
        S = M0 + sum(xi * Mi for xi, Mi in zip(x, Ms))
        return np.concatenate([[top], svec(S)])

    def jac(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros((m, n))
        J[0] = a + Q @ x
        J[1:] = svec_cols
        return J

    def whess(x, mu):
        return float(np.asarray(mu, dtype=float)[0]) * Q

    return SmoothMap(n=n, m=m, eval=value, jacobian=jac, weighted_hessian_fn=whess)


BUILTIN_MAPS = {
    "polynomial": lambda n, params: _poly_smooth_map(n, params["outputs"]),
    "affine_pencil": _affine_pencil_smooth_map,
}


# ----------------------------------------------------------------------
# piece parsing


def parse_piece(spec: dict) -> ConvexPiece:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InstanceFormatError(f"piece spec must be an object with a 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "psd_indicator":
        return PSDConeIndicator(int(spec["order"]))
    if kind == "orthant_indicator":
        return OrthantIndicator(int(spec["dim"]), int(spec.get("sign", -1)))
    if kind == "box_indicator":
        return BoxIndicator(spec["lower"], spec["upper"])
    if kind == "l1_norm":
        return L1Norm(int(spec["dim"]))
    if kind == "epi_lift":
        return EpiSum(parse_piece(spec["inner"]))
    raise InstanceFormatError(f"unknown piece kind {kind!r}")


def piece_spec(piece: ConvexPiece) -> dict:
    if isinstance(piece, PSDConeIndicator):
        return {"kind": "psd_indicator", "order": piece.order}
    if isinstance(piece, OrthantIndicator):
        return {"kind": "orthant_indicator", "dim": piece.dim, "sign": piece.sign}
    if isinstance(piece, BoxIndicator):
        return {"kind": "box_indicator", "lower": piece.lower.tolist(),
                "upper": piece.upper.tolist()}
    if isinstance(piece, L1Norm):
        return {"kind": "l1_norm", "dim": piece.dim}
    if isinstance(piece, EpiSum):
        return {"kind": "epi_lift", "inner": piece_spec(piece.inner)}
    raise ValueError(f"cannot serialize piece {piece!r}")


# ----------------------------------------------------------------------
# loading


def _parse_point(problem: CompositeProblem, data: dict, label: str) -> KKTPoint:
    try:
        x = np.asarray(data["x"], dtype=float)
        mu = np.asarray(data["mu"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise InstanceFormatError(f"{label}: expected fields 'x' and 'mu'") from exc
    if x.size != problem.n or mu.size != problem.m:
        raise DimensionError(
            f"{label}: dims ({x.size}, {mu.size}) do not match "
            f"(n, m)=({problem.n}, {problem.m})")
    return KKTPoint(x, mu)


def instance_from_dict(data: dict) -> tuple[CompositeProblem, InstanceMeta]:
    for key in ("name", "n", "F", "g"):
        if key not in data:
            raise InstanceFormatError(f"missing required field {key!r}")
    n = int(data["n"])
    fspec = data["F"]
    if "polynomial" in fspec:
        F = _poly_smooth_map(n, fspec["polynomial"])
    elif "builtin" in fspec:
        ident = fspec["builtin"].get("id")
        if ident not in BUILTIN_MAPS:
            raise InstanceFormatError(f"unknown builtin map id {ident!r}")
        F = BUILTIN_MAPS[ident](n, fspec["builtin"].get("params", {}))
    else:
        raise InstanceFormatError("field 'F' needs 'polynomial' or 'builtin'")
    pieces = [parse_piece(s) for s in data["g"]]
    total = sum(p.dim for p in pieces)
    if total != F.m:
        raise DimensionError(
            f"block dims sum to {total} but the smooth map has m={F.m}")
    problem = CompositeProblem(F, pieces, name=str(data["name"]))
    known = None
    if data.get("known_solution") is not None:
        known = _parse_point(problem, data["known_solution"], "known_solution")
        rep = kkt_check(problem, known, tol=1e-8)
        if not rep.ok:
            raise InstanceFormatError(
                f"known_solution fails the KKT check at 1e-08 "
                f"(stationarity {rep.stationarity_norm:.3e}, "
                f"fixed point {rep.fixed_point_norm:.3e})")
    start = None
    if data.get("start") is not None:
        start = _parse_point(problem, data["start"], "start")
    return problem, InstanceMeta(name=str(data["name"]), known_solution=known,
                                 start=start)


def load_instance(path) -> tuple[CompositeProblem, InstanceMeta]:
    """Load and validate an instance file; all invariants are checked
    eagerly so later stages can trust the problem data."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    try:
        return instance_from_dict(data)
    except (InstanceFormatError, DimensionError, ValueError) as exc:
        exc.args = (f"{path}: {exc}",)
        raise


# ----------------------------------------------------------------------
# shipped battery

BATTERY_NAMES = ("nlp_toy", "sdp_toy", "sdp_degenerate", "l1_toy", "smooth_toy")


def battery_path(name: str):
    if name not in BATTERY_NAMES:
        raise KeyError(f"unknown battery instance {name!r}; "
                       f"choose from {BATTERY_NAMES}")
    return resources.files("kktstab").joinpath("battery", f"{name}.json")


def load_battery(name: str) -> tuple[CompositeProblem, InstanceMeta]:
    with resources.as_file(battery_path(name)) as p:
        return load_instance(p)
