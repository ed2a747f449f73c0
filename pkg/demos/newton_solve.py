"""Semismooth Newton on the KKT residual of the shipped battery, with the
per-iteration trace and the local rate classification."""

import numpy as np

from kktstab import (
    InsufficientTraceError,
    NewtonOptions,
    load_battery,
    local_rate,
    residual,
    solve,
)

np.set_printoptions(precision=8, suppress=True)

opts = NewtonOptions(tol=1e-10)
for name in ("nlp_toy", "sdp_toy", "l1_toy", "smooth_toy"):
    problem, meta = load_battery(name)
    # start a bit away from the solution so the trace shows a real tail
    start = meta.known_solution.stacked() + 0.35 * np.cos(
        np.arange(problem.n + problem.m) + 1.0)
    z, trace = solve(problem, start, opts)
    print(f"== {name}: {trace.iterations} iterations")
    print(f"   x  = {np.atleast_1d(z.x)}")
    print(f"   mu = {np.atleast_1d(z.mu)}")
    for k, rn in enumerate(trace.residual_norms):
        step = f"step {trace.step_lengths[k - 1]:.2f}" if k else "start    "
        print(f"   iter {k}: residual {rn:.3e}  {step}")
    try:
        print(f"   local rate: {local_rate(trace)}")
    except InsufficientTraceError:
        print("   local rate: trace too short to classify")
    print(f"   final KKT residual {np.linalg.norm(residual(problem, z), np.inf):.2e}")
    print()

print("the degenerate instance is a different story:")
problem, meta = load_battery("sdp_degenerate")
rng = np.random.default_rng(11)
outcomes = {"converged": 0, "stagnated": 0, "singular elements seen": 0}
for _ in range(30):
    start = meta.known_solution.stacked() + rng.uniform(-1.5, 1.5, 5)
    try:
        _, trace = solve(problem, start, opts)
        outcomes["converged"] += 1
        if trace.element_min_sv and min(trace.element_min_sv) <= 1e-8:
            outcomes["singular elements seen"] += 1
    except Exception:
        outcomes["stagnated"] += 1
print(f"   over 30 random starts: {outcomes}")
