import numpy as np
import pytest

from kktstab import (
    InsufficientTraceError,
    NewtonOptions,
    NewtonTrace,
    load_battery,
    local_rate,
    residual,
    solve,
)
from kktstab.verify import newton_start_grid


def test_solve_nlp_from_spec_start():
    problem, meta = load_battery("nlp_toy")
    z, trace = solve(problem, meta.start, NewtonOptions(tol=1e-10))
    assert trace.iterations <= 10
    assert np.allclose(z.x, [1.0], atol=1e-9)
    assert np.allclose(z.mu, [1.0, 1.0], atol=1e-9)
    assert np.linalg.norm(residual(problem, z), np.inf) <= 1e-10


def test_solve_sdp_from_spec_start():
    problem, meta = load_battery("sdp_toy")
    z, trace = solve(problem, meta.start, NewtonOptions(tol=1e-10))
    assert np.allclose(z.x, [0.0], atol=1e-9)
    assert np.allclose(z.mu, [1.0, -1.0, 0.0, 0.0], atol=1e-9)
    assert np.linalg.norm(residual(problem, z), np.inf) <= 1e-10


def test_solve_returns_immediately_at_solution():
    problem, meta = load_battery("nlp_toy")
    z, trace = solve(problem, meta.known_solution)
    assert trace.iterations == 0
    assert np.allclose(z.stacked(), meta.known_solution.stacked())


def test_solve_rejects_nonfinite_start():
    problem, _ = load_battery("nlp_toy")
    with pytest.raises(ValueError):
        solve(problem, np.array([np.nan, 0.0, 0.0]))


def test_merit_monotone_and_deterministic():
    problem, meta = load_battery("sdp_toy")
    start = meta.known_solution.stacked() + 0.4
    z1, t1 = solve(problem, start)
    z2, t2 = solve(problem, start)
    assert t1.residual_norms == t2.residual_norms
    assert t1.step_lengths == t2.step_lengths
    merits = [0.5 * r * r for r in t1.residual_norms]
    for a, b in zip(merits, merits[1:]):
        assert b <= a + 1e-15


def test_grid_convergence_strongly_regular_battery():
    opts = NewtonOptions(tol=1e-10)
    for name in ("nlp_toy", "sdp_toy", "l1_toy", "smooth_toy"):
        problem, meta = load_battery(name)
        for start in newton_start_grid(problem, meta, radius=0.5, count=10, seed=9):
            z, trace = solve(problem, start, opts)
            assert np.linalg.norm(residual(problem, z), np.inf) <= 1e-10, name


def test_local_rate_quadratic_on_regular_instances():
    for name in ("nlp_toy", "sdp_toy"):
        problem, meta = load_battery(name)
        rates = []
        for start in newton_start_grid(problem, meta, radius=0.5, count=10, seed=42):
            _, trace = solve(problem, start)
            if trace.iterations >= 2:
                rates.append(local_rate(trace))
        assert rates and all(r == "quadratic" for r in rates), (name, rates)


def test_degenerate_instance_newton_diagnostics():
    # the degenerate instance has a solution continuum: runs either land on
    # it quickly, stagnate, or traverse singular elements; the trace records
    # the degeneracy either way
    problem, meta = load_battery("sdp_degenerate")
    rng = np.random.default_rng(11)
    stagnations = 0
    singular_traces = 0
    for _ in range(60):
        start = meta.known_solution.stacked() + rng.uniform(-1.5, 1.5, 5)
        try:
            _, trace = solve(problem, start)
        except Exception as exc:
            assert hasattr(exc, "trace")
            stagnations += 1
            continue
        if trace.element_min_sv and min(trace.element_min_sv) <= 1e-8:
            singular_traces += 1
    assert stagnations > 0
    assert singular_traces > 0


def test_local_rate_synthetic_traces():
    flat = NewtonTrace(residual_norms=[0.3, 0.3, 0.3, 0.3, 0.3],
                       step_lengths=[1.0] * 4, element_min_sv=[1.0] * 4,
                       status="converged")
    assert local_rate(flat) == "none"
    geo = NewtonTrace(residual_norms=[0.4 * 0.5 ** k for k in range(12)],
                      step_lengths=[1.0] * 11, element_min_sv=[1.0] * 11,
                      status="converged")
    assert local_rate(geo) == "linear"
    quad = NewtonTrace(residual_norms=[0.4, 0.4 ** 2, 0.4 ** 4, 0.4 ** 8, 0.4 ** 16],
                       step_lengths=[1.0] * 4, element_min_sv=[1.0] * 4,
                       status="converged")
    assert local_rate(quad) == "quadratic"


def test_local_rate_insufficient_trace():
    short = NewtonTrace(residual_norms=[1.0, 0.0], step_lengths=[1.0],
                        element_min_sv=[1.0], status="converged")
    with pytest.raises(InsufficientTraceError):
        local_rate(short)
    unconverged = NewtonTrace(residual_norms=[1.0] * 6, step_lengths=[1.0] * 5,
                              element_min_sv=[1.0] * 5, status="max_iter")
    with pytest.raises(InsufficientTraceError):
        local_rate(unconverged)


def test_newton_options_validation():
    with pytest.raises(ValueError):
        NewtonOptions(backtrack_factor=1.5)
    with pytest.raises(ValueError):
        NewtonOptions(tol=-1.0)
