import numpy as np
import pytest

from kktstab import (
    EpiSum,
    L1Norm,
    PSDConeIndicator,
    SubgradientError,
    cone_descriptors,
    gamma,
    gamma_oracle,
    sample_clarke,
    svec,
)
from kktstab.verify import pair_battery


def test_gamma_psd_no_coupling_is_zero():
    piece = PSDConeIndicator(2)
    xbar = svec(np.diag([0.0, 1.0]))
    ubar = svec(np.diag([-1.0, 0.0]))
    for t in (0.5, 2.0, -3.0):
        v = svec(np.diag([0.0, t]))
        assert gamma(piece, xbar, ubar, v) == 0.0


def test_gamma_psd_closed_form_value_one():
    piece = PSDConeIndicator(3)
    A = np.diag([2.0, 0.0, -1.0])
    xbar = svec(np.diag([2.0, 0.0, 0.0]))
    ubar = svec(A) - xbar
    V = np.zeros((3, 3))
    V[0, 2] = V[2, 0] = 1.0
    val = gamma(piece, xbar, ubar, svec(V))
    assert np.isclose(val, 1.0, atol=1e-12)
    samples = sample_clarke(piece, xbar + ubar, 16, seed=0)
    oracle = gamma_oracle(piece, xbar, ubar, svec(V), samples)
    assert np.isclose(val, oracle, atol=1e-8)


def test_gamma_psd_domain_gate():
    piece = PSDConeIndicator(3)
    A = np.diag([2.0, 0.0, -1.0])
    xbar = svec(np.maximum(A, 0.0))
    ubar = svec(np.minimum(A, 0.0))
    bad = np.zeros((3, 3))
    bad[2, 2] = 1.0  # gamma-gamma block
    assert gamma(piece, xbar, ubar, svec(bad)) == np.inf
    bad2 = np.zeros((3, 3))
    bad2[1, 2] = bad2[2, 1] = 1.0  # beta-gamma block
    assert gamma(piece, xbar, ubar, svec(bad2)) == np.inf


def test_gamma_l1_origin():
    piece = L1Norm(1)
    zero = np.zeros(1)
    assert gamma(piece, zero, zero, zero) == 0.0
    assert gamma(piece, zero, zero, np.array([0.3])) == np.inf


def test_gamma_precondition_error():
    piece = L1Norm(1)
    with pytest.raises(SubgradientError):
        gamma(piece, np.array([1.0]), np.array([3.0]), np.zeros(1))


def test_gamma_oracle_examples():
    piece = PSDConeIndicator(2)
    z = svec(np.diag([2.0, 1.0]))
    xbar = piece.prox(z)
    ubar = z - xbar
    samples = sample_clarke(piece, z, 8, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.standard_normal(3)
        assert abs(gamma_oracle(piece, xbar, ubar, v, samples)) <= 1e-12
    for name, p, xb, ub in pair_battery():
        s = sample_clarke(p, xb + ub, 8, seed=1)
        assert gamma_oracle(p, xb, ub, np.zeros(p.dim), s) == 0.0


def test_gamma_matches_oracle_and_nonnegative():
    rng = np.random.default_rng(5)
    for name, piece, xbar, ubar in pair_battery():
        samples = sample_clarke(piece, xbar + ubar, 16, seed=2)
        for k in range(60):
            if k % 3 == 0:
                v = rng.standard_normal(piece.dim)  # often out of domain
            else:
                el = samples[int(rng.integers(0, len(samples)))]
                v = el.matrix @ rng.standard_normal(piece.dim)
            closed = gamma(piece, xbar, ubar, v)
            oracle = gamma_oracle(piece, xbar, ubar, v, samples)
            assert np.isfinite(closed) == np.isfinite(oracle), name
            if np.isfinite(closed):
                assert closed >= -1e-10, name
                assert abs(closed - oracle) <= 1e-8 * (1 + abs(closed)), name


def test_gamma_epi_lift_ignores_scalar_part():
    piece = EpiSum(PSDConeIndicator(2))
    inner_x = svec(np.diag([0.0, 1.0]))
    inner_u = svec(np.diag([-1.0, 0.0]))
    xbar = np.concatenate([[0.3], inner_x])
    ubar = np.concatenate([[1.0], inner_u])
    v_in = np.concatenate([[7.0], svec(np.diag([0.0, 2.0]))])
    assert gamma(piece, xbar, ubar, v_in) == 0.0
    v_out = np.concatenate([[7.0], svec(np.diag([2.0, 0.0]))])
    assert gamma(piece, xbar, ubar, v_out) == np.inf


def test_fixed_point_upper_bound():
    rng = np.random.default_rng(6)
    for name, piece, xbar, ubar in pair_battery():
        samples = sample_clarke(piece, xbar + ubar, 12, seed=3)
        for _ in range(30):
            el = samples[int(rng.integers(0, len(samples)))]
            M = 0.5 * (el.matrix + el.matrix.T)
            w, Q = np.linalg.eigh(M)
            dt = Q.T @ rng.standard_normal(piece.dim)
            dt[w > 1.0 - 1e-9] = 0.0
            vt = np.where(w > 1e-9, w * dt / np.maximum(1.0 - w, 1e-9), 0.0)
            v, d = Q @ vt, Q @ dt
            if np.linalg.norm(v - M @ (v + d)) > 1e-8 * (1 + np.linalg.norm(v)):
                continue
            val = gamma(piece, xbar, ubar, v)
            if np.isfinite(val):
                assert val <= float(v @ d) + 1e-8, name


# ----------------------------------------------------------------------
# cone descriptors


def test_descriptor_psd_rank_one_negative():
    piece = PSDConeIndicator(2)
    xbar = svec(np.diag([0.0, 1.0]))
    ubar = svec(np.diag([-1.0, 0.0]))
    desc = cone_descriptors(piece, xbar, ubar)
    # with an empty zero-eigenvalue set the critical set is the subspace
    # {D : D11 = 0}; affine hull and lineality coincide with it
    e11 = np.zeros(3)
    e11[0] = 1.0
    for basis in (desc.affine_hull_basis, desc.lineality_basis):
        assert basis.shape[1] == 2
        assert np.max(np.abs(e11 @ basis)) <= 1e-12
    assert desc.membership(svec(np.diag([0.0, -2.0])), 1e-9)
    assert desc.membership(svec(np.array([[0.0, 1.0], [1.0, 0.0]])), 1e-9)
    assert not desc.membership(svec(np.diag([1.0, 0.0])), 1e-9)


def test_descriptor_psd_origin():
    piece = PSDConeIndicator(2)
    zero = np.zeros(3)
    desc = cone_descriptors(piece, zero, zero)
    assert desc.affine_hull_basis.shape[1] == 3
    assert desc.lineality_basis.shape[1] == 0
    assert desc.membership(svec(np.eye(2)), 1e-9)
    assert not desc.membership(svec(np.diag([1.0, -1.0])), 1e-9)


def test_descriptor_l1_origin():
    piece = L1Norm(1)
    desc = cone_descriptors(piece, np.zeros(1), np.zeros(1))
    assert desc.affine_hull_basis.shape[1] == 0
    assert desc.lineality_basis.shape[1] == 0
    assert desc.membership(np.zeros(1), 1e-9)
    assert not desc.membership(np.array([0.5]), 1e-9)


def test_descriptor_invariants_battery():
    rng = np.random.default_rng(7)
    for name, piece, xbar, ubar in pair_battery():
        desc = cone_descriptors(piece, xbar, ubar)
        A, L = desc.affine_hull_basis, desc.lineality_basis
        if A.shape[1]:
            assert np.allclose(A.T @ A, np.eye(A.shape[1]), atol=1e-12), name
        if L.shape[1]:
            assert np.allclose(L.T @ L, np.eye(L.shape[1]), atol=1e-12), name
            # lineality sits inside the affine hull
            res = L - A @ (A.T @ L)
            assert np.max(np.abs(res)) <= 1e-12, name
            for j in range(L.shape[1]):
                assert desc.membership(L[:, j], 1e-9), name
                assert desc.membership(-L[:, j], 1e-9), name
        # members stay inside the affine hull span
        for _ in range(20):
            d = A @ rng.standard_normal(A.shape[1]) if A.shape[1] else np.zeros(piece.dim)
            proj = piece.prox(d) if isinstance(piece, PSDConeIndicator) else d
            if desc.membership(proj, 1e-9) and A.shape[1]:
                r = proj - A @ (A.T @ proj)
                assert np.linalg.norm(r) <= 1e-9 * (1 + np.linalg.norm(proj)), name


def test_gamma_domain_boundary_warning():
    import warnings
    from kktstab import GammaDomainBoundaryWarning

    piece = PSDConeIndicator(2)
    xbar = svec(np.diag([2.0, 0.0]))
    ubar = svec(np.diag([0.0, -1.0]))
    # a direction sitting marginally outside the domain: tiny component in
    # the negative block, between 1 and 10 times the residual tolerance
    v = svec(np.array([[0.0, 1.0], [1.0, 5e-8]]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        val = gamma(piece, xbar, ubar, v)
    assert val == np.inf
    assert any(issubclass(w.category, GammaDomainBoundaryWarning) for w in caught)
