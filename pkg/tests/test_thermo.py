"""Moment map, Newton inverse, mobility, and the domain U.

The enumeration oracle below computes moments directly from the tilted
product measure over all 2^{|V|} local states, independently of the
logistic shortcut.
"""
import numpy as np
import pytest

from latgas import thermo as th
from latgas.velocities import default_velocity_set

VS1 = default_velocity_set(1)
VS2 = default_velocity_set(2)


def enumeration_moments(lam, vs):
    """Oracle: E[I(xi)] under m_lam by explicit enumeration of {0,1}^V."""
    tv = vs.tilde_array()
    bits = ((np.arange(2 ** vs.n)[:, None] >> np.arange(vs.n)) & 1).astype(float)
    energy = bits @ (tv @ lam)
    w = np.exp(energy - energy.max())
    w /= w.sum()
    return (bits @ tv).T @ w


def test_theta_at_zero_is_half():
    assert np.allclose(th.theta(np.zeros(2), VS1), 0.5)
    assert np.allclose(th.theta(np.zeros(3), VS2), 0.5)


def test_theta_tail():
    lam = np.array([-50.0, 0.0])
    assert np.all(th.theta(lam, VS1) < 2e-22)


def test_theta_frozen_value():
    # v = +1/2, lam = (0, 2): logistic(1)
    val = th.theta(np.array([0.0, 2.0]), VS1)[1]
    assert val == pytest.approx(0.7310585786300049, abs=1e-15)


def test_theta_monotone_in_mass_potential():
    lams = np.linspace(-3, 3, 25)
    vals = [th.theta(np.array([l, 0.7]), VS1)[1] for l in lams]
    assert np.all(np.diff(vals) > 0)


def test_moments_examples():
    assert np.allclose(th.moments(np.zeros(3), VS2), [2.0, 0.0, 0.0])
    big = th.moments(np.array([40.0, 0.0, 0.0]), VS2)
    assert big[0] == pytest.approx(VS2.n, abs=1e-12)


def test_moments_match_enumeration_oracle():
    rng = np.random.default_rng(3)
    for vs in (VS1, VS2):
        for _ in range(50):
            lam = rng.uniform(-2, 2, vs.dim + 1)
            assert np.allclose(th.moments(lam, vs), enumeration_moments(lam, vs),
                               atol=1e-12)


def test_chi_values():
    assert th.chi(0.0) == 0.0
    assert th.chi(0.5) == 0.25
    assert th.chi(0.7310585786300049) == pytest.approx(0.19661193324148185, abs=1e-15)


def test_inverse_at_barycenter_is_zero():
    for vs in (VS1, VS2):
        mid = np.array([vs.n / 2.0] + [0.0] * vs.dim)
        lam = th.inverse_lambda(mid, vs)
        assert np.abs(lam).max() < 1e-12


def test_roundtrip_inverse_of_moments():
    rng = np.random.default_rng(11)
    for vs in (VS1, VS2):
        lam = rng.uniform(-2, 2, (1000, vs.dim + 1))
        rec = th.inverse_lambda(th.moments(lam, vs), vs)
        assert np.abs(rec - lam).max() <= 1e-10


def test_roundtrip_moments_of_inverse():
    rng = np.random.default_rng(12)
    hull = th.conserved_hull(VS2)
    pts = []
    while len(pts) < 200:
        cand = rng.uniform([0, -0.25, -0.25], [4, 0.25, 0.25])
        if hull.margin(cand) > 1e-3:
            pts.append(cand)
    pts = np.array(pts)
    back = th.moments(th.inverse_lambda(pts, VS2), VS2)
    assert np.abs(back - pts).max() <= 1e-12


def test_inverse_rejects_boundary_and_exterior():
    with pytest.raises(th.NotInDomain):
        th.inverse_lambda(np.array([0.0, 0.0]), VS1)     # a vertex of the hull
    with pytest.raises(th.NotInDomain):
        th.inverse_lambda(np.array([VS2.n + 1.0, 0.0, 0.0]), VS2)


def test_in_U_cases():
    ok, m = th.in_U(np.array([1.0, 0.0]), VS1)
    assert ok and m > 0.2
    ok, m = th.in_U(np.array([0.0, 0.0]), VS1)
    assert not ok and m <= 0.0
    ok, _ = th.in_U(np.array([3.0, 0.0]), VS1)
    assert not ok


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(5)
    eps = 1e-6
    for vs in (VS1, VS2):
        for _ in range(20):
            lam = rng.uniform(-2, 2, vs.dim + 1)
            J = th.moments_jacobian(lam, vs)
            Jfd = np.zeros_like(J)
            for b in range(vs.dim + 1):
                e = np.zeros(vs.dim + 1)
                e[b] = eps
                Jfd[:, b] = (th.moments(lam + e, vs) - th.moments(lam - e, vs)) / (2 * eps)
            scale = np.abs(J).max()
            assert np.abs(J - Jfd).max() / scale <= 1e-6


def test_jacobian_positive_definite():
    rng = np.random.default_rng(6)
    for vs in (VS1, VS2):
        for _ in range(20):
            lam = rng.uniform(-4, 4, vs.dim + 1)
            w = np.linalg.eigvalsh(th.moments_jacobian(lam, vs))
            assert w.min() > 0


def test_flux_coefficient_midpoint_and_vacuum_limit():
    mid = np.array([VS2.n / 2.0] + [0.0] * VS2.dim)
    assert np.allclose(th.flux_coefficient(mid, VS2), 0.25, atol=1e-12)
    tiny = th.flux_coefficient(np.array([1e-6, 0.0]), VS1)
    assert np.all(tiny < 1e-6)


def test_flux_coefficient_matches_sampling_oracle():
    # chi(theta_v) should match a Monte Carlo estimate of
    # E[eta(0,v)(1 - eta(e1,v))] under the product measure at (rho, p)
    rng = np.random.default_rng(21)
    tp = np.array([1.3, 0.08])
    lam = th.inverse_lambda(tp, VS1)
    theta = th.theta(lam, VS1)
    n = 200_000
    for a in range(VS1.n):
        x = rng.random(n) < theta[a]
        y = rng.random(n) < theta[a]
        est = float(np.mean(x & ~y))
        se = float(np.std(x & ~y) / np.sqrt(n))
        assert abs(est - th.flux_coefficient(tp, VS1)[a]) <= 3 * se


def test_clamp_to_interior():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    out, moved = th.clamp_to_interior(pts, VS1, margin=1e-6)
    assert moved == 2          # the two boundary points (vertices) move
    m = th.interior_margin(out, VS1)
    assert np.all(m >= 1e-6 - 1e-15)
    assert np.allclose(out[1], [1.0, 0.0])


def test_inverse_respects_warm_start():
    tp = np.array([1.2, -0.1])
    cold = th.inverse_lambda(tp, VS1)
    warm = th.inverse_lambda(tp, VS1, lam0=cold)
    assert np.allclose(cold, warm, atol=1e-12)
