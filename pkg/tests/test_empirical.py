"""Pairings, block/boundary diagnostics, and the energy functional."""
import numpy as np
import pytest

from latgas import measures as ms
from latgas import thermo as th
from latgas.dynamics import BoundaryData, Configuration, build_jump_law
from latgas.empirical import test_function_basis as make_basis
from latgas.empirical import (
    PairingSeries,
    TestFunction,
    boundary_diagnostic,
    boundary_pair,
    energy_estimate,
    pair,
    replacement_diagnostic,
    sine_mode,
)
from latgas.lattice import Lattice
from latgas.velocities import default_velocity_set

VS1 = default_velocity_set(1)
VS2 = default_velocity_set(2)


def full_config(vs, N, d):
    lat = Lattice(N, d)
    return Configuration.from_occupancy(lat, vs, np.ones((lat.nsites, vs.n), np.uint8))


def empty_config(vs, N, d):
    lat = Lattice(N, d)
    return Configuration.empty(lat, vs)


# ---------------------------------------------------------------------------
# test functions


def test_basis_functions_vanish_at_walls():
    for d in (1, 2):
        for H in make_basis(d):
            assert H.vanishing_at_walls
            if d == 1:
                assert abs(H(np.array([[0.0]]))) < 1e-14
                assert abs(H(np.array([[1.0]]))) < 1e-14


def test_basis_size():
    assert len(make_basis(1, m_max=3)) == 3
    assert len(make_basis(2, m_max=3, n_max=2)) == 3 + 3 * 2 * 2


def test_wall_check_rejects_nonvanishing():
    with pytest.raises(ValueError, match="vanish"):
        TestFunction(lambda u: np.ones(u.shape[0]), 1, "one", vanishing_at_walls=True)


def test_sine_mode_derivatives():
    H = sine_mode(2, 1)
    u = np.linspace(0.05, 0.95, 11)[:, None]
    eps = 1e-6
    fd = (H(u + eps) - H(u - eps)) / (2 * eps)
    assert np.allclose(H.du(u, 0), fd, atol=1e-7)
    fd2 = (H(u + eps) - 2 * H(u) + H(u - eps)) / eps ** 2
    assert np.allclose(H.d2u(u, 0), fd2, atol=1e-3)


# ---------------------------------------------------------------------------
# pairings


def test_pair_empty_and_full():
    H = sine_mode(1, 1)
    assert pair(empty_config(VS1, 16, 1), 0, H) == 0.0
    cfg = full_config(VS1, 16, 1)
    ones = TestFunction(lambda u: np.ones(u.shape[0]), 1, "one")
    want = VS1.n * cfg.lattice.nsites / 16.0
    assert pair(cfg, 0, ones) == pytest.approx(want)
    # full symmetric configuration carries zero momentum
    assert pair(cfg, 1, ones) == pytest.approx(0.0, abs=1e-12)


def test_pair_linearity():
    rng = np.random.default_rng(2)
    lat = Lattice(12, 1)
    occ = (rng.random((lat.nsites, 2)) < 0.5).astype(np.uint8)
    cfg = Configuration.from_occupancy(lat, VS1, occ)
    H1, H2 = sine_mode(1, 1), sine_mode(2, 1)
    combo = TestFunction(lambda u: 2.0 * H1(u) - 0.5 * H2(u), 1, "combo")
    got = pair(cfg, 0, combo)
    assert got == pytest.approx(2.0 * pair(cfg, 0, H1) - 0.5 * pair(cfg, 0, H2), abs=1e-12)


def test_pair_mass_bound():
    rng = np.random.default_rng(3)
    H = sine_mode(3, 1)
    lat = Lattice(20, 1)
    for _ in range(20):
        occ = (rng.random((lat.nsites, 2)) < rng.random()).astype(np.uint8)
        cfg = Configuration.from_occupancy(lat, VS1, occ)
        assert abs(pair(cfg, 0, H)) <= VS1.n * 1.0 + 1e-12


def test_pair_clt_against_profile():
    prof = ms.constant_profile(np.array([1.2, 0.05]), 1)
    H = sine_mode(1, 1)
    xs = np.linspace(0, 1, 2001)[:, None]
    target = np.trapezoid(H(xs) * prof(xs)[:, 0], xs[:, 0])
    M, N = 300, 64
    vals = [pair(ms.sample_product(prof, N, VS1, np.random.default_rng((7, r))), 0, H)
            for r in range(M)]
    se = np.std(vals, ddof=1) / np.sqrt(M)
    assert abs(np.mean(vals) - target) <= 3 * se + 5.0 / N ** 2


def test_boundary_pair_wall_slice():
    cfg = full_config(VS2, 8, 2)
    ones = TestFunction(lambda u: np.ones(u.shape[0]), 2, "one")
    # 8 transverse sites, I_0 = 4 each, divided by N^{d-1} = 8
    assert boundary_pair(cfg, 0, ones, 1) == pytest.approx(4.0)
    assert boundary_pair(cfg, 0, ones, 7) == pytest.approx(4.0)
    assert boundary_pair(empty_config(VS2, 8, 2), 0, ones, 1) == 0.0
    with pytest.raises(ValueError):
        boundary_pair(cfg, 0, ones, 3)


def test_pairing_series_rows():
    s = PairingSeries(k=0, H_id="sin(1.pi.u1)", N=32, seed=5)
    s.append(0.1, 0.5)
    rows = list(s.rows())
    assert rows == [(0.1, 0, "sin(1.pi.u1)", 0.5, 32, 5)]


# ---------------------------------------------------------------------------
# replacement diagnostic


def test_replacement_zero_on_deterministic_blocks():
    law = build_jump_law(VS1)
    v_full, _ = replacement_diagnostic(full_config(VS1, 64, 1), 2, 1, 0, law)
    v_empty, _ = replacement_diagnostic(empty_config(VS1, 64, 1), 2, 1, 0, law)
    # chi vanishes at occupancy 0 and 1 (the full block is clamped into U by
    # a margin ~1e-9, leaving a comparable crumb)
    assert v_empty <= 1e-8
    assert v_full <= 1e-8


def test_replacement_matches_direct_loop():
    # independent O(N ell) reference implementation
    law = build_jump_law(VS1)
    prof = ms.constant_profile(np.array([1.1, 0.08]), 1)
    cfg = ms.sample_product(prof, 48, VS1, np.random.default_rng(9))
    ell, j, k = 2, 1, 1
    got, _ = replacement_diagnostic(cfg, ell, j, k, law)

    occ = cfg.occupancy_matrix().astype(float)
    lat = cfg.lattice
    va = VS1.float_array()
    R = law.range
    lo, hi = R, lat.nsites - 1 - R
    tv = VS1.tilde_array()
    vals = []
    for c in range(lo + ell, hi - ell + 1):
        cur = 0.0
        Ib = np.zeros(2)
        for y in range(c - ell, c + ell + 1):
            for a in range(2):
                vk = tv[a, k]
                for z, p in law.support(a):
                    t = y + z[0]
                    cur += vk * p * z[0] * occ[y, a] * (1 - occ[t, a])
            Ib += occ[y] @ tv
        cur /= (2 * ell + 1)
        Ib /= (2 * ell + 1)
        lam = th.inverse_lambda(th.clamp_to_interior(Ib, VS1)[0], VS1, check_domain=False)
        g = th.chi(th.theta(lam, VS1))
        pred = float(g @ (va[:, 0] * tv[:, k]))
        vals.append(abs(cur - pred))
    assert got == pytest.approx(np.mean(vals), abs=1e-12)


def test_replacement_decreases_with_block_size():
    # equilibrium samples: the block average concentrates, so the gap shrinks
    law = build_jump_law(VS1)
    prof = ms.constant_profile(np.array([1.0, 0.0]), 1)
    means = {}
    for ell in (2, 4, 8):
        vals = []
        for r in range(24):
            cfg = ms.sample_product(prof, 128, VS1, np.random.default_rng((41, ell, r)))
            v, _ = replacement_diagnostic(cfg, ell, 1, 0, law)
            vals.append(v)
        means[ell] = np.mean(vals)
    assert means[2] > means[4] > means[8]


# ---------------------------------------------------------------------------
# boundary diagnostics


def test_boundary_diagnostic_zero_weight():
    cfg = full_config(VS1, 16, 1)
    bd = BoundaryData.constant(VS1, [0.6, 0.6], [0.4, 0.4])
    z = boundary_diagnostic(cfg, 0, "V-", bd, G=lambda ut: np.zeros(ut.shape[0]))
    assert z == 0.0


def test_boundary_diagnostic_centering():
    # sampled from the matching product measure, E[V-] = 0
    lam = np.array([0.25, 0.15])
    theta = th.theta(lam, VS1)
    bd = BoundaryData.constant(VS1, list(theta), list(theta))
    prof = ms.constant_profile(th.moments(lam, VS1), 1)
    M = 600
    vals = [boundary_diagnostic(
        ms.sample_product(prof, 16, VS1, np.random.default_rng((17, r))), 0, "V-", bd)
        for r in range(M)]
    se = np.std(vals, ddof=1) / np.sqrt(M)
    assert abs(np.mean(vals)) <= 3 * se


def test_boundary_diagnostic_block_variants():
    cfg = full_config(VS1, 32, 1)
    bd = BoundaryData.constant(VS1, [0.6, 0.6], [0.4, 0.4])
    # deterministic full lattice: wall equals the block average exactly
    assert boundary_diagnostic(cfg, 0, "V2_alpha", bd, eps=0.25) == pytest.approx(0.0)
    assert boundary_diagnostic(cfg, 0, "V2_beta", bd, eps=0.25) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        boundary_diagnostic(cfg, 0, "V2_alpha", bd, eps=0.01)   # eps N < 2


# ---------------------------------------------------------------------------
# energy


def test_energy_constant_field_is_zero():
    times = [0.0, 0.5, 1.0]
    f = np.ones((3, 65))
    assert energy_estimate(times, f) == 0.0


def test_energy_sine_matches_analytic():
    xs = np.linspace(0, 1, 129)
    f = np.sin(np.pi * xs)
    times = [0.0, 1.0]
    got = energy_estimate(times, np.stack([f, f]))
    assert got == pytest.approx(np.pi ** 2 / 2, rel=1e-3)


def test_energy_refinement_order():
    times = [0.0, 1.0]
    errs = []
    for n in (33, 65):
        xs = np.linspace(0, 1, n)
        f = np.sin(np.pi * xs)
        got = energy_estimate(times, np.stack([f, f]))
        errs.append(abs(got - np.pi ** 2 / 2))
    assert errs[0] / errs[1] > 3.0


def test_energy_2d_gradient():
    xs = np.linspace(0, 1, 97)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    f = np.sin(np.pi * X) * np.cos(2 * np.pi * Y)
    got = energy_estimate([0.0, 1.0], np.stack([f, f]))
    want = np.pi ** 2 / 4 + 4 * np.pi ** 2 / 4   # int ||grad||^2 over the square
    assert got == pytest.approx(want, rel=2e-3)


def test_pair_additive_over_disjoint_particle_sets():
    rng = np.random.default_rng(5)
    lat = Lattice(16, 1)
    a = (rng.random((lat.nsites, 2)) < 0.4).astype(np.uint8)
    b = ((rng.random((lat.nsites, 2)) < 0.4) & (a == 0)).astype(np.uint8)
    H = sine_mode(2, 1)
    for k in (0, 1):
        lhs = pair(Configuration.from_occupancy(lat, VS1, a | b), k, H)
        rhs = pair(Configuration.from_occupancy(lat, VS1, a), k, H) + \
            pair(Configuration.from_occupancy(lat, VS1, b), k, H)
        assert lhs == pytest.approx(rhs, abs=1e-12)
