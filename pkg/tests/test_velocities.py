"""Velocity sets, conservation, and the collision structure.

The collision list is checked against an independent brute-force enumeration
over all of V^4 written here from the rate formula alone.
"""
from fractions import Fraction

import numpy as np
import pytest

from latgas.velocities import (
    LocalState,
    Velocity,
    VelocitySet,
    apply_collision,
    collision_quadruples,
    collision_rate,
    conserved_vector,
    default_velocity_set,
    linear_invariant_dimension,
    load_velocity_set,
    validate_velocity_set,
)

F = Fraction


def brute_force_quadruples(vs):
    """Oracle: every ordered quadruple whose rate can be nonzero for some state
    and whose exchange is a genuine two-in two-out momentum-preserving move."""
    out = []
    n = vs.n
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    if len({i, j, k, l}) != 4:
                        continue
                    vi, vj = vs.velocities[i], vs.velocities[j]
                    vk, vl = vs.velocities[k], vs.velocities[l]
                    si = tuple(a + b for a, b in zip(vi.components, vj.components))
                    so = tuple(a + b for a, b in zip(vk.components, vl.components))
                    if si == so:
                        out.append((i, j, k, l))
    return out


@pytest.mark.parametrize("d,expected_count", [(1, 0), (2, 8), (3, 24)])
def test_quadruples_match_brute_force(d, expected_count):
    vs = default_velocity_set(d)
    got = sorted(q.indices() for q in collision_quadruples(vs))
    want = sorted(brute_force_quadruples(vs))
    assert got == want
    assert len(got) == expected_count


def test_defaults_are_admissible():
    for d in (1, 2, 3):
        vs = default_velocity_set(d)
        assert validate_velocity_set(vs) == []
        for v in vs.velocities:
            for c in v.components:
                assert abs(c) < F(1, d)


def test_validate_reports_missing_closure():
    vs = VelocitySet([Velocity((F(1, 4), F(0)))])
    bad = validate_velocity_set(vs)
    missing = {v.velocity.components for v in bad if v.kind.startswith("missing")}
    assert (F(-1, 4), F(0)) in missing
    assert (F(0), F(1, 4)) in missing
    assert (F(0), F(-1, 4)) in missing


def test_validate_speed_bound():
    vs = VelocitySet([Velocity((F(-1),)), Velocity((F(1),))])
    bad = validate_velocity_set(vs)
    assert any(v.kind == "speed_bound" for v in bad)


def test_symmetric_pair_is_ok():
    vs = VelocitySet([Velocity((F(-1, 2),)), Velocity((F(1, 2),))])
    assert validate_velocity_set(vs) == []


def test_conserved_vector_examples():
    vs = default_velocity_set(1)
    assert conserved_vector(LocalState((0, 0)), vs) == (0, 0)
    # full symmetric state: momenta cancel exactly
    assert conserved_vector(LocalState((1, 1)), vs) == (2, 0)
    # velocities are sorted ascending: index 1 is +1/2
    assert conserved_vector(LocalState((0, 1)), vs) == (1, F(1, 2))
    vs2 = default_velocity_set(2)
    full = conserved_vector(LocalState((1,) * 4), vs2)
    assert full == (4, 0, 0)
    with pytest.raises(ValueError):
        conserved_vector(LocalState((0,)), vs2)


def test_collision_rate_cases():
    vs = default_velocity_set(2)
    q = vs.quadruples[0]
    empty = LocalState((0,) * 4)
    fullst = LocalState((1,) * 4)
    assert collision_rate(empty, q) == 0
    assert collision_rate(fullst, q) == 0
    bits = [0] * 4
    bits[q.v] = 1
    bits[q.w] = 1
    assert collision_rate(LocalState(tuple(bits)), q) == 1


def test_apply_collision_swaps_and_conserves():
    vs = default_velocity_set(2)
    for q in vs.quadruples:
        bits = [0] * vs.n
        bits[q.v] = 1
        bits[q.w] = 1
        xi = LocalState(tuple(bits))
        out = apply_collision(xi, q)
        assert out.bits[q.v] == 0 and out.bits[q.w] == 0
        assert out.bits[q.v_out] == 1 and out.bits[q.w_out] == 1
        assert conserved_vector(out, vs) == conserved_vector(xi, vs)
        # the reverse quadruple undoes the exchange
        back = apply_collision(out, q.reverse())
        assert back == xi


def test_apply_collision_exact_conservation_random_states():
    vs = default_velocity_set(3)
    rng = np.random.default_rng(0)
    for _ in range(200):
        bits = tuple(int(b) for b in rng.integers(0, 2, vs.n))
        xi = LocalState(bits)
        for q in vs.quadruples:
            if collision_rate(xi, q):
                out = apply_collision(xi, q)
                assert conserved_vector(out, vs) == conserved_vector(xi, vs)


def test_apply_collision_rejects_inadmissible():
    vs = default_velocity_set(2)
    q = vs.quadruples[0]
    with pytest.raises(ValueError):
        apply_collision(LocalState((0,) * 4), q)


def test_quadruple_list_closed_under_swaps():
    for d in (2, 3):
        vs = default_velocity_set(d)
        idx = {q.indices() for q in vs.quadruples}
        for (i, j, k, l) in idx:
            assert (j, i, k, l) in idx
            assert (k, l, i, j) in idx


def test_trivial_quadruples_excluded():
    vs = default_velocity_set(2)
    for q in vs.quadruples:
        assert len(set(q.indices())) == 4


def test_linear_invariant_dimension_is_mass_plus_momentum():
    for d in (1, 2, 3):
        vs = default_velocity_set(d)
        assert linear_invariant_dimension(vs) == d + 1


def test_duplicate_velocities_rejected():
    with pytest.raises(ValueError):
        VelocitySet([Velocity((F(1, 2),)), Velocity((F(1, 2),))])


def test_load_velocity_set(tmp_path):
    p = tmp_path / "vels.txt"
    p.write_text("# d=2 default\n1/4 0\n-1/4 0\n0 1/4\n0 -1/4\n")
    vs = load_velocity_set(p)
    assert vs.dim == 2 and vs.n == 4
    assert validate_velocity_set(vs) == []
    bad = tmp_path / "bad.txt"
    bad.write_text("1/4 oops\n")
    with pytest.raises(ValueError, match="bad.txt:1"):
        load_velocity_set(bad)


def test_float_components_must_be_exact():
    assert Velocity((0.25,)).components == (F(1, 4),)
    with pytest.raises(ValueError):
        Velocity((0.1 + 0.2,))   # 0.30000000000000004 is not a small rational


def test_quadruple_momentum_identity():
    for d in (2, 3):
        vs = default_velocity_set(d)
        for q in vs.quadruples:
            vin = [vs.velocities[q.v], vs.velocities[q.w]]
            vout = [vs.velocities[q.v_out], vs.velocities[q.w_out]]
            si = tuple(a + b for a, b in zip(vin[0].components, vin[1].components))
            so = tuple(a + b for a, b in zip(vout[0].components, vout[1].components))
            assert si == so
