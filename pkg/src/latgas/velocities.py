"""Velocity sets, local conserved quantities, and momentum-preserving collisions.

Velocity components are exact rationals so that the collision condition
v + w = v' + w' is decided without any floating-point tolerance.  Float
views of the set are derived once and cached for the numerical modules.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations

import numpy as np

__all__ = [
    "Velocity",
    "VelocitySet",
    "LocalState",
    "CollisionQuadruple",
    "Violation",
    "validate_velocity_set",
    "conserved_vector",
    "collision_quadruples",
    "apply_collision",
    "collision_rate",
    "linear_invariant_dimension",
    "default_velocity_set",
    "load_velocity_set",
]


def _as_fraction(x) -> Fraction:
    """Coerce ints, strings like '1/4', and exactly-representable floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        f = Fraction(x).limit_denominator(10**9)
        if float(f) != x:
            raise ValueError(f"{x!r} is not a small rational; pass a Fraction or '<p>/<q>' string")
        return f
    raise TypeError(f"cannot interpret {x!r} as a rational velocity component")


@dataclass(frozen=True)
class Velocity:
    """A single lattice velocity with exact rational components."""

    components: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(_as_fraction(c) for c in self.components))
        if len(self.components) < 1:
            raise ValueError("velocity needs at least one component")

    @property
    def dim(self) -> int:
        return len(self.components)

    def flip(self, axis: int) -> "Velocity":
        c = list(self.components)
        c[axis] = -c[axis]
        return Velocity(tuple(c))

    def permute(self, perm: tuple[int, ...]) -> "Velocity":
        return Velocity(tuple(self.components[j] for j in perm))

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.components)

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.components) + ")"


@dataclass(frozen=True)
class CollisionQuadruple:
    """Ordered quadruple (v, w) -> (v_out, w_out), as indices into a VelocitySet."""

    v: int
    w: int
    v_out: int
    w_out: int

    def indices(self) -> tuple[int, int, int, int]:
        return (self.v, self.w, self.v_out, self.w_out)

    def reverse(self) -> "CollisionQuadruple":
        return CollisionQuadruple(self.v_out, self.w_out, self.v, self.w)


@dataclass(frozen=True)
class LocalState:
    """Occupancy bits of one site, one bit per velocity of the owning set."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("occupancies must be 0 or 1")


class VelocitySet:
    """An ordered, duplicate-free set of velocities plus its collision structure.

    Immutable after construction; float/tilde array views are cached lazily.
    """

    def __init__(self, velocities):
        vels = tuple(v if isinstance(v, Velocity) else Velocity(tuple(v)) for v in velocities)
        if not vels:
            raise ValueError("empty velocity set")
        dim = vels[0].dim
        if any(v.dim != dim for v in vels):
            raise ValueError("velocities have mixed dimensions")
        if len(set(vels)) != len(vels):
            raise ValueError("duplicate velocities in set")
        self.dim = dim
        self.velocities = vels
        self._index = {v: i for i, v in enumerate(vels)}
        self.quadruples = _derive_quadruples(vels)
        self._float_array = None
        self._tilde_array = None

    @property
    def n(self) -> int:
        return len(self.velocities)

    def index(self, v: Velocity) -> int:
        return self._index[v]

    def float_array(self) -> np.ndarray:
        """(n, d) float components."""
        if self._float_array is None:
            self._float_array = np.array([v.as_floats() for v in self.velocities], dtype=float)
            self._float_array.setflags(write=False)
        return self._float_array

    def tilde_array(self) -> np.ndarray:
        """(n, d+1) rows (1, v_1, ..., v_d), the weights of the conserved quantities."""
        if self._tilde_array is None:
            va = self.float_array()
            self._tilde_array = np.hstack([np.ones((self.n, 1)), va])
            self._tilde_array.setflags(write=False)
        return self._tilde_array

    def __repr__(self):
        return f"VelocitySet(d={self.dim}, n={self.n}, quadruples={len(self.quadruples)})"


def _derive_quadruples(vels: tuple[Velocity, ...]) -> tuple[CollisionQuadruple, ...]:
    # Non-trivial collisions only: all four slots distinct.  Quadruples sharing a
    # velocity between input and output pair always have rate 0, and quadruples
    # with v == w (or v' == w') are not two-particle exchanges at all.
    n = len(vels)
    out = []
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            s = tuple(a + b for a, b in zip(vels[i].components, vels[j].components))
            for k in range(n):
                if k in (i, j):
                    continue
                for l in range(n):
                    if l in (i, j, k):
                        continue
                    t = tuple(a + b for a, b in zip(vels[k].components, vels[l].components))
                    if s == t:
                        out.append(CollisionQuadruple(i, j, k, l))
    return tuple(out)


@dataclass(frozen=True)
class Violation:
    kind: str        # "missing_reflection" | "missing_permutation" | "speed_bound"
    velocity: Velocity
    message: str


def validate_velocity_set(vs: VelocitySet) -> list[Violation]:
    """Check closure under single-coordinate reflections and coordinate
    permutations (the full symmetry orbit), and the speed bound |v_j| < 1/d.

    Returns a list of violations; an empty list means the set is admissible.
    Violations are data, not exceptions.
    """
    have = set(vs.velocities)
    out: list[Violation] = []
    d = vs.dim
    bound = Fraction(1, d)
    # breadth-first sweep of the symmetry orbit, reporting each absent member
    # once, tagged with the operation that first produced it
    seen: set[Velocity] = set(have)
    frontier = list(vs.velocities)
    while frontier:
        nxt = []
        for v in frontier:
            children = [("missing_reflection", v.flip(axis),
                         f"the axis-{axis} reflection of {v}") for axis in range(d)]
            children += [("missing_permutation", v.permute(perm),
                          f"a coordinate permutation of {v}")
                         for perm in permutations(range(d))]
            for kind, w, how in children:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
                    out.append(Violation(kind, w, f"missing {w}, {how}"))
        frontier = nxt
    for v in vs.velocities:
        for axis, c in enumerate(v.components):
            if abs(c) >= bound:
                out.append(Violation("speed_bound", v,
                                     f"|component {axis}| of {v} is {abs(c)} >= 1/{d}"))
    return out


def conserved_vector(xi, vs: VelocitySet) -> tuple[Fraction, ...]:
    """Exact (I_0, ..., I_d): mass and the d momentum components of one site."""
    bits = xi.bits if isinstance(xi, LocalState) else tuple(xi)
    if len(bits) != vs.n:
        raise ValueError(f"state has {len(bits)} bits, velocity set has {vs.n}")
    mass = Fraction(sum(bits))
    mom = [Fraction(0)] * vs.dim
    for b, v in zip(bits, vs.velocities):
        if b:
            for k in range(vs.dim):
                mom[k] += v.components[k]
    return (mass, *mom)


def collision_quadruples(vs: VelocitySet) -> tuple[CollisionQuadruple, ...]:
    """All non-trivial momentum-preserving quadruples, in lexicographic index order."""
    return vs.quadruples


def collision_rate(xi, q: CollisionQuadruple) -> int:
    """xi(v) xi(w) (1 - xi(v')) (1 - xi(w')), either 0 or 1."""
    bits = xi.bits if isinstance(xi, LocalState) else tuple(xi)
    return bits[q.v] * bits[q.w] * (1 - bits[q.v_out]) * (1 - bits[q.w_out])


def apply_collision(xi, q: CollisionQuadruple) -> LocalState:
    """Exchange occupancy (v, w) -> (v_out, w_out); requires collision_rate == 1."""
    bits = list(xi.bits if isinstance(xi, LocalState) else xi)
    if collision_rate(bits, q) != 1:
        raise ValueError(f"collision {q.indices()} not admissible for bits {tuple(bits)}")
    bits[q.v] = 0
    bits[q.w] = 0
    bits[q.v_out] = 1
    bits[q.w_out] = 1
    return LocalState(tuple(bits))


def linear_invariant_dimension(vs: VelocitySet) -> int:
    """Dimension of {c in R^n : c_v + c_w = c_v' + c_w' for every quadruple}.

    Heuristic check for spurious conserved quantities: the collision dynamics
    conserves every linear functional in this space, which should have
    dimension exactly d+1 (mass plus d momenta).  Only linear invariants are
    examined.
    """
    if not vs.quadruples:
        return vs.n
    rows = []
    for q in vs.quadruples:
        r = [0.0] * vs.n
        r[q.v] += 1.0
        r[q.w] += 1.0
        r[q.v_out] -= 1.0
        r[q.w_out] -= 1.0
        rows.append(r)
    rank = np.linalg.matrix_rank(np.array(rows))
    return vs.n - rank


def default_velocity_set(d: int) -> VelocitySet:
    """Shipped symmetric sets: d=1 -> {±1/2}; d=2 -> {±e_j/4}; d=3 -> {±e_j/6}.

    All satisfy closure and the strict speed bound; for d >= 2 the collision
    set is non-empty.
    """
    if d == 1:
        comps = [(Fraction(-1, 2),), (Fraction(1, 2),)]
    elif d in (2, 3):
        speed = Fraction(1, 2 * d)
        comps = [tuple(s * speed if j == axis else Fraction(0) for j in range(d))
                 for axis in range(d) for s in (-1, 1)]
    else:
        raise ValueError(f"no default velocity set for d={d}")
    comps = sorted(comps)
    return VelocitySet([Velocity(c) for c in comps])


def load_velocity_set(path) -> VelocitySet:
    """Read a velocity set from a text file: one velocity per line, components
    as rationals ('1/4', '-1/4', '0') separated by whitespace; '#' comments.
    """
    vels = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                comps = tuple(Fraction(tok) for tok in line.split())
                vels.append(Velocity(comps))
            except (ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse velocity {line!r}: {exc}") from exc
    return VelocitySet(vels)
