"""Product measures with spatial profiles, and exact canonical ensembles.

Sampling draws independent Bernoulli occupancies with means
theta_v(Lambda(profile(x/N))).  The canonical machinery enumerates every
block configuration (guarded to 2^24 states) and matches the conserved
block average with exact integer arithmetic, so the equivalence-of-ensembles
gap can be computed to machine precision on small blocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np

from . import thermo
from .exprs import make_expr_function
from .lattice import Lattice
from .velocities import VelocitySet

__all__ = [
    "SpatialProfile",
    "constant_profile",
    "linear_profile",
    "expression_profile",
    "profile_from_config",
    "validate_profile",
    "sample_product",
    "sample_associated",
    "BlockIndex",
    "TooLarge",
    "EmptyHyperplane",
    "block_sites",
    "enumerate_block_states",
    "canonical_expectation",
    "attainable_block_values",
    "nearest_attainable",
    "EnsemblesGap",
    "ensembles_gap",
]

ENUMERATION_GUARD_BITS = 24


class TooLarge(ValueError):
    """Block enumeration would exceed the 2^24-state guard."""


class EmptyHyperplane(ValueError):
    """No block configuration attains the requested conserved value."""


# ---------------------------------------------------------------------------
# spatial profiles


class SpatialProfile:
    """Macroscopic field u in [0,1] x T^{d-1} -> (rho, p) in U."""

    def __init__(self, kind: str, evaluator, d: int, description: str = ""):
        self.kind = kind
        self.d = d
        self._evaluator = evaluator
        self.description = description or kind

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Evaluate at points u of shape (m, d); returns (m, d+1)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = self._evaluator(u)
        return np.asarray(out, dtype=float)

    def __repr__(self):
        return f"SpatialProfile({self.description})"


def constant_profile(tp, d: int) -> SpatialProfile:
    vec = np.asarray(thermo._tp_array(tp), dtype=float)

    def ev(u):
        return np.broadcast_to(vec, (u.shape[0], vec.size)).copy()

    return SpatialProfile("constant", ev, d, f"constant {vec}")


def linear_profile(a, b, d: int) -> SpatialProfile:
    """Linear interpolation in u_1 between the wall values a (u_1=0) and b (u_1=1)."""
    a = np.asarray(thermo._tp_array(a), dtype=float)
    b = np.asarray(thermo._tp_array(b), dtype=float)

    def ev(u):
        s = u[:, :1]
        return a[None, :] * (1.0 - s) + b[None, :] * s

    return SpatialProfile("linear", ev, d, "linear in u1")


def expression_profile(exprs, d: int) -> SpatialProfile:
    """One expression per component (rho, p_1..p_d) in the variables u1..ud."""
    names = tuple(f"u{j + 1}" for j in range(d))
    fns = [make_expr_function(e, names) for e in exprs]
    if len(fns) != d + 1:
        raise ValueError(f"need {d + 1} component expressions, got {len(fns)}")

    def ev(u):
        vars = {names[j]: u[:, j] for j in range(d)}
        cols = [np.broadcast_to(np.asarray(f(**vars), dtype=float), (u.shape[0],))
                for f in fns]
        return np.stack(cols, axis=1)

    return SpatialProfile("expression", ev, d, "; ".join(exprs))


def profile_from_config(cfg, d: int) -> SpatialProfile:
    """Profiles declared as {"kind": "constant"|"linear"|"expression", ...}."""
    kind = cfg["kind"]
    if kind == "constant":
        return constant_profile(np.asarray(cfg["value"], dtype=float), d)
    if kind == "linear":
        return linear_profile(np.asarray(cfg["a"], dtype=float),
                              np.asarray(cfg["b"], dtype=float), d)
    if kind == "expression":
        return expression_profile(list(cfg["components"]), d)
    raise ValueError(f"unknown profile kind {kind!r}")


def validate_profile(profile: SpatialProfile, vs: VelocitySet,
                     margin: float = thermo.INTERIOR_MARGIN, grid_n: int = 33):
    """Check profile values stay in the margin-shrunk interior of U on a grid.

    Returns the worst margin found; raises NotInDomain when it dips below margin.
    """
    axes = [np.linspace(0.0, 1.0, grid_n)] + [np.linspace(0.0, 1.0, grid_n, endpoint=False)
                                              for _ in range(profile.d - 1)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = profile(grid)
    m = thermo.interior_margin(vals, vs)
    worst = float(np.min(m))
    if worst <= margin:
        i = int(np.argmin(m))
        raise thermo.NotInDomain(
            f"profile leaves U at u={grid[i]} (value {vals[i]}, margin {worst:.3e})")
    return worst


# ---------------------------------------------------------------------------
# sampling


def sample_product(profile: SpatialProfile, N: int, vs: VelocitySet,
                   rng: np.random.Generator):
    """Independent Bernoulli occupancies with site means theta_v(Lambda(profile(x/N)))."""
    from .dynamics import Configuration

    lat = Lattice(N, profile.d)
    tps = profile(lat.macro_coords())
    lam = thermo.inverse_lambda(tps, vs)
    th = thermo.theta(lam, vs)
    occ = (rng.random((lat.nsites, vs.n)) < th).astype(np.uint8)
    return Configuration.from_occupancy(lat, vs, occ)


def sample_associated(rho0, p0, N: int, vs: VelocitySet, rng: np.random.Generator):
    """Product measure associated to the initial density/momentum profiles.

    rho0 and p0 may be callables of u (vectorized) or a ready SpatialProfile
    in which case p0 is ignored.
    """
    if isinstance(rho0, SpatialProfile):
        return sample_product(rho0, N, vs, rng)
    d = vs.dim

    def ev(u):
        r = np.asarray(rho0(u), dtype=float).reshape(-1, 1)
        pm = np.asarray(p0(u), dtype=float)
        if pm.ndim == 1:
            pm = pm.reshape(-1, 1)
        return np.hstack([r, pm])

    return sample_product(SpatialProfile("callable", ev, d), N, vs, rng)


# ---------------------------------------------------------------------------
# canonical ensembles on blocks Lambda_L = {-L..L}^d


def block_sites(L: int, d: int) -> np.ndarray:
    """Coordinates of the block {-L..L}^d, lexicographic, shape ((2L+1)^d, d)."""
    ax = np.arange(-L, L + 1)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _guard_bits(nbits: int):
    if nbits > ENUMERATION_GUARD_BITS:
        raise TooLarge(f"{nbits} occupancy bits exceed the 2^{ENUMERATION_GUARD_BITS} guard")


def _bit_matrix(nbits: int, lo: int, hi: int) -> np.ndarray:
    """Bits of the state integers lo..hi-1; bit k = (s >> k) & 1."""
    s = np.arange(lo, hi, dtype=np.int64)
    return ((s[:, None] >> np.arange(nbits)) & 1).astype(np.uint8)


def enumerate_block_states(L: int, vs: VelocitySet, d: int = 1):
    """All 2^{|Lambda_L| |V|} block configurations in stable integer order.

    Yields (nsites, nvel) uint8 arrays; bit k of the state integer is
    (site k // nvel, velocity k % nvel), matching the snapshot layout.
    """
    nsites = (2 * L + 1) ** d
    nbits = nsites * vs.n
    _guard_bits(nbits)
    for lo in range(0, 2 ** nbits, 2 ** 20):
        hi = min(lo + 2 ** 20, 2 ** nbits)
        chunk = _bit_matrix(nbits, lo, hi).reshape(hi - lo, nsites, vs.n)
        for row in chunk:
            yield row


@dataclass(frozen=True)
class BlockIndex:
    """A conserved block average i in V_L, stored exactly."""

    L: int
    i: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "i", tuple(Fraction(c) for c in self.i))

    @property
    def vec(self) -> np.ndarray:
        return np.array([float(c) for c in self.i])


def _int_weights(vs: VelocitySet):
    """Per-bit integer conserved weights and the common denominator."""
    den = lcm(*[c.denominator for v in vs.velocities for c in v.components], 1)
    w = np.zeros((vs.n, vs.dim + 1), dtype=np.int64)
    for a, v in enumerate(vs.velocities):
        w[a, 0] = den
        for k, c in enumerate(v.components):
            w[a, k + 1] = int(c * den)
    return w, den


def _target_ints(i, L: int, vs: VelocitySet, d: int, den: int):
    """Block totals |Lambda_L| * i scaled by den; None if not integral (unattainable)."""
    i = i.i if isinstance(i, BlockIndex) else tuple(Fraction(c) for c in i)
    if len(i) != vs.dim + 1:
        raise ValueError(f"conserved value needs {vs.dim + 1} components")
    nsites = (2 * L + 1) ** d
    tot = []
    for c in i:
        t = Fraction(c) * nsites * den
        if t.denominator != 1:
            return None
        tot.append(int(t))
    return np.array(tot, dtype=np.int64)


def _matching_states(L: int, i, vs: VelocitySet, d: int):
    """Yield (bits chunk (m, nsites, nvel)) of states with block average i."""
    nsites = (2 * L + 1) ** d
    nbits = nsites * vs.n
    _guard_bits(nbits)
    w, den = _int_weights(vs)
    target = _target_ints(i, L, vs, d, den)
    if target is None:
        return
    wbits = np.tile(w, (nsites, 1))          # (nbits, d+1), site-major bit order
    for lo in range(0, 2 ** nbits, 2 ** 20):
        hi = min(lo + 2 ** 20, 2 ** nbits)
        bits = _bit_matrix(nbits, lo, hi)
        tots = bits.astype(np.int64) @ wbits
        mask = np.all(tots == target, axis=1)
        if mask.any():
            yield bits[mask].reshape(-1, nsites, vs.n)


def canonical_expectation(f, L: int, i, vs: VelocitySet, d: int = 1,
                          vectorized: bool = False) -> float:
    """Average of f under the uniform measure on {I^L(0) = i}.

    f takes a (nsites, nvel) uint8 block (or the full (m, nsites, nvel) stack
    when vectorized=True) and returns float(s).  Raises EmptyHyperplane if no
    configuration attains i.
    """
    total = 0.0
    count = 0
    for chunk in _matching_states(L, i, vs, d):
        count += len(chunk)
        if vectorized:
            total += float(np.sum(f(chunk)))
        else:
            total += sum(float(f(row)) for row in chunk)
    if count == 0:
        raise EmptyHyperplane(f"no block configuration with I^{L}(0) = {i}")
    return total / count


def attainable_block_values(L: int, vs: VelocitySet, d: int = 1) -> list[BlockIndex]:
    """The set V_L of attainable conserved block averages, exact."""
    nsites = (2 * L + 1) ** d
    nbits = nsites * vs.n
    _guard_bits(nbits)
    w, den = _int_weights(vs)
    wbits = np.tile(w, (nsites, 1))
    seen = set()
    for lo in range(0, 2 ** nbits, 2 ** 20):
        hi = min(lo + 2 ** 20, 2 ** nbits)
        tots = _bit_matrix(nbits, lo, hi).astype(np.int64) @ wbits
        for row in np.unique(tots, axis=0):
            seen.add(tuple(int(c) for c in row))
    out = []
    for row in sorted(seen):
        out.append(BlockIndex(L, tuple(Fraction(c, nsites * den) for c in row)))
    return out


def nearest_attainable(L: int, vs: VelocitySet, target, d: int = 1) -> BlockIndex:
    """The attainable block average closest (euclidean) to target."""
    target = np.asarray(thermo._tp_array(target), dtype=float)
    vals = attainable_block_values(L, vs, d)
    dist = [np.linalg.norm(b.vec - target) for b in vals]
    return vals[int(np.argmin(dist))]


# ---------------------------------------------------------------------------
# equivalence of ensembles


@dataclass
class EnsemblesGap:
    gap: float                 # |E_grand[f] - E_canonical[f]|
    bound_rhs: float           # <f;f>^{1/2} / |Lambda_L|
    empirical_constant: float  # gap * |Lambda_L| / <f;f>^{1/2}
    e_canonical: float
    e_grand: float
    var_f: float


def _center_block_index(L: int, ell: int, d: int) -> np.ndarray:
    """Site indices of the centered Lambda_ell inside Lambda_L (lexicographic)."""
    big = block_sites(L, d)
    lut = {tuple(c): k for k, c in enumerate(big)}
    return np.array([lut[tuple(c)] for c in block_sites(ell, d)], dtype=int)


def ensembles_gap(f, ell: int, L: int, i, vs: VelocitySet, d: int = 1,
                  vectorized: bool = False) -> EnsemblesGap:
    """Canonical-vs-grand-canonical gap for an observable f on Lambda_ell.

    The canonical side projects the uniform measure on {I^L(0) = i} to the
    centered Lambda_ell; the grand canonical side is the product measure at
    Lambda(i).  f takes a (nsites_ell, nvel) uint8 block.
    """
    if ell > L:
        raise ValueError("need Lambda_ell inside Lambda_L")
    sub = _center_block_index(L, ell, d)

    if vectorized:
        e_can = canonical_expectation(lambda c: f(c[:, sub, :]), L, i, vs, d, vectorized=True)
    else:
        e_can = canonical_expectation(lambda c: f(c[sub, :]), L, i, vs, d)

    ivec = i.vec if isinstance(i, BlockIndex) else np.array([float(Fraction(c)) for c in i])
    lam = thermo.inverse_lambda(ivec, vs)      # NotInDomain if i is not interior
    th = thermo.theta(lam, vs)

    nsub = (2 * ell + 1) ** d
    nbits = nsub * vs.n
    _guard_bits(nbits)
    probs_one = np.tile(th, nsub)
    e_f = 0.0
    e_f2 = 0.0
    for lo in range(0, 2 ** nbits, 2 ** 20):
        hi = min(lo + 2 ** 20, 2 ** nbits)
        bits = _bit_matrix(nbits, lo, hi)
        wts = np.prod(np.where(bits == 1, probs_one, 1.0 - probs_one), axis=1)
        blocks = bits.reshape(-1, nsub, vs.n)
        if vectorized:
            vals = np.asarray(f(blocks), dtype=float)
        else:
            vals = np.array([float(f(b)) for b in blocks])
        e_f += float(wts @ vals)
        e_f2 += float(wts @ vals ** 2)
    var_f = max(e_f2 - e_f ** 2, 0.0)
    vol_L = (2 * L + 1) ** d
    gap = abs(e_f - e_can)
    sd = np.sqrt(var_f)
    return EnsemblesGap(
        gap=gap,
        bound_rhs=sd / vol_L,
        empirical_constant=(gap * vol_L / sd) if sd > 0 else np.nan,
        e_canonical=e_can,
        e_grand=e_f,
        var_f=var_f,
    )
