"""Event-driven continuous-time simulator for the boundary-driven lattice gas.

The generator is N^2 (boundary flips + on-site collisions + weakly
asymmetric exclusion) on the slab {1..N-1} x (Z/NZ)^{d-1}; all rates carry
the diffusive N^2 factor explicitly so simulated time is macroscopic.

Sampling is exact Gillespie over a two-level rate index: per-class Kahan
totals at the root, a Fenwick tree of per-site subtotals per class, and
on-the-fly enumeration of the local events at the chosen site.  An event
touches O(range * |V|) cached site rates, each a log-size tree update.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exprs import make_expr_function
from .lattice import Lattice
from .velocities import LocalState, VelocitySet

__all__ = [
    "ZeroTotalRate",
    "JumpLaw",
    "build_jump_law",
    "BoundaryData",
    "Configuration",
    "RateIndex",
    "Simulator",
    "exclusion_rate",
    "boundary_flip_rate",
    "step",
    "simulate",
    "save_snapshot",
    "load_snapshot",
    "snapshot_debug_json",
]


class ZeroTotalRate(RuntimeError):
    """All rates vanished; only possible for degenerate boundary data."""


# ---------------------------------------------------------------------------
# jump law


class JumpLaw:
    """Finite-range single-particle law p(z, v) with mean exactly v.

    entries[v_index] is a list of (z tuple, Fraction probability).  The full
    jump kernel of the process is P_N(z, v) = 1/2 on each +-e_j plus p(z,v)/N.
    """

    def __init__(self, vs: VelocitySet, entries: dict):
        self.vs = vs
        d = vs.dim
        norm = {}
        for a in range(vs.n):
            items = [(tuple(int(c) for c in z), Fraction(p)) for z, p in entries[a]]
            if sum(p for _, p in items) != 1:
                raise ValueError(f"jump law for velocity {a} does not sum to 1")
            for k in range(d):
                mean_k = sum(Fraction(z[k]) * p for z, p in items)
                if mean_k != vs.velocities[a].components[k]:
                    raise ValueError(
                        f"jump law for velocity {vs.velocities[a]} has mean component "
                        f"{k} equal to {mean_k}")
            if any(p < 0 for _, p in items):
                raise ValueError("negative jump probability")
            for j in range(d):
                for s in (1, -1):
                    e = tuple(s if q == j else 0 for q in range(d))
                    if not any(z == e and p > 0 for z, p in items):
                        raise ValueError(
                            f"jump law for velocity {vs.velocities[a]} vanishes on {e}; "
                            "irreducibility requires strictly positive nearest-neighbor rates")
            norm[a] = items
        self.entries = norm
        self.range = max(max(abs(c) for c in z) for items in norm.values() for z, _ in items)

    def support(self, a: int):
        """[(z, float prob)] for velocity index a."""
        return [(z, float(p)) for z, p in self.entries[a]]

    def prob(self, a: int, z) -> float:
        z = tuple(int(c) for c in z)
        for zz, p in self.entries[a]:
            if zz == z:
                return float(p)
        return 0.0


def jump_law_from_config(vs: VelocitySet, spec) -> JumpLaw:
    """Jump law declared in config: one entry list per velocity (set order),
    each item [z_1..z_d, "p/q"].  Probabilities are exact rationals so the
    mean-velocity identity is checked without tolerance."""
    if len(spec) != vs.n:
        raise ValueError(f"jump law needs {vs.n} velocity entries, got {len(spec)}")
    entries = {}
    for a, items in enumerate(spec):
        entries[a] = [(tuple(int(c) for c in item[:-1]), Fraction(str(item[-1])))
                      for item in items]
    return JumpLaw(vs, entries)


def build_jump_law(vs: VelocitySet) -> JumpLaw:
    """Default construction p(+-e_j, v) = (1 +- d v_j) / (2d); mean exactly v.

    Requires the speed bound |v_j| < 1/d so all entries are positive.
    """
    d = vs.dim
    entries = {}
    for a, v in enumerate(vs.velocities):
        items = []
        for j in range(d):
            if abs(v.components[j]) >= Fraction(1, d):
                raise ValueError(f"|v_{j}| >= 1/d for {v}; no positive jump law exists")
            for s in (1, -1):
                z = tuple(s if q == j else 0 for q in range(d))
                items.append((z, Fraction(1, 2 * d) * (1 + s * d * v.components[j])))
        entries[a] = items
    return JumpLaw(vs, entries)


# ---------------------------------------------------------------------------
# boundary data


def _as_wall_function(spec, d: int):
    """Accept a constant, an expression in the transverse coords, or a callable."""
    names = tuple(f"u{j + 2}" for j in range(d - 1))
    if isinstance(spec, str):
        f = make_expr_function(spec, names)

        def g(ut):
            vars = {names[j]: ut[:, j] for j in range(d - 1)}
            return np.broadcast_to(np.asarray(f(**vars), dtype=float), (ut.shape[0],)).copy()

        return g
    if callable(spec):
        return lambda ut: np.broadcast_to(np.asarray(spec(ut), dtype=float), (ut.shape[0],)).copy()
    val = float(spec)
    return lambda ut: np.full(ut.shape[0], val)


class BoundaryData:
    """Reservoir densities alpha_v (wall x_1=1) and beta_v (wall x_1=N-1).

    Each entry is a constant, an expression in u2..ud, or a callable of the
    transverse macro coordinates; values must stay in a compact subset of
    (0,1).
    """

    def __init__(self, vs: VelocitySet, alpha, beta, compact_margin: float = 1e-8):
        if len(alpha) != vs.n or len(beta) != vs.n:
            raise ValueError(f"need one alpha and one beta per velocity ({vs.n})")
        self.vs = vs
        self.compact_margin = compact_margin
        self._alpha = [_as_wall_function(a, vs.dim) for a in alpha]
        self._beta = [_as_wall_function(b, vs.dim) for b in beta]
        # enforce the compactness invariant up front on a probe grid
        if vs.dim == 1:
            probe = np.zeros((1, 0))
        else:
            ax = [np.linspace(0, 1, 17, endpoint=False)] * (vs.dim - 1)
            probe = np.stack([g.ravel() for g in np.meshgrid(*ax, indexing="ij")], axis=1)
        self.alpha(probe)
        self.beta(probe)

    def _eval(self, fns, ut) -> np.ndarray:
        ut = np.atleast_2d(np.asarray(ut, dtype=float))
        vals = np.stack([f(ut) for f in fns], axis=1)   # (m, nvel)
        lo, hi = vals.min(), vals.max()
        if lo <= self.compact_margin or hi >= 1.0 - self.compact_margin:
            raise ValueError(f"reservoir density {lo if lo <= self.compact_margin else hi} "
                             "outside a compact subset of (0,1)")
        return vals

    def alpha(self, ut) -> np.ndarray:
        """(m, nvel) reservoir densities at the x_1 = 0 wall."""
        return self._eval(self._alpha, ut)

    def beta(self, ut) -> np.ndarray:
        return self._eval(self._beta, ut)

    def wall_data(self, side: int, ut) -> np.ndarray:
        """Hydrodynamic Dirichlet data: sum_v ~v alpha_v (side 0) or beta_v (side 1)."""
        dens = self.alpha(ut) if side == 0 else self.beta(ut)
        return dens @ self.vs.tilde_array()

    @classmethod
    def constant(cls, vs: VelocitySet, alpha, beta) -> "BoundaryData":
        return cls(vs, list(alpha), list(beta))


# ---------------------------------------------------------------------------
# configuration


class Configuration:
    """Occupancy eta(x, v) in {0,1} over the slab, plus per-velocity counts.

    Storage is a flat bytearray in (site-major, velocity-minor) order; this
    is also the snapshot bit order and the generator-matrix state encoding.
    """

    def __init__(self, lattice: Lattice, vs: VelocitySet, occ: bytearray):
        if len(occ) != lattice.nsites * vs.n:
            raise ValueError("occupancy length mismatch")
        self.lattice = lattice
        self.vs = vs
        self.occ = occ
        self.counts = [0] * vs.n
        mat = self.occupancy_matrix()
        for a in range(vs.n):
            self.counts[a] = int(mat[:, a].sum())

    @classmethod
    def empty(cls, lattice: Lattice, vs: VelocitySet) -> "Configuration":
        return cls(lattice, vs, bytearray(lattice.nsites * vs.n))

    @classmethod
    def from_occupancy(cls, lattice: Lattice, vs: VelocitySet, mat) -> "Configuration":
        mat = np.asarray(mat, dtype=np.uint8)
        if mat.shape != (lattice.nsites, vs.n):
            raise ValueError(f"occupancy shape {mat.shape} != {(lattice.nsites, vs.n)}")
        if not np.all((mat == 0) | (mat == 1)):
            raise ValueError("occupancy must be 0/1")
        return cls(lattice, vs, bytearray(mat.tobytes()))

    def occupancy_matrix(self) -> np.ndarray:
        """Zero-copy (nsites, nvel) uint8 view of the occupancy bytes."""
        return np.frombuffer(self.occ, dtype=np.uint8).reshape(self.lattice.nsites, self.vs.n)

    def local_state(self, site: int) -> LocalState:
        base = site * self.vs.n
        return LocalState(tuple(self.occ[base:base + self.vs.n]))

    def get(self, site: int, a: int) -> int:
        return self.occ[site * self.vs.n + a]

    def counts_consistent(self) -> bool:
        mat = self.occupancy_matrix()
        return all(self.counts[a] == int(mat[:, a].sum()) for a in range(self.vs.n))

    def total_conserved(self) -> tuple[Fraction, ...]:
        """Exact sum over sites of (I_0, ..., I_d), from the particle counts."""
        mass = Fraction(sum(self.counts))
        mom = [Fraction(0)] * self.vs.dim
        for a, v in enumerate(self.vs.velocities):
            for k in range(self.vs.dim):
                mom[k] += self.counts[a] * v.components[k]
        return (mass, *mom)

    def copy(self) -> "Configuration":
        return Configuration(self.lattice, self.vs, bytearray(self.occ))


# ---------------------------------------------------------------------------
# spec-level rate functions (reference implementations, used by tests)


def exclusion_rate(config: Configuration, law: JumpLaw, x, z, v: int) -> float:
    """N^2 P_N(z, v) eta(x,v)(1 - eta(x+z,v)); zero if x+z leaves the slab."""
    lat = config.lattice
    s = lat.site_index(x)
    z = tuple(int(c) for c in z)
    t = int(lat.targets(z)[s])
    if t < 0:
        return 0.0
    if not config.get(s, v) or config.get(t, v):
        return 0.0
    pn = law.prob(v, z) / lat.N
    if sum(abs(c) for c in z) == 1:
        pn += 0.5
    return lat.N ** 2 * pn


def boundary_flip_rate(config: Configuration, boundary: BoundaryData, x, v: int) -> float:
    """N^2 [alpha_v (1-eta) + (1-alpha_v) eta] at x_1=1 (beta at x_1=N-1); else 0."""
    lat = config.lattice
    s = lat.site_index(x)
    x1 = lat.coords[s, 0]
    ut = (lat.coords[s, 1:] / lat.N).reshape(1, -1)
    occ = config.get(s, v)
    rate = 0.0
    if x1 == 1:
        a = float(boundary.alpha(ut)[0, v])
        rate += a * (1 - occ) + (1.0 - a) * occ
    if x1 == lat.N - 1:
        b = float(boundary.beta(ut)[0, v])
        rate += b * (1 - occ) + (1.0 - b) * occ
    return lat.N ** 2 * rate


# ---------------------------------------------------------------------------
# Fenwick tree over per-site rates


class _Fenwick:
    __slots__ = ("n", "tree", "topbit")

    def __init__(self, n: int):
        self.n = n
        self.tree = [0.0] * (n + 1)
        self.topbit = 1 << n.bit_length()

    def rebuild(self, vals):
        n = self.n
        t = [0.0] * (n + 1)
        for i, v in enumerate(vals):
            j = i + 1
            while j <= n:
                t[j] += v
                j += j & (-j)
        self.tree = t

    def add(self, i: int, delta: float):
        t = self.tree
        n = self.n
        i += 1
        while i <= n:
            t[i] += delta
            i += i & (-i)

    def find(self, r: float) -> int:
        """Largest prefix with cumulative sum <= r (clamped to the last site)."""
        t = self.tree
        n = self.n
        idx = 0
        bit = self.topbit
        while bit:
            nxt = idx + bit
            if nxt <= n and t[nxt] <= r:
                r -= t[nxt]
                idx = nxt
            bit >>= 1
        return min(idx, n - 1)

    def total(self) -> float:
        s = 0.0
        i = self.n
        t = self.tree
        while i > 0:
            s += t[i]
            i -= i & (-i)
        return s


class RateIndex:
    """Hierarchical rate sums: class totals (Kahan-compensated) over Fenwick
    trees of per-site subtotals.  Sampling and local updates are O(log sites).
    """

    CLASSES = ("ex", "c", "b")

    def __init__(self, nsites: int):
        self.trees = {c: _Fenwick(nsites) for c in self.CLASSES}
        self.sums = {c: 0.0 for c in self.CLASSES}
        self._comp = {c: 0.0 for c in self.CLASSES}

    def add(self, cls: str, site: int, delta: float):
        if delta == 0.0:
            return
        self.trees[cls].add(site, delta)
        # Kahan update of the class root
        y = delta - self._comp[cls]
        t = self.sums[cls] + y
        self._comp[cls] = (t - self.sums[cls]) - y
        self.sums[cls] = t

    def set_class(self, cls: str, site_vals):
        self.trees[cls].rebuild(site_vals)
        self.sums[cls] = float(sum(site_vals))
        self._comp[cls] = 0.0

    def total(self) -> float:
        return self.sums["ex"] + self.sums["c"] + self.sums["b"]

    def class_totals(self) -> dict:
        return dict(self.sums)

    def drift(self) -> float:
        """Relative gap between the Kahan roots and the trees' direct totals."""
        worst = 0.0
        for c in self.CLASSES:
            t = self.trees[c].total()
            ref = max(abs(t), abs(self.sums[c]), 1e-300)
            worst = max(worst, abs(t - self.sums[c]) / ref)
        return worst


# ---------------------------------------------------------------------------
# the simulator


@dataclass
class EventCounts:
    ex: int = 0
    c: int = 0
    b: int = 0

    @property
    def total(self) -> int:
        return self.ex + self.c + self.b


class Simulator:
    """Mutable single-threaded kinetic Monte Carlo instance.

    Replicas of an ensemble must each own their Simulator and RNG stream.
    `parts` selects generator pieces ("ex" covers both the symmetric and the
    weakly asymmetric exclusion; exactcheck can split them).
    """

    def __init__(self, config: Configuration, law: JumpLaw, boundary: BoundaryData,
                 rng: np.random.Generator, parts=("ex", "c", "b"),
                 refresh_every: int = 1_000_000):
        self.config = config
        self.law = law
        self.boundary = boundary
        self.rng = rng
        self.parts = tuple(parts)
        self.refresh_every = refresh_every
        self.t = 0.0
        self.events = EventCounts()
        self.clamped_drift = 0.0      # worst drift seen at refresh checks
        self._since_refresh = 0

        lat = config.lattice
        vs = config.vs
        self.lat = lat
        self.vs = vs
        nsites = lat.nsites
        nvel = vs.n
        self._nvel = nvel
        n2 = float(lat.N) ** 2

        # outgoing moves per velocity: (targets list, N^2 P_N(z,v), z)
        # incoming[a][m] lists the source site that reaches s via move m (-1: none)
        self._moves = []
        self._incoming = []
        if "ex" in self.parts:
            for a in range(nvel):
                zs = {}
                for j in range(lat.d):
                    for s in (1, -1):
                        e = tuple(s if q == j else 0 for q in range(lat.d))
                        zs[e] = 0.5
                for z, p in law.support(a):
                    zs[z] = zs.get(z, 0.0) + p / lat.N
                mv, inc = [], []
                for z, pn in sorted(zs.items()):
                    mv.append((lat.targets(z).tolist(), n2 * pn, z))
                    inc.append(lat.targets(tuple(-c for c in z)).tolist())
                self._moves.append(mv)
                self._incoming.append(inc)
        else:
            self._moves = [[] for _ in range(nvel)]
            self._incoming = [[] for _ in range(nvel)]

        # collisions
        self._quads = [q.indices() for q in vs.quadruples] if "c" in self.parts else []
        self._n2 = n2

        # boundary flip constants: rate = bnd1 if occupied else bnd0
        self._bnd0 = [0.0] * (nsites * nvel)
        self._bnd1 = [0.0] * (nsites * nvel)
        self._is_wall = [False] * nsites
        if "b" in self.parts:
            for side, getter in ((1, boundary.alpha), (lat.N - 1, boundary.beta)):
                mask = lat.wall_mask(side)
                ut = lat.coords[mask][:, 1:] / lat.N
                dens = getter(ut) if lat.d > 1 else getter(np.zeros((int(mask.sum()), 0)))
                for row, s in enumerate(np.nonzero(mask)[0]):
                    self._is_wall[s] = True
                    for a in range(nvel):
                        th = float(dens[row, a])
                        self._bnd0[s * nvel + a] += n2 * th
                        self._bnd1[s * nvel + a] += n2 * (1.0 - th)

        # per-(site, velocity) exclusion rates and per-site collision rates
        self._ex_sv = [0.0] * (nsites * nvel)
        self._coll_s = [0.0] * nsites
        self.rate_index = RateIndex(nsites)
        self._rebuild_index()

        # batched randomness, kept as plain lists for loop speed; the first
        # batch is small so short replicas do not pay for a huge draw
        self._u = self.rng.random(512).tolist()
        self._e = self.rng.standard_exponential(512).tolist()
        self._iu = 0
        self._ie = 0

    # --- rate recomputations ---------------------------------------------------

    def _ex_site_v(self, s: int, a: int) -> float:
        occ = self.config.occ
        nvel = self._nvel
        if not occ[s * nvel + a]:
            return 0.0
        r = 0.0
        for tgts, c, _z in self._moves[a]:
            t = tgts[s]
            if t >= 0 and not occ[t * nvel + a]:
                r += c
        return r

    def _coll_site(self, s: int) -> float:
        occ = self.config.occ
        base = s * self._nvel
        r = 0.0
        for iv, iw, ivo, iwo in self._quads:
            if occ[base + iv] and occ[base + iw] and not occ[base + ivo] and not occ[base + iwo]:
                r += self._n2
        return r

    def _bnd_site_v(self, s: int, a: int) -> float:
        k = s * self._nvel + a
        return self._bnd1[k] if self.config.occ[k] else self._bnd0[k]

    def _rebuild_index(self):
        lat, nvel = self.lat, self._nvel
        ex_site = [0.0] * lat.nsites
        bnd_site = [0.0] * lat.nsites
        for s in range(lat.nsites):
            for a in range(nvel):
                k = s * nvel + a
                self._ex_sv[k] = self._ex_site_v(s, a)
                ex_site[s] += self._ex_sv[k]
            self._coll_s[s] = self._coll_site(s)
            if self._is_wall[s]:
                bnd_site[s] = sum(self._bnd_site_v(s, a) for a in range(nvel))
        ri = self.rate_index
        ri.set_class("ex", ex_site)
        ri.set_class("c", self._coll_s)
        ri.set_class("b", bnd_site)

    def _refresh(self):
        drift = self._check_drift()
        self.clamped_drift = max(self.clamped_drift, drift)
        self._rebuild_index()
        self._since_refresh = 0

    def _check_drift(self) -> float:
        """Relative gap between stored totals and a direct O(sites) recomputation."""
        lat, nvel = self.lat, self._nvel
        ex = sum(self._ex_site_v(s, a) for s in range(lat.nsites) for a in range(nvel))
        co = sum(self._coll_site(s) for s in range(lat.nsites))
        bd = sum(self._bnd_site_v(s, a) for s in range(lat.nsites) for a in range(nvel)
                 if self._is_wall[s])
        worst = 0.0
        for want, cls in ((ex, "ex"), (co, "c"), (bd, "b")):
            ref = max(abs(want), 1e-300)
            worst = max(worst, abs(self.rate_index.sums[cls] - want) / ref)
        return worst

    # --- RNG helpers -------------------------------------------------------------

    def _uniform(self) -> float:
        i = self._iu
        if i >= len(self._u):
            self._u = self.rng.random(16384).tolist()
            i = 0
        self._iu = i + 1
        return self._u[i]

    def _expo(self) -> float:
        i = self._ie
        if i >= len(self._e):
            self._e = self.rng.standard_exponential(16384).tolist()
            i = 0
        self._ie = i + 1
        return self._e[i]

    # --- cache updates after occupancy changes -----------------------------------

    def _touch_ex(self, pairs):
        """Recompute exclusion rates for (site, velocity) pairs; update the index.

        Fenwick and Kahan updates are inlined: this runs once per event and
        dominates the loop cost.  Duplicate pairs are harmless (delta 0).
        """
        occ = self.config.occ
        nvel = self._nvel
        ex_sv = self._ex_sv
        moves = self._moves
        ri = self.rate_index
        fw = ri.trees["ex"]
        tree = fw.tree
        n = fw.n
        tot = ri.sums["ex"]
        comp = ri._comp["ex"]
        for s, a in pairs:
            k = s * nvel + a
            r = 0.0
            if occ[k]:
                for tgts, c, _z in moves[a]:
                    t = tgts[s]
                    if t >= 0 and not occ[t * nvel + a]:
                        r += c
            d = r - ex_sv[k]
            if d != 0.0:
                ex_sv[k] = r
                i = s + 1
                while i <= n:
                    tree[i] += d
                    i += i & (-i)
                y = d - comp
                t2 = tot + y
                comp = (t2 - tot) - y
                tot = t2
        ri.sums["ex"] = tot
        ri._comp["ex"] = comp

    def _touch_coll(self, sites):
        if not self._quads:
            return
        ri = self.rate_index
        for s in sites:
            new = self._coll_site(s)
            d = new - self._coll_s[s]
            if d != 0.0:
                self._coll_s[s] = new
                ri.add("c", s, d)

    def _touch_bnd(self, pairs):
        """Update boundary rates for (site, velocity) bits that just flipped."""
        ri = self.rate_index
        for s, a in pairs:
            if self._is_wall[s]:
                k = s * self._nvel + a
                if self.config.occ[k]:
                    new, prev = self._bnd1[k], self._bnd0[k]
                else:
                    new, prev = self._bnd0[k], self._bnd1[k]
                ri.add("b", s, new - prev)

    def _ex_pairs_for(self, s: int, a: int):
        """(site, velocity) exclusion rates affected by a bit change at (s, a)."""
        pairs = [(s, a)]
        for inc in self._incoming[a]:
            u = inc[s]
            if u >= 0:
                pairs.append((u, a))
        return pairs

    # --- one event ---------------------------------------------------------------

    def step(self):
        """Draw (event, dt) a la Gillespie, apply it, and update the rate index.

        Returns (("ex", x, y, a) | ("c", s, quad_index) | ("b", s, a), dt).
        """
        ri = self.rate_index
        total = ri.sums["ex"] + ri.sums["c"] + ri.sums["b"]
        if total <= 0.0:
            raise ZeroTotalRate(f"total rate {total} at t={self.t}")
        dt = self._expo() / total
        ev = self._select_apply(self._uniform() * total)
        self.t += dt
        self._since_refresh += 1
        if self._since_refresh >= self.refresh_every:
            self._refresh()
        return ev, dt

    def _select_apply(self, r: float):
        """Pick the event at cumulative-rate position r and apply it."""
        ri = self.rate_index
        tot_ex = ri.sums["ex"]
        tot_c = ri.sums["c"]
        occ = self.config.occ
        nvel = self._nvel
        if r < tot_ex:
            s = ri.trees["ex"].find(r)
            # enumerate local exclusion events at s
            rates = []
            evs = []
            acc = 0.0
            for a in range(nvel):
                if occ[s * nvel + a]:
                    for tgts, c, _z in self._moves[a]:
                        t = tgts[s]
                        if t >= 0 and not occ[t * nvel + a]:
                            acc += c
                            rates.append(acc)
                            evs.append((a, t))
            if not evs:
                return self._rescue()
            pick = self._uniform() * acc
            i = 0
            while i < len(rates) - 1 and rates[i] <= pick:
                i += 1
            a, y = evs[i]
            occ[s * nvel + a] = 0
            occ[y * nvel + a] = 1
            pairs = [(s, a), (y, a)]
            for inc in self._incoming[a]:
                u = inc[s]
                if u >= 0:
                    pairs.append((u, a))
                u = inc[y]
                if u >= 0:
                    pairs.append((u, a))
            self._touch_ex(pairs)
            if self._quads:
                self._touch_coll((s, y))
            self._touch_bnd(((s, a), (y, a)))
            ev = ("ex", s, y, a)
            self.events.ex += 1
        elif r < tot_ex + tot_c:
            rr = r - tot_ex
            s = ri.trees["c"].find(rr)
            base = s * nvel
            admissible = [qi for qi, (iv, iw, ivo, iwo) in enumerate(self._quads)
                          if occ[base + iv] and occ[base + iw]
                          and not occ[base + ivo] and not occ[base + iwo]]
            if not admissible:
                return self._rescue()
            qi = admissible[min(int(self._uniform() * len(admissible)), len(admissible) - 1)]
            iv, iw, ivo, iwo = self._quads[qi]
            occ[base + iv] = 0
            occ[base + iw] = 0
            occ[base + ivo] = 1
            occ[base + iwo] = 1
            cnt = self.config.counts
            cnt[iv] -= 1
            cnt[iw] -= 1
            cnt[ivo] += 1
            cnt[iwo] += 1
            seen = set()
            for a in (iv, iw, ivo, iwo):
                seen.update(self._ex_pairs_for(s, a))
            self._touch_ex(seen)
            self._touch_coll((s,))
            self._touch_bnd(tuple((s, a) for a in (iv, iw, ivo, iwo)))
            ev = ("c", s, qi)
            self.events.c += 1
        else:
            rr = r - tot_ex - tot_c
            s = ri.trees["b"].find(rr)
            rates = []
            acc = 0.0
            for a in range(nvel):
                acc += self._bnd_site_v(s, a)
                rates.append(acc)
            if acc <= 0.0:
                return self._rescue()
            pick = self._uniform() * acc
            a = 0
            while a < nvel - 1 and rates[a] <= pick:
                a += 1
            k = s * nvel + a
            newbit = 0 if occ[k] else 1
            occ[k] = newbit
            self.config.counts[a] += 1 if newbit else -1
            self._touch_ex(self._ex_pairs_for(s, a))
            self._touch_coll((s,))
            self._touch_bnd(((s, a),))
            ev = ("b", s, a)
            self.events.b += 1
        return ev

    def _rescue(self):
        """Float drift parked the selector on a dead site: rebuild and redraw."""
        self._refresh()
        total = self.rate_index.total()
        if total <= 0.0:
            raise ZeroTotalRate(f"total rate {total} at t={self.t}")
        return self._select_apply(self._uniform() * total)

    def run_until(self, t_end: float) -> int:
        """Advance the clock to t_end (macroscopic time); returns events applied.

        A waiting time that would overshoot t_end is discarded, which is exact
        by memorylessness of the exponential clock.
        """
        n = 0
        sums = self.rate_index.sums
        while True:
            total = sums["ex"] + sums["c"] + sums["b"]
            if total <= 0.0:
                raise ZeroTotalRate(f"total rate {total} at t={self.t}")
            dt = self._expo() / total
            if self.t + dt > t_end:
                self.t = t_end
                return n
            self._select_apply(self._uniform() * total)
            self.t += dt
            n += 1
            self._since_refresh += 1
            if self._since_refresh >= self.refresh_every:
                self._refresh()


def step(sim: Simulator):
    """Module-level alias matching the operation signature."""
    return sim.step()


def simulate(initial: Configuration, T_macro: float, observers=(), rng=None,
             law: JumpLaw | None = None, boundary: BoundaryData | None = None,
             parts=("ex", "c", "b"), refresh_every: int = 1_000_000) -> Simulator:
    """Run the process to macroscopic time T_macro, invoking observers on the way.

    Each observer provides `times` (sorted, within [0, T_macro]) and
    `observe(t, config)`; the state passed is right-continuous at t.  Returns
    the simulator (final configuration, clock, event counts).
    """
    if T_macro < 0:
        raise ValueError("T_macro >= 0")
    if law is None:
        law = build_jump_law(initial.vs)
    if boundary is None:
        raise ValueError("boundary data required (reservoir densities drive the walls)")
    if rng is None:
        rng = np.random.default_rng()
    sim = Simulator(initial, law, boundary, rng, parts=parts, refresh_every=refresh_every)
    schedule: dict[float, list] = {}
    for ob in observers:
        for t in ob.times:
            if 0.0 <= t <= T_macro:
                schedule.setdefault(float(t), []).append(ob)
    for t in sorted(schedule):
        sim.run_until(t)
        for ob in schedule[t]:
            ob.observe(t, sim.config)
    sim.run_until(T_macro)
    return sim


# ---------------------------------------------------------------------------
# snapshots

_MAGIC = b"LGSNAP01"


def save_snapshot(config: Configuration, t: float, path):
    """Binary dump: header (N, d, |V|, exact velocity list, time) + packed bits.

    Little-endian throughout; occupancy bits in (site-major, velocity-minor)
    order packed LSB-first.
    """
    lat, vs = config.lattice, config.vs
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", lat.N, lat.d, vs.n))
        for v in vs.velocities:
            for c in v.components:
                fh.write(struct.pack("<qq", c.numerator, c.denominator))
        fh.write(struct.pack("<d", t))
        bits = np.frombuffer(config.occ, dtype=np.uint8)
        packed = np.packbits(bits, bitorder="little")
        fh.write(struct.pack("<Q", bits.size))
        fh.write(packed.tobytes())


def load_snapshot(path):
    """Inverse of save_snapshot; returns (Configuration, t)."""
    from .velocities import Velocity

    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path} is not a snapshot file")
        N, d, nvel = struct.unpack("<III", fh.read(12))
        vels = []
        for _ in range(nvel):
            comps = []
            for _ in range(d):
                num, den = struct.unpack("<qq", fh.read(16))
                comps.append(Fraction(num, den))
            vels.append(Velocity(tuple(comps)))
        (t,) = struct.unpack("<d", fh.read(8))
        (nbits,) = struct.unpack("<Q", fh.read(8))
        packed = np.frombuffer(fh.read(), dtype=np.uint8)
        bits = np.unpackbits(packed, bitorder="little")[:nbits]
    vs = VelocitySet(vels)
    lat = Lattice(N, d)
    mat = bits.reshape(lat.nsites, vs.n)
    return Configuration.from_occupancy(lat, vs, mat), t


def snapshot_debug_json(config: Configuration, t: float) -> str:
    lat, vs = config.lattice, config.vs
    return json.dumps({
        "N": lat.N,
        "d": lat.d,
        "velocities": [[str(c) for c in v.components] for v in vs.velocities],
        "time": t,
        "occupancy": config.occupancy_matrix().tolist(),
    }, indent=1)
