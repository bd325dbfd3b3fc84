"""Oscillatory input synthesis for the extended bracket system.

Pipeline: group the bracket terms into reduced equivalence classes, pick
integer frequencies passing the minimally-canceling / independence verifiers
(exact integer arithmetic), compute the g-hat / Xi / gamma / eta coefficients
and assemble per-generator sinusoidal inputs U_k^sigma(t).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .liebracket import (CapacityError, ExtendedSystem, FormalBracket,
                         equivalence_class, gen_key)


class FrequencySearchError(Exception):
    pass


# --- verifiers --------------------------------------------------------------


def check_minimally_canceling(omega) -> bool:
    """Exhaustive over integer y with sum|y| <= m: sum(y*w) == 0 iff all y equal."""
    w = [int(v) for v in omega]
    m = len(w)
    if m < 2 or len(set(w)) != m or 0 in w:
        raise ValueError("need >= 2 distinct nonzero entries")

    def rec(idx, budget, acc, ys):
        if idx == m:
            equal = all(y == ys[0] for y in ys)
            return (acc == 0) == equal
        for y in range(-budget, budget + 1):
            if not rec(idx + 1, budget - abs(y), acc + y * w[idx], ys + [y]):
                return False
        return True

    return rec(0, m, 0, [])


def check_independent(collection, budget: int = None, bound: int = 14) -> bool:
    """Pairwise disjoint + no small cross-set integer cancellation.

    Exact search for a violation: an integer combination with |y|_1 <= budget
    (default: the total element count), zero total sum and a nonzero partial
    sum on some set. Small sum ranges use a breadth-first min-cost table;
    large ones a meet-in-the-middle enumeration over half-budget multisets.
    """
    sets = [tuple(int(v) for v in s) for s in collection]
    if any(not s for s in sets):
        raise ValueError("sets must be nonempty")
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            if set(sets[a]) & set(sets[b]):
                return False
    if len(sets) == 1:
        return True
    total = sum(len(s) for s in sets)
    budget = total if budget is None else min(int(budget), total)
    if budget > bound:
        raise CapacityError(f"cancellation budget {budget} exceeds bound {bound}")
    maxabs = max(abs(v) for s in sets for v in s)
    if budget * maxabs <= 2_000_000:
        return _indep_bfs(sets, budget, maxabs)
    return _indep_mitm(sets, budget)


def _indep_bfs(sets, budget, maxabs):
    """Violation exists iff some set reaches p != 0 and the union of the
    others reaches -p within the remaining budget."""
    r = budget * maxabs
    size = 2 * r + 1
    inf = np.iinfo(np.int64).max // 4

    def cost_table(values):
        cost = np.full(size, inf, dtype=np.int64)
        cost[r] = 0
        coins = np.array(sorted({c for v in values for c in (v, -v)}))
        frontier = np.array([r])
        for c in range(1, budget + 1):
            cand = (frontier[:, None] + coins[None, :]).ravel()
            cand = cand[(cand >= 0) & (cand < size)]
            cand = np.unique(cand)
            cand = cand[cost[cand] == inf]
            if cand.size == 0:
                break
            cost[cand] = c
            frontier = cand
        return cost

    for i, s in enumerate(sets):
        own = cost_table(s)
        rest = cost_table([v for j, t in enumerate(sets) if j != i for v in t])
        total = own + rest[::-1]            # cost of sum p here + sum -p elsewhere
        total[r] = inf                      # p = 0 is not a violation of set i
        if int(total.min()) <= budget:
            return False
    return True


def _indep_mitm(sets, budget):
    """Enumerate signed-coin multisets up to half the budget and join pairs
    with opposite sums; a pair with a nonzero combined partial sum on some
    set is a violation."""
    from itertools import combinations_with_replacement
    from math import comb

    nsets = len(sets)
    coins = [(v, i) for i, s in enumerate(sets) for v in s]
    coins += [(-v, i) for v, i in list(coins)]
    half = (budget + 1) // 2
    est = sum(comb(len(coins) + k - 1, k) for k in range(half + 1))
    if est > 3_000_000:
        raise CapacityError(
            f"meet-in-the-middle enumeration too large ({est} multisets)")
    zero = (0,) * nsets
    entries = {0: [(0, zero)]}
    for k in range(1, half + 1):
        for combo in combinations_with_replacement(coins, k):
            t = 0
            p = [0] * nsets
            for v, i in combo:
                t += v
                p[i] += v
            entries.setdefault(t, []).append((k, tuple(p)))
    for t, lst in entries.items():
        opp = entries.get(-t)
        if opp is None:
            continue
        for k1, p1 in lst:
            for k2, p2 in opp:
                if not 0 < k1 + k2 <= budget:
                    continue
                if any(a + b for a, b in zip(p1, p2)):
                    return False
    return True


# --- classes ----------------------------------------------------------------


@dataclass(frozen=True)
class BracketClass:
    key: tuple                # sorted involved generators (multidegree is 0/1)
    members: tuple            # reduced class, sorted
    vtilde: tuple             # per member
    degree: int

    @property
    def gens(self):
        return self.key


def build_classes(extended: ExtendedSystem):
    dim = 3 * extended.n
    groups = {}
    for t in extended.terms:
        if t.sign == 0:
            continue  # zero field: contributes nothing to the flow
        md = t.element.multidegree()
        if any(c > 1 for c in md.values()):
            raise CapacityError("synthesis requires 0/1 multidegrees")
        key = tuple(sorted(md, key=gen_key))
        groups.setdefault(key, []).append(t)
    classes = []
    for key in sorted(groups, key=lambda k: tuple(gen_key(g) for g in k)):
        terms = groups[key]
        members = equivalence_class(terms[0].element, terms[0].basis, dim)
        v = {m: 0.0 for m in members}
        for t in terms:
            if t.element not in v:
                raise AssertionError("term element missing from its reduced class")
            v[t.element] += t.v
        classes.append(BracketClass(key, members,
                                    tuple(v[m] for m in members), len(key)))
    return classes


# --- frequency selection ----------------------------------------------------


@dataclass(frozen=True)
class FrequencyAssignment:
    """Integer frequency numerators on a lattice scaled by 1/denominator.

    The verifiers run on the numerators (exact integer arithmetic); the
    physical frequencies are numerator/denominator.
    """

    deg2: dict                # class key -> int numerator
    higher: dict              # class key -> tuple over rho of {gen: int}
    seed: int
    freq_range: tuple
    attempts: int
    denominator: int = 1
    certificates: dict = field(default_factory=dict)

    def omega(self, numerator):
        return numerator / self.denominator

    def collection(self):
        sets = [[w, -w] for w in self.deg2.values()]
        for per_rho in self.higher.values():
            for omegas in per_rho:
                plus = list(omegas.values())
                sets.append(plus + [-w for w in plus])
        return sets


#: default |y|_1 cancellation budget verified during the frequency search.
#: The full per-definition budget (the total element count) is unattainable
#: on any bounded integer lattice once the collection is large: l1-balls of
#: that radius contain far more integer vectors than there are reachable
#: sums, so cheap cross-set cancellations always exist. Order <= 6 relations
#: are excluded exactly; a finer lattice (larger denominator) makes passing
#: draws common.
INDEPENDENCE_BUDGET = 6

#: denominator of the frequency lattice used by the search.
FREQ_DENOMINATOR = 10 ** 6


def choose_frequencies(classes, seed: int, freq_range=(2, 70),
                       max_attempts: int = 10000,
                       denominator: int = FREQ_DENOMINATOR,
                       independence_budget: int = INDEPENDENCE_BUDGET,
                       ) -> FrequencyAssignment:
    lo, hi = int(freq_range[0]), int(freq_range[1])
    if not 0 < lo < hi:
        raise ValueError("frequency range must satisfy 0 < lo < hi")
    q = int(denominator)
    nlo, nhi = lo * q, hi * q
    rng = random.Random(f"distopt:{seed}")
    deg2_classes = [c for c in classes if c.degree == 2]
    high_classes = [c for c in classes if c.degree >= 3]
    last_reason = "no classes"
    for attempt in range(1, max_attempts + 1):
        used = set()
        deg2 = {}
        ok = True
        for c in deg2_classes:
            if len(c.members) != 1:
                raise ValueError("degree-2 class must be a singleton")
            w = _fresh(rng, nlo, nhi, used)
            if w is None:
                ok, last_reason = False, "range exhausted for degree-2 classes"
                break
            used.add(w)
            deg2[c.key] = w
        if not ok:
            continue
        higher = {}
        mc_sets = []
        for c in high_classes:
            per_rho = []
            for _ in range(len(c.members)):
                omegas = _propose_mc_set(rng, c.degree, nlo, nhi, used)
                if omegas is None:
                    ok, last_reason = False, "could not build a minimally canceling set"
                    break
                used.update(abs(w) for w in omegas)
                per_rho.append({g: w for g, w in zip(c.gens, omegas)})
                mc_sets.append(omegas)
            if not ok:
                break
            higher[c.key] = tuple(per_rho)
        if not ok:
            continue
        fa = FrequencyAssignment(deg2, higher, seed, (lo, hi), attempt, q)
        coll = fa.collection()
        budget = min(sum(len(s) for s in coll), independence_budget) if coll else 0
        if coll and not check_independent(coll, budget=budget):
            last_reason = "collection not independent"
            continue
        certs = {
            "minimally_canceling": [sorted(s) for s in mc_sets],
            "independent": bool(coll),
            "independence_budget": budget,
            "attempts": attempt,
        }
        return FrequencyAssignment(deg2, higher, seed, (lo, hi), attempt, q,
                                   certs)
    raise FrequencySearchError(
        f"no admissible frequencies after {max_attempts} attempts ({last_reason})")


def _fresh(rng, nlo, nhi, used, tries: int = 200):
    for _ in range(tries):
        w = rng.randrange(nlo, nhi + 1)
        if w not in used:
            return w
    return None


def _propose_mc_set(rng, m, nlo, nhi, used):
    """m distinct nonzero numerators, zero sum, fresh magnitudes, minimally
    canceling; all magnitudes stay inside [nlo, nhi]."""
    for _ in range(400):
        mags = set()
        while len(mags) < m - 1:
            w = _fresh(rng, nlo, nhi, used | mags)
            if w is None:
                return None
            mags.add(w)
        vals = [mag if rng.random() < 0.5 else -mag for mag in sorted(mags)]
        last = -sum(vals)
        if not nlo <= abs(last) <= nhi:
            continue
        if abs(last) in used or abs(last) in mags:
            continue
        cand = vals + [last]
        if check_minimally_canceling(cand):
            return cand
    return None


# --- coefficients -----------------------------------------------------------


def g_hat(b: FormalBracket, omegas) -> Fraction:
    """Recursion: g_hat([B1,B2]) = g_hat(B1) / sum(first deg(B1) omegas) * g_hat(B2)."""
    omegas = tuple(omegas)
    if len(omegas) != b.degree:
        raise ValueError("need one frequency per leaf")
    if b.is_leaf:
        return Fraction(1)
    d1 = b.left.degree
    den = sum(omegas[:d1])
    if den == 0:
        raise ZeroDivisionError("zero partial frequency sum; resample frequencies")
    return g_hat(b.left, omegas[:d1]) / den * g_hat(b.right, omegas[d1:])


def xi_matrix(cls: BracketClass, per_rho, denominator: int = 1) -> np.ndarray:
    """Xi_E: rows = class members, columns = rho; entries g_hat with the leaf
    frequencies of assignment rho (exact rationals, then floats)."""
    if cls.degree < 3:
        raise ValueError("Xi is defined for degree >= 3 classes")
    m = len(cls.members)
    xi = np.zeros((m, m))
    for r, b in enumerate(cls.members):
        for rho in range(m):
            omegas = tuple(Fraction(per_rho[rho][g], denominator)
                           for g in b.leaves())
            xi[r, rho] = float(g_hat(b, omegas))
    return xi


def _signed_root(x: float, n: int) -> float:
    return float(np.sign(x) * abs(x) ** (1.0 / n))


def eta_coefficients(cls: BracketClass, freqs: FrequencyAssignment,
                     beta_primal: float = 1.0, n_state: int = None):
    """Per-generator list of (frequency, complex eta) and the sigma exponent."""
    def is_primal(gen):
        return n_state is not None and gen[1] <= n_state

    if cls.degree == 2:
        b = cls.members[0]
        v = cls.vtilde[0]
        w = freqs.omega(freqs.deg2[cls.key])
        k1, k2 = b.left.gen, b.right.gen
        beta = beta_primal if is_primal(k2) else (
            1.0 / beta_primal if is_primal(k1) else 1.0)
        amp = np.sqrt(0.5 * abs(v * w))
        eta1 = 1j * (1.0 / beta) * np.sign(v * w) * amp
        eta2 = beta * amp
        return {k1: [(w, eta1)], k2: [(w, eta2)]}, 0.5

    per_rho = freqs.higher[cls.key]
    xi = xi_matrix(cls, per_rho, freqs.denominator)
    gamma = np.linalg.solve(xi, np.array(cls.vtilde))
    deg = cls.degree
    atoms = {g: [] for g in cls.gens}
    for rho in range(len(cls.members)):
        omegas = per_rho[rho]
        betas = _beta_config(cls.gens, is_primal, beta_primal)
        if deg % 2 == 1:
            ipow = (-1.0) ** ((deg - 1) // 2)
            root = _signed_root(0.5 * gamma[rho] * ipow, deg)
            for g in cls.gens:
                atoms[g].append((freqs.omega(omegas[g]), betas[g] * root))
        else:
            ipow = (-1.0) ** ((deg - 2) // 2)
            mag = abs(0.5 * gamma[rho] * ipow) ** (1.0 / deg)
            tilde = cls.gens[0]  # lowest-indexed involved generator
            for g in cls.gens:
                if g == tilde:
                    atoms[g].append((freqs.omega(omegas[g]),
                                     1j * betas[g] * np.sign(gamma[rho] * ipow) * mag))
                else:
                    atoms[g].append((freqs.omega(omegas[g]), betas[g] * mag))
    return atoms, (deg - 1) / deg


def _beta_config(gens, is_primal, beta_primal):
    """Free beta factors with product 1; primal-entering channels scaled down."""
    primal = [g for g in gens if is_primal(g)]
    rest = [g for g in gens if not is_primal(g)]
    betas = {g: 1.0 for g in gens}
    if beta_primal != 1.0 and primal and rest:
        comp = beta_primal ** (-len(primal) / len(rest))
        for g in primal:
            betas[g] = beta_primal
        for g in rest:
            betas[g] = comp
    return betas


# --- input assembly ---------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    gen: tuple
    omega: float
    eta: complex
    exponent: float


@dataclass(frozen=True)
class InputSynthesis:
    """U_k^sigma(t) = sum over the generator's atoms of 2 sigma^e Re(eta e^{i sigma w t})."""

    atoms: tuple

    def generators(self):
        return sorted({a.gen for a in self.atoms}, key=gen_key)

    def atoms_for(self, gen):
        return tuple(a for a in self.atoms if a.gen == gen)

    def value(self, gen, sigma, t):
        u = 0.0
        for a in self.atoms_for(gen):
            u += 2.0 * sigma ** a.exponent * (
                a.eta * np.exp(1j * sigma * a.omega * t)).real
        return u

    def omega_max(self):
        return max((abs(a.omega) for a in self.atoms), default=0)


def assemble_inputs(extended: ExtendedSystem, freqs: FrequencyAssignment,
                    etas_by_class) -> InputSynthesis:
    atoms = []
    for atom_map, exponent in etas_by_class:
        for gen, entries in atom_map.items():
            for w, eta in entries:
                atoms.append(Atom(gen, float(w), complex(eta), float(exponent)))
    atoms.sort(key=lambda a: (gen_key(a.gen), a.omega))
    return InputSynthesis(tuple(atoms))


def explicit_low_degree(cls: BracketClass, freqs: FrequencyAssignment,
                        beta: float = 1.0) -> InputSynthesis:
    """Closed-form degree-2/3 inputs for singleton classes.

    Degree 2: cosine on the first channel, sine on the second. Degree 3: three
    cosines with beta powers (beta, beta^-2, beta). Normalized so the generated
    bracket coefficient equals the class weight.
    """
    if cls.degree not in (2, 3) or len(cls.members) != 1:
        raise ValueError("explicit forms cover singleton classes of degree 2 or 3")
    if beta == 0.0:
        raise ValueError("beta must be nonzero")
    b = cls.members[0]
    v = cls.vtilde[0]
    atoms = []
    if cls.degree == 2:
        w = freqs.omega(freqs.deg2[cls.key])
        k1, k2 = b.left.gen, b.right.gen
        amp = np.sqrt(0.5 * abs(v * w))
        # -sqrt(2 sigma)(1/beta)sqrt|vw| cos  and  -sign(vw) sqrt(2 sigma) beta sqrt|vw| sin
        atoms.append(Atom(k1, float(w), complex(-amp / beta), 0.5))
        atoms.append(Atom(k2, float(w), complex(1j * np.sign(v * w) * beta * amp), 0.5))
    else:
        k1 = b.left.gen
        k2, k3 = b.right.left.gen, b.right.right.gen
        omegas = {g: freqs.omega(w) for g, w in freqs.higher[cls.key][0].items()}
        root = _signed_root(0.5 * v * omegas[k1] * omegas[k2], 3)
        atoms.append(Atom(k1, float(omegas[k1]), complex(-beta * root), 2 / 3))
        atoms.append(Atom(k2, float(omegas[k2]), complex(-root / beta ** 2), 2 / 3))
        atoms.append(Atom(k3, float(omegas[k3]), complex(-beta * root), 2 / 3))
    atoms.sort(key=lambda a: (gen_key(a.gen), a.omega))
    return InputSynthesis(tuple(atoms))


# --- pipeline ---------------------------------------------------------------


def synthesize(extended: ExtendedSystem, seed: int, freq_range=(2, 70),
               beta_primal: float = 1.0, max_attempts: int = 10000,
               max_redraws: int = 50, denominator: int = FREQ_DENOMINATOR,
               independence_budget: int = INDEPENDENCE_BUDGET):
    """Steps 1-5; resamples frequencies when a Xi matrix is ill-conditioned."""
    classes = build_classes(extended)
    if not classes:
        empty = FrequencyAssignment({}, {}, seed, tuple(freq_range), 0, 1,
                                    {"independent": True, "attempts": 0})
        return classes, empty, InputSynthesis(())
    n_state = extended.n
    last = None
    for redraw in range(max_redraws):
        fa = choose_frequencies(classes, seed + 7919 * redraw, freq_range,
                                max_attempts, denominator, independence_budget)
        try:
            bad = False
            for c in classes:
                if c.degree >= 3:
                    xi = xi_matrix(c, fa.higher[c.key], fa.denominator)
                    if np.linalg.cond(xi) > 1e12:
                        bad = True
                        break
            if bad:
                last = "ill-conditioned Xi"
                continue
            etas = [eta_coefficients(c, fa, beta_primal, n_state) for c in classes]
        except ZeroDivisionError:
            last = "zero partial frequency sum"
            continue
        return classes, fa, assemble_inputs(extended, fa, etas)
    raise FrequencySearchError(f"frequency redraws exhausted ({last})")
