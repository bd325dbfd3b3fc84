"""Formal brackets of the linear fields h_{i,j}(z) = z_i e_j.

Covers exact commutator evaluation, the path-to-bracket recursion, P. Hall
basis construction/projection, equivalence classes and the rewriting of the
non-admissible couplings into an extended system of weighted Hall brackets.

A generator is an index pair (i, j), 1-based into the 3n-dimensional state;
its matrix is e_j e_i^T. Generators are ordered by the key (j, i) (second
index major), composites degree-major then (left, right) lexicographic.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .digraph import DiGraph, Path, laplacian, shortest_path, split_at
from .problem import AugmentedProblem
from .spdyn import AdmissibleSplit, admissible_split, index_set


class CapacityError(Exception):
    pass


class UnsupportedCouplingError(Exception):
    """Constraint coupling that cannot be rewritten as brackets of admissible fields."""


def gen_key(gen):
    i, j = gen
    return (j, i)


class FormalBracket:
    """Immutable binary tree; leaves are generator pairs (i, j)."""

    __slots__ = ("gen", "left", "right", "degree", "key", "_hash", "_leaves")

    def __init__(self, gen=None, left=None, right=None):
        if gen is not None:
            assert left is None and right is None
            self.gen = (int(gen[0]), int(gen[1]))
            self.left = self.right = None
            self.degree = 1
            self.key = (1, gen_key(self.gen))
            self._leaves = (self.gen,)
        else:
            assert left is not None and right is not None
            self.gen = None
            self.left = left
            self.right = right
            self.degree = left.degree + right.degree
            self.key = (self.degree, left.key, right.key)
            self._leaves = left._leaves + right._leaves
        self._hash = hash(self.key)

    @staticmethod
    def leaf(gen):
        return FormalBracket(gen=gen)

    @staticmethod
    def node(left, right):
        return FormalBracket(left=left, right=right)

    @property
    def is_leaf(self):
        return self.gen is not None

    def leaves(self):
        """Generators left-to-right."""
        return self._leaves

    def multidegree(self):
        return Counter(self._leaves)

    def __eq__(self, other):
        return isinstance(other, FormalBracket) and self.key == other.key

    def __lt__(self, other):
        return self.key < other.key

    def __le__(self, other):
        return self.key <= other.key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return self.sexpr()

    def sexpr(self):
        if self.is_leaf:
            return f"h({self.gen[0]},{self.gen[1]})"
        return f"[{self.left.sexpr()}, {self.right.sexpr()}]"


_EVAL_CACHE = {}


def eval_bracket(b: FormalBracket, dim: int) -> np.ndarray:
    """Exact integer matrix of the field; Node(L,R) -> M_R M_L - M_L M_R."""
    cached = _EVAL_CACHE.get((b.key, dim))
    if cached is not None:
        return cached
    if b.is_leaf:
        i, j = b.gen
        if not (1 <= i <= dim and 1 <= j <= dim):
            raise ValueError(f"generator {b.gen} out of range for dim {dim}")
        m = np.zeros((dim, dim), dtype=np.int64)
        m[j - 1, i - 1] = 1
    else:
        ml = eval_bracket(b.left, dim)
        mr = eval_bracket(b.right, dim)
        m = mr @ ml - ml @ mr
    _EVAL_CACHE[(b.key, dim)] = m
    return m


def admissible_fields(g: DiGraph, n: int):
    """All generator pairs (i, j) with i in I(k1), j in I(k2) and l_{k2,k1} != 0."""
    lap = laplacian(g)
    gens = set()
    for k2 in range(1, n + 1):
        for k1 in range(1, n + 1):
            if lap[k2 - 1, k1 - 1] != 0:
                for i in index_set(k1, n):
                    for j in index_set(k2, n):
                        if i != j:
                            gens.add((i, j))
    return sorted(gens, key=gen_key)


def _theta(length: int) -> int:
    if length in (2, 4):
        return length // 2 + 1
    return length // 2 + 2


def rec_bracket(p: Path, k1: int, k2: int, n: int) -> FormalBracket:
    """Formal bracket along path p that evaluates to h_{k1,k2} exactly."""
    if k1 not in index_set(p.tail, n):
        raise ValueError(f"k1={k1} not in I(tail={p.tail})")
    if k2 not in index_set(p.head, n):
        raise ValueError(f"k2={k2} not in I(head={p.head})")
    if k1 == k2:
        raise ValueError("k1 and k2 must differ")
    if p.length == 1:
        return FormalBracket.leaf((k1, k2))
    theta = _theta(p.length)
    q, q_c = split_at(p, theta)
    pivot = p.nodes[theta - 1]
    s = (n + pivot) if 1 <= k1 <= 2 * n else (2 * n + pivot)
    return FormalBracket.node(rec_bracket(q_c, k1, s, n),
                              rec_bracket(q, s, k2, n))


# --- P. Hall basis ----------------------------------------------------------


def is_phall_element(b: FormalBracket, generators) -> bool:
    """Structural PH1-PH4 check against a generator set under the module order."""
    gens = set(generators)
    def ok(t):
        if t.is_leaf:
            return t.gen in gens
        if not (ok(t.left) and ok(t.right)):
            return False
        if not t.left.key < t.right.key:
            return False
        if t.right.is_leaf:
            return True
        return t.right.left.key <= t.left.key
    return ok(b)


@dataclass(frozen=True)
class PHallBasis:
    generators: tuple           # sorted generator pairs
    max_degree: int
    elements: tuple             # all elements, sorted by key
    caps: dict = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_set", frozenset(self.elements))
        by_deg = {}
        for e in self.elements:
            by_deg.setdefault(e.degree, []).append(e)
        object.__setattr__(self, "_by_degree", by_deg)

    def __contains__(self, b):
        return b in self._set

    def by_degree(self, d):
        return tuple(self._by_degree.get(d, ()))


def build_phall(generators, max_degree: int, multidegree_filter=None) -> PHallBasis:
    """All PH1-PH4 elements up to max_degree.

    multidegree_filter: a set of generators (each capped at multiplicity 1) or
    a dict generator -> cap. Unfiltered enumeration is factorial; filtered 0/1
    enumeration is what the class machinery uses.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    caps = None
    if multidegree_filter is not None:
        if isinstance(multidegree_filter, dict):
            caps = {g: int(c) for g, c in multidegree_filter.items()}
        else:
            caps = {g: 1 for g in multidegree_filter}
        generators = [g for g in generators if caps.get(g, 0) > 0]
    if max_degree > 10:
        raise CapacityError("Hall enumeration capped at degree 10")
    gens = sorted(set((int(i), int(j)) for i, j in generators), key=gen_key)
    leaves = [FormalBracket.leaf(g) for g in gens]
    by_degree = {1: leaves}
    zero_one = caps is not None and all(c == 1 for c in caps.values())

    def admissible_md(md):
        if caps is None:
            return True
        return all(caps.get(g, 0) >= c for g, c in md.items())

    for d in range(2, max_degree + 1):
        out = []
        for d1 in range(1, d):
            d2 = d - d1
            for b1 in by_degree.get(d1, ()):
                for b2 in by_degree.get(d2, ()):
                    if not b1.key < b2.key:
                        continue
                    if not b2.is_leaf and not b2.left.key <= b1.key:
                        continue
                    if zero_one:
                        s1, s2 = set(b1._leaves), set(b2._leaves)
                        if s1 & s2:
                            continue
                    elif caps is not None:
                        if not admissible_md(Counter(b1._leaves) + Counter(b2._leaves)):
                            continue
                    out.append(FormalBracket.node(b1, b2))
        out.sort(key=lambda e: e.key)
        by_degree[d] = out
    elements = [e for d in range(1, max_degree + 1) for e in by_degree.get(d, ())]
    return PHallBasis(tuple(gens), max_degree, tuple(elements), caps)


# --- projection -------------------------------------------------------------

_HALL_PRODUCT_CACHE = {}


def _hall_product(p: FormalBracket, q: FormalBracket) -> dict:
    """Projection of [p, q] (p, q Hall elements) as {element: int coefficient}."""
    if p.key == q.key:
        return {}
    if q.key < p.key:
        return {b: -c for b, c in _hall_product(q, p).items()}
    cached = _HALL_PRODUCT_CACHE.get((p.key, q.key))
    if cached is not None:
        return dict(cached)
    if q.is_leaf or q.left.key <= p.key:
        res = {FormalBracket.node(p, q): 1}
    else:
        # q = [q1, q2] with p < q1: [p,[q1,q2]] = [q1,[p,q2]] - [q2,[p,q1]]
        res = {}
        for b, c in _hall_product(p, q.right).items():
            for b2, c2 in _hall_product(q.left, b).items():
                res[b2] = res.get(b2, 0) + c * c2
        for b, c in _hall_product(p, q.left).items():
            for b2, c2 in _hall_product(q.right, b).items():
                res[b2] = res.get(b2, 0) - c * c2
        res = {b: c for b, c in res.items() if c != 0}
    _HALL_PRODUCT_CACHE[(p.key, q.key)] = dict(res)
    return res


def project_phall(b: FormalBracket, basis: PHallBasis):
    """Unique Hall representation of b: list of (int coefficient, basis element)."""
    genset = set(basis.generators)
    for g in b.leaves():
        if g not in genset:
            raise ValueError(f"leaf {g} outside the basis generator set")

    def proj(t):
        if t.is_leaf:
            return {t: 1}
        res = {}
        for bl, cl in proj(t.left).items():
            for br, cr in proj(t.right).items():
                for e, c in _hall_product(bl, br).items():
                    res[e] = res.get(e, 0) + cl * cr * c
        return {e: c for e, c in res.items() if c != 0}

    out = proj(b)
    if b.degree <= basis.max_degree:
        for e in out:
            if e not in basis:
                raise AssertionError(f"projected element {e} missing from basis")
    return sorted(((c, e) for e, c in out.items()), key=lambda t: t[1].key)


def rec_bracket_phall(p: Path, k1: int, k2: int, n: int, basis: PHallBasis):
    """Hall representation of rec_bracket(p, k1, k2): list of (coefficient, element).

    Path lengths 2, 3, 4 and 6 are projected; other lengths recurse and the
    split rule makes the combined elements Hall directly.
    """
    if p.length == 1:
        leaf = rec_bracket(p, k1, k2, n)
        return [(1, leaf)]
    if p.length in (2, 3, 4, 6):
        return project_phall(rec_bracket(p, k1, k2, n), basis)
    theta = _theta(p.length)
    q, q_c = split_at(p, theta)
    pivot = p.nodes[theta - 1]
    s = (n + pivot) if 1 <= k1 <= 2 * n else (2 * n + pivot)
    left = rec_bracket_phall(q_c, k1, s, n, basis)
    right = rec_bracket_phall(q, s, k2, n, basis)
    res = {}
    for cl, bl in left:
        for cr, br in right:
            for e, c in _hall_product(bl, br).items():
                res[e] = res.get(e, 0) + cl * cr * c
    return sorted(((c, e) for e, c in res.items() if c != 0),
                  key=lambda t: t[1].key)


# --- equivalence classes ----------------------------------------------------


def leaves_chain_ordered(b: FormalBracket) -> bool:
    """Fast necessary condition for eval != 0: the leaf pairs order into a chain
    (a0,a1),(a1,a2),...; returns True when undecidable (never discards unsure)."""
    leaves = b.leaves()
    firsts = [g[0] for g in leaves]
    seconds = [g[1] for g in leaves]
    if len(set(firsts)) != len(firsts) or len(set(seconds)) != len(seconds):
        return True  # repeated indices: stay conservative
    nxt = {g[0]: g for g in leaves}
    starts = [f for f in firsts if f not in set(seconds)]
    if len(starts) != 1:
        return False
    cur = starts[0]
    count = 0
    while cur in nxt:
        g = nxt.pop(cur)
        cur = g[1]
        count += 1
    return count == len(leaves)


def equivalence_class(b: FormalBracket, basis: PHallBasis, dim: int):
    """Reduced class: basis elements with b's multidegree and nonzero evaluation."""
    if b not in basis:
        raise ValueError("bracket not in basis")
    if b.degree > 10:
        raise CapacityError("class computation capped at degree 10")
    md = b.multidegree()
    out = []
    for cand in basis.by_degree(b.degree):
        if cand.multidegree() != md:
            continue
        if not leaves_chain_ordered(cand):
            continue
        if eval_bracket(cand, dim).any():
            out.append(cand)
    return tuple(out)


# --- rewriting --------------------------------------------------------------


@dataclass(frozen=True)
class BracketTerm:
    element: FormalBracket
    v: float
    target: tuple            # (k1, k2): the term stack reproduces h_{k1,k2}
    sign: int                # eval(element) = sign * E_{target} (0 if eval is 0)
    path: Path
    source: tuple            # ("G"|"A"|"Gdual", i, j) rest entry
    basis: PHallBasis


@dataclass(frozen=True)
class ExtendedSystem:
    split: AdmissibleSplit
    terms: tuple

    @property
    def n(self):
        return self.split.ap.n

    def bracket_matrix(self) -> np.ndarray:
        dim = 3 * self.n
        m = np.zeros((dim, dim))
        for t in self.terms:
            m += t.v * eval_bracket(t.element, dim)
        return m

    def rhs(self, z) -> np.ndarray:
        out = self.split.f_adm(z)
        dim = 3 * self.n
        for t in self.terms:
            out += t.v * (eval_bracket(t.element, dim) @ z)
        return out


def rewrite_dynamics(ap: AugmentedProblem, g: DiGraph) -> ExtendedSystem:
    """Express the non-admissible couplings as weighted Hall brackets.

    Raises NotConnectedError when a required path is missing and
    UnsupportedCouplingError for inequality couplings entering the mu-dynamics
    (bilinear; outside the bracket construction).
    """
    split = admissible_split(ap, g)
    n = ap.n
    if split.Adual_rest.any():
        bad = [(i + 1, j + 1) for i, j in zip(*np.nonzero(split.Adual_rest))]
        raise UnsupportedCouplingError(
            f"inequality rows couple non-neighbor states in the mu-dynamics: {bad}")

    jobs = []
    for i, j in zip(*np.nonzero(split.G_rest)):
        jobs.append(("G", i + 1, j + 1, n + j + 1, i + 1, -split.G_rest[i, j]))
    for i, j in zip(*np.nonzero(split.A_rest)):
        jobs.append(("A", i + 1, j + 1, 2 * n + j + 1, i + 1, -split.A_rest[i, j]))
    for i, j in zip(*np.nonzero(split.Gdual_rest)):
        jobs.append(("Gdual", i + 1, j + 1, j + 1, n + i + 1, split.Gdual_rest[i, j]))

    dim = 3 * n
    acc = {}
    for name, i, j, k1, k2, factor in jobs:
        p = shortest_path(g, i, j)
        raw = rec_bracket(p, k1, k2, n)
        basis = build_phall(set(raw.leaves()), max_degree=p.length,
                            multidegree_filter=set(raw.leaves()))
        for c, e in rec_bracket_phall(p, k1, k2, n, basis):
            v = float(factor) * c
            if e in acc:
                old = acc[e]
                acc[e] = BracketTerm(e, old.v + v, old.target, old.sign,
                                     old.path, old.source, old.basis)
            else:
                mat = eval_bracket(e, dim)
                nz = mat[np.nonzero(mat)]
                sign = int(np.sign(nz[0])) if nz.size else 0
                acc[e] = BracketTerm(e, v, (k1, k2), sign, p, (name, i, j), basis)
    terms = tuple(sorted((t for t in acc.values() if t.v != 0.0),
                         key=lambda t: t.element.key))
    return ExtendedSystem(split, terms)
