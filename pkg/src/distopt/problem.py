"""Problem data, augmentation, Lagrangian, assumption checks and a KKT oracle.

The optimization problem is min sum_i F_i(x_i) subject to per-agent linear
rows: G_i x = g_i for i in Se and A_i x <= b_i for i in Si. Augmentation pads
every agent to exactly one equality and one inequality row (zero rows; slack
K > 0 on padded inequalities) without changing the feasible set or optimizer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog


class AssumptionError(Exception):
    pass


class InfeasibleError(Exception):
    pass


class OracleError(Exception):
    pass


@dataclass(frozen=True)
class Objective:
    """Strictly convex C^2 scalar objective given by value/derivative callbacks."""

    value: object
    grad: object


@dataclass(frozen=True)
class QuadraticObjective(Objective):
    """a*(x - c)^2 with a > 0."""

    a: float = 1.0
    c: float = 0.0

    def __init__(self, a, c):
        if a <= 0:
            raise ValueError("quadratic coefficient must be positive")
        object.__setattr__(self, "a", float(a))
        object.__setattr__(self, "c", float(c))
        object.__setattr__(self, "value", lambda x: self.a * (x - self.c) ** 2)
        object.__setattr__(self, "grad", lambda x: 2.0 * self.a * (x - self.c))


@dataclass(frozen=True)
class Problem:
    n: int
    objectives: tuple
    eq_rows: dict = field(default_factory=dict)    # i -> (row, rhs), 1-based agent
    ineq_rows: dict = field(default_factory=dict)  # i -> (row, rhs)

    def __post_init__(self):
        if len(self.objectives) != self.n:
            raise ValueError("need one objective per agent")
        object.__setattr__(self, "objectives", tuple(self.objectives))
        for name, rows in (("eq", self.eq_rows), ("ineq", self.ineq_rows)):
            for i, (row, rhs) in rows.items():
                if not 1 <= int(i) <= self.n:
                    raise ValueError(f"{name} agent index {i} out of range 1..{self.n}")
                row = np.asarray(row, dtype=float)
                if row.shape != (self.n,):
                    raise ValueError(f"{name} row for agent {i} has wrong length")
                rows[i] = (row, float(rhs))


@dataclass(frozen=True)
class AugmentedProblem:
    base: Problem
    G: np.ndarray
    g: np.ndarray
    A: np.ndarray
    b: np.ndarray
    Se: frozenset
    Si: frozenset
    K: float

    @property
    def n(self):
        return self.base.n

    def grad_F(self, x):
        return np.array([obj.grad(xi) for obj, xi in zip(self.base.objectives, x)])

    def F(self, x):
        return float(sum(obj.value(xi) for obj, xi in zip(self.base.objectives, x)))


def augment(p: Problem, K: float = 1.0) -> AugmentedProblem:
    if K <= 0:
        raise ValueError("padding constant K must be positive")
    n = p.n
    G = np.zeros((n, n))
    g = np.zeros(n)
    A = np.zeros((n, n))
    b = np.full(n, float(K))
    for i, (row, rhs) in p.eq_rows.items():
        if not row.any():
            raise AssumptionError(f"equality row of agent {i} is zero")
        if row[i - 1] == 0.0:
            raise AssumptionError(
                f"equality row of agent {i} has zero entry for its own variable")
        G[i - 1] = row
        g[i - 1] = rhs
    for i, (row, rhs) in p.ineq_rows.items():
        if not row.any():
            raise AssumptionError(f"inequality row of agent {i} is zero")
        if row[i - 1] == 0.0:
            raise AssumptionError(
                f"inequality row of agent {i} has zero entry for its own variable")
        A[i - 1] = row
        b[i - 1] = rhs
    return AugmentedProblem(p, G, g, A, b,
                            frozenset(p.eq_rows), frozenset(p.ineq_rows), float(K))


def lagrangian(ap: AugmentedProblem, x, nu, mu) -> float:
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if x.shape != (ap.n,) or nu.shape != (ap.n,) or mu.shape != (ap.n,):
        raise ValueError("dimension mismatch")
    return ap.F(x) + float(nu @ (ap.G @ x - ap.g)) + float(mu @ (ap.A @ x - ap.b))


@dataclass(frozen=True)
class SaddlePoint:
    x_star: np.ndarray
    nu_star: np.ndarray
    mu_star: np.ndarray
    active: frozenset = frozenset()

    def as_state(self):
        return np.concatenate([self.x_star, self.nu_star, self.mu_star])


def solve_kkt_oracle(ap: AugmentedProblem, tol: float = 1e-9) -> SaddlePoint:
    """Active-set enumeration for quadratic per-agent objectives.

    Solves the stationarity + feasibility linear system for every candidate
    active subset of the genuine inequalities and returns the unique candidate
    passing primal feasibility and dual nonnegativity (fewest active rows on
    degenerate ties).
    """
    n = ap.n
    for obj in ap.base.objectives:
        if not isinstance(obj, QuadraticObjective):
            raise OracleError("oracle supports quadratic objectives only")
    if len(ap.Si) > 20:
        raise OracleError("too many inequalities for active-set enumeration")
    a = np.array([o.a for o in ap.base.objectives])
    c = np.array([o.c for o in ap.base.objectives])
    eq_idx = sorted(ap.Se)
    ineq_idx = sorted(ap.Si)

    best = None
    for k in range(len(ineq_idx) + 1):
        for active in itertools.combinations(ineq_idx, k):
            m = len(eq_idx) + len(active)
            # unknowns: x (n), nu on eq rows, mu on active rows
            kkt = np.zeros((n + m, n + m))
            rhs = np.zeros(n + m)
            kkt[:n, :n] = np.diag(2.0 * a)
            rhs[:n] = 2.0 * a * c
            rows = [ap.G[i - 1] for i in eq_idx] + [ap.A[i - 1] for i in active]
            vals = [ap.g[i - 1] for i in eq_idx] + [ap.b[i - 1] for i in active]
            for r, (row, val) in enumerate(zip(rows, vals)):
                kkt[:n, n + r] = row
                kkt[n + r, :n] = row
                rhs[n + r] = val
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            # a singular-but-not-detected system can return garbage: make sure
            # the candidate actually solves the KKT equations
            if np.max(np.abs(kkt @ sol - rhs)) > 1e-7 * (1.0 + np.max(np.abs(rhs))):
                continue
            x = sol[:n]
            nu = np.zeros(n)
            mu = np.zeros(n)
            for r, i in enumerate(eq_idx):
                nu[i - 1] = sol[n + r]
            ok = True
            for r, i in enumerate(active):
                m_i = sol[n + len(eq_idx) + r]
                if m_i < -tol:
                    ok = False
                    break
                mu[i - 1] = max(m_i, 0.0)
            if not ok:
                continue
            # primal feasibility on inactive inequalities
            for i in ineq_idx:
                if i not in active and ap.A[i - 1] @ x - ap.b[i - 1] > tol:
                    ok = False
                    break
            if ok and (best is None or len(active) < len(best.active)):
                best = SaddlePoint(x, nu, mu, frozenset(active))
        if best is not None:
            break  # fewest-active tie-break: stop at the first cardinality with a hit
    if best is None:
        # distinguish infeasibility from a genuine KKT failure
        res = linprog(np.zeros(n),
                      A_ub=ap.A[[i - 1 for i in ineq_idx]] if ineq_idx else None,
                      b_ub=ap.b[[i - 1 for i in ineq_idx]] if ineq_idx else None,
                      A_eq=ap.G[[i - 1 for i in eq_idx]] if eq_idx else None,
                      b_eq=ap.g[[i - 1 for i in eq_idx]] if eq_idx else None,
                      bounds=[(None, None)] * n, method="highs")
        if not res.success:
            raise InfeasibleError("constraints are infeasible")
        raise OracleError("no KKT-consistent active set found")
    resid = ap.grad_F(best.x_star) + ap.G.T @ best.nu_star + ap.A.T @ best.mu_star
    if np.max(np.abs(resid)) > tol:
        raise OracleError("stationarity residual above tolerance")
    return best


@dataclass(frozen=True)
class AssumptionReport:
    assumption1_ok: bool
    assumption1_violations: tuple
    assumption3_ok: bool
    rest_entries: tuple          # (matrix, i, j) needing bracket rewriting, row side
    mfcq_ok: bool
    mfcq_detail: str


def check_assumptions(ap: AugmentedProblem, g) -> AssumptionReport:
    """Report on the diagonal condition, topology match and MFCQ at the oracle optimum.

    rest_entries lists the (matrix, row, col) positions of genuine constraint
    coefficients that do not match the communication topology (row side, i.e.
    the dual dynamics); these drive the bracket-rewriting path rather than
    being errors.
    """
    from .digraph import laplacian

    a1_viol = []
    for i in sorted(ap.Se):
        if ap.G[i - 1, i - 1] == 0.0 or not ap.G[i - 1].any():
            a1_viol.append(("G", i))
    for i in sorted(ap.Si):
        if ap.A[i - 1, i - 1] == 0.0 or not ap.A[i - 1].any():
            a1_viol.append(("A", i))

    lap = laplacian(g)
    rest = []
    for name, mat, idx in (("G", ap.G, ap.Se), ("A", ap.A, ap.Si)):
        for i in sorted(idx):
            for j in range(1, ap.n + 1):
                if j != i and mat[i - 1, j - 1] != 0.0 and lap[i - 1, j - 1] == 0:
                    rest.append((name, i, j))

    mfcq_ok, detail = _check_mfcq(ap)
    return AssumptionReport(
        assumption1_ok=not a1_viol,
        assumption1_violations=tuple(a1_viol),
        assumption3_ok=not rest,
        rest_entries=tuple(rest),
        mfcq_ok=mfcq_ok,
        mfcq_detail=detail,
    )


def _check_mfcq(ap: AugmentedProblem):
    try:
        sp = solve_kkt_oracle(ap)
    except (InfeasibleError, OracleError) as exc:
        return False, f"oracle failed: {exc}"
    eq_idx = sorted(ap.Se)
    if eq_idx:
        rows = ap.G[[i - 1 for i in eq_idx]]
        if np.linalg.matrix_rank(rows) < len(eq_idx):
            return False, "equality rows are linearly dependent"
    act = [i for i in sorted(ap.Si)
           if abs(ap.A[i - 1] @ sp.x_star - ap.b[i - 1]) <= 1e-9]
    if not act and not eq_idx:
        return True, "no constraints active"
    # find q with G q = 0 and A_i q <= -1 on active rows
    n = ap.n
    a_ub = ap.A[[i - 1 for i in act]] if act else None
    b_ub = -np.ones(len(act)) if act else None
    a_eq = ap.G[[i - 1 for i in eq_idx]] if eq_idx else None
    b_eq = np.zeros(len(eq_idx)) if eq_idx else None
    res = linprog(np.zeros(n), A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(-1e6, 1e6)] * n, method="highs")
    if not res.success:
        return False, "no strictly feasible direction at the optimum"
    return True, "ok"
