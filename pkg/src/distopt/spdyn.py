"""Modified saddle-point dynamics and the graph-admissible / rest split.

State ordering z = [x (1..n), nu (n+1..2n), mu (2n+1..3n)]; agent i owns the
index set I(i) = {i, n+i, 2n+i} (1-based).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .digraph import DiGraph, laplacian
from .problem import AugmentedProblem


def index_set(i: int, n: int):
    """I(i) = {i, n+i, 2n+i}, 1-based."""
    return (i, n + i, 2 * n + i)


def make_state(x, nu, mu):
    z = np.concatenate([np.asarray(x, float), np.asarray(nu, float),
                        np.asarray(mu, float)])
    return z


def split_state(z, n):
    return z[:n], z[n:2 * n], z[2 * n:]


def saddle_rhs(ap: AugmentedProblem, z) -> np.ndarray:
    """xdot = -grad F - G^T nu - A^T mu; nudot = Gx - g + w(nu); mudot = diag(mu)(Ax - b)."""
    n = ap.n
    x, nu, mu = split_state(np.asarray(z, float), n)
    w = np.where([i + 1 not in ap.Se for i in range(n)], -nu, 0.0)
    xdot = -ap.grad_F(x) - ap.G.T @ nu - ap.A.T @ mu
    nudot = ap.G @ x - ap.g + w
    mudot = mu * (ap.A @ x - ap.b)
    return np.concatenate([xdot, nudot, mudot])


@dataclass(frozen=True)
class AdmissibleSplit:
    """Split of the constraint couplings into graph-admissible and rest parts.

    G_adm/G_rest and A_adm/A_rest split the transposed matrices entering the
    x-dynamics (G_adm + G_rest = G^T exactly). Gdual_*/Adual_* split the
    untransposed matrices entering the dual dynamics. Diagonal entries are
    always admissible (an agent knows its own state); an off-diagonal (i,j)
    entry is admissible iff l_ij != 0 in the Laplacian.
    """

    ap: AugmentedProblem
    G_adm: np.ndarray
    G_rest: np.ndarray
    A_adm: np.ndarray
    A_rest: np.ndarray
    Gdual_adm: np.ndarray
    Gdual_rest: np.ndarray
    Adual_adm: np.ndarray
    Adual_rest: np.ndarray

    def f_adm(self, z) -> np.ndarray:
        ap = self.ap
        n = ap.n
        x, nu, mu = split_state(np.asarray(z, float), n)
        w = np.where([i + 1 not in ap.Se for i in range(n)], -nu, 0.0)
        xdot = -ap.grad_F(x) - self.G_adm @ nu - self.A_adm @ mu
        nudot = self.Gdual_adm @ x - ap.g + w
        mudot = mu * (ap.A @ x - ap.b)
        return np.concatenate([xdot, nudot, mudot])

    def rest_contribution(self, z) -> np.ndarray:
        """saddle_rhs(z) - f_adm(z), from the rest matrices (exact identity)."""
        ap = self.ap
        n = ap.n
        x, nu, mu = split_state(np.asarray(z, float), n)
        xdot = -self.G_rest @ nu - self.A_rest @ mu
        nudot = self.Gdual_rest @ x
        return np.concatenate([xdot, nudot, np.zeros(n)])


def _split(mat: np.ndarray, mask: np.ndarray):
    adm = np.where(mask, mat, 0.0)
    return adm, mat - adm


def admissible_split(ap: AugmentedProblem, g: DiGraph) -> AdmissibleSplit:
    lap = laplacian(g)
    mask = (lap != 0) | np.eye(ap.n, dtype=bool)
    g_adm, g_rest = _split(ap.G.T.copy(), mask)
    a_adm, a_rest = _split(ap.A.T.copy(), mask)
    gd_adm, gd_rest = _split(ap.G.copy(), mask)
    ad_adm, ad_rest = _split(ap.A.copy(), mask)
    return AdmissibleSplit(ap, g_adm, g_rest, a_adm, a_rest,
                           gd_adm, gd_rest, ad_adm, ad_rest)
