"""Fixed-step RK4 simulation, distributed closed loop, trajectory comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .digraph import DiGraph
from .liebracket import gen_key
from .problem import QuadraticObjective
from .spdyn import AdmissibleSplit
from .synthesis import InputSynthesis


class BlowUpError(Exception):
    def __init__(self, t):
        super().__init__(f"non-finite state at t={t:.6g}")
        self.t = t


class ResolutionError(Exception):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # one row per stored grid point
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def final(self):
        return self.states[-1]

    def sample(self, t):
        idx = int(np.argmin(np.abs(self.times - t)))
        return self.states[idx]


def integrate(rhs, z0, T, dt, store_stride: int = 1, t0: float = 0.0,
              meta=None) -> Trajectory:
    """Classical RK4 on a fixed grid; the last step is shortened to land on T."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = np.asarray(z0, dtype=float).copy()
    t = float(t0)
    times = [t]
    states = [z.copy()]
    steps = max(1, math.ceil((T - t0) / dt - 1e-12))
    for k in range(steps):
        h = min(dt, T - t)
        k1 = rhs(t, z)
        k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2)
        k4 = rhs(t + h, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (k + 1) * dt if k + 1 < steps else float(T)
        stored = (k + 1) % store_stride == 0 or k + 1 == steps
        if stored:
            if not np.all(np.isfinite(z)):
                raise BlowUpError(t)
            times.append(t)
            states.append(z.copy())
        elif (k + 1) % 512 == 0 and not np.all(np.isfinite(z)):
            raise BlowUpError(t)
    m = dict(meta or {})
    m.setdefault("dt", float(dt))
    return Trajectory(np.asarray(times), np.asarray(states), m)


def default_timestep(sigma: float, omega_max: float, oversample: int = 40) -> float:
    return 2.0 * math.pi / (sigma * omega_max * oversample)


def _fast_fadm(split: AdmissibleSplit):
    """Linear+bilinear factorization of f_adm when all objectives are quadratic."""
    ap = split.ap
    n = ap.n
    if not all(isinstance(o, QuadraticObjective) for o in ap.base.objectives):
        return split.f_adm
    a = np.array([o.a for o in ap.base.objectives])
    c = np.array([o.c for o in ap.base.objectives])
    dim = 3 * n
    L = np.zeros((dim, dim))
    c0 = np.zeros(dim)
    L[:n, :n] = -2.0 * np.diag(a)
    L[:n, n:2 * n] = -split.G_adm
    L[:n, 2 * n:] = -split.A_adm
    c0[:n] = 2.0 * a * c
    L[n:2 * n, :n] = split.Gdual_adm
    padded = np.array([i + 1 not in ap.Se for i in range(n)], dtype=float)
    L[n:2 * n, n:2 * n] = -np.diag(padded)
    c0[n:2 * n] = -ap.g
    A = ap.A
    b = ap.b

    def f(z):
        out = L @ z + c0
        out[2 * n:] += z[2 * n:] * (A @ z[:n] - b)
        return out

    return f


def central_rhs(ap):
    """(t, z) -> saddle_rhs(ap, z), with a precomputed quadratic fast path."""
    from .spdyn import saddle_rhs
    n = ap.n
    if not all(isinstance(o, QuadraticObjective) for o in ap.base.objectives):
        return lambda t, z: saddle_rhs(ap, z)
    a = np.array([o.a for o in ap.base.objectives])
    c = np.array([o.c for o in ap.base.objectives])
    dim = 3 * n
    L = np.zeros((dim, dim))
    c0 = np.zeros(dim)
    L[:n, :n] = -2.0 * np.diag(a)
    L[:n, n:2 * n] = -ap.G.T
    L[:n, 2 * n:] = -ap.A.T
    c0[:n] = 2.0 * a * c
    L[n:2 * n, :n] = ap.G
    padded = np.array([i + 1 not in ap.Se for i in range(n)], dtype=float)
    L[n:2 * n, n:2 * n] = -np.diag(padded)
    c0[n:2 * n] = -ap.g
    A, b = ap.A, ap.b

    def rhs(t, z):
        out = L @ z + c0
        out[2 * n:] += z[2 * n:] * (A @ z[:n] - b)
        return out

    return rhs


def distributed_rhs(split: AdmissibleSplit, generators, u: InputSynthesis,
                    sigma: float):
    """(t, z) -> f_adm(z) + sum_k (M_k z) U_k^sigma(t), vectorized over atoms."""
    gens = list(generators)
    for a in u.atoms:
        if a.gen not in gens:
            raise ValueError(f"input references unknown generator {a.gen}")
    f_adm = _fast_fadm(split)
    dim = 3 * split.ap.n
    if not u.atoms:
        return lambda t, z: f_adm(z)
    src = np.array([a.gen[0] - 1 for a in u.atoms])
    dst = np.array([a.gen[1] - 1 for a in u.atoms])
    # fold the sigma-dependent amplitude into the atom coefficients
    amp_cos = np.array([2.0 * sigma ** a.exponent * a.eta.real for a in u.atoms])
    amp_sin = np.array([-2.0 * sigma ** a.exponent * a.eta.imag for a in u.atoms])
    som = np.array([sigma * a.omega for a in u.atoms], dtype=float)

    def rhs(t, z):
        out = f_adm(z)
        vals = amp_cos * np.cos(som * t) + amp_sin * np.sin(som * t)
        out += np.bincount(dst, weights=vals * z[src], minlength=dim)
        return out

    return rhs


def integrate_distributed(rhs, z0, T, sigma, omega_max, dt=None,
                          oversample: int = 40, store_spacing: float = 1e-3,
                          meta=None) -> Trajectory:
    """Distributed run with the oscillation-resolution guard."""
    if omega_max <= 0:
        raise ValueError("omega_max must be positive")
    limit = 2.0 * math.pi / (sigma * omega_max * 8)
    if dt is None:
        dt = default_timestep(sigma, omega_max, oversample)
    if dt > limit:
        raise ResolutionError(
            f"dt={dt:.3g} cannot resolve sigma*omega_max={sigma * omega_max:.3g} "
            f"(limit {limit:.3g})")
    stride = max(1, int(round(store_spacing / dt)))
    m = dict(meta or {})
    m.update({"sigma": float(sigma), "omega_max": float(omega_max)})
    return integrate(rhs, z0, T, dt, store_stride=stride, meta=m)


@dataclass(frozen=True)
class ProbeResult:
    ok: bool
    witness: tuple = None

    def __bool__(self):
        return self.ok


def check_distributed(rhs, g: DiGraph, n: int, tol: float = 1e-12,
                      trials: int = 3, seed: int = 0) -> ProbeResult:
    """Numeric probe: agent i's rhs components may only react to I(j) for
    j in N(i) or j = i."""
    rng = np.random.default_rng(seed)
    dim = 3 * n
    for i in range(1, n + 1):
        allowed = g.neighbors(i) | {i}
        own = [i - 1, n + i - 1, 2 * n + i - 1]
        for j in range(1, n + 1):
            if j in allowed:
                continue
            for _ in range(trials):
                z = rng.normal(size=dim)
                z[2 * n:] = np.abs(z[2 * n:]) + 0.1
                t = float(rng.uniform(0.0, 1.0))
                base = rhs(t, z)[own]
                for idx in (j - 1, n + j - 1, 2 * n + j - 1):
                    z2 = z.copy()
                    z2[idx] += 1.0 + rng.uniform()
                    diff = np.max(np.abs(rhs(t, z2)[own] - base))
                    if diff > tol:
                        return ProbeResult(False, (i, j, idx + 1, float(diff)))
    return ProbeResult(True)


def sup_error(a: Trajectory, b: Trajectory) -> float:
    """Max Euclidean state distance over the coarser trajectory's grid."""
    coarse, fine = (a, b) if len(a.times) <= len(b.times) else (b, a)
    spacing = np.median(np.diff(coarse.times)) if len(coarse.times) > 1 else 0.0
    fspacing = np.median(np.diff(fine.times)) if len(fine.times) > 1 else 0.0
    if abs(a.times[-1] - b.times[-1]) > max(spacing, 1e-9):
        raise ValueError("incompatible horizons")
    idx = np.searchsorted(fine.times, coarse.times)
    idx = np.clip(idx, 1, len(fine.times) - 1)
    left_closer = (np.abs(fine.times[idx - 1] - coarse.times)
                   <= np.abs(fine.times[idx] - coarse.times))
    idx = np.where(left_closer, idx - 1, idx)
    allowed = 0.5 * max(spacing, fspacing) * (1 + 1e-9)
    if spacing and np.max(np.abs(fine.times[idx] - coarse.times)) > allowed:
        raise ValueError("grids cannot be aligned")
    diffs = np.linalg.norm(fine.states[idx] - coarse.states, axis=1)
    return float(np.max(diffs))
