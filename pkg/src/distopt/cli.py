"""Batch front end: solve / synthesize / simulate / compare / verify.

Loads a JSON problem file, runs the pipeline, and emits deterministic JSON
reports and CSV trajectories (plus optional PNG figures) into --out.

Exit codes: 0 ok, 2 infeasible, 3 connectivity, 4 frequency search,
5 invariant failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .digraph import NotConnectedError
from .liebracket import (UnsupportedCouplingError, admissible_fields,
                         eval_bracket, is_phall_element, rewrite_dynamics)
from .problem import (AssumptionError, InfeasibleError, check_assumptions,
                      solve_kkt_oracle)
from .sim import (BlowUpError, central_rhs, check_distributed,
                  default_timestep, distributed_rhs, integrate,
                  integrate_distributed, sup_error)
from .specio import (bundled_spec, dumps_report, freqs_from_json,
                     freqs_to_json, load_spec, trajectory_csv, write_atomic)
from .spdyn import saddle_rhs
from .synthesis import (INDEPENDENCE_BUDGET, FrequencySearchError,
                        assemble_inputs, build_classes, check_independent,
                        check_minimally_canceling, eta_coefficients,
                        synthesize)


class VerificationError(Exception):
    pass


# --- plumbing ----------------------------------------------------------------


def _threads() -> int:
    raw = os.environ.get("DISTOPT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 2


def _load(args):
    name = args.spec
    if name in ("graph_a", "graph_b") and not os.path.exists(name):
        spec = bundled_spec(name)
    else:
        spec = name
    return load_spec(spec, K_override=args.K)


def _emit(args, name: str, text: str):
    if args.out:
        path = os.path.join(args.out, name)
        write_atomic(path, text)
        print(f"wrote {path}")


def _z0(args, n):
    if getattr(args, "z0", None):
        vals = [float(v) for v in args.z0.split(",")]
        if len(vals) != 3 * n:
            raise ValueError(f"--z0 needs {3 * n} comma-separated values")
        return np.array(vals)
    return np.ones(3 * n)


def _freq_range(args):
    lo, hi = (int(v) for v in args.freq_range.split(","))
    return lo, hi


def _validate_frequencies(classes, fa):
    """Re-run the exact verifiers on a (possibly externally edited) assignment."""
    for c in classes:
        if c.degree == 2:
            if c.key not in fa.deg2:
                raise VerificationError(f"missing frequency for class {c.key}")
            if fa.deg2[c.key] <= 0:
                raise VerificationError(f"nonpositive frequency for class {c.key}")
        else:
            per_rho = fa.higher.get(c.key)
            if per_rho is None or len(per_rho) != len(c.members):
                raise VerificationError(f"missing frequency sets for class {c.key}")
            for omegas in per_rho:
                vals = [omegas[g] for g in c.gens]
                if not check_minimally_canceling(vals):
                    raise VerificationError(
                        f"frequency set {sorted(vals)} is not minimally canceling")
    coll = fa.collection()
    if coll:
        cert = fa.certificates.get("independence_budget")
        budget = min(sum(len(s) for s in coll),
                     int(cert) if cert else INDEPENDENCE_BUDGET)
        if not check_independent(coll, budget=budget):
            raise VerificationError("frequency collection is not independent")


def _synthesize(extended, args):
    """Run synthesis, or rebuild the inputs from a frequency override file."""
    beta = args.beta_primal
    if getattr(args, "freqs", None):
        with open(args.freqs) as fh:
            d = json.load(fh)
        fa = freqs_from_json(d.get("frequencies", d))
        classes = build_classes(extended)
        _validate_frequencies(classes, fa)
        etas = [eta_coefficients(c, fa, beta, extended.n) for c in classes]
        return classes, fa, assemble_inputs(extended, fa, etas)
    return synthesize(extended, args.seed, _freq_range(args), beta)


def _plot_trajectory(traj, n, path, title):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for i in range(n):
        ax.plot(traj.times, traj.states[:, i], lw=1.0, label=f"x{i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("primal state")
    ax.set_title(title)
    ax.legend(ncol=min(n, 5), fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _plot_compare(central, dist, n, path, title):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i in range(n):
        col = colors[i % len(colors)]
        ax.plot(dist.times, dist.states[:, i], lw=0.5, color=col, alpha=0.6)
        ax.plot(central.times, central.states[:, i], lw=1.6, color=col,
                label=f"x{i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("primal state")
    ax.set_title(title)
    ax.legend(ncol=min(n, 5), fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# --- commands ----------------------------------------------------------------


def cmd_solve(args) -> int:
    p, ap, g = _load(args)
    sp = solve_kkt_oracle(ap)
    report = {
        "K": ap.K,
        "x_star": list(sp.x_star),
        "nu_star": list(sp.nu_star),
        "mu_star": list(sp.mu_star),
        "active": sorted(sp.active),
        "F_star": ap.F(sp.x_star),
    }
    print("x*     =", np.array2string(np.asarray(sp.x_star), precision=10))
    print("nu*    =", np.array2string(np.asarray(sp.nu_star), precision=10))
    print("mu*    =", np.array2string(np.asarray(sp.mu_star), precision=10))
    print("active =", sorted(sp.active))
    print(f"F*     = {ap.F(sp.x_star):.10g}")
    _emit(args, "solve.json", dumps_report(report))
    return 0


def _term_entry(t):
    return {
        "source": [t.source[0], int(t.source[1]), int(t.source[2])],
        "path": [int(v) for v in t.path.nodes],
        "bracket": t.element.sexpr(),
        "degree": t.element.degree,
        "v": t.v,
        "target": [int(t.target[0]), int(t.target[1])],
        "sign": t.sign,
    }


def _synthesis_report(extended, classes, fa, inputs):
    return {
        "n": extended.n,
        "terms": [_term_entry(t) for t in extended.terms],
        "classes": [
            {"generators": [list(g) for g in c.gens],
             "degree": c.degree,
             "members": [m.sexpr() for m in c.members],
             "vtilde": list(c.vtilde)}
            for c in classes
        ],
        "frequencies": freqs_to_json(fa),
        "atoms": [
            {"gen": list(a.gen), "omega": a.omega,
             "eta_re": a.eta.real, "eta_im": a.eta.imag,
             "exponent": a.exponent}
            for a in inputs.atoms
        ],
        "omega_max": inputs.omega_max(),
    }


def cmd_synthesize(args) -> int:
    p, ap, g = _load(args)
    extended = rewrite_dynamics(ap, g)
    classes, fa, inputs = _synthesize(extended, args)
    report = _synthesis_report(extended, classes, fa, inputs)
    print(f"{len(extended.terms)} bracket terms, {len(classes)} classes, "
          f"{len(inputs.atoms)} input atoms")
    for t in extended.terms:
        print(f"  v={t.v:+g}  path={list(t.path.nodes)}  {t.element.sexpr()}")
    if args.dump_brackets:
        print(dumps_report(report), end="")
    _emit(args, "synthesis.json", dumps_report(report))
    return 0


def _run_central(ap, z0, T, dt, spacing):
    stride = max(1, int(round(spacing / dt)))
    return integrate(central_rhs(ap), z0, T, dt, store_stride=stride,
                     meta={"mode": "central"})


def _run_distributed(ap, g, extended, inputs, z0, T, sigma, args):
    gens = admissible_fields(g, ap.n)
    rhs = distributed_rhs(extended.split, gens, inputs, sigma)
    omega_max = inputs.omega_max() or 1
    return rhs, integrate_distributed(
        rhs, z0, T, sigma, omega_max, dt=args.dt, oversample=args.oversample,
        store_spacing=args.store_spacing, meta={"mode": "distributed"})


def cmd_simulate(args) -> int:
    p, ap, g = _load(args)
    z0 = _z0(args, ap.n)
    T = args.T
    if args.mode == "central":
        dt = args.dt if args.dt else 1e-3
        traj = _run_central(ap, z0, T, dt, args.store_spacing)
    else:
        extended = rewrite_dynamics(ap, g)
        classes, fa, inputs = _synthesize(extended, args)
        _, traj = _run_distributed(ap, g, extended, inputs, z0, T,
                                   args.sigma, args)
    summary = {
        "mode": args.mode,
        "T": T,
        "dt": traj.meta.get("dt"),
        "sigma": args.sigma if args.mode == "distributed" else None,
        "final_state": list(traj.final),
        "final_x": list(traj.final[:ap.n]),
    }
    try:
        sp = solve_kkt_oracle(ap)
        summary["x_star"] = list(sp.x_star)
        summary["final_x_error_inf"] = float(
            np.max(np.abs(traj.final[:ap.n] - sp.x_star)))
    except InfeasibleError:
        pass
    print(f"{args.mode} run: T={T}, {len(traj.times)} stored points, "
          f"x(T)={np.array2string(traj.final[:ap.n], precision=6)}")
    _emit(args, "trajectory.csv", trajectory_csv(traj, ap.n))
    _emit(args, "summary.json", dumps_report(summary))
    if args.out and not args.no_plot:
        _plot_trajectory(traj, ap.n, os.path.join(args.out, "trajectory.png"),
                         f"{args.mode} trajectory (T={T})")
        print(f"wrote {os.path.join(args.out, 'trajectory.png')}")
    return 0


def cmd_compare(args) -> int:
    p, ap, g = _load(args)
    z0 = _z0(args, ap.n)
    T = args.T
    extended = rewrite_dynamics(ap, g)
    classes, fa, inputs = _synthesize(extended, args)
    dt_c = 1e-3 if args.dt is None else args.dt

    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        fut_c = ex.submit(_run_central, ap, z0, T, dt_c, args.store_spacing)
        fut_d = ex.submit(_run_distributed, ap, g, extended, inputs, z0, T,
                          args.sigma, args)
    central = fut_c.result()
    _, dist = fut_d.result()

    err = sup_error(central, dist)
    x_diff = float(np.max(np.abs(central.final[:ap.n] - dist.final[:ap.n])))
    report = {
        "sigma": args.sigma,
        "T": T,
        "sup_error": err,
        "final_x_diff_inf": x_diff,
        "central_final": list(central.final),
        "distributed_final": list(dist.final),
    }
    print(f"sigma={args.sigma}: sup-error={err:.6g}, "
          f"|x_c(T)-x_d(T)|_inf={x_diff:.6g}")
    _emit(args, "central.csv", trajectory_csv(central, ap.n))
    _emit(args, "distributed.csv", trajectory_csv(dist, ap.n))
    _emit(args, "compare.json", dumps_report(report))
    if args.out and not args.no_plot:
        _plot_compare(central, dist, ap.n,
                      os.path.join(args.out, "compare.png"),
                      f"central (thick) vs distributed (thin), sigma={args.sigma}")
        print(f"wrote {os.path.join(args.out, 'compare.png')}")
    return 0


def cmd_verify(args) -> int:
    checks = []

    def record(name, ok, detail=""):
        checks.append((name, bool(ok), detail))
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}" +
              (f"  ({detail})" if detail and not ok else ""))

    try:
        p, ap, g = _load(args)
    except AssumptionError as e:
        print(f"  [FAIL] assumptions  ({e})")
        return 5
    rep = check_assumptions(ap, g)
    record("assumption 1 (augmentation diagonals)", rep.assumption1_ok,
           str(rep.assumption1_violations))
    record("constraint qualification at oracle solution", rep.mfcq_ok,
           str(rep.mfcq_detail))

    extended = rewrite_dynamics(ap, g)
    dim = 3 * ap.n
    rng = np.random.default_rng(args.seed)
    m = extended.bracket_matrix()
    worst = 0.0
    for _ in range(5):
        z = rng.normal(size=dim)
        resid = saddle_rhs(ap, z) - (extended.split.f_adm(z) + m @ z)
        worst = max(worst, float(np.max(np.abs(resid))))
    record("split + bracket rewrite exactness", worst <= 1e-9, f"residual {worst:.3g}")

    hall_ok = all(is_phall_element(t.element, t.basis.generators)
                  for t in extended.terms)
    record("bracket terms lie in their Hall bases", hall_ok)
    sign_ok = all(
        np.array_equal(
            eval_bracket(t.element, dim),
            t.sign * eval_bracket(
                type(t.element).leaf(t.target), dim))
        for t in extended.terms if t.sign != 0)
    record("bracket evaluations hit their targets", sign_ok)

    freq_ok = True
    inputs = None
    try:
        classes, fa, inputs = _synthesize(extended, args)
        _validate_frequencies(classes, fa)
    except (VerificationError, FrequencySearchError) as e:
        freq_ok = False
        record("frequency certificates", False, str(e))
    if freq_ok:
        record("frequency certificates", True)
        gens = admissible_fields(g, ap.n)
        rhs = distributed_rhs(extended.split, gens, inputs, args.sigma)
        probe = check_distributed(rhs, g, ap.n)
        record("closed loop is distributed", probe.ok, str(probe.witness))
        raw = central_rhs(ap)
        probe_raw = check_distributed(raw, g, ap.n)
        record("centralized rhs fails the probe", not probe_raw.ok)

    failed = [name for name, ok, _ in checks if not ok]
    if failed:
        print(f"{len(failed)} of {len(checks)} checks failed")
        return 5
    print(f"all {len(checks)} checks passed")
    return 0


# --- argument parsing ---------------------------------------------------------


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="distopt",
        description="Distributed optimization via Lie-bracket approximation "
                    "of saddle-point dynamics.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, freq=False, run=False):
        sp.add_argument("--spec", required=True,
                        help="problem JSON file, or bundled name graph_a/graph_b")
        sp.add_argument("--K", type=float, default=None,
                        help="augmentation constant override (K > 0)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        if freq:
            sp.add_argument("--freq-range", default="2,70", metavar="LO,HI")
            sp.add_argument("--beta-primal", type=float, default=1.0,
                            help="amplitude scale for primal-entering channels")
            sp.add_argument("--freqs", default=None,
                            help="frequency assignment JSON override")
        if run:
            sp.add_argument("--sigma", type=float, default=1000.0)
            sp.add_argument("--T", type=float, default=2.0)
            sp.add_argument("--dt", type=float, default=None)
            sp.add_argument("--oversample", type=int, default=40)
            sp.add_argument("--store-spacing", type=float, default=1e-3)
            sp.add_argument("--z0", default=None,
                            help="comma-separated initial state (default: all ones)")
            sp.add_argument("--no-plot", action="store_true",
                            help="skip the PNG figure")

    sp = sub.add_parser("solve", help="KKT oracle for the loaded problem")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("synthesize", help="bracket rewrite + input synthesis")
    common(sp, freq=True)
    sp.add_argument("--dump-brackets", action="store_true",
                    help="print the full JSON report to stdout")
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("simulate", help="integrate one flow")
    common(sp, freq=True, run=True)
    sp.add_argument("--mode", choices=("central", "distributed"),
                    default="central")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="central vs distributed run")
    common(sp, freq=True, run=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("verify", help="invariant battery")
    common(sp, freq=True)
    sp.add_argument("--sigma", type=float, default=1000.0)
    sp.set_defaults(func=cmd_verify)

    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as e:
        print(f"error: infeasible problem: {e}", file=sys.stderr)
        return 2
    except NotConnectedError as e:
        print(f"error: graph connectivity: {e}", file=sys.stderr)
        return 3
    except FrequencySearchError as e:
        print(f"error: frequency search: {e}", file=sys.stderr)
        return 4
    except (VerificationError, AssumptionError, UnsupportedCouplingError,
            BlowUpError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
