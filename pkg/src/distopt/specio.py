"""Problem-file loading and deterministic report/trajectory serialization."""

from __future__ import annotations

import json
import os
import tempfile
from importlib import resources

import numpy as np

from .digraph import DiGraph
from .problem import Problem, QuadraticObjective, augment
from .synthesis import FrequencyAssignment


def load_spec(path_or_dict, K_override=None):
    """Parse a problem file: graph, per-agent quadratics, constraint rows, K.

    Returns (Problem, AugmentedProblem, DiGraph).
    """
    if isinstance(path_or_dict, dict):
        d = path_or_dict
    else:
        with open(path_or_dict) as fh:
            d = json.load(fh)
    n = int(d["n"])
    g = DiGraph(n, frozenset((int(i), int(j)) for i, j in d.get("edges", [])))
    objectives = [QuadraticObjective(o["a"], o["c"]) for o in d["objectives"]]
    eq = {int(r["agent"]): (np.asarray(r["row"], float), float(r["rhs"]))
          for r in d.get("eq", [])}
    ineq = {int(r["agent"]): (np.asarray(r["row"], float), float(r["rhs"]))
            for r in d.get("ineq", [])}
    p = Problem(n, tuple(objectives), eq, ineq)
    K = float(K_override) if K_override is not None else float(d.get("K", 1.0))
    return p, augment(p, K), g


def bundled_spec(name: str) -> dict:
    """Bundled example problem ('graph_a' or 'graph_b')."""
    text = resources.files("distopt.data").joinpath(f"{name}.json").read_text()
    return json.loads(text)


# --- serialization ----------------------------------------------------------


def _json_str(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_json_str(v, indent + 1)}'
            for k, v in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        flat = all(isinstance(v, (int, float, str, bool)) or v is None for v in seq)
        if flat:
            return "[" + ", ".join(_json_str(v) for v in seq) + "]"
        items = ",\n".join(f"{pad}  {_json_str(v, indent + 1)}" for v in seq)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g")
    return json.dumps(str(obj))


def dumps_report(obj) -> str:
    """JSON with floats at 17 significant digits (byte-deterministic)."""
    return _json_str(obj) + "\n"


def write_atomic(path, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(traj, n: int) -> str:
    header = (["t"] + [f"x{i}" for i in range(1, n + 1)]
              + [f"nu{i}" for i in range(1, n + 1)]
              + [f"mu{i}" for i in range(1, n + 1)])
    lines = [",".join(header)]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join(format(float(v), ".17g") for v in [t, *row]))
    return "\n".join(lines) + "\n"


# --- frequency assignment round-trip ---------------------------------------


def freqs_to_json(fa: FrequencyAssignment) -> dict:
    return {
        "seed": fa.seed,
        "range": list(fa.freq_range),
        "attempts": fa.attempts,
        "denominator": fa.denominator,
        "deg2": [
            {"class": [list(g) for g in key], "omega": w}
            for key, w in fa.deg2.items()
        ],
        "higher": [
            {"class": [list(g) for g in key],
             "sets": [[{"gen": list(g), "omega": w} for g, w in sorted(
                 omegas.items())] for omegas in per_rho]}
            for key, per_rho in fa.higher.items()
        ],
        "certificates": fa.certificates,
    }


def freqs_from_json(d) -> FrequencyAssignment:
    deg2 = {tuple(tuple(g) for g in e["class"]): int(e["omega"])
            for e in d.get("deg2", [])}
    higher = {}
    for e in d.get("higher", []):
        key = tuple(tuple(g) for g in e["class"])
        higher[key] = tuple({tuple(a["gen"]): int(a["omega"]) for a in rho}
                            for rho in e["sets"])
    return FrequencyAssignment(deg2, higher, int(d.get("seed", 0)),
                               tuple(d.get("range", (2, 70))),
                               int(d.get("attempts", 0)),
                               int(d.get("denominator", 1)),
                               dict(d.get("certificates", {})))
