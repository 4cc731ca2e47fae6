"""Command line front-end: ``regret-control {synth,analyze,simulate,verify}``.

Model files are JSON objects::

    {"name": "S1", "A": [[0.5]], "B_u": [[1.0]], "B_w": [[1.0]],
     "Q": [[1.0]], "R": [[1.0]], "metadata": {"source": "hand"}}

``Q`` and ``R`` default to identity. Exit codes: 0 success, 2 bad input,
3 synthesis or numerical failure, 4 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, synthesis
from .errors import BadSpec, ParseError, RegretControlError, VerificationFailure
from .linalg import dare_residual, spectral_radius
from .lti import LtiRealization
from .plant import PlantModel, random_plant
from .simulate import DisturbanceSpec, batch_average

CONTROLLERS = ("h2", "hinf", "regret", "noncausal")
MATRIX_FIELDS = ("A", "B_u", "B_w", "Q", "R")


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModelFile:
    name: str
    model: PlantModel
    metadata: dict = field(default_factory=dict)


def _parse_matrix(value, key: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.array([[float(value)]])
    if not isinstance(value, list) or not value:
        raise ParseError(f"field '{key}': expected a non-empty nested array")
    rows = value if isinstance(value[0], list) else [value]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != width:
            raise ParseError(f"field '{key}': row {i} has a different length than row 0")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ParseError(f"field '{key}': entry [{i}][{j}] is not a number: {x!r}")
    return np.array(rows, dtype=float)


def parse_model(text: str, source: str = "<string>") -> ModelFile:
    """Parse model-file text. Raises :class:`ParseError` or :class:`InvalidModel`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be an object")
    for key in ("A", "B_u", "B_w"):
        if key not in data:
            raise ParseError(f"{source}: missing required field '{key}'")
    unknown = set(data) - set(MATRIX_FIELDS) - {"name", "metadata"}
    if unknown:
        raise ParseError(f"{source}: unknown field(s) {sorted(unknown)}")
    mats = {k: _parse_matrix(data[k], k) for k in MATRIX_FIELDS if data.get(k) is not None}
    metadata = data.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise ParseError(f"{source}: field 'metadata' must be an object")
    name = data.get("name", Path(source).stem)
    return ModelFile(str(name), PlantModel(**mats), metadata)


def load_model_file(path) -> ModelFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    return parse_model(text, str(path))


def load_model(path) -> PlantModel:
    return load_model_file(path).model


def model_to_dict(model: PlantModel, name: str = "model", metadata: dict | None = None) -> dict:
    out = {"name": name}
    out.update({k: getattr(model, k).tolist() for k in MATRIX_FIELDS})
    out["metadata"] = dict(metadata or {}, n=model.n, m=model.m, p=model.p)
    return out


def dump_model(model: PlantModel, path, name: str = "model", metadata: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, name, metadata), indent=2) + "\n")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _realization_dict(r: LtiRealization) -> dict:
    return {"A": r.A.tolist(), "B": r.B.tolist(), "C": r.C.tolist(), "D": r.D.tolist(),
            "input_kind": r.input_kind, "note": r.note}


def _controllers(model: PlantModel, names, epsilon: float, causal_only: bool = False):
    syn = synthesis.regret_synthesize(model, epsilon=epsilon)
    out = {}
    for name in names:
        if name == "h2":
            out[name] = synthesis.h2_controller(syn.riccati)
        elif name == "hinf":
            out[name] = synthesis.hinf_synthesize(model).controller
        elif name == "regret":
            out[name] = syn.controller
        elif name == "noncausal":
            if causal_only:
                raise BadSpec("the non-causal benchmark cannot be simulated")
            out[name] = analysis.NONCAUSAL
    return syn, out


def _controller_list(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in CONTROLLERS]
    if bad or not names:
        raise BadSpec(f"--controllers must be a comma list from {CONTROLLERS}, got {text!r}")
    return list(dict.fromkeys(names))


def _out_dir(args) -> Path:
    d = Path(args.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit_json(obj, path: Path | None):
    text = json.dumps(obj, indent=2)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    mf = load_model_file(args.model)
    model = mf.model
    syn = synthesis.regret_synthesize(model, epsilon=args.epsilon_gamma)
    ric = syn.riccati
    hinf = synthesis.hinf_synthesize(model)
    report = {
        "name": mf.name,
        "P": ric.P.tolist(),
        "K_lqr": ric.K_lqr.tolist(),
        "A_K": ric.A_K.tolist(),
        "Z": syn.Z.tolist(),
        "Pi": syn.Pi.tolist(),
        "gamma_sq": syn.gamma_sq,
        "gamma_sq_used": syn.gamma_sq_used,
        "epsilon_fallback": syn.epsilon,
        "Z_gamma": syn.Z_gamma.tolist(),
        "K_gamma": syn.K_gamma.tolist(),
        "F_gamma": syn.F_gamma.tolist(),
        "gamma_inf": hinf.gamma_inf,
        "controllers": {
            "h2": _realization_dict(synthesis.h2_controller(ric)),
            "hinf": _realization_dict(hinf.controller),
            "regret": _realization_dict(syn.controller),
            "regret_state_only": _realization_dict(syn.controller_state_only),
        },
        "diagnostics": {
            "dare_residual": dare_residual(model.A, model.B_u, model.Q, model.R, ric.P),
            "cond_R_eff": float(np.linalg.cond(ric.R_eff)),
            "rho_A_K": spectral_radius(ric.A_K),
            "rho_F_gamma": spectral_radius(syn.F_gamma),
            "pivot_cond": syn.pivot_cond,
        },
    }
    _emit_json(report, Path(args.output) if args.output else None)
    return 0


def cmd_analyze(args) -> int:
    mf = load_model_file(args.model)
    names = _controller_list(args.controllers)
    _, ctrls = _controllers(mf.model, names, args.epsilon_gamma)
    res = analysis.sweep(mf.model, ctrls, args.grid)
    out = _out_dir(args)
    csv_path = out / f"{mf.name}_sweep.csv"
    cols = ("frobenius_integrand", "opnorm_integrand", "regret_integrand")
    with csv_path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["omega"] + [f"{n}_{c}" for n in names for c in cols])
        omegas = res[names[0]].omegas
        for k, w in enumerate(omegas):
            wr.writerow([repr(float(w))] + [repr(float(getattr(res[n], c)[k])) for n in names for c in cols])
    table = {
        "model": mf.name,
        "columns": ["frobenius_sq", "opnorm_sq", "regret"],
        "rows": {n: res[n].table_row() for n in names},
    }
    _emit_json(table, out / f"{mf.name}_metrics.json")
    print(json.dumps(table, indent=2))
    return 0


def cmd_simulate(args) -> int:
    mf = load_model_file(args.model)
    model = mf.model
    names = _controller_list(args.controllers)
    _, ctrls = _controllers(model, names, args.epsilon_gamma, causal_only=True)
    spec = DisturbanceSpec(args.kind, model.p, seed=args.seed, sigma=args.sigma,
                           scale=args.dc_scale, direction="auto", beta=args.beta)
    res = batch_average(model, ctrls, spec, args.horizon, args.trials)
    out = _out_dir(args)
    with (out / f"{mf.name}_{args.kind}_cost.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + list(names))
        for t in range(args.horizon):
            wr.writerow([t] + [repr(float(res.curves[n][t])) for n in names])
    summary = {n: {"average_cost": res.mean(n), "stderr": res.stderr(n)} for n in names}
    _emit_json({"model": mf.name, "kind": args.kind, "horizon": args.horizon,
                "trials": args.trials, "seed": args.seed, "results": summary},
               out / f"{mf.name}_{args.kind}_summary.json")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_verify(args) -> int:
    models = []
    if args.model:
        mf = load_model_file(args.model)
        models.append((mf.name, mf.model))
    if args.random:
        rng = np.random.default_rng(args.seed)
        for i in range(args.random):
            n, m, p = (int(v) for v in rng.integers(1, (9, 5, 5)))
            models.append((f"random_{i}", random_plant(rng, n, m, p, rho=rng.uniform(0.2, 1.5))))
    if not models:
        raise BadSpec("verify needs a model file or --random N")
    failed = 0
    report = []
    for name, model in models:
        for c in analysis.verify_model(model, args.grid, args.horizon):
            failed += not c.passed
            report.append({"model": name, "check": c.name, "passed": c.passed,
                           "measured": c.measured, "tolerance": c.tolerance, "slack": c.slack})
            print(f"{'PASS' if c.passed else 'FAIL'} {name} {c.name} measured={c.measured:.3e} "
                  f"slack={c.slack:.3e}")
    if args.output:
        _emit_json(report, Path(args.output))
    if failed:
        raise VerificationFailure(f"{failed} check(s) failed")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regret-control",
                                     description="Regret-optimal, H2 and H-infinity control synthesis.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model_required=True):
        if model_required:
            p.add_argument("model", help="model file (JSON)")
        p.add_argument("--epsilon-gamma", type=float, default=synthesis.EPSILON_GAMMA,
                       help="relative relaxation of the optimal level if its gain is singular")

    p = sub.add_parser("synth", help="synthesize all controllers and print a JSON report")
    common(p)
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="frequency sweep: CSV integrands plus aggregate metrics")
    common(p)
    p.add_argument("--grid", type=int, default=analysis.GRID_SIZE)
    p.add_argument("--controllers", default="h2,hinf,regret,noncausal")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo cumulative-average cost curves")
    common(p)
    p.add_argument("--kind", choices=("white", "white_plus_dc", "ar1"), default="white")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.99)
    p.add_argument("--dc-scale", type=float, default=0.5)
    p.add_argument("--controllers", default="h2,hinf,regret")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="closed-form, oracle and dominance checks")
    p.add_argument("model", nargs="?", help="model file (JSON)")
    p.add_argument("--random", type=int, default=0, help="also check N random plants")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=analysis.GRID_SIZE)
    p.add_argument("--horizon", type=int, default=None, help="oracle horizon (default: from decay rate)")
    p.add_argument("-o", "--output", help="write the JSON check report here")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RegretControlError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
