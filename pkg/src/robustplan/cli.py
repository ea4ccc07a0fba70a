"""Command-line front end.

Every command prints exactly one JSON document on stdout and writes files
atomically, so a failed run leaves earlier outputs untouched.

Exit codes: 0 ok, 2 validation, 3 unreachable, 4 infeasible,
5 non-contractive (or no convergence), 6 I/O, 7 sampling budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

import numpy as np

from . import __version__, demos, io, mdp
from . import rng as rngmod
from .estimation import STANDARD_ERROR, VERBATIM
from .exceptions import Infeasible, NonContractive, PlanningError
from .pathing import constrained_shortest_path, execute_policy, max_prob_path, milestone_bound
from .roadmap import Roadmap, build, insert_query
from .scenario import sample_free_configs
from .svg import render_svg

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 6

BOUND_MODES = {"verbatim": VERBATIM, "stderr": STANDARD_ERROR}
HISTOGRAM_BINS = 10

logger = logging.getLogger("robustplan")


class UsageError(ValueError):
    """Bad flag value, reported with the validation exit code."""


# ------------------------------------------------------------------ checks


def _positive_int(name, value, minimum=1):
    if value is None or int(value) != value or value < minimum:
        raise UsageError(f"--{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _open_unit(name, value):
    if value is None or not 0.0 < value < 1.0:
        raise UsageError(f"--{name} must lie strictly between 0 and 1, got {value!r}")
    return float(value)


def _parse_sweep(text) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--sweep must be a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise UsageError("--sweep needs at least one value")
    for v in values:
        _open_unit("sweep", v)
    return values


def _parse_ids(text) -> List[int]:
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- commands


def cmd_validate(args):
    sf = io.load_scenario(args.scenario)
    sc = sf.scenario
    return {
        "valid": True,
        "dof": sc.dof,
        "robot": sc.robot.to_dict()["type"],
        "obstacles": len(sc.obstacles),
        "uncertain_obstacles": int(sum(max(o.std) > 0 for o in sc.obstacles)),
        "step_size": sc.step_size,
        "controllers": [c.to_dict() for c in sf.controllers],
    }


def cmd_demo(args):
    if args.list:
        return {"demos": sorted(demos.DEMOS)}
    if args.name is None:
        raise UsageError("give a demo name or --list")
    scenario, controller, params = demos.load_demo(args.name)
    doc = io.ScenarioFile(scenario, [controller], params).to_dict()
    if args.out:
        io.write_json(args.out, doc)
        return {"demo": args.name, "scenario": args.out, "planner": params}
    return doc


def _histogram(p) -> dict:
    counts, edges = np.histogram(p, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return {"bin_edges": [round(float(e), 10) for e in edges], "counts": counts.tolist()}


def cmd_build(args):
    sf = io.load_scenario(args.scenario)
    hints = sf.planner
    n = _positive_int("n", args.n if args.n is not None else hints.get("n", 200), 2)
    k = _positive_int("k", args.k if args.k is not None else hints.get("k", 10))
    T = _positive_int("trials", args.trials if args.trials is not None else hints.get("T", 100))
    gamma = _open_unit("gamma", args.gamma)
    rngmod.check_seed(args.seed)
    rm = build(sf.scenario, sf.controller, n, k, T, gamma, args.seed, BOUND_MODES[args.bound_mode], args.jobs)
    io.write_json(args.out, rm.to_dict())
    p = rm.edge_probabilities()
    return {
        "roadmap": args.out,
        "milestones": int(rm.n - 1),
        "edges": len(rm.edges),
        "edges_below_one": int(np.sum(p < 1.0)),
        "edge_probability_histogram": _histogram(p),
    }


def _plan_one(rq, s, g, p_min, S, use_p_hat):
    if p_min is None:
        path = max_prob_path(rq, s, g, use_p_hat)
    else:
        path = constrained_shortest_path(rq, s, g, p_min, S, use_p_hat)
    rec = path.to_dict()
    rec.update({"p_min": p_min, "S": S if p_min is not None else None})
    return path, rec


def cmd_plan(args):
    sf = io.load_scenario(args.scenario)
    rm = Roadmap.from_dict(io.read_json(args.roadmap))
    if rm.dof != sf.scenario.dof:
        raise UsageError(f"roadmap has {rm.dof} dof but the scenario has {sf.scenario.dof}")
    S = _positive_int("levels", args.levels)
    if args.p_min is not None:
        _open_unit("p-min", args.p_min)
    sweep = _parse_sweep(args.sweep) if args.sweep else None
    if sweep and args.p_min is not None:
        raise UsageError("--p-min and --sweep are mutually exclusive")
    if args.runs is not None:
        _positive_int("runs", args.runs)
    if args.k is not None:
        _positive_int("k", args.k)
    if args.trials is not None:
        _positive_int("trials", args.trials)
    rngmod.check_seed(args.seed)
    s, g, rq = insert_query(rm, sf.scenario, sf.controller, k=args.k, T=args.trials, seed=args.seed,
                            n_jobs=args.jobs)

    paths = []
    if sweep:
        records = []
        for p_min in sweep:
            try:
                path, rec = _plan_one(rq, s, g, p_min, S, args.use_p_hat)
                paths.append(path)
                rec["status"] = "ok"
            except Infeasible as exc:
                rec = {"status": "infeasible", "p_min": p_min, "S": S, "best_probability": exc.best_probability}
            records.append(rec)
        result = {"sweep": records}
    else:
        path, result = _plan_one(rq, s, g, args.p_min, S, args.use_p_hat)
        paths.append(path)
        if args.runs:
            rate, cost = execute_policy(sf.scenario, sf.controller, rq, path, args.runs, args.seed)
            result["execution"] = {"runs": args.runs, "success_rate": rate, "mean_cost": cost}
    if args.render:
        io.write_text(args.render, render_svg(sf.scenario, rq, paths))
        result["render"] = args.render
    if args.out:
        io.write_json(args.out, result)
    return result


def cmd_mdp_estimate(args):
    sf = io.load_scenario(args.scenario)
    n = _positive_int("n", args.n if args.n is not None else 20, 2)
    T = _positive_int("trials", args.trials if args.trials is not None else 100)
    alpha = args.alpha
    if not 0.0 <= alpha < 1.0:
        raise UsageError(f"--alpha must lie in [0, 1), got {alpha!r}")
    if args.neighbors is not None:
        _positive_int("neighbors", args.neighbors)
    if not args.failure_cost >= 0:
        raise UsageError("--failure-cost must be >= 0")
    absorbing = _parse_ids(args.absorbing)
    if any(not 0 <= i < n for i in absorbing):
        raise UsageError(f"--absorbing ids must lie in [0, {n})")
    rngmod.check_seed(args.seed)
    ms, _ = sample_free_configs(sf.scenario, rngmod.derive(args.seed, rngmod.MDP_MILESTONES), n)
    est = mdp.estimate(sf.scenario, ms, sf.controllers, alpha, T, args.seed, args.neighbors, absorbing,
                       args.failure_cost)
    io.write_json(args.out, est.to_dict())
    return {
        "estimate": args.out,
        "regions": est.n_regions,
        "actions": est.n_actions,
        "trials_per_state": est.n_trials,
        "alpha": alpha,
        "max_row_mass": float(est.P_hat.sum(-1).max()),
    }


def cmd_mdp_solve(args):
    est = mdp.MdpEstimate.from_dict(io.read_json(args.estimate))
    gamma = _open_unit("gamma", args.gamma)
    if not args.tol > 0:
        raise UsageError("--tol must be > 0")
    residuals = []

    def record(it, res):
        residuals.append(res)
        if args.verbose:
            logger.info("sweep %d residual %.3e", it, res)

    if args.mode == "interval":
        vi = mdp.interval_value_iteration(mdp.interval_bounds(est, gamma), tol=args.tol, callback=record)
        result = {"mode": "interval", "gamma": gamma, "V_lo": vi.V_lo.tolist(), "V_hi": vi.V_hi.tolist(),
                  "policy": vi.policy_hi.tolist(), "iterations": vi.iterations}
    else:
        V, policy = mdp.robust_value_iteration_ellipsoidal(mdp.ellipsoidal_bounds(est, gamma), tol=args.tol,
                                                           callback=record)
        result = {"mode": "ellipsoid", "gamma": gamma, "V": V.tolist(), "policy": policy.tolist(),
                  "iterations": len(residuals)}
    result["targets"] = [int(est.targets[i, a]) for i, a in enumerate(result["policy"])]
    if args.verbose:
        result["residuals"] = residuals
    io.write_json(args.out, result)
    return result


def cmd_bound(args):
    return milestone_bound(args.epsilon, args.alpha, args.beta, args.gamma)


# ------------------------------------------------------------------ parser


def _add_common(p, *names):
    if "scenario" in names:
        p.add_argument("--scenario", required=True, help="scenario JSON file")
    if "seed" in names:
        p.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    if "jobs" in names:
        p.add_argument("--jobs", type=int, default=None, help="worker processes for edge simulation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustplan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and check a scenario file")
    _add_common(p, "scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("demo", help="write a shipped demo scenario")
    p.add_argument("name", nargs="?", choices=sorted(demos.DEMOS))
    p.add_argument("--out", help="scenario file to write (default: print it)")
    p.add_argument("--list", action="store_true", help="list the demo names")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("build", help="sample milestones and estimate edges")
    _add_common(p, "scenario", "seed", "jobs")
    p.add_argument("--out", "--roadmap", dest="out", required=True, help="roadmap JSON to write")
    p.add_argument("--n", type=int, help="node ids; n-1 milestones are sampled")
    p.add_argument("--k", type=int, help="nearest neighbors per milestone (default 10)")
    p.add_argument("--trials", type=int, help="trials per edge (default 100)")
    p.add_argument("--gamma", type=float, default=0.95, help="confidence level (default 0.95)")
    p.add_argument("--bound-mode", choices=sorted(BOUND_MODES), default="verbatim")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("plan", help="connect the query and plan a path")
    _add_common(p, "scenario", "seed", "jobs")
    p.add_argument("--roadmap", required=True, help="roadmap JSON from 'build'")
    p.add_argument("--p-min", type=float, help="success constraint; omit for the max-probability path")
    p.add_argument("--levels", type=int, default=1024, help="probability levels S (default 1024)")
    p.add_argument("--sweep", help="comma-separated p_min values")
    p.add_argument("--k", type=int, help="query neighbors (default: the roadmap's k)")
    p.add_argument("--trials", type=int, help="query trials per edge (default: the roadmap's T)")
    p.add_argument("--use-p-hat", action="store_true", help="plan on empirical rather than lower-bound probabilities")
    p.add_argument("--runs", type=int, help="execute the path this many times and report the success rate")
    p.add_argument("--render", metavar="OUT.svg", help="write an SVG drawing")
    p.add_argument("--out", help="also write the result JSON here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("mdp", help="robust MDP estimation and solving")
    msub = p.add_subparsers(dest="mdp_command", required=True)
    q = msub.add_parser("estimate", help="simulate region transitions")
    _add_common(q, "scenario", "seed")
    q.add_argument("--out", required=True, help="estimate JSON to write")
    q.add_argument("--n", type=int, help="milestones / regions (default 20)")
    q.add_argument("--trials", type=int, help="trials per (region, action) (default 100)")
    q.add_argument("--alpha", type=float, default=0.95, help="discount factor (default 0.95)")
    q.add_argument("--neighbors", type=int, help="neighbor milestones per region used as targets")
    q.add_argument("--absorbing", help="comma-separated region ids that end the process")
    q.add_argument("--failure-cost", type=float, default=0.0, help="cost charged on collision or timeout")
    q.set_defaults(func=cmd_mdp_estimate)
    q = msub.add_parser("solve", help="robust value iteration on an estimate")
    q.add_argument("--estimate", required=True, help="estimate JSON from 'mdp estimate'")
    q.add_argument("--out", required=True, help="solution JSON to write")
    q.add_argument("--mode", choices=("interval", "ellipsoid"), default="interval")
    q.add_argument("--gamma", type=float, default=0.95, help="confidence level (default 0.95)")
    q.add_argument("--tol", type=float, default=1e-8)
    q.add_argument("--verbose", action="store_true", help="log and record per-sweep residuals")
    q.set_defaults(func=cmd_mdp_solve)

    p = sub.add_parser("bound", help="milestones sufficient for an expansive space")
    for name in ("epsilon", "alpha", "beta", "gamma"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.set_defaults(func=cmd_bound)
    return parser


def _error(kind, exc, **extra):
    d = {"error": kind, "message": str(exc)}
    d.update(extra)
    return d


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    code = EXIT_OK
    try:
        out = args.func(args)
    except Infeasible as exc:
        out, code = _error("infeasible", exc, best_probability=exc.best_probability,
                           p_min=getattr(args, "p_min", None), S=getattr(args, "levels", None)), exc.exit_code
    except NonContractive as exc:
        out, code = _error("non_contractive", exc, offenders=exc.offenders), exc.exit_code
    except PlanningError as exc:
        kind = "".join("_" + c.lower() if c.isupper() else c for c in type(exc).__name__).lstrip("_")
        out, code = _error(kind, exc), exc.exit_code
    except OSError as exc:
        out, code = _error("io", exc), EXIT_IO
    except (ValueError, json.JSONDecodeError) as exc:
        out, code = _error("validation", exc), EXIT_VALIDATION
    sys.stdout.write(io.dumps(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
