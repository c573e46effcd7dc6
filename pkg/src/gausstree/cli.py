"""Command-line entry point: ``gausstree <command> ...``.

Exit codes: 0 on success, 1 on a domain error (bad model, infeasible
problem, unreadable input), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__
from .approx_rate import approx_rate_closed_form, approx_rate_snr
from .chow_liu import learn_structure
from .empirical import empirical_covariance, load_samples, sample
from .errors import ConstraintInfeasible, GaussTreeError
from .exact_rate import SolverOptions, crossover_problem, exact_error_exponent, solve_crossover_rate
from .exponent import METHODS, approx_exponent
from .extremal import make_chain, make_hybrid, make_star, place_correlations, verify_extremal
from .model import load_model, model_from_edges
from .simulate import default_threads, error_curve, fig5_experiment, parse_grid

DEFAULT_SEED = 0


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _float_grid(text: str) -> list[float]:
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    return _floats(text)


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit_json(payload, out) -> None:
    with _output(out) as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def _value(v: float):
    return "NoErrorEvents" if math.isinf(v) else v


# --- commands ---------------------------------------------------------------


def cmd_make(args) -> int:
    if args.kind == "star":
        model = make_star(args.d, args.rho)
    elif args.kind == "chain":
        model = make_chain(args.d, args.rho, sort=args.sort)
    else:
        model = place_correlations(make_hybrid(args.d), args.rho)
    _emit_json(model.to_dict(), args.out)
    return 0


def cmd_learn(args) -> int:
    if args.samples:
        batch = load_samples(args.samples)
    elif args.model:
        if args.n is None:
            raise GaussTreeError("--model requires --n")
        batch = sample(load_model(args.model), args.n, args.seed)
    else:
        raise GaussTreeError("provide --samples or --model")
    tree = learn_structure(empirical_covariance(batch))
    _emit_json({"d": tree.d, "n": batch.n, "edges": [list(e) for e in tree.edges]}, args.out)
    return 0


def cmd_exact(args) -> int:
    opts = SolverOptions(starts=args.starts, gtol=args.tol, seed=args.seed)
    report = exact_error_exponent(load_model(args.model), opts, workers=args.threads)
    payload = {"K_p": _value(report.value), "argmin": report.to_dict()["argmin"], "diagnostics": report.diagnostics}
    _emit_json(payload, args.out)
    return 0


def cmd_approx(args) -> int:
    model = load_model(args.model)
    methods = METHODS if args.method == "all" else (args.method,)
    payload = {}
    for m in methods:
        rep = approx_exponent(model, m)
        payload[m] = {"K_tilde": _value(rep.value), "argmin": rep.to_dict()["argmin"]}
    _emit_json(payload, args.out)
    return 0


def _embedded_problem(rho_e: float, rho_ep: float):
    # three-node chain 1-2-3 with the edge (1,2) and non-edge (1,3)
    if not 0 < abs(rho_ep) < abs(rho_e):
        raise ConstraintInfeasible("snr/exact need 0 < |rho_ep| < |rho_e| to embed the pair in a tree")
    model = model_from_edges(3, [(1, 2, rho_e), (2, 3, rho_ep / rho_e)])
    return crossover_problem(model, (1, 2), (1, 3))


def cmd_crossover(args) -> int:
    methods = ("closed", "snr", "exact") if args.method == "all" else tuple(args.method.split(","))
    payload = {"rho_e": args.rho_e, "rho_ep": args.rho_ep}
    for m in methods:
        if m == "closed":
            payload["closed"] = approx_rate_closed_form(args.rho_e, args.rho_ep)
        elif m == "snr":
            payload["snr"] = approx_rate_snr(_embedded_problem(args.rho_e, args.rho_ep))
        elif m == "exact":
            res = solve_crossover_rate(_embedded_problem(args.rho_e, args.rho_ep), SolverOptions(seed=args.seed))
            payload["exact"] = res.rate
            payload["exact_diagnostics"] = {
                "starts_used": res.starts_used,
                "constraint_violation": res.constraint_violation,
                "spread": res.spread,
            }
        else:
            raise _UsageError(f"unknown method {m!r}")
    _emit_json(payload, args.out)
    return 0


def cmd_extremal(args) -> int:
    report = verify_extremal(args.d, args.rho, max_perms=args.perms, seed=args.seed, allow_large=args.allow_large_d)
    payload = report.to_dict()
    if not report.chain_claim_applies and not args.allow_large_rho:
        payload["note"] = "some |rho| >= rho_crit; chain result is a probe, not a claim"
    _emit_json(payload, args.out)
    return 0 if report.ok else 1


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    curve = error_curve(
        model,
        parse_grid(args.n_grid),
        args.trials,
        seed=args.seed,
        threads=args.threads,
        model_id=args.model,
        exact=not args.no_exact,
    )
    with _output(args.out) as fh:
        curve.to_csv(fh)
    return 0


def cmd_fig5(args) -> int:
    rows = fig5_experiment(args.gammas, SolverOptions(seed=args.seed))
    with _output(args.out) as fh:
        fh.write("gamma,J,J_tilde,mi_gap,rel_gap\n")
        for r in rows:
            fh.write(f"{r.gamma:.6g},{r.J:.12g},{r.J_tilde:.12g},{r.mi_gap:.12g},{r.rel_gap:.6g}\n")
    return 0


# --- parser -----------------------------------------------------------------


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument(
        "--threads", type=int, default=None, help="worker count (default: $GAUSSTREE_THREADS or CPU count)"
    )

    p = argparse.ArgumentParser(prog="gausstree", description="Structure learning of Gaussian tree models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("make", parents=[common], help="build a star, chain or hybrid model")
    s.add_argument("kind", choices=("star", "chain", "hybrid"))
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--rho", type=_floats, required=True, help="d-1 comma-separated correlations")
    s.add_argument("--sort", action="store_true", help="chain: order correlations by decreasing magnitude")
    s.set_defaults(func=cmd_make)

    s = sub.add_parser("learn", parents=[common], help="Chow-Liu tree from samples")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--samples", help="CSV of samples, one row per observation")
    src.add_argument("--model", help="model JSON to sample from")
    s.add_argument("--n", type=int)
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("exact-exponent", parents=[common], help="exact error exponent")
    s.add_argument("--model", required=True)
    s.add_argument("--starts", type=int, default=SolverOptions.starts)
    s.add_argument("--tol", type=float, default=SolverOptions.gtol)
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("approx-exponent", parents=[common], help="approximate error exponent")
    s.add_argument("--model", required=True)
    s.add_argument("--method", choices=METHODS + ("all",), default="linear")
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("crossover", parents=[common], help="crossover rate for one (edge, non-edge) pair")
    s.add_argument("--rho-e", type=float, required=True)
    s.add_argument("--rho-ep", type=float, required=True)
    s.add_argument("--method", default="closed", help="closed, snr, exact, a comma list, or all")
    s.set_defaults(func=cmd_crossover)

    s = sub.add_parser("extremal-scan", parents=[common], help="brute-force extremal tree check")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--rho", type=_floats, required=True)
    s.add_argument("--perms", type=int, default=200)
    s.add_argument("--allow-large-rho", action="store_true", help="accept |rho| >= rho_crit without a note")
    s.add_argument("--allow-large-d", action="store_true", help="permit d=8 enumeration")
    s.set_defaults(func=cmd_extremal)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo error probability curve (CSV)")
    s.add_argument("--model", required=True)
    s.add_argument("--n-grid", required=True, help="start:stop:step or comma list")
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--no-exact", action="store_true", help="skip the exact exponent reference column")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fig5", parents=[common], help="exact vs approximate rate on the symmetric 4-node star (CSV)")
    s.add_argument("--gammas", type=_float_grid, default=_float_grid("0.05:0.55:0.05"))
    s.set_defaults(func=cmd_fig5)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None:
        args.threads = default_threads()
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except (GaussTreeError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"gausstree: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
