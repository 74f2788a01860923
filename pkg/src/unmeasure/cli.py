"""Command-line runs of the library's experiments.

Every command writes one artifact (JSON or CSV) to ``--out`` or stdout.
Exit status is 0 on success, 1 on a domain error and 2 on a usage error;
errors are reported as a JSON object on stderr.  JSON outputs carry the
package version and the seed, CSV outputs carry them in a leading ``#``
comment line.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .altmin import VARIANTS, altmin_accelerated, altmin_cyclic
from .divergence import BUILTIN_SPECS, f_divergence
from .dutchbook import PayoffSystem, decide, verify
from .errors import UnmeasureError
from .gof import MZ_SCENARIOS, classical_qq, mach_zehnder, poisson_qq
from .measure import Measure
from .poisson import CountDistribution, bernoulli_vector, binomial_pmf, poisson_pmf, thin, thin_law_experiment
from .poly import charlier, inequality_scan, krawtchouk
from .projections import ConstraintSet, project

SEED_ENV = "UNMEASURE_SEED"
DEFAULT_N_LIST = "1,2,4,8,16,32,64,128,256"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_arg(text: str) -> str:
    """Inline text, or the contents of a file given as ``@path``."""
    if text.startswith("@"):
        try:
            return Path(text[1:]).read_text()
        except OSError as e:
            raise UsageError(f"cannot read {text[1:]}: {e.strerror}") from None
    return text


def _load_json(text: str, what: str):
    try:
        return json.loads(_read_arg(text))
    except json.JSONDecodeError as e:
        raise UsageError(f"{what} is not valid JSON: {e}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _clean(obj):
    # JSON has no inf/nan; spell them as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _json_out(payload: dict, args) -> str:
    body = {"command": args.command, "version": __version__, "seed": args.seed, **payload}
    return json.dumps(_clean(body), indent=2, sort_keys=True) + "\n"


def _csv_out(csv_text: str, args) -> str:
    return f"# unmeasure {__version__} command={args.command} seed={args.seed}\n" + csv_text


def _csv_rows(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, int) else f"{v:.12g}")
                              for v in r))
    return "\n".join(lines) + "\n"


def _count_dist(args) -> CountDistribution:
    given = [x is not None for x in (args.p, args.poisson, args.binomial)]
    if sum(given) != 1:
        raise UsageError("give exactly one of --p, --poisson, --binomial")
    if args.p is not None:
        return CountDistribution.from_dict(_load_json(args.p, "--p"))
    if args.poisson is not None:
        return poisson_pmf(args.poisson)
    n, p = _floats(args.binomial)
    return binomial_pmf(int(n), p)


# --- commands --------------------------------------------------------------

def cmd_divergence(args) -> str:
    P = Measure.from_dict(_load_json(args.p, "--p"))
    Q = Measure.from_dict(_load_json(args.q, "--q"))
    spec = BUILTIN_SPECS[args.f]
    return _json_out({"f": spec.name, "divergence": f_divergence(P, Q, spec)}, args)


def cmd_thin(args) -> str:
    T = thin(_count_dist(args), args.alpha)
    return _json_out({"alpha": args.alpha, "result": T.to_dict(), "mean": T.mean().tolist()}, args)


def cmd_thin_law(args) -> str:
    if args.bernoulli is not None:
        lam = _floats(args.bernoulli)
        P = bernoulli_vector(lam)
    elif args.p is not None and args.lam is not None:
        P = CountDistribution.from_dict(_load_json(args.p, "--p"))
        lam = _floats(args.lam)
    else:
        raise UsageError("give --bernoulli, or --p together with --lam")
    rows = thin_law_experiment(P, lam, _ints(args.n_list))
    return _csv_out(_csv_rows(["n", "divergence", "total_variation", "entropy", "tail_mass"],
                              [(r.n, r.divergence, r.total_variation, r.entropy, r.tail_mass) for r in rows]), args)


def _qq_out(table, args) -> str:
    if args.gap_out:
        Path(args.gap_out).write_text(_json_out({"gap": table.gap, "bracket_gap": table.bracket_gap,
                                                 "total_probability": table.total_probability}, args))
    return _csv_out(table.to_csv(), args)


def cmd_gof_classical(args) -> str:
    return _qq_out(classical_qq(args.n), args)


def cmd_gof_poisson(args) -> str:
    return _qq_out(poisson_qq(args.intensity), args)


def cmd_project(args) -> str:
    Q = Measure.from_dict(_load_json(args.q, "--q"))
    C = ConstraintSet.from_dict(_load_json(args.constraints, "--constraints"), len(Q))
    res = project(Q, C, BUILTIN_SPECS[args.f], tol=args.tol)
    return _json_out({
        "f": args.f,
        "q_star": res.q_star.to_dict(),
        "value": res.value,
        "total_mass": res.q_star.total_mass,
        "eq_duals": res.eq_duals,
        "ineq_duals": res.ineq_duals,
        "active": list(res.active),
        "converged": res.converged,
        "method": res.method,
        "iterations": res.iterations,
    }, args)


def cmd_altmin(args) -> str:
    Q = Measure.from_dict(_load_json(args.q, "--q"))
    C = ConstraintSet.from_dict(_load_json(args.constraints, "--constraints"), len(Q))
    if C.inequalities:
        raise UsageError("alternating minimization takes equality constraints only")
    cons = list(C.equalities)
    normalized = not args.unnormalized_steps
    if args.variant == "orthogonalized":
        trace = altmin_accelerated(Q, cons, args.tol, args.max_cycles, normalized_steps=normalized)
    else:
        trace = altmin_cyclic(Q, cons, tol=args.tol, max_cycles=args.max_cycles,
                              normalized_steps=args.variant == "normalized-cyclic")
    return _csv_out(trace.to_csv(), args)


def cmd_ineq_scan(args) -> str:
    if args.base == "poisson":
        f = charlier(args.lam, args.degree)
    else:
        f = krawtchouk(args.n, args.p, args.degree)
    report = inequality_scan(None, f, args.epsilon, args.samples, args.seed)
    return _json_out(report.to_dict(), args)


def cmd_dutchbook(args) -> str:
    X = PayoffSystem.from_csv(_read_arg(args.matrix))
    cert = decide(X, args.tol)
    return _json_out({"shape": list(X.shape), "certificate": cert.to_dict(), "verified": verify(X, cert)}, args)


def cmd_mach_zehnder(args) -> str:
    obs = _ints(args.observation) if args.observation else None
    if obs is not None and len(obs) != 2:
        raise UsageError("--observation needs two counts")
    r = mach_zehnder(args.scenario, args.intensity, obs)
    payload = {
        "scenario": r.scenario,
        "intensities": list(r.intensities),
        "observation": list(r.observation),
        "divergence": r.divergence,
        "g": r.g,
        "qq_gap": r.qq.gap,
        "qq_bracket_gap": r.qq.bracket_gap,
    }
    if args.qq_out:
        Path(args.qq_out).write_text(_csv_out(r.qq.to_csv(), args))
        payload["qq_csv"] = args.qq_out
    return _json_out(payload, args)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unmeasure", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"unmeasure {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV} or 0)")
        return p

    p = add("divergence", cmd_divergence, "f-divergence between two measures")
    p.add_argument("--p", required=True, help='measure JSON, e.g. \'{"weights":[2]}\', or @file')
    p.add_argument("--q", required=True)
    p.add_argument("--f", choices=sorted(BUILTIN_SPECS), default="kl")

    for name, func, help_ in (("thin", cmd_thin, "thin a count distribution"),
                              ("thin-law", cmd_thin_law, "thinned convolution powers against Poisson")):
        p = add(name, func, help_)
        p.add_argument("--p", help="count distribution JSON or @file")
        if name == "thin":
            p.add_argument("--poisson", type=float, help="use Po(LAM) as input")
            p.add_argument("--binomial", help="use bin(N,P) as input, given as N,P")
            p.add_argument("--alpha", type=float, required=True)
        else:
            p.add_argument("--bernoulli", help="Bernoulli vector p_1,...,p_d (sum <= 1)")
            p.add_argument("--lam", help="Poisson means for --p")
            p.add_argument("--n-list", default=DEFAULT_N_LIST)

    p = add("gof-classical", cmd_gof_classical, "exact QQ table of G^2 for bin(n, 1/2)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gap-out", help="also write the uniformity gap JSON here")
    p = add("gof-poisson", cmd_gof_poisson, "exact QQ table of G^2 under Poisson sampling")
    p.add_argument("--intensity", type=float, required=True)
    p.add_argument("--gap-out", help="also write the uniformity gap JSON here")

    p = add("project", cmd_project, "f-divergence projection onto linear constraints")
    p.add_argument("--q", required=True)
    p.add_argument("--constraints", required=True, help="constraint-set JSON or @file")
    p.add_argument("--f", choices=sorted(BUILTIN_SPECS), default="kl")
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("altmin", cmd_altmin, "cyclic projections onto mean-value constraints")
    p.add_argument("--q", required=True)
    p.add_argument("--constraints", required=True)
    p.add_argument("--variant", choices=VARIANTS, default="normalized-cyclic")
    p.add_argument("--unnormalized-steps", action="store_true",
                   help="with --variant orthogonalized, cycle unnormalized steps over 1, h_1, ..., h_k")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-cycles", type=int, default=10_000)

    p = add("ineq-scan", cmd_ineq_scan, "sampled check of D(P||Q) >= (E_P f)^2/2")
    p.add_argument("--base", choices=("poisson", "binomial"), required=True)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--p", type=float, default=0.25)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--samples", type=int, default=100_000)

    p = add("dutchbook", cmd_dutchbook, "sure loss or supporting measure for a payoff matrix")
    p.add_argument("--matrix", required=True, help="CSV text or @file; one payoff per row")
    p.add_argument("--tol", type=float, default=0.0)

    p = add("mach-zehnder", cmd_mach_zehnder, "two-detector Poisson test with preset intensities")
    p.add_argument("--scenario", choices=sorted(MZ_SCENARIOS), default="blocked")
    p.add_argument("--intensity", type=float, default=10.0)
    p.add_argument("--observation", help="detector counts L,M")
    p.add_argument("--qq-out", help="also write the QQ table CSV here")
    return parser


def _error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.seed is None:
            env = os.environ.get(SEED_ENV)
            try:
                args.seed = int(env) if env else 0
            except ValueError:
                raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
        text = args.func(args)
    except UsageError as e:
        _error("UsageError", str(e))
        return 2
    except UnmeasureError as e:
        _error(type(e).__name__, str(e))
        return 1
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
