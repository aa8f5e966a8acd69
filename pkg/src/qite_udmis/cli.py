"""Command-line entry point.

Exit codes: 0 success (an unsuccessful optimization is still data), 1
internal error, 2 usage or input error. Machine-readable results go to
stdout; logs go to stderr.
"""

import argparse
import json
import logging
import math
import os
import sys
import traceback
from dataclasses import replace

from .analysis import FailureSpec
from .graph import benchmark_graph_6q, brute_force_mis, load_graph, random_unit_disk, save_graph
from .hamiltonian import from_udmis, spectrum
from .qite import QiteConfig, build_domains
from .runner import ExperimentConfig, load_config, run_campaign, run_characterization
from .sampler import derive_seed, solve

log = logging.getLogger("qite_udmis")


class CliInputError(Exception):
    """Bad user input: reported on stderr with exit code 2."""


def _load_graph_checked(path):
    if not os.path.exists(path):
        raise CliInputError(f"graph file not found: {path}")
    try:
        return load_graph(path)
    except ValueError as exc:
        raise CliInputError(f"cannot parse {path}: {exc}") from exc


def cmd_generate(args) -> int:
    if args.bench6:
        g = benchmark_graph_6q()
    else:
        if args.n_vertices is None or args.n_vertices < 1:
            raise CliInputError("need --bench6 or -n >= 1")
        box = args.box if args.box is not None else 0.6 * math.sqrt(args.n_vertices)
        g = random_unit_disk(args.n_vertices, box, args.seed)
    save_graph(g, args.out)
    log.info("wrote %s (n=%d, %d edges)", args.out, g.n_vertices, len(g.edges))
    return 0


def cmd_bruteforce(args) -> int:
    g = _load_graph_checked(args.graph)
    size, witnesses = brute_force_mis(g)
    print(f"MIS size {size}; {len(witnesses)} witnesses")
    for w in witnesses:
        print("".join(str(b) for b in w))
    return 0


def cmd_spectrum(args) -> int:
    g = _load_graph_checked(args.graph)
    spec = spectrum(from_udmis(g, args.u))
    levels = spec.levels[: args.levels] if args.levels else spec.levels
    print(", ".join(f"({lv.energy:g}, {lv.degeneracy})" for lv in levels))
    return 0


def cmd_solve(args) -> int:
    g = _load_graph_checked(args.graph)
    h = from_udmis(g, args.u)
    cfg = QiteConfig(tau=args.tau, n_max=args.n_max, domain_kind=args.domain,
                     regularization_lambda=args.reg_lambda, rng_seed=args.seed,
                     update_mode=args.update_mode)
    domains = build_domains(h, args.domain, g, derive_seed(args.seed, 2))
    m_shots = args.shots if args.shots else 2 * g.n_vertices
    if args.delta_e == "gap":
        delta_e = spectrum(h).gap
    else:
        delta_e = float(args.delta_e)
    result = solve(h, domains, cfg, m_shots, FailureSpec(delta_e, m_shots))
    print(result.to_json())
    return 0


def _experiment_config(args, campaign: bool) -> ExperimentConfig:
    if args.config:
        if not os.path.exists(args.config):
            raise CliInputError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    # Command-line flags override config-file values.
    if args.name is not None:
        cfg.name = args.name
    if args.out is not None:
        cfg.out_dir = args.out
    if getattr(args, "bench6", False):
        cfg.instance_kind = "bench6"
    if getattr(args, "graph", None) is not None:
        if not os.path.exists(args.graph):
            raise CliInputError(f"graph file not found: {args.graph}")
        cfg.instance_kind = "file"
        cfg.instance_path = args.graph
    if getattr(args, "count", None) is not None:
        cfg.instance_kind = "random"
        cfg.count = args.count
    if getattr(args, "n_vertices", None) is not None:
        cfg.n_vertices = args.n_vertices
    if getattr(args, "box", None) is not None:
        cfg.box_side = args.box
    if args.seed is not None:
        cfg.master_seed = args.seed
        cfg.qite = replace(cfg.qite, rng_seed=args.seed)
    if args.u is not None:
        cfg.u = args.u
    qite_overrides = {}
    if args.tau is not None:
        qite_overrides["tau"] = args.tau
    if args.n_max is not None:
        qite_overrides["n_max"] = args.n_max
    if getattr(args, "record_every", None) is not None:
        qite_overrides["record_every"] = args.record_every
    if getattr(args, "update_mode", None) is not None:
        qite_overrides["update_mode"] = args.update_mode
    if campaign and getattr(args, "domain", None) is not None:
        qite_overrides["domain_kind"] = args.domain
    if qite_overrides:
        cfg.qite = replace(cfg.qite, **qite_overrides)
    if not campaign and getattr(args, "domains", None) is not None:
        cfg.domain_kinds = tuple(k.strip() for k in args.domains.split(",") if k.strip())
    if getattr(args, "delta_e", None) is not None:
        cfg.delta_e = args.delta_e if args.delta_e == "gap" else float(args.delta_e)
    if getattr(args, "shots", None) is not None:
        cfg.shots_list = tuple(int(x) for x in args.shots.split(","))
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    if getattr(args, "repetitions", None) is not None:
        cfg.repetitions = args.repetitions
    if cfg.instance_kind == "file" and not os.path.exists(cfg.instance_path or ""):
        raise CliInputError(f"graph file not found: {cfg.instance_path}")
    return cfg


def cmd_characterize(args) -> int:
    cfg = _experiment_config(args, campaign=False)
    report = run_characterization(cfg)
    print(json.dumps({
        "out_dir": report.out_dir,
        "trajectories": report.trajectory_paths,
        "delta_e": report.delta_e,
        "thm1_violations": report.thm1_violations,
        "thm2_violations": report.thm2_violations,
    }))
    return 0


def cmd_campaign(args) -> int:
    cfg = _experiment_config(args, campaign=True)
    summary = run_campaign(cfg)
    zero_bin = {}
    for m, (centers, masses) in summary.relerr_hist.items():
        at_zero = masses[centers == 0.0]
        zero_bin[m] = float(at_zero[0]) if at_zero.size else 0.0
    print(json.dumps({
        "out_dir": cfg.out_path(),
        "instances": summary.instance_count,
        "failed": summary.failed_instances,
        "shots": list(summary.shots_list),
        "zero_relative_error_mass": zero_bin,
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qite-udmis",
        description="Imaginary-time-evolution solver for unit-disk maximum-independent-set instances.",
    )
    parser.add_argument("--verbose", "-v", action="count", default=0,
                        help="log more to stderr (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a graph file")
    p.add_argument("-n", "--n-vertices", type=int, default=None)
    p.add_argument("--box", type=float, default=None,
                   help="side of the sampling square (default 0.6*sqrt(n))")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bench6", action="store_true", help="use the built-in 6-vertex benchmark")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bruteforce", help="exhaustive maximum independent set")
    p.add_argument("graph")
    p.set_defaults(func=cmd_bruteforce)

    p = sub.add_parser("spectrum", help="sorted energy levels with degeneracies")
    p.add_argument("graph")
    p.add_argument("-u", type=float, default=1.35)
    p.add_argument("--levels", type=int, default=None, help="print only the lowest k levels")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("solve", help="run the probabilistic solver on one graph")
    p.add_argument("graph")
    p.add_argument("-u", type=float, default=1.35)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--n-max", type=int, default=100)
    p.add_argument("--domain", choices=("A", "B", "full"), default="A")
    p.add_argument("-M", "--shots", type=int, default=None, help="shot count (default 2N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="reg_lambda", type=float, default=1e-6)
    p.add_argument("--update-mode", choices=("joint", "sequential"), default="joint")
    p.add_argument("--delta-e", default="gap", help="'gap' or a number")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("characterize", help="trajectory diagnostics and bound audit")
    p.add_argument("--config", default=None, help="TOML experiment config")
    p.add_argument("--name", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--graph", default=None)
    p.add_argument("--bench6", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-u", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--record-every", type=int, default=None)
    p.add_argument("--domains", default=None, help="comma list, e.g. A,B")
    p.add_argument("--update-mode", choices=("joint", "sequential"), default=None)
    p.add_argument("--delta-e", default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("campaign", help="random-instance campaign with histograms")
    p.add_argument("--config", default=None, help="TOML experiment config")
    p.add_argument("--name", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("-n", "--n-vertices", type=int, default=None)
    p.add_argument("--box", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-u", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--domain", choices=("A", "B", "full"), default=None)
    p.add_argument("-M", "--shots", default=None, help="comma list of shot counts")
    p.add_argument("--update-mode", choices=("joint", "sequential"), default=None)
    p.add_argument("--delta-e", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_campaign)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliInputError, FileNotFoundError, ValueError) as exc:
        # bad arguments, missing/corrupt files, out-of-range parameters
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
