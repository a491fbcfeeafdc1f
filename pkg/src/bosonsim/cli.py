"""Command-line entry point: ``bosonsim <subcommand> ...``.

Ports are 1-based on the command line.  Exit codes: 0 success, 2 invalid
input, 3 size cap exceeded, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bounds import DEFAULT_SIGMAS, bound_report
from .errors import BosonSimError, InvalidArgumentError, SizeLimitError
from .experiment import (
    ExperimentConfig,
    build_interferometer,
    census_tables,
    default_workers,
    parse_ports,
    run_experiment,
)
from .interferometer import InputSpec, Interferometer
from .params import CutoffPolicy, NoiseParams
from .permanent import glynn_estimate, xi_rescale
from .probability import (
    gram_submatrix,
    lossy_dark_probability,
    output_probability,
    subset_probability,
    truncated_output_probability,
    truncated_subset_probability,
    tv_distance_exact,
)
from .samplers import SampleSet, _atomic_write, distinguish, sample_exact, sample_k_interfering, sample_truncated

EXIT_OK, EXIT_VALIDATION, EXIT_SIZE, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("..")
    return int(lo), int(hi or lo)


def _load_unitary(path) -> Interferometer:
    with open(path) as fh:
        return Interferometer.from_json(fh.read())


def _instance(args):
    u = _load_unitary(args.unitary)
    ports = None if args.inputs is None else [p - 1 for p in _ints(args.inputs)]
    n = args.n if args.n is not None else (len(ports) if ports else None)
    if n is None:
        raise InvalidArgumentError("give --n or --inputs")
    return u, InputSpec(n, u.dim, ports)


def _emit(record: dict, out):
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _base(u, inp, **params):
    return {
        "instance_hash": u.instance_hash,
        "parameters": dict(params, n_bosons=inp.n_bosons, dim=inp.dim, inputs=[p + 1 for p in inp.input_ports]),
    }


# ---------------------------------------------------------------------------


def cmd_gen_unitary(args):
    if args.kind != "fourier" and args.seed is None:
        raise InvalidArgumentError("--seed is required for random interferometers")
    u = build_interferometer(args.kind, args.dim, args.seed)
    _atomic_write(args.out, json.dumps(u.to_dict()) + "\n")


def cmd_prob(args):
    u, inp = _instance(args)
    m = _ints(args.m)
    if args.eta < 1.0 or args.nu > 0.0:
        pv = lossy_dark_probability(u, inp, m, NoiseParams(args.xi, args.eta, args.nu))
    elif args.k is not None:
        pv = truncated_output_probability(u, inp, m, CutoffPolicy(args.k, args.xi))
    else:
        pv = output_probability(u, inp, m, args.xi)
    rec = _base(u, inp, xi=args.xi, eta=args.eta, nu=args.nu, k=args.k, m=m)
    rec.update(pv.to_dict())
    _emit(rec, args.out)


def cmd_noclick(args):
    u, inp = _instance(args)
    omega = parse_ports(args.omega, u.dim)
    rec = _base(u, inp, xi=args.xi, omega=[p + 1 for p in omega], mode=args.mode, k=args.k)
    if args.mode == "exact":
        rec.update(subset_probability(u, inp, omega, args.xi).to_dict())
    elif args.mode == "truncated":
        if args.k is None:
            raise InvalidArgumentError("--k is required for truncated mode")
        rec.update(truncated_subset_probability(u, inp, omega, CutoffPolicy(args.k, args.xi)).to_dict())
    else:
        if args.seed is None:
            raise InvalidArgumentError("--seed is required for estimated mode")
        a = xi_rescale(gram_submatrix(u, inp, omega), args.xi)
        est, se = glynn_estimate(a, args.trials, args.seed)
        rec.update({"value": est.real, "kind": "monte_carlo", "std_error": se, "seed": args.seed, "trials": args.trials})
    _emit(rec, args.out)


def cmd_tvd(args):
    u, inp = _instance(args)
    res = tv_distance_exact(u, inp, CutoffPolicy(args.k, args.xi))
    rec = _base(u, inp, xi=args.xi, k=args.k)
    rec.update({"value": res.distance, "kind": "exact", "delta_p1": res.delta_p1, "best_subset_gap": res.best_gap})
    _emit(rec, args.out)


def cmd_bound(args):
    rep = bound_report(NoiseParams(args.xi, args.eta, args.nu), args.rho, args.k, args.n, args.sigmas)
    _emit(rep.to_dict(), args.out)


def cmd_census(args):
    census_tables(_range(args.n_range), args.k, args.xi, args.out)


def cmd_sample(args):
    u, inp = _instance(args)
    if args.model == "exact":
        data = sample_exact(u, inp, NoiseParams(args.xi, args.eta, args.nu), args.count, args.seed)
    elif args.model == "trunc":
        data = sample_truncated(u, inp, CutoffPolicy(args.k, args.xi), args.count, args.seed)
    else:
        data = sample_k_interfering(u, inp, args.k, args.xi, args.count, args.seed)
    data.write_jsonl(args.out)


def cmd_distinguish(args):
    a = SampleSet.read_jsonl(args.a)
    b = SampleSet.read_jsonl(args.b)
    omega = parse_ports(args.omega, a.dim)
    res = distinguish(a, b, omega, args.sigmas)
    _emit(dict(res.to_dict(), omega=[p + 1 for p in omega]), args.out)


def cmd_run(args):
    with open(args.config) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{args.config}: invalid JSON: {exc}") from None
    config = ExperimentConfig.from_dict(raw)
    summary = run_experiment(config, args.out_dir, args.workers)
    sys.stdout.write(json.dumps({"verdict": summary["distinguisher"]["verdict"], "summary_hash": summary["summary_hash"]}) + "\n")


def _add_instance(p):
    p.add_argument("--unitary", required=True, help="interferometer JSON file")
    p.add_argument("--n", type=int, help="number of bosons (inputs 1..N by default)")
    p.add_argument("--inputs", help="comma-separated 1-based input ports")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bosonsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-unitary", help="write an interferometer JSON file")
    p.add_argument("--kind", choices=["haar", "fourier", "balanced"], required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_unitary)

    p = sub.add_parser("prob", help="probability of one output configuration")
    _add_instance(p)
    p.add_argument("--m", required=True, help="comma-separated occupations")
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--k", type=int, help="cycle cutoff (truncated value)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("noclick", help="probability that all bosons land in a port subset")
    _add_instance(p)
    p.add_argument("--omega", default="2..M")
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--mode", choices=["exact", "truncated", "estimated"], default="exact")
    p.add_argument("--k", type=int)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_noclick)

    p = sub.add_parser("tvd", help="exact total variation distance on a small instance")
    _add_instance(p)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tvd)

    p = sub.add_parser("bound", help="closed-form gap, variance and run budget")
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigmas", type=float, default=DEFAULT_SIGMAS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("census", help="CSV of restricted-cycle fractions over a range of N")
    p.add_argument("--n-range", required=True, help="a..b")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("sample", help="draw a JSON-lines dataset")
    _add_instance(p)
    p.add_argument("--model", choices=["exact", "trunc", "kinterf"], required=True)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--k", type=int)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("distinguish", help="two-proportion test between two datasets")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--omega", default="2..M")
    p.add_argument("--sigmas", type=float, default=DEFAULT_SIGMAS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distinguish)

    p = sub.add_parser("run", help="run a full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--workers", type=int, default=default_workers())
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sample" and args.model != "exact" and args.k is None:
        print("bosonsim: error: --k is required for trunc and kinterf models", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        args.func(args)
    except SizeLimitError as exc:
        print(f"bosonsim: size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (BosonSimError, ValueError) as exc:
        print(f"bosonsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"bosonsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
