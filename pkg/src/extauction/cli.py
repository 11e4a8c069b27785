"""Command-line harness.

Subcommands: ``check``, ``benchmark``, ``run``, ``expect``, ``verify``,
``experiment``, ``demo``.  Exit codes: 0 success / all checks pass,
1 a property violation was found, 2 usage or IO error.  All output is
structured JSON on stdout; identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import benchmark as bm
from . import experiments as ex
from . import mechanisms as mech
from . import truthfulness as tr
from .io import InstanceError, emit_report, instance_digest, load_instance
from .valuations import check_conditions, estimate_L


class UsageError(Exception):
    """Usage error signalled from a subcommand."""


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _cmd_check(args) -> int:
    profile = load_instance(args.instance, validate=False)
    mode = "sampled" if args.sampled else "auto"
    violations = check_conditions(profile, mode=mode, samples=args.samples, seed=args.seed)
    out = {
        "n": profile.n,
        "violations": [v.describe() for v in violations],
        "valid": not violations,
    }
    if not violations and profile.n <= 12:
        out["estimated_L"] = estimate_L(profile)
    _print(out)
    return 0 if not violations else 1


def _cmd_benchmark(args) -> int:
    profile = load_instance(args.instance)
    oracle = profile.oracle()
    fn = bm.benchmark_bruteforce if args.method == "brute" else bm.benchmark_sweep
    res = fn(oracle, args.k)
    out = res.to_json()
    out["method"] = args.method
    out["queries"] = oracle.queries
    _print(out)
    return 0


def _cmd_run(args) -> int:
    profile = load_instance(args.instance)
    if args.mechanism == "main":
        outcome = mech.main_mechanism(profile, args.seed)
    elif args.mechanism == "fixed-price":
        if args.price is None:
            raise UsageError("--price is required for the fixed-price mechanism")
        outcome = mech.fixed_price_mechanism(profile, args.price)
    elif args.mechanism == "mechanism2":
        outcome = mech.mechanism2(profile, alpha=args.alpha, rng=args.seed)
    else:
        raise UsageError(f"unknown mechanism {args.mechanism!r}")
    out = outcome.to_json()
    out["mechanism"] = args.mechanism
    out["seed"] = args.seed
    _print(out)
    return 0


def _cmd_expect(args) -> int:
    profile = load_instance(args.instance)
    expected = mech.main_mechanism_exact_expectation(profile)
    f3 = bm.benchmark_bruteforce(profile, 3).value
    out = {
        "expected_revenue": expected,
        "f3": f3,
        "bound": f3 / ex.REVENUE_GUARANTEE_FACTOR,
        "bound_ok": expected >= f3 / ex.REVENUE_GUARANTEE_FACTOR - 1e-9,
    }
    _print(out)
    return 0 if out["bound_ok"] else 1


def _cmd_verify(args) -> int:
    profile = load_instance(args.instance)
    mechanisms = {
        "main": lambda p, s: mech.main_mechanism(p, s),
        "fixed-price": lambda p, s: mech.fixed_price_mechanism(p, args.price or 1.0),
        "mechanism2": lambda p, s: mech.mechanism2(p, alpha=args.alpha, rng=s),
        "broken": tr.broken_first_price_mechanism,
    }
    if args.mechanism not in mechanisms:
        raise UsageError(f"unknown mechanism {args.mechanism!r}")
    count = args.misreports * (4 if args.exhaustive else 1)
    plan = tr.misreport_plan(profile, count, seed=args.seed)
    violations = tr.deviation_test(
        mechanisms[args.mechanism], profile, plan, seeds=range(args.runs)
    )
    _print(
        {
            "mechanism": args.mechanism,
            "misreports": len(plan),
            "runs": args.runs,
            "violations": [
                {"agent": v.agent, "seed": v.seed, "label": v.label, "gain": v.gain}
                for v in violations[:20]
            ],
            "truthful": not violations,
        }
    )
    return 0 if not violations else 1


def _cmd_experiment(args) -> int:
    config = json.loads(Path(args.config).read_text())
    seed = config.get("seed", 0)
    instances = []
    for spec in config.get("instances", []):
        name = spec.get("name") or f"{spec['model']}-n{spec['n']}"
        instances.append(
            (
                name,
                ex.gen_instance(
                    spec["model"],
                    spec["n"],
                    seed=ex.derive_seed(seed, name),
                    graph=spec.get("graph"),
                    graph_p=spec.get("graph_p", 0.5),
                ),
            )
        )
    mode = config.get("mode", "exact")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if mode == "exact":
        report = ex.revenue_guarantee_suite(instances)
    elif mode == "monte-carlo":
        report = ex.ratio_campaign(instances, trials=config.get("trials", 100), seed=seed)
    elif mode == "additive-bound":
        report = ex.additive_bound_suite(instances, alpha=config.get("alpha", 1.0))
    elif mode == "f2-gap":
        report = ex.f2_gap_demo(config.get("m_values", [1.0, 10.0, 100.0, 1000.0]))
    else:
        raise UsageError(f"unknown experiment mode {mode!r}")
    report.summary["seed"] = seed
    report.summary["mode"] = mode
    report.summary["instance_digests"] = {name: instance_digest(p) for name, p in instances}
    emit_report(report, "csv", outdir / "rows.csv")
    emit_report(report, "json", outdir / "summary.json")
    _print({"rows": len(report.rows), "out": str(outdir), "mode": mode})
    violations = report.summary.get("violations", 0)
    return 0 if not violations else 1


def _cmd_demo(args) -> int:
    if args.which == "f2-gap":
        report = ex.f2_gap_demo(args.m_values)
        _print(
            {
                "columns": list(report.columns),
                "rows": [[str(x) for x in row] for row in report.rows],
                "note": "ratio vs the 2-winner benchmark grows without bound",
            }
        )
        return 0
    if args.which == "losing-value":
        _print(ex.losing_value_demo())
        return 0
    raise UsageError(f"unknown demo {args.which!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="extauction",
        description="Truthful competitive auctions for digital goods with positive externalities",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="validate an instance file against the valuation conditions")
    c.add_argument("--instance", required=True)
    c.add_argument("--sampled", action="store_true", help="force sampled checking")
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(fn=_cmd_check)

    c = sub.add_parser("benchmark", help="compute the best fixed-price revenue F^(k)")
    c.add_argument("--instance", required=True)
    c.add_argument("--k", type=int, default=3)
    c.add_argument("--method", choices=["brute", "sweep"], default="sweep")
    c.set_defaults(fn=_cmd_benchmark)

    c = sub.add_parser("run", help="run one seeded mechanism")
    c.add_argument("--mechanism", choices=["main", "fixed-price", "mechanism2"], required=True)
    c.add_argument("--instance", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--price", type=float, default=None)
    c.add_argument("--alpha", type=float, default=mech.DEFAULT_ALPHA)
    c.set_defaults(fn=_cmd_run)

    c = sub.add_parser("expect", help="exact 3^n expected revenue of the tripartition auction")
    c.add_argument("--instance", required=True)
    c.set_defaults(fn=_cmd_expect)

    c = sub.add_parser("verify", help="deviation-test a mechanism for truthfulness")
    c.add_argument("--mechanism", required=True)
    c.add_argument("--instance", required=True)
    c.add_argument("--exhaustive", action="store_true")
    c.add_argument("--misreports", type=int, default=200)
    c.add_argument("--runs", type=int, default=3)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--price", type=float, default=None)
    c.add_argument("--alpha", type=float, default=mech.DEFAULT_ALPHA)
    c.set_defaults(fn=_cmd_verify)

    c = sub.add_parser("experiment", help="run a configured campaign, emit CSV + JSON")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(fn=_cmd_experiment)

    c = sub.add_parser("demo", help="adversarial demonstrations")
    c.add_argument("--which", choices=["f2-gap", "losing-value"], required=True)
    c.add_argument("--m-values", type=float, nargs="*", default=[1.0, 10.0, 100.0, 1000.0])
    c.set_defaults(fn=_cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InstanceError, UsageError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
