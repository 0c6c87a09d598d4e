"""Command-line entry point.

Subcommands: validate, stats, explain, uncertainty, compare, synth.
Machine-readable JSON goes to stdout; human diagnostics go to stderr.
Exit codes: 0 success, 1 validation error, 2 numerical error, 3 usage error.
A seed is required for every stochastic subcommand (flag, config file, or
the UACE_SEED environment variable).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .activations import compute_stats, stats_matrices
from .baselines import (
    DEFAULT_L1,
    DEFAULT_L2,
    ocbm_explain,
    ols_explain,
    oracle_explain,
    tcav_explain,
    ycbm_explain,
)
from .bundle import read_bundle, write_bundle, write_matrix_dir
from .errors import NumericalError, UaceError, ValidationError
from .estimator import BayesConfig, SparsifyConfig, explain
from .metrics import (
    drift,
    jaccard_topk,
    kendall_tau_distance,
    to_ranked,
    topk_abs_diff,
)
from .reports import (
    baseline_report,
    dump_report,
    explanation_report,
    load_report,
    report_label_scores,
)
from .synth import (
    corollary_scenario,
    four_color_scenario,
    generate,
    overcomplete_scenario,
    predict_corollary,
    run_trial_suite,
    spurious_tag_scenario,
    undercomplete_scenario,
)
from .uncertainty import VariantConfig, distribution_fit, mc_uncertainty

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="uace", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with flag defaults")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--out", help="write the JSON report to this path")

    p = sub.add_parser("validate", help="check a bundle directory")
    p.add_argument("bundle")
    add_common(p)

    p = sub.add_parser("stats", help="dump activation statistics")
    p.add_argument("bundle")
    p.add_argument("--out-dir", required=True)
    add_common(p)

    p = sub.add_parser("explain", help="estimate a concept explanation")
    p.add_argument("bundle")
    p.add_argument(
        "--method",
        choices=["uace", "ols", "oracle", "ycbm", "ocbm", "tcav"],
        default="uace",
    )
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tune", action="store_true")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--l1", type=float, default=DEFAULT_L1)
    p.add_argument("--l2", type=float, default=DEFAULT_L2)
    add_common(p)

    p = sub.add_parser("uncertainty", help="per-concept uncertainty table")
    p.add_argument("bundle")
    p.add_argument("--method", choices=["prop1", "mc", "df"], default="prop1")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--fraction", type=float, default=0.8)
    p.add_argument("--df-steps", type=int, default=400)
    p.add_argument("--df-lr", type=float, default=1e-2)
    p.add_argument("--df-beta", type=float, default=0.0)
    add_common(p)

    p = sub.add_parser("compare", help="metric between two explanation reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument(
        "--metric",
        choices=["topkdiff", "kendall", "jaccard", "drift"],
        required=True,
    )
    p.add_argument("--k", type=int, default=20)
    add_common(p)

    p = sub.add_parser("synth", help="generate a scenario bundle or trial report")
    p.add_argument(
        "scenario",
        choices=["overcomplete", "corollary", "undercomplete", "four_color",
                 "spurious_tag"],
    )
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--tag-prob", type=float, default=0.5)
    p.add_argument("--populations", type=float, nargs="+", default=None)
    p.add_argument(
        "--estimators", nargs="+", default=["uace", "ols"],
        help="estimators for --trials runs",
    )
    p.add_argument("--out-bundle", help="write the generated bundle here")
    add_common(p)
    return parser


def _subcommand_defaults(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            sub = action.choices[command]
            return {a.dest: a.default for a in sub._actions}
    return {}


def _apply_config_file(parser, args):
    """Fill flags from a JSON config; explicit command-line values win.

    A flag still at its parser default is considered unset, so config values
    apply there; values identical to the default cannot be distinguished
    from omissions, which is acceptable for reproducibility files.
    """
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        defaults = _subcommand_defaults(parser, args.command)
        for key, value in overrides.items():
            attr = key.replace("-", "_")
            if attr not in defaults:
                raise _UsageError(f"unknown config key: {key}")
            if getattr(args, attr) == defaults[attr]:
                setattr(args, attr, value)
    return args


def _require_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("UACE_SEED")
    if env is not None:
        return int(env)
    raise _UsageError("this subcommand is stochastic; pass --seed or set UACE_SEED")


def _emit(report: dict, args, stdout) -> None:
    data = dump_report(report, path=getattr(args, "out", None))
    stdout.write(data.decode("utf-8"))


def _cmd_validate(args, stdout) -> int:
    bundle = read_bundle(args.bundle)
    _emit(
        {
            "kind": "validation",
            "valid": True,
            "dims": {
                "n_examples": bundle.n_examples,
                "n_labels": bundle.n_labels,
                "n_concepts": bundle.n_concepts,
                "d_repr": bundle.d_repr,
                "d_mm": bundle.d_mm,
            },
        },
        args,
        stdout,
    )
    return EXIT_OK


def _cmd_stats(args, stdout) -> int:
    bundle = read_bundle(args.bundle)
    stats = compute_stats(bundle)
    write_matrix_dir(
        args.out_dir,
        stats_matrices(stats),
        metadata={"source_bundle": str(args.bundle)},
    )
    _emit(
        {
            "kind": "stats",
            "out_dir": str(args.out_dir),
            "epsilon": stats.epsilon,
            "cos_alpha": stats.cos_alpha,
            "concept_names": bundle.concept_names,
        },
        args,
        stdout,
    )
    return EXIT_OK


def _cmd_explain(args, stdout) -> int:
    bundle = read_bundle(args.bundle)
    if args.method == "uace":
        seed = _require_seed(args) if args.tune else (args.seed or 0)
        config = BayesConfig(
            lam=args.lam, beta=args.beta, tune=args.tune, seed=seed
        )
        expl = explain(bundle, config, SparsifyConfig(kappa=args.kappa))
        report = explanation_report(
            expl, bundle.concept_names, bundle.label_names,
            extra_config={"bundle": str(args.bundle), "threads": args.threads},
        )
    else:
        if args.method == "ols":
            base = ols_explain(compute_stats(bundle), bundle.logits)
        elif args.method == "oracle":
            base = oracle_explain(bundle, l1_strength=args.l1)
        elif args.method == "ycbm":
            base = ycbm_explain(bundle, l1_strength=args.l1)
        elif args.method == "ocbm":
            base = ocbm_explain(bundle, l2_strength=args.l2)
        else:
            base = tcav_explain(bundle)
        report = baseline_report(
            base, bundle.concept_names, bundle.label_names,
            extra_config={"bundle": str(args.bundle), "seed": args.seed,
                          "threads": args.threads},
        )
    _emit(report, args, stdout)
    return EXIT_OK


def _cmd_uncertainty(args, stdout) -> int:
    bundle = read_bundle(args.bundle)
    if args.method == "prop1":
        eps = compute_stats(bundle).epsilon
        config: dict = {}
    else:
        seed = _require_seed(args)
        vcfg = VariantConfig(
            n_samples=args.samples,
            subsample_fraction=args.fraction,
            df_steps=args.df_steps,
            df_lr=args.df_lr,
            df_beta=args.df_beta,
            seed=seed,
        )
        if args.method == "mc":
            eps = mc_uncertainty(bundle, vcfg)
        else:
            eps, _, _, _ = distribution_fit(bundle, vcfg)
        config = asdict(vcfg)
    order = np.argsort(np.argsort(-eps, kind="stable"), kind="stable")
    rows = [
        {"method": args.method, "concept": name, "epsilon": float(eps[k]),
         "rank": int(order[k])}
        for k, name in enumerate(bundle.concept_names)
    ]
    _emit({"kind": "uncertainty", "config": config, "rows": rows}, args, stdout)
    return EXIT_OK


def _cmd_compare(args, stdout) -> int:
    rep_a = load_report(args.report_a)
    rep_b = load_report(args.report_b)
    labels_a = [pl["label"] for pl in rep_a["per_label"]]
    labels_b = [pl["label"] for pl in rep_b["per_label"]]
    shared = [lab for lab in labels_a if lab in labels_b]
    if not shared:
        raise ValidationError("reports share no labels")
    values = {}
    for lab in shared:
        names_a, scores_a = report_label_scores(rep_a, lab)
        names_b, scores_b = report_label_scores(rep_b, lab)
        ra = to_ranked(names_a, scores_a)
        rb = to_ranked(names_b, scores_b)
        if args.metric == "topkdiff":
            values[lab] = topk_abs_diff(ra, rb, args.k)
        elif args.metric == "kendall":
            nonzero = [n for n, s in zip(names_a, scores_a) if s != 0.0]
            values[lab] = kendall_tau_distance(ra, rb, restrict=nonzero)
        elif args.metric == "jaccard":
            if names_a != names_b:
                raise ValidationError("jaccard needs identically ordered concepts")
            values[lab] = jaccard_topk(scores_a, scores_b, args.k)
        else:
            values[lab] = drift(ra, rb)
    _emit(
        {
            "kind": "comparison",
            "metric": args.metric,
            "k": args.k,
            "per_label": values,
            "mean": float(np.mean(list(values.values()))),
        },
        args,
        stdout,
    )
    return EXIT_OK


def _cmd_synth(args, stdout) -> int:
    seed = _require_seed(args)
    overrides = {
        key: getattr(args, key)
        for key in ("n", "dim", "k")
        if getattr(args, key) is not None
    }
    if args.scenario == "overcomplete":
        scn = overcomplete_scenario(seed=seed, **overrides)
    elif args.scenario == "corollary":
        overrides.setdefault("k", 20)
        scn = corollary_scenario(seed=seed, **overrides)
    elif args.scenario == "undercomplete":
        overrides.pop("k", None)
        scn = undercomplete_scenario(seed=seed, **overrides)
    elif args.scenario == "four_color":
        if args.populations is not None:
            overrides["populations"] = args.populations
        scn = four_color_scenario(seed=seed, **overrides)
    else:
        overrides.pop("k", None)
        scn = spurious_tag_scenario(tag_prob=args.tag_prob, seed=seed, **overrides)

    resolved = {
        "kind": scn.kind,
        "dim": scn.dim,
        "n": scn.n,
        "k": scn.k,
        "seed": scn.seed,
        "b1": scn.b1,
        "b2": scn.b2,
        "sigma2": scn.sigma2,
        "tag_prob": scn.tag_prob,
        "reg_lambda": scn.reg_lambda,
        "populations": None if scn.populations is None else list(scn.populations),
        "sigma": None if scn.sigma is None else list(scn.sigma),
    }
    result = {
        "kind": "synth",
        "scenario": args.scenario,
        "seed": seed,
        "resolved_scenario": resolved,
    }
    if args.out_bundle:
        bundle, _ = generate(scn)
        write_bundle(bundle, args.out_bundle)
        result["bundle"] = str(args.out_bundle)
    if args.trials > 0:
        suite = run_trial_suite(
            scn, args.estimators, args.trials, seed=seed, threads=args.threads
        )
        result["trials"] = {
            "n_trials": suite["n_trials"],
            "concept_names": suite["concept_names"],
            "estimators": {
                name: {
                    "top1_freq": agg["top1_freq"],
                    "mean_rank": agg["mean_rank"],
                    "mean_score": agg["mean_score"],
                    "se_score": agg["se_score"],
                }
                for name, agg in suite["estimators"].items()
            },
        }
        if scn.kind == "overcomplete":
            result["analytic_top1"] = float(predict_corollary(scn)[0])
    _emit(result, args, stdout)
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "stats": _cmd_stats,
    "explain": _cmd_explain,
    "uncertainty": _cmd_uncertainty,
    "compare": _cmd_compare,
    "synth": _cmd_synth,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = _apply_config_file(parser, parser.parse_args(argv))
        return _COMMANDS[args.command](args, stdout)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=stderr)
        return EXIT_NUMERICAL
    except (ValidationError, UaceError, OSError) as exc:
        print(f"validation error: {exc}", file=stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
