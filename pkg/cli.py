"""Command-line entry point.

Exit codes:
    0  success
    1  bad input, unreadable file or any other domain error
    2  the fidelity requirement cannot be met (empty bounds, unsupported spec)
    3  ``verify`` found a closed-form/oracle gap above the tolerance
"""

import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from attack import (
    AttackError,
    FairnessDisclosure,
    SideInformation,
    exhaustive_attack,
    fairness_inversion,
    inference_attack,
    rules_from_dataset,
)
from config import ConfigError, FidelityConfig, RunConfig, load_config
from dataset import DatasetError, WeightedDataset, load_dataset
from fairness import (
    EEOC_P,
    FairnessError,
    GroupSelector,
    ZeroDenominatorError,
    csp_biases,
    fairness_report,
    group_rate,
    p_rule_compliant,
    p_rule_ratio,
)
from fidelity import FidelityError, FidelitySpec
from oracle import OracleError
from pipeline import SolvePipeline, TradeoffPipeline, VerifyPipeline
from privacy import AnnouncedMapping, PrivacyError, confidence_report
from report import (
    ReportError,
    announced_mapping,
    announced_rules,
    audit_report,
    disclosure_block,
    disclosure_from_report,
    fairness_block,
    load_report,
    write_json,
)
from solver import SolverError
from utils import configure_run_logging, resolve_log_level, setup_run_directories

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFY_FAILED = 3

DOMAIN_ERRORS = (
    AttackError,
    ConfigError,
    DatasetError,
    FairnessError,
    OracleError,
    PrivacyError,
    ReportError,
    SolverError,
    OSError,
    ValueError,
)


def _split_out(path: str | None, default_name: str) -> tuple[str, str]:
    if path is None:
        return os.getcwd(), default_name
    directory, name = os.path.split(os.path.abspath(path))
    return directory, name


def _effective_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {
        "data": args.data,
        "out": args.out,
        "jobs": args.jobs,
        "seed": args.seed,
        "side_info": getattr(args, "side_info", None),
    }
    if args.public:
        overrides["public"] = args.public.split(",")
    if getattr(args, "delta", None) is not None:
        overrides["fidelity"] = {"type": "delta", "value": args.delta}
    elif getattr(args, "alpha", None) is not None:
        overrides["fidelity"] = {"type": "alpha", "value": args.alpha}
    return cfg.with_overrides(**overrides)


def _echo(cfg: RunConfig) -> dict:
    # worker count never changes results, so it stays out of reports
    return cfg.model_dump(exclude={"jobs", "out"})


def _require_data(cfg: RunConfig) -> str:
    if cfg.data is None:
        raise ConfigError("No dataset given (use --data or set data in the config)")
    return cfg.data


def _require_spec(cfg: RunConfig) -> FidelitySpec:
    if cfg.fidelity is None:
        raise ConfigError("No fidelity given (use --delta/--alpha or set fidelity in the config)")
    return cfg.fidelity.to_spec()


def _start_logging(debug: bool) -> None:
    run_dirs = setup_run_directories()
    configure_run_logging(run_dirs["run_log_path"], resolve_log_level(debug))


def _load(cfg: RunConfig) -> WeightedDataset:
    return load_dataset(_require_data(cfg), cfg.roles_for)


def _mapping(ds: WeightedDataset, report_path: str | None) -> tuple[AnnouncedMapping, dict | None]:
    if report_path is None:
        logging.info("No solve report given; auditing the true rules")
        return AnnouncedMapping.truthful(ds), None
    report = load_report(report_path)
    return announced_mapping(report, ds), report


def _parse_pairs(text: str) -> dict[str, str]:
    return GroupSelector.parse(text).group


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_solve(args: argparse.Namespace, cfg: RunConfig) -> int:
    spec = _require_spec(cfg)
    output_dir, name = _split_out(cfg.out, "solution.json")
    result = SolvePipeline(
        data_path=_require_data(cfg),
        roles=cfg.roles_for,
        spec=spec,
        output_dir=output_dir,
        report_name=name,
        jobs=cfg.jobs,
        config=_echo(cfg),
        debug=args.debug,
    ).run()
    logging.info(
        f"beta*={result['beta_star']:.6f} (worst group {result['worst_group']}), "
        f"report at {result['report_file']}"
    )
    return EXIT_OK


def cmd_tradeoff(args: argparse.Namespace, cfg: RunConfig) -> int:
    output_dir, name = _split_out(cfg.out, "tradeoff.csv")
    result = TradeoffPipeline(
        data_path=_require_data(cfg),
        roles=cfg.roles_for,
        kind=args.kind,
        steps=args.steps,
        output_dir=output_dir,
        curve_name=name,
        config=_echo(cfg),
        debug=args.debug,
    ).run()
    logging.info(f"{result['num_points']} points written to {result['curve_file']}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, cfg: RunConfig) -> int:
    output_dir, name = _split_out(cfg.out, "verify.json")
    result = VerifyPipeline(
        spec=_require_spec(cfg),
        output_dir=output_dir,
        data_path=None if args.random else _require_data(cfg),
        roles=cfg.roles_for,
        random_count=args.random,
        seed=cfg.seed,
        step=args.step if args.step is not None else cfg.grid_step,
        tolerance=args.tolerance,
        report_name=name,
        jobs=cfg.jobs,
        config=_echo(cfg),
        debug=args.debug,
    ).run()
    logging.info(
        f"Checked {result['num_groups_checked']} groups, skipped "
        f"{result['num_groups_skipped']}, max gap {result['max_gap']}"
    )
    return EXIT_OK if result["passed"] else EXIT_VERIFY_FAILED


def cmd_audit(args: argparse.Namespace, cfg: RunConfig) -> int:
    _start_logging(args.debug)
    ds = _load(cfg)
    mapping, _ = _mapping(ds, args.report)
    report = confidence_report(ds, mapping)
    logging.info(
        f"Max confidence {report.max_confidence:.6f}, "
        f"min uncertainty {report.min_uncertainty:.6f}"
    )
    payload = audit_report(ds, report)
    payload["config"] = _echo(cfg)
    output_dir, name = _split_out(cfg.out, "audit.json")
    write_json(os.path.join(output_dir, name), payload)
    return EXIT_OK


def _selectors(ds: WeightedDataset, args: argparse.Namespace) -> tuple[GroupSelector, GroupSelector]:
    if args.groups:
        values = [v.strip() for v in args.groups.split(",")]
    else:
        values = list(ds.schema.attributes[ds.schema.index_of(args.group_by)].domain)
    if len(values) != 2:
        raise ValueError(f"Fairness compares two groups of {args.group_by}, got {values}")
    return (
        GroupSelector({args.group_by: values[0]}),
        GroupSelector({args.group_by: values[1]}),
    )


def cmd_fairness(args: argparse.Namespace, cfg: RunConfig) -> int:
    _start_logging(args.debug)
    ds = _load(cfg)
    mapping, solve_report = _mapping(ds, args.report)
    spec = None
    if solve_report is not None:
        spec = FidelityConfig.model_validate(solve_report["fidelity"]).to_spec()
    elif cfg.fidelity is not None:
        spec = cfg.fidelity.to_spec()

    sel1, sel2 = _selectors(ds, args)
    condition_attr = None
    if args.condition:
        condition = _parse_pairs(args.condition) if "=" in args.condition else {}
        if condition:
            # a fixed condition value narrows both groups
            sel1, sel2 = sel1.given(**condition), sel2.given(**condition)
        else:
            condition_attr = args.condition.strip()
    measures = tuple(m.strip() for m in args.measures.split(","))
    if "csp" in measures and condition_attr is None:
        measures = tuple(m for m in measures if m != "csp")
        logging.warning("CSP needs --condition <attr>; skipping it")

    truthful = AnnouncedMapping.truthful(ds)
    report = fairness_report(
        ds, truthful, mapping, spec, sel1, sel2, measures, condition_attr, args.epsilon
    )
    payload = {"fairness": fairness_block(report)}

    try:
        ratio = p_rule_ratio(ds, mapping, sel1, sel2)
    except ZeroDenominatorError as e:
        logging.warning(f"p-rule undefined: {e}")
        ratio = None
    payload["p_rule"] = {
        "p": args.p,
        "ratio": ratio,
        "compliant": None if ratio is None else p_rule_compliant(ratio, args.p),
    }
    if condition_attr is not None:
        biases = csp_biases(ds, mapping, sel1, sel2, condition_attr)
        disclosure = FairnessDisclosure(
            groups=(sel1.group[args.group_by], sel2.group[args.group_by]),
            conditions=tuple(value for value, _ in biases),
            rates=(group_rate(ds, mapping, sel1), group_rate(ds, mapping, sel2)),
            biases=tuple(b for _, b in biases),
        )
        payload["disclosure"] = disclosure_block(disclosure, args.group_by, condition_attr)
    payload["config"] = _echo(cfg)

    for m in report.measures:
        suffix = f" | {m.condition}" if m.condition else ""
        logging.info(f"{m.name}{suffix}: true {m.true_value:.6f}, announced {m.announced_value:.6f}")
    output_dir, name = _split_out(cfg.out, "fairness.json")
    write_json(os.path.join(output_dir, name), payload)
    return EXIT_OK


def _side_information(cfg: RunConfig, public_names: list[str], ds: WeightedDataset | None) -> SideInformation:
    if cfg.side_info is not None:
        return SideInformation.from_file(cfg.side_info, public_names)
    if ds is None:
        raise ConfigError("No side information: give --side-info or --data")
    logging.info("Using the dataset's own conditionals as side information")
    return SideInformation.from_dataset(ds)


def _parse_known_cell(text: str) -> tuple[tuple[str, str], float]:
    """``group:condition=value``, e.g. ``F:<100k=0``."""
    cell, sep, value = text.rpartition("=")
    group, colon, condition = cell.partition(":")
    if not sep or not colon:
        raise ValueError(f"Known cell must look like group:condition=value, got {text!r}")
    return (group.strip(), condition.strip()), float(value)


def cmd_attack_posterior(args: argparse.Namespace, cfg: RunConfig) -> int:
    _start_logging(args.debug)
    ds = _load(cfg) if cfg.data is not None else None
    if args.report is not None:
        report = load_report(args.report)
        rules = announced_rules(report)
        public_names = report["schema"]["public"]
        sensitive_names = report["schema"]["sensitive"]
    elif ds is not None:
        rules = rules_from_dataset(ds, AnnouncedMapping.truthful(ds))
        public_names = ds.schema.public_names
        sensitive_names = ds.schema.sensitive_names
    else:
        raise ConfigError("Attack needs published rules: give --report or --data")
    side = _side_information(cfg, public_names, ds)

    payload: dict = {"config": _echo(cfg)}
    results = exhaustive_attack(side, rules)
    payload["max_posterior"] = max((r.posterior for r in results), default=None)
    payload["results"] = [
        {
            "public": dict(zip(public_names, r.public)),
            "outcome": r.outcome,
            "target": dict(zip(sensitive_names, r.target)),
            "prior": r.prior,
            "posterior": r.posterior,
            "amplification": r.amplification,
        }
        for r in results
    ]
    if args.target:
        values = _parse_pairs(args.target)
        missing = [n for n in [*public_names, *sensitive_names] if n not in values]
        if missing:
            raise ValueError(f"--target lacks attributes {missing}")
        public = tuple(values[n] for n in public_names)
        target = tuple(values[n] for n in sensitive_names)
        hit = inference_attack(side, rules, public, args.outcome, target)
        payload["target"] = {
            "public": dict(zip(public_names, public)),
            "outcome": args.outcome,
            "target": dict(zip(sensitive_names, target)),
            "prior": hit.prior,
            "posterior": hit.posterior,
            "amplification": hit.amplification,
        }
    output_dir, name = _split_out(cfg.out, "attack.json")
    write_json(os.path.join(output_dir, name), payload)
    return EXIT_OK


def cmd_attack_invert(args: argparse.Namespace, cfg: RunConfig) -> int:
    _start_logging(args.debug)
    report = load_report(args.report)
    known = dict(_parse_known_cell(text) for text in args.known_cell or [])
    disclosure = disclosure_from_report(report, known)
    block = report["disclosure"]
    ds = _load(cfg) if cfg.data is not None else None
    side = _side_information(cfg, [block["group_attr"]], ds)

    result = fairness_inversion(side, disclosure, slack=args.slack)
    attacks = exhaustive_attack(side, result.rule_table())
    payload = {
        "rules": [
            {
                "group": g,
                "condition": c,
                "rule": v,
                "intermediate": result.intermediate[(g, c)],
                "resolved": result.resolved_rules[(g, c)],
            }
            for (g, c), v in result.rules.items()
        ],
        "signs": list(result.signs),
        "clamped": [list(cell) for cell in result.clamped],
        "rank": result.rank,
        "residual_mass": result.residual_mass,
        "rejected_branches": result.rejected_branches,
        "max_posterior": max((a.posterior for a in attacks), default=None),
        "config": _echo(cfg),
    }
    for (g, c), v in result.rules.items():
        logging.info(f"Recovered rule {block['group_attr']}={g}, {block['condition_attr']}={c}: {v:.6f}")
    output_dir, name = _split_out(cfg.out, "inversion.json")
    write_json(os.path.join(output_dir, name), payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_fidelity_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--delta", type=float, help="Additive fidelity in [0, 1]")
    group.add_argument("--alpha", type=float, help="Multiplicative fidelity in [0, 1]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atrp",
        description="Privacy-preserving transparency reports for decision rules",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--data", help="Weighted dataset CSV (attributes, count, d)")
    parser.add_argument("--config", help="Run config, JSON or YAML")
    parser.add_argument("--out", help="Output file")
    parser.add_argument("--jobs", type=int, help="Worker processes for group solves (default: all cores)")
    parser.add_argument("--seed", type=int, help="Seed for generated instances")
    parser.add_argument("--public", help="Comma-separated public attributes; the rest are sensitive")
    parser.add_argument("--debug", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Compute the optimal announced rules")
    _add_fidelity_flags(solve)
    solve.set_defaults(handler=cmd_solve)

    tradeoff = sub.add_parser("tradeoff", help="Sweep fidelity and write the privacy curve")
    tradeoff.add_argument("--kind", choices=["delta", "alpha"], default="delta")
    tradeoff.add_argument("--steps", type=int, default=101)
    tradeoff.set_defaults(handler=cmd_tradeoff)

    audit = sub.add_parser("audit", help="Confidence report for a given mapping")
    audit.add_argument("--report", help="Solve report whose announced rules are audited")
    audit.set_defaults(handler=cmd_audit)

    fairness = sub.add_parser("fairness", help="Fairness measures on true and announced rules")
    fairness.add_argument("--group-by", required=True, help="Protected attribute")
    fairness.add_argument("--groups", help="The two compared values, e.g. F,M")
    fairness.add_argument("--condition", help="CSP attribute, or attr=value to fix one condition")
    fairness.add_argument("--measures", default="sp,csp,pr", help="Any of sp,csp,pr,individual")
    fairness.add_argument("--report", help="Solve report with the announced rules")
    fairness.add_argument("--p", type=float, default=EEOC_P, help="p-%% rule threshold")
    fairness.add_argument("--epsilon", type=float, default=0.0)
    _add_fidelity_flags(fairness)
    fairness.set_defaults(handler=cmd_fairness)

    attack = sub.add_parser("attack", help="Simulate inference attacks")
    attack_sub = attack.add_subparsers(dest="attack_command", required=True)
    posterior = attack_sub.add_parser("posterior", help="Bayes posterior from published rules")
    posterior.add_argument("--report", help="Solve report; default is the true rules of --data")
    posterior.add_argument("--target", help="Full record, e.g. gender=M,income=>200k")
    posterior.add_argument("--outcome", type=int, choices=[0, 1], default=1)
    posterior.add_argument("--side-info", help="CSV: public columns, sensitive columns, probability")
    posterior.set_defaults(handler=cmd_attack_posterior)
    invert = attack_sub.add_parser("invert", help="Recover rules from a fairness disclosure")
    invert.add_argument("--report", required=True, help="Fairness report with a disclosure block")
    invert.add_argument("--known-cell", action="append", help="group:condition=value, repeatable")
    invert.add_argument("--side-info", help="CSV: public column, sensitive column, probability")
    invert.add_argument("--slack", type=float, default=0.1)
    invert.set_defaults(handler=cmd_attack_invert)

    verify = sub.add_parser("verify", help="Compare the closed form with the grid oracle")
    _add_fidelity_flags(verify)
    verify.add_argument("--step", type=float, help="Grid step (default 0.005)")
    verify.add_argument("--tolerance", type=float, default=0.01)
    verify.add_argument("--random", type=int, help="Check this many random groups instead of --data")
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        return args.handler(args, cfg)
    except FidelityError as e:
        logging.error(f"Infeasible fidelity: {e}")
        print(f"Infeasible fidelity: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DOMAIN_ERRORS as e:
        logging.error(f"{type(e).__name__}: {e}")
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("\nOperation cancelled by user.", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
