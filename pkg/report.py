"""JSON and CSV codecs for solve, audit, fairness and verify reports.

Reports are the hand-off between commands: ``fairness`` and ``attack`` read
the announced rules from a solve report instead of solving again.
"""

import json
import logging
import math
import os
from typing import Any

import numpy as np
import pandas as pd

from attack import FairnessDisclosure, Key
from dataset import WeightedDataset
from fairness import FairnessReport
from fidelity import LOG_BASE
from privacy import OUTCOMES, AnnouncedMapping, ConfidenceReport
from solver import GroupSolution, MasterSolution

SIGNIFICANT_DIGITS = 12
REPORT_VERSION = 1


class ReportError(Exception):
    pass


def round_floats(obj: Any) -> Any:
    """Round every float to 12 significant digits; infinities become strings."""
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [round_floats(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def write_json(path: str, payload: dict) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(round_floats(payload), f, indent=2)
        f.write("\n")
    logging.info(f"Wrote {path}")


def load_report(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            report = json.load(f)
    except json.JSONDecodeError as e:
        raise ReportError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(report, dict):
        raise ReportError(f"{path} does not hold a report object")
    return report


def _schema_block(ds: WeightedDataset) -> dict:
    return {
        "public": ds.schema.public_names,
        "sensitive": ds.schema.sensitive_names,
    }


def _group_block(ds: WeightedDataset, sol: GroupSolution) -> dict:
    members = []
    for k, (i, p, d) in enumerate(sol.group.members):
        members.append(
            {
                "x": ds.as_dict(i),
                "p": p,
                "d": d,
                "d_tilde": float(sol.d_tilde[k]),
                "bounds": [float(sol.bounds.x_min[k]), float(sol.bounds.x_max[k])],
            }
        )
    return {
        "qid": ds.qid_dict(sol.qid),
        "beta0": sol.beta0,
        "beta1": sol.beta1,
        "beta_p": sol.beta_p,
        "beta_min": sol.beta_min,
        "beta_star": sol.beta_star,
        "gamma_star": sol.gamma_star,
        "case": sol.case.value,
        "achieved_conf": sol.achieved_conf,
        "anchors": {"1": sol.anchor1, "0": sol.anchor0},
        "notes": list(sol.notes),
        "members": members,
    }


def solution_report(
    ds: WeightedDataset, master: MasterSolution, config: dict | None = None
) -> dict:
    return {
        "version": REPORT_VERSION,
        "beta_star": master.beta_star,
        "gamma_star": master.gamma_star,
        "fidelity": master.spec.describe(),
        "schema": _schema_block(ds),
        "groups": [_group_block(ds, sol) for sol in master.groups],
        "metadata": {"log_base": LOG_BASE, "records": len(ds), "population": ds.total},
        "config": config or {},
    }


def audit_report(ds: WeightedDataset, report: ConfidenceReport) -> dict:
    groups = []
    for row in report.groups:
        conf = {}
        for a in OUTCOMES:
            values = row.conf[a]
            conf[str(a)] = None if values is None else values
        groups.append(
            {
                "qid": ds.qid_dict(row.qid),
                "max_confidence": row.max_confidence,
                "beta_min": row.beta_min,
                "leakage": row.leakage,
                "conf": conf,
            }
        )
    return {
        "version": REPORT_VERSION,
        "max_confidence": report.max_confidence,
        "min_uncertainty": report.min_uncertainty,
        "schema": _schema_block(ds),
        "groups": groups,
        "metadata": {"log_base": LOG_BASE},
    }


def fairness_block(report: FairnessReport) -> dict:
    measures = []
    for m in report.measures:
        measures.append(
            {
                "name": m.name,
                "groups": list(m.groups),
                "condition": m.condition,
                "true": m.true_value,
                "announced": m.announced_value,
                "distortion": m.distortion,
                "distortion_bound": m.distortion_bound,
                "within_bound": m.within_bound,
                "family": m.family,
            }
        )
    return {
        "fidelity": report.fidelity,
        "distortion_bound": report.distortion_bound,
        "bound_family": report.bound_family,
        "measures": measures,
        "metadata": report.metadata,
    }


def disclosure_block(disclosure: FairnessDisclosure, group_attr: str, condition_attr: str) -> dict:
    return {
        "group_attr": group_attr,
        "condition_attr": condition_attr,
        "groups": list(disclosure.groups),
        "conditions": list(disclosure.conditions),
        "rates": list(disclosure.rates),
        "biases": list(disclosure.biases),
    }


def disclosure_from_report(
    report: dict, known_cells: dict[tuple[str, str], float] | None = None
) -> FairnessDisclosure:
    block = report.get("disclosure")
    if block is None:
        raise ReportError("Report has no fairness disclosure block")
    try:
        return FairnessDisclosure(
            groups=tuple(block["groups"]),
            conditions=tuple(block["conditions"]),
            rates=tuple(float(r) for r in block["rates"]),
            biases=tuple(float(b) for b in block["biases"]),
            known_cells=dict(known_cells or {}),
        )
    except KeyError as e:
        raise ReportError(f"Disclosure block lacks {e.args[0]!r}") from None


def announced_rules(report: dict) -> dict[tuple[Key, Key], float]:
    """Announced rule per (public values, sensitive values) from a solve report."""
    try:
        public = report["schema"]["public"]
        sensitive = report["schema"]["sensitive"]
        rules = {}
        for group in report["groups"]:
            for member in group["members"]:
                x = member["x"]
                key = (tuple(x[n] for n in public), tuple(x[n] for n in sensitive))
                rules[key] = float(member["d_tilde"])
    except (KeyError, TypeError) as e:
        raise ReportError(f"Not a solve report: {e}") from None
    return rules


def announced_mapping(report: dict, ds: WeightedDataset) -> AnnouncedMapping:
    """Align a report's announced rules with the records of ``ds``."""
    rules = announced_rules(report)
    d_tilde = np.empty(len(ds), dtype=float)
    for i in range(len(ds)):
        key = (ds.public_key(i), ds.sensitive_key(i))
        if key not in rules:
            raise ReportError(f"Report has no announced rule for record {ds.as_dict(i)}")
        d_tilde[i] = rules[key]
    return AnnouncedMapping(d_tilde)


def verify_report(rows: list[dict], tolerance: float, step: float) -> dict:
    checked = [r for r in rows if r.get("gap") is not None]
    return {
        "version": REPORT_VERSION,
        "tolerance": tolerance,
        "grid_step": step,
        "max_gap": max((r["gap"] for r in checked), default=None),
        "passed": all(r["gap"] <= tolerance for r in checked),
        "groups": rows,
    }


def write_curve(path: str, df: pd.DataFrame) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    df.to_csv(path, index=False, float_format=f"%.{SIGNIFICANT_DIGITS}g", encoding="utf-8")
    logging.info(f"Wrote trade-off curve with {len(df)} points to {path}")
