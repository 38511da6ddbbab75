import json
import logging
import math

import numpy as np
import pandas as pd
import pytest

from attack import FairnessDisclosure
from fidelity import FidelitySpec
from privacy import AnnouncedMapping, confidence_report
from report import (
    ReportError,
    announced_mapping,
    announced_rules,
    audit_report,
    disclosure_block,
    disclosure_from_report,
    load_report,
    round_floats,
    solution_report,
    verify_report,
    write_curve,
    write_json,
)
from solver import master_tradeoff, solve_master

logging.basicConfig(level=logging.INFO)


def _solve_report(ds, delta=0.9):
    master = solve_master(ds, FidelitySpec.delta(delta))
    return master, solution_report(ds, master, {"fidelity": {"type": "delta", "value": delta}})


def test_round_floats():
    assert round_floats(0.1 + 0.2) == 0.3
    assert round_floats(math.inf) == "inf"
    assert round_floats(-math.inf) == "-inf"
    assert round_floats(math.nan) is None
    assert round_floats(np.int64(3)) == 3
    assert round_floats({"a": (np.float64(1 / 3), [np.array([0.5])])}) == {
        "a": [0.333333333333, [[0.5]]]
    }
    assert round_floats("text") == "text"


def test_solution_report_layout(credit_sample):
    master, report = _solve_report(credit_sample)
    assert report["version"] == 1
    assert report["beta_star"] == pytest.approx(0.675)
    assert report["fidelity"] == {"type": "delta", "value": 0.9}
    assert report["schema"] == {"public": ["gender"], "sensitive": ["income"]}
    female, male = report["groups"]
    assert female["qid"] == {"gender": "F"}
    assert female["case"] == "BetaP"
    assert male["case"] == "Beta0"
    assert female["anchors"] == {"1": 2, "0": 0}
    member = female["members"][2]
    assert member["x"] == {"income": ">200k", "gender": "F"}
    assert member["d"] == 1.0
    assert member["d_tilde"] == pytest.approx(0.9)
    assert member["bounds"] == [pytest.approx(0.9), 1.0]
    assert report["metadata"] == {"log_base": "e", "records": 6, "population": 40}


def test_report_file_round_trip(credit_sample, output_dir):
    master, report = _solve_report(credit_sample)
    path = str(output_dir / "nested" / "solution.json")
    write_json(path, report)
    loaded = load_report(path)
    assert loaded["groups"][0]["members"][1]["d_tilde"] == pytest.approx(0.02)
    mapping = announced_mapping(loaded, credit_sample)
    np.testing.assert_allclose(mapping.d_tilde, master.mapping.d_tilde, atol=1e-11)


def test_announced_rules_keys(credit_sample):
    _, report = _solve_report(credit_sample)
    rules = announced_rules(report)
    assert rules[(("M",), ("100k-200k",))] == pytest.approx(0.4)
    assert len(rules) == 6


def test_announced_mapping_needs_every_record(credit_sample):
    _, report = _solve_report(credit_sample)
    report["groups"] = report["groups"][:1]
    with pytest.raises(ReportError):
        announced_mapping(report, credit_sample)


def test_not_a_solve_report():
    with pytest.raises(ReportError):
        announced_rules({"version": 1})


def test_load_report_rejects_bad_files(output_dir):
    bad = output_dir / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ReportError):
        load_report(str(bad))
    listing = output_dir / "list.json"
    listing.write_text(json.dumps([1, 2]), encoding="utf-8")
    with pytest.raises(ReportError):
        load_report(str(listing))


def test_infinite_values_are_written_as_strings(output_dir):
    path = str(output_dir / "inf.json")
    write_json(path, {"pr": math.inf})
    assert load_report(path) == {"pr": "inf"}


def test_audit_report(credit_sample):
    report = audit_report(
        credit_sample,
        confidence_report(credit_sample, AnnouncedMapping.truthful(credit_sample)),
    )
    assert report["max_confidence"] == pytest.approx(1.0)
    female = report["groups"][0]
    assert female["qid"] == {"gender": "F"}
    np.testing.assert_allclose(female["conf"]["1"], [0.0, 0.0, 1.0])
    assert female["beta_min"] == pytest.approx(0.6)
    assert female["leakage"] == pytest.approx(math.log(1.0 / 0.6))


def test_audit_report_of_solved_mapping(credit_sample):
    master = solve_master(credit_sample, FidelitySpec.delta(0.9))
    report = audit_report(credit_sample, confidence_report(credit_sample, master.mapping))
    female, male = report["groups"]
    assert female["leakage"] == pytest.approx(math.log(0.675 / 0.6))
    assert male["leakage"] >= 0.0


def test_disclosure_round_trip():
    disclosure = FairnessDisclosure(
        ("F", "M"), ("<100k", "100k-200k", ">200k"), (0.2, 0.365), (0.0, 0.38, 0.0)
    )
    report = {"disclosure": disclosure_block(disclosure, "gender", "income")}
    back = disclosure_from_report(report, {("F", "<100k"): 0.1})
    assert back.groups == disclosure.groups
    assert back.biases == disclosure.biases
    assert back.known_cells == {("F", "<100k"): 0.1}


def test_missing_disclosure():
    with pytest.raises(ReportError):
        disclosure_from_report({})
    with pytest.raises(ReportError):
        disclosure_from_report({"disclosure": {"groups": ["F", "M"]}})


def test_verify_report_skips_unchecked_groups():
    rows = [
        {"qid": {"g": "a"}, "gap": 0.004},
        {"qid": {"g": "b"}, "gap": None, "skipped": "too many members"},
        {"qid": {"g": "c"}, "gap": 0.001},
    ]
    report = verify_report(rows, tolerance=0.01, step=0.005)
    assert report["max_gap"] == 0.004
    assert report["passed"]
    assert not verify_report(rows, tolerance=0.002, step=0.005)["passed"]
    assert verify_report([], 0.01, 0.005)["max_gap"] is None


def test_write_curve(credit_sample, output_dir):
    path = str(output_dir / "curve" / "tradeoff.csv")
    write_curve(path, master_tradeoff(credit_sample, "delta", 3))
    df = pd.read_csv(path)
    assert list(df.columns) == ["kind", "fidelity", "gender=F", "gender=M", "overall"]
    assert df["fidelity"].tolist() == [0.0, 0.5, 1.0]
    assert df["overall"].iloc[-1] == pytest.approx(1.0)
