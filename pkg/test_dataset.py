import logging

import numpy as np
import pandas as pd
import pytest

from dataset import (
    Attribute,
    AttributeSchema,
    BadCountError,
    BadProbabilityError,
    ConflictingRuleError,
    MissingColumnError,
    QidGroup,
    Role,
    SchemaError,
    WeightedDataset,
    WeightedRecord,
    ZeroTotalError,
    load_dataset,
    partition_by_qid,
)

logging.basicConfig(level=logging.INFO)

ROLES = {"gender": "public", "income": "sensitive"}


def _write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_credit_sample(credit_sample):
    assert len(credit_sample) == 6
    assert credit_sample.total == 40
    np.testing.assert_allclose(
        credit_sample.probabilities, [0.3, 0.125, 0.075, 0.225, 0.175, 0.1]
    )
    np.testing.assert_allclose(credit_sample.rules, [0, 0, 1, 0, 0.5, 1])
    assert credit_sample.schema.public_names == ["gender"]
    assert credit_sample.schema.sensitive_names == ["income"]


def test_partition_keeps_first_appearance_order(credit_sample):
    groups = partition_by_qid(credit_sample)
    assert [g.qid for g in groups] == [("F",), ("M",)]
    female, male = groups
    assert female.indices.tolist() == [0, 1, 2]
    assert male.indices.tolist() == [3, 4, 5]
    assert female.group_mass == pytest.approx(0.5)
    np.testing.assert_allclose(female.conditional, [0.6, 0.25, 0.15])
    np.testing.assert_allclose(male.conditional, [0.45, 0.35, 0.2])


def test_partition_interleaved_rows(input_dir):
    path = _write_csv(
        input_dir / "mixed.csv",
        "income,gender,count,d\nlow,M,1,0\nlow,F,2,0\nhigh,M,3,1\nhigh,F,4,1\n",
    )
    ds = load_dataset(path, ROLES)
    groups = partition_by_qid(ds)
    assert [g.qid for g in groups] == [("M",), ("F",)]
    assert groups[0].indices.tolist() == [0, 2]
    assert groups[1].indices.tolist() == [1, 3]


def test_duplicate_rows_merge_counts(input_dir):
    path = _write_csv(
        input_dir / "dup.csv",
        "income,gender,count,d\nlow,F,2,0.25\nhigh,F,1,1\nlow,F,3,0.25\n",
    )
    ds = load_dataset(path, ROLES)
    assert len(ds) == 2
    assert ds.records[0].count == 5
    assert ds.total == 6


def test_duplicate_rows_with_conflicting_rules(input_dir):
    path = _write_csv(
        input_dir / "conflict.csv",
        "income,gender,count,d\nlow,F,2,0.25\nlow,F,3,0.5\n",
    )
    with pytest.raises(ConflictingRuleError):
        load_dataset(path, ROLES)


@pytest.mark.parametrize(
    "row,error",
    [
        ("low,F,0,0.5", BadCountError),
        ("low,F,-2,0.5", BadCountError),
        ("low,F,1.5,0.5", BadCountError),
        ("low,F,abc,0.5", BadCountError),
        ("low,F,3,1.2", BadProbabilityError),
        ("low,F,3,-0.1", BadProbabilityError),
        ("low,F,3,", BadProbabilityError),
    ],
)
def test_invalid_rows_are_rejected(input_dir, row, error):
    path = _write_csv(input_dir / "bad.csv", f"income,gender,count,d\n{row}\n")
    with pytest.raises(error):
        load_dataset(path, ROLES)


def test_missing_reserved_column(input_dir):
    path = _write_csv(input_dir / "nod.csv", "income,gender,count\nlow,F,3\n")
    with pytest.raises(MissingColumnError):
        load_dataset(path, ROLES)


def test_unassigned_column_is_a_schema_error(input_dir):
    path = _write_csv(
        input_dir / "extra.csv", "income,gender,age,count,d\nlow,F,30,3,0\n"
    )
    with pytest.raises(SchemaError):
        load_dataset(path, ROLES)


def test_roles_callable_sees_attribute_columns(input_dir):
    path = _write_csv(
        input_dir / "call.csv", "income,gender,age,count,d\nlow,F,30,3,0\n"
    )
    seen = []

    def roles(columns):
        seen.extend(columns)
        return {c: "public" if c == "gender" else "sensitive" for c in columns}

    ds = load_dataset(path, roles)
    assert seen == ["income", "gender", "age"]
    assert ds.schema.sensitive_names == ["income", "age"]


def test_empty_file_and_header_only(input_dir):
    empty = _write_csv(input_dir / "empty.csv", "")
    with pytest.raises(ZeroTotalError):
        load_dataset(empty, ROLES)
    header = _write_csv(input_dir / "header.csv", "income,gender,count,d\n")
    with pytest.raises(ZeroTotalError):
        load_dataset(header, ROLES)


def test_schema_needs_both_roles():
    with pytest.raises(SchemaError):
        AttributeSchema((Attribute("gender", ("F",), Role.PUBLIC),))


def test_from_frame_with_all_public_roles_fails():
    df = pd.DataFrame({"income": ["low"], "gender": ["F"], "count": ["1"], "d": ["0"]})
    with pytest.raises(SchemaError):
        WeightedDataset.from_frame(df, {"income": "public", "gender": "public"})


def test_labels(credit_sample):
    assert credit_sample.qid_label(("M",)) == "gender=M"
    assert credit_sample.as_dict(0) == {"income": "<100k", "gender": "F"}


def test_single_record_group(input_dir):
    path = _write_csv(
        input_dir / "single.csv",
        "income,gender,count,d\nlow,F,4,0.3\nlow,M,2,0\nhigh,M,2,1\n",
    )
    groups = partition_by_qid(load_dataset(path, ROLES))
    assert groups[0].size == 1
    np.testing.assert_allclose(groups[0].conditional, [1.0])


def test_qid_group_from_arrays():
    g = QidGroup.from_arrays([0.2, 0.3], [0.0, 1.0])
    assert g.size == 2
    assert g.group_mass == pytest.approx(0.5)
    assert g.members == [(0, 0.2, 0.0), (1, 0.3, 1.0)]
    with pytest.raises(ZeroTotalError):
        QidGroup.from_arrays([0.0, 0.0], [0.0, 1.0])


def test_records_outside_domain_are_rejected():
    schema = AttributeSchema(
        (
            Attribute("gender", ("F",), Role.PUBLIC),
            Attribute("income", ("low",), Role.SENSITIVE),
        )
    )
    with pytest.raises(SchemaError):
        WeightedDataset(schema, (WeightedRecord(("M", "low"), 1, 0.0),))
