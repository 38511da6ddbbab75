import logging
import math

import numpy as np
import pytest

from dataset import QidGroup
from privacy import (
    AnnouncedMapping,
    IndexOutOfGroupError,
    beta_min,
    c_star,
    check_beta,
    confidence,
    confidence_report,
    confidences,
    group_max_confidence,
    min_uncertainty,
    uncertainty_from_confidence,
    vulnerability_leakage,
)

logging.basicConfig(level=logging.INFO)


def test_female_true_rules_reveal_high_income(sample_groups):
    female, _ = sample_groups
    assert confidence(female, female.d, 2, 1) == pytest.approx(1.0)
    assert confidence(female, female.d, 0, 0) == pytest.approx(0.3 / 0.425)
    assert c_star(female) == pytest.approx(1.0)


def test_male_true_rules(sample_groups):
    _, male = sample_groups
    # positive outcome: 0.175*0.5 + 0.1*1 = 0.1875
    assert confidence(male, male.d, 2, 1) == pytest.approx(0.1 / 0.1875)
    # negative outcome: 0.225 + 0.0875 = 0.3125
    assert confidence(male, male.d, 0, 0) == pytest.approx(0.225 / 0.3125)
    assert c_star(male) == pytest.approx(0.72)


def test_dataset_wide_mapping_matches_group_arrays(credit_sample, sample_groups):
    female, male = sample_groups
    m = AnnouncedMapping(np.array([0.1, 0.02, 0.9, 0.1, 0.4, 0.9]))
    np.testing.assert_allclose(m.for_group(female), [0.1, 0.02, 0.9])
    assert group_max_confidence(female, m) == pytest.approx(0.675)
    assert group_max_confidence(male, m) == pytest.approx(0.2025 / 0.3175)


def test_undefined_outcome_is_none():
    g = QidGroup.from_arrays([0.5, 0.5], [0.0, 0.0])
    assert confidences(g, g.d, 1) is None
    assert confidence(g, g.d, 0, 1) is None
    np.testing.assert_allclose(confidences(g, g.d, 0), [0.5, 0.5])
    assert group_max_confidence(g, g.d) == pytest.approx(0.5)


def test_confidence_rejects_foreign_index(sample_groups):
    female, _ = sample_groups
    with pytest.raises(IndexOutOfGroupError):
        confidence(female, female.d, 3, 1)
    with pytest.raises(ValueError):
        confidence(female, female.d, 0, 2)


def test_check_beta_lists_violations_in_order(sample_groups):
    female, _ = sample_groups
    announced = np.array([0.1, 0.02, 0.9])
    ok, violations = check_beta(female, announced, 0.675)
    assert ok and violations == []
    ok, violations = check_beta(female, announced, 0.674)
    assert not ok
    assert violations == [(0, 0), (2, 1)]


def test_check_beta_validates_beta(sample_groups):
    female, _ = sample_groups
    for beta in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            check_beta(female, female.d, beta)


def test_beta_min_is_largest_conditional(sample_groups):
    female, male = sample_groups
    assert beta_min(female) == pytest.approx(0.6)
    assert beta_min(male) == pytest.approx(0.45)


def test_constant_rule_leaks_nothing():
    g = QidGroup.from_arrays([0.1, 0.3, 0.2], [0.4, 0.4, 0.4])
    assert group_max_confidence(g, g.d) == pytest.approx(beta_min(g))
    assert vulnerability_leakage(g, g.d) == pytest.approx(0.0, abs=1e-12)


def test_uncertainty_is_negative_log_confidence(sample_groups):
    female, _ = sample_groups
    announced = [0.1, 0.02, 0.9]
    assert min_uncertainty(female, announced) == pytest.approx(-math.log(0.675))
    assert uncertainty_from_confidence(1.0) == 0.0
    assert uncertainty_from_confidence(0.0) == math.inf


def test_leakage_of_true_rules(sample_groups):
    female, _ = sample_groups
    assert vulnerability_leakage(female, female.d) == pytest.approx(math.log(1.0 / 0.6))


def test_confidence_report_covers_all_groups(credit_sample):
    report = confidence_report(credit_sample, AnnouncedMapping.truthful(credit_sample))
    assert [g.qid for g in report.groups] == [("F",), ("M",)]
    assert report.max_confidence == pytest.approx(1.0)
    assert report.min_uncertainty == pytest.approx(0.0)
    female = report.groups[0]
    np.testing.assert_allclose(female.conf[1], [0.0, 0.0, 1.0])
    assert female.leakage == pytest.approx(math.log(1.0 / 0.6))


def test_announced_mapping_validates_range():
    with pytest.raises(ValueError):
        AnnouncedMapping(np.array([0.2, 1.2]))
