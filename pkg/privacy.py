"""Adversary confidence for announced decision mappings.

Confidence of inferring record ``k`` of a QID group from outcome ``a`` is the
posterior P(x_k) * D_a(x_k) / sum_j P(x_j) * D_a(x_j). An outcome that never
occurs inside the group has no posterior; those entries are ``None`` and are
left out of every maximum.
"""

import math
from dataclasses import dataclass

import numpy as np

from dataset import QidGroup, WeightedDataset, partition_by_qid

BETA_TOLERANCE = 1e-9
OUTCOMES = (0, 1)


class PrivacyError(Exception):
    pass


class IndexOutOfGroupError(PrivacyError):
    pass


@dataclass(frozen=True, eq=False)
class AnnouncedMapping:
    """Per-record probability of the positive decision, dataset-indexed."""

    d_tilde: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.d_tilde < 0.0) or np.any(self.d_tilde > 1.0):
            raise ValueError("Announced rules must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.d_tilde)

    @classmethod
    def truthful(cls, ds: WeightedDataset) -> "AnnouncedMapping":
        return cls(ds.rules)

    def for_group(self, g: QidGroup) -> np.ndarray:
        return self.d_tilde[g.indices]


def group_rules(g: QidGroup, m) -> np.ndarray:
    """Announced rules of ``g``'s members.

    ``m`` is either a dataset-wide ``AnnouncedMapping`` or an array already
    aligned with the group's members.
    """
    if isinstance(m, AnnouncedMapping):
        return m.for_group(g)
    rules = np.asarray(m, dtype=float)
    if rules.shape != (g.size,):
        raise ValueError(f"Expected {g.size} member rules, got shape {rules.shape}")
    return rules


def rules_of(m) -> np.ndarray:
    if isinstance(m, AnnouncedMapping):
        return m.d_tilde
    return np.asarray(m, dtype=float)


def outcome_rules(rules: np.ndarray, a: int) -> np.ndarray:
    if a == 1:
        return rules
    if a == 0:
        return 1.0 - rules
    raise ValueError(f"Outcome must be 0 or 1, got {a}")


def confidences(g: QidGroup, m, a: int) -> np.ndarray | None:
    """Posterior over the group's members given outcome ``a``, or None."""
    weights = g.p * outcome_rules(group_rules(g, m), a)
    denominator = weights.sum()
    if denominator <= 0.0:
        return None
    return weights / denominator


def confidence(g: QidGroup, m, k: int, a: int) -> float | None:
    if not 0 <= k < g.size:
        raise IndexOutOfGroupError(f"Member {k} not in group of size {g.size}")
    conf = confidences(g, m, a)
    return None if conf is None else float(conf[k])


def group_max_confidence(g: QidGroup, m) -> float:
    best = 0.0
    for a in OUTCOMES:
        conf = confidences(g, m, a)
        if conf is not None:
            best = max(best, float(conf.max()))
    return best


def beta_min(g: QidGroup) -> float:
    return float(g.p.max() / g.group_mass)


def c_star(g: QidGroup) -> float:
    """Maximum confidence the unperturbed rules give away."""
    return group_max_confidence(g, g.d)


def check_beta(g: QidGroup, m, beta: float) -> tuple[bool, list[tuple[int, int]]]:
    """Whether every defined confidence is within ``beta``; violations as (k, a)."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    violations = []
    for a in OUTCOMES:
        conf = confidences(g, m, a)
        if conf is None:
            continue
        for k in np.flatnonzero(conf > beta + BETA_TOLERANCE):
            violations.append((int(k), a))
    violations.sort()
    return not violations, violations


def min_uncertainty(g: QidGroup, m) -> float:
    top = group_max_confidence(g, m)
    if top <= 0.0:
        raise ValueError("Minimum uncertainty needs a positive maximum confidence")
    return -math.log(top)


def uncertainty_from_confidence(beta: float) -> float:
    return -math.log(beta) if beta > 0 else math.inf


def vulnerability_leakage(g: QidGroup, m) -> float:
    """Multiplicative leakage of the mapping over the prior, in nats."""
    return math.log(group_max_confidence(g, m) / beta_min(g))


@dataclass
class GroupConfidence:
    qid: tuple[str, ...]
    # conf[a] is the per-member posterior for outcome a, or None when undefined
    conf: dict[int, np.ndarray | None]
    max_confidence: float
    beta_min: float
    leakage: float


@dataclass
class ConfidenceReport:
    groups: list[GroupConfidence]

    @property
    def max_confidence(self) -> float:
        return max(g.max_confidence for g in self.groups)

    @property
    def min_uncertainty(self) -> float:
        return uncertainty_from_confidence(self.max_confidence)


def confidence_report(
    ds: WeightedDataset, m, groups: list[QidGroup] | None = None
) -> ConfidenceReport:
    if groups is None:
        groups = partition_by_qid(ds)
    rows = []
    for g in groups:
        conf = {a: confidences(g, m, a) for a in OUTCOMES}
        rows.append(
            GroupConfidence(
                qid=g.qid,
                conf=conf,
                max_confidence=group_max_confidence(g, m),
                beta_min=beta_min(g),
                leakage=vulnerability_leakage(g, m),
            )
        )
    return ConfidenceReport(rows)
