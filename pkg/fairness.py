import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dataset import WeightedDataset
from fidelity import LOG_BASE, FidelitySpec, bias_distortion_bound, bound_family
from privacy import rules_of

TV_FAMILY = "total-variation"
RELATIVE_FAMILY = "relative-metric"
EEOC_P = 0.8

TV_NORMALIZATION_NOTE = (
    "binary outcomes: (1/|A|) * sum_a |Z1(a) - Z2(a)| with |A|=2 equals |d1 - d2|"
)


class FairnessError(Exception):
    pass


class EmptySelectionError(FairnessError):
    pass


class ZeroDenominatorError(FairnessError):
    pass


@dataclass(frozen=True)
class GroupSelector:
    """Records matching every ``group`` constraint and every ``condition``."""

    group: dict[str, str]
    condition: dict[str, str] = field(default_factory=dict)

    def mask(self, ds: WeightedDataset) -> np.ndarray:
        selected = np.ones(len(ds), dtype=bool)
        for name, value in {**self.group, **self.condition}.items():
            column = ds.schema.index_of(name)
            selected &= np.array([r.values[column] == value for r in ds.records])
        return selected

    @property
    def label(self) -> str:
        text = ",".join(f"{k}={v}" for k, v in self.group.items())
        if self.condition:
            text += "|" + ",".join(f"{k}={v}" for k, v in self.condition.items())
        return text

    def given(self, **condition: str) -> "GroupSelector":
        return GroupSelector(dict(self.group), {**self.condition, **condition})

    @classmethod
    def parse(cls, text: str) -> "GroupSelector":
        """``"gender=F"`` or ``"gender=F|income=100k-200k"``."""
        group_part, _, condition_part = text.partition("|")
        return cls(_parse_pairs(group_part), _parse_pairs(condition_part))


def _parse_pairs(text: str) -> dict[str, str]:
    pairs = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"Expected attr=value, got {item!r}")
        pairs[name.strip()] = value.strip()
    return pairs


def group_rate(ds: WeightedDataset, m, sel: GroupSelector) -> float:
    selected = sel.mask(ds)
    if not selected.any():
        raise EmptySelectionError(f"Selector {sel.label} matches no records")
    p = ds.probabilities[selected]
    return float(p @ rules_of(m)[selected] / p.sum())


def sp_bias(ds: WeightedDataset, m, sel1: GroupSelector, sel2: GroupSelector) -> float:
    return abs(group_rate(ds, m, sel1) - group_rate(ds, m, sel2))


def csp_biases(
    ds: WeightedDataset,
    m,
    sel1: GroupSelector,
    sel2: GroupSelector,
    condition_attr: str,
) -> list[tuple[str, float]]:
    """SP bias within each value of ``condition_attr``, in domain order."""
    column = ds.schema.index_of(condition_attr)
    domain = ds.schema.attributes[column].domain
    return [
        (value, sp_bias(ds, m, sel1.given(**{condition_attr: value}), sel2.given(**{condition_attr: value})))
        for value in domain
    ]


def p_rule_ratio(
    ds: WeightedDataset, m, sel1: GroupSelector, sel2: GroupSelector
) -> float:
    denominator = group_rate(ds, m, sel2)
    if denominator == 0.0:
        raise ZeroDenominatorError(f"Group {sel2.label} has a zero positive rate")
    return group_rate(ds, m, sel1) / denominator


def p_rule_compliant(ratio: float, p: float = EEOC_P) -> bool:
    return p <= ratio <= 1.0 / p


def hamming_distances(ds: WeightedDataset, indices: np.ndarray) -> np.ndarray:
    """Pairwise attribute mismatch fraction, in [0, 1]."""
    values = np.array([ds.records[i].values for i in indices], dtype=object)
    mismatches = values[:, None, :] != values[None, :, :]
    return mismatches.sum(axis=2) / values.shape[1]


def tv_distance(d1, d2) -> np.ndarray:
    """Normalized total variation between binary outcome distributions."""
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    return 0.5 * (np.abs(d1 - d2) + np.abs((1.0 - d1) - (1.0 - d2)))


def relative_inf_distance(d1, d2) -> np.ndarray:
    """max over outcomes of |ln(Z1(a) / Z2(a))|; inf when only one side is zero."""
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    worst = np.zeros(np.broadcast(d1, d2).shape)
    for z1, z2 in ((d1, d2), (1.0 - d1, 1.0 - d2)):
        both_zero = (z1 == 0.0) & (z2 == 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.abs(np.log(z1) - np.log(z2))
        term = np.where(both_zero, 0.0, term)
        worst = np.maximum(worst, term)
    return worst


@dataclass(frozen=True)
class IndividualFairnessResult:
    violation: float
    pair: tuple[int, int] | None
    family: str
    incomparable: bool = False


def individual_fairness_violation(
    ds: WeightedDataset,
    m,
    metric: Callable[[tuple[str, ...], tuple[str, ...]], float] | None = None,
    family: str = "tv",
    epsilon: float = 0.0,
    indices=None,
) -> IndividualFairnessResult:
    """Largest excess of output distance over record distance plus epsilon.

    Pairs of a record with itself contribute ``-epsilon``. ``pair`` is the
    first distinct pair (row-major) attaining the maximum, or None when no
    distinct pair beats the self-pairs.
    """
    if family not in ("tv", "rel_inf"):
        raise ValueError(f"Unknown output distance family: {family}")
    if indices is None:
        indices = np.arange(len(ds))
    indices = np.asarray(indices)
    rules = rules_of(m)[indices]
    n = len(indices)
    baseline = -epsilon
    if n < 2:
        return IndividualFairnessResult(baseline, None, family)

    if metric is None:
        dist = hamming_distances(ds, indices)
    else:
        dist = np.zeros((n, n))
        for i, j in zip(*np.triu_indices(n, k=1)):
            dist[i, j] = metric(ds.records[indices[i]].values, ds.records[indices[j]].values)
    if np.any(dist < 0):
        raise ValueError("Record distance must be nonnegative")

    if family == "tv":
        out = tv_distance(rules[:, None], rules[None, :])
    else:
        out = relative_inf_distance(rules[:, None], rules[None, :])

    rows, cols = np.triu_indices(n, k=1)
    excess = out[rows, cols] - dist[rows, cols] - epsilon
    k = int(np.argmax(excess))
    if excess[k] <= baseline:
        return IndividualFairnessResult(baseline, None, family)
    pair = (int(indices[rows[k]]), int(indices[cols[k]]))
    return IndividualFairnessResult(
        float(excess[k]), pair, family, incomparable=bool(np.isinf(excess[k]))
    )


@dataclass
class FairnessMeasure:
    name: str
    groups: tuple[str, str]
    true_value: float
    announced_value: float
    family: str
    distortion_bound: float | None
    condition: str | None = None

    @property
    def distortion(self) -> float:
        return abs(self.announced_value - self.true_value)

    @property
    def within_bound(self) -> bool | None:
        if self.distortion_bound is None:
            return None
        if math.isinf(self.true_value) or math.isinf(self.announced_value):
            return None
        return self.distortion <= self.distortion_bound + 1e-12


@dataclass
class FairnessReport:
    measures: list[FairnessMeasure]
    fidelity: dict | None
    distortion_bound: float | None
    bound_family: str | None
    metadata: dict = field(default_factory=dict)


def _applicable_bound(family: str, bound: float | None, spec_family: str | None) -> float | None:
    return bound if spec_family == family else None


def fairness_report(
    ds: WeightedDataset,
    true_mapping,
    announced_mapping,
    spec: FidelitySpec | None,
    sel1: GroupSelector,
    sel2: GroupSelector,
    measures: tuple[str, ...] = ("sp", "csp", "pr"),
    condition_attr: str | None = None,
    epsilon: float = 0.0,
) -> FairnessReport:
    """Each measure on the true and announced rules, with its distortion bound."""
    bound = family = None
    if spec is not None and bound_family(spec) is not None:
        bound, family = bias_distortion_bound(spec), bound_family(spec)
    names = (sel1.label, sel2.label)
    rows: list[FairnessMeasure] = []

    if "sp" in measures:
        rows.append(
            FairnessMeasure(
                "sp",
                names,
                sp_bias(ds, true_mapping, sel1, sel2),
                sp_bias(ds, announced_mapping, sel1, sel2),
                TV_FAMILY,
                _applicable_bound(TV_FAMILY, bound, family),
            )
        )
    if "csp" in measures:
        if condition_attr is None:
            raise ValueError("CSP needs a conditioning attribute")
        true_csp = dict(csp_biases(ds, true_mapping, sel1, sel2, condition_attr))
        announced_csp = csp_biases(ds, announced_mapping, sel1, sel2, condition_attr)
        for value, announced in announced_csp:
            rows.append(
                FairnessMeasure(
                    "csp",
                    names,
                    true_csp[value],
                    announced,
                    TV_FAMILY,
                    _applicable_bound(TV_FAMILY, bound, family),
                    condition=f"{condition_attr}={value}",
                )
            )
    if "pr" in measures:
        rows.append(
            FairnessMeasure(
                "pr",
                names,
                _log_ratio(ds, true_mapping, sel1, sel2),
                _log_ratio(ds, announced_mapping, sel1, sel2),
                RELATIVE_FAMILY,
                _applicable_bound(RELATIVE_FAMILY, bound, family),
            )
        )
    if "individual" in measures:
        fam = "tv" if family != RELATIVE_FAMILY else "rel_inf"
        rows.append(
            FairnessMeasure(
                "individual",
                ("all", "all"),
                individual_fairness_violation(ds, true_mapping, family=fam, epsilon=epsilon).violation,
                individual_fairness_violation(ds, announced_mapping, family=fam, epsilon=epsilon).violation,
                TV_FAMILY if fam == "tv" else RELATIVE_FAMILY,
                None,
            )
        )

    for row in rows:
        if row.within_bound is False:
            logging.warning(
                f"{row.name} distortion {row.distortion:.6f} exceeds bound {row.distortion_bound:.6f}"
            )
    return FairnessReport(
        measures=rows,
        fidelity=spec.describe() if spec is not None else None,
        distortion_bound=bound,
        bound_family=family,
        metadata={"log_base": LOG_BASE, "tv_normalization": TV_NORMALIZATION_NOTE},
    )


def _log_ratio(ds: WeightedDataset, m, sel1: GroupSelector, sel2: GroupSelector) -> float:
    """|ln| of the p-rule ratio; inf when either rate is zero."""
    r1, r2 = group_rate(ds, m, sel1), group_rate(ds, m, sel2)
    if r1 == 0.0 and r2 == 0.0:
        return 0.0
    if r1 == 0.0 or r2 == 0.0:
        return math.inf
    return abs(math.log(r1 / r2))
