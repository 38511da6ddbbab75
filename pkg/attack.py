"""Honest-but-curious inference attacks against a published report.

An adversary knows each target's public values, observes the decision the
target received, and combines the published rules with side information
(census-style priors P(sensitive | public)) via Bayes' rule. A second attack
recovers the rule table itself from disclosed fairness measures.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from dataset import WeightedDataset, partition_by_qid
from privacy import OUTCOMES, outcome_rules, rules_of

PROBABILITY_COLUMN = "probability"
ROW_SUM_TOLERANCE = 1e-6
# Branches whose rules stray further than this outside [0, 1] are rejected.
INVERSION_SLACK = 0.1
MAX_INVERSION_CONDITIONS = 3

Key = tuple[str, ...]


class AttackError(Exception):
    pass


class UndefinedPosteriorError(AttackError):
    pass


class IncompleteRulesError(AttackError):
    pass


class UnresolvableError(AttackError):
    pass


class UnsupportedStructureError(AttackError):
    pass


@dataclass(frozen=True)
class SideInformation:
    """Adversary's prior P(sensitive values | public values) per public key."""

    public_names: tuple[str, ...]
    sensitive_names: tuple[str, ...]
    table: dict[Key, dict[Key, float]]

    def __post_init__(self) -> None:
        for public, row in self.table.items():
            values = np.array(list(row.values()), dtype=float)
            if np.any(values < 0.0) or np.any(values > 1.0):
                raise AttackError(f"Side information for {public} has entries outside [0, 1]")
            if abs(values.sum() - 1.0) > ROW_SUM_TOLERANCE:
                raise AttackError(
                    f"Side information for {public} sums to {values.sum():.8f}, expected 1"
                )

    def prior(self, public: Key) -> dict[Key, float]:
        try:
            return self.table[public]
        except KeyError:
            raise AttackError(f"No side information for public values {public}") from None

    @classmethod
    def from_dataset(cls, ds: WeightedDataset) -> "SideInformation":
        """Exact conditionals of the dataset: the worst-case adversary."""
        table = {}
        for g in partition_by_qid(ds):
            table[g.qid] = {
                ds.sensitive_key(int(i)): float(c)
                for i, c in zip(g.indices, g.conditional)
            }
        return cls(
            tuple(ds.schema.public_names), tuple(ds.schema.sensitive_names), table
        )

    @classmethod
    def from_frame(cls, df: pd.DataFrame, public_names: list[str]) -> "SideInformation":
        if PROBABILITY_COLUMN not in df.columns:
            raise AttackError(f"Side information needs a {PROBABILITY_COLUMN!r} column")
        missing = [name for name in public_names if name not in df.columns]
        if missing:
            raise AttackError(f"Side information lacks public columns {missing}")
        sensitive_names = [
            c for c in df.columns if c not in public_names and c != PROBABILITY_COLUMN
        ]
        if not sensitive_names:
            raise AttackError("Side information has no sensitive columns")
        probabilities = pd.to_numeric(df[PROBABILITY_COLUMN], errors="coerce")
        if probabilities.isna().any():
            raise AttackError("Side information has non-numeric probabilities")

        table: dict[Key, dict[Key, float]] = {}
        for row, prob in zip(df.itertuples(index=False), probabilities):
            values = row._asdict()
            public = tuple(str(values[n]) for n in public_names)
            sensitive = tuple(str(values[n]) for n in sensitive_names)
            table.setdefault(public, {})[sensitive] = float(prob)
        return cls(tuple(public_names), tuple(sensitive_names), table)

    @classmethod
    def from_file(cls, path: str, public_names: list[str]) -> "SideInformation":
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
        df.columns = [c.strip() for c in df.columns]
        side = cls.from_frame(df, public_names)
        logging.info(f"Loaded side information for {len(side.table)} public keys from {path}")
        return side


def rules_from_dataset(ds: WeightedDataset, m) -> dict[tuple[Key, Key], float]:
    """Published rule table keyed by (public values, sensitive values)."""
    rules = rules_of(m)
    return {
        (ds.public_key(i), ds.sensitive_key(i)): float(rules[i]) for i in range(len(ds))
    }


def posterior_distribution(
    side: SideInformation,
    rules: dict[tuple[Key, Key], float],
    public: Key,
    outcome: int,
) -> dict[Key, float]:
    prior = side.prior(public)
    try:
        likelihood = np.array(
            [rules[(public, sensitive)] for sensitive in prior], dtype=float
        )
    except KeyError as e:
        raise IncompleteRulesError(f"Published rules miss cell {e.args[0]}") from None
    weights = np.array(list(prior.values())) * outcome_rules(likelihood, outcome)
    total = weights.sum()
    if total <= 0.0:
        raise UndefinedPosteriorError(
            f"Outcome {outcome} has zero likelihood for public values {public}"
        )
    return dict(zip(prior, (weights / total).tolist()))


def rule_inference_confidence(
    side: SideInformation,
    rules: dict[tuple[Key, Key], float],
    public: Key,
    outcome: int,
    target: Key,
) -> float:
    posterior = posterior_distribution(side, rules, public, outcome)
    if target not in posterior:
        raise AttackError(f"Sensitive values {target} unknown for public values {public}")
    return posterior[target]


@dataclass(frozen=True)
class AttackResult:
    public: Key
    outcome: int
    target: Key
    prior: float
    posterior: float

    @property
    def amplification(self) -> float:
        if self.prior == 0.0:
            return math.inf if self.posterior > 0.0 else 1.0
        return self.posterior / self.prior


def inference_attack(
    side: SideInformation,
    rules: dict[tuple[Key, Key], float],
    public: Key,
    outcome: int,
    target: Key,
) -> AttackResult:
    posterior = rule_inference_confidence(side, rules, public, outcome, target)
    result = AttackResult(public, outcome, target, side.prior(public)[target], posterior)
    logging.info(
        f"Attack on {public} -> {target} given outcome {outcome}: "
        f"prior {result.prior:.4f}, posterior {result.posterior:.4f}, "
        f"amplification {result.amplification:.2f}"
    )
    return result


def exhaustive_attack(
    side: SideInformation, rules: dict[tuple[Key, Key], float]
) -> list[AttackResult]:
    """Every (public key, outcome, target) whose posterior is defined."""
    results = []
    for public, prior in side.table.items():
        for outcome in OUTCOMES:
            try:
                posterior = posterior_distribution(side, rules, public, outcome)
            except UndefinedPosteriorError:
                continue
            results.extend(
                AttackResult(public, outcome, target, prior[target], value)
                for target, value in posterior.items()
            )
    return results


@dataclass(frozen=True)
class FairnessDisclosure:
    """What a fairness report reveals: two overall rates and per-condition biases.

    ``groups`` are values of the single public attribute, ``conditions`` values
    of the single sensitive attribute. ``known_cells`` maps (group, condition)
    to a rule disclosed through some other channel.
    """

    groups: tuple[str, str]
    conditions: tuple[str, ...]
    rates: tuple[float, float]
    biases: tuple[float, ...]
    known_cells: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.biases) != len(self.conditions):
            raise AttackError("One bias per condition is required")
        for cell in self.known_cells:
            if cell[0] not in self.groups or cell[1] not in self.conditions:
                raise AttackError(f"Known cell {cell} is outside the disclosed table")


@dataclass
class InversionResult:
    rules: dict[tuple[str, str], float]
    # solution of the linear system before any clamping
    intermediate: dict[tuple[str, str], float]
    # clamped cells with each rate equation re-solved using the census weights
    resolved_rules: dict[tuple[str, str], float]
    signs: tuple[int, ...]
    clamped: list[tuple[str, str]]
    rank: int
    residual_mass: dict[str, float | None]
    rejected_branches: int

    def rule_table(self) -> dict[tuple[Key, Key], float]:
        return {((g,), (c,)): v for (g, c), v in self.rules.items()}


def _weights(side: SideInformation, disclosure: FairnessDisclosure) -> np.ndarray:
    if len(side.public_names) != 1 or len(side.sensitive_names) != 1:
        raise UnsupportedStructureError(
            "Inversion needs exactly one public and one sensitive attribute"
        )
    rows = []
    for group in disclosure.groups:
        prior = side.prior((group,))
        try:
            rows.append([prior[(c,)] for c in disclosure.conditions])
        except KeyError as e:
            raise AttackError(f"No side information for {group}, {e.args[0]}") from None
    return np.array(rows, dtype=float)


def _system(
    w: np.ndarray, disclosure: FairnessDisclosure
) -> tuple[np.ndarray, list[int]]:
    """Rows of the report equations over [d_1 | d_2]; returns A and the bias rows."""
    n = w.shape[1]
    rows = [np.concatenate((w[0], np.zeros(n))), np.concatenate((np.zeros(n), w[1]))]
    bias_rows = []
    for j in range(n):
        row = np.zeros(2 * n)
        row[j], row[n + j] = 1.0, -1.0
        bias_rows.append(len(rows))
        rows.append(row)
    for group, condition in disclosure.known_cells:
        row = np.zeros(2 * n)
        row[disclosure.groups.index(group) * n + disclosure.conditions.index(condition)] = 1.0
        rows.append(row)
    return np.array(rows), bias_rows


def _rhs(disclosure: FairnessDisclosure, signs: dict[int, int]) -> np.ndarray:
    rhs = list(disclosure.rates)
    rhs.extend(signs.get(j, 1) * b for j, b in enumerate(disclosure.biases))
    rhs.extend(disclosure.known_cells.values())
    return np.array(rhs, dtype=float)


def _settle_rate(
    rules: np.ndarray, w: np.ndarray, rate: float, free: np.ndarray, resolve: bool
) -> tuple[np.ndarray, float]:
    """Refill the free cells of one rate equation after clamping the rest.

    With ``resolve`` the equation is re-solved over the free cells with their
    census weights. Otherwise the leftover rate is read directly as the free
    cells' rule, split evenly, which is how an adversary distrusting the
    census weights after a clamp estimates them.
    """
    residual = rate - float(w[~free] @ rules[~free])
    rules = rules.copy()
    if free.any():
        if resolve:
            solution, *_ = np.linalg.lstsq(w[free][None, :], np.array([residual]), rcond=None)
            rules[free] = solution
        else:
            rules[free] = residual / int(free.sum())
    return np.clip(rules, 0.0, 1.0), residual


def _settle(
    solution: np.ndarray,
    w: np.ndarray,
    disclosure: FairnessDisclosure,
    known: np.ndarray,
    sign_vector: np.ndarray,
    resolve: bool,
) -> tuple[np.ndarray, np.ndarray, dict[str, float | None]]:
    """Clamp out-of-range cells group by group; the second group follows the first via the biases."""
    n = len(disclosure.conditions)
    bias = np.array(disclosure.biases, dtype=float)
    d1, d2 = solution[:n].copy(), solution[n:].copy()
    clamped = np.zeros(2 * n, dtype=bool)
    residual_mass: dict[str, float | None] = {g: None for g in disclosure.groups}

    out1 = (d1 < 0.0) | (d1 > 1.0)
    if out1.any():
        clamped[:n] = out1
        d1, residual_mass[disclosure.groups[0]] = _settle_rate(
            np.clip(d1, 0.0, 1.0), w[0], disclosure.rates[0], ~(out1 | known[:n]), resolve
        )
        d2 = d1 - sign_vector * bias
        d2[known[n:]] = solution[n:][known[n:]]
    out2 = (d2 < 0.0) | (d2 > 1.0)
    if out2.any():
        clamped[n:] = out2
        d2, residual_mass[disclosure.groups[1]] = _settle_rate(
            np.clip(d2, 0.0, 1.0), w[1], disclosure.rates[1], ~(out2 | known[n:]), resolve
        )
    return np.concatenate((d1, d2)), clamped, residual_mass


def fairness_inversion(
    side: SideInformation,
    disclosure: FairnessDisclosure,
    slack: float = INVERSION_SLACK,
) -> InversionResult:
    """Recover the two groups' rules per condition from a fairness disclosure.

    Every sign assignment of the nonzero CSP biases is solved; branches with a
    rule outside [-slack, 1 + slack] are rejected. Exactly one branch must
    survive. Its out-of-range cells are clamped to [0, 1]. ``rules`` then takes
    the leftover rate, split evenly over the free cells, and ``resolved_rules`` re-solves
    each rate equation over the cells that were neither clamped nor known.
    """
    n = len(disclosure.conditions)
    if len(disclosure.groups) != 2 or n > MAX_INVERSION_CONDITIONS:
        raise UnsupportedStructureError(
            f"Inversion supports two groups and at most {MAX_INVERSION_CONDITIONS} "
            f"conditions, got {len(disclosure.groups)} and {n}"
        )
    w = _weights(side, disclosure)
    A, _ = _system(w, disclosure)
    rank = int(np.linalg.matrix_rank(A))
    if rank < 2 * n:
        raise UnresolvableError(
            f"Report equations have rank {rank}, {2 * n} unknown rules"
        )

    signed = [j for j, b in enumerate(disclosure.biases) if b != 0.0]
    feasible = []
    rejected = 0
    for choice in itertools.product((1, -1), repeat=len(signed)):
        signs = dict(zip(signed, choice))
        solution, *_ = np.linalg.lstsq(A, _rhs(disclosure, signs), rcond=None)
        if np.all(solution >= -slack) and np.all(solution <= 1.0 + slack):
            feasible.append((signs, solution))
        else:
            rejected += 1
            logging.debug(f"Rejected sign branch {signs}: {np.round(solution, 4).tolist()}")
    if len(feasible) != 1:
        raise UnresolvableError(
            f"{len(feasible)} sign branches remain feasible; the report does not pin the rules"
        )
    signs, solution = feasible[0]

    known = np.zeros(2 * n, dtype=bool)
    for group, condition in disclosure.known_cells:
        known[disclosure.groups.index(group) * n + disclosure.conditions.index(condition)] = True

    sign_vector = np.array([signs.get(j, 1) for j in range(n)], dtype=float)
    final, clamped_mask, residual_mass = _settle(
        solution, w, disclosure, known, sign_vector, resolve=False
    )
    resolved, _, _ = _settle(solution, w, disclosure, known, sign_vector, resolve=True)

    cells = [(g, c) for g in disclosure.groups for c in disclosure.conditions]
    result = InversionResult(
        rules=dict(zip(cells, final.tolist())),
        intermediate=dict(zip(cells, solution.tolist())),
        resolved_rules=dict(zip(cells, resolved.tolist())),
        signs=tuple(int(sign_vector[j]) for j in range(n)),
        clamped=[cell for cell, hit in zip(cells, clamped_mask) if hit],
        rank=rank,
        residual_mass=residual_mass,
        rejected_branches=rejected,
    )
    logging.info(
        f"Inverted fairness disclosure: {len(result.clamped)} clamped cells, "
        f"{rejected} rejected sign branches"
    )
    return result
