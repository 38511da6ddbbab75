"""Closed-form optimal privacy for binary decision mappings.

Each QID group is solved on its own and the dataset-level guarantee is the
weakest group. Within a group the optimum is the largest of four lower
bounds: one per outcome channel (``beta1``/``beta0``), the balanced point of
both channels (``beta_p``) and the prior of the most likely member
(``beta_min``). When one rule fits every member's box it is announced to
all of them and the prior binds. Otherwise the announced rules are built by
one allocation pass that splits the group's confidence budget between the
two outcomes and fills members greedily in dataset order.

Everything here is a handful of vector passes over the members, so a group
of a million records solves in well under a second.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import pandas as pd

from dataset import QidGroup, WeightedDataset, partition_by_qid
from fidelity import (
    EmptyBoundsError,
    FidelityBounds,
    FidelityKind,
    FidelitySpec,
    bounds_for,
)
from privacy import (
    BETA_TOLERANCE,
    AnnouncedMapping,
    beta_min,
    group_max_confidence,
    uncertainty_from_confidence,
)

ALLOCATION_TOLERANCE = 1e-9
_ROOT_TOLERANCE = 1e-12


class SolverError(Exception):
    pass


class InternalInfeasibleError(SolverError):
    pass


class GroupSolveError(SolverError):
    def __init__(self, qid: tuple[str, ...], reason: str) -> None:
        super().__init__(qid, reason)
        self.qid = qid
        self.reason = reason

    def __str__(self) -> str:
        return f"Group {self.qid}: {self.reason}"


class MasterSolveError(SolverError):
    """Every group that failed in one master solve, in dataset order."""

    def __init__(self, failures: list[GroupSolveError], total: int) -> None:
        super().__init__(failures, total)
        self.failures = failures
        self.total = total

    def __str__(self) -> str:
        listed = "; ".join(str(f) for f in self.failures)
        return f"{len(self.failures)} of {self.total} groups failed: {listed}"


class SolutionCase(str, Enum):
    BETA0 = "Beta0"
    BETA1 = "Beta1"
    BETA_P = "BetaP"
    PRIOR = "Prior"


@dataclass(frozen=True, eq=False)
class SubproblemWorkspace:
    beta: float
    anchor1: int
    anchor0: int
    # P(x^a) times the lower bound of outcome a at the anchor
    anchor1_mass: float
    anchor0_mass: float
    b: np.ndarray
    x_max_eff: np.ndarray
    x_min_eff: np.ndarray
    y_max_eff: np.ndarray
    y_min_eff: np.ndarray


@dataclass(frozen=True, eq=False)
class GroupSolution:
    group: QidGroup
    bounds: FidelityBounds
    beta0: float
    beta1: float
    beta_p: float
    beta_min: float
    beta_star: float
    case: SolutionCase
    d_tilde: np.ndarray
    achieved_conf: float
    anchor1: int
    anchor0: int
    notes: tuple[str, ...] = ()

    @property
    def qid(self) -> tuple[str, ...]:
        return self.group.qid

    @property
    def gamma_star(self) -> float:
        return uncertainty_from_confidence(self.beta_star)


@dataclass(frozen=True, eq=False)
class MasterSolution:
    groups: tuple[GroupSolution, ...]
    mapping: AnnouncedMapping
    spec: FidelitySpec

    @property
    def beta_star(self) -> float:
        return max(g.beta_star for g in self.groups)

    @property
    def gamma_star(self) -> float:
        return uncertainty_from_confidence(self.beta_star)

    @property
    def worst_group(self) -> GroupSolution:
        # first group attaining the maximum, in dataset order
        return max(self.groups, key=lambda g: g.beta_star)


def compute_workspace(
    g: QidGroup, bounds: FidelityBounds, beta: float
) -> SubproblemWorkspace:
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    p = g.p
    lower1 = p * bounds.x_min
    lower0 = p * bounds.y_min
    # np.argmax keeps the lowest index on ties
    anchor1 = int(np.argmax(lower1))
    anchor0 = int(np.argmax(lower0))
    a1 = float(lower1[anchor1])
    a0 = float(lower0[anchor0])
    b = p - beta * g.group_mass
    return SubproblemWorkspace(
        beta=beta,
        anchor1=anchor1,
        anchor0=anchor0,
        anchor1_mass=a1,
        anchor0_mass=a0,
        b=b,
        x_max_eff=np.minimum(bounds.x_max, a1 / p),
        x_min_eff=np.maximum(bounds.x_min, (a1 + b) / p),
        y_max_eff=np.minimum(bounds.y_max, a0 / p),
        y_min_eff=np.maximum(bounds.y_min, (a0 + b) / p),
    )


def _candidate(anchor_mass: float, rest: float) -> float:
    # an outcome with nothing pinned at its anchor imposes no constraint
    if anchor_mass <= 0.0:
        return 0.0
    return anchor_mass / (anchor_mass + rest)


def compute_betas(g: QidGroup, bounds: FidelityBounds) -> tuple[float, float, float]:
    """Candidate optima ``(beta0, beta1, beta_p)`` of the group."""
    ws = compute_workspace(g, bounds, 1.0)
    rest1 = g.p * ws.x_max_eff
    rest1[ws.anchor1] = 0.0
    rest0 = g.p * ws.y_max_eff
    rest0[ws.anchor0] = 0.0
    beta1 = _candidate(ws.anchor1_mass, float(rest1.sum()))
    beta0 = _candidate(ws.anchor0_mass, float(rest0.sum()))
    beta_p = (ws.anchor1_mass + ws.anchor0_mass) / g.group_mass
    return beta0, beta1, beta_p


def _fits(capacity: np.ndarray, beta: float, t: float) -> bool:
    """Whether members can carry outcome mass ``t / beta`` with none above ``t``."""
    return beta * float(np.minimum(capacity, t).sum()) >= t * (1.0 - _ROOT_TOLERANCE)


def _capacity_root(capacity: np.ndarray, beta: float) -> float:
    """Largest t with ``t == beta * sum(min(capacity, t))``.

    The right-hand side is concave and piecewise linear in t, so walking the
    segments from the top finds the largest crossing.
    """
    c = np.sort(capacity)[::-1]
    m = len(c)
    suffix = float(c.sum()) - np.concatenate(([0.0], np.cumsum(c)))
    capped = np.arange(m + 1)
    slope = 1.0 - beta * capped
    upper = np.concatenate(([np.inf], c))
    lower = np.concatenate((c, [0.0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(slope > 0.0, beta * suffix / slope, np.inf)
    eps = _ROOT_TOLERANCE * float(c[0])
    valid = (slope > 0.0) & (root >= lower - eps) & (root <= upper + eps)
    hits = np.flatnonzero(valid)
    return float(root[hits[0]]) if hits.size else 0.0


def _classify(beta0: float, beta1: float, beta_p: float, beta_star: float) -> SolutionCase:
    if beta_star == beta0:
        return SolutionCase.BETA0
    if beta_star == beta1:
        return SolutionCase.BETA1
    if beta_star == beta_p:
        return SolutionCase.BETA_P
    return SolutionCase.PRIOR


def _allocate(
    g: QidGroup, bounds: FidelityBounds, ws: SubproblemWorkspace, case: SolutionCase
) -> np.ndarray:
    p = g.p
    beta = ws.beta
    budget = beta * g.group_mass
    a1, a0 = ws.anchor1_mass, ws.anchor0_mass

    # Split the budget into the largest allowed positive-outcome mass (t1)
    # and negative-outcome mass (t0). t1 sits at its anchor whenever the
    # negative side can absorb the rest.
    if case is SolutionCase.BETA0:
        t1 = budget - a0
    elif _fits(p * bounds.y_max, beta, budget - a1):
        t1 = a1
    else:
        t1 = budget - _capacity_root(p * bounds.y_max, beta)
    t0 = budget - t1
    mass_tolerance = ALLOCATION_TOLERANCE * budget

    lower = np.maximum(bounds.x_min, 1.0 - t0 / p)
    upper = np.minimum(bounds.x_max, t1 / p)
    if np.any(lower > upper + ALLOCATION_TOLERANCE):
        k = int(np.argmax(lower - upper))
        raise InternalInfeasibleError(
            f"member {k} has empty interval [{lower[k]}, {upper[k]}] at beta={beta}"
        )

    # Balanced-point residual: mass still to place above the lower bounds so
    # the positive outcome totals t1 / beta.
    capacity = p * np.maximum(upper - lower, 0.0)
    residual = t1 / beta - float(p @ lower)
    total_capacity = float(capacity.sum())
    if residual < -mass_tolerance or residual > total_capacity + mass_tolerance:
        raise InternalInfeasibleError(
            f"residual {residual:.3e} outside [0, {total_capacity:.3e}] at beta={beta}"
        )
    residual = min(max(residual, 0.0), total_capacity)

    filled_before = np.cumsum(capacity) - capacity
    take = np.clip(residual - filled_before, 0.0, capacity)
    d_tilde = lower + take / p

    # the lighter outcome keeps its caps exactly where the two intervals touch
    if t1 <= t0:
        d_tilde = np.minimum(d_tilde, upper)
    else:
        d_tilde = np.maximum(d_tilde, lower)

    if case is SolutionCase.BETA_P:
        d_tilde[ws.anchor1] = bounds.x_min[ws.anchor1]
        if ws.anchor0 != ws.anchor1:
            d_tilde[ws.anchor0] = bounds.x_max[ws.anchor0]
    return np.clip(d_tilde, bounds.x_min, bounds.x_max)


def _shared_rule(g: QidGroup, bounds: FidelityBounds) -> float | None:
    """One rule every member's box admits, nearest the group's average rule.

    Announcing the same rule to every member leaves both outcomes carrying the
    prior, so it attains ``beta_min`` exactly.
    """
    low, high = float(bounds.x_min.max()), float(bounds.x_max.min())
    if low > high:
        return None
    average = float(g.p @ g.d) / g.group_mass
    return min(max(average, low), high)


def solve_group(g: QidGroup, bounds: FidelityBounds) -> GroupSolution:
    if len(bounds) != g.size:
        raise ValueError(f"Bounds cover {len(bounds)} members, group has {g.size}")

    if g.size == 1:
        d_tilde = np.clip(g.d, bounds.x_min, bounds.x_max)
        return GroupSolution(
            group=g,
            bounds=bounds,
            beta0=1.0,
            beta1=1.0,
            beta_p=1.0,
            beta_min=1.0,
            beta_star=1.0,
            case=SolutionCase.PRIOR,
            d_tilde=d_tilde,
            achieved_conf=group_max_confidence(g, d_tilde),
            anchor1=0,
            anchor0=0,
            notes=("single-record group is identified by the prior alone",),
        )

    beta0, beta1, beta_p = compute_betas(g, bounds)
    floor = beta_min(g)
    beta_star = max(beta0, beta1, beta_p, floor)
    case = _classify(beta0, beta1, beta_p, beta_star)
    shared = _shared_rule(g, bounds)
    if shared is not None:
        # the candidates can only tie with the prior here
        beta_star, case = floor, SolutionCase.PRIOR

    ws = compute_workspace(g, bounds, beta_star)
    notes = []
    if ws.anchor1_mass == 0.0:
        notes.append("positive outcome has zero anchor mass; beta1 reported as 0")
    if ws.anchor0_mass == 0.0:
        notes.append("negative outcome has zero anchor mass; beta0 reported as 0")
    if shared is not None:
        notes.append(f"every member admits the rule {shared:.6g}; confidence stays at the prior")
        d_tilde = np.full(g.size, shared)
    else:
        if case is SolutionCase.PRIOR:
            notes.append("prior of the most likely member exceeds every closed-form candidate")
        d_tilde = _allocate(g, bounds, ws, case)
    achieved = group_max_confidence(g, d_tilde)
    if achieved > beta_star + BETA_TOLERANCE:
        raise InternalInfeasibleError(
            f"allocation reaches confidence {achieved} above beta*={beta_star}"
        )

    logging.debug(
        f"QID {g.qid}: anchors ({ws.anchor1}, {ws.anchor0}), "
        f"beta0={beta0:.6f} beta1={beta1:.6f} beta_p={beta_p:.6f} beta_min={floor:.6f}"
    )
    return GroupSolution(
        group=g,
        bounds=bounds,
        beta0=beta0,
        beta1=beta1,
        beta_p=beta_p,
        beta_min=floor,
        beta_star=beta_star,
        case=case,
        d_tilde=d_tilde,
        achieved_conf=achieved,
        anchor1=ws.anchor1,
        anchor0=ws.anchor0,
        notes=tuple(notes),
    )


def _solve_task(task: tuple[QidGroup, FidelityBounds]) -> GroupSolution | GroupSolveError:
    g, bounds = task
    try:
        return solve_group(g, bounds)
    except (SolverError, ValueError) as e:
        return GroupSolveError(g.qid, str(e))


def _solve_all(
    tasks: list[tuple[QidGroup, FidelityBounds]],
    jobs: int,
    progress_callback: Callable[[int, int], None] | None,
) -> list[GroupSolution]:
    total = len(tasks)
    outcomes: list[GroupSolution | GroupSolveError] = []
    if jobs <= 1 or total == 1:
        results = map(_solve_task, tasks)
        for done, outcome in enumerate(results, start=1):
            outcomes.append(outcome)
            if progress_callback:
                progress_callback(done, total)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            # map() yields in submission order, so aggregation is order-independent
            chunksize = max(1, total // (jobs * 4))
            for done, outcome in enumerate(
                executor.map(_solve_task, tasks, chunksize=chunksize), start=1
            ):
                outcomes.append(outcome)
                if progress_callback:
                    progress_callback(done, total)

    failures = [o for o in outcomes if isinstance(o, GroupSolveError)]
    if failures:
        for failure in failures:
            logging.error(str(failure))
        raise MasterSolveError(failures, total)
    return outcomes


def solve_master(
    ds: WeightedDataset,
    spec: FidelitySpec,
    jobs: int = 1,
    progress_callback: Callable[[int, int], None] | None = None,
    groups: list[QidGroup] | None = None,
) -> MasterSolution:
    if groups is None:
        groups = partition_by_qid(ds)
    bounds = bounds_for(spec, ds.rules)
    tasks = [(g, bounds.subset(g.indices)) for g in groups]

    solutions = _solve_all(tasks, jobs, progress_callback)

    d_tilde = np.empty(len(ds), dtype=float)
    for sol in solutions:
        d_tilde[sol.group.indices] = sol.d_tilde
        logging.info(
            f"Group {ds.qid_label(sol.qid)}: case {sol.case.value}, "
            f"beta*={sol.beta_star:.6f} over {sol.group.size:,} records"
        )

    master = MasterSolution(
        groups=tuple(solutions), mapping=AnnouncedMapping(d_tilde), spec=spec
    )
    logging.info(
        f"Solved {len(solutions)} groups: beta*={master.beta_star:.6f}, "
        f"gamma*={master.gamma_star:.6f}"
    )
    return master


def solve_for_uncertainty(
    ds: WeightedDataset,
    spec: FidelitySpec,
    jobs: int = 1,
    progress_callback: Callable[[int, int], None] | None = None,
    groups: list[QidGroup] | None = None,
) -> tuple[float, MasterSolution]:
    """Optimal minimum uncertainty, i.e. ``-ln`` of the optimal confidence."""
    master = solve_master(
        ds, spec, jobs=jobs, progress_callback=progress_callback, groups=groups
    )
    return master.gamma_star, master


def _fidelity_grid(kind: FidelityKind | str, steps: int) -> tuple[FidelityKind, np.ndarray]:
    if steps < 2:
        raise ValueError(f"steps must be at least 2, got {steps}")
    kind = FidelityKind(kind)
    if kind is FidelityKind.EXPLICIT:
        raise ValueError("Trade-off sweeps need a delta or alpha fidelity kind")
    return kind, np.linspace(0.0, 1.0, steps)


def tradeoff_sweep(
    g: QidGroup, kind: FidelityKind | str, steps: int
) -> list[tuple[float, float]]:
    """``(fidelity value, beta*)`` over an even grid on [0, 1]."""
    kind, grid = _fidelity_grid(kind, steps)
    curve = []
    for value in grid:
        spec = FidelitySpec(kind, float(value))
        try:
            bounds = bounds_for(spec, g.d)
        except EmptyBoundsError as e:
            logging.warning(f"Skipping {kind.value}={value:.4f}: {e}")
            continue
        curve.append((float(value), solve_group(g, bounds).beta_star))
    return curve


def master_tradeoff(
    ds: WeightedDataset,
    kind: FidelityKind | str,
    steps: int,
    groups: list[QidGroup] | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> pd.DataFrame:
    """Per-group curves plus the dataset-level curve (max over groups)."""
    kind, grid = _fidelity_grid(kind, steps)
    if groups is None:
        groups = partition_by_qid(ds)

    columns = {"fidelity": grid}
    for n, g in enumerate(groups, start=1):
        curve = dict(tradeoff_sweep(g, kind, steps))
        columns[ds.qid_label(g.qid)] = [curve.get(float(v), math.nan) for v in grid]
        if progress_callback:
            progress_callback(n, len(groups))

    df = pd.DataFrame(columns)
    df["overall"] = df.drop(columns="fidelity").max(axis=1, skipna=False)
    df.insert(0, "kind", kind.value)
    return df
