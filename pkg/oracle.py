"""Brute-force reference for the per-group optimum.

Enumerates announced rules on a grid inside the fidelity box and keeps the
candidate with the smallest worst-case posterior. Nothing here calls into the
closed-form solver; the anchor products used as mandatory grid points are
recomputed locally from the bounds.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from dataset import (
    Attribute,
    AttributeSchema,
    QidGroup,
    Role,
    WeightedDataset,
    WeightedRecord,
)
from fidelity import FidelityBounds

MAX_MEMBERS = 4
FEASIBILITY_TOLERANCE = 1e-9
# zoom passes around the coarse witness; each pass shrinks the window 5x
_REFINE_PASSES = 4
_REFINE_POINTS = 11


class OracleError(Exception):
    pass


class TooLargeError(OracleError):
    pass


@dataclass(frozen=True)
class GridSpec:
    step: float = 0.005

    def __post_init__(self) -> None:
        if not 0.0 < self.step <= 0.5:
            raise ValueError(f"Grid step must be in (0, 0.5], got {self.step}")
        cells = 1.0 / self.step
        if abs(cells - round(cells)) > 1e-9 * cells:
            raise ValueError(f"Grid step {self.step} does not divide [0, 1]")

    @property
    def cells(self) -> int:
        return int(round(1.0 / self.step))


@dataclass(frozen=True, eq=False)
class OracleResult:
    beta_grid: float
    witness: np.ndarray
    step: float
    # change of the worst-case posterior across one grid cell at the witness
    modulus: float
    candidates: int


def _check_size(g: QidGroup) -> None:
    if g.size > MAX_MEMBERS:
        raise TooLargeError(
            f"Grid oracle handles at most {MAX_MEMBERS} members, group has {g.size}"
        )


def _worst_posterior(p: np.ndarray, rules: np.ndarray) -> np.ndarray:
    """Worst-case posterior of each candidate column in ``rules`` (shape m x N)."""
    worst = np.zeros(rules.shape[1])
    for outcome in (rules, 1.0 - rules):
        joint = p[:, None] * outcome
        total = joint.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            post = np.where(total > 0.0, joint.max(axis=0) / total, 0.0)
        worst = np.maximum(worst, post)
    return worst


def feasibility_check(
    g: QidGroup, b: FidelityBounds, candidate, beta: float
) -> bool:
    rules = np.asarray(candidate, dtype=float)
    if rules.shape != (g.size,):
        return False
    tol = FEASIBILITY_TOLERANCE
    if np.any(rules < -tol) or np.any(rules > 1.0 + tol):
        return False
    if np.any(rules < b.x_min - tol) or np.any(rules > b.x_max + tol):
        return False
    worst = _worst_posterior(g.p, np.clip(rules, 0.0, 1.0)[:, None])[0]
    return bool(worst <= beta + tol)


def _axis(lo: float, hi: float, step: float, extras: list[float]) -> np.ndarray:
    first = np.ceil(lo / step - 1e-9)
    last = np.floor(hi / step + 1e-9)
    points = np.arange(first, last + 1) * step
    points = np.concatenate((points, [lo, hi], extras))
    points = points[(points >= lo) & (points <= hi)]
    return np.unique(points)


def _mandatory_points(g: QidGroup, b: FidelityBounds) -> list[list[float]]:
    p = g.p
    top1 = float(np.max(p * b.x_min))
    top0 = float(np.max(p * (1.0 - b.x_max)))
    return [[top1 / p[k], 1.0 - top0 / p[k]] for k in range(g.size)]


def _batches(axes: list[np.ndarray]) -> Iterator[np.ndarray]:
    """Candidate columns, looping over leading axes and vectorizing the last two."""
    lead, tail = axes[:-2], axes[-2:]
    mesh = np.meshgrid(*tail, indexing="ij")
    tail_cols = np.stack([grid.ravel() for grid in mesh])
    for prefix in itertools.product(*lead):
        head = np.repeat(np.array(prefix, dtype=float)[:, None], tail_cols.shape[1], axis=1)
        yield np.vstack((head, tail_cols))


class _Search:
    """Coarse grid scan followed by zoom passes around the running best."""

    def __init__(self, g: QidGroup, b: FidelityBounds, spec: GridSpec) -> None:
        _check_size(g)
        self.g = g
        self.b = b
        self.spec = spec
        self.best_value = np.inf
        self.best_rules: np.ndarray | None = None
        self.evaluated = 0

    def _coarse_axes(self) -> list[np.ndarray]:
        extras = _mandatory_points(self.g, self.b)
        return [
            _axis(float(self.b.x_min[k]), float(self.b.x_max[k]), self.spec.step, extras[k])
            for k in range(self.g.size)
        ]

    def _refine_axes(self, width: float) -> list[np.ndarray]:
        axes = []
        for k in range(self.g.size):
            centre = float(self.best_rules[k])
            pts = centre + np.linspace(-width, width, _REFINE_POINTS)
            pts = np.clip(pts, self.b.x_min[k], self.b.x_max[k])
            axes.append(np.unique(np.concatenate((pts, [centre]))))
        return axes

    def _scan(self, axes: list[np.ndarray]) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for cols in _batches(axes):
            worst = _worst_posterior(self.g.p, cols)
            self.evaluated += worst.size
            i = int(np.argmin(worst))
            if worst[i] < self.best_value:
                self.best_value = float(worst[i])
                self.best_rules = cols[:, i].copy()
            yield cols, worst

    def batches(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        yield from self._scan(self._coarse_axes())
        width = self.spec.step
        for _ in range(_REFINE_PASSES):
            yield from self._scan(self._refine_axes(width))
            width /= 5.0


def _modulus(p: np.ndarray, rules: np.ndarray, step: float) -> float:
    mass1 = float(p @ rules)
    mass0 = float(p.sum()) - mass1
    smallest = min(m for m in (mass1, mass0) if m > 0.0)
    return min(1.0, float(p.max()) * step / smallest)


def grid_oracle(
    g: QidGroup, b: FidelityBounds, spec: GridSpec = GridSpec()
) -> OracleResult:
    search = _Search(g, b, spec)
    for _ in search.batches():
        pass
    logging.debug(
        f"Grid oracle over {search.evaluated:,} candidates: {search.best_value:.6f}"
    )
    return OracleResult(
        beta_grid=search.best_value,
        witness=search.best_rules,
        step=spec.step,
        modulus=_modulus(g.p, search.best_rules, spec.step),
        candidates=search.evaluated,
    )


def random_dataset(
    seed: int, groups: int, sizes: tuple[int, ...] = (2, 3)
) -> WeightedDataset:
    """Random instances for oracle runs: one public ``qid`` and one sensitive ``x``.

    About a fifth of the rules are snapped to 0 or 1 so deterministic
    decisions show up alongside fractional ones.
    """
    if groups < 1:
        raise ValueError(f"groups must be positive, got {groups}")
    rng = np.random.default_rng(seed)
    records = []
    for n in range(groups):
        m = int(rng.choice(sizes))
        counts = rng.integers(1, 1000, size=m)
        rules = rng.random(m)
        snap = rng.random(m) < 0.2
        rules[snap] = np.round(rules[snap])
        records.extend(
            WeightedRecord((f"q{n}", f"x{k}"), int(counts[k]), float(rules[k]))
            for k in range(m)
        )
    schema = AttributeSchema(
        (
            Attribute("qid", tuple(f"q{n}" for n in range(groups)), Role.PUBLIC),
            Attribute("x", tuple(f"x{k}" for k in range(max(sizes))), Role.SENSITIVE),
        )
    )
    return WeightedDataset(schema, tuple(records))


def _prior_floor(g: QidGroup) -> float:
    return float(g.p.max() / g.p.sum())


def _true_posterior(g: QidGroup) -> float:
    return float(_worst_posterior(g.p, g.d[:, None])[0])


def _grid_feasible(
    g: QidGroup, b: FidelityBounds, spec: GridSpec, beta: float
) -> bool:
    for _, worst in _Search(g, b, spec).batches():
        if np.any(worst <= beta + FEASIBILITY_TOLERANCE):
            return True
    return False


def bisection_oracle(
    g: QidGroup,
    b: FidelityBounds,
    tol: float = 1e-3,
    spec: GridSpec = GridSpec(),
) -> float:
    """Smallest grid-feasible confidence level, found by bisection.

    The search range is [prior floor, confidence of the true rules], which
    always contains the optimum when the true rules satisfy the bounds.
    """
    _check_size(g)
    lo = _prior_floor(g)
    hi = _true_posterior(g)
    if hi - lo <= tol:
        return lo
    if not _grid_feasible(g, b, spec, hi):
        hi = 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _grid_feasible(g, b, spec, mid):
            hi = mid
        else:
            lo = mid
    return hi
