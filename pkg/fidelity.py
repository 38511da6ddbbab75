import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Multiplicative distortion bounds are natural-log quantities; the base is
# echoed in report metadata.
LOG_BASE = "e"

_BOUND_TOLERANCE = 1e-12


class FidelityError(Exception):
    pass


class EmptyBoundsError(FidelityError):
    pass


class UnsupportedSpecError(FidelityError):
    pass


class FidelityKind(str, Enum):
    DELTA = "delta"
    ALPHA = "alpha"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class FidelitySpec:
    kind: FidelityKind
    value: float | None = None
    explicit: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind is FidelityKind.EXPLICIT:
            if self.explicit is None:
                raise ValueError("Explicit fidelity needs per-record bounds")
            for lo, hi in self.explicit:
                if not 0.0 <= lo <= hi <= 1.0:
                    raise ValueError(f"Explicit bound [{lo}, {hi}] is not inside [0, 1]")
            return
        if self.value is None or not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.kind.value} must be in [0, 1], got {self.value}")

    @classmethod
    def delta(cls, value: float) -> "FidelitySpec":
        return cls(FidelityKind.DELTA, float(value))

    @classmethod
    def alpha(cls, value: float) -> "FidelitySpec":
        return cls(FidelityKind.ALPHA, float(value))

    @classmethod
    def from_bounds(cls, bounds) -> "FidelitySpec":
        return cls(
            FidelityKind.EXPLICIT,
            explicit=tuple((float(lo), float(hi)) for lo, hi in bounds),
        )

    def describe(self) -> dict:
        if self.kind is FidelityKind.EXPLICIT:
            return {"type": self.kind.value, "bounds": [list(b) for b in self.explicit]}
        return {"type": self.kind.value, "value": self.value}


@dataclass(frozen=True, eq=False)
class FidelityBounds:
    """Allowed interval for the announced positive-decision probability.

    The negative-outcome bounds follow from the binary fold:
    ``y_min = 1 - x_max`` and ``y_max = 1 - x_min``.
    """

    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self) -> None:
        if self.x_min.shape != self.x_max.shape:
            raise ValueError("x_min and x_max must have the same shape")
        if np.any(self.x_min > self.x_max + _BOUND_TOLERANCE):
            k = int(np.argmax(self.x_min - self.x_max))
            raise EmptyBoundsError(
                f"Empty fidelity interval at record {k}: "
                f"[{self.x_min[k]}, {self.x_max[k]}]"
            )
        if np.any(self.x_min < 0.0) or np.any(self.x_max > 1.0):
            raise EmptyBoundsError("Fidelity bounds must lie inside [0, 1]")

    def __len__(self) -> int:
        return len(self.x_min)

    @property
    def y_min(self) -> np.ndarray:
        return 1.0 - self.x_max

    @property
    def y_max(self) -> np.ndarray:
        return 1.0 - self.x_min

    def subset(self, indices) -> "FidelityBounds":
        return FidelityBounds(self.x_min[indices], self.x_max[indices])

    def contains(self, d_tilde, tol: float = 1e-9) -> bool:
        d_tilde = np.asarray(d_tilde, dtype=float)
        return bool(
            np.all(d_tilde >= self.x_min - tol) and np.all(d_tilde <= self.x_max + tol)
        )


def bounds_from_delta(d, delta: float) -> FidelityBounds:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [0, 1], got {delta}")
    d = np.atleast_1d(np.asarray(d, dtype=float))
    slack = 1.0 - delta
    return FidelityBounds(
        x_min=np.maximum(0.0, d - slack),
        x_max=np.minimum(1.0, d + slack),
    )


def bounds_from_alpha(d, alpha: float) -> FidelityBounds:
    """Intersect the ratio bounds of both outcomes.

    Records with d=0 or d=1 are pinned for every alpha, including the
    unconstrained alpha=0 limit.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    d = np.atleast_1d(np.asarray(d, dtype=float))
    pinned = (d == 0.0) | (d == 1.0)

    if alpha == 0.0:
        lo = np.where(pinned, d, 0.0)
        hi = np.where(pinned, d, 1.0)
        return FidelityBounds(lo, hi)

    one_lo, one_hi = alpha * d, d / alpha
    zero_lo, zero_hi = 1.0 - (1.0 - d) / alpha, 1.0 - alpha * (1.0 - d)
    lo = np.clip(np.maximum(one_lo, zero_lo), 0.0, 1.0)
    hi = np.clip(np.minimum(one_hi, zero_hi), 0.0, 1.0)
    lo = np.where(pinned, d, lo)
    hi = np.where(pinned, d, hi)
    if np.any(lo > hi + _BOUND_TOLERANCE):
        k = int(np.argmax(lo - hi))
        raise EmptyBoundsError(
            f"alpha={alpha} leaves no admissible value for record {k} (d={d[k]})"
        )
    return FidelityBounds(lo, np.maximum(lo, hi))


def bounds_for(spec: FidelitySpec, d) -> FidelityBounds:
    """Per-record bounds for the whole rule vector ``d``."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if spec.kind is FidelityKind.DELTA:
        return bounds_from_delta(d, spec.value)
    if spec.kind is FidelityKind.ALPHA:
        return bounds_from_alpha(d, spec.value)
    if len(spec.explicit) != len(d):
        raise EmptyBoundsError(
            f"Explicit bounds cover {len(spec.explicit)} records, dataset has {len(d)}"
        )
    arr = np.array(spec.explicit, dtype=float)
    return FidelityBounds(arr[:, 0].copy(), arr[:, 1].copy())


def bias_distortion_bound(spec: FidelitySpec) -> float:
    """Worst-case shift of a measured fairness bias under the fidelity spec.

    Additive specs bound total-variation measures, multiplicative specs bound
    relative-metric measures.
    """
    if spec.kind is FidelityKind.DELTA:
        return min(2.0 * (1.0 - spec.value), 1.0)
    if spec.kind is FidelityKind.ALPHA:
        if spec.value == 0.0:
            return 1.0
        return min(max(-2.0 * math.log(spec.value), 0.0), 1.0)
    raise UnsupportedSpecError("No distortion bound for explicit fidelity bounds")


def bound_family(spec: FidelitySpec) -> str | None:
    if spec.kind is FidelityKind.DELTA:
        return "total-variation"
    if spec.kind is FidelityKind.ALPHA:
        return "relative-metric"
    return None
