"""Critical points of a fitted logistic and the three-stage classification.

The two cut-off points are the non-trivial zeros of the curve's third
derivative. With ``s`` the unit logistic they sit at ``s = 1/(3 +- sqrt 3)``,
i.e. ``x = X_M -+ ln(2 + sqrt 3)/k``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass
from enum import IntEnum
from typing import TYPE_CHECKING

from tradecurve.errors import InvalidParams

if TYPE_CHECKING:
    from tradecurve.ingest import CountryObservation
    from tradecurve.sigmoid_fit import LogisticFit, LogisticParams

SQRT3 = math.sqrt(3.0)
CUTOFF_OFFSET = math.log(2.0 + SQRT3)  # k * (X_M - X_L)


class StageLabel(IntEnum):
    INITIAL = 0
    ACCELERATION = 1
    FINAL = 2

    def __str__(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class CriticalPoints:
    x_left: float
    y_left: float
    x_mid: float
    y_mid: float
    x_right: float
    y_right: float


def critical_points(params: LogisticParams) -> CriticalPoints:
    A, k, xm = params.A, params.k, params.xm
    if not (A > 0 and k > 0 and math.isfinite(A) and math.isfinite(k) and math.isfinite(xm)):
        raise InvalidParams(f"critical points need A > 0 and k > 0, got A={A}, k={k}", A=A, k=k, XM=xm)
    half_width = CUTOFF_OFFSET / k
    return CriticalPoints(
        x_left=xm - half_width,
        y_left=A / (3.0 + SQRT3),
        x_mid=xm,
        y_mid=A / 2.0,
        x_right=xm + half_width,
        y_right=A / (3.0 - SQRT3),
    )


def classify(x: float, cp: CriticalPoints) -> StageLabel:
    """Stage of a log-GDP value; both cut-offs belong to the acceleration stage."""
    if x < cp.x_left:
        return StageLabel.INITIAL
    if x > cp.x_right:
        return StageLabel.FINAL
    return StageLabel.ACCELERATION


@dataclass(frozen=True)
class StageCounts:
    initial: int
    acceleration: int
    final: int
    labels: tuple[tuple[str, float, StageLabel], ...]  # (country, x, stage)

    @property
    def total(self) -> int:
        return self.initial + self.acceleration + self.final

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.initial, self.acceleration, self.final)

    def proportions(self) -> tuple[float, float, float]:
        n = self.total
        return (self.initial / n, self.acceleration / n, self.final / n)


def count_stages(points: Iterable[tuple[str, float]], cp: CriticalPoints) -> StageCounts:
    labels = tuple((country, x, classify(x, cp)) for country, x in points)
    tally = [0, 0, 0]
    for _, _, stage in labels:
        tally[stage] += 1
    return StageCounts(*tally, labels=labels)


def stage_counts(panel: Iterable[CountryObservation], fit: LogisticFit) -> StageCounts:
    """Classify every observation's log GDP against the fit's cut-offs."""
    cp = critical_points(fit.params)
    return count_stages(((o.country, o.log_gdp) for o in panel), cp)
