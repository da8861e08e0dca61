"""Three-parameter logistic ``y = A / (1 + exp(-k (x - X_M)))`` and its fit.

Parameters are estimated by Levenberg-Marquardt on the sum of squared
residuals, optimizing ``(ln A, ln k, X_M)`` so that ``A`` and ``k`` stay
positive without bound constraints.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from tradecurve.errors import DegenerateInput, FlatData, InvalidParams, NotConverged, StageUndefined
from tradecurve.stages import CriticalPoints, StageLabel, classify, critical_points

N_PARAMS = 3
# cap on the initial slope as a multiple of 1/(x range): the steepest secant
# between two nearly coincident x values can otherwise be arbitrarily large
MAX_INIT_STEEPNESS = 20.0


@dataclass(frozen=True)
class LogisticParams:
    A: float
    k: float
    xm: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.A, self.k, self.xm)


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 200
    tol: float = 1e-10
    init: LogisticParams | None = None
    damping: float = 1e-3


@dataclass(frozen=True)
class LogisticFit:
    params: LogisticParams
    r_squared: float
    f_value: float
    residuals: np.ndarray = field(repr=False)
    n_points: int
    iterations: int
    converged: bool
    ssr: float = 0.0

    def predict(self, x):
        return logistic_eval(self.params, x)


def _unit_logistic(z):
    """1/(1+exp(-z)) without overflow for any finite or infinite z."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def logistic_eval(params: LogisticParams, x):
    """Evaluate the curve at scalar or array ``x``; saturates to 0 or A."""
    y = params.A * _unit_logistic(params.k * (np.asarray(x, dtype=float) - params.xm))
    return float(y) if np.ndim(y) == 0 else y


def logistic_jacobian(params: LogisticParams, x) -> np.ndarray:
    """Partial derivatives w.r.t. (A, k, X_M), one row per x."""
    A, k, xm = params.as_tuple()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = _unit_logistic(k * (x - xm))
    slope = s * (1.0 - s)
    return np.column_stack([s, A * (x - xm) * slope, -A * k * slope])


def _as_xy(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DegenerateInput("points must be a sequence of (x, y) pairs")
    return arr[:, 0].copy(), arr[:, 1].copy()


def initial_guess(x: np.ndarray, y: np.ndarray) -> LogisticParams:
    """Scale-free starting point for the fit.

    ``A`` slightly above the highest observation, ``X_M`` at the point
    closest to half of that (ties go to the smaller x), and ``k`` from the
    steepest secant between x-adjacent points, since the curve's maximum
    slope is ``A k / 4``.
    """
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    A0 = 1.05 * float(ys.max())
    xm0 = float(xs[int(np.argmin(np.abs(ys - A0 / 2.0)))])

    dx, dy = np.diff(xs), np.diff(ys)
    ok = dx > 0
    span = float(xs[-1] - xs[0])
    m = float(np.max(dy[ok] / dx[ok])) if ok.any() else 0.0
    k0 = 4.0 * m / A0 if m > 0 else 4.0 / span
    k0 = min(k0, MAX_INIT_STEEPNESS / span)
    return LogisticParams(A0, k0, xm0)


def _ssr(theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    if max(theta[0], theta[1]) > 700.0:  # exp() would overflow
        return math.inf, y
    A, k = math.exp(theta[0]), math.exp(theta[1])
    with np.errstate(over="ignore", invalid="ignore"):
        r = y - A * _unit_logistic(k * (x - theta[2]))
        ssr = float(r @ r)
    return (ssr if math.isfinite(ssr) else math.inf), r


def _theta_jacobian(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    A, k = math.exp(theta[0]), math.exp(theta[1])
    J = logistic_jacobian(LogisticParams(A, k, theta[2]), x)
    J[:, 0] *= A
    J[:, 1] *= k
    return J


def _summarize(params: LogisticParams, x, y, iterations: int, converged: bool) -> LogisticFit:
    r = y - logistic_eval(params, x)
    ssr = float(r @ r)
    sst = float(np.sum((y - y.mean()) ** 2))
    n = len(y)
    r2 = 1.0 - ssr / sst
    if n > N_PARAMS:
        f = ((sst - ssr) / (N_PARAMS - 1)) / (ssr / (n - N_PARAMS)) if ssr > 0 else math.inf
    else:
        f = math.nan
    return LogisticFit(params, r2, f, r, n, iterations, converged, ssr)


def fit_logistic(points: Sequence[tuple[float, float]], options: FitOptions | None = None) -> LogisticFit:
    """Least-squares logistic fit of ``(x, y)`` points.

    Raises :class:`DegenerateInput` for fewer than four points or a single
    distinct x, :class:`FlatData` when every y is equal, and
    :class:`NotConverged` (carrying the best fit so far) when the iteration
    cap is hit.
    """
    options = options or FitOptions()
    x, y = _as_xy(points)
    n = len(x)
    if n < 4:
        raise DegenerateInput(f"need at least 4 points, got {n}", n_points=n)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DegenerateInput("points contain non-finite values")
    if np.unique(x).size < 2:
        raise DegenerateInput("need at least two distinct x values")
    if np.all(y == y[0]):
        raise FlatData("all y values are equal", y=float(y[0]))
    if y.max() <= 0:
        raise DegenerateInput("a logistic with A > 0 needs some positive y")

    start = options.init or initial_guess(x, y)
    if not (start.A > 0 and start.k > 0):
        raise InvalidParams("initial A and k must be positive", A=start.A, k=start.k)
    theta = np.array([math.log(start.A), math.log(start.k), start.xm])
    ssr, r = _ssr(theta, x, y)
    # below this SSR the residuals are rounding noise of the model values
    floor = n * (64.0 * np.finfo(float).eps * float(np.abs(y).max())) ** 2
    lam = options.damping
    converged = False
    iterations = 0

    J = _theta_jacobian(theta, x)
    while iterations < options.max_iter:
        iterations += 1
        if ssr <= floor:
            converged = True
            break
        JtJ = J.T @ J
        g = J.T @ r
        scale = np.maximum(np.diag(JtJ), 1e-300)
        try:
            step = np.linalg.solve(JtJ + lam * np.diag(scale), g)
        except np.linalg.LinAlgError:
            step = None
        if step is not None and np.isfinite(step).all():
            trial = theta + step
            trial_ssr, trial_r = _ssr(trial, x, y)
        else:
            trial_ssr = math.inf
        if trial_ssr < ssr:
            small = ssr - trial_ssr <= options.tol * ssr
            theta, ssr, r = trial, trial_ssr, trial_r
            J = _theta_jacobian(theta, x)
            lam = max(lam / 10.0, 1e-15)
            if small:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e16:
                # no downhill step even along the scaled gradient: stationary to working precision
                converged = True
                break

    params = LogisticParams(math.exp(theta[0]), math.exp(theta[1]), float(theta[2]))
    fit = _summarize(params, x, y, iterations, converged)
    if not converged:
        raise NotConverged(f"no convergence within {options.max_iter} iterations", fit, iterations=iterations)
    return fit


@dataclass(frozen=True)
class FitDiagnostics:
    r_squared: float
    f_value: float
    critical_points: CriticalPoints
    # mean |residual| per stage; None marks a stage with no points
    stage_residuals: dict[StageLabel, float | None]
    stage_sizes: dict[StageLabel, int]


def fit_diagnostics(fit: LogisticFit, points: Sequence[tuple[float, float]]) -> FitDiagnostics:
    x, y = _as_xy(points)
    try:
        cp = critical_points(fit.params)
    except InvalidParams as exc:
        raise StageUndefined(str(exc), **exc.details) from exc
    abs_res = np.abs(y - logistic_eval(fit.params, x))
    groups: dict[StageLabel, list[float]] = {s: [] for s in StageLabel}
    for xi, ri in zip(x, abs_res):
        groups[classify(float(xi), cp)].append(float(ri))
    return FitDiagnostics(
        r_squared=fit.r_squared,
        f_value=fit.f_value,
        critical_points=cp,
        stage_residuals={s: (math.fsum(v) / len(v) if v else None) for s, v in groups.items()},
        stage_sizes={s: len(v) for s, v in groups.items()},
    )
