import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from ris_mismatch.config import OptimizerSettings
from ris_mismatch.exceptions import InvalidArgumentError, NoSolutionError
from ris_mismatch.models.optimization import LocalResult, MultiStartResult, StartRecord
from ris_mismatch.utils.seeding import STARTS, generator

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Bounds = Sequence[tuple[float, float]]


class _Guarded:
    """Обёртка целевой функции: нечисловые значения (и исключения геометрии) → +inf."""

    def __init__(self, objective: Objective, errors: tuple[type[BaseException], ...]):
        self._objective = objective
        self._errors = errors
        self.nonfinite = 0

    def __call__(self, x: np.ndarray) -> float:
        try:
            value = float(self._objective(np.asarray(x, dtype=float)))
        except self._errors:
            value = np.nan
        if not np.isfinite(value):
            self.nonfinite += 1
            return np.inf
        return value


def _initial_simplex(x0: np.ndarray, settings: OptimizerSettings, bounds: Bounds | None = None) -> np.ndarray:
    step = max(settings.initial_step * float(np.linalg.norm(x0)), settings.min_step)
    steps = np.full(x0.size, step)
    if bounds is not None:
        # у верхней границы шаг в другую сторону, иначе вершина схлопнется при обрезке
        upper = np.array([hi for _, hi in bounds], dtype=float)
        steps[x0 + steps > upper] *= -1.0
    return np.vstack([x0, x0 + np.diag(steps)])


def basin_bounds(center: Sequence[float], half_width: float) -> list[tuple[float, float]]:
    """Куб с центром center и полушириной half_width по каждой координате."""
    if not half_width > 0:
        raise InvalidArgumentError(f"half_width must be positive, got {half_width}")
    return [(float(c) - half_width, float(c) + half_width) for c in center]


def local_minimize(
    objective: Objective,
    x0: Sequence[float],
    settings: OptimizerSettings,
    guard_errors: tuple[type[BaseException], ...] = (),
    bounds: Bounds | None = None,
) -> LocalResult:
    """
    Nelder-Mead с остановом по x_tol / f_tol (относительному), затем при
    settings.gradient_refine: BFGS с численным градиентом. Уточнение принимается
    только если улучшает значение, поэтому f* ≤ f(x0).

    С bounds поиск не выходит из коробки: x0 обрезается, Nelder-Mead получает
    границы, а уточнение идёт через L-BFGS-B.
    """
    x0 = np.asarray(x0, dtype=float)
    if bounds is not None:
        lower, upper = np.array(bounds, dtype=float).T
        x0 = np.clip(x0, lower, upper)
    f = _Guarded(objective, guard_errors)
    f0 = f(x0)
    if not np.isfinite(f0):
        return LocalResult(x=x0, f=float("inf"), converged=False, iterations=0, diverged=True)

    fatol = settings.f_tol * max(abs(f0), np.finfo(float).tiny)
    res = minimize(
        f,
        x0,
        method="Nelder-Mead",
        bounds=bounds,
        options={
            "xatol": settings.x_tol,
            "fatol": fatol,
            "maxiter": settings.max_iters,
            "maxfev": 4 * settings.max_iters,
            "initial_simplex": _initial_simplex(x0, settings, bounds),
        },
    )
    x_best, f_best = np.asarray(res.x, dtype=float), float(res.fun)
    iterations, converged = int(res.nit), bool(res.success)

    if settings.gradient_refine and np.isfinite(f_best):
        if bounds is None:
            refined = minimize(f, x_best, method="BFGS", jac="3-point", options={"maxiter": 50})
        else:
            refined = minimize(f, x_best, method="L-BFGS-B", jac="3-point", bounds=bounds, options={"maxiter": 50})
        iterations += int(refined.nit)
        if np.isfinite(refined.fun) and refined.fun < f_best:
            x_best, f_best = np.asarray(refined.x, dtype=float), float(refined.fun)

    if f_best >= f0:
        x_best, f_best = x0, f0
    if f.nonfinite:
        logger.debug(f"{f.nonfinite} non-finite objective values rejected during local search")
    return LocalResult(
        x=x_best, f=f_best, converged=converged, iterations=iterations, diverged=not np.isfinite(f_best)
    )


def multi_start(
    objective: Objective,
    starts: Sequence[Sequence[float]],
    settings: OptimizerSettings,
    guard_errors: tuple[type[BaseException], ...] = (),
    bounds: Bounds | None = None,
) -> MultiStartResult:
    """Лучший из локальных поисков; при равенстве значений выигрывает меньший индекс старта."""
    starts = [np.asarray(s, dtype=float) for s in starts]
    if not starts:
        raise InvalidArgumentError("at least one start is required")

    def _run(start: np.ndarray) -> LocalResult:
        return local_minimize(objective, start, settings, guard_errors, bounds)

    if settings.max_workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
            results = list(pool.map(_run, starts))
    else:
        results = [_run(s) for s in starts]

    log = [
        StartRecord(
            index=i,
            start=s,
            x=r.x,
            f=r.f,
            converged=r.converged,
            iterations=r.iterations,
            diverged=r.diverged,
        )
        for i, (s, r) in enumerate(zip(starts, results))
    ]
    finite = [rec for rec in log if not rec.diverged]
    if not finite:
        raise NoSolutionError(f"all {len(starts)} starts diverged")
    best = min(finite, key=lambda rec: (rec.f, rec.index))
    logger.debug(
        f"multi-start: best start {best.index} of {len(starts)}, f*={best.f:.12g}, "
        f"{len(starts) - len(finite)} diverged"
    )
    return MultiStartResult(x=best.x, f=best.f, best_index=best.index, log=log)


def pseudo_true_starts(
    p_true: np.ndarray, n_starts: int, seed: int, bounds: Bounds | None = None
) -> list[np.ndarray]:
    """
    p̄ и ещё n_starts − 1 точек: каждая координата p̄ умножена на независимую U(0, 1).
    С bounds возмущённые старты обрезаются до коробки.
    """
    if n_starts < 1:
        raise InvalidArgumentError("n_starts must be >= 1")
    p_true = np.asarray(p_true, dtype=float)
    rng = generator(seed, STARTS)
    starts = [p_true * rng.uniform(0.0, 1.0, size=3) for _ in range(n_starts - 1)]
    if bounds is not None:
        lower, upper = np.array(bounds, dtype=float).T
        starts = [np.clip(s, lower, upper) for s in starts]
    return [p_true.copy()] + starts
