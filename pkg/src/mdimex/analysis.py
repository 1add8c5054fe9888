"""Convergence studies, asymptotic error splitting, AP residuals, linear stability."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import SolverConfig, SplitProblem, TwoDerivProblem
from .problems import linear_split
from .solver import StepFailure, correct_split, integrate, limit_step, predict_split

DEFAULT_ALPHA = 5.0 / 6.0
DEFAULT_EPSILON_BASE = DEFAULT_ALPHA ** 2 * 1e-5
REFERENCE_DT = 1e-5
REFERENCE_TOL = 1e-14

_reference_cache: dict = {}


@dataclass
class ConvergenceRecord:
    dt: float
    epsilon: float
    error: float
    slope_vs_prev: Optional[float] = None
    valid: bool = True


@dataclass
class AsymptoticDecomposition:
    dt: float
    delta0: float
    delta1: float
    alpha: float
    epsilon_base: float
    omega: tuple
    delta0_alt: float = float("nan")  # same estimate from (alpha eps, alpha^2 eps)


@dataclass
class StabilityPoint:
    gamma: float
    mu_tilde_max: float  # math.inf: stable over the whole search range
    scheme: str

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.mu_tilde_max)


@dataclass
class APSweep:
    epsilons: list
    residuals: list
    slope: float


# --------------------------------------------------------------------------
# Reference solutions and convergence
# --------------------------------------------------------------------------

def reference_dt(dt_min: Optional[float] = None) -> float:
    return REFERENCE_DT if dt_min is None else min(REFERENCE_DT, dt_min / 16.0)


def reference_solution(p, t_end: float, dt_min: Optional[float] = None) -> np.ndarray:
    """State at ``t_end``: the closed form when the problem has one, otherwise
    the fully implicit fourth-order scheme on a fine grid (cached)."""
    if t_end == 0:
        return p.initial_state()
    if getattr(p, "exact", None) is not None:
        return np.asarray(p.exact(t_end), dtype=float)
    dt = reference_dt(dt_min)
    key = (p.key, float(t_end), dt)
    if key not in _reference_cache:
        cfg = SolverConfig(dt=min(dt, t_end), t_end=t_end, newton_tol=REFERENCE_TOL)
        _reference_cache[key] = integrate(p, cfg, scheme="limit").final.copy()
    return _reference_cache[key].copy()


def clear_reference_cache():
    _reference_cache.clear()


def observed_order(err_coarse: float, err_fine: float, dt_coarse: float, dt_fine: float) -> float:
    return math.log(err_coarse / err_fine) / math.log(dt_coarse / dt_fine)


def fitted_order(records: Sequence[ConvergenceRecord]) -> float:
    """Least-squares slope of log(error) against log(dt) over the valid records."""
    pts = [(r.dt, r.error) for r in records if r.valid]
    return loglog_slope([d for d, _ in pts], [e for _, e in pts])


def _error_at(p, cfg: SolverConfig, reference: np.ndarray) -> float:
    return float(np.linalg.norm(integrate(p, cfg).final - reference))


def convergence_study(family: Callable, cfg_base: SolverConfig, dts: Sequence[float],
                      epsilons: Sequence[float], k_max: Optional[int] = None) -> list:
    """Euclidean error at ``t_end`` for every ``(dt, epsilon)`` cell.

    ``family`` maps epsilon to a problem.  Failed solves are recorded with
    ``valid=False`` and do not stop the sweep.  Records are ordered by the
    epsilon list, then by ``dts``.
    """
    dts = [float(d) for d in dts]
    if any(d <= 0 for d in dts) or any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("dts must be positive and strictly decreasing")
    k_max = cfg_base.k_max if k_max is None else k_max
    out = []
    for eps in epsilons:
        p = family(eps)
        ref = reference_solution(p, cfg_base.t_end, min(dts))
        prev = None
        for dt in dts:
            cfg = replace(cfg_base, dt=dt, k_max=k_max)
            try:
                rec = ConvergenceRecord(dt, eps, _error_at(p, cfg, ref))
            except (StepFailure, FloatingPointError):
                rec = ConvergenceRecord(dt, eps, float("nan"), valid=False)
            if rec.valid and prev is not None and prev.valid and prev.error > 0 and rec.error > 0:
                rec.slope_vs_prev = observed_order(prev.error, rec.error, prev.dt, rec.dt)
            out.append(rec)
            prev = rec
    return out


# --------------------------------------------------------------------------
# Asymptotic expansion of the error in epsilon
# --------------------------------------------------------------------------

def omega_weights(alpha: float) -> np.ndarray:
    """Weights with ``sum w_i alpha^(i j) = [j == 1]`` for ``j = 0, 1, 2``.

    Combining errors at ``eps, alpha eps, alpha^2 eps`` with these weights
    isolates the first-order term of the error's expansion in epsilon.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    nodes = np.array([1.0, alpha, alpha * alpha])
    vander = np.vander(nodes, 3, increasing=True).T
    return np.linalg.solve(vander, np.array([0.0, 1.0, 0.0]))


def asymptotic_decompose(family: Callable, cfg_base: SolverConfig, dts: Sequence[float],
                         alpha: float = DEFAULT_ALPHA, epsilon_base: float = DEFAULT_EPSILON_BASE,
                         k_max: Optional[int] = None) -> list:
    """Split ``delta(dt; eps) ~ delta0(dt) + eps delta1(dt)`` from three solves per dt."""
    omega = omega_weights(alpha)
    if not epsilon_base > 0:
        raise ValueError("epsilon_base must be positive")
    eps3 = [epsilon_base, alpha * epsilon_base, alpha * alpha * epsilon_base]
    recs = convergence_study(family, cfg_base, dts, eps3, k_max)
    n = len(dts)
    out = []
    for j, dt in enumerate(dts):
        d = np.array([recs[i * n + j].error for i in range(3)])
        delta0 = (d[1] - alpha * d[0]) / (1.0 - alpha)
        delta0_alt = (d[2] - alpha * d[1]) / (1.0 - alpha)
        delta1 = float(omega @ d) / epsilon_base
        out.append(AsymptoticDecomposition(float(dt), float(delta0), delta1, alpha, epsilon_base,
                                           tuple(float(w) for w in omega), float(delta0_alt)))
    return out


# --------------------------------------------------------------------------
# Asymptotic-preserving residual
# --------------------------------------------------------------------------

def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``; nan for fewer than two points."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def ap_residual_sweep(family: Callable, cfg: SolverConfig, epsilons: Sequence[float]) -> APSweep:
    """``max_n |g(y^n, z^n)|`` over the computed steps ``n >= 1`` for each epsilon.

    For well-prepared data the residual should vanish like epsilon at fixed dt.
    """
    residuals = []
    for eps in epsilons:
        p = family(eps)
        if not isinstance(p, TwoDerivProblem):
            raise TypeError("AP residual needs a y' = z, z' = g/eps problem")
        states = integrate(p, cfg).states[1:]
        residuals.append(max(abs(p.g(y, z)) for y, z in states))
    return APSweep(list(epsilons), residuals, loglog_slope(epsilons, residuals))


# --------------------------------------------------------------------------
# Linear stability on w' = (lam + i mu) w
# --------------------------------------------------------------------------

def psi(lambda_t: float, mu_t: float) -> complex:
    """Closed-form one-step multiplier of the predictor."""
    lt, mt = lambda_t, mu_t
    return (1 + 1j * mt + 0.5j * mt * lt - 0.5 * mt * mt) / (1 - lt + 0.5 * lt * lt + 0.5j * lt * mt)


def theta(lambda_t: float, mu_t: float) -> complex:
    """Closed-form one-step multiplier of the fully implicit fourth-order scheme."""
    c = complex(lambda_t, mu_t)
    return (1 + c / 2 + c * c / 12) / (1 - c / 2 + c * c / 12)


def parse_scheme(scheme: str) -> tuple[str, int]:
    s = scheme.lower()
    if s in ("predictor", "limit"):
        return s, 0
    if s.startswith("fullk") and s[5:].isdigit():
        return "fullk", int(s[5:])
    raise ValueError(f"unknown scheme {scheme!r}; use predictor, limit or fullk<k>")


_AMP_CFG = SolverConfig(dt=1.0, t_end=1.0, newton_tol=REFERENCE_TOL)


def amplification(scheme: str, lambda_t: float, mu_t: float, method: str = "solver") -> float:
    """``|w^1|`` after one step of unit size from ``w^0 = 1``.

    ``method="solver"`` runs the production stages on the real embedding;
    ``method="closed"`` evaluates the closed forms (predictor and limit only).
    """
    kind, k = parse_scheme(scheme)
    if method == "closed":
        if kind == "predictor":
            return abs(psi(lambda_t, mu_t))
        if kind == "limit":
            return abs(theta(lambda_t, mu_t))
        raise ValueError("no closed form for the iterated scheme")
    if method != "solver":
        raise ValueError(f"unknown method {method!r}")
    p = linear_split(lambda_t, mu_t)
    w0 = p.initial_state()
    if kind == "limit":
        w, _ = limit_step(p, w0, _AMP_CFG)
    else:
        w, _ = predict_split(p, w0, _AMP_CFG)
        for _ in range(k):
            w, _ = correct_split(p, w0, w, _AMP_CFG)
    return float(np.hypot(w[0], w[1]))


def stability_scan(scheme: str, gammas: Sequence[float], mu_max_search: float = 1e3,
                   n_grid: int = 10_000, bisect_tol: float = 1e-4,
                   slack: float = 1e-12, method: str = "solver") -> list:
    """Largest ``mu~`` such that every ``mu' <= mu~`` is stable on the ray ``lam~ = gamma mu~``.

    The ray is scanned on ``n_grid`` uniform points up to ``mu_max_search``; the
    first unstable point is then refined by bisection to ``bisect_tol``.
    """
    out = []
    for gamma in gammas:
        if gamma > 0:
            raise ValueError("gamma must be <= 0")
        stable = lambda m: amplification(scheme, gamma * m, m, method) <= 1.0 + slack
        lo, hi = 0.0, None
        for j in range(1, n_grid + 1):
            m = mu_max_search * j / n_grid
            if not stable(m):
                hi = m
                break
            lo = m
        if hi is None:
            out.append(StabilityPoint(float(gamma), math.inf, scheme))
            continue
        while hi - lo > bisect_tol:
            mid = 0.5 * (lo + hi)
            if stable(mid):
                lo = mid
            else:
                hi = mid
        out.append(StabilityPoint(float(gamma), lo, scheme))
    return out


def default_gammas(n: int = 40) -> np.ndarray:
    return -np.logspace(-3, 1, n)
