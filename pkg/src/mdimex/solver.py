"""Multiderivative IMEX predictor-corrector integrator.

Two front ends share one Newton kernel:

* the ``*_vdp`` functions advance ``y' = z, z' = g(y, z) / eps`` with ``y``
  explicit and a scalar implicit solve for ``z``;
* the ``*_split`` functions advance ``w' = phi_e(w) + phi_i(w)`` with the stiff
  part ``phi_i`` implicit.

Each step runs a second-order Taylor predictor (forward in the explicit part,
backward in the implicit part) followed by ``k_max`` correction sweeps against
the two-point Hermite quadrature.  Every sweep raises the order by one, up to
four.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .core import (
    EvaluationError,
    SolveResult,
    SolverConfig,
    SplitProblem,
    StepRecord,
    TwoDerivProblem,
    Vector,
    total_derivative_g,
    total_derivative_split,
)

_MAX_HALVINGS = 8
_PIVOT_RTOL = 1e-14


@dataclass
class NewtonReport:
    iterations: int
    final_residual_norm: float
    converged: bool
    tolerance: float = 0.0
    message: str = ""


class StepFailure(RuntimeError):
    """An implicit stage did not converge; ``report`` holds the Newton report."""

    def __init__(self, message: str, report: Optional[NewtonReport] = None,
                 step_index: Optional[int] = None, partial: Optional[SolveResult] = None):
        super().__init__(message)
        self.report = report
        self.step_index = step_index
        self.partial = partial


# --------------------------------------------------------------------------
# Newton
# --------------------------------------------------------------------------

def _fd_jacobian(residual, x, r0, rel_step):
    n = x.size
    jac = np.empty((n, n))
    for j in range(n):
        h = rel_step * (1.0 + abs(x[j]))
        xp = x.copy()
        xp[j] += h
        jac[:, j] = (residual(xp) - r0) / h
    return jac


def _scaled_norm(r, row_scale):
    return float((np.abs(r) / row_scale).max())


def newton_solve(residual: Callable[[Vector], Vector], guess: Vector,
                 cfg: SolverConfig) -> tuple[Vector, NewtonReport]:
    """Damped Newton with a forward-difference Jacobian rebuilt every iteration.

    Residual rows are equilibrated by ``max(1, sum_j |J_ij|)`` before taking the
    infinity norm; for stiff stages the raw residual carries roundoff of size
    ``(dt/eps)^2 * 1e-16`` while the equilibrated one measures error in state
    units.  A full step is taken if it lowers that norm, otherwise the step is
    halved up to eight times.

    Once the tolerance is met, one chord step with the last factorisation
    polishes the root (kept only if it does not raise the residual).  Stiff
    stages amplify whatever error the stopping test leaves behind, and without
    the polish an iterate that already meets the tolerance is never improved.

    Never raises on non-convergence: check ``report.converged``.
    """
    x = np.array(guess, dtype=float).reshape(-1)
    r = np.asarray(residual(x), dtype=float)
    if not np.isfinite(r).all():
        raise EvaluationError("non-finite residual at the initial guess")
    row_scale = factor = None
    norm = np.inf
    for it in range(cfg.newton_max_iter + 1):
        tol = cfg.newton_tol * (1.0 + float(np.abs(x).max()))
        if row_scale is not None:
            norm = _scaled_norm(r, row_scale)
            if norm <= tol:
                x, norm = _polish(residual, x, r, factor, row_scale, norm)
                return x, NewtonReport(it, norm, True, tol)
        jac = _fd_jacobian(residual, x, r, cfg.fd_jacobian_step)
        row_scale = np.maximum(1.0, np.abs(jac).sum(axis=1))
        norm = _scaled_norm(r, row_scale)
        factor = _factor(jac)
        if norm <= tol:
            x, norm = _polish(residual, x, r, factor, row_scale, norm)
            return x, NewtonReport(it, norm, True, tol)
        if it == cfg.newton_max_iter:
            break
        if factor is None:
            return x, NewtonReport(it, norm, False, tol, "singular Jacobian")
        dx = _solve(factor, r)

        lam = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            x_new = x + lam * dx
            r_new = np.asarray(residual(x_new), dtype=float)
            finite = np.isfinite(r_new).all()
            if finite and _scaled_norm(r_new, row_scale) < norm:
                break
            lam *= 0.5
        if not finite:
            return x, NewtonReport(it + 1, norm, False, tol, "non-finite residual")
        x, r = x_new, r_new
    return x, NewtonReport(cfg.newton_max_iter, norm, False, tol, "maximum iterations reached")


def _polish(residual, x, r, factor, row_scale, norm):
    if factor is None or norm == 0.0:
        return x, norm
    x_new = x + _solve(factor, r)
    r_new = np.asarray(residual(x_new), dtype=float)
    if np.isfinite(r_new).all():
        norm_new = _scaled_norm(r_new, row_scale)
        if norm_new <= norm:
            return x_new, norm_new
    return x, norm


def _factor(jac):
    """LU factors of ``jac``, or None when a pivot falls below 1e-14 * max|jac|."""
    big = float(np.abs(jac).max())
    if big == 0.0:
        return None
    if jac.shape[0] == 1:
        return None if abs(jac[0, 0]) < _PIVOT_RTOL * big else float(jac[0, 0])
    lu, piv = lu_factor(jac, check_finite=False)
    if np.abs(np.diag(lu)).min() < _PIVOT_RTOL * big:
        return None
    return lu, piv


def _solve(factor, r):
    """Newton update ``-jac^{-1} r`` from :func:`_factor` output."""
    if isinstance(factor, float):
        return -r / factor
    return -lu_solve(factor, r, check_finite=False)


def _require(report: NewtonReport, stage: str) -> NewtonReport:
    if not report.converged:
        raise StepFailure(f"{stage}: Newton failed ({report.message}, "
                          f"residual {report.final_residual_norm:.3e})", report)
    return report


# --------------------------------------------------------------------------
# Quadrature
# --------------------------------------------------------------------------

def quadrature(f_left, f_right, fdot_left, fdot_right, dt: float):
    """Two-point Hermite rule: ``dt/2 (f_l + f_r) + dt^2/12 (f'_l - f'_r)``.

    Exact for cubics.  Works componentwise on scalars or arrays.
    """
    return 0.5 * dt * (f_left + f_right) + dt * dt / 12.0 * (fdot_left - fdot_right)


# --------------------------------------------------------------------------
# Algorithm for y' = z, z' = g / eps
# --------------------------------------------------------------------------

def predict_vdp(p: TwoDerivProblem, yn: float, zn: float, cfg: SolverConfig,
                dt: Optional[float] = None) -> tuple[float, float, NewtonReport]:
    dt = cfg.step if dt is None else dt
    eps = p.epsilon
    y0 = yn + dt * zn + dt * dt / (2.0 * eps) * p.g(yn, zn)

    def residual(v):
        z = v[0]
        return np.array([z - zn - dt / eps * p.g(y0, z)
                         + dt * dt / (2.0 * eps) * total_derivative_g(p, y0, z)])

    z, report = newton_solve(residual, [zn], cfg)
    _require(report, "predictor")
    return float(y0), float(z[0]), report


def correct_vdp(p: TwoDerivProblem, yn: float, zn: float, yk: float, zk: float,
                cfg: SolverConfig, dt: Optional[float] = None) -> tuple[float, float, NewtonReport]:
    dt = cfg.step if dt is None else dt
    eps = p.epsilon
    gn, gk = p.g(yn, zn), p.g(yk, zk)
    gdot_n, gdot_k = total_derivative_g(p, yn, zn), total_derivative_g(p, yk, zk)

    # z' = g/eps feeds the quadrature of z
    y1 = yn + quadrature(zn, zk, gn / eps, gk / eps, dt)
    z_rhs = zn + quadrature(gn, gk, gdot_n, gdot_k, dt) / eps

    def residual(v):
        z = v[0]
        return np.array([z - z_rhs
                         - dt / eps * (p.g(y1, z) - gk)
                         + dt * dt / (2.0 * eps) * (total_derivative_g(p, y1, z) - gdot_k)])

    z, report = newton_solve(residual, [zk], cfg)
    _require(report, "corrector")
    return float(y1), float(z[0]), report


def step_vdp(p: TwoDerivProblem, yn: float, zn: float, cfg: SolverConfig,
             dt: Optional[float] = None, k_max: Optional[int] = None) -> tuple[float, float, StepRecord]:
    k_max = cfg.k_max if k_max is None else k_max
    y, z, rep = predict_vdp(p, yn, zn, cfg, dt)
    record = StepRecord(rep.final_residual_norm, float("nan"), rep.iterations)
    for _ in range(k_max):
        y, z, rep = correct_vdp(p, yn, zn, y, z, cfg, dt)
        record.corrector_residual = rep.final_residual_norm
        record.newton_iters += rep.iterations
    return y, z, record


# --------------------------------------------------------------------------
# Algorithm for an arbitrary splitting
# --------------------------------------------------------------------------

def predict_split(p: SplitProblem, wn: Vector, cfg: SolverConfig,
                  dt: Optional[float] = None) -> tuple[Vector, NewtonReport]:
    dt = cfg.step if dt is None else dt
    wn = np.asarray(wn, dtype=float)
    explicit = wn + dt * p.phi_e(wn) + 0.5 * dt * dt * total_derivative_split(p, wn, "explicit")

    def residual(w):
        return (w - explicit - dt * p.phi_i(w)
                + 0.5 * dt * dt * total_derivative_split(p, w, "implicit"))

    w0, report = newton_solve(residual, wn, cfg)
    _require(report, "predictor")
    return w0, report


def correct_split(p: SplitProblem, wn: Vector, wk: Vector, cfg: SolverConfig,
                  dt: Optional[float] = None) -> tuple[Vector, NewtonReport]:
    dt = cfg.step if dt is None else dt
    wn = np.asarray(wn, dtype=float)
    wk = np.asarray(wk, dtype=float)
    phi_i_k = p.phi_i(wk)
    phidot_i_k = total_derivative_split(p, wk, "implicit")
    known = (wn - dt * phi_i_k + 0.5 * dt * dt * phidot_i_k
             + quadrature(p.rhs(wn), p.rhs(wk), total_derivative_split(p, wn, "full"),
                          total_derivative_split(p, wk, "full"), dt))

    def residual(w):
        return (w - known - dt * p.phi_i(w)
                + 0.5 * dt * dt * total_derivative_split(p, w, "implicit"))

    w1, report = newton_solve(residual, wk, cfg)
    _require(report, "corrector")
    return w1, report


def step_split(p: SplitProblem, wn: Vector, cfg: SolverConfig, dt: Optional[float] = None,
               k_max: Optional[int] = None) -> tuple[Vector, StepRecord]:
    k_max = cfg.k_max if k_max is None else k_max
    w, rep = predict_split(p, wn, cfg, dt)
    record = StepRecord(rep.final_residual_norm, float("nan"), rep.iterations)
    for _ in range(k_max):
        w, rep = correct_split(p, wn, w, cfg, dt)
        record.corrector_residual = rep.final_residual_norm
        record.newton_iters += rep.iterations
    return w, record


def limit_residual(p: SplitProblem, wn: Vector, dt: float) -> Callable[[Vector], Vector]:
    """Residual of the fully implicit fourth-order scheme, the sweeps' fixed point."""
    wn = np.asarray(wn, dtype=float)
    f_n = p.rhs(wn)
    fdot_n = total_derivative_split(p, wn, "full")

    def residual(w):
        return w - wn - quadrature(f_n, p.rhs(w), fdot_n, total_derivative_split(p, w, "full"), dt)

    return residual


def limit_step(p: SplitProblem, wn: Vector, cfg: SolverConfig, dt: Optional[float] = None,
               guess: Optional[Vector] = None) -> tuple[Vector, NewtonReport]:
    dt = cfg.step if dt is None else dt
    wn = np.asarray(wn, dtype=float)
    if guess is None:
        guess = wn
    w, report = newton_solve(limit_residual(p, wn, dt), guess, cfg)
    _require(report, "limit scheme")
    return w, report


def limit_step_vdp(p: TwoDerivProblem, yn: float, zn: float, cfg: SolverConfig,
                   dt: Optional[float] = None, guess=None) -> tuple[float, float, NewtonReport]:
    """Fully implicit fourth-order scheme in ``(y, z)`` form.

    Same equations as :func:`limit_step` on the embedding, evaluated with
    scalar arithmetic.
    """
    dt = cfg.step if dt is None else dt
    eps = p.epsilon
    g, gdot = p.g, total_derivative_g
    gn, gdot_n = g(yn, zn), gdot(p, yn, zn)

    def residual(v):
        y, z = v
        gv = g(y, z)
        return np.array([y - yn - quadrature(zn, z, gn / eps, gv / eps, dt),
                         z - zn - quadrature(gn, gv, gdot_n, gdot(p, y, z), dt) / eps])

    w, report = newton_solve(residual, (yn, zn) if guess is None else guess, cfg)
    _require(report, "limit scheme")
    return float(w[0]), float(w[1]), report


# --------------------------------------------------------------------------
# Time loop
# --------------------------------------------------------------------------

Problem = Union[TwoDerivProblem, SplitProblem]


def integrate(p: Problem, cfg: SolverConfig, scheme: str = "imex") -> SolveResult:
    """Advance ``p`` from ``t = 0`` to ``cfg.t_end`` on a uniform grid.

    ``scheme="imex"`` runs the predictor plus ``cfg.k_max`` sweeps;
    ``scheme="limit"`` runs the fully implicit fourth-order scheme instead (the
    sweeps' fixed point), which the analysis tools use as a reference.
    A :class:`StepFailure` aborts the run; its ``partial`` attribute holds the
    states computed so far.
    """
    if scheme not in ("imex", "limit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    n, dt = cfg.n_steps, cfg.step
    times = np.linspace(0.0, cfg.t_end, n + 1)
    states = np.empty((n + 1, p.dim))
    states[0] = p.initial_state()
    result = SolveResult(times, states)

    if scheme == "limit":
        # reference runs use tiny steps: extrapolating the last increment
        # leaves an O(dt^2) initial error, so Newton needs one iteration
        def advance(i):
            w = states[i]
            guess = 2.0 * w - states[i - 1] if i > 0 else w
            if isinstance(p, TwoDerivProblem):
                y, z, rep = limit_step_vdp(p, w[0], w[1], cfg, dt, guess)
                w1 = np.array([y, z])
            else:
                w1, rep = limit_step(p, w, cfg, dt, guess)
            return w1, StepRecord(rep.final_residual_norm, float("nan"), rep.iterations)
    elif isinstance(p, TwoDerivProblem):
        def advance(i):
            y, z, rec = step_vdp(p, states[i, 0], states[i, 1], cfg, dt)
            return np.array([y, z]), rec
    else:
        def advance(i):
            return step_split(p, states[i], cfg, dt)

    for i in range(n):
        try:
            w, rec = advance(i)
        except (StepFailure, EvaluationError) as exc:
            partial = SolveResult(times[: i + 1].copy(), states[: i + 1].copy(),
                                  result.newton_iters_total, result.diagnostics)
            raise StepFailure(f"step {i} (t={times[i]:.6g}) failed: {exc}",
                              getattr(exc, "report", None), i, partial) from exc
        states[i + 1] = w
        result.newton_iters_total += rec.newton_iters
        result.diagnostics.append(rec)
    return result
