"""Domain types shared by the solver, the shipped problems and the analysis tools.

States are flat ``float64`` numpy vectors.  Complex scalar problems are
embedded as two real components, so there is a single real solver core.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Vector = np.ndarray


class EvaluationError(FloatingPointError):
    """A right-hand side or one of its derivatives produced NaN/Inf."""


def _finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"non-finite {what}: {value!r}")
    return value


@dataclass(frozen=True)
class TwoDerivProblem:
    """``y' = z``, ``z' = g(y, z) / epsilon``.

    ``grad_g`` returns ``(d g/dy, d g/dz)``.  ``hilbert`` optionally declares the
    leading Hilbert coefficients of the initial data as
    ``((y_0, y_1), (z_0, z_1))``; it is needed for the well-preparedness check.
    """

    g: Callable[[float, float], float]
    grad_g: Callable[[float, float], tuple]
    epsilon: float
    initial: tuple
    hilbert: Optional[tuple] = None
    name: str = "two-derivative"
    params: tuple = ()

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if len(self.initial) != 2:
            raise ValueError("initial must be a pair (y0, z0)")

    @property
    def key(self):
        return (self.name, self.epsilon, self.params)

    @property
    def dim(self) -> int:
        return 2

    def initial_state(self) -> Vector:
        return np.array(self.initial, dtype=float)


@dataclass(frozen=True)
class SplitProblem:
    """``w' = phi_e(w) + phi_i(w)`` with dense Jacobians of both parts.

    ``phi_i`` is the stiff part and is treated implicitly.  ``exact`` is an
    optional map ``t -> w(t)`` for problems with a closed-form solution.
    """

    dim: int
    phi_e: Callable[[Vector], Vector]
    phi_i: Callable[[Vector], Vector]
    jac_phi_e: Callable[[Vector], np.ndarray]
    jac_phi_i: Callable[[Vector], np.ndarray]
    initial: Vector
    exact: Optional[Callable[[float], Vector]] = None
    name: str = "split"
    params: tuple = ()
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        w0 = np.array(self.initial, dtype=float).reshape(-1)
        if w0.shape != (self.dim,):
            raise ValueError(f"initial has shape {w0.shape}, expected ({self.dim},)")
        w0.setflags(write=False)
        object.__setattr__(self, "initial", w0)

    @property
    def key(self):
        return (self.name, self.epsilon, self.params)

    def rhs(self, w: Vector) -> Vector:
        return self.phi_e(w) + self.phi_i(w)

    def initial_state(self) -> Vector:
        return np.array(self.initial, dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    """Uniform-grid solver settings.

    ``t_end / dt`` is rounded to the nearest integer ``n_steps`` and the step
    actually used is ``step = t_end / n_steps``, so the grid ends on ``t_end``.
    ``newton_tol`` is relative: a Newton solve stops when the row-equilibrated
    residual satisfies ``||r||_inf <= newton_tol * (1 + ||x||_inf)``.
    """

    dt: float
    t_end: float
    k_max: int = 2
    newton_tol: float = 1e-14
    newton_max_iter: int = 50
    fd_jacobian_step: float = 1e-7

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.k_max < 0:
            raise ValueError("k_max must be non-negative")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if not self.fd_jacobian_step > 0:
            raise ValueError("fd_jacobian_step must be positive")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def step(self) -> float:
        return self.t_end / self.n_steps


@dataclass
class StepRecord:
    predictor_residual: float
    corrector_residual: float
    newton_iters: int


@dataclass
class SolveResult:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)
    newton_iters_total: int = 0
    diagnostics: list = field(default_factory=list)

    @property
    def final(self) -> Vector:
        return self.states[-1]


def total_derivative_g(p: TwoDerivProblem, y: float, z: float) -> float:
    """Time derivative of ``g`` along the flow: ``grad g . (z, g / epsilon)``."""
    gy, gz = p.grad_g(y, z)
    value = gy * z + gz * p.g(y, z) / p.epsilon
    return float(_finite(value, "total derivative of g"))


def total_derivative_split(p: SplitProblem, w: Vector, which: str = "full") -> Vector:
    """``J_which(w) @ (phi_i(w) + phi_e(w))`` for ``which`` in explicit/implicit/full."""
    w = np.asarray(w, dtype=float)
    if w.shape != (p.dim,):
        raise ValueError(f"state has shape {w.shape}, expected ({p.dim},)")
    flow = p.phi_i(w) + p.phi_e(w)
    if which == "explicit":
        out = p.jac_phi_e(w) @ flow
    elif which == "implicit":
        out = p.jac_phi_i(w) @ flow
    elif which == "full":
        out = p.jac_phi_e(w) @ flow + p.jac_phi_i(w) @ flow
    else:
        raise ValueError(f"unknown part {which!r}")
    return _finite(np.asarray(out, dtype=float), "total derivative of the splitting")


def as_split(p: TwoDerivProblem) -> SplitProblem:
    """Embed ``(y, z)`` as ``phi_e = (z, 0)``, ``phi_i = (0, g / epsilon)``."""
    eps = p.epsilon

    def phi_e(w):
        return np.array([w[1], 0.0])

    def phi_i(w):
        return np.array([0.0, p.g(w[0], w[1]) / eps])

    def jac_e(w):
        return np.array([[0.0, 1.0], [0.0, 0.0]])

    def jac_i(w):
        gy, gz = p.grad_g(w[0], w[1])
        return np.array([[0.0, 0.0], [gy / eps, gz / eps]])

    return SplitProblem(2, phi_e, phi_i, jac_e, jac_i, p.initial_state(),
                        name=p.name, params=p.params, epsilon=eps)


def central_difference_jacobian(f: Callable[[Vector], Vector], x: Vector, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


def _relative_error(analytic, numeric) -> float:
    analytic = np.atleast_1d(np.asarray(analytic, dtype=float))
    numeric = np.atleast_1d(np.asarray(numeric, dtype=float))
    scale = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / scale))


def gradient_consistency(p: TwoDerivProblem, points: Sequence, h: float = 1e-6) -> float:
    """Worst relative mismatch between ``grad_g`` and central differences of ``g``."""
    worst = 0.0
    for y, z in points:
        fd = central_difference_jacobian(lambda v: np.array([p.g(v[0], v[1])]), np.array([y, z]), h)[0]
        worst = max(worst, _relative_error(p.grad_g(y, z), fd))
    return worst


def jacobian_consistency(p: SplitProblem, points: Sequence, h: float = 1e-6) -> float:
    """Worst relative mismatch of both Jacobians against central differences."""
    worst = 0.0
    for w in points:
        w = np.asarray(w, dtype=float)
        for f, jac in ((p.phi_e, p.jac_phi_e), (p.phi_i, p.jac_phi_i)):
            worst = max(worst, _relative_error(jac(w), central_difference_jacobian(f, w, h)))
    return worst
