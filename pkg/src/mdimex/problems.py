"""Ready-made test problems: van der Pol, Kaps, and the IMEX linear prototype."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SplitProblem, TwoDerivProblem


class UnsupportedProblem(ValueError):
    pass


@dataclass(frozen=True)
class VanDerPolSpec:
    epsilon: float
    z0_shift: float = 0.0  # nonzero gives ill-prepared data (negative controls)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class KapsSpec:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class LinearPrototypeSpec:
    lam: float
    mu: float

    def __post_init__(self):
        if not (self.lam <= 0 and self.mu > 0):
            raise ValueError("need lam <= 0 and mu > 0")


def _vdp_g(y, z):
    return (1.0 - y * y) * z - y


def _vdp_grad(y, z):
    return (-2.0 * y * z - 1.0, 1.0 - y * y)


def van_der_pol(spec: VanDerPolSpec) -> TwoDerivProblem:
    """``g = (1 - y^2) z - y`` with the standard well-prepared data.

    ``y(0) = 2``, ``z(0) = -2/3 + 10/81 eps - 292/2187 eps^2``; the declared
    Hilbert coefficients are ``y = 2 + 0 eps``, ``z = -2/3 + 10/81 eps``.
    """
    eps = spec.epsilon
    z0 = -2.0 / 3.0 + 10.0 / 81.0 * eps - 292.0 / 2187.0 * eps ** 2 + spec.z0_shift
    hilbert = ((2.0, 0.0), (-2.0 / 3.0 + spec.z0_shift, 10.0 / 81.0))
    return TwoDerivProblem(_vdp_g, _vdp_grad, eps, (2.0, z0), hilbert,
                           name="vdp", params=(spec.z0_shift,))


def kaps(spec: KapsSpec) -> SplitProblem:
    """Kaps problem, exact solution ``(exp(-2t), exp(-t))`` for every eps.

    The stiff part is ``(z^2 - y, 0) / eps``; the explicit part is
    ``(-2y, y - z(1 + z))`` so that the two add up to the ODE that the exact
    solution satisfies.
    """
    eps = spec.epsilon

    def phi_e(w):
        y, z = w
        return np.array([-2.0 * y, y - z * (1.0 + z)])

    def phi_i(w):
        y, z = w
        return np.array([(z * z - y) / eps, 0.0])

    def jac_e(w):
        y, z = w
        return np.array([[-2.0, 0.0], [1.0, -1.0 - 2.0 * z]])

    def jac_i(w):
        y, z = w
        return np.array([[-1.0 / eps, 2.0 * z / eps], [0.0, 0.0]])

    return SplitProblem(2, phi_e, phi_i, jac_e, jac_i, np.array([1.0, 1.0]),
                        exact=kaps_exact, name="kaps", epsilon=eps)


def kaps_exact(t: float) -> np.ndarray:
    return np.array([np.exp(-2.0 * t), np.exp(-t)])


def linear_split(lam: float, mu: float) -> SplitProblem:
    """``w' = lam w + i mu w`` as a real 2-vector ``(Re w, Im w)``; no sign checks.

    ``lam w`` is implicit, ``i mu w`` explicit.  Starts from ``w = 1``.
    """
    a_i = np.array([[lam, 0.0], [0.0, lam]])
    a_e = np.array([[0.0, -mu], [mu, 0.0]])
    return SplitProblem(2, lambda w: a_e @ w, lambda w: a_i @ w,
                        lambda w: a_e, lambda w: a_i, np.array([1.0, 0.0]),
                        name="linear", params=(lam, mu))


def linear_prototype(spec: LinearPrototypeSpec) -> SplitProblem:
    return linear_split(spec.lam, spec.mu)


def linear_exact(spec: LinearPrototypeSpec, t: float) -> np.ndarray:
    w = np.exp(complex(spec.lam, spec.mu) * t)
    return np.array([w.real, w.imag])


def well_preparedness_residuals(p: TwoDerivProblem) -> tuple[float, float]:
    """Both well-preparedness conditions evaluated on the declared Hilbert data.

    Returns ``(|g(y0, z0)|, |grad g . (z0, grad g . (y1, z1))|)`` at the
    leading-order point ``(y0, z0)``.
    """
    if p.hilbert is None:
        raise UnsupportedProblem(f"problem {p.name!r} declares no Hilbert expansion of its initial data")
    (y0, y1), (z0, z1) = p.hilbert
    gy, gz = p.grad_g(y0, z0)
    r1 = abs(p.g(y0, z0))
    r2 = abs(gy * z0 + gz * (gy * y1 + gz * z1))
    return float(r1), float(r2)


def family(name: str, **kwargs):
    """``epsilon -> problem`` factory by short name, for parameter sweeps."""
    if name == "vdp":
        return lambda eps: van_der_pol(VanDerPolSpec(eps, **kwargs))
    if name == "kaps":
        return lambda eps: kaps(KapsSpec(eps))
    raise UnsupportedProblem(f"no epsilon family named {name!r}")
