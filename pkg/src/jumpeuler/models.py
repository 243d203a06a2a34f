"""Preset models: Ornstein-Uhlenbeck with jumps and a Merton-type
multiplicative model, both with power-law series diffusion ``sigma / j^alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numba import njit
from scipy import integrate

from .errors import DimensionMismatch, InvalidParameter
from .model import (
    ClassParams,
    CompiledCoefficients,
    ExactReference,
    FactorizedDiffusion,
    JumpLaw,
    ModelSpec,
    power_tail_delta,
    validate_model,
)
from .noise import JumpStream

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class OuJumpSpec:
    """``dX = (mu - A X) dt + sum_j sigma / j^alpha dW_j + c1(t) dN``.

    ``c1=None`` means ``c1(t) = t``. ``eta`` is not fixed by the original
    experiment; 1.0 is used by default.
    """

    A: float = 0.5
    mu: float = 0.08
    sigma: float = 0.4
    alpha: float = 1.2
    lam: float = 1.21
    c1: Optional[Callable[[float], float]] = None
    eta: float = 1.0
    T: float = 1.53

    def __post_init__(self):
        _check_common(self)

    def jump_size(self, t):
        return t if self.c1 is None else self.c1(t)


@dataclass(frozen=True)
class MertonSpec:
    """``dX = mu X dt + sum_j sigma / j^alpha X dW_j + X(t-) dL`` with
    compound-Poisson ``L`` whose marks are ``-0.5`` if ``Y <= 0`` and
    ``0.5 + Y`` otherwise, ``Y ~ N(0, 1)``."""

    mu: float = 0.08
    sigma: float = 0.4
    alpha: float = 1.0
    lam: float = 1.21
    eta: float = 1.0
    T: float = 1.53

    def __post_init__(self):
        _check_common(self)
        if not self.eta > 0:
            raise InvalidParameter("eta", "must be > 0")


def _check_common(spec):
    if not spec.T > 0:
        raise InvalidParameter("T", "must be > 0")
    if not spec.alpha >= 1:
        raise InvalidParameter("alpha", "must be >= 1")
    if not spec.lam >= 0:
        raise InvalidParameter("lam", "must be >= 0")


def _power_weight(alpha):
    def weight(j):
        return float(j) ** -alpha

    return weight


def _power_tail(sigma, alpha):
    def tail_delta(k):
        return sigma * power_tail_delta(alpha, k)

    return tail_delta


# compiled coefficients; params = [mu, A, sigma] for OU, [mu, sigma] for Merton


@njit
def _ou_drift(t, x, p):
    return p[0] - p[1] * x


@njit
def _ou_base(t, x, p):
    return p[2]


@njit
def _ou_jump(t, x, y, p):
    return t


@njit
def _merton_drift(t, x, p):
    return p[0] * x


@njit
def _merton_base(t, x, p):
    return p[1] * x


@njit
def _merton_jump(t, x, y, p):
    return x * y


def make_ou_model(spec: OuJumpSpec = OuJumpSpec()) -> ModelSpec:
    mu, A, sigma = spec.mu, spec.A, spec.sigma

    def drift(t, x):
        return mu - A * x

    def base(t, x):
        return np.full(x.shape, sigma)

    def jump(t, x, y):
        return np.full(x.shape, spec.jump_size(t))

    compiled = None
    if spec.c1 is None:
        compiled = CompiledCoefficients(_ou_drift, _ou_base, _ou_jump, np.array([mu, A, sigma]))
    model = ModelSpec(
        dim=1,
        drift=drift,
        diffusion=FactorizedDiffusion(base, _power_weight(spec.alpha), _power_tail(sigma, spec.alpha)),
        jump_coeff=jump,
        jump_law=JumpLaw(spec.lam, 1),
        initial=np.array([spec.eta]),
        horizon=spec.T,
        class_params=ClassParams(p=2.0, rho1=1.0, rho2=1.0),
        compiled=compiled,
        drift_time_homogeneous=True,
        name="ou-jump",
    )
    validate_model(model)
    return model


def ou_mean(spec: OuJumpSpec, t: float) -> float:
    """``E X(t) = e^{-At} (eta + mu int_0^t e^{As} ds + lam int_0^t e^{As} c1(s) ds)``."""
    if t == 0:
        return spec.eta
    A = spec.A
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    drift_part, _ = integrate.quad(lambda s: math.exp(A * (s - t)), 0.0, t, **opts)
    jump_part, _ = integrate.quad(lambda s: math.exp(A * (s - t)) * spec.jump_size(s), 0.0, t, **opts)
    return math.exp(-A * t) * spec.eta + spec.mu * drift_part + spec.lam * jump_part


def merton_marks(rng: np.random.Generator, size: int) -> np.ndarray:
    y = rng.standard_normal(size)
    return np.where(y <= 0.0, -0.5, 0.5 + y).reshape(size, 1)


@lru_cache(maxsize=512)
def _power_sq_sum(alpha, M):
    w = np.arange(1, M + 1, dtype=float) ** (-2.0 * alpha)
    return float(np.add.accumulate(w)[-1]) if M else 0.0


def _jump_product(jumps: JumpStream) -> float:
    prod = 1.0
    for xi in jumps.marks[:, 0]:
        prod *= 1.0 + xi
    return prod


def merton_exact_terminal(spec: MertonSpec, M_ref: int, wiener_endpoints, jumps: JumpStream,
                          eta: Optional[float] = None) -> float:
    """Closed-form ``X^{M_ref}(T)`` given ``W_1(T) .. W_{M_ref}(T)`` and the jumps."""
    w = np.asarray(wiener_endpoints, dtype=float)
    if w.shape != (M_ref,):
        raise DimensionMismatch(f"expected {M_ref} Wiener endpoints, got shape {w.shape}")
    s, a = spec.sigma, spec.alpha
    noise = 0.0
    for j in range(M_ref):
        noise += s / float(j + 1) ** a * w[j]
    variance = s * s * _power_sq_sum(a, M_ref)
    eta = spec.eta if eta is None else eta
    return eta * math.exp((spec.mu - 0.5 * variance) * spec.T + noise) * _jump_product(jumps)


def _merton_from_projection(spec, eta, M_ref, projection, jumps):
    s = spec.sigma
    variance = s * s * _power_sq_sum(spec.alpha, M_ref)
    return eta * math.exp((spec.mu - 0.5 * variance) * spec.T + s * projection) * _jump_product(jumps)


def make_merton_model(spec: MertonSpec = MertonSpec()) -> ModelSpec:
    mu, sigma = spec.mu, spec.sigma

    def drift(t, x):
        return mu * x

    def base(t, x):
        return sigma * x

    def jump(t, x, y):
        return x * y

    reference = ExactReference(
        from_endpoints=lambda eta, w, jumps: merton_exact_terminal(
            spec, len(w), w, jumps, eta=float(eta[0])
        ),
        from_projection=lambda eta, m, proj, jumps: _merton_from_projection(
            spec, float(eta[0]), m, proj, jumps
        ),
    )
    model = ModelSpec(
        dim=1,
        drift=drift,
        diffusion=FactorizedDiffusion(base, _power_weight(spec.alpha), _power_tail(sigma, spec.alpha)),
        jump_coeff=jump,
        jump_law=JumpLaw(spec.lam, 1, merton_marks),
        initial=np.array([spec.eta]),
        horizon=spec.T,
        class_params=ClassParams(p=2.0, rho1=1.0, rho2=1.0),
        exact_reference=reference,
        compiled=CompiledCoefficients(_merton_drift, _merton_base, _merton_jump, np.array([mu, sigma])),
        drift_time_homogeneous=True,
        name="merton",
    )
    validate_model(model)
    return model


def merton_mark_mean() -> float:
    """``E xi = -1/4 + E[(1/2 + Y) 1{Y > 0}] = 1/sqrt(2 pi)``."""
    return INV_SQRT_2PI


def merton_mean(spec: MertonSpec, t: float) -> float:
    """``E X(t) = eta exp((mu + lam E xi) t)``."""
    return spec.eta * math.exp((spec.mu + spec.lam * merton_mark_mean()) * t)


PRESETS = {
    "ou-jump": (OuJumpSpec, make_ou_model),
    "merton": (MertonSpec, make_merton_model),
}


def make_preset(name: str, **overrides) -> ModelSpec:
    try:
        spec_cls, factory = PRESETS[name]
    except KeyError:
        raise InvalidParameter("model", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return factory(spec_cls(**overrides))
