"""Large-deviation rate function and moment generating functions.

The scaled cumulant generating function of the endpoint displacement is
built from the principal eigenvalue rho(a) of the tilted operator:

    lambda_plus(mu) = -rho^{-1}(-mu)   for mu > -rho(a_2star),
    lambda_plus(mu) = -a_2star         otherwise (flat segment),

and the full (two-sided) version is even in mu.  The rate function I(b)
is the Legendre transform: for b above b_2star it is evaluated on the
envelope

    I(b) = a_b - b rho(a_b),   rho'(a_b) = 1/b,

and on [0, b_2star] it is the linear segment a_2star - b rho(a_2star).
Both branches meet at b_2star with matching value and slope.

`legendre_check` recomputes I by a direct discrete supremum over mu with
golden-section refinement, giving an independent route for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .constants import ModelConstants, compute_constants
from .errors import DomainError, SolverError
from .sturm import SolverConfig, principal_eigen


def _rho(a: float, cfg: SolverConfig) -> float:
    return principal_eigen(a, cfg).rho


def _rho1(a: float, cfg: SolverConfig) -> float:
    return principal_eigen(a, cfg).rho1


def _resolve(cfg: SolverConfig | None, consts: ModelConstants | None):
    if cfg is None:
        cfg = SolverConfig()
    if consts is None:
        consts = compute_constants(cfg)
    return cfg, consts


def _a_of_mu(mu: float, cfg: SolverConfig, consts: ModelConstants) -> float:
    """Solve rho(a) = -mu for mu >= -rho(a_2star)."""
    target = -mu
    hi = consts.a_2star
    # deep-negative asymptote rho ~ -sqrt(2)(-a)^{1/2} guides the lower end
    lo = min(-1.0, -(mu * mu) / 2.0 - 2.0)
    f = lambda a: _rho(a, cfg) - target
    flo = f(lo)
    grow = 0
    while flo > 0.0 and grow < 60:
        lo = 2.0 * lo - 1.0
        flo = f(lo)
        grow += 1
    if flo > 0.0:
        raise SolverError(f"could not bracket rho = {target:g}")
    return brentq(f, lo, hi, xtol=1e-11, rtol=8.9e-16)


def lambda_plus(mu: float, cfg: SolverConfig | None = None,
                consts: ModelConstants | None = None) -> float:
    """One-sided scaled cumulant generating function."""
    mu = float(mu)
    if not math.isfinite(mu):
        raise DomainError(f"mu must be finite, got {mu!r}")
    cfg, consts = _resolve(cfg, consts)
    kink = -consts.rho_2star
    if mu <= kink:
        return -consts.a_2star
    return -_a_of_mu(mu, cfg, consts)


def lambda_full(mu: float, cfg: SolverConfig | None = None,
                consts: ModelConstants | None = None) -> float:
    """Two-sided version, even in mu."""
    mu = float(mu)
    if not math.isfinite(mu):
        raise DomainError(f"mu must be finite, got {mu!r}")
    return lambda_plus(abs(mu), cfg, consts)


def _a_of_b(b: float, cfg: SolverConfig, consts: ModelConstants) -> float:
    """Solve rho'(a) = 1/b for b > b_2star (rho' is increasing in a)."""
    target = 1.0 / b
    hi = consts.a_2star
    lo = min(-1.0, -(b * b) / 2.0 * 1.5 - 4.0)
    f = lambda a: _rho1(a, cfg) - target
    flo = f(lo)
    grow = 0
    while flo > 0.0 and grow < 60:
        lo = 2.0 * lo - 1.0
        flo = f(lo)
        grow += 1
    if flo > 0.0:
        raise SolverError(f"could not bracket rho' = {target:g}")
    return brentq(f, lo, hi, xtol=1e-11, rtol=8.9e-16)


def rate_I(b: float, cfg: SolverConfig | None = None,
           consts: ModelConstants | None = None) -> float:
    """Rate function of the scaled endpoint displacement, b >= 0."""
    b = float(b)
    if not math.isfinite(b) or b < 0.0:
        raise DomainError(f"rate_I requires b >= 0, got {b!r}")
    cfg, consts = _resolve(cfg, consts)
    if b <= consts.b_2star:
        return consts.a_2star - b * consts.rho_2star
    a_b = _a_of_b(b, cfg, consts)
    return a_b - b * _rho(a_b, cfg)


def rate_derivative(b: float, cfg: SolverConfig | None = None,
                    consts: ModelConstants | None = None) -> float:
    """dI/db; on the envelope branch this is -rho(a_b) (a_b is stationary)."""
    b = float(b)
    if not math.isfinite(b) or b < 0.0:
        raise DomainError(f"rate_derivative requires b >= 0, got {b!r}")
    cfg, consts = _resolve(cfg, consts)
    if b <= consts.b_2star:
        return -consts.rho_2star
    a_b = _a_of_b(b, cfg, consts)
    return -_rho(a_b, cfg)


@dataclass(frozen=True)
class LegendreReport:
    b: float
    direct: float
    dual: float
    gap: float
    mu_argmax: float


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
    return (0.5 * (lo + hi), max(f1, f2))


def legendre_check(b: float, cfg: SolverConfig | None = None,
                   consts: ModelConstants | None = None,
                   n_grid: int = 25) -> LegendreReport:
    """Recompute I(b) as sup_mu (mu b - lambda_plus(mu)) and report the gap.

    The supremum is located on a coarse mu grid and sharpened by
    golden-section search; this is an independent route to the rate
    function that never invokes the envelope formula.
    """
    b = float(b)
    if not math.isfinite(b) or b < 0.0:
        raise DomainError(f"legendre_check requires b >= 0, got {b!r}")
    cfg, consts = _resolve(cfg, consts)
    direct = rate_I(b, cfg, consts)
    kink = -consts.rho_2star
    # the argmax lies at -rho(a_b) >= kink; cover it with margin
    mu_hi = max(2.0, 1.5 * (direct / max(b, 0.25)) + 2.0)
    grid = np.linspace(kink - 0.5, mu_hi, n_grid)
    vals = np.array([b * m - lambda_plus(m, cfg, consts) for m in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_grid - 1)]
    mu_best, dual = _golden_max(lambda m: b * m - lambda_plus(m, cfg, consts),
                                lo, hi, 1e-4)
    # the flat segment makes b*mu - lambda increase for mu < kink when the
    # argmax is the kink itself; include the kink endpoint explicitly
    kink_val = b * kink + consts.a_2star
    if kink_val > dual:
        mu_best, dual = kink, kink_val
    return LegendreReport(b=b, direct=direct, dual=dual,
                          gap=abs(direct - dual), mu_argmax=mu_best)


def lambda_from_rate(mu: float, cfg: SolverConfig | None = None,
                     consts: ModelConstants | None = None,
                     b_hi: float = 12.0, n_grid: int = 25) -> float:
    """Involution partner: recompute lambda_plus as sup_b (mu b - I(b))."""
    mu = float(mu)
    if not math.isfinite(mu):
        raise DomainError(f"mu must be finite, got {mu!r}")
    cfg, consts = _resolve(cfg, consts)
    grid = np.linspace(0.0, b_hi, n_grid)
    vals = np.array([mu * b - rate_I(b, cfg, consts) for b in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_grid - 1)]
    _, best = _golden_max(lambda b: mu * b - rate_I(b, cfg, consts), lo, hi, 1e-4)
    return max(best, -consts.a_2star)


def rate_I_scaled(b: float, beta: float, cfg: SolverConfig | None = None,
                  consts: ModelConstants | None = None) -> float:
    """Rate function at repulsion strength beta via the scaling relation

        I_beta(b) = beta^{2/3} I(beta^{-1/3} b).
    """
    beta = float(beta)
    if not math.isfinite(beta) or beta <= 0.0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    s = beta ** (1.0 / 3.0)
    return s * s * rate_I(float(b) / s, cfg, consts)


def lambda_scaled(mu: float, beta: float, cfg: SolverConfig | None = None,
                  consts: ModelConstants | None = None) -> float:
    """MGF at repulsion strength beta: beta^{2/3} lambda(beta^{-1/3} mu)."""
    beta = float(beta)
    if not math.isfinite(beta) or beta <= 0.0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    s = beta ** (1.0 / 3.0)
    return s * s * lambda_full(float(mu) / s, cfg, consts)
