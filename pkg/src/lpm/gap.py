"""Scalar quantities of the gap condition.

All functions take the splitting exponents ``gamma > rho``, the Lipschitz
constants ``L1 >= 0``, ``L2 > 0`` and an :class:`~lpm.problem.AdmissibleNorm`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import GapFails, NoConvergence
from .problem import AdmissibleNorm

BRACKET_POINTS = 256


def theta(sigma, gamma, rho, L1, L2, gnorm: AdmissibleNorm):
    """Contraction factor ``Gamma(L1 / (sigma - rho), L2 / (gamma - sigma))``."""
    sigma = np.asarray(sigma, dtype=float)
    return gnorm(L1 / (sigma - rho), L2 / (gamma - sigma))


def find_sigma(gamma, rho, L1, L2, gnorm: AdmissibleNorm):
    """Minimise the contraction factor over ``sigma`` in ``(rho, gamma)``.

    A 256-point interior grid brackets the minimum, which is then polished by
    a bounded golden-section/parabolic search between the neighbouring grid
    points (never outside the grid's span).

    Returns
    -------
    sigma_star, theta_star : float

    Raises
    ------
    GapFails
        If the minimum is ``>= 1 - 1e-12``.
    """
    if not gamma > rho:
        raise ValueError("need gamma > rho")
    if not (L1 >= 0 and L2 > 0):
        raise ValueError("need L1 >= 0 and L2 > 0")
    width = gamma - rho
    grid = rho + width * np.arange(1, BRACKET_POINTS + 1) / (BRACKET_POINTS + 1)
    vals = theta(grid, gamma, rho, L1, L2, gnorm)
    j = int(np.argmin(vals))
    sigma, best = float(grid[j]), float(vals[j])
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, BRACKET_POINTS - 1)]
    f = lambda s: float(theta(s, gamma, rho, L1, L2, gnorm))  # noqa: E731
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    if res.success and f(res.x) <= best:
        sigma, best = float(res.x), f(res.x)
    if best >= 1.0 - 1e-12:
        raise GapFails(
            f"gap condition fails: min over sigma of Gamma(L1/(sigma-rho), L2/(gamma-sigma)) "
            f"= {best:.12g} >= 1 (gamma={gamma}, rho={rho}, L1={L1}, L2={L2}, Gamma={gnorm.label})"
        )
    return sigma, best


def kappa_at(sigma, gamma, rho, L1, L2) -> float:
    """Cone constant ``(L2 / L1)(sigma - rho) / (gamma - sigma)``; ``inf`` when ``L1 = 0``."""
    if L1 == 0:
        return math.inf
    return (L2 / L1) * (sigma - rho) / (gamma - sigma)


def _iterate(step, seed, upper, max_steps=10_000):
    k = float(seed)
    for _ in range(max_steps):
        nxt = step(k)
        if not (math.isfinite(nxt) and nxt >= 0) or nxt > upper * (1 + 1e-12):
            raise NoConvergence(f"refinement left its admissible range at {nxt!r}")
        if abs(nxt - k) <= 1e-15 * max(1.0, k) or (nxt == k):
            return nxt
        k = nxt
    raise NoConvergence("refinement did not settle within 10^4 steps")


def kappa_sigma_residual(kappa, gamma, rho, L1, L2, gnorm):
    """Residual of ``gamma - rho = L1 Gamma(1, k) + L2 Gamma(1/k, 1)``.

    At ``k = 0`` the equation multiplied by ``k`` is used instead.
    """
    if kappa > 0:
        # Gamma(1/k, 1) = Gamma(1, k) / k avoids overflow for tiny k
        return float(gamma - rho - L1 * gnorm(1.0, kappa) - (L2 / kappa) * gnorm(1.0, kappa))
    return float(-L2 * gnorm(1.0, 0.0))


def kappa_theta_residual(kappa, gamma, rho, L1, L2, gnorm):
    """Residual of ``gamma - rho = L1 Gamma(1, 1/k) + L2 Gamma(k, 1)``.

    At ``k = 0`` the equation multiplied by ``k`` is used (zero iff ``L1 = 0``).
    """
    if kappa > 0:
        return float(gamma - rho - (L1 / kappa) * gnorm(kappa, 1.0) - L2 * gnorm(kappa, 1.0))
    return float(L1 * gnorm(0.0, 1.0))


def refine_kappa_sigma(gamma, rho, L1, L2, gnorm: AdmissibleNorm, seed=0.0):
    """Smallest fixed point of ``k -> L2 Gamma(1,k) / (gamma - rho - L1 Gamma(1,k))``.

    Raises
    ------
    NoConvergence
        Iteration exceeds 10^4 steps, the denominator turns non-positive or
        the iterate exceeds the cone constant at the optimal sigma.
    """
    width = gamma - rho
    sigma, _ = find_sigma(gamma, rho, L1, L2, gnorm)
    upper = kappa_at(sigma, gamma, rho, L1, L2)

    def step(k):
        den = width - L1 * float(gnorm(1.0, k))
        if den <= 0:
            return math.inf
        return L2 * float(gnorm(1.0, k)) / den

    k = _iterate(step, seed, upper)
    res = kappa_sigma_residual(k, gamma, rho, L1, L2, gnorm)
    if abs(res) > 1e-10 * max(1.0, width):
        raise NoConvergence(f"kappa_sigma residual {res:.3e} too large")
    return k


def refine_kappa_theta(gamma, rho, L1, L2, gnorm: AdmissibleNorm, seed=0.0):
    """Smallest fixed point of ``k -> L1 Gamma(k,1) / (gamma - rho - L2 Gamma(k,1))``."""
    width = gamma - rho
    sigma, _ = find_sigma(gamma, rho, L1, L2, gnorm)
    upper = math.inf if L2 == 0 else (L1 / L2) * (gamma - sigma) / (sigma - rho)

    def step(k):
        den = width - L2 * float(gnorm(k, 1.0))
        if den <= 0:
            return math.inf
        return L1 * float(gnorm(k, 1.0)) / den

    k = _iterate(step, seed, upper)
    res = kappa_theta_residual(k, gamma, rho, L1, L2, gnorm)
    if abs(res) > 1e-10 * max(1.0, width):
        raise NoConvergence(f"kappa_theta residual {res:.3e} too large")
    return k


def omega_rate(gamma, rho, L1, L2, kappa_sigma, gnorm: AdmissibleNorm) -> float:
    """Attraction exponent ``gamma - (gamma-rho) L2 Gamma(0,1) / (gamma-rho-L1 Gamma(1,kappa_sigma))``."""
    width = gamma - rho
    return float(gamma - width * L2 * gnorm(0.0, 1.0) / (width - L1 * gnorm(1.0, kappa_sigma)))


@dataclass(frozen=True)
class GapCertificate:
    gamma: float
    rho: float
    L1: float
    L2: float
    gnorm: AdmissibleNorm
    sigma_star: float
    theta_star: float
    kappa: float
    kappa_sigma: float
    kappa_theta: float
    omega: float

    @property
    def inertial(self) -> bool:
        return self.omega > 0

    @property
    def kappa_infinite(self) -> bool:
        return math.isinf(self.kappa)

    @property
    def cone_kappa(self) -> float:
        """Cone constant used by checks: ``kappa`` or ``kappa_sigma`` when infinite."""
        return self.kappa_sigma if self.kappa_infinite else self.kappa

    def as_dict(self):
        return {
            "gamma_norm": self.gnorm.label,
            "sigma_star": self.sigma_star,
            "theta_star": self.theta_star,
            "kappa": None if self.kappa_infinite else self.kappa,
            "kappa_infinite": self.kappa_infinite,
            "kappa_sigma": self.kappa_sigma,
            "kappa_theta": self.kappa_theta,
            "omega": self.omega,
            "inertial": self.inertial,
        }


def gap_certificate(gamma, rho, L1, L2, gnorm: AdmissibleNorm) -> GapCertificate:
    """All gap quantities at once.

    Raises
    ------
    GapFails, NoConvergence
    """
    sigma, th = find_sigma(gamma, rho, L1, L2, gnorm)
    ks = refine_kappa_sigma(gamma, rho, L1, L2, gnorm)
    kt = refine_kappa_theta(gamma, rho, L1, L2, gnorm)
    om = omega_rate(gamma, rho, L1, L2, ks, gnorm)
    if not (rho < om < gamma):
        raise NoConvergence(f"omega={om} outside ({rho}, {gamma})")
    return GapCertificate(
        gamma=float(gamma), rho=float(rho), L1=float(L1), L2=float(L2), gnorm=gnorm,
        sigma_star=sigma, theta_star=th, kappa=kappa_at(sigma, gamma, rho, L1, L2),
        kappa_sigma=ks, kappa_theta=kt, omega=om,
    )
