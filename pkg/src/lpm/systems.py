"""Reference systems with known manifolds, used by tests and ``lpm bench``."""

import math

from .problem import AdmissibleNorm, ProblemSpec

_DIAG = (("1", "0"), ("0", "-1"))


def rotgap(eps: float, gamma_norm: str = "max") -> ProblemSpec:
    """``A = diag(1, -1)``, ``f = eps (-u2, u1)``.

    The invariant graph is the unstable eigenline of ``[[1, -eps], [eps, -1]]``
    with slope ``(1 - sqrt(1 - eps^2)) / eps``; for ``eps >= 1`` the linear
    system has no splitting left and the gap condition must fail.
    """
    return ProblemSpec(
        n=2, k=1, A=_DIAG, f=("eps*(-u2)", "eps*u1"), L1=eps, L2=eps,
        gamma_norm=AdmissibleNorm.parse(gamma_norm), gamma_rate=1.0, rho_rate=-1.0,
        constants=(("eps", float(eps)),), name=f"rotgap({eps:g})",
    )


def rotgap_slope(eps: float) -> float:
    return (1.0 - math.sqrt(1.0 - eps * eps)) / eps


def tanhline(eps: float = 0.5) -> ProblemSpec:
    """``A = diag(1, -1)``, ``f = (0, eps tanh(u1))``; graph ``eps ln(cosh q) / q``."""
    return ProblemSpec(
        n=2, k=1, A=_DIAG, f=("0", "eps*tanh(u1)"), L1=0.0, L2=eps,
        gamma_rate=1.0, rho_rate=-1.0, constants=(("eps", float(eps)),),
        name=f"tanhline({eps:g})",
    )


def tanhline_sigma(q: float, eps: float = 0.5) -> float:
    if q == 0:
        return 0.0
    return eps * math.log(math.cosh(q)) / q


def tanhline_dsigma(q: float, eps: float = 0.5) -> float:
    if q == 0:
        return eps / 2.0
    return eps * (q * math.tanh(q) - math.log(math.cosh(q))) / (q * q)


def tanhline_d2sigma(q: float, eps: float = 0.5) -> float:
    lc = math.log(math.cosh(q))
    th = math.tanh(q)
    return eps * ((1 - th * th) / q - 2 * th / (q * q) + 2 * lc / q ** 3)


def periodic_diag(coupling: float = 0.3) -> ProblemSpec:
    """``A = diag(1 + 0.5 sin t, -1 + 0.5 cos t)``, ``f = (0, c sin(t) tanh(u1))``.

    With ``(gamma, rho) = (1, -1)`` the splitting bound is ``M = e``, so the
    moving-norm Lipschitz constant of the second component is at most
    ``c e`` (declared as ``L2``).
    """
    return ProblemSpec(
        n=2, k=1, A=(("1 + 0.5*sin(t)", "0"), ("0", "-1 + 0.5*cos(t)")),
        f=("0", "c*sin(t)*tanh(u1)"), L1=0.0, L2=coupling * math.e,
        gamma_rate=1.0, rho_rate=-1.0, constants=(("c", float(coupling)),),
        name=f"periodic_diag({coupling:g})",
    )


def constant_diag() -> ProblemSpec:
    """``A = diag(1, -1)`` with ``f = 0`` (``L2`` nominal)."""
    return ProblemSpec(
        n=2, k=1, A=_DIAG, f=("0", "0"), L1=0.0, L2=1e-3,
        gamma_rate=1.0, rho_rate=-1.0, name="constant_diag",
    )


BENCHMARKS = {
    "rotgap": rotgap,
    "tanhline": tanhline,
    "periodic_diag": periodic_diag,
    "constant_diag": constant_diag,
}
