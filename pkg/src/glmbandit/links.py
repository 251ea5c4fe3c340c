"""Link functions for the GLM reward model E[Y | X] = mu(X'theta).

Each link carries its first two derivatives plus global bounds on them:
``lipschitz_bound`` dominates ``|mu'|`` and ``curvature_bound`` dominates
``|mu''|`` everywhere.  The bounds feed the confidence-width formulas, so
they must be valid upper bounds but need not be tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .errors import InvalidConfigError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Overflow-free form: exp is only ever applied to nonpositive arguments.
    z = np.asarray(z, dtype=float)
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def _normal_pdf(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / _SQRT_2PI


@dataclass(frozen=True)
class LinkFunction:
    """A strictly increasing mean map with derivative information."""

    kind: str
    mu: Callable[[np.ndarray], np.ndarray]
    mu_dot: Callable[[np.ndarray], np.ndarray]
    mu_ddot: Callable[[np.ndarray], np.ndarray]
    lipschitz_bound: float
    curvature_bound: float


def _identity_mu(z):
    return np.asarray(z, dtype=float) + 0.0


def _identity_dot(z):
    return np.ones_like(np.asarray(z, dtype=float))


def _identity_ddot(z):
    return np.zeros_like(np.asarray(z, dtype=float))


def _logistic_dot(z):
    s = _sigmoid(z)
    return s * (1.0 - s)


def _logistic_ddot(z):
    s = _sigmoid(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _probit_ddot(z):
    z = np.asarray(z, dtype=float)
    return -z * _normal_pdf(z)


IDENTITY = LinkFunction(
    kind="identity",
    mu=_identity_mu,
    mu_dot=_identity_dot,
    mu_ddot=_identity_ddot,
    lipschitz_bound=1.0,
    curvature_bound=0.0,
)

# 1/4 bounds both derivatives of the sigmoid (|mu''| peaks lower, at
# 1/(6*sqrt(3)), but 1/4 is the conventional shared bound).
LOGISTIC = LinkFunction(
    kind="logistic",
    mu=_sigmoid,
    mu_dot=_logistic_dot,
    mu_ddot=_logistic_ddot,
    lipschitz_bound=0.25,
    curvature_bound=0.25,
)

# |mu'| = phi(z) peaks at phi(0) = 1/sqrt(2*pi); |mu''| = |z|*phi(z) peaks
# at |z| = 1.
PROBIT = LinkFunction(
    kind="probit",
    mu=lambda z: ndtr(np.asarray(z, dtype=float)),
    mu_dot=_normal_pdf,
    mu_ddot=_probit_ddot,
    lipschitz_bound=1.0 / _SQRT_2PI,
    curvature_bound=float(_normal_pdf(1.0)),
)

_LINKS = {link.kind: link for link in (IDENTITY, LOGISTIC, PROBIT)}


def get_link(kind: str) -> LinkFunction:
    """Look up a built-in link by name ("identity", "logistic", "probit")."""
    try:
        return _LINKS[kind]
    except KeyError:
        raise InvalidConfigError(
            f"unknown link {kind!r}; expected one of {sorted(_LINKS)}"
        ) from None


def link_eval(link: LinkFunction, z: float) -> float:
    """Evaluate mu(z) for a scalar argument."""
    return float(link.mu(z))


def compute_kappa(link: LinkFunction, theta_star_norm: float) -> float:
    """Smallest slope of mu over the reachable linear-predictor range.

    With feature norms at most 1 and parameter estimates within unit
    distance of the truth, the linear predictor stays in
    ``[-(|theta*| + 1), |theta*| + 1]``.  For the built-in links mu' is
    either constant (identity) or symmetric and unimodal about 0, so the
    infimum sits at the interval endpoint.
    """
    if theta_star_norm < 0:
        raise ValueError("theta_star_norm must be nonnegative")
    if link.kind == "identity":
        return 1.0
    return float(link.mu_dot(theta_star_norm + 1.0))
