"""Stateless softmax-UCB policy kernel.

Everything in this module is a pure function of its arguments: the UCB index,
its partial derivatives with respect to the reward sum and the pull count, the
softmax operator and its Jacobian, and the resulting arm-selection
probabilities.  Both the Monte Carlo engine and the saddle-point solver are
built on these primitives, so they all broadcast over leading batch axes (the
arm axis is always the last one).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BanditSpec",
    "PolicyEval",
    "ucb_index",
    "ucb_partials",
    "softmax",
    "softmax_jacobian",
    "policy_probabilities",
    "evaluate_policy",
]


def _as_vector(x, K: int, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (K,):
        raise ValueError(f"{name} must have shape ({K},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class BanditSpec:
    """Parameters of one softmax-UCB bandit instance.

    K arms pay Gaussian rewards N(mu_k, gamma * sigma_tilde_k^2).  After the
    warm-up (one forced pull per arm) the player makes T decisions, each drawn
    from the softmax of beta * (UCB index) with exploration weight c.

    K = 1 is accepted as a degenerate diagnostic case (single-arm regret is
    exactly Gaussian); regular use has K >= 2.  gamma = 0 is accepted for the
    simulator; the saddle-point solver requires gamma > 0.
    """

    K: int
    T: int
    mu: np.ndarray
    sigma_tilde: np.ndarray
    gamma: float
    beta: float
    c: float
    mu_star: float = dataclasses.field(init=False, compare=False)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be an integer >= 1")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError("T must be an integer >= 1")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "mu", _as_vector(self.mu, self.K, "mu"))
        object.__setattr__(
            self, "sigma_tilde", _as_vector(self.sigma_tilde, self.K, "sigma_tilde")
        )
        if np.any(self.sigma_tilde < 0):
            raise ValueError("sigma_tilde entries must be >= 0")
        for name in ("gamma", "beta", "c"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and >= 0")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "mu_star", float(np.max(self.mu)))

    @property
    def sigma2(self) -> np.ndarray:
        """Per-arm reward variances gamma * sigma_tilde^2."""
        return self.gamma * self.sigma_tilde**2

    def replace(self, **changes) -> "BanditSpec":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class PolicyEval:
    """Policy quantities at one state: indices, their partials, probabilities.

    B, B_s, B_n and rho have shape (..., K); jac is the (..., K, K) softmax
    Jacobian of the probabilities with respect to the scaled indices.
    """

    B: np.ndarray
    B_s: np.ndarray
    B_n: np.ndarray
    rho: np.ndarray
    jac: np.ndarray


def _check_counts(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0):
        raise ValueError("pull counts must be > 0")
    return n


def ucb_index(s, n, t: int, spec: BanditSpec):
    """Upper-confidence index s/n + c * sqrt(log(K + t) / n).

    Accepts scalars or arrays (broadcast together); n must be strictly
    positive.  Counts are real-valued: the saddle-point equations relax them to
    continuous variables, and integer simulator counts embed exactly.
    """
    n = _check_counts(n)
    s = np.asarray(s, dtype=float)
    if t < 0:
        raise ValueError("t must be >= 0")
    return s / n + spec.c * np.sqrt(np.log(spec.K + t) / n)


def ucb_partials(s, n, t: int, spec: BanditSpec):
    """Partial derivatives (dB/ds, dB/dn) of the UCB index.

    dB/ds = 1/n and dB/dn = -s/n^2 - (c/2) sqrt(log(K + t)) n^(-3/2); both are
    validated against central finite differences of :func:`ucb_index` in the
    test suite.
    """
    n = _check_counts(n)
    s = np.asarray(s, dtype=float)
    if t < 0:
        raise ValueError("t must be >= 0")
    b_s = 1.0 / n
    b_n = -s / n**2 - 0.5 * spec.c * np.sqrt(np.log(spec.K + t)) * n**-1.5
    return b_s, b_n


def softmax(v) -> np.ndarray:
    """Softmax along the last axis, computed with max-subtraction.

    The shift makes exp overflow impossible for finite input; entries are
    positive and sum to one along the last axis.
    """
    v = np.asarray(v, dtype=float)
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_jacobian(v) -> np.ndarray:
    """Jacobian of :func:`softmax`: J_kj = delta_kj rho_k - rho_k rho_j.

    Symmetric, rows sum to zero, positive diagonal for finite input.  Shape
    (..., K, K) for input (..., K).
    """
    rho = softmax(v)
    K = rho.shape[-1]
    return rho[..., :, None] * (np.eye(K) - rho[..., None, :])


def softmax_jacobian_apply(rho: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Apply the softmax Jacobian built from probabilities rho to a vector w.

    Equals softmax_jacobian(v) @ w when rho = softmax(v), but costs O(K)
    instead of O(K^2); used in the solver's backward sweeps.
    """
    return rho * (w - np.sum(rho * w, axis=-1, keepdims=True))


def policy_probabilities(s, n, t: int, spec: BanditSpec) -> np.ndarray:
    """Arm-selection probabilities: softmax of beta * UCB indices.

    s and n carry the per-arm state on the last axis; with beta = 0 the policy
    is uniform regardless of the state.
    """
    return softmax(spec.beta * ucb_index(s, n, t, spec))


def evaluate_policy(s, n, t: int, spec: BanditSpec) -> PolicyEval:
    """Bundle index, partials, probabilities and Jacobian at one state."""
    b = ucb_index(s, n, t, spec)
    b_s, b_n = ucb_partials(s, n, t, spec)
    logits = spec.beta * b
    return PolicyEval(
        B=b, B_s=b_s, B_n=b_n, rho=softmax(logits), jac=softmax_jacobian(logits)
    )
