"""Exact treatment of the two-arm, one-decision system.

For K = 2, T = 1 (with unit baseline deviations) the stationarity conditions
collapse to a scalar self-consistent equation g(ds) = 0 in the warm-up reward
gap ds = s_2^0 - s_1^0, with the regret multiplier given in closed form.  This
module locates all roots, reconstructs the full field configuration of each
root, evaluates its action, and finds the critical regret where the root count
jumps from one to three.

The exploration weight c never appears here: at the single decision both arms
have unit counts, so the exploration bonus is common and cancels in the
softmax.  Field reconstructions therefore use c = 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import BanditSpec
from .instanton import SaddleField, field_from_arrays

__all__ = [
    "ToySpec",
    "ToyBranch",
    "sigmoid",
    "g_of_delta_s",
    "ir_hat_of_delta_s",
    "find_branches",
    "critical_regret",
    "branch_action",
    "reconstruct_field",
    "as_bandit_spec",
]

ROOT_TOL = 1e-12
TANGENCY_TOL = 1e-8


@dataclass(frozen=True)
class ToySpec:
    """Two arms with means mu = (mu_1, mu_2), mu_2 > mu_1, variances gamma."""

    mu: tuple[float, float]
    gamma: float
    beta: float

    def __post_init__(self):
        mu = (float(self.mu[0]), float(self.mu[1]))
        if len(self.mu) != 2 or not mu[1] > mu[0]:
            raise ValueError("mu must be two values with mu[1] > mu[0]")
        object.__setattr__(self, "mu", mu)
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")

    @property
    def gap(self) -> float:
        return self.mu[1] - self.mu[0]


@dataclass(frozen=True)
class ToyBranch:
    """One stationary solution: root of g, its multiplier, and its action."""

    delta_s0: float
    ir_hat: float
    action: float
    branch_id: int


def sigmoid(x):
    """Numerically stable logistic function 1 / (1 + exp(-x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def ir_hat_of_delta_s(ds, r: float, toy: ToySpec):
    """Regret multiplier implied by a warm-up gap ds at target regret r."""
    p = sigmoid(toy.beta * np.asarray(ds, dtype=float))
    return (toy.gap * (p - 2.0) + r) / (3.0 * toy.gamma)


def g_of_delta_s(ds, r: float, toy: ToySpec):
    """Self-consistency defect of the warm-up gap; roots are stationary points.

    g(ds) = -2 * gap * beta * gamma * S(beta ds) (1 - S(beta ds)) ir_hat(ds)
            + gap - ds,
    where S is the logistic function and ir_hat(ds) the closed-form multiplier.
    """
    ds = np.asarray(ds, dtype=float)
    p = sigmoid(toy.beta * ds)
    ir = (toy.gap * (p - 2.0) + r) / (3.0 * toy.gamma)
    val = -2.0 * toy.gap * toy.beta * toy.gamma * p * (1.0 - p) * ir + toy.gap - ds
    return val if val.ndim else float(val)


def as_bandit_spec(toy: ToySpec, c: float = 0.0) -> BanditSpec:
    """Equivalent two-arm, one-step bandit spec (unit baseline deviations)."""
    return BanditSpec(
        K=2, T=1, mu=np.array(toy.mu), sigma_tilde=np.ones(2),
        gamma=toy.gamma, beta=toy.beta, c=c,
    )


def reconstruct_field(ds: float, r: float, toy: ToySpec) -> SaddleField:
    """Full field configuration of a root ds of g, as a SaddleField.

    The warm-up reward sums split symmetrically around the means (the two
    warm-up conjugates are opposite), the one-step counts follow from a single
    softmax, and the conjugates follow from the terminal conditions and one
    backward step.  For a true root the assembled field satisfies the
    stationarity map of the companion solver, which is how its residual is
    evaluated.
    """
    g = toy.gamma
    mu = np.array(toy.mu)
    p = sigmoid(toy.beta * ds)
    pr = float(ir_hat_of_delta_s(ds, r, toy))
    ps0 = np.array([1.0, -1.0]) * toy.beta * toy.gap * p * (1.0 - p) * pr
    s0 = mu + g * (ps0 - pr)
    rho = np.array([1.0 - p, p])
    n1 = 1.0 + rho
    s1 = mu * n1 + g * (ps0 - pr * n1)
    pn1 = mu * (-pr) + 0.5 * g * pr**2
    pn0 = (-s0) * ps0 + mu * ps0 + g * ps0 * (-pr) + 0.5 * g * ps0**2
    return field_from_arrays(
        s=np.column_stack([s0, s1]),
        n=np.column_stack([np.ones(2), n1]),
        is_hat=np.column_stack([ps0, -pr * np.ones(2)]),
        in_hat=np.column_stack([pn0, pn1]),
        ir_hat=pr,
        spec=as_bandit_spec(toy),
        r=r,
        variant="simplified",
    )


def branch_action(branch, r: float, toy: ToySpec) -> float:
    """Stationary action of one branch (ToyBranch or raw root value)."""
    ds = branch.delta_s0 if isinstance(branch, ToyBranch) else float(branch)
    return reconstruct_field(ds, r, toy).action


def _bisect(lo: float, hi: float, f) -> float:
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def default_search_interval(r: float, toy: ToySpec) -> tuple[float, float]:
    """Root bracket skewed left: unlucky branches sit below the mean gap."""
    gap = toy.gap
    return gap - 3.0 * max(1.0, r / gap), gap + 3.0


def find_branches(
    r: float,
    toy: ToySpec,
    search_interval: tuple[float, float] | None = None,
    grid_points: int = 10_000,
) -> list[ToyBranch]:
    """All stationary solutions at regret r, ascending in delta_s0.

    Sign changes of g on the scan grid are bisected to machine width (the
    roots certify |g| <= 1e-12); grid-local minima of |g| below the tangency
    tolerance without a sign change are reported once, as double roots.  A
    warning is issued when a root lands within one grid cell of the interval
    boundary, which suggests the interval is too small.
    """
    lo, hi = search_interval if search_interval else default_search_interval(r, toy)
    if not hi > lo:
        raise ValueError("search interval must be non-empty")
    xs = np.linspace(lo, hi, grid_points)
    vals = np.asarray(g_of_delta_s(xs, r, toy))
    f = lambda x: g_of_delta_s(x, r, toy)

    roots: list[float] = []
    sign_cells = set()
    for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        sign_cells.update((i - 1, i, i + 1))
        roots.append(_bisect(xs[i], xs[i + 1], f))
    for i in np.nonzero(vals == 0.0)[0]:
        sign_cells.update((i - 1, i, i + 1))
        roots.append(float(xs[i]))

    # tangency: |g| dips to ~0 without crossing (double root at r = r_c)
    absv = np.abs(vals)
    for i in range(1, grid_points - 1):
        if i in sign_cells or absv[i] > absv[i - 1] or absv[i] > absv[i + 1]:
            continue
        a, b = xs[i - 1], xs[i + 1]
        for _ in range(80):
            m1, m2 = a + (b - a) / 3, b - (b - a) / 3
            if abs(f(m1)) < abs(f(m2)):
                b = m2
            else:
                a = m1
        x_min = 0.5 * (a + b)
        if abs(f(x_min)) <= TANGENCY_TOL:
            roots.append(x_min)

    roots.sort()
    cell = (hi - lo) / (grid_points - 1)
    if roots and (roots[0] < lo + cell or roots[-1] > hi - cell):
        warnings.warn(
            "root within one grid cell of the search interval boundary; "
            "the interval is likely too small",
            stacklevel=2,
        )
    return [
        ToyBranch(
            delta_s0=ds,
            ir_hat=float(ir_hat_of_delta_s(ds, r, toy)),
            action=branch_action(ds, r, toy),
            branch_id=i,
        )
        for i, ds in enumerate(roots)
    ]


def critical_regret(toy: ToySpec, r_bracket: tuple[float, float]) -> float:
    """Regret at which the stationary-solution count jumps from 1 to 3.

    Bisects the branch count over the bracket to a width of 1e-6; the bracket
    must hold exactly one branch at its low end and three at its high end.
    """
    r_lo, r_hi = float(r_bracket[0]), float(r_bracket[1])
    count = lambda r: len(find_branches(r, toy))
    c_lo, c_hi = count(r_lo), count(r_hi)
    if (c_lo, c_hi) != (1, 3):
        raise ValueError(
            f"bracket must have branch counts (1, 3) at its ends, got ({c_lo}, {c_hi})"
        )
    while r_hi - r_lo > 1e-6:
        mid = 0.5 * (r_lo + r_hi)
        c = count(mid)
        if c == 1:
            r_lo = mid
        elif c >= 3:
            r_hi = mid
        else:
            return mid  # landed on the tangency itself
    return 0.5 * (r_lo + r_hi)
