"""Saddle-point (instanton) solver for the regret distribution.

Solves the stationarity conditions of the stochastic action at a prescribed
regret r.  The state is the set of order parameters over the whole horizon:
the reward sums s, the continuous pull counts n, and the conjugate fields
is_hat, in_hat and the scalar regret multiplier ir_hat (all real at the
saddle).  Two variants of the equations are supported:

* ``"simplified"`` (default): the large-beta form, where the arm-selection
  probabilities are evaluated at the bare scaled indices and the conjugate
  sweep uses the softmax-Jacobian linearization.  The action obeys the exact
  noise-scale symmetry: rescaling gamma -> kappa*gamma leaves (s, n) fixed and
  divides conjugates and action by kappa, so rate = gamma * action depends on
  sigma_tilde only.
* ``"full"``: the un-linearized equations, where the selection field also
  carries the future in_hat sums; kept for validation against the simplified
  form.

The solve strategy follows a damped fixed-point iteration with a heuristic
update of ir_hat that steers the final reward sum onto the regret constraint.
The iteration is only a preconditioner: it need not converge, and its best
iterate is handed to a finite-difference Newton method that does.  Solves are
wrapped in continuation over r plus random and structured multistarts so that
coexisting solution branches are discovered and tracked.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import BanditSpec, softmax, softmax_jacobian_apply

__all__ = [
    "SaddleField",
    "RateCurve",
    "forward_pass",
    "backward_pass",
    "fixed_point_step",
    "update_r_hat",
    "residual",
    "newton_refine",
    "solve_saddle",
    "action_value",
    "rate_curve",
    "most_probable_regret",
    "field_from_arrays",
    "detect_kinks",
    "convex_piece_count",
]

log = logging.getLogger(__name__)

VARIANTS = ("simplified", "full")

DEFAULT_TOL = 1e-10
DEDUP_TOL = 1e-6
DEFAULT_MULTISTARTS = 8
FP_SWEEPS = 60
FP_STALL = 20
ALPHA0 = 0.3
ALPHA_FLOOR = 0.01
RES_FLOOR = 1e-24  # stop polishing below this; far under any stated tolerance
CONTINUATION_STEP = 2.0


@dataclass
class SaddleField:
    """One stationary (or candidate) field configuration at a target regret.

    s, n, is_hat, in_hat have shape (K, T+1), time on the last axis; ir_hat is
    the scalar multiplier of the regret constraint.  action is the stationary
    stochastic action of the configuration, residual the squared fixed-point
    defect plus squared constraint defect, at the regret r stored here.
    """

    s: np.ndarray
    n: np.ndarray
    is_hat: np.ndarray
    in_hat: np.ndarray
    ir_hat: float
    r: float
    action: float
    residual: float
    converged: bool
    variant: str


@dataclass
class RateCurve:
    """Minimal-action branch of the rate function over a regret grid.

    rate = gamma * action; r_mpv is the grid argmin of the rate.  Rows where
    no solve converged are flagged (converged False, NaN values) rather than
    dropped.
    """

    r_grid: np.ndarray
    action: np.ndarray
    rate: np.ndarray
    n_solutions: np.ndarray
    r_mpv: float
    ir_hat: np.ndarray = field(default=None, repr=False)
    residual: np.ndarray = field(default=None, repr=False)
    converged: np.ndarray = field(default=None, repr=False)


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


# ----------------------------------------------------------------------------
# Field sweeps.  All of these accept arbitrary leading batch axes; the last
# two axes are (K, T+1).  The batched form is what makes finite-difference
# Jacobians and parallel multistarts affordable: one sweep over time handles
# every copy at once.
# ----------------------------------------------------------------------------


def _suffix_sum(x: np.ndarray) -> np.ndarray:
    """suffix[..., t] = sum over t' >= t of x[..., t'], padded with 0 at T+1."""
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,))
    out[..., :-1] = np.flip(np.cumsum(np.flip(x, -1), -1), -1)
    return out


def _forward(ps, pn, pr, spec: BanditSpec, variant: str):
    """Forward sweep: rebuild (n, s) from the conjugate fields.

    The terminal condition is_hat[T] = -ir_hat is substituted before the
    sweep; this is what lets the ir_hat update steer the final reward sum.
    The count recursion consumes the selection probabilities of the previous
    state; the reward sums couple to is_hat through the noise kernel, which at
    time t only involves counts at times <= t, so one pass suffices.
    """
    K, T = spec.K, spec.T
    mu, sigma2, beta, c = spec.mu, spec.sigma2, spec.beta, spec.c
    ps = np.array(ps, dtype=float)
    pr = np.asarray(pr, dtype=float)
    ps[..., T] = -pr[..., None]
    suf_ps = _suffix_sum(ps)
    n = np.empty_like(ps)
    s = np.empty_like(ps)
    n[..., 0] = 1.0
    s[..., 0] = mu + sigma2 * suf_ps[..., 0]
    if variant == "full":
        suf_pn = _suffix_sum(np.asarray(pn, dtype=float))
    acc = ps[..., 0] * n[..., 0]
    for t in range(1, T + 1):
        nt = n[..., t - 1]
        logits = beta * (s[..., t - 1] / nt + c * np.sqrt(np.log(K + t - 1) / nt))
        if variant == "full":
            logits = logits + suf_pn[..., t]
        n[..., t] = n[..., t - 1] + softmax(logits)
        acc = acc + ps[..., t] * n[..., t]
        s[..., t] = mu * n[..., t] + sigma2 * (acc + n[..., t] * suf_ps[..., t + 1])
    return n, s


def _backward(n, s, pr, spec: BanditSpec, variant: str):
    """Backward sweep: rebuild the conjugate fields from (n, s, ir_hat).

    Runs from the terminal conditions is_hat[T] = -ir_hat and
    in_hat[T] = mu*is_hat[T] + sigma^2/2 * is_hat[T]^2 down to t = 0,
    accumulating the future sums of both conjugates as it goes.
    """
    K, T = spec.K, spec.T
    mu, sigma2, beta, c = spec.mu, spec.sigma2, spec.beta, spec.c
    n = np.asarray(n, dtype=float)
    s = np.asarray(s, dtype=float)
    pr = np.asarray(pr, dtype=float)
    ps = np.empty_like(n)
    pn = np.empty_like(n)
    ps[..., T] = -pr[..., None]
    pn[..., T] = mu * ps[..., T] + 0.5 * sigma2 * ps[..., T] ** 2
    sum_pn = pn[..., T].copy()
    sum_ps = ps[..., T].copy()
    for t in range(T - 1, -1, -1):
        st, nt = s[..., t], n[..., t]
        root_log = np.sqrt(np.log(K + t))
        b_s = 1.0 / nt
        b_n = -st / nt**2 - 0.5 * c * root_log * nt**-1.5
        logits = beta * (st / nt + c * root_log / np.sqrt(nt))
        if variant == "simplified":
            drive = softmax_jacobian_apply(softmax(logits), sum_pn)
        else:
            drive = softmax(logits + sum_pn) - softmax(logits)
        ps_t = beta * b_s * drive
        ps[..., t] = ps_t
        pn[..., t] = (
            beta * b_n * drive
            + mu * ps_t
            + sigma2 * ps_t * sum_ps
            + 0.5 * sigma2 * ps_t**2
        )
        sum_pn += pn[..., t]
        sum_ps += ps_t
    return ps, pn


def _pack(s, n, ps, pn, pr) -> np.ndarray:
    head = [np.reshape(x, x.shape[:-2] + (-1,)) for x in (s, n, ps, pn)]
    tail = np.asarray(pr, dtype=float)[..., None]
    return np.concatenate(head + [tail], axis=-1)


def _unpack(y: np.ndarray, spec: BanditSpec):
    m = spec.K * (spec.T + 1)
    shape = y.shape[:-1] + (spec.K, spec.T + 1)
    blocks = [y[..., i * m : (i + 1) * m].reshape(shape) for i in range(4)]
    return (*blocks, y[..., 4 * m])


def _zeros_y(spec: BanditSpec) -> np.ndarray:
    """Zero-conjugate configuration with consistent (n, s)."""
    zero = np.zeros((spec.K, spec.T + 1))
    n, s = _forward(zero, zero, np.asarray(0.0), spec, "simplified")
    return _pack(s, n, zero, zero, 0.0)


def _map(y: np.ndarray, spec: BanditSpec, variant: str) -> np.ndarray:
    """One application of the composed forward-then-backward sweep.

    ir_hat passes through unchanged; the (s, n) components of the input are
    ignored and rebuilt from the conjugates, so the map's fixed points are
    exactly the stationary configurations at the given ir_hat.
    """
    s, n, ps, pn, pr = _unpack(y, spec)
    del s, n
    n2, s2 = _forward(ps, pn, pr, spec, variant)
    ps2, pn2 = _backward(n2, s2, pr, spec, variant)
    return _pack(s2, n2, ps2, pn2, pr)


def _constraint_gap(y: np.ndarray, spec: BanditSpec, r: float) -> np.ndarray:
    s = _unpack(y, spec)[0]
    return s[..., spec.T].sum(axis=-1) + r - (spec.T + spec.K) * spec.mu_star


def _residual_vec(y: np.ndarray, spec: BanditSpec, r: float, variant: str):
    diff = (y - _map(y, spec, variant))[..., :-1]
    gap = _constraint_gap(y, spec, r)
    return np.concatenate([diff, gap[..., None]], axis=-1)


def _res2(y: np.ndarray, spec: BanditSpec, r: float, variant: str) -> np.ndarray:
    rv = _residual_vec(y, spec, r, variant)
    return np.sum(rv**2, axis=-1)


# ----------------------------------------------------------------------------
# Public single-field operations.
# ----------------------------------------------------------------------------


def forward_pass(is_hat, in_hat, ir_hat, spec: BanditSpec, variant: str = "simplified"):
    """Rebuild (n, s) from conjugate fields; returns arrays of shape (K, T+1).

    The count recursion uses selection probabilities of the state it has just
    produced; in the full variant those probabilities also carry the future
    in_hat sums.  All counts are >= 1 by construction for finite input.
    """
    _check_variant(variant)
    ps = np.asarray(is_hat, dtype=float)
    pn = np.asarray(in_hat, dtype=float)
    if not (np.all(np.isfinite(ps)) and np.all(np.isfinite(pn)) and np.isfinite(ir_hat)):
        raise ValueError("conjugate fields must be finite")
    n, s = _forward(ps, pn, np.asarray(float(ir_hat)), spec, variant)
    if not np.all(n > 0):
        raise FloatingPointError("forward sweep produced non-positive counts")
    return n, s


def backward_pass(n, s, ir_hat, spec: BanditSpec, variant: str = "simplified"):
    """Rebuild conjugate fields (is_hat, in_hat) from (n, s, ir_hat).

    The future sums of in_hat that enter each step are accumulated by the
    sweep itself (the equations close backward in time), so no previous
    iterate is needed.  Terminal conditions are set exactly.
    """
    _check_variant(variant)
    n = np.asarray(n, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(n <= 0):
        raise ValueError("counts must be positive")
    return _backward(n, s, np.asarray(float(ir_hat)), spec, variant)


def field_from_arrays(
    s, n, is_hat, in_hat, ir_hat, spec: BanditSpec, r: float,
    variant: str = "simplified", tol: float = DEFAULT_TOL,
) -> SaddleField:
    """Assemble a SaddleField, evaluating its action and residual at r."""
    _check_variant(variant)
    y = _pack(
        np.asarray(s, float), np.asarray(n, float),
        np.asarray(is_hat, float), np.asarray(in_hat, float), float(ir_hat),
    )
    return _field_from_y(y, spec, r, variant, tol)


def _field_from_y(
    y: np.ndarray, spec: BanditSpec, r: float, variant: str, tol: float
) -> SaddleField:
    s, n, ps, pn, pr = _unpack(y, spec)
    res = float(_res2(y, spec, r, variant))
    return SaddleField(
        s=s.copy(), n=n.copy(), is_hat=ps.copy(), in_hat=pn.copy(),
        ir_hat=float(pr), r=float(r),
        action=float(_action_from(ps, n, spec)),
        residual=res, converged=bool(res <= tol), variant=variant,
    )


def _y_from_field(y: SaddleField) -> np.ndarray:
    return _pack(y.s, y.n, y.is_hat, y.in_hat, y.ir_hat)


def fixed_point_step(
    y: SaddleField, alpha: float, spec: BanditSpec, r: float
) -> SaddleField:
    """One damped sweep: alpha * map(y) + (1 - alpha) * y, ir_hat unchanged."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    z = _y_from_field(y)
    z_new = alpha * _map(z, spec, y.variant) + (1 - alpha) * z
    return _field_from_y(z_new, spec, r, y.variant, DEFAULT_TOL)


def update_r_hat(y: SaddleField, spec: BanditSpec, r: float) -> float:
    """Heuristic multiplier update steering sum_k s_k^T onto the constraint.

    Only the explicit dependence of the terminal reward sums on ir_hat (through
    is_hat[T] = -ir_hat) is retained, giving the linear model
    s_k^T = -ir_hat * sigma_k^2 * n_k^T + const and the correction
    delta = (sum_k s_k^T - target) / sum_k sigma_k^2 n_k^T.
    """
    if spec.gamma <= 0:
        raise ValueError("ir_hat update requires gamma > 0")
    target = (spec.T + spec.K) * spec.mu_star - r
    gap = float(np.sum(y.s[:, spec.T])) - target
    scale = float(np.sum(spec.sigma2 * y.n[:, spec.T]))
    return y.ir_hat + gap / scale


def residual(y: SaddleField, spec: BanditSpec, r: float) -> float:
    """Squared fixed-point defect plus squared regret-constraint defect."""
    return float(_res2(_y_from_field(y), spec, r, y.variant))


def action_value(y: SaddleField, spec: BanditSpec) -> float:
    """Stationary stochastic action of a field configuration.

    0.5 * sum_k sigma_k^2 * sum_{t,t'} is_hat_k^t is_hat_k^t' n_k^min(t,t'),
    evaluated in O(K T) with suffix sums.  Zero whenever is_hat vanishes.
    """
    return float(_action_from(y.is_hat, y.n, spec))


def _action_from(ps, n, spec: BanditSpec):
    suf = _suffix_sum(ps)[..., 1:]
    quad = np.sum(ps * n * (ps + 2.0 * suf), axis=-1)
    return 0.5 * np.sum(spec.sigma2 * quad, axis=-1)


def most_probable_regret(spec: BanditSpec) -> float:
    """Regret of the zero-conjugate (deterministic) trajectory.

    With all conjugates zero the reward sums track mu_k * n_k exactly and the
    count recursion is the deterministic softmax-UCB iteration; no optimization
    is involved.  Valid for any gamma >= 0.
    """
    zero = np.zeros((spec.K, spec.T + 1))
    n, s = _forward(zero, zero, np.asarray(0.0), spec, "simplified")
    return float((spec.T + spec.K) * spec.mu_star - np.sum(s[:, spec.T]))


# ----------------------------------------------------------------------------
# Newton refinement and the outer solve strategy.
# ----------------------------------------------------------------------------


def _fd_jacobian(z: np.ndarray, spec: BanditSpec, r: float, variant: str):
    N = z.size
    h = 1e-6 * np.maximum(1.0, np.abs(z))
    Z = np.repeat(z[None, :], 2 * N, axis=0)
    idx = np.arange(N)
    Z[idx, idx] += h
    Z[N + idx, idx] -= h
    R = _residual_vec(Z, spec, r, variant)
    return ((R[:N] - R[N:]) / (2.0 * h[:, None])).T


def _newton(z: np.ndarray, spec: BanditSpec, r: float, variant: str,
            tol: float, max_iter: int):
    with np.errstate(all="ignore"):
        rv = _residual_vec(z, spec, r, variant)
        res = float(np.sum(rv**2))
        if not np.isfinite(res):
            return z, np.inf, False
        slow = 0
        for _ in range(max_iter):
            if res <= RES_FLOOR:
                break
            J = _fd_jacobian(z, spec, r, variant)
            if not np.all(np.isfinite(J)):
                break
            try:
                step = np.linalg.solve(J, -rv)
            except np.linalg.LinAlgError:
                log.info("singular Jacobian at r=%g; using pseudo-inverse step", r)
                step = np.linalg.lstsq(J, -rv, rcond=None)[0]
            lam, accepted = 1.0, False
            for _ in range(12):
                z_try = z + lam * step
                rv_try = _residual_vec(z_try, spec, r, variant)
                res_try = float(np.sum(rv_try**2))
                if np.isfinite(res_try) and res_try < res:
                    accepted = True
                    break
                lam *= 0.5
            if not accepted:
                break
            # bail out of hopeless runs that only creep downhill
            slow = slow + 1 if res_try > 0.9 * res else 0
            z, rv, res = z_try, rv_try, res_try
            if slow >= 5 and res > 1e2 * tol:
                break
    return z, res, res <= tol


def newton_refine(
    y0: SaddleField, spec: BanditSpec, r: float,
    tol: float = DEFAULT_TOL, max_iter: int = 30,
) -> SaddleField:
    """Newton's method on the stacked stationarity-plus-constraint system.

    The Jacobian is built by central finite differences over all 4K(T+1)+1
    unknowns (batched sweeps keep this cheap) with a pseudo-inverse fallback
    when it is singular.  Returns immediately if y0 already solves the system;
    non-convergence is flagged on the result, never raised.
    """
    z, res, ok = _newton(_y_from_field(y0), spec, r, y0.variant, tol, max_iter)
    out = _field_from_y(z, spec, r, y0.variant, tol)
    out.converged = bool(ok and np.isfinite(out.residual))
    return out


def _fp_phase(Z: np.ndarray, spec: BanditSpec, r: float, variant: str,
              sweeps: int, alpha0: float):
    """Damped fixed-point sweeps with interleaved ir_hat steering, batched.

    Z holds one start per row.  The damping of each row halves whenever its
    residual increases (floor 0.01) and the best iterate per row is retained;
    rows that stop improving for a while are left to coast (the method is a
    preconditioner for Newton, so polishing is not its job).
    """
    m = spec.K * (spec.T + 1)
    target = (spec.T + spec.K) * spec.mu_star - r
    nrows = Z.shape[0]
    alpha = np.full(nrows, alpha0)
    with np.errstate(all="ignore"):
        res = _res2(Z, spec, r, variant)
        best = Z.copy()
        best_res = np.where(np.isfinite(res), res, np.inf)
        stall = np.zeros(nrows, dtype=int)
        for _ in range(sweeps):
            Z_new = alpha[:, None] * _map(Z, spec, variant) + (1 - alpha[:, None]) * Z
            s_T = Z_new[:, 0:m].reshape(nrows, spec.K, -1)[:, :, spec.T]
            n_T = Z_new[:, m : 2 * m].reshape(nrows, spec.K, -1)[:, :, spec.T]
            gap = s_T.sum(axis=1) - target
            Z_new[:, -1] += gap / (n_T * spec.sigma2).sum(axis=1)
            res_new = _res2(Z_new, spec, r, variant)
            worse = ~(res_new <= res)  # includes NaN
            alpha[worse] = np.maximum(alpha[worse] * 0.5, ALPHA_FLOOR)
            improved = res_new < best_res
            best[improved] = Z_new[improved]
            best_res[improved] = res_new[improved]
            stall = np.where(improved, 0, stall + 1)
            Z, res = Z_new, res_new
            if np.all((stall >= FP_STALL) | (best_res <= RES_FLOOR)):
                break
    return best, best_res


def _random_start(spec: BanditSpec, seed_base: int, index: int,
                  variant: str) -> np.ndarray:
    """Multistart point: conjugates uniform in [-2/gamma, 2/gamma]."""
    rng = np.random.default_rng([seed_base, index])
    scale = 2.0 / spec.gamma
    shape = (spec.K, spec.T + 1)
    ps = rng.uniform(-scale, scale, shape)
    pn = rng.uniform(-scale, scale, shape)
    pr = rng.uniform(-scale, scale)
    with np.errstate(all="ignore"):
        n, s = _forward(ps, pn, np.asarray(pr), spec, variant)
    return _pack(s, n, ps, pn, pr)


def _structured_starts(spec: BanditSpec, r: float, variant: str) -> list[np.ndarray]:
    """Starts shaped like the unlucky-branch families.

    The high-regret branches exploit a sub-optimal arm m because every better
    arm was under-rewarded at warm-up.  For each candidate m the warm-up
    conjugates of the better arms are set to suppress their reward sums just
    below mu_m (at a few depths), optionally with a regret multiplier sized by
    the linearized constraint.  Uniform draws hit these basins only rarely.
    """
    order = np.argsort(spec.mu)
    pr_est = (r - most_probable_regret(spec)) / (
        np.sum(spec.sigma2) * (spec.T + spec.K) / spec.K
    )
    starts = []
    with np.errstate(all="ignore"):
        for m in order[:-1]:
            ps_base = np.zeros((spec.K, spec.T + 1))
            for k in range(spec.K):
                if spec.mu[k] > spec.mu[m]:
                    ps_base[k, 0] = -(spec.mu[k] - spec.mu[m] + 0.5) / spec.sigma2[k]
            for depth in (0.7, 1.0, 1.5):
                for pr0 in (0.0, pr_est):
                    ps = depth * ps_base
                    pn = np.zeros_like(ps)
                    n, s = _forward(ps, pn, np.asarray(pr0), spec, variant)
                    starts.append(_pack(s, n, ps, pn, pr0))
    return starts


def solve_saddle(
    spec: BanditSpec,
    r: float,
    multistarts: int = DEFAULT_MULTISTARTS,
    seeds: list[SaddleField] | None = None,
    variant: str = "simplified",
    tol: float = DEFAULT_TOL,
    dedup_tol: float = DEDUP_TOL,
    fp_sweeps: int = FP_SWEEPS,
    seed_base: int = 0,
    continue_from_mpv: bool = True,
    structured: bool = True,
) -> list[SaddleField]:
    """Find stationary configurations at regret r; ascending in action.

    Starts are the zero-conjugate configuration (walked from the most probable
    regret to r in steps of at most 2 when ``continue_from_mpv``), any caller
    seeds, the structured unlucky-branch starts, and ``multistarts`` uniform
    draws.  All go through the damped fixed-point phase together, then Newton
    refinement, nearest-first; starts that land next to an already-found
    solution are skipped.  Converged results are deduplicated (fields within
    ``dedup_tol``); the list may be empty if nothing converged.
    """
    _check_variant(variant)
    if spec.gamma <= 0:
        raise ValueError("saddle solve requires gamma > 0")

    starts = [_zeros_y(spec)]
    if continue_from_mpv:
        walked = _walk_from_mpv(spec, r, variant, tol)
        if walked is not None:
            starts.append(walked)
    for sol in seeds or []:
        starts.append(_y_from_field(sol))
    if structured:
        starts.extend(_structured_starts(spec, r, variant))
    for i in range(multistarts):
        starts.append(_random_start(spec, seed_base, i, variant))

    Z, fp_res = _fp_phase(np.stack(starts), spec, r, variant, fp_sweeps, ALPHA0)
    order = np.argsort(np.where(np.isfinite(fp_res), fp_res, np.inf))

    found: list[SaddleField] = []
    vecs: list[np.ndarray] = []
    for i in order:
        if not np.isfinite(fp_res[i]):
            continue
        z = Z[i]
        # a start already sitting on a found branch will only rediscover it
        if any(np.allclose(z, v, rtol=1e-3, atol=1e-3) for v in vecs):
            continue
        z2, res, ok = _newton(z, spec, r, variant, tol, max_iter=30)
        if not ok:
            continue
        cand = _field_from_y(z2, spec, r, variant, tol)
        if not cand.converged:
            continue
        vec = _y_from_field(cand)
        if any(np.allclose(vec, v, rtol=dedup_tol, atol=dedup_tol) for v in vecs):
            continue
        found.append(cand)
        vecs.append(vec)
    found.sort(key=lambda f: f.action)
    return found


def _walk_from_mpv(spec: BanditSpec, r: float, variant: str, tol: float):
    """Continuation of the zero-conjugate solution from r_mpv out to r."""
    r0 = most_probable_regret(spec)
    legs = int(np.ceil(abs(r - r0) / CONTINUATION_STEP))
    if legs <= 1:
        return None
    z = _zeros_y(spec)
    for ri in np.linspace(r0, r, legs + 1)[1:]:
        Z, _ = _fp_phase(z[None, :], spec, float(ri), variant, 20, ALPHA0)
        z, res, ok = _newton(Z[0], spec, float(ri), variant, tol, max_iter=30)
        if not ok:
            return None
    return z


def rate_curve(
    spec: BanditSpec,
    r_grid,
    multistarts: int = DEFAULT_MULTISTARTS,
    variant: str = "simplified",
    tol: float = DEFAULT_TOL,
    seed_base: int = 0,
    max_carry: int = 6,
) -> RateCurve:
    """Minimal-action rate curve I(r) = gamma * action over a regret grid.

    Two continuation passes run over the grid: outward from the point nearest
    the most probable regret (with fresh multistarts at every point), then
    back inward reusing the outer solutions as seeds, so branch families
    discovered anywhere get tracked across their whole range.  The minimal
    action per grid point over everything found wins.  Points where nothing
    converged are flagged, not dropped.
    """
    if spec.gamma <= 0:
        raise ValueError("rate curve requires gamma > 0")
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.ndim != 1 or r_grid.size == 0:
        raise ValueError("r_grid must be a non-empty 1-d array")
    if r_grid.size > 1 and np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must be strictly increasing")

    npts = r_grid.size
    best: list[SaddleField | None] = [None] * npts
    counts = np.zeros(npts, dtype=int)

    center = int(np.argmin(np.abs(r_grid - most_probable_regret(spec))))
    passes = [
        (range(center, npts), multistarts, True, FP_SWEEPS),
        (range(center - 1, -1, -1), multistarts, True, FP_SWEEPS),
        (range(npts - 1, center - 1, -1), 0, False, 8),
        (range(0, center), 0, False, 8),
    ]
    for sweep, nstarts, use_structured, sweeps in passes:
        carry: list[SaddleField] = []
        for i in sweep:
            seeds = carry + ([best[i]] if best[i] is not None else [])
            sols = solve_saddle(
                spec, float(r_grid[i]), multistarts=nstarts, seeds=seeds,
                variant=variant, tol=tol, seed_base=seed_base,
                continue_from_mpv=False, structured=use_structured,
                fp_sweeps=sweeps,
            )
            if sols:
                counts[i] = max(counts[i], len(sols))
                if best[i] is None or sols[0].action < best[i].action:
                    best[i] = sols[0]
                carry = sols[:max_carry]
            elif nstarts > 0:
                log.warning("no converged saddle at r=%g", r_grid[i])

    action = np.array([b.action if b else np.nan for b in best])
    ir = np.array([b.ir_hat if b else np.nan for b in best])
    res = np.array([b.residual if b else np.nan for b in best])
    conv = np.array([b is not None for b in best])
    rate = spec.gamma * action
    ok = np.nonzero(conv)[0]
    r_mpv = float(r_grid[ok[np.argmin(rate[ok])]]) if ok.size else float("nan")
    return RateCurve(
        r_grid=r_grid, action=action, rate=rate, n_solutions=counts,
        r_mpv=r_mpv, ir_hat=ir, residual=res, converged=conv,
    )


def detect_kinks(r, value, noise_floor: float = 1e-7) -> list[int]:
    """Concave corners of the curve: one index per branch crossover.

    A grid point is concave when its centered second difference falls below
    -10 * noise_floor * max(1, |value|); with the default floor this is far
    above solver noise yet far below any real branch crossing.  A crossover
    that is smoothed over several neighboring grid points must count once, so
    each maximal run of consecutive concave points is reported as a single
    kink (by its most concave member).
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(value, dtype=float)
    d2 = np.full(len(r), np.inf)
    for i in range(1, len(r) - 1):
        left = (v[i] - v[i - 1]) / (r[i] - r[i - 1])
        right = (v[i + 1] - v[i]) / (r[i + 1] - r[i])
        d2[i] = right - left
    concave = d2 < -10.0 * noise_floor * np.maximum(1.0, np.abs(v))
    kinks = []
    i = 0
    while i < len(r):
        if concave[i]:
            j = i
            while j + 1 < len(r) and concave[j + 1]:
                j += 1
            kinks.append(i + int(np.argmin(d2[i : j + 1])))
            i = j + 1
        else:
            i += 1
    return kinks


def convex_piece_count(curve: RateCurve, noise_floor: float = 1e-7) -> int:
    """Number of convex pieces of the converged part of a rate curve."""
    ok = curve.converged
    return len(detect_kinks(curve.r_grid[ok], curve.rate[ok], noise_floor)) + 1
