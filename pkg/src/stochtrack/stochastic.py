"""Fixed-grid stochastic tracking by random equation replacement.

Each grid step solves a perturbed system in which ``m`` equations are
swapped for constraints that freeze ``m`` variables at their previous
values. ``m`` starts at 1 and grows only when every mask tried at the
current level fails.
"""

import time

import numpy as np

from .errors import NewtonDiverged, NonFiniteValue, SingularJacobian, StepFailed
from .linalg import norm2
from .system import mask_space_size, perturb, sample_mask
from .tracker import (
    PathPoint,
    Status,
    TrackReport,
    _check_start,
    euler_predict,
    newton_correct,
    resolve_range,
)

__all__ = ["step_stochastic", "track_stochastic", "reanchor", "polish", "grid"]

REANCHOR_MAX_ITER = 50


def grid(a, b, dp):
    """Arithmetic grid ``a + k*dp`` ending exactly at ``b``.

    When ``dp`` does not divide ``b - a`` (to 1e-9 relative), the final
    interval is shortened to land on ``b``.
    """
    ratio = (b - a) / dp
    N = int(round(ratio))
    if N < 1 or abs(N - ratio) > 1e-9 * max(1.0, abs(ratio)):
        N = int(np.ceil(ratio - 1e-9))
    pts = [a + k * dp for k in range(N)] + [b]
    return pts


def _distinct_masks(n, m, anchor, rng, budget):
    seen = set()
    for _ in range(budget):
        while True:
            mask = sample_mask(n, m, anchor, rng)
            key = (mask.I, mask.J)
            if key not in seen:
                seen.add(key)
                break
        yield mask


def step_stochastic(sys, u_prev, p_prev, p_next, cfg, rng, stats=None):
    """Advance one grid interval on randomly perturbed systems.

    For ``m = 1 .. m_max`` up to ``cfg.mask_retries`` distinct masks are
    drawn (fewer if the mask space is smaller). Each perturbed system is
    predicted from ``u_prev`` with its own derivatives and corrected by
    Newton; the first iterate with ``|F~| < tol`` is accepted.

    Returns
    -------
    u : ndarray
    mask : PerturbationMask
    m_used : int

    Raises
    ------
    StepFailed
        When every mask at every level was rejected.
    """
    n = sys.n
    u_prev = sys.coerce(u_prev)
    if n < 2:
        raise ValueError("random equation replacement needs n >= 2")
    m_max = cfg.resolved_m_max(n)
    tol = cfg.tol
    if stats is None:
        stats = {}
    stats.setdefault("attempts", 0)
    stats.setdefault("newton", 0)
    while True:
        for m in range(1, m_max + 1):
            budget = min(cfg.mask_retries, mask_space_size(n, m))
            for mask in _distinct_masks(n, m, u_prev, rng, budget):
                stats["attempts"] += 1
                psys = perturb(sys, mask)
                try:
                    guess = euler_predict(psys, u_prev, p_prev, p_next - p_prev)
                    u, iters = newton_correct(psys, guess, p_next, cfg, contraction=None)
                except (NewtonDiverged, SingularJacobian, NonFiniteValue) as exc:
                    stats["newton"] += getattr(exc, "iterations", 0)
                    continue
                stats["newton"] += iters
                stats["last_iters"] = iters
                if norm2(psys.eval_F(u, p_next)) < tol:
                    stats["tol"] = tol
                    return u, mask, m
        if not cfg.adaptive_tol or tol * cfg.tol_growth > cfg.tol_max * (1 + 1e-12):
            break
        tol *= cfg.tol_growth
    raise StepFailed(f"no mask accepted at p={p_next:.17g} (m_max={m_max}, tol={tol:g})", p=p_next)


def polish(sys, u, p, cfg):
    """Full-system Newton at fixed ``p``; returns ``(u, iters, converged)``."""
    u = sys.coerce(u)
    try:
        v, iters = newton_correct(sys, u, p, cfg, contraction=None, max_iter=max(cfg.newton_max_iter, REANCHOR_MAX_ITER))
    except (NewtonDiverged, SingularJacobian, NonFiniteValue):
        return u, 0, False
    return v, iters, True


def reanchor(sys, u, p, cfg):
    """Project a stochastic endpoint back onto ``F(u, p) = 0``.

    Returns the input unchanged when Newton fails; use :func:`polish`
    to learn whether it converged.
    """
    return polish(sys, u, p, cfg)[0]


def track_stochastic(sys, u0, cfg, p_start=None, p_end=None, rng=None, do_reanchor=True):
    """Walk the fixed grid with :func:`step_stochastic`, then re-anchor.

    ``report.trace`` holds the grid points ``k = 0..N``; the polished
    endpoint is stored separately in ``report.reanchored``.
    """
    t0 = time.perf_counter()
    a, b = resolve_range(sys, cfg, p_start, p_end)
    u, r = _check_start(sys, u0, a, cfg)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    report = TrackReport("stochastic", [PathPoint(a, u, r)], Status.COMPLETED)
    pts = grid(a, b, cfg.delta_p)
    stats = {}
    p = a
    for k in range(1, len(pts)):
        p_next = pts[k]
        before = stats.get("attempts", 0)
        try:
            u, mask, m = step_stochastic(sys, u, p, p_next, cfg, rng, stats)
            res = norm2(sys.eval_F(u, p_next))
        except (StepFailed, NonFiniteValue) as exc:
            report.steps_rejected += stats.get("attempts", 0) - before
            report.status = Status.FAILED
            report.failed_at = k
            report.message = str(exc)
            break
        report.steps_rejected += stats["attempts"] - before - 1
        report.steps_accepted += 1
        p = p_next
        report.trace.append(PathPoint(p, u, res, stats.get("last_iters", 0), mask, m))
    report.newton_total = stats.get("newton", 0)
    if report.status is Status.COMPLETED and do_reanchor:
        v, iters, ok = polish(sys, u, p, cfg)
        report.newton_total += iters
        report.reanchored = PathPoint(p, v, norm2(sys.eval_F(v, p)), iters)
        report.reanchor_converged = ok
    report.wall_time = time.perf_counter() - t0
    return report
