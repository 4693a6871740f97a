"""Classical predictor-corrector tracking with adaptive steps.

A step is an Euler prediction along the tangent followed by Newton
iterations at the new parameter. Failed steps are halved, successful
ones doubled up to ``|delta_p|``; the run stops with
``BifurcationDetected`` once the step drops below ``min_step``.
"""

import enum
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import NewtonDiverged, NonFiniteValue, SingularJacobian, SingularMatrix
from .linalg import lu_solve, norm2
from .system import PerturbationMask

__all__ = [
    "TrackerConfig",
    "PathPoint",
    "Status",
    "TrackReport",
    "euler_predict",
    "newton_correct",
    "track_traditional",
    "resolve_range",
]

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class TrackerConfig:
    """Knobs shared by both trackers.

    Parameters
    ----------
    delta_p : float
        Signed nominal step. Must point from the start to the end parameter.
    newton_tol : float
        Residual target for corrector convergence.
    newton_max_iter : int
        Newton updates allowed per corrector call.
    min_step : float
        Step floor of the classical tracker; falling below it is reported
        as a bifurcation.
    step_growth, step_shrink : float
        Step adaptation factors of the classical tracker.
    tol : float
        Accept threshold on the perturbed residual in the stochastic tracker.
    m_max : int or None
        Largest number of replaced equations, ``None`` meaning ``n - 1``.
    seed : int or None
        Seed of the mask generator.
    adaptive_tol, tol_growth, tol_max : bool, float, float
        When enabled, an exhausted m sweep multiplies ``tol`` by
        ``tol_growth`` (up to ``tol_max``) and starts over.
    contraction_max : float or None
        Newton is abandoned when an update is longer than this factor times
        the previous one. Keeps the corrector from hopping between branches.
    step_rtol, step_atol : float
        Newton stops once ``|du| <= step_rtol*|u| + step_atol``.
    mask_retries : int
        Distinct masks tried per m level before escalating.
    """

    delta_p: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 20
    min_step: float = 1e-7
    step_growth: float = 2.0
    step_shrink: float = 0.5
    tol: float = 1e-6
    m_max: Optional[int] = None
    seed: Optional[int] = None
    adaptive_tol: bool = False
    tol_growth: float = 10.0
    tol_max: float = 1e-2
    contraction_max: Optional[float] = 0.2
    step_rtol: float = 1e-10
    step_atol: float = 0.0
    mask_retries: int = 10

    def __post_init__(self):
        if not np.isfinite(self.delta_p) or self.delta_p == 0:
            raise ValueError("delta_p must be finite and nonzero")
        if not 0 < self.min_step < abs(self.delta_p):
            raise ValueError("need 0 < min_step < |delta_p|")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if not 0 < self.step_shrink < 1 < self.step_growth:
            raise ValueError("need 0 < step_shrink < 1 < step_growth")
        if self.tol <= 0 or self.newton_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.m_max is not None and self.m_max < 1:
            raise ValueError("m_max must be at least 1")
        if self.mask_retries < 1:
            raise ValueError("mask_retries must be at least 1")
        if self.adaptive_tol and self.tol_growth <= 1:
            raise ValueError("tol_growth must exceed 1")
        if self.contraction_max is not None and self.contraction_max <= 0:
            raise ValueError("contraction_max must be positive")

    def with_(self, **changes):
        return replace(self, **changes)

    def resolved_m_max(self, n):
        top = n - 1
        return top if self.m_max is None else min(int(self.m_max), top)


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    BIFURCATION = "BifurcationDetected"
    FAILED = "Failed"

    def __str__(self):
        return self.value


@dataclass
class PathPoint:
    """An accepted point; ``residual`` is always measured on the unperturbed system."""

    p: float
    u: np.ndarray
    residual: float
    newton_iters: int = 0
    mask: Optional[PerturbationMask] = None
    m_used: int = 0


@dataclass
class TrackReport:
    method: str
    trace: list
    status: Status
    steps_accepted: int = 0
    steps_rejected: int = 0
    newton_total: int = 0
    wall_time: float = 0.0
    final_step: Optional[float] = None
    reanchored: Optional[PathPoint] = None
    reanchor_converged: Optional[bool] = None
    failed_at: Optional[int] = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def steps(self):
        """Number of points on the trace, start point included."""
        return len(self.trace)

    @property
    def last(self):
        return self.trace[-1]

    @property
    def endpoint(self):
        """Re-anchored endpoint when available, else the last trace point."""
        return self.reanchored if self.reanchored is not None else self.trace[-1]

    def summary(self):
        return {
            "method": self.method,
            "status": str(self.status),
            "steps": self.steps,
            "accepted": self.steps_accepted,
            "rejected": self.steps_rejected,
            "newton_total": self.newton_total,
            "final_p": self.last.p,
            "wall_time": self.wall_time,
        }


def _solve(a, b):
    try:
        return lu_solve(a, b)
    except SingularMatrix as exc:
        raise SingularJacobian(str(exc), column=exc.column) from None


def euler_predict(sys, u, p, dp):
    """Tangent step: ``u + du`` with ``F_u du = -F_p dp``.

    Raises
    ------
    SingularJacobian
        If ``F_u(u, p)`` is numerically singular.
    """
    u = sys.coerce(u)
    du = _solve(sys.eval_Fu(u, p), -sys.eval_Fp(u, p) * dp)
    return u + du


_UNSET = object()


def newton_correct(sys, u0, p, cfg, contraction=_UNSET, max_iter=None):
    """Newton's method on ``sys`` at fixed ``p``.

    The iteration stops when the update is negligible relative to the
    iterate and either the residual is below ``cfg.newton_tol`` or the
    update has reached rounding level. The final negligible update is
    not applied, so an exact root comes back unchanged after 0 iterations.

    Parameters
    ----------
    contraction : float or None, optional
        Overrides ``cfg.contraction_max``; ``None`` disables the test.
    max_iter : int, optional
        Overrides ``cfg.newton_max_iter``.

    Returns
    -------
    u : ndarray
    iters : int
        Updates applied.

    Raises
    ------
    NewtonDiverged
        Budget exhausted, residual grown by more than 1e6, loss of
        contraction, or non-finite iterates.
    SingularJacobian
    """
    kappa = cfg.contraction_max if contraction is _UNSET else contraction
    budget = cfg.newton_max_iter if max_iter is None else int(max_iter)
    u = sys.coerce(u0)
    r0 = None
    prev = None
    for k in range(budget + 1):
        try:
            r = sys.eval_F(u, p)
        except NonFiniteValue:
            if k == 0:
                raise
            raise NewtonDiverged("residual became non-finite", k) from None
        nr = norm2(r)
        if r0 is None:
            r0 = nr
        elif nr > 1e6 * max(r0, 1e-300):
            raise NewtonDiverged(f"residual grew from {r0:.3g} to {nr:.3g}", k)
        try:
            du = _solve(sys.eval_Fu(u, p), -r)
        except NonFiniteValue:
            if k == 0:
                raise
            raise NewtonDiverged("Jacobian became non-finite", k) from None
        nd = norm2(du)
        nu = norm2(u)
        if nd <= cfg.step_rtol * nu + cfg.step_atol and (nr < cfg.newton_tol or nd <= 64 * _EPS * nu):
            return u, k
        if k == budget:
            break
        if kappa is not None and prev is not None and nd > kappa * prev:
            raise NewtonDiverged(f"updates stopped contracting ({nd:.3g} > {kappa}*{prev:.3g})", k)
        prev = nd
        u = u + du
        if not np.all(np.isfinite(u)):
            raise NewtonDiverged("iterate became non-finite", k + 1)
    raise NewtonDiverged(f"no convergence in {budget} iterations", budget)


def resolve_range(sys, cfg, p_start=None, p_end=None):
    a = sys.param_range[0] if p_start is None else float(p_start)
    b = sys.param_range[1] if p_end is None else float(p_end)
    if a == b:
        raise ValueError("empty parameter interval")
    if np.sign(b - a) != np.sign(cfg.delta_p):
        raise ValueError(f"delta_p={cfg.delta_p} points away from the end parameter {b} (start {a})")
    return a, b


def _check_start(sys, u0, a, cfg):
    u0 = sys.coerce(u0)
    r = norm2(sys.eval_F(u0, a))
    if not r < cfg.tol:
        raise ValueError(f"start point is not on the path: |F(u0, {a})| = {r:.3g} >= tol {cfg.tol}")
    return u0, r


def track_traditional(sys, u0, cfg, p_start=None, p_end=None):
    """Adaptive predictor-corrector tracking from ``p_start`` to ``p_end``.

    Defaults to ``sys.param_range``. Returns a :class:`TrackReport` whose
    trace starts with the given point.
    """
    t0 = time.perf_counter()
    a, b = resolve_range(sys, cfg, p_start, p_end)
    u, r = _check_start(sys, u0, a, cfg)
    direction = np.sign(cfg.delta_p)
    span = abs(cfg.delta_p)
    report = TrackReport("traditional", [PathPoint(a, u, r)], Status.COMPLETED)
    p = a
    dp = cfg.delta_p
    endtol = span * 1e-12
    try:
        while abs(b - p) > endtol:
            step = dp
            last = abs(step) >= abs(b - p)
            if last:
                step = b - p
            p_new = b if last else p + step
            try:
                guess = euler_predict(sys, u, p, step)
                u_new, iters = newton_correct(sys, guess, p_new, cfg)
                res = norm2(sys.eval_F(u_new, p_new))
                if not res < cfg.tol:
                    raise NewtonDiverged("accepted residual above tol", iters)
            except (NewtonDiverged, SingularJacobian) as exc:
                report.steps_rejected += 1
                report.newton_total += getattr(exc, "iterations", 0)
                dp = dp * cfg.step_shrink
                if abs(dp) < cfg.min_step:
                    report.status = Status.BIFURCATION
                    report.message = f"step fell below {cfg.min_step:g} after p={p:.17g}"
                    break
                continue
            report.steps_accepted += 1
            report.newton_total += iters
            p, u = p_new, u_new
            report.trace.append(PathPoint(p, u, res, iters))
            dp = direction * min(abs(dp) * cfg.step_growth, span)
    except NonFiniteValue as exc:
        report.status = Status.FAILED
        report.failed_at = len(report.trace)
        report.message = str(exc)
    report.final_step = float(dp)
    report.wall_time = time.perf_counter() - t0
    return report
