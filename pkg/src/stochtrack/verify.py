"""Independent checks: derivative oracles, closed-form roots, scaling and
convergence-order experiments, and the additive-noise toy illustration."""

from dataclasses import dataclass, field

import numpy as np

from .linalg import finite_diff_jacobian, lu_solve, norm2, norm_inf
from .problems import get_problem
from .stochastic import track_stochastic
from .tracker import Status, TrackerConfig, newton_correct, track_traditional

__all__ = [
    "JacobianReport",
    "check_jacobians",
    "ex1_target_roots",
    "ex1_grid_search",
    "ScalingResult",
    "scaling_experiment",
    "ProbeResult",
    "newton_order_probe",
    "fig1_demo",
]

_SQEPS = np.sqrt(np.finfo(np.float64).eps)


def _relerr(a, b):
    # unit floor on the scale: entries near zero are compared absolutely
    return norm_inf(np.asarray(a) - np.asarray(b)) / max(norm_inf(b), 1.0)


@dataclass
class JacobianReport:
    name: str
    max_err_u: float
    max_err_p: float
    num_points: int
    tol: float = 1e-5

    @property
    def passed(self):
        return self.max_err_u < self.tol and self.max_err_p < self.tol


def check_jacobians(sys, num_points=20, rng=None, center=None, radius=1.0, p_range=None, tol=1e-5):
    """Compare analytic ``F_u``, ``F_p`` against central differences.

    Points are drawn uniformly in a box of half-width ``radius`` around
    ``center`` (zeros by default) with ``p`` uniform over the parameter
    range. Errors are max-norm relative errors.
    """
    rng = np.random.default_rng(rng)
    n = sys.n
    c = np.zeros(n, dtype=sys.dtype) if center is None else sys.coerce(center)
    lo, hi = sorted(sys.param_range if p_range is None else p_range)
    eu = ep = 0.0
    for _ in range(num_points):
        u = c + rng.uniform(-radius, radius, n)
        if sys.field == "complex":
            u = u + 1j * rng.uniform(-radius, radius, n)
        p = rng.uniform(lo, hi)
        fd_u = finite_diff_jacobian(lambda x: sys.eval_F(x, p), u)
        eu = max(eu, _relerr(sys.eval_Fu(u, p), fd_u))
        h = _SQEPS * max(1.0, abs(p))
        fd_p = (sys.eval_F(u, p + h) - sys.eval_F(u, p - h)) / (2 * h)
        ep = max(ep, _relerr(sys.eval_Fp(u, p), fd_p))
    return JacobianReport(sys.name, eu, ep, num_points, tol)


# -- example 1 roots -------------------------------------------------------


def _ex1_target_residual(w):
    x, y, z = w
    return np.array([x * x + y * y + z * z - 1, x * x - y * y - z * z, x + y + z])


def ex1_target_roots():
    """The four roots of the example-1 target system.

    Adding and subtracting the first two rows gives ``x**2 = 1/2`` and
    ``y**2 + z**2 = 1/2``; with ``y + z = -x`` this forces ``yz = 0``.
    """
    s = 1 / np.sqrt(2.0)
    roots = [
        np.array([s, 0.0, -s]),
        np.array([-s, 0.0, s]),
        np.array([s, -s, 0.0]),
        np.array([-s, s, 0.0]),
    ]
    for r in roots:
        res = norm_inf(_ex1_target_residual(r))
        if not res < 1e-14:
            raise AssertionError(f"closed-form root {r} has residual {res}")
    return [r.astype(np.complex128) for r in roots]


def _ex1_batch(W, t):
    x, y, z = W[:, 0], W[:, 1], W[:, 2]
    F = np.stack([
        t * (x * x + y * y + z * z - 1) + (1 - t) * (x * x - 1),
        t * (x * x - y * y - z * z) + (1 - t) * (y * y - 1),
        t * (x + y + z) + (1 - t) * (z - 1),
    ], axis=1)
    J = np.empty((W.shape[0], 3, 3))
    J[:, 0] = np.stack([2 * x, 2 * t * y, 2 * t * z], axis=1)
    J[:, 1] = np.stack([2 * t * x, -2 * t * y + 2 * (1 - t) * y, -2 * t * z], axis=1)
    J[:, 2] = np.stack([np.full_like(x, t), np.full_like(x, t), np.ones_like(x)], axis=1)
    return F, J


def _solve3(J, b):
    # Cramer's rule, batched; rows with a tiny determinant are flagged.
    c0 = np.cross(J[:, 1], J[:, 2])
    c1 = np.cross(J[:, 2], J[:, 0])
    c2 = np.cross(J[:, 0], J[:, 1])
    det = np.einsum("ij,ij->i", J[:, 0], c0)
    ok = np.abs(det) > 1e-14
    safe = np.where(ok, det, 1.0)
    x = (c0 * b[:, :1] + c1 * b[:, 1:2] + c2 * b[:, 2:3]) / safe[:, None]
    return x, ok


def ex1_grid_search(t=1.0, lo=-2.0, hi=2.0, resolution=0.05, iters=30, tol=1e-12):
    """Real roots of the example-1 homotopy at ``t`` by brute-force Newton.

    Every node of the cubic grid is a Newton start; converged points inside
    the box are deduplicated to 1e-6.
    """
    k = int(round((hi - lo) / resolution)) + 1
    g = np.linspace(lo, hi, k)
    W = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    alive = np.ones(W.shape[0], dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            F, J = _ex1_batch(W, t)
            dx, ok = _solve3(J, -F)
            alive &= ok & np.all(np.isfinite(dx), axis=1)
            W = np.where(alive[:, None], W + dx, W)
        F, _ = _ex1_batch(W, t)
        good = alive & (np.max(np.abs(F), axis=1) < tol) & np.all(np.abs(W) <= hi + 1e-9, axis=1)
    found = []
    for w in W[good]:
        if not any(np.max(np.abs(w - f)) < 1e-6 for f in found):
            found.append(w)
    return sorted(found, key=tuple)


# -- scaling experiment ----------------------------------------------------


@dataclass
class ScalingResult:
    ns: list
    D: list
    slope: float
    failures: dict = field(default_factory=dict)

    @property
    def nonincreasing(self):
        return all(b <= a for a, b in zip(self.D, self.D[1:]))

    def rows(self):
        return [(n, d, self.failures.get(n, 0)) for n, d in zip(self.ns, self.D)]


def scaling_experiment(ns=(10, 20, 40, 80), num_seeds=20, p_stop=10.0, base_seed=0,
                       delta_p=-1.0, m=1, branch=0):
    """Squared deviation of the seed-averaged stochastic endpoint.

    For each grid size both trackers start from the same point of
    example 2 and stop at ``p_stop``. ``D(n) = |mean_s(u~_K) - u_K|_2**2``
    uses the raw stochastic iterate (no re-anchoring) and the classical
    endpoint as reference. ``slope`` is the least-squares slope of
    ``log D`` against ``log n``.
    """
    Ds = []
    failures = {}
    for n in ns:
        pr = get_problem("example2", n)
        sys, u0 = pr.system, pr.branch(branch).u0
        cfg = TrackerConfig(delta_p=delta_p, m_max=m)
        ref = track_traditional(sys, u0, cfg, p_end=p_stop)
        if ref.status is not Status.COMPLETED:
            raise RuntimeError(f"reference run stopped at p={ref.last.p} for n={n}")
        ends = []
        for s in range(num_seeds):
            rep = track_stochastic(sys, u0, cfg.with_(seed=base_seed + s), p_end=p_stop, do_reanchor=False)
            if rep.status is Status.COMPLETED:
                ends.append(rep.last.u)
            else:
                failures[n] = failures.get(n, 0) + 1
        if not ends:
            Ds.append(float("nan"))
            continue
        Ds.append(float(norm2(np.mean(ends, axis=0) - ref.last.u) ** 2))
    logn = np.log(np.asarray(ns, dtype=float))
    logd = np.log(np.asarray(Ds))
    slope = float(np.polyfit(logn, logd, 1)[0]) if np.all(np.isfinite(logd)) else float("nan")
    return ScalingResult(list(ns), Ds, slope, failures)


# -- Newton order ----------------------------------------------------------


@dataclass
class ProbeResult:
    q: float
    beta: float
    errors: list

    @property
    def iterations(self):
        return max(len(e) - 1 for e in self.errors)


def newton_order_probe(sys, root, p, rng=None, delta=1e-2, directions=5, scales=5, max_iter=12, floor=None):
    """Estimate the order ``q`` in ``e_{i+1} ~ beta * e_i**q`` near ``root``.

    The root is first polished. For each random unit direction ``d`` Newton
    is started at ``root + s*d`` for ``s`` geometrically spaced from
    ``delta`` down to ``delta/100`` and the errors to the root are recorded.
    ``q`` is the slope of ``log e_1`` against ``log e_0`` with a separate
    intercept per direction, since ``beta`` depends on the direction.
    Successor errors below ``floor`` (default ``1e-12*max(1, |root|)``)
    are rounding-dominated and excluded.
    """
    rng = np.random.default_rng(rng)
    cfg = TrackerConfig(delta_p=1.0, contraction_max=None, newton_max_iter=50)
    root, _ = newton_correct(sys, root, p, cfg)
    scale = max(1.0, norm2(root))
    floor = 1e-12 * scale if floor is None else floor
    seqs = []
    xs, ys = [], []
    for _ in range(directions):
        d = rng.standard_normal(sys.n)
        if sys.field == "complex":
            d = d + 1j * rng.standard_normal(sys.n)
        d = d / norm2(d)
        px, py = [], []
        for s in delta * np.logspace(0, -2, scales):
            u = root + s * d
            errs = [norm2(u - root)]
            for _ in range(max_iter):
                u = u + lu_solve(sys.eval_Fu(u, p), -sys.eval_F(u, p))
                errs.append(norm2(u - root))
                if errs[-1] < floor:
                    break
            seqs.append(errs)
            if errs[1] > floor:
                px.append(np.log(errs[0]))
                py.append(np.log(errs[1]))
        if len(px) >= 2:
            xs.append(np.array(px))
            ys.append(np.array(py))
    if not xs:
        return ProbeResult(float("nan"), float("nan"), seqs)
    xc = np.concatenate([x - x.mean() for x in xs])
    yc = np.concatenate([y - y.mean() for y in ys])
    q = float(xc @ yc / (xc @ xc))
    logb = np.median([y.mean() - q * x.mean() for x, y in zip(xs, ys)])
    return ProbeResult(q, float(np.exp(logb)), seqs)


# -- additive-noise illustration ------------------------------------------


@dataclass
class Fig1Demo:
    p: np.ndarray
    xi: np.ndarray
    curves: np.ndarray  # shape (2*samples, len(p)), rows +sample, -sample


def fig1_demo(sigma=0.1, num_samples=8, rng=None, num_p=201):
    """Curves ``x = +-(p**3 + xi)`` with one ``xi ~ N(0, sigma)`` per sample.

    ``sigma`` is a standard deviation.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(rng)
    p = np.linspace(-1.0, 1.0, num_p)
    xi = rng.normal(0.0, sigma, num_samples) if sigma > 0 else np.zeros(num_samples)
    curves = np.empty((2 * num_samples, num_p))
    for s in range(num_samples):
        curves[2 * s] = p**3 + xi[s]
        curves[2 * s + 1] = -(p**3 + xi[s])
    return Fig1Demo(p, xi, curves)
