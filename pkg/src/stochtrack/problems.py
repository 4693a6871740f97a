"""Built-in benchmark systems and their start solutions.

* ``toy``: ``x**2 - p**6`` on ``p in [-1, 1]``, two paths ``x = +-p**3``
  crossing at the origin.
* ``example1``: a three-variable total-degree homotopy over the complex field.
* ``example2``: finite differences for ``u'' = u**2 (u**2 - p)`` on (0, 1)
  with ``u'(0) = 0``, ``u(1) = 0``, tracked from ``p = 14`` down to 2.
* ``example3``: steady Schnakenberg reaction-diffusion on [0, 1] with no-flux
  ends, parameter ``d`` (v diffusion) tracked from 50 down to 35.

Nonconstant start solutions of examples 2 and 3 are cached as hex-float
fixtures under ``stochtrack/data``; other grid sizes are solved on demand.
"""

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import SingularMatrix
from .linalg import lu_solve, norm2, norm_inf
from .system import ParametricSystem

__all__ = [
    "Branch",
    "ProblemSpec",
    "PROBLEMS",
    "make_toy",
    "make_example1",
    "make_example2",
    "make_example3",
    "get_problem",
    "damped_newton",
    "write_fixture",
    "read_fixture",
    "build_fixtures",
]

EX3_A = 1.0 / 3.0
EX3_B = 2.0 / 3.0
EX3_ETA = 50.0


# -- stencil kernels -------------------------------------------------------


@njit
def _ex2_residual_nb(u, p, inv_h2):
    N = u.shape[0]
    out = np.empty(N)
    for i in range(N):
        left = u[i] if i == 0 else u[i - 1]
        right = u[i + 1] if i < N - 1 else 0.0
        lap = (left - 2.0 * u[i] + right) * inv_h2
        out[i] = lap - u[i] * u[i] * (u[i] * u[i] - p)
    return out


@njit
def _ex2_jacobian_nb(u, p, inv_h2):
    N = u.shape[0]
    A = np.zeros((N, N))
    for i in range(N):
        diag = -2.0 * inv_h2
        if i == 0:
            diag = -inv_h2
        A[i, i] = diag - (4.0 * u[i] ** 3 - 2.0 * p * u[i])
        if i > 0:
            A[i, i - 1] = inv_h2
        if i < N - 1:
            A[i, i + 1] = inv_h2
    return A


def _ex2_residual_np(u, p, inv_h2):
    lap = np.empty_like(u)
    lap[0] = u[1] - u[0]
    lap[1:-1] = u[:-2] - 2.0 * u[1:-1] + u[2:]
    lap[-1] = u[-2] - 2.0 * u[-1]
    return lap * inv_h2 - u * u * (u * u - p)


def _ex2_jacobian_np(u, p, inv_h2):
    N = u.shape[0]
    A = np.zeros((N, N))
    idx = np.arange(N)
    A[idx, idx] = -2.0 * inv_h2
    A[0, 0] = -inv_h2
    A[idx[1:], idx[:-1]] = inv_h2
    A[idx[:-1], idx[1:]] = inv_h2
    A[idx, idx] -= 4.0 * u**3 - 2.0 * p * u
    return A


@njit
def _neumann_lap_nb(w, inv_h2):
    M = w.shape[0]
    out = np.empty(M)
    out[0] = 2.0 * (w[1] - w[0]) * inv_h2
    out[M - 1] = 2.0 * (w[M - 2] - w[M - 1]) * inv_h2
    for i in range(1, M - 1):
        out[i] = (w[i - 1] - 2.0 * w[i] + w[i + 1]) * inv_h2
    return out


@njit
def _ex3_residual_nb(x, d, inv_h2, a, b, eta):
    M = x.shape[0] // 2
    u = x[:M]
    v = x[M:]
    lu = _neumann_lap_nb(u, inv_h2)
    lv = _neumann_lap_nb(v, inv_h2)
    out = np.empty(2 * M)
    for i in range(M):
        uuv = u[i] * u[i] * v[i]
        out[i] = lu[i] + eta * (a - u[i] + uuv)
        out[M + i] = d * lv[i] + eta * (b - uuv)
    return out


@njit
def _ex3_jacobian_nb(x, d, inv_h2, eta):
    M = x.shape[0] // 2
    A = np.zeros((2 * M, 2 * M))
    for i in range(M):
        ui = x[i]
        vi = x[M + i]
        A[i, i] = -2.0 * inv_h2 + eta * (-1.0 + 2.0 * ui * vi)
        A[i, M + i] = eta * ui * ui
        A[M + i, i] = -2.0 * eta * ui * vi
        A[M + i, M + i] = -2.0 * d * inv_h2 - eta * ui * ui
        if i == 0:
            A[0, 1] = 2.0 * inv_h2
            A[M, M + 1] = 2.0 * d * inv_h2
        elif i == M - 1:
            A[i, i - 1] = 2.0 * inv_h2
            A[M + i, M + i - 1] = 2.0 * d * inv_h2
        else:
            A[i, i - 1] = inv_h2
            A[i, i + 1] = inv_h2
            A[M + i, M + i - 1] = d * inv_h2
            A[M + i, M + i + 1] = d * inv_h2
    return A


def _neumann_lap_np(w, inv_h2):
    out = np.empty_like(w)
    out[0] = 2.0 * (w[1] - w[0])
    out[-1] = 2.0 * (w[-2] - w[-1])
    out[1:-1] = w[:-2] - 2.0 * w[1:-1] + w[2:]
    return out * inv_h2


def _ex3_residual_np(x, d, inv_h2, a, b, eta):
    M = x.shape[0] // 2
    u, v = x[:M], x[M:]
    uuv = u * u * v
    return np.concatenate([
        _neumann_lap_np(u, inv_h2) + eta * (a - u + uuv),
        d * _neumann_lap_np(v, inv_h2) + eta * (b - uuv),
    ])


def _neumann_lap_matrix(M, inv_h2):
    L = np.zeros((M, M))
    idx = np.arange(M)
    L[idx, idx] = -2.0
    L[idx[1:], idx[:-1]] = 1.0
    L[idx[:-1], idx[1:]] = 1.0
    L[0, 1] = 2.0
    L[-1, -2] = 2.0
    return L * inv_h2


def _ex3_jacobian_np(x, d, inv_h2, eta):
    M = x.shape[0] // 2
    u, v = x[:M], x[M:]
    L = _neumann_lap_matrix(M, inv_h2)
    A = np.zeros((2 * M, 2 * M))
    A[:M, :M] = L + np.diag(eta * (-1.0 + 2.0 * u * v))
    A[:M, M:] = np.diag(eta * u * u)
    A[M:, :M] = np.diag(-2.0 * eta * u * v)
    A[M:, M:] = d * L - np.diag(eta * u * u)
    return A


STENCILS = {
    "numba": {
        "ex2_residual": _ex2_residual_nb,
        "ex2_jacobian": _ex2_jacobian_nb,
        "ex3_residual": _ex3_residual_nb,
        "ex3_jacobian": _ex3_jacobian_nb,
        "neumann_lap": _neumann_lap_nb,
    },
    "numpy": {
        "ex2_residual": _ex2_residual_np,
        "ex2_jacobian": _ex2_jacobian_np,
        "ex3_residual": _ex3_residual_np,
        "ex3_jacobian": _ex3_jacobian_np,
        "neumann_lap": _neumann_lap_np,
    },
}


def _kernels(backend):
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    return STENCILS[backend]


# -- systems ---------------------------------------------------------------


def make_toy():
    """``x**2 - p**6`` with ``p`` from -1 to 1."""
    return ParametricSystem(
        1,
        lambda x, p: x * x - p**6,
        lambda x, p: np.array([[2.0 * x[0]]]),
        lambda x, p: np.array([-6.0 * p**5]),
        (-1.0, 1.0),
        name="toy",
    )


def _ex1_target(w):
    x, y, z = w
    return np.array([x * x + y * y + z * z - 1, x * x - y * y - z * z, x + y + z])


def _ex1_start(w):
    x, y, z = w
    return np.array([x * x - 1, y * y - 1, z - 1])


def make_example1():
    """Total-degree homotopy ``t*G + (1 - t)*S`` in three complex unknowns."""

    def F(w, t):
        return t * _ex1_target(w) + (1 - t) * _ex1_start(w)

    def J(w, t):
        x, y, z = w
        gt = np.array([[2 * x, 2 * y, 2 * z], [2 * x, -2 * y, -2 * z], [1, 1, 1]])
        st = np.array([[2 * x, 0, 0], [0, 2 * y, 0], [0, 0, 1]])
        return t * gt + (1 - t) * st

    def Ft(w, t):
        return _ex1_target(w) - _ex1_start(w)

    return ParametricSystem(3, F, J, Ft, (0.0, 1.0), field="complex", name="example1")


def make_example2(n, backend=None):
    """Discretized boundary value problem with ``n - 1`` interior unknowns.

    The first row uses the one-sided ghost ``u_0 = u_1``, so it reads
    ``(u_2 - u_1)/h**2``; the last row uses the Dirichlet value ``u_n = 0``.
    """
    n = int(n)
    if n < 3:
        raise ValueError("example2 needs n >= 3")
    inv_h2 = float(n) ** 2
    k = _kernels(backend)
    res, jac = k["ex2_residual"], k["ex2_jacobian"]
    return ParametricSystem(
        n - 1,
        lambda u, p: res(u, p, inv_h2),
        lambda u, p: jac(u, p, inv_h2),
        lambda u, p: u * u,
        (14.0, 2.0),
        name=f"example2(n={n})",
    )


def make_example3(n, a=EX3_A, b=EX3_B, eta=EX3_ETA, backend=None):
    """Discretized Schnakenberg steady state with ``2(n + 1)`` unknowns.

    The state stacks ``u_1..u_{n+1}`` and ``v_1..v_{n+1}``; the boundary rows
    use the mirrored ghost ``(2 w_2 - 2 w_1)/h**2``. The parameter ``d``
    scales the v diffusion only.
    """
    n = int(n)
    if n < 2:
        raise ValueError("example3 needs n >= 2")
    inv_h2 = float(n) ** 2
    M = n + 1
    a, b, eta = float(a), float(b), float(eta)
    k = _kernels(backend)
    res, jac, lap = k["ex3_residual"], k["ex3_jacobian"], k["neumann_lap"]

    def Fd(x, d):
        return np.concatenate([np.zeros(M), lap(x[M:], inv_h2)])

    return ParametricSystem(
        2 * M,
        lambda x, d: res(x, d, inv_h2, a, b, eta),
        lambda x, d: jac(x, d, inv_h2, eta),
        Fd,
        (50.0, 35.0),
        name=f"example3(n={n})",
    )


# -- start solutions -------------------------------------------------------


def damped_newton(sys, u, p, tol=1e-10, max_iter=200, min_lambda=1e-4):
    """Newton with residual-halving line search, for building start points.

    Returns ``None`` on failure. Stops once the residual is below ``tol``
    or the update has reached rounding level.
    """
    u = sys.coerce(u)
    eps = np.finfo(np.float64).eps
    for _ in range(max_iter):
        r = sys.eval_F(u, p)
        nr = norm2(r)
        try:
            du = lu_solve(sys.eval_Fu(u, p), -r)
        except SingularMatrix:
            return None
        if nr < tol and norm2(du) <= 1e-8 * max(norm2(u), 1.0):
            return u
        if norm2(du) <= 64 * eps * norm2(u):
            return u if nr < 1e-6 else None
        lam = 1.0
        while True:
            trial = u + lam * du
            rt = norm2(sys.eval_F(trial, p)) if np.all(np.isfinite(trial)) else np.inf
            if rt < (1 - lam / 2) * nr or lam <= min_lambda:
                break
            lam /= 2
        u = trial
        if not np.all(np.isfinite(u)):
            return None
    return None


@dataclass
class Branch:
    name: str
    u0: np.ndarray
    p: float
    residual: float = 0.0
    source: str = "analytic"


@dataclass
class ProblemSpec:
    name: str
    system: ParametricSystem
    params: dict
    branches: list = field(default_factory=list)

    def branch(self, index):
        if not 0 <= index < len(self.branches):
            raise IndexError(f"{self.name} has {len(self.branches)} branches, got index {index}")
        return self.branches[index]


def _ex2_seed(n, amp):
    x = np.arange(1, n) / n
    return amp * np.cos(np.pi * x / 2)


def _ex3_seed(n, sign):
    x = np.arange(n + 1) / n
    c = np.cos(np.pi * x)
    return np.concatenate([1 + sign * 0.2 * c, EX3_B - sign * 0.1 * c])


# (problem, branch) -> (seed builder, acceptance check)
_SEEDS = {
    ("example2", "lower"): (lambda n: _ex2_seed(n, 0.3), lambda u: 0.05 < u[0] < 1.0),
    ("example2", "upper"): (lambda n: _ex2_seed(n, 3.7), lambda u: u[0] > 2.0),
    ("example3", "upper"): (lambda n: _ex3_seed(n, 1.0), lambda u: u[0] > 1.05),
    ("example3", "lower"): (lambda n: _ex3_seed(n, -1.0), lambda u: u[0] < 0.95),
}

BRANCH_NAMES = {
    "toy": ["minus", "plus"],
    "example1": ["(1,1,1)", "(1,-1,1)", "(-1,1,1)", "(-1,-1,1)"],
    "example2": ["lower", "upper", "constant"],
    "example3": ["upper", "lower", "constant"],
}


def solve_branch(problem, branch, n):
    """Solve a nonconstant start point from its cosine seed."""
    seed, ok = _SEEDS[(problem, branch)]
    sys = make_example2(n) if problem == "example2" else make_example3(n)
    u = damped_newton(sys, seed(n), sys.param_range[0])
    if u is None or not ok(u):
        raise RuntimeError(f"could not solve the {branch} branch of {problem} at n={n}")
    return u


# -- fixtures --------------------------------------------------------------

DATA_DIR = "data"


def _fixture_name(problem, n, branch):
    return f"{problem}_n{n}_{branch}.txt"


def write_fixture(path, problem, params, p, branch, u, residual):
    """Write one start solution as a bit-exact hex-float text record."""
    u = np.asarray(u)
    lines = [
        f"problem {problem}",
        "params " + " ".join(f"{k}={v!r}" for k, v in params.items()),
        f"p {float(p).hex()}",
        f"branch {branch}",
        f"residual {float(residual).hex()}",
        f"field {'complex' if np.iscomplexobj(u) else 'real'}",
        f"size {u.shape[0]}",
    ]
    for x in u:
        if np.iscomplexobj(u):
            lines.append(f"{float(x.real).hex()} {float(x.imag).hex()}")
        else:
            lines.append(float(x).hex())
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def _parse_fixture(text):
    lines = text.splitlines()
    head = {}
    i = 0
    while i < len(lines):
        key, _, val = lines[i].partition(" ")
        head[key] = val
        i += 1
        if key == "size":
            break
    size = int(head["size"])
    body = lines[i : i + size]
    if head.get("field") == "complex":
        u = np.array([complex(float.fromhex(a), float.fromhex(b)) for a, b in (s.split() for s in body)])
    else:
        u = np.array([float.fromhex(s) for s in body])
    params = {}
    for tok in head.get("params", "").split():
        k, _, v = tok.partition("=")
        params[k] = float(v) if "." in v or "e" in v else int(v)
    return {
        "problem": head["problem"],
        "params": params,
        "p": float.fromhex(head["p"]),
        "branch": head["branch"],
        "residual": float.fromhex(head["residual"]),
        "u": u,
    }


def read_fixture(path):
    return _parse_fixture(Path(path).read_text(encoding="ascii"))


def _packaged_fixture(problem, n, branch):
    ref = resources.files("stochtrack").joinpath(DATA_DIR, _fixture_name(problem, n, branch))
    if not ref.is_file():
        return None
    return _parse_fixture(ref.read_text(encoding="ascii"))


FIXTURE_GRID = {"example2": [10, 20, 40, 80], "example3": [100]}


def build_fixtures(out_dir=None):
    """Solve and write every cached start solution; returns written paths."""
    if out_dir is None:
        out_dir = Path(__file__).resolve().parent / DATA_DIR
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for problem, ns in FIXTURE_GRID.items():
        for n in ns:
            for (prob, branch) in _SEEDS:
                if prob != problem:
                    continue
                u = solve_branch(problem, branch, n)
                sys = make_example2(n) if problem == "example2" else make_example3(n)
                p = sys.param_range[0]
                params = {"n": n} if problem == "example2" else {"n": n, "a": EX3_A, "b": EX3_B, "eta": EX3_ETA}
                path = out_dir / _fixture_name(problem, n, branch)
                write_fixture(path, problem, params, p, branch, u, norm_inf(sys.eval_F(u, p)))
                written.append(path)
    return written


def _branch_from_cache(problem, n, name, sys):
    rec = _packaged_fixture(problem, n, name)
    if rec is not None and rec["u"].shape == (sys.n,):
        return Branch(name, rec["u"], rec["p"], rec["residual"], "fixture")
    u = solve_branch(problem, name, n)
    p = sys.param_range[0]
    return Branch(name, u, p, norm_inf(sys.eval_F(u, p)), "solved")


def get_problem(name, n=None):
    """Build a problem with its start branches.

    ``n`` is the grid count for examples 2 (default 10) and 3 (default 100).
    """
    if name == "toy":
        sys = make_toy()
        branches = [Branch("minus", np.array([-1.0]), -1.0), Branch("plus", np.array([1.0]), -1.0)]
        return ProblemSpec(name, sys, {}, branches)
    if name == "example1":
        sys = make_example1()
        branches = []
        for label, (x, y) in zip(BRANCH_NAMES["example1"], [(1, 1), (1, -1), (-1, 1), (-1, -1)]):
            branches.append(Branch(label, np.array([x, y, 1], dtype=complex), 0.0))
        return ProblemSpec(name, sys, {}, branches)
    if name == "example2":
        n = 10 if n is None else int(n)
        sys = make_example2(n)
        branches = [_branch_from_cache(name, n, b, sys) for b in ("lower", "upper")]
        branches.append(Branch("constant", np.zeros(n - 1), sys.param_range[0]))
        return ProblemSpec(name, sys, {"n": n}, branches)
    if name == "example3":
        n = 100 if n is None else int(n)
        sys = make_example3(n)
        branches = [_branch_from_cache(name, n, b, sys) for b in ("upper", "lower")]
        branches.append(Branch("constant", ex3_constant_state(n), sys.param_range[0]))
        return ProblemSpec(name, sys, {"n": n, "a": EX3_A, "b": EX3_B, "eta": EX3_ETA}, branches)
    raise KeyError(f"unknown problem {name!r}; choose from {PROBLEMS}")


PROBLEMS = ("toy", "example1", "example2", "example3")


def ex3_constant_state(n, a=EX3_A, b=EX3_B):
    """Homogeneous steady state ``u = a + b``, ``v = b/(a + b)**2``."""
    us = a + b
    return np.concatenate([np.full(n + 1, us), np.full(n + 1, b / us**2)])

