"""Parametric systems ``F(u, p) = 0`` and their random row replacements.

Indices are 0-based throughout the Python API.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue

__all__ = [
    "ParametricSystem",
    "PerturbationMask",
    "PerturbedSystem",
    "sample_mask",
    "perturb",
    "mask_space_size",
]

FIELDS = ("real", "complex")


class ParametricSystem:
    """A square system ``F: K^n x R -> K^n`` with analytic derivatives.

    Parameters
    ----------
    n : int
        Number of unknowns and equations.
    residual, jacobian, dparam : callable
        ``f(u, p)`` returning ``F`` (shape n), ``F_u`` (n x n) and ``F_p`` (n).
    param_range : tuple of float
        Start and end parameter ``(a, b)``; ``b < a`` tracks downward.
    field : {"real", "complex"}
    name : str
    """

    def __init__(self, n, residual, jacobian, dparam, param_range, field="real", name="system"):
        if field not in FIELDS:
            raise ValueError(f"field must be one of {FIELDS}, got {field!r}")
        self.n = int(n)
        self.field = field
        self.param_range = (float(param_range[0]), float(param_range[1]))
        self.name = name
        self._residual = residual
        self._jacobian = jacobian
        self._dparam = dparam

    @property
    def dtype(self):
        return np.complex128 if self.field == "complex" else np.float64

    def coerce(self, u):
        """Return ``u`` as a contiguous array of this system's dtype."""
        u = np.asarray(u)
        if u.ndim == 0:
            u = u.reshape(1)
        if u.shape != (self.n,):
            raise DimensionMismatch(f"{self.name}: expected state of length {self.n}, got {u.shape}")
        if self.field == "real" and np.iscomplexobj(u):
            if np.any(u.imag != 0):
                raise ValueError(f"{self.name}: complex state passed to a real system")
            u = u.real
        return np.ascontiguousarray(u, dtype=self.dtype)

    def _check(self, out, shape, what):
        out = np.asarray(out)
        if out.ndim == 0 and shape == (1,):
            out = out.reshape(1)
        if out.shape != shape:
            raise DimensionMismatch(f"{self.name}: {what} has shape {out.shape}, expected {shape}")
        if not np.all(np.isfinite(out)):
            raise NonFiniteValue(f"{self.name}: {what} is not finite")
        return out.astype(self.dtype, copy=False)

    def eval_F(self, u, p):
        u = self.coerce(u)
        return self._check(self._residual(u, float(p)), (self.n,), "F")

    def eval_Fu(self, u, p):
        u = self.coerce(u)
        return self._check(self._jacobian(u, float(p)), (self.n, self.n), "F_u")

    def eval_Fp(self, u, p):
        u = self.coerce(u)
        return self._check(self._dparam(u, float(p)), (self.n,), "F_p")

    def __repr__(self):
        a, b = self.param_range
        return f"{type(self).__name__}(name={self.name!r}, n={self.n}, field={self.field!r}, range=({a}, {b}))"


@dataclass(frozen=True)
class PerturbationMask:
    """Replaced rows ``I``, frozen columns ``J`` and the anchor state.

    Row ``I[c]`` of the perturbed system becomes ``u[J[c]] - anchor[J[c]]``.
    """

    m: int
    I: tuple
    J: tuple
    anchor: np.ndarray

    def __post_init__(self):
        I = tuple(int(i) for i in self.I)
        J = tuple(int(j) for j in self.J)
        anchor = np.array(self.anchor, copy=True)
        anchor.setflags(write=False)
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "anchor", anchor)
        n = anchor.shape[0]
        if len(I) != self.m or len(J) != self.m:
            raise ValueError("I and J must both have m entries")
        for idx in (I, J):
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError("mask indices must be strictly increasing")
            if idx and (idx[0] < 0 or idx[-1] >= n):
                raise ValueError("mask index out of range")

    @property
    def n(self):
        return self.anchor.shape[0]

    def label(self):
        """Compact text form, e.g. ``I=0;2|J=1;2``."""
        return "I=" + ";".join(map(str, self.I)) + "|J=" + ";".join(map(str, self.J))


def mask_space_size(n, m):
    """Number of distinct ``(I, J)`` draws, ``C(n, m)**2``."""
    return comb(n, m) ** 2


def sample_mask(n, m, anchor, rng):
    """Draw ``I`` and ``J`` independently and uniformly among the m-subsets.

    Raises
    ------
    ValueError
        If ``m`` is not in ``[1, n-1]``.
    """
    n = int(n)
    m = int(m)
    if not 1 <= m <= n - 1:
        raise ValueError(f"m must lie in [1, n-1] = [1, {n - 1}], got {m}")
    I = np.sort(rng.choice(n, size=m, replace=False))
    J = np.sort(rng.choice(n, size=m, replace=False))
    return PerturbationMask(m, tuple(I), tuple(J), np.asarray(anchor))


class PerturbedSystem(ParametricSystem):
    """``base`` with rows ``mask.I`` replaced by variable-freezing constraints."""

    def __init__(self, base, mask):
        if mask.n != base.n:
            raise DimensionMismatch(f"mask of size {mask.n} does not match system of size {base.n}")
        super().__init__(
            base.n, None, None, None, base.param_range, field=base.field,
            name=f"{base.name}[{mask.label()}]",
        )
        self.base = base
        self.mask = mask
        self._I = np.array(mask.I, dtype=np.int64)
        self._J = np.array(mask.J, dtype=np.int64)
        self._anchor = np.asarray(mask.anchor, dtype=base.dtype)

    def eval_F(self, u, p):
        u = self.coerce(u)
        r = self.base.eval_F(u, p).copy()
        r[self._I] = u[self._J] - self._anchor[self._J]
        return r

    def eval_Fu(self, u, p):
        a = self.base.eval_Fu(u, p).copy()
        a[self._I, :] = 0
        a[self._I, self._J] = 1
        return a

    def eval_Fp(self, u, p):
        g = self.base.eval_Fp(u, p).copy()
        g[self._I] = 0
        return g


def perturb(base, mask):
    """Wrap ``base`` with ``mask``; see :class:`PerturbedSystem`."""
    return PerturbedSystem(base, mask)
