"""Polynomial vector fields of degree <= 2 with exact derivatives.

These are used everywhere an analytic displacement is needed: kernel
fields of first-order operators, Dirichlet data, and the smooth parts of
jump templates.  Degree <= 2 keeps the symmetric gradient affine in x, so
cell-center finite differences and quadrature are exact on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PolyField"]


def _as_array(x, shape):
    a = np.zeros(shape) if x is None else np.asarray(x, dtype=float)
    if a.shape != shape:
        a = a.reshape(shape)
    if not np.all(np.isfinite(a)):
        raise ValueError("polynomial coefficients must be finite")
    return a


@dataclass(frozen=True)
class PolyField:
    """u(x) = const + linear @ x + quad : (x (x) x), componentwise.

    ``quad[i, j, k]`` is symmetrized in (j, k) at construction, so
    ``u_i(x) = const[i] + sum_j linear[i,j] x_j + sum_jk quad[i,j,k] x_j x_k``.
    """

    dim: int
    const: np.ndarray = field(default=None)
    linear: np.ndarray = field(default=None)
    quad: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.dim
        if n < 1:
            raise ValueError("dim must be >= 1")
        object.__setattr__(self, "const", _as_array(self.const, (n,)))
        object.__setattr__(self, "linear", _as_array(self.linear, (n, n)))
        q = _as_array(self.quad, (n, n, n))
        object.__setattr__(self, "quad", 0.5 * (q + np.swapaxes(q, 1, 2)))

    # -- evaluation ----------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lin = np.einsum("ij,...j->...i", self.linear, x)
        qd = np.einsum("ijk,...j,...k->...i", self.quad, x, x)
        return self.const + lin + qd

    def grad(self, x):
        """Jacobian d_j u_i at x, shape (..., n, n)."""
        x = np.asarray(x, dtype=float)
        g = 2.0 * np.einsum("ijk,...k->...ij", self.quad, x)
        return self.linear + g

    def sym_grad(self, x):
        g = self.grad(x)
        return 0.5 * (g + np.swapaxes(g, -1, -2))

    # -- constructors --------------------------------------------------
    @staticmethod
    def zero(dim):
        return PolyField(dim)

    @staticmethod
    def constant(c):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return PolyField(c.size, const=c)

    @staticmethod
    def affine(linear, const=None):
        linear = np.asarray(linear, dtype=float)
        return PolyField(linear.shape[0], const=const, linear=linear)

    @staticmethod
    def rigid_motion(M=None, b=None, dim=None):
        """x -> M x + b with M skew-symmetric."""
        if M is None:
            if dim is None:
                raise ValueError("need M or dim")
            M = np.zeros((dim, dim))
        M = np.asarray(M, dtype=float)
        if not np.allclose(M, -M.T, atol=1e-13):
            raise ValueError("rigid motion requires a skew-symmetric matrix")
        return PolyField(M.shape[0], const=b, linear=M)

    @staticmethod
    def conformal_killing(a, M=None, b=None):
        """x -> M x + b + 2 (a . x) x - |x|^2 a, the degree-2 kernel field
        of the deviatoric operator for dim >= 3 (M skew)."""
        a = np.asarray(a, dtype=float)
        n = a.size
        if n < 3:
            raise ValueError(
                "conformal Killing fields are a finite-dimensional kernel only "
                "for dim >= 3; in dim 2 the kernel is infinite-dimensional"
            )
        if M is None:
            M = np.zeros((n, n))
        M = np.asarray(M, dtype=float)
        if not np.allclose(M, -M.T, atol=1e-13):
            raise ValueError("M must be skew-symmetric")
        eye = np.eye(n)
        quad = (
            np.einsum("j,ik->ijk", a, eye)
            + np.einsum("k,ij->ijk", a, eye)
            - np.einsum("i,jk->ijk", a, eye)
        )
        return PolyField(n, const=b, linear=M, quad=quad)
