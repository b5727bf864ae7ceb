"""Bulk energy density family with p-growth and its recession function.

The density is ``f(xi) = ((S xi : xi + mu)^(p/2) - mu^(p/2)) / p`` where
``S`` is a two-parameter Hooke form ``S xi = lambda1 xi + (lambda2/2)
(tr xi) Id``.  It is convex, vanishes at 0, grows like |xi|^p, and has
the closed-form recession ``(S xi : xi)^(p/2) / p`` whose p-th root is a
norm on symmetric matrices; composed with the operator tensor product it
gives the cohesive surface slope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .operators import FirstOrderOperator, sym_to_vec

__all__ = ["HookeTensor", "BulkDensity", "surface_norm"]

# floor under S xi : xi + mu before fractional powers (mu = 0 safety)
_POWER_FLOOR = 1e-30


@dataclass(frozen=True)
class HookeTensor:
    lambda1: float
    lambda2: float
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (self.lambda1 > 0.0):
            raise ValueError("positive definiteness requires lambda1 > 0")
        if not (self.lambda1 + self.dim * self.lambda2 / 2.0 > 0.0):
            raise ValueError(
                "positive definiteness requires lambda1 + dim*lambda2/2 > 0"
            )

    def sigma(self, xi):
        """S xi = lambda1 xi + (lambda2/2) (tr xi) Id, batched."""
        xi = np.asarray(xi, dtype=float)
        tr = np.trace(xi, axis1=-2, axis2=-1)
        eye = np.eye(self.dim)
        return self.lambda1 * xi + 0.5 * self.lambda2 * tr[..., None, None] * eye

    def quad_form(self, xi):
        """S xi : xi = lambda1 |xi|^2 + (lambda2/2) (tr xi)^2."""
        xi = np.asarray(xi, dtype=float)
        tr = np.trace(xi, axis1=-2, axis2=-1)
        frob2 = np.sum(xi * xi, axis=(-2, -1))
        return self.lambda1 * frob2 + 0.5 * self.lambda2 * tr * tr


@dataclass(frozen=True)
class BulkDensity:
    p: float
    mu: float
    hooke: HookeTensor

    def __post_init__(self):
        if not (self.p > 1.0):
            raise ValueError("growth exponent p must be > 1")
        if self.mu < 0.0:
            raise ValueError("offset mu must be >= 0")

    @property
    def dim(self):
        return self.hooke.dim

    def value(self, xi):
        q = self.hooke.quad_form(xi)
        return ((q + self.mu) ** (self.p / 2.0) - self.mu ** (self.p / 2.0)) / self.p

    def grad(self, xi):
        """(S xi : xi + mu)^(p/2 - 1) S xi; 0 at xi = 0 when the exponent
        is singular (minimal-norm subgradient selection)."""
        q = self.hooke.quad_form(xi)
        base = np.maximum(q + self.mu, _POWER_FLOOR)
        fac = base ** (self.p / 2.0 - 1.0)
        if self.p < 2.0 and self.mu == 0.0:
            fac = np.where(q <= _POWER_FLOOR, 0.0, fac)
        return fac[..., None, None] * self.hooke.sigma(xi)

    def recession(self, xi):
        """Pointwise limit of value(s xi)/s^p: (S xi : xi)^(p/2) / p."""
        q = self.hooke.quad_form(xi)
        return q ** (self.p / 2.0) / self.p

    def recession_root(self, xi):
        """recession(xi)^(1/p), the norm giving the surface slope."""
        return self.recession(xi) ** (1.0 / self.p)

    def recession_gap(self, s: float, n_dirs: int = 256, seed: int = 0) -> float:
        """sup over sampled unit symmetric directions of
        |value(s xi)^(1/p)/s - recession(xi)^(1/p)|, the empirical modulus
        of the uniform-convergence hypothesis at scale s."""
        if s <= 0.0:
            raise ValueError("scale s must be positive")
        xi = _unit_sym_samples(self.dim, n_dirs, seed)
        lhs = self.value(s * xi) ** (1.0 / self.p) / s
        rhs = self.recession_root(xi)
        return float(np.abs(lhs - rhs).max())

    def growth_check(self, n_samples: int = 512, seed: int = 0) -> Tuple[float, float]:
        """Empirical sandwich constants (c_lower, c_upper) with
        c_lower (|xi|^p - 1) <= value(xi) <= c_upper (|xi|^p + 1) on all
        samples, covering small and large |xi|.  Raises if no finite
        constants fit (a misconfigured density)."""
        rng = np.random.default_rng(seed)
        dirs = _unit_sym_samples(self.dim, n_samples, seed)
        scales = 10.0 ** rng.uniform(-3.0, 3.0, size=n_samples)
        xi = scales[:, None, None] * dirs
        f = self.value(xi)
        norm_p = np.linalg.norm(sym_to_vec(xi), axis=-1) ** self.p
        c_upper = float(np.max(f / (norm_p + 1.0)))
        big = norm_p > 1.0 + 1e-9
        if not np.any(big):
            raise RuntimeError("growth_check needs samples with |xi| > 1")
        c_lower = float(np.min(f[big] / (norm_p[big] - 1.0)))
        if not (np.isfinite(c_lower) and np.isfinite(c_upper) and c_lower > 0.0):
            raise RuntimeError("no finite growth constants fit the samples")
        bad_low = f < c_lower * (norm_p - 1.0) - 1e-12
        bad_up = f > c_upper * (norm_p + 1.0) + 1e-12
        if np.any(bad_low) or np.any(bad_up):
            raise RuntimeError("sampled density violates its growth sandwich")
        return c_lower, c_upper


def _unit_sym_samples(n, count, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, n, n))
    sym = 0.5 * (g + np.swapaxes(g, -1, -2))
    norms = np.linalg.norm(sym_to_vec(sym), axis=-1)
    return sym / norms[:, None, None]


def surface_norm(f: BulkDensity, op: FirstOrderOperator, w, z):
    """recession(A(w (.) z))^(1/p): the cohesive surface density slope
    evaluated on a jump w across a plane with normal z."""
    return f.recession_root(op.tensor(w, z))
