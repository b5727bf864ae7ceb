"""Alternating minimization of the discrete energy.

Both subproblems are convex: u enters through convex densities of linear
maps of its gradient, and v through an affine prefactor, a convex psi,
and the q-gradient term.  The u step uses conjugate gradients (exact SPD
solve when p = 2, preconditioned nonlinear CG otherwise); the v step uses
the quadratic exact path with one active-set re-solve when q = m = 2,
projected gradient with backtracking otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .density import BulkDensity
from .energy import (EnergyBreakdown, EpsParams, assemble_energy,
                     cell_scalar_average, gradient_u, gradient_v)
from .grid import Grid, GridField
from .operators import FirstOrderOperator

__all__ = [
    "SolverConfig",
    "SolveHistory",
    "NumericalAbort",
    "minimize_u",
    "minimize_v",
    "alternate_minimize",
    "elastic_initializer",
    "apply_notch",
]


class NumericalAbort(RuntimeError):
    """Non-finite energy or gradient; carries the offending field."""

    def __init__(self, message, fieldv=None):
        super().__init__(message)
        self.field = fieldv


@dataclass(frozen=True)
class SolverConfig:
    tol_rel: float = 1e-8
    max_outer: int = 200
    max_inner: int = 2000
    inner_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if not (self.tol_rel > 0.0):
            raise ValueError("tol_rel must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class OuterRecord:
    breakdown: EnergyBreakdown
    grad_u_norm: float
    grad_v_norm: float
    inner_u: int
    inner_v: int


@dataclass
class SolveHistory:
    records: List[OuterRecord] = field(default_factory=list)

    @property
    def energies(self):
        return [r.breakdown.total for r in self.records]


def _check_finite(value, fieldv, what):
    if not np.all(np.isfinite(value)):
        raise NumericalAbort(f"non-finite {what} encountered", fieldv)


# ---------------------------------------------------------------------------
# u subproblem
# ---------------------------------------------------------------------------

def _u_quadratic_diag(grid, fieldv, params, op, f):
    """Jacobi diagonal of the p = 2 stiffness operator per (node, comp)."""
    n = grid.dim
    vol = grid.cell_volume
    vbar = cell_scalar_average(grid, fieldv.v)
    wA = vbar + params.eps ** (f.p - 1.0)
    wR = vbar + params.eta
    D = grid.corner_weights  # (2^n, n)
    diag = np.zeros((grid.n_nodes, n))
    eye = np.eye(n)
    for k in range(2 ** n):
        for i in range(n):
            xi = 0.5 * (np.outer(eye[i], D[k]) + np.outer(D[k], eye[i]))
            qa = f.hooke.quad_form(op.apply(xi))
            qr = f.hooke.quad_form(xi - op.apply(xi))
            per_cell = vol * (wA * qa + wR * qr)
            diag[:, i] += np.bincount(grid.corner_index[:, k], weights=per_cell,
                                      minlength=grid.n_nodes)
    return diag


def minimize_u(grid: Grid, fieldv: GridField, params: EpsParams,
               op: FirstOrderOperator, f: BulkDensity, cfg: SolverConfig):
    """Minimize over u at fixed v.  Returns (field, inner_iterations)."""
    free = ~fieldv.dirichlet_u_mask
    out = fieldv.copy()

    def grad_full(u_flat):
        out.u[free] = u_flat.reshape(-1, grid.dim)
        g = gradient_u(grid, out, params, op, f)
        _check_finite(g, out, "u-gradient")
        return g[free].ravel()

    x0 = out.u[free].ravel().copy()
    g0 = grad_full(x0)
    if np.linalg.norm(g0) <= cfg.inner_tol:
        out.u[free] = x0.reshape(-1, grid.dim)
        return out, 0

    if f.p == 2.0:
        diag = _u_quadratic_diag(grid, out, params, op, f)[free].ravel()
        diag = np.where(diag > 0.0, diag, 1.0)
        x, iters = _pcg(lambda p_: grad_full(x0 + p_) - g0, -g0, diag,
                        cfg.inner_tol, cfg.max_inner)
        out.u[free] = (x0 + x).reshape(-1, grid.dim)
        return out, iters

    def energy_of(x):
        out.u[free] = x.reshape(-1, grid.dim)
        bd = assemble_energy(grid, out, params, op, f)
        _check_finite(bd.total, out, "energy")
        return bd.total

    x, iters = _ncg(energy_of, grad_full, x0, cfg.inner_tol, cfg.max_inner)
    out.u[free] = x.reshape(-1, grid.dim)
    return out, iters


def _pcg(apply_A, rhs, diag, tol, max_iter):
    """Jacobi-preconditioned conjugate gradients for SPD systems."""
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = r / diag
    p = z.copy()
    rz = r @ z
    it = 0
    while np.linalg.norm(r) > tol and it < max_iter:
        Ap = apply_A(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, it


def _ncg(energy, grad, x0, tol, max_iter):
    """Polak-Ribiere nonlinear CG with Armijo backtracking."""
    x = x0.copy()
    g = grad(x)
    d = -g
    e = energy(x)
    step = 1.0
    it = 0
    while np.linalg.norm(g) > tol and it < max_iter:
        gd = g @ d
        if gd >= 0.0:  # restart on non-descent direction
            d = -g
            gd = g @ d
        t = step
        for _ in range(60):
            e_new = energy(x + t * d)
            if e_new <= e + 1e-4 * t * gd:
                break
            t *= 0.5
        else:
            break
        x = x + t * d
        g_new = grad(x)
        beta = max(0.0, g_new @ (g_new - g) / (g @ g))
        d = -g_new + beta * d
        g, e = g_new, e_new
        step = min(1.0, 2.5 * t)
        it += 1
    return x, it


# ---------------------------------------------------------------------------
# v subproblem
# ---------------------------------------------------------------------------

def minimize_v(grid: Grid, fieldv: GridField, params: EpsParams,
               op: FirstOrderOperator, f: BulkDensity, cfg: SolverConfig):
    """Minimize over v in [0, 1] at fixed u.  Returns (field, iterations).

    The quadratic path (q = m = 2) proposes a solve-clip-resolve candidate;
    it is kept only if it lowers the energy (clipping alone does not
    guarantee descent), and projected gradient then polishes until the
    projected gradient norm certifies first-order optimality.
    """
    out = fieldv.copy()
    g0 = gradient_v(grid, out, params, op, f)
    _check_finite(g0, out, "v-gradient")
    if _projected_grad_norm(out.v, g0, out.dirichlet_v_mask) <= cfg.inner_tol:
        return out, 0

    iters = 0
    if params.q == 2.0 and params.psi.m == 2.0:
        cand = out.copy()
        iters += _v_exact_path(grid, cand, params, op, f, cfg)
        e_cand = assemble_energy(grid, cand, params, op, f).total
        e_start = assemble_energy(grid, out, params, op, f).total
        if np.isfinite(e_cand) and e_cand <= e_start:
            out = cand
    iters += _v_projected_gradient(grid, out, params, op, f, cfg)
    return out, iters


def _projected_grad_norm(v, g, pinned):
    gp = g.copy()
    at_lo = (v <= 0.0) & (gp > 0.0)
    at_hi = (v >= 1.0) & (gp < 0.0)
    gp[at_lo | at_hi | pinned] = 0.0
    return float(np.linalg.norm(gp))


def _v_linear_solve(grid, fieldv, params, op, f, fixed_mask, tol, max_iter):
    """CG on the quadratic v system restricted to the non-fixed nodes."""
    free = ~fixed_mask
    work = fieldv.copy()

    def grad_free(x):
        work.v[free] = x
        g = gradient_v(grid, work, params, op, f)
        # pins are zeroed inside gradient_v; zero the actively fixed too
        return g[free]

    x0 = work.v[free].copy()
    g0 = grad_free(x0)
    x, it = _pcg(lambda p_: grad_free(x0 + p_) - g0, -g0,
                 np.ones_like(x0), tol, max_iter)
    fieldv.v[free] = x0 + x
    return it


def _v_exact_path(grid, fieldv, params, op, f, cfg):
    """Solve the quadratic system, clip to [0,1], re-solve once with the
    clipped set held fixed, clip again."""
    pinned = fieldv.dirichlet_v_mask
    it1 = _v_linear_solve(grid, fieldv, params, op, f, pinned,
                          cfg.inner_tol, cfg.max_inner)
    clipped = (fieldv.v < 0.0) | (fieldv.v > 1.0)
    np.clip(fieldv.v, 0.0, 1.0, out=fieldv.v)
    it2 = 0
    if np.any(clipped & ~pinned):
        it2 = _v_linear_solve(grid, fieldv, params, op, f, pinned | clipped,
                              cfg.inner_tol, cfg.max_inner)
        np.clip(fieldv.v, 0.0, 1.0, out=fieldv.v)
    fieldv.apply_pins()
    return it1 + it2


def _v_projected_gradient(grid, fieldv, params, op, f, cfg):
    """Projected gradient with backtracking and a Barzilai-Borwein step."""
    pinned = fieldv.dirichlet_v_mask

    def energy():
        return assemble_energy(grid, fieldv, params, op, f).total

    e = energy()
    g = gradient_v(grid, fieldv, params, op, f)
    step = 1.0
    v_prev = None
    g_prev = None
    it = 0
    while it < cfg.max_inner:
        if _projected_grad_norm(fieldv.v, g, pinned) <= cfg.inner_tol:
            break
        if v_prev is not None:
            dv = fieldv.v - v_prev
            dg = g - g_prev
            denom = dv @ dg
            if denom > 0.0:
                step = float((dv @ dv) / denom)
        v_old = fieldv.v.copy()
        t = step
        for _ in range(60):
            trial = np.clip(v_old - t * g, 0.0, 1.0)
            trial[pinned] = 1.0
            fieldv.v[:] = trial
            e_new = energy()
            dec = g @ (trial - v_old)
            if e_new <= e + 1e-4 * dec or np.array_equal(trial, v_old):
                break
            t *= 0.5
        if np.array_equal(fieldv.v, v_old):
            break
        v_prev, g_prev = v_old, g
        g = gradient_v(grid, fieldv, params, op, f)
        _check_finite(g, fieldv, "v-gradient")
        e = e_new
        it += 1
    fieldv.apply_pins()
    return it


# ---------------------------------------------------------------------------
# Outer alternation
# ---------------------------------------------------------------------------

def alternate_minimize(grid: Grid, field0: GridField, params: EpsParams,
                       op: FirstOrderOperator, f: BulkDensity,
                       cfg: SolverConfig, log: Optional[Callable] = None):
    """Alternate the two subproblems until the relative energy decrease
    stalls.  Returns (field, SolveHistory)."""
    fieldv = field0.copy()
    history = SolveHistory()
    e_prev = None
    for outer in range(cfg.max_outer):
        fieldv, it_u = minimize_u(grid, fieldv, params, op, f, cfg)
        fieldv, it_v = minimize_v(grid, fieldv, params, op, f, cfg)
        bd = assemble_energy(grid, fieldv, params, op, f)
        _check_finite(bd.total, fieldv, "energy")
        gu = float(np.linalg.norm(gradient_u(grid, fieldv, params, op, f)))
        gv = _projected_grad_norm(fieldv.v,
                                  gradient_v(grid, fieldv, params, op, f),
                                  fieldv.dirichlet_v_mask)
        history.records.append(OuterRecord(bd, gu, gv, it_u, it_v))
        if log is not None:
            log(outer, bd, gu, gv)
        if e_prev is not None and abs(bd.total - e_prev) <= cfg.tol_rel * max(
                abs(bd.total), 1.0):
            break
        e_prev = bd.total
    return fieldv, history


def elastic_initializer(grid: Grid, u0_values, dirichlet_u_mask,
                        dirichlet_v_mask, params, op, f, cfg):
    """u solving the purely elastic problem with v = 1 everywhere."""
    fieldv = GridField(grid, u0_values.copy(), np.ones(grid.n_nodes),
                       dirichlet_u_mask, u0_values.copy(), dirichlet_v_mask)
    fieldv, _ = minimize_u(grid, fieldv, params, op, f, cfg)
    return fieldv


def apply_notch(fieldv: GridField, value: float = 0.5):
    """Seed the crack branch: set v at the node nearest the domain center."""
    grid = fieldv.grid
    center = 0.5 * np.asarray(grid.extents)
    idx = int(np.argmin(np.linalg.norm(grid.node_coords - center, axis=1)))
    out = fieldv.copy()
    if not out.dirichlet_v_mask[idx]:
        out.v[idx] = value
    return out
