"""Scenario-level experiment drivers used by the CLI and the test suite."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .config import Scenario
from .density import surface_norm
from .energy import (EnergyBreakdown, assemble_energy, gradient_u, gradient_v,
                     sublevel_diagnostics)
from .grid import Grid, GridField
from .limits import limit_constants, limit_energy
from .solve import (NumericalAbort, SolverConfig, alternate_minimize,
                    apply_notch, elastic_initializer)

__all__ = ["SweepRow", "eps_sweep", "predict_limit", "gradient_check",
           "GradientCheckResult"]


@dataclass
class SweepRow:
    eps: float
    eta: float
    breakdown: EnergyBreakdown
    a_variation: float
    psi_mass: float
    prediction: Optional[float]
    runtime_s: float


def predict_limit(scn: Scenario) -> Optional[float]:
    """Closed-form limit value for the configured predictor."""
    if scn.predict == "none":
        return None
    if scn.predict == "template":
        return limit_energy(scn.template, scn.operator, scn.density,
                            scn.gamma, scn.q, scn.psi, scn.extents).total
    # cohesive-1d: competition between the affine elastic branch and a
    # single jump carrying the whole stretch
    L = scn.extents[0]
    delta = float(scn.u0(np.array([L]))[0] - scn.u0(np.array([0.0]))[0])
    strain = np.array([[delta / L]])
    elastic = L * float(scn.density.value(strain))
    consts = limit_constants(scn.density.p, scn.q, scn.gamma, scn.psi)
    s = float(surface_norm(scn.density, scn.operator,
                           np.array([delta]), np.array([1.0])))
    crack = consts.a + consts.b * s
    return min(elastic, crack)


def _transfer(old_grid: Grid, values, new_grid: Grid):
    """Multilinear transfer of nodal values between grids on the same box."""
    axes = [np.linspace(0.0, L, c + 1)
            for L, c in zip(old_grid.extents, old_grid.cells)]
    shaped = np.asarray(values).reshape(old_grid.node_shape + values.shape[1:])
    interp = RegularGridInterpolator(axes, shaped, bounds_error=False,
                                     fill_value=None)
    return interp(new_grid.node_coords)


def _make_field(scn: Scenario, grid: Grid, u, v):
    mu, mv = scn.masks_for(grid)
    return GridField(grid, u, v, mu, scn.u0_values(grid), mv)


def eps_sweep(scn: Scenario, keep_fields: bool = False):
    """Warm-started continuation over the scenario's eps list.

    Each row solves from the previous minimizer (interpolated onto the new
    grid) and, when the notched restart is enabled, once more from the
    elastic initializer with a mid-domain notch; the lower-energy branch is
    recorded.
    """
    rows: List[SweepRow] = []
    fields = []
    prediction = predict_limit(scn)
    prev = None  # (grid, field)
    try:
        _sweep_loop(scn, rows, fields, prediction, keep_fields)
    except NumericalAbort as exc:
        exc.partial_rows = rows  # flushed by the CLI before exiting
        raise
    return (rows, fields) if keep_fields else rows


def _sweep_loop(scn, rows, fields, prediction, keep_fields):
    prev = None
    for eps in scn.eps_list:
        t0 = time.perf_counter()
        params = scn.params_for(eps)
        grid = scn.grid_for(eps)
        mu, mv = scn.masks_for(grid)
        u0_nodal = scn.u0_values(grid)

        candidates = []
        if prev is None:
            base = elastic_initializer(grid, u0_nodal, mu, mv, params,
                                       scn.operator, scn.density, scn.solver)
        else:
            old_grid, old_field = prev
            u_t = _transfer(old_grid, old_field.u, grid)
            v_t = np.clip(_transfer(old_grid, old_field.v[:, None], grid)[:, 0],
                          0.0, 1.0)
            base = _make_field(scn, grid, u_t, v_t)
        candidates.append(base)
        if scn.notch:
            elastic = elastic_initializer(grid, u0_nodal, mu, mv, params,
                                          scn.operator, scn.density, scn.solver)
            candidates.append(apply_notch(elastic))

        best = None
        for cand in candidates:
            fieldv, _ = alternate_minimize(grid, cand, params, scn.operator,
                                           scn.density, scn.solver)
            bd = assemble_energy(grid, fieldv, params, scn.operator, scn.density)
            if best is None or bd.total < best[1].total:
                best = (fieldv, bd)
        fieldv, bd = best
        diag = sublevel_diagnostics(grid, fieldv, params, scn.operator, scn.density)
        rows.append(SweepRow(eps, params.eta, bd, diag.a_variation,
                             diag.psi_mass, prediction,
                             time.perf_counter() - t0))
        if keep_fields:
            fields.append((grid, fieldv))
        prev = (grid, fieldv)


# ---------------------------------------------------------------------------
# Finite-difference gradient checks
# ---------------------------------------------------------------------------

@dataclass
class GradientCheckResult:
    what: str
    rel_error: float
    passed: bool


def _directional_fd(energy, x, d, t):
    # fourth-order central difference: keeps truncation below the 1e-6
    # relative target even for the cubic-growth configurations
    return (8.0 * (energy(x + t * d) - energy(x - t * d))
            - (energy(x + 2 * t * d) - energy(x - 2 * t * d))) / (12.0 * t)


def gradient_check(scn: Scenario, n_states: int = 20, tol: float = 1e-6,
                   seed: int = 0, corrupt: bool = False):
    """Compare the analytic nodal gradients against central finite
    differences of the assembled energy along random directions."""
    rng = np.random.default_rng(seed)
    eps = scn.eps_list[0]
    params = scn.params_for(eps)
    grid = scn.grid_for(eps)
    mu, mv = scn.masks_for(grid)
    results = []
    worst_u = 0.0
    worst_v = 0.0
    for _ in range(n_states):
        u = rng.standard_normal((grid.n_nodes, grid.dim))
        v = rng.uniform(0.05, 0.95, grid.n_nodes)
        fieldv = GridField(grid, u, v, mu, scn.u0_values(grid), mv)

        gu = gradient_u(grid, fieldv, params, scn.operator, scn.density)
        if corrupt:
            gu = gu * (1.0 + 1e-3)
        d = rng.standard_normal(gu.shape)
        d[fieldv.dirichlet_u_mask] = 0.0
        d /= np.linalg.norm(d)

        def e_of_u(x, fv=fieldv):
            w = fv.copy()
            w.u = x
            return assemble_energy(grid, w, params, scn.operator, scn.density).total

        t = 1e-5
        fd = _directional_fd(e_of_u, fieldv.u, d, t)
        an = float(np.sum(gu * d))
        rel_u = abs(fd - an) / max(abs(fd), abs(an), 1e-14)
        worst_u = max(worst_u, rel_u)

        gv = gradient_v(grid, fieldv, params, scn.operator, scn.density)
        if corrupt:
            gv = gv * (1.0 + 1e-3)
        dv = rng.standard_normal(gv.shape)
        dv[fieldv.dirichlet_v_mask] = 0.0
        # unit direction with tiny steps keeps v + t*dv inside (0, 1)
        dv /= np.linalg.norm(dv)

        def e_of_v(x, fv=fieldv):
            w = fv.copy()
            w.v = np.clip(x, 0.0, 1.0)
            return assemble_energy(grid, w, params, scn.operator, scn.density).total

        tv = 1e-5
        fdv = _directional_fd(e_of_v, fieldv.v, dv, tv)
        anv = float(np.sum(gv * dv))
        rel_v = abs(fdv - anv) / max(abs(fdv), abs(anv), 1e-14)
        worst_v = max(worst_v, rel_v)

    results.append(GradientCheckResult("gradient_u", worst_u, worst_u < tol))
    results.append(GradientCheckResult("gradient_v", worst_v, worst_v < tol))
    return results
