"""Limit functional, optimal transition profile, and recovery sequences.

For a displacement with a planar jump the limit energy density on the
jump set is ``a + b * (recession norm of jump (x)_A normal)`` with

    a = 2 (q')^(1/q') (gamma q)^(1/q) * integral_0^1 psi^(1/q')
    b = p^(1/p) (p')^(1/p')  * psi(0)^(1/p)

The recovery construction layers three zones around the jump plane: a
core of half-width sigma (phase field 0, displacement interpolated
linearly across), a transition band of width tau following the optimal
profile w, and caps around the jump-support boundary where w is driven
by the distance to the support.  Away from all of these the phase field
sits at 1 - rho, with rho calibrated so that both the far-field psi cost
and the band width vanish with eps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from .density import BulkDensity, surface_norm
from .energy import EnergyBreakdown, EpsParams, PsiSpec, assemble_energy
from .fields import PolyField
from .grid import Grid, GridField
from .operators import FirstOrderOperator

__all__ = [
    "LimitConstants",
    "limit_constants",
    "limit_constants_quadrature",
    "psi_root_integral",
    "inv_root_integral",
    "h1",
    "h2",
    "h_scale",
    "rho_of_eps",
    "ProfileSolution",
    "optimal_profile",
    "sigma_jump",
    "JumpTemplate",
    "LimitEnergy",
    "limit_energy",
    "build_recovery",
    "recommended_grid",
    "limsup_check",
    "LimsupRow",
]


def _conj(r: float) -> float:
    return r / (r - 1.0)


# ---------------------------------------------------------------------------
# Limit constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitConstants:
    a: float
    b: float


def psi_root_integral(psi: PsiSpec, q: float) -> float:
    """integral_0^1 psi(s)^(1/q') ds in closed form for the power family."""
    qp = _conj(q)
    return psi.psi0 ** (1.0 / qp) / (psi.m / qp + 1.0)


def limit_constants(p: float, q: float, gamma: float, psi: PsiSpec) -> LimitConstants:
    if not (p > 1.0 and q > 1.0 and gamma > 0.0):
        raise ValueError("need p, q > 1 and gamma > 0")
    qp = _conj(q)
    pp = _conj(p)
    a = 2.0 * qp ** (1.0 / qp) * (gamma * q) ** (1.0 / q) * psi_root_integral(psi, q)
    b = p ** (1.0 / p) * pp ** (1.0 / pp) * psi.psi0 ** (1.0 / p)
    return LimitConstants(a, b)


def limit_constants_quadrature(p, q, gamma, psi: PsiSpec) -> LimitConstants:
    """Same constants with the psi integral done by adaptive quadrature."""
    qp = _conj(q)
    pp = _conj(p)
    integral, _ = integrate.quad(lambda s: psi(s) ** (1.0 / qp), 0.0, 1.0,
                                 epsabs=1e-14, epsrel=1e-14)
    a = 2.0 * qp ** (1.0 / qp) * (gamma * q) ** (1.0 / q) * integral
    b = p ** (1.0 / p) * pp ** (1.0 / pp) * psi.psi0 ** (1.0 / p)
    return LimitConstants(a, b)


# ---------------------------------------------------------------------------
# The scale functions h1, h2 and the floor rho(eps)
# ---------------------------------------------------------------------------

def inv_root_integral(psi: PsiSpec, q: float, z) -> float:
    """integral_0^z psi(s)^(-1/q) ds, closed form for the power family."""
    z = np.asarray(z, dtype=float)
    alpha = psi.m / q
    scale = psi.psi0 ** (-1.0 / q)
    if abs(alpha - 1.0) < 1e-14:
        return scale * (-np.log1p(-z))
    return scale * ((1.0 - z) ** (1.0 - alpha) - 1.0) / (alpha - 1.0)


def h1(psi: PsiSpec, rho):
    return psi(1.0 - np.asarray(rho))


def h2(psi: PsiSpec, q: float, rho):
    return 1.0 / inv_root_integral(psi, q, 1.0 - np.asarray(rho))


def h_scale(psi: PsiSpec, q: float, rho):
    """h = h1 * h2, increasing on (0, 1) and vanishing at 0."""
    return h1(psi, rho) * h2(psi, q, rho)


def rho_of_eps(psi: PsiSpec, q: float, eps: float) -> float:
    """Far-field floor: the root of h(rho) = eps^2.

    The square calibrates the two scale limits symmetrically,
    h1(rho)/eps = eps/h2(rho) = sqrt(h1/h2)(rho), so both vanish as eps
    goes to 0 (inverting h at eps itself would leave h1(rho)/eps =
    1/h2(rho), which does not vanish).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    target = np.log(eps * eps)
    lo, hi = np.log(1e-12), np.log(1.0 - 1e-12)

    def g(logr):
        return float(np.log(h_scale(psi, q, np.exp(logr)))) - target

    if g(hi) < 0.0:
        raise ValueError("eps out of range for the scale function h")
    while g(lo) > 0.0:
        lo += np.log(1e-6)
        if lo < np.log(1e-150):
            raise ValueError("eps out of range for the scale function h")
    logr = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)
    return float(np.exp(logr))


# ---------------------------------------------------------------------------
# Optimal transition profile
# ---------------------------------------------------------------------------

@dataclass
class ProfileSolution:
    """Monotone solution w of  w' = (q'/(gamma q))^(1/q) psi(w)^(1/q) / eps,
    w(0) = 0, represented by its closed-form inverse plus a dense table."""

    eps: float
    gamma: float
    q: float
    psi: PsiSpec
    T: float
    rho: float
    tau: float
    table_t: np.ndarray
    table_w: np.ndarray

    @property
    def _scale(self) -> float:
        # t(z) = _scale * (psi0-free part of integral_0^z psi^(-1/q))
        gq = (self.gamma * self.q / _conj(self.q)) ** (1.0 / self.q)
        return gq * self.eps * self.psi.psi0 ** (-1.0 / self.q)

    def inverse(self, z):
        """t such that w(t) = z."""
        gq = (self.gamma * self.q / _conj(self.q)) ** (1.0 / self.q)
        return gq * self.eps * inv_root_integral(self.psi, self.q, z)

    def w(self, t):
        t = np.asarray(t, dtype=float)
        c = self._scale
        alpha = self.psi.m / self.q
        with np.errstate(over="ignore"):
            if abs(alpha - 1.0) < 1e-14:
                vals = -np.expm1(-t / c)
            elif alpha < 1.0:
                base = np.maximum(1.0 - (1.0 - alpha) * t / c, 0.0)
                vals = 1.0 - base ** (1.0 / (1.0 - alpha))
            else:
                base = 1.0 + (alpha - 1.0) * t / c
                vals = 1.0 - base ** (1.0 / (1.0 - alpha))
        return np.clip(vals, 0.0, 1.0) * (t > 0.0)

    def w_quadrature(self, t):
        """Inverse-function evaluation by adaptive quadrature + bracketing
        root search; independent of the closed form."""
        gq = (self.gamma * self.q / _conj(self.q)) ** (1.0 / self.q)

        def t_of(z):
            val, _ = integrate.quad(lambda s: self.psi(s) ** (-1.0 / self.q),
                                    0.0, z, epsabs=1e-13, epsrel=1e-13, limit=200)
            return gq * self.eps * val

        out = np.empty(np.shape(t))
        flat = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        res = np.empty(flat.shape)
        for i, ti in enumerate(flat):
            if ti <= 0.0:
                res[i] = 0.0
                continue
            z_hi = 0.9
            while t_of(z_hi) < ti and z_hi < 1.0 - 1e-13:
                z_hi = 1.0 - (1.0 - z_hi) / 10.0
            if t_of(z_hi) < ti:
                res[i] = 1.0
                continue
            res[i] = optimize.brentq(lambda z: t_of(z) - ti, 0.0, z_hi,
                                     xtol=1e-14, rtol=8.9e-16)
        out = res.reshape(np.shape(t)) if np.shape(t) else float(res[0])
        return out

    def w_prime_fd(self, t, rel_step=1e-4):
        """Fourth-order central difference of w, independent of the ODE
        right-hand side; used by the calibration check."""
        h = rel_step * self.eps
        t = np.asarray(t, dtype=float)
        return (8.0 * (self.w(t + h) - self.w(t - h))
                - (self.w(t + 2 * h) - self.w(t - 2 * h))) / (12.0 * h)

    def ode_rhs(self, wval):
        gq = (_conj(self.q) / (self.gamma * self.q)) ** (1.0 / self.q)
        return gq / self.eps * self.psi(wval) ** (1.0 / self.q)

    def calibration_residual(self, t):
        """max pointwise relative gap in the Young equality
        alpha^q = beta^(q') along the profile, with w' from finite
        differences of the profile itself."""
        t = np.asarray(t, dtype=float)
        wp = self.w_prime_fd(t)
        wval = self.w(t)
        alpha_q = self.gamma * self.q * self.eps ** (self.q - 1.0) * wp ** self.q
        beta_qp = _conj(self.q) * self.psi(wval) / self.eps
        scale = np.maximum(np.abs(beta_qp), 1e-300)
        return float(np.max(np.abs(alpha_q - beta_qp) / scale))


def optimal_profile(gamma: float, q: float, psi: PsiSpec, eps: float,
                    table_points: int = 2048) -> ProfileSolution:
    """Construct the profile for one eps, along with rho, tau, and a dense
    monotone (t, w) table up to w = 1 - rho."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    rho = rho_of_eps(psi, q, eps)
    gq = (gamma * q / _conj(q)) ** (1.0 / q)
    alpha = psi.m / q
    if alpha < 1.0:
        T = gq * eps * inv_root_integral(psi, q, 1.0)
    else:
        T = np.inf
    tau = gq * eps * float(inv_root_integral(psi, q, 1.0 - rho))
    sol = ProfileSolution(eps, gamma, q, psi, T, rho, tau,
                          np.zeros(0), np.zeros(0))
    zs = (1.0 - rho) * np.linspace(0.0, 1.0, table_points)
    ts = np.asarray(sol.inverse(zs), dtype=float)
    sol.table_t = ts
    sol.table_w = zs
    return sol


# ---------------------------------------------------------------------------
# Layer half-width sigma
# ---------------------------------------------------------------------------

def sigma_jump(f: BulkDensity, op: FirstOrderOperator, psi: PsiSpec,
               eps: float, jump, normal):
    """Half-width of the interpolation core for a given jump vector:
    eps / (2 p' psi(0)^(1/p')) * p^(1/p) (p')^(1/p') * surface norm."""
    p = f.p
    pp = _conj(p)
    coef = eps / (2.0 * pp * psi.psi0 ** (1.0 / pp)) * p ** (1.0 / p) * pp ** (1.0 / pp)
    return coef * surface_norm(f, op, np.asarray(jump, dtype=float),
                               np.asarray(normal, dtype=float))


# ---------------------------------------------------------------------------
# Jump templates and the limit energy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JumpTemplate:
    """Piecewise-polynomial displacement with a planar jump.

    The displacement is ``smooth_minus`` below the plane {x_axis = c} and
    ``smooth_plus`` above; ``jump`` evaluated at (x', c) must equal their
    trace difference on the declared support (spot-checked).  ``support``
    restricts the jump set to a tangential box; None means the whole plane
    section.  Outside the support the two sides are glued continuously by
    masking the side difference, so templates whose trace difference does
    not vanish there are realized with an amplitude taper inside the
    support edges (the jump of such templates cannot terminate inside the
    body at finite elastic energy).
    """

    dim: int
    plane_c: float
    smooth_minus: PolyField
    smooth_plus: PolyField
    jump: PolyField
    support: Optional[np.ndarray] = None
    lipschitz_L: float = 1.0
    plane_axis: int = -1
    boundary_mismatch: Optional[Tuple[str, PolyField]] = None

    def __post_init__(self):
        axis = self.plane_axis if self.plane_axis >= 0 else self.dim - 1
        object.__setattr__(self, "plane_axis", axis)
        if not (0 <= axis < self.dim):
            raise ValueError("plane_axis out of range")
        for fld in (self.smooth_minus, self.smooth_plus, self.jump):
            if fld.dim != self.dim:
                raise ValueError("template fields must match dim")
        if self.support is not None:
            sup = np.asarray(self.support, dtype=float).reshape(self.dim - 1, 2)
            if np.any(sup[:, 1] <= sup[:, 0]):
                raise ValueError("support bounds must be increasing")
            object.__setattr__(self, "support", sup)

    @property
    def tangential_axes(self):
        return [ax for ax in range(self.dim) if ax != self.plane_axis]

    def on_plane(self, xp):
        """Lift tangential coordinates (..., dim-1) to points on the plane."""
        xp = np.atleast_2d(np.asarray(xp, dtype=float))
        pts = np.zeros(xp.shape[:-1] + (self.dim,))
        for k, ax in enumerate(self.tangential_axes):
            pts[..., ax] = xp[..., k]
        pts[..., self.plane_axis] = self.plane_c
        return pts

    def jump_on_plane(self, xp):
        return self.jump(self.on_plane(xp))

    def check_consistency(self, n_points: int = 32, seed: int = 0, atol: float = 1e-10):
        """Spot-check jump == trace difference of the sides on the support."""
        rng = np.random.default_rng(seed)
        if self.dim == 1:
            pts = self.on_plane(np.zeros((1, 0)))
        else:
            sup = self.support
            if sup is None:
                sup = np.array([[0.0, 1.0]] * (self.dim - 1))
            xp = rng.uniform(sup[:, 0], sup[:, 1], size=(n_points, self.dim - 1))
            pts = self.on_plane(xp)
        gap = self.smooth_plus(pts) - self.smooth_minus(pts) - self.jump(pts)
        return float(np.abs(gap).max()) <= atol


@dataclass(frozen=True)
class LimitEnergy:
    bulk: float
    jump: float
    boundary: float
    total: float


def _gauss_points(lo, hi, npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (hi + lo) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * w


def _tensor_grid(bounds, npts):
    axes = [_gauss_points(lo, hi, npts) for lo, hi in bounds]
    pts = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wts = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    pts = np.stack([p.ravel() for p in pts], axis=-1)
    w = np.prod(np.stack([wt.ravel() for wt in wts], axis=-1), axis=-1)
    return pts, w


def limit_energy(template: JumpTemplate, op: FirstOrderOperator, f: BulkDensity,
                 gamma: float, q: float, psi: PsiSpec, extents,
                 quad_res: int = 24) -> LimitEnergy:
    """Limit functional of the template on the box [0, L1] x ... :
    bulk integral of f(A e) + f(e - A e) from the analytic strains, plus
    (a + b * surface norm of the jump) over the jump set, plus the same
    density over any declared boundary-mismatch face."""
    n = template.dim
    L = np.atleast_1d(np.asarray(extents, dtype=float))
    c = template.plane_c
    axis = template.plane_axis
    consts = limit_constants(f.p, q, gamma, psi)

    # bulk: tensor-product Gauss quadrature per side
    bulk = 0.0
    for side, (lo, hi) in (("minus", (0.0, c)), ("plus", (c, L[axis]))):
        if hi - lo <= 0.0:
            continue
        bounds = [(0.0, L[ax]) if ax != axis else (lo, hi) for ax in range(n)]
        pts, wts = _tensor_grid(bounds, quad_res)
        fldp = template.smooth_minus if side == "minus" else template.smooth_plus
        e = fldp.sym_grad(pts)
        ae = op.apply(e)
        bulk += float(np.sum(wts * (f.value(ae) + f.value(e - ae))))

    # jump term over the support
    normal = np.zeros(n)
    normal[axis] = 1.0
    if n == 1:
        jv = template.jump_on_plane(np.zeros((1, 0)))[0]
        s = surface_norm(f, op, jv, normal)
        jump = float(consts.a + consts.b * s) if np.linalg.norm(jv) > 0.0 else 0.0
    else:
        sup = template.support
        if sup is None:
            sup = np.array([[0.0, L[ax]] for ax in template.tangential_axes])
        sup = np.clip(sup, 0.0, np.array([[L[ax]] * 2 for ax in template.tangential_axes]))
        pts, wts = _tensor_grid([(lo, hi) for lo, hi in sup], quad_res)
        jv = template.jump_on_plane(pts)
        s = surface_norm(f, op, jv, normal)
        active = np.linalg.norm(jv, axis=-1) > 0.0
        jump = float(np.sum(wts * np.where(active, consts.a + consts.b * s, 0.0)))

    boundary = 0.0
    if template.boundary_mismatch is not None:
        face, mismatch = template.boundary_mismatch
        side, ax = face[:2], int(face[2:])
        nu = np.zeros(n)
        nu[ax] = -1.0 if side == "lo" else 1.0
        xc = 0.0 if side == "lo" else L[ax]
        other = [a for a in range(n) if a != ax]
        if other:
            pts, wts = _tensor_grid([(0.0, L[a]) for a in other], quad_res)
            full = np.zeros((pts.shape[0], n))
            for k, a in enumerate(other):
                full[:, a] = pts[:, k]
            full[:, ax] = xc
            tr = mismatch(full)
            s = surface_norm(f, op, tr, nu)
            active = np.linalg.norm(tr, axis=-1) > 0.0
            boundary = float(np.sum(wts * np.where(active, consts.a + consts.b * s, 0.0)))
        else:
            tr = mismatch(np.array([xc]))
            if np.linalg.norm(tr) > 0.0:
                boundary = float(consts.a + consts.b * surface_norm(f, op, tr, nu))

    return LimitEnergy(bulk, jump, boundary, bulk + jump + boundary)


# ---------------------------------------------------------------------------
# Recovery construction
# ---------------------------------------------------------------------------

def _support_bounds(template: JumpTemplate, extents):
    L = np.atleast_1d(np.asarray(extents, dtype=float))
    axes = template.tangential_axes
    if template.support is not None:
        return np.asarray(template.support, dtype=float)
    return np.array([[0.0, L[ax]] for ax in axes])


def _taper_factor(template: JumpTemplate, extents, xp, width):
    """Amplitude taper: 1 deep inside the support, linear ramp to 0 over
    ``width`` at every support edge strictly inside the box."""
    L = np.atleast_1d(np.asarray(extents, dtype=float))
    sup = _support_bounds(template, extents)
    fac = np.ones(xp.shape[0])
    if width <= 0.0:
        return fac
    for k, ax in enumerate(template.tangential_axes):
        lo, hi = sup[k]
        if lo > 1e-12 * L[ax]:
            fac = fac * np.clip((xp[:, k] - lo) / width, 0.0, 1.0)
        if hi < L[ax] * (1.0 - 1e-12):
            fac = fac * np.clip((hi - xp[:, k]) / width, 0.0, 1.0)
    return fac


def reference_sigma(template: JumpTemplate, op, f, psi, eps,
                    extents, n_probe: int = 129) -> float:
    """Smallest core half-width over the declared (untapered) jump support;
    the grid rule resolves this width."""
    n = template.dim
    normal = np.zeros(n)
    normal[template.plane_axis] = 1.0
    if n == 1:
        jv = template.jump_on_plane(np.zeros((1, 0)))
        sig = sigma_jump(f, op, psi, eps, jv[0], normal)
        return float(sig)
    sup = _support_bounds(template, extents)
    axes_pts = [np.linspace(lo, hi, n_probe) for lo, hi in sup]
    mesh = np.meshgrid(*axes_pts, indexing="ij")
    xp = np.stack([m.ravel() for m in mesh], axis=-1)
    jv = template.jump_on_plane(xp)
    norms = np.linalg.norm(jv, axis=-1)
    active = norms > 0.0
    if not np.any(active):
        raise ValueError("template jump vanishes on its entire support")
    sig = sigma_jump(f, op, psi, eps, jv[active], normal)
    return float(np.min(sig))


def build_recovery(template: JumpTemplate, op: FirstOrderOperator,
                   f: BulkDensity, params: EpsParams, grid: Grid,
                   taper_width: Optional[float] = None,
                   check_resolution: bool = True) -> GridField:
    """Nodal sampling of the recovery pair (u, v) for one eps.

    Requires the jump plane to lie on a grid plane and (unless the caller
    only wants a solver initializer) the normal spacing to resolve the
    core: h_normal <= sigma_min / 4.
    """
    n = template.dim
    if grid.dim != n:
        raise ValueError("grid dimension does not match template")
    eps = params.eps
    axis = template.plane_axis
    c = template.plane_c
    h = grid.h
    if abs(c / h[axis] - round(c / h[axis])) > 1e-9:
        raise ValueError("jump plane must lie on a grid plane")

    sig_ref = reference_sigma(template, op, f, params.psi, eps, grid.extents)
    if check_resolution and h[axis] > sig_ref / 4.0 * (1.0 + 1e-9):
        need = int(np.ceil(grid.extents[axis] / (sig_ref / 4.0)))
        raise ValueError(
            f"grid does not resolve the core width: need >= {need} cells "
            f"along axis {axis} (h <= {sig_ref / 4.0:.3e})"
        )

    profile = optimal_profile(params.gamma, params.q, params.psi, eps)
    rho, tau = profile.rho, profile.tau

    X = grid.node_coords
    t = X[:, axis] - c
    axes = template.tangential_axes
    xp = X[:, axes] if axes else np.zeros((X.shape[0], 0))

    sup = _support_bounds(template, grid.extents)
    inside = np.ones(X.shape[0], dtype=bool)
    d_tan2 = np.zeros(X.shape[0])
    for k in range(len(axes)):
        lo, hi = sup[k]
        inside &= (xp[:, k] >= lo - 1e-12) & (xp[:, k] <= hi + 1e-12)
        gap = np.maximum(np.maximum(lo - xp[:, k], xp[:, k] - hi), 0.0)
        d_tan2 += gap * gap

    if taper_width is None:
        # fixed (eps-independent) closure width; only support edges strictly
        # inside the box are tapered, so consistent templates are untouched
        span = float(np.min(sup[:, 1] - sup[:, 0])) if len(axes) else 0.0
        taper_width = span / 4.0 if len(axes) else 0.0
    taper = _taper_factor(template, grid.extents, xp, taper_width)

    plane_pts = X.copy()
    plane_pts[:, axis] = c
    j_raw = template.jump(plane_pts)
    mask = np.where(inside, taper, 0.0)
    j_eff = j_raw * mask[:, None]

    normal = np.zeros(n)
    normal[axis] = 1.0
    sigma = sigma_jump(f, op, params.psi, eps, j_eff, normal)
    sigma = np.where(np.linalg.norm(j_eff, axis=-1) > 0.0, sigma, 0.0)

    # ---- phase field ----
    v = np.full(X.shape[0], 1.0 - rho)
    has_core = sigma > 0.0
    core = has_core & (np.abs(t) < sigma)
    band = has_core & ~core & (np.abs(t) - sigma <= tau)
    v[band] = profile.w(np.abs(t[band]) - sigma[band])
    v[core] = 0.0
    dist = np.sqrt(d_tan2 + t * t)
    cap = ~has_core & (dist <= tau)
    v[cap] = profile.w(dist[cap])
    np.clip(v, 0.0, 1.0, out=v)

    # ---- displacement ----
    delta = template.smooth_plus(X) - template.smooth_minus(X)
    heav = (t > 0.0).astype(float) + 0.5 * (t == 0.0)
    u = template.smooth_minus(X) + (mask * heav)[:, None] * delta

    if np.any(core):
        idx = np.where(core)[0]
        x_bot = X[idx].copy()
        x_bot[:, axis] = c - sigma[idx]
        x_top = X[idx].copy()
        x_top[:, axis] = c + sigma[idx]
        u_bot = template.smooth_minus(x_bot)
        u_top = template.smooth_minus(x_top) + mask[idx, None] * (
            template.smooth_plus(x_top) - template.smooth_minus(x_top))
        lam = ((t[idx] + sigma[idx]) / (2.0 * sigma[idx]))[:, None]
        u[idx] = u_bot + lam * (u_top - u_bot)

    return GridField(grid, u, v)


def recommended_grid(template: JumpTemplate, op, f, psi, eps, extents,
                     factor: int = 4, max_cells: int = 4096) -> Grid:
    """Uniform grid with h <= sigma_min/factor on every axis and the jump
    plane on a grid plane."""
    n = template.dim
    L = np.atleast_1d(np.asarray(extents, dtype=float))
    sig = reference_sigma(template, op, f, psi, eps, extents)
    target = sig / factor
    cells = []
    for ax in range(n):
        m = max(1, int(np.ceil(L[ax] / target)))
        if ax == template.plane_axis:
            frac = template.plane_c / L[ax]
            while m <= max_cells and abs(m * frac - round(m * frac)) > 1e-9:
                m += 1
            if m > max_cells:
                raise ValueError("cannot align the jump plane with a grid plane")
        cells.append(m)
        if m > max_cells:
            raise ValueError(
                f"axis {ax} needs {m} cells > cap {max_cells}; enlarge the cap"
            )
    return Grid(n, tuple(L), tuple(cells))


@dataclass(frozen=True)
class LimsupRow:
    eps: float
    breakdown: EnergyBreakdown
    d_limit: float
    ratio: float


def limsup_check(template: JumpTemplate, op: FirstOrderOperator, f: BulkDensity,
                 gamma: float, q: float, psi: PsiSpec,
                 eps_list, eta_rule: Callable[[float], float],
                 extents, grid_factor: int = 4, quad_res: int = 24,
                 taper_width: Optional[float] = None,
                 max_cells: int = 4096) -> List[LimsupRow]:
    """Evaluate the discrete energy of the recovery pair against the limit
    energy for a decreasing list of eps."""
    eps_arr = list(eps_list)
    if any(b >= a for a, b in zip(eps_arr, eps_arr[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    d_lim = limit_energy(template, op, f, gamma, q, psi, extents, quad_res).total
    rows = []
    for eps in eps_arr:
        params = EpsParams(eps, eta_rule(eps), gamma, q, psi)
        grid = recommended_grid(template, op, f, psi, eps, extents,
                                factor=grid_factor, max_cells=max_cells)
        fieldv = build_recovery(template, op, f, params, grid,
                                taper_width=taper_width)
        bd = assemble_energy(grid, fieldv, params, op, f)
        rows.append(LimsupRow(eps, bd, d_lim, bd.total / d_lim))
    return rows
