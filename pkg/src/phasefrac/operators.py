"""Constant-coefficient symmetric first-order operators and their symbols.

An operator acts on displacements through its endomorphism ``A`` of the
space of symmetric n x n matrices: applying the operator to u gives
``A(e(u))`` with ``e(u)`` the linearized strain.  Storing ``A`` (rather
than per-axis coefficient matrices) makes the symmetry constraint hold by
construction.

The Fourier symbol ``v -> A(v (.) z)`` (with ``(.)`` the symmetrized
outer product) decides ellipticity: injectivity over real unit z is
R-ellipticity, over complex unit z C-ellipticity.  Classification here is
sampling-based evidence plus deterministic witnesses for the built-in
operators; it is not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from .fields import PolyField

__all__ = [
    "FirstOrderOperator",
    "EllipticityReport",
    "KernelField",
    "sym_dim",
    "sym_to_vec",
    "vec_to_sym",
    "sym_outer",
    "full_strain",
    "deviatoric",
    "operator_from_matrix",
    "operator_from_name",
    "classify_ellipticity",
    "kappa_bounds",
    "kernel_residual",
]

_SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Orthonormal basis of Sym(n): diagonal units first, then off-diagonal units
# scaled by sqrt(2), lexicographic.  sym_to_vec is a Frobenius isometry.
# ---------------------------------------------------------------------------

def sym_dim(n: int) -> int:
    return n * (n + 1) // 2


def _offdiag_pairs(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def sym_to_vec(m):
    """Coordinates of symmetric matrices (..., n, n) in the fixed basis."""
    m = np.asarray(m)
    n = m.shape[-1]
    cols = [m[..., i, i] for i in range(n)]
    cols += [_SQRT2 * m[..., i, j] for (i, j) in _offdiag_pairs(n)]
    return np.stack(cols, axis=-1)


def vec_to_sym(w, n: int):
    w = np.asarray(w)
    out = np.zeros(w.shape[:-1] + (n, n), dtype=w.dtype)
    for i in range(n):
        out[..., i, i] = w[..., i]
    for k, (i, j) in enumerate(_offdiag_pairs(n)):
        out[..., i, j] = w[..., n + k] / _SQRT2
        out[..., j, i] = w[..., n + k] / _SQRT2
    return out


def sym_outer(v, z):
    """Symmetrized outer product (v (.) z)_jk = (v_j z_k + v_k z_j) / 2.

    Bilinear, no conjugation: the complex case is the plain extension used
    by the symbol map.
    """
    v = np.asarray(v)
    z = np.asarray(z)
    outer = v[..., :, None] * z[..., None, :]
    return 0.5 * (outer + np.swapaxes(outer, -1, -2))


@dataclass(frozen=True)
class FirstOrderOperator:
    """Operator encoded by a d x d real matrix acting on Sym(n) coordinates."""

    dim: int
    a_matrix: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        n = self.dim
        if n < 1:
            raise ValueError("dim must be >= 1")
        d = sym_dim(n)
        a = np.asarray(self.a_matrix, dtype=float)
        if a.shape != (d, d):
            raise ValueError(f"a_matrix must be {d}x{d} for dim {n}")
        if not np.all(np.isfinite(a)):
            raise ValueError("a_matrix entries must be finite")
        object.__setattr__(self, "a_matrix", a)

    # -- action on symmetric matrices (batched, complex allowed) --------
    def apply(self, xi):
        w = sym_to_vec(xi)
        return vec_to_sym(w @ self.a_matrix.T, self.dim)

    def apply_adjoint(self, xi):
        w = sym_to_vec(xi)
        return vec_to_sym(w @ self.a_matrix, self.dim)

    def symbol(self, z, v):
        """A(v (.) z) for complex vectors v, z of length dim."""
        z = np.asarray(z)
        v = np.asarray(v)
        if z.shape[-1] != self.dim or v.shape[-1] != self.dim:
            raise ValueError("dimension mismatch in symbol arguments")
        return self.apply(sym_outer(v, z))

    def tensor(self, w, z):
        """Real tensor product A(w (.) z); agrees with symbol on real input."""
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim or w.shape[-1] != self.dim:
            raise ValueError("dimension mismatch in tensor arguments")
        return self.apply(sym_outer(w, z))


def full_strain(n: int) -> FirstOrderOperator:
    """Identity endomorphism: the operator is the symmetrized gradient."""
    return FirstOrderOperator(n, np.eye(sym_dim(n)), name="full-strain")


def deviatoric(n: int) -> FirstOrderOperator:
    """xi -> xi - (tr xi / n) Id, the trace-free part of the strain."""
    d = sym_dim(n)
    a = np.eye(d)
    a[:n, :n] -= np.full((n, n), 1.0 / n)
    return FirstOrderOperator(n, a, name="deviatoric")


def operator_from_matrix(n: int, entries) -> FirstOrderOperator:
    """Custom operator from d*d entries given row-major in the fixed basis."""
    d = sym_dim(n)
    a = np.asarray(entries, dtype=float).reshape(d, d)
    return FirstOrderOperator(n, a, name="custom")


def operator_from_name(name: str, dim: int) -> FirstOrderOperator:
    if name == "full-strain":
        return full_strain(dim)
    if name == "deviatoric":
        return deviatoric(dim)
    raise ValueError(f"unknown operator name {name!r}")


# ---------------------------------------------------------------------------
# Ellipticity classification
# ---------------------------------------------------------------------------

@dataclass
class EllipticityReport:
    r_elliptic: bool
    c_elliptic: bool
    min_sigma_real: float
    min_sigma_complex: float
    witness: Optional[Tuple[np.ndarray, np.ndarray]]
    samples: int
    tol: float


def _symbol_matrix_stack(op: FirstOrderOperator, zs):
    """Matrices of v -> A(v (.) z) for a stack of z, shape (N, d, n)."""
    n = op.dim
    eye = np.eye(n)
    # columns j: vec(A(e_j (.) z))
    basis_prod = sym_outer(eye[None, :, :], zs[:, None, :])  # (N, n, n, n)
    cols = sym_to_vec(basis_prod)  # (N, n, d)
    return np.einsum("ab,njb->nja", op.a_matrix, cols).swapaxes(-1, -2)


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


_BUILTIN_WITNESSES = {
    ("deviatoric", 2): (np.array([1.0, 1.0j]), np.array([1.0, -1.0j])),
}


def classify_ellipticity(
    op: FirstOrderOperator,
    n_samples: int = 10_000,
    tol: float = 1e-8,
    seed: int = 0,
) -> EllipticityReport:
    """Sampled minimum singular value of the symbol over unit z, real and
    complex, plus deterministic witness checks for the built-ins.

    A sampled positive minimum is evidence of ellipticity, not a proof; a
    witness below ``tol`` is a certificate of failure.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = op.dim
    rng = np.random.default_rng(seed)

    z_real = _unit_rows(rng.standard_normal((n_samples, n)))
    sig_r = np.linalg.svd(_symbol_matrix_stack(op, z_real), compute_uv=False)
    min_sigma_real = float(sig_r[:, -1].min())

    # complex sphere: 2n Gaussians per sample, normalized
    g = rng.standard_normal((n_samples, 2 * n))
    z_cplx = _unit_rows(g[:, :n] + 1j * g[:, n:])
    mats = _symbol_matrix_stack(op, z_cplx)
    u_svd, s_svd, vh = np.linalg.svd(mats)
    idx = int(np.argmin(s_svd[:, -1]))
    min_sigma_complex = float(s_svd[:, -1].min())

    witness = None
    key = (op.name, n)
    if key in _BUILTIN_WITNESSES:
        v_w, z_w = _BUILTIN_WITNESSES[key]
        res = _witness_residual(op, v_w, z_w)
        if res < tol:
            witness = (v_w.copy(), z_w.copy())
            min_sigma_complex = min(min_sigma_complex, res)
    if witness is None and min_sigma_complex < tol:
        # right singular vector of the worst sample certifies the failure
        v_w = vh[idx].conj()[-1]
        witness = (v_w, z_cplx[idx])

    c_elliptic = witness is None and min_sigma_complex >= tol
    return EllipticityReport(
        # C-ellipticity implies R-ellipticity; keep the flags consistent
        # even if the finite real sample happened to dip below tol.
        r_elliptic=c_elliptic or min_sigma_real >= tol,
        c_elliptic=c_elliptic,
        min_sigma_real=min_sigma_real,
        min_sigma_complex=min_sigma_complex,
        witness=witness,
        samples=n_samples,
        tol=tol,
    )


def _witness_residual(op, v, z):
    num = np.linalg.norm(op.symbol(z, v))
    return float(num / (np.linalg.norm(v) * np.linalg.norm(z)))


# ---------------------------------------------------------------------------
# Norm-equivalence constants kappa_1 <= |A(w (.) z)| / (|w| |z|) <= kappa_2
# ---------------------------------------------------------------------------

def kappa_bounds(
    op: FirstOrderOperator,
    n_samples: int = 4096,
    seed: int = 0,
    refine: bool = True,
) -> Tuple[float, float]:
    """Sampled min/max of |A(w (.) z)| over real unit w, z, refined by a
    local search from the best samples.  Meaningful only when the operator
    is R-elliptic (otherwise kappa_1 ~ 0)."""
    n = op.dim
    rng = np.random.default_rng(seed)
    w = _unit_rows(rng.standard_normal((n_samples, n)))
    z = _unit_rows(rng.standard_normal((n_samples, n)))
    vals = np.linalg.norm(sym_to_vec(op.tensor(w, z)), axis=-1)
    i_min = int(np.argmin(vals))
    i_max = int(np.argmax(vals))
    k1, k2 = float(vals[i_min]), float(vals[i_max])

    if refine and n > 1:
        def objective(x, sign):
            ww, zz = x[:n], x[n:]
            nw, nz = np.linalg.norm(ww), np.linalg.norm(zz)
            if nw == 0.0 or nz == 0.0:
                return 0.0 if sign > 0 else np.inf
            val = np.linalg.norm(sym_to_vec(op.tensor(ww / nw, zz / nz)))
            return sign * val

        for sign, x0 in ((1.0, np.r_[w[i_min], z[i_min]]),
                         (-1.0, np.r_[w[i_max], z[i_max]])):
            res = optimize.minimize(objective, x0, args=(sign,),
                                    method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-12,
                                             "maxiter": 4000})
            if sign > 0:
                k1 = min(k1, float(res.fun))
            else:
                k2 = max(k2, float(-res.fun))
    return k1, k2


# ---------------------------------------------------------------------------
# Kernel fields and residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelField:
    """Candidate element of the operator kernel, with exact strain."""

    kind: str  # rigid-motion | conformal-killing | custom-polynomial
    poly: PolyField

    @staticmethod
    def rigid(M=None, b=None, dim=None):
        return KernelField("rigid-motion", PolyField.rigid_motion(M, b, dim))

    @staticmethod
    def conformal(a, M=None, b=None):
        return KernelField("conformal-killing", PolyField.conformal_killing(a, M, b))

    @staticmethod
    def custom(poly: PolyField):
        return KernelField("custom-polynomial", poly)


def kernel_residual(
    op: FirstOrderOperator,
    fld: KernelField,
    n_points: int = 125,
    box: float = 1.0,
    seed: int = 0,
) -> float:
    """max over sampled points of |A(e(field)(x))|, from the analytic
    symmetric gradient (degree <= 2 fields, never finite differences)."""
    if fld.kind == "conformal-killing" and op.dim == 2:
        raise ValueError(
            "conformal Killing check rejected in dim 2: the deviatoric "
            "kernel there is infinite-dimensional (holomorphic fields)"
        )
    if fld.poly.dim != op.dim:
        raise ValueError("field dimension does not match operator dimension")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, size=(n_points, op.dim))
    strains = fld.poly.sym_grad(x)
    vals = np.linalg.norm(sym_to_vec(op.apply(strains)), axis=-1)
    return float(vals.max())
